use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anb::data::{collect, split, AccuracyOracle, DeviceOracle, MetricDataset, MetricOracle, Split};
use anb::optim::{
    pareto_front, simulate_runs, write_curve_csv, write_pareto_csv, write_trajectory_csv,
    Objective, PerfMetric, SurrogateEvaluator,
};
use anb::proxysearch::{
    accuracies, grid_search, speedup, validate_scheme, write_table_csv, SearchSummary,
    SyntheticOracle,
};
use anb::surrogate::{evaluate_predictions, tune, EvalReport, Gbdt};
use anb::{seeded_rng, Architecture};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::CliError;

type Result<T> = std::result::Result<T, CliError>;

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("creating {}: {e}", dir.display())))
}

fn create_file(path: &Path) -> Result<BufWriter<fs::File>> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(format!("creating {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create_file(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Io(e.to_string()))?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn oracle(cfg: &RunConfig) -> SyntheticOracle {
    SyntheticOracle::new(cfg.space.clone(), cfg.oracle.clone())
}

#[derive(Serialize)]
struct ValidationSummary {
    tau: f64,
    m: usize,
    repeats: usize,
    seeds: Vec<u64>,
}

pub fn proxy_search(cfg: &RunConfig, t_spec: Option<f64>) -> Result<()> {
    let p = &cfg.proxy;
    let t_spec = t_spec.unwrap_or(p.t_spec);
    if t_spec.is_nan() || t_spec <= 0.0 {
        return Err(CliError::Config(format!(
            "t_spec must be positive, got {t_spec}"
        )));
    }
    let oracle = oracle(cfg);
    let models = cfg
        .space
        .uniform_grid(p.n_models, p.pool, &mut seeded_rng(cfg.seed))
        .map_err(|e| CliError::Config(e.to_string()))?;
    let ref_accs = accuracies(&models, &p.reference, &oracle, p.reference_seed)?;
    log::info!(
        "searching {} schemes on {} models",
        p.grid.schemes().len(),
        models.len()
    );
    let result = grid_search(
        &p.grid,
        &models,
        &ref_accs,
        &oracle,
        t_spec,
        p.early_stop,
        p.train_seed,
    )?;
    let summary = SearchSummary {
        best_scheme: result.best.scheme,
        tau: result.best.tau,
        t_p: result.best.t_p,
        speedup_vs_reference: speedup(
            &result.best.scheme,
            &p.reference,
            &models,
            &oracle,
            p.train_seed,
        )?,
    };

    let dir = cfg.out.join("proxy");
    create_dir(&dir)?;
    let mut w = create_file(&dir.join("table.csv"))?;
    write_table_csv(&result, &mut w)?;
    w.flush()?;
    let mut w = create_file(&dir.join("models.txt"))?;
    for m in &models {
        writeln!(w, "{m}")?;
    }
    w.flush()?;
    write_json(&dir.join("summary.json"), &summary)?;

    if let Some(v) = p.validation {
        let report = validate_scheme(
            &cfg.space,
            &result.best.scheme,
            &p.reference,
            v.m,
            v.repeats,
            &models,
            &oracle,
            &mut seeded_rng(cfg.seed.wrapping_add(1)),
        )?;
        let mut w = csv::Writer::from_writer(create_file(&dir.join("validation.csv"))?);
        w.write_record(["arch", "proxy_mean", "reference_mean"])?;
        for r in &report.rows {
            w.write_record([
                r.arch.to_string(),
                r.proxy_mean.to_string(),
                r.reference_mean.to_string(),
            ])?;
        }
        w.flush()?;
        let vs = ValidationSummary {
            tau: report.tau,
            m: v.m,
            repeats: v.repeats,
            seeds: report.seeds,
        };
        write_json(&dir.join("validation.json"), &vs)?;
        log::info!("validation tau {:.4} on {} unseen models", vs.tau, v.m);
    }
    print_json(&summary)
}

pub fn collect_cmd(cfg: &RunConfig, n: Option<usize>) -> Result<()> {
    let c = &cfg.collect;
    let n = n.unwrap_or(c.n);
    let trainer = oracle(cfg);
    let acc = AccuracyOracle {
        trainer: &trainer,
        scheme: c.scheme,
        seed: c.train_seed,
    };
    let devices = c
        .devices
        .iter()
        .map(|d| {
            let model = c.device_model(&d.device).expect("checked by validate");
            DeviceOracle::new(cfg.space.clone(), model, d.metric).map_err(CliError::Config)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut oracles: Vec<&dyn MetricOracle> = Vec::new();
    if c.accuracy {
        oracles.push(&acc);
    }
    oracles.extend(devices.iter().map(|d| d as &dyn MetricOracle));

    let datasets = collect(&cfg.space, n, &oracles, &mut seeded_rng(cfg.seed))?;
    let dir = cfg.data_dir();
    create_dir(&dir)?;
    for ds in &datasets {
        let path = dir.join(format!("{}.jsonl", ds.name));
        ds.save(&path)
            .map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))?;
        log::info!("wrote {} records to {}", ds.len(), path.display());
    }
    Ok(())
}

/// Loads `name` and tags every record, keeping tags already in the file.
fn load_split(cfg: &RunConfig, name: &str) -> Result<MetricDataset> {
    let path = cfg.data_dir().join(format!("{name}.jsonl"));
    if !path.exists() {
        return Err(CliError::Input(format!(
            "dataset {} not found",
            path.display()
        )));
    }
    let mut ds =
        MetricDataset::load(&path, &cfg.space).map_err(|e| CliError::from(e).context(&path))?;
    if ds.name != name {
        return Err(CliError::Input(format!(
            "{} holds dataset {:?}, expected {name:?}",
            path.display(),
            ds.name
        )));
    }
    if ds.records.iter().any(|r| r.split.is_none()) {
        let s = split(&ds, cfg.surrogate.ratios, cfg.surrogate.split_seed)?;
        ds.apply_split(&s)?;
    }
    Ok(ds)
}

fn xy(cfg: &RunConfig, ds: &MetricDataset, s: Split) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let (x, y) = ds.xy(&cfg.space, s)?;
    if x.is_empty() {
        return Err(CliError::Input(format!("{} has no {s:?} records", ds.name)));
    }
    Ok((x, y))
}

fn model_path(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.model_dir().join(format!("{name}.json"))
}

fn save_model(cfg: &RunConfig, name: &str, model: &Gbdt, report: &EvalReport) -> Result<()> {
    let dir = cfg.model_dir();
    create_dir(&dir)?;
    let path = model_path(cfg, name);
    model
        .save(&path)
        .map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))?;
    write_json(&dir.join(format!("{name}.metrics.json")), report)?;
    log::info!(
        "{name}: test r2 {:?} tau {:?} mae {}",
        report.r2,
        report.tau,
        report.mae
    );
    Ok(())
}

fn dataset_names(cfg: &RunConfig, names: &[String]) -> Vec<String> {
    if names.is_empty() {
        cfg.surrogate.datasets.clone()
    } else {
        names.to_vec()
    }
}

pub fn fit(cfg: &RunConfig, names: &[String]) -> Result<()> {
    let names = dataset_names(cfg, names);
    let datasets = names
        .iter()
        .map(|n| load_split(cfg, n))
        .collect::<Result<Vec<_>>>()?;
    for ds in &datasets {
        let (x, y) = xy(cfg, ds, Split::Train)?;
        let (tx, ty) = xy(cfg, ds, Split::Test)?;
        let model = Gbdt::fit(&x, &y, &cfg.surrogate.fit, &ds.name)?;
        let report = model.evaluate(&tx, &ty)?;
        save_model(cfg, &ds.name, &model, &report)?;
    }
    Ok(())
}

pub fn tune_cmd(cfg: &RunConfig, names: &[String]) -> Result<()> {
    let s = &cfg.surrogate;
    let names = dataset_names(cfg, names);
    let datasets = names
        .iter()
        .map(|n| load_split(cfg, n))
        .collect::<Result<Vec<_>>>()?;
    for ds in &datasets {
        let (x, y) = xy(cfg, ds, Split::Train)?;
        let (vx, vy) = xy(cfg, ds, Split::Val)?;
        let (tx, ty) = xy(cfg, ds, Split::Test)?;
        let result = tune(
            (&x, &y),
            (&vx, &vy),
            &s.tune_grid,
            s.tune_budget,
            &ds.name,
            &mut seeded_rng(cfg.seed),
        )?;
        let model = Gbdt::fit(&x, &y, &result.best, &ds.name)?;
        let report = model.evaluate(&tx, &ty)?;
        save_model(cfg, &ds.name, &model, &report)?;
        write_json(
            &cfg.model_dir().join(format!("{}.tune.json", ds.name)),
            &result,
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct EvalOutput<'a> {
    dataset: &'a str,
    split: Split,
    n: usize,
    r2: Option<f64>,
    tau: Option<f64>,
    mae: f64,
}

pub fn eval(cfg: &RunConfig, name: &str, which: Split) -> Result<()> {
    let path = model_path(cfg, name);
    let model = Gbdt::load(&path).map_err(|e| CliError::from(e).context(&path))?;
    let ds = load_split(cfg, name)?;
    let (x, y) = xy(cfg, &ds, which)?;
    let pred = model.predict_batch(&x)?;
    let report = evaluate_predictions(&y, &pred)?;
    print_json(&EvalOutput {
        dataset: name,
        split: which,
        n: y.len(),
        r2: report.r2,
        tau: report.tau,
        mae: report.mae,
    })
}

fn load_model(cfg: &RunConfig, name: &str) -> Result<Gbdt> {
    let path = model_path(cfg, name);
    if !path.exists() {
        return Err(CliError::Input(format!(
            "model {} not found; run fit or tune first",
            path.display()
        )));
    }
    let model = Gbdt::load(&path).map_err(|e| CliError::from(e).context(&path))?;
    if model.feature_dim != cfg.space.feature_dim() {
        return Err(CliError::Input(format!(
            "{} expects {} features, the space has {}",
            path.display(),
            model.feature_dim,
            cfg.space.feature_dim()
        )));
    }
    Ok(model)
}

#[derive(Serialize)]
struct FinalIncumbent {
    optimizer: &'static str,
    mean: f64,
    std: f64,
}

pub fn simulate(cfg: &RunConfig) -> Result<()> {
    let m = &cfg.simulate;
    let evaluator = SurrogateEvaluator {
        space: cfg.space.clone(),
        accuracy: load_model(cfg, &m.accuracy)?,
        perf: match (&m.objective, &m.perf) {
            (Objective::Bi { .. }, Some(p)) => Some(load_model(cfg, p)?),
            _ => None,
        },
    };
    let dir = cfg.out.join("simulate");
    create_dir(&dir)?;
    let mut finals = Vec::new();
    let mut cloud = Vec::new();
    for spec in &m.optimizers {
        let sim = simulate_runs(
            spec,
            &cfg.space,
            &evaluator,
            &m.objective,
            m.budget,
            &m.seeds,
        )?;
        for t in &sim.trajectories {
            let mut w = create_file(&dir.join(format!("{}_seed{}.csv", spec.name(), t.seed)))?;
            write_trajectory_csv(t, &mut w)?;
            w.flush()?;
            cloud.extend(
                t.steps
                    .iter()
                    .filter_map(|s| s.perf.map(|p| (s.arch.clone(), s.accuracy, p))),
            );
        }
        let mut w = create_file(&dir.join(format!("{}_curve.csv", spec.name())))?;
        write_curve_csv(&sim.curve, &mut w)?;
        w.flush()?;
        let last = sim.curve.last().expect("budget is positive");
        finals.push(FinalIncumbent {
            optimizer: spec.name(),
            mean: last.mean_incumbent,
            std: last.std_incumbent,
        });
    }
    if let Objective::Bi { metric, .. } = m.objective {
        write_front(&dir.join("pareto.csv"), &cloud, metric)?;
    }
    print_json(&finals)
}

fn write_front(path: &Path, cloud: &[(Architecture, f64, f64)], metric: PerfMetric) -> Result<()> {
    let pts: Vec<(f64, f64)> = cloud.iter().map(|c| (c.1, c.2)).collect();
    let front = pareto_front(&pts, metric.direction())?;
    let rows: Vec<(Architecture, f64, f64)> = front.iter().map(|&i| cloud[i].clone()).collect();
    let mut w = create_file(path)?;
    write_pareto_csv(&rows, &mut w)?;
    w.flush()?;
    log::info!("{} of {} points on the front", rows.len(), cloud.len());
    Ok(())
}

#[derive(Deserialize)]
struct TrajectoryRow {
    #[allow(dead_code)]
    step: usize,
    arch: String,
    accuracy: f64,
    perf: Option<f64>,
}

/// Front over trajectory CSVs; defaults to every `*_seed*.csv` written by
/// `simulate`, read in file-name order.
pub fn pareto(cfg: &RunConfig, inputs: &[PathBuf], metric: Option<PerfMetric>) -> Result<()> {
    let metric = match (metric, &cfg.simulate.objective) {
        (Some(m), _) => m,
        (None, Objective::Bi { metric, .. }) => *metric,
        (None, Objective::Uni) => {
            return Err(CliError::Config(
                "pareto needs --metric or a bi-objective simulate section".into(),
            ))
        }
    };
    let mut files = inputs.to_vec();
    if files.is_empty() {
        let dir = cfg.out.join("simulate");
        let entries = fs::read_dir(&dir)
            .map_err(|e| CliError::Io(format!("reading {}: {e}", dir.display())))?;
        for entry in entries {
            let path = entry?.path();
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
            if name.contains("_seed") && name.ends_with(".csv") {
                files.push(path);
            }
        }
        files.sort();
        if files.is_empty() {
            return Err(CliError::Input(format!(
                "no trajectory files in {}",
                dir.display()
            )));
        }
    }
    let mut cloud = Vec::new();
    for path in &files {
        let mut r = csv::Reader::from_path(path).map_err(|e| CliError::from(e).context(path))?;
        for (i, row) in r.deserialize::<TrajectoryRow>().enumerate() {
            let row = row.map_err(|e| CliError::from(e).context(path))?;
            let at = || format!("{} row {}", path.display(), i + 1);
            let arch = cfg
                .space
                .parse_arch(&row.arch)
                .map_err(|e| CliError::Input(format!("{}: {e}", at())))?;
            let perf = row
                .perf
                .ok_or_else(|| CliError::Input(format!("{}: no perf value", at())))?;
            cloud.push((arch, row.accuracy, perf));
        }
    }
    if cloud.is_empty() {
        return Err(CliError::Input("trajectory files hold no rows".into()));
    }
    create_dir(&cfg.out)?;
    write_front(&cfg.out.join("pareto.csv"), &cloud, metric)
}
