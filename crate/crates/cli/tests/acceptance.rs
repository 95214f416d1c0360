//! Acceptance suite: one pass/fail line per criterion, nonzero exit if any
//! criterion fails. Run with `cargo test -p anb-cli --test acceptance`.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use anb::data::{split, DataError, Metric, MetricDataset, Split, SplitRatios};
use anb::metrics::{kendall_tau, r_squared};
use anb::optim::{
    pareto_front, Evaluator, Objective, OptimizerSpec, OracleEvaluator, PerfMetric, Reinforce,
};
use anb::proxysearch::{
    accuracies, grid_search, speedup, validate_scheme, SchemeGrid, SyntheticOracle,
    SyntheticOracleParams, TrainerOracle, TrainingScheme,
};
use anb::surrogate::{tune, FitConfig, Gbdt, SurrogateError, TuneGrid};
use anb::{seeded_rng, Architecture, SpaceDef};
use rand::Rng;

type Check = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Check + 'a>);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn repo() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// O(n^2) tau-b over explicit pairs.
fn pairwise_tau(xs: &[f64], ys: &[f64]) -> f64 {
    let (mut c, mut d, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..xs.len() {
        for j in i + 1..xs.len() {
            let (dx, dy) = (xs[i] - xs[j], ys[i] - ys[j]);
            match (dx == 0.0, dy == 0.0) {
                (true, true) => {}
                (true, false) => tx += 1,
                (false, true) => ty += 1,
                _ if (dx > 0.0) == (dy > 0.0) => c += 1,
                _ => d += 1,
            }
        }
    }
    (c - d) as f64 / (((c + d + tx) as f64) * ((c + d + ty) as f64)).sqrt()
}

/// O(n^2) weak-dominance filter, sorted and deduplicated.
fn pairwise_front(points: &[(f64, f64)], maximize: bool) -> Vec<(f64, f64)> {
    let ge = |a: f64, b: f64| if maximize { a >= b } else { a <= b };
    let gt = |a: f64, b: f64| if maximize { a > b } else { a < b };
    let mut front: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| {
            !points
                .iter()
                .any(|q| q.0 >= p.0 && ge(q.1, p.1) && (q.0 > p.0 || gt(q.1, p.1)))
        })
        .copied()
        .collect();
    front.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    front.dedup();
    front
}

fn c1_combinatorics() -> Check {
    let size = SpaceDef::default()
        .space_size()
        .map_err(|e| e.to_string())?;
    ensure(size == 78_364_164_096, format!("space_size = {size}"))?;
    let two = SpaceDef::with_blocks(2);
    let all = two.enumerate();
    let distinct: std::collections::HashSet<_> = all.iter().collect();
    ensure(
        all.len() == 1296 && distinct.len() == 1296 && two.space_size() == Ok(1296),
        format!(
            "2-block enumeration {} ({} distinct)",
            all.len(),
            distinct.len()
        ),
    )?;
    Ok(format!("space_size = {size}, 2-block enumeration = 1296"))
}

fn c2_kendall() -> Check {
    let mut rng = seeded_rng(2);
    for case in 0..1000 {
        let n = rng.random_range(2..120);
        let levels = rng.random_range(2..30u32);
        let xs: Vec<f64> = (0..n)
            .map(|_| f64::from(rng.random_range(0..levels)))
            .collect();
        let ys: Vec<f64> = (0..n)
            .map(|_| f64::from(rng.random_range(0..levels)))
            .collect();
        let want = pairwise_tau(&xs, &ys);
        match kendall_tau(&xs, &ys) {
            Ok(got) => ensure(got == want, format!("case {case}: {got} vs {want}"))?,
            Err(_) => ensure(
                want.is_nan(),
                format!("case {case}: error but oracle {want}"),
            )?,
        }
    }
    let hand: [(&[f64], &[f64], f64); 4] = [
        (&[1., 2., 3., 4.], &[1., 2., 3., 4.], 1.0),
        (&[1., 2., 3., 4.], &[4., 3., 2., 1.], -1.0),
        (&[1., 2., 3.], &[1., 3., 2.], 1.0 / 3.0),
        (&[1., 1., 2., 3.], &[1., 2., 2., 3.], 0.8),
    ];
    for (x, y, want) in hand {
        let got = kendall_tau(x, y).map_err(|e| e.to_string())?;
        ensure(
            (got - want).abs() <= 1e-9,
            format!("hand case {x:?}: {got} vs {want}"),
        )?;
    }
    Ok("1000 random vectors exact, 4 hand cases within 1e-9".into())
}

fn c3_surrogate() -> Check {
    let start = Instant::now();
    let space = SpaceDef::default();
    let mut ds = MetricDataset::load(repo().join("data/ANB-Acc.jsonl"), &space)
        .map_err(|e| e.to_string())?;
    ensure(
        ds.len() == 5200,
        format!("committed dataset has {} records", ds.len()),
    )?;
    // seeds and split match configs/default.toml
    let s = split(&ds, SplitRatios::default(), 11).map_err(|e| e.to_string())?;
    ds.apply_split(&s).map_err(|e| e.to_string())?;
    let xy = |sp| ds.xy(&space, sp).map_err(|e: DataError| e.to_string());
    let (x, y) = xy(Split::Train)?;
    let (vx, vy) = xy(Split::Val)?;
    let (tx, ty) = xy(Split::Test)?;
    let result = tune(
        (&x, &y),
        (&vx, &vy),
        &TuneGrid::default(),
        20,
        "ANB-Acc",
        &mut seeded_rng(7),
    )
    .map_err(|e| e.to_string())?;
    let model = Gbdt::fit(&x, &y, &result.best, "ANB-Acc").map_err(|e| e.to_string())?;
    let pred = model.predict_batch(&tx).map_err(|e| e.to_string())?;
    let tau = kendall_tau(&ty, &pred).map_err(|e| e.to_string())?;
    let r2 = r_squared(&ty, &pred).map_err(|e| e.to_string())?;
    let took = start.elapsed();
    let msg = format!(
        "test tau {tau:.4} (>= 0.90), R2 {r2:.4} (>= 0.95), {:.0} s (<= 300 s)",
        took.as_secs_f64()
    );
    ensure(
        tau >= 0.90 && r2 >= 0.95 && took <= Duration::from_secs(300),
        msg.clone(),
    )?;
    Ok(msg)
}

struct ProxySetup {
    oracle: SyntheticOracle,
    models: Vec<Architecture>,
    reference: TrainingScheme,
    ref_accs: Vec<f64>,
}

/// Search set-up of configs/default.toml.
fn proxy_setup() -> ProxySetup {
    let space = SpaceDef::default();
    let oracle = SyntheticOracle::new(space.clone(), SyntheticOracleParams::default());
    let models = space
        .uniform_grid(20, 2000, &mut seeded_rng(7))
        .expect("grid");
    let reference = TrainingScheme::reference();
    let ref_accs = accuracies(&models, &reference, &oracle, 1).expect("reference runs");
    ProxySetup {
        oracle,
        models,
        reference,
        ref_accs,
    }
}

fn c4_grid_search(p: &ProxySetup) -> Check {
    let g = SchemeGrid::default();
    // independent enumeration of the grid
    let mut schemes = Vec::new();
    for &b in &g.batch_size {
        for &e in &g.epochs {
            for &es in &g.resize_start {
                for &ef in &g.resize_finish {
                    for &rs in &g.res_start {
                        for &rf in &g.res_finish {
                            if let Ok(s) = TrainingScheme::new(b, e, es, ef, rs, rf) {
                                schemes.push(s);
                            }
                        }
                    }
                }
            }
        }
    }
    let rows: Vec<(TrainingScheme, f64, f64)> = schemes
        .iter()
        .map(|s| {
            let out: Vec<_> = p
                .models
                .iter()
                .map(|a| p.oracle.evaluate(a, s, 0).unwrap())
                .collect();
            let accs: Vec<f64> = out.iter().map(|o| o.accuracy).collect();
            let t_p = out.iter().map(|o| o.train_hours).sum::<f64>() / out.len() as f64;
            (*s, pairwise_tau(&accs, &p.ref_accs), t_p)
        })
        .collect();
    let mut checked = 0;
    for t_spec in [3.0, 1.0, 0.6, f64::INFINITY] {
        let mut want: Option<&(TrainingScheme, f64, f64)> = None;
        for r in rows.iter().filter(|r| r.2 <= t_spec) {
            if want.is_none_or(|w| r.1 > w.1 || (r.1 == w.1 && r.2 < w.2)) {
                want = Some(r);
            }
        }
        let got = grid_search(&g, &p.models, &p.ref_accs, &p.oracle, t_spec, None, 0);
        match (want, got) {
            (Some(w), Ok(res)) => {
                ensure(
                    res.best.scheme == w.0,
                    format!("t_spec {t_spec}: scheme differs"),
                )?;
                ensure(
                    (res.best.tau - w.1).abs() <= 1e-12,
                    format!("t_spec {t_spec}: tau"),
                )?;
                ensure(
                    (res.best.t_p - w.2).abs() <= 1e-12,
                    format!("t_spec {t_spec}: t_p"),
                )?;
                ensure(
                    res.best.feasible && res.best.t_p <= t_spec,
                    "infeasible best",
                )?;
                ensure(res.table.len() == schemes.len(), "table size")?;
                checked += 1;
            }
            (None, Err(_)) => checked += 1,
            (w, g) => {
                return Err(format!(
                    "t_spec {t_spec}: oracle {w:?} vs search {:?}",
                    g.map(|r| r.best.id)
                ))
            }
        }
    }
    Ok(format!(
        "{} schemes, {checked} budgets match brute force",
        schemes.len()
    ))
}

fn c5_validation(p: &ProxySetup) -> Check {
    let best = grid_search(
        &SchemeGrid::default(),
        &p.models,
        &p.ref_accs,
        &p.oracle,
        3.0,
        None,
        0,
    )
    .map_err(|e| e.to_string())?
    .best;
    let report = validate_scheme(
        &SpaceDef::default(),
        &best.scheme,
        &p.reference,
        120,
        3,
        &p.models,
        &p.oracle,
        &mut seeded_rng(8),
    )
    .map_err(|e| e.to_string())?;
    let up =
        speedup(&best.scheme, &p.reference, &p.models, &p.oracle, 0).map_err(|e| e.to_string())?;
    let msg = format!(
        "validation tau {:.4} (>= 0.90), speedup {up:.2}x (>= 3)",
        report.tau
    );
    ensure(report.tau >= 0.90 && up >= 3.0, msg.clone())?;
    Ok(msg)
}

fn c6_optimizers() -> Check {
    let space = SpaceDef::default();
    let ev = OracleEvaluator {
        oracle: SyntheticOracle::new(space.clone(), SyntheticOracleParams::default()),
        perf: None,
    };
    let seeds = [0u64, 1, 2, 3, 4];
    let finals = |spec: &OptimizerSpec| -> Result<Vec<f64>, String> {
        seeds
            .iter()
            .map(|&s| {
                let a = spec
                    .run(&space, &ev, &Objective::Uni, 2000, s)
                    .map_err(|e| e.to_string())?;
                let b = spec
                    .run(&space, &ev, &Objective::Uni, 2000, s)
                    .map_err(|e| e.to_string())?;
                ensure(a == b, format!("{} seed {s} not reproducible", spec.name()))?;
                Ok(a.final_incumbent().unwrap())
            })
            .collect()
    };
    let rs = finals(&OptimizerSpec::Random)?;
    let mut parts = vec![format!("RS {:.5}", mean(&rs))];
    for spec in [OptimizerSpec::evolution(), OptimizerSpec::reinforce()] {
        let other = finals(&spec)?;
        let diffs: Vec<f64> = other.iter().zip(&rs).map(|(o, r)| o - r).collect();
        // one-sided paired t bound at 95% with 4 degrees of freedom
        let m = mean(&diffs);
        let sd =
            (diffs.iter().map(|d| (d - m).powi(2)).sum::<f64>() / (diffs.len() - 1) as f64).sqrt();
        let lower = m - 2.132 * sd / (diffs.len() as f64).sqrt();
        parts.push(format!(
            "{} {:.5} (paired lower bound {lower:.5})",
            spec.name(),
            mean(&other)
        ));
        ensure(mean(&other) >= mean(&rs) && lower > 0.0, parts.join(", "))?;
    }
    Ok(parts.join(", "))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn c7_reinforce_toy() -> Check {
    let space = SpaceDef::with_blocks(1);
    let best: Architecture = "e4k5l2se1"
        .parse()
        .map_err(|e: anb::archspace::SpaceError| e.to_string())?;
    let mut policy = Reinforce::new(&space, 1.0, 0.9).map_err(|e| e.to_string())?;
    let mut rng = seeded_rng(2024);
    let mut reached = None;
    for step in 0..3000 {
        let (arch, choices) = policy.sample(&mut rng);
        policy.update(&choices, if arch == best { 1.0 } else { 0.0 });
        for (d, p) in policy.policy().iter().enumerate() {
            let s: f64 = p.iter().sum();
            ensure(
                (s - 1.0).abs() <= 1e-12,
                format!("step {step} decision {d} sums to {s}"),
            )?;
        }
        if policy.probability(&best).map_err(|e| e.to_string())? >= 0.9 {
            reached = Some(step + 1);
            break;
        }
    }
    let steps = reached.ok_or("mass on the optimum stayed below 0.9 for 3000 steps")?;
    Ok(format!(
        "mass >= 0.9 after {steps} steps; sums within 1e-12"
    ))
}

fn c8_pareto() -> Check {
    let space = SpaceDef::with_blocks(2);
    let archs = space.enumerate();
    let mut sizes = Vec::new();
    for (device, metric) in [
        ("A100", PerfMetric::Throughput),
        ("ZCU", PerfMetric::Latency),
    ] {
        let ev = OracleEvaluator {
            oracle: SyntheticOracle::new(space.clone(), SyntheticOracleParams::default()),
            perf: Some((anb::data::DeviceModel::preset(device).unwrap(), metric)),
        };
        let pts: Vec<(f64, f64)> = archs
            .iter()
            .map(|a| ev.evaluate(a).map(|e| (e.accuracy, e.perf.unwrap())))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        let got: Vec<(f64, f64)> = pareto_front(&pts, metric.direction())
            .map_err(|e| e.to_string())?
            .iter()
            .map(|&i| pts[i])
            .collect();
        let want = pairwise_front(&pts, metric == PerfMetric::Throughput);
        ensure(
            got == want,
            format!("{device} front differs: {} vs {}", got.len(), want.len()),
        )?;
        sizes.push(format!("{device}-{metric:?} {}", got.len()));
    }
    Ok(format!(
        "1296 points, fronts equal oracle ({})",
        sizes.join(", ")
    ))
}

fn c9_persistence() -> Check {
    let space = SpaceDef::default();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let src = repo().join("data/ANB-A100-Thr.jsonl");
    let ds = MetricDataset::load(&src, &space).map_err(|e| e.to_string())?;
    let copy = dir.path().join("ANB-A100-Thr.jsonl");
    ds.save(&copy).map_err(|e| e.to_string())?;
    ensure(
        fs::read(&src).ok() == fs::read(&copy).ok(),
        "dataset bytes changed on resave",
    )?;
    ensure(
        MetricDataset::load(&copy, &space).ok().as_ref() == Some(&ds),
        "dataset roundtrip",
    )?;

    let (x, y): (Vec<Vec<f64>>, Vec<f64>) = ds
        .records
        .iter()
        .take(1500)
        .map(|r| (space.encode(&r.arch).unwrap(), r.value))
        .unzip();
    let cfg = FitConfig {
        n_trees: 150,
        subsample_rows: 0.8,
        seed: 3,
        ..Default::default()
    };
    let model = Gbdt::fit(&x, &y, &cfg, ds.name.as_str()).map_err(|e| e.to_string())?;
    let path = dir.path().join("model.json");
    model.save(&path).map_err(|e| e.to_string())?;
    let back = Gbdt::load(&path).map_err(|e| e.to_string())?;
    let mut rng = seeded_rng(99);
    for _ in 0..1000 {
        let a = space.sample_uniform(&mut rng);
        let f = space.encode(&a).unwrap();
        ensure(
            model.predict(&f).unwrap().to_bits() == back.predict(&f).unwrap().to_bits(),
            format!("prediction differs on {a}"),
        )?;
    }
    let text = fs::read_to_string(&path).map_err(|e| e.to_string())?;
    ensure(back.to_json() == text, "model bytes changed on resave")?;

    ensure(
        matches!(
            Gbdt::from_json(&text[..text.len() / 2]),
            Err(SurrogateError::Truncated(_))
        ),
        "truncated model not reported",
    )?;
    let wrong = text.replacen("\"format_version\":1", "\"format_version\":2", 1);
    ensure(
        matches!(Gbdt::from_json(&wrong), Err(SurrogateError::Version { .. })),
        "model version mismatch not reported",
    )?;
    let raw = fs::read_to_string(&src).map_err(|e| e.to_string())?;
    let bad = raw.replacen("\"schema_version\":1", "\"schema_version\":2", 1);
    ensure(
        matches!(
            MetricDataset::read_jsonl(bad.as_bytes(), &space),
            Err(DataError::Version { found: 2 })
        ),
        "dataset version mismatch not reported",
    )?;
    let cut: String = raw.lines().take(10).map(|l| format!("{l}\n")).collect();
    ensure(
        matches!(
            MetricDataset::read_jsonl(cut.as_bytes(), &space),
            Err(DataError::Parse { .. })
        ),
        "truncated dataset not reported",
    )?;
    ensure(ds.metric == Metric::Thr, "dataset metric")?;
    Ok("model and dataset roundtrips identical over 1000 probes; corruption reported".into())
}

fn snapshot(root: &Path, out: &mut Vec<(PathBuf, Vec<u8>)>) {
    for e in fs::read_dir(root).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            snapshot(&p, out);
        } else {
            out.push((p.clone(), fs::read(&p).unwrap()));
        }
    }
}

fn c10_cli() -> Check {
    let cfg = repo().join("configs/smoke.toml");
    let run = || -> Result<Vec<(PathBuf, Vec<u8>)>, String> {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        for sub in ["collect", "fit", "simulate", "pareto"] {
            let o = Command::new(env!("CARGO_BIN_EXE_anb"))
                .current_dir(dir.path())
                .env("RUST_LOG", "warn")
                .arg("--config")
                .arg(&cfg)
                .arg(sub)
                .output()
                .map_err(|e| e.to_string())?;
            ensure(
                o.status.success(),
                format!("{sub} exited with {:?}", o.status.code()),
            )?;
        }
        let mut files = Vec::new();
        snapshot(dir.path(), &mut files);
        for f in &mut files {
            f.0 = f.0.strip_prefix(dir.path()).unwrap().to_path_buf();
        }
        files.sort();
        ensure(
            files.iter().any(|f| f.0.ends_with("pareto.csv")),
            "no pareto.csv",
        )?;
        Ok(files)
    };
    let a = run()?;
    let b = run()?;
    ensure(a == b, "outputs differ between runs")?;
    Ok(format!(
        "collect -> fit -> simulate (bi) -> pareto exit 0, {} files identical across runs",
        a.len()
    ))
}

fn main() {
    let start = Instant::now();
    let proxy = proxy_setup();
    let criteria: Vec<Criterion> = vec![
        ("1 exact combinatorics", Box::new(c1_combinatorics)),
        ("2 kendall tau", Box::new(c2_kendall)),
        ("3 surrogate fit quality", Box::new(c3_surrogate)),
        (
            "4 constrained scheme search",
            Box::new(|| c4_grid_search(&proxy)),
        ),
        (
            "5 proxy validation and speedup",
            Box::new(|| c5_validation(&proxy)),
        ),
        ("6 optimizer ordering", Box::new(c6_optimizers)),
        ("7 reinforce sanity", Box::new(c7_reinforce_toy)),
        ("8 pareto correctness", Box::new(c8_pareto)),
        ("9 persistence", Box::new(c9_persistence)),
        ("10 end-to-end cli", Box::new(c10_cli)),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let t = Instant::now();
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(check))
            .unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(msg) => println!("PASS  {name}: {msg} [{:.1} s]", t.elapsed().as_secs_f64()),
            Err(msg) => {
                failed += 1;
                println!("FAIL  {name}: {msg} [{:.1} s]", t.elapsed().as_secs_f64());
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.0} s",
        10 - failed,
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
