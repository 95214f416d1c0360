use std::io::Write;

use super::{CurvePoint, SearchTrajectory};
use crate::Architecture;

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// `step,arch,accuracy,perf,reward,incumbent`; `perf` is empty when absent.
pub fn write_trajectory_csv<W: Write>(t: &SearchTrajectory, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["step", "arch", "accuracy", "perf", "reward", "incumbent"])?;
    for s in &t.steps {
        w.write_record([
            s.step.to_string(),
            s.arch.to_string(),
            s.accuracy.to_string(),
            opt(s.perf),
            s.reward.to_string(),
            s.incumbent.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `step,mean_incumbent,std_incumbent`.
pub fn write_curve_csv<W: Write>(curve: &[CurvePoint], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["step", "mean_incumbent", "std_incumbent"])?;
    for p in curve {
        w.write_record([
            p.step.to_string(),
            p.mean_incumbent.to_string(),
            p.std_incumbent.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `arch,accuracy,perf`.
pub fn write_pareto_csv<W: Write>(rows: &[(Architecture, f64, f64)], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["arch", "accuracy", "perf"])?;
    for (arch, acc, perf) in rows {
        w.write_record([arch.to_string(), acc.to_string(), perf.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
