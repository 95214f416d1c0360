use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{ProxySearchResult, TrainingScheme};

pub const TABLE_HEADER: [&str; 10] = [
    "scheme_id",
    "b",
    "e_t",
    "e_s",
    "e_f",
    "res_s",
    "res_f",
    "tau",
    "t_p_hours",
    "feasible",
];

/// One CSV row per evaluated scheme, in grid order.
pub fn write_table_csv<W: Write>(result: &ProxySearchResult, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TABLE_HEADER)?;
    for r in &result.table {
        let s = &r.scheme;
        w.write_record([
            r.id.to_string(),
            s.batch_size.to_string(),
            s.epochs.to_string(),
            s.resize_start.to_string(),
            s.resize_finish.to_string(),
            s.res_start.to_string(),
            s.res_finish.to_string(),
            r.tau.to_string(),
            r.t_p.to_string(),
            r.feasible.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSummary {
    pub best_scheme: TrainingScheme,
    pub tau: f64,
    pub t_p: f64,
    pub speedup_vs_reference: f64,
}
