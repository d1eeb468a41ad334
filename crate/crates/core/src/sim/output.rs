//! CSV and summary writers.
//!
//! Floats are written in scientific notation with 17 significant digits,
//! `.` as decimal separator and `\n` line endings. Variant numbers in the
//! files are 1-based.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use super::{RunSummary, StepRecord};

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn trajectory_csv(records: &[StepRecord], summary: &RunSummary) -> String {
    let mut s = String::from("j,t,x,y\n");
    for r in records {
        let _ = writeln!(s, "{},{},{},{}", r.j, num(r.t), num(r.state[0]), num(r.state[1]));
    }
    if !records.is_empty() {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            records.len(),
            num(summary.final_time),
            num(summary.final_state[0]),
            num(summary.final_state[1])
        );
    }
    s
}

fn per_record(records: &[StepRecord], header: &str, row: impl Fn(&StepRecord) -> String) -> String {
    let mut s = format!("{header}\n");
    for r in records {
        let _ = writeln!(s, "{},{},{}", r.j, num(r.t), row(r));
    }
    s
}

fn gmres_csv(records: &[StepRecord]) -> String {
    let q = records.first().map_or(0, |r| r.gmres_iters.len());
    let mut header = String::from("j,t,iters_total");
    for k in 1..=q {
        let _ = write!(header, ",iters_k{k}");
    }
    per_record(records, &header, |r| {
        let total: usize = r.gmres_iters.iter().sum();
        let mut row = total.to_string();
        for it in &r.gmres_iters {
            let _ = write!(row, ",{it}");
        }
        row
    })
}

fn summary_txt(summary: &RunSummary) -> String {
    let segments: Vec<String> = summary
        .switch_segments
        .iter()
        .map(|(k, len)| format!("k={}:{len}", k + 1))
        .collect();
    format!(
        "steps_executed = {}\n\
         total_gmres_iters = {}\n\
         switch_segments = {}\n\
         initial_p = {}\n\
         final_state = {}, {}\n\
         final_time = {}\n\
         terminated_by = {}\n",
        summary.steps_executed,
        summary.total_gmres_iters,
        segments.join(" "),
        num(summary.initial_p),
        num(summary.final_state[0]),
        num(summary.final_state[1]),
        num(summary.final_time),
        summary.terminated_by,
    )
}

/// Writes `trajectory.csv`, `control.csv`, `variant.csv`, `residual.csv`,
/// `gmres.csv` and `summary.txt` into `dir`, creating it if needed.
pub fn write_outputs(records: &[StepRecord], summary: &RunSummary, dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("trajectory.csv"), trajectory_csv(records, summary))?;
    fs::write(
        dir.join("control.csv"),
        per_record(records, "j,t,u,u_s", |r| format!("{},{}", num(r.u_applied), num(r.u_s_applied))),
    )?;
    fs::write(
        dir.join("variant.csv"),
        per_record(records, "j,t,k", |r| (r.chosen_k + 1).to_string()),
    )?;
    fs::write(
        dir.join("residual.csv"),
        per_record(records, "j,t,fnorm", |r| num(r.residual_norm)),
    )?;
    fs::write(dir.join("gmres.csv"), gmres_csv(records))?;
    fs::write(dir.join("summary.txt"), summary_txt(summary))?;
    Ok(())
}
