//! Report rendering. The human table and the CSV contain only values that
//! are fully determined by (seed, config); wall-clock times go to a separate
//! timing file.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{MstError, Result};
use crate::harness::train::TrainReport;

pub const REPORT_TXT: &str = "report.txt";
pub const REPORT_CSV: &str = "report.csv";
pub const TIMING_TXT: &str = "timing.txt";

pub fn render_table(r: &TrainReport) -> String {
    let mut s = String::new();
    writeln!(s, "dataset   {}", r.dataset).unwrap();
    writeln!(s, "accuracy  {:.2} ± {:.2} (%)", 100.0 * r.mean, 100.0 * r.std).unwrap();
    writeln!(s, "ratio     {:.4}", r.data_ratio).unwrap();
    writeln!(s).unwrap();
    writeln!(s, "{:>4} {:>5} {:>6} {:>9} {:>9} {:>10}", "run", "fold", "test", "test acc", "train acc", "loss").unwrap();
    for f in &r.folds {
        writeln!(
            s,
            "{:>4} {:>5} {:>6} {:>9.4} {:>9.4} {:>10.6}",
            f.run,
            f.fold,
            f.test_size,
            f.test_accuracy(),
            f.train_accuracy(),
            f.final_loss
        )
        .unwrap();
    }
    writeln!(s).unwrap();
    for (run, a) in r.run_accuracy.iter().enumerate() {
        writeln!(s, "run {run}: {:.4}", a).unwrap();
    }
    writeln!(s, "\n# configuration").unwrap();
    s.push_str(&r.config_text);
    s
}

/// One row per fold plus `run` summary rows and a final `all` row;
/// floats use shortest round-trip form.
pub fn render_csv(r: &TrainReport) -> String {
    let mut s = String::from("kind,run,fold,train_size,test_size,train_correct,test_correct,accuracy,final_loss\n");
    for f in &r.folds {
        writeln!(
            s,
            "fold,{},{},{},{},{},{},{},{}",
            f.run,
            f.fold,
            f.train_size,
            f.test_size,
            f.train_correct,
            f.test_correct,
            f.test_accuracy(),
            f.final_loss
        )
        .unwrap();
    }
    for (run, a) in r.run_accuracy.iter().enumerate() {
        writeln!(s, "run,{run},,,,,,{a},").unwrap();
    }
    writeln!(s, "mean,,,,,,,{},", r.mean).unwrap();
    writeln!(s, "std,,,,,,,{},", r.std).unwrap();
    writeln!(s, "data_ratio,,,,,,,{},", r.data_ratio).unwrap();
    s
}

pub fn write_text(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).map_err(|e| MstError::io(path, e))
}

pub fn write_train_report(dir: &Path, r: &TrainReport) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| MstError::io(dir, e))?;
    write_text(&dir.join(REPORT_TXT), &render_table(r))?;
    write_text(&dir.join(REPORT_CSV), &render_csv(r))?;
    write_text(&dir.join(TIMING_TXT), &format!("wall_clock_seconds = {:.3}\n", r.wall_clock.as_secs_f64()))
}
