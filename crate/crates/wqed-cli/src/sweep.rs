//! Long-format sweeps with per-point completion markers.
//!
//! Every finished point leaves `<stem>.markers/<index>.done` holding the
//! config hash, the axis value and its rows. A rerun with the same config
//! reads those back and only computes the missing points, so interrupted
//! sweeps resume and the final table is the same either way.

use rayon::prelude::*;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use crate::config::Axis;
use crate::output::{num, write_file, Sink, Table};
use crate::CliError;

pub type Rows = Vec<(String, f64)>;

#[derive(Debug)]
pub struct SweepResult {
    pub table: PathBuf,
    pub computed: usize,
    pub resumed: usize,
}

fn marker_dir(sink: &Sink) -> PathBuf {
    sink.dir.join(format!("{}.markers", sink.stem))
}

fn marker_path(dir: &Path, i: usize) -> PathBuf {
    dir.join(format!("{i:05}.done"))
}

fn render_marker(hash: &str, value: f64, rows: &Rows) -> String {
    let mut s = format!("{hash} {}\n", num(value));
    for (k, v) in rows {
        s += &format!("{k},{}\n", num(*v));
    }
    s
}

fn read_marker(path: &Path, hash: &str, value: f64) -> Option<Rows> {
    let text = std::fs::read_to_string(path).ok()?;
    let mut lines = text.lines();
    let mut head = lines.next()?.split(' ');
    if head.next()? != hash || head.next()?.parse::<f64>().ok()? != value {
        return None;
    }
    lines
        .map(|l| {
            let (k, v) = l.rsplit_once(',')?;
            Some((k.to_string(), v.parse().ok()?))
        })
        .collect()
}

/// Evaluates `f` at every axis value and writes the sweep table. Failed
/// points are recorded with their error kind; any failure (or an empty grid)
/// is reported as `PartialSweep` after the table is written.
pub fn run<F>(sink: &Sink, axis: Axis, values: &[f64], notes: &[String], f: F) -> Result<SweepResult, CliError>
where
    F: Fn(f64) -> Result<Rows, CliError> + Sync,
{
    sink.ensure_dir()?;
    let mdir = marker_dir(sink);
    std::fs::create_dir_all(&mdir)?;
    let write_lock = Mutex::new(());
    let outcomes: Vec<(Result<Rows, CliError>, bool)> = values
        .par_iter()
        .enumerate()
        .map(|(i, &v)| {
            let path = marker_path(&mdir, i);
            if let Some(rows) = read_marker(&path, &sink.hash, v) {
                return (Ok(rows), true);
            }
            let r = f(v);
            if let Ok(rows) = &r {
                let _guard = write_lock.lock().unwrap();
                if let Err(e) = write_file(&path, &render_marker(&sink.hash, v, rows)) {
                    return (Err(e), false);
                }
            }
            (r, false)
        })
        .collect();

    let mut table = Table::new("sweep", &["axis", "value", "observable", "status"]);
    table.note(format!("axis: {} (the axis column holds its value at each point)", axis.label()));
    for n in notes {
        table.note(n.clone());
    }
    let mut failed = Vec::new();
    let mut resumed = 0;
    for ((r, was_resumed), &v) in outcomes.iter().zip(values) {
        resumed += *was_resumed as usize;
        match r {
            Ok(rows) => {
                for (k, x) in rows {
                    table.push(vec![num(v), num(*x), k.clone(), "ok".into()]);
                }
            }
            Err(e) => {
                table.push(vec![num(v), "NaN".into(), "-".into(), format!("failed:{}", e.kind)]);
                failed.push(serde_json::json!({ "value": v, "kind": e.kind, "message": e.message }));
            }
        }
    }
    let path = table.write(sink, "sweep")?;
    if values.is_empty() || !failed.is_empty() {
        let mut e = CliError::new(
            "PartialSweep",
            format!("{} of {} sweep points failed; table written to {}", failed.len(), values.len(), path.display()),
            4,
        );
        e.extra.push(("rows".into(), table.rows.len().into()));
        e.extra.push(("failed".into(), serde_json::Value::Array(failed)));
        return Err(e);
    }
    Ok(SweepResult { table: path, computed: values.len() - resumed, resumed })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sink(dir: &Path) -> Sink {
        Sink { dir: dir.to_path_buf(), stem: "t".into(), scenario: "test".into(), hash: "h0".into() }
    }

    #[test]
    fn markers_resume_and_reproduce() {
        let dir = tempfile::tempdir().unwrap();
        let s = sink(dir.path());
        let f = |v: f64| Ok(vec![("sq".to_string(), v * v), ("half".to_string(), v / 3.0)]);
        let a = run(&s, Axis::Width, &[1.0, 2.0, 3.0], &[], f).unwrap();
        assert_eq!((a.computed, a.resumed), (3, 0));
        let first = std::fs::read_to_string(&a.table).unwrap();
        std::fs::remove_file(marker_path(&marker_dir(&s), 1)).unwrap();
        let b = run(&s, Axis::Width, &[1.0, 2.0, 3.0], &[], f).unwrap();
        assert_eq!((b.computed, b.resumed), (1, 2));
        assert_eq!(std::fs::read_to_string(&b.table).unwrap(), first);
        // a different config hash invalidates the markers
        let other = Sink { hash: "h1".into(), ..s.clone() };
        let c = run(&other, Axis::Width, &[1.0, 2.0, 3.0], &[], f).unwrap();
        assert_eq!(c.resumed, 0);
    }

    #[test]
    fn failures_are_recorded() {
        let dir = tempfile::tempdir().unwrap();
        let s = sink(dir.path());
        let e = run(&s, Axis::N, &[1.0, 2.0], &[], |v| if v > 1.5 { Err(CliError::new("Boom", "no", 3)) } else { Ok(vec![("x".into(), v)]) })
            .unwrap_err();
        assert_eq!(e.kind, "PartialSweep");
        let text = std::fs::read_to_string(s.path("sweep", "csv")).unwrap();
        assert!(text.contains("1,1,x,ok"));
        assert!(text.contains("2,NaN,-,failed:Boom"));
        // the failed point left no marker and is retried
        assert!(!marker_path(&marker_dir(&s), 1).exists());
    }

    #[test]
    fn empty_grid_is_a_partial_sweep_with_no_rows() {
        let dir = tempfile::tempdir().unwrap();
        let e = run(&sink(dir.path()), Axis::ThetaPi, &[], &[], |_| Ok(Vec::new())).unwrap_err();
        assert_eq!(e.kind, "PartialSweep");
        assert!(e.extra.iter().any(|(k, v)| k == "rows" && v == &serde_json::json!(0)));
    }
}
