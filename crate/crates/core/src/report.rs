//! JSON reports and whitespace-separated plot data.
//!
//! Plot files start with `#` header lines naming the columns. Numbers use
//! the shortest representation that round-trips, so identical runs write
//! identical bytes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::clarke::MatrixSet;
use crate::error::Result;
use crate::extended;
use crate::meanvalue::MeanValueSequence;
use crate::weakconv::{TestReport, WeakConvReport};

pub fn to_json(value: &impl Serialize) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn row(cols: &[f64]) -> String {
    let mut s = cols.iter().map(|v| extended::fmt(*v)).collect::<Vec<_>>().join(" ");
    s.push('\n');
    s
}

/// Columns `delta mean stderr`.
pub fn mean_sequence_dat(title: &str, seq: &MeanValueSequence) -> String {
    let mut s = format!("# {title}\n# delta mean stderr\n");
    for k in 0..seq.len() {
        s.push_str(&row(&[seq.deltas[k], seq.means[k], seq.stderrs[k]]));
    }
    s
}

/// One matrix per line, entries in row-major order.
pub fn cloud_dat(title: &str, set: &MatrixSet) -> String {
    let names: Vec<String> = (0..set.m)
        .flat_map(|i| (0..set.n).map(move |j| format!("a{i}{j}")))
        .collect();
    let mut s = format!("# {title}\n# {}\n", names.join(" "));
    for a in &set.cloud {
        s.push_str(&row(a));
    }
    s
}

/// Direction entries followed by the support value in that direction.
pub fn support_dat(title: &str, set: &MatrixSet) -> String {
    let table = set.support_table();
    let names: Vec<String> = (0..set.m * set.n).map(|i| format!("v{i}")).collect();
    let mut s = format!("# {title}\n# {} support\n", names.join(" "));
    for (v, h) in set.directions.iter().zip(table) {
        let mut cols = v.clone();
        cols.push(h);
        s.push_str(&row(&cols));
    }
    s
}

/// `k` followed by one column per probe.
pub fn trace_dat(title: &str, report: &TestReport) -> String {
    let names: Vec<String> = report
        .traces
        .iter()
        .map(|t| {
            if t.probe.point.is_empty() {
                "inf".to_string()
            } else {
                format!("p({})", t.probe.point.iter().map(|v| extended::fmt(*v)).collect::<Vec<_>>().join(","))
            }
        })
        .collect();
    let mut s = format!("# {title}: {}\n# k {}\n", report.test, names.join(" "));
    let k_max = report.traces.first().map_or(0, |t| t.values.len());
    for k in 0..k_max {
        let mut cols = vec![(k + 1) as f64];
        cols.extend(report.traces.iter().map(|t| t.values[k]));
        s.push_str(&row(&cols));
    }
    s
}

/// Columns `k sup_norm`.
pub fn sup_norm_dat(report: &WeakConvReport) -> String {
    let mut s = format!("# {}: sup norm of f_k - f over sampled points\n# k sup_norm\n", report.sequence);
    for (k, v) in report.sup_norms.iter().enumerate() {
        s.push_str(&row(&[(k + 1) as f64, *v]));
    }
    s
}

/// Collects named files and writes them under one directory.
#[derive(Debug, Default)]
pub struct Artifacts {
    files: Vec<(String, String)>,
}

impl Artifacts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, contents: String) {
        self.files.push((name.into(), contents));
    }

    pub fn names(&self) -> Vec<&str> {
        self.files.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }

    pub fn write_all(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut out = Vec::with_capacity(self.files.len());
        for (name, contents) in &self.files {
            let p = dir.join(name);
            std::fs::write(&p, contents)?;
            out.push(p);
        }
        Ok(out)
    }
}

/// Lines of `key value` pairs for terminal summaries.
pub fn summary(pairs: &[(&str, String)]) -> String {
    let w = pairs.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut s = String::new();
    for (k, v) in pairs {
        let _ = writeln!(s, "{k:<w$}  {v}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_sequence_has_three_columns() {
        let seq = MeanValueSequence {
            deltas: vec![0.3, 0.15],
            means: vec![0.5, 0.25],
            stderrs: vec![0.0, 0.01],
            n_accepted: vec![10, 10],
        };
        let s = mean_sequence_dat("t", &seq);
        let data: Vec<&str> = s.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data, vec!["0.3 0.5 0", "0.15 0.25 0.01"]);
    }

    #[test]
    fn cloud_and_support_files() {
        let set = MatrixSet::new(1, 2, vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let c = cloud_dat("max", &set);
        assert_eq!(c.lines().filter(|l| !l.starts_with('#')).count(), 2);
        let s = support_dat("max", &set);
        let rows: Vec<Vec<f64>> = s
            .lines()
            .filter(|l| !l.starts_with('#'))
            .map(|l| l.split(' ').map(|v| v.parse().unwrap()).collect())
            .collect();
        assert_eq!(rows.len(), set.directions.len());
        for r in rows {
            assert!((r[2] - r[0].max(r[1])).abs() < 1e-12);
        }
    }

    #[test]
    fn artifacts_write_to_directory() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = Artifacts::new();
        a.add("x.json", "{}\n".into());
        let written = a.write_all(&dir.path().join("sub")).unwrap();
        assert_eq!(std::fs::read_to_string(&written[0]).unwrap(), "{}\n");
    }
}
