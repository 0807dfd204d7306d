//! Run records and their text renderings.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::channels::{format_strength, PauliChannel};
use crate::error::Result;
use crate::pipeline::{qubits_at, LevelRecord, PipelinePolicy};
use crate::train::TrainConfig;

/// Everything needed to interpret (and rerun) a concatenation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRecords {
    pub noise: PauliChannel,
    pub policy: PipelinePolicy,
    pub train: TrainConfig,
    pub levels: Vec<LevelRecord>,
}

impl RunRecords {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn qubits_at(&self, target: f64) -> Result<f64> {
        qubits_at(&self.noise, &self.levels, target)
    }

    /// Worst-case infidelity after the last level (or of the bare channel).
    pub fn final_infidelity(&self) -> f64 {
        self.levels.last().map_or(self.noise.worst_case_infidelity(), |r| r.worst_case_infidelity)
    }
}

/// Aligned table with columns `code, level, p, X/p, Y/p, Z/p`.
pub fn format_table(records: &[LevelRecord]) -> String {
    let header = ["code", "level", "p", "X/p", "Y/p", "Z/p"];
    let rows: Vec<[String; 6]> = records
        .iter()
        .map(|r| {
            let [x, y, z] = r.estimate.proportions();
            [
                r.code.label(),
                r.level.to_string(),
                format_strength(r.estimate.strength()),
                format!("{x:.2}"),
                format!("{y:.2}"),
                format!("{z:.2}"),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let mut line = |cells: &[&str]| {
        let mut text = String::new();
        for (k, (cell, w)) in cells.iter().zip(widths).enumerate() {
            if k == 0 {
                let _ = write!(text, "{cell:<w$}");
            } else {
                let _ = write!(text, "  {cell:>w$}");
            }
        }
        out.push_str(text.trim_end());
        out.push('\n');
    };
    line(&header);
    for row in &rows {
        line(&row.each_ref().map(String::as_str));
    }
    out
}

/// `level,qubits,infidelity` rows, starting from the bare channel at level 0.
pub fn curve_csv(run: &RunRecords) -> String {
    let mut out = String::from("level,qubits,infidelity\n");
    let _ = writeln!(out, "0,1,{:e}", run.noise.worst_case_infidelity());
    for r in &run.levels {
        let _ = writeln!(out, "{},{},{:e}", r.level, r.cumulative_qubits, r.worst_case_infidelity);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{named_channel, NoiseName};
    use crate::pipeline::plan_and_run;

    fn baseline() -> RunRecords {
        let noise = named_channel(NoiseName::Yflip, 0.1).unwrap();
        let policy = PipelinePolicy::stabilizer_only(3);
        let train = TrainConfig::default();
        let levels = plan_and_run(&noise, &policy, &train).unwrap();
        RunRecords { noise, policy, train, levels }
    }

    #[test]
    fn table_layout() {
        let table = format_table(&baseline().levels);
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 4);
        let head: Vec<&str> = lines[0].split_whitespace().collect();
        assert_eq!(head, ["code", "level", "p", "X/p", "Y/p", "Z/p"]);
        let first: Vec<&str> = lines[1].split_whitespace().collect();
        assert_eq!(first, ["[[5,1,3]]", "1", "0.081", "0.50", "0.01", "0.50"]);
        assert!(lines.iter().all(|l| !l.ends_with(' ')));
    }

    #[test]
    fn curve_rows() {
        let run = baseline();
        let csv = curve_csv(&run);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "level,qubits,infidelity");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("0,1,"));
        assert!(lines[3].starts_with("2,25,"));
        let last: f64 = lines[4].split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(last, run.final_infidelity());
    }

    #[test]
    fn records_round_trip_exactly() {
        let run = baseline();
        let text = run.to_json().unwrap();
        let back = RunRecords::from_json(&text).unwrap();
        assert_eq!(back, run);
        assert_eq!(back.to_json().unwrap(), text);
    }
}
