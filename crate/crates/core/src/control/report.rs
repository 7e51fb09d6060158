use std::io::Write;

use serde::Serialize;

/// One outer iteration of an optimization run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// ‖u − P(−p(u)/α)‖_{h,k} of the current iterate.
    pub residual: f64,
    pub objective: Option<f64>,
    /// Space-time area fractions of the lower- and upper-active sets.
    pub lower_fraction: f64,
    pub upper_fraction: f64,
    /// Krylov iterations spent in the step that produced this iterate.
    pub inner_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub method: String,
    pub iterations: usize,
    pub converged: bool,
    pub residual: f64,
    pub objective: f64,
    /// Area fractions [lower, upper] of the active sets on each slab.
    pub active_per_slab: Vec<[f64; 2]>,
    pub history: Vec<IterationRecord>,
}

impl SolveReport {
    /// One JSON object per iteration, then the summary without the history.
    pub fn write_json_lines<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for r in &self.history {
            serde_json::to_writer(&mut out, r)?;
            writeln!(out)?;
        }
        let summary = serde_json::json!({
            "method": self.method,
            "iterations": self.iterations,
            "converged": self.converged,
            "residual": self.residual,
            "objective": self.objective,
        });
        writeln!(out, "{summary}")
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "iteration,residual,objective,lower_fraction,upper_fraction,inner_iterations"
        )?;
        for r in &self.history {
            let j = r.objective.map(|v| format!("{v:.16e}")).unwrap_or_default();
            writeln!(
                out,
                "{},{:.16e},{},{:.16e},{:.16e},{}",
                r.iteration, r.residual, j, r.lower_fraction, r.upper_fraction, r.inner_iterations
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SolveReport {
        let rec = |i, r| IterationRecord {
            iteration: i,
            residual: r,
            objective: if i == 0 { None } else { Some(0.5) },
            lower_fraction: 0.1,
            upper_fraction: 0.2,
            inner_iterations: 3,
        };
        SolveReport {
            method: "newton".into(),
            iterations: 1,
            converged: true,
            residual: 1e-10,
            objective: 0.5,
            active_per_slab: vec![[0.1, 0.2]],
            history: vec![rec(0, 1.0), rec(1, 1e-10)],
        }
    }

    #[test]
    fn json_lines_parse_back() {
        let mut buf = Vec::new();
        sample().write_json_lines(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let rows: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(rows.len(), 3);
        assert!(rows[0]["objective"].is_null());
        assert_eq!(rows[1]["iteration"], 1);
        assert_eq!(rows[2]["converged"], true);
    }

    #[test]
    fn csv_rows() {
        let mut buf = Vec::new();
        sample().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1].split(',').nth(2), Some(""));
        let cols: Vec<&str> = lines[2].split(',').collect();
        assert_eq!(cols[0], "1");
        assert_eq!(cols[1].parse::<f64>().unwrap(), 1e-10);
        assert_eq!(cols[2].parse::<f64>().unwrap(), 0.5);
    }
}
