use std::io::Write;

use serde::Serialize;

/// EOC_i = ln(ERR_i / ERR_{i−q}) / ln(H_i / H_{i−q}); `None` for i < q or
/// when either error is missing or not positive.
pub fn compute_eoc(errors: &[Option<f64>], hs: &[f64], q: usize) -> Vec<Option<f64>> {
    assert_eq!(errors.len(), hs.len());
    (0..errors.len())
        .map(|i| {
            if q == 0 || i < q {
                return None;
            }
            match (errors[i], errors[i - q]) {
                (Some(a), Some(b)) if a > 0.0 && b > 0.0 => Some((a / b).ln() / (hs[i] / hs[i - q]).ln()),
                _ => None,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelRow {
    pub level: usize,
    pub vertices: usize,
    pub slabs: usize,
    pub h: f64,
    pub k: f64,
    pub err_l2: Option<f64>,
    pub eoc_l2: Option<f64>,
    pub err_inf: Option<f64>,
    pub eoc_inf: Option<f64>,
    pub iterations: usize,
    pub wall_seconds: f64,
}

/// One row per refinement level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRecord {
    pub example: u8,
    pub q: usize,
    pub rows: Vec<LevelRow>,
}

fn cell(v: Option<f64>, precision: usize) -> String {
    v.map(|x| format!("{x:.precision$e}")).unwrap_or_default()
}

fn eoc_cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_default()
}

impl ConvergenceRecord {
    /// Fills the EOC columns from the error columns; rows must be sorted by
    /// consecutive levels.
    pub fn fill_eoc(&mut self) {
        let hs: Vec<f64> = self.rows.iter().map(|r| r.h).collect();
        let l2: Vec<Option<f64>> = self.rows.iter().map(|r| r.err_l2).collect();
        let inf: Vec<Option<f64>> = self.rows.iter().map(|r| r.err_inf).collect();
        let e2 = compute_eoc(&l2, &hs, self.q);
        let ei = compute_eoc(&inf, &hs, self.q);
        for ((r, a), b) in self.rows.iter_mut().zip(e2).zip(ei) {
            r.eoc_l2 = a;
            r.eoc_inf = b;
        }
    }

    pub fn row(&self, level: usize) -> Option<&LevelRow> {
        self.rows.iter().find(|r| r.level == level)
    }

    /// Full double precision (17 significant digits) in every float column.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "level,m_h,N,H,k,ERR_L2,EOC_L2,ERR_inf,EOC_inf,newton_iters,wall_seconds"
        )?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{:.16e},{:.16e},{},{},{},{},{},{:.3}",
                r.level,
                r.vertices,
                r.slabs,
                r.h,
                r.k,
                cell(r.err_l2, 16),
                cell(r.eoc_l2, 16),
                cell(r.err_inf, 16),
                cell(r.eoc_inf, 16),
                r.iterations,
                r.wall_seconds
            )?;
        }
        Ok(())
    }

    /// Whitespace-separated columns, `nan` for missing entries.
    pub fn write_gnuplot<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let f = |v: Option<f64>| v.map(|x| format!("{x:.8e}")).unwrap_or_else(|| "nan".into());
        writeln!(out, "# level m_h N H k ERR_L2 EOC_L2 ERR_inf EOC_inf newton_iters")?;
        for r in &self.rows {
            writeln!(
                out,
                "{} {} {} {:.8e} {:.8e} {} {} {} {} {}",
                r.level,
                r.vertices,
                r.slabs,
                r.h,
                r.k,
                f(r.err_l2),
                f(r.eoc_l2),
                f(r.err_inf),
                f(r.eoc_inf),
                r.iterations
            )?;
        }
        Ok(())
    }

    /// Aligned table for terminal output.
    pub fn write_table<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "{:>5} {:>6} {:>6} {:>8} {:>11} {:>7} {:>11} {:>7} {:>6} {:>9}",
            "level", "m_h", "N", "H", "ERR_L2", "EOC_L2", "ERR_inf", "EOC_inf", "iters", "seconds"
        )?;
        for r in &self.rows {
            writeln!(
                out,
                "{:>5} {:>6} {:>6} {:>8.4} {:>11} {:>7} {:>11} {:>7} {:>6} {:>9.2}",
                r.level,
                r.vertices,
                r.slabs,
                r.h,
                cell(r.err_l2, 3),
                eoc_cell(r.eoc_l2),
                cell(r.err_inf, 3),
                eoc_cell(r.eoc_inf),
                r.iterations,
                r.wall_seconds
            )?;
        }
        Ok(())
    }
}
