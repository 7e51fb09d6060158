use std::io::Write;

use crate::error::{Error, Result};

/// Equidistant partition of [0, T] into N slabs I_n = (t_{n-1}, t_n].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    slabs: usize,
    horizon: f64,
}

impl TimeGrid {
    pub fn new(slabs: usize, horizon: f64) -> Result<Self> {
        if slabs == 0 || !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "time grid needs N > 0 and T > 0 (got N = {slabs}, T = {horizon})"
            )));
        }
        Ok(TimeGrid { slabs, horizon })
    }

    /// N = ceil(T / k) for the coupling k = H² / 20.
    pub fn coupled_to_mesh(h: f64, horizon: f64) -> Result<Self> {
        Self::new((20.0 * horizon / (h * h)).ceil() as usize, horizon)
    }

    pub fn num_slabs(&self) -> usize {
        self.slabs
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.slabs as f64
    }

    /// t_n for n = 0..=N.
    pub fn time(&self, n: usize) -> f64 {
        if n == self.slabs {
            self.horizon
        } else {
            n as f64 * self.step()
        }
    }
}

/// Element of the discrete trial space: one P1 coefficient vector per slab,
/// constant in time along the vertex trajectories. Slabs are numbered
/// 1..=N as in the time-stepping schemes.
#[derive(Debug, Clone, PartialEq)]
pub struct DgFunction {
    slabs: usize,
    dofs: usize,
    data: Vec<f64>,
}

impl DgFunction {
    pub fn zeros(slabs: usize, dofs: usize) -> Self {
        DgFunction {
            slabs,
            dofs,
            data: vec![0.0; slabs * dofs],
        }
    }

    pub fn from_flat(slabs: usize, dofs: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != slabs * dofs {
            return Err(Error::DimensionMismatch {
                what: "DG coefficients",
                expected: slabs * dofs,
                actual: data.len(),
            });
        }
        Ok(DgFunction { slabs, dofs, data })
    }

    /// Same vector on every slab.
    pub fn constant_in_time(slabs: usize, values: &[f64]) -> Self {
        let data = (0..slabs).flat_map(|_| values.iter().copied()).collect();
        DgFunction {
            slabs,
            dofs: values.len(),
            data,
        }
    }

    pub fn num_slabs(&self) -> usize {
        self.slabs
    }

    pub fn num_dofs(&self) -> usize {
        self.dofs
    }

    /// Coefficients on I_n, `1 <= n <= N`.
    pub fn slab(&self, n: usize) -> &[f64] {
        assert!(n >= 1 && n <= self.slabs, "slab {n} out of 1..={}", self.slabs);
        &self.data[(n - 1) * self.dofs..n * self.dofs]
    }

    pub fn slab_mut(&mut self, n: usize) -> &mut [f64] {
        assert!(n >= 1 && n <= self.slabs, "slab {n} out of 1..={}", self.slabs);
        &mut self.data[(n - 1) * self.dofs..n * self.dofs]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn same_shape(&self, other: &DgFunction) -> bool {
        self.slabs == other.slabs && self.dofs == other.dofs
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: f64, x: &DgFunction) {
        assert!(self.same_shape(x));
        for (s, v) in self.data.iter_mut().zip(&x.data) {
            *s += a * v;
        }
    }

    pub fn scale(&mut self, a: f64) {
        for s in &mut self.data {
            *s *= a;
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> DgFunction {
        DgFunction {
            slabs: self.slabs,
            dofs: self.dofs,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// CSV dump: comment header with N, T, m_h and level, then `n,j,value`.
    pub fn write_csv<W: Write>(&self, grid: &TimeGrid, level: usize, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "# N={} T={} m_h={} level={}",
            grid.num_slabs(),
            grid.horizon(),
            self.dofs,
            level
        )?;
        writeln!(out, "slab,vertex,value")?;
        for n in 1..=self.slabs {
            for (j, v) in self.slab(n).iter().enumerate() {
                writeln!(out, "{n},{j},{v:.17e}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_nodes() {
        let g = TimeGrid::new(7, 1.0).unwrap();
        assert_eq!(g.time(0), 0.0);
        assert_eq!(g.time(7), 1.0);
        assert!((g.step() - 1.0 / 7.0).abs() < 1e-16);
        assert!(TimeGrid::new(0, 1.0).is_err());
        assert!(TimeGrid::new(3, 0.0).is_err());
    }

    #[test]
    fn mesh_coupling() {
        // H of the second refinement
        let g = TimeGrid::coupled_to_mesh(0.9194, 1.0).unwrap();
        assert_eq!(g.num_slabs(), 24);
        assert!(g.step() <= 0.9194f64.powi(2) / 20.0);
    }

    #[test]
    fn slabs_are_one_based() {
        let mut f = DgFunction::zeros(3, 2);
        f.slab_mut(2)[1] = 5.0;
        assert_eq!(f.as_slice(), &[0.0, 0.0, 0.0, 5.0, 0.0, 0.0]);
        assert_eq!(f.slab(2), &[0.0, 5.0]);
    }

    #[test]
    fn csv_layout() {
        let f = DgFunction::constant_in_time(2, &[1.0, 2.0]);
        let mut buf = Vec::new();
        f.write_csv(&TimeGrid::new(2, 1.0).unwrap(), 3, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# N=2 T=1 m_h=2 level=3");
        assert_eq!(lines.len(), 2 + 4);
        assert!(lines[5].starts_with("2,1,2.0"));
    }
}
