use crate::error::{Error, Result};
use crate::evolution::{DgFunction, SnapshotCache};
use crate::surface_fem::{cut_decompose, integrate_projected, projected_inner, Clamped};

/// Tracking data of the objective.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    /// Slab loads D^n_j = ∫_{I_n} ∫_{Γ^h(t)} y_d φ_j of the desired state, and
    /// ‖y_d‖² when known (it only shifts the objective).
    Distributed { loads: DgFunction, norm_sq: f64 },
    /// Nodal coefficients of y_T on Γ^h(T).
    Terminal { values: Vec<f64> },
}

/// min ½‖S u − y_d‖² + ½α‖u‖² (or the terminal misfit) over a ≤ u ≤ b.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlProblemSpec {
    pub alpha: f64,
    pub lower: f64,
    pub upper: f64,
    pub target: Target,
}

impl ControlProblemSpec {
    pub fn new(alpha: f64, lower: f64, upper: f64, target: Target) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!("alpha must be positive and finite, got {alpha}")));
        }
        if lower.is_nan() || upper.is_nan() || lower > upper || lower == f64::INFINITY || upper == f64::NEG_INFINITY {
            return Err(Error::InvalidParameter(format!("invalid bounds [{lower}, {upper}]")));
        }
        Ok(ControlProblemSpec {
            alpha,
            lower,
            upper,
            target,
        })
    }

    pub fn is_unconstrained(&self) -> bool {
        self.lower == f64::NEG_INFINITY && self.upper == f64::INFINITY
    }

    pub(crate) fn check(&self, cache: &SnapshotCache) -> Result<()> {
        let m = cache.num_dofs();
        match &self.target {
            Target::Distributed { loads, .. } => {
                if loads.num_slabs() != cache.num_slabs() {
                    return Err(Error::DimensionMismatch {
                        what: "data slabs",
                        expected: cache.num_slabs(),
                        actual: loads.num_slabs(),
                    });
                }
                if loads.num_dofs() != m {
                    return Err(Error::DimensionMismatch {
                        what: "data vertices",
                        expected: m,
                        actual: loads.num_dofs(),
                    });
                }
            }
            Target::Terminal { values } => {
                if values.len() != m {
                    return Err(Error::DimensionMismatch {
                        what: "terminal data",
                        expected: m,
                        actual: values.len(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// u = P_{[a,b]}(−p/α), stored through the adjoint p. On each slab u is the
/// clamp of a P1 function, so it is piecewise linear on the cut pieces.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedControl {
    pub p: DgFunction,
    pub alpha: f64,
    pub lower: f64,
    pub upper: f64,
}

impl ProjectedControl {
    pub fn new(p: DgFunction, spec: &ControlProblemSpec) -> Self {
        ProjectedControl {
            p,
            alpha: spec.alpha,
            lower: spec.lower,
            upper: spec.upper,
        }
    }

    /// The unprojected field −p^n/α at the vertices.
    pub fn preimage(&self, n: usize) -> Vec<f64> {
        self.p.slab(n).iter().map(|v| -v / self.alpha).collect()
    }

    pub fn project(&self, w: f64) -> f64 {
        w.clamp(self.lower, self.upper)
    }

    /// Vertex values of u.
    pub fn sample_vertices(&self) -> DgFunction {
        self.p.map(|v| (-v / self.alpha).clamp(self.lower, self.upper))
    }

    /// k ∫_{Γ^h(t_n)} u φ_j, integrated exactly on the cut pieces.
    pub fn loads(&self, cache: &SnapshotCache) -> Result<DgFunction> {
        let k = cache.step();
        let mut out = DgFunction::zeros(self.p.num_slabs(), self.p.num_dofs());
        for n in 1..=self.p.num_slabs() {
            let b = integrate_projected(cache.snapshot(n), &self.preimage(n), self.lower, self.upper)?;
            for (o, v) in out.slab_mut(n).iter_mut().zip(b) {
                *o = k * v;
            }
        }
        Ok(out)
    }

    /// ‖u‖²_{h,k}.
    pub fn norm_sq(&self, cache: &SnapshotCache) -> Result<f64> {
        let mut acc = 0.0;
        for n in 1..=self.p.num_slabs() {
            let w = self.preimage(n);
            let c = Clamped::new(&w, self.lower, self.upper);
            acc += projected_inner(cache.snapshot(n), c, c)?;
        }
        Ok(acc * cache.step())
    }

    /// Area fractions of the lower- and upper-active sets on each slab.
    pub fn active_fractions(&self, cache: &SnapshotCache) -> Result<Vec<[f64; 2]>> {
        (1..=self.p.num_slabs())
            .map(|n| {
                let snap = cache.snapshot(n);
                let cut = cut_decompose(snap, self.p.slab(n), self.alpha, self.lower, self.upper);
                let [lo, mid, hi] = cut.region_areas(snap)?;
                let total = lo + mid + hi;
                Ok([lo / total, hi / total])
            })
            .collect()
    }
}

/// A control either given by vertex values per slab or in projected form.
#[derive(Debug, Clone, PartialEq)]
pub enum Control {
    Nodal(DgFunction),
    Projected(ProjectedControl),
}

impl Control {
    pub fn loads(&self, cache: &SnapshotCache) -> Result<DgFunction> {
        match self {
            Control::Nodal(u) => Ok(crate::evolution::mass_loads(cache, u)),
            Control::Projected(u) => u.loads(cache),
        }
    }

    pub fn norm_sq(&self, cache: &SnapshotCache) -> Result<f64> {
        match self {
            Control::Nodal(u) => Ok(crate::evolution::discrete_inner(cache, u, u)),
            Control::Projected(u) => u.norm_sq(cache),
        }
    }

    pub(crate) fn num_slabs(&self) -> usize {
        match self {
            Control::Nodal(u) => u.num_slabs(),
            Control::Projected(u) => u.p.num_slabs(),
        }
    }

    /// Vertex values on slab n and the bounds they are clamped to.
    pub(crate) fn clamped_values(&self, n: usize) -> (Vec<f64>, f64, f64) {
        match self {
            Control::Nodal(u) => (u.slab(n).to_vec(), f64::NEG_INFINITY, f64::INFINITY),
            Control::Projected(u) => (u.preimage(n), u.lower, u.upper),
        }
    }
}
