use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use super::Vec3;
use crate::error::{Error, Result};

pub type VelocityField = Arc<dyn Fn(&Vec3, f64) -> Vec3 + Send + Sync>;

/// How vertices move in time.
#[derive(Clone)]
pub enum FlowKind {
    /// Every point stays where it is.
    StaticIdentity,
    /// `(x, y, z) -> (x, y, z / rho(t)^exponent)` with
    /// `rho(t) = exp(sin(2 pi t) / 2)`.
    SphereStretch { exponent: f64 },
    /// Trajectories of `dX/dt = V(X, t)`, integrated with classical RK4 using
    /// equal substeps no longer than `max_step`.
    OdeVelocityField { velocity: VelocityField, max_step: f64 },
}

impl fmt::Debug for FlowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FlowKind::StaticIdentity => write!(f, "StaticIdentity"),
            FlowKind::SphereStretch { exponent } => {
                write!(f, "SphereStretch {{ exponent: {exponent} }}")
            }
            FlowKind::OdeVelocityField { max_step, .. } => {
                write!(f, "OdeVelocityField {{ max_step: {max_step} }}")
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct FlowMap {
    pub kind: FlowKind,
    pub horizon: f64,
}

pub fn rho(t: f64) -> f64 {
    ((2.0 * PI * t).sin() / 2.0).exp()
}

impl FlowMap {
    pub fn identity(horizon: f64) -> Self {
        FlowMap {
            kind: FlowKind::StaticIdentity,
            horizon,
        }
    }

    pub fn sphere_stretch(exponent: f64, horizon: f64) -> Self {
        FlowMap {
            kind: FlowKind::SphereStretch { exponent },
            horizon,
        }
    }

    /// The moving ellipsoid used by both convergence studies.
    pub fn example_flow() -> Self {
        Self::sphere_stretch(2.0, 1.0)
    }

    pub fn ode(velocity: VelocityField, max_step: f64, horizon: f64) -> Self {
        FlowMap {
            kind: FlowKind::OdeVelocityField { velocity, max_step },
            horizon,
        }
    }

    pub fn is_static(&self) -> bool {
        matches!(self.kind, FlowKind::StaticIdentity)
    }

    pub fn check_time(&self, t: f64) -> Result<()> {
        let slack = 1e-12 * self.horizon.max(1.0);
        if t < -slack || t > self.horizon + slack {
            return Err(Error::TimeOutOfRange {
                time: t,
                horizon: self.horizon,
            });
        }
        Ok(())
    }

    /// Position at time `t` of the point that sits at `x0` at time 0.
    pub fn position(&self, x0: &Vec3, t: f64) -> Vec3 {
        self.advance(x0, 0.0, t)
    }

    /// Moves a point from time `s` to time `t` along its trajectory.
    pub fn advance(&self, x: &Vec3, s: f64, t: f64) -> Vec3 {
        match &self.kind {
            FlowKind::StaticIdentity => *x,
            FlowKind::SphereStretch { exponent } => {
                let scale = (rho(s) / rho(t)).powf(*exponent);
                Vec3::new(x.x, x.y, x.z * scale)
            }
            FlowKind::OdeVelocityField { velocity, max_step } => {
                rk4(velocity.as_ref(), *x, s, t, *max_step)
            }
        }
    }

    /// Velocity at the current position `x` and time `t`.
    pub fn velocity(&self, x: &Vec3, t: f64) -> Vec3 {
        match &self.kind {
            FlowKind::StaticIdentity => Vec3::zeros(),
            FlowKind::SphereStretch { exponent } => {
                // d/dt rho^-e / rho^-e = -e rho'/rho = -e pi cos(2 pi t)
                Vec3::new(0.0, 0.0, -exponent * PI * (2.0 * PI * t).cos() * x.z)
            }
            FlowKind::OdeVelocityField { velocity, .. } => velocity(x, t),
        }
    }

    /// Squared inverse semi-axis of the moving surface in z for the stretch
    /// flow: `Gamma(t) = { x^2 + y^2 + c(t) z^2 = 1 }`.
    pub fn stretch_coefficient(&self, t: f64) -> Option<f64> {
        match self.kind {
            FlowKind::StaticIdentity => Some(1.0),
            FlowKind::SphereStretch { exponent } => Some(rho(t).powf(2.0 * exponent)),
            FlowKind::OdeVelocityField { .. } => None,
        }
    }
}

fn rk4(v: &(dyn Fn(&Vec3, f64) -> Vec3 + Send + Sync), x: Vec3, s: f64, t: f64, max_step: f64) -> Vec3 {
    let span = t - s;
    if span == 0.0 {
        return x;
    }
    let steps = (span.abs() / max_step).ceil().max(1.0) as usize;
    let h = span / steps as f64;
    let mut y = x;
    for i in 0..steps {
        let ti = s + i as f64 * h;
        let k1 = v(&y, ti);
        let k2 = v(&(y + k1 * (h / 2.0)), ti + h / 2.0);
        let k3 = v(&(y + k2 * (h / 2.0)), ti + h / 2.0);
        let k4 = v(&(y + k3 * h), ti + h);
        y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    y
}
