use super::{Control, ControlProblemSpec, IterationRecord, ProjectedControl, SolveReport, Target};
use crate::error::{Error, Result};
use crate::evolution::{
    apply_terminal_adjoint, discrete_inner, mass_loads, solve_adjoint, solve_state, AdjointRemainder, DgFunction,
    SnapshotCache,
};
use crate::linalg::{conjugate_gradient, gmres};
use crate::surface_fem::{cut_decompose, integrate_clamped, projected_distance_sq, Clamped};

const GMRES_RESTART: usize = 40;
const KRYLOV_MAX_ITER: usize = 2000;
const CHECKED: &str = "dimensions checked on entry";

/// ⟨a, b⟩_{h,k} for flat slab-major coefficient vectors.
fn flat_inner(cache: &SnapshotCache, a: &[f64], b: &[f64]) -> f64 {
    let m = cache.num_dofs();
    (1..=cache.num_slabs())
        .map(|n| cache.mass(n).quad_form(&a[(n - 1) * m..n * m], &b[(n - 1) * m..n * m]))
        .sum::<f64>()
        * cache.step()
}

fn zeros(cache: &SnapshotCache) -> DgFunction {
    DgFunction::zeros(cache.num_slabs(), cache.num_dofs())
}

fn state(cache: &SnapshotCache, loads: &DgFunction) -> Result<DgFunction> {
    solve_state(cache, &vec![0.0; cache.num_dofs()], loads)
}

/// Part of p(u) that depends on the state y = S u.
fn adjoint_of_state(cache: &SnapshotCache, spec: &ControlProblemSpec, y: &DgFunction) -> Result<DgFunction> {
    match &spec.target {
        Target::Distributed { .. } => solve_adjoint(
            cache,
            &vec![0.0; cache.num_dofs()],
            &mass_loads(cache, y),
            AdjointRemainder::None,
        ),
        Target::Terminal { .. } => apply_terminal_adjoint(cache, y.slab(cache.num_slabs())),
    }
}

/// p(0), the adjoint driven by the data alone.
fn data_adjoint(cache: &SnapshotCache, spec: &ControlProblemSpec) -> Result<DgFunction> {
    match &spec.target {
        Target::Distributed { loads, .. } => solve_adjoint(
            cache,
            &vec![0.0; cache.num_dofs()],
            &loads.map(|v| -v),
            AdjointRemainder::None,
        ),
        Target::Terminal { values } => {
            let neg: Vec<f64> = values.iter().map(|v| -v).collect();
            apply_terminal_adjoint(cache, &neg)
        }
    }
}

fn misfit(cache: &SnapshotCache, spec: &ControlProblemSpec, y: &DgFunction) -> f64 {
    match &spec.target {
        Target::Distributed { loads, norm_sq } => {
            let cross: f64 = y.as_slice().iter().zip(loads.as_slice()).map(|(a, b)| a * b).sum();
            0.5 * (discrete_inner(cache, y, y) - 2.0 * cross + norm_sq)
        }
        Target::Terminal { values } => {
            let d: Vec<f64> = y.slab(cache.num_slabs()).iter().zip(values).map(|(a, b)| a - b).collect();
            0.5 * cache.mass(cache.num_slabs()).quad_form(&d, &d)
        }
    }
}

struct Evaluation {
    p: DgFunction,
    objective: f64,
}

fn evaluate(
    cache: &SnapshotCache,
    spec: &ControlProblemSpec,
    u: &Control,
    offset: &DgFunction,
) -> Result<Evaluation> {
    let y = state(cache, &u.loads(cache)?)?;
    let mut p = adjoint_of_state(cache, spec, &y)?;
    p.axpy(1.0, offset);
    let objective = misfit(cache, spec, &y) + 0.5 * spec.alpha * u.norm_sq(cache)?;
    Ok(Evaluation { p, objective })
}

fn check_control(cache: &SnapshotCache, spec: &ControlProblemSpec, u: &Control) -> Result<()> {
    spec.check(cache)?;
    let (slabs, dofs) = match u {
        Control::Nodal(v) => (v.num_slabs(), v.num_dofs()),
        Control::Projected(v) => (v.p.num_slabs(), v.p.num_dofs()),
    };
    if slabs != cache.num_slabs() || dofs != cache.num_dofs() {
        return Err(Error::DimensionMismatch {
            what: "control coefficients",
            expected: cache.num_slabs() * cache.num_dofs(),
            actual: slabs * dofs,
        });
    }
    Ok(())
}

/// J(u) = ½‖S u − y_d‖²_{h,k} + ½α‖u‖²_{h,k}, or ½‖y^N − y_T‖² + ½α‖u‖²_{h,k}.
pub fn evaluate_objective(cache: &SnapshotCache, spec: &ControlProblemSpec, u: &Control) -> Result<f64> {
    check_control(cache, spec, u)?;
    let y = state(cache, &u.loads(cache)?)?;
    Ok(misfit(cache, spec, &y) + 0.5 * spec.alpha * u.norm_sq(cache)?)
}

/// The discrete adjoint p(u) = S*(S u − y_d), or S_T*(S_T u − y_T).
pub fn adjoint_of(cache: &SnapshotCache, spec: &ControlProblemSpec, u: &Control) -> Result<DgFunction> {
    check_control(cache, spec, u)?;
    Ok(evaluate(cache, spec, u, &data_adjoint(cache, spec)?)?.p)
}

/// ‖a − b‖_{h,k}, exact on the union of both cut decompositions.
pub fn control_distance(cache: &SnapshotCache, a: &Control, b: &Control) -> Result<f64> {
    let mut acc = 0.0;
    for n in 1..=a.num_slabs().min(b.num_slabs()) {
        let (va, la, ha) = a.clamped_values(n);
        let (vb, lb, hb) = b.clamped_values(n);
        acc += projected_distance_sq(cache.snapshot(n), Clamped::new(&va, la, ha), Clamped::new(&vb, lb, hb))?;
    }
    Ok((acc * cache.step()).sqrt())
}

/// ‖u − P_{[a,b]}(−p(u)/α)‖_{h,k}.
pub fn optimality_residual(cache: &SnapshotCache, spec: &ControlProblemSpec, u: &Control) -> Result<f64> {
    let p = adjoint_of(cache, spec, u)?;
    control_distance(cache, u, &Control::Projected(ProjectedControl::new(p, spec)))
}

/// ⟨α u + p(u), v − u⟩_{h,k}; nonnegative for every admissible v at the
/// optimum.
pub fn variational_inequality(
    cache: &SnapshotCache,
    spec: &ControlProblemSpec,
    u: &ProjectedControl,
    v: &DgFunction,
) -> Result<f64> {
    let p = adjoint_of(cache, spec, &Control::Projected(u.clone()))?;
    let inf = f64::INFINITY;
    let mut acc = 0.0;
    for n in 1..=cache.num_slabs() {
        let w = u.preimage(n);
        let fns = [
            Clamped::new(&w, u.lower, u.upper),
            Clamped::new(p.slab(n), -inf, inf),
            Clamped::new(v.slab(n), -inf, inf),
        ];
        integrate_clamped(cache.snapshot(n), &fns, |_, wa, c, _| {
            acc += wa * (spec.alpha * c[0] + c[1]) * (c[2] - c[0]);
        })?;
    }
    Ok(acc * cache.step())
}

fn record(
    cache: &SnapshotCache,
    u: &ProjectedControl,
    iteration: usize,
    residual: f64,
    objective: Option<f64>,
    inner_iterations: usize,
) -> Result<IterationRecord> {
    let fr = u.active_fractions(cache)?;
    let mut lower = 0.0;
    let mut upper = 0.0;
    let mut total = 0.0;
    for (n, f) in fr.iter().enumerate() {
        let a = cache.snapshot(n + 1).area();
        lower += a * f[0];
        upper += a * f[1];
        total += a;
    }
    Ok(IterationRecord {
        iteration,
        residual,
        objective,
        lower_fraction: lower / total,
        upper_fraction: upper / total,
        inner_iterations,
    })
}

fn finish(
    cache: &SnapshotCache,
    method: &str,
    u: ProjectedControl,
    history: Vec<IterationRecord>,
) -> Result<(ProjectedControl, SolveReport)> {
    let last = history.last().expect("at least one record");
    let report = SolveReport {
        method: method.to_string(),
        iterations: last.iteration,
        converged: true,
        residual: last.residual,
        objective: last.objective.unwrap_or(f64::NAN),
        active_per_slab: u.active_fractions(cache)?,
        history,
    };
    Ok((u, report))
}

/// Inner GMRES tolerance on the adjoint equation: α·residual·min(0.1, residual),
/// or a single tight solve when no bound can become active.
fn forcing(spec: &ControlProblemSpec, residual: f64, tol: f64) -> f64 {
    if spec.is_unconstrained() {
        0.5 * spec.alpha * tol
    } else {
        spec.alpha * residual * residual.min(0.1)
    }
}

fn krylov_error(method: &'static str) -> impl Fn(usize) -> Error {
    move |iteration| Error::KrylovBreakdown { method, iteration }
}

/// Semismooth Newton (primal-dual active set) in the adjoint variable,
/// starting from p = 0. Each step freezes the cut of −p_k/α and solves
/// (I + (1/α) K 𝕄_I) p = K F_act + p(0) by GMRES in ⟨·,·⟩_{h,k}, where K maps
/// loads to the adjoint of their state, 𝕄_I is the inactive-set mass and
/// F_act the load of the bound values on the active sets. The returned
/// control is P(−p_k/α) with residual ≤ `tol`.
pub fn solve_semismooth_newton(
    cache: &SnapshotCache,
    spec: &ControlProblemSpec,
    tol: f64,
    max_iter: usize,
) -> Result<(ProjectedControl, SolveReport)> {
    spec.check(cache)?;
    let offset = data_adjoint(cache, spec)?;
    let (n_slabs, m) = (cache.num_slabs(), cache.num_dofs());
    let k = cache.step();
    let alpha = spec.alpha;
    let mut p = zeros(cache);
    let mut history = Vec::new();
    let mut inner = 0;
    for it in 0.. {
        let u = ProjectedControl::new(p.clone(), spec);
        let ev = evaluate(cache, spec, &Control::Projected(u.clone()), &offset)?;
        let target = Control::Projected(ProjectedControl::new(ev.p, spec));
        let residual = control_distance(cache, &Control::Projected(u.clone()), &target)?;
        history.push(record(cache, &u, it, residual, Some(ev.objective), inner)?);
        if residual <= tol {
            return finish(cache, "semismooth-newton", u, history);
        }
        if it >= max_iter {
            return Err(Error::NotConverged {
                method: "semismooth Newton",
                iterations: it,
                residual,
                target: tol,
            });
        }

        let mut active_loads = zeros(cache);
        let mut inactive = Vec::with_capacity(n_slabs);
        for n in 1..=n_slabs {
            let snap = cache.snapshot(n);
            let cut = cut_decompose(snap, p.slab(n), alpha, spec.lower, spec.upper);
            for (o, v) in active_loads.slab_mut(n).iter_mut().zip(cut.active_load(snap)?) {
                *o = k * v;
            }
            inactive.push(cut.inactive_mass(snap, cache.pattern())?);
        }
        let mut rhs = adjoint_of_state(cache, spec, &state(cache, &active_loads)?)?;
        rhs.axpy(1.0, &offset);
        let apply = |x: &[f64]| -> Vec<f64> {
            let mut loads = zeros(cache);
            for n in 1..=n_slabs {
                let dst = loads.slab_mut(n);
                inactive[n - 1].mul_vec_into(&x[(n - 1) * m..n * m], dst);
                dst.iter_mut().for_each(|v| *v *= -k / alpha);
            }
            let y = state(cache, &loads).expect(CHECKED);
            let kx = adjoint_of_state(cache, spec, &y).expect(CHECKED);
            x.iter().zip(kx.as_slice()).map(|(a, b)| a - b).collect()
        };
        let mut x = p.clone().into_vec();
        let rep = gmres(
            apply,
            |a, b| flat_inner(cache, a, b),
            rhs.as_slice(),
            &mut x,
            forcing(spec, residual, tol),
            GMRES_RESTART,
            KRYLOV_MAX_ITER,
        )
        .map_err(krylov_error("GMRES"))?;
        inner = rep.iterations;
        p = DgFunction::from_flat(n_slabs, m, x)?;
    }
    unreachable!()
}

/// Damped fixed-point iteration p ← (1 − θ) p + θ p(P(−p/α)) from p = 0,
/// stopped once the control P(−p/α) has residual ≤ `tol`.
pub fn solve_fixed_point(
    cache: &SnapshotCache,
    spec: &ControlProblemSpec,
    theta: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(ProjectedControl, SolveReport)> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::InvalidParameter(format!("damping must lie in (0, 1], got {theta}")));
    }
    spec.check(cache)?;
    let offset = data_adjoint(cache, spec)?;
    let mut p = zeros(cache);
    let mut history = Vec::new();
    for it in 0.. {
        let u = ProjectedControl::new(p.clone(), spec);
        let ev = evaluate(cache, spec, &Control::Projected(u.clone()), &offset)?;
        let next = ProjectedControl::new(ev.p, spec);
        let residual = control_distance(cache, &Control::Projected(u.clone()), &Control::Projected(next.clone()))?;
        history.push(record(cache, &u, it, residual, Some(ev.objective), 0)?);
        if residual <= tol {
            return finish(cache, "fixed-point", u, history);
        }
        if it >= max_iter {
            return Err(Error::NotConverged {
                method: "fixed point",
                iterations: it,
                residual,
                target: tol,
            });
        }
        p.scale(1.0 - theta);
        p.axpy(theta, &next.p);
    }
    unreachable!()
}

/// Terminal-tracking problem. Without bounds: CG on
/// (α I + S_T* S_T) u = S_T* y_T in ⟨·,·⟩_{h,k}, one forward and one backward
/// sweep per iteration. With bounds: [`solve_semismooth_newton`].
pub fn solve_terminal(
    cache: &SnapshotCache,
    spec: &ControlProblemSpec,
    tol: f64,
    max_iter: usize,
) -> Result<(ProjectedControl, SolveReport)> {
    let Target::Terminal { values } = &spec.target else {
        return Err(Error::InvalidParameter("terminal solve needs terminal data".into()));
    };
    spec.check(cache)?;
    if !spec.is_unconstrained() {
        let (u, mut report) = solve_semismooth_newton(cache, spec, tol, max_iter)?;
        report.method = "semismooth-newton-terminal".into();
        return Ok((u, report));
    }
    let (n_slabs, m) = (cache.num_slabs(), cache.num_dofs());
    let alpha = spec.alpha;
    let rhs = apply_terminal_adjoint(cache, values)?;
    let apply = |x: &[f64]| -> Vec<f64> {
        let u = DgFunction::from_flat(n_slabs, m, x.to_vec()).expect(CHECKED);
        let y = state(cache, &mass_loads(cache, &u)).expect(CHECKED);
        let z = apply_terminal_adjoint(cache, y.slab(n_slabs)).expect(CHECKED);
        x.iter().zip(z.as_slice()).map(|(a, b)| alpha * a + b).collect()
    };
    let mut x = vec![0.0; n_slabs * m];
    let rep = conjugate_gradient(
        apply,
        |a, b| flat_inner(cache, a, b),
        rhs.as_slice(),
        &mut x,
        alpha * tol,
        max_iter,
    )
    .map_err(krylov_error("CG"))?;
    if !rep.converged {
        return Err(Error::NotConverged {
            method: "CG",
            iterations: rep.iterations,
            residual: rep.final_residual / alpha,
            target: tol,
        });
    }
    let u = DgFunction::from_flat(n_slabs, m, x)?;
    let control = ProjectedControl::new(u.map(|v| -alpha * v), spec);
    let objective = evaluate_objective(cache, spec, &Control::Nodal(u))?;
    let mut history: Vec<IterationRecord> = rep
        .history
        .iter()
        .enumerate()
        .map(|(i, r)| IterationRecord {
            iteration: i,
            residual: r / alpha,
            objective: None,
            lower_fraction: 0.0,
            upper_fraction: 0.0,
            inner_iterations: 0,
        })
        .collect();
    if let Some(last) = history.last_mut() {
        last.objective = Some(objective);
    }
    finish(cache, "conjugate-gradient", control, history)
}
