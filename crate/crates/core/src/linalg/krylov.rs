//! Conjugate gradients and restarted GMRES on flat vectors, with the inner
//! product supplied by the caller.

/// Convergence record of a Krylov solve. Residual norms are measured in the
/// caller's inner product.
#[derive(Debug, Clone, Default)]
pub struct KrylovReport {
    pub iterations: usize,
    pub converged: bool,
    pub initial_residual: f64,
    pub final_residual: f64,
    pub history: Vec<f64>,
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Preconditioner-free CG for an operator that is self-adjoint and positive
/// definite in `inner`. Stops when `|r| <= tol` (absolute) or after
/// `max_iter` steps. `x` holds the initial guess on entry.
pub fn conjugate_gradient<A, I>(
    apply: A,
    inner: I,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<KrylovReport, usize>
where
    A: Fn(&[f64]) -> Vec<f64>,
    I: Fn(&[f64], &[f64]) -> f64,
{
    let ax = apply(x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut p = r.clone();
    let mut rr = inner(&r, &r);
    let r0 = rr.max(0.0).sqrt();
    let mut report = KrylovReport {
        initial_residual: r0,
        final_residual: r0,
        history: vec![r0],
        ..Default::default()
    };
    if r0 <= tol {
        report.converged = true;
        return Ok(report);
    }
    for it in 1..=max_iter {
        let ap = apply(&p);
        let pap = inner(&p, &ap);
        if !(pap > 0.0) || !pap.is_finite() {
            return Err(it);
        }
        let a = rr / pap;
        axpy(a, &p, x);
        axpy(-a, &ap, &mut r);
        let rr_new = inner(&r, &r);
        let res = rr_new.max(0.0).sqrt();
        report.iterations = it;
        report.final_residual = res;
        report.history.push(res);
        if res <= tol {
            report.converged = true;
            return Ok(report);
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
    }
    Ok(report)
}

/// Restarted GMRES(`restart`) with modified Gram-Schmidt orthogonalization in
/// `inner`. Stops when `|b - A x| <= tol` or after `max_iter` total steps.
pub fn gmres<A, I>(
    apply: A,
    inner: I,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    restart: usize,
    max_iter: usize,
) -> Result<KrylovReport, usize>
where
    A: Fn(&[f64]) -> Vec<f64>,
    I: Fn(&[f64], &[f64]) -> f64,
{
    let norm = |v: &[f64]| inner(v, v).max(0.0).sqrt();
    let restart = restart.max(1);
    let mut report = KrylovReport::default();
    let mut total = 0;
    loop {
        let ax = apply(x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let beta = norm(&r);
        if total == 0 {
            report.initial_residual = beta;
            report.history.push(beta);
        }
        report.final_residual = beta;
        if beta <= tol {
            report.converged = true;
            report.iterations = total;
            return Ok(report);
        }
        if total >= max_iter {
            report.iterations = total;
            return Ok(report);
        }
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        // Hessenberg columns after Givens rotations
        let mut h: Vec<Vec<f64>> = Vec::new();
        let mut cs: Vec<f64> = Vec::new();
        let mut sn: Vec<f64> = Vec::new();
        let mut g = vec![beta];
        let mut j = 0;
        while j < restart && total < max_iter {
            let mut w = apply(&basis[j]);
            let mut col = vec![0.0; j + 2];
            for (i, v) in basis.iter().enumerate() {
                let hij = inner(&w, v);
                col[i] = hij;
                axpy(-hij, v, &mut w);
            }
            let hn = norm(&w);
            col[j + 1] = hn;
            for i in 0..j {
                let t = cs[i] * col[i] + sn[i] * col[i + 1];
                col[i + 1] = -sn[i] * col[i] + cs[i] * col[i + 1];
                col[i] = t;
            }
            let d = col[j].hypot(col[j + 1]);
            if d == 0.0 || !d.is_finite() {
                return Err(total + 1);
            }
            let (c, s) = (col[j] / d, col[j + 1] / d);
            col[j] = d;
            col[j + 1] = 0.0;
            cs.push(c);
            sn.push(s);
            let gj = g[j];
            g[j] = c * gj;
            g.push(-s * gj);
            h.push(col);
            total += 1;
            j += 1;
            let res = g[j].abs();
            report.history.push(res);
            if res <= tol || hn == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / hn).collect());
        }
        // back substitution
        let mut yv = vec![0.0; j];
        for i in (0..j).rev() {
            let mut acc = g[i];
            for k in i + 1..j {
                acc -= h[k][i] * yv[k];
            }
            yv[i] = acc / h[i][i];
        }
        for (k, yk) in yv.iter().enumerate() {
            axpy(*yk, &basis[k], x);
        }
    }
}
