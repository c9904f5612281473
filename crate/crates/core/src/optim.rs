//! Derivative-free minimization and finite-difference derivatives.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadOptions {
    /// Initial simplex offset per coordinate.
    pub steps: Vec<f64>,
    /// Largest vertex distance from the best vertex at convergence.
    pub x_tol: f64,
    /// Largest function spread across the simplex at convergence.
    pub f_tol: f64,
    pub max_evals: usize,
    /// Fresh simplexes built around the optimum after convergence.
    pub restarts: usize,
}

impl NelderMeadOptions {
    pub fn new(steps: Vec<f64>) -> Self {
        Self {
            steps,
            x_tol: 1e-9,
            f_tol: 1e-10,
            max_evals: 100_000,
            restarts: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub converged: bool,
}

/// Minimizes `f` from `x0`. Non-finite function values are treated as
/// `+inf`, so infeasible regions simply repel the simplex.
pub fn nelder_mead(f: impl Fn(&[f64]) -> f64, x0: &[f64], opts: &NelderMeadOptions) -> Minimum {
    let n = x0.len();
    assert_eq!(opts.steps.len(), n, "one step per coordinate");
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    if n == 0 {
        return Minimum {
            x: vec![],
            f: eval(x0),
            evals: 1,
            converged: true,
        };
    }
    let mut best = x0.to_vec();
    let mut evals = 0;
    let mut converged = false;
    let mut fbest = f64::INFINITY;
    for round in 0..=opts.restarts {
        let scale = if round == 0 { 1.0 } else { 0.1 };
        let (x, fx, used, ok) = simplex_run(&eval, &best, opts, scale, opts.max_evals - evals);
        evals += used;
        let improved = fx < fbest - opts.f_tol;
        best = x;
        fbest = fx;
        converged = ok;
        if !ok || evals >= opts.max_evals || (round > 0 && !improved) {
            break;
        }
    }
    Minimum {
        x: best,
        f: fbest,
        evals,
        converged,
    }
}

fn simplex_run(
    f: &impl Fn(&[f64]) -> f64,
    x0: &[f64],
    opts: &NelderMeadOptions,
    scale: f64,
    budget: usize,
) -> (Vec<f64>, f64, usize, bool) {
    let n = x0.len();
    let nf = n as f64;
    // Adaptive coefficients keep the method effective in higher dimensions.
    let (rho, chi, psi, sigma) = (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf);
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    pts.push(x0.to_vec());
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += scale * opts.steps[i];
        pts.push(p);
    }
    let mut fv: Vec<f64> = pts.iter().map(|p| f(p)).collect();
    let mut evals = n + 1;
    let mut order: Vec<usize> = (0..=n).collect();
    loop {
        order.sort_by(|&a, &b| fv[a].total_cmp(&fv[b]));
        let (ib, iw, is) = (order[0], order[n], order[n - 1]);
        let spread = fv[iw] - fv[ib];
        let diam = pts
            .iter()
            .map(|p| {
                p.iter()
                    .zip(&pts[ib])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if diam < opts.x_tol && spread.abs() <= opts.f_tol {
            return (pts[ib].clone(), fv[ib], evals, true);
        }
        if evals >= budget {
            return (pts[ib].clone(), fv[ib], evals, false);
        }
        let mut centroid = vec![0.0; n];
        for &k in &order[..n] {
            for (c, v) in centroid.iter_mut().zip(&pts[k]) {
                *c += v / nf;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&pts[iw])
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };
        let xr = along(rho);
        let fr = f(&xr);
        evals += 1;
        if fr < fv[ib] {
            let xe = along(rho * chi);
            let fe = f(&xe);
            evals += 1;
            if fe < fr {
                pts[iw] = xe;
                fv[iw] = fe;
            } else {
                pts[iw] = xr;
                fv[iw] = fr;
            }
            continue;
        }
        if fr < fv[is] {
            pts[iw] = xr;
            fv[iw] = fr;
            continue;
        }
        let (xc, fc, accept) = if fr < fv[iw] {
            let xc = along(rho * psi);
            let fc = f(&xc);
            (xc, fc, fc <= fr)
        } else {
            let xc = along(-psi);
            let fc = f(&xc);
            (xc, fc, fc < fv[iw])
        };
        evals += 1;
        if accept {
            pts[iw] = xc;
            fv[iw] = fc;
            continue;
        }
        let xb = pts[ib].clone();
        for &k in &order[1..] {
            for (p, b) in pts[k].iter_mut().zip(&xb) {
                *p = b + sigma * (*p - b);
            }
            fv[k] = f(&pts[k]);
        }
        evals += n;
    }
}

/// Default finite-difference step for coordinate value `x`.
#[inline]
pub fn fd_step(x: f64) -> f64 {
    1e-4 * x.abs().max(1.0)
}

/// Central-difference gradient.
pub fn gradient(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = fd_step(x[i]);
            p[i] = x[i] + h;
            let up = f(&p);
            p[i] = x[i] - h;
            let dn = f(&p);
            p[i] = x[i];
            (up - dn) / (2.0 * h)
        })
        .collect()
}

/// Central-difference Hessian.
pub fn hessian(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    let mut h = DMatrix::zeros(n, n);
    let mut p = x.to_vec();
    let f0 = f(x);
    for i in 0..n {
        let hi = fd_step(x[i]);
        p[i] = x[i] + hi;
        let up = f(&p);
        p[i] = x[i] - hi;
        let dn = f(&p);
        p[i] = x[i];
        h[(i, i)] = (up - 2.0 * f0 + dn) / (hi * hi);
        for j in 0..i {
            let hj = fd_step(x[j]);
            let mut at = |si: f64, sj: f64| {
                p[i] = x[i] + si * hi;
                p[j] = x[j] + sj * hj;
                let v = f(&p);
                p[i] = x[i];
                p[j] = x[j];
                v
            };
            let v = (at(1.0, 1.0) - at(1.0, -1.0) - at(-1.0, 1.0) + at(-1.0, -1.0)) / (4.0 * hi * hj);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    h
}

/// Fourth-order central-difference gradient.
fn gradient4(f: &impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = fd_step(x[i]);
            let mut at = |k: f64| {
                p[i] = x[i] + k * h;
                let v = f(&p);
                p[i] = x[i];
                v
            };
            (8.0 * (at(1.0) - at(-1.0)) - (at(2.0) - at(-2.0))) / (12.0 * h)
        })
        .collect()
}

/// Refines a simplex minimum with up to `max_iter` Newton steps on
/// finite-difference derivatives. A step is kept only if it does not raise
/// `f` beyond rounding.
pub fn newton_polish(f: impl Fn(&[f64]) -> f64, x: &[f64], max_iter: usize) -> Vec<f64> {
    let mut x = x.to_vec();
    let mut fx = f(&x);
    for _ in 0..max_iter {
        let g = DVector::from_vec(gradient4(&f, &x));
        let Some(chol) = hessian(&f, &x).cholesky() else {
            break;
        };
        let step = chol.solve(&g);
        if step.iter().any(|v| !v.is_finite()) {
            break;
        }
        let cand: Vec<f64> = x.iter().zip(step.iter()).map(|(a, d)| a - d).collect();
        let fc = f(&cand);
        // Near the optimum the decrease is below rounding noise.
        if !(fc <= fx + 64.0 * f64::EPSILON * fx.abs().max(1.0)) {
            break;
        }
        let small = step.amax() < 1e-12;
        x = cand;
        fx = fc;
        if small {
            break;
        }
    }
    x
}

/// Inverse of a symmetric positive-definite matrix.
pub fn spd_inverse(m: DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("information matrix".into()));
    }
    match m.clone().cholesky() {
        Some(c) => Ok(c.inverse()),
        None => m.try_inverse().ok_or(Error::SingularInformation),
    }
}
