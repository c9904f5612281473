//! Andersen–Gill (semiparametric) counterparts of the carryover tests.
//!
//! The baseline rate is left unspecified. Everything is computed on the risk
//! sets at the distinct event times `t*_1 < ... < t*_R`, with Breslow
//! handling of ties.

use std::cell::RefCell;
use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimate::{fit_random, PHI_FLOOR};
use crate::exposure::{indicator_unchecked, observed_in_window};
use crate::optim::{hessian, nelder_mead, spd_inverse, NelderMeadOptions};
use crate::rng::{substream, Domain};
use crate::simulate::{sample_frailties, simulate_null_process, PiecewiseConstantRate};
use crate::stats::normal_p_value;
use crate::types::{
    Alternative, BaselineFamily, CarryoverSpec, Dataset, FitResult, FrailtySpec, ModelKind,
    PSource, TestResult,
};

/// Risk-set summary at each distinct event time.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskSetTable {
    pub distinct_times: Vec<f64>,
    /// Events at each time, across subjects.
    pub dn: Vec<usize>,
    /// Subjects at risk at each time.
    pub y: Vec<usize>,
    /// Subjects at risk with `Z = 1`; all zero when no window was given.
    pub zdot: Vec<f64>,
}

impl RiskSetTable {
    /// Breslow increments `dN / Y`.
    pub fn increments(&self) -> Vec<f64> {
        self.dn.iter().zip(&self.y).map(|(&n, &y)| n as f64 / y as f64).collect()
    }

    /// Running sum of the increments (Nelson–Aalen type baseline).
    pub fn cumulative(&self) -> Vec<f64> {
        self.increments()
            .iter()
            .scan(0.0, |acc, v| {
                *acc += v;
                Some(*acc)
            })
            .collect()
    }
}

fn distinct_event_times(d: &Dataset) -> (Vec<f64>, Vec<usize>) {
    let mut all: Vec<f64> = d.subjects().iter().flat_map(|h| h.event_times().iter().copied()).collect();
    all.sort_by(f64::total_cmp);
    let mut times: Vec<f64> = Vec::new();
    let mut dn: Vec<usize> = Vec::new();
    for t in all {
        if times.last() == Some(&t) {
            *dn.last_mut().unwrap() += 1;
        } else {
            times.push(t);
            dn.push(1);
        }
    }
    (times, dn)
}

/// Risk sets with the carryover indicator of every at-risk subject.
pub fn risk_set_table(d: &Dataset, c: Option<&CarryoverSpec>) -> Result<RiskSetTable> {
    d.ensure_valid()?;
    if let Some(c) = c {
        c.validate()?;
    }
    if d.total_events() == 0 {
        return Err(Error::NoEvents);
    }
    let (times, dn) = distinct_event_times(d);
    let mut y = vec![0usize; times.len()];
    let mut zdot = vec![0.0; times.len()];
    for h in d.subjects() {
        for (r, &t) in times.iter().enumerate() {
            if t > h.tau() {
                break;
            }
            if h.at_risk(t) {
                y[r] += 1;
                if let Some(c) = c {
                    zdot[r] += f64::from(indicator_unchecked(h, t, c));
                }
            }
        }
    }
    if let Some(r) = y.iter().position(|&v| v == 0) {
        return Err(Error::InvalidInput(format!("no subject at risk at event time {}", times[r])));
    }
    Ok(RiskSetTable {
        distinct_times: times,
        dn,
        y,
        zdot,
    })
}

/// Breslow baseline increments `dN(t*_r) / Y(t*_r)`.
pub fn breslow_increments(d: &Dataset) -> Result<RiskSetTable> {
    risk_set_table(d, None)
}

/// Per-subject view of the risk sets: which distinct times each subject is
/// at risk at, and its indicator there.
struct SubjectRisk {
    /// `(r, z)` for every distinct time `r` at which the subject is at risk.
    at: Vec<(usize, u8)>,
    n: usize,
    obs: usize,
}

fn subject_risk(d: &Dataset, c: &CarryoverSpec, times: &[f64]) -> Vec<SubjectRisk> {
    d.subjects()
        .iter()
        .map(|h| SubjectRisk {
            at: times
                .iter()
                .enumerate()
                .take_while(|(_, &t)| t <= h.tau())
                .filter(|(_, &t)| h.at_risk(t))
                .map(|(r, &t)| (r, indicator_unchecked(h, t, c)))
                .collect(),
            n: h.n_events(),
            obs: observed_in_window(h, c),
        })
        .collect()
}

/// `(Obs, Exp)` with per-subject weights `(1 + phi n_i) / (1 + phi L_i)`,
/// where `L_i` sums the Breslow increments over the subject's at-risk times.
fn weighted_numerator(subjects: &[SubjectRisk], inc: &[f64], phi: f64) -> (f64, f64) {
    let mut obs = 0.0;
    let mut exp = 0.0;
    for s in subjects {
        let (mut lam, mut zsum) = (0.0, 0.0);
        for &(r, z) in &s.at {
            lam += inc[r];
            if z == 1 {
                zsum += inc[r];
            }
        }
        let w = (1.0 + phi * s.n as f64) / (1.0 + phi * lam);
        obs += s.obs as f64;
        exp += w * zsum;
    }
    (obs, exp)
}

/// Partial-likelihood score at `beta = 0` in Observed − Expected form, with
/// the usual information `sum_r dN_r p_r (1 - p_r)`, `p_r = Zdot_r / Y_r`.
pub fn ag_score(d: &Dataset, c: &CarryoverSpec) -> Result<(f64, TestResult)> {
    let table = risk_set_table(d, Some(c))?;
    let inc = table.increments();
    let subjects = subject_risk(d, c, &table.distinct_times);
    let (obs, exp) = weighted_numerator(&subjects, &inc, 0.0);
    let var: f64 = table
        .zdot
        .iter()
        .zip(&table.y)
        .zip(&table.dn)
        .map(|((&z, &y), &n)| {
            let p = z / y as f64;
            n as f64 * p * (1.0 - p)
        })
        .sum();
    if !(var > 0.0) {
        return Err(Error::ZeroVariance("no at-risk subject inside a window at any event time".into()));
    }
    Ok((obs - exp, TestResult::score(obs, exp, var, Alternative::Greater, d.content_hash())))
}

/// Gamma-frailty analogue of [`ag_score`]: `(U, Obs, Exp)`.
pub fn ag_frailty_score(d: &Dataset, c: &CarryoverSpec, phi: f64) -> Result<(f64, f64, f64)> {
    if !(phi >= 0.0 && phi.is_finite()) {
        return Err(Error::InvalidInput(format!("phi must be >= 0, got {phi}")));
    }
    let table = risk_set_table(d, Some(c))?;
    let subjects = subject_risk(d, c, &table.distinct_times);
    let (obs, exp) = weighted_numerator(&subjects, &table.increments(), phi);
    Ok((obs - exp, obs, exp))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrailtyBootstrapOptions {
    /// Frailty variance; the parametric constant-baseline null estimate when `None`.
    pub phi: Option<f64>,
    pub replicates: usize,
    pub seed: u64,
    pub refractory: f64,
    pub alternative: Alternative,
}

impl Default for FrailtyBootstrapOptions {
    fn default() -> Self {
        Self {
            phi: None,
            replicates: 999,
            seed: 0,
            refractory: 0.0,
            alternative: Alternative::Greater,
        }
    }
}

/// [`ag_frailty_score`] with a parametric-bootstrap p-value. Replicates use
/// gamma frailties at `phi` and a baseline that is piecewise constant with
/// the Breslow masses spread over the gaps between distinct event times.
/// `variance` is the bootstrap variance of `U`, and `statistic` is `U`
/// standardized by it.
pub fn ag_frailty_score_test(d: &Dataset, c: &CarryoverSpec, opts: &FrailtyBootstrapOptions) -> Result<TestResult> {
    if opts.replicates == 0 {
        return Err(Error::InvalidInput("bootstrap needs at least one replicate".into()));
    }
    let mut notes = Vec::new();
    let phi = match opts.phi {
        Some(p) => p,
        None => {
            let null = fit_random(d, BaselineFamily::Constant, c, true)?;
            notes.push("phi taken from the constant-baseline parametric null fit".to_string());
            if null.boundary {
                0.0
            } else {
                null.params["phi"]
            }
        }
    };
    let (u, obs, exp) = ag_frailty_score(d, c, phi)?;
    let table = breslow_increments(d)?;
    let base = PiecewiseConstantRate::from_increments(&table.distinct_times, &table.increments())?;
    let frailty = if phi > 0.0 { FrailtySpec::Gamma { phi } } else { FrailtySpec::None };
    let reps: Vec<Option<f64>> = (0..opts.replicates as u64)
        .into_par_iter()
        .map(|r| {
            let subjects = d
                .subjects()
                .iter()
                .enumerate()
                .map(|(i, h)| {
                    let mut rng = substream(opts.seed, Domain::FrailtyBootstrap, r, i as u64);
                    let alpha = sample_frailties(&frailty, 1, &mut rng).ok()?[0];
                    Some(simulate_null_process(h.subject_id(), alpha, &base, opts.refractory, h.tau(), &mut rng))
                })
                .collect::<Option<Vec<_>>>()?;
            ag_frailty_score(&Dataset::new(subjects), c, phi).ok().map(|v| v.0)
        })
        .collect();
    let ok: Vec<f64> = reps.into_iter().flatten().collect();
    if ok.len() < 2 {
        return Err(Error::InvalidInput("too few successful bootstrap replicates".into()));
    }
    if ok.len() < opts.replicates {
        notes.push(format!("{} of {} bootstrap replicates failed and were skipped", opts.replicates - ok.len(), opts.replicates));
    }
    let mean = ok.iter().sum::<f64>() / ok.len() as f64;
    let var = ok.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (ok.len() - 1) as f64;
    if !(var > 0.0) {
        return Err(Error::ZeroVariance("bootstrap replicates of U are constant".into()));
    }
    let k = match opts.alternative {
        Alternative::Greater => ok.iter().filter(|&&v| v >= u).count(),
        Alternative::TwoSided => ok.iter().filter(|&&v| v.abs() >= u.abs()).count(),
    };
    Ok(TestResult {
        statistic: u / var.sqrt(),
        obs,
        exp,
        variance: var,
        p_value: (1 + k) as f64 / (ok.len() + 1) as f64,
        p_source: PSource::Bootstrap { replicates: ok.len() },
        alternative: opts.alternative,
        dataset_hash: d.content_hash(),
        notes,
    })
}

/// Covariate rows on the risk sets.
struct Design {
    /// Per distinct time: `(subject, x)` for every at-risk subject.
    risk: Vec<Vec<(usize, Vec<f64>)>>,
    /// Per distinct time: covariate rows of the subjects with an event there.
    events: Vec<Vec<Vec<f64>>>,
    p: usize,
}

fn design(d: &Dataset, covariates: &[String], carryover: Option<&CarryoverSpec>) -> Result<(Design, Vec<String>)> {
    d.ensure_valid()?;
    if d.total_events() == 0 {
        return Err(Error::NoEvents);
    }
    let mut names: Vec<String> = Vec::new();
    if let Some(c) = carryover {
        c.validate()?;
        names.push("beta".into());
    }
    for name in covariates {
        if names.contains(name) {
            names.push(format!("{name}#{}", names.len()));
        } else {
            names.push(name.clone());
        }
    }
    if names.is_empty() {
        return Err(Error::InvalidInput("no covariates and no carryover term".into()));
    }
    let fixed: Vec<Vec<f64>> = d
        .subjects()
        .iter()
        .map(|h| {
            covariates
                .iter()
                .map(|n| {
                    h.covariate(n).ok_or_else(|| {
                        Error::InvalidInput(format!("subject {} lacks covariate {n}", h.subject_id()))
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let row = |i: usize, t: f64| {
        let mut x = Vec::with_capacity(names.len());
        if let Some(c) = carryover {
            x.push(f64::from(indicator_unchecked(&d.subjects()[i], t, c)));
        }
        x.extend_from_slice(&fixed[i]);
        x
    };
    let (times, _) = distinct_event_times(d);
    let mut risk = vec![Vec::new(); times.len()];
    let mut events = vec![Vec::new(); times.len()];
    for (i, h) in d.subjects().iter().enumerate() {
        for (r, &t) in times.iter().enumerate() {
            if t > h.tau() {
                break;
            }
            if h.at_risk(t) {
                risk[r].push((i, row(i, t)));
            }
        }
        for &t in h.event_times() {
            let r = times.partition_point(|&s| s < t);
            events[r].push(row(i, t));
        }
    }
    let p = names.len();
    Ok((Design { risk, events, p }, names))
}

/// Log partial likelihood, score and information (Breslow ties).
fn partial_likelihood(des: &Design, beta: &[f64]) -> (f64, DVector<f64>, DMatrix<f64>) {
    let p = des.p;
    let mut ll = 0.0;
    let mut u = DVector::zeros(p);
    let mut info = DMatrix::zeros(p, p);
    for (risk, evs) in des.risk.iter().zip(&des.events) {
        let dn = evs.len() as f64;
        let (mut s0, mut s1, mut s2) = (0.0, DVector::zeros(p), DMatrix::zeros(p, p));
        // shift by the largest linear predictor for stability
        let shift = risk
            .iter()
            .map(|(_, x)| x.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max);
        for (_, x) in risk {
            let eta: f64 = x.iter().zip(beta).map(|(a, b)| a * b).sum();
            let w = (eta - shift).exp();
            let xv = DVector::from_column_slice(x);
            s0 += w;
            s1 += w * &xv;
            s2 += w * &xv * xv.transpose();
        }
        for x in evs {
            let xv = DVector::from_column_slice(x);
            ll += xv.dot(&DVector::from_column_slice(beta));
            u += xv;
        }
        ll -= dn * (s0.ln() + shift);
        let mean = &s1 / s0;
        u -= dn * &mean;
        info += dn * (&s2 / s0 - &mean * mean.transpose());
    }
    (ll, u, info)
}

/// Log partial likelihood at `beta` for the given covariates (carryover
/// indicator first when `carryover` is given).
pub fn ag_log_partial_likelihood(
    d: &Dataset,
    covariates: &[String],
    carryover: Option<&CarryoverSpec>,
    beta: &[f64],
) -> Result<f64> {
    let (des, _) = design(d, covariates, carryover)?;
    if beta.len() != des.p {
        return Err(Error::InvalidInput(format!("expected {} coefficients, got {}", des.p, beta.len())));
    }
    Ok(partial_likelihood(&des, beta).0)
}

fn check_rank(info: &DMatrix<f64>) -> Result<()> {
    let eig = info.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let min = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if !(max > 0.0) || min <= 1e-10 * max {
        Err(Error::SingularInformation)
    } else {
        Ok(())
    }
}

/// Newton–Raphson fit of the Andersen–Gill model with the carryover
/// indicator (when `carryover` is given) and fixed subject covariates.
pub fn fit_ag(d: &Dataset, covariates: &[String], carryover: Option<&CarryoverSpec>) -> Result<FitResult> {
    const MAX_ITER: usize = 50;
    let (des, names) = design(d, covariates, carryover)?;
    let mut beta = vec![0.0; des.p];
    let (mut ll, mut u, mut info) = partial_likelihood(&des, &beta);
    check_rank(&info)?;
    let mut evals = 1;
    let mut converged = false;
    for _ in 0..MAX_ITER {
        check_rank(&info)?;
        let step = info.clone().cholesky().ok_or(Error::SingularInformation)?.solve(&u);
        let mut scale = 1.0;
        let (next, nll, nu, ninfo) = loop {
            let cand: Vec<f64> = beta.iter().zip(step.iter()).map(|(b, s)| b + scale * s).collect();
            let (l2, u2, i2) = partial_likelihood(&des, &cand);
            evals += 1;
            if l2.is_finite() && l2 >= ll - 1e-12 || scale < 1e-8 {
                break (cand, l2, u2, i2);
            }
            scale *= 0.5;
        };
        let moved = step.iter().map(|s| (scale * s).abs()).fold(0.0, f64::max);
        beta = next;
        let change = (nll - ll).abs();
        ll = nll;
        u = nu;
        info = ninfo;
        if moved < 1e-9 || change < 1e-12 {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence { iterations: MAX_ITER });
    }
    check_rank(&info)?;
    let cov = spd_inverse(info)?;
    let mut params = BTreeMap::new();
    let mut ses = BTreeMap::new();
    for (k, name) in names.iter().enumerate() {
        params.insert(name.clone(), beta[k]);
        ses.insert(name.clone(), cov[(k, k)].sqrt());
    }
    let mut fit = FitResult::new(
        ModelKind::AndersenGill,
        carryover.map(|c| c.delta),
        params,
        ses,
        ll,
        des.p,
        true,
        evals,
        d.content_hash(),
    );
    fit.notes.push("log partial likelihood; AIC compares only fits with identical risk sets".into());
    Ok(fit)
}

/// Semiparametric gamma-frailty fit of `(beta, phi)`.
///
/// The baseline is profiled out as point masses at the distinct event
/// times: for fixed `(beta, phi)` the masses solve the fixed point
/// `dL_r = dN_r / sum_i Y_i(t_r) e^{beta Z_i(t_r)} (1 + phi n_i) / (1 + phi R_i)`,
/// and the resulting marginal log likelihood is maximized over
/// `(beta, log phi)`.
pub fn fit_ag_frailty(d: &Dataset, c: &CarryoverSpec) -> Result<FitResult> {
    let table = risk_set_table(d, Some(c))?;
    let subjects = subject_risk(d, c, &table.distinct_times);
    let dn: Vec<f64> = table.dn.iter().map(|&v| v as f64).collect();
    let warm = RefCell::new(table.increments());
    let profile = |beta: f64, phi: f64| -> f64 {
        let eb = beta.exp();
        let mut mass = warm.borrow().clone();
        let mut r_i = vec![0.0; subjects.len()];
        for _ in 0..500 {
            for (s, r) in subjects.iter().zip(r_i.iter_mut()) {
                *r = s.at.iter().map(|&(k, z)| if z == 1 { eb * mass[k] } else { mass[k] }).sum();
            }
            let mut denom = vec![0.0; mass.len()];
            for (s, &r) in subjects.iter().zip(&r_i) {
                let w = if phi > PHI_FLOOR { (1.0 + phi * s.n as f64) / (1.0 + phi * r) } else { 1.0 };
                for &(k, z) in &s.at {
                    denom[k] += w * if z == 1 { eb } else { 1.0 };
                }
            }
            let mut delta: f64 = 0.0;
            for k in 0..mass.len() {
                let v = dn[k] / denom[k];
                delta = delta.max((v - mass[k]).abs() / v);
                mass[k] = v;
            }
            if delta < 1e-11 {
                break;
            }
        }
        for (s, r) in subjects.iter().zip(r_i.iter_mut()) {
            *r = s.at.iter().map(|&(k, z)| if z == 1 { eb * mass[k] } else { mass[k] }).sum();
        }
        let log_mass: f64 = dn.iter().zip(&mass).map(|(n, m)| n * m.ln()).sum();
        let mut ll = log_mass;
        for (s, &r) in subjects.iter().zip(&r_i) {
            let n = s.n as f64;
            ll += beta * s.obs as f64;
            if phi > PHI_FLOOR {
                ll += (0..s.n).map(|k| (k as f64 * phi).ln_1p()).sum::<f64>() - (n + 1.0 / phi) * (phi * r).ln_1p();
            } else {
                ll -= r;
            }
        }
        *warm.borrow_mut() = mass;
        ll
    };
    let lo = PHI_FLOOR.ln();
    let objective = |u: &[f64]| {
        let pen = if u[1] < lo { 1e2 * (lo - u[1]).powi(2) } else { 0.0 };
        -profile(u[0], u[1].max(lo).exp()) + pen
    };
    let mut opts = NelderMeadOptions::new(vec![0.1, 0.3]);
    opts.x_tol = 1e-7;
    opts.f_tol = 1e-9;
    let min = nelder_mead(objective, &[0.0, 0.3f64.ln()], &opts);
    let beta = min.x[0];
    let phi = min.x[1].max(lo).exp();
    let boundary = phi < crate::estimate::PHI_BOUNDARY;
    let ll = profile(beta, phi);
    let mut params = BTreeMap::new();
    params.insert("beta".to_string(), beta);
    params.insert("phi".to_string(), phi);
    let mut ses = BTreeMap::new();
    let mut notes = vec!["baseline profiled as point masses at the distinct event times".to_string()];
    let x = if boundary { vec![beta] } else { min.x.clone() };
    let h = hessian(
        |v: &[f64]| if boundary { -profile(v[0], phi) } else { -profile(v[0], v[1].exp()) },
        &x,
    );
    match spd_inverse(h) {
        Ok(cov) => {
            ses.insert("beta".to_string(), cov[(0, 0)].sqrt());
            if !boundary {
                ses.insert("phi".to_string(), phi * cov[(1, 1)].sqrt());
            }
        }
        Err(_) => notes.push("profile information not positive definite; standard errors omitted".into()),
    }
    if boundary {
        notes.push("frailty variance estimate on its lower bound".into());
    }
    let mut fit = FitResult::new(
        ModelKind::AndersenGillFrailty,
        Some(c.delta),
        params,
        ses,
        ll,
        2,
        min.converged,
        min.evals,
        d.content_hash(),
    );
    fit.boundary = boundary;
    fit.notes = notes;
    Ok(fit)
}

/// Normal-reference p-value for an `ag_score` result under a different
/// alternative.
pub fn ag_p_value(t: &TestResult, alternative: Alternative) -> f64 {
    normal_p_value(t.statistic, alternative)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::EventHistory;

    fn two() -> Dataset {
        Dataset::new(vec![
            EventHistory::new("1", vec![0.5, 0.6], 1.0),
            EventHistory::new("2", vec![], 1.0),
        ])
    }

    #[test]
    fn breslow_examples() {
        let d = Dataset::new(vec![EventHistory::new("1", vec![1.0], 2.0), EventHistory::new("2", vec![], 2.0)]);
        let t = breslow_increments(&d).unwrap();
        assert_eq!(t.distinct_times, vec![1.0]);
        assert_eq!(t.increments(), vec![0.5]);
        let single = Dataset::new(vec![EventHistory::new("1", vec![0.3, 1.0, 1.7], 2.0)]);
        assert_eq!(breslow_increments(&single).unwrap().cumulative(), vec![1.0, 2.0, 3.0]);
        let tied = Dataset::new(vec![EventHistory::new("1", vec![1.0], 2.0), EventHistory::new("2", vec![1.0], 2.0)]);
        let t = breslow_increments(&tied).unwrap();
        assert_eq!((t.dn.clone(), t.y.clone()), (vec![2], vec![2]));
    }

    #[test]
    fn ag_score_hand_example() {
        let (u, t) = ag_score(&two(), &CarryoverSpec::new(0.2)).unwrap();
        assert!((u - 0.5).abs() < 1e-15);
        assert_eq!(t.obs, 1.0);
    }

    #[test]
    fn frailty_score_at_zero_is_ag_score() {
        let c = CarryoverSpec::new(0.2);
        let (u, _) = ag_score(&two(), &c).unwrap();
        assert_eq!(ag_frailty_score(&two(), &c, 0.0).unwrap().0, u);
        assert!(ag_frailty_score(&two(), &c, -1.0).is_err());
    }

    #[test]
    fn frailty_single_subject() {
        let d = Dataset::new(vec![EventHistory::new("1", vec![0.5, 0.6, 0.9], 1.0)]);
        let c = CarryoverSpec::new(0.2);
        let (u, obs, exp) = ag_frailty_score(&d, &c, 0.7).unwrap();
        // at risk at every distinct time with Y = 1; Z = 1 at 0.6 only
        assert_eq!(obs, 1.0);
        assert!((exp - 1.0).abs() < 1e-15);
        assert!(u.abs() < 1e-15);
    }

    #[test]
    fn refractory_subjects_leave_the_risk_set() {
        let d = Dataset::new(vec![
            EventHistory::new("1", vec![0.5], 2.0).with_resolutions(vec![1.5]),
            EventHistory::new("2", vec![1.0], 2.0),
        ]);
        let t = breslow_increments(&d).unwrap();
        assert_eq!(t.y, vec![2, 1]);
    }

    #[test]
    fn duplicate_covariate_is_singular() {
        let d = Dataset::new(
            (0..20)
                .map(|i| {
                    EventHistory::new(format!("s{i}"), vec![0.1 + 0.01 * i as f64, 0.5 + 0.02 * i as f64], 1.0)
                        .with_covariate("x", (i % 2) as f64)
                        .with_covariate("y", (i % 2) as f64)
                })
                .collect(),
        );
        let e = fit_ag(&d, &["x".into(), "y".into()], None);
        assert!(matches!(e, Err(Error::SingularInformation)), "{e:?}");
    }

    #[test]
    fn score_root_at_zero() {
        // U(0) = 0 when no event falls in a window but windows are occupied
        let d = Dataset::new(vec![
            EventHistory::new("1", vec![0.1, 0.5], 1.0),
            EventHistory::new("2", vec![0.15, 0.7], 1.0),
        ]);
        let c = CarryoverSpec::new(0.1);
        let (u, _) = ag_score(&d, &c).unwrap();
        assert!(u < 0.0);
    }
}
