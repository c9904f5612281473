//! Likelihoods and maximum likelihood fits.
//!
//! Four likelihoods share one set of per-subject summaries:
//!
//! * the fixed-effects profile likelihood, with every `alpha_i` replaced by
//!   its maximizer `n_i / R_i`;
//! * the full fixed-effects likelihood at explicit `alpha_i`;
//! * the Poisson likelihood (no heterogeneity);
//! * the gamma random-effects likelihood with `alpha_i` integrated out.
//!
//! Positive parameters are optimized on the log scale. Standard errors come
//! from a central-difference Hessian on that scale, mapped back by the delta
//! method.

use std::collections::BTreeMap;

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::exposure::{at_risk_segments, observed_in_window, window_integral_grads, window_lengths, Segment};
use crate::optim::{hessian, nelder_mead, newton_polish, spd_inverse, NelderMeadOptions};
use crate::types::{BaselineFamily, BaselineSpec, CarryoverSpec, Dataset, FitResult, ModelKind};

/// Lower bound on the frailty variance during optimization.
pub const PHI_FLOOR: f64 = 1e-8;
/// Frailty estimates below this are reported as on the boundary.
pub const PHI_BOUNDARY: f64 = 1e-6;
const PHI_CEIL: f64 = 1e8;
const BETA_BOUND: f64 = 25.0;
/// Largest event count for which the rising-factorial table is used.
const TABLE_MAX_N: usize = 20_000;

#[derive(Debug, Clone)]
pub(crate) struct SubjectPrep {
    pub n: usize,
    pub obs: usize,
    pub sum_log_t: f64,
    pub on_len: f64,
    pub off_len: f64,
    pub at_risk_len: f64,
    pub segs: Vec<Segment>,
}

/// Per-subject quantities that do not depend on parameters.
#[derive(Debug, Clone)]
pub(crate) struct Prepared {
    pub subjects: Vec<SubjectPrep>,
    pub total_events: usize,
    pub obs: usize,
    pub max_n: usize,
    pub hash: String,
    pub delta: f64,
}

impl Prepared {
    pub fn new(d: &Dataset, c: &CarryoverSpec) -> Result<Self> {
        d.ensure_valid()?;
        c.validate()?;
        let subjects: Vec<SubjectPrep> = d
            .subjects()
            .iter()
            .map(|h| {
                let segs = at_risk_segments(h, c);
                let (on_len, at_risk_len) = window_lengths(h, c);
                SubjectPrep {
                    n: h.n_events(),
                    obs: observed_in_window(h, c),
                    sum_log_t: h.event_times().iter().map(|t| t.ln()).sum(),
                    on_len,
                    off_len: (at_risk_len - on_len).max(0.0),
                    at_risk_len,
                    segs,
                }
            })
            .collect();
        Ok(Self {
            total_events: subjects.iter().map(|s| s.n).sum(),
            obs: subjects.iter().map(|s| s.obs).sum(),
            max_n: subjects.iter().map(|s| s.n).max().unwrap_or(0),
            hash: d.content_hash(),
            delta: c.delta,
            subjects,
        })
    }

    pub fn require_events(&self) -> Result<()> {
        if self.total_events == 0 {
            Err(Error::NoEvents)
        } else {
            Ok(())
        }
    }

    /// `(off, on)` baseline mass outside and inside windows.
    #[inline]
    pub fn integrals(s: &SubjectPrep, b: &BaselineSpec) -> (f64, f64) {
        match *b {
            BaselineSpec::Constant { gamma } => (gamma * s.off_len, gamma * s.on_len),
            BaselineSpec::PowerLaw { .. } => {
                let (mut off, mut on) = (0.0, 0.0);
                for g in &s.segs {
                    let v = b.cum(g.start, g.end);
                    if g.in_window {
                        on += v;
                    } else {
                        off += v;
                    }
                }
                (off, on)
            }
        }
    }

    /// Gradients of `(off, on)` in the baseline parameters.
    pub fn integral_grads(s: &SubjectPrep, b: &BaselineSpec) -> ([f64; 2], [f64; 2]) {
        match b {
            BaselineSpec::Constant { .. } => ([s.off_len, 0.0], [s.on_len, 0.0]),
            BaselineSpec::PowerLaw { .. } => window_integral_grads(&s.segs, b),
        }
    }

    /// `sum_j log rho0(t_j)`.
    #[inline]
    pub fn sum_log_rate(s: &SubjectPrep, b: &BaselineSpec) -> f64 {
        if s.n == 0 {
            return 0.0;
        }
        let n = s.n as f64;
        match *b {
            BaselineSpec::Constant { gamma } => n * gamma.ln(),
            BaselineSpec::PowerLaw { gamma1, gamma2 } => {
                n * (gamma1.ln() + gamma2.ln()) + (gamma2 - 1.0) * s.sum_log_t
            }
        }
    }

    pub fn profile_fixed(&self, b: &BaselineSpec, beta: f64) -> f64 {
        let eb = beta.exp();
        self.subjects
            .iter()
            .filter(|s| s.n > 0)
            .map(|s| {
                let (off, on) = Self::integrals(s, b);
                Self::sum_log_rate(s, b) + beta * s.obs as f64 - s.n as f64 * (off + eb * on).ln()
            })
            .sum()
    }

    pub fn poisson(&self, b: &BaselineSpec, beta: f64) -> f64 {
        let eb = beta.exp();
        self.subjects
            .iter()
            .map(|s| {
                let (off, on) = Self::integrals(s, b);
                Self::sum_log_rate(s, b) + beta * s.obs as f64 - (off + eb * on)
            })
            .sum()
    }

    pub fn random(&self, b: &BaselineSpec, beta: f64, phi: f64) -> f64 {
        if phi <= PHI_FLOOR {
            return self.poisson(b, beta);
        }
        let eb = beta.exp();
        let inv = 1.0 / phi;
        let table = (self.max_n <= TABLE_MAX_N).then(|| log_rising_table(phi, self.max_n));
        self.subjects
            .iter()
            .map(|s| {
                let (off, on) = Self::integrals(s, b);
                let r = off + eb * on;
                let n = s.n as f64;
                let rising = match &table {
                    Some(t) => t[s.n],
                    None => ln_gamma(n + inv) - ln_gamma(inv) + n * phi.ln(),
                };
                Self::sum_log_rate(s, b) + beta * s.obs as f64 + rising - (n + inv) * (phi * r).ln_1p()
            })
            .sum()
    }
}

/// `t[n] = sum_{k<n} ln(1 + k phi) = ln Gamma(n + 1/phi) - ln Gamma(1/phi) + n ln phi`.
fn log_rising_table(phi: f64, max_n: usize) -> Vec<f64> {
    let mut t = Vec::with_capacity(max_n + 1);
    let mut acc = 0.0;
    t.push(0.0);
    for k in 0..max_n {
        acc += (k as f64 * phi).ln_1p();
        t.push(acc);
    }
    t
}

fn finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(what.into()))
    }
}

/// Fixed-effects profile log likelihood; subjects without events add 0.
pub fn profile_loglik_fixed(d: &Dataset, b: &BaselineSpec, beta: f64, c: &CarryoverSpec) -> Result<f64> {
    b.validate()?;
    finite(Prepared::new(d, c)?.profile_fixed(b, beta), "fixed-effects profile log likelihood")
}

/// Fixed-effects log likelihood at explicit subject multipliers.
pub fn loglik_fixed_full(
    d: &Dataset,
    b: &BaselineSpec,
    alphas: &[f64],
    beta: f64,
    c: &CarryoverSpec,
) -> Result<f64> {
    b.validate()?;
    let p = Prepared::new(d, c)?;
    if alphas.len() != p.subjects.len() || alphas.iter().any(|&a| !(a > 0.0)) {
        return Err(Error::InvalidInput("one positive alpha per subject required".into()));
    }
    let eb = beta.exp();
    let v = p
        .subjects
        .iter()
        .zip(alphas)
        .map(|(s, &a)| {
            let (off, on) = Prepared::integrals(s, b);
            s.n as f64 * a.ln() + Prepared::sum_log_rate(s, b) + beta * s.obs as f64 - a * (off + eb * on)
        })
        .sum();
    finite(v, "fixed-effects log likelihood")
}

/// Poisson log likelihood, no heterogeneity.
pub fn loglik_poisson(d: &Dataset, b: &BaselineSpec, beta: f64, c: &CarryoverSpec) -> Result<f64> {
    b.validate()?;
    finite(Prepared::new(d, c)?.poisson(b, beta), "Poisson log likelihood")
}

/// Gamma random-effects log likelihood; the Poisson limit below `phi = 1e-8`.
pub fn loglik_random(d: &Dataset, b: &BaselineSpec, beta: f64, phi: f64, c: &CarryoverSpec) -> Result<f64> {
    b.validate()?;
    if !(phi >= 0.0) {
        return Err(Error::InvalidInput(format!("phi must be >= 0, got {phi}")));
    }
    finite(Prepared::new(d, c)?.random(b, beta, phi), "random-effects log likelihood")
}

/// Which parameters are free in a fit.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FitOptions {
    /// Hold `beta` at this value.
    pub beta: Option<f64>,
    /// Hold `phi` at this value (random-effects model only).
    pub phi: Option<f64>,
}

impl FitOptions {
    pub fn null() -> Self {
        Self {
            beta: Some(0.0),
            phi: None,
        }
    }

    fn from_flag(constrain_beta_zero: bool) -> Self {
        if constrain_beta_zero {
            Self::null()
        } else {
            Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum PhiMode {
    Absent,
    Free,
    Held(f64),
}

/// Map between the optimizer vector and model parameters.
#[derive(Debug, Clone)]
struct Layout {
    model: ModelKind,
    family: BaselineFamily,
    /// Baseline parameters held fixed (fixed-effects identifiability).
    gamma_held: Vec<Option<f64>>,
    beta: Option<f64>,
    phi: PhiMode,
}

impl Layout {
    fn new(model: ModelKind, family: BaselineFamily, opts: FitOptions) -> Self {
        let gamma_held = match (model, family) {
            (ModelKind::Fixed, BaselineFamily::Constant) => vec![Some(1.0)],
            (ModelKind::Fixed, BaselineFamily::PowerLaw) => vec![Some(1.0), None],
            (_, BaselineFamily::Constant) => vec![None],
            (_, BaselineFamily::PowerLaw) => vec![None, None],
        };
        let phi = match (model, opts.phi) {
            (ModelKind::Random, Some(v)) => PhiMode::Held(v),
            (ModelKind::Random, None) => PhiMode::Free,
            _ => PhiMode::Absent,
        };
        Self {
            model,
            family,
            gamma_held,
            beta: opts.beta,
            phi,
        }
    }

    /// `(baseline, beta, phi, penalty)` for optimizer vector `u`.
    fn unpack(&self, u: &[f64]) -> (BaselineSpec, f64, f64, f64) {
        let mut it = u.iter().copied();
        let mut penalty = 0.0;
        let g: Vec<f64> = self
            .gamma_held
            .iter()
            .map(|h| h.unwrap_or_else(|| it.next().unwrap().exp()))
            .collect();
        let beta = match self.beta {
            Some(b) => b,
            None => {
                let b = it.next().unwrap();
                if b.abs() > BETA_BOUND {
                    penalty += 1e3 * (b.abs() - BETA_BOUND).powi(2);
                }
                b
            }
        };
        let phi = match self.phi {
            PhiMode::Absent => 0.0,
            PhiMode::Held(v) => v,
            PhiMode::Free => {
                let lp = it.next().unwrap();
                let (lo, hi) = (PHI_FLOOR.ln(), PHI_CEIL.ln());
                if lp < lo {
                    penalty += 1e2 * (lo - lp).powi(2);
                } else if lp > hi {
                    penalty += 1e2 * (lp - hi).powi(2);
                }
                lp.clamp(lo, hi).exp()
            }
        };
        (BaselineSpec::from_params(self.family, &g), beta, phi, penalty)
    }

    fn loglik(&self, p: &Prepared, b: &BaselineSpec, beta: f64, phi: f64) -> f64 {
        match self.model {
            ModelKind::Fixed => p.profile_fixed(b, beta),
            ModelKind::Poisson => p.poisson(b, beta),
            _ => p.random(b, beta, phi),
        }
    }

    fn start(&self, p: &Prepared) -> (Vec<f64>, Vec<f64>) {
        let exposure: f64 = p.subjects.iter().map(|s| s.on_len + s.off_len).sum();
        let rate = (p.total_events as f64 / exposure).max(1e-8);
        let mut u = Vec::new();
        let mut steps = Vec::new();
        for (k, h) in self.gamma_held.iter().enumerate() {
            if h.is_none() {
                // constant rate, or gamma1 with gamma2 = 1, matches the event rate
                u.push(if k == 0 { rate.ln() } else { 0.0 });
                steps.push(0.1);
            }
        }
        if self.beta.is_none() {
            u.push(0.0);
            steps.push(0.1);
        }
        if self.phi == PhiMode::Free {
            // method of moments: Var n = mu + phi mu^2
            let (mut num, mut den) = (0.0, 0.0);
            for s in &p.subjects {
                let mu = rate * (s.on_len + s.off_len);
                num += (s.n as f64 - mu).powi(2) - mu;
                den += mu * mu;
            }
            let phi0 = if den > 0.0 { num / den } else { 0.1 };
            u.push(phi0.clamp(0.01, 10.0).ln());
            steps.push(0.3);
        }
        (u, steps)
    }

    fn names(&self) -> (Vec<&'static str>, bool) {
        let mut names: Vec<&'static str> = match self.family {
            BaselineFamily::Constant => vec!["gamma"],
            BaselineFamily::PowerLaw => vec!["gamma1", "gamma2"],
        };
        let free_gamma: Vec<&'static str> = names
            .drain(..)
            .zip(&self.gamma_held)
            .filter(|(_, h)| h.is_none())
            .map(|(n, _)| n)
            .collect();
        let mut out = free_gamma;
        if self.beta.is_none() {
            out.push("beta");
        }
        let phi_free = self.phi == PhiMode::Free;
        if phi_free {
            out.push("phi");
        }
        (out, phi_free)
    }
}

fn fit_model(d: &Dataset, family: BaselineFamily, c: &CarryoverSpec, model: ModelKind, opts: FitOptions) -> Result<FitResult> {
    let p = Prepared::new(d, c)?;
    p.require_events()?;
    fit_prepared(&p, family, model, opts)
}

pub(crate) fn fit_prepared(p: &Prepared, family: BaselineFamily, model: ModelKind, opts: FitOptions) -> Result<FitResult> {
    p.require_events()?;
    if let Some(phi) = opts.phi {
        if !(phi >= 0.0 && phi.is_finite()) {
            return Err(Error::InvalidInput(format!("held phi must be >= 0, got {phi}")));
        }
    }
    let layout = Layout::new(model, family, opts);
    let objective = |u: &[f64]| {
        let (b, beta, phi, pen) = layout.unpack(u);
        -layout.loglik(p, &b, beta, phi) + pen
    };
    let (u0, steps) = layout.start(p);
    let mut min = nelder_mead(objective, &u0, &NelderMeadOptions::new(steps));
    min.x = newton_polish(objective, &min.x, 3);
    let (b, beta, phi, _) = layout.unpack(&min.x);
    let loglik = layout.loglik(p, &b, beta, phi);
    if !loglik.is_finite() {
        return Err(Error::NonFinite("maximized log likelihood".into()));
    }
    let (names, phi_free) = layout.names();
    let boundary = phi_free && phi < PHI_BOUNDARY;

    let mut params = BTreeMap::new();
    for (name, v) in b.param_names().iter().zip(b.params()) {
        params.insert(name.to_string(), v);
    }
    params.insert("beta".into(), beta);
    if model == ModelKind::Random {
        params.insert("phi".into(), phi);
    }

    let mut notes = Vec::new();
    let mut std_errors = BTreeMap::new();
    // At the boundary phi is dropped from the information matrix.
    let k = if boundary { names.len() - 1 } else { names.len() };
    if k > 0 {
        let ux = min.x[..k].to_vec();
        let tail = min.x[k..].to_vec();
        let negll = |v: &[f64]| {
            let mut full = v.to_vec();
            full.extend_from_slice(&tail);
            let (b, beta, phi, _) = layout.unpack(&full);
            -layout.loglik(p, &b, beta, phi)
        };
        match spd_inverse(hessian(negll, &ux)) {
            Ok(cov) => {
                for (i, name) in names[..k].iter().enumerate() {
                    let se_u = cov[(i, i)].sqrt();
                    let se = if *name == "beta" { se_u } else { params[*name] * se_u };
                    if se.is_finite() {
                        std_errors.insert(name.to_string(), se);
                    }
                }
            }
            Err(_) => notes.push("observed information not positive definite; standard errors omitted".into()),
        }
    }
    if !min.converged {
        notes.push(format!("optimizer stopped after {} evaluations without converging", min.evals));
    }
    if beta.abs() >= BETA_BOUND - 1e-6 && layout.beta.is_none() {
        notes.push("beta estimate reached its search bound".into());
    }
    if boundary {
        notes.push("frailty variance estimate on its lower bound".into());
    }
    if model == ModelKind::Fixed {
        notes.push(match family {
            BaselineFamily::Constant => "gamma fixed at 1: only alpha_i * gamma is identifiable".into(),
            BaselineFamily::PowerLaw => "gamma1 fixed at 1: only alpha_i * gamma1 is identifiable".into(),
        });
    }

    let mut fit = FitResult::new(
        model,
        Some(p.delta),
        params,
        std_errors,
        loglik,
        names.len(),
        min.converged,
        min.evals,
        p.hash.clone(),
    );
    fit.boundary = boundary;
    fit.notes = notes;
    if model == ModelKind::Fixed {
        let eb = beta.exp();
        fit.fixed_effect_alphas = Some(
            p.subjects
                .iter()
                .map(|s| {
                    let (off, on) = Prepared::integrals(s, &b);
                    s.n as f64 / (off + eb * on)
                })
                .collect(),
        );
    }
    Ok(fit)
}

/// Maximizes the fixed-effects profile likelihood.
pub fn fit_fixed(d: &Dataset, family: BaselineFamily, c: &CarryoverSpec, constrain_beta_zero: bool) -> Result<FitResult> {
    fit_model(d, family, c, ModelKind::Fixed, FitOptions::from_flag(constrain_beta_zero))
}

/// Maximizes the Poisson likelihood (no subject heterogeneity).
pub fn fit_poisson(d: &Dataset, family: BaselineFamily, c: &CarryoverSpec, constrain_beta_zero: bool) -> Result<FitResult> {
    fit_model(d, family, c, ModelKind::Poisson, FitOptions::from_flag(constrain_beta_zero))
}

/// Maximizes the gamma random-effects likelihood.
pub fn fit_random(d: &Dataset, family: BaselineFamily, c: &CarryoverSpec, constrain_beta_zero: bool) -> Result<FitResult> {
    fit_model(d, family, c, ModelKind::Random, FitOptions::from_flag(constrain_beta_zero))
}

/// Fit with explicitly held parameters.
pub fn fit_with(d: &Dataset, family: BaselineFamily, c: &CarryoverSpec, model: ModelKind, opts: FitOptions) -> Result<FitResult> {
    match model {
        ModelKind::Fixed | ModelKind::Poisson | ModelKind::Random => fit_model(d, family, c, model, opts),
        _ => Err(Error::InvalidInput(format!("{model} is not a parametric likelihood model"))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaProfile {
    /// One fit per grid value, ordered by `delta`.
    pub fits: Vec<(f64, FitResult)>,
    pub best_by_loglik: f64,
    pub best_by_aic: f64,
}

/// Full fits over a grid of window lengths.
pub fn profile_delta(d: &Dataset, family: BaselineFamily, delta_grid: &[f64], model: ModelKind) -> Result<DeltaProfile> {
    if delta_grid.is_empty() {
        return Err(Error::InvalidInput("delta grid is empty".into()));
    }
    let mut grid = delta_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let fits = grid
        .iter()
        .map(|&delta| Ok((delta, fit_with(d, family, &CarryoverSpec::new(delta), model, FitOptions::default())?)))
        .collect::<Result<Vec<_>>>()?;
    let arg = |key: &dyn Fn(&FitResult) -> f64| {
        fits.iter()
            .max_by(|a, b| key(&a.1).total_cmp(&key(&b.1)))
            .map(|(d, _)| *d)
            .unwrap()
    };
    let best_by_loglik = arg(&|f| f.loglik);
    let best_by_aic = arg(&|f| -f.aic);
    Ok(DeltaProfile {
        fits,
        best_by_loglik,
        best_by_aic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::EventHistory;

    fn one(events: Vec<f64>, tau: f64) -> Dataset {
        Dataset::new(vec![EventHistory::new("a", events, tau)])
    }

    #[test]
    fn single_event_profile_is_minus_log_tau() {
        let d = one(vec![0.7], 2.5);
        let c = CarryoverSpec::new(0.3);
        for g in [0.5, 1.0, 2.0] {
            let v = profile_loglik_fixed(&d, &BaselineSpec::constant(g), 0.0, &c).unwrap();
            assert!((v + 2.5f64.ln()).abs() < 1e-14);
        }
        assert_eq!(profile_loglik_fixed(&one(vec![], 1.0), &BaselineSpec::constant(1.0), 0.3, &c).unwrap(), 0.0);
    }

    #[test]
    fn random_single_subject_without_events() {
        let v = loglik_random(&one(vec![], 1.0), &BaselineSpec::constant(1.0), 0.0, 1.0, &CarryoverSpec::new(0.1)).unwrap();
        assert!((v + 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn rising_table_matches_log_gamma() {
        let phi = 0.37;
        let t = log_rising_table(phi, 30);
        for n in [0usize, 1, 7, 30] {
            let lg = ln_gamma(n as f64 + 1.0 / phi) - ln_gamma(1.0 / phi) + n as f64 * phi.ln();
            assert!((t[n] - lg).abs() < 1e-10);
        }
    }

    #[test]
    fn random_duplicate_doubles_contribution() {
        let h = EventHistory::new("a", vec![0.5, 0.6, 2.0], 3.0);
        let mut h2 = h.clone();
        h2 = EventHistory::new("b", h2.event_times().to_vec(), h2.tau());
        let c = CarryoverSpec::new(0.2);
        let b = BaselineSpec::power_law(0.8, 1.3);
        let a = loglik_random(&Dataset::new(vec![h.clone()]), &b, 0.4, 0.5, &c).unwrap();
        let two = loglik_random(&Dataset::new(vec![h, h2]), &b, 0.4, 0.5, &c).unwrap();
        assert!((two - 2.0 * a).abs() < 1e-12);
    }

    #[test]
    fn random_approaches_poisson() {
        let d = Dataset::new(vec![
            EventHistory::new("a", vec![0.5, 0.6, 2.0], 3.0),
            EventHistory::new("b", vec![1.5], 2.0),
        ]);
        let c = CarryoverSpec::new(0.2);
        let b = BaselineSpec::constant(1.3);
        let p = loglik_poisson(&d, &b, 0.3, &c).unwrap();
        assert!((loglik_random(&d, &b, 0.3, 1e-10, &c).unwrap() - p).abs() < 1e-6);
        assert!((loglik_random(&d, &b, 0.3, 2e-8, &c).unwrap() - p).abs() < 1e-6);
    }

    #[test]
    fn null_fixed_constant_alphas() {
        let d = Dataset::new(vec![
            EventHistory::new("a", vec![0.5, 0.6, 2.0], 3.0),
            EventHistory::new("b", vec![1.5], 2.0),
            EventHistory::new("c", vec![], 4.0),
        ]);
        let f = fit_fixed(&d, BaselineFamily::Constant, &CarryoverSpec::new(0.2), true).unwrap();
        assert_eq!(f.param("gamma"), Some(1.0));
        assert_eq!(f.n_free, 0);
        let a = f.fixed_effect_alphas.unwrap();
        assert_eq!(a, vec![1.0, 0.5, 0.0]);
        assert_eq!(f.aic, -2.0 * f.loglik);
    }

    #[test]
    fn no_events_is_an_error() {
        let e = fit_random(&one(vec![], 1.0), BaselineFamily::Constant, &CarryoverSpec::new(0.2), true);
        assert!(matches!(e, Err(Error::NoEvents)));
    }

    #[test]
    fn poisson_null_rate_is_count_over_exposure() {
        let d = Dataset::new(vec![
            EventHistory::new("a", vec![0.5, 0.6, 2.0], 3.0),
            EventHistory::new("b", vec![1.5], 2.0),
        ]);
        let f = fit_poisson(&d, BaselineFamily::Constant, &CarryoverSpec::new(0.2), true).unwrap();
        assert!((f.param("gamma").unwrap() - 4.0 / 5.0).abs() < 1e-7);
        let se = f.std_error("gamma").unwrap();
        assert!((se - (4.0f64).sqrt() / 5.0).abs() < 1e-4);
    }

    #[test]
    fn profile_delta_orders_grid() {
        let d = Dataset::new(vec![
            EventHistory::new("a", vec![0.5, 0.6, 2.0, 2.1], 3.0),
            EventHistory::new("b", vec![1.5, 1.55], 2.0),
        ]);
        let p = profile_delta(&d, BaselineFamily::Constant, &[0.3, 0.1], ModelKind::Poisson).unwrap();
        assert_eq!(p.fits[0].0, 0.1);
        assert!(p.fits.iter().all(|(_, f)| f.dataset_hash == p.fits[0].1.dataset_hash));
        assert!(profile_delta(&d, BaselineFamily::Constant, &[], ModelKind::Random).is_err());
    }
}
