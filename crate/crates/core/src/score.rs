//! Tests of `beta = 0`.
//!
//! Both score statistics have the form `(Obs - Exp) / sqrt(Var)`, where `Obs`
//! counts events that fall inside a carryover window and `Exp` is the
//! null-model expectation of that count. They differ in how subject effects
//! are handled: profiled out (fixed) or integrated out under a gamma law
//! (random).

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{fit_prepared, FitOptions, Prepared};
use crate::optim::{gradient, hessian, spd_inverse};
use crate::rng::{substream, Domain};
use crate::simulate::{sample_conditional_event_times, sample_frailties, simulate_null_process};
use crate::stats::{chi2_1_sf, normal_p_value};
use crate::types::{
    Alternative, BaselineFamily, BaselineSpec, CarryoverSpec, Dataset, EventHistory, FitResult,
    FrailtySpec, ModelKind, PSource, TestResult,
};

/// Observed information of `l(theta)` on the natural scale, computed by
/// differencing on the log scale: with `u = ln theta`,
/// `d2l/dtheta_a dtheta_b = (H_u[a][b] - delta_ab g_u[a]) / (theta_a theta_b)`.
fn observed_info_natural(ll: impl Fn(&[f64]) -> f64, theta: &[f64]) -> DMatrix<f64> {
    let f = |u: &[f64]| {
        let th: Vec<f64> = u.iter().map(|x| x.exp()).collect();
        ll(&th)
    };
    let u: Vec<f64> = theta.iter().map(|t| t.ln()).collect();
    let h = hessian(f, &u);
    let g = gradient(f, &u);
    let n = theta.len();
    DMatrix::from_fn(n, n, |a, b| {
        let diag = if a == b { g[a] } else { 0.0 };
        -(h[(a, b)] - diag) / (theta[a] * theta[b])
    })
}

/// `I_bb - v' I_nn^{-1} v`.
fn schur(i_bb: f64, v: &[f64], i_nn: &DMatrix<f64>) -> Result<f64> {
    if v.is_empty() {
        return Ok(i_bb);
    }
    let inv = spd_inverse(i_nn.clone())?;
    let v = DVector::from_column_slice(v);
    Ok(i_bb - (v.transpose() * inv * &v)[(0, 0)])
}

fn checked_variance(var: f64, what: &str) -> Result<f64> {
    if !var.is_finite() {
        Err(Error::NonFinite(format!("{what} variance")))
    } else if var < 0.0 {
        Err(Error::NegativeVariance(var))
    } else if var <= 1e-300 {
        Err(Error::ZeroVariance(format!("{what}: no window exposure")))
    } else {
        Ok(var)
    }
}

/// Applies a different alternative to a normal-theory score result.
pub fn with_alternative(mut t: TestResult, alternative: Alternative) -> TestResult {
    t.alternative = alternative;
    if t.p_source == PSource::Normal {
        t.p_value = normal_p_value(t.statistic, alternative);
    }
    t
}

/// Null baseline for the fixed-effects model: `gamma = 1`, or `gamma1 = 1`
/// with `gamma2` profiled.
fn fixed_null_baseline(p: &Prepared, family: BaselineFamily) -> Result<(BaselineSpec, Option<FitResult>)> {
    match family {
        BaselineFamily::Constant => Ok((BaselineSpec::constant(1.0), None)),
        BaselineFamily::PowerLaw => {
            let fit = fit_prepared(p, family, ModelKind::Fixed, FitOptions::null())?;
            Ok((BaselineSpec::power_law(1.0, fit.params["gamma2"]), Some(fit)))
        }
    }
}

/// `(Obs, Exp, I_bb, I_bg2)` of the profile likelihood at `beta = 0`.
fn fixed_components(p: &Prepared, b: &BaselineSpec) -> (f64, f64, f64, f64) {
    let (mut exp, mut i_bb, mut i_bg) = (0.0, 0.0, 0.0);
    for s in p.subjects.iter().filter(|s| s.n > 0) {
        let n = s.n as f64;
        let (q, e) = match b {
            // gamma cancels; this is (n / tau) * window time
            BaselineSpec::Constant { .. } => (s.on_len / s.at_risk_len, n / s.at_risk_len * s.on_len),
            BaselineSpec::PowerLaw { .. } => {
                let (off, on) = Prepared::integrals(s, b);
                (on / (off + on), n * on / (off + on))
            }
        };
        exp += e;
        i_bb += n * q * (1.0 - q);
        if matches!(b, BaselineSpec::PowerLaw { .. }) {
            let (off, on) = Prepared::integrals(s, b);
            let r = off + on;
            let (g_off, g_on) = Prepared::integral_grads(s, b);
            let r_g = g_off[1] + g_on[1];
            i_bg += n * (g_on[1] * r - on * r_g) / (r * r);
        }
    }
    (p.obs as f64, exp, i_bb, i_bg)
}

pub(crate) fn score_fixed_prepared(p: &Prepared, family: BaselineFamily) -> Result<TestResult> {
    p.require_events()?;
    let (b, _) = fixed_null_baseline(p, family)?;
    let (obs, exp, i_bb, i_bg) = fixed_components(p, &b);
    let var = match b {
        BaselineSpec::Constant { .. } => i_bb,
        BaselineSpec::PowerLaw { gamma2, .. } => {
            let ll = |th: &[f64]| p.profile_fixed(&BaselineSpec::power_law(1.0, th[0]), 0.0);
            let i_gg = observed_info_natural(ll, &[gamma2]);
            schur(i_bb, &[i_bg], &i_gg)?
        }
    };
    let var = checked_variance(var, "fixed-effects score")?;
    Ok(TestResult::score(obs, exp, var, Alternative::Greater, p.hash.clone()))
}

/// Score test with subject effects profiled out; `Exp` for the constant
/// baseline is `sum_i (n_i / tau_i) * window exposure_i`.
pub fn score_test_fixed(d: &Dataset, family: BaselineFamily, c: &CarryoverSpec) -> Result<TestResult> {
    score_fixed_prepared(&Prepared::new(d, c)?, family)
}

/// `(Obs, Exp)` of the random-effects score at explicit null parameters:
/// `Exp = sum_i (1 + n_i phi) W_i / (1 + phi R_i)` with `W_i` the baseline
/// mass inside windows and `R_i` the total.
pub fn score_numerator_random(d: &Dataset, b: &BaselineSpec, phi: f64, c: &CarryoverSpec) -> Result<(f64, f64)> {
    b.validate()?;
    if !(phi >= 0.0) {
        return Err(Error::InvalidInput(format!("phi must be >= 0, got {phi}")));
    }
    let p = Prepared::new(d, c)?;
    Ok((p.obs as f64, random_exp(&p, b, phi)))
}

fn random_exp(p: &Prepared, b: &BaselineSpec, phi: f64) -> f64 {
    p.subjects
        .iter()
        .map(|s| {
            let (off, on) = Prepared::integrals(s, b);
            (1.0 + s.n as f64 * phi) * on / (1.0 + phi * (off + on))
        })
        .sum()
}

/// Information blocks of the random-effects likelihood at `beta = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InformationBlocks {
    pub i_bb: f64,
    /// One entry per baseline parameter.
    pub i_bg: Vec<f64>,
    /// Absent when `phi` is held at 0.
    pub i_bp: Option<f64>,
    /// Observed information in `(gamma..., phi)`, or `gamma` alone at 0.
    pub i_nuisance: Vec<Vec<f64>>,
}

impl InformationBlocks {
    /// `I_bb - (I_bg, I_bp) I_nn^{-1} (I_bg, I_bp)'`.
    pub fn score_variance(&self) -> Result<f64> {
        let k = self.i_nuisance.len();
        let m = DMatrix::from_fn(k, k, |a, b| self.i_nuisance[a][b]);
        let mut v = self.i_bg.clone();
        v.extend(self.i_bp);
        schur(self.i_bb, &v, &m)
    }
}

/// Analytic `I_bb`, `I_bg`, `I_bp` summed over subjects.
fn analytic_blocks(p: &Prepared, b: &BaselineSpec, phi: f64) -> (f64, Vec<f64>, f64) {
    let k = b.params().len();
    let (mut i_bb, mut i_bg, mut i_bp) = (0.0, vec![0.0; k], 0.0);
    for s in &p.subjects {
        let (off, on) = Prepared::integrals(s, b);
        let (g_off, g_on) = Prepared::integral_grads(s, b);
        let (r, w, n) = (off + on, on, s.n as f64);
        let a = 1.0 + n * phi;
        let den = (1.0 + phi * r).powi(2);
        i_bb += a * ((1.0 + phi * r) * w - phi * w * w) / den;
        for j in 0..k {
            let (w_g, r_g) = (g_on[j], g_off[j] + g_on[j]);
            i_bg[j] += a * ((1.0 + phi * r) * w_g - phi * w * r_g) / den;
        }
        i_bp += w * (n - r) / den;
    }
    (i_bb, i_bg, i_bp)
}

/// `-2 ln(1+x) + 2x/(1+x) + x^2/(1+x)^2`, which is `O(x^3)` near zero.
fn frailty_curvature(x: f64) -> f64 {
    if x < 0.1 {
        let mut sum = 0.0;
        let mut pow = x * x;
        for j in 3..60 {
            pow *= -x;
            let term = pow * (2.0 / j as f64 + j as f64 - 3.0);
            sum += term;
            if term.abs() <= f64::EPSILON * sum.abs() {
                break;
            }
        }
        sum
    } else {
        let q = x / (1.0 + x);
        -2.0 * x.ln_1p() + 2.0 * q + q * q
    }
}

/// Observed information for the baseline parameters, and `phi` when it is
/// positive, of the null marginal likelihood.
fn nuisance_info(p: &Prepared, b: &BaselineSpec, phi: f64) -> DMatrix<f64> {
    let k = b.params().len();
    let dim = if phi > 0.0 { k + 1 } else { k };
    let theta = b.params();
    let mut info = DMatrix::zeros(dim, dim);
    for s in &p.subjects {
        let (off, on) = Prepared::integrals(s, b);
        let (g_off, g_on) = Prepared::integral_grads(s, b);
        let r = off + on;
        let n = s.n as f64;
        let r_g: Vec<f64> = (0..k).map(|a| g_off[a] + g_on[a]).collect();
        let mut r_h = [[0.0; 2]; 2];
        if matches!(b, BaselineSpec::PowerLaw { .. }) {
            for g in &s.segs {
                let h = b.cum_hess(g.start, g.end);
                for a in 0..2 {
                    for c in 0..2 {
                        r_h[a][c] += h[a][c];
                    }
                }
            }
        }
        let q = 1.0 + phi * r;
        for a in 0..k {
            info[(a, a)] += n / (theta[a] * theta[a]);
            for c in 0..k {
                info[(a, c)] += (1.0 + n * phi) * (r_h[a][c] / q - phi * (r_g[a] * r_g[c]) / (q * q));
            }
        }
        if phi > 0.0 {
            for a in 0..k {
                let v = r_g[a] * (n - r) / (q * q);
                info[(a, k)] += v;
                info[(k, a)] += v;
            }
            let rising: f64 = (1..s.n).map(|j| (j as f64 / (1.0 + j as f64 * phi)).powi(2)).sum();
            let d2 = -rising + frailty_curvature(phi * r) / phi.powi(3) + n * r * r / (q * q);
            info[(k, k)] -= d2;
        }
    }
    info
}

fn blocks_prepared(p: &Prepared, b: &BaselineSpec, phi: f64) -> InformationBlocks {
    let (i_bb, i_bg, i_bp) = analytic_blocks(p, b, phi);
    let info = nuisance_info(p, b, phi);
    let n = info.nrows();
    InformationBlocks {
        i_bb,
        i_bg,
        i_bp: (phi > 0.0).then_some(i_bp),
        i_nuisance: (0..n).map(|a| (0..n).map(|c| info[(a, c)]).collect()).collect(),
    }
}

/// Information blocks at explicit null parameters. With `phi = 0` the frailty
/// variance is treated as known and dropped from the nuisance block.
pub fn information_blocks(d: &Dataset, b: &BaselineSpec, phi: f64, c: &CarryoverSpec) -> Result<InformationBlocks> {
    b.validate()?;
    if !(phi >= 0.0) {
        return Err(Error::InvalidInput(format!("phi must be >= 0, got {phi}")));
    }
    Ok(blocks_prepared(&Prepared::new(d, c)?, b, phi))
}

pub(crate) fn score_random_prepared(p: &Prepared, family: BaselineFamily) -> Result<(TestResult, FitResult)> {
    p.require_events()?;
    let null = fit_prepared(p, family, ModelKind::Random, FitOptions::null())?;
    let b = BaselineSpec::from_params(
        family,
        &match family {
            BaselineFamily::Constant => vec![null.params["gamma"]],
            BaselineFamily::PowerLaw => vec![null.params["gamma1"], null.params["gamma2"]],
        },
    );
    let phi = if null.boundary { 0.0 } else { null.params["phi"] };
    let exp = random_exp(p, &b, phi);
    let blocks = blocks_prepared(p, &b, phi);
    let var = checked_variance(blocks.score_variance()?, "random-effects score")?;
    let mut t = TestResult::score(p.obs as f64, exp, var, Alternative::Greater, p.hash.clone());
    if null.boundary {
        t.notes.push("frailty variance estimate on its lower bound; Poisson score used".into());
    }
    if !null.converged {
        t.notes.push("null fit did not converge".into());
    }
    Ok((t, null))
}

/// Score test with gamma subject effects integrated out, evaluated at the
/// null maximum likelihood estimates.
pub fn score_test_random(d: &Dataset, family: BaselineFamily, c: &CarryoverSpec) -> Result<TestResult> {
    Ok(score_random_prepared(&Prepared::new(d, c)?, family)?.0)
}

/// `Z^2 = (beta_hat / se)^2` against chi-square(1).
pub fn wald_test(fit: &FitResult) -> Result<TestResult> {
    let beta = fit
        .beta()
        .ok_or_else(|| Error::InvalidInput("fit has no beta estimate".into()))?;
    let se = fit
        .std_error("beta")
        .ok_or_else(|| Error::InvalidInput("fit has no standard error for beta".into()))?;
    if !(se > 0.0) {
        return Err(Error::ZeroVariance("standard error of beta is zero".into()));
    }
    let z2 = (beta / se).powi(2);
    Ok(TestResult {
        statistic: z2,
        obs: beta,
        exp: 0.0,
        variance: se * se,
        p_value: chi2_1_sf(z2),
        p_source: PSource::Chi2,
        alternative: Alternative::TwoSided,
        dataset_hash: fit.dataset_hash.clone(),
        notes: Vec::new(),
    })
}

/// `2 (l_full - l_null)`, floored at 0, against chi-square(1). `obs` and
/// `exp` carry the two maximized log likelihoods; `variance` is unused.
pub fn lr_test(fit_null: &FitResult, fit_full: &FitResult) -> Result<TestResult> {
    if fit_null.dataset_hash != fit_full.dataset_hash {
        return Err(Error::DatasetMismatch(format!(
            "null fit on {}, full fit on {}",
            fit_null.dataset_hash, fit_full.dataset_hash
        )));
    }
    if fit_null.model != fit_full.model || fit_null.delta != fit_full.delta {
        return Err(Error::DatasetMismatch("fits are not nested".into()));
    }
    let raw = 2.0 * (fit_full.loglik - fit_null.loglik);
    let mut notes = Vec::new();
    if raw < 0.0 {
        notes.push(format!("full fit below null by {:.3e}; statistic floored at 0", -raw / 2.0));
    }
    if fit_full.model == ModelKind::Fixed {
        notes.push("chi-square reference is unreliable for the fixed-effects profile likelihood with few events per subject".into());
    }
    let stat = raw.max(0.0);
    Ok(TestResult {
        statistic: stat,
        obs: fit_full.loglik,
        exp: fit_null.loglik,
        variance: 0.0,
        p_value: chi2_1_sf(stat),
        p_source: PSource::Chi2,
        alternative: Alternative::TwoSided,
        dataset_hash: fit_full.dataset_hash.clone(),
        notes,
    })
}

fn bootstrap_p(observed: f64, replicates: Vec<Option<f64>>, ge: impl Fn(f64, f64) -> bool) -> (f64, usize, usize) {
    let ok: Vec<f64> = replicates.into_iter().flatten().collect();
    let k = ok.iter().filter(|&&s| ge(s, observed)).count();
    ((1 + k) as f64 / (ok.len() + 1) as f64, ok.len(), k)
}

fn finish_bootstrap(mut t: TestResult, b: usize, p: f64, used: usize) -> TestResult {
    t.p_value = p;
    t.p_source = PSource::Bootstrap { replicates: used };
    if used < b {
        t.notes.push(format!("{} of {b} bootstrap replicates failed and were skipped", b - used));
    }
    t
}

/// Conditional bootstrap of the fixed-effects score: each `n_i` is held and
/// event times are redrawn from the fitted truncated baseline density.
pub fn bootstrap_pvalue_fixed(
    d: &Dataset,
    family: BaselineFamily,
    c: &CarryoverSpec,
    b: usize,
    seed: u64,
    alternative: Alternative,
) -> Result<TestResult> {
    if b == 0 {
        return Err(Error::InvalidInput("bootstrap needs at least one replicate".into()));
    }
    if d.has_resolutions() {
        return Err(Error::InvalidInput(
            "conditional bootstrap assumes continuous risk; data has resolution times".into(),
        ));
    }
    let p = Prepared::new(d, c)?;
    let observed = score_fixed_prepared(&p, family)?;
    let (base, _) = fixed_null_baseline(&p, family)?;
    let sign = |s: f64| match alternative {
        Alternative::Greater => s,
        Alternative::TwoSided => s.abs(),
    };
    let reps: Vec<Option<f64>> = (0..b as u64)
        .into_par_iter()
        .map(|r| {
            let subjects = d
                .subjects()
                .iter()
                .enumerate()
                .map(|(i, h)| {
                    let mut rng = substream(seed, Domain::ConditionalBootstrap, r, i as u64);
                    let times = sample_conditional_event_times(h.n_events(), &base, h.tau(), &mut rng);
                    EventHistory::new(h.subject_id(), times, h.tau())
                })
                .collect();
            let pr = Prepared::new(&Dataset::new(subjects), c).ok()?;
            score_fixed_prepared(&pr, family).ok().map(|t| sign(t.statistic))
        })
        .collect();
    let (pv, used, _) = bootstrap_p(sign(observed.statistic), reps, |s, o| s >= o);
    let mut t = finish_bootstrap(observed, b, pv, used);
    t.alternative = alternative;
    Ok(t)
}

/// Parametric bootstrap of the random-effects score: replicate datasets are
/// simulated from the fitted null model (gamma frailties at `phi_tilde`,
/// same follow-up ends), the null is refitted on each, and `S*^2 >= S^2`
/// is counted.
pub fn bootstrap_pvalue_random(
    d: &Dataset,
    family: BaselineFamily,
    c: &CarryoverSpec,
    b: usize,
    seed: u64,
    refractory: f64,
) -> Result<TestResult> {
    if b == 0 {
        return Err(Error::InvalidInput("bootstrap needs at least one replicate".into()));
    }
    if !(refractory >= 0.0) {
        return Err(Error::InvalidInput("refractory period must be >= 0".into()));
    }
    let p = Prepared::new(d, c)?;
    let (observed, null) = score_random_prepared(&p, family)?;
    let base = BaselineSpec::from_params(
        family,
        &match family {
            BaselineFamily::Constant => vec![null.params["gamma"]],
            BaselineFamily::PowerLaw => vec![null.params["gamma1"], null.params["gamma2"]],
        },
    );
    let frailty = if null.boundary {
        FrailtySpec::None
    } else {
        FrailtySpec::Gamma { phi: null.params["phi"] }
    };
    let reps: Vec<Option<f64>> = (0..b as u64)
        .into_par_iter()
        .map(|r| {
            let subjects = d
                .subjects()
                .iter()
                .enumerate()
                .map(|(i, h)| {
                    let mut rng = substream(seed, Domain::ParametricBootstrap, r, i as u64);
                    let alpha = sample_frailties(&frailty, 1, &mut rng).ok()?[0];
                    Some(simulate_null_process(h.subject_id(), alpha, &base, refractory, h.tau(), &mut rng))
                })
                .collect::<Option<Vec<_>>>()?;
            let pr = Prepared::new(&Dataset::new(subjects), c).ok()?;
            score_random_prepared(&pr, family).ok().map(|(t, _)| t.statistic.powi(2))
        })
        .collect();
    let (pv, used, _) = bootstrap_p(observed.statistic.powi(2), reps, |s, o| s >= o);
    let mut t = finish_bootstrap(observed, b, pv, used);
    t.alternative = Alternative::TwoSided;
    Ok(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PValueSource {
    #[default]
    Auto,
    Normal,
    Bootstrap,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreTestOptions {
    pub p_source: PValueSource,
    pub replicates: usize,
    pub seed: u64,
    pub alternative: Alternative,
    /// Refractory period used when simulating bootstrap replicates.
    pub refractory: f64,
}

impl Default for ScoreTestOptions {
    fn default() -> Self {
        Self {
            p_source: PValueSource::Auto,
            replicates: 999,
            seed: 0,
            alternative: Alternative::Greater,
            refractory: 0.0,
        }
    }
}

/// Whether the normal reference is trusted for this dataset and model.
///
/// The fixed-effects statistic is markedly non-normal unless subjects carry
/// many events, so it always goes to the bootstrap. The random-effects
/// statistic is used with the normal tail once `m >= 100`, the mean count
/// per subject is at least 2 and the no-effect window coverage
/// `1 - exp(-rate * delta)` is at least 0.04.
pub fn normal_reference_adequate(d: &Dataset, model: ModelKind, c: &CarryoverSpec) -> bool {
    if model != ModelKind::Random || d.m() < 100 {
        return false;
    }
    let n = d.total_events() as f64;
    let exposure: f64 = d.subjects().iter().map(|h| h.at_risk_time()).sum();
    let coverage = 1.0 - (-(n / exposure) * c.delta).exp();
    n / d.m() as f64 >= 2.0 && coverage >= 0.04
}

/// Score test with the p-value source resolved from `opts`.
pub fn score_test(
    d: &Dataset,
    family: BaselineFamily,
    c: &CarryoverSpec,
    model: ModelKind,
    opts: &ScoreTestOptions,
) -> Result<TestResult> {
    let bootstrap = match opts.p_source {
        PValueSource::Normal => false,
        PValueSource::Bootstrap => true,
        PValueSource::Auto => !normal_reference_adequate(d, model, c),
    };
    let mut t = match (model, bootstrap) {
        (ModelKind::Fixed, false) => with_alternative(score_test_fixed(d, family, c)?, opts.alternative),
        (ModelKind::Fixed, true) => bootstrap_pvalue_fixed(d, family, c, opts.replicates, opts.seed, opts.alternative)?,
        (ModelKind::Random, false) => with_alternative(score_test_random(d, family, c)?, opts.alternative),
        (ModelKind::Random, true) => bootstrap_pvalue_random(d, family, c, opts.replicates, opts.seed, opts.refractory)?,
        _ => return Err(Error::InvalidInput(format!("no parametric score test for model {model}"))),
    };
    if opts.p_source == PValueSource::Auto {
        t.notes.push(format!("p-value source chosen automatically: {}", t.p_source));
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    fn frailty_curvature_series_meets_closed_form() {
        let closed = |x: f64| -2.0 * x.ln_1p() + 2.0 * x / (1.0 + x) + (x / (1.0 + x)).powi(2);
        let x = 0.1 - 1e-12;
        let (a, b) = (frailty_curvature(x), closed(x));
        assert!((a - b).abs() < 1e-12 * b.abs(), "{a} vs {b}");
        assert!((frailty_curvature(1e-3) + 2.0 / 3.0 * 1e-9).abs() < 2e-12);
    }

    fn h3() -> Dataset {
        Dataset::new(vec![EventHistory::new("a", vec![1.0, 1.5, 3.0], 4.0)])
    }

    #[test]
    fn fixed_hand_example() {
        let t = score_test_fixed(&h3(), BaselineFamily::Constant, &CarryoverSpec::new(1.0)).unwrap();
        assert_eq!(t.obs, 1.0);
        assert!((t.exp - 1.875).abs() < 1e-12);
        assert!((t.score_numerator() - t.statistic * t.variance.sqrt()).abs() < 1e-12);
        assert_eq!(t.p_source, PSource::Normal);
    }

    #[test]
    fn spread_events_give_negative_score() {
        let d = Dataset::new(vec![EventHistory::new("a", vec![1.0, 3.0, 5.0], 8.0)]);
        let t = score_test_fixed(&d, BaselineFamily::Constant, &CarryoverSpec::new(0.5)).unwrap();
        assert_eq!(t.obs, 0.0);
        assert!(t.exp > 0.0 && t.statistic < 0.0);
    }

    #[test]
    fn zero_exposure_is_an_error() {
        let d = Dataset::new(vec![EventHistory::new("a", vec![4.0], 4.0)]);
        let e = score_test_fixed(&d, BaselineFamily::Constant, &CarryoverSpec::new(0.5));
        assert!(matches!(e, Err(Error::ZeroVariance(_))));
    }

    #[test]
    fn random_numerator_at_zero_phi() {
        let d = Dataset::new(vec![EventHistory::new("a", vec![0.4], 1.0)]);
        let (obs, exp) = score_numerator_random(&d, &BaselineSpec::constant(1.0), 0.0, &CarryoverSpec::new(0.2)).unwrap();
        assert!((obs - exp + 0.2).abs() < 1e-15);
    }

    #[test]
    fn m1_zero_phi_matches_fixed_numerator() {
        let c = CarryoverSpec::new(1.0);
        let fixed = score_test_fixed(&h3(), BaselineFamily::Constant, &c).unwrap();
        let (obs, exp) = score_numerator_random(&h3(), &BaselineSpec::constant(3.0 / 4.0), 0.0, &c).unwrap();
        assert_eq!(obs, fixed.obs);
        assert!((exp - fixed.exp).abs() < 1e-15);
    }

    fn fit_with_beta(beta: f64, se: Option<f64>) -> FitResult {
        let mut params = BTreeMap::new();
        params.insert("beta".to_string(), beta);
        let mut ses = BTreeMap::new();
        if let Some(s) = se {
            ses.insert("beta".to_string(), s);
        }
        FitResult::new(ModelKind::Random, Some(1.0), params, ses, -5.0, 3, true, 1, "h".into())
    }

    #[test]
    fn wald_examples() {
        let t = wald_test(&fit_with_beta(0.0, Some(0.2))).unwrap();
        assert_eq!(t.statistic, 0.0);
        assert_eq!(t.p_value, 1.0);
        let t = wald_test(&fit_with_beta(0.904, Some(0.904 / 33.338f64.sqrt()))).unwrap();
        assert!((t.statistic - 33.338).abs() < 1e-9);
        assert!(wald_test(&fit_with_beta(0.5, Some(0.0))).is_err());
        assert!(wald_test(&fit_with_beta(0.5, None)).is_err());
    }

    #[test]
    fn lr_examples() {
        let f = fit_with_beta(0.3, Some(0.1));
        assert_eq!(lr_test(&f, &f).unwrap().statistic, 0.0);
        let mut worse = f.clone();
        worse.loglik -= 1.0;
        let t = lr_test(&f, &worse).unwrap();
        assert_eq!(t.statistic, 0.0);
        assert!(!t.notes.is_empty());
        let mut other = f.clone();
        other.dataset_hash = "x".into();
        assert!(matches!(lr_test(&f, &other), Err(Error::DatasetMismatch(_))));
    }

    #[test]
    fn bootstrap_guards() {
        let c = CarryoverSpec::new(1.0);
        assert!(bootstrap_pvalue_fixed(&h3(), BaselineFamily::Constant, &c, 0, 1, Alternative::Greater).is_err());
        let t = bootstrap_pvalue_fixed(&h3(), BaselineFamily::Constant, &c, 1, 1, Alternative::Greater).unwrap();
        assert!(t.p_value == 0.5 || t.p_value == 1.0);
        let with_res = Dataset::new(vec![EventHistory::new("a", vec![1.0], 4.0).with_resolutions(vec![1.5])]);
        assert!(bootstrap_pvalue_fixed(&with_res, BaselineFamily::Constant, &c, 5, 1, Alternative::Greater).is_err());
    }
}
