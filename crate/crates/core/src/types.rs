//! Domain model: event histories, datasets, baseline/carryover/frailty
//! settings, and the result records produced by fits and tests.
//!
//! Histories are plain data. Construction never fails; structural rules are
//! checked by [`EventHistory::validate`] / [`validate_dataset`], which return
//! every violation instead of stopping at the first.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// One subject's observed recurrent-event history on `[0, tau]`.
///
/// `resolution_times[j]` is the time at which the subject is again at risk
/// after event `j`. Without resolution times the subject is at risk
/// continuously and the elapsed-time clock restarts at each event.
#[derive(Debug, Clone, PartialEq)]
pub struct EventHistory {
    subject_id: String,
    event_times: Vec<f64>,
    resolution_times: Option<Vec<f64>>,
    tau: f64,
    covariates: BTreeMap<String, f64>,
}

impl EventHistory {
    pub fn new(subject_id: impl Into<String>, event_times: Vec<f64>, tau: f64) -> Self {
        Self {
            subject_id: subject_id.into(),
            event_times,
            resolution_times: None,
            tau,
            covariates: BTreeMap::new(),
        }
    }

    pub fn with_resolutions(mut self, resolution_times: Vec<f64>) -> Self {
        self.resolution_times = Some(resolution_times);
        self
    }

    pub fn with_covariate(mut self, name: impl Into<String>, value: f64) -> Self {
        self.covariates.insert(name.into(), value);
        self
    }

    pub fn with_covariates(mut self, covariates: BTreeMap<String, f64>) -> Self {
        self.covariates = covariates;
        self
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    pub fn event_times(&self) -> &[f64] {
        &self.event_times
    }

    pub fn resolution_times(&self) -> Option<&[f64]> {
        self.resolution_times.as_deref()
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn covariates(&self) -> &BTreeMap<String, f64> {
        &self.covariates
    }

    pub fn covariate(&self, name: &str) -> Option<f64> {
        self.covariates.get(name).copied()
    }

    pub fn n_events(&self) -> usize {
        self.event_times.len()
    }

    /// Time at which the subject is at risk again after event `j`.
    pub fn resumption(&self, j: usize) -> f64 {
        match &self.resolution_times {
            Some(r) => r[j],
            None => self.event_times[j],
        }
    }

    /// Number of events strictly before `t`, i.e. `N(t-)`.
    pub fn events_before(&self, t: f64) -> usize {
        self.event_times.partition_point(|&e| e < t)
    }

    /// At-risk indicator `Y(t)`: inside `[0, tau]` and not inside any
    /// post-event interval `(t_j, r_j]`.
    pub fn at_risk(&self, t: f64) -> bool {
        if !(0.0..=self.tau).contains(&t) {
            return false;
        }
        let k = self.events_before(t);
        k == 0 || t > self.resumption(k - 1)
    }

    /// Calendar gap times `W_j = T_j - T_{j-1}` with `T_0 = 0`.
    pub fn gap_times(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.event_times
            .iter()
            .map(|&t| {
                let w = t - prev;
                prev = t;
                w
            })
            .collect()
    }

    /// At-risk periods `(start, end]` in time order; the first starts at 0,
    /// the rest at each resumption, each ending at the next event or `tau`.
    /// Empty periods (resumption at or beyond the end) are skipped.
    pub fn at_risk_periods(&self) -> Vec<(f64, f64)> {
        let n = self.n_events();
        let mut out = Vec::with_capacity(n + 1);
        let first_end = self.event_times.first().copied().unwrap_or(self.tau);
        if first_end > 0.0 {
            out.push((0.0, first_end.min(self.tau)));
        }
        for j in 0..n {
            let start = self.resumption(j);
            let end = if j + 1 < n {
                self.event_times[j + 1]
            } else {
                self.tau
            };
            if end > start {
                out.push((start, end));
            }
        }
        out
    }

    /// Total at-risk time on `[0, tau]`; exactly `tau` without resolution times.
    pub fn at_risk_time(&self) -> f64 {
        if self.resolution_times.is_none() {
            return self.tau;
        }
        self.at_risk_periods().iter().map(|(a, b)| b - a).sum()
    }

    /// Copy with every time (events, resolutions, `tau`) multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            subject_id: self.subject_id.clone(),
            event_times: self.event_times.iter().map(|t| t * c).collect(),
            resolution_times: self
                .resolution_times
                .as_ref()
                .map(|r| r.iter().map(|t| t * c).collect()),
            tau: self.tau * c,
            covariates: self.covariates.clone(),
        }
    }

    /// All structural violations of this history.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut push = |rule: Rule, detail: String| {
            out.push(Violation {
                subject_id: self.subject_id.clone(),
                rule,
                detail,
            })
        };

        if !self.tau.is_finite() || self.tau <= 0.0 {
            push(Rule::NonPositiveTau, format!("tau = {}", self.tau));
        }
        if let Some(bad) = self.event_times.iter().find(|t| !t.is_finite()) {
            push(Rule::NonFiniteValue, format!("event time {bad}"));
            return out;
        }
        for w in self.event_times.windows(2) {
            if w[1] <= w[0] {
                let what = if w[1] == w[0] { "duplicate" } else { "decreasing" };
                push(
                    Rule::NonIncreasingEventTimes,
                    format!("{what} event times {} then {}", w[0], w[1]),
                );
            }
        }
        for &t in &self.event_times {
            if t <= 0.0 {
                push(Rule::EventNotPositive, format!("event at {t}"));
            } else if self.tau.is_finite() && t > self.tau {
                push(
                    Rule::EventAfterTau,
                    format!("event at {t} after tau = {}", self.tau),
                );
            }
        }
        if let Some(res) = &self.resolution_times {
            if res.len() != self.event_times.len() {
                push(
                    Rule::ResolutionLengthMismatch,
                    format!(
                        "{} resolution times for {} events",
                        res.len(),
                        self.event_times.len()
                    ),
                );
                return out;
            }
            for (j, (&r, &t)) in res.iter().zip(&self.event_times).enumerate() {
                if !r.is_finite() {
                    push(Rule::NonFiniteValue, format!("resolution time {r}"));
                } else if r < t {
                    push(
                        Rule::ResolutionBeforeEvent,
                        format!("resolution {r} precedes event {t}"),
                    );
                }
                if let Some(&next) = self.event_times.get(j + 1) {
                    if r >= next {
                        push(
                            Rule::ResolutionOverlapsNextEvent,
                            format!("event at {next} inside non-at-risk interval ({t}, {r}]"),
                        );
                    }
                }
            }
        }
        if let Some((name, v)) = self.covariates.iter().find(|(_, v)| !v.is_finite()) {
            push(Rule::NonFiniteValue, format!("covariate {name} = {v}"));
        }
        out
    }
}

/// Structural rule broken by a history or dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    NonFiniteValue,
    NonPositiveTau,
    NonIncreasingEventTimes,
    EventNotPositive,
    EventAfterTau,
    ResolutionLengthMismatch,
    ResolutionBeforeEvent,
    ResolutionOverlapsNextEvent,
    DuplicateSubjectId,
    EmptyDataset,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Rule::NonFiniteValue => "non-finite value",
            Rule::NonPositiveTau => "non-positive tau",
            Rule::NonIncreasingEventTimes => "non-increasing event times",
            Rule::EventNotPositive => "event at or before time 0",
            Rule::EventAfterTau => "event after tau",
            Rule::ResolutionLengthMismatch => "resolution/event length mismatch",
            Rule::ResolutionBeforeEvent => "resolution before event",
            Rule::ResolutionOverlapsNextEvent => "event inside non-at-risk interval",
            Rule::DuplicateSubjectId => "duplicate subject id",
            Rule::EmptyDataset => "empty dataset",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub subject_id: String,
    pub rule: Rule,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "subject {}: {} ({})", self.subject_id, self.rule, self.detail)
    }
}

/// A collection of independent subject histories.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    subjects: Vec<EventHistory>,
    time_unit: String,
}

impl Dataset {
    pub fn new(subjects: Vec<EventHistory>) -> Self {
        Self {
            subjects,
            time_unit: String::new(),
        }
    }

    /// Builds the dataset and rejects it if any invariant fails.
    pub fn try_new(subjects: Vec<EventHistory>) -> Result<Self> {
        let d = Self::new(subjects);
        d.ensure_valid()?;
        Ok(d)
    }

    pub fn with_time_unit(mut self, unit: impl Into<String>) -> Self {
        self.time_unit = unit.into();
        self
    }

    pub fn subjects(&self) -> &[EventHistory] {
        &self.subjects
    }

    pub fn time_unit(&self) -> &str {
        &self.time_unit
    }

    pub fn m(&self) -> usize {
        self.subjects.len()
    }

    pub fn total_events(&self) -> usize {
        self.subjects.iter().map(EventHistory::n_events).sum()
    }

    pub fn has_resolutions(&self) -> bool {
        self.subjects.iter().any(|s| s.resolution_times.is_some())
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            subjects: self.subjects.iter().map(|s| s.scaled(c)).collect(),
            time_unit: self.time_unit.clone(),
        }
    }

    pub fn validate(&self) -> Vec<Violation> {
        validate_dataset(self)
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let v = self.validate();
        match v.first() {
            None => Ok(()),
            Some(first) => Err(Error::Validation {
                count: v.len(),
                first: first.to_string(),
            }),
        }
    }

    /// Short content hash (hex) over subject ids, times and covariates.
    /// Subject order matters.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for s in &self.subjects {
            h.update(s.subject_id.as_bytes());
            h.update([0u8]);
            h.update(s.tau.to_le_bytes());
            for t in &s.event_times {
                h.update(t.to_le_bytes());
            }
            h.update([1u8]);
            if let Some(r) = &s.resolution_times {
                for t in r {
                    h.update(t.to_le_bytes());
                }
            }
            h.update([2u8]);
            for (k, v) in &s.covariates {
                h.update(k.as_bytes());
                h.update(v.to_le_bytes());
            }
            h.update([3u8]);
        }
        hex_prefix(&h.finalize(), 8)
    }
}

pub(crate) fn hex_prefix(bytes: &[u8], n: usize) -> String {
    bytes.iter().take(n).map(|b| format!("{b:02x}")).collect()
}

/// Every structural violation in the dataset; empty iff all invariants hold.
pub fn validate_dataset(d: &Dataset) -> Vec<Violation> {
    let mut out = Vec::new();
    if d.subjects.is_empty() {
        out.push(Violation {
            subject_id: String::new(),
            rule: Rule::EmptyDataset,
            detail: "m = 0".into(),
        });
    }
    let mut seen = BTreeSet::new();
    for s in &d.subjects {
        if !seen.insert(s.subject_id.as_str()) {
            out.push(Violation {
                subject_id: s.subject_id.clone(),
                rule: Rule::DuplicateSubjectId,
                detail: "subject id appears more than once".into(),
            });
        }
        out.extend(s.validate());
    }
    out
}

/// Shape of the baseline rate `rho0(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineFamily {
    Constant,
    PowerLaw,
}

/// Parametric baseline rate function.
///
/// `PowerLaw` is `gamma1 * gamma2 * t^(gamma2 - 1)`, whose cumulative is
/// `gamma1 * t^gamma2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BaselineSpec {
    Constant { gamma: f64 },
    PowerLaw { gamma1: f64, gamma2: f64 },
}

impl BaselineSpec {
    pub fn constant(gamma: f64) -> Self {
        BaselineSpec::Constant { gamma }
    }

    pub fn power_law(gamma1: f64, gamma2: f64) -> Self {
        BaselineSpec::PowerLaw { gamma1, gamma2 }
    }

    pub fn family(&self) -> BaselineFamily {
        match self {
            BaselineSpec::Constant { .. } => BaselineFamily::Constant,
            BaselineSpec::PowerLaw { .. } => BaselineFamily::PowerLaw,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            BaselineSpec::Constant { gamma } => gamma.is_finite() && gamma > 0.0,
            BaselineSpec::PowerLaw { gamma1, gamma2 } => {
                gamma1.is_finite() && gamma1 > 0.0 && gamma2.is_finite() && gamma2 > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "baseline parameters must be positive: {self:?}"
            )))
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match *self {
            BaselineSpec::Constant { gamma } => vec![gamma],
            BaselineSpec::PowerLaw { gamma1, gamma2 } => vec![gamma1, gamma2],
        }
    }

    pub fn param_names(&self) -> &'static [&'static str] {
        match self {
            BaselineSpec::Constant { .. } => &["gamma"],
            BaselineSpec::PowerLaw { .. } => &["gamma1", "gamma2"],
        }
    }

    pub fn from_params(family: BaselineFamily, p: &[f64]) -> Self {
        match family {
            BaselineFamily::Constant => BaselineSpec::Constant { gamma: p[0] },
            BaselineFamily::PowerLaw => BaselineSpec::PowerLaw {
                gamma1: p[0],
                gamma2: p[1],
            },
        }
    }

    /// `rho0(t)`. For a power law with `gamma2 < 1` this is infinite at 0.
    pub fn rate(&self, t: f64) -> f64 {
        match *self {
            BaselineSpec::Constant { gamma } => gamma,
            BaselineSpec::PowerLaw { gamma1, gamma2 } => gamma1 * gamma2 * t.powf(gamma2 - 1.0),
        }
    }

    pub fn log_rate(&self, t: f64) -> f64 {
        match *self {
            BaselineSpec::Constant { gamma } => gamma.ln(),
            BaselineSpec::PowerLaw { gamma1, gamma2 } => {
                gamma1.ln() + gamma2.ln() + (gamma2 - 1.0) * t.ln()
            }
        }
    }

    /// `int_a^b rho0`, no argument checks.
    #[inline]
    pub(crate) fn cum(&self, a: f64, b: f64) -> f64 {
        match *self {
            BaselineSpec::Constant { gamma } => gamma * (b - a),
            BaselineSpec::PowerLaw { gamma1, gamma2 } => {
                gamma1 * (b.powf(gamma2) - a.powf(gamma2))
            }
        }
    }

    /// Gradient of `int_a^b rho0` with respect to the baseline parameters.
    #[inline]
    pub(crate) fn cum_grad(&self, a: f64, b: f64) -> [f64; 2] {
        match *self {
            BaselineSpec::Constant { .. } => [b - a, 0.0],
            BaselineSpec::PowerLaw { gamma1, gamma2 } => {
                let pa = a.powf(gamma2);
                let pb = b.powf(gamma2);
                let la = if a > 0.0 { pa * a.ln() } else { 0.0 };
                let lb = if b > 0.0 { pb * b.ln() } else { 0.0 };
                [pb - pa, gamma1 * (lb - la)]
            }
        }
    }

    /// Hessian of `int_a^b rho0` with respect to the baseline parameters.
    pub(crate) fn cum_hess(&self, a: f64, b: f64) -> [[f64; 2]; 2] {
        match *self {
            BaselineSpec::Constant { .. } => [[0.0; 2]; 2],
            BaselineSpec::PowerLaw { gamma1, gamma2 } => {
                let term = |t: f64, k: i32| if t > 0.0 { t.powf(gamma2) * t.ln().powi(k) } else { 0.0 };
                let cross = term(b, 1) - term(a, 1);
                [[0.0, cross], [cross, gamma1 * (term(b, 2) - term(a, 2))]]
            }
        }
    }

    /// Solves `int_start^t rho0 = amount` for `t`.
    #[inline]
    pub(crate) fn inverse_cum(&self, start: f64, amount: f64) -> f64 {
        match *self {
            BaselineSpec::Constant { gamma } => start + amount / gamma,
            BaselineSpec::PowerLaw { gamma1, gamma2 } => {
                (start.powf(gamma2) + amount / gamma1).powf(1.0 / gamma2)
            }
        }
    }
}

/// `int_a^t rho0(u) du` in closed form.
pub fn baseline_cumulative(b: &BaselineSpec, a: f64, t: f64) -> Result<f64> {
    if !(a >= 0.0 && a <= t) {
        return Err(Error::InvalidInput(format!(
            "baseline_cumulative requires 0 <= a <= t, got a = {a}, t = {t}"
        )));
    }
    Ok(b.cum(a, t))
}

/// Carryover window: `Z(t) = I(N(t-) >= threshold) I(B(t) <= delta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarryoverSpec {
    pub delta: f64,
    pub prior_event_threshold: u32,
}

impl CarryoverSpec {
    pub fn new(delta: f64) -> Self {
        Self {
            delta,
            prior_event_threshold: 1,
        }
    }

    pub fn with_threshold(mut self, k: u32) -> Self {
        self.prior_event_threshold = k;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(Error::InvalidInput(format!(
                "carryover window must be positive, got {}",
                self.delta
            )));
        }
        if self.prior_event_threshold == 0 {
            return Err(Error::InvalidInput(
                "prior event threshold must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub(crate) fn threshold(&self) -> usize {
        self.prior_event_threshold as usize
    }

    /// Window length whose no-effect coverage probability at rate `gamma` is `c`:
    /// `Pr(W <= delta) = 1 - exp(-gamma delta) = c`.
    pub fn delta_for_coverage(c: f64, gamma: f64) -> f64 {
        -(1.0 - c).ln() / gamma
    }
}

/// Distribution of the subject-level multiplier `alpha_i` (mean 1, variance `phi`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FrailtySpec {
    None,
    Gamma { phi: f64 },
    LogNormal { phi: f64 },
}

impl FrailtySpec {
    pub fn variance(&self) -> f64 {
        match *self {
            FrailtySpec::None => 0.0,
            FrailtySpec::Gamma { phi } | FrailtySpec::LogNormal { phi } => phi,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let phi = self.variance();
        if phi.is_finite() && phi >= 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "frailty variance must be >= 0, got {phi}"
            )))
        }
    }

    /// `(mu, sigma)` of the underlying normal for a mean-1, variance-`phi`
    /// lognormal: `sigma^2 = ln(1 + phi)`, `mu = -sigma^2 / 2`.
    pub fn lognormal_params(phi: f64) -> (f64, f64) {
        let s2 = phi.ln_1p();
        (-0.5 * s2, s2.sqrt())
    }
}

/// Likelihood model behind a [`FitResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// Subject effects as fixed parameters, profiled out.
    Fixed,
    /// Common rate, no heterogeneity.
    Poisson,
    /// Gamma-distributed subject effects integrated out.
    Random,
    /// Semiparametric partial likelihood.
    AndersenGill,
    /// Semiparametric with gamma subject effects.
    AndersenGillFrailty,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ModelKind::Fixed => "fixed",
            ModelKind::Poisson => "poisson",
            ModelKind::Random => "random",
            ModelKind::AndersenGill => "ag",
            ModelKind::AndersenGillFrailty => "ag-frailty",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: ModelKind,
    pub delta: Option<f64>,
    pub params: BTreeMap<String, f64>,
    pub std_errors: BTreeMap<String, f64>,
    pub loglik: f64,
    pub aic: f64,
    pub n_free: usize,
    pub converged: bool,
    /// Frailty variance estimate sits on its lower bound.
    pub boundary: bool,
    pub n_evaluations: usize,
    pub fixed_effect_alphas: Option<Vec<f64>>,
    pub dataset_hash: String,
    pub notes: Vec<String>,
}

impl FitResult {
    /// AIC is always derived here as `-2 loglik + 2 n_free`.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new(
        model: ModelKind,
        delta: Option<f64>,
        params: BTreeMap<String, f64>,
        std_errors: BTreeMap<String, f64>,
        loglik: f64,
        n_free: usize,
        converged: bool,
        n_evaluations: usize,
        dataset_hash: String,
    ) -> Self {
        Self {
            model,
            delta,
            params,
            std_errors,
            loglik,
            aic: aic(loglik, n_free),
            n_free,
            converged,
            boundary: false,
            n_evaluations,
            fixed_effect_alphas: None,
            dataset_hash,
            notes: Vec::new(),
        }
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.get(name).copied()
    }

    pub fn std_error(&self, name: &str) -> Option<f64> {
        self.std_errors.get(name).copied()
    }

    pub fn beta(&self) -> Option<f64> {
        self.param("beta")
    }
}

pub fn aic(loglik: f64, n_free: usize) -> f64 {
    -2.0 * loglik + 2.0 * n_free as f64
}

/// Where a p-value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PSource {
    Normal,
    Chi2,
    Bootstrap { replicates: usize },
}

impl fmt::Display for PSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PSource::Normal => f.write_str("normal"),
            PSource::Chi2 => f.write_str("chi2"),
            PSource::Bootstrap { replicates } => write!(f, "bootstrap({replicates})"),
        }
    }
}

/// Alternative hypothesis for signed statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    /// Carryover increases the intensity (`beta > 0`).
    #[default]
    Greater,
    TwoSided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    /// `S`, `S^2`, `Z^2` or `2 (l1 - l0)` depending on the test.
    pub statistic: f64,
    pub obs: f64,
    pub exp: f64,
    pub variance: f64,
    pub p_value: f64,
    pub p_source: PSource,
    pub alternative: Alternative,
    pub dataset_hash: String,
    pub notes: Vec<String>,
}

impl TestResult {
    /// Standardized score with a normal-tail p-value.
    pub(crate) fn score(
        obs: f64,
        exp: f64,
        variance: f64,
        alternative: Alternative,
        dataset_hash: String,
    ) -> Self {
        let s = (obs - exp) / variance.sqrt();
        Self {
            statistic: s,
            obs,
            exp,
            variance,
            p_value: crate::stats::normal_p_value(s, alternative),
            p_source: PSource::Normal,
            alternative,
            dataset_hash,
            notes: Vec::new(),
        }
    }

    /// Numerator `Obs - Exp` of a score statistic.
    pub fn score_numerator(&self) -> f64 {
        self.obs - self.exp
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rules(h: &EventHistory) -> Vec<Rule> {
        h.validate().into_iter().map(|v| v.rule).collect()
    }

    #[test]
    fn well_formed_history_has_no_violations() {
        let d = Dataset::new(vec![EventHistory::new("a", vec![1.0, 2.0], 3.0)]);
        assert!(validate_dataset(&d).is_empty());
    }

    #[test]
    fn decreasing_events_flagged_once() {
        let h = EventHistory::new("a", vec![2.0, 1.0], 3.0);
        assert_eq!(rules(&h), vec![Rule::NonIncreasingEventTimes]);
    }

    #[test]
    fn event_after_tau_flagged_once() {
        let h = EventHistory::new("a", vec![4.0], 3.0);
        assert_eq!(rules(&h), vec![Rule::EventAfterTau]);
    }

    #[test]
    fn simultaneous_events_rejected() {
        let h = EventHistory::new("a", vec![1.0, 1.0], 3.0);
        assert_eq!(rules(&h), vec![Rule::NonIncreasingEventTimes]);
    }

    #[test]
    fn event_at_tau_is_allowed() {
        assert!(EventHistory::new("a", vec![1.0, 3.0], 3.0).validate().is_empty());
    }

    #[test]
    fn event_inside_refractory_period_flagged() {
        let h = EventHistory::new("a", vec![1.0, 1.5], 3.0).with_resolutions(vec![1.6, 1.7]);
        assert_eq!(rules(&h), vec![Rule::ResolutionOverlapsNextEvent]);
        let h = EventHistory::new("a", vec![1.0], 3.0).with_resolutions(vec![0.9]);
        assert_eq!(rules(&h), vec![Rule::ResolutionBeforeEvent]);
        let h = EventHistory::new("a", vec![1.0], 3.0).with_resolutions(vec![]);
        assert_eq!(rules(&h), vec![Rule::ResolutionLengthMismatch]);
    }

    #[test]
    fn dataset_level_rules() {
        let d = Dataset::new(vec![]);
        assert_eq!(d.validate()[0].rule, Rule::EmptyDataset);
        let d = Dataset::new(vec![
            EventHistory::new("a", vec![], 1.0),
            EventHistory::new("a", vec![], 1.0),
        ]);
        assert_eq!(d.validate()[0].rule, Rule::DuplicateSubjectId);
        assert!(Dataset::try_new(vec![EventHistory::new("x", vec![], -1.0)]).is_err());
    }

    #[test]
    fn validation_is_pure() {
        let d = Dataset::new(vec![EventHistory::new("a", vec![2.0, 1.0], 3.0)]);
        let before = d.clone();
        let v1 = validate_dataset(&d);
        let v2 = validate_dataset(&d);
        assert_eq!(v1, v2);
        assert_eq!(d, before);
    }

    #[test]
    fn at_risk_respects_resolution_intervals() {
        let h = EventHistory::new("a", vec![1.0, 3.0], 5.0).with_resolutions(vec![1.5, 3.0]);
        assert!(h.at_risk(0.5));
        assert!(h.at_risk(1.0));
        assert!(!h.at_risk(1.2));
        assert!(!h.at_risk(1.5));
        assert!(h.at_risk(1.6));
        assert!(h.at_risk(3.1));
        assert!(!h.at_risk(5.1));
        assert_eq!(h.at_risk_periods(), vec![(0.0, 1.0), (1.5, 3.0), (3.0, 5.0)]);
        assert!((h.at_risk_time() - 4.5).abs() < 1e-15);
    }

    #[test]
    fn baseline_cumulative_examples() {
        let pl = BaselineSpec::power_law(1.0, 2.0);
        assert_eq!(baseline_cumulative(&pl, 0.0, 2.0).unwrap(), 4.0);
        let c = BaselineSpec::constant(3.0);
        assert_eq!(baseline_cumulative(&c, 1.0, 2.0).unwrap(), 3.0);
        let pl = BaselineSpec::power_law(2.0, 0.5);
        assert!((baseline_cumulative(&pl, 1.0, 4.0).unwrap() - 2.0).abs() < 1e-15);
        assert!(baseline_cumulative(&c, 2.0, 1.0).is_err());
    }

    #[test]
    fn inverse_cumulative_inverts() {
        for b in [BaselineSpec::constant(0.7), BaselineSpec::power_law(1.3, 0.6)] {
            let t = b.inverse_cum(0.4, 0.9);
            assert!((b.cum(0.4, t) - 0.9).abs() < 1e-12);
        }
    }

    #[test]
    fn lognormal_moments() {
        let (mu, sigma) = FrailtySpec::lognormal_params(0.6);
        let mean = (mu + 0.5 * sigma * sigma).exp();
        let var = (sigma * sigma).exp_m1() * (2.0 * mu + sigma * sigma).exp();
        assert!((mean - 1.0).abs() < 1e-12);
        assert!((var - 0.6).abs() < 1e-12);
    }

    #[test]
    fn delta_from_coverage_matches_table_grid() {
        let d: Vec<f64> = [0.02, 0.05, 0.10]
            .iter()
            .map(|&c| CarryoverSpec::delta_for_coverage(c, 1.0))
            .collect();
        assert!((d[0] - 0.0202).abs() < 5e-5);
        assert!((d[1] - 0.0513).abs() < 5e-5);
        assert!((d[2] - 0.1054).abs() < 5e-5);
    }

    #[test]
    fn aic_is_derived() {
        let f = FitResult::new(
            ModelKind::Random,
            None,
            BTreeMap::new(),
            BTreeMap::new(),
            -10.0,
            3,
            true,
            1,
            String::new(),
        );
        assert_eq!(f.aic, 26.0);
    }

    #[test]
    fn content_hash_tracks_content() {
        let a = Dataset::new(vec![EventHistory::new("a", vec![1.0], 2.0)]);
        let b = Dataset::new(vec![EventHistory::new("a", vec![1.5], 2.0)]);
        assert_eq!(a.content_hash(), a.clone().content_hash());
        assert_ne!(a.content_hash(), b.content_hash());
        assert_eq!(a.content_hash().len(), 16);
    }
}
