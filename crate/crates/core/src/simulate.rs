//! Exact simulation of carryover-modulated recurrent event processes.
//!
//! Two samplers are provided. Inversion walks the at-risk segments, on each
//! of which the intensity is `alpha rho0(t) exp(beta z)` with `z` fixed, and
//! inverts the closed-form cumulative. Thinning proposes from a dominating
//! rate and accepts with probability `lambda / majorant`; it needs only the
//! pointwise rate and serves as an independent check on inversion.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{substream, Domain};
use crate::types::{BaselineSpec, CarryoverSpec, Dataset, EventHistory, FrailtySpec};

/// How follow-up ends `tau_i` are generated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TauRule {
    Fixed { tau: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl TauRule {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            TauRule::Fixed { tau } => tau.is_finite() && tau > 0.0,
            TauRule::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && 0.0 < lo && lo < hi,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid tau rule {self:?}")))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            TauRule::Fixed { tau } => tau,
            TauRule::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            TauRule::Fixed { tau } => tau,
            TauRule::Uniform { lo, hi } => 0.5 * (lo + hi),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    /// Inversion for the constant baseline, thinning otherwise.
    #[default]
    Auto,
    Inversion,
    Thinning,
}

/// Everything needed to generate one subject given its frailty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcessSpec {
    pub baseline: BaselineSpec,
    pub beta: f64,
    pub carryover: CarryoverSpec,
    /// Non-at-risk duration after each event.
    pub refractory: f64,
    pub tau: f64,
    pub sampler: SamplerKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub m: usize,
    pub tau_rule: TauRule,
    pub baseline: BaselineSpec,
    pub frailty: FrailtySpec,
    pub beta: f64,
    /// Window `delta_0` of the generating process.
    pub carryover: CarryoverSpec,
    pub refractory: f64,
    pub seed: u64,
    #[serde(default)]
    pub sampler: SamplerKind,
    /// Frailties pinned across replicates instead of drawn per dataset.
    #[serde(default)]
    pub fixed_alphas: Option<Vec<f64>>,
}

impl SimConfig {
    pub fn new(m: usize, tau_rule: TauRule, baseline: BaselineSpec, carryover: CarryoverSpec) -> Self {
        Self {
            m,
            tau_rule,
            baseline,
            frailty: FrailtySpec::None,
            beta: 0.0,
            carryover,
            refractory: 0.0,
            seed: 0,
            sampler: SamplerKind::Auto,
            fixed_alphas: None,
        }
    }

    pub fn with_frailty(mut self, f: FrailtySpec) -> Self {
        self.frailty = f;
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_refractory(mut self, r: f64) -> Self {
        self.refractory = r;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_sampler(mut self, s: SamplerKind) -> Self {
        self.sampler = s;
        self
    }

    /// Draws one frailty vector from the config's own seed and pins it.
    pub fn with_alphas_drawn_once(mut self) -> Result<Self> {
        let mut rng = substream(self.seed, Domain::FixedFrailty, 0, 0);
        self.fixed_alphas = Some(sample_frailties(&self.frailty, self.m, &mut rng)?);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidInput("m must be at least 1".into()));
        }
        self.tau_rule.validate()?;
        self.baseline.validate()?;
        self.frailty.validate()?;
        self.carryover.validate()?;
        if !self.beta.is_finite() {
            return Err(Error::InvalidInput("beta must be finite".into()));
        }
        if !(self.refractory.is_finite() && self.refractory >= 0.0) {
            return Err(Error::InvalidInput("refractory period must be >= 0".into()));
        }
        if let Some(a) = &self.fixed_alphas {
            if a.len() != self.m || a.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                return Err(Error::InvalidInput(
                    "fixed frailties must be m positive values".into(),
                ));
            }
        }
        Ok(())
    }
}

/// `m` draws of the subject multiplier, mean 1 and variance `phi`.
pub fn sample_frailties<R: Rng + ?Sized>(f: &FrailtySpec, m: usize, rng: &mut R) -> Result<Vec<f64>> {
    f.validate()?;
    Ok(match *f {
        FrailtySpec::None => vec![1.0; m],
        FrailtySpec::Gamma { phi } | FrailtySpec::LogNormal { phi } if phi == 0.0 => vec![1.0; m],
        FrailtySpec::Gamma { phi } => {
            let g = Gamma::new(1.0 / phi, phi).map_err(|e| Error::InvalidInput(e.to_string()))?;
            (0..m).map(|_| g.sample(rng)).collect()
        }
        FrailtySpec::LogNormal { phi } => {
            let (mu, sigma) = FrailtySpec::lognormal_params(phi);
            let d = LogNormal::new(mu, sigma).map_err(|e| Error::InvalidInput(e.to_string()))?;
            (0..m).map(|_| d.sample(rng)).collect()
        }
    })
}

/// A baseline whose cumulative can be evaluated and inverted exactly.
pub trait CumulativeRate {
    /// `int_a^b rho0`.
    fn cum(&self, a: f64, b: f64) -> f64;
    /// Smallest `t >= start` with `int_start^t rho0 = amount`; infinite when
    /// the remaining mass is smaller than `amount`.
    fn inverse_cum(&self, start: f64, amount: f64) -> f64;
}

impl CumulativeRate for BaselineSpec {
    fn cum(&self, a: f64, b: f64) -> f64 {
        BaselineSpec::cum(self, a, b)
    }

    fn inverse_cum(&self, start: f64, amount: f64) -> f64 {
        BaselineSpec::inverse_cum(self, start, amount)
    }
}

/// Piecewise-constant rate with the given cumulative values at the knots,
/// zero beyond the last knot. Built from Breslow increments for
/// semiparametric bootstraps.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseConstantRate {
    knots: Vec<f64>,
    cumulative: Vec<f64>,
}

impl PiecewiseConstantRate {
    /// `jump_times` strictly increasing and positive; `increments[r]` is the
    /// mass spread uniformly over `(jump_times[r-1], jump_times[r]]`.
    pub fn from_increments(jump_times: &[f64], increments: &[f64]) -> Result<Self> {
        if jump_times.len() != increments.len() {
            return Err(Error::InvalidInput("knots and increments differ in length".into()));
        }
        let mut knots = Vec::with_capacity(jump_times.len() + 1);
        let mut cumulative = Vec::with_capacity(jump_times.len() + 1);
        knots.push(0.0);
        cumulative.push(0.0);
        let mut acc = 0.0;
        for (&t, &inc) in jump_times.iter().zip(increments) {
            if !(t > *knots.last().unwrap()) || !(inc >= 0.0) {
                return Err(Error::InvalidInput(
                    "knots must increase from 0 and increments be nonnegative".into(),
                ));
            }
            acc += inc;
            knots.push(t);
            cumulative.push(acc);
        }
        Ok(Self { knots, cumulative })
    }

    pub fn cumulative_at(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let k = self.knots.partition_point(|&x| x < t);
        if k >= self.knots.len() {
            return *self.cumulative.last().unwrap();
        }
        let (a, b) = (self.knots[k - 1], self.knots[k]);
        let (ca, cb) = (self.cumulative[k - 1], self.cumulative[k]);
        ca + (cb - ca) * (t - a) / (b - a)
    }
}

impl CumulativeRate for PiecewiseConstantRate {
    fn cum(&self, a: f64, b: f64) -> f64 {
        self.cumulative_at(b) - self.cumulative_at(a)
    }

    fn inverse_cum(&self, start: f64, amount: f64) -> f64 {
        let target = self.cumulative_at(start) + amount;
        let k = self.cumulative.partition_point(|&c| c < target);
        if k >= self.cumulative.len() {
            return f64::INFINITY;
        }
        if k == 0 {
            return start;
        }
        let (a, b) = (self.knots[k - 1], self.knots[k]);
        let (ca, cb) = (self.cumulative[k - 1], self.cumulative[k]);
        (a + (b - a) * (target - ca) / (cb - ca)).max(start)
    }
}

fn history_from(id: String, events: Vec<f64>, refractory: f64, tau: f64) -> EventHistory {
    if refractory > 0.0 {
        let res = events.iter().map(|t| t + refractory).collect();
        EventHistory::new(id, events, tau).with_resolutions(res)
    } else {
        EventHistory::new(id, events, tau)
    }
}

/// Inversion sampler over any exactly invertible baseline.
fn events_by_inversion<C: CumulativeRate, R: Rng + ?Sized>(
    alpha: f64,
    base: &C,
    beta: f64,
    carryover: &CarryoverSpec,
    refractory: f64,
    tau: f64,
    rng: &mut R,
) -> Vec<f64> {
    let mut events = Vec::new();
    let mut start = 0.0;
    let k = carryover.prior_event_threshold as usize;
    let boost = alpha * beta.exp();
    while start < tau {
        let mut e: f64 = Exp1.sample(rng);
        let mut from = start;
        if events.len() >= k {
            let wend = (start + carryover.delta).min(tau);
            let mass = boost * base.cum(start, wend);
            if e <= mass {
                let t = base.inverse_cum(start, e / boost).min(wend);
                events.push(t);
                start = t + refractory;
                continue;
            }
            e -= mass;
            from = wend;
        }
        let t = base.inverse_cum(from, e / alpha);
        if !(t <= tau) {
            break;
        }
        // guard against a zero-length draw from rounding
        if events.last().is_some_and(|&l| t <= l) {
            break;
        }
        events.push(t);
        start = t + refractory;
    }
    events
}

fn events_by_thinning<R: Rng + ?Sized>(
    alpha: f64,
    b: &BaselineSpec,
    beta: f64,
    carryover: &CarryoverSpec,
    refractory: f64,
    tau: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mut events: Vec<f64> = Vec::new();
    let mut start = 0.0;
    let mut t = 0.0;
    let k = carryover.prior_event_threshold as usize;
    let up = beta.max(0.0).exp();
    let eps = 1e-9 * tau;
    if let BaselineSpec::PowerLaw { gamma2, .. } = *b {
        if gamma2 < 1.0 {
            // the rate is unbounded at 0; the first event cannot carry a
            // window, so [0, eps] is covered by exact inversion
            let e: f64 = Exp1.sample(rng);
            let s = b.inverse_cum(0.0, e / alpha);
            if s <= eps {
                events.push(s);
                start = s + refractory;
                t = start;
            } else {
                t = eps;
            }
        }
    }
    while t < tau {
        let sup = match *b {
            BaselineSpec::Constant { gamma } => gamma,
            BaselineSpec::PowerLaw { gamma1, gamma2 } => {
                let at = if gamma2 < 1.0 { t.max(eps) } else { tau };
                gamma1 * gamma2 * at.powf(gamma2 - 1.0)
            }
        };
        let majorant = alpha * sup * up;
        if !(majorant.is_finite() && majorant > 0.0) {
            return Err(Error::NonFinite(format!("thinning majorant {majorant}")));
        }
        let e: f64 = Exp1.sample(rng);
        t += e / majorant;
        if t > tau {
            break;
        }
        let z = events.len() >= k && t - start <= carryover.delta;
        let lambda = alpha * b.rate(t) * if z { beta.exp() } else { 1.0 };
        if rng.random::<f64>() * majorant < lambda {
            events.push(t);
            start = t + refractory;
            t = start;
        }
    }
    Ok(events)
}

/// One subject's history with multiplier `alpha`.
pub fn simulate_process<R: Rng + ?Sized>(
    subject_id: impl Into<String>,
    alpha: f64,
    spec: &ProcessSpec,
    rng: &mut R,
) -> Result<EventHistory> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidInput(format!("alpha must be positive, got {alpha}")));
    }
    let sampler = match (spec.sampler, spec.baseline) {
        (SamplerKind::Auto, BaselineSpec::Constant { .. }) => SamplerKind::Inversion,
        (SamplerKind::Auto, _) => SamplerKind::Thinning,
        (s, _) => s,
    };
    let events = match sampler {
        SamplerKind::Thinning => events_by_thinning(
            alpha,
            &spec.baseline,
            spec.beta,
            &spec.carryover,
            spec.refractory,
            spec.tau,
            rng,
        )?,
        _ => events_by_inversion(
            alpha,
            &spec.baseline,
            spec.beta,
            &spec.carryover,
            spec.refractory,
            spec.tau,
            rng,
        ),
    };
    Ok(history_from(subject_id.into(), events, spec.refractory, spec.tau))
}

/// Null-model (`beta = 0`) history over an arbitrary invertible baseline.
pub fn simulate_null_process<C: CumulativeRate, R: Rng + ?Sized>(
    subject_id: impl Into<String>,
    alpha: f64,
    base: &C,
    refractory: f64,
    tau: f64,
    rng: &mut R,
) -> EventHistory {
    let c = CarryoverSpec::new(1.0);
    let events = events_by_inversion(alpha, base, 0.0, &c, refractory, tau, rng);
    history_from(subject_id.into(), events, refractory, tau)
}

/// Replicate `replicate` of the configured scenario. Subject `i` uses its
/// own substream, so the dataset does not depend on evaluation order.
pub fn simulate_dataset(cfg: &SimConfig, replicate: u64) -> Result<Dataset> {
    cfg.validate()?;
    let subjects = (0..cfg.m)
        .map(|i| {
            let mut rng = substream(cfg.seed, Domain::Simulation, replicate, i as u64);
            let tau = cfg.tau_rule.sample(&mut rng);
            let alpha = match &cfg.fixed_alphas {
                Some(a) => a[i],
                None => sample_frailties(&cfg.frailty, 1, &mut rng)?[0],
            };
            let spec = ProcessSpec {
                baseline: cfg.baseline,
                beta: cfg.beta,
                carryover: cfg.carryover,
                refractory: cfg.refractory,
                tau,
                sampler: cfg.sampler,
            };
            simulate_process(format!("s{}", i + 1), alpha, &spec, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset::new(subjects))
}

/// Order statistics of `n` draws from the density `rho0(t) / int_0^tau rho0`
/// on `[0, tau]`.
pub fn sample_conditional_event_times<R: Rng + ?Sized>(
    n: usize,
    b: &BaselineSpec,
    tau: f64,
    rng: &mut R,
) -> Vec<f64> {
    let mut out: Vec<f64> = (0..n)
        .map(|_| {
            // (0, 1] so that no event lands at 0
            let u = 1.0 - rng.random::<f64>();
            match *b {
                BaselineSpec::Constant { .. } => tau * u,
                BaselineSpec::PowerLaw { gamma2, .. } => tau * u.powf(1.0 / gamma2),
            }
        })
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{ks_one_sample, ks_two_sample, mean};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn spec(beta: f64, delta: f64, tau: f64) -> ProcessSpec {
        ProcessSpec {
            baseline: BaselineSpec::constant(1.0),
            beta,
            carryover: CarryoverSpec::new(delta),
            refractory: 0.0,
            tau,
            sampler: SamplerKind::Auto,
        }
    }

    fn sample_var(xs: &[f64]) -> f64 {
        let m = mean(xs);
        xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
    }

    #[test]
    fn no_frailty_is_all_ones() {
        assert_eq!(sample_frailties(&FrailtySpec::None, 3, &mut rng(1)).unwrap(), vec![1.0; 3]);
        assert!(sample_frailties(&FrailtySpec::Gamma { phi: -1.0 }, 3, &mut rng(1)).is_err());
    }

    #[test]
    fn gamma_frailty_moments() {
        let a = sample_frailties(&FrailtySpec::Gamma { phi: 0.3 }, 100_000, &mut rng(2)).unwrap();
        assert!((mean(&a) - 1.0).abs() < 0.02);
        assert!((sample_var(&a) - 0.3).abs() < 0.03);
    }

    #[test]
    fn lognormal_frailty_moments() {
        let a = sample_frailties(&FrailtySpec::LogNormal { phi: 0.6 }, 100_000, &mut rng(3)).unwrap();
        assert!((mean(&a) - 1.0).abs() < 0.03);
        assert!((sample_var(&a) - 0.6).abs() < 0.06);
    }

    #[test]
    fn hpp_mean_count() {
        let s = spec(0.0, 0.1, 10.0);
        let mut r = rng(4);
        let counts: Vec<f64> = (0..10_000)
            .map(|_| simulate_process("a", 1.0, &s, &mut r).unwrap().n_events() as f64)
            .collect();
        assert!((mean(&counts) - 10.0).abs() < 0.3);
    }

    #[test]
    fn short_gap_probability_under_carryover() {
        let s = spec(2f64.ln(), 0.1, 1e9);
        let mut r = rng(5);
        let h = simulate_process("a", 1.0, &ProcessSpec { tau: 10_001.0, ..s }, &mut r).unwrap();
        let gaps: Vec<f64> = h.gap_times()[1..].to_vec();
        assert!(gaps.len() >= 9_000);
        let p = gaps.iter().filter(|&&w| w <= 0.1).count() as f64 / gaps.len() as f64;
        assert!((p - (1.0 - (-0.2f64).exp())).abs() < 0.01, "p = {p}");
    }

    #[test]
    fn refractory_spacing() {
        let s = ProcessSpec {
            refractory: 0.5,
            ..spec(1.0, 0.3, 50.0)
        };
        let h = simulate_process("a", 3.0, &s, &mut rng(6)).unwrap();
        assert!(h.n_events() > 10);
        assert!(h.event_times().windows(2).all(|w| w[1] - w[0] >= 0.5));
        assert!(h.validate().is_empty());
    }

    #[test]
    fn samplers_agree_on_gap_distribution() {
        let gaps = |kind: SamplerKind, seed: u64| {
            let s = ProcessSpec {
                sampler: kind,
                ..spec(0.7, 0.3, 11_000.0)
            };
            simulate_process("a", 1.0, &s, &mut rng(seed)).unwrap().gap_times()[1..].to_vec()
        };
        let a = gaps(SamplerKind::Inversion, 7);
        let b = gaps(SamplerKind::Thinning, 8);
        assert!(a.len() > 10_000 && b.len() > 10_000);
        assert!(ks_two_sample(&a, &b).p_value > 0.01);
    }

    #[test]
    fn hpp_gaps_are_exponential() {
        let h = simulate_process("a", 1.0, &spec(0.0, 0.2, 10_000.0), &mut rng(9)).unwrap();
        assert!(ks_one_sample(&h.gap_times(), |w| 1.0 - (-w).exp()).p_value > 0.01);
    }

    #[test]
    fn power_law_counts_match_cumulative() {
        for gamma2 in [0.5, 2.0] {
            let s = ProcessSpec {
                baseline: BaselineSpec::power_law(1.0, gamma2),
                ..spec(0.0, 0.1, 4.0)
            };
            let mut r = rng(10);
            let counts: Vec<f64> = (0..4000)
                .map(|_| simulate_process("a", 1.0, &s, &mut r).unwrap().n_events() as f64)
                .collect();
            let expect = 4f64.powf(gamma2);
            assert!((mean(&counts) - expect).abs() < 4.0 * (expect / 4000.0).sqrt());
        }
    }

    #[test]
    fn dataset_is_valid_and_deterministic() {
        let cfg = SimConfig::new(100, TauRule::Fixed { tau: 10.0 }, BaselineSpec::constant(1.0), CarryoverSpec::new(0.1))
            .with_frailty(FrailtySpec::Gamma { phi: 0.3 })
            .with_seed(11);
        let d = simulate_dataset(&cfg, 0).unwrap();
        assert_eq!(d.m(), 100);
        assert!(d.validate().is_empty());
        assert_eq!(d, simulate_dataset(&cfg, 0).unwrap());
        assert_ne!(d, simulate_dataset(&cfg, 1).unwrap());
    }

    #[test]
    fn uniform_tau_targets_mean_count() {
        let cfg = SimConfig::new(10_000, TauRule::Uniform { lo: 0.8, hi: 1.2 }, BaselineSpec::constant(1.0), CarryoverSpec::new(0.1))
            .with_seed(12);
        let d = simulate_dataset(&cfg, 0).unwrap();
        assert!((d.total_events() as f64 / 1e4 - 1.0).abs() < 0.05);
    }

    #[test]
    fn conditional_samplers() {
        assert!(sample_conditional_event_times(0, &BaselineSpec::constant(1.0), 1.0, &mut rng(1)).is_empty());
        let u = sample_conditional_event_times(100_000, &BaselineSpec::constant(3.0), 1.0, &mut rng(13));
        assert!(ks_one_sample(&u, |t| t.clamp(0.0, 1.0)).statistic < 0.01);
        let p = sample_conditional_event_times(100_000, &BaselineSpec::power_law(7.0, 2.0), 1.0, &mut rng(14));
        assert!(ks_one_sample(&p, |t| t.clamp(0.0, 1.0).powi(2)).statistic < 0.01);
        assert!(p.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn piecewise_rate_inverts() {
        let pw = PiecewiseConstantRate::from_increments(&[1.0, 3.0], &[0.5, 1.0]).unwrap();
        assert_eq!(pw.cumulative_at(2.0), 1.0);
        assert_eq!(pw.cumulative_at(5.0), 1.5);
        assert!((pw.inverse_cum(0.5, 0.75) - 2.0).abs() < 1e-12);
        assert!(pw.inverse_cum(0.0, 2.0).is_infinite());
    }
}
