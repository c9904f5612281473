//! Descriptive estimates: mean functions, gap-time hazards and Obs/Exp
//! tables over a grid of window lengths.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{fit_with, FitOptions};
use crate::exposure::observed_in_window;
use crate::score::{score_test_fixed, score_test_random};
use crate::semiparam::breslow_increments;
use crate::types::{BaselineFamily, CarryoverSpec, Dataset, ModelKind};

/// Right-continuous step function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    pub jump_times: Vec<f64>,
    pub cumulative_values: Vec<f64>,
    pub variance: Option<Vec<f64>>,
}

impl StepFunction {
    pub fn new(jump_times: Vec<f64>, cumulative_values: Vec<f64>, variance: Option<Vec<f64>>) -> Result<Self> {
        let s = Self {
            jump_times,
            cumulative_values,
            variance,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.jump_times.len();
        if self.cumulative_values.len() != n || self.variance.as_ref().is_some_and(|v| v.len() != n) {
            return Err(Error::InvalidInput("step function columns differ in length".into()));
        }
        if self.jump_times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidInput("jump times must be strictly increasing".into()));
        }
        if self.cumulative_values.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidInput("cumulative values must be nondecreasing".into()));
        }
        Ok(())
    }

    /// Value at `t` (0 before the first jump).
    pub fn value_at(&self, t: f64) -> f64 {
        match self.jump_times.partition_point(|&s| s <= t) {
            0 => 0.0,
            k => self.cumulative_values[k - 1],
        }
    }
}

/// Nelson–Aalen estimate of the mean function `E N(t)`, with the
/// Poisson-type variance `sum dN / Y^2`.
pub fn nelson_aalen_mean(d: &Dataset) -> Result<StepFunction> {
    let t = breslow_increments(d)?;
    let mut h = 0.0;
    let mut v = 0.0;
    let mut values = Vec::with_capacity(t.dn.len());
    let mut var = Vec::with_capacity(t.dn.len());
    for (&n, &y) in t.dn.iter().zip(&t.y) {
        h += n as f64 / y as f64;
        v += n as f64 / (y as f64 * y as f64);
        values.push(h);
        var.push(v);
    }
    Ok(StepFunction {
        jump_times: t.distinct_times,
        cumulative_values: values,
        variance: Some(var),
    })
}

/// One gap on the at-risk clock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    pub subject_id: String,
    /// 1 for the time to the first event, 2 for the next, and so on.
    pub index: usize,
    pub duration: f64,
    pub censored: bool,
}

/// Gaps measured from each resumption to the next event; the final partial
/// gap is censored at `tau` (and dropped when it has zero length).
pub fn extract_gaps(d: &Dataset) -> Vec<Gap> {
    let mut out = Vec::new();
    for h in d.subjects() {
        let n = h.n_events();
        let start = |j: usize| if j == 0 { 0.0 } else { h.resumption(j - 1) };
        for (j, &t) in h.event_times().iter().enumerate() {
            out.push(Gap {
                subject_id: h.subject_id().to_string(),
                index: j + 1,
                duration: t - start(j),
                censored: false,
            });
        }
        let last = h.tau() - start(n);
        if last > 0.0 {
            out.push(Gap {
                subject_id: h.subject_id().to_string(),
                index: n + 1,
                duration: last,
                censored: true,
            });
        }
    }
    out
}

/// One interval `(lo, hi]` of a piecewise-constant hazard.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HazardBin {
    pub lo: f64,
    pub hi: f64,
    /// Cumulative hazard at `hi`.
    pub cum_hazard: f64,
    /// `(H(hi) - H(lo)) / (hi - lo)`.
    pub hazard: f64,
}

fn check_edges(edges: &[f64]) -> Result<()> {
    if edges.len() < 2 || edges[0] != 0.0 || edges.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidInput("edges must start at 0 and increase strictly".into()));
    }
    Ok(())
}

/// Piecewise-constant hazard from cumulative hazard values at the edges.
pub fn piecewise_from_cumulative(edges: &[f64], cum: &[f64]) -> Result<Vec<HazardBin>> {
    check_edges(edges)?;
    if cum.len() != edges.len() {
        return Err(Error::InvalidInput("one cumulative value per edge".into()));
    }
    Ok(edges
        .windows(2)
        .zip(cum.windows(2))
        .map(|(e, h)| HazardBin {
            lo: e[0],
            hi: e[1],
            cum_hazard: h[1],
            hazard: (h[1] - h[0]) / (e[1] - e[0]),
        })
        .collect())
}

/// Nelson–Aalen cumulative hazard of censored durations, evaluated at `at`.
pub fn nelson_aalen_durations(gaps: &[(f64, bool)], at: &[f64]) -> Result<Vec<f64>> {
    if let Some(&(w, _)) = gaps.iter().find(|(w, _)| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidInput(format!("gap durations must be finite and >= 0, got {w}")));
    }
    let mut sorted: Vec<(f64, bool)> = gaps.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    // (time, increment) at each distinct uncensored duration
    let mut jumps: Vec<(f64, f64)> = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let w = sorted[i].0;
        let at_risk = sorted.len() - i;
        let mut events = 0usize;
        while i < sorted.len() && sorted[i].0 == w {
            events += usize::from(!sorted[i].1);
            i += 1;
        }
        if events > 0 {
            jumps.push((w, events as f64 / at_risk as f64));
        }
    }
    let mut out = Vec::with_capacity(at.len());
    for &a in at {
        out.push(jumps.iter().take_while(|(w, _)| *w <= a).map(|(_, v)| v).sum());
    }
    Ok(out)
}

/// Nelson–Aalen cumulative hazard of the gaps at each edge, differenced into
/// a piecewise-constant hazard.
pub fn gap_hazard_piecewise(gaps: &[(f64, bool)], edges: &[f64]) -> Result<Vec<HazardBin>> {
    check_edges(edges)?;
    let cum = nelson_aalen_durations(gaps, edges)?;
    piecewise_from_cumulative(edges, &cum)
}

/// [`gap_hazard_piecewise`] separately for each gap index.
pub fn gap_hazard_by_index(gaps: &[Gap], edges: &[f64]) -> Result<BTreeMap<usize, Vec<HazardBin>>> {
    let mut groups: BTreeMap<usize, Vec<(f64, bool)>> = BTreeMap::new();
    for g in gaps {
        groups.entry(g.index).or_default().push((g.duration, g.censored));
    }
    groups
        .into_iter()
        .map(|(k, v)| Ok((k, gap_hazard_piecewise(&v, edges)?)))
        .collect()
}

/// Round half away from zero to `places` decimals.
pub fn round_to(x: f64, places: i32) -> f64 {
    let s = 10f64.powi(places);
    (x * s).round() / s
}

/// One row of an Obs/Exp table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObsExpRow {
    pub delta: f64,
    pub obs: usize,
    pub exp: f64,
    /// Baseline estimates from the full fit (`gamma`, or `gamma1, gamma2`).
    pub baseline: Vec<f64>,
    pub beta: f64,
    pub beta_se: f64,
    /// Absent for the fixed-effects model.
    pub phi: Option<f64>,
    /// Squared standardized score statistic.
    pub s2: f64,
    /// Squared Wald statistic `(beta / se)^2`.
    pub z2: f64,
    pub loglik: f64,
}

/// Column names in table order.
pub const OBS_EXP_COLUMNS: [&str; 9] = ["delta", "obs", "exp", "gamma", "beta", "phi", "s2", "z2", "loglik"];

/// Obs/Exp table over `delta_grid` for the fixed or random model. `Exp` is
/// the expected count under the model's score test and the remaining
/// columns come from the full fit at each window length.
pub fn obs_exp_table(d: &Dataset, family: BaselineFamily, delta_grid: &[f64], model: ModelKind) -> Result<Vec<ObsExpRow>> {
    obs_exp_table_with(d, family, delta_grid, model, 1)
}

/// [`obs_exp_table`] with a prior-event threshold other than 1.
pub fn obs_exp_table_with(
    d: &Dataset,
    family: BaselineFamily,
    delta_grid: &[f64],
    model: ModelKind,
    threshold: u32,
) -> Result<Vec<ObsExpRow>> {
    if delta_grid.is_empty() {
        return Err(Error::InvalidInput("delta grid is empty".into()));
    }
    if !matches!(model, ModelKind::Fixed | ModelKind::Random) {
        return Err(Error::InvalidInput(format!("obs/exp tables need the fixed or random model, got {model}")));
    }
    delta_grid
        .iter()
        .map(|&delta| {
            let c = CarryoverSpec::new(delta).with_threshold(threshold);
            let test = match model {
                ModelKind::Fixed => score_test_fixed(d, family, &c)?,
                _ => score_test_random(d, family, &c)?,
            };
            let fit = fit_with(d, family, &c, model, FitOptions::default())?;
            let beta = fit.params["beta"];
            let se = fit.std_errors.get("beta").copied().unwrap_or(f64::NAN);
            let obs: usize = d.subjects().iter().map(|h| observed_in_window(h, &c)).sum();
            Ok(ObsExpRow {
                delta,
                obs,
                exp: test.exp,
                baseline: family_params(family).iter().map(|n| fit.params[*n]).collect(),
                beta,
                beta_se: se,
                phi: fit.params.get("phi").copied(),
                s2: test.statistic * test.statistic,
                z2: (beta / se).powi(2),
                loglik: fit.loglik,
            })
        })
        .collect()
}

fn family_params(family: BaselineFamily) -> &'static [&'static str] {
    match family {
        BaselineFamily::Constant => &["gamma"],
        BaselineFamily::PowerLaw => &["gamma1", "gamma2"],
    }
}
