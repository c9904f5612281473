//! Carryover indicators and the closed-form integrals built on them.
//!
//! Every at-risk period `(r_j, t_{j+1}]` is split at the window expiry
//! `min(r_j + delta, t_{j+1}, tau)`. On each resulting segment `Z(t)` is
//! constant, so integrals of `rho0(t) exp(beta Z(t)) Y(t)` reduce to sums of
//! closed-form baseline cumulatives.

use crate::error::{Error, Result};
use crate::types::{BaselineSpec, CarryoverSpec, EventHistory};

/// Maximal interval `(start, end]` of the at-risk set on which `Z` is constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub in_window: bool,
}

/// At-risk segments of `[0, tau]`, in time order.
pub fn at_risk_segments(h: &EventHistory, c: &CarryoverSpec) -> Vec<Segment> {
    let mut segs = Vec::with_capacity(2 * h.n_events() + 1);
    let mut push = |start: f64, end: f64, in_window: bool| {
        if end > start {
            segs.push(Segment {
                start,
                end,
                in_window,
            });
        }
    };
    let events = h.event_times();
    let n = events.len();
    let tau = h.tau();
    push(0.0, events.first().copied().unwrap_or(tau).min(tau), false);
    for j in 0..n {
        let start = h.resumption(j);
        let end = if j + 1 < n { events[j + 1] } else { tau };
        if end <= start {
            continue;
        }
        if j + 1 >= c.threshold() {
            let expiry = (start + c.delta).min(end);
            push(start, expiry, true);
            push(expiry, end, false);
        } else {
            push(start, end, false);
        }
    }
    segs
}

/// `Z(t)` for the history at time `t`.
pub fn carryover_indicator(h: &EventHistory, t: f64, c: &CarryoverSpec) -> Result<u8> {
    if !(0.0..=h.tau()).contains(&t) {
        return Err(Error::TimeOutOfRange { t, tau: h.tau() });
    }
    Ok(indicator_unchecked(h, t, c))
}

#[inline]
pub(crate) fn indicator_unchecked(h: &EventHistory, t: f64, c: &CarryoverSpec) -> u8 {
    let k = h.events_before(t);
    if k == 0 || k < c.threshold() {
        return 0;
    }
    let resume = h.resumption(k - 1);
    if t <= resume {
        // inside the non-at-risk interval (t_{k}, r_{k}]
        return 0;
    }
    u8::from(t - resume <= c.delta)
}

/// Number of events with `Z = 1` at their occurrence.
pub fn observed_in_window(h: &EventHistory, c: &CarryoverSpec) -> usize {
    let events = h.event_times();
    (1..events.len())
        .filter(|&j| j >= c.threshold() && events[j] - h.resumption(j - 1) <= c.delta)
        .count()
}

/// Lebesgue measure of `{t : Z(t) = 1, Y(t) = 1}`.
///
/// Without resolution times and with threshold 1 this is the min-sum
/// `sum_{j=2}^{n+1} min(w_j, delta)` with the last gap censored at `tau`.
pub fn carryover_exposure(h: &EventHistory, c: &CarryoverSpec) -> f64 {
    window_lengths(h, c).0
}

/// `(window time, at-risk time)`. Window time is accumulated as
/// `min(period length, delta)` over post-event periods in time order, and
/// the at-risk time is `tau` itself when there are no resolution times.
pub fn window_lengths(h: &EventHistory, c: &CarryoverSpec) -> (f64, f64) {
    let events = h.event_times();
    let n = events.len();
    let mut on = 0.0;
    let mut total = 0.0;
    if n == 0 {
        return (0.0, h.tau());
    }
    total += events[0].min(h.tau());
    for j in 0..n {
        let start = h.resumption(j);
        let end = if j + 1 < n { events[j + 1] } else { h.tau() };
        if end <= start {
            continue;
        }
        let len = end - start;
        total += len;
        if j + 1 >= c.threshold() {
            on += len.min(c.delta);
        }
    }
    let at_risk = if h.resolution_times().is_some() { total } else { h.tau() };
    (on, at_risk)
}

/// Baseline mass split by window status: `(off, on)` with
/// `on = int Z rho0 Y` and `off = int (1 - Z) rho0 Y`.
pub fn window_integrals(segs: &[Segment], b: &BaselineSpec) -> (f64, f64) {
    let (mut off, mut on) = (0.0, 0.0);
    for s in segs {
        let v = b.cum(s.start, s.end);
        if s.in_window {
            on += v;
        } else {
            off += v;
        }
    }
    (off, on)
}

/// Gradients of `(off, on)` with respect to the baseline parameters.
pub(crate) fn window_integral_grads(segs: &[Segment], b: &BaselineSpec) -> ([f64; 2], [f64; 2]) {
    let mut off = [0.0; 2];
    let mut on = [0.0; 2];
    for s in segs {
        let g = b.cum_grad(s.start, s.end);
        let dst = if s.in_window { &mut on } else { &mut off };
        dst[0] += g[0];
        dst[1] += g[1];
    }
    (off, on)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExposureSummary {
    pub total_window_time: f64,
    pub obs_count: usize,
    pub weighted_window_integral: f64,
    pub at_risk_baseline_integral: f64,
}

pub fn exposure_summary(h: &EventHistory, b: &BaselineSpec, c: &CarryoverSpec) -> ExposureSummary {
    let segs = at_risk_segments(h, c);
    let (off, on) = window_integrals(&segs, b);
    ExposureSummary {
        total_window_time: segs
            .iter()
            .filter(|s| s.in_window)
            .map(|s| s.end - s.start)
            .sum(),
        obs_count: observed_in_window(h, c),
        weighted_window_integral: on,
        at_risk_baseline_integral: off + on,
    }
}

/// `R(beta) = int_0^tau rho0(t) exp(beta Z(t)) Y(t) dt` and its first two
/// `beta`-derivatives (equal, since `Z` is 0/1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RIntegral {
    pub value: f64,
    pub d_dbeta: f64,
    pub d2_dbeta2: f64,
}

pub fn r_integral(h: &EventHistory, b: &BaselineSpec, beta: f64, c: &CarryoverSpec) -> RIntegral {
    let (off, on) = window_integrals(&at_risk_segments(h, c), b);
    let d = beta.exp() * on;
    RIntegral {
        value: off + d,
        d_dbeta: d,
        d2_dbeta2: d,
    }
}

/// `int_0^t rho0(u) exp(beta Z(u)) Y(u) du` for `t` within `[0, tau]`.
pub fn integrated_intensity(
    h: &EventHistory,
    b: &BaselineSpec,
    beta: f64,
    c: &CarryoverSpec,
    t: f64,
) -> f64 {
    let eb = beta.exp();
    at_risk_segments(h, c)
        .iter()
        .take_while(|s| s.start < t)
        .map(|s| {
            let v = b.cum(s.start, s.end.min(t));
            if s.in_window {
                eb * v
            } else {
                v
            }
        })
        .sum()
}

/// Intensity with gamma-distributed subject effects integrated out:
///
/// `(1/phi + N(t-)) / (1/phi + int_0^t rho0 e^{beta Z} Y) * rho0(t) e^{beta Z(t)} Y(t)`.
pub fn conditional_frailty_intensity(
    h: &EventHistory,
    t: f64,
    b: &BaselineSpec,
    phi: f64,
    beta: f64,
    c: &CarryoverSpec,
) -> Result<f64> {
    if !(phi > 0.0) {
        return Err(Error::InvalidInput(format!(
            "frailty variance must be positive for the integrated intensity, got {phi}"
        )));
    }
    if !(0.0..=h.tau()).contains(&t) {
        return Err(Error::TimeOutOfRange { t, tau: h.tau() });
    }
    if !h.at_risk(t) {
        return Ok(0.0);
    }
    let z = f64::from(indicator_unchecked(h, t, c));
    let n_prior = h.events_before(t) as f64;
    let cum = integrated_intensity(h, b, beta, c, t);
    let ratio = (1.0 + phi * n_prior) / (1.0 + phi * cum);
    Ok(ratio * b.rate(t) * (beta * z).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h3() -> EventHistory {
        EventHistory::new("a", vec![1.0, 1.5, 3.0], 4.0)
    }

    #[test]
    fn indicator_examples() {
        let h = EventHistory::new("a", vec![1.0], 3.0);
        let c = CarryoverSpec::new(0.5);
        assert_eq!(carryover_indicator(&h, 1.2, &c).unwrap(), 1);
        assert_eq!(carryover_indicator(&h, 1.8, &c).unwrap(), 0);
        assert_eq!(carryover_indicator(&h, 0.5, &c).unwrap(), 0);
        assert_eq!(carryover_indicator(&h, 1.5, &c).unwrap(), 1);
        assert!(carryover_indicator(&h, 3.5, &c).is_err());
        assert!(carryover_indicator(&h, -0.1, &c).is_err());
    }

    #[test]
    fn indicator_threshold_two() {
        let h = EventHistory::new("a", vec![1.0, 2.0], 3.0);
        let c = CarryoverSpec::new(0.5).with_threshold(2);
        assert_eq!(carryover_indicator(&h, 1.2, &c).unwrap(), 0);
        assert_eq!(carryover_indicator(&h, 2.2, &c).unwrap(), 1);
        assert_eq!(observed_in_window(&EventHistory::new("a", vec![1.0, 1.1, 1.2], 2.0), &c), 1);
    }

    #[test]
    fn indicator_uses_at_risk_clock() {
        let h = EventHistory::new("a", vec![1.0], 3.0).with_resolutions(vec![1.4]);
        let c = CarryoverSpec::new(0.5);
        assert_eq!(carryover_indicator(&h, 1.2, &c).unwrap(), 0);
        assert_eq!(carryover_indicator(&h, 1.8, &c).unwrap(), 1);
        assert_eq!(carryover_indicator(&h, 1.95, &c).unwrap(), 0);
        assert!((carryover_exposure(&h, &c) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn exposure_examples() {
        let c = CarryoverSpec::new(1.0);
        assert!((carryover_exposure(&h3(), &c) - 2.5).abs() < 1e-15);
        assert_eq!(carryover_exposure(&EventHistory::new("a", vec![], 4.0), &c), 0.0);
        let h = EventHistory::new("a", vec![1.0], 1.2);
        assert!((carryover_exposure(&h, &c) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn r_integral_examples() {
        let c = CarryoverSpec::new(1.0);
        let one = BaselineSpec::constant(1.0);
        assert_eq!(r_integral(&h3(), &one, 0.0, &c).value, 4.0);
        let r = r_integral(&h3(), &one, 2f64.ln(), &c);
        assert!((r.value - 6.5).abs() < 1e-12);
        assert!((r.d_dbeta - 5.0).abs() < 1e-12);
        assert_eq!(r.d_dbeta, r.d2_dbeta2);
        let empty = EventHistory::new("a", vec![], 7.0);
        let g = BaselineSpec::constant(0.3);
        assert!((r_integral(&empty, &g, 1.7, &c).value - 2.1).abs() < 1e-12);
    }

    #[test]
    fn summary_consistent_with_indicator() {
        let c = CarryoverSpec::new(1.0);
        let s = exposure_summary(&h3(), &BaselineSpec::constant(2.0), &c);
        assert_eq!(s.obs_count, 1);
        assert!((s.total_window_time - 2.5).abs() < 1e-15);
        assert!((s.weighted_window_integral - 5.0).abs() < 1e-12);
        assert!((s.at_risk_baseline_integral - 8.0).abs() < 1e-12);
        let by_indicator = h3()
            .event_times()
            .iter()
            .filter(|&&t| carryover_indicator(&h3(), t, &c).unwrap() == 1)
            .count();
        assert_eq!(by_indicator, s.obs_count);
    }

    #[test]
    fn frailty_intensity_examples() {
        let one = BaselineSpec::constant(1.0);
        let c = CarryoverSpec::new(0.2);
        let h = EventHistory::new("a", vec![0.5], 2.0);
        let v = conditional_frailty_intensity(&h, 0.0, &one, 1.0, 0.0, &c).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        let v = conditional_frailty_intensity(&h, 0.5 + 1e-12, &one, 1.0, 0.0, &c).unwrap();
        assert!((v - 4.0 / 3.0).abs() < 1e-9);
        for t in [0.1, 0.6, 1.9] {
            let v = conditional_frailty_intensity(&h, t, &one, 1e-8, 0.7, &c).unwrap();
            let z = f64::from(carryover_indicator(&h, t, &c).unwrap());
            assert!((v - (0.7 * z).exp()).abs() < 1e-6);
        }
        assert!(conditional_frailty_intensity(&h, 0.3, &one, 0.0, 0.0, &c).is_err());
    }

    #[test]
    fn frailty_intensity_jumps_then_decays() {
        let one = BaselineSpec::constant(1.0);
        let c = CarryoverSpec::new(0.2);
        let h = EventHistory::new("a", vec![0.5, 1.1, 2.0], 3.0);
        let f = |t: f64| conditional_frailty_intensity(&h, t, &one, 0.8, 0.0, &c).unwrap();
        for &e in h.event_times() {
            assert!(f(e + 1e-9) > f(e - 1e-9));
        }
        let mut prev = f(0.0);
        for i in 1..50 {
            let t = 0.5 * i as f64 / 50.0;
            assert!(f(t) < prev);
            prev = f(t);
        }
    }
}
