//! Shared oracles for the integration tests: quadrature, extrapolated finite
//! differences, a direct transcription of the intensity model and random
//! dataset generators.
#![allow(dead_code)]

use carryover::{BaselineSpec, CarryoverSpec, Dataset, EventHistory};
use rand::Rng;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let x = h * XGK[i];
        let s = f(c - x) + f(c + x);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Globally adaptive: repeatedly bisects the piece with the largest error
/// estimate until the summed estimate is below `rel_tol * |I|` or only
/// rounding-level error is left.
fn adapt(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    let mut pieces = vec![(a, b, gk15(f, a, b))];
    for _ in 0..5000 {
        let total: f64 = pieces.iter().map(|p| p.2 .0).sum();
        let err: f64 = pieces.iter().map(|p| p.2 .1).sum();
        if err <= rel_tol * total.abs() {
            break;
        }
        let (k, _) = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2 .1.total_cmp(&y.1 .2 .1))
            .unwrap();
        let (lo, hi, (v, e)) = pieces[k];
        if e <= 1e-17 * v.abs() || hi - lo <= 1e-14 * hi.abs() {
            break;
        }
        let c = 0.5 * (lo + hi);
        pieces[k] = (lo, c, gk15(f, lo, c));
        pieces.push((c, hi, gk15(f, c, hi)));
    }
    // sum small pieces first
    let mut v: Vec<f64> = pieces.iter().map(|p| p.2 .0).collect();
    v.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
    v.iter().sum()
}

/// Adaptive Gauss–Kronrod (7/15) integral of `f` over `[a, b]`, split at
/// `breaks`, to relative accuracy `tol` per piece. Pieces starting at 0 use
/// `t = a + (b - a) s^2`, which removes `t^(-1/2)`-type endpoint
/// singularities.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, breaks: &[f64], tol: f64) -> f64 {
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    pts.push(a);
    pts.push(b);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut total = 0.0;
    for w in pts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if lo == 0.0 {
            let g = |s: f64| f(lo + (hi - lo) * s * s) * 2.0 * s * (hi - lo);
            total += adapt(&g, 0.0, 1.0, tol);
        } else {
            total += adapt(&f, lo, hi, tol);
        }
    }
    total
}

/// First derivative by central differences with two Richardson steps.
pub fn d1(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    let d = |h: f64| (f(x + h) - f(x - h)) / (2.0 * h);
    let (a, b, c) = (d(h), d(h / 2.0), d(h / 4.0));
    let r1 = (4.0 * b - a) / 3.0;
    let r2 = (4.0 * c - b) / 3.0;
    (16.0 * r2 - r1) / 15.0
}

/// Second derivative by central differences with two Richardson steps.
pub fn d2(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    let f0 = f(x);
    let d = |h: f64| (f(x + h) - 2.0 * f0 + f(x - h)) / (h * h);
    let (a, b, c) = (d(h), d(h / 2.0), d(h / 4.0));
    let r1 = (4.0 * b - a) / 3.0;
    let r2 = (4.0 * c - b) / 3.0;
    (16.0 * r2 - r1) / 15.0
}

/// Mixed partial `d^2 f / dx dy` with two Richardson steps.
pub fn d_mixed(f: impl Fn(f64, f64) -> f64, x: f64, y: f64, hx: f64, hy: f64) -> f64 {
    let d = |s: f64| {
        let (a, b) = (hx * s, hy * s);
        (f(x + a, y + b) - f(x + a, y - b) - f(x - a, y + b) + f(x - a, y - b)) / (4.0 * a * b)
    };
    let (a, b, c) = (d(1.0), d(0.5), d(0.25));
    let r1 = (4.0 * b - a) / 3.0;
    let r2 = (4.0 * c - b) / 3.0;
    (16.0 * r2 - r1) / 15.0
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Direct transcription of the model quantities, independent of the crate's
/// segment bookkeeping.
pub mod reference {
    use super::*;

    pub fn rate(b: &BaselineSpec, t: f64) -> f64 {
        match *b {
            BaselineSpec::Constant { gamma } => gamma,
            BaselineSpec::PowerLaw { gamma1, gamma2 } => gamma1 * gamma2 * t.powf(gamma2 - 1.0),
        }
    }

    /// `(N(t-), Y(t), B(t))`.
    pub fn state(h: &EventHistory, t: f64) -> (usize, bool, f64) {
        let ev = h.event_times();
        let k = ev.iter().filter(|&&e| e < t).count();
        if k == 0 {
            return (0, t <= h.tau(), t);
        }
        let resume = h.resolution_times().map_or(ev[k - 1], |r| r[k - 1]);
        (k, t > resume && t <= h.tau(), t - resume)
    }

    pub fn z(h: &EventHistory, t: f64, c: &CarryoverSpec) -> f64 {
        let (k, y, b) = state(h, t);
        if y && k >= c.prior_event_threshold as usize && b <= c.delta {
            1.0
        } else {
            0.0
        }
    }

    pub fn y(h: &EventHistory, t: f64) -> f64 {
        if state(h, t).1 {
            1.0
        } else {
            0.0
        }
    }

    /// Points where `Y` or `Z` can jump.
    pub fn breakpoints(h: &EventHistory, c: &CarryoverSpec) -> Vec<f64> {
        let mut v: Vec<f64> = h.event_times().to_vec();
        let resumes: Vec<f64> = h.resolution_times().map_or(h.event_times().to_vec(), |r| r.to_vec());
        for r in resumes {
            v.push(r);
            v.push(r + c.delta);
        }
        v
    }

    /// `int_0^tau Y rho0 exp(beta Z) dt` by quadrature.
    pub fn r_quadrature(h: &EventHistory, b: &BaselineSpec, beta: f64, c: &CarryoverSpec) -> f64 {
        integrate(
            |t| y(h, t) * rate(b, t) * (beta * z(h, t, c)).exp(),
            0.0,
            h.tau(),
            &breakpoints(h, c),
            1e-13,
        )
    }

    /// Fixed-effects `(Obs, Exp)` for the constant baseline without
    /// resolution times and threshold 1: Obs counts gaps `w_j <= delta`,
    /// `j >= 2`, and Exp is `sum_i (n_i / tau_i) sum_{j=2}^{n_i+1} min(w_ij, delta)`.
    pub fn obs_exp_fixed(d: &Dataset, delta: f64) -> (f64, f64) {
        let (mut obs, mut exp) = (0.0, 0.0);
        for h in d.subjects() {
            let t = h.event_times();
            let n = t.len();
            if n == 0 {
                continue;
            }
            let mut s = 0.0;
            for j in 1..=n {
                let next = if j < n { t[j] } else { h.tau() };
                let w = next - t[j - 1];
                if j < n && w <= delta {
                    obs += 1.0;
                }
                s += w.min(delta);
            }
            exp += n as f64 / h.tau() * s;
        }
        (obs, exp)
    }
}

/// Random history on `(0, tau]` with up to `max_n` events and, optionally,
/// resolution times.
pub fn random_history<R: Rng>(rng: &mut R, id: usize, max_n: usize, with_res: bool) -> EventHistory {
    let tau = rng.random_range(0.5..10.0);
    let n = rng.random_range(0..=max_n);
    let mut t: Vec<f64> = (0..n).map(|_| rng.random_range(1e-3..tau)).collect();
    t.sort_by(f64::total_cmp);
    t.dedup();
    let h = EventHistory::new(format!("s{id}"), t.clone(), tau);
    if !with_res || t.is_empty() {
        return h;
    }
    let res: Vec<f64> = (0..t.len())
        .map(|j| {
            let limit = if j + 1 < t.len() { t[j + 1] } else { tau };
            t[j] + rng.random_range(0.0..0.9) * (limit - t[j])
        })
        .collect();
    h.with_resolutions(res)
}

pub fn random_dataset<R: Rng>(rng: &mut R, max_m: usize, max_n: usize, with_res: bool) -> Dataset {
    let m = rng.random_range(1..=max_m);
    Dataset::new((0..m).map(|i| random_history(rng, i, max_n, with_res)).collect())
}

pub fn random_baseline<R: Rng>(rng: &mut R) -> BaselineSpec {
    if rng.random_bool(0.5) {
        BaselineSpec::constant(rng.random_range(0.2..3.0))
    } else {
        BaselineSpec::power_law(rng.random_range(0.2..3.0), rng.random_range(0.5..2.0))
    }
}

/// Proptest strategies over histories, datasets and baselines.
pub mod strategies {
    use super::*;
    use proptest::prelude::*;

    fn build(id: usize, tau: f64, fracs: Vec<f64>, res: Option<Vec<f64>>) -> EventHistory {
        let mut t: Vec<f64> = fracs.iter().map(|f| f * tau).collect();
        t.sort_by(f64::total_cmp);
        t.dedup();
        let h = EventHistory::new(format!("s{id}"), t.clone(), tau);
        match res {
            Some(r) if !t.is_empty() => {
                let res = (0..t.len())
                    .map(|j| {
                        let limit = if j + 1 < t.len() { t[j + 1] } else { tau };
                        t[j] + r[j] * (limit - t[j])
                    })
                    .collect();
                h.with_resolutions(res)
            }
            _ => h,
        }
    }

    /// History with up to `max_n` events; resolution times on about half.
    pub fn history(max_n: usize) -> impl Strategy<Value = EventHistory> {
        (
            0.5..10.0f64,
            prop::collection::vec(1e-4..=1.0f64, 0..=max_n),
            prop::option::of(prop::collection::vec(0.0..0.9f64, max_n)),
        )
            .prop_map(|(tau, fracs, res)| build(0, tau, fracs, res))
    }

    /// History without resolution times.
    pub fn plain_history(max_n: usize) -> impl Strategy<Value = EventHistory> {
        (0.5..10.0f64, prop::collection::vec(1e-4..=1.0f64, 0..=max_n))
            .prop_map(|(tau, fracs)| build(0, tau, fracs, None))
    }

    pub fn dataset(max_m: usize, max_n: usize, with_res: bool) -> impl Strategy<Value = Dataset> {
        let subject = (
            0.5..10.0f64,
            prop::collection::vec(1e-4..=1.0f64, 0..=max_n),
            prop::option::weighted(if with_res { 0.5 } else { 0.0 }, prop::collection::vec(0.0..0.9f64, max_n)),
        );
        prop::collection::vec(subject, 1..=max_m).prop_map(|subjects| {
            Dataset::new(
                subjects
                    .into_iter()
                    .enumerate()
                    .map(|(i, (tau, fracs, res))| build(i, tau, fracs, res))
                    .collect(),
            )
        })
    }

    pub fn baseline() -> impl Strategy<Value = BaselineSpec> {
        prop_oneof![
            (0.2..3.0f64).prop_map(BaselineSpec::constant),
            (0.2..3.0f64, 0.5..2.0f64).prop_map(|(a, b)| BaselineSpec::power_law(a, b)),
        ]
    }
}
