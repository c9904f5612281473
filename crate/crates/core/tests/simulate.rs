use carryover::rng::{substream, Domain};
use carryover::simulate::{
    sample_conditional_event_times, sample_frailties, simulate_dataset, simulate_process, ProcessSpec, SamplerKind,
    SimConfig, TauRule,
};
use carryover::stats::{ks_one_sample, ks_two_sample, mean};
use carryover::{validate_dataset, BaselineSpec, CarryoverSpec, EventHistory, FrailtySpec};

fn rng(tag: u64) -> carryover::rng::StreamRng {
    substream(4242, Domain::Simulation, tag, 0)
}

fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

#[test]
fn frailty_moments() {
    let mut r = rng(1);
    assert_eq!(sample_frailties(&FrailtySpec::None, 3, &mut r).unwrap(), vec![1.0; 3]);
    let g = sample_frailties(&FrailtySpec::Gamma { phi: 0.3 }, 100_000, &mut r).unwrap();
    assert!((mean(&g) - 1.0).abs() < 0.02 && (variance(&g) - 0.3).abs() < 0.03);
    let l = sample_frailties(&FrailtySpec::LogNormal { phi: 0.6 }, 100_000, &mut r).unwrap();
    assert!((mean(&l) - 1.0).abs() < 0.03 && (variance(&l) - 0.6).abs() < 0.06, "{} {}", mean(&l), variance(&l));
    assert!(l.iter().chain(&g).all(|&a| a > 0.0));
    assert!(sample_frailties(&FrailtySpec::Gamma { phi: -0.1 }, 3, &mut r).is_err());
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

#[test]
fn poisson_mean_count() {
    let mut r = rng(2);
    let s = spec(0.0, 0.1, 10.0);
    let n: Vec<f64> = (0..10_000)
        .map(|i| simulate_process(format!("{i}"), 1.0, &s, &mut r).unwrap().n_events() as f64)
        .collect();
    assert!((mean(&n) - 10.0).abs() < 0.3);
}

/// Completed gaps after the first event.
fn later_gaps(h: &EventHistory) -> Vec<f64> {
    h.event_times().windows(2).map(|w| w[1] - w[0]).collect()
}

#[test]
fn window_gap_probability() {
    let mut r = rng(3);
    let s = spec(2f64.ln(), 0.1, 2000.0);
    let mut gaps = Vec::new();
    let mut i = 0;
    while gaps.len() < 10_000 {
        gaps.extend(later_gaps(&simulate_process(format!("{i}"), 1.0, &s, &mut r).unwrap()));
        i += 1;
    }
    let p = gaps.iter().filter(|&&w| w <= 0.1).count() as f64 / gaps.len() as f64;
    assert!((p - (1.0 - (-0.2f64).exp())).abs() < 0.01, "{p}");
}

#[test]
fn negative_effect_also_inverts() {
    let mut r = rng(4);
    let s = spec(-1.0, 0.5, 3000.0);
    let mut gaps = Vec::new();
    let mut i = 0;
    while gaps.len() < 10_000 {
        gaps.extend(later_gaps(&simulate_process(format!("{i}"), 1.0, &s, &mut r).unwrap()));
        i += 1;
    }
    // H(w) = e^beta min(w, delta) + max(0, w - delta)
    let cdf = |w: f64| 1.0 - (-((-1f64).exp() * w.min(0.5) + (w - 0.5).max(0.0))).exp();
    assert!(ks_one_sample(&gaps, cdf).p_value > 0.01);
}

#[test]
fn refractory_separates_events() {
    let mut r = rng(5);
    let mut s = spec(0.7, 0.3, 50.0);
    s.refractory = 0.5;
    for i in 0..200 {
        let h = simulate_process(format!("{i}"), 2.0, &s, &mut r).unwrap();
        assert!(h.event_times().windows(2).all(|w| w[1] - w[0] >= 0.5));
        assert!(h.validate().is_empty());
    }
}

#[test]
fn dataset_structure_and_determinism() {
    let cfg = SimConfig::new(100, TauRule::Fixed { tau: 10.0 }, BaselineSpec::constant(1.0), CarryoverSpec::new(0.1054))
        .with_frailty(FrailtySpec::Gamma { phi: 0.3 })
        .with_seed(17);
    let d = simulate_dataset(&cfg, 0).unwrap();
    assert_eq!(d.m(), 100);
    assert!(validate_dataset(&d).is_empty());
    assert_eq!(simulate_dataset(&cfg, 0).unwrap(), d);
    assert_ne!(simulate_dataset(&cfg, 1).unwrap(), d);
}

#[test]
fn identical_across_thread_counts() {
    let cfg = SimConfig::new(300, TauRule::Uniform { lo: 0.8, hi: 1.2 }, BaselineSpec::power_law(2.0, 0.7), CarryoverSpec::new(0.2))
        .with_frailty(FrailtySpec::LogNormal { phi: 0.4 })
        .with_beta(0.5)
        .with_seed(99);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| simulate_dataset(&cfg, 3).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn uniform_tau_mean_count() {
    let cfg = SimConfig::new(10_000, TauRule::Uniform { lo: 0.8, hi: 1.2 }, BaselineSpec::constant(1.0), CarryoverSpec::new(0.1))
        .with_seed(5);
    let d = simulate_dataset(&cfg, 0).unwrap();
    let m = d.total_events() as f64 / d.m() as f64;
    assert!((m - 1.0).abs() < 0.05, "{m}");
}

#[test]
fn conditional_event_times() {
    let mut r = rng(6);
    assert!(sample_conditional_event_times(0, &BaselineSpec::constant(1.0), 1.0, &mut r).is_empty());
    let u = sample_conditional_event_times(100_000, &BaselineSpec::constant(1.0), 1.0, &mut r);
    assert!(u.windows(2).all(|w| w[0] <= w[1]));
    assert!(ks_one_sample(&u, |t| t.clamp(0.0, 1.0)).statistic < 0.01);
    let p = sample_conditional_event_times(100_000, &BaselineSpec::power_law(7.3, 2.0), 1.0, &mut r);
    assert!(ks_one_sample(&p, |t| t.clamp(0.0, 1.0).powi(2)).statistic < 0.01);
}

#[test]
fn inversion_and_thinning_agree() {
    let mut gaps = [Vec::new(), Vec::new()];
    for (k, sampler) in [SamplerKind::Inversion, SamplerKind::Thinning].into_iter().enumerate() {
        let mut s = spec(0.9, 0.3, 400.0);
        s.sampler = sampler;
        let mut r = rng(10 + k as u64);
        let mut i = 0;
        while gaps[k].len() < 10_000 {
            gaps[k].extend(later_gaps(&simulate_process(format!("{i}"), 1.0, &s, &mut r).unwrap()));
            i += 1;
        }
    }
    let ks = ks_two_sample(&gaps[0], &gaps[1]);
    assert!(ks.p_value > 0.01, "{ks:?}");
}

#[test]
fn power_law_thinning_mean() {
    for (g1, g2) in [(1.5, 0.5), (0.3, 1.8)] {
        let mut s = spec(0.0, 0.1, 5.0);
        s.baseline = BaselineSpec::power_law(g1, g2);
        let mut r = rng(20);
        let n: Vec<f64> = (0..10_000)
            .map(|i| simulate_process(format!("{i}"), 1.0, &s, &mut r).unwrap().n_events() as f64)
            .collect();
        let target = g1 * 5f64.powf(g2);
        let se = (target / 10_000f64).sqrt();
        assert!((mean(&n) - target).abs() < 4.0 * se, "{} vs {target}", mean(&n));
    }
}

/// Anderson-Darling statistic for a fully specified continuous `cdf`.
fn anderson_darling(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len();
    let s: f64 = (0..n)
        .map(|i| {
            let a = cdf(x[i]).clamp(1e-300, 1.0);
            let b = (1.0 - cdf(x[n - 1 - i])).clamp(1e-300, 1.0);
            (2 * i + 1) as f64 * (a.ln() + b.ln())
        })
        .sum();
    -(n as f64) - s / n as f64
}

#[test]
fn null_gaps_are_exponential() {
    let gamma = 1.7;
    let mut s = spec(0.0, 0.2, 500.0);
    s.baseline = BaselineSpec::constant(gamma);
    let mut r = rng(30);
    let mut gaps = Vec::new();
    let mut i = 0;
    while gaps.len() < 10_000 {
        let h = simulate_process(format!("{i}"), 1.0, &s, &mut r).unwrap();
        if let Some(&first) = h.event_times().first() {
            gaps.push(first);
        }
        gaps.extend(later_gaps(&h));
        i += 1;
    }
    let a2 = anderson_darling(&gaps, |w| 1.0 - (-gamma * w).exp());
    // 1% critical value for a fully specified distribution
    assert!(a2 < 3.857, "A^2 = {a2}");
}
