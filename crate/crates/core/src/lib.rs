//! Recurrent event processes with a transient carryover effect.
//!
//! An event raises (or lowers) the intensity by a factor `exp(beta)` for a
//! window of length `delta` after the subject is next at risk:
//!
//! ```text
//! lambda_i(t) = Y_i(t) alpha_i rho0(t) exp(beta Z_i(t)),
//! Z_i(t) = I(N_i(t-) >= k) I(B_i(t) <= delta)
//! ```
//!
//! The crate simulates such processes, fits fixed-effects and gamma
//! random-effects likelihoods, computes score, Wald and likelihood-ratio
//! tests of `beta = 0` with normal or bootstrap p-values, runs the
//! semiparametric Andersen–Gill analogues, and drives Monte Carlo
//! calibration studies.
//!
//! ```
//! use carryover::{CarryoverSpec, EventHistory, BaselineSpec, exposure};
//!
//! let h = EventHistory::new("s1", vec![1.0, 1.5, 3.0], 4.0);
//! let c = CarryoverSpec::new(1.0);
//! assert_eq!(exposure::carryover_exposure(&h, &c), 2.5);
//! let r = exposure::r_integral(&h, &BaselineSpec::constant(1.0), 2f64.ln(), &c);
//! assert!((r.value - 6.5).abs() < 1e-12);
//! ```

// `!(x > 0.0)` is used on purpose so NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod estimate;
pub mod exposure;
pub mod io;
pub mod optim;
pub mod rng;
pub mod score;
pub mod semiparam;
pub mod simulate;
pub mod stats;
pub mod study;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    aic, baseline_cumulative, validate_dataset, Alternative, BaselineFamily, BaselineSpec,
    CarryoverSpec, Dataset, EventHistory, FitResult, FrailtySpec, ModelKind, PSource, Rule,
    TestResult, Violation,
};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    struct Intro;
    #[doc = include_str!("../../../book/src/histories.md")]
    struct Histories;
    #[doc = include_str!("../../../book/src/simulation.md")]
    struct Simulation;
    #[doc = include_str!("../../../book/src/fitting.md")]
    struct Fitting;
    #[doc = include_str!("../../../book/src/score-tests.md")]
    struct ScoreTests;
    #[doc = include_str!("../../../book/src/semiparametric.md")]
    struct Semiparametric;
    #[doc = include_str!("../../../book/src/diagnostics.md")]
    struct Diagnostics;
    #[doc = include_str!("../../../book/src/studies.md")]
    struct Studies;
}
