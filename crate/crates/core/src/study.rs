//! Monte Carlo studies over a grid of scenarios.
//!
//! Each cell is simulated replicate by replicate on independent random
//! streams and reduced in replicate order, so reports do not depend on the
//! number of worker threads. Null cells that differ only in the analysis
//! window or the statistic share their simulated datasets.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, Domain};
use crate::score::{score_test_fixed, score_test_random};
use crate::semiparam::ag_score;
use crate::simulate::{simulate_dataset, SimConfig, TauRule};
use crate::stats::{empirical_quantile, exceedance, proportion_se};
use crate::types::{hex_prefix, BaselineFamily, BaselineSpec, CarryoverSpec, Dataset, FrailtySpec};

/// Normal critical values whose exceedance rates every cell reports.
pub const NORMAL_CRITICAL: [f64; 3] = [1.645, 1.960, 2.326];
/// Quantile levels reported for every cell.
pub const QUANTILE_LEVELS: [f64; 3] = [0.95, 0.975, 0.99];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Statistic {
    /// Fixed-effects score statistic.
    Fixed,
    /// Gamma random-effects score statistic.
    Random,
    /// Andersen–Gill partial-likelihood score statistic.
    Ag,
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Statistic::Fixed => "fixed",
            Statistic::Random => "random",
            Statistic::Ag => "ag",
        })
    }
}

impl FromStr for Statistic {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(Statistic::Fixed),
            "random" => Ok(Statistic::Random),
            "ag" => Ok(Statistic::Ag),
            _ => Err(Error::InvalidInput(format!("unknown statistic `{s}` (fixed, random, ag)"))),
        }
    }
}

/// Where power passes take their critical value from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CriticalValueSource {
    /// 1.645.
    Normal,
    /// Empirical 95% quantile of a null pass with `reps` replicates.
    Empirical { reps: usize },
}

impl fmt::Display for CriticalValueSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CriticalValueSource::Normal => f.write_str("normal"),
            CriticalValueSource::Empirical { reps } => write!(f, "empirical:{reps}"),
        }
    }
}

impl FromStr for CriticalValueSource {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.split(':').collect::<Vec<_>>().as_slice() {
            ["normal"] => Ok(Self::Normal),
            ["empirical", r] => Ok(Self::Empirical {
                reps: parse_num(r, "empirical replicate count")?,
            }),
            _ => Err(Error::InvalidInput(format!("unknown critical value source `{s}`"))),
        }
    }
}

fn parse_num<T: FromStr>(s: &str, what: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::InvalidInput(format!("{what}: cannot parse `{s}`")))
}

/// `fixed:10` or `uniform:0.8:1.2`.
pub fn parse_tau_rule(s: &str) -> Result<TauRule> {
    let r = match s.split(':').collect::<Vec<_>>().as_slice() {
        ["fixed", t] => TauRule::Fixed { tau: parse_num(t, "tau")? },
        ["uniform", lo, hi] => TauRule::Uniform {
            lo: parse_num(lo, "tau lower bound")?,
            hi: parse_num(hi, "tau upper bound")?,
        },
        _ => return Err(Error::InvalidInput(format!("tau rule `{s}`: expected fixed:T or uniform:LO:HI"))),
    };
    r.validate()?;
    Ok(r)
}

pub fn format_tau_rule(r: &TauRule) -> String {
    match r {
        TauRule::Fixed { tau } => format!("fixed:{tau}"),
        TauRule::Uniform { lo, hi } => format!("uniform:{lo}:{hi}"),
    }
}

/// `none`, `gamma:PHI` or `lognormal:PHI`.
pub fn parse_frailty(s: &str) -> Result<FrailtySpec> {
    let f = match s.split(':').collect::<Vec<_>>().as_slice() {
        ["none"] => FrailtySpec::None,
        ["gamma", p] => FrailtySpec::Gamma { phi: parse_num(p, "phi")? },
        ["lognormal", p] => FrailtySpec::LogNormal { phi: parse_num(p, "phi")? },
        _ => return Err(Error::InvalidInput(format!("frailty `{s}`: expected none, gamma:PHI or lognormal:PHI"))),
    };
    f.validate()?;
    Ok(f)
}

pub fn format_frailty(f: &FrailtySpec) -> String {
    match f {
        FrailtySpec::None => "none".into(),
        FrailtySpec::Gamma { phi } => format!("gamma:{phi}"),
        FrailtySpec::LogNormal { phi } => format!("lognormal:{phi}"),
    }
}

/// `constant:GAMMA` or `powerlaw:GAMMA1:GAMMA2`.
pub fn parse_baseline(s: &str) -> Result<BaselineSpec> {
    let b = match s.split(':').collect::<Vec<_>>().as_slice() {
        ["constant", g] => BaselineSpec::constant(parse_num(g, "gamma")?),
        ["powerlaw", g1, g2] => BaselineSpec::power_law(parse_num(g1, "gamma1")?, parse_num(g2, "gamma2")?),
        _ => {
            return Err(Error::InvalidInput(format!(
                "baseline `{s}`: expected constant:GAMMA or powerlaw:GAMMA1:GAMMA2"
            )))
        }
    };
    b.validate()?;
    Ok(b)
}

pub fn format_baseline(b: &BaselineSpec) -> String {
    match b {
        BaselineSpec::Constant { gamma } => format!("constant:{gamma}"),
        BaselineSpec::PowerLaw { gamma1, gamma2 } => format!("powerlaw:{gamma1}:{gamma2}"),
    }
}

/// Scenario grid and run settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub m: Vec<usize>,
    pub tau: Vec<TauRule>,
    /// Window assumed by the test.
    pub delta: Vec<f64>,
    /// True window as a multiple of `delta` (power passes only).
    pub delta0_ratio: Vec<f64>,
    /// Effect sizes; 1 means null only.
    pub exp_beta: Vec<f64>,
    pub frailty: Vec<FrailtySpec>,
    pub baseline: Vec<BaselineSpec>,
    pub threshold: Vec<u32>,
    pub refractory: Vec<f64>,
    pub replications: usize,
    pub statistic: Statistic,
    /// Baseline family the parametric statistics fit under the null.
    pub fit_family: BaselineFamily,
    pub critical: CriticalValueSource,
    /// Draw the subject frailties once per scenario and keep them fixed.
    pub fixed_alphas: bool,
    pub seed: u64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            m: vec![100],
            tau: vec![TauRule::Fixed { tau: 10.0 }],
            delta: vec![0.1054],
            delta0_ratio: vec![1.0],
            exp_beta: vec![1.0],
            frailty: vec![FrailtySpec::None],
            baseline: vec![BaselineSpec::constant(1.0)],
            threshold: vec![1],
            refractory: vec![0.0],
            replications: 1000,
            statistic: Statistic::Random,
            fit_family: BaselineFamily::Constant,
            critical: CriticalValueSource::Normal,
            fixed_alphas: false,
            seed: 0,
        }
    }
}

fn list<T>(v: &str, f: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    v.split(',').map(|s| f(s.trim())).collect()
}

impl StudyConfig {
    /// Parses flat `key = value` text. Grid axes take comma-separated lists;
    /// `#` starts a comment. Unset keys keep their defaults. `delta_c = c`
    /// sets `delta = -ln(1 - c) / gamma` for a constant baseline `gamma`.
    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut delta_c: Option<(Vec<f64>, usize)> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let perr = |message: String| Error::Parse {
                source_name: source_name.to_string(),
                line,
                message,
            };
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| perr(format!("expected `key = value`, got `{body}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let r: Result<()> = (|| {
                match key {
                    "m" => cfg.m = list(value, |s| parse_num(s, "m"))?,
                    "tau" => cfg.tau = list(value, parse_tau_rule)?,
                    "delta" => cfg.delta = list(value, |s| parse_num(s, "delta"))?,
                    "delta_c" => delta_c = Some((list(value, |s| parse_num(s, "delta_c"))?, line)),
                    "delta0_ratio" => cfg.delta0_ratio = list(value, |s| parse_num(s, "delta0_ratio"))?,
                    "exp_beta" => cfg.exp_beta = list(value, |s| parse_num(s, "exp_beta"))?,
                    "frailty" => cfg.frailty = list(value, parse_frailty)?,
                    "baseline" => cfg.baseline = list(value, parse_baseline)?,
                    "threshold" => cfg.threshold = list(value, |s| parse_num(s, "threshold"))?,
                    "refractory" => cfg.refractory = list(value, |s| parse_num(s, "refractory"))?,
                    "replications" | "reps" => cfg.replications = parse_num(value, "replications")?,
                    "statistic" => cfg.statistic = value.parse()?,
                    "fit_baseline" => {
                        cfg.fit_family = match value {
                            "constant" => BaselineFamily::Constant,
                            "powerlaw" => BaselineFamily::PowerLaw,
                            _ => return Err(Error::InvalidInput(format!("fit_baseline `{value}`"))),
                        }
                    }
                    "critical" => cfg.critical = value.parse()?,
                    "fixed_alphas" => cfg.fixed_alphas = parse_num(value, "fixed_alphas")?,
                    "seed" => cfg.seed = parse_num(value, "seed")?,
                    _ => return Err(Error::InvalidInput(format!("unknown key `{key}`"))),
                }
                Ok(())
            })();
            r.map_err(|e| match e {
                Error::InvalidInput(m) => perr(m),
                other => perr(other.to_string()),
            })?;
        }
        if let Some((cs, line)) = delta_c {
            let gamma = match cfg.baseline.as_slice() {
                [BaselineSpec::Constant { gamma }] => *gamma,
                _ => {
                    return Err(Error::Parse {
                        source_name: source_name.to_string(),
                        line,
                        message: "delta_c needs a single constant baseline".into(),
                    })
                }
            };
            cfg.delta = cs.iter().map(|&c| CarryoverSpec::delta_for_coverage(c, gamma)).collect();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidInput("replications must be >= 1".into()));
        }
        if let CriticalValueSource::Empirical { reps: 0 } = self.critical {
            return Err(Error::InvalidInput("empirical critical values need >= 1 null replicate".into()));
        }
        let axes = [
            ("m", self.m.len()),
            ("tau", self.tau.len()),
            ("delta", self.delta.len()),
            ("delta0_ratio", self.delta0_ratio.len()),
            ("exp_beta", self.exp_beta.len()),
            ("frailty", self.frailty.len()),
            ("baseline", self.baseline.len()),
            ("threshold", self.threshold.len()),
            ("refractory", self.refractory.len()),
        ];
        if let Some((name, _)) = axes.iter().find(|(_, n)| *n == 0) {
            return Err(Error::InvalidInput(format!("grid axis `{name}` is empty")));
        }
        if self.m.contains(&0) {
            return Err(Error::InvalidInput("m must be >= 1".into()));
        }
        for &d in &self.delta {
            CarryoverSpec::new(d).validate()?;
        }
        if self.delta0_ratio.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
            return Err(Error::InvalidInput("delta0_ratio must be positive".into()));
        }
        if self.exp_beta.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return Err(Error::InvalidInput("exp_beta must be positive".into()));
        }
        if self.threshold.contains(&0) {
            return Err(Error::InvalidInput("threshold must be >= 1".into()));
        }
        if self.refractory.iter().any(|&r| !(r >= 0.0 && r.is_finite())) {
            return Err(Error::InvalidInput("refractory must be >= 0".into()));
        }
        Ok(())
    }

    /// Short hash of the canonical JSON form.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex_prefix(&Sha256::digest(json.as_bytes()), 8)
    }

    /// Every cell of the grid: null cells first, then power cells.
    pub fn cells(&self) -> Vec<CellSpec> {
        let mut null = Vec::new();
        let mut power = Vec::new();
        for &m in &self.m {
            for tau in &self.tau {
                for frailty in &self.frailty {
                    for baseline in &self.baseline {
                        for &refractory in &self.refractory {
                            for &threshold in &self.threshold {
                                for &delta in &self.delta {
                                    let base = CellSpec {
                                        pass: Pass::Null,
                                        m,
                                        tau: *tau,
                                        delta,
                                        delta0: delta,
                                        exp_beta: 1.0,
                                        frailty: *frailty,
                                        baseline: *baseline,
                                        threshold,
                                        refractory,
                                        statistic: self.statistic,
                                        fit_family: self.fit_family,
                                        replications: match self.critical {
                                            CriticalValueSource::Empirical { reps } => reps,
                                            CriticalValueSource::Normal => self.replications,
                                        },
                                        fixed_alphas: self.fixed_alphas,
                                        seed: self.seed,
                                    };
                                    for &eb in self.exp_beta.iter().filter(|&&e| e != 1.0) {
                                        for &ratio in &self.delta0_ratio {
                                            power.push(CellSpec {
                                                pass: Pass::Power,
                                                delta0: delta * ratio,
                                                exp_beta: eb,
                                                replications: self.replications,
                                                ..base.clone()
                                            });
                                        }
                                    }
                                    null.push(base);
                                }
                            }
                        }
                    }
                }
            }
        }
        null.extend(power);
        null
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pass {
    Null,
    Power,
}

/// One fully specified cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    pub pass: Pass,
    pub m: usize,
    pub tau: TauRule,
    pub delta: f64,
    pub delta0: f64,
    pub exp_beta: f64,
    pub frailty: FrailtySpec,
    pub baseline: BaselineSpec,
    pub threshold: u32,
    pub refractory: f64,
    pub statistic: Statistic,
    pub fit_family: BaselineFamily,
    pub replications: usize,
    pub fixed_alphas: bool,
    pub seed: u64,
}

fn hash_u64(parts: &str) -> u64 {
    let d = Sha256::digest(parts.as_bytes());
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

impl CellSpec {
    /// Stable identifier over every field.
    pub fn id(&self) -> String {
        hex_prefix(&Sha256::digest(serde_json::to_string(self).unwrap().as_bytes()), 8)
    }

    /// Key of the null data-generating scenario.
    fn scenario_key(&self) -> String {
        format!(
            "{}|{}|{}|{}|{}|{}",
            self.m,
            format_tau_rule(&self.tau),
            format_frailty(&self.frailty),
            format_baseline(&self.baseline),
            self.refractory,
            self.fixed_alphas
        )
    }

    /// The null cell (with `null_reps` replicates) whose critical value a
    /// power cell uses.
    pub fn null_cell(&self, null_reps: usize) -> CellSpec {
        CellSpec {
            pass: Pass::Null,
            delta0: self.delta,
            exp_beta: 1.0,
            replications: null_reps,
            ..self.clone()
        }
    }

    /// Simulation config for this cell. Null cells sharing a scenario get the
    /// same seed, and so the same datasets.
    pub fn sim_config(&self) -> Result<SimConfig> {
        let scenario = derive_seed(self.seed, Domain::Study, hash_u64(&self.scenario_key()));
        let data_seed = match self.pass {
            Pass::Null => scenario,
            Pass::Power => derive_seed(
                scenario,
                Domain::Study,
                hash_u64(&format!("{}|{}|{}", self.exp_beta, self.delta0, self.threshold)),
            ),
        };
        let mut cfg = SimConfig::new(
            self.m,
            self.tau,
            self.baseline,
            CarryoverSpec::new(self.delta0).with_threshold(self.threshold),
        )
        .with_frailty(self.frailty)
        .with_beta(self.exp_beta.ln())
        .with_refractory(self.refractory)
        .with_seed(scenario);
        if self.fixed_alphas {
            cfg = cfg.with_alphas_drawn_once()?;
        }
        cfg.seed = data_seed;
        cfg.validate()?;
        Ok(cfg)
    }

    fn carryover(&self) -> CarryoverSpec {
        CarryoverSpec::new(self.delta).with_threshold(self.threshold)
    }
}

/// Standardized statistic of one dataset.
pub fn statistic_value(d: &Dataset, stat: Statistic, family: BaselineFamily, c: &CarryoverSpec) -> Result<f64> {
    Ok(match stat {
        Statistic::Fixed => score_test_fixed(d, family, c)?.statistic,
        Statistic::Random => score_test_random(d, family, c)?.statistic,
        Statistic::Ag => ag_score(d, c)?.1.statistic,
    })
}

/// Simulated statistics of a cell in replicate order; failed replicates are
/// `None`.
pub fn cell_statistics(cell: &CellSpec) -> Result<Vec<Option<f64>>> {
    let cfg = cell.sim_config()?;
    let c = cell.carryover();
    c.validate()?;
    Ok((0..cell.replications as u64)
        .into_par_iter()
        .map(|r| {
            let d = simulate_dataset(&cfg, r).ok()?;
            statistic_value(&d, cell.statistic, cell.fit_family, &c).ok()
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailRate {
    pub critical: f64,
    pub rate: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub id: String,
    pub spec: CellSpec,
    /// Replicates whose statistic could not be computed.
    pub failed: usize,
    /// `(p, Q_p)` at [`QUANTILE_LEVELS`].
    pub quantiles: Vec<(f64, f64)>,
    /// Exceedance of [`NORMAL_CRITICAL`].
    pub tails: Vec<TailRate>,
    /// Power passes only.
    pub critical_value: Option<f64>,
    pub rejection: Option<TailRate>,
    /// Wall-clock seconds; not serialized so reports stay reproducible.
    #[serde(skip)]
    pub runtime_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub id: String,
    pub spec: CellSpec,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub config_hash: String,
    pub seed: u64,
    pub cells: Vec<CellReport>,
    pub failures: Vec<CellFailure>,
}

fn tail(values: &[f64], critical: f64) -> TailRate {
    let rate = exceedance(values, critical);
    TailRate {
        critical,
        rate,
        se: proportion_se(rate, values.len()),
    }
}

/// Runs one cell. `critical` is used for the rejection rate of power cells.
pub fn run_cell(cell: &CellSpec, critical: Option<f64>) -> Result<CellReport> {
    let start = Instant::now();
    let stats = cell_statistics(cell)?;
    let ok: Vec<f64> = stats.iter().flatten().copied().collect();
    if ok.is_empty() {
        return Err(Error::Cell {
            cell: cell.id(),
            message: "every replicate failed".into(),
        });
    }
    let mut sorted = ok.clone();
    sorted.sort_by(f64::total_cmp);
    Ok(CellReport {
        id: cell.id(),
        spec: cell.clone(),
        failed: stats.len() - ok.len(),
        quantiles: QUANTILE_LEVELS.iter().map(|&p| (p, empirical_quantile(&sorted, p))).collect(),
        tails: NORMAL_CRITICAL.iter().map(|&z| tail(&ok, z)).collect(),
        critical_value: critical,
        rejection: critical.map(|q| tail(&ok, q)),
        runtime_secs: start.elapsed().as_secs_f64(),
    })
}

fn checkpoint_path(dir: &Path, cell: &CellSpec) -> std::path::PathBuf {
    dir.join(format!("cell-{}.json", cell.id()))
}

fn load_checkpoint(dir: Option<&Path>, cell: &CellSpec) -> Option<CellReport> {
    let text = std::fs::read_to_string(checkpoint_path(dir?, cell)).ok()?;
    let r: CellReport = serde_json::from_str(&text).ok()?;
    (r.spec == *cell).then_some(r)
}

/// Runs every cell of the grid. Completed cells are written to `checkpoint`
/// (when given) and reused on a rerun. A failing cell is recorded in
/// `failures` and the run continues.
pub fn run_mc_study(cfg: &StudyConfig, checkpoint: Option<&Path>) -> Result<StudyReport> {
    cfg.validate()?;
    if let Some(dir) = checkpoint {
        std::fs::create_dir_all(dir)?;
    }
    let mut report = StudyReport {
        config_hash: cfg.config_hash(),
        seed: cfg.seed,
        cells: Vec::new(),
        failures: Vec::new(),
    };
    for cell in cfg.cells() {
        let critical = match cell.pass {
            Pass::Null => Ok(None),
            Pass::Power => match cfg.critical {
                CriticalValueSource::Normal => Ok(Some(NORMAL_CRITICAL[0])),
                CriticalValueSource::Empirical { reps } => {
                    let id = cell.null_cell(reps).id();
                    report
                        .cells
                        .iter()
                        .find(|c| c.id == id)
                        .map(|c| Some(c.quantiles[0].1))
                        .ok_or_else(|| format!("null calibration cell {id} unavailable"))
                }
            },
        };
        let outcome = match critical {
            Err(message) => Err(message),
            Ok(crit) => match load_checkpoint(checkpoint, &cell) {
                Some(r) => Ok(r),
                None => run_cell(&cell, crit).map_err(|e| e.to_string()),
            },
        };
        match outcome {
            Ok(r) => {
                if let Some(dir) = checkpoint {
                    std::fs::write(checkpoint_path(dir, &cell), serde_json::to_string(&r).unwrap())?;
                }
                report.cells.push(r);
            }
            Err(message) => report.failures.push(CellFailure {
                id: cell.id(),
                spec: cell,
                message,
            }),
        }
    }
    Ok(report)
}

/// CSV column names of [`write_report_csv`].
pub const REPORT_COLUMNS: [&str; 27] = [
    "cell_id",
    "pass",
    "m",
    "tau",
    "delta",
    "delta0",
    "exp_beta",
    "frailty",
    "baseline",
    "threshold",
    "refractory",
    "statistic",
    "replications",
    "failed",
    "q95",
    "q975",
    "q99",
    "p_gt_1645",
    "se_1645",
    "p_gt_1960",
    "se_1960",
    "p_gt_2326",
    "se_2326",
    "critical_value",
    "rejection_rate",
    "rejection_se",
    "seed",
];

/// One row per cell; empty cells where a column does not apply.
pub fn write_report_csv<W: std::io::Write>(r: &StudyReport, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::Io(e.into());
    wtr.write_record(REPORT_COLUMNS).map_err(io)?;
    for c in &r.cells {
        let s = &c.spec;
        let mut row = vec![
            c.id.clone(),
            match s.pass {
                Pass::Null => "null".into(),
                Pass::Power => "power".into(),
            },
            s.m.to_string(),
            format_tau_rule(&s.tau),
            s.delta.to_string(),
            s.delta0.to_string(),
            s.exp_beta.to_string(),
            format_frailty(&s.frailty),
            format_baseline(&s.baseline),
            s.threshold.to_string(),
            s.refractory.to_string(),
            s.statistic.to_string(),
            s.replications.to_string(),
            c.failed.to_string(),
        ];
        row.extend(c.quantiles.iter().map(|q| q.1.to_string()));
        for t in &c.tails {
            row.push(t.rate.to_string());
            row.push(t.se.to_string());
        }
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        row.push(opt(c.critical_value));
        row.push(opt(c.rejection.as_ref().map(|t| t.rate)));
        row.push(opt(c.rejection.as_ref().map(|t| t.se)));
        row.push(s.seed.to_string());
        wtr.write_record(&row).map_err(io)?;
    }
    wtr.flush()?;
    Ok(())
}
