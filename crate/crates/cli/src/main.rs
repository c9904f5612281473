//! `carryover` command-line front end.
//!
//! Every command prints one JSON document on stdout. Failures print
//! `{"command", "error": {"kind", "message"}}` and exit with status 1
//! (status 2 for flag errors).

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use carryover::diagnostics::{self, OBS_EXP_COLUMNS};
use carryover::estimate::{self, FitOptions};
use carryover::score::{self, PValueSource, ScoreTestOptions};
use carryover::semiparam::{self, FrailtyBootstrapOptions};
use carryover::simulate::{self, SimConfig};
use carryover::study::{self, StudyConfig};
use carryover::{io as csvio, Alternative, BaselineFamily, CarryoverSpec, Dataset, Error, ModelKind, TestResult};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

#[derive(Parser)]
#[command(name = "carryover", version, about = "Recurrent events with a transient carryover effect")]
struct Cli {
    /// Worker threads for bootstrap and Monte Carlo loops (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a dataset and write events.csv / subjects.csv.
    Simulate(SimulateArgs),
    /// Fit a model at one window length or over a grid.
    Fit(FitArgs),
    /// Test for no carryover effect.
    Test(TestArgs),
    /// Run a Monte Carlo calibration/power study from a config file.
    McStudy(StudyArgs),
    /// Nelson-Aalen mean function and gap-time hazards.
    Diagnose(DiagnoseArgs),
    /// Obs/Exp table over a grid of window lengths.
    ObsExp(ObsExpArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Model {
    Fixed,
    Random,
    Poisson,
    Ag,
    AgFrailty,
}

impl Model {
    fn kind(self) -> ModelKind {
        match self {
            Model::Fixed => ModelKind::Fixed,
            Model::Random => ModelKind::Random,
            Model::Poisson => ModelKind::Poisson,
            Model::Ag => ModelKind::AndersenGill,
            Model::AgFrailty => ModelKind::AndersenGillFrailty,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Family {
    Constant,
    Powerlaw,
}

impl From<Family> for BaselineFamily {
    fn from(f: Family) -> Self {
        match f {
            Family::Constant => BaselineFamily::Constant,
            Family::Powerlaw => BaselineFamily::PowerLaw,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum PSourceArg {
    Auto,
    Normal,
    Bootstrap,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum TestKind {
    Score,
    Wald,
    Lr,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum AltArg {
    Greater,
    TwoSided,
}

impl From<AltArg> for Alternative {
    fn from(a: AltArg) -> Self {
        match a {
            AltArg::Greater => Alternative::Greater,
            AltArg::TwoSided => Alternative::TwoSided,
        }
    }
}

#[derive(Args, Clone, Serialize)]
struct DataArgs {
    /// Events CSV (`subject_id,event_time[,resolution_time]`).
    #[arg(long)]
    #[serde(skip)]
    events: Option<PathBuf>,
    /// Subjects CSV (`subject_id,tau[,covariates...]`).
    #[arg(long)]
    #[serde(skip)]
    subjects: PathBuf,
}

impl DataArgs {
    fn load(&self) -> Result<Dataset, Error> {
        csvio::ingest_csv(self.events.as_deref(), &self.subjects)
    }
}

#[derive(Args, Serialize)]
struct SimulateArgs {
    #[arg(long, default_value_t = 100)]
    m: usize,
    /// `fixed:T` or `uniform:LO:HI`.
    #[arg(long, default_value = "fixed:10")]
    tau: String,
    /// `constant:G` or `powerlaw:G1:G2`.
    #[arg(long, default_value = "constant:1")]
    baseline: String,
    /// `none`, `gamma:PHI` or `lognormal:PHI`.
    #[arg(long, default_value = "none")]
    frailty: String,
    /// Log carryover effect.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    beta: f64,
    /// Window of the generating process.
    #[arg(long, default_value_t = 0.1054)]
    delta: f64,
    #[arg(long, default_value_t = 1)]
    threshold: u32,
    #[arg(long, default_value_t = 0.0)]
    refractory: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Replicate index within the seed's stream.
    #[arg(long, default_value_t = 0)]
    replicate: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value = "random")]
    model: Model,
    #[arg(long, value_enum, default_value = "constant")]
    baseline: Family,
    #[arg(long, conflicts_with = "delta_grid")]
    delta: Option<f64>,
    /// Comma-separated window lengths; one fit per value.
    #[arg(long, value_delimiter = ',')]
    delta_grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1)]
    threshold: u32,
    /// Hold beta at 0.
    #[arg(long)]
    null: bool,
    /// Subject covariates for the Andersen-Gill model.
    #[arg(long, value_delimiter = ',')]
    covariates: Vec<String>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args, Serialize)]
struct TestArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value = "random")]
    model: Model,
    #[arg(long, value_enum, default_value = "constant")]
    baseline: Family,
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = 1)]
    threshold: u32,
    /// Non-at-risk period after each event in bootstrap replicates.
    #[arg(long, default_value_t = 0.0)]
    refractory: f64,
    #[arg(long = "test", value_enum, default_value = "score")]
    kind: TestKind,
    #[arg(long, value_enum, default_value = "auto")]
    p_source: PSourceArg,
    /// Bootstrap replicates.
    #[arg(long = "B", default_value_t = 999)]
    b: usize,
    #[arg(long, value_enum, default_value = "greater")]
    alternative: AltArg,
    /// Frailty variance for `ag-frailty` (default: parametric null estimate).
    #[arg(long)]
    phi: Option<f64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args, Serialize)]
struct StudyArgs {
    #[arg(long)]
    config: PathBuf,
    /// Override `replications`.
    #[arg(long)]
    reps: Option<usize>,
    /// Override `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Write the report table here as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Completed cells are saved here and reused on a rerun.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct DiagnoseArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Bin edges for gap hazards, starting at 0.
    #[arg(long, value_delimiter = ',')]
    edges: Option<Vec<f64>>,
    /// Also tabulate gap hazards separately by gap index.
    #[arg(long)]
    by_index: bool,
}

#[derive(Args, Serialize)]
struct ObsExpArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value = "random")]
    model: Model,
    #[arg(long, value_enum, default_value = "constant")]
    baseline: Family,
    #[arg(long, value_delimiter = ',', required = true)]
    delta_grid: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    threshold: u32,
    /// Write the table here as CSV.
    #[arg(long)]
    #[serde(skip)]
    csv: Option<PathBuf>,
}

/// Common result document. Fields that do not apply are null.
#[derive(Serialize, Default)]
struct Output {
    command: &'static str,
    config_hash: String,
    seed: Option<u64>,
    params: Option<BTreeMap<String, f64>>,
    std_errors: Option<BTreeMap<String, f64>>,
    loglik: Option<f64>,
    aic: Option<f64>,
    statistic: Option<f64>,
    obs: Option<f64>,
    exp: Option<f64>,
    p_value: Option<f64>,
    p_source: Option<String>,
    #[serde(skip_serializing_if = "Value::is_null")]
    details: Value,
}

fn config_hash<T: Serialize>(command: &str, args: &T, dataset: Option<&Dataset>) -> String {
    let canonical = json!({
        "command": command,
        "args": args,
        "dataset": dataset.map(Dataset::content_hash),
    });
    let digest = Sha256::digest(canonical.to_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn fill_test(out: &mut Output, t: &TestResult) {
    out.statistic = Some(t.statistic);
    out.obs = Some(t.obs);
    out.exp = Some(t.exp);
    out.p_value = Some(t.p_value);
    out.p_source = Some(t.p_source.to_string());
}

fn fit_json(f: &carryover::FitResult, full: bool) -> Value {
    let mut v = json!({
        "model": f.model.to_string(),
        "delta": f.delta,
        "converged": f.converged,
        "boundary": f.boundary,
        "n_evaluations": f.n_evaluations,
        "fixed_effect_alphas": f.fixed_effect_alphas,
        "notes": f.notes,
    });
    if full {
        v["params"] = json!(f.params);
        v["std_errors"] = json!(f.std_errors);
        v["loglik"] = json!(f.loglik);
        v["aic"] = json!(f.aic);
    }
    v
}

fn carryover_spec(delta: f64, threshold: u32) -> Result<CarryoverSpec, Error> {
    let c = CarryoverSpec::new(delta).with_threshold(threshold);
    c.validate()?;
    Ok(c)
}

fn simulate(a: &SimulateArgs) -> Result<Output, Error> {
    let cfg = SimConfig::new(
        a.m,
        study::parse_tau_rule(&a.tau)?,
        study::parse_baseline(&a.baseline)?,
        carryover_spec(a.delta, a.threshold)?,
    )
    .with_frailty(study::parse_frailty(&a.frailty)?)
    .with_beta(a.beta)
    .with_refractory(a.refractory)
    .with_seed(a.seed);
    cfg.validate()?;
    let d = simulate::simulate_dataset(&cfg, a.replicate)?;
    csvio::write_dataset_dir(&d, &a.out)?;
    Ok(Output {
        command: "simulate",
        config_hash: config_hash("simulate", &(&cfg, a.replicate), None),
        seed: Some(a.seed),
        details: json!({
            "m": d.m(),
            "total_events": d.total_events(),
            "dataset_hash": d.content_hash(),
            "events": a.out.join("events.csv"),
            "subjects": a.out.join("subjects.csv"),
        }),
        ..Default::default()
    })
}

fn fit(a: &FitArgs) -> Result<Output, Error> {
    let d = a.data.load()?;
    let family = BaselineFamily::from(a.baseline);
    let mut out = Output {
        command: "fit",
        config_hash: config_hash("fit", a, Some(&d)),
        seed: Some(a.seed),
        ..Default::default()
    };
    let single = |f: &carryover::FitResult, out: &mut Output| {
        out.params = Some(f.params.clone());
        out.std_errors = Some(f.std_errors.clone());
        out.loglik = Some(f.loglik);
        out.aic = Some(f.aic);
        out.details = fit_json(f, false);
    };
    if let Some(grid) = &a.delta_grid {
        let mut fits = Vec::with_capacity(grid.len());
        let mut sorted = grid.clone();
        sorted.sort_by(f64::total_cmp);
        for &delta in &sorted {
            let c = carryover_spec(delta, a.threshold)?;
            fits.push(fit_one(&d, a, family, Some(&c))?);
        }
        let best = |key: &dyn Fn(&carryover::FitResult) -> f64| {
            fits.iter().max_by(|x, y| key(x).total_cmp(&key(y))).and_then(|f| f.delta)
        };
        out.details = json!({
            "fits": fits.iter().map(|f| fit_json(f, true)).collect::<Vec<_>>(),
            "best_delta_by_loglik": best(&|f| f.loglik),
            "best_delta_by_aic": best(&|f| -f.aic),
        });
        return Ok(out);
    }
    let c = a.delta.map(|delta| carryover_spec(delta, a.threshold)).transpose()?;
    let f = fit_one(&d, a, family, c.as_ref())?;
    single(&f, &mut out);
    Ok(out)
}

fn fit_one(
    d: &Dataset,
    a: &FitArgs,
    family: BaselineFamily,
    c: Option<&CarryoverSpec>,
) -> Result<carryover::FitResult, Error> {
    let need = || c.ok_or_else(|| Error::InvalidInput(format!("model {} needs --delta", a.model.kind())));
    let opts = if a.null { FitOptions::null() } else { FitOptions::default() };
    match a.model {
        Model::Ag => {
            let carry = if a.null { None } else { c };
            semiparam::fit_ag(d, &a.covariates, carry)
        }
        Model::AgFrailty => semiparam::fit_ag_frailty(d, need()?),
        m => estimate::fit_with(d, family, need()?, m.kind(), opts),
    }
}

fn test(a: &TestArgs) -> Result<Output, Error> {
    let d = a.data.load()?;
    let family = BaselineFamily::from(a.baseline);
    let c = carryover_spec(a.delta, a.threshold)?;
    let alternative = Alternative::from(a.alternative);
    let mut out = Output {
        command: "test",
        config_hash: config_hash("test", a, Some(&d)),
        seed: Some(a.seed),
        ..Default::default()
    };
    let t = match (a.kind, a.model) {
        (TestKind::Score, Model::Fixed | Model::Random) => {
            let opts = ScoreTestOptions {
                p_source: match a.p_source {
                    PSourceArg::Auto => PValueSource::Auto,
                    PSourceArg::Normal => PValueSource::Normal,
                    PSourceArg::Bootstrap => PValueSource::Bootstrap,
                },
                replicates: a.b,
                seed: a.seed,
                alternative,
                refractory: a.refractory,
            };
            score::score_test(&d, family, &c, a.model.kind(), &opts)?
        }
        (TestKind::Score, Model::Ag) => {
            if a.p_source == PSourceArg::Bootstrap {
                return Err(Error::InvalidInput("the Andersen-Gill score test uses the normal reference".into()));
            }
            let (_, t) = semiparam::ag_score(&d, &c)?;
            score::with_alternative(t, alternative)
        }
        (TestKind::Score, Model::AgFrailty) => {
            if a.p_source == PSourceArg::Normal {
                return Err(Error::InvalidInput("the frailty Andersen-Gill score test is bootstrap only".into()));
            }
            let opts = FrailtyBootstrapOptions {
                phi: a.phi,
                replicates: a.b,
                seed: a.seed,
                refractory: a.refractory,
                alternative,
            };
            semiparam::ag_frailty_score_test(&d, &c, &opts)?
        }
        (TestKind::Wald | TestKind::Lr, m) => {
            let full = fit_for_test(&d, m, family, &c, false)?;
            let t = if a.kind == TestKind::Wald {
                score::wald_test(&full)?
            } else {
                let null = fit_for_test(&d, m, family, &c, true)?;
                score::lr_test(&null, &full)?
            };
            out.params = Some(full.params.clone());
            out.std_errors = Some(full.std_errors.clone());
            out.loglik = Some(full.loglik);
            out.aic = Some(full.aic);
            t
        }
        (TestKind::Score, Model::Poisson) => {
            return Err(Error::InvalidInput("no score test for the poisson model; use fixed or random".into()))
        }
    };
    fill_test(&mut out, &t);
    out.details = json!({
        "test": a.kind,
        "model": a.model.kind().to_string(),
        "delta": a.delta,
        "variance": t.variance,
        "alternative": t.alternative,
        "dataset_hash": t.dataset_hash,
        "notes": t.notes,
    });
    Ok(out)
}

fn fit_for_test(
    d: &Dataset,
    m: Model,
    family: BaselineFamily,
    c: &CarryoverSpec,
    null: bool,
) -> Result<carryover::FitResult, Error> {
    match m {
        Model::Ag => semiparam::fit_ag(d, &[], if null { None } else { Some(c) }),
        Model::AgFrailty => {
            if null {
                Err(Error::InvalidInput("likelihood-ratio test is not available for ag-frailty".into()))
            } else {
                semiparam::fit_ag_frailty(d, c)
            }
        }
        m => estimate::fit_with(d, family, c, m.kind(), if null { FitOptions::null() } else { FitOptions::default() }),
    }
}

fn mc_study(a: &StudyArgs) -> Result<Output, Error> {
    let mut cfg = StudyConfig::load(&a.config)?;
    if let Some(r) = a.reps {
        cfg.replications = r;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let report = study::run_mc_study(&cfg, a.checkpoint.as_deref())?;
    if let Some(path) = &a.csv {
        study::write_report_csv(&report, File::create(path)?)?;
    }
    Ok(Output {
        command: "mc-study",
        config_hash: report.config_hash.clone(),
        seed: Some(report.seed),
        details: serde_json::to_value(&report).map_err(|e| Error::NonFinite(e.to_string()))?,
        ..Default::default()
    })
}

fn diagnose(a: &DiagnoseArgs) -> Result<Output, Error> {
    let d = a.data.load()?;
    let mean = diagnostics::nelson_aalen_mean(&d)?;
    let gaps = diagnostics::extract_gaps(&d);
    let mut details = json!({
        "mean_function": mean,
        "n_gaps": gaps.len(),
        "n_censored_gaps": gaps.iter().filter(|g| g.censored).count(),
    });
    if let Some(edges) = &a.edges {
        let pairs: Vec<(f64, bool)> = gaps.iter().map(|g| (g.duration, g.censored)).collect();
        details["gap_hazard"] = json!(diagnostics::gap_hazard_piecewise(&pairs, edges)?);
        if a.by_index {
            details["gap_hazard_by_index"] = json!(diagnostics::gap_hazard_by_index(&gaps, edges)?);
        }
    } else if a.by_index {
        return Err(Error::InvalidInput("--by-index needs --edges".into()));
    }
    Ok(Output {
        command: "diagnose",
        config_hash: config_hash("diagnose", a, Some(&d)),
        details,
        ..Default::default()
    })
}

fn obs_exp(a: &ObsExpArgs) -> Result<Output, Error> {
    let d = a.data.load()?;
    let rows = diagnostics::obs_exp_table_with(&d, a.baseline.into(), &a.delta_grid, a.model.kind(), a.threshold)?;
    if let Some(path) = &a.csv {
        write_obs_exp_csv(&rows, File::create(path)?)?;
    }
    Ok(Output {
        command: "obs-exp",
        config_hash: config_hash("obs-exp", a, Some(&d)),
        details: json!({ "columns": OBS_EXP_COLUMNS, "rows": rows }),
        ..Default::default()
    })
}

fn write_obs_exp_csv<W: Write>(rows: &[diagnostics::ObsExpRow], mut w: W) -> Result<(), Error> {
    writeln!(w, "{}", OBS_EXP_COLUMNS.join(","))?;
    for r in rows {
        let gamma = r.baseline.iter().map(f64::to_string).collect::<Vec<_>>().join(";");
        let phi = r.phi.map_or(String::new(), |p| p.to_string());
        writeln!(w, "{},{},{},{},{},{},{},{},{}", r.delta, r.obs, r.exp, gamma, r.beta, phi, r.s2, r.z2, r.loglik)?;
    }
    Ok(())
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Simulate(_) => "simulate",
        Command::Fit(_) => "fit",
        Command::Test(_) => "test",
        Command::McStudy(_) => "mc-study",
        Command::Diagnose(_) => "diagnose",
        Command::ObsExp(_) => "obs-exp",
    }
}

fn emit(v: &impl Serialize) {
    let mut stdout = io::stdout().lock();
    // NaN/inf serialize as null
    let _ = serde_json::to_writer_pretty(&mut stdout, v);
    let _ = writeln!(stdout);
}

fn error_json(command: &str, kind: &str, message: &str) -> Value {
    json!({ "command": command, "error": { "kind": kind, "message": message } })
}

fn run(cli: &Cli) -> Result<Output, Error> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::InvalidInput("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
    }
    match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a),
        Command::Test(a) => test(a),
        Command::McStudy(a) => mc_study(a),
        Command::Diagnose(a) => diagnose(a),
        Command::ObsExp(a) => obs_exp(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
                e.exit();
            }
            let command = std::env::args().nth(1).filter(|a| !a.starts_with('-')).unwrap_or_default();
            emit(&error_json(&command, "usage", &e.to_string()));
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(out) => {
            emit(&out);
            ExitCode::SUCCESS
        }
        Err(e) => {
            emit(&error_json(command_name(&cli.command), e.kind(), &e.to_string()));
            ExitCode::FAILURE
        }
    }
}
