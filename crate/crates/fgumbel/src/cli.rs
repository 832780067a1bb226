//! Subcommand implementations. Each returns the process exit status.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use fgumbel_core::metrics::{empirical_kl, KsConfig, KsTestResult};
use fgumbel_core::reference::Reference;
use fgumbel_core::regression::{fit_mean_normal, fit_modal_ecm, RegressionFit, RegressionSpec};
use fgumbel_core::{
    fit_ecm, fit_normal_mixture_em, DataSample, EcmConfig, FgParams, McmcConfig, MomentSummary, PriorSpec,
};
use serde::Serialize;

use crate::dataset::{elevation_change, Dataset};
use crate::document::{write_atomic, ResultDocument, Stopwatch};
use crate::error::{AppError, AppResult};
use crate::parallel::{fit_modal_bayes_par, ks_test_par, run_mcmc_par};
use crate::study::{format_summary, run_study, StudyConfig};

const RHAT_OK: f64 = 1.05;

#[derive(Debug, Parser)]
#[command(name = "fgumbel", version, about = "Flexible Gumbel distribution: fitting, modal regression and simulation studies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the FG distribution to one numeric column.
    Fit(FitArgs),
    /// Tabulate pdf and cdf on a grid, with moments in the header.
    Density(DensityArgs),
    /// Draw a seeded sample.
    Sample(SampleArgs),
    /// Modal (FG) or mean (normal) linear regression.
    Regress(RegressArgs),
    /// Run a simulation study from a TOML config.
    Study(StudyArgs),
    /// Monte Carlo Kolmogorov–Smirnov goodness-of-fit test.
    Ks(KsArgs),
    /// Empirical KL divergence from a reference density.
    Kl(KlArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FitMethod {
    Ecm,
    Bayes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RegressMethod {
    Ecm,
    Bayes,
    Ols,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KsMethod {
    Ecm,
    Bayes,
    Nm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Transform {
    /// Daily signed max-minus-min of a timestamped gauge series.
    ElevationChange,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InputArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub input: PathBuf,
    /// Numeric column to analyse.
    #[arg(long)]
    pub column: String,
    /// Derive the analysed series from raw readings first.
    #[arg(long, value_enum)]
    pub transform: Option<Transform>,
    /// Timestamp column used by `--transform`.
    #[arg(long, default_value = "datetime")]
    pub time_column: String,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct McmcArgs {
    /// MCMC iterations per chain, burn-in included.
    #[arg(long, default_value_t = 20_000)]
    pub iters: usize,
    #[arg(long, default_value_t = 4)]
    pub chains: usize,
    #[arg(long, default_value_t = 5_000)]
    pub burnin: usize,
}

impl McmcArgs {
    fn config(&self, seed: u64) -> McmcConfig {
        McmcConfig { n_iter: self.iters, burn_in: self.burnin, n_chains: self.chains, seed, ..McmcConfig::default() }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: InputArgs,
    #[arg(long, value_enum, default_value = "ecm")]
    pub method: FitMethod,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub mcmc: McmcArgs,
    /// Write the result document (JSON) here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write retained posterior draws (CSV, one row per draw) here.
    #[arg(long)]
    pub draws: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DensityArgs {
    /// `theta,sigma1,sigma2,w`
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub params: Vec<f64>,
    /// Grid start; defaults to the 0.001 quantile.
    #[arg(long, allow_negative_numbers = true)]
    pub from: Option<f64>,
    /// Grid end; defaults to the 0.999 quantile.
    #[arg(long, allow_negative_numbers = true)]
    pub to: Option<f64>,
    #[arg(long, default_value_t = 201)]
    pub points: usize,
    /// CSV output path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SampleArgs {
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub params: Vec<f64>,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RegressArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub response: String,
    /// Comma-separated covariate columns; an intercept is always added.
    #[arg(long, value_delimiter = ',', required = true)]
    pub covariates: Vec<String>,
    #[arg(long, value_enum, default_value = "ecm")]
    pub method: RegressMethod,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub mcmc: McmcArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct StudyArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Full-scale replication (1000 replicates, longer chains).
    #[arg(long)]
    pub paper: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; overrides `output_path` in the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct KsArgs {
    #[command(flatten)]
    pub data: InputArgs,
    #[arg(long, value_enum, default_value = "ecm")]
    pub method: KsMethod,
    #[arg(long, default_value_t = 999)]
    pub boot: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Keep the fitted parameters fixed in bootstrap replicates.
    #[arg(long)]
    pub no_refit: bool,
    #[command(flatten)]
    pub mcmc: McmcArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct KlArgs {
    /// Reference density: E2, E3, E4 or its tag, e.g. `laplace(0,2)`.
    #[arg(long)]
    pub truth: String,
    /// FG parameters to score, `theta,sigma1,sigma2,w`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "input")]
    pub params: Option<Vec<f64>>,
    /// Fit FG (ECM) and a normal mixture to this CSV and score both.
    #[arg(long, requires = "column")]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub column: Option<String>,
    #[arg(long, default_value_t = 50_000)]
    pub n_eval: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn command_echo() -> Vec<String> {
    std::env::args().skip(1).collect()
}

fn load_sample(a: &InputArgs) -> AppResult<DataSample> {
    let ds = Dataset::from_path(&a.input)?;
    match a.transform {
        None => ds.sample(&a.column),
        Some(Transform::ElevationChange) => {
            let series = elevation_change(&ds, &a.time_column, &a.column)?;
            Ok(DataSample::new(
                series.iter().map(|d| d.change).collect(),
                fgumbel_core::Source::Other(format!("elevation-change of {}", a.input.display())),
            )?)
        }
    }
}

fn params_from(v: &[f64]) -> AppResult<FgParams> {
    if v.len() != 4 {
        return Err(AppError::Data("expected four parameters: theta,sigma1,sigma2,w".into()));
    }
    Ok(FgParams::new(v[0], v[1], v[2], v[3])?)
}

fn fmt3(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.3}")
    } else {
        "NA".into()
    }
}

fn table(rows: &[(String, f64, f64, f64, f64)]) -> String {
    let mut t = format!("{:<14}{:>11}{:>11}{:>11}{:>11}\n", "parameter", "point.est", "s.d.hat", "lower 95", "upper 95");
    for (name, est, sd, lo, hi) in rows {
        t.push_str(&format!("{:<14}{:>11}{:>11}{:>11}{:>11}\n", name, fmt3(*est), fmt3(*sd), fmt3(*lo), fmt3(*hi)));
    }
    t
}

fn moment_lines(m: &MomentSummary) -> String {
    format!(
        "mean {:.4}  variance {:.4}  skewness {:.3}  kurtosis {:.3}\n",
        m.mean, m.variance, m.skewness, m.kurtosis
    )
}

fn write_doc<C: Serialize, P: Serialize>(
    out: &Option<PathBuf>,
    config: &C,
    payload: &P,
    clock: &Stopwatch,
    seed: Option<u64>,
) -> AppResult<()> {
    if let Some(path) = out {
        ResultDocument::new(command_echo(), config, payload, clock, seed)?.write(path)?;
    }
    Ok(())
}

const Z975: f64 = 1.959_963_984_540_054;

pub fn fit(a: &FitArgs) -> AppResult<()> {
    let clock = Stopwatch::start();
    let y = load_sample(&a.data)?;
    match a.method {
        FitMethod::Ecm => {
            let fit = fit_ecm(&y, &EcmConfig { seed: a.seed, ..EcmConfig::default() })?;
            let p = fit.params.to_array();
            let se = fit.standard_errors().unwrap_or([f64::NAN; 4]);
            let rows: Vec<_> = ["theta", "sigma1", "sigma2", "w"]
                .iter()
                .enumerate()
                .map(|(j, n)| (n.to_string(), p[j], se[j], p[j] - Z975 * se[j], p[j] + Z975 * se[j]))
                .collect();
            print!("FG fit by ECM (n = {})\n{}", fit.n_obs, table(&rows));
            println!("log-likelihood {:.3}  AIC {:.3}  BIC {:.3}", fit.loglik, fit.aic, fit.bic);
            print!("{}", moment_lines(&fit.params.moments()));
            if let Some(e) = &fit.vcov_error {
                println!("standard errors unavailable: {e}");
            }
            write_doc(&a.out, a, &fit, &clock, Some(a.seed))?;
            if !fit.converged {
                return Err(AppError::Convergence(format!("ECM did not converge in {} iterations", fit.n_iter)));
            }
        }
        FitMethod::Bayes => {
            let draws = run_mcmc_par(&y, &PriorSpec::default(), &a.mcmc.config(a.seed))?;
            let rows: Vec<_> =
                draws.summaries.iter().map(|s| (s.name.clone(), s.median, s.sd, s.q025, s.q975)).collect();
            print!("FG fit by MCMC (n = {}, {} chains x {} kept draws)\n{}", y.len(), draws.n_chains, draws.draws_per_chain, table(&rows));
            let med = draws.median_params()?;
            let ll = fgumbel_core::dist::fg_loglik(y.values(), &med);
            let (aic, bic) = fgumbel_core::ecm::information_criteria(ll, 4, y.len());
            println!("at posterior medians: log-likelihood {ll:.3}  AIC {aic:.3}  BIC {bic:.3}");
            print!("{}", moment_lines(&med.moments()));
            println!("max Rhat {:.3}  acceptance {:?}", draws.max_rhat(), draws.accept_rates.iter().map(|r| format!("{r:.2}")).collect::<Vec<_>>());
            #[derive(Serialize)]
            struct Payload<'a> {
                posterior: &'a fgumbel_core::PosteriorDraws,
                loglik: f64,
                aic: f64,
                bic: f64,
            }
            write_doc(&a.out, a, &Payload { posterior: &draws, loglik: ll, aic, bic }, &clock, Some(a.seed))?;
            if let Some(path) = &a.draws {
                write_draws(path, &draws)?;
            }
            check_rhat(draws.max_rhat(), &draws.failed_chains)?;
        }
    }
    Ok(())
}

/// Draw matrix as CSV with `chain` and `iteration` columns.
pub fn write_draws(path: &Path, d: &fgumbel_core::PosteriorDraws) -> AppResult<()> {
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        let mut header = vec!["chain".to_string(), "iteration".to_string()];
        header.extend(d.names.iter().cloned());
        w.write_record(&header)?;
        for r in 0..d.draws.rows() {
            let mut rec = vec![(r / d.draws_per_chain).to_string(), (r % d.draws_per_chain).to_string()];
            rec.extend(d.draws.row(r).iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
    }
    write_atomic(path, &buf)
}

fn check_rhat(max_rhat: f64, failed: &[String]) -> AppResult<()> {
    if !failed.is_empty() {
        return Err(AppError::Convergence(format!("{} chain(s) failed: {}", failed.len(), failed.join("; "))));
    }
    if max_rhat.is_nan() || max_rhat >= RHAT_OK {
        return Err(AppError::Convergence(format!("max Rhat {max_rhat:.3} >= {RHAT_OK}")));
    }
    Ok(())
}

pub fn density(a: &DensityArgs) -> AppResult<()> {
    let p = params_from(&a.params)?;
    if a.points < 2 {
        return Err(AppError::Data("--points must be at least 2".into()));
    }
    let from = match a.from {
        Some(v) => v,
        None => p.quantile(0.001)?,
    };
    let to = match a.to {
        Some(v) => v,
        None => p.quantile(0.999)?,
    };
    if !(from.is_finite() && to.is_finite() && from < to) {
        return Err(AppError::Data("grid range must be finite with from < to".into()));
    }
    let m = p.moments();
    let mut s = String::new();
    s.push_str(&format!("# FG(theta={}, sigma1={}, sigma2={}, w={})\n", p.theta(), p.sigma1(), p.sigma2(), p.w()));
    s.push_str(&format!("# mean={}\n# variance={}\n# skewness={}\n# kurtosis={}\n", m.mean, m.variance, m.skewness, m.kurtosis));
    s.push_str("x,pdf,cdf\n");
    let step = (to - from) / (a.points - 1) as f64;
    for i in 0..a.points {
        let x = if i + 1 == a.points { to } else { from + step * i as f64 };
        s.push_str(&format!("{x},{},{}\n", p.pdf(x), p.cdf(x)));
    }
    match &a.out {
        Some(path) => {
            write_atomic(path, s.as_bytes())?;
            println!("skewness {:.3}  kurtosis {:.3}", m.skewness, m.kurtosis);
        }
        None => print!("{s}"),
    }
    Ok(())
}

pub fn sample(a: &SampleArgs) -> AppResult<()> {
    let p = params_from(&a.params)?;
    let y = fgumbel_core::dist::fg_sample(&p, a.n, a.seed)?;
    let mut s = String::from("y\n");
    for v in y.values() {
        s.push_str(&format!("{v}\n"));
    }
    match &a.out {
        Some(path) => write_atomic(path, s.as_bytes()),
        None => {
            print!("{s}");
            Ok(())
        }
    }
}

fn regression_table(fit: &RegressionFit) -> String {
    let rows: Vec<_> = fit.estimates.iter().map(|e| (e.name.clone(), e.estimate, e.se, e.lower, e.upper)).collect();
    let mut t = table(&rows);
    for e in &fit.log_scale_intervals {
        t.push_str(&format!("log-scale 95% interval for {}: ({}, {})\n", e.name, fmt3(e.lower), fmt3(e.upper)));
    }
    if !fit.weakly_identified.is_empty() {
        t.push_str(&format!("weakly identified (sd > 0.5 |median|): {}\n", fit.weakly_identified.join(", ")));
    }
    t.push_str(&format!("log-likelihood {:.3}  AIC {:.3}  BIC {:.3}\n", fit.loglik, fit.aic, fit.bic));
    t
}

pub fn regress(a: &RegressArgs) -> AppResult<()> {
    let clock = Stopwatch::start();
    let ds = Dataset::from_path(&a.input)?;
    let (x, y, names) = ds.design(&a.response, &a.covariates)?;
    let spec = RegressionSpec::new(x, y, names.clone()).map_err(|e| match e {
        fgumbel_core::Error::RankDeficient { columns } => AppError::Data(format!(
            "design is rank deficient; collinear columns: {}",
            columns.iter().map(|&j| names[j].as_str()).collect::<Vec<_>>().join(", ")
        )),
        other => other.into(),
    })?;
    match a.method {
        RegressMethod::Ols => {
            let fit = fit_mean_normal(&spec)?;
            print!("mean regression, normal errors (n = {})\n{}", fit.n_obs, regression_table(&fit));
            write_doc(&a.out, a, &fit, &clock, None)?;
        }
        RegressMethod::Ecm => {
            let fit = fit_modal_ecm(&spec, &EcmConfig { seed: a.seed, ..EcmConfig::default() })?;
            print!("modal regression, FG errors, ECM (n = {})\n{}", fit.n_obs, regression_table(&fit));
            if let Some(e) = &fit.vcov_error {
                println!("standard errors unavailable: {e}");
            }
            write_doc(&a.out, a, &fit, &clock, Some(a.seed))?;
            if !fit.converged {
                return Err(AppError::Convergence(format!("ECM did not converge in {} iterations", fit.n_iter)));
            }
        }
        RegressMethod::Bayes => {
            let (fit, draws) = fit_modal_bayes_par(&spec, &PriorSpec::default(), &a.mcmc.config(a.seed))?;
            print!("modal regression, FG errors, MCMC (n = {})\n{}", fit.n_obs, regression_table(&fit));
            println!("max Rhat {:.3}", draws.max_rhat());
            #[derive(Serialize)]
            struct Payload<'a> {
                fit: &'a RegressionFit,
                posterior: &'a fgumbel_core::PosteriorDraws,
            }
            write_doc(&a.out, a, &Payload { fit: &fit, posterior: &draws }, &clock, Some(a.seed))?;
            check_rhat(draws.max_rhat(), &draws.failed_chains)?;
        }
    }
    Ok(())
}

pub fn study(a: &StudyArgs) -> AppResult<()> {
    let clock = Stopwatch::start();
    let mut cfg = StudyConfig::from_path(&a.config)?;
    cfg.paper |= a.paper;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(o) = &a.out {
        cfg.output_path = Some(o.clone());
    }
    let mut resolved = cfg.resolve()?;
    let dir = resolved
        .output_path
        .clone()
        .unwrap_or_else(|| Path::new("study-output").join(resolved.scenario.to_string()));
    resolved.output_path = Some(dir.clone());
    let out = run_study(&resolved)?;
    print!("{}", format_summary(&out.summary));
    println!("outputs written to {} ({:.1} s)", dir.display(), clock.timing().elapsed_seconds);
    Ok(())
}

pub fn ks(a: &KsArgs) -> AppResult<()> {
    let clock = Stopwatch::start();
    let y = load_sample(&a.data)?;
    let mut cfg = KsConfig { n_boot: a.boot, refit: !a.no_refit, seed: a.seed };
    let (label, result): (&str, KsTestResult) = match a.method {
        KsMethod::Ecm => {
            let fit = fit_ecm(&y, &EcmConfig { seed: a.seed, ..EcmConfig::default() })?;
            ("FG (ECM)", ks_test_par(&y, &fit.params, &cfg)?)
        }
        KsMethod::Bayes => {
            // Re-running MCMC per replicate is out of reach; the posterior
            // medians are treated as fixed.
            cfg.refit = false;
            let draws = run_mcmc_par(&y, &PriorSpec::default(), &a.mcmc.config(a.seed))?;
            ("FG (posterior medians)", ks_test_par(&y, &draws.median_params()?, &cfg)?)
        }
        KsMethod::Nm => {
            let fit = fit_normal_mixture_em(&y, &EcmConfig { seed: a.seed, ..EcmConfig::default() })?;
            if !fit.converged {
                eprintln!("warning: normal mixture fit did not converge: {}", fit.failure.clone().unwrap_or_default());
            }
            ("normal mixture (EM)", ks_test_par(&y, &fit.params, &cfg)?)
        }
    };
    println!(
        "KS test, {label}: D = {:.4}, p = {:.3} ({} replicates, {} dropped, refit {})",
        result.statistic,
        result.p_value,
        result.n_boot,
        result.n_dropped,
        if cfg.refit { "on" } else { "off" }
    );
    if let Some(w) = &result.warning {
        eprintln!("warning: {w}");
    }
    write_doc(&a.out, a, &result, &clock, Some(a.seed))
}

pub fn kl(a: &KlArgs) -> AppResult<()> {
    let clock = Stopwatch::start();
    let truth = Reference::parse(&a.truth)?;
    if a.n_eval == 0 {
        return Err(AppError::Data("--n-eval must be positive".into()));
    }
    let oracle = truth.draw_n(&mut fgumbel_core::rng_stream(a.seed, 1), a.n_eval);
    let tl = |x: f64| truth.logpdf(x);
    let mut results = Vec::new();
    if let Some(v) = &a.params {
        let p = params_from(v)?;
        results.push(empirical_kl(tl, |x| p.logpdf(x), &oracle, "fg"));
    } else if let (Some(input), Some(column)) = (&a.input, &a.column) {
        let y = Dataset::from_path(input)?.sample(column)?;
        let fg = fit_ecm(&y, &EcmConfig { seed: a.seed, ..EcmConfig::default() })?;
        results.push(empirical_kl(tl, |x| fg.params.logpdf(x), &oracle, "fg_ecm"));
        let nm = fit_normal_mixture_em(&y, &EcmConfig { seed: a.seed, ..EcmConfig::default() })?;
        let mut r = empirical_kl(tl, |x| nm.params.logpdf(x), &oracle, "nm_em");
        if !nm.converged {
            r.diagnostic = Some(format!("normal mixture did not converge: {}", nm.failure.clone().unwrap_or_default()));
        }
        results.push(r);
    } else {
        return Err(AppError::Data("give either --params or --input with --column".into()));
    }
    for r in &results {
        println!("KL({} || {}) = {:.5} over {} draws", truth.tag(), r.model_tag, r.d_kl, r.n_eval);
        if let Some(d) = &r.diagnostic {
            eprintln!("note: {d}");
        }
    }
    write_doc(&a.out, a, &results, &clock, Some(a.seed))
}

/// Dispatch a parsed command line.
pub fn run(cli: &Cli) -> AppResult<()> {
    match &cli.command {
        Command::Fit(a) => fit(a),
        Command::Density(a) => density(a),
        Command::Sample(a) => sample(a),
        Command::Regress(a) => regress(a),
        Command::Study(a) => study(a),
        Command::Ks(a) => ks(a),
        Command::Kl(a) => kl(a),
    }
}
