//! Replication harness for the simulation experiments: generate, fit with
//! each method, score, summarize.
//!
//! Every replicate draws its data and its KL oracle sample from a seed
//! derived from `(study seed, scenario, replicate)`, so any replicate can be
//! rerun on its own and results do not depend on thread scheduling.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use fgumbel_core::data::quantile_sorted;
use fgumbel_core::metrics::empirical_kl;
use fgumbel_core::reference::Reference;
use fgumbel_core::{fit_ecm, fit_normal_mixture_em, run_mcmc, EcmConfig, FgParams, McmcConfig, PriorSpec};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::document::write_atomic;
use crate::error::{AppError, AppResult};
use crate::parallel::with_pool;

pub const DESK_REPS: usize = 200;
pub const PAPER_REPS: usize = 1000;
const RHAT_OK: f64 = 1.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    E1a,
    E1b,
    E2,
    E3,
    E4,
}

impl FromStr for Scenario {
    type Err = AppError;
    fn from_str(s: &str) -> AppResult<Self> {
        match s {
            "E1a" => Ok(Scenario::E1a),
            "E1b" => Ok(Scenario::E1b),
            "E2" => Ok(Scenario::E2),
            "E3" => Ok(Scenario::E3),
            "E4" => Ok(Scenario::E4),
            _ => Err(AppError::Config(format!("unknown scenario '{s}' (expected E1a, E1b, E2, E3 or E4)"))),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Data-generating mechanism of a scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truth {
    Fg(FgParams),
    Reference(Reference),
}

impl Truth {
    pub fn logpdf(&self, x: f64) -> f64 {
        match self {
            Truth::Fg(p) => p.logpdf(x),
            Truth::Reference(r) => r.logpdf(x),
        }
    }

    pub fn draw_n(&self, rng: &mut fgumbel_core::Rng, n: usize) -> Vec<f64> {
        match self {
            Truth::Fg(p) => p.draw_n(rng, n),
            Truth::Reference(r) => r.draw_n(rng, n),
        }
    }
}

impl Scenario {
    pub fn truth(self) -> Truth {
        let fg = |t, a, b, w| Truth::Fg(FgParams::new(t, a, b, w).expect("valid scenario parameters"));
        match self {
            Scenario::E1a => fg(1.0, 1.0, 1.0, 0.4),
            Scenario::E1b => fg(0.0, 1.0, 5.0, 0.5),
            Scenario::E2 => Truth::Reference(Reference::E2),
            Scenario::E3 => Truth::Reference(Reference::E3),
            Scenario::E4 => Truth::Reference(Reference::E4),
        }
    }

    pub fn default_n(self) -> usize {
        match self {
            Scenario::E1a => 50,
            _ => 200,
        }
    }

    fn allowed_n(self) -> &'static [usize] {
        match self {
            Scenario::E1a => &[50],
            Scenario::E1b => &[100, 200],
            _ => &[200],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    FgEcm,
    FgBayes,
    NmEm,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::FgEcm => "fg_ecm",
            Method::FgBayes => "fg_bayes",
            Method::NmEm => "nm_em",
        }
    }
}

/// Bayesian arm settings. Desk defaults are 4 chains of 5000 iterations
/// with 1000 burn-in; `paper` mode uses 4 x 20000 with 5000 burn-in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BayesSettings {
    pub n_iter: Option<usize>,
    pub burn_in: Option<usize>,
    pub n_chains: Option<usize>,
}

/// Study file (TOML). See `docs/study-config.md` for the schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub scenario: String,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub n_reps: Option<usize>,
    #[serde(default)]
    pub methods: Option<Vec<Method>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
    #[serde(default)]
    pub paper: bool,
    #[serde(default)]
    pub n_oracle: Option<usize>,
    #[serde(default)]
    pub bayes: Option<BayesSettings>,
}

impl StudyConfig {
    pub fn from_toml(text: &str) -> AppResult<Self> {
        toml::from_str(text).map_err(|e| AppError::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> AppResult<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| AppError::Config(format!("{}: {e}", path.display())))
    }

    pub fn new(scenario: Scenario) -> Self {
        StudyConfig {
            scenario: scenario.to_string(),
            n: None,
            n_reps: None,
            methods: None,
            seed: 0,
            output_path: None,
            paper: false,
            n_oracle: None,
            bayes: None,
        }
    }

    /// Fill defaults and validate.
    pub fn resolve(&self) -> AppResult<ResolvedStudy> {
        let scenario: Scenario = self.scenario.parse()?;
        let n = self.n.unwrap_or(scenario.default_n());
        if self.paper && !scenario.allowed_n().contains(&n) {
            return Err(AppError::Config(format!(
                "field `n`: scenario {scenario} uses n in {:?} in paper mode, got {n}",
                scenario.allowed_n()
            )));
        }
        if n < 5 {
            return Err(AppError::Config(format!("field `n`: must be at least 5, got {n}")));
        }
        let n_reps = self.n_reps.unwrap_or(if self.paper { PAPER_REPS } else { DESK_REPS });
        if n_reps == 0 {
            return Err(AppError::Config("field `n_reps`: must be at least 1".into()));
        }
        let methods = self.methods.clone().unwrap_or_else(|| vec![Method::FgEcm, Method::FgBayes, Method::NmEm]);
        if methods.is_empty() {
            return Err(AppError::Config("field `methods`: empty".into()));
        }
        let b = self.bayes.clone().unwrap_or(BayesSettings { n_iter: None, burn_in: None, n_chains: None });
        let (di, db) = if self.paper { (20_000, 5_000) } else { (5_000, 1_000) };
        let mcmc = McmcConfig {
            n_iter: b.n_iter.unwrap_or(di),
            burn_in: b.burn_in.unwrap_or(db),
            n_chains: b.n_chains.unwrap_or(4),
            ..McmcConfig::default()
        };
        mcmc.validate().map_err(|e| AppError::Config(format!("table `bayes`: {e}")))?;
        let n_oracle = self.n_oracle.unwrap_or(50_000);
        if n_oracle == 0 {
            return Err(AppError::Config("field `n_oracle`: must be positive".into()));
        }
        Ok(ResolvedStudy { scenario, n, n_reps, methods, seed: self.seed, mcmc, n_oracle, output_path: self.output_path.clone() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedStudy {
    pub scenario: Scenario,
    pub n: usize,
    pub n_reps: usize,
    pub methods: Vec<Method>,
    pub seed: u64,
    pub mcmc: McmcConfig,
    pub n_oracle: usize,
    pub output_path: Option<PathBuf>,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable per-replicate seed.
pub fn replicate_seed(seed: u64, scenario: Scenario, rep: usize) -> u64 {
    let mut h = splitmix(seed);
    for b in scenario.to_string().bytes() {
        h = splitmix(h ^ b as u64);
    }
    splitmix(h ^ rep as u64)
}

/// One row of `replicates.csv`: a method applied to one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub rep: usize,
    pub seed: u64,
    pub method: String,
    pub converged: bool,
    pub error: Option<String>,
    pub theta: Option<f64>,
    pub sigma1: Option<f64>,
    pub sigma2: Option<f64>,
    pub w: Option<f64>,
    pub se_theta: Option<f64>,
    pub se_sigma1: Option<f64>,
    pub se_sigma2: Option<f64>,
    pub se_w: Option<f64>,
    pub nm_mu1: Option<f64>,
    pub nm_mu2: Option<f64>,
    pub nm_s1: Option<f64>,
    pub nm_s2: Option<f64>,
    pub nm_w: Option<f64>,
    pub kl: Option<f64>,
    pub max_rhat: Option<f64>,
    pub n_iter: Option<usize>,
}

impl ReplicateRecord {
    fn empty(rep: usize, seed: u64, method: Method) -> Self {
        ReplicateRecord {
            rep,
            seed,
            method: method.tag().to_string(),
            converged: false,
            error: None,
            theta: None,
            sigma1: None,
            sigma2: None,
            w: None,
            se_theta: None,
            se_sigma1: None,
            se_sigma2: None,
            se_w: None,
            nm_mu1: None,
            nm_mu2: None,
            nm_s1: None,
            nm_s2: None,
            nm_w: None,
            kl: None,
            max_rhat: None,
            n_iter: None,
        }
    }

    fn set_fg(&mut self, p: &FgParams, se: Option<[f64; 4]>) {
        self.theta = Some(p.theta());
        self.sigma1 = Some(p.sigma1());
        self.sigma2 = Some(p.sigma2());
        self.w = Some(p.w());
        if let Some(s) = se {
            self.se_theta = Some(s[0]);
            self.se_sigma1 = Some(s[1]);
            self.se_sigma2 = Some(s[2]);
            self.se_w = Some(s[3]);
        }
    }

    fn point(&self, j: usize) -> Option<f64> {
        [self.theta, self.sigma1, self.sigma2, self.w][j]
    }

    fn se(&self, j: usize) -> Option<f64> {
        [self.se_theta, self.se_sigma1, self.se_sigma2, self.se_w][j]
    }
}

/// Fit every requested method to replicate `rep`.
pub fn run_replicate(study: &ResolvedStudy, rep: usize) -> Vec<ReplicateRecord> {
    let seed = replicate_seed(study.seed, study.scenario, rep);
    let truth = study.scenario.truth();
    let y_vals = truth.draw_n(&mut fgumbel_core::rng_stream(seed, 0), study.n);
    let oracle = truth.draw_n(&mut fgumbel_core::rng_stream(seed, 1), study.n_oracle);
    let y = fgumbel_core::DataSample::new(y_vals, fgumbel_core::Source::Simulated { seed })
        .expect("simulated data are finite");
    let truth_lp = |x: f64| truth.logpdf(x);
    let mut out = Vec::with_capacity(study.methods.len());
    for &m in &study.methods {
        let mut r = ReplicateRecord::empty(rep, seed, m);
        match m {
            Method::FgEcm => match fit_ecm(&y, &EcmConfig { seed, ..EcmConfig::default() }) {
                Ok(fit) => {
                    r.converged = fit.converged;
                    r.set_fg(&fit.params, fit.standard_errors());
                    r.n_iter = Some(fit.n_iter);
                    r.kl = Some(empirical_kl(truth_lp, |x| fit.params.logpdf(x), &oracle, m.tag()).d_kl);
                }
                Err(e) => r.error = Some(e.to_string()),
            },
            Method::FgBayes => {
                let cfg = McmcConfig { seed, ..study.mcmc.clone() };
                match run_mcmc(&y, &PriorSpec::default(), &cfg).and_then(|d| Ok((d.median_params()?, d))) {
                    Ok((med, draws)) => {
                        let rhat = draws.max_rhat();
                        r.converged = rhat < RHAT_OK && draws.failed_chains.is_empty();
                        let sd = [0, 1, 2, 3].map(|j| draws.summaries[j].sd);
                        r.set_fg(&med, Some(sd));
                        r.max_rhat = Some(rhat);
                        r.n_iter = Some(draws.draws_per_chain);
                        r.kl = Some(empirical_kl(truth_lp, |x| med.logpdf(x), &oracle, m.tag()).d_kl);
                    }
                    Err(e) => r.error = Some(e.to_string()),
                }
            }
            Method::NmEm => match fit_normal_mixture_em(&y, &EcmConfig { seed, ..EcmConfig::default() }) {
                Ok(fit) => {
                    let p = fit.params;
                    r.converged = fit.converged;
                    r.error = fit.failure.clone();
                    r.nm_mu1 = Some(p.mu1());
                    r.nm_mu2 = Some(p.mu2());
                    r.nm_s1 = Some(p.s1());
                    r.nm_s2 = Some(p.s2());
                    r.nm_w = Some(p.w());
                    r.n_iter = Some(fit.n_iter);
                    r.kl = Some(empirical_kl(truth_lp, |x| p.logpdf(x), &oracle, m.tag()).d_kl);
                }
                Err(e) => r.error = Some(e.to_string()),
            },
        }
        out.push(r);
    }
    out
}

/// Table-1 style row for one parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRow {
    pub name: String,
    pub truth: Option<f64>,
    /// Average point estimate.
    pub point_est: f64,
    /// Average estimated standard deviation.
    pub mean_se: Option<f64>,
    /// Empirical standard deviation of the point estimates.
    pub emp_sd: f64,
    /// Monte Carlo standard errors of `point_est` and `emp_sd`.
    pub mc_se_point: f64,
    pub mc_se_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub n_fitted: usize,
    pub n_failed: usize,
    pub n_nonconverged: usize,
    pub params: Vec<ParamRow>,
    pub max_rhat: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlBox {
    pub method: String,
    pub n: usize,
    pub min: f64,
    pub whisker_low: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub whisker_high: f64,
    pub max: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub n_reps: usize,
    pub kl_included: usize,
    pub nm_nonconverged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub rep: usize,
    pub method: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub scenario: Scenario,
    pub n: usize,
    pub n_reps: usize,
    pub seed: u64,
    pub methods: Vec<MethodSummary>,
    pub kl: Vec<KlBox>,
    pub nm_nonconvergence_rate: Option<f64>,
    pub exclusion: Option<Exclusion>,
    pub failures: Vec<Failure>,
}

pub struct StudyOutput {
    pub summary: StudySummary,
    pub records: Vec<ReplicateRecord>,
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let sd = if v.len() > 1 { (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)).sqrt() } else { f64::NAN };
    (m, sd)
}

fn boxplot(method: &str, values: &[f64]) -> Option<KlBox> {
    if values.is_empty() {
        return None;
    }
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let (q1, median, q3) = (quantile_sorted(&s, 0.25), quantile_sorted(&s, 0.5), quantile_sorted(&s, 0.75));
    let iqr = q3 - q1;
    let whisker_low = *s.iter().find(|&&v| v >= q1 - 1.5 * iqr).unwrap_or(&s[0]);
    let whisker_high = *s.iter().rev().find(|&&v| v <= q3 + 1.5 * iqr).unwrap_or(&s[s.len() - 1]);
    Some(KlBox {
        method: method.to_string(),
        n: s.len(),
        min: s[0],
        whisker_low,
        q1,
        median,
        q3,
        whisker_high,
        max: s[s.len() - 1],
        mean: mean_sd(&s).0,
    })
}

/// Aggregate replicate records.
pub fn summarize(study: &ResolvedStudy, records: &[ReplicateRecord]) -> StudySummary {
    let truth = match study.scenario.truth() {
        Truth::Fg(p) => Some(p.to_array()),
        Truth::Reference(_) => None,
    };
    let mut methods = Vec::new();
    let mut kl = Vec::new();
    let mut failures = Vec::new();
    let mut nm_rate = None;
    let mut exclusion = None;
    for &m in &study.methods {
        let rows: Vec<&ReplicateRecord> = records.iter().filter(|r| r.method == m.tag()).collect();
        let fitted: Vec<&ReplicateRecord> =
            rows.iter().copied().filter(|r| r.theta.is_some() || r.nm_mu1.is_some()).collect();
        let n_failed = rows.len() - fitted.len();
        for r in rows.iter().filter(|r| r.theta.is_none() && r.nm_mu1.is_none()) {
            failures.push(Failure { rep: r.rep, method: r.method.clone(), error: r.error.clone().unwrap_or_default() });
        }
        let n_nonconverged = fitted.iter().filter(|r| !r.converged).count();
        let mut params = Vec::new();
        if m != Method::NmEm && !fitted.is_empty() {
            for (j, name) in ["theta", "sigma1", "sigma2", "w"].iter().enumerate() {
                let pts: Vec<f64> = fitted.iter().filter_map(|r| r.point(j)).collect();
                let ses: Vec<f64> = fitted.iter().filter_map(|r| r.se(j)).filter(|v| v.is_finite()).collect();
                let (point_est, emp_sd) = mean_sd(&pts);
                let k = pts.len() as f64;
                params.push(ParamRow {
                    name: name.to_string(),
                    truth: truth.map(|t| t[j]),
                    point_est,
                    mean_se: if ses.is_empty() { None } else { Some(mean_sd(&ses).0) },
                    emp_sd,
                    mc_se_point: emp_sd / k.sqrt(),
                    mc_se_sd: emp_sd / (2.0 * (k - 1.0)).sqrt(),
                });
            }
        }
        let max_rhat = fitted.iter().filter_map(|r| r.max_rhat).fold(None, |a: Option<f64>, v| Some(a.map_or(v, |a| a.max(v))));
        methods.push(MethodSummary { method: m.tag().to_string(), n_fitted: fitted.len(), n_failed, n_nonconverged, params, max_rhat });

        // Non-converged normal mixtures are left out of the KL summary.
        let included: Vec<f64> = rows
            .iter()
            .filter(|r| m != Method::NmEm || r.converged)
            .filter_map(|r| r.kl)
            .filter(|v| !v.is_nan())
            .collect();
        if let Some(b) = boxplot(m.tag(), &included) {
            kl.push(b);
        }
        if m == Method::NmEm {
            let nonconv = rows.iter().filter(|r| !r.converged).count();
            nm_rate = Some(nonconv as f64 / rows.len() as f64);
            exclusion = Some(Exclusion { n_reps: study.n_reps, kl_included: included.len(), nm_nonconverged: nonconv });
        }
    }
    StudySummary {
        scenario: study.scenario,
        n: study.n,
        n_reps: study.n_reps,
        seed: study.seed,
        methods,
        kl,
        nm_nonconvergence_rate: nm_rate,
        exclusion,
        failures,
    }
}

/// Run all replicates (in parallel) and summarize. Writes outputs when the
/// study has an output path.
pub fn run_study(study: &ResolvedStudy) -> AppResult<StudyOutput> {
    let per_rep: Vec<Vec<ReplicateRecord>> =
        with_pool(|| (0..study.n_reps).into_par_iter().map(|rep| run_replicate(study, rep)).collect())?;
    let records: Vec<ReplicateRecord> = per_rep.into_iter().flatten().collect();
    let summary = summarize(study, &records);
    let out = StudyOutput { summary, records };
    if let Some(dir) = &study.output_path {
        write_outputs(dir, &out)?;
    }
    Ok(out)
}

pub fn write_outputs(dir: &Path, out: &StudyOutput) -> AppResult<()> {
    std::fs::create_dir_all(dir)?;
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        for r in &out.records {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    write_atomic(&dir.join("replicates.csv"), &buf)?;
    let mut json = serde_json::to_string_pretty(&out.summary)?;
    json.push('\n');
    write_atomic(&dir.join("summary.json"), json.as_bytes())?;
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(["method", "stat", "value"])?;
        for b in &out.summary.kl {
            let stats = [
                ("n", b.n as f64),
                ("min", b.min),
                ("whisker_low", b.whisker_low),
                ("q1", b.q1),
                ("median", b.median),
                ("q3", b.q3),
                ("whisker_high", b.whisker_high),
                ("max", b.max),
                ("mean", b.mean),
            ];
            for (k, v) in stats {
                w.write_record([b.method.as_str(), k, &format!("{v}")])?;
            }
        }
        w.flush()?;
    }
    write_atomic(&dir.join("kl_boxplot.csv"), &buf)
}

/// Console table in the layout of the simulation table.
pub fn format_summary(s: &StudySummary) -> String {
    let mut t = format!("scenario {} (n = {}, {} replicates, seed {})\n", s.scenario, s.n, s.n_reps, s.seed);
    for m in &s.methods {
        t.push_str(&format!(
            "{}: {} fitted, {} failed, {} not converged\n",
            m.method, m.n_fitted, m.n_failed, m.n_nonconverged
        ));
        if !m.params.is_empty() {
            t.push_str(&format!("  {:<8}{:>10}{:>10}{:>10}{:>10}\n", "param", "truth", "point.est", "s.d.hat", "s.d."));
            for p in &m.params {
                let f = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.3}"));
                t.push_str(&format!(
                    "  {:<8}{:>10}{:>10.3}{:>10}{:>10.3}\n",
                    p.name,
                    f(p.truth),
                    p.point_est,
                    f(p.mean_se),
                    p.emp_sd
                ));
            }
        }
        if let Some(r) = m.max_rhat {
            t.push_str(&format!("  max Rhat {r:.3}\n"));
        }
    }
    for b in &s.kl {
        t.push_str(&format!("KL {}: median {:.4} (IQR {:.4}-{:.4}, n = {})\n", b.method, b.median, b.q1, b.q3, b.n));
    }
    if let Some(r) = s.nm_nonconvergence_rate {
        t.push_str(&format!("normal mixture non-convergence rate {:.3}\n", r));
    }
    t
}
