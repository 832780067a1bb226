//! Acceptance runner: one PASS/FAIL line per criterion, nonzero exit if
//! any fails. Run with `cargo test --test acceptance`.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use fgumbel::core::dist::{fg_cdf, fg_moments, fg_pdf, fg_quantile, fg_sample, identifiability_determinant};
use fgumbel::core::ecm::{cm_step, e_step};
use fgumbel::core::mcmc::gibbs_w_update;
use fgumbel::core::metrics::KsConfig;
use fgumbel::core::regression::{fit_mean_normal, fit_modal_ecm};
use fgumbel::core::{
    fit_ecm, fit_normal_mixture_em, rng_stream, run_mcmc, DataSample, EcmConfig, FgParams, McmcConfig, PriorSpec,
    RegressionSpec,
};
use fgumbel::dataset::Dataset;
use fgumbel::parallel::{ks_test_par, run_mcmc_par, with_pool};
use fgumbel::study::{run_study, BayesSettings, Method, Scenario, StudyConfig, StudySummary};
use rand::Rng;
use rayon::prelude::*;
use statrs::distribution::{Beta, ContinuousCDF, Normal};

const SEED: u64 = 20240101;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within_time(out: Outcome, start: Instant, limit: Duration) -> Outcome {
    let t = start.elapsed();
    let note = format!(" [{:.1} s, limit {} s]", t.as_secs_f64(), limit.as_secs());
    match out {
        Ok(d) if t <= limit => Ok(d + &note),
        Ok(d) => Err(d + &note + " over time limit"),
        Err(d) => Err(d + &note),
    }
}

fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn param<'a>(s: &'a StudySummary, method: &str, name: &str) -> Result<&'a fgumbel::study::ParamRow, String> {
    s.methods
        .iter()
        .find(|m| m.method == method)
        .and_then(|m| m.params.iter().find(|p| p.name == name))
        .ok_or_else(|| format!("no {name} row for {method}"))
}

fn study(scenario: Scenario, n_reps: usize, methods: Vec<Method>, bayes: Option<BayesSettings>) -> Result<StudySummary, String> {
    let cfg = StudyConfig {
        n: Some(200),
        n_reps: Some(n_reps),
        methods: Some(methods),
        seed: SEED,
        bayes,
        ..StudyConfig::new(scenario)
    };
    let resolved = cfg.resolve().map_err(|e| e.to_string())?;
    run_study(&resolved).map(|o| o.summary).map_err(|e| e.to_string())
}

fn c1() -> Outcome {
    let a = fg_moments(&FgParams::new(-0.795, 5.186, 6.237, 0.698).unwrap());
    let b = fg_moments(&FgParams::new(-0.485, 5.400, 5.733, 0.629).unwrap());
    let ok = (a.skewness + 0.102).abs() <= 0.005
        && (a.kurtosis - 6.384).abs() <= 0.01
        && (b.skewness - 0.058).abs() <= 0.005
        && (b.kurtosis - 6.074).abs() <= 0.01;
    check(
        ok,
        format!(
            "skew/kurt {:.4}/{:.4} (want -0.102/6.384), {:.4}/{:.4} (want 0.058/6.074)",
            a.skewness, a.kurtosis, b.skewness, b.kurtosis
        ),
    )
}

fn c2() -> Outcome {
    let s = study(Scenario::E1b, 200, vec![Method::FgEcm], None)?;
    let t = param(&s, "fg_ecm", "theta")?.point_est;
    let s2 = param(&s, "fg_ecm", "sigma2")?.point_est;
    let w = param(&s, "fg_ecm", "w")?;
    let ok = (t - 0.008).abs() <= 0.03
        && (s2 - 4.993).abs() <= 0.15
        && (w.point_est - 0.500).abs() <= 0.015
        && (w.emp_sd - 0.063).abs() <= 0.015;
    check(ok, format!("mean theta {t:.4}, sigma2 {s2:.4}, w {:.4}, sd(w) {:.4}", w.point_est, w.emp_sd))
}

fn c3() -> Outcome {
    let bayes = BayesSettings { n_iter: Some(5000), burn_in: Some(1000), n_chains: Some(4) };
    let s = study(Scenario::E1b, 50, vec![Method::FgBayes], Some(bayes))?;
    let t = param(&s, "fg_bayes", "theta")?.point_est;
    let s2 = param(&s, "fg_bayes", "sigma2")?.point_est;
    let w = param(&s, "fg_bayes", "w")?.point_est;
    let m = s.methods.iter().find(|m| m.method == "fg_bayes").unwrap();
    let rhat = m.max_rhat.unwrap_or(f64::NAN);
    let ok = (t - 0.011).abs() <= 0.05 && (s2 - 4.940).abs() <= 0.2 && (w - 0.495).abs() <= 0.02 && rhat < 1.05 && m.n_failed == 0;
    check(ok, format!("median averages theta {t:.4}, sigma2 {s2:.4}, w {w:.4}; max Rhat {rhat:.4}"))
}

fn c4() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for sc in [Scenario::E2, Scenario::E3, Scenario::E4] {
        let s = study(sc, 100, vec![Method::FgEcm, Method::NmEm], None)?;
        let med = |m: &str| s.kl.iter().find(|b| b.method == m).map_or(f64::NAN, |b| b.median);
        let (fg, nm) = (med("fg_ecm"), med("nm_em"));
        let rate = s.nm_nonconvergence_rate.unwrap_or(f64::NAN);
        ok &= fg < nm;
        let band = match sc {
            Scenario::E2 => Some((0.02, 0.15)),
            Scenario::E4 => Some((0.45, 0.75)),
            _ => None,
        };
        let mut note = format!("{sc}: KL fg {fg:.4} vs nm {nm:.4}, NM non-convergence {rate:.3}");
        if let Some((lo, hi)) = band {
            let inside = (lo..=hi).contains(&rate);
            ok &= inside;
            note.push_str(&format!(" (band [{lo}, {hi}] {})", if inside { "met" } else { "missed" }));
        }
        notes.push(note);
    }
    check(ok, notes.join("; "))
}

fn c5() -> Outcome {
    let path = data_path("lake_murray.csv");
    if !path.exists() {
        return Err(format!("{} is not bundled; the derived elevation series could not be obtained", path.display()));
    }
    let y = Dataset::from_path(&path).and_then(|d| d.sample("change")).map_err(|e| e.to_string())?;
    let fit = fit_ecm(&y, &EcmConfig { seed: SEED, ..Default::default() }).map_err(|e| e.to_string())?;
    let p = fit.params;
    let rel = |a: f64, b: f64| (a - b).abs() / b;
    let params_ok = (p.theta() + 0.795).abs() <= 0.15
        && rel(p.sigma1(), 5.186) <= 0.05
        && rel(p.sigma2(), 6.237) <= 0.05
        && (p.w() - 0.698).abs() <= 0.05
        && (fit.aic - 2506.028).abs() <= 2.0;
    let ks = KsConfig { n_boot: 999, refit: true, seed: SEED };
    let p_fg = ks_test_par(&y, &p, &ks).map_err(|e| e.to_string())?.p_value;
    let draws = run_mcmc_par(&y, &PriorSpec::default(), &McmcConfig { seed: SEED, ..Default::default() })
        .map_err(|e| e.to_string())?;
    let med = draws.median_params().map_err(|e| e.to_string())?;
    let p_bayes = ks_test_par(&y, &med, &KsConfig { refit: false, ..ks }).map_err(|e| e.to_string())?.p_value;
    let nm = fit_normal_mixture_em(&y, &EcmConfig { seed: SEED, ..Default::default() }).map_err(|e| e.to_string())?;
    let p_nm = ks_test_par(&y, &nm.params, &ks).map_err(|e| e.to_string())?.p_value;
    let ok = params_ok && p_fg > p_nm && p_nm < p_bayes;
    check(
        ok,
        format!(
            "ECM {:.3}/{:.3}/{:.3}/{:.3}, AIC {:.3}; KS p FG {p_fg:.3}, FG-bayes {p_bayes:.3}, NM {p_nm:.3}",
            p.theta(),
            p.sigma1(),
            p.sigma2(),
            p.w(),
            fit.aic
        ),
    )
}

fn c6() -> Outcome {
    let path = data_path("crime.csv");
    if !path.exists() {
        return Err(format!("{} is not bundled; the crime table could not be obtained", path.display()));
    }
    let ds = Dataset::from_path(&path).map_err(|e| e.to_string())?;
    let covs: Vec<String> = ["college", "poverty", "metropolitan"].iter().map(|s| s.to_string()).collect();
    let (x, y, names) = ds.design("murder", &covs).map_err(|e| e.to_string())?;
    let spec = RegressionSpec::new(x, y, names).map_err(|e| e.to_string())?;
    let modal = fit_modal_ecm(&spec, &EcmConfig { seed: SEED, ..Default::default() }).map_err(|e| e.to_string())?;
    let mean = fit_mean_normal(&spec).map_err(|e| e.to_string())?;
    let excl = |e: &fgumbel::core::regression::Estimate| e.lower > 0.0 || e.upper < 0.0;
    let (m1, m2, m3) = (&modal.estimates[1], &modal.estimates[2], &modal.estimates[3]);
    let (o1, o2, o3) = (&mean.estimates[1], &mean.estimates[2], &mean.estimates[3]);
    let ok = m1.estimate < 0.0
        && excl(m1)
        && m3.estimate > 0.0
        && excl(m3)
        && o1.estimate > 0.0
        && excl(o1)
        && (m1.estimate + 0.166).abs() <= 0.02
        && (m2.estimate - 0.216).abs() <= 0.02
        && (m3.estimate - 0.067).abs() <= 0.02
        && (o1.estimate - 0.467).abs() <= 0.01
        && (o2.estimate - 1.140).abs() <= 0.01
        && (o3.estimate - 0.068).abs() <= 0.01
        && mean.aic - modal.aic > 50.0;
    check(
        ok,
        format!(
            "modal b1..b3 {:.3}/{:.3}/{:.3}, OLS {:.3}/{:.3}/{:.3}, AIC {:.3} vs {:.3}",
            m1.estimate, m2.estimate, m3.estimate, o1.estimate, o2.estimate, o3.estimate, modal.aic, mean.aic
        ),
    )
}

// ---------------------------------------------------------------------------
// Criterion 7: property suites.

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for i in 1..m {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    s * h / 3.0
}

fn ks_uniform(mut u: Vec<f64>) -> f64 {
    u.sort_by(f64::total_cmp);
    let n = u.len() as f64;
    u.iter().enumerate().map(|(i, &v)| (v - i as f64 / n).max((i as f64 + 1.0) / n - v)).fold(0.0, f64::max)
}

fn random_params<R: Rng>(rng: &mut R) -> FgParams {
    FgParams::new(rng.random_range(-5.0..5.0), rng.random_range(0.2..5.0), rng.random_range(0.2..5.0), rng.random_range(0.0..=1.0))
        .unwrap()
}

fn prop_distribution() -> Result<(), String> {
    let mut rng = rng_stream(SEED, 70);
    for _ in 0..30 {
        let q = random_params(&mut rng);
        let s = q.sigma1().max(q.sigma2());
        let (a, b) = (q.theta() - 40.0 * s, q.theta() + 40.0 * s);
        let total = simpson(|x| fg_pdf(x, &q), a, b, 200_000);
        if (total - 1.0).abs() > 1e-6 {
            return Err(format!("normalization {total} at {q:?}"));
        }
        let peak = fg_pdf(q.theta(), &q);
        let (mut px, mut pf) = (f64::NEG_INFINITY, 0.0);
        for i in 0..=2000 {
            let x = a + (b - a) * i as f64 / 2000.0;
            let f = fg_pdf(x, &q);
            let rises_late = px >= q.theta() && f > pf;
            let falls_early = x <= q.theta() && f < pf;
            if f > peak * (1.0 + 1e-12) || rises_late || falls_early {
                return Err(format!("unimodality at {x} for {q:?}"));
            }
            (px, pf) = (x, f);
            let r = FgParams::new(-q.theta(), q.sigma2(), q.sigma1(), 1.0 - q.w()).unwrap();
            if (fg_pdf(-x, &r) - f).abs() > 1e-12 * f.max(1e-300) + 1e-300 {
                return Err(format!("reflection at {x} for {q:?}"));
            }
        }
        for u in [0.001, 0.1, 0.37, 0.5, 0.9, 0.999] {
            let x = fg_quantile(u, &q).map_err(|e| e.to_string())?;
            if (fg_cdf(x, &q) - u).abs() > 1e-9 {
                return Err(format!("quantile round trip at {u} for {q:?}"));
            }
        }
        let found = (-80..=80).any(|k| identifiability_determinant(q.theta(), q.sigma1(), q.sigma2(), q.theta(), q.theta() + 0.25 * k as f64).abs() > 1e-8);
        if !found {
            return Err(format!("no identifiability witness for {q:?}"));
        }
    }
    Ok(())
}

fn prop_ecm_ascent() -> Result<(), String> {
    let mut rng = rng_stream(SEED, 71);
    for k in 0..100 {
        let truth = FgParams::new(rng.random_range(-5.0..5.0), rng.random_range(0.3..5.0), rng.random_range(0.3..5.0), rng.random_range(0.1..0.9)).unwrap();
        let y = fg_sample(&truth, 100, SEED + k).map_err(|e| e.to_string())?;
        let mut cur = FgParams::new(rng.random_range(-5.0..5.0), rng.random_range(0.3..5.0), rng.random_range(0.3..5.0), rng.random_range(0.1..0.9)).unwrap();
        let ll = |p: &FgParams| y.values().iter().map(|&v| p.logpdf(v)).sum::<f64>();
        let mut prev = ll(&cur);
        for _ in 0..20 {
            let t = e_step(&y, &cur);
            cur = cm_step(&y, &t, &cur, 1e-10).map_err(|e| e.to_string())?.params;
            let now = ll(&cur);
            if now < prev - 1e-10 * prev.abs() {
                return Err(format!("dataset {k}: loglik fell {prev} -> {now}"));
            }
            prev = now;
        }
    }
    Ok(())
}

fn prop_w_conjugacy() -> Result<(), String> {
    let mut rng = rng_stream(SEED, 72);
    let z: Vec<bool> = (0..50).map(|i| i % 3 == 0).collect();
    let ones = z.iter().filter(|&&b| b).count() as f64;
    let beta = Beta::new(1.0 + ones, 51.0 - ones).unwrap();
    let u: Vec<f64> = (0..50_000).map(|_| beta.cdf(gibbs_w_update(&z, &mut rng))).collect();
    let d = ks_uniform(u);
    if d > 1.628 / (50_000f64).sqrt() {
        return Err(format!("w draws KS {d}"));
    }
    Ok(())
}

fn prop_prior_recovery() -> Result<(), String> {
    let y = DataSample::from_values(Vec::new()).unwrap();
    let prior = PriorSpec::default();
    let cfg = McmcConfig { n_iter: 205_000, burn_in: 5_000, thin: 100, n_chains: 2, seed: SEED, ..Default::default() };
    let d = run_mcmc(&y, &prior, &cfg).map_err(|e| e.to_string())?;
    let normal = Normal::new(prior.location_mean, prior.location_var.sqrt()).unwrap();
    let dt = ks_uniform(d.column(0).iter().map(|&x| normal.cdf(x)).collect());
    let dw = ks_uniform(d.column(3));
    let crit = 1.628 / (d.column(0).len() as f64).sqrt();
    if dt > crit || dw > crit {
        return Err(format!("prior recovery KS theta {dt:.4}, w {dw:.4}, critical {crit:.4}"));
    }
    Ok(())
}

fn prop_sandwich_vs_mc() -> Result<String, String> {
    let truth = FgParams::new(0.0, 1.0, 5.0, 0.5).unwrap();
    let reps = 300;
    let fits: Vec<Option<([f64; 4], [f64; 4])>> = with_pool(|| {
        (0..reps)
            .into_par_iter()
            .map(|r| {
                let y = fg_sample(&truth, 500, SEED + 1000 + r).ok()?;
                let fit = fit_ecm(&y, &EcmConfig { seed: r, ..Default::default() }).ok()?;
                Some((fit.params.to_array(), fit.standard_errors()?))
            })
            .collect()
    })
    .map_err(|e| e.to_string())?;
    let ok: Vec<_> = fits.into_iter().flatten().collect();
    if ok.len() < reps as usize * 9 / 10 {
        return Err(format!("only {} of {reps} fits gave standard errors", ok.len()));
    }
    let mut notes = Vec::new();
    let mut pass = true;
    for (j, name) in ["theta", "sigma1", "sigma2", "w"].iter().enumerate() {
        let est: Vec<f64> = ok.iter().map(|f| f.0[j]).collect();
        let m = est.iter().sum::<f64>() / est.len() as f64;
        let sd = (est.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (est.len() - 1) as f64).sqrt();
        let se = ok.iter().map(|f| f.1[j]).sum::<f64>() / ok.len() as f64;
        let r = se / sd;
        pass &= (r - 1.0).abs() <= 0.15;
        notes.push(format!("{name} {r:.3}"));
    }
    let text = format!("sandwich/MC sd ratios {}", notes.join(", "));
    if pass {
        Ok(text)
    } else {
        Err(text)
    }
}

fn c7() -> Outcome {
    let mut failures = Vec::new();
    let mut detail = String::new();
    for (name, r) in [
        ("distribution invariants", prop_distribution()),
        ("ECM ascent", prop_ecm_ascent()),
        ("w conjugacy", prop_w_conjugacy()),
        ("prior recovery", prop_prior_recovery()),
    ] {
        if let Err(e) = r {
            failures.push(format!("{name}: {e}"));
        }
    }
    match prop_sandwich_vs_mc() {
        Ok(t) => detail = t,
        Err(e) => failures.push(e),
    }
    if failures.is_empty() {
        Ok(format!("all property suites green; {detail}"))
    } else {
        Err(failures.join("; "))
    }
}

type Criterion = (u32, fn() -> Outcome, u64);

fn main() {
    let criteria: [Criterion; 7] = [
        (1, c1, 1),
        (2, c2, 600),
        (3, c3, 1800),
        (4, c4, 1200),
        (5, c5, 300),
        (6, c6, 60),
        (7, c7, 600),
    ];
    let only: Option<Vec<u32>> = std::env::var("FG_ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let mut failed = 0;
    for (n, f, limit) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            continue;
        }
        let start = Instant::now();
        match within_time(f(), start, Duration::from_secs(limit)) {
            Ok(d) => println!("PASS criterion {n}: {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL criterion {n}: {d}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
