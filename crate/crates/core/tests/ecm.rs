use fgumbel_core::dist::fg_sample;
use fgumbel_core::ecm::{cm_step, e_step, q_function};
use fgumbel_core::{fit_ecm, rng_stream, DataSample, EcmConfig, FgParams};
use rand::Rng;

fn p(t: f64, s1: f64, s2: f64, w: f64) -> FgParams {
    FgParams::new(t, s1, s2, w).unwrap()
}

/// Gumbel-for-maximum MLE from its profile equation
/// `sigma = mean(y) - sum(y e^{-y/sigma}) / sum(e^{-y/sigma})`, by bisection.
fn gumbel_max_mle(y: &[f64]) -> (f64, f64) {
    let n = y.len() as f64;
    let ybar = y.iter().sum::<f64>() / n;
    let lo_y = y.iter().cloned().fold(f64::INFINITY, f64::min);
    let g = |s: f64| {
        let (mut num, mut den) = (0.0, 0.0);
        for &v in y {
            let e = (-(v - lo_y) / s).exp();
            num += v * e;
            den += e;
        }
        s - ybar + num / den
    };
    let (mut a, mut b) = (1e-3, 1e3);
    assert!(g(a) < 0.0 && g(b) > 0.0);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if g(m) < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    let s = 0.5 * (a + b);
    let mean_e = y.iter().map(|&v| (-(v - lo_y) / s).exp()).sum::<f64>() / n;
    (lo_y - s * mean_e.ln(), s)
}

fn gumbel_max_loglik(y: &[f64], t: f64, s: f64) -> f64 {
    y.iter()
        .map(|&v| {
            let z = (v - t) / s;
            -s.ln() - z - (-z).exp()
        })
        .sum()
}

#[test]
fn responsibilities_match_direct_ratio() {
    let q = p(0.0, 1.0, 1.0, 0.5);
    let y = DataSample::from_values(vec![0.0, 10.0, -10.0, 2.0]).unwrap();
    let t = e_step(&y, &q);
    assert!((t[0] - 0.5).abs() < 1e-15);
    for (i, &v) in y.values().iter().enumerate() {
        // log f_min - log f_max for equal scales and weights
        let d = (v - v.exp()) - (-v - (-v).exp());
        let want = 1.0 / (1.0 + d.exp());
        assert!((t[i] - want).abs() < 1e-12, "{v}: {} vs {want}", t[i]);
    }
    let ones = e_step(&y, &p(0.0, 1.0, 1.0, 1.0));
    assert!(ones.iter().all(|&v| v == 1.0));
    let zeros = e_step(&y, &p(0.0, 1.0, 1.0, 0.0));
    assert!(zeros.iter().all(|&v| v == 0.0));
}

#[test]
fn cm_step_with_unit_responsibilities_finds_gumbel_mle() {
    let truth = p(1.0, 2.0, 1.0, 1.0);
    let y = fg_sample(&truth, 400, 3).unwrap();
    let t = vec![1.0; y.len()];
    let mut cur = p(0.0, 1.0, 1.0, 0.5);
    for _ in 0..5000 {
        let next = cm_step(&y, &t, &cur, 1e-12).unwrap().params;
        let moved = (next.theta() - cur.theta()).abs() + (next.sigma1() - cur.sigma1()).abs();
        cur = next;
        if moved < 1e-13 {
            break;
        }
    }
    let (theta, sigma) = gumbel_max_mle(y.values());
    assert_eq!(cur.w(), 1.0);
    assert!((cur.theta() - theta).abs() < 1e-6, "{} vs {theta}", cur.theta());
    assert!((cur.sigma1() - sigma).abs() < 1e-6, "{} vs {sigma}", cur.sigma1());
}

#[test]
fn cm_step_does_not_decrease_q() {
    let mut rng = rng_stream(99, 0);
    for k in 0..100 {
        let truth = p(rng.random_range(-5.0..5.0), rng.random_range(0.3..5.0), rng.random_range(0.3..5.0), rng.random_range(0.05..0.95));
        let y = fg_sample(&truth, 60, 1000 + k).unwrap();
        let cur = p(rng.random_range(-5.0..5.0), rng.random_range(0.3..5.0), rng.random_range(0.3..5.0), rng.random_range(0.05..0.95));
        let t = e_step(&y, &cur);
        let next = cm_step(&y, &t, &cur, 1e-10).unwrap().params;
        let (q0, q1) = (q_function(&y, &t, &cur), q_function(&y, &t, &next));
        assert!(q1 >= q0 - 1e-10 * q0.abs().max(1.0), "instance {k}: {q0} -> {q1}");
    }
}

#[test]
fn loglik_trace_is_nondecreasing() {
    for seed in 0..10 {
        let y = fg_sample(&p(0.0, 1.0, 5.0, 0.5), 200, seed).unwrap();
        let fit = fit_ecm(&y, &EcmConfig { seed, ..Default::default() }).unwrap();
        for w in fit.loglik_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-10 * w[0].abs(), "seed {seed}: {} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn weight_is_mean_responsibility() {
    for seed in 0..10 {
        let y = fg_sample(&p(0.0, 1.0, 1.0, 0.5), 200, seed).unwrap();
        let fit = fit_ecm(&y, &EcmConfig::default()).unwrap();
        let m = fit.responsibilities.iter().sum::<f64>() / y.len() as f64;
        assert!((m - fit.params.w()).abs() < 1e-12);
    }
}

#[test]
fn gumbel_max_truth_is_nested() {
    let y = fg_sample(&p(0.0, 1.0, 1.0, 1.0), 500, 8).unwrap();
    let fit = fit_ecm(&y, &EcmConfig::default()).unwrap();
    let (t, s) = gumbel_max_mle(y.values());
    let reduced = gumbel_max_loglik(y.values(), t, s);
    assert!(fit.loglik >= reduced - 1e-6, "{} vs {reduced}", fit.loglik);
    assert!(fit.params.w() > 0.8, "{:?}", fit.params);
}

#[test]
fn sandwich_variances_are_nonnegative() {
    let mut with_vcov = 0;
    for seed in 0..100 {
        let y = fg_sample(&p(0.0, 1.0, 5.0, 0.5), 200, 500 + seed).unwrap();
        let fit = fit_ecm(&y, &EcmConfig { seed, ..Default::default() }).unwrap();
        if let Some(v) = &fit.vcov {
            with_vcov += 1;
            for j in 0..4 {
                assert!(v[(j, j)] >= 0.0, "seed {seed}: {:?}", v);
            }
            for j in 0..4 {
                for l in 0..4 {
                    assert_eq!(v[(j, l)], v[(l, j)]);
                }
            }
        }
    }
    assert!(with_vcov >= 90, "{with_vcov} fits had a covariance");
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

#[test]
fn permutation_invariant() {
    let y = fg_sample(&p(0.0, 2.0, 5.0, 0.5), 200, 21).unwrap();
    let mut v = y.values().to_vec();
    v.reverse();
    v.rotate_left(37);
    let a = fit_ecm(&y, &EcmConfig::default()).unwrap();
    let b = fit_ecm(&DataSample::from_values(v).unwrap(), &EcmConfig::default()).unwrap();
    for (x, z) in a.params.to_array().iter().zip(b.params.to_array()) {
        assert!(close(*x, z, 1e-6), "{:?} vs {:?}", a.params, b.params);
    }
}

#[test]
fn affine_equivariant() {
    let y = fg_sample(&p(0.0, 2.0, 5.0, 0.5), 200, 22).unwrap();
    let (c, d) = (3.5, -12.0);
    let z = DataSample::from_values(y.values().iter().map(|v| c * v + d).collect()).unwrap();
    // The stopping rule is relative to |loglik|, which the transform
    // changes, so both fits are pushed close to the exact optimum.
    let cfg = EcmConfig { tol: 1e-14, max_iter: 100_000, ..Default::default() };
    let a = fit_ecm(&y, &cfg).unwrap();
    let b = fit_ecm(&z, &cfg).unwrap();
    let pa = a.params;
    let pb = b.params;
    assert!(close(pb.theta(), c * pa.theta() + d, 1e-5), "{pa:?} {pb:?}");
    assert!(close(pb.sigma1(), c * pa.sigma1(), 1e-5));
    assert!(close(pb.sigma2(), c * pa.sigma2(), 1e-5));
    assert!(close(pb.w(), pa.w(), 1e-5));
    let shift = -(y.len() as f64) * c.ln();
    assert!(close(b.loglik, a.loglik + shift, 1e-8));
}

#[test]
fn reflection_equivariant() {
    let y = fg_sample(&p(1.0, 1.0, 4.0, 0.35), 300, 23).unwrap();
    let z = DataSample::from_values(y.values().iter().map(|v| -v).collect()).unwrap();
    let a = fit_ecm(&y, &EcmConfig::default()).unwrap().params;
    let b = fit_ecm(&z, &EcmConfig::default()).unwrap().params;
    assert!(close(b.theta(), -a.theta(), 1e-5), "{a:?} {b:?}");
    assert!(close(b.sigma1(), a.sigma2(), 1e-5));
    assert!(close(b.sigma2(), a.sigma1(), 1e-5));
    assert!(close(b.w(), 1.0 - a.w(), 1e-5));
}

#[test]
fn seeded_fits_are_reproducible() {
    let y = fg_sample(&p(0.0, 1.0, 5.0, 0.5), 150, 4).unwrap();
    let cfg = EcmConfig { seed: 77, ..Default::default() };
    assert_eq!(fit_ecm(&y, &cfg).unwrap(), fit_ecm(&y, &cfg).unwrap());
}

#[test]
fn rejects_bad_input() {
    let y = DataSample::from_values(vec![1.0, 2.0, 3.0]).unwrap();
    assert!(fit_ecm(&y, &EcmConfig::default()).is_err());
    let y = fg_sample(&p(0.0, 1.0, 1.0, 0.5), 50, 1).unwrap();
    assert!(fit_ecm(&y, &EcmConfig { tol: 0.0, ..Default::default() }).is_err());
    assert!(fit_ecm(&y, &EcmConfig { n_starts: 0, ..Default::default() }).is_err());
    assert!(DataSample::from_values(vec![1.0, f64::NAN]).is_err());
}
