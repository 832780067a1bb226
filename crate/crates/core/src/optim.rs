//! One-dimensional root finding and maximization.

use libm::fabs;

/// Brent's method for a root of `f` in `[a, b]`. Requires a sign change.
/// Stops when `|f(x)| <= ftol` or the bracket shrinks to `xtol`.
pub fn brent_root<F: FnMut(f64) -> f64>(
    mut f: F,
    mut a: f64,
    mut b: f64,
    ftol: f64,
    xtol: f64,
    max_iter: usize,
) -> Option<f64> {
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() {
        return None;
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fabs(fc) < fabs(fb) {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * fabs(b) + 0.5 * xtol;
        let xm = 0.5 * (c - b);
        if fabs(fb) <= ftol || fabs(xm) <= tol1 {
            return Some(b);
        }
        if fabs(e) >= tol1 && fabs(fa) > fabs(fb) {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = fabs(p);
            let min1 = 3.0 * xm * q - fabs(tol1 * q);
            let min2 = fabs(e * q);
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if fabs(d) > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
    }
    Some(b)
}

/// Golden-section search for the maximum of a unimodal `f` on `[a, b]`.
pub fn golden_section_max<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if fabs(b - a) <= tol * (1.0 + fabs(a) + fabs(b)) {
            break;
        }
        if fc >= fd || fd.is_nan() {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Outcome of [`newton_maximize`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarMax {
    pub x: f64,
    pub value: f64,
    pub iterations: usize,
    /// Final iterate sits on `lo` or `hi`.
    pub at_bound: bool,
}

/// Safeguarded Newton–Raphson ascent on `[lo, hi]`.
///
/// `f` returns `(value, first derivative, second derivative)`. A step is
/// only accepted if it does not decrease the objective; Newton steps are
/// halved until they do, non-concave points take a bounded gradient step,
/// and golden-section search is the fallback when no ascent step is found.
pub fn newton_maximize<F: FnMut(f64) -> (f64, f64, f64)>(
    mut f: F,
    x0: f64,
    lo: f64,
    hi: f64,
    max_step: f64,
    tol: f64,
    max_iter: usize,
) -> ScalarMax {
    let clamp = |x: f64| x.max(lo).min(hi);
    let mut x = clamp(x0);
    let (mut v, mut g, mut h) = f(x);
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        if !g.is_finite() {
            break;
        }
        let mut step = if h < 0.0 && h.is_finite() { -g / h } else { g.signum() * fabs(g).min(1.0) };
        if fabs(step) > max_step {
            step = max_step.copysign(step);
        }
        if fabs(step) <= tol * (1.0 + fabs(x)) {
            break;
        }
        let mut accepted = None;
        for _ in 0..60 {
            let xn = clamp(x + step);
            if xn == x {
                break;
            }
            let (vn, gn, hn) = f(xn);
            if vn.is_finite() && vn >= v {
                accepted = Some((xn, vn, gn, hn));
                break;
            }
            step *= 0.5;
        }
        let (xn, vn, gn, hn) = match accepted {
            Some(t) => t,
            None => {
                let span = max_step.min(hi - lo);
                let (a, b) = if g > 0.0 { (x, clamp(x + span)) } else { (clamp(x - span), x) };
                if b - a <= tol * (1.0 + fabs(x)) {
                    break;
                }
                let (xg, vg) = golden_section_max(|t| f(t).0, a, b, tol);
                if vg.is_finite() && vg > v {
                    let (vv, gg, hh) = f(xg);
                    (xg, vv, gg, hh)
                } else {
                    break;
                }
            }
        };
        let moved = fabs(xn - x);
        x = xn;
        v = vn;
        g = gn;
        h = hn;
        if moved <= tol * (1.0 + fabs(x)) {
            break;
        }
    }
    ScalarMax { x, value: v, iterations, at_bound: x <= lo || x >= hi }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brent_finds_cubic_root() {
        let r = brent_root(|x| x * x * x - 2.0, 0.0, 2.0, 1e-14, 1e-15, 200).unwrap();
        assert!((r - libm::cbrt(2.0)).abs() < 1e-12);
        assert!(brent_root(|x| x * x + 1.0, -1.0, 1.0, 1e-12, 1e-12, 100).is_none());
    }

    #[test]
    fn newton_on_concave_quadratic() {
        let r = newton_maximize(|x| (-(x - 3.0) * (x - 3.0), -2.0 * (x - 3.0), -2.0), 0.0, -10.0, 10.0, 100.0, 1e-12, 50);
        assert!((r.x - 3.0).abs() < 1e-12);
        assert!(!r.at_bound);
    }

    #[test]
    fn newton_handles_nonconcave_start() {
        // f = -x^4 + x^2 has maxima at +-1/sqrt(2); from 0.1, h > 0 initially.
        let f = |x: f64| (-x.powi(4) + x * x, -4.0 * x.powi(3) + 2.0 * x, -12.0 * x * x + 2.0);
        let r = newton_maximize(f, 0.1, -5.0, 5.0, 1.0, 1e-12, 100);
        assert!((r.x - libm::sqrt(0.5)).abs() < 1e-8, "{r:?}");
    }

    #[test]
    fn newton_respects_bounds() {
        let r = newton_maximize(|x| (x, 1.0, 0.0), 0.0, -1.0, 2.0, 0.5, 1e-12, 100);
        assert_eq!(r.x, 2.0);
        assert!(r.at_bound);
    }

    #[test]
    fn golden_section_quadratic() {
        let (x, _) = golden_section_max(|x| -(x - 0.3) * (x - 0.3), -1.0, 1.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-8);
    }
}
