//! Beta and standard-normal distribution functions.

use statrs::function::erf::{erfc, erfc_inv};
use statrs::function::gamma::ln_gamma;

use super::UncertaintyError;

const CF_MAX_ITER: usize = 500;
const CF_EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;

/// Continued fraction for I_x(a, b), evaluated with the modified Lentz method.
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            break;
        }
    }
    h
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Regularized incomplete beta function I_x(a, b) for x in [0, 1].
pub fn regularized_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let front = (a * x.ln() + b * (1.0 - x).ln() - ln_beta(a, b)).exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Log of the Beta(a, b) density at x in (0, 1).
fn ln_beta_pdf(a: f64, b: f64, x: f64) -> f64 {
    (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() - ln_beta(a, b)
}

/// Inverse of [`regularized_beta`] in x. Newton steps are kept inside a
/// shrinking bracket and replaced by bisection whenever they leave it.
pub fn inverse_regularized_beta(a: f64, b: f64, p: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut x = a / (a + b);
    for _ in 0..200 {
        let f = regularized_beta(a, b, x) - p;
        if f == 0.0 {
            return x;
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let step = f / ln_beta_pdf(a, b, x).exp();
        let mut next = x - step;
        if !(next > lo && next < hi) || !step.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x.max(1e-300) || hi - lo <= f64::EPSILON * hi {
            return next;
        }
        x = next;
    }
    x
}

/// Standard normal CDF.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Standard normal quantile for p in (0, 1).
pub fn std_normal_inv(p: f64) -> Result<f64, UncertaintyError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(UncertaintyError::Domain(format!(
            "normal quantile needs p in (0,1), got {p}"
        )));
    }
    Ok(-std::f64::consts::SQRT_2 * erfc_inv(2.0 * p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_and_symmetric_cases() {
        assert!((regularized_beta(1.0, 1.0, 0.3) - 0.3).abs() < 1e-15);
        assert!((regularized_beta(2.0, 2.0, 0.5) - 0.5).abs() < 1e-13);
        assert!((inverse_regularized_beta(1.0, 1.0, 0.42) - 0.42).abs() < 1e-14);
        assert_eq!(inverse_regularized_beta(3.78, 1.62, 0.0), 0.0);
        assert_eq!(inverse_regularized_beta(3.78, 1.62, 1.0), 1.0);
    }

    #[test]
    fn closed_forms() {
        // I_x(a, 1) = x^a and I_x(1, b) = 1 - (1-x)^b
        for &x in &[0.01, 0.2, 0.5, 0.77, 0.999] {
            for &a in &[0.5, 2.0, 5.67] {
                assert!((regularized_beta(a, 1.0, x) - x.powf(a)).abs() < 1e-13);
                assert!((regularized_beta(1.0, a, x) - (1.0 - (1.0 - x).powf(a))).abs() < 1e-13);
            }
        }
        // Beta(2,3): I_x = 6x^2 - 8x^3 + 3x^4
        for &x in &[0.1_f64, 0.35, 0.6, 0.9] {
            let exact = 6.0 * x * x - 8.0 * x.powi(3) + 3.0 * x.powi(4);
            assert!((regularized_beta(2.0, 3.0, x) - exact).abs() < 1e-14);
        }
    }

    #[test]
    fn agrees_with_statrs() {
        for &(a, b) in &[(3.78, 1.62), (5.67, 6.48), (0.5, 0.5), (2.0, 5.67)] {
            for k in 1..100 {
                let x = k as f64 / 100.0;
                let ours = regularized_beta(a, b, x);
                let theirs = statrs::function::beta::beta_reg(a, b, x);
                assert!((ours - theirs).abs() < 1e-12, "{a} {b} {x}: {ours} {theirs}");
            }
        }
    }

    #[test]
    fn inverse_round_trip_grid() {
        // Where the density is tiny, p = I_x carries only ~1e-16 absolute
        // precision and no inverse can recover x to better than eps / pdf.
        let params = [0.5, 1.0, 2.0, 5.67];
        let mut conditioned = 0;
        for &a in &params {
            for &b in &params {
                for k in 1..=999 {
                    let x = k as f64 / 1000.0;
                    let back = inverse_regularized_beta(a, b, regularized_beta(a, b, x));
                    let limit = 4.0 * f64::EPSILON / ln_beta_pdf(a, b, x).exp();
                    if limit < 1e-9 {
                        assert!((back - x).abs() < 1e-8, "{a} {b} {x} -> {back}");
                    } else {
                        conditioned += 1;
                        assert!((back - x).abs() < 1e-8 + limit, "{a} {b} {x} -> {back}");
                    }
                }
            }
        }
        assert!(conditioned < 800, "{conditioned}");
    }

    #[test]
    fn inverse_hits_target_probability() {
        let x = inverse_regularized_beta(5.67, 6.48, 0.995);
        assert!((regularized_beta(5.67, 6.48, x) - 0.995).abs() <= 1e-10);
        for k in 1..200 {
            let p = k as f64 / 200.0;
            for &(a, b) in &[(3.78, 1.62), (0.5, 2.0)] {
                let x = inverse_regularized_beta(a, b, p);
                assert!((regularized_beta(a, b, x) - p).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn normal_values() {
        assert_eq!(std_normal_cdf(0.0), 0.5);
        assert!((std_normal_cdf(1.959964) - 0.975).abs() < 1e-6);
        for &z in &[0.1, 0.7, 1.3, 2.5, 4.0] {
            assert!((std_normal_cdf(-z) - (1.0 - std_normal_cdf(z))).abs() < 1e-15);
        }
        for k in 1..1000 {
            let p = k as f64 / 1000.0;
            let z = std_normal_inv(p).unwrap();
            assert!((std_normal_cdf(z) - p).abs() < 1e-8);
        }
        assert!(std_normal_inv(0.0).is_err());
        assert!(std_normal_inv(1.0).is_err());
    }

    #[test]
    fn normal_cdf_against_series() {
        // Phi(z) = 1/2 + phi(z) * sum z^(2k+1) / (1*3*...*(2k+1)), exact to
        // double precision for moderate |z|
        for &z in &[-3.0, -1.1, 0.25, 1.959964, 2.7] {
            let mut term: f64 = z;
            let mut sum = z;
            for k in 1..200 {
                term *= z * z / (2 * k + 1) as f64;
                sum += term;
            }
            let pdf = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
            let series = 0.5 + pdf * sum;
            assert!((std_normal_cdf(z) - series).abs() < 1e-10, "{z}");
        }
    }
}
