//! Closed-form solutions used to check the solver.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Sampled radial profile `Ψ(r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
}

impl RadialProfile {
    pub fn sample(radii: Vec<f64>, f: impl Fn(f64) -> Result<f64>) -> Result<Self> {
        if radii.first().is_some_and(|&r| r <= 0.0) || radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("radii must be positive and strictly increasing".into()));
        }
        let values = radii.iter().map(|&r| f(r)).collect::<Result<_>>()?;
        Ok(RadialProfile { radii, values })
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

/// Free-space fundamental solution of the 2D Laplacian, `-log(r) / 2π`.
pub fn laplace_fundamental_2d(r: f64) -> Result<f64> {
    positive("r", r)?;
    Ok(-r.ln() / (2.0 * PI))
}

/// Modified Bessel function of the second kind, order zero.
pub fn bessel_k0(x: f64) -> Result<f64> {
    positive("x", x)?;
    Ok(if x <= 2.0 { k0_series(x) } else { k0_continued_fraction(x) })
}

/// `K₀(x) = -(ln(x/2) + γ) I₀(x) + Σ_{k≥1} H_k (x²/4)^k / (k!)²`
fn k0_series(x: f64) -> f64 {
    let y = x * x / 4.0;
    let mut term = 1.0;
    let mut i0 = 1.0;
    let mut tail = 0.0;
    let mut harmonic = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        term *= y / (kf * kf);
        harmonic += 1.0 / kf;
        i0 += term;
        tail += harmonic * term;
        if term < 1e-18 * i0 {
            break;
        }
    }
    -((x / 2.0).ln() + EULER_GAMMA) * i0 + tail
}

/// Steed's continued fraction for `K₀`, accurate for `x ≳ 2`.
fn k0_continued_fraction(x: f64) -> f64 {
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut delh = d;
    let (mut q1, mut q2) = (0.0, 1.0);
    let a1 = 0.25;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..10_000 {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < 1e-17 {
            break;
        }
    }
    (PI / (2.0 * x)).sqrt() * (-x).exp() / s
}

/// Screening wavenumber of `½σΔΨ = (α/λ)Ψ`.
pub fn screening_rate(alpha: f64, lambda: f64, sigma: f64) -> f64 {
    (2.0 * alpha / (lambda * sigma)).sqrt()
}

/// Fundamental solution of `½σΔΨ = (α/λ)Ψ` in 2D: `K₀(κr) / (2π σ/2)`.
pub fn screened_fundamental_2d(r: f64, alpha: f64, lambda: f64, sigma: f64) -> Result<f64> {
    positive("r", r)?;
    positive("alpha", alpha)?;
    positive("lambda", lambda)?;
    positive("sigma", sigma)?;
    let kappa = screening_rate(alpha, lambda, sigma);
    Ok(bessel_k0(kappa * r)? / (PI * sigma))
}

/// Solution of `½σΨ'' = (α/λ)Ψ` on `[0, 1]` with `Ψ(0) = Ψ(1) = 1`.
pub fn screened_1d_profile(x: f64, alpha: f64, lambda: f64, sigma: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidParameter(format!("x must lie in [0, 1], got {x}")));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!("alpha must be >= 0, got {alpha}")));
    }
    positive("lambda", lambda)?;
    positive("sigma", sigma)?;
    let k = screening_rate(alpha, lambda, sigma);
    Ok((k * (x - 0.5)).cosh() / (k / 2.0).cosh())
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values of K₀(x) = ∫₀^∞ exp(-x cosh t) dt, cross-checked
    // against the quadrature oracle in tests/support.
    const K0_REF: [(f64, f64); 6] = [
        (0.001, 7.023688800562381),
        (0.1, 2.427069024702017),
        (1.0, 0.42102443824070834),
        (2.0, 0.11389387274953344),
        (10.0, 1.7780062316167652e-5),
        (50.0, 3.4101677497894955e-23),
    ];

    #[test]
    fn k0_reference_values() {
        for (x, want) in K0_REF {
            let got = bessel_k0(x).unwrap();
            assert!(((got - want) / want).abs() < 1e-10, "K0({x}) = {got}, want {want}");
        }
        assert!(bessel_k0(0.0).is_err());
        assert!(bessel_k0(-1.0).is_err());
    }

    #[test]
    fn k0_branches_agree_at_switchover() {
        for x in [1.8, 1.95, 2.0, 2.05, 2.2] {
            let a = k0_series(x);
            let b = k0_continued_fraction(x);
            assert!(((a - b) / b).abs() < 1e-12, "x = {x}: {a} vs {b}");
        }
    }

    #[test]
    fn k0_strictly_decreasing() {
        let mut prev = f64::INFINITY;
        for k in 0..2000 {
            let x = 1e-3 * 1.0055f64.powi(k);
            let v = bessel_k0(x).unwrap();
            assert!(v < prev, "not decreasing at {x}");
            prev = v;
        }
    }

    #[test]
    fn laplace_fundamental_values() {
        assert_eq!(laplace_fundamental_2d(1.0).unwrap(), 0.0);
        assert!((laplace_fundamental_2d((-2.0 * PI).exp()).unwrap() - 1.0).abs() < 1e-15);
        assert!((laplace_fundamental_2d(2.0).unwrap() + 0.1103178).abs() < 1e-7);
        assert!(laplace_fundamental_2d(0.0).is_err());
    }

    #[test]
    fn screened_fundamental_values() {
        let v = screened_fundamental_2d(1.0, 1.0, 1.0, 2.0).unwrap();
        assert!((v - 0.42102443824070834 / (2.0 * PI)).abs() < 1e-15);
        assert!((v - 0.0670081).abs() < 1e-7);
        for &(a, l, s) in &[(1.0, 1.0, 2.0), (100.0, 0.04, 2.0), (0.02, 0.1, 5.0)] {
            assert!(screened_fundamental_2d(5.0, a, l, s).unwrap() < screened_fundamental_2d(1.0, a, l, s).unwrap());
        }
        assert!(screened_fundamental_2d(1.0, 0.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn weak_screening_approaches_logarithm() {
        // K₀(z) ≈ -ln(z/2) - γ for small z, so differences in r match the
        // Laplace fundamental solution scaled by 2/σ.
        let (alpha, lambda, sigma) = (1e-8, 1.0, 2.0);
        let d_screened = screened_fundamental_2d(1.0, alpha, lambda, sigma).unwrap()
            - screened_fundamental_2d(2.0, alpha, lambda, sigma).unwrap();
        let d_laplace = laplace_fundamental_2d(1.0).unwrap() - laplace_fundamental_2d(2.0).unwrap();
        assert!((d_screened / d_laplace - 2.0 / sigma).abs() < 1e-6);
    }

    #[test]
    fn screened_profile_solves_radial_equation() {
        let (alpha, lambda, sigma) = (1.0, 1.0, 2.0);
        let k2 = 2.0 * alpha / (lambda * sigma);
        let h = 1e-3;
        let f = |r: f64| screened_fundamental_2d(r, alpha, lambda, sigma).unwrap();
        for i in 0..=25 {
            let r = 0.5 + 0.1 * i as f64;
            let lap = (f(r + h) - 2.0 * f(r) + f(r - h)) / (h * h) + (f(r + h) - f(r - h)) / (2.0 * h * r);
            assert!(((lap - k2 * f(r)) / (k2 * f(r))).abs() < 1e-4, "r = {r}");
        }
    }

    #[test]
    fn profile_examples() {
        let (a, l, s) = (1.0, 1.0, 2.0);
        assert_eq!(screened_1d_profile(0.0, a, l, s).unwrap(), 1.0);
        let k = screening_rate(a, l, s);
        assert!((screened_1d_profile(0.5, a, l, s).unwrap() - 1.0 / (k / 2.0).cosh()).abs() < 1e-15);
        for i in 0..=10 {
            assert_eq!(screened_1d_profile(0.1 * i as f64, 0.0, l, s).unwrap(), 1.0);
        }
        assert!(screened_1d_profile(1.5, a, l, s).is_err());
        for i in 0..=50 {
            let x = 0.01 * i as f64;
            let left = screened_1d_profile(x, 100.0, 0.04, 2.0).unwrap();
            let right = screened_1d_profile(1.0 - x, 100.0, 0.04, 2.0).unwrap();
            assert!((left - right).abs() < 1e-14);
        }
    }

    #[test]
    fn radial_profile_validates() {
        assert!(RadialProfile::sample(vec![0.5, 0.4], laplace_fundamental_2d).is_err());
        let p = RadialProfile::sample(vec![0.5, 1.0, 2.0], laplace_fundamental_2d).unwrap();
        assert_eq!(p.values[1], 0.0);
    }
}
