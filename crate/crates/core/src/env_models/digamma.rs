//! Complex digamma function Ψ(z) = Γ′(z)/Γ(z).

use num_complex::Complex64;

use crate::error::{Error, Result};

/// B₂ₖ for k = 1..7.
const BERNOULLI: [f64; 7] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
];

/// Real part threshold above which the asymptotic series is used.
const ASYMPTOTIC_RE: f64 = 10.0;

/// Ψ(z) for complex `z`, by upward recurrence Ψ(z) = Ψ(z+1) − 1/z until
/// Re z ≥ 10, then the Stirling series through B₁₄.
///
/// Non-positive integers are poles and give a domain error.
pub fn complex_digamma(z: Complex64) -> Result<Complex64> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::domain(format!("digamma argument must be finite, got {z}")));
    }
    if z.im == 0.0 && z.re <= 0.0 && z.re.fract() == 0.0 {
        return Err(Error::domain(format!("digamma pole at z = {}", z.re)));
    }
    let mut z = z;
    let mut acc = Complex64::new(0.0, 0.0);
    while z.re < ASYMPTOTIC_RE {
        acc -= z.inv();
        z += 1.0;
    }
    let inv = z.inv();
    let inv2 = inv * inv;
    let mut series = Complex64::new(0.0, 0.0);
    let mut power = inv2;
    for (k, b) in BERNOULLI.iter().enumerate() {
        series += power * (*b / (2.0 * (k + 1) as f64));
        power *= inv2;
    }
    Ok(acc + z.ln() - 0.5 * inv - series)
}

/// Real digamma.
pub fn digamma(x: f64) -> Result<f64> {
    complex_digamma(Complex64::new(x, 0.0)).map(|z| z.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantities::consts::EULER_GAMMA;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{LN_2, PI};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol * b.norm().max(1.0)
    }

    #[test]
    fn closed_forms() {
        assert!((digamma(1.0).unwrap() + EULER_GAMMA).abs() < 1e-12);
        assert!((digamma(0.5).unwrap() + EULER_GAMMA + 2.0 * LN_2).abs() < 1e-12);
        assert_relative_eq!(digamma(3.0).unwrap(), 1.5 - EULER_GAMMA, max_relative = 1e-13);
    }

    #[test]
    #[allow(clippy::excessive_precision)]
    fn reference_values() {
        // 30-digit reference evaluations
        let cases = [
            (c(0.3, 0.7), c(-0.447_207_920_299_561_17, 1.891_810_855_218_526_7)),
            (c(-2.5, 0.1), c(1.103_697_377_778_808_4, 0.922_699_291_458_598_9)),
            (c(10.0, -3.0), c(2.299_164_384_354_020_7, -0.305_638_460_692_038_3)),
            (c(0.01, 0.02), c(-20.560_417_536_079_258, 40.032_415_938_884_38)),
            (c(25.0, 40.0), c(3.848_154_530_804_076_5, 1.021_219_442_605_203)),
            (c(-7.3, -2.2), c(2.092_943_287_332_017_9, -2.867_010_881_703_018_9)),
        ];
        for (z, want) in cases {
            let got = complex_digamma(z).unwrap();
            assert!(close(got, want, 1e-12), "psi({z}) = {got}, want {want}");
        }
    }

    #[test]
    fn half_line_asymptote() {
        let d = complex_digamma(c(0.5, 50.0)).unwrap().re - 50f64.ln();
        assert!(d.abs() < 1e-4);
        assert!((d + 1.666_78e-5).abs() < 1e-9);
    }

    #[test]
    fn poles() {
        for x in [0.0, -1.0, -7.0] {
            assert!(matches!(complex_digamma(c(x, 0.0)), Err(Error::Domain(_))));
        }
        assert!(complex_digamma(c(-1.0, 1e-3)).is_ok());
        assert!(complex_digamma(c(f64::NAN, 0.0)).is_err());
    }

    fn tan_cot(z: Complex64) -> Complex64 {
        let w = PI * z;
        w.cos() / w.sin()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn recurrence(r in 0.1f64..100.0, phase in -3.1f64..3.1) {
            let z = Complex64::from_polar(r, phase);
            prop_assume!(z.im.abs() > 1e-3 || z.re > 0.0);
            let lhs = complex_digamma(z + 1.0).unwrap();
            let rhs = complex_digamma(z).unwrap() + z.inv();
            prop_assert!(close(lhs, rhs, 1e-12), "{lhs} vs {rhs}");
        }

        #[test]
        fn reflection(re in -5.0f64..5.0, im in 0.05f64..5.0, sign in proptest::bool::ANY) {
            let z = c(re, if sign { im } else { -im });
            let lhs = complex_digamma(1.0 - z).unwrap() - complex_digamma(z).unwrap();
            let rhs = PI * tan_cot(z);
            prop_assert!(close(lhs, rhs, 1e-10), "{lhs} vs {rhs}");
        }

        #[test]
        fn conjugate_symmetry(re in -5.0f64..20.0, im in 0.01f64..20.0) {
            let z = c(re, im);
            let a = complex_digamma(z.conj()).unwrap();
            let b = complex_digamma(z).unwrap().conj();
            prop_assert!(close(a, b, 1e-14));
        }
    }
}
