//! Kinetic-inductance physics of the resonator: current dependence of L_k,
//! bias tuning of the resonance, self-Kerr strength and the three-wave-mixing
//! pump strength.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitkit::{nlls_fit, FitResult, SweepRecord};
use crate::quantities::{consts::HBAR, Frequency};

/// Thin-film constants. Thickness is assumed well below the penetration depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilmParams {
    /// H per square.
    pub sheet_kinetic_inductance: f64,
    /// m
    pub thickness: f64,
    /// K
    pub critical_temperature: f64,
    /// Electron diffusion coefficient, m²/s.
    pub diffusion_coefficient: f64,
    /// Room-temperature sheet resistance, Ω per square (informational).
    #[serde(default)]
    pub sheet_resistance_rt: f64,
}

impl FilmParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("sheet_kinetic_inductance", self.sheet_kinetic_inductance),
            ("thickness", self.thickness),
            ("critical_temperature", self.critical_temperature),
            ("diffusion_coefficient", self.diffusion_coefficient),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("film.{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Lumped constants of the central resonator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonatorParams {
    /// Zero-current kinetic inductance, H.
    pub l_k0: f64,
    /// Total inductance, H.
    pub l_t: f64,
    /// Critical current I*, A.
    pub i_star: f64,
    /// Switching current, A.
    pub i_sw: f64,
    /// Exponent of the Clem relation.
    pub clem_exponent: f64,
    /// Zero-bias resonance frequency, Hz.
    pub f_r0: f64,
    /// Kinetic-inductance fraction of the total inductance.
    pub alpha: f64,
    /// Characteristic impedance, Ω.
    pub z_r: f64,
    /// Center conductor width, m. Only needed by the field-misalignment model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center_width: Option<f64>,
}

impl ResonatorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.i_sw > 0.0 && self.i_sw < self.i_star) {
            return Err(Error::config(format!(
                "require 0 < I_sw < I*, got I_sw = {} A, I* = {} A",
                self.i_sw, self.i_star
            )));
        }
        if !(self.clem_exponent > 0.0) {
            return Err(Error::config("clem_exponent must be positive"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::config(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        if !(self.l_k0 > 0.0 && self.l_k0 <= self.l_t) {
            return Err(Error::config("require 0 < L_k0 <= L_t"));
        }
        if !(self.f_r0 > 0.0 && self.z_r > 0.0) {
            return Err(Error::config("f_r0 and z_r must be positive"));
        }
        Ok(())
    }

    /// Warning text when `i_dc` exceeds the switching current. The switching
    /// current is an operational limit, not a model singularity.
    pub fn bias_warning(&self, i_dc: f64) -> Option<String> {
        (i_dc.abs() >= self.i_sw).then(|| {
            format!("|I_dc| = {:.3e} A is at or above the switching current {:.3e} A", i_dc.abs(), self.i_sw)
        })
    }

    /// The device measured in the reference characterization: 82.4 nH total
    /// inductance, I* = 345 uA, I_sw = 182 uA, Clem exponent 2.21.
    pub fn reference() -> Self {
        ResonatorParams {
            l_k0: 80.0e-9,
            l_t: 82.4e-9,
            i_star: 345e-6,
            i_sw: 182e-6,
            clem_exponent: 2.21,
            f_r0: 5.75e9,
            alpha: 0.97,
            z_r: 900.0,
            center_width: None,
        }
    }
}

/// Film plus resonator, the device description read from configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub film: Option<FilmParams>,
    pub resonator: ResonatorParams,
}

impl DeviceParams {
    pub fn validate(&self) -> Result<()> {
        if let Some(f) = &self.film {
            f.validate()?;
        }
        self.resonator.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasPoint {
    /// A
    pub i_dc: f64,
    /// Microwave current amplitude, A.
    pub i_uw: f64,
}

/// Quadratic kinetic inductance with dc and microwave currents:
/// L_k0 [1 + (I_dc + I_uw)² / I*²].
pub fn kinetic_inductance_quadratic(bias: BiasPoint, res: &ResonatorParams) -> f64 {
    let s2 = res.i_star * res.i_star;
    res.l_k0
        * (1.0 + bias.i_dc * bias.i_dc / s2 + 2.0 * bias.i_dc * bias.i_uw / s2 + bias.i_uw * bias.i_uw / s2)
}

fn clem_ratio(current: f64, i_star: f64, n: f64) -> Result<f64> {
    let u = current.abs() / i_star;
    if !(u < 1.0) {
        return Err(Error::Divergence { current, critical: i_star });
    }
    Ok((1.0 - u.powf(n)).powf(-1.0 / n))
}

/// L_k(I)/L_k(0) = [1 − (|I|/I*)^n]^(−1/n).
pub fn kinetic_inductance_ratio(current: f64, res: &ResonatorParams) -> Result<f64> {
    clem_ratio(current, res.i_star, res.clem_exponent)
}

fn tuned_frequency(current: f64, f_r0: f64, alpha: f64, i_star: f64, n: f64) -> Result<f64> {
    let ratio = clem_ratio(current, i_star, n)?;
    Ok(f_r0 / ((1.0 - alpha) + alpha * ratio).sqrt())
}

/// Resonance under dc bias. Only the kinetic fraction α of the inductance
/// follows the Clem ratio.
pub fn resonance_vs_bias(i_dc: f64, res: &ResonatorParams) -> Result<Frequency> {
    tuned_frequency(i_dc, res.f_r0, res.alpha, res.i_star, res.clem_exponent).map(Frequency::from_hz)
}

/// Self-Kerr coefficient in Hz.
///
/// Evaluated as −(3/8) ħ f_r² / (L_t I*²), i.e. the angular-frequency formula
/// with ω_r replaced by f_r and the result read in Hz. This is the convention
/// under which the characterized device gives ≈ −0.13 Hz. See
/// [`self_kerr_angular`] for the literal angular evaluation.
pub fn self_kerr(res: &ResonatorParams, f_r: Frequency) -> f64 {
    self_kerr_angular(res, f_r) / (2.0 * PI).powi(2)
}

/// −(3/8) ħ ω_r² / (L_t I*²) in rad/s.
pub fn self_kerr_angular(res: &ResonatorParams, f_r: Frequency) -> f64 {
    -(3.0 / 8.0) * HBAR * f_r.angular().powi(2) / (res.l_t * res.i_star * res.i_star)
}

/// Three-wave-mixing pump strength ξ = −¼ (I_dc I_uw / I*²) ω_r e^{−iψ_p}, rad/s.
pub fn pump_strength_3wm(bias: BiasPoint, res: &ResonatorParams, f_r: Frequency, psi_p: f64) -> Complex64 {
    let mag = 0.25 * bias.i_dc * bias.i_uw / (res.i_star * res.i_star) * f_r.angular();
    -mag * Complex64::from_polar(1.0, -psi_p)
}

/// Current product I_dc·I_uw/I*² needed for a pump strength |ξ| (rad/s).
pub fn required_current_product(xi_mag: f64, f_r: Frequency) -> f64 {
    4.0 * xi_mag / f_r.angular()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KerrDominance {
    /// |K| / κ
    pub ratio: f64,
    /// True when |K|/κ < 1e-3, i.e. four-wave mixing is negligible.
    pub three_wave_dominated: bool,
}

/// |K|/κ with both in Hz.
pub fn kerr_dominance_check(kerr_hz: f64, kappa_hz: f64) -> Result<KerrDominance> {
    if !(kappa_hz > 0.0) {
        return Err(Error::domain("kappa must be positive"));
    }
    let ratio = kerr_hz.abs() / kappa_hz;
    Ok(KerrDominance { ratio, three_wave_dominated: ratio < 1e-3 })
}

/// Result of fitting the Clem tuning law to (I_dc, f) data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClemFit {
    pub i_star: f64,
    pub i_star_sigma: f64,
    pub clem_exponent: f64,
    pub clem_exponent_sigma: f64,
    pub f_r0: f64,
    pub f_r0_sigma: f64,
    pub fit: FitResult,
}

/// Fits (I*, n, f_r0) of the bias tuning curve with α held fixed.
///
/// `sweep.x` is the bias current in A and `sweep.y` the resonance in Hz.
/// Internally the fit runs in µA and GHz.
pub fn fit_clem_tuning(sweep: &SweepRecord, alpha: f64, guess: (f64, f64)) -> Result<ClemFit> {
    sweep.validate()?;
    if sweep.len() < 4 {
        return Err(Error::Rank("Clem tuning fit needs at least four points".into()));
    }
    let max_i = sweep.x.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let scaled = SweepRecord {
        x: sweep.x.iter().map(|i| i * 1e6).collect(),
        y: sweep.y.iter().map(|f| f * 1e-9).collect(),
        sigma_y: sweep.sigma_y.as_ref().map(|s| s.iter().map(|v| v * 1e-9).collect()),
        meta: sweep.meta.clone(),
    };
    let f0_guess = scaled
        .x
        .iter()
        .zip(&scaled.y)
        .min_by(|a, b| a.0.abs().total_cmp(&b.0.abs()))
        .map(|(_, f)| *f)
        .unwrap_or(1.0);
    let model = move |i_ua: f64, p: &[f64]| {
        tuned_frequency(i_ua, p[2], alpha, p[0], p[1]).unwrap_or(f64::NAN)
    };
    let p0 = [guess.0.max(max_i * 1.05) * 1e6, guess.1, f0_guess];
    let bounds = [(max_i * 1e6 * (1.0 + 1e-9), f64::INFINITY), (0.1, 20.0), (0.0, f64::INFINITY)];
    let fit = nlls_fit(model, &scaled, &p0, Some(&bounds))?;
    Ok(ClemFit {
        i_star: fit.params[0] * 1e-6,
        i_star_sigma: fit.sigma(0) * 1e-6,
        clem_exponent: fit.params[1],
        clem_exponent_sigma: fit.sigma(1),
        f_r0: fit.params[2] * 1e9,
        f_r0_sigma: fit.sigma(2) * 1e9,
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn res() -> ResonatorParams {
        ResonatorParams { alpha: 1.0, ..ResonatorParams::reference() }
    }

    #[test]
    fn clem_ratio_values() {
        let r = res();
        assert_eq!(kinetic_inductance_ratio(0.0, &r).unwrap(), 1.0);
        // 30-digit reference for [1 - 0.5^2.21]^(-1/2.21)
        let v = kinetic_inductance_ratio(0.5 * r.i_star, &r).unwrap();
        assert_relative_eq!(v, 1.116_489_013_558_746_3, max_relative = 1e-13);
        assert!(matches!(kinetic_inductance_ratio(r.i_star, &r), Err(Error::Divergence { .. })));
        assert!(kinetic_inductance_ratio(-1.5 * r.i_star, &r).is_err());
    }

    #[test]
    fn tuning_values() {
        let r = res();
        assert_eq!(resonance_vs_bias(0.0, &r).unwrap().hz(), r.f_r0);
        let f = resonance_vs_bias(0.5 * r.i_star, &r).unwrap().hz();
        assert_relative_eq!(f / r.f_r0, 0.946_395_731_962_838_7, max_relative = 1e-13);
    }

    #[test]
    fn quadratic_inductance() {
        let r = res();
        let b = BiasPoint { i_dc: 80e-6, i_uw: 5e-6 };
        let expected = r.l_k0 * (1.0 + (85e-6f64 / r.i_star).powi(2));
        assert_relative_eq!(kinetic_inductance_quadratic(b, &r), expected, max_relative = 1e-14);
    }

    #[test]
    fn self_kerr_reference_device() {
        let r = ResonatorParams::reference();
        let k = self_kerr(&r, Frequency::from_hz(5.6735e9));
        assert_relative_eq!(k, -0.129_790_870_537_435_76, max_relative = 1e-10);
        assert!((k + 0.133).abs() / 0.133 < 0.03);
        let k_ang = self_kerr_angular(&r, Frequency::from_hz(5.6735e9));
        assert_relative_eq!(k_ang, -5.123_938_188_309_981, max_relative = 1e-10);
    }

    #[test]
    fn self_kerr_scaling() {
        let r = ResonatorParams::reference();
        let f = Frequency::from_hz(5.0e9);
        let k1 = self_kerr(&r, f);
        let k2 = self_kerr(&r, Frequency::from_hz(10.0e9));
        assert_relative_eq!(k2, 4.0 * k1, max_relative = 1e-14);
        let big = ResonatorParams { i_star: 1e6, ..r };
        assert_relative_eq!(self_kerr(&big, f), k1 * (r.i_star / 1e6).powi(2), max_relative = 1e-12);
    }

    #[test]
    fn pump_strength() {
        let r = ResonatorParams::reference();
        let f = Frequency::from_hz(5.6735e9);
        assert_eq!(pump_strength_3wm(BiasPoint { i_dc: 0.0, i_uw: 1e-5 }, &r, f, 0.3).norm(), 0.0);
        let b = BiasPoint { i_dc: 80e-6, i_uw: 7e-6 };
        let x0 = pump_strength_3wm(b, &r, f, 0.0);
        let xp = pump_strength_3wm(b, &r, f, PI);
        assert!(x0.re < 0.0);
        assert!((xp + x0).norm() < 1e-9 * x0.norm());
        let product = required_current_product(2.0 * PI * 19.8e6, f);
        assert_relative_eq!(product, 0.013_959_636_908_433_947, max_relative = 1e-12);
        let i_uw = product * r.i_star * r.i_star / 80e-6;
        let xi = pump_strength_3wm(BiasPoint { i_dc: 80e-6, i_uw }, &r, f, 1.1);
        assert_relative_eq!(xi.norm(), 2.0 * PI * 19.8e6, max_relative = 1e-12);
    }

    #[test]
    fn kerr_dominance() {
        let d = kerr_dominance_check(-0.133, 19.8e6).unwrap();
        assert_relative_eq!(d.ratio, 6.717_171_717_171_717e-9, max_relative = 1e-12);
        assert!(d.three_wave_dominated);
        assert!(!kerr_dominance_check(5.0, 5.0).unwrap().three_wave_dominated);
        let z = kerr_dominance_check(0.0, 1.0).unwrap();
        assert_eq!(z.ratio, 0.0);
        assert!(z.three_wave_dominated);
        assert!(kerr_dominance_check(1.0, 0.0).is_err());
    }

    #[test]
    fn validation_and_warnings() {
        let r = ResonatorParams::reference();
        assert!(r.validate().is_ok());
        assert!(ResonatorParams { i_sw: 400e-6, ..r }.validate().is_err());
        assert!(ResonatorParams { alpha: 0.0, ..r }.validate().is_err());
        assert!(ResonatorParams { l_k0: 1e-6, ..r }.validate().is_err());
        assert!(r.bias_warning(80e-6).is_none());
        assert!(r.bias_warning(-190e-6).is_some());
    }

    fn synthetic_tuning(r: &ResonatorParams) -> SweepRecord {
        let x: Vec<f64> = (-20..=20).map(|k| k as f64 * 9e-6).collect();
        let y = x.iter().map(|i| resonance_vs_bias(*i, r).unwrap().hz()).collect();
        SweepRecord::new(x, y).unwrap()
    }

    #[test]
    fn clem_fit_recovers_reference_device() {
        let r = ResonatorParams::reference();
        let fit = fit_clem_tuning(&synthetic_tuning(&r), r.alpha, (300e-6, 2.0)).unwrap();
        assert!(((fit.i_star - 345e-6) / 345e-6).abs() < 1e-6, "{}", fit.i_star);
        assert!(((fit.clem_exponent - 2.21) / 2.21).abs() < 1e-6);
        assert!(((fit.f_r0 - r.f_r0) / r.f_r0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn ratio_is_even_and_increasing(u in 0.0f64..0.98, du in 1e-4f64..0.01) {
            let r = res();
            let a = kinetic_inductance_ratio(u * r.i_star, &r).unwrap();
            let b = kinetic_inductance_ratio(-u * r.i_star, &r).unwrap();
            prop_assert_eq!(a, b);
            prop_assume!(u + du < 0.999);
            let c = kinetic_inductance_ratio((u + du) * r.i_star, &r).unwrap();
            prop_assert!(c > a);
            prop_assert!(a >= 1.0);
        }

        #[test]
        fn tuning_even_decreasing_and_flat_without_kinetic_fraction(u in 0.0f64..0.95, du in 1e-4f64..0.01, alpha in 0.05f64..1.0) {
            let r = ResonatorParams { alpha, ..res() };
            let f1 = resonance_vs_bias(u * r.i_star, &r).unwrap().hz();
            prop_assert_eq!(f1, resonance_vs_bias(-u * r.i_star, &r).unwrap().hz());
            let f2 = resonance_vs_bias((u + du) * r.i_star, &r).unwrap().hz();
            prop_assert!(f2 < f1);
            let flat = ResonatorParams { alpha: 0.0, ..res() };
            prop_assert_eq!(resonance_vs_bias(u * r.i_star, &flat).unwrap().hz(), flat.f_r0);
        }

        #[test]
        fn xi_bilinear_and_phase_invariant(i_dc in 1e-6f64..1.8e-4, i_uw in 1e-7f64..1e-4, k in 0.1f64..3.0, psi in 0.0f64..6.3) {
            let r = ResonatorParams::reference();
            let f = Frequency::from_hz(5.6735e9);
            let base = pump_strength_3wm(BiasPoint { i_dc, i_uw }, &r, f, 0.0).norm();
            let scaled_dc = pump_strength_3wm(BiasPoint { i_dc: k * i_dc, i_uw }, &r, f, psi).norm();
            let scaled_uw = pump_strength_3wm(BiasPoint { i_dc, i_uw: k * i_uw }, &r, f, psi).norm();
            prop_assert!((scaled_dc - k * base).abs() <= 1e-12 * k * base);
            prop_assert!((scaled_uw - k * base).abs() <= 1e-12 * k * base);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn clem_round_trip(i_star in 250e-6f64..450e-6, n in 1.5f64..3.5) {
            let r = ResonatorParams { i_star, clem_exponent: n, i_sw: 0.5 * i_star, ..ResonatorParams::reference() };
            let x: Vec<f64> = (-20..=20).map(|k| k as f64 * 0.045 * i_star).collect();
            let y = x.iter().map(|i| resonance_vs_bias(*i, &r).unwrap().hz()).collect();
            let fit = fit_clem_tuning(&SweepRecord::new(x, y).unwrap(), r.alpha, (0.8 * i_star, 2.0)).unwrap();
            prop_assert!(((fit.i_star - i_star) / i_star).abs() < 1e-6);
            prop_assert!(((fit.clem_exponent - n) / n).abs() < 1e-6);
        }
    }
}
