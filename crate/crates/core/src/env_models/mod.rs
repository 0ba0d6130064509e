//! Environmental response of the resonator: gap suppression and frequency
//! shift in a parallel magnetic field, and the temperature-dependent shift
//! from two-level systems and thermal kinetic inductance.

mod digamma;

pub use digamma::{complex_digamma, digamma};

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitkit::{proportional_fit, SweepRecord};
use crate::quantities::consts::{BCS_GAP_RATIO, E_CHARGE, H, HBAR, K_B};

/// Thin film in a parallel field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldModel {
    /// Electron diffusion coefficient, m²/s.
    pub diffusion: f64,
    /// Film thickness, m.
    pub thickness: f64,
    /// K
    pub t_c: f64,
    /// Centre conductor width, m. Needed only to resolve misalignment.
    #[serde(default)]
    pub w_r: Option<f64>,
    /// Misalignment between field and film plane, rad.
    #[serde(default)]
    pub theta_b: f64,
    /// Critical parallel field, T.
    #[serde(default)]
    pub b_c_parallel: Option<f64>,
    /// Zero-field gap, J. Defaults to 1.764 k_B T_C.
    #[serde(default)]
    pub delta_0: Option<f64>,
}

impl FieldModel {
    /// NbN: D = 0.5 cm²/s, 13 nm thick, T_C = 5.6 K, aligned field.
    pub fn reference() -> Self {
        FieldModel { diffusion: 0.5e-4, thickness: 13e-9, t_c: 5.6, w_r: None, theta_b: 0.0, b_c_parallel: None, delta_0: None }
    }

    pub fn gap(&self) -> f64 {
        self.delta_0.unwrap_or(BCS_GAP_RATIO * K_B * self.t_c)
    }

    pub fn validate(&self) -> Result<Vec<String>> {
        for (name, v) in [("diffusion", self.diffusion), ("thickness", self.thickness), ("t_c", self.t_c)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some(w) = self.w_r {
            if !(w > 0.0) {
                return Err(Error::config("w_r must be positive"));
            }
        }
        if let Some(b) = self.b_c_parallel {
            if !(b > 0.0) {
                return Err(Error::config("b_c_parallel must be positive"));
            }
        }
        if !(self.gap() > 0.0) {
            return Err(Error::config("gap must be positive"));
        }
        let mut warnings = Vec::new();
        if self.theta_b.abs() > 0.1 {
            warnings.push(format!("misalignment {:.3} rad is not small", self.theta_b));
        }
        Ok(warnings)
    }

    /// Curvature for perfect alignment, (π/48) D e² t²/(ħ k_B T_C), T⁻².
    pub fn aligned_curvature(&self) -> f64 {
        PI / 48.0 * self.diffusion * E_CHARGE * E_CHARGE * self.thickness * self.thickness / (HBAR * K_B * self.t_c)
    }

    /// 1 + θ_B²(w_r/t)²; 1 when w_r is unknown.
    pub fn misalignment_factor(&self) -> f64 {
        match self.w_r {
            Some(w) => 1.0 + (self.theta_b * w / self.thickness).powi(2),
            None => 1.0,
        }
    }
}

/// Δ(B) = Δ₀ √(1 − (B/B_C)²).
pub fn gap_vs_field(b: f64, model: &FieldModel) -> Result<f64> {
    let b_c = model.b_c_parallel.ok_or_else(|| Error::config("gap_vs_field needs b_c_parallel"))?;
    let r = b / b_c;
    if r.abs() > 1.0 {
        return Err(Error::domain(format!("|B| = {} T exceeds B_C = {b_c} T", b.abs())));
    }
    Ok(model.gap() * (1.0 - r * r).max(0.0).sqrt())
}

/// Coefficient c in Δω/ω = −c B², T⁻².
pub fn field_curvature(model: &FieldModel) -> f64 {
    model.aligned_curvature() * model.misalignment_factor()
}

/// Relative resonance shift Δω/ω at parallel field `b` (T).
pub fn field_frequency_shift(b: f64, model: &FieldModel) -> f64 {
    -field_curvature(model) * b * b
}

/// How a critical field is read off the fitted curvature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BcCriterion {
    /// Report the curvature only.
    #[default]
    Disabled,
    /// Field where the pair-breaking energy D e² t_eff² B²/(6ħ) equals Δ₀,
    /// giving B_C = √(Δ₀ π / (8 c k_B T_C)).
    PairBreakingEqualsGap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldFit {
    /// T⁻²
    pub curvature: f64,
    pub curvature_sigma: f64,
    /// Curvature expected for perfect alignment.
    pub aligned_curvature: f64,
    /// rad; present when w_r is known.
    pub theta_b: Option<f64>,
    pub theta_b_sigma: Option<f64>,
    pub b_c_parallel: Option<f64>,
    pub reduced_chi2: f64,
    pub warnings: Vec<String>,
}

/// Fits Δω/ω = −c B² (`sweep.x` = B in T, `sweep.y` = Δω/ω), then
/// decomposes c into the misalignment angle when w_r is known.
pub fn fit_field_shift(sweep: &SweepRecord, model: &FieldModel, criterion: BcCriterion) -> Result<FieldFit> {
    let mut warnings = model.validate()?;
    sweep.validate()?;
    if sweep.len() < 5 {
        return Err(Error::Fit(format!("need at least 5 field points, got {}", sweep.len())));
    }
    let x: Vec<f64> = sweep.x.iter().map(|b| -b * b).collect();
    let data = SweepRecord { x, ..sweep.clone() };
    let fit = proportional_fit(&data)?;
    let c = fit.params[0];
    let c_sigma = fit.sigma(0);

    if sweep.has_sigma() {
        if fit.reduced_chi2 > 3.0 {
            warnings.push(format!("poor quadratic fit: reduced chi2 = {:.2}", fit.reduced_chi2));
        }
    } else {
        let rms_y = (sweep.y.iter().map(|y| y * y).sum::<f64>() / sweep.len() as f64).sqrt();
        let rms_r = (fit.chi2 / sweep.len() as f64).sqrt();
        if rms_y > 0.0 && rms_r > 0.05 * rms_y {
            warnings.push(format!("poor quadratic fit: residual rms is {:.1}% of the signal", 100.0 * rms_r / rms_y));
        }
    }

    let c0 = model.aligned_curvature();
    let (theta_b, theta_b_sigma) = match model.w_r {
        Some(w) => {
            let excess = c / c0 - 1.0;
            if excess < 0.0 {
                warnings.push("curvature below the aligned value; misalignment set to zero".into());
                (Some(0.0), None)
            } else {
                let theta = model.thickness / w * excess.sqrt();
                let sigma = if excess > 0.0 { model.thickness / w * c_sigma / (2.0 * c0 * excess.sqrt()) } else { f64::INFINITY };
                (Some(theta), Some(sigma))
            }
        }
        None => (None, None),
    };
    let b_c = match criterion {
        BcCriterion::Disabled => None,
        BcCriterion::PairBreakingEqualsGap => {
            if c > 0.0 {
                Some((model.gap() * PI / (8.0 * c * K_B * model.t_c)).sqrt())
            } else {
                warnings.push("non-positive curvature: no critical field".into());
                None
            }
        }
    };
    Ok(FieldFit {
        curvature: c,
        curvature_sigma: c_sigma,
        aligned_curvature: c0,
        theta_b,
        theta_b_sigma,
        b_c_parallel: b_c,
        reduced_chi2: fit.reduced_chi2,
        warnings,
    })
}

fn default_t_ref() -> f64 {
    0.01
}

fn default_c4() -> f64 {
    BCS_GAP_RATIO.powi(4)
}

/// Temperature response: TLS digamma term and dirty-limit kinetic inductance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TempModel {
    /// F δ⁰_TLS
    pub f_delta_tls: f64,
    /// Kinetic inductance fraction.
    pub alpha: f64,
    /// K
    pub t_c: f64,
    /// ΔL_k/L_k = c4 (k_B T/Δ)⁴. The default 1.764⁴ makes it (T/T_C)⁴.
    #[serde(default = "default_c4")]
    pub c4: f64,
    /// Temperature at which the shift is zero, K.
    #[serde(default = "default_t_ref")]
    pub t_ref: f64,
}

impl TempModel {
    pub fn reference() -> Self {
        TempModel { f_delta_tls: 1e-6, alpha: 0.97, t_c: 5.6, c4: default_c4(), t_ref: default_t_ref() }
    }

    /// Hard errors for invalid values; a warning when the shift is not
    /// monotone on [max(50 mK, t_ref), 0.4 T_C] at `f_r`.
    pub fn validate(&self, f_r: f64) -> Result<Vec<String>> {
        if !(self.f_delta_tls >= 0.0) {
            return Err(Error::config("f_delta_tls must be non-negative"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::config(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        if !(self.t_c > 0.0 && self.c4 > 0.0 && self.t_ref > 0.0) {
            return Err(Error::config("t_c, c4 and t_ref must be positive"));
        }
        if !(f_r > 0.0) {
            return Err(Error::config("resonance frequency must be positive"));
        }
        let mut warnings = Vec::new();
        if !self.is_monotone(f_r, 0.05f64.max(self.t_ref), 0.4 * self.t_c)? {
            warnings.push("temperature shift is not monotone over the dirty-limit range".into());
        }
        Ok(warnings)
    }

    fn is_monotone(&self, f_r: f64, lo: f64, hi: f64) -> Result<bool> {
        let n = 400;
        let mut prev = raw_shift(lo, f_r, self)?;
        for k in 1..=n {
            let t = lo + (hi - lo) * k as f64 / n as f64;
            let s = raw_shift(t, f_r, self)?;
            if s >= prev {
                return Ok(false);
            }
            prev = s;
        }
        Ok(true)
    }
}

/// Shift relative to T → 0 (no reference subtraction).
fn raw_shift(t: f64, f_r: f64, model: &TempModel) -> Result<f64> {
    let x = H * f_r / (2.0 * PI * K_B * t);
    let psi = complex_digamma(Complex64::new(0.5, -x))?;
    let tls = model.f_delta_tls / PI * (psi.re - x.ln());
    let gap = BCS_GAP_RATIO * K_B * model.t_c;
    let ki = model.c4 * (K_B * t / gap).powi(4);
    Ok(tls - model.alpha * ki)
}

/// Δω/ω at temperature `t` relative to `model.t_ref`.
pub fn temp_frequency_shift(t: f64, f_r: f64, model: &TempModel) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::domain(format!("temperature must be positive, got {t}")));
    }
    if !(f_r > 0.0) {
        return Err(Error::domain("resonance frequency must be positive"));
    }
    Ok(raw_shift(t, f_r, model)? - raw_shift(model.t_ref, f_r, model)?)
}

/// Device temperature reproducing a measured Δω/ω, by bisection between
/// `t_ref` and 0.4 T_C to 1 μK.
pub fn device_temp_from_shift(shift: f64, f_r: f64, model: &TempModel) -> Result<f64> {
    let lo0 = model.t_ref;
    let hi0 = 0.4 * model.t_c;
    if !model.is_monotone(f_r, lo0, hi0)? {
        return Err(Error::Inversion("temperature shift is not monotone over the search range".into()));
    }
    let s_hi = temp_frequency_shift(hi0, f_r, model)?;
    if shift > 0.0 || shift < s_hi {
        return Err(Error::Inversion(format!("shift {shift:.4e} outside the attainable range [{s_hi:.4e}, 0]")));
    }
    let (mut lo, mut hi) = (lo0, hi0);
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if temp_frequency_shift(mid, f_r, model)? > shift {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const F_R: f64 = 5.6735e9;

    #[test]
    fn gap_points() {
        let m = FieldModel { b_c_parallel: Some(17.32), ..FieldModel::reference() };
        let d0 = m.gap();
        assert_relative_eq!(d0, 1.764 * K_B * 5.6, max_relative = 1e-15);
        assert_eq!(gap_vs_field(0.0, &m).unwrap(), d0);
        assert_eq!(gap_vs_field(17.32, &m).unwrap(), 0.0);
        assert_relative_eq!(gap_vs_field(17.32 / 2f64.sqrt(), &m).unwrap(), d0 / 2f64.sqrt(), max_relative = 1e-12);
        assert!(gap_vs_field(18.0, &m).is_err());
        assert!(gap_vs_field(1.0, &FieldModel::reference()).is_err());
    }

    #[test]
    fn field_shift_values() {
        let m = FieldModel::reference();
        assert_relative_eq!(field_curvature(&m), 1.741_159_917_848_753_5e-3, max_relative = 1e-10);
        let s = field_frequency_shift(6.0, &m);
        assert_relative_eq!(s, -0.062_681_757_042_555_13, max_relative = 1e-10);
        assert!((s * F_R / 1e6 + 355.6249).abs() < 1e-3);
        assert_eq!(field_frequency_shift(0.0, &m), 0.0);
    }

    #[test]
    fn misalignment_term_is_quadratic() {
        let base = FieldModel { w_r: Some(1e-6), theta_b: 0.01, ..FieldModel::reference() };
        let twice = FieldModel { theta_b: 0.02, ..base };
        let t1 = base.misalignment_factor() - 1.0;
        let t2 = twice.misalignment_factor() - 1.0;
        assert_relative_eq!(t2, 4.0 * t1, max_relative = 1e-12);
        assert!(!FieldModel { theta_b: 0.2, ..base }.validate().unwrap().is_empty());
    }

    fn field_sweep(model: &FieldModel) -> SweepRecord {
        let b: Vec<f64> = (0..13).map(|k| 0.5 * k as f64).collect();
        let y = b.iter().map(|b| field_frequency_shift(*b, model)).collect();
        SweepRecord::new(b, y).unwrap()
    }

    #[test]
    fn theta_plant_recovered() {
        let theta = 0.92f64.to_radians();
        let planted = FieldModel { w_r: Some(1e-6), theta_b: theta, ..FieldModel::reference() };
        let fit = fit_field_shift(&field_sweep(&planted), &FieldModel { theta_b: 0.0, ..planted }, BcCriterion::Disabled).unwrap();
        assert!((fit.theta_b.unwrap() / theta - 1.0).abs() < 1e-9);
        assert!(fit.b_c_parallel.is_none());
        assert!(fit.warnings.is_empty());
    }

    #[test]
    fn coefficient_plant_and_zero() {
        let m = FieldModel::reference();
        let fit = fit_field_shift(&field_sweep(&m), &m, BcCriterion::PairBreakingEqualsGap).unwrap();
        assert_relative_eq!(fit.curvature, field_curvature(&m), max_relative = 1e-14);
        let b_c = fit.b_c_parallel.unwrap();
        assert_relative_eq!(b_c, (1.764 * PI / (8.0 * field_curvature(&m))).sqrt(), max_relative = 1e-12);
        let zeros = SweepRecord::new(vec![0.0, 1.0, 2.0, 3.0, 4.0], vec![0.0; 5]).unwrap();
        let z = fit_field_shift(&zeros, &m, BcCriterion::Disabled).unwrap();
        assert_eq!(z.curvature, 0.0);
        let short = SweepRecord::new(vec![0.0, 1.0, 2.0], vec![0.0; 3]).unwrap();
        assert!(fit_field_shift(&short, &m, BcCriterion::Disabled).is_err());
    }

    #[test]
    fn non_quadratic_data_warns() {
        let b: Vec<f64> = (0..10).map(|k| k as f64).collect();
        let y = b.iter().map(|b| -1e-3 * b).collect();
        let fit = fit_field_shift(&SweepRecord::new(b, y).unwrap(), &FieldModel::reference(), BcCriterion::Disabled).unwrap();
        assert!(fit.warnings.iter().any(|w| w.contains("poor quadratic fit")));
    }

    fn tmodel(f_delta_tls: f64) -> TempModel {
        TempModel { f_delta_tls, alpha: 1.0, ..TempModel::reference() }
    }

    #[test]
    fn temperature_shift_values() {
        let m = tmodel(1e-6);
        assert!((raw_shift(1.11, F_R, &m).unwrap() + 1.543e-3).abs() < 1e-6);
        assert!((raw_shift(0.85, F_R, &m).unwrap() + 5.305e-4).abs() < 1e-6);
        assert_eq!(temp_frequency_shift(m.t_ref, F_R, &m).unwrap(), 0.0);
        let quiet = tmodel(0.0);
        assert!(raw_shift(1e-3, F_R, &quiet).unwrap().abs() < 1e-14);
        assert!(temp_frequency_shift(1e-3, F_R, &quiet).unwrap().abs() < 2e-11);
        assert!(temp_frequency_shift(0.0, F_R, &m).is_err());
    }

    #[test]
    fn tls_bracket_grows_like_log_at_high_temperature() {
        // hf/k_B T ≪ 1: Ψ(1/2 + ix) → Ψ(1/2), so the bracket → Ψ(1/2) − ln x
        let tls = TempModel { alpha: 1e-300, ..tmodel(1.0) };
        let x = |t: f64| H * F_R / (2.0 * PI * K_B * t);
        for t in [50.0, 500.0] {
            let got = raw_shift(t, F_R, &tls).unwrap() * PI;
            let want = digamma(0.5).unwrap() - x(t).ln();
            assert!((got - want).abs() < 1e-4 * want.abs());
        }
    }

    #[test]
    fn device_temperature_inversion() {
        let m = tmodel(1e-6);
        assert!(m.validate(F_R).unwrap().is_empty());
        let s = temp_frequency_shift(1.11, F_R, &m).unwrap();
        assert!((device_temp_from_shift(s, F_R, &m).unwrap() - 1.11).abs() < 1e-5);
        assert!((device_temp_from_shift(0.0, F_R, &m).unwrap() - m.t_ref).abs() < 1e-5);
        assert!(matches!(device_temp_from_shift(1e-3, F_R, &m), Err(Error::Inversion(_))));
        assert!(matches!(device_temp_from_shift(-1.0, F_R, &m), Err(Error::Inversion(_))));
        let wild = tmodel(1e-2);
        assert!(!wild.validate(F_R).unwrap().is_empty());
        assert!(device_temp_from_shift(-1e-4, F_R, &wild).is_err());
    }

    proptest! {
        #[test]
        fn field_shift_even(b in -20.0f64..20.0, theta in -0.1f64..0.1) {
            let m = FieldModel { w_r: Some(2e-6), theta_b: theta, ..FieldModel::reference() };
            let flipped = FieldModel { theta_b: -theta, ..m };
            prop_assert_eq!(field_frequency_shift(b, &m), field_frequency_shift(-b, &m));
            prop_assert_eq!(field_frequency_shift(b, &m), field_frequency_shift(b, &flipped));
        }

        #[test]
        fn temperature_round_trip(t in 0.1f64..2.0, fd in 0.0f64..3e-5) {
            let m = tmodel(fd);
            let s = temp_frequency_shift(t, F_R, &m).unwrap();
            prop_assert!((device_temp_from_shift(s, F_R, &m).unwrap() - t).abs() < 1e-5);
        }

        #[test]
        fn temperature_shift_monotone(fd in 0.0f64..3e-5, alpha in 0.3f64..1.0) {
            let m = TempModel { f_delta_tls: fd * alpha, alpha, ..TempModel::reference() };
            prop_assert!(m.validate(F_R).unwrap().is_empty());
        }
    }
}
