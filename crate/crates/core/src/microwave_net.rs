//! Stepped-impedance-filter coupling of the Fabry-Pérot cavity: transmission
//! line input impedance, the effective source impedance seen by the central
//! resonator, the coupling quality factor and the external coupling rate.
//!
//! Lines are lossless and dispersionless; the electrical length scales
//! linearly with frequency.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One uniform line section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineSection {
    /// Characteristic impedance, Ω.
    pub z_f: f64,
    /// Length in wavelengths at `f_design` (0.25 for λ/4).
    pub electrical_length: f64,
    /// Hz
    pub f_design: f64,
}

impl LineSection {
    pub fn quarter_wave(z_f: f64, f_design: f64) -> Self {
        LineSection { z_f, electrical_length: 0.25, f_design }
    }

    pub fn half_wave(z_f: f64, f_design: f64) -> Self {
        LineSection { z_f, electrical_length: 0.5, f_design }
    }

    /// βl in radians at frequency `f`.
    pub fn phase(&self, f: f64) -> f64 {
        2.0 * PI * self.electrical_length * f / self.f_design
    }
}

/// Z_in = Z_f (Z_L + i Z_f tan βl) / (Z_f + i Z_L tan βl).
///
/// Evaluated in the sin/cos form, which stays finite where tan βl diverges and
/// gives Z_f²/Z_L exactly at an odd multiple of λ/4.
pub fn input_impedance(section: &LineSection, z_load: Complex64, f: f64) -> Result<Complex64> {
    if !(section.z_f > 0.0 && section.electrical_length > 0.0 && section.f_design > 0.0) {
        return Err(Error::domain("line section needs positive impedance, length and design frequency"));
    }
    if !(f > 0.0) {
        return Err(Error::domain(format!("frequency must be positive, got {f} Hz")));
    }
    let z_f = section.z_f;
    let turns = 2.0 * section.electrical_length * f / section.f_design; // βl / π
    // Exact quarter- and half-wave points avoid the rounding in sin(π/2 · k).
    let (s, c) = if (turns * 2.0).fract() == 0.0 {
        let k = (turns * 2.0) as i64;
        match k.rem_euclid(4) {
            0 => (0.0, 1.0),
            1 => (1.0, 0.0),
            2 => (0.0, -1.0),
            _ => (-1.0, 0.0),
        }
    } else {
        (PI * turns).sin_cos()
    };
    let i = Complex64::i();
    let num = z_load * c + i * z_f * s;
    let den = z_f * c + i * z_load * s;
    if den.norm() == 0.0 {
        return Err(Error::Singularity("short-circuit load at a quarter-wave point".into()));
    }
    Ok(z_f * num / den)
}

/// Input impedance of `sections` seen from the far end, with `sections[0]`
/// adjacent to the load.
pub fn cascade_input_impedance(sections: &[LineSection], z_load: Complex64, f: f64) -> Result<Complex64> {
    sections.iter().try_fold(z_load, |z, s| input_impedance(s, z, f))
}

/// Stepped-impedance mirror pair around a λ/2 resonator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SifDesign {
    /// Low-impedance section, Ω.
    pub z_l: f64,
    /// High-impedance section, Ω.
    pub z_h: f64,
    /// Number of λ/4 sections of `z_l` per mirror.
    pub n_l: u32,
    /// Number of λ/4 sections of `z_h` per mirror.
    pub n_h: u32,
    /// Environment (feed line) impedance, Ω.
    pub z_0: f64,
    /// Resonator impedance, Ω.
    pub z_r: f64,
    /// Common design frequency, Hz.
    pub f_0: f64,
}

impl SifDesign {
    /// 450/900 Ω mirrors with 6 low and 5 high sections, 900 Ω resonator at
    /// 5.75 GHz in a 50 Ω environment.
    pub fn reference() -> Self {
        SifDesign { z_l: 450.0, z_h: 900.0, n_l: 6, n_h: 5, z_0: 50.0, z_r: 900.0, f_0: 5.75e9 }
    }

    /// Hard errors for nonphysical values; returns soft warnings otherwise.
    pub fn validate(&self) -> Result<Vec<String>> {
        for (name, v) in [("z_l", self.z_l), ("z_h", self.z_h), ("z_0", self.z_0), ("z_r", self.z_r), ("f_0", self.f_0)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("sif.{name} must be positive, got {v}")));
            }
        }
        let mut warnings = Vec::new();
        if self.z_l >= self.z_h {
            warnings.push(format!(
                "Z_l = {} Ω is not below Z_h = {} Ω; the mirror does not form a stopband",
                self.z_l, self.z_h
            ));
        }
        if self.n_l == 0 && self.n_h == 0 {
            warnings.push("no mirror sections: Z_eff degenerates to 1/Z_0".into());
        } else if self.n_l != self.n_h + 1 {
            warnings.push(format!(
                "n_l = {} and n_h = {} do not form the alternating mirror (n_l = n_h + 1)",
                self.n_l, self.n_h
            ));
        }
        Ok(warnings)
    }

    /// The mirror as λ/4 sections ordered from the feed line inward,
    /// alternating low and high impedance starting with low.
    pub fn mirror_sections(&self) -> Vec<LineSection> {
        let total = self.n_l + self.n_h;
        let (mut low, mut high) = (0, 0);
        let mut out = Vec::with_capacity(total as usize);
        for k in 0..total {
            let want_low = k % 2 == 0;
            let z = if (want_low && low < self.n_l) || high >= self.n_h {
                low += 1;
                self.z_l
            } else {
                high += 1;
                self.z_h
            };
            out.push(LineSection::quarter_wave(z, self.f_0));
        }
        out
    }
}

/// Z_eff = Z_l^(2 n_l) / (Z_h^(2 n_h) Z_0), computed in log space.
pub fn effective_impedance(sif: &SifDesign) -> f64 {
    let ln = 2.0 * sif.n_l as f64 * sif.z_l.ln() - 2.0 * sif.n_h as f64 * sif.z_h.ln() - sif.z_0.ln();
    ln.exp()
}

/// Q_c = 4 Z_r / (π Z_eff).
pub fn coupling_q(sif: &SifDesign) -> f64 {
    4.0 * sif.z_r / (PI * effective_impedance(sif))
}

/// κ/2π in Hz via f_0 / Q_c.
pub fn coupling_rate(sif: &SifDesign) -> f64 {
    let kappa = sif.f_0 / coupling_q(sif);
    debug_assert!(((kappa - coupling_rate_direct(sif)) / kappa).abs() < 1e-12);
    kappa
}

/// κ/2π in Hz via the direct form (π/4)(Z_eff/Z_r) f_0.
pub fn coupling_rate_direct(sif: &SifDesign) -> f64 {
    PI / 4.0 * effective_impedance(sif) / sif.z_r * sif.f_0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingDesign {
    pub z_eff_ohm: f64,
    pub q_c: f64,
    pub kappa_hz: f64,
    pub kappa_direct_hz: f64,
    pub warnings: Vec<String>,
}

/// All coupling figures for a design, with validation warnings attached.
pub fn design_coupling(sif: &SifDesign) -> Result<CouplingDesign> {
    let warnings = sif.validate()?;
    Ok(CouplingDesign {
        z_eff_ohm: effective_impedance(sif),
        q_c: coupling_q(sif),
        kappa_hz: coupling_rate(sif),
        kappa_direct_hz: coupling_rate_direct(sif),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const F0: f64 = 5.75e9;

    fn real(z: f64) -> Complex64 {
        Complex64::new(z, 0.0)
    }

    #[test]
    fn quarter_and_half_wave_limits() {
        let q = input_impedance(&LineSection::quarter_wave(900.0, F0), real(50.0), F0).unwrap();
        assert_relative_eq!(q.re, 16200.0, max_relative = 1e-14);
        assert_eq!(q.im, 0.0);
        let h = input_impedance(&LineSection::half_wave(123.0, F0), real(50.0), F0).unwrap();
        assert_relative_eq!(h.re, 50.0, max_relative = 1e-14);
        assert!(h.im.abs() < 1e-12);
    }

    #[test]
    fn reference_cascade_matches_closed_form() {
        let sif = SifDesign::reference();
        let cascade = cascade_input_impedance(&sif.mirror_sections(), real(sif.z_0), F0).unwrap();
        assert_relative_eq!(cascade.re, 3.955_078_125, max_relative = 1e-12);
        assert_relative_eq!(effective_impedance(&sif), 3.955_078_125, max_relative = 1e-13);
    }

    #[test]
    fn reference_coupling() {
        let sif = SifDesign::reference();
        assert_relative_eq!(coupling_q(&sif), 289.732_731_957_512_6, max_relative = 1e-12);
        assert!((coupling_q(&sif) - 290.0).abs() < 1.0);
        assert_relative_eq!(coupling_rate(&sif), 19_845_876.443_270_48, max_relative = 1e-12);
        assert_relative_eq!(coupling_rate(&sif), coupling_rate_direct(&sif), max_relative = 1e-12);
    }

    #[test]
    fn degenerate_designs() {
        let empty = SifDesign { n_l: 0, n_h: 0, ..SifDesign::reference() };
        assert_relative_eq!(effective_impedance(&empty), 1.0 / 50.0, max_relative = 1e-14);
        assert!(!empty.validate().unwrap().is_empty());
        let flat = SifDesign { z_h: 450.0, ..SifDesign::reference() };
        assert_relative_eq!(effective_impedance(&flat), 450.0 * 450.0 / 50.0, max_relative = 1e-12);
        assert!(!flat.validate().unwrap().is_empty());
        assert!(SifDesign { z_0: 0.0, ..SifDesign::reference() }.validate().is_err());
        assert!(SifDesign::reference().validate().unwrap().is_empty());
    }

    #[test]
    fn coupling_scaling() {
        let sif = SifDesign::reference();
        let unit = SifDesign { z_r: effective_impedance(&sif) * PI / 4.0, ..sif };
        assert_relative_eq!(coupling_q(&unit), 1.0, max_relative = 1e-12);
        let double = SifDesign { z_r: 2.0 * sif.z_r, ..sif };
        assert_relative_eq!(coupling_q(&double), 2.0 * coupling_q(&sif), max_relative = 1e-12);
        let half = SifDesign { z_0: 2.0 * sif.z_0, ..sif };
        assert_relative_eq!(coupling_rate(&half), 0.5 * coupling_rate(&sif), max_relative = 1e-12);
        let deep = SifDesign { n_l: 40, n_h: 39, ..sif };
        assert!(coupling_rate(&deep) < 1e-10);
    }

    #[test]
    fn tan_singularity_is_finite() {
        let s = LineSection { z_f: 100.0, electrical_length: 0.25, f_design: 1.0 };
        let z = input_impedance(&s, Complex64::new(25.0, 10.0), 1.0).unwrap();
        let expected = 100.0 * 100.0 / Complex64::new(25.0, 10.0);
        assert!((z - expected).norm() < 1e-10);
        let off = input_impedance(&s, real(25.0), 1.0 + 1e-9).unwrap();
        assert!((off - real(400.0)).norm() < 1e-3);
    }

    #[test]
    fn off_design_frequency_is_reactive() {
        let z = input_impedance(&LineSection::quarter_wave(900.0, F0), real(50.0), 0.8 * F0).unwrap();
        assert!(z.im.abs() > 1.0);
        assert!(input_impedance(&LineSection::quarter_wave(900.0, F0), real(50.0), 0.0).is_err());
    }

    proptest! {
        #[test]
        fn quarter_wave_inverts_real_loads(z_f in 1.0f64..2000.0, z_l in 0.1f64..5000.0) {
            let z = input_impedance(&LineSection::quarter_wave(z_f, F0), real(z_l), F0).unwrap();
            prop_assert!(((z.re - z_f * z_f / z_l) / (z_f * z_f / z_l)).abs() < 1e-13);
            prop_assert!(z.im.abs() < 1e-9 * z.re);
        }

        #[test]
        fn two_quarter_waves_restore_load(z_f in 1.0f64..2000.0, re in 0.1f64..500.0, im in -500.0f64..500.0) {
            let s = LineSection::quarter_wave(z_f, F0);
            let load = Complex64::new(re, im);
            let z = cascade_input_impedance(&[s, s], load, F0).unwrap();
            prop_assert!((z - load).norm() < 1e-10 * load.norm());
        }

        #[test]
        fn closed_form_matches_cascade(n_h in 0u32..6, z_l in 20.0f64..800.0, z_h in 100.0f64..1500.0, z_0 in 10.0f64..100.0) {
            let sif = SifDesign { z_l, z_h, n_l: n_h + 1, n_h, z_0, z_r: 900.0, f_0: F0 };
            let cascade = cascade_input_impedance(&sif.mirror_sections(), real(z_0), F0).unwrap();
            let closed = effective_impedance(&sif);
            prop_assert!(((cascade.re - closed) / closed).abs() < 1e-12);
        }

        #[test]
        fn direct_and_q_routes_agree(z_l in 20.0f64..800.0, z_h in 100.0f64..1500.0, n_h in 0u32..12, z_r in 10.0f64..2000.0) {
            let sif = SifDesign { z_l, z_h, n_l: n_h + 1, n_h, z_0: 50.0, z_r, f_0: F0 };
            let a = coupling_rate(&sif);
            let b = coupling_rate_direct(&sif);
            prop_assert!(((a - b) / a).abs() < 1e-12);
        }
    }
}
