//! Physical constants, unit conventions and conversions between power,
//! temperature, photon number and decibels.
//!
//! All public interfaces take ordinary frequency in Hz. Angular frequency is
//! always obtained explicitly through [`Frequency::angular`] or
//! [`angular`], never implied by a field name.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// CODATA 2018 constants (SI). `H`, `K_B` and `E_CHARGE` are exact by
/// definition of the SI; `MU_0` is the 2018 recommended value.
pub mod consts {
    use std::f64::consts::PI;

    /// Planck constant, J s (6.62607015e-34).
    pub const H: f64 = 6.626_070_15e-34;
    /// Reduced Planck constant, J s (1.054571817e-34).
    pub const HBAR: f64 = H / (2.0 * PI);
    /// Boltzmann constant, J/K (1.380649e-23).
    pub const K_B: f64 = 1.380_649e-23;
    /// Elementary charge, C (1.602176634e-19).
    pub const E_CHARGE: f64 = 1.602_176_634e-19;
    /// Vacuum permeability, H/m (1.25663706e-6).
    pub const MU_0: f64 = 1.256_637_062_12e-6;
    /// Euler-Mascheroni constant (0.577215665).
    pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
    /// BCS ratio between the zero-temperature gap and k_B T_C.
    pub const BCS_GAP_RATIO: f64 = 1.764;
}

use consts::{H, K_B};

/// An ordinary (cyclic) frequency in Hz.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Frequency(f64);

impl Frequency {
    pub const fn from_hz(hz: f64) -> Self {
        Frequency(hz)
    }

    pub fn from_ghz(ghz: f64) -> Self {
        Frequency(ghz * 1e9)
    }

    pub fn from_angular(omega: f64) -> Self {
        Frequency(omega / (2.0 * PI))
    }

    pub fn hz(self) -> f64 {
        self.0
    }

    /// Angular frequency ω = 2πf in rad/s.
    pub fn angular(self) -> f64 {
        2.0 * PI * self.0
    }

    /// Physical carriers must have strictly positive frequency.
    pub fn require_positive(self) -> Result<Self> {
        if self.0 > 0.0 && self.0.is_finite() {
            Ok(self)
        } else {
            Err(Error::domain(format!("frequency must be positive, got {} Hz", self.0)))
        }
    }
}

impl From<f64> for Frequency {
    fn from(hz: f64) -> Self {
        Frequency(hz)
    }
}

/// Converts an ordinary frequency in Hz to rad/s.
#[inline]
pub fn angular(f_hz: f64) -> f64 {
    2.0 * PI * f_hz
}

/// A power ratio in dB (10 log10).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DecibelPower(pub f64);

impl DecibelPower {
    pub fn from_linear(ratio: f64) -> Result<Self> {
        db_from_linear(ratio).map(DecibelPower)
    }

    pub fn db(self) -> f64 {
        self.0
    }

    pub fn to_linear(self) -> f64 {
        linear_from_db(self.0)
    }
}

/// 10 log10(x) for a positive power ratio.
pub fn db_from_linear(ratio: f64) -> Result<f64> {
    if ratio > 0.0 && ratio.is_finite() {
        Ok(10.0 * ratio.log10())
    } else {
        Err(Error::domain(format!("power ratio must be positive, got {ratio}")))
    }
}

pub fn linear_from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_watt(dbm: f64) -> f64 {
    1e-3 * linear_from_db(dbm)
}

pub fn watt_to_dbm(watt: f64) -> Result<f64> {
    db_from_linear(watt / 1e-3)
}

/// How a temperature is mapped onto a photon number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhotonConvention {
    /// k_B T / (h f), the Rayleigh-Jeans count used for noise temperatures.
    #[default]
    Linear,
    /// 1 / (exp(h f / k_B T) - 1).
    BoseEinstein,
}

/// Photon number equivalent of a temperature at frequency `f`.
pub fn photon_temperature_equivalent(
    temperature: f64,
    f: Frequency,
    convention: PhotonConvention,
) -> Result<f64> {
    if !(temperature >= 0.0) {
        return Err(Error::domain(format!(
            "temperature must be non-negative, got {temperature} K"
        )));
    }
    let f = f.require_positive()?;
    Ok(match convention {
        PhotonConvention::Linear => K_B * temperature / (H * f.hz()),
        PhotonConvention::BoseEinstein => bose_einstein(temperature, f.hz()),
    })
}

/// Bose-Einstein occupation at temperature `t` (K) and frequency `f_hz`.
/// Returns 0 at T = 0. Callers are responsible for T >= 0, f > 0.
pub fn bose_einstein(t: f64, f_hz: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let x = H * f_hz / (K_B * t);
    1.0 / x.exp_m1()
}

/// Temperature of half a photon, h f / (2 k_B).
pub fn quantum_limit_temperature(f: Frequency) -> Result<f64> {
    let f = f.require_positive()?;
    Ok(zero_point_temperature(f.hz()))
}

/// h f / (2 k_B) without argument checking.
#[inline]
pub(crate) fn zero_point_temperature(f_hz: f64) -> f64 {
    H * f_hz / (2.0 * K_B)
}

/// Symmetrized thermal noise temperature (h f / 2k_B) coth(h f / 2 k_B T).
/// Tends to the zero-point value as T -> 0 and to T as T -> infinity.
pub fn coth_noise_temperature(t: f64, f_hz: f64) -> f64 {
    let t0 = zero_point_temperature(f_hz);
    if t <= 0.0 {
        return t0;
    }
    let x = t0 / t;
    // coth(x) = 1 + 2/(e^{2x} - 1), accurate for small and large x
    t0 * (1.0 + 2.0 / (2.0 * x).exp_m1())
}
