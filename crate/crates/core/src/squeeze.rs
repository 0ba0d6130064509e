//! Vacuum-squeezing budget of a transmission-mode amplifier followed by a
//! lossy line and a HEMT: the measured squeezing factor S, the quadrature
//! gain implied by a measured S, and the floor S|min set by the −3 dB
//! transmission limit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io_dynamics::n_kappa2;

/// Vacuum quadrature variance.
pub const VACUUM_VARIANCE: f64 = 0.25;

/// Quadrature gain of the transmission floor.
pub const TRANSMISSION_FLOOR_GX: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezeBudget {
    /// Efficiency between amplifier and HEMT.
    pub eta: f64,
    /// HEMT-referred noise, photons.
    pub n_h: f64,
    /// HEMT power gain. Absent means (G_H − 1)/G_H is taken as 1.
    #[serde(default)]
    pub g_h: Option<f64>,
    /// Occupation of the loss port, photons.
    #[serde(default)]
    pub n_eta: f64,
    /// Internal-loss contribution, photons.
    #[serde(default)]
    pub n_gamma: f64,
}

impl SqueezeBudget {
    pub fn new(eta: f64, n_h: f64) -> Result<Self> {
        let b = SqueezeBudget { eta, n_h, g_h: None, n_eta: 0.0, n_gamma: 0.0 };
        b.validate()?;
        Ok(b)
    }

    /// −4.5 dB of loss and 3.25 HEMT photons.
    pub fn reference() -> Self {
        SqueezeBudget { eta: 10f64.powf(-0.45), n_h: 3.25, g_h: None, n_eta: 0.0, n_gamma: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::config(format!("eta must lie in (0, 1], got {}", self.eta)));
        }
        if !(self.n_h >= 0.0 && self.n_eta >= 0.0 && self.n_gamma >= 0.0) {
            return Err(Error::config("photon numbers must be non-negative"));
        }
        if let Some(g) = self.g_h {
            if !(g >= 1.0) {
                return Err(Error::config(format!("HEMT gain must be at least 1, got {g}")));
            }
        }
        Ok(())
    }

    fn hemt_factor(&self) -> f64 {
        self.g_h.map_or(1.0, |g| (g - 1.0) / g)
    }

    /// Output variance divided by the HEMT gain.
    fn referred_variance(&self, g_x: f64) -> Result<f64> {
        let nk = n_kappa2(g_x, VACUUM_VARIANCE)?;
        Ok(g_x * self.eta * VACUUM_VARIANCE
            + (g_x - 1.0) * self.eta * nk
            + g_x * self.eta * self.n_gamma
            + (1.0 - self.eta) * (VACUUM_VARIANCE + self.n_eta / 2.0)
            + self.hemt_factor() * self.n_h)
    }
}

/// Ratio of the measured X variance with the pump on (quadrature gain `g_x`)
/// to the pump-off variance.
pub fn squeezing_factor(g_x: f64, budget: &SqueezeBudget) -> Result<f64> {
    budget.validate()?;
    Ok(budget.referred_variance(g_x)? / budget.referred_variance(1.0)?)
}

/// S at the transmission floor G_X = 1/2.
pub fn max_measurable_squeezing(budget: &SqueezeBudget) -> Result<f64> {
    squeezing_factor(TRANSMISSION_FLOOR_GX, budget)
}

/// Quadrature gain reproducing a measured S, by bisection on [1/2, 1].
pub fn extract_gx(s_measured: f64, budget: &SqueezeBudget) -> Result<f64> {
    let s_min = max_measurable_squeezing(budget)?;
    if !(s_measured > s_min && s_measured <= 1.0) {
        return Err(Error::Inversion(format!(
            "S = {s_measured} lies outside the attainable range ({s_min}, 1]"
        )));
    }
    let (mut lo, mut hi) = (TRANSMISSION_FLOOR_GX, 1.0);
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if squeezing_factor(mid, budget)? < s_measured {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
