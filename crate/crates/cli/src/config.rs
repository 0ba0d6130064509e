//! Run configuration read from `--config`. Every section is optional and
//! falls back to the reference device; unknown keys are rejected.

use std::path::Path;

use kipa_core::env_models::{BcCriterion, FieldModel, TempModel};
use kipa_core::io_dynamics::{CavityGainMap, PumpSearchConfig};
use kipa_core::ki_device::{DeviceParams, ResonatorParams};
use kipa_core::microwave_net::SifDesign;
use kipa_core::noise_cal::{ReceiverChain, SlopeMode};
use kipa_core::reproduce::{F_OPERATING, HEMT_SETPOINTS, T_KIPA_REFERENCE, VTS_SETPOINTS};
use kipa_core::squeeze::SqueezeBudget;
use kipa_core::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub device: Option<DeviceParams>,
    pub sif: Option<SifDesign>,
    pub chain: Option<ReceiverChain>,
    /// Synthetic-noise seed; `--seed` takes precedence.
    pub seed: Option<u64>,
    #[serde(default)]
    pub tune: TuneConfig,
    #[serde(default)]
    pub gain: GainConfig,
    #[serde(default)]
    pub pump_search: PumpSearchSection,
    #[serde(default)]
    pub compression: CompressionConfig,
    #[serde(default)]
    pub noise_fit: NoiseFitConfig,
    #[serde(default)]
    pub hemt_fit: HemtFitConfig,
    #[serde(default)]
    pub chain_propagate: PropagateConfig,
    #[serde(default)]
    pub squeeze: SqueezeConfig,
    #[serde(default)]
    pub field: FieldConfig,
    #[serde(default)]
    pub temp: TempConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("config {}: {e}", path.display())))
    }

    pub fn resonator(&self) -> Result<ResonatorParams> {
        match &self.device {
            Some(d) => {
                d.validate()?;
                Ok(d.resonator)
            }
            None => Ok(ResonatorParams::reference()),
        }
    }

    pub fn sif(&self) -> SifDesign {
        self.sif.unwrap_or_else(SifDesign::reference)
    }

    pub fn chain(&self) -> ReceiverChain {
        self.chain.clone().unwrap_or_else(ReceiverChain::reference)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuneConfig {
    pub currents_a: Vec<f64>,
    /// Synthetic noise on the resonance frequency, Hz.
    pub noise_hz: f64,
    /// Starting point (I*, exponent) for the tuning fit.
    pub guess: Option<(f64, f64)>,
}

impl Default for TuneConfig {
    fn default() -> Self {
        TuneConfig { currents_a: (0..=12).map(|k| k as f64 * 15e-6).collect(), noise_hz: 1e4, guess: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GainConfig {
    pub kappa_hz: f64,
    pub gamma_hz: f64,
    pub delta_hz: f64,
    /// Pump strength |ξ|/2π. When absent it is set for `peak_gain_db` at Δ = 0.
    pub xi_hz: Option<f64>,
    pub peak_gain_db: f64,
    pub f_pump_hz: f64,
    /// Sweep half-width around f_p/2; defaults to 3κ.
    pub half_span_hz: Option<f64>,
    pub n_points: usize,
    /// Synthetic gain noise, dB.
    pub noise_db: f64,
}

impl Default for GainConfig {
    fn default() -> Self {
        GainConfig {
            kappa_hz: 21.3e6,
            gamma_hz: 0.0,
            delta_hz: 0.0,
            xi_hz: None,
            peak_gain_db: 21.0,
            f_pump_hz: 2.0 * F_OPERATING,
            half_span_hz: None,
            n_points: 401,
            noise_db: 10.0 * 1.01f64.log10(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PumpSearchSection {
    pub map: CavityGainMap,
    pub target_db: f64,
    pub search: Option<PumpSearchConfig>,
}

impl Default for PumpSearchSection {
    fn default() -> Self {
        PumpSearchSection {
            map: CavityGainMap { f_r_hz: F_OPERATING, kappa_hz: 21.3e6, gamma_hz: 0.0, xi_hz_at_0dbm: 2.0e6 },
            target_db: 21.0,
            search: None,
        }
    }
}

impl PumpSearchSection {
    pub fn search(&self) -> PumpSearchConfig {
        self.search.unwrap_or_else(|| PumpSearchConfig::around(2.0 * self.map.f_r_hz, 50e6, -20.0, 30.0))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompressionConfig {
    pub small_signal_db: f64,
    /// Input 1 dB point, used directly or planted in synthetic data.
    pub p_in_1db_dbm: f64,
    /// Width of the synthetic roll-off, dB.
    pub width_db: f64,
    pub p_min_dbm: f64,
    pub p_max_dbm: f64,
    pub n_points: usize,
    pub noise_db: f64,
}

impl Default for CompressionConfig {
    fn default() -> Self {
        CompressionConfig {
            small_signal_db: 21.0,
            p_in_1db_dbm: -86.0,
            width_db: 3.0,
            p_min_dbm: -120.0,
            p_max_dbm: -70.0,
            n_points: 201,
            noise_db: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseFitConfig {
    /// Amplifier noise planted in synthetic data, K.
    pub t_kipa_k: f64,
    pub setpoints_k: Vec<f64>,
    pub f_signal_hz: f64,
    /// Relative noise on synthetic output powers.
    pub rel_noise: f64,
    pub slope: SlopeMode,
}

impl Default for NoiseFitConfig {
    fn default() -> Self {
        NoiseFitConfig {
            t_kipa_k: T_KIPA_REFERENCE,
            setpoints_k: VTS_SETPOINTS.to_vec(),
            f_signal_hz: F_OPERATING,
            rel_noise: 0.01,
            slope: SlopeMode::Unit,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HemtFitConfig {
    /// HEMT noise planted in synthetic data; defaults to the chain value.
    pub t_hemt_k: Option<f64>,
    pub setpoints_k: Vec<f64>,
    pub f_signal_hz: f64,
    pub rel_noise: f64,
    pub slope: SlopeMode,
}

impl Default for HemtFitConfig {
    fn default() -> Self {
        HemtFitConfig {
            t_hemt_k: None,
            setpoints_k: HEMT_SETPOINTS.to_vec(),
            f_signal_hz: F_OPERATING,
            rel_noise: 0.01,
            slope: SlopeMode::Unit,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagateConfig {
    /// Photon number entering the first stage.
    pub n_in: f64,
    pub f_hz: f64,
}

impl Default for PropagateConfig {
    fn default() -> Self {
        PropagateConfig { n_in: 0.5, f_hz: F_OPERATING }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SqueezeConfig {
    pub budget: SqueezeBudget,
    pub s_measured: Option<f64>,
    /// Quadrature gains (dB) at which to tabulate S.
    pub g_x_db: Vec<f64>,
}

impl Default for SqueezeConfig {
    fn default() -> Self {
        SqueezeConfig {
            budget: SqueezeBudget::reference(),
            s_measured: None,
            g_x_db: (0..=30).map(|k| -0.1 * k as f64 + 0.0).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldConfig {
    pub model: FieldModel,
    pub fields_t: Vec<f64>,
    pub f_r_hz: f64,
    /// Absolute noise on synthetic Δω/ω.
    pub noise: f64,
    pub criterion: BcCriterion,
}

impl Default for FieldConfig {
    fn default() -> Self {
        FieldConfig {
            model: FieldModel::reference(),
            fields_t: (0..=12).map(|k| 0.5 * k as f64).collect(),
            f_r_hz: F_OPERATING,
            noise: 0.0,
            criterion: BcCriterion::Disabled,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TempConfig {
    pub model: TempModel,
    pub f_r_hz: f64,
    pub temperatures_k: Vec<f64>,
    /// Measured Δω/ω for `device-temp`.
    pub shift: Option<f64>,
}

impl Default for TempConfig {
    fn default() -> Self {
        TempConfig {
            model: TempModel::reference(),
            f_r_hz: F_OPERATING,
            temperatures_k: (1..=30).map(|k| 0.05 * k as f64).collect(),
            shift: None,
        }
    }
}
