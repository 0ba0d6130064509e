//! Receiver-chain noise bookkeeping and the calibration fits built on it:
//! VTS-referred input noise, added-noise and HEMT fits, photon propagation
//! through lossy or amplifying stages, the hot-attenuator added-noise model
//! and radiative cooling of the resonator mode.
//!
//! Efficiencies and gains are linear power ratios; temperatures are kelvin.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitkit::{linear_fit, FitResult, SweepRecord};
use crate::quantities::consts::K_B;
use crate::quantities::{bose_einstein, coth_noise_temperature, db_from_linear, linear_from_db};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementKind {
    Attenuation,
    Gain,
}

/// One stage of a cascade.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainElement {
    pub kind: ElementKind,
    /// Power ratio in dB: ≤ 0 for attenuation, ≥ 0 for gain.
    pub value_db: f64,
    /// K
    pub physical_temperature: f64,
    #[serde(default)]
    pub label: String,
}

impl ChainElement {
    pub fn attenuator(value_db: f64, physical_temperature: f64, label: &str) -> Self {
        ChainElement { kind: ElementKind::Attenuation, value_db, physical_temperature, label: label.into() }
    }

    pub fn amplifier(value_db: f64, noise_temperature: f64, label: &str) -> Self {
        ChainElement { kind: ElementKind::Gain, value_db, physical_temperature: noise_temperature, label: label.into() }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.kind {
            ElementKind::Attenuation => self.value_db <= 0.0,
            ElementKind::Gain => self.value_db >= 0.0,
        };
        if !ok || !self.value_db.is_finite() {
            return Err(Error::config(format!(
                "element '{}': {:?} of {} dB has the wrong sign",
                self.label, self.kind, self.value_db
            )));
        }
        if !(self.physical_temperature >= 0.0) {
            return Err(Error::config(format!("element '{}': negative temperature", self.label)));
        }
        Ok(())
    }

    /// Linear power ratio.
    pub fn ratio(&self) -> f64 {
        linear_from_db(self.value_db)
    }
}

fn default_t_bkg() -> f64 {
    300.0
}

/// Calibrated chain between the noise source and the spectrum analyzer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReceiverChain {
    /// Ordered stages, used for explicit propagation only.
    #[serde(default)]
    pub elements: Vec<ChainElement>,
    /// Efficiency of the components between source and amplifier.
    pub eta_e: f64,
    /// Insertion-loss efficiency of the amplifier, per side.
    pub eta_il: f64,
    /// Total efficiency; when absent it is `eta_e · eta_il`.
    #[serde(default)]
    pub eta: Option<f64>,
    /// Amplifier power gain.
    pub gain: f64,
    pub g_hemt: f64,
    /// Gain from the amplifier output to the analyzer.
    pub g_tot: f64,
    /// K
    pub t_hemt: f64,
    /// Room-temperature background, K.
    #[serde(default = "default_t_bkg")]
    pub t_bkg: f64,
    /// Analyzer bandwidth, Hz.
    pub bandwidth_hz: f64,
    /// Uncertainty of the insertion-loss split, dB. Propagated into the
    /// systematic error of the added-noise fit.
    #[serde(default)]
    pub il_asymmetry_db: f64,
}

impl ReceiverChain {
    /// The chain of the reference measurement: components of −0.2, −0.6,
    /// −0.2 and −0.25 dB, 3.5 dB insertion loss per side, 21 dB gain, a
    /// 40 dB HEMT at 1.95 K and 68.2 dB to the analyzer at 100 Hz bandwidth.
    pub fn reference() -> Self {
        let elements = vec![
            ChainElement::attenuator(-0.2, 0.01, "circulator"),
            ChainElement::attenuator(-0.6, 0.01, "coax"),
            ChainElement::attenuator(-0.2, 0.01, "bias tee"),
            ChainElement::attenuator(-0.25, 0.01, "diplexer"),
        ];
        ReceiverChain {
            eta_e: eta_e_from_elements(&elements),
            elements,
            eta_il: linear_from_db(-3.5),
            eta: None,
            gain: linear_from_db(21.0),
            g_hemt: linear_from_db(40.0),
            g_tot: linear_from_db(68.2),
            t_hemt: 1.95,
            t_bkg: 300.0,
            bandwidth_hz: 100.0,
            il_asymmetry_db: 0.0,
        }
    }

    pub fn eta(&self) -> f64 {
        self.eta.unwrap_or(self.eta_e * self.eta_il)
    }

    /// Hard errors for invalid values; soft warnings for inconsistencies.
    pub fn validate(&self) -> Result<Vec<String>> {
        for (name, v) in [("eta_e", self.eta_e), ("eta_il", self.eta_il), ("eta", self.eta())] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::config(format!("{name} must lie in (0, 1], got {v}")));
            }
        }
        for (name, v) in [("gain", self.gain), ("g_hemt", self.g_hemt), ("g_tot", self.g_tot)] {
            if !(v >= 1.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be at least 1, got {v}")));
            }
        }
        if !(self.bandwidth_hz > 0.0) {
            return Err(Error::config("bandwidth must be positive"));
        }
        if !(self.t_hemt >= 0.0 && self.t_bkg >= 0.0 && self.il_asymmetry_db >= 0.0) {
            return Err(Error::config("temperatures and asymmetry must be non-negative"));
        }
        for e in &self.elements {
            e.validate()?;
        }
        let mut warnings = Vec::new();
        if let Some(eta) = self.eta {
            let product = self.eta_e * self.eta_il;
            let diff = db_from_linear(eta)? - db_from_linear(product)?;
            if diff.abs() > 0.01 {
                warnings.push(format!(
                    "configured eta = {:.3} dB differs from eta_e·eta_il = {:.3} dB by {diff:.3} dB",
                    db_from_linear(eta)?,
                    db_from_linear(product)?
                ));
            }
        }
        if self.elements.iter().any(|e| e.kind == ElementKind::Attenuation) {
            let from_elements = eta_e_from_elements(&self.elements);
            if (db_from_linear(from_elements)? - db_from_linear(self.eta_e)?).abs() > 0.01 {
                warnings.push(format!(
                    "eta_e = {:.3} dB does not match the listed components ({:.3} dB)",
                    db_from_linear(self.eta_e)?,
                    db_from_linear(from_elements)?
                ));
            }
        }
        Ok(warnings)
    }

    /// Converts an output power (W) to the referred temperature
    /// P/(G_tot k_B B).
    pub fn referred_temperature(&self, p_out_w: f64) -> f64 {
        p_out_w / (self.g_tot * K_B * self.bandwidth_hz)
    }

    /// Inverse of [`ReceiverChain::referred_temperature`].
    pub fn output_power(&self, referred_k: f64) -> f64 {
        referred_k * self.g_tot * K_B * self.bandwidth_hz
    }
}

/// Product of the attenuation stages' efficiencies.
pub fn eta_e_from_elements(elements: &[ChainElement]) -> f64 {
    elements.iter().filter(|e| e.kind == ElementKind::Attenuation).map(ChainElement::ratio).product()
}

/// Noise-source setting. The conversion ratio defaults to G − 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VtsSetpoint {
    /// K
    pub t_vts: f64,
    pub f_signal: f64,
    pub f_idler: f64,
    #[serde(default)]
    pub g_conv: Option<f64>,
}

/// Output noise temperature of the source seen through an amplifier of gain
/// `g`, including the idler band folded onto the signal.
pub fn vts_output_noise(sp: &VtsSetpoint, g: f64) -> Result<f64> {
    if !(sp.t_vts > 0.0) {
        return Err(Error::domain(format!("VTS temperature must be positive, got {}", sp.t_vts)));
    }
    if !(g >= 1.0) {
        return Err(Error::domain(format!("gain must be at least 1, got {g}")));
    }
    if !(sp.f_signal > 0.0 && sp.f_idler > 0.0) {
        return Err(Error::domain("signal and idler frequencies must be positive"));
    }
    let g_conv = sp.g_conv.unwrap_or(g - 1.0);
    if !(g_conv >= 0.0) {
        return Err(Error::domain(format!("conversion ratio must be non-negative, got {g_conv}")));
    }
    Ok(coth_noise_temperature(sp.t_vts, sp.f_signal) + g_conv / g * coth_noise_temperature(sp.t_vts, sp.f_idler))
}

/// T_in = η·T_out.
pub fn input_noise(t_out: f64, chain: &ReceiverChain) -> f64 {
    chain.eta() * t_out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlopeMode {
    /// Slope fixed to one; only the offset is fitted.
    #[default]
    Unit,
    /// Slope free, as a diagnostic of gain-calibration error.
    Free,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AddedNoiseFit {
    pub t_add: f64,
    /// Total 1σ, statistical and systematic in quadrature.
    pub t_add_sigma: f64,
    pub t_add_sigma_stat: f64,
    /// From the insertion-loss asymmetry.
    pub t_add_sigma_sys: f64,
    pub slope: f64,
    pub slope_sigma: f64,
    /// Background contribution T_bkg/(G_HEMT·G) removed from the offset.
    pub background: f64,
    /// Condition number of the two-parameter design matrix.
    pub design_condition: f64,
    pub fit: FitResult,
    pub warnings: Vec<String>,
}

fn check_protocol(x: &[f64]) -> Result<Vec<String>> {
    if x.len() < 3 {
        return Err(Error::Fit(format!("need at least 3 setpoints, got {}", x.len())));
    }
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(lo > 0.0) {
        return Err(Error::Fit("input noise temperatures must be positive".into()));
    }
    if hi / lo < 4.0 {
        return Err(Error::Fit(format!("setpoints span only {:.2}x, need at least 4x", hi / lo)));
    }
    Ok(Vec::new())
}

fn referred(sweep: &SweepRecord, chain: &ReceiverChain, x: Vec<f64>) -> Result<SweepRecord> {
    let y = sweep.y.iter().map(|p| chain.referred_temperature(*p)).collect();
    let mut rec = SweepRecord { x, y, sigma_y: None, meta: sweep.meta.clone() };
    if let Some(s) = &sweep.sigma_y {
        rec.sigma_y = Some(s.iter().map(|p| chain.referred_temperature(*p)).collect());
    }
    rec.validate()?;
    Ok(rec)
}

fn offset_fit(data: &SweepRecord, mode: SlopeMode) -> Result<(FitResult, f64)> {
    let fit = linear_fit(data, match mode {
        SlopeMode::Unit => Some(1.0),
        SlopeMode::Free => None,
    })?;
    let design = linear_fit(data, None).map(|f| f.condition_number).unwrap_or(f64::INFINITY);
    if fit.covariance.iter().flatten().any(|v| !v.is_finite()) || fit.covariance[1][1] < 0.0 {
        return Err(Error::Fit("negative or non-finite variance".into()));
    }
    Ok((fit, design))
}

/// Fits P_out/(G_tot k_B B) = T_in + T_add + T_bkg/(G_HEMT·G).
/// `sweep.x` is T_in (K), `sweep.y` the output power (W) with optional σ.
pub fn fit_added_noise(sweep: &SweepRecord, chain: &ReceiverChain, mode: SlopeMode) -> Result<AddedNoiseFit> {
    let mut warnings = chain.validate()?;
    sweep.validate()?;
    warnings.extend(check_protocol(&sweep.x)?);
    let data = referred(sweep, chain, sweep.x.clone())?;
    let (fit, design) = offset_fit(&data, mode)?;
    let background = chain.t_bkg / (chain.g_hemt * chain.gain);
    let t_add = fit.params[1] - background;
    let stat = fit.sigma(1);

    // refit with the input temperatures rescaled by the insertion-loss
    // uncertainty on one side
    let sys = if chain.il_asymmetry_db > 0.0 {
        let mut shifted = Vec::with_capacity(2);
        for sign in [-1.0, 1.0] {
            let k = linear_from_db(sign * chain.il_asymmetry_db);
            let d = SweepRecord { x: data.x.iter().map(|x| x * k).collect(), ..data.clone() };
            shifted.push(offset_fit(&d, mode)?.0.params[1]);
        }
        0.5 * (shifted[1] - shifted[0]).abs()
    } else {
        0.0
    };
    if t_add < 0.0 {
        warnings.push(format!("fitted added noise is negative ({t_add:.4e} K)"));
    }
    Ok(AddedNoiseFit {
        t_add,
        t_add_sigma: stat.hypot(sys),
        t_add_sigma_stat: stat,
        t_add_sigma_sys: sys,
        slope: fit.params[0],
        slope_sigma: fit.sigma(0),
        background,
        design_condition: design,
        fit,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KipaNoise {
    pub t_kipa: f64,
    /// Set when the result is negative and therefore unphysical.
    pub unphysical: bool,
}

/// T_KIPA = T_add − T_HEMT/G.
pub fn kipa_noise_from_added(t_add: f64, g: f64, t_hemt: f64) -> Result<KipaNoise> {
    if !(g >= 1.0) {
        return Err(Error::domain(format!("gain must be at least 1, got {g}")));
    }
    let t_kipa = t_add - t_hemt / g;
    Ok(KipaNoise { t_kipa, unphysical: t_kipa < 0.0 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HemtFit {
    pub t_hemt: f64,
    pub t_hemt_sigma: f64,
    pub slope: f64,
    pub slope_sigma: f64,
    pub background: f64,
    pub design_condition: f64,
    pub fit: FitResult,
    pub warnings: Vec<String>,
}

/// Noise reaching the HEMT through a 50 Ω through, 2η_e (hf/2k_B) coth(hf/2k_B T).
pub fn hemt_input_noise(t_vts: f64, f_signal: f64, eta_e: f64) -> f64 {
    2.0 * eta_e * coth_noise_temperature(t_vts, f_signal)
}

/// HEMT calibration: P_out/(G_tot k_B B) = T_in^(H) + T_HEMT + T_bkg/G_HEMT.
/// `sweep.x` is T_VTS (K), `sweep.y` the output power (W).
pub fn fit_hemt_noise(sweep: &SweepRecord, chain: &ReceiverChain, f_signal: f64, mode: SlopeMode) -> Result<HemtFit> {
    let mut warnings = chain.validate()?;
    sweep.validate()?;
    if sweep.x.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::Fit("VTS temperatures must be positive".into()));
    }
    let x: Vec<f64> = sweep.x.iter().map(|t| hemt_input_noise(*t, f_signal, chain.eta_e)).collect();
    warnings.extend(check_protocol(&x)?);
    let data = referred(sweep, chain, x)?;
    let (fit, design) = offset_fit(&data, mode)?;
    let background = chain.t_bkg / chain.g_hemt;
    Ok(HemtFit {
        t_hemt: fit.params[1] - background,
        t_hemt_sigma: fit.sigma(1),
        slope: fit.params[0],
        slope_sigma: fit.sigma(0),
        background,
        design_condition: design,
        fit,
        warnings,
    })
}

/// Photon number after one stage at frequency `f_hz`.
///
/// Attenuation: N' = ηN + (1 − η) n_BE(T). Gain: N' = G (N + n_BE(T)) with T
/// the stage's input-referred noise temperature.
pub fn propagate_noise(n_in: f64, element: &ChainElement, f_hz: f64) -> Result<f64> {
    element.validate()?;
    if !(f_hz > 0.0) {
        return Err(Error::domain("frequency must be positive"));
    }
    let n_e = bose_einstein(element.physical_temperature, f_hz);
    let r = element.ratio();
    Ok(match element.kind {
        ElementKind::Attenuation => r * n_in + (1.0 - r) * n_e,
        ElementKind::Gain => r * (n_in + n_e),
    })
}

/// Photon number after each stage, in order.
pub fn propagate_chain(n_in: f64, elements: &[ChainElement], f_hz: f64) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(elements.len());
    let mut n = n_in;
    for e in elements {
        n = propagate_noise(n, e, f_hz)?;
        out.push(n);
    }
    Ok(out)
}

/// Coefficient of T_att in the hot-attenuator added-noise model,
/// [1 − η_e + η_e²(1 − η_IL) + η²G]/(ηG).
pub fn attenuator_coefficient(chain: &ReceiverChain) -> f64 {
    let (e, il, eta, g) = (chain.eta_e, chain.eta_il, chain.eta(), chain.gain);
    (1.0 - e + e * e * (1.0 - il) + eta * eta * g) / (eta * g)
}

/// Added noise with a hot attenuator at `t_att`:
/// T_HEMT/(ηG) + T_att·[1 − η_e + η_e²(1 − η_IL) + η²G]/(ηG) + T_KIPA.
pub fn high_temp_added_noise(chain: &ReceiverChain, t_att: f64, t_kipa: f64) -> f64 {
    chain.t_hemt / (chain.eta() * chain.gain) + t_att * attenuator_coefficient(chain) + t_kipa
}

/// Amplifier noise from one measured added-noise value at attenuator
/// temperature `t_att`.
pub fn kipa_noise_from_high_temp(chain: &ReceiverChain, t_att: f64, t_add: f64) -> f64 {
    t_add - high_temp_added_noise(chain, t_att, 0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HighTempFit {
    pub t_kipa: f64,
    pub t_kipa_sigma: f64,
    pub fit: FitResult,
}

/// T_KIPA from a sweep of added noise (y, K) against attenuator temperature
/// (x, K), with the attenuator coefficient fixed by the chain.
pub fn fit_high_temp_kipa(sweep: &SweepRecord, chain: &ReceiverChain) -> Result<HighTempFit> {
    chain.validate()?;
    let fit = linear_fit(sweep, Some(attenuator_coefficient(chain)))?;
    let t_kipa = fit.params[1] - chain.t_hemt / (chain.eta() * chain.gain);
    Ok(HighTempFit { t_kipa, t_kipa_sigma: fit.sigma(1), fit })
}

/// Mean resonator occupation n̄ = κ/(κ+γ) n(T_bath) + γ/(κ+γ) n(T_dev).
pub fn radiative_cooling(kappa: f64, gamma: f64, t_bath: f64, t_dev: f64, f_hz: f64) -> Result<f64> {
    if !(kappa >= 0.0 && gamma >= 0.0 && kappa + gamma > 0.0) {
        return Err(Error::domain("rates must be non-negative with a positive sum"));
    }
    if !(t_bath >= 0.0 && t_dev >= 0.0 && f_hz > 0.0) {
        return Err(Error::domain("temperatures must be non-negative and frequency positive"));
    }
    let total = kappa + gamma;
    Ok(kappa / total * bose_einstein(t_bath, f_hz) + gamma / total * bose_einstein(t_dev, f_hz))
}
