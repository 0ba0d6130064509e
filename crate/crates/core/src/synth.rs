//! Seeded synthetic datasets for plant-and-recover checks.
//!
//! Every generator takes a 64-bit seed and draws Gaussian noise from
//! ChaCha20 (`rand_chacha::ChaCha20Rng::seed_from_u64`) through
//! `rand_distr::Normal`. The same seed gives bit-identical data within one
//! build. A noise level of zero returns exact data without `sigma_y`.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

use crate::env_models::{field_frequency_shift, FieldModel};
use crate::error::{Error, Result};
use crate::fitkit::SweepRecord;
use crate::io_dynamics::{signal_gain, PumpedCavity};
use crate::ki_device::{resonance_vs_bias, ResonatorParams};
use crate::noise_cal::{hemt_input_noise, input_noise, vts_output_noise, ReceiverChain, VtsSetpoint};

/// The generator behind every dataset.
pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Adds N(0, σ_i²) to each `y_i`; σ_i = 0 everywhere returns the input.
pub fn add_noise(x: Vec<f64>, y: Vec<f64>, sigma: Vec<f64>, seed: u64) -> Result<SweepRecord> {
    if sigma.iter().all(|s| *s == 0.0) {
        return SweepRecord::new(x, y);
    }
    let mut r = rng(seed);
    let mut noisy = Vec::with_capacity(y.len());
    for (v, s) in y.iter().zip(&sigma) {
        let n = Normal::new(0.0, *s).map_err(|e| Error::config(format!("noise level {s}: {e}")))?;
        noisy.push(v + n.sample(&mut r));
    }
    SweepRecord::with_sigma(x, noisy, sigma)
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

/// Power gain in dB across `center ± half_span` with additive noise of
/// `sigma_db`.
pub fn gain_curve(cav: &PumpedCavity, center: f64, half_span: f64, n: usize, sigma_db: f64, seed: u64) -> Result<SweepRecord> {
    let f = linspace(center - half_span, center + half_span, n);
    let y = f
        .iter()
        .map(|f| signal_gain(cav, *f).map(|g| 10.0 * g.norm_sqr().log10()))
        .collect::<Result<Vec<_>>>()?;
    add_noise(f, y, vec![sigma_db; n], seed)
}

/// Output powers (W) of an added-noise measurement at VTS temperatures
/// `temps`; x holds the input-referred T_in. Noise is relative to P_out.
pub fn noise_sweep(chain: &ReceiverChain, t_add: f64, temps: &[f64], f_signal: f64, rel_noise: f64, seed: u64) -> Result<SweepRecord> {
    let bkg = chain.t_bkg / (chain.g_hemt * chain.gain);
    let mut x = Vec::with_capacity(temps.len());
    let mut y = Vec::with_capacity(temps.len());
    for t in temps {
        let sp = VtsSetpoint { t_vts: *t, f_signal, f_idler: f_signal, g_conv: None };
        let t_in = input_noise(vts_output_noise(&sp, chain.gain)?, chain);
        x.push(t_in);
        y.push(chain.output_power(t_in + t_add + bkg));
    }
    let sigma = y.iter().map(|p| rel_noise * p).collect();
    add_noise(x, y, sigma, seed)
}

/// HEMT calibration sweep; x holds T_VTS.
pub fn hemt_sweep(chain: &ReceiverChain, t_hemt: f64, temps: &[f64], f_signal: f64, rel_noise: f64, seed: u64) -> Result<SweepRecord> {
    let bkg = chain.t_bkg / chain.g_hemt;
    let y: Vec<f64> =
        temps.iter().map(|t| chain.output_power(hemt_input_noise(*t, f_signal, chain.eta_e) + t_hemt + bkg)).collect();
    let sigma = y.iter().map(|p| rel_noise * p).collect();
    add_noise(temps.to_vec(), y, sigma, seed)
}

/// Relative shift Δω/ω at fields `b` (T) with absolute noise.
pub fn field_sweep(model: &FieldModel, b: &[f64], sigma: f64, seed: u64) -> Result<SweepRecord> {
    let y = b.iter().map(|b| field_frequency_shift(*b, model)).collect();
    add_noise(b.to_vec(), y, vec![sigma; b.len()], seed)
}

/// Resonance frequency (Hz) against dc bias (A) with noise in Hz.
pub fn tuning_sweep(res: &ResonatorParams, currents: &[f64], sigma_hz: f64, seed: u64) -> Result<SweepRecord> {
    let y = currents.iter().map(|i| resonance_vs_bias(*i, res).map(|f| f.hz())).collect::<Result<Vec<_>>>()?;
    add_noise(currents.to_vec(), y, vec![sigma_hz; currents.len()], seed)
}

/// Gain (dB) against input power (dBm) compressing by exactly 1 dB at
/// `p1db_dbm`: G(P) = G₀ − 2/(1 + exp(−(P − P₁)/w)).
pub fn compression_sweep(g0_db: f64, p1db_dbm: f64, width_db: f64, powers: &[f64], sigma_db: f64, seed: u64) -> Result<SweepRecord> {
    if !(width_db > 0.0) {
        return Err(Error::config("compression width must be positive"));
    }
    let y = powers.iter().map(|p| g0_db - 2.0 / (1.0 + (-(p - p1db_dbm) / width_db).exp())).collect();
    add_noise(powers.to_vec(), y, vec![sigma_db; powers.len()], seed)
}

/// Complex gain samples perturbed by circular Gaussian noise, for CSV export.
pub fn complex_gain_samples(cav: &PumpedCavity, freqs: &[f64], sigma: f64, seed: u64) -> Result<Vec<Complex64>> {
    let clean = freqs.iter().map(|f| signal_gain(cav, *f)).collect::<Result<Vec<_>>>()?;
    if sigma == 0.0 {
        return Ok(clean);
    }
    let n = Normal::new(0.0, sigma).map_err(|e| Error::config(format!("noise level {sigma}: {e}")))?;
    let mut r = rng(seed);
    Ok(clean.into_iter().map(|g| g + Complex64::new(n.sample(&mut r), n.sample(&mut r))).collect())
}
