//! Input-output theory of the pumped two-port cavity.
//!
//! Rates on [`PumpedCavity`] (κ, γ, Δ, ξ) are angular, in rad/s. Probe and pump
//! frequencies are ordinary Hz; the offset from half the pump is converted
//! with ω = 2π(f − f_p/2).

use std::f64::consts::PI;
use std::fmt;

use log::debug;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitkit::{nlls_fit, FitResult, SweepRecord};
use crate::quantities::{angular, db_from_linear};

/// Symmetric two-port cavity under a three-wave-mixing pump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpedCavity {
    /// External rate per port, rad/s.
    pub kappa: f64,
    /// Internal loss rate, rad/s.
    pub gamma: f64,
    /// Detuning of the resonator from half the pump, rad/s.
    pub delta: f64,
    /// Complex pump strength, rad/s.
    pub xi: Complex64,
    /// Hz
    pub f_pump: f64,
}

impl PumpedCavity {
    pub fn new(kappa: f64, gamma: f64, delta: f64, xi: Complex64, f_pump: f64) -> Result<Self> {
        let cav = PumpedCavity { kappa, gamma, delta, xi, f_pump };
        cav.validate()?;
        Ok(cav)
    }

    /// Builds a cavity from rates given as ordinary frequencies (κ/2π etc.).
    pub fn from_hz(kappa_hz: f64, gamma_hz: f64, delta_hz: f64, xi_hz: Complex64, f_pump: f64) -> Result<Self> {
        Self::new(angular(kappa_hz), angular(gamma_hz), angular(delta_hz), xi_hz * (2.0 * PI), f_pump)
    }

    /// Pump strength with magnitude `xi_mag` and pump phase ψ_p, ξ = −|ξ| e^{−iψ_p}.
    pub fn with_pump_phase(self, xi_mag: f64, psi_p: f64) -> Self {
        PumpedCavity { xi: -xi_mag * Complex64::from_polar(1.0, -psi_p), ..self }
    }

    /// Phase for which the in-phase quadrature X is deamplified: ξ = −i|ξ|.
    pub fn squeeze_aligned(self, xi_mag: f64) -> Self {
        self.with_pump_phase(xi_mag, 1.5 * PI)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::domain(format!("kappa must be positive, got {}", self.kappa)));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::domain(format!("gamma must be non-negative, got {}", self.gamma)));
        }
        if !self.delta.is_finite() || !self.xi.re.is_finite() || !self.xi.im.is_finite() {
            return Err(Error::domain("detuning and pump strength must be finite"));
        }
        if !(self.f_pump > 0.0) {
            return Err(Error::domain(format!("pump frequency must be positive, got {} Hz", self.f_pump)));
        }
        Ok(())
    }

    /// κ̄ = (2κ + γ)/2, total half-linewidth in transmission.
    pub fn kappa_bar(&self) -> f64 {
        (2.0 * self.kappa + self.gamma) / 2.0
    }

    /// κ̃ = (κ + γ)/2, total half-linewidth in reflection.
    pub fn kappa_tilde(&self) -> f64 {
        (self.kappa + self.gamma) / 2.0
    }

    /// Parametric threshold √(κ̄² + Δ²); above it a pole crosses the real axis.
    pub fn threshold(&self) -> f64 {
        self.kappa_bar().hypot(self.delta)
    }

    pub fn is_stable(&self) -> bool {
        self.xi.norm() < self.threshold()
    }

    pub fn check_stable(&self) -> Result<()> {
        if self.is_stable() {
            Ok(())
        } else {
            Err(Error::SelfOscillation { xi_mag: self.xi.norm(), threshold: self.threshold() })
        }
    }

    /// ω = 2π(f − f_p/2), rad/s.
    pub fn offset(&self, f: f64) -> f64 {
        angular(f - self.f_pump / 2.0)
    }

    fn denominator(&self, omega: f64) -> Complex64 {
        let kb = Complex64::new(self.kappa_bar(), -omega);
        self.delta * self.delta + kb * kb - self.xi.norm_sqr()
    }

    fn checked_denominator(&self, omega: f64) -> Result<Complex64> {
        let d = self.denominator(omega);
        let kb = self.kappa_bar();
        if d.norm() < 1e-12 * kb * kb {
            return Err(Error::Singularity(format!("|denominator| = {:.3e} at ω = {omega:.6e} rad/s", d.norm())));
        }
        Ok(d)
    }
}

fn signal_numerator(cav: &PumpedCavity, omega: f64) -> Complex64 {
    Complex64::new(cav.kappa * cav.kappa_bar(), -cav.kappa * (cav.delta + omega))
}

/// Signal gain g_s at probe frequency `f` (Hz). Errors in the self-oscillation
/// regime and next to a pole.
pub fn signal_gain(cav: &PumpedCavity, f: f64) -> Result<Complex64> {
    cav.check_stable()?;
    signal_gain_unchecked(cav, f)
}

/// As [`signal_gain`] without the stability requirement.
pub fn signal_gain_unchecked(cav: &PumpedCavity, f: f64) -> Result<Complex64> {
    let omega = cav.offset(f);
    Ok(signal_numerator(cav, omega) / cav.checked_denominator(omega)?)
}

/// Idler gain g_i at probe frequency `f` (Hz).
pub fn idler_gain(cav: &PumpedCavity, f: f64) -> Result<Complex64> {
    cav.check_stable()?;
    idler_gain_unchecked(cav, f)
}

pub fn idler_gain_unchecked(cav: &PumpedCavity, f: f64) -> Result<Complex64> {
    let omega = cav.offset(f);
    Ok(-Complex64::i() * cav.xi * cav.kappa / cav.checked_denominator(omega)?)
}

/// Transmission gain written with absolute angular probe frequency ω_s and
/// the explicit (2κ+γ)/2 linewidth, as used for fitting measured curves.
pub fn transmission_gain_absolute(cav: &PumpedCavity, omega_s: f64) -> Complex64 {
    let omega_p = angular(cav.f_pump);
    let half = (2.0 * cav.kappa + cav.gamma) / 2.0;
    let num = Complex64::new(cav.kappa * half, -cav.kappa * (cav.delta + omega_s - omega_p / 2.0));
    let kb = Complex64::new(half, -(omega_s - omega_p / 2.0));
    num / (cav.delta * cav.delta + kb * kb - cav.xi.norm_sqr())
}

/// Quantum bookkeeping of the two-port relations at probe `f`:
/// (|g_s|² − |g_i|², full commutator sum). The second entry is 1 for every
/// stable cavity; the first is only reported.
pub fn photon_balance(cav: &PumpedCavity, f: f64) -> Result<(f64, f64)> {
    let gs = signal_gain(cav, f)?;
    let gi = idler_gain(cav, f)?;
    let simple = gs.norm_sqr() - gi.norm_sqr();
    let full = simple + (gs - 1.0).norm_sqr() - gi.norm_sqr() + cav.gamma / cav.kappa * simple;
    Ok((simple, full))
}

/// Phase-sensitive gain at f = f_p/2 for pump phase `psi_p` (rad).
pub fn degenerate_gain(cav: &PumpedCavity, psi_p: f64) -> Result<Complex64> {
    degenerate_gain_with_offset(cav, psi_p, 0.0)
}

/// As [`degenerate_gain`] with the measured phase shifted by `phase_offset`,
/// for aligning an instrument's phase reference.
pub fn degenerate_gain_with_offset(cav: &PumpedCavity, psi_p: f64, phase_offset: f64) -> Result<Complex64> {
    cav.check_stable()?;
    let kb = cav.kappa_bar();
    let psi = psi_p + phase_offset;
    let i = Complex64::i();
    let num = cav.kappa * kb + i * cav.kappa * cav.delta + i * cav.kappa * cav.xi.norm() * Complex64::from_polar(1.0, -psi);
    let den = cav.delta * cav.delta + kb * kb - cav.xi.norm_sqr();
    if den.abs() < 1e-12 * kb * kb {
        return Err(Error::Singularity("degenerate gain at the parametric threshold".into()));
    }
    Ok(num / den)
}

/// Maximum deamplification in transmission, κ/(κ̄ + |ξ|). Defined up to and
/// including |ξ| = κ̄ where it reaches κ/(2κ̄).
pub fn transmission_deamp(cav: &PumpedCavity) -> f64 {
    cav.kappa / (cav.kappa_bar() + cav.xi.norm())
}

/// Maximum deamplification in reflection, |κ/(κ̃ + |ξ|) − 1|.
pub fn reflection_deamp(cav: &PumpedCavity) -> f64 {
    (cav.kappa / (cav.kappa_tilde() + cav.xi.norm()) - 1.0).abs()
}

/// Quadrature transfer matrix G_m with ε = g_s + g_i*, ε′ = g_s − g_i*.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureTransfer {
    pub matrix: [[f64; 2]; 2],
    pub epsilon: Complex64,
    pub epsilon_prime: Complex64,
}

impl QuadratureTransfer {
    /// Gain of the X quadrature, Re ε.
    pub fn g_x(&self) -> f64 {
        self.matrix[0][0]
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.matrix;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }
}

pub fn quadrature_transfer(cav: &PumpedCavity, f: f64) -> Result<QuadratureTransfer> {
    let gs = signal_gain(cav, f)?;
    let gi = idler_gain(cav, f)?;
    let eps = gs + gi.conj();
    let eps_p = gs - gi.conj();
    Ok(QuadratureTransfer { matrix: [[eps.re, -eps.im], [eps_p.im, eps_p.re]], epsilon: eps, epsilon_prime: eps_p })
}

/// Effective second-port contribution n_κ2 = (√G_X − 1)/(√G_X + 1)·⟨X²_2,in⟩.
pub fn n_kappa2(g_x: f64, x2_in_var: f64) -> Result<f64> {
    if !(g_x > 0.0) {
        return Err(Error::domain(format!("quadrature gain must be positive, got {g_x}")));
    }
    let s = g_x.sqrt();
    Ok((s - 1.0) / (s + 1.0) * x2_in_var)
}

/// Internal-loss contribution n_γ = (γ/κ)·⟨X²_b,in⟩.
pub fn n_gamma(cav: &PumpedCavity, xb_in_var: f64) -> f64 {
    cav.gamma / cav.kappa * xb_in_var
}

/// ⟨X²_out⟩ = G_X·⟨X²_1,in⟩ + (G_X − 1) n_κ2 + G_X n_γ for a given quadrature gain.
pub fn output_variance_from_gx(g_x: f64, x_in_var: f64, n_k2: f64, n_g: f64) -> Result<f64> {
    if !(g_x > 0.0) {
        return Err(Error::domain(format!("quadrature gain must be positive, got {g_x}")));
    }
    Ok(g_x * x_in_var + (g_x - 1.0) * n_k2 + g_x * n_g)
}

/// Output X variance at band center, with G_X taken from the cavity.
pub fn output_quadrature_variance(cav: &PumpedCavity, x_in_var: f64, n_k2: f64, n_g: f64) -> Result<f64> {
    let g_x = quadrature_transfer(cav, cav.f_pump / 2.0)?.g_x();
    output_variance_from_gx(g_x, x_in_var, n_k2, n_g)
}

/// Sampled complex transmission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainCurve {
    pub frequencies: Vec<f64>,
    pub complex_gain: Vec<Complex64>,
    pub power_gain_db: Vec<f64>,
}

impl GainCurve {
    pub fn new(frequencies: Vec<f64>, complex_gain: Vec<Complex64>) -> Result<Self> {
        if frequencies.len() != complex_gain.len() {
            return Err(Error::domain("frequency and gain lists differ in length"));
        }
        let power_gain_db = complex_gain.iter().map(|g| db_from_linear(g.norm_sqr())).collect::<Result<_>>()?;
        Ok(GainCurve { frequencies, complex_gain, power_gain_db })
    }

    /// Curve from power gain only; the phase is set to zero.
    pub fn from_power_db(frequencies: Vec<f64>, power_gain_db: Vec<f64>) -> Result<Self> {
        if frequencies.len() != power_gain_db.len() {
            return Err(Error::domain("frequency and gain lists differ in length"));
        }
        let complex_gain = power_gain_db.iter().map(|db| Complex64::new(10f64.powf(db / 20.0), 0.0)).collect();
        Ok(GainCurve { frequencies, complex_gain, power_gain_db })
    }

    pub fn from_cavity(cav: &PumpedCavity, frequencies: Vec<f64>) -> Result<Self> {
        let g = frequencies.iter().map(|f| signal_gain(cav, *f)).collect::<Result<Vec<_>>>()?;
        Self::new(frequencies, g)
    }

    /// `n` equally spaced points across `center ± half_span`.
    pub fn sweep(cav: &PumpedCavity, center: f64, half_span: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::domain("a sweep needs at least two points"));
        }
        let f = (0..n).map(|k| center - half_span + 2.0 * half_span * k as f64 / (n - 1) as f64).collect();
        Self::from_cavity(cav, f)
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// Rows of `f_hz, re_g, im_g, gain_db`.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["f_hz", "re_g", "im_g", "gain_db"])?;
        for ((f, g), db) in self.frequencies.iter().zip(&self.complex_gain).zip(&self.power_gain_db) {
            wtr.write_record([f.to_string(), g.re.to_string(), g.im.to_string(), db.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let mut f = Vec::new();
        let mut g = Vec::new();
        let mut db = Vec::new();
        for row in rdr.deserialize() {
            let (fh, re, im, gdb): (f64, f64, f64, f64) = row?;
            f.push(fh);
            g.push(Complex64::new(re, im));
            db.push(gdb);
        }
        Ok(GainCurve { frequencies: f, complex_gain: g, power_gain_db: db })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbpEstimate {
    /// √G_peak · δf_3dB, Hz.
    pub gbp_hz: f64,
    pub peak_gain_db: f64,
    pub f_peak_hz: f64,
    pub bandwidth_hz: f64,
}

fn crossing(f0: f64, g0: f64, f1: f64, g1: f64, level: f64) -> f64 {
    f0 + (level - g0) * (f1 - f0) / (g1 - g0)
}

/// Gain-bandwidth product from half-power points interpolated linearly in dB.
pub fn gbp_extract(curve: &GainCurve) -> Result<GbpEstimate> {
    let n = curve.len();
    if n < 3 {
        return Err(Error::Extraction("gain curve has fewer than three points".into()));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|a, b| curve.frequencies[*a].total_cmp(&curve.frequencies[*b]));
    let f: Vec<f64> = idx.iter().map(|i| curve.frequencies[*i]).collect();
    let g: Vec<f64> = idx.iter().map(|i| curve.power_gain_db[*i]).collect();
    let (ipk, &peak) = g.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    let level = peak - 10.0 * 2f64.log10();
    let lo = (0..ipk).rev().find(|&i| g[i] < level);
    let hi = (ipk + 1..n).find(|&i| g[i] < level);
    let (Some(lo), Some(hi)) = (lo, hi) else {
        return Err(Error::Extraction("no resolvable 3 dB bandwidth around the gain peak".into()));
    };
    let f_lo = crossing(f[lo], g[lo], f[lo + 1], g[lo + 1], level);
    let f_hi = crossing(f[hi - 1], g[hi - 1], f[hi], g[hi], level);
    let bw = f_hi - f_lo;
    let gbp = 10f64.powf(peak / 20.0) * bw;
    debug!("gbp: peak {peak:.3} dB at {:.6e} Hz, bandwidth {bw:.6e} Hz", f[ipk]);
    Ok(GbpEstimate { gbp_hz: gbp, peak_gain_db: peak, f_peak_hz: f[ipk], bandwidth_hz: bw })
}

/// Least-squares fit of measured power gain to the transmission model with
/// fixed internal loss. Frequencies in Hz, gains in dB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainFit {
    pub kappa_hz: f64,
    pub kappa_sigma_hz: f64,
    pub delta_hz: f64,
    pub delta_sigma_hz: f64,
    pub xi_hz: f64,
    pub xi_sigma_hz: f64,
    pub gbp: GbpEstimate,
    pub fit: FitResult,
}

/// Fits κ, Δ ≥ 0 and |ξ| (all as ordinary frequencies) to a phase-insensitive
/// gain curve `data` (x = f in Hz, y = gain in dB).
pub fn fit_gain_curve(data: &SweepRecord, f_pump: f64, gamma_hz: f64) -> Result<GainFit> {
    let curve = GainCurve::from_power_db(data.x.clone(), data.y.clone())?;
    let rough = gbp_extract(&curve)?;
    let kappa0 = rough.gbp_hz;
    let kb0 = kappa0 + gamma_hz / 2.0;
    let root_g = 10f64.powf(rough.peak_gain_db / 20.0);
    let xi0 = (kb0 * kb0 - kappa0 * kb0 / root_g).max(0.0).sqrt();
    // fit in MHz so the parameters are of order one
    let scale = 1e6;
    let model = |f: f64, p: &[f64]| {
        let cav = PumpedCavity {
            kappa: angular(p[0] * scale),
            gamma: angular(gamma_hz),
            delta: angular(p[1] * scale),
            xi: Complex64::new(angular(p[2] * scale), 0.0),
            f_pump,
        };
        match signal_gain(&cav, f) {
            Ok(g) => 10.0 * g.norm_sqr().log10(),
            Err(_) => f64::NAN,
        }
    };
    let k = kappa0 / scale;
    let bounds = [(k * 1e-2, k * 1e2), (0.0, 10.0 * k), (0.0, 10.0 * k)];
    let fit = nlls_fit(model, data, &[k, 0.0, 0.999 * xi0 / scale], Some(&bounds))?;
    let p = &fit.params;
    let cav = PumpedCavity::from_hz(p[0] * scale, gamma_hz, p[1] * scale, Complex64::new(p[2] * scale, 0.0), f_pump)?;
    let bw = rough.bandwidth_hz.max(1e-6 * f_pump);
    let dense = GainCurve::sweep(&cav, f_pump / 2.0, 4.0 * bw, 4001)?;
    let gbp = gbp_extract(&dense)?;
    Ok(GainFit {
        kappa_hz: p[0] * scale,
        kappa_sigma_hz: fit.sigma(0) * scale,
        delta_hz: p[1] * scale,
        delta_sigma_hz: fit.sigma(1) * scale,
        xi_hz: p[2] * scale,
        xi_sigma_hz: fit.sigma(2) * scale,
        gbp,
        fit,
    })
}

/// Peak phase-insensitive power gain over probe frequency, and the probe
/// offset from f_p/2 (Hz) where it occurs.
pub fn peak_gain(cav: &PumpedCavity) -> Result<(f64, f64)> {
    cav.check_stable()?;
    let kb = cav.kappa_bar();
    let reach = cav.delta.abs() + 4.0 * kb;
    let power = |omega: f64| -> Result<f64> {
        let d = cav.checked_denominator(omega)?;
        Ok((signal_numerator(cav, omega) / d).norm_sqr())
    };
    let n = 400;
    let step = 2.0 * reach / n as f64;
    let mut best = (0.0, power(0.0)?);
    for k in 0..=n {
        let w = -reach + k as f64 * step;
        let p = power(w)?;
        if p > best.1 {
            best = (w, p);
        }
    }
    // golden-section refinement inside the neighbouring cells
    let (mut a, mut b) = (best.0 - step, best.0 + step);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut pc, mut pd) = (power(c)?, power(d)?);
    for _ in 0..100 {
        if (b - a).abs() < 1e-12 * kb {
            break;
        }
        if pc > pd {
            b = d;
            d = c;
            pd = pc;
            c = b - r * (b - a);
            pc = power(c)?;
        } else {
            a = c;
            c = d;
            pc = pd;
            d = a + r * (b - a);
            pd = power(d)?;
        }
    }
    let w = 0.5 * (a + b);
    let p = power(w)?;
    let (w, p) = if p >= best.1 { (w, p) } else { best };
    Ok((w / (2.0 * PI), p))
}

/// Peak gain as a function of pump frequency and power. Implementations must
/// be free of side effects; the search evaluates them concurrently.
pub trait GainMap: Sync {
    /// Peak gain in dB. Beyond the parametric threshold return
    /// [`Error::SelfOscillation`].
    fn peak_gain_db(&self, f_pump: f64, p_pump_dbm: f64) -> Result<f64>;
}

/// Synthetic map from the cavity model: Δ = 2π(f_r − f_p/2) and |ξ| grows as
/// the square root of pump power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityGainMap {
    pub f_r_hz: f64,
    pub kappa_hz: f64,
    pub gamma_hz: f64,
    /// |ξ|/2π in Hz at 0 dBm pump.
    pub xi_hz_at_0dbm: f64,
}

impl CavityGainMap {
    pub fn cavity(&self, f_pump: f64, p_pump_dbm: f64) -> Result<PumpedCavity> {
        let xi = self.xi_hz_at_0dbm * 10f64.powf(p_pump_dbm / 20.0);
        PumpedCavity::from_hz(self.kappa_hz, self.gamma_hz, self.f_r_hz - f_pump / 2.0, Complex64::new(xi, 0.0), f_pump)
    }
}

impl GainMap for CavityGainMap {
    fn peak_gain_db(&self, f_pump: f64, p_pump_dbm: f64) -> Result<f64> {
        let (_, g) = peak_gain(&self.cavity(f_pump, p_pump_dbm)?)?;
        db_from_linear(g)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpSearchConfig {
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    /// Coarse grid points across [f_min, f_max].
    pub n_coarse: usize,
    pub p_min_dbm: f64,
    pub p_max_dbm: f64,
    /// Power ramp increment.
    pub p_step_db: f64,
    /// Final pump frequency resolution.
    pub f_resolution_hz: f64,
    /// Bisection tolerance on the pump power.
    pub p_tolerance_db: f64,
}

impl PumpSearchConfig {
    pub fn around(f_center: f64, half_span: f64, p_min_dbm: f64, p_max_dbm: f64) -> Self {
        PumpSearchConfig {
            f_min_hz: f_center - half_span,
            f_max_hz: f_center + half_span,
            n_coarse: 41,
            p_min_dbm,
            p_max_dbm,
            p_step_db: 1.0,
            f_resolution_hz: 10e3,
            p_tolerance_db: 1e-10,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.f_min_hz > 0.0 && self.f_max_hz > self.f_min_hz) {
            return Err(Error::config("pump search needs 0 < f_min < f_max"));
        }
        if self.n_coarse < 2 || !(self.p_step_db > 0.0) || !(self.p_max_dbm >= self.p_min_dbm) {
            return Err(Error::config("pump search needs n_coarse >= 2, p_step > 0 and p_max >= p_min"));
        }
        if !(self.f_resolution_hz > 0.0 && self.p_tolerance_db > 0.0) {
            return Err(Error::config("pump search tolerances must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpOperatingPoint {
    pub f_pump_hz: f64,
    pub p_pump_dbm: f64,
    pub gain_db: f64,
}

/// Best point seen by a search that did not reach its target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpSearchFailure {
    pub target_db: f64,
    pub best_f_pump_hz: f64,
    pub best_p_pump_dbm: f64,
    pub best_gain_db: f64,
    /// The ramp ran into the self-oscillation regime before reaching target.
    pub self_oscillation: bool,
}

impl fmt::Display for PumpSearchFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "target {:.2} dB not reached; best {:.2} dB at f_p = {:.6} GHz, P_p = {:.2} dBm{}",
            self.target_db,
            self.best_gain_db,
            self.best_f_pump_hz / 1e9,
            self.best_p_pump_dbm,
            if self.self_oscillation { " (self-oscillation encountered)" } else { "" }
        )
    }
}

enum Ramp {
    Reached { p: f64, gain: f64 },
    Missed { p: f64, gain: f64, unstable: bool },
}

fn evaluate(map: &dyn GainMap, f: f64, p: f64) -> Result<Option<f64>> {
    match map.peak_gain_db(f, p) {
        Ok(g) => Ok(Some(g)),
        Err(Error::SelfOscillation { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Lowest pump power reaching `target_db` at pump frequency `f`.
fn ramp(map: &dyn GainMap, f: f64, target_db: f64, cfg: &PumpSearchConfig) -> Result<Ramp> {
    let reached = |g: f64| g >= target_db - 1e-9;
    let mut best = (cfg.p_min_dbm, f64::NEG_INFINITY);
    let mut prev = None;
    let mut p = cfg.p_min_dbm;
    loop {
        let g = evaluate(map, f, p)?;
        match g {
            Some(g) if reached(g) => {
                let Some(lo) = prev else { return Ok(Ramp::Reached { p, gain: g }) };
                return bisect(map, f, lo, p, g, target_db, cfg);
            }
            Some(g) => {
                if g > best.1 {
                    best = (p, g);
                }
            }
            None => {
                let Some(lo) = prev else {
                    return Ok(Ramp::Missed { p: best.0, gain: best.1, unstable: true });
                };
                return bisect(map, f, lo, p, f64::NAN, target_db, cfg);
            }
        }
        if p >= cfg.p_max_dbm {
            return Ok(Ramp::Missed { p: best.0, gain: best.1, unstable: false });
        }
        prev = Some(p);
        p = (p + cfg.p_step_db).min(cfg.p_max_dbm);
    }
}

/// Shrinks [lo, hi] where `lo` is below target and `hi` is at or above it or
/// unstable.
fn bisect(map: &dyn GainMap, f: f64, mut lo: f64, mut hi: f64, mut g_hi: f64, target_db: f64, cfg: &PumpSearchConfig) -> Result<Ramp> {
    let mut g_lo = evaluate(map, f, lo)?.unwrap_or(f64::NEG_INFINITY);
    while hi - lo > cfg.p_tolerance_db {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match evaluate(map, f, mid)? {
            Some(g) if g < target_db - 1e-9 => {
                lo = mid;
                g_lo = g;
            }
            other => {
                hi = mid;
                g_hi = other.unwrap_or(f64::NAN);
            }
        }
    }
    if g_hi.is_finite() && g_hi >= target_db - 1e-9 {
        Ok(Ramp::Reached { p: hi, gain: g_hi })
    } else {
        Ok(Ramp::Missed { p: lo, gain: g_lo, unstable: true })
    }
}

/// Lowest-power pump setting reaching `target_db`: a coarse frequency grid,
/// a power ramp with bisection at each frequency, then golden-section
/// refinement of the pump frequency down to `f_resolution_hz`.
pub fn find_optimal_pump(map: &dyn GainMap, target_db: f64, cfg: &PumpSearchConfig) -> Result<PumpOperatingPoint> {
    cfg.validate()?;
    let n = cfg.n_coarse;
    let grid: Vec<f64> = (0..n).map(|k| cfg.f_min_hz + (cfg.f_max_hz - cfg.f_min_hz) * k as f64 / (n - 1) as f64).collect();
    let ramps = grid.par_iter().map(|f| ramp(map, *f, target_db, cfg)).collect::<Result<Vec<_>>>()?;

    let mut best: Option<(usize, f64, f64)> = None;
    let mut failure = PumpSearchFailure {
        target_db,
        best_f_pump_hz: grid[0],
        best_p_pump_dbm: cfg.p_min_dbm,
        best_gain_db: f64::NEG_INFINITY,
        self_oscillation: false,
    };
    for (k, r) in ramps.iter().enumerate() {
        match *r {
            Ramp::Reached { p, gain } => {
                if best.is_none_or(|(_, bp, _)| p < bp) {
                    best = Some((k, p, gain));
                }
            }
            Ramp::Missed { p, gain, unstable } => {
                failure.self_oscillation |= unstable;
                if gain > failure.best_gain_db {
                    failure.best_gain_db = gain;
                    failure.best_f_pump_hz = grid[k];
                    failure.best_p_pump_dbm = p;
                }
            }
        }
    }
    let Some((k, p_best, g_best)) = best else {
        return Err(Error::SearchFailed(Box::new(failure)));
    };
    debug!("pump search coarse optimum at {:.6e} Hz, {p_best:.4} dBm", grid[k]);

    let cost = |f: f64| -> Result<(f64, f64)> {
        Ok(match ramp(map, f, target_db, cfg)? {
            Ramp::Reached { p, gain } => (p, gain),
            Ramp::Missed { .. } => (f64::INFINITY, f64::NAN),
        })
    };
    let h = (cfg.f_max_hz - cfg.f_min_hz) / (n - 1) as f64;
    let mut a = (grid[k] - h).max(cfg.f_min_hz);
    let mut b = (grid[k] + h).min(cfg.f_max_hz);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (cost(c)?, cost(d)?);
    let mut point = (grid[k], p_best, g_best);
    while b - a > cfg.f_resolution_hz {
        if fc.0 <= fd.0 {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = cost(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = cost(d)?;
        }
    }
    for (f, (p, g)) in [(c, fc), (d, fd)] {
        if p < point.1 {
            point = (f, p, g);
        }
    }
    Ok(PumpOperatingPoint { f_pump_hz: point.0, p_pump_dbm: point.1, gain_db: point.2 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompressionPoint {
    pub p_in_1db_dbm: f64,
    pub p_out_sat_dbm: f64,
}

/// Output saturation power for a known input 1 dB point:
/// P_out = P_in,1dB + (G_small − 1 dB).
pub fn compression_from_input(p_in_1db_dbm: f64, small_signal_db: f64) -> CompressionPoint {
    CompressionPoint { p_in_1db_dbm, p_out_sat_dbm: p_in_1db_dbm + small_signal_db - 1.0 }
}

/// Input power where the gain first falls 1 dB below `small_signal_db`, by
/// linear interpolation of gain (dB) against input power (dBm).
/// `sweep.x` is input power in dBm, `sweep.y` gain in dB.
pub fn compression_point(sweep: &SweepRecord, small_signal_db: f64) -> Result<CompressionPoint> {
    sweep.validate()?;
    let mut pts: Vec<(f64, f64)> = sweep.x.iter().copied().zip(sweep.y.iter().copied()).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let level = small_signal_db - 1.0;
    if pts.first().is_none_or(|p| p.1 <= level) {
        return Err(Error::Extraction("no small-signal plateau above the 1 dB compression level".into()));
    }
    let i = pts
        .iter()
        .position(|p| p.1 <= level)
        .ok_or_else(|| Error::Extraction("gain never compresses by 1 dB".into()))?;
    let (p0, g0) = pts[i - 1];
    let (p1, g1) = pts[i];
    Ok(compression_from_input(crossing(p0, g0, p1, g1, level), small_signal_db))
}
