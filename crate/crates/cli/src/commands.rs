//! One function per subcommand. Each returns the inputs it used, its
//! results, warnings, and an optional per-point table.

use std::path::PathBuf;

use kipa_core::env_models::{
    device_temp_from_shift, field_frequency_shift, fit_field_shift, temp_frequency_shift,
};
use kipa_core::fitkit::SweepRecord;
use kipa_core::io::read_sweep_csv;
use kipa_core::io_dynamics::{
    compression_from_input, compression_point, find_optimal_pump, fit_gain_curve, gbp_extract, peak_gain,
    signal_gain, GainCurve, PumpedCavity,
};
use kipa_core::ki_device::{fit_clem_tuning, kerr_dominance_check, resonance_vs_bias, self_kerr};
use kipa_core::microwave_net::design_coupling;
use kipa_core::noise_cal::{
    fit_added_noise, fit_hemt_noise, hemt_input_noise, kipa_noise_from_added, propagate_chain, ReceiverChain,
};
use kipa_core::quantities::{linear_from_db, photon_temperature_equivalent, Frequency, PhotonConvention};
use kipa_core::reproduce::{run_fixture, FixtureReport, FIXTURE_IDS};
use kipa_core::squeeze::{extract_gx, max_measurable_squeezing, squeezing_factor};
use kipa_core::{synth, Error, Result};
use num_complex::Complex64;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::report::{file_hash, Table};

/// Flags shared by every subcommand.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: RunConfig,
    pub seed: u64,
    pub synthetic: bool,
    pub data: Option<PathBuf>,
}

pub struct Outcome {
    pub inputs: Value,
    pub results: Value,
    pub warnings: Vec<String>,
    pub table: Option<Table>,
    /// False when a reference check did not pass.
    pub passed: bool,
}

impl Outcome {
    fn new(inputs: Value, results: Value, warnings: Vec<String>, table: Option<Table>) -> Self {
        Outcome { inputs, results, warnings, table, passed: true }
    }
}

enum Source {
    Model,
    Synthetic,
    File(SweepRecord),
}

impl Context {
    fn source(&self) -> Result<Source> {
        match (&self.data, self.synthetic) {
            (Some(_), true) => Err(Error::Config("--data and --synthetic are mutually exclusive".into())),
            (Some(p), false) => {
                let f = std::fs::File::open(p).map_err(|e| Error::Config(format!("cannot open {}: {e}", p.display())))?;
                Ok(Source::File(read_sweep_csv(f)?))
            }
            (None, true) => Ok(Source::Synthetic),
            (None, false) => Ok(Source::Model),
        }
    }

    /// Flags echoed into the report inputs.
    fn flags(&self) -> Result<Value> {
        let data = match &self.data {
            Some(p) => json!({ "path": p.display().to_string(), "sha256": file_hash(p)? }),
            None => Value::Null,
        };
        Ok(json!({ "seed": self.seed, "synthetic": self.synthetic, "data": data }))
    }

    fn inputs(&self, section: Value) -> Result<Value> {
        Ok(json!({ "flags": self.flags()?, "config": section }))
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("plain data serializes")
}

/// Data, model and residual per point; `sigma_y` only when the data has it.
fn sweep_table(data: &SweepRecord, model: impl Fn(f64) -> f64) -> Table {
    match &data.sigma_y {
        Some(sigma) => {
            let mut t = Table::new(&["x", "y", "sigma_y", "model", "residual"]);
            for ((x, y), s) in data.x.iter().zip(&data.y).zip(sigma) {
                let m = model(*x);
                t.push(&[*x, *y, *s, m, y - m]);
            }
            t
        }
        None => {
            let mut t = Table::new(&["x", "y", "model", "residual"]);
            for (x, y) in data.x.iter().zip(&data.y) {
                let m = model(*x);
                t.push(&[*x, *y, m, y - m]);
            }
            t
        }
    }
}

pub fn design(ctx: &Context) -> Result<Outcome> {
    let sif = ctx.config.sif();
    let d = design_coupling(&sif)?;
    let warnings = d.warnings.clone();
    Ok(Outcome::new(
        ctx.inputs(json!({ "sif": sif }))?,
        json!({ "z_eff_ohm": d.z_eff_ohm, "q_c": d.q_c, "kappa_hz": d.kappa_hz, "kappa_direct_hz": d.kappa_direct_hz }),
        warnings,
        None,
    ))
}

pub fn tune(ctx: &Context, currents: &[f64]) -> Result<Outcome> {
    let res = ctx.config.resonator()?;
    let cfg = &ctx.config.tune;
    let currents = if currents.is_empty() { cfg.currents_a.clone() } else { currents.to_vec() };
    let inputs = ctx.inputs(json!({ "resonator": res, "tune": cfg, "currents_a": currents }))?;
    let mut warnings: Vec<String> = currents.iter().filter_map(|i| res.bias_warning(*i)).collect();
    let fit_data = match ctx.source()? {
        Source::Model => {
            let mut t = Table::new(&["i_dc_a", "f_r_hz", "kerr_hz"]);
            let mut points = Vec::new();
            for i in &currents {
                let f = resonance_vs_bias(*i, &res)?;
                let k = self_kerr(&res, f);
                t.push(&[*i, f.hz(), k]);
                points.push(json!({ "i_dc_a": i, "f_r_hz": f.hz(), "kerr_hz": k }));
            }
            return Ok(Outcome::new(inputs, json!({ "points": points }), warnings, Some(t)));
        }
        Source::Synthetic => synth::tuning_sweep(&res, &currents, cfg.noise_hz, ctx.seed)?,
        Source::File(d) => d,
    };
    let max_i = fit_data.x.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let guess = cfg.guess.unwrap_or((2.0 * max_i, 2.0));
    let fit = fit_clem_tuning(&fit_data, res.alpha, guess)?;
    if !fit.fit.converged {
        warnings.push("tuning fit did not converge".into());
    }
    let fitted = kipa_core::ki_device::ResonatorParams {
        i_star: fit.i_star,
        clem_exponent: fit.clem_exponent,
        f_r0: fit.f_r0,
        i_sw: res.i_sw.min(0.999 * fit.i_star),
        ..res
    };
    let table = sweep_table(&fit_data, |i| resonance_vs_bias(i, &fitted).map_or(f64::NAN, |f| f.hz()));
    let mut results = json!({
        "i_star_a": fit.i_star,
        "i_star_sigma_a": fit.i_star_sigma,
        "clem_exponent": fit.clem_exponent,
        "clem_exponent_sigma": fit.clem_exponent_sigma,
        "f_r0_hz": fit.f_r0,
        "f_r0_sigma_hz": fit.f_r0_sigma,
        "reduced_chi2": fit.fit.reduced_chi2,
        "converged": fit.fit.converged,
    });
    if ctx.synthetic {
        results["planted"] = json!({ "i_star_a": res.i_star, "clem_exponent": res.clem_exponent, "f_r0_hz": res.f_r0 });
    }
    Ok(Outcome::new(inputs, results, warnings, Some(table)))
}

fn gain_cavity(ctx: &Context) -> Result<PumpedCavity> {
    let g = &ctx.config.gain;
    let xi = match g.xi_hz {
        Some(x) => x,
        None => {
            // √G = κ κ̄/(κ̄² − |ξ|²) on resonance
            let kb = g.kappa_hz + g.gamma_hz / 2.0;
            let xi2 = kb * kb - g.kappa_hz * kb / linear_from_db(g.peak_gain_db).sqrt();
            if xi2 < 0.0 {
                return Err(Error::Config(format!("peak gain {} dB is unreachable with this loss", g.peak_gain_db)));
            }
            xi2.sqrt()
        }
    };
    PumpedCavity::from_hz(g.kappa_hz, g.gamma_hz, g.delta_hz, Complex64::new(xi, 0.0), g.f_pump_hz)
}

pub fn gain(ctx: &Context) -> Result<Outcome> {
    let g = ctx.config.gain.clone();
    let cav = gain_cavity(ctx)?;
    let half_span = g.half_span_hz.unwrap_or(3.0 * g.kappa_hz);
    let center = g.f_pump_hz / 2.0;
    let inputs = ctx.inputs(json!({ "gain": g, "xi_hz": cav.xi.norm() / (2.0 * std::f64::consts::PI) }))?;
    let data = match ctx.source()? {
        Source::Model => {
            let curve = GainCurve::sweep(&cav, center, half_span, g.n_points)?;
            let est = gbp_extract(&curve)?;
            let (offset, peak) = peak_gain(&cav)?;
            let mut t = Table::new(&["f_hz", "re_g", "im_g", "gain_db"]);
            for ((f, c), db) in curve.frequencies.iter().zip(&curve.complex_gain).zip(&curve.power_gain_db) {
                t.push(&[*f, c.re, c.im, *db]);
            }
            let results = json!({
                "gbp_hz": est.gbp_hz,
                "bandwidth_hz": est.bandwidth_hz,
                "peak_gain_db": 10.0 * peak.log10(),
                "peak_offset_hz": offset,
                "gbp_over_kappa": est.gbp_hz / g.kappa_hz,
            });
            return Ok(Outcome::new(inputs, results, Vec::new(), Some(t)));
        }
        Source::Synthetic => synth::gain_curve(&cav, center, half_span, g.n_points, g.noise_db, ctx.seed)?,
        Source::File(d) => d,
    };
    let fit = fit_gain_curve(&data, g.f_pump_hz, g.gamma_hz)?;
    let fitted = PumpedCavity::from_hz(fit.kappa_hz, g.gamma_hz, fit.delta_hz, Complex64::new(fit.xi_hz, 0.0), g.f_pump_hz)?;
    let table = sweep_table(&data, |f| signal_gain(&fitted, f).map_or(f64::NAN, |c| 10.0 * c.norm_sqr().log10()));
    let mut warnings = Vec::new();
    if !fit.fit.converged {
        warnings.push("gain fit did not converge".into());
    }
    let mut results = json!({
        "kappa_hz": fit.kappa_hz,
        "kappa_sigma_hz": fit.kappa_sigma_hz,
        "delta_hz": fit.delta_hz,
        "delta_sigma_hz": fit.delta_sigma_hz,
        "xi_hz": fit.xi_hz,
        "xi_sigma_hz": fit.xi_sigma_hz,
        "gbp_hz": fit.gbp.gbp_hz,
        "peak_gain_db": fit.gbp.peak_gain_db,
        "reduced_chi2": fit.fit.reduced_chi2,
    });
    if ctx.synthetic {
        let z = (fit.kappa_hz - g.kappa_hz).abs() / fit.kappa_sigma_hz;
        results["planted_kappa_hz"] = json!(g.kappa_hz);
        results["kappa_deviation_sigma"] = json!(z);
        results["kappa_within_3_sigma"] = json!(z <= 3.0);
    }
    Ok(Outcome::new(inputs, results, warnings, Some(table)))
}

pub fn pump_search(ctx: &Context) -> Result<Outcome> {
    let s = &ctx.config.pump_search;
    let cfg = s.search();
    let inputs = ctx.inputs(json!({ "map": s.map, "target_db": s.target_db, "search": cfg }))?;
    let op = find_optimal_pump(&s.map, s.target_db, &cfg)?;
    let kerr = self_kerr(&ctx.config.resonator()?, Frequency::from_hz(s.map.f_r_hz));
    let dominance = kerr_dominance_check(kerr, s.map.kappa_hz)?;
    let mut warnings = Vec::new();
    if !dominance.three_wave_dominated {
        warnings.push(format!("|K|/κ = {:.2e}: four-wave mixing is not negligible", dominance.ratio));
    }
    Ok(Outcome::new(
        inputs,
        json!({
            "f_pump_hz": op.f_pump_hz,
            "p_pump_dbm": op.p_pump_dbm,
            "gain_db": op.gain_db,
            "kerr_hz": kerr,
            "kerr_over_kappa": dominance.ratio,
        }),
        warnings,
        None,
    ))
}

pub fn compression(ctx: &Context, p_in_1db_dbm: Option<f64>) -> Result<Outcome> {
    let c = ctx.config.compression.clone();
    let inputs = ctx.inputs(json!({ "compression": c, "p_in_1db_dbm": p_in_1db_dbm }))?;
    let data = match ctx.source()? {
        Source::Model => {
            let p = compression_from_input(p_in_1db_dbm.unwrap_or(c.p_in_1db_dbm), c.small_signal_db);
            return Ok(Outcome::new(inputs, to_value(&p), Vec::new(), None));
        }
        Source::Synthetic => {
            let n = c.n_points.max(2);
            let powers: Vec<f64> =
                (0..n).map(|k| c.p_min_dbm + (c.p_max_dbm - c.p_min_dbm) * k as f64 / (n - 1) as f64).collect();
            let p1 = p_in_1db_dbm.unwrap_or(c.p_in_1db_dbm);
            synth::compression_sweep(c.small_signal_db, p1, c.width_db, &powers, c.noise_db, ctx.seed)?
        }
        Source::File(d) => d,
    };
    let p = compression_point(&data, c.small_signal_db)?;
    let mut t = Table::new(&["p_in_dbm", "gain_db", "p_out_dbm"]);
    for (x, y) in data.x.iter().zip(&data.y) {
        t.push(&[*x, *y, x + y]);
    }
    Ok(Outcome::new(inputs, to_value(&p), Vec::new(), Some(t)))
}

pub fn noise_fit(ctx: &Context) -> Result<Outcome> {
    let chain = ctx.config.chain();
    let n = ctx.config.noise_fit.clone();
    let inputs = ctx.inputs(json!({ "chain": chain, "noise_fit": n }))?;
    let data = match ctx.source()? {
        Source::Model => return Err(Error::Config("noise-fit needs --data or --synthetic".into())),
        Source::Synthetic => {
            let t_add = n.t_kipa_k + chain.t_hemt / chain.gain;
            synth::noise_sweep(&chain, t_add, &n.setpoints_k, n.f_signal_hz, n.rel_noise, ctx.seed)?
        }
        Source::File(d) => d,
    };
    let fit = fit_added_noise(&data, &chain, n.slope)?;
    let k = kipa_noise_from_added(fit.t_add, chain.gain, chain.t_hemt)?;
    let mut warnings = fit.warnings.clone();
    if k.unphysical {
        warnings.push(format!("amplifier noise temperature is negative ({:.4e} K)", k.t_kipa));
    }
    let photons = photon_temperature_equivalent(k.t_kipa.max(0.0), Frequency::from_hz(n.f_signal_hz), PhotonConvention::Linear)?;
    let (slope, intercept) = (fit.fit.params[0], fit.fit.params[1]);
    let table = sweep_table(&data, |x| chain.output_power(slope * x + intercept));
    let mut results = json!({
        "t_add_k": fit.t_add,
        "t_add_sigma_k": fit.t_add_sigma,
        "t_add_sigma_stat_k": fit.t_add_sigma_stat,
        "t_add_sigma_sys_k": fit.t_add_sigma_sys,
        "t_kipa_k": k.t_kipa,
        "t_kipa_photons": photons,
        "slope": fit.slope,
        "slope_sigma": fit.slope_sigma,
        "background_k": fit.background,
        "design_condition": fit.design_condition,
        "reduced_chi2": fit.fit.reduced_chi2,
    });
    if ctx.synthetic {
        results["planted_t_kipa_k"] = json!(n.t_kipa_k);
    }
    Ok(Outcome::new(inputs, results, warnings, Some(table)))
}

pub fn hemt_fit(ctx: &Context) -> Result<Outcome> {
    let chain = ctx.config.chain();
    let h = ctx.config.hemt_fit.clone();
    let inputs = ctx.inputs(json!({ "chain": chain, "hemt_fit": h }))?;
    let planted = h.t_hemt_k.unwrap_or(chain.t_hemt);
    let data = match ctx.source()? {
        Source::Model => return Err(Error::Config("hemt-fit needs --data or --synthetic".into())),
        Source::Synthetic => synth::hemt_sweep(&chain, planted, &h.setpoints_k, h.f_signal_hz, h.rel_noise, ctx.seed)?,
        Source::File(d) => d,
    };
    let fit = fit_hemt_noise(&data, &chain, h.f_signal_hz, h.slope)?;
    let (slope, intercept) = (fit.fit.params[0], fit.fit.params[1]);
    let table = sweep_table(&data, |t| chain.output_power(slope * hemt_input_noise(t, h.f_signal_hz, chain.eta_e) + intercept));
    let mut results = json!({
        "t_hemt_k": fit.t_hemt,
        "t_hemt_sigma_k": fit.t_hemt_sigma,
        "slope": fit.slope,
        "slope_sigma": fit.slope_sigma,
        "background_k": fit.background,
        "design_condition": fit.design_condition,
        "reduced_chi2": fit.fit.reduced_chi2,
    });
    if ctx.synthetic {
        results["planted_t_hemt_k"] = json!(planted);
    }
    Ok(Outcome::new(inputs, results, fit.warnings, Some(table)))
}

pub fn chain_propagate(ctx: &Context) -> Result<Outcome> {
    let chain: ReceiverChain = ctx.config.chain();
    let p = ctx.config.chain_propagate.clone();
    let inputs = ctx.inputs(json!({ "elements": chain.elements, "chain_propagate": p }))?;
    let out = propagate_chain(p.n_in, &chain.elements, p.f_hz)?;
    let mut t = Table::new(&["stage", "label", "n_out"]);
    let mut stages = Vec::new();
    for (i, (e, n)) in chain.elements.iter().zip(&out).enumerate() {
        t.push_text(vec![i.to_string(), e.label.clone(), n.to_string()]);
        stages.push(json!({ "label": e.label, "n_out": n }));
    }
    Ok(Outcome::new(inputs, json!({ "n_in": p.n_in, "stages": stages }), Vec::new(), Some(t)))
}

pub fn squeeze(ctx: &Context, s_measured: Option<f64>) -> Result<Outcome> {
    let q = ctx.config.squeeze.clone();
    let s_meas = s_measured.or(q.s_measured);
    let inputs = ctx.inputs(json!({ "squeeze": q, "s_measured": s_meas }))?;
    let s_min = max_measurable_squeezing(&q.budget)?;
    let mut t = Table::new(&["g_x_db", "s"]);
    for g in &q.g_x_db {
        t.push(&[*g, squeezing_factor(linear_from_db(*g), &q.budget)?]);
    }
    let mut results = json!({ "s_min": s_min, "s_min_db": 10.0 * s_min.log10() });
    if let Some(s) = s_meas {
        let g = extract_gx(s, &q.budget)?;
        results["g_x"] = json!(g);
        results["g_x_db"] = json!(10.0 * g.log10());
    }
    Ok(Outcome::new(inputs, results, Vec::new(), Some(t)))
}

pub fn field_shift(ctx: &Context) -> Result<Outcome> {
    let f = ctx.config.field.clone();
    let inputs = ctx.inputs(json!({ "field": f }))?;
    let mut warnings = f.model.validate()?;
    let data = match ctx.source()? {
        Source::Model => {
            let mut t = Table::new(&["b_t", "shift_rel", "shift_hz"]);
            for b in &f.fields_t {
                let s = field_frequency_shift(*b, &f.model);
                t.push(&[*b, s, s * f.f_r_hz]);
            }
            let c = kipa_core::env_models::field_curvature(&f.model);
            return Ok(Outcome::new(inputs, json!({ "curvature_per_t2": c }), warnings, Some(t)));
        }
        Source::Synthetic => synth::field_sweep(&f.model, &f.fields_t, f.noise, ctx.seed)?,
        Source::File(d) => d,
    };
    // the fit infers the misalignment, so it starts from the aligned model
    let reference = kipa_core::env_models::FieldModel { theta_b: 0.0, ..f.model };
    let fit = fit_field_shift(&data, &reference, f.criterion)?;
    warnings.extend(fit.warnings.iter().cloned());
    let table = sweep_table(&data, |b| -fit.curvature * b * b);
    let mut results = json!({
        "curvature_per_t2": fit.curvature,
        "curvature_sigma_per_t2": fit.curvature_sigma,
        "aligned_curvature_per_t2": fit.aligned_curvature,
        "theta_b_deg": fit.theta_b.map(f64::to_degrees),
        "theta_b_sigma_deg": fit.theta_b_sigma.map(f64::to_degrees),
        "b_c_parallel_t": fit.b_c_parallel,
        "reduced_chi2": fit.reduced_chi2,
    });
    if ctx.synthetic {
        results["planted_theta_b_deg"] = json!(f.model.theta_b.to_degrees());
    }
    Ok(Outcome::new(inputs, results, warnings, Some(table)))
}

pub fn temp_shift(ctx: &Context) -> Result<Outcome> {
    let c = ctx.config.temp.clone();
    let inputs = ctx.inputs(json!({ "temp": c }))?;
    let warnings = c.model.validate(c.f_r_hz)?;
    let mut t = Table::new(&["t_k", "shift_rel", "shift_hz"]);
    let mut points = Vec::new();
    for temp in &c.temperatures_k {
        let s = temp_frequency_shift(*temp, c.f_r_hz, &c.model)?;
        t.push(&[*temp, s, s * c.f_r_hz]);
        points.push(json!({ "t_k": temp, "shift_rel": s }));
    }
    Ok(Outcome::new(inputs, json!({ "points": points }), warnings, Some(t)))
}

pub fn device_temp(ctx: &Context, shift: Option<f64>) -> Result<Outcome> {
    let c = ctx.config.temp.clone();
    let shift = shift.or(c.shift).ok_or_else(|| Error::Config("device-temp needs --shift or temp.shift".into()))?;
    let inputs = ctx.inputs(json!({ "temp": c, "shift": shift }))?;
    let warnings = c.model.validate(c.f_r_hz)?;
    let t = device_temp_from_shift(shift, c.f_r_hz, &c.model)?;
    Ok(Outcome::new(inputs, json!({ "t_device_k": t }), warnings, None))
}

pub fn reproduce(ctx: &Context, fixture: &str) -> Result<Outcome> {
    let ids: Vec<&str> = if fixture == "all" { FIXTURE_IDS.to_vec() } else { vec![fixture] };
    let reports = ids.iter().map(|id| run_fixture(id)).collect::<Result<Vec<FixtureReport>>>()?;
    let passed = reports.iter().all(|r| r.passed);
    let mut t = Table::new(&["id", "measured", "expected", "tolerance", "passed"]);
    for r in &reports {
        t.push_text(vec![r.id.clone(), r.measured.to_string(), r.expected.to_string(), r.tolerance.to_string(), r.passed.to_string()]);
    }
    let results = if reports.len() == 1 { to_value(&reports[0]) } else { json!({ "fixtures": reports, "all_passed": passed }) };
    let mut out = Outcome::new(ctx.inputs(json!({ "fixture": fixture }))?, results, Vec::new(), Some(t));
    out.passed = passed;
    Ok(out)
}
