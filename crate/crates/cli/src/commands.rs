//! One function per subcommand. Each writes its CSV files and returns what
//! it wrote plus a few summary lines.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bhdtwin::calibration::{calibrate, Anchors};
use bhdtwin::cvqkd::{max_reach, skr_vs_distance};
use bhdtwin::linearity::{dynamic_range, single_tone_sweep};
use bhdtwin::noise::{
    expected_time_domain_qcnr, lit_and_dark, model_qcnr, simulate_time_domain_qcnr, QCNR_FLOOR_DB,
};
use bhdtwin::qpsk::{ber_sweep, demodulate, front_end, generate_qpsk, sensitivity_search};
use bhdtwin::receiver::cmrr_spectrum;
use bhdtwin::units::{dbm_to_watts, db, PowerDbm};
use bhdtwin::Error;

use crate::config::{render, ConfigFile};
use crate::output::{flag, num, sibling, Table};
use crate::settings::{stepped, Settings};

#[derive(Debug, Default)]
pub struct Outcome {
    pub outputs: Vec<PathBuf>,
    pub notes: Vec<(String, String)>,
}

impl Outcome {
    fn note(&mut self, key: &str, value: impl ToString) {
        self.notes.push((key.to_string(), value.to_string()));
    }
}

pub fn cmrr(s: &Settings, out: &Path) -> Result<Outcome> {
    let params = &s.profile.receiver;
    params.validate()?;
    let freqs = stepped(s.cmrr.f_min, s.cmrr.f_max, s.cmrr.f_step).context("cmrr frequency grid")?;
    let values = cmrr_spectrum(params, &freqs)?;
    let mut table = Table::new(&["freq_hz", "cmrr_db"])?;
    for (f, c) in freqs.iter().zip(&values) {
        table.row(&[num(*f), num(*c)])?;
    }
    table.save(out)?;
    let mut o = Outcome { outputs: vec![out.to_path_buf()], ..Default::default() };
    if let Some(i) = freqs.iter().position(|&f| f == 1e9) {
        o.note("cmrr_at_1ghz_db", format!("{:.3}", values[i]));
    }
    Ok(o)
}

pub fn qcnr(s: &Settings, seed: u64, out: &Path) -> Result<Outcome> {
    let params = &s.profile.receiver;
    params.validate()?;
    let q = &s.qcnr;
    let freqs = stepped(q.f_step, q.f_max, q.f_step).context("clearance frequency grid")?;
    let mut reports = Table::new(&[
        "lo_dbm",
        "lo_w",
        "qcnr_freq_db",
        "qcnr_time_db",
        "qcnr_time_expected_db",
        "electronic_var_a2",
        "quantum_var_a2",
    ])?;
    let mut spectra = Table::new(&["lo_dbm", "lo_w", "freq_hz", "lit_psd_a2_hz", "dark_psd_a2_hz", "clearance_db"])?;
    let mut o = Outcome::default();
    for (i, &lo) in q.lo_dbm.iter().enumerate() {
        let p = dbm_to_watts(PowerDbm(lo));
        let fd = model_qcnr(p, params, q.band_lo, q.band_hi)?;
        let (td, td_expected) = if p.watts() > 0.0 {
            let sim = simulate_time_domain_qcnr(p, params, &s.profile.capture, seed.wrapping_add(i as u64))?;
            (sim.qcnr_db, expected_time_domain_qcnr(p, params, &s.profile.capture)?.qcnr_db)
        } else {
            (QCNR_FLOOR_DB, QCNR_FLOOR_DB)
        };
        reports.row(&[
            num(lo),
            num(p.watts()),
            num(fd.qcnr_db),
            num(td),
            num(td_expected),
            num(fd.electronic_variance),
            num(fd.quantum_variance),
        ])?;
        let (lit, dark) = lit_and_dark(p, params, &freqs)?;
        for ((f, l), d) in freqs.iter().zip(&lit.psd).zip(&dark.psd) {
            let clearance = if l == d { 0.0 } else { db(l / d) };
            spectra.row(&[num(lo), num(p.watts()), num(*f), num(*l), num(*d), num(clearance)])?;
        }
        o.note(&format!("qcnr_freq_db[{lo} dBm]"), format!("{:.3}", fd.qcnr_db));
    }
    let spectra_path = sibling(out, "_clearance", "csv");
    reports.save(out)?;
    spectra.save(&spectra_path)?;
    o.outputs = vec![out.to_path_buf(), spectra_path];
    Ok(o)
}

pub fn linearity(s: &Settings, seed: u64, out: &Path) -> Result<Outcome> {
    let params = &s.profile.receiver;
    params.validate()?;
    let model = &s.profile.linearity;
    let l = &s.linearity;
    let mut grid = vec![PowerDbm(f64::NEG_INFINITY)];
    grid.extend(stepped(l.p_min_dbm, l.p_max_dbm, l.p_step_db)?.into_iter().map(PowerDbm));
    let sweep = single_tone_sweep(l.p_lo, &grid, params, model, seed)?;
    let mut table = Table::new(&["p_sig_dbm", "p_sig_w", "output_db", "detectable"])?;
    for point in &sweep {
        table.row(&[num(point.input.0), num(point.input.to_watts().watts()), num(point.output_db), flag(point.detectable)])?;
    }
    let range = dynamic_range(l.p_lo, params, model)?;
    let measured_floor = sweep.iter().find(|p| p.detectable).map_or(f64::NAN, |p| p.input.0);
    let mut summary = Table::new(&[
        "p_lo_dbm",
        "p_lo_w",
        "floor_dbm",
        "ceiling_dbm",
        "range_db",
        "sweep_floor_dbm",
    ])?;
    summary.row(&[
        num(l.p_lo.to_dbm().0),
        num(l.p_lo.watts()),
        num(range.floor.0),
        num(range.ceiling.0),
        num(range.range_db),
        num(measured_floor),
    ])?;
    let summary_path = sibling(out, "_range", "csv");
    table.save(out)?;
    summary.save(&summary_path)?;
    let mut o = Outcome { outputs: vec![out.to_path_buf(), summary_path], ..Default::default() };
    o.note("floor_dbm", format!("{:.2}", range.floor.0));
    o.note("ceiling_dbm", format!("{:.2}", range.ceiling.0));
    o.note("range_db", format!("{:.2}", range.range_db));
    Ok(o)
}

pub fn qpsk(s: &Settings, seed: u64, out: &Path) -> Result<Outcome> {
    let params = &s.profile.receiver;
    let config = &s.profile.modem;
    params.validate()?;
    config.validate()?;
    let q = &s.qpsk;
    let powers: Vec<PowerDbm> = stepped(q.p_min_dbm, q.p_max_dbm, q.p_step_db)?.into_iter().map(PowerDbm).collect();
    let mut o = Outcome::default();

    let points = ber_sweep(config, params, &powers, seed)?;
    let mut table = Table::new(&[
        "p_sig_dbm",
        "p_sig_w",
        "ber",
        "errors",
        "bits",
        "payload_ber",
        "saturation_warning",
    ])?;
    for p in &points {
        table.row(&[
            num(p.p_sig.0),
            num(p.p_sig.to_watts().watts()),
            num(p.ber),
            p.errors_counted.to_string(),
            p.bits_tested.to_string(),
            num(p.payload_errors as f64 / p.payload_bits_tested as f64),
            flag(p.saturation_warning),
        ])?;
    }
    table.save(out)?;
    o.outputs.push(out.to_path_buf());
    if points.iter().any(|p| p.saturation_warning) {
        o.note("warning", "some signal powers exceed the receiver's 1 dB compression input");
    }

    if config.noise_enabled {
        let r = sensitivity_search(config, params, q.target_ber, seed)?;
        let mut t = Table::new(&[
            "target_ber",
            "sensitivity_dbm",
            "sensitivity_w",
            "launch_dbm",
            "budget_db",
            "points_evaluated",
        ])?;
        t.row(&[
            num(r.target_ber),
            num(r.sensitivity.0),
            num(r.sensitivity.to_watts().watts()),
            num(r.launch.0),
            num(r.budget),
            r.points.len().to_string(),
        ])?;
        let path = sibling(out, "_sensitivity", "csv");
        t.save(&path)?;
        o.outputs.push(path);
        o.note("sensitivity_dbm", format!("{:.2}", r.sensitivity.0));
        o.note("budget_db", format!("{:.2}", r.budget));
    } else {
        o.note("sensitivity", "not evaluated without noise");
    }

    let frame = generate_qpsk(config, seed)?;
    let fe = front_end(&frame, dbm_to_watts(PowerDbm(q.constellation_dbm)), config, params, seed)?;
    let rx = demodulate(&fe.trace, config)?;
    let mut t = Table::new(&["symbol", "i", "q"])?;
    for (k, z) in rx.symbols.iter().take(q.constellation_symbols).enumerate() {
        t.row(&[k.to_string(), num(z.re), num(z.im)])?;
    }
    let path = sibling(out, "_constellation", "csv");
    t.save(&path)?;
    o.outputs.push(path);
    Ok(o)
}

pub fn skr(s: &Settings, out: &Path) -> Result<Outcome> {
    let link = &s.profile.link;
    link.validate()?;
    let k = &s.skr;
    let mut distances = stepped(0.0, k.d_max, k.d_step).context("distance grid")?;
    if k.extra.iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
        bail!("qkd.distance_extra must hold finite distances >= 0");
    }
    distances.extend(&k.extra);
    distances.sort_by(f64::total_cmp);
    distances.dedup();
    let mut table = Table::new(&["distance_km", "zeta_snu", "v_a_opt", "skr_bps", "rate_bits_per_symbol", "feasible"])?;
    let mut reach = Table::new(&["zeta_snu", "skr_floor_bps", "reach_km", "status"])?;
    let mut o = Outcome::default();
    for &zeta in &k.zeta {
        let l = bhdtwin::LinkParams { channel_excess_noise: zeta, ..link.clone() };
        for (d, r) in skr_vs_distance(&l, &distances)? {
            table.row(&[num(d), num(zeta), num(r.v_a), num(r.skr), num(r.rate), flag(r.feasible)])?;
        }
        let (km, status) = match max_reach(&l, k.floor) {
            Ok(km) => (km, "ok"),
            Err(Error::Infeasible(_)) => (f64::NAN, "infeasible"),
            Err(e) => return Err(e.into()),
        };
        reach.row(&[num(zeta), num(k.floor), num(km), status.to_string()])?;
        o.note(&format!("reach_km[zeta={zeta}]"), format!("{km:.2}"));
    }
    let reach_path = sibling(out, "_reach", "csv");
    table.save(out)?;
    reach.save(&reach_path)?;
    o.outputs = vec![out.to_path_buf(), reach_path];
    Ok(o)
}

/// Anchor targets read from `anchor.*` keys; conditions not given keep
/// their reference values.
pub fn load_anchors(file: &ConfigFile) -> Result<Anchors> {
    let mut a = Anchors::empty();
    for (key, value, line) in &file.entries {
        let x: f64 = value.parse().with_context(|| format!("line {line}: {key}: `{value}` is not a number"))?;
        match key.as_str() {
            "anchor.noise_lo_dbm" => a.noise_lo = PowerDbm(x),
            "anchor.clearance_db" => a.clearance_db = Some(x),
            "anchor.clearance_freq" => a.clearance_freq = x,
            "anchor.qcnr_freq_db" => a.qcnr_freq_db = Some(x),
            "anchor.qcnr_band_lo" => a.qcnr_band.0 = x,
            "anchor.qcnr_band_hi" => a.qcnr_band.1 = x,
            "anchor.qcnr_time_db" => a.qcnr_time_db = Some(x),
            "anchor.cmrr_db" => a.cmrr_db = Some(x),
            "anchor.cmrr_freq" => a.cmrr_freq = x,
            "anchor.linearity_lo_dbm" => a.linearity_lo = dbm_to_watts(PowerDbm(x)),
            "anchor.linearity_ceiling_dbm" => a.linearity_ceiling = Some(PowerDbm(x)),
            "anchor.linearity_floor_dbm" => a.linearity_floor = Some(PowerDbm(x)),
            "anchor.sensitivity_dbm" => a.sensitivity = Some(PowerDbm(x)),
            "anchor.target_ber" => a.target_ber = x,
            _ => bail!("line {line}: unknown anchor key `{key}`"),
        }
    }
    Ok(a)
}

pub fn calibrate_cmd(s: &Settings, anchors: &Anchors, out: &Path) -> Result<(Outcome, Settings)> {
    let report = match calibrate(&s.profile, anchors) {
        Ok(r) => r,
        Err(Error::Calibration { anchor, residual, limit }) => {
            let message = format!("worst anchor `{anchor}` misses by {residual:.3} dB (limit {limit} dB)");
            let report = crate::output::sibling(out, "", "report");
            let body = format!(
                "# bhdtwin {} calibration failure\nstatus = failed\nworst_anchor = {anchor}\nresidual_db = {residual}\nlimit_db = {limit}\n",
                env!("CARGO_PKG_VERSION")
            );
            crate::output::write_atomic(&report, body.as_bytes())?;
            bail!("calibration failed: {message}; see {}", report.display())
        }
        Err(e) => return Err(e.into()),
    };
    let fitted = Settings { profile: report.profile.clone(), ..s.clone() };
    let header = vec![
        "fitted parameters; load with --config".to_string(),
        format!("bhdtwin {}", env!("CARGO_PKG_VERSION")),
    ];
    crate::output::write_atomic(out, render(&header, &fitted.entries()).as_bytes())?;

    let mut table = Table::new(&["anchor", "target", "achieved", "residual"])?;
    for r in &report.residuals {
        table.row(&[r.anchor.to_string(), num(r.target), num(r.achieved), num(r.residual())])?;
    }
    let residual_path = sibling(out, "_residuals", "csv");
    table.save(&residual_path)?;
    let mut o = Outcome { outputs: vec![out.to_path_buf(), residual_path], ..Default::default() };
    if let Some(w) = report.worst() {
        o.note("worst_anchor", format!("{} ({:+.4})", w.anchor, w.residual()));
    }
    Ok((o, fitted))
}
