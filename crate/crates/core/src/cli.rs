//! Command implementations behind the `multizone` binary: scenario
//! evaluation, modal observability scans, the sensor-noise sweep, and
//! field snapshots. Each command reads a TOML scenario config and writes
//! CSV (and PGM raster) files into an output directory.
//!
//! Commands are pure functions of (config file, seed): reruns produce
//! byte-identical outputs.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::evaluation::{
    evaluate_bank, field_snapshot, hann_pulse, run_noise_experiment, steady_state_frame,
    zone_energy, Raster,
};
use crate::geometry::ZoneKind;
use crate::modal::{scan_observability, CoeffKind, ModalSource, ModalSpectrum};
use crate::scenario::Scenario;
use crate::solver::PrefilterBank;

/// Resolves the output directory: CLI flag first, then the config's
/// `[output] dir`, then `./out`.
fn resolve_out_dir(scenario: &Scenario, out: Option<&Path>) -> PathBuf {
    out.map(Path::to_path_buf)
        .or_else(|| scenario.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn load(config: &Path, seed: Option<u64>) -> Result<Scenario> {
    let mut scenario = Scenario::from_path(config)?;
    if let Some(seed) = seed {
        scenario.seed = seed;
    }
    Ok(scenario)
}

fn create_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

/// Designs every configured method from the analytic model and writes
/// per-frequency metrics plus a broadband summary (and, if requested, the
/// prefilter banks).
pub fn cmd_scenario_run(config: &Path, out: Option<&Path>, seed: Option<u64>) -> Result<()> {
    let scenario = load(config, seed)?;
    let dir = resolve_out_dir(&scenario, out);
    create_out_dir(&dir)?;

    let mut summary = String::from(
        "schema,method,f_min,n_bins,delta_l_db,mse_bright_db,mse_bright_db_mean,\
         mse_bright_norm_db,mse_dark_db\n",
    );
    for name in &scenario.methods {
        let bank = scenario.solve_bank(name.to_method())?;
        let report = evaluate_bank(&scenario, name.label(), &bank)?;
        let file = fs::File::create(dir.join(format!("metrics_{}.csv", name.label())))?;
        report.write_csv(std::io::BufWriter::new(file))?;
        let bb = report.broadband(scenario.f_min);
        summary.push_str(&format!(
            "broadband.v1,{},{},{},{},{},{},{},{}\n",
            name.label(),
            bb.f_min,
            bb.n_bins,
            bb.delta_l_db,
            bb.mse_bright_db,
            bb.mse_bright_db_mean,
            bb.mse_bright_norm_db,
            bb.mse_dark_db
        ));
        if scenario.write_prefilters {
            let file = fs::File::create(dir.join(format!("prefilters_{}.csv", name.label())))?;
            bank.write_csv(std::io::BufWriter::new(file))?;
        }
    }
    fs::write(dir.join("broadband.csv"), summary)?;
    Ok(())
}

/// Computes the configured modal spectra (pressure per radius, radial and
/// tangential differences) over the frequency grid and locates the
/// observability minima.
pub fn cmd_modal_scan(config: &Path, out: Option<&Path>, seed: Option<u64>) -> Result<()> {
    let scenario = load(config, seed)?;
    let modal = scenario
        .modal
        .clone()
        .ok_or_else(|| Error::config("modal-scan needs a [modal] section in the config"))?;
    if modal.radii.is_empty() || modal.radii.len() > 2 {
        return Err(Error::config("modal.radii must hold one or two radii"));
    }
    if modal.f_step <= 0.0 || modal.f_start + modal.f_step > modal.f_stop {
        return Err(Error::config(format!(
            "modal scan step {} does not fit the range [{}, {}]",
            modal.f_step, modal.f_start, modal.f_stop
        )));
    }
    let dir = resolve_out_dir(&scenario, out);
    create_out_dir(&dir)?;

    let source = ModalSource {
        r0: modal.source_r,
        phi0: modal.source_phi_deg.to_radians(),
    };
    let mut radii = modal.radii.clone();
    radii.sort_by(f64::total_cmp);
    let r_out = *radii.last().unwrap();
    let delta_phi = modal.delta_phi.unwrap_or_else(|| {
        if radii.len() == 2 {
            (radii[1] - radii[0]) / r_out
        } else {
            0.025 / r_out
        }
    });

    let n_steps = ((modal.f_stop - modal.f_start) / modal.f_step).floor() as usize;
    let freqs: Vec<f64> = (0..=n_steps)
        .map(|i| modal.f_start + i as f64 * modal.f_step)
        .collect();

    let mut csv = String::from("schema,m,kind,radius,freq_hz,re,im,magnitude,truncation_order\n");
    let mut write_spectrum = |spectrum: &ModalSpectrum, radius: f64| {
        for ((f, v), n) in spectrum
            .freqs_hz
            .iter()
            .zip(&spectrum.values)
            .zip(&spectrum.truncation)
        {
            csv.push_str(&format!(
                "modal.v1,{},{},{},{},{},{},{},{}\n",
                spectrum.m,
                spectrum.kind.label(),
                radius,
                f,
                v.re,
                v.im,
                v.norm(),
                n
            ));
        }
    };

    for &m in &modal.m {
        for &radius in &radii {
            let s = ModalSpectrum::compute(
                m,
                CoeffKind::Pressure { radius },
                source,
                &freqs,
                &scenario.medium,
            )?;
            write_spectrum(&s, radius);
        }
        if radii.len() == 2 {
            let s = ModalSpectrum::compute(
                m,
                CoeffKind::RadialDiff {
                    r_in: radii[0],
                    r_out: radii[1],
                },
                source,
                &freqs,
                &scenario.medium,
            )?;
            write_spectrum(&s, r_out);
        }
        let s = ModalSpectrum::compute(
            m,
            CoeffKind::TangentialDiff { r_out, delta_phi },
            source,
            &freqs,
            &scenario.medium,
        )?;
        write_spectrum(&s, r_out);
    }
    fs::write(dir.join("modal.csv"), csv)?;

    let mut minima_csv = String::from("schema,m,criterion,rank,freq_hz\n");
    let criterion = if radii.len() == 2 {
        "two_radius_max"
    } else {
        "single_radius"
    };
    for &m in &modal.m {
        let minima = scan_observability(
            m,
            &radii,
            modal.f_start,
            modal.f_stop,
            modal.f_step,
            &source,
            &scenario.medium,
        )?;
        for (rank, f) in minima.iter().enumerate() {
            minima_csv.push_str(&format!("minima.v1,{m},{criterion},{rank},{f}\n"));
        }
    }
    fs::write(dir.join("observability_minima.csv"), minima_csv)?;
    Ok(())
}

/// Runs the sensor-noise sweep over the configured SNR list and writes the
/// per-(SNR, method) broadband grid.
pub fn cmd_noise_sweep(config: &Path, out: Option<&Path>, seed: Option<u64>) -> Result<()> {
    let scenario = load(config, seed)?;
    if scenario.snr_db.is_empty() {
        return Err(Error::config(
            "noise-sweep needs a non-empty evaluation.snr_db list",
        ));
    }
    let dir = resolve_out_dir(&scenario, out);
    create_out_dir(&dir)?;

    let results = run_noise_experiment(&scenario, &scenario.snr_db, scenario.seed)?;
    let mut csv = String::from(
        "schema,snr_db,method,seed,n_bins,delta_l_db,mse_bright_db_mean,mse_bright_db,\
         mse_bright_norm_db,mse_dark_db\n",
    );
    for r in &results {
        csv.push_str(&format!(
            "noise.v1,{},{},{},{},{},{},{},{},{}\n",
            r.snr_db,
            r.method,
            r.seed,
            r.broadband.n_bins,
            r.broadband.delta_l_db,
            r.broadband.mse_bright_db_mean,
            r.broadband.mse_bright_db,
            r.broadband.mse_bright_norm_db,
            r.broadband.mse_dark_db
        ));
    }
    fs::write(dir.join("noise_sweep.csv"), csv)?;
    Ok(())
}

/// Writes steady-state and pulse wavefield frames for the configured
/// methods, plus a per-frequency zone-energy summary.
pub fn cmd_field_snapshot(config: &Path, out: Option<&Path>, seed: Option<u64>) -> Result<()> {
    let scenario = load(config, seed)?;
    let snap = scenario
        .snapshot
        .clone()
        .ok_or_else(|| Error::config("field-snapshot needs a [snapshot] section in the config"))?;
    let dir = resolve_out_dir(&scenario, out);
    create_out_dir(&dir)?;

    let raster = Raster::from_bounds(
        snap.raster.x0,
        snap.raster.y0,
        snap.raster.x1,
        snap.raster.y1,
        snap.raster.spacing,
    )?;
    let grids = scenario.eval_grids()?;

    let mut energy_csv = String::from("schema,method,freq_hz,bin,e_bright,e_dark,delta_l_db\n");
    for name in &snap.methods {
        let bank = scenario.solve_bank(name.to_method())?;

        for &f in &snap.frequencies {
            let bin = freq_to_bin(f, bank.fs, bank.len)?;
            let omega = PrefilterBank::omega_of_bin(bank.fs, bank.len, bin);
            let frame = steady_state_frame(
                &scenario.array,
                &bank.weights[bin],
                omega,
                &raster,
                0.0,
                &scenario.medium,
            )?;
            write_raster(
                &dir,
                &format!("steady_{}_{:.0}hz", name.label(), f),
                &raster,
                &frame,
            )?;

            let mut e = [0.0f64; 2];
            for (zone, grid) in scenario.zones.iter().zip(&grids) {
                let energy = zone_energy(
                    &scenario.array,
                    &bank.weights[bin],
                    &grid.points,
                    omega,
                    &scenario.medium,
                )?;
                match zone.kind {
                    ZoneKind::Bright => e[0] = energy,
                    ZoneKind::Dark => e[1] += energy,
                }
            }
            energy_csv.push_str(&format!(
                "zone_energy.v1,{},{},{},{},{},{}\n",
                name.label(),
                omega / (2.0 * std::f64::consts::PI),
                bin,
                e[0],
                e[1],
                crate::evaluation::level_difference(e[0], e[1])
            ));
        }

        if !snap.times.is_empty() {
            let pulse = hann_pulse(snap.pulse_len);
            for &t in &snap.times {
                let frame =
                    field_snapshot(&scenario.array, &bank, &pulse, &raster, t, &scenario.medium)?;
                write_raster(
                    &dir,
                    &format!("pulse_{}_t{}", name.label(), t),
                    &raster,
                    &frame,
                )?;
            }
        }
    }
    fs::write(dir.join("zone_energy.csv"), energy_csv)?;
    Ok(())
}

/// Nearest DFT bin for a frequency; rejects frequencies outside the solved
/// band.
fn freq_to_bin(f: f64, fs: f64, len: usize) -> Result<usize> {
    let bin = (f * len as f64 / fs).round() as usize;
    if bin == 0 || bin >= len / 2 {
        return Err(Error::config(format!(
            "snapshot frequency {f} Hz falls outside the solved bins"
        )));
    }
    Ok(bin)
}

/// Writes a frame as a bare CSV matrix (ny rows by nx columns, bottom row
/// first) and as an 8-bit P2 PGM mapping [-1, 1] to [0, 255].
fn write_raster(dir: &Path, stem: &str, raster: &Raster, frame: &[f64]) -> Result<()> {
    let mut csv = String::new();
    for iy in 0..raster.ny {
        let row: Vec<String> = (0..raster.nx)
            .map(|ix| frame[iy * raster.nx + ix].to_string())
            .collect();
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    fs::write(dir.join(format!("{stem}.csv")), csv)?;

    let mut pgm = fs::File::create(dir.join(format!("{stem}.pgm")))?;
    writeln!(pgm, "P2")?;
    writeln!(pgm, "{} {}", raster.nx, raster.ny)?;
    writeln!(pgm, "255")?;
    for iy in (0..raster.ny).rev() {
        let row: Vec<String> = (0..raster.nx)
            .map(|ix| {
                let v = frame[iy * raster.nx + ix].clamp(-1.0, 1.0);
                (((v + 1.0) / 2.0 * 255.0).round() as u8).to_string()
            })
            .collect();
        writeln!(pgm, "{}", row.join(" "))?;
    }
    Ok(())
}
