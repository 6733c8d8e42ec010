use std::fs;
use std::path::Path;

use fk_core::aubry_mather::{
    characteristic_map_samples, commutation_defect, construct_ordered_invariant, injectivity_diagnostic, support_samples,
    write_characteristic_csv, ConstructOptions, EPS_CONFIG, EPS_PI,
};
use fk_core::integrator::{integrate, Trajectory};
use fk_core::measures::{write_z_series, z_series, Ensemble, ZOptions};
use fk_core::seed;
use fk_core::sliding::{
    attractor_residence, average_speed, classify_asymptotics, depinning_sweep, dissipation_residual, extract_modulation,
    sliding_orbit, write_sweep_csv, ClassifyOptions, ResidenceOptions, SweepOptions, Verdict,
};
use fk_core::zeroset::{audit_pair, TrackOptions};
use fk_core::{ChainState, Dynamics, FkError};
use serde::Serialize;
use serde_json::json;

use crate::artifacts::{manifest_name, sha256_hex, Artifacts, CommandManifest};
use crate::config::RunConfig;
use crate::error::CliError;

/// Result of a command whose artifacts were written: `Some` carries an
/// audit failure that should still exit nonzero.
pub type Outcome = Result<Option<String>, CliError>;

fn dynamics(cfg: &RunConfig) -> Dynamics {
    Dynamics::new(cfg.potential.build(), cfg.forcing.clone())
}

fn seeded_state(cfg: &RunConfig, label: &str, winding: i64) -> ChainState {
    let mut rng = seed::stream(cfg.seed, label);
    seed::random_state(&mut rng, cfg.lattice.n, winding, cfg.initial.amplitude)
}

fn initial_state(cfg: &RunConfig, label: &str) -> Result<ChainState, CliError> {
    match &cfg.initial.state {
        Some(u) => Ok(ChainState::new(cfg.lattice.m, u.clone(), 0.0)?),
        None => Ok(seeded_state(cfg, label, cfg.lattice.m)),
    }
}

fn seeded_ensemble(cfg: &RunConfig, label: &str, members: usize, windings: &[i64]) -> Result<Ensemble, CliError> {
    let mut rng = seed::stream(cfg.seed, label);
    let states = (0..members)
        .map(|i| seed::random_state(&mut rng, cfg.lattice.n, windings[i % windings.len()], cfg.initial.amplitude))
        .collect();
    Ok(Ensemble::uniform(states)?)
}

fn classify_options(cfg: &RunConfig) -> ClassifyOptions {
    ClassifyOptions {
        horizon: cfg.integrator.horizon,
        max_horizon: cfg.simulate.max_horizon.max(cfg.integrator.horizon),
        dt: cfg.integrator.dt,
        dt_out: cfg.integrator.dt_out,
        tol_eq: cfg.tolerances.tol_eq,
        tol_per: cfg.tolerances.tol_per,
        tol_v: cfg.tolerances.tol_v,
        ..ClassifyOptions::default()
    }
}

fn csv_bytes<F>(header: &[String], rows: F) -> Result<Vec<u8>, CliError>
where
    F: FnOnce(&mut csv::Writer<&mut Vec<u8>>) -> Result<(), csv::Error>,
{
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        let io = |e: csv::Error| CliError::Io(std::io::Error::other(e.to_string()));
        w.write_record(header).map_err(io)?;
        rows(&mut w).map_err(io)?;
        w.flush()?;
    }
    Ok(buf)
}

fn trajectory_csv(traj: &Trajectory) -> Result<Vec<u8>, CliError> {
    let n = traj.samples.first().map_or(0, |s| s.u.len());
    let header: Vec<String> = std::iter::once("t".to_string()).chain((0..n).map(|j| format!("u_{j}"))).collect();
    csv_bytes(&header, |w| {
        for s in &traj.samples {
            w.write_record(std::iter::once(s.t).chain(s.u.iter().copied()).map(|x| x.to_string()))?;
        }
        Ok(())
    })
}

#[derive(Serialize)]
struct SlidingDiagnostics {
    modulation_alpha: Option<f64>,
    modulation_consistency: Option<f64>,
    modulation_reconstruction: Option<f64>,
    modulation_error: Option<String>,
    dissipation_work: f64,
    dissipation: f64,
    dissipation_residual: f64,
}

pub fn simulate(cfg: &RunConfig, art: &mut Artifacts) -> Outcome {
    let dyn_ = dynamics(cfg);
    let state = initial_state(cfg, "simulate-initial")?;
    let traj = integrate(&state, &dyn_, (state.t, state.t + cfg.integrator.horizon), cfg.integrator.dt, cfg.integrator.dt_out)?;
    art.write("trajectory.csv", &trajectory_csv(&traj)?)?;
    let avg = average_speed(&traj);
    if !dyn_.forcing.is_dc() {
        art.write_json("asymptotics.json", &json!({ "mode": "ac", "average_speed": avg.v, "speed_spread": avg.spread }))?;
        return Ok(None);
    }
    let report = classify_asymptotics(&state, &dyn_, &classify_options(cfg))?;
    let mut sliding = None;
    if let Verdict::PeriodicSliding { .. } = report.verdict {
        let orbit = sliding_orbit(&report, &dyn_, cfg.simulate.orbit_nodes, cfg.integrator.dt)?;
        let diss = dissipation_residual(&orbit, dyn_.forcing.mean())?;
        let mut diag = SlidingDiagnostics {
            modulation_alpha: None,
            modulation_consistency: None,
            modulation_reconstruction: None,
            modulation_error: None,
            dissipation_work: diss.work,
            dissipation: diss.dissipation,
            dissipation_residual: diss.residual,
        };
        match extract_modulation(&orbit, report.final_state.rho(), report.speed) {
            Ok(table) => {
                art.write_with("modulation.csv", |buf| Ok(table.write_csv(buf)?))?;
                diag.modulation_alpha = Some(table.alpha);
                diag.modulation_consistency = Some(table.consistency_residual);
                diag.modulation_reconstruction = Some(table.reconstruction_error);
            }
            Err(e @ FkError::NotSliding { .. }) => diag.modulation_error = Some(e.to_string()),
            Err(e) => return Err(e.into()),
        }
        sliding = Some(diag);
    }
    art.write_json(
        "asymptotics.json",
        &json!({
            "mode": "dc",
            "verdict": report.verdict.label(),
            "period": report.verdict.period(),
            "speed": report.speed,
            "average_speed": avg.v,
            "report": report,
            "sliding": sliding,
        }),
    )?;
    Ok(None)
}

pub fn zero_audit(cfg: &RunConfig, art: &mut Artifacts) -> Outcome {
    let dyn_ = dynamics(cfg);
    let u1 = initial_state(cfg, "zero-audit-1")?;
    let u2 = seeded_state(cfg, "zero-audit-2", cfg.lattice.m);
    let windows = if cfg.zero_audit.windows.is_empty() { vec![(0, cfg.lattice.n as i64)] } else { cfg.zero_audit.windows.clone() };
    let opts = TrackOptions {
        tol_event: cfg.tolerances.tol_event,
        tol_tangency: cfg.tolerances.tol_tangency,
        cluster_gap: 10.0 * cfg.tolerances.tol_event,
        ..TrackOptions::default()
    };
    let audit = audit_pair(&u1, &u2, &dyn_, cfg.integrator.horizon, cfg.integrator.dt, &windows, opts)?;
    let ledger = &audit.ledger;
    art.write_with("ledger.csv", |buf| Ok(ledger.write_csv(buf)?))?;
    let header = ["m", "n", "residual"].map(String::from);
    art.write(
        "audit.csv",
        &csv_bytes(&header, |w| {
            for ((m, n), r) in &audit.residuals {
                w.write_record([m.to_string(), n.to_string(), r.to_string()])?;
            }
            Ok(())
        })?,
    )?;
    let balanced = audit.balanced() && ledger.unresolved() == 0;
    art.write_json(
        "zero_audit.json",
        &json!({
            "events": ledger.events.len(),
            "total_disappearance": ledger.total_disappearance(),
            "unresolved": ledger.unresolved(),
            "table_mismatches": ledger.table_mismatches(),
            "monotonicity_violations": ledger.monotonicity_violations(),
            "collapsed_at": ledger.collapsed_at,
            "t_end": ledger.t_end,
            "balanced": balanced,
        }),
    )?;
    if balanced {
        Ok(None)
    } else {
        let bad: Vec<String> = audit.residuals.iter().filter(|r| r.1 != 0).map(|((m, n), r)| format!("[{m}, {n}) residual {r}")).collect();
        Ok(Some(format!("zero balance failed: {} unresolved events; {}", ledger.unresolved(), bad.join(", "))))
    }
}

pub fn measure(cfg: &RunConfig, art: &mut Artifacts) -> Outcome {
    let dyn_ = dynamics(cfg);
    let m = &cfg.measure;
    let mu1 = seeded_ensemble(cfg, "measure-1", m.members, &m.windings)?;
    let mu2 = seeded_ensemble(cfg, "measure-2", m.members, &m.windings)?;
    let opts = ZOptions { mc_threshold: m.mc_threshold, mc_pairs: m.mc_pairs, seed: cfg.seed };
    let (rows, _, _) = z_series(&mu1, &mu2, &dyn_, cfg.integrator.horizon, cfg.integrator.dt, cfg.integrator.dt_out, &opts)?;
    art.write_with("z_series.csv", |buf| Ok(write_z_series(&rows, buf)?))?;
    let tol = cfg.tolerances.tol_z;
    let increases = rows.windows(2).filter(|w| w[1].z > w[0].z + tol + 2.0 * w[1].stat_err.max(w[0].stat_err)).count();
    let integer: Vec<_> = rows.iter().filter(|r| (r.t - r.t.round()).abs() < 1e-9).collect();
    let integer_increases = integer.windows(2).filter(|w| w[1].z > w[0].z + tol + 2.0 * w[1].stat_err.max(w[0].stat_err)).count();
    art.write_json(
        "measure.json",
        &json!({
            "members": m.members,
            "z_start": rows.first().map(|r| r.z),
            "z_end": rows.last().map(|r| r.z),
            "increases": increases,
            "integer_time_increases": integer_increases,
            "monte_carlo": m.members > m.mc_threshold,
        }),
    )?;
    Ok(None)
}

pub fn am(cfg: &RunConfig, art: &mut Artifacts) -> Outcome {
    let dyn_ = dynamics(cfg);
    let a = &cfg.am;
    let opts = ConstructOptions { classify: classify_options(cfg), orbit_nodes: a.orbit_nodes, ..ConstructOptions::default() };
    let c = construct_ordered_invariant(a.p, a.q, &dyn_, a.n_avg, &opts)?;
    art.write("ensemble.json", format!("{}\n", c.ensemble.to_json()?).as_bytes())?;
    let header = ["member", "ordered", "width", "violation"].map(String::from);
    art.write(
        "orderedness.csv",
        &csv_bytes(&header, |w| {
            for (i, r) in c.reports.iter().enumerate() {
                w.write_record([i.to_string(), r.is_ordered.to_string(), r.width.to_string(), r.violation.to_string()])?;
            }
            Ok(())
        })?,
    )?;
    let support = support_samples(&c.ensemble);
    let step = support.len().div_ceil(a.samples.max(1)).max(1);
    let samples: Vec<ChainState> = support.into_iter().step_by(step).collect();
    let rows = characteristic_map_samples(&samples, &dyn_, cfg.integrator.dt_out, cfg.integrator.dt)?;
    art.write_with("characteristic.csv", |buf| Ok(write_characteristic_csv(&rows, buf)?))?;
    let inj = injectivity_diagnostic(&samples, EPS_CONFIG, EPS_PI);
    let defect = commutation_defect(&samples, &dyn_, cfg.integrator.dt_out, cfg.integrator.dt)?;
    art.write_json(
        "am.json",
        &json!({
            "p": a.p,
            "q": a.q,
            "rho": format!("{}/{}", c.rho_num, c.rho_den),
            "verdict": c.verdict.as_ref().map(|v| v.label()),
            "members": c.ensemble.len(),
            "all_ordered": c.reports.iter().all(|r| r.is_ordered),
            "max_width": c.reports.iter().map(|r| r.width).fold(0.0, f64::max),
            "injectivity": inj,
            "commutation_defect": defect,
        }),
    )?;
    Ok(None)
}

pub fn depin(cfg: &RunConfig, art: &mut Artifacts) -> Outcome {
    let d = &cfg.depin;
    let grid: Vec<f64> = if d.points == 1 {
        vec![d.f_min]
    } else {
        (0..d.points).map(|i| d.f_min + (d.f_max - d.f_min) * i as f64 / (d.points - 1) as f64).collect()
    };
    let state = initial_state(cfg, "depin-initial")?;
    let opts = SweepOptions { classify: classify_options(cfg), blocks: d.blocks, orbit_nodes: d.orbit_nodes };
    let rows = depinning_sweep(&state, &cfg.potential.build(), &grid, &opts)?;
    art.write_with("sweep.csv", |buf| Ok(write_sweep_csv(&rows, buf)?))?;
    let first_sliding = rows.iter().position(|r| r.t0.is_some());
    let bracket = first_sliding.map(|i| (i.checked_sub(1).map(|j| rows[j].f), rows[i].f));
    art.write_json(
        "depin.json",
        &json!({
            "points": rows.len(),
            "f_c_lower": bracket.and_then(|b| b.0),
            "f_c_upper": bracket.map(|b| b.1),
            "undetermined": rows.iter().filter(|r| r.verdict == Verdict::Undetermined.label()).count(),
            "errors": rows.iter().filter(|r| r.error.is_some()).count(),
            "non_monotone": rows.iter().filter(|r| r.non_monotone).count(),
        }),
    )?;
    Ok(None)
}

pub fn residence(cfg: &RunConfig, art: &mut Artifacts) -> Outcome {
    let dyn_ = dynamics(cfg);
    let r = &cfg.residence;
    let mu = seeded_ensemble(cfg, "residence", r.members, &r.windings)?;
    let copts = classify_options(cfg);
    let mut a_hat = Vec::new();
    for m in &mu.members {
        let rep = classify_asymptotics(m, &dyn_, &copts)?;
        if rep.verdict == Verdict::Equilibrium {
            a_hat.push(rep.final_state);
        }
    }
    let opts = ResidenceOptions { time_samples: r.time_samples, dt: cfg.integrator.dt, ..ResidenceOptions::default() };
    let fractions = r
        .horizons
        .iter()
        .map(|&s| attractor_residence(&mu, &a_hat, &dyn_, s, r.eps, &opts))
        .collect::<Result<Vec<f64>, FkError>>()?;
    let header = ["S", "fraction"].map(String::from);
    art.write(
        "residence.csv",
        &csv_bytes(&header, |w| {
            for (s, f) in r.horizons.iter().zip(&fractions) {
                w.write_record([s.to_string(), f.to_string()])?;
            }
            Ok(())
        })?,
    )?;
    art.write_json("residence.json", &json!({ "reference_equilibria": a_hat.len(), "horizons": r.horizons, "fractions": fractions }))?;
    Ok(None)
}

/// Merge every command manifest in `dir` into `manifest.json`, re-hashing the
/// listed files. Missing or altered files are an audit failure.
pub fn report(cfg: &RunConfig, dir: &Path) -> Outcome {
    let mut names: Vec<String> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.file_name().to_string_lossy().into_owned()))
        .filter(|n| n.ends_with(".manifest.json"))
        .collect();
    names.sort();
    let mut commands = Vec::new();
    let mut problems = Vec::new();
    for name in &names {
        let text = fs::read_to_string(dir.join(name))?;
        let m: CommandManifest = serde_json::from_str(&text).map_err(|e| CliError::Io(e.into()))?;
        debug_assert_eq!(name, &manifest_name(&m.command));
        for f in &m.files {
            match fs::read(dir.join(&f.name)) {
                Ok(bytes) if sha256_hex(&bytes) == f.sha256 => {}
                Ok(_) => problems.push(format!("{} changed since {} wrote it", f.name, m.command)),
                Err(_) => problems.push(format!("{} listed by {} is missing", f.name, m.command)),
            }
        }
        commands.push(m);
    }
    let hash = cfg.hash();
    let consistent = commands.iter().all(|m| m.config_hash == hash);
    let mut text = serde_json::to_string_pretty(&json!({
        "config_hash": hash,
        "seed": cfg.seed,
        "consistent_config": consistent,
        "verified": problems.is_empty(),
        "problems": problems,
        "commands": commands,
    }))
    .map_err(|e| CliError::Io(e.into()))?;
    text.push('\n');
    fs::write(dir.join("manifest.json"), text)?;
    if problems.is_empty() {
        Ok(None)
    } else {
        Ok(Some(problems.join("; ")))
    }
}
