//! Subcommand implementations.

use std::f64::consts::PI;
use std::path::PathBuf;

use qmetro::analysis::{default_theta_grid, find_maxima, find_minima, sweep_continuous, sweep_theta, uniform_grid, Extremum, SweepColumns};
use qmetro::circuits::CircuitRole;
use qmetro::hilbert::{fock, reduce_to_mode, ReducedDensity};
use qmetro::metrology::{bounds, MeasurementModel};
use qmetro::optimize::{ablation_premeasure, ablation_theta, optimize_measurement, optimize_preparation, OptBatch, OptRecord, ProbeSchedule};
use qmetro::wigner::{default_axis, symmetric_axis, wigner as wigner_grid};
use qmetro::{CompositeState, Nonlinearity, Protocol};
use serde_json::json;

use crate::config::{Measurement, RunConfig};
use crate::output::{float, opt_float, Manifest, ParamsFile, RunDir};
use crate::{CliError, Stage, Variant};

const PREPARE_PARAMS: &str = "prepare_params.json";

fn measurement_model(config: &RunConfig, protocol: &Protocol) -> MeasurementModel {
    match config.measurement {
        Measurement::Counting => MeasurementModel::counting(protocol.include_emitters()),
        Measurement::Homodyne => MeasurementModel::homodyne(config.theta, config.homodyne_grid(), protocol.include_emitters()),
    }
}

fn write_extrema(run: &RunDir, name: &str, protocol: &Protocol, extrema: &[Extremum]) -> Result<(), CliError> {
    let s = protocol.settings();
    let tfs = protocol.bounds().tfs_inv_fi;
    let mut out = run.csv(name)?;
    out.row(["kind", "N", "index", "time", "inv_qfi", "inv_qfi_over_tfs"])?;
    for e in extrema {
        out.row([s.kind.to_string(), float(s.n_mean), e.index.to_string(), float(e.time), float(e.value), float(e.value / tfs)])?;
    }
    out.finish()?;
    Ok(())
}

pub fn sweep(config: RunConfig, counting: bool, homodyne: bool) -> Result<(), CliError> {
    let run = RunDir::create(Manifest::new("sweep", json!({ "counting": counting, "homodyne": homodyne }), config))?;
    let config = &run.manifest.config;
    let protocol = Protocol::new(config.settings())?;
    let spec = config.sweep.expect("resolved");
    let times = uniform_grid(spec.start, spec.stop, spec.step)?;
    let columns = SweepColumns { counting, homodyne: homodyne.then(|| measurement_model(&RunConfig { measurement: Measurement::Homodyne, ..config.clone() }, &protocol)) };
    let records = sweep_continuous(&protocol, &times, &columns)?;

    let mut out = run.csv("sweep.csv")?;
    out.row(["kind", "N", "time", "inv_qfi", "inv_cfi_counting", "inv_cfi_homodyne"])?;
    for r in &records {
        out.row([r.kind.to_string(), float(r.n_mean), float(r.time), float(r.inv_qfi), opt_float(r.inv_cfi_counting), opt_float(r.inv_cfi_homodyne)])?;
    }
    out.finish()?;
    let minima = find_minima(&records);
    let maxima = find_maxima(&records);
    write_extrema(&run, "minima.csv", &protocol, &minima)?;
    write_extrema(&run, "maxima.csv", &protocol, &maxima)?;
    println!("{} points, {} minima, {} maxima -> {}", records.len(), minima.len(), maxima.len(), run.dir.display());
    for m in &minima {
        println!("minimum  t={:.4}  1/F_Q={:.6e}", m.time, m.value);
    }
    Ok(())
}

fn stage_name(stage: CircuitRole) -> &'static str {
    match stage {
        CircuitRole::Prepare => "prepare",
        CircuitRole::Premeasure => "premeasure",
    }
}

fn write_batch(run: &RunDir, stem: &str, batch: &OptBatch) -> Result<(), CliError> {
    let mut out = run.csv(&format!("{stem}.csv"))?;
    out.row(["kind", "N", "stage", "seed", "d", "best_objective", "inv_fisher", "iters_used", "budget", "wall_time", "params"])?;
    for r in &batch.records {
        let params: Vec<String> = r.best_params.iter().map(|v| float(*v)).collect();
        out.row([
            r.kind.to_string(),
            float(r.n_mean),
            stage_name(r.stage).to_string(),
            r.seed.to_string(),
            r.d.to_string(),
            float(r.best_objective),
            float(r.inv_fisher),
            r.iters_used.to_string(),
            float(r.budget),
            float(r.wall_time),
            params.join(";"),
        ])?;
    }
    out.finish()?;
    if !batch.failures.is_empty() {
        let mut out = run.csv(&format!("{stem}_failures.csv"))?;
        out.row(["seed", "d", "error"])?;
        for f in &batch.failures {
            eprintln!("warning: seed {} failed at d={}: {}", f.seed, f.d, f.error);
            out.row([f.seed.to_string(), f.d.to_string(), f.error.to_string()])?;
        }
        out.finish()?;
    }
    if batch.records.is_empty() {
        return Err(CliError::Input(format!("every seed failed in the {stem} stage")));
    }
    run.write_params(&format!("{stem}_params.json"), stem, &batch.records)?;
    let b = bounds(run.manifest.config.n)?;
    for d in batch.depths() {
        let best = batch.best_at(d).expect("depth present");
        println!("{stem} d={d}  best 1/F={:.6e}  (x HL {:.4}, x TFS {:.4})  budget {:.4}", best.inv_fisher, best.inv_fisher / b.hl_inv_fi, best.inv_fisher / b.tfs_inv_fi, best.budget);
    }
    Ok(())
}

fn load_preparation(run: &RunDir, from: Option<PathBuf>) -> Result<ParamsFile, CliError> {
    let path = from.unwrap_or_else(|| run.path(PREPARE_PARAMS));
    if !path.exists() {
        return Err(CliError::Input(format!("no stored preparation at {}; run the prepare stage first or pass --from", path.display())));
    }
    let params = ParamsFile::read(&path)?;
    if params.stage != "prepare" {
        return Err(CliError::Input(format!("{} holds {} circuits, expected prepare", path.display(), params.stage)));
    }
    params.check_matches(&run.manifest.config)?;
    Ok(params)
}

fn probe_from(protocol: &Protocol, record: &OptRecord) -> Result<CompositeState, CliError> {
    Ok(protocol.programmable_probe(&record.params()?)?)
}

/// Best prepared probe at each depth `1..=d_max`.
fn per_depth_probes(protocol: &Protocol, prepared: &[OptRecord], d_max: usize) -> Result<Vec<CompositeState>, CliError> {
    (1..=d_max)
        .map(|d| {
            let best = prepared
                .iter()
                .filter(|r| r.d == d)
                .min_by(|a, b| a.best_objective.total_cmp(&b.best_objective))
                .ok_or_else(|| CliError::Input(format!("stored preparation has no circuit at depth {d}")))?;
            probe_from(protocol, best)
        })
        .collect()
}

pub fn optimize(config: RunConfig, stage: Stage, from: Option<PathBuf>) -> Result<(), CliError> {
    let stage_label = format!("{stage:?}").to_lowercase();
    let from_label = from.as_ref().map(|p| p.display().to_string());
    let run = RunDir::create(Manifest::new("optimize", json!({ "stage": stage_label, "from": from_label }), config))?;
    let config = &run.manifest.config;
    let protocol = Protocol::new(config.settings())?;
    let prepared = match stage {
        Stage::Measure => load_preparation(&run, from)?.records,
        Stage::Prepare | Stage::Both => {
            let batch = optimize_preparation(&protocol, &config.optimizer)?;
            write_batch(&run, "prepare", &batch)?;
            batch.records
        }
    };
    if stage == Stage::Prepare {
        return Ok(());
    }
    let probes = per_depth_probes(&protocol, &prepared, config.optimizer.d_max)?;
    let model = measurement_model(config, &protocol);
    let batch = optimize_measurement(&protocol, &ProbeSchedule::PerDepth(probes), &model, &config.optimizer)?;
    write_batch(&run, "measure", &batch)
}

pub enum WignerSource {
    Continuous(f64),
    Params(PathBuf, Option<usize>),
    Vacuum,
}

pub fn wigner(config: RunConfig, source: WignerSource, mode: usize, half_width: Option<f64>, points: usize) -> Result<(), CliError> {
    let source_args = match &source {
        WignerSource::Continuous(t) => json!({ "time": t }),
        WignerSource::Params(p, d) => json!({ "params": p.display().to_string(), "depth": d }),
        WignerSource::Vacuum => json!({ "vacuum": true }),
    };
    let args = json!({ "source": source_args, "mode": mode, "half_width": half_width, "points": points });
    let run = RunDir::create(Manifest::new("wigner", args, config))?;
    let config = &run.manifest.config;
    let protocol = Protocol::new(config.settings())?;
    let factor = config.kind.mode_factors()[mode - 1];
    let rho = match source {
        WignerSource::Continuous(t) => reduce_to_mode(&protocol.continuous_probe(t)?, factor)?,
        WignerSource::Params(path, depth) => {
            let params = ParamsFile::read(&path)?;
            params.check_matches(config)?;
            if params.stage != "prepare" {
                return Err(CliError::Input(format!("{} holds {} circuits, expected prepare", path.display(), params.stage)));
            }
            let record = params.best(depth).ok_or_else(|| CliError::Input(format!("no circuit at depth {depth:?} in {}", path.display())))?;
            reduce_to_mode(&probe_from(&protocol, record)?, factor)?
        }
        WignerSource::Vacuum => {
            let v = nalgebra::DVector::from_vec(fock(0, config.cutoff())?);
            ReducedDensity::from_matrix(vec![v.len()], &v * v.adjoint())?
        }
    };
    let axis = match half_width {
        None if points == 201 => default_axis(),
        None => symmetric_axis(9.0, points)?,
        Some(h) => symmetric_axis(h, points)?,
    };
    let grid = wigner_grid(&rho, &axis, &axis)?;
    let mut out = run.csv("wigner.csv")?;
    let mut header = vec!["p\\x".to_string()];
    header.extend(grid.x_axis.iter().map(|x| float(*x)));
    out.row(&header)?;
    for (i, p) in grid.p_axis.iter().enumerate() {
        let mut row = vec![float(*p)];
        row.extend(grid.values.row(i).iter().map(|w| float(*w)));
        out.row(&row)?;
    }
    out.finish()?;
    let (x, p) = grid.argmax();
    println!(
        "integral {:.6}  purity {:.6}  min {:.6e}  max {:.6e} at ({x:.3}, {p:.3})  negative volume {:.6e}",
        grid.integral(),
        grid.purity(),
        grid.min(),
        grid.max(),
        grid.negative_volume()
    );
    Ok(())
}

pub fn bench(n: f64) -> Result<(), CliError> {
    let b = bounds(n)?;
    println!("bound,inverse_fisher");
    println!("sql,{}", float(b.sql_inv_fi));
    println!("tfs,{}", float(b.tfs_inv_fi));
    println!("hl,{}", float(b.hl_inv_fi));
    Ok(())
}

/// First prominent minimum of the default sweep (JC) or `pi/4` (Kerr).
fn default_probe_time(config: &RunConfig, protocol: &Protocol) -> Result<f64, CliError> {
    match config.kind {
        Nonlinearity::Kerr => Ok(PI / 4.0),
        Nonlinearity::Jc => {
            let spec = config.sweep.expect("resolved");
            let times = uniform_grid(spec.start, spec.stop, spec.step)?;
            let records = sweep_continuous(protocol, &times, &SweepColumns::default())?;
            find_minima(&records)
                .first()
                .map(|m| m.time)
                .ok_or_else(|| CliError::Input("no 1/F_Q minimum on the sweep grid; pass --time".into()))
        }
    }
}

pub fn theta_sweep(config: RunConfig, time: Option<f64>, count: usize) -> Result<(), CliError> {
    let run = RunDir::create(Manifest::new("theta-sweep", json!({ "time": time, "count": count }), config))?;
    let config = &run.manifest.config;
    let protocol = Protocol::new(config.settings())?;
    let t = match time {
        Some(t) => t,
        None => default_probe_time(config, &protocol)?,
    };
    let sweep = sweep_theta(&protocol, t, &default_theta_grid(count), config.homodyne_grid())?;
    let mut out = run.csv("theta.csv")?;
    out.row(["kind", "N", "probe_time", "theta", "inv_cfi"])?;
    for (theta, inv) in &sweep.points {
        out.row([sweep.kind.to_string(), float(sweep.n_mean), float(t), float(*theta), float(*inv)])?;
    }
    out.finish()?;
    let tfs = protocol.bounds().tfs_inv_fi;
    println!(
        "probe time {t:.4}: theta_min = {:.4} ({:.4} pi), 1/F_C = {:.6e} (x TFS {:.4})",
        sweep.theta_min,
        sweep.theta_min / PI,
        sweep.inv_cfi_min,
        sweep.inv_cfi_min / tfs
    );
    Ok(())
}

pub fn ablate(config: RunConfig, variant: Variant, from: Option<PathBuf>) -> Result<(), CliError> {
    let variant_label = format!("{variant:?}").to_lowercase();
    let from_label = from.as_ref().map(|p| p.display().to_string());
    let run = RunDir::create(Manifest::new("ablate", json!({ "variant": variant_label, "from": from_label }), config))?;
    let config = &run.manifest.config;
    let protocol = Protocol::new(config.settings())?;
    let prepared = load_preparation(&run, from)?;
    let probes = per_depth_probes(&protocol, &prepared.records, config.optimizer.d_max)?;
    let (kind, n) = (config.kind.to_string(), float(config.n));
    match variant {
        Variant::Premeasure => {
            let model = measurement_model(config, &protocol);
            let rows = ablation_premeasure(&protocol, &ProbeSchedule::PerDepth(probes), &model, &config.optimizer)?;
            let mut out = run.csv("ablate_premeasure.csv")?;
            out.row(["kind", "N", "measurement", "theta", "d", "without_pqc", "with_pqc", "inv_qfi"])?;
            let measurement = format!("{:?}", config.measurement).to_lowercase();
            for r in &rows {
                out.row([kind.clone(), n.clone(), measurement.clone(), float(config.theta), r.d.to_string(), float(r.without_pqc), float(r.with_pqc), float(r.inv_qfi)])?;
                println!("d={}  without {:.6e}  with {:.6e}  1/F_Q {:.6e}", r.d, r.without_pqc, r.with_pqc, r.inv_qfi);
            }
            out.finish()?;
        }
        Variant::Theta => {
            let model = MeasurementModel::homodyne(0.0, config.homodyne_grid(), protocol.include_emitters());
            let mut out = run.csv("ablate_theta.csv")?;
            out.row(["kind", "N", "d", "theta_only", "theta_only_angle", "theta_only_params", "fixed_theta_pqc", "free_theta_pqc", "free_theta_angle", "inv_qfi"])?;
            for (i, probe) in probes.iter().enumerate() {
                let r = ablation_theta(&protocol, probe, &model, i + 1, &config.optimizer)?;
                out.row([
                    kind.clone(),
                    n.clone(),
                    r.d.to_string(),
                    float(r.theta_only),
                    float(r.theta_only_angle),
                    r.theta_only_params.to_string(),
                    float(r.fixed_theta_pqc),
                    float(r.free_theta_pqc),
                    float(r.free_theta_angle),
                    float(r.inv_qfi),
                ])?;
                println!("d={}  theta only {:.6e}  theta=0 + circuit {:.6e}  free theta + circuit {:.6e}", r.d, r.theta_only, r.fixed_theta_pqc, r.free_theta_pqc);
            }
            out.finish()?;
        }
    }
    Ok(())
}
