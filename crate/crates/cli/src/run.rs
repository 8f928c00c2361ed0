//! Executes a scenario and writes its run directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use cosserat_core::basis::STRAIN_NAMES;
use cosserat_core::dynamics::{simulate, Model, State};
use cosserat_core::integrator::{IntegratorOptions, IntegratorStats};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{self, Mode, ScenarioConfig, Source, TIMESERIES_FIELDS};
use crate::error::{CliError, Result};
use crate::metrics::{dynamic_metrics, secant_stiffness, fitted_slope, DynamicMetrics, Sample};
use crate::output::{self, num, CsvSink, TimeseriesLayout};
use crate::scenario;

#[derive(Clone, Debug, Serialize)]
pub struct IntegratorSummary {
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub rhs_evaluations: usize,
    pub jacobian_evaluations: usize,
    pub factorizations: usize,
}

impl From<&IntegratorStats> for IntegratorSummary {
    fn from(s: &IntegratorStats) -> Self {
        IntegratorSummary {
            accepted_steps: s.accepted,
            rejected_steps: s.rejected,
            rhs_evaluations: s.rhs_evaluations,
            jacobian_evaluations: s.jacobian_evaluations,
            factorizations: s.factorizations,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StaticSummary {
    pub time: f64,
    pub iterations: usize,
    pub length: f64,
    pub delta_volume: f64,
    pub tip_position: [f64; 3],
}

/// One point of the stiffness grid.
#[derive(Clone, Debug, Serialize)]
pub struct GridPoint {
    pub force: f64,
    pub pressure: f64,
    pub length: f64,
    /// Shortening relative to the unloaded length.
    pub delta_length: f64,
    pub stiffness: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct PressureSlope {
    pub pressure: f64,
    /// Least-squares slope of `F` against `ΔL` over the forces at this pressure.
    pub slope: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct StiffnessSummary {
    pub reference_length: f64,
    /// `EA/L` of the unloaded rod.
    pub passive_stiffness_linear: f64,
    pub slopes: Vec<PressureSlope>,
    /// Pressure `F/(ν⁰A)` at which each force leaves the length unchanged.
    pub rigid_pressures: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub status: String,
    pub error: Option<String>,
    pub scenario: String,
    pub source: String,
    pub config_sha256: String,
    pub mode: Mode,
    pub wall_time_s: f64,
    pub output_rows: usize,
    pub dynamics: Option<DynamicMetrics>,
    /// Extremes over space and time of each free strain component.
    pub strain_extrema: BTreeMap<String, [f64; 2]>,
    pub statics: Option<StaticSummary>,
    pub stiffness: Option<StiffnessSummary>,
    pub integrator: Option<IntegratorSummary>,
}

/// What a finished run produced.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub directory: PathBuf,
    pub summary: Summary,
    pub grid: Vec<GridPoint>,
}

pub fn config_hash(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Parses and validates; the error lists every problem found.
pub fn load(source: &Source) -> Result<ScenarioConfig> {
    let config = config::parse(&source.text)?;
    let report = config::validate(&config);
    if report.is_valid() {
        Ok(config)
    } else {
        Err(CliError::Invalid(report))
    }
}

fn default_directory(config: &ScenarioConfig) -> PathBuf {
    config
        .outputs
        .directory
        .as_ref()
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new("runs").join(&config.name))
}

struct StrainTracker {
    free: Vec<bool>,
    extrema: [[f64; 2]; 6],
}

impl StrainTracker {
    fn new(config: &ScenarioConfig) -> Self {
        StrainTracker {
            free: config.basis.degrees().iter().map(Option::is_some).collect(),
            extrema: [[f64::INFINITY, f64::NEG_INFINITY]; 6],
        }
    }

    fn observe(&mut self, samples: &[cosserat_core::dynamics::CenterlineSample]) {
        for c in samples {
            for (k, e) in self.extrema.iter_mut().enumerate() {
                e[0] = e[0].min(c.strain.0[k]);
                e[1] = e[1].max(c.strain.0[k]);
            }
        }
    }

    fn finish(&self) -> BTreeMap<String, [f64; 2]> {
        STRAIN_NAMES
            .iter()
            .zip(&self.extrema)
            .zip(&self.free)
            .filter(|((_, e), free)| **free && e[0] <= e[1])
            .map(|((name, e), _)| (name.to_string(), *e))
            .collect()
    }
}

struct Recorder {
    layout: TimeseriesLayout,
    timeseries: CsvSink,
    centerline: Option<CsvSink>,
    samples: Vec<Sample>,
    strains: StrainTracker,
}

impl Recorder {
    fn new(config: &ScenarioConfig, model: &Model, dir: &Path) -> Result<Self> {
        let fields = config
            .outputs
            .timeseries_fields
            .clone()
            .unwrap_or_else(|| TIMESERIES_FIELDS.iter().map(|s| s.to_string()).collect());
        let layout = TimeseriesLayout {
            fields,
            n_xi: model.n_xi(),
            n_rho: model.n_rho(),
        };
        let timeseries = CsvSink::create(dir.join(output::TIMESERIES), &layout.header())?;
        let centerline = if config.outputs.centerline {
            Some(CsvSink::create(dir.join(output::CENTERLINE), &output::centerline_header())?)
        } else {
            None
        };
        Ok(Recorder {
            layout,
            timeseries,
            centerline,
            samples: Vec::new(),
            strains: StrainTracker::new(config),
        })
    }

    fn record(&mut self, model: &Model, t: f64, state: &State) -> Result<()> {
        let d = model.diagnostics(state)?;
        self.timeseries.row(&self.layout.row(t, &d, state))?;
        let line = model.centerline(state)?;
        self.strains.observe(&line);
        if let Some(sink) = &mut self.centerline {
            for r in output::centerline_rows(t, &line) {
                sink.row(&r)?;
            }
        }
        self.samples.push(Sample {
            t,
            length: d.length,
            delta_volume: d.delta_volume,
            bend: d.bend.map(|b| ([b.position.x, b.position.y, b.position.z], b.speed)),
        });
        Ok(())
    }
}

fn base_summary(config: &ScenarioConfig, source: &Source) -> Summary {
    Summary {
        status: "ok".into(),
        error: None,
        scenario: config.name.clone(),
        source: source.origin.clone(),
        config_sha256: config_hash(&source.text),
        mode: config.simulation.mode,
        wall_time_s: 0.0,
        output_rows: 0,
        dynamics: None,
        strain_extrema: BTreeMap::new(),
        statics: None,
        stiffness: None,
        integrator: None,
    }
}

/// Runs a validated scenario into `out` (or the scenario's default directory).
/// On a runtime failure the outputs written so far are kept, a `PARTIAL`
/// marker is added and the summary records the failure.
pub fn run(config: &ScenarioConfig, source: &Source, out: Option<&Path>) -> Result<RunOutcome> {
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| default_directory(config));
    std::fs::create_dir_all(&dir).map_err(output::io_error(&dir))?;
    let stale = dir.join(output::PARTIAL_MARKER);
    if stale.exists() {
        std::fs::remove_file(&stale).map_err(output::io_error(&stale))?;
    }
    let start = Instant::now();
    let mut summary = base_summary(config, source);
    let mut grid = Vec::new();
    let result = match config.simulation.mode {
        Mode::Dynamic => run_dynamic(config, &dir, &mut summary),
        Mode::Static => run_static(config, &dir, &mut summary),
        Mode::StiffnessSweep => run_sweep(config, &dir, &mut summary).map(|g| grid = g),
    };
    summary.wall_time_s = start.elapsed().as_secs_f64();
    if let Err(e) = &result {
        summary.status = "failed".into();
        summary.error = Some(e.to_string());
        output::write_partial_marker(&dir, &e.to_string())?;
    }
    output::write_json(&dir.join(output::SUMMARY), &summary)?;
    result.map(|_| RunOutcome {
        directory: dir,
        summary,
        grid,
    })
}

fn run_dynamic(config: &ScenarioConfig, dir: &Path, summary: &mut Summary) -> Result<()> {
    let model = scenario::build_model(config)?;
    let sim = &config.simulation;
    let (duration, interval) = (sim.duration.unwrap_or(0.0), sim.output_interval.unwrap_or(0.0));
    let options = IntegratorOptions {
        rtol: sim.rtol,
        atol: sim.atol,
        ..IntegratorOptions::default()
    };
    let mut recorder = Recorder::new(config, &model, dir)?;
    let mut failure = None;
    let outcome = simulate(&model, &model.rest_state(), duration, interval, options, |t, state| {
        recorder.record(&model, t, state).map_err(|e| {
            let message = e.to_string();
            failure = Some(e);
            cosserat_core::error::Error::InvalidParameter(message)
        })
    });
    summary.output_rows = recorder.samples.len();
    summary.dynamics = Some(dynamic_metrics(&recorder.samples));
    summary.strain_extrema = recorder.strains.finish();
    match outcome {
        Ok(stats) => {
            summary.integrator = Some((&stats).into());
            log::info!(
                "{}: {} outputs, {} steps ({} rejected)",
                config.name,
                recorder.samples.len(),
                stats.accepted,
                stats.rejected
            );
            Ok(())
        }
        Err(e) => Err(failure.unwrap_or(CliError::Runtime(e))),
    }
}

fn run_static(config: &ScenarioConfig, dir: &Path, summary: &mut Summary) -> Result<()> {
    let model = scenario::build_model(config)?;
    let t = config.simulation.time;
    let solution = model.solve_statics(t, None)?;
    let state = State::at_rest(solution.q_xi.clone(), solution.q_rho.clone());
    let mut recorder = Recorder::new(config, &model, dir)?;
    recorder.record(&model, t, &state)?;
    let d = model.diagnostics(&state)?;
    summary.output_rows = 1;
    summary.strain_extrema = recorder.strains.finish();
    summary.statics = Some(StaticSummary {
        time: t,
        iterations: solution.iterations,
        length: d.length,
        delta_volume: d.delta_volume,
        tip_position: d.tip_position.into(),
    });
    Ok(())
}

/// Solves every (force, pressure) combination; rows come back in grid order.
pub fn stiffness_grid(config: &ScenarioConfig) -> Result<Vec<GridPoint>> {
    let sweep = config
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("stiffness_sweep mode needs a [sweep] table".into()))?;
    let reference_length = config.geometry.length;
    let cases: Vec<(f64, f64)> = sweep
        .forces
        .iter()
        .flat_map(|&f| sweep.pressures.iter().map(move |&p| (f, p)))
        .collect();
    cases
        .par_iter()
        .map(|&(force, pressure)| {
            let model = scenario::sweep_model(config, force, pressure)?;
            let solution = model.solve_statics(config.simulation.time, None)?;
            let d = model.diagnostics(&State::at_rest(solution.q_xi, solution.q_rho))?;
            let shortening = reference_length - d.length;
            Ok(GridPoint {
                force,
                pressure,
                length: d.length,
                delta_length: shortening,
                stiffness: secant_stiffness(force, shortening),
                iterations: solution.iterations,
            })
        })
        .collect()
}

fn run_sweep(config: &ScenarioConfig, dir: &Path, summary: &mut Summary) -> Result<Vec<GridPoint>> {
    let grid = stiffness_grid(config)?;
    let path = dir.join(output::STIFFNESS_GRID);
    let header: Vec<String> = ["force", "pressure", "length", "delta_length", "stiffness", "iterations"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut sink = CsvSink::create(path, &header)?;
    for g in &grid {
        sink.row(&[
            num(g.force),
            num(g.pressure),
            num(g.length),
            num(g.delta_length),
            num(g.stiffness),
            g.iterations.to_string(),
        ])?;
    }

    let sweep = config.sweep.as_ref().expect("checked by stiffness_grid");
    let profile = config::build_profile(&config.geometry);
    let area = std::f64::consts::PI * profile.radius(0.0).powi(2);
    let material = config::build_material(&config.material);
    let length = config.geometry.length;
    let slopes = sweep
        .pressures
        .iter()
        .map(|&p| {
            let rows: Vec<&GridPoint> = grid.iter().filter(|g| g.pressure == p).collect();
            let dl: Vec<f64> = rows.iter().map(|g| g.delta_length).collect();
            let f: Vec<f64> = rows.iter().map(|g| g.force).collect();
            PressureSlope {
                pressure: p,
                slope: fitted_slope(&dl, &f),
            }
        })
        .collect();
    summary.output_rows = grid.len();
    summary.stiffness = Some(StiffnessSummary {
        reference_length: length,
        passive_stiffness_linear: material.youngs_modulus * area / length,
        slopes,
        rigid_pressures: sweep
            .forces
            .iter()
            .map(|&f| [f, f / (material.poisson * area)])
            .collect(),
    });
    Ok(grid)
}
