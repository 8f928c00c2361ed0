//! Scenario files: schema, parsing and aggregated validation.

use std::fmt;
use std::path::Path;

use cosserat_core::basis::RhoBoundary;
use cosserat_core::loads::SigmoidWave;
use cosserat_core::material::{MaterialParams, SectionProfile};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Columns of `timeseries.csv` that can be selected in `outputs.timeseries_fields`.
pub const TIMESERIES_FIELDS: [&str; 14] = [
    "length",
    "delta_volume",
    "bend_s",
    "bend_curvature",
    "bend_x",
    "bend_y",
    "bend_z",
    "bend_speed",
    "tip_x",
    "tip_y",
    "tip_z",
    "elastic_energy",
    "kinetic_energy",
    "coordinates",
];

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub material: MaterialBlock,
    pub geometry: GeometryBlock,
    pub basis: BasisBlock,
    #[serde(default)]
    pub environment: EnvironmentBlock,
    #[serde(default)]
    pub cables: Vec<CableBlock>,
    #[serde(default)]
    pub transversals: Vec<TransversalBlock>,
    #[serde(default)]
    pub point_loads: Vec<PointLoadBlock>,
    pub simulation: SimulationBlock,
    pub sweep: Option<SweepBlock>,
    #[serde(default)]
    pub outputs: OutputsBlock,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialBlock {
    pub youngs_modulus: f64,
    pub poisson: f64,
    pub viscosity: f64,
    pub density: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryBlock {
    pub length: f64,
    pub base_radius: f64,
    /// Omitted for a cylinder.
    pub tip_radius: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LawChoice {
    #[default]
    Extended,
    Classic,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoriolisChoice {
    #[default]
    Coadjoint,
    Adjoint,
}

/// Legendre degree per strain component (absent = component frozen at its
/// reference value), plus the inflation basis and quadrature.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisBlock {
    #[serde(default)]
    pub law: LawChoice,
    pub kappa1: Option<usize>,
    pub kappa2: Option<usize>,
    pub kappa3: Option<usize>,
    pub nu1: Option<usize>,
    pub nu2: Option<usize>,
    pub nu3: Option<usize>,
    #[serde(default)]
    pub rho_segments: usize,
    #[serde(default = "default_boundary")]
    pub rho_boundary: String,
    pub quadrature_intervals: usize,
    pub quadrature_points: usize,
    #[serde(default)]
    pub coriolis: CoriolisChoice,
}

fn default_boundary() -> String {
    "neumann".into()
}

impl BasisBlock {
    pub fn degrees(&self) -> [Option<usize>; 6] {
        [self.kappa1, self.kappa2, self.kappa3, self.nu1, self.nu2, self.nu3]
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentBlock {
    #[serde(default)]
    pub fluid_density: f64,
    #[serde(default)]
    pub added_mass: [f64; 2],
    #[serde(default)]
    pub lift: f64,
    #[serde(default)]
    pub drag: f64,
    #[serde(default)]
    pub gravity: [f64; 3],
}

impl Default for EnvironmentBlock {
    fn default() -> Self {
        EnvironmentBlock {
            fluid_density: 0.0,
            added_mass: [0.0; 2],
            lift: 0.0,
            drag: 0.0,
            gravity: [0.0; 3],
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RouteBlock {
    /// Constant offset in metres.
    Fixed { y1: f64, y2: f64 },
    /// At `fraction·z(s)` from the centroid, `angle_deg` from the first section axis.
    Radial { fraction: f64, angle_deg: f64 },
    /// Conical helix making `turns` full turns over the rod length.
    Helix {
        fraction: f64,
        turns: f64,
        #[serde(default)]
        phase_deg: f64,
    },
}

/// Time schedule: a constant or a clamped polynomial in `t` (ascending coefficients).
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum ScheduleBlock {
    Constant(f64),
    Polynomial {
        coeffs: Vec<f64>,
        min: Option<f64>,
        max: Option<f64>,
    },
    /// Piece `i` holds from `starts[i]` to the next start; zero before the first.
    Piecewise { starts: Vec<f64>, pieces: Vec<Vec<f64>> },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ActivationBlock {
    /// Uniform command along the span.
    Constant { value: f64 },
    /// Travelling sigmoid wave, either a named preset or spelled out.
    Wave {
        preset: Option<String>,
        magnitude: Option<ScheduleBlock>,
        position: Option<ScheduleBlock>,
        steepness: Option<f64>,
        #[serde(default = "unit")]
        scale: f64,
    },
}

fn unit() -> f64 {
    1.0
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CableBlock {
    pub name: String,
    pub route: RouteBlock,
    pub span: Option<[f64; 2]>,
    pub activation: ActivationBlock,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransversalBlock {
    pub name: String,
    pub span: Option<[f64; 2]>,
    pub activation: ActivationBlock,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameChoice {
    #[default]
    Global,
    Follower,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointLoadBlock {
    pub s: f64,
    #[serde(default)]
    pub force: [f64; 3],
    #[serde(default)]
    pub moment: [f64; 3],
    #[serde(default)]
    pub frame: FrameChoice,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Static,
    Dynamic,
    StiffnessSweep,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationBlock {
    pub mode: Mode,
    pub duration: Option<f64>,
    pub output_interval: Option<f64>,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
    /// Time at which actuation schedules are evaluated in static mode.
    #[serde(default)]
    pub time: f64,
}

fn default_rtol() -> f64 {
    1e-6
}

fn default_atol() -> f64 {
    1e-8
}

/// Axial compression `F` (N) at the tip against a uniform transversal
/// contraction pressure `P` (Pa), every combination solved statically.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub forces: Vec<f64>,
    pub pressures: Vec<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsBlock {
    /// Used when `--out` is not given.
    pub directory: Option<String>,
    #[serde(default = "yes")]
    pub centerline: bool,
    /// Subset of [`TIMESERIES_FIELDS`]; all when absent.
    pub timeseries_fields: Option<Vec<String>>,
}

fn yes() -> bool {
    true
}

impl Default for OutputsBlock {
    fn default() -> Self {
        OutputsBlock {
            directory: None,
            centerline: true,
            timeseries_fields: None,
        }
    }
}

/// One validation finding, addressed by its dotted field path.
#[derive(Clone, Debug, PartialEq)]
pub struct Issue {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// Aggregated validation result; empty means valid.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub issues: Vec<Issue>,
}

impl Report {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }

    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.issues.push(Issue {
            path: path.into(),
            message: message.into(),
        });
    }

    fn check(&mut self, ok: bool, path: impl Into<String>, message: impl FnOnce() -> String) {
        if !ok {
            self.push(path, message());
        }
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for issue in &self.issues {
            writeln!(f, "{issue}")?;
        }
        Ok(())
    }
}

/// Bundled scenarios, addressable by name instead of a path.
pub const BUNDLED: [(&str, &str); 6] = [
    ("stiffness_tuning", include_str!("../scenarios/stiffness_tuning.toml")),
    ("reaching", include_str!("../scenarios/reaching.toml")),
    ("reaching_classic", include_str!("../scenarios/reaching_classic.toml")),
    ("reaching_no_tm", include_str!("../scenarios/reaching_no_tm.toml")),
    ("fetching", include_str!("../scenarios/fetching.toml")),
    ("fetching_no_om", include_str!("../scenarios/fetching_no_om.toml")),
];

pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

/// Scenario text plus the file it came from.
#[derive(Clone, Debug)]
pub struct Source {
    pub origin: String,
    pub text: String,
}

/// Reads a scenario from a path, falling back to the bundled scenario of that name.
pub fn load_source(spec: &str) -> Result<Source, CliError> {
    let path = Path::new(spec);
    if path.exists() {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        return Ok(Source {
            origin: path.display().to_string(),
            text,
        });
    }
    match bundled(spec) {
        Some(text) => Ok(Source {
            origin: format!("bundled:{spec}"),
            text: text.to_string(),
        }),
        None => Err(CliError::Config(format!(
            "'{spec}' is neither a readable file nor a bundled scenario ({})",
            BUNDLED.map(|(n, _)| n).join(", ")
        ))),
    }
}

pub fn parse(text: &str) -> Result<ScenarioConfig, CliError> {
    toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
}

fn check_span(report: &mut Report, path: &str, span: Option<[f64; 2]>, length: f64) {
    if let Some([a, b]) = span {
        report.check(
            a >= 0.0 && b <= length && a < b,
            format!("{path}.span"),
            || format!("span [{a}, {b}] must satisfy 0 ≤ start < end ≤ L = {length}"),
        );
    }
}

fn check_schedule(report: &mut Report, path: &str, schedule: &ScheduleBlock) {
    match schedule {
        ScheduleBlock::Constant(v) => report.check(v.is_finite(), path, || "must be finite".into()),
        ScheduleBlock::Polynomial { coeffs, min, max } => {
            report.check(!coeffs.is_empty(), format!("{path}.coeffs"), || "needs at least one coefficient".into());
            if let (Some(lo), Some(hi)) = (min, max) {
                report.check(lo <= hi, path, || format!("min {lo} exceeds max {hi}"));
            }
        }
        ScheduleBlock::Piecewise { starts, pieces } => {
            report.check(
                !starts.is_empty() && starts.len() == pieces.len(),
                path,
                || format!("needs as many pieces as starts ({} vs {})", pieces.len(), starts.len()),
            );
            report.check(starts.windows(2).all(|w| w[0] < w[1]), format!("{path}.starts"), || {
                "must be strictly increasing".into()
            });
        }
    }
}

fn check_activation(report: &mut Report, path: &str, activation: &ActivationBlock) {
    match activation {
        ActivationBlock::Constant { value } => {
            report.check(value.is_finite(), format!("{path}.value"), || "must be finite".into())
        }
        ActivationBlock::Wave {
            preset,
            magnitude,
            position,
            steepness,
            scale,
        } => {
            report.check(*scale >= 0.0 && scale.is_finite(), format!("{path}.scale"), || {
                format!("must be a finite non-negative number, got {scale}")
            });
            match preset {
                Some(name) => {
                    report.check(SigmoidWave::preset(name).is_some(), format!("{path}.preset"), || {
                        format!("unknown preset '{name}'; known presets: {}", SigmoidWave::PRESETS.join(", "))
                    });
                    report.check(
                        magnitude.is_none() && position.is_none() && steepness.is_none(),
                        path,
                        || "a preset wave cannot also set magnitude, position or steepness".into(),
                    );
                }
                None => {
                    match magnitude {
                        Some(m) => check_schedule(report, &format!("{path}.magnitude"), m),
                        None => report.push(format!("{path}.magnitude"), "required without a preset"),
                    }
                    match position {
                        Some(p) => check_schedule(report, &format!("{path}.position"), p),
                        None => report.push(format!("{path}.position"), "required without a preset"),
                    }
                    match steepness {
                        Some(k) => report.check(k.is_finite() && *k != 0.0, format!("{path}.steepness"), || {
                            "must be finite and non-zero".into()
                        }),
                        None => report.push(format!("{path}.steepness"), "required without a preset"),
                    }
                }
            }
        }
    }
}

/// Largest `|d(s)| / z(s)` of a route over a span, with its arclength.
fn worst_route_ratio(route: &RouteBlock, profile: &SectionProfile, span: [f64; 2]) -> (f64, f64, f64) {
    let samples = 401;
    let mut worst = (0.0, span[0], 0.0);
    for k in 0..samples {
        let s = span[0] + (span[1] - span[0]) * k as f64 / (samples - 1) as f64;
        let z = profile.radius(s);
        let offset = match *route {
            RouteBlock::Fixed { y1, y2 } => y1.hypot(y2),
            RouteBlock::Radial { fraction, .. } | RouteBlock::Helix { fraction, .. } => fraction.abs() * z,
        };
        let ratio = offset / z;
        if ratio > worst.0 {
            worst = (ratio, s, offset);
        }
    }
    worst
}

/// Schema and physics checks. Never stops at the first problem.
pub fn validate(config: &ScenarioConfig) -> Report {
    let mut report = Report::default();
    report.check(config.schema == SCHEMA_VERSION, "schema", || {
        format!("unsupported schema version {} (expected {SCHEMA_VERSION})", config.schema)
    });
    report.check(!config.name.trim().is_empty(), "name", || "must not be empty".into());

    let m = &config.material;
    report.check(m.youngs_modulus > 0.0, "material.youngs_modulus", || {
        format!("must be positive, got {}", m.youngs_modulus)
    });
    report.check(m.poisson > 0.0 && m.poisson < 0.5, "material.poisson", || {
        format!(
            "must lie in (0, 0.5), got {}; incompressibility is approximated by a value just below 0.5 (e.g. 0.4999) because λ diverges at 0.5",
            m.poisson
        )
    });
    report.check(m.viscosity >= 0.0, "material.viscosity", || {
        format!("must be non-negative, got {}", m.viscosity)
    });
    report.check(m.density > 0.0, "material.density", || format!("must be positive, got {}", m.density));

    let g = &config.geometry;
    report.check(g.length > 0.0, "geometry.length", || format!("must be positive, got {}", g.length));
    report.check(g.base_radius > 0.0, "geometry.base_radius", || {
        format!("must be positive, got {}", g.base_radius)
    });
    if let Some(tip) = g.tip_radius {
        report.check(tip > 0.0, "geometry.tip_radius", || format!("must be positive, got {tip}"));
    }
    let geometry_ok = g.length > 0.0 && g.base_radius > 0.0 && g.tip_radius.is_none_or(|r| r > 0.0);
    let length = g.length;

    let b = &config.basis;
    let names = ["kappa1", "kappa2", "kappa3", "nu1", "nu2", "nu3"];
    for (name, degree) in names.iter().zip(b.degrees()) {
        if let Some(d) = degree {
            report.check(d <= 20, format!("basis.{name}"), || format!("degree {d} exceeds the supported maximum 20"));
        }
    }
    report.check(b.degrees().iter().any(Option::is_some), "basis", || {
        "at least one strain component must be free".into()
    });
    match b.law {
        LawChoice::Extended => report.check(b.rho_segments >= 1, "basis.rho_segments", || {
            "the extended law needs at least one inflation segment".into()
        }),
        LawChoice::Classic => report.check(b.rho_segments == 0, "basis.rho_segments", || {
            "the classic law has no inflation field; set rho_segments = 0".into()
        }),
    }
    if let Err(e) = b.rho_boundary.parse::<RhoBoundary>() {
        report.push("basis.rho_boundary", e.to_string());
    }
    report.check(b.quadrature_intervals >= 1, "basis.quadrature_intervals", || "must be at least 1".into());
    report.check(b.quadrature_points >= 2, "basis.quadrature_points", || "must be at least 2".into());

    let e = &config.environment;
    report.check(e.fluid_density >= 0.0, "environment.fluid_density", || "must be non-negative".into());
    report.check(e.added_mass.iter().all(|&c| c >= 0.0), "environment.added_mass", || {
        "coefficients must be non-negative".into()
    });
    report.check(e.drag >= 0.0, "environment.drag", || "must be non-negative".into());

    let profile = build_profile(g);
    let mut seen = std::collections::HashSet::new();
    for (i, c) in config.cables.iter().enumerate() {
        let path = format!("cables[{i}]");
        report.check(seen.insert(c.name.clone()), format!("{path}.name"), || {
            format!("duplicate actuator name '{}'", c.name)
        });
        check_span(&mut report, &path, c.span, length);
        check_activation(&mut report, &format!("{path}.activation"), &c.activation);
        if let RouteBlock::Helix { turns, .. } = c.route {
            report.check(turns.is_finite(), format!("{path}.route.turns"), || "must be finite".into());
        }
        if geometry_ok {
            let span = c.span.unwrap_or([0.0, length]);
            if span[0] < span[1] && span[0] >= 0.0 && span[1] <= length {
                let (ratio, s, offset) = worst_route_ratio(&c.route, &profile, span);
                report.check(ratio < 1.0, format!("{path}.route"), || {
                    format!(
                        "route leaves the cross-section: offset {offset:.6} m ≥ radius {:.6} m at s = {s:.6} m",
                        profile.radius(s)
                    )
                });
            }
        }
    }
    for (i, t) in config.transversals.iter().enumerate() {
        let path = format!("transversals[{i}]");
        report.check(seen.insert(t.name.clone()), format!("{path}.name"), || {
            format!("duplicate actuator name '{}'", t.name)
        });
        check_span(&mut report, &path, t.span, length);
        check_activation(&mut report, &format!("{path}.activation"), &t.activation);
    }
    if !config.transversals.is_empty() {
        report.check(b.law == LawChoice::Extended, "transversals", || {
            "transversal actuators need the extended law (they act on the inflation field)".into()
        });
    }
    for (i, p) in config.point_loads.iter().enumerate() {
        let path = format!("point_loads[{i}]");
        report.check((0.0..=length).contains(&p.s), format!("{path}.s"), || {
            format!("arclength {} outside [0, {length}]", p.s)
        });
        report.check(
            p.force.iter().chain(&p.moment).all(|v| v.is_finite()),
            &path,
            || "force and moment must be finite".into(),
        );
    }

    let sim = &config.simulation;
    report.check(sim.rtol > 0.0, "simulation.rtol", || "must be positive".into());
    report.check(sim.atol > 0.0, "simulation.atol", || "must be positive".into());
    match sim.mode {
        Mode::Dynamic => {
            match sim.duration {
                Some(d) => report.check(d > 0.0, "simulation.duration", || {
                    format!("must be positive in dynamic mode, got {d}")
                }),
                None => report.push("simulation.duration", "required in dynamic mode"),
            }
            match sim.output_interval {
                Some(h) => report.check(h > 0.0 && sim.duration.is_none_or(|d| h <= d), "simulation.output_interval", || {
                    format!("must be positive and not exceed the duration, got {h}")
                }),
                None => report.push("simulation.output_interval", "required in dynamic mode"),
            }
        }
        Mode::Static => {}
        Mode::StiffnessSweep => {
            match &config.sweep {
                Some(sweep) => {
                    report.check(!sweep.forces.is_empty(), "sweep.forces", || "must not be empty".into());
                    report.check(sweep.forces.iter().all(|&f| f >= 0.0 && f.is_finite()), "sweep.forces", || {
                        "compressive forces must be finite and non-negative".into()
                    });
                    report.check(!sweep.pressures.is_empty(), "sweep.pressures", || "must not be empty".into());
                    report.check(
                        sweep.pressures.iter().all(|&p| p >= 0.0 && p.is_finite()),
                        "sweep.pressures",
                        || "contraction pressures must be finite and non-negative".into(),
                    );
                }
                None => report.push("sweep", "required in stiffness_sweep mode"),
            }
            report.check(b.nu3.is_some(), "basis.nu3", || "the stiffness sweep needs a free stretch".into());
            report.check(b.law == LawChoice::Extended, "basis.law", || {
                "the stiffness sweep needs the extended law".into()
            });
        }
    }
    if sim.mode != Mode::StiffnessSweep {
        report.check(config.sweep.is_none(), "sweep", || "only used in stiffness_sweep mode".into());
    }

    if let Some(fields) = &config.outputs.timeseries_fields {
        for (i, f) in fields.iter().enumerate() {
            report.check(TIMESERIES_FIELDS.contains(&f.as_str()), format!("outputs.timeseries_fields[{i}]"), || {
                format!("unknown field '{f}'; known fields: {}", TIMESERIES_FIELDS.join(", "))
            });
        }
    }
    report
}

pub fn build_profile(g: &GeometryBlock) -> SectionProfile {
    match g.tip_radius {
        Some(tip) => SectionProfile::cone(g.length, g.base_radius, tip),
        None => SectionProfile::cylinder(g.length, g.base_radius),
    }
}

pub fn build_material(m: &MaterialBlock) -> MaterialParams {
    MaterialParams {
        youngs_modulus: m.youngs_modulus,
        poisson: m.poisson,
        viscosity: m.viscosity,
        density: m.density,
    }
}
