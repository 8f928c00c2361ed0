//! Turns a validated scenario into a rod model.

use cosserat_core::basis::{QuadratureRule, RhoBasis, RhoBoundary, XiBasis};
use cosserat_core::dynamics::{CoriolisForm, Model, RodSpec};
use cosserat_core::liegroup::Vec3;
use cosserat_core::loads::{
    Activation, CableActuator, CableRoute, Environment, LoadFrame, PointLoad, Schedule, SigmoidWave,
    TransversalActuator,
};
use cosserat_core::material::ConstitutiveLaw;

use crate::config::{
    build_material, build_profile, ActivationBlock, CoriolisChoice, FrameChoice, LawChoice, RouteBlock, ScenarioConfig,
    ScheduleBlock,
};
use crate::error::{CliError, Result};

fn schedule(block: &ScheduleBlock) -> Schedule {
    match block {
        ScheduleBlock::Constant(v) => Schedule::Constant(*v),
        ScheduleBlock::Polynomial { coeffs, min, max } => Schedule::Polynomial {
            coeffs: coeffs.clone(),
            min: *min,
            max: *max,
        },
        ScheduleBlock::Piecewise { starts, pieces } => Schedule::Piecewise {
            starts: starts.clone(),
            pieces: pieces.clone(),
        },
    }
}

fn activation(block: &ActivationBlock) -> Result<Activation> {
    match block {
        ActivationBlock::Constant { value } => Ok(Activation::Constant(*value)),
        ActivationBlock::Wave {
            preset,
            magnitude,
            position,
            steepness,
            scale,
        } => {
            let wave = match preset {
                Some(name) => SigmoidWave::preset(name)
                    .ok_or_else(|| CliError::Config(format!("unknown activation preset '{name}'")))?,
                None => match (magnitude, position, steepness) {
                    (Some(m), Some(p), Some(k)) => SigmoidWave {
                        magnitude: schedule(m),
                        position: schedule(p),
                        steepness: *k,
                    },
                    _ => return Err(CliError::Config("wave needs magnitude, position and steepness".into())),
                },
            };
            Ok(Activation::Wave { wave, scale: *scale })
        }
    }
}

fn route(block: &RouteBlock, length: f64) -> CableRoute {
    match *block {
        RouteBlock::Fixed { y1, y2 } => CableRoute::Fixed { y1, y2 },
        RouteBlock::Radial { fraction, angle_deg } => CableRoute::Radial {
            fraction,
            angle: angle_deg.to_radians(),
        },
        RouteBlock::Helix {
            fraction,
            turns,
            phase_deg,
        } => CableRoute::Helix {
            fraction,
            angular_rate: 2.0 * std::f64::consts::PI * turns / length,
            phase: phase_deg.to_radians(),
        },
    }
}

/// Physical description of the rod, without discretization.
pub fn rod_spec(config: &ScenarioConfig) -> Result<RodSpec> {
    let length = config.geometry.length;
    let mut spec = RodSpec::new(build_material(&config.material), build_profile(&config.geometry));
    spec.law = match config.basis.law {
        LawChoice::Extended => ConstitutiveLaw::Extended,
        LawChoice::Classic => ConstitutiveLaw::Classic,
    };
    spec.coriolis = match config.basis.coriolis {
        CoriolisChoice::Coadjoint => CoriolisForm::Coadjoint,
        CoriolisChoice::Adjoint => CoriolisForm::Adjoint,
    };
    let env = &config.environment;
    spec.environment = Environment {
        fluid_density: env.fluid_density,
        added_mass: (env.added_mass[0], env.added_mass[1]),
        lift: env.lift,
        drag: env.drag,
        gravity: Vec3::from(env.gravity),
    };
    for c in &config.cables {
        let span = c.span.unwrap_or([0.0, length]);
        spec.cables.push(CableActuator {
            name: c.name.clone(),
            route: route(&c.route, length),
            span: (span[0], span[1]),
            activation: activation(&c.activation)?,
        });
    }
    for t in &config.transversals {
        let span = t.span.unwrap_or([0.0, length]);
        spec.transversals.push(TransversalActuator {
            name: t.name.clone(),
            span: (span[0], span[1]),
            activation: activation(&t.activation)?,
        });
    }
    for p in &config.point_loads {
        spec.point_loads.push(PointLoad {
            s: p.s,
            force: Vec3::from(p.force),
            moment: Vec3::from(p.moment),
            frame: match p.frame {
                FrameChoice::Global => LoadFrame::Global,
                FrameChoice::Follower => LoadFrame::Follower,
            },
        });
    }
    Ok(spec)
}

/// Discretizes `spec` with the scenario's bases and quadrature.
pub fn discretize(config: &ScenarioConfig, spec: RodSpec) -> Result<Model> {
    let b = &config.basis;
    let length = config.geometry.length;
    let rho = match b.law {
        LawChoice::Classic => RhoBasis::empty(length),
        LawChoice::Extended => {
            let boundary: RhoBoundary = b.rho_boundary.parse()?;
            RhoBasis::new(length, b.rho_segments, boundary)
        }
    };
    let rule = QuadratureRule::new(b.quadrature_intervals, b.quadrature_points, length)?;
    Ok(Model::new(spec, XiBasis::new(length, b.degrees()), rho, rule)?)
}

pub fn build_model(config: &ScenarioConfig) -> Result<Model> {
    discretize(config, rod_spec(config)?)
}

/// The scenario's rod with a tip follower compression `force` and a uniform
/// transversal contraction pressure `pressure` added, for the stiffness sweep.
pub fn sweep_model(config: &ScenarioConfig, force: f64, pressure: f64) -> Result<Model> {
    let mut spec = rod_spec(config)?;
    let length = config.geometry.length;
    spec.point_loads.push(PointLoad {
        s: length,
        force: Vec3::new(0.0, 0.0, -force),
        moment: Vec3::zeros(),
        frame: LoadFrame::Follower,
    });
    // the distributed traction is 2πz²f₀, so f₀ = P/2 gives the pressure resultant πz²P
    spec.transversals.push(TransversalActuator {
        name: "sweep_pressure".into(),
        span: (0.0, length),
        activation: Activation::Constant(pressure / 2.0),
    });
    discretize(config, spec)
}
