//! Actuation and environment loads.
//!
//! Actuators are described by a non-negative amplitude `a(t)` and a spatial
//! shape `χ(X, t) ∈ [0, 1]` with `X = s/L`, so the applied tension or
//! contraction pressure at `(s, t)` is `a(t)·χ(s/L, t)`. Generalized actuation
//! is therefore linear in the amplitudes.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicBool, Ordering};

use crate::error::{Error, Result};
use crate::liegroup::{hat3, Mat3, Mat6, Pose, Twist, Vec3, Vec6};
use crate::material::SectionProfile;

static NEGATIVE_COMMAND_WARNED: AtomicBool = AtomicBool::new(false);

fn clamp_non_negative(value: f64, what: &str) -> f64 {
    if value < 0.0 {
        if !NEGATIVE_COMMAND_WARNED.swap(true, Ordering::Relaxed) {
            log::warn!("{what} command {value} is negative; actuators are one-signed, clamping to zero");
        }
        0.0
    } else {
        value
    }
}

/// Scalar function of time.
#[derive(Clone, Debug, PartialEq)]
pub enum Schedule {
    Constant(f64),
    /// Polynomial in `t` (ascending coefficients), optionally clamped.
    Polynomial {
        coeffs: Vec<f64>,
        min: Option<f64>,
        max: Option<f64>,
    },
    /// Piecewise polynomial: piece `i` (ascending coefficients) holds for
    /// `t ≥ starts[i]` until the next start; before `starts[0]` the value is 0.
    Piecewise {
        starts: Vec<f64>,
        pieces: Vec<Vec<f64>>,
    },
}

fn polyval(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
}

impl Schedule {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Schedule::Constant(v) => *v,
            Schedule::Polynomial { coeffs, min, max } => {
                let mut v = polyval(coeffs, t);
                if let Some(lo) = min {
                    v = v.max(*lo);
                }
                if let Some(hi) = max {
                    v = v.min(*hi);
                }
                v
            }
            Schedule::Piecewise { starts, pieces } => {
                match starts.iter().rposition(|&s0| t >= s0) {
                    Some(i) => polyval(&pieces[i], t),
                    None => 0.0,
                }
            }
        }
    }

    /// `clamp(c0 + c1 t + c2 t², lower, ·)`.
    pub fn floored(coeffs: &[f64], floor: f64) -> Self {
        Schedule::Polynomial {
            coeffs: coeffs.to_vec(),
            min: Some(floor),
            max: None,
        }
    }

    pub fn capped(coeffs: &[f64], cap: f64) -> Self {
        Schedule::Polynomial {
            coeffs: coeffs.to_vec(),
            min: None,
            max: Some(cap),
        }
    }
}

/// Traveling sigmoid `u(X,t) = −α(t)(1 − 1/(1+exp(−σ(X−μ(t)))))`.
#[derive(Clone, Debug, PartialEq)]
pub struct SigmoidWave {
    pub magnitude: Schedule,
    pub position: Schedule,
    pub steepness: f64,
}

impl SigmoidWave {
    /// `1 − 1/(1+exp(−σ(X−μ)))`, the fraction of the magnitude applied at `X`.
    pub fn shape(&self, x: f64, t: f64) -> f64 {
        let z = self.steepness * (x - self.position.eval(t));
        // 1 − 1/(1+e^{−z}) = 1/(1+e^{z})
        if z > 0.0 {
            let e = (-z).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + z.exp())
        }
    }

    pub fn eval(&self, x: f64, t: f64) -> f64 {
        -self.magnitude.eval(t) * self.shape(x, t)
    }

    /// Built-in activation waves for the reaching and fetching motions.
    pub fn preset(name: &str) -> Option<SigmoidWave> {
        let w = |magnitude, position, steepness| {
            Some(SigmoidWave {
                magnitude,
                position,
                steepness,
            })
        };
        match name {
            "reach_lm1" => w(
                Schedule::floored(&[0.2, -0.144, 0.072], 0.02),
                Schedule::capped(&[0.3, 0.24], 0.9),
                40.0,
            ),
            "reach_lm234" => w(
                Schedule::floored(&[0.218, -0.0672], 0.05),
                Schedule::capped(&[0.183, 0.1868], 0.65),
                40.0,
            ),
            "reach_tm" => w(
                Schedule::Constant(800.0),
                Schedule::capped(&[0.28, 0.14], 0.7),
                200.0,
            ),
            "fetch_lm1" => w(
                Schedule::capped(&[0.05, 0.06], 0.2),
                Schedule::floored(&[0.9, -0.12], 0.6),
                200.0,
            ),
            "fetch_lm234" => w(
                Schedule::capped(&[0.04, 0.048], 0.16),
                Schedule::floored(&[0.86, -0.136], 0.52),
                200.0,
            ),
            "fetch_tm" => w(
                Schedule::Constant(1600.0),
                Schedule::floored(&[0.9, -0.1667], 0.4),
                200.0,
            ),
            "fetch_om" => w(
                Schedule::Piecewise {
                    starts: vec![6.0],
                    pieces: vec![vec![0.1]],
                },
                Schedule::Piecewise {
                    starts: vec![6.0, 8.0],
                    pieces: vec![vec![-1.8, 0.3], vec![0.6]],
                },
                200.0,
            ),
            _ => None,
        }
    }

    pub const PRESETS: [&'static str; 7] = [
        "reach_lm1",
        "reach_lm234",
        "reach_tm",
        "fetch_lm1",
        "fetch_lm234",
        "fetch_tm",
        "fetch_om",
    ];
}

/// `sigmoid_activation` as a free function.
pub fn sigmoid_activation(wave: &SigmoidWave, x: f64, t: f64) -> f64 {
    wave.eval(x, t)
}

/// How an actuator's command varies in space and time.
#[derive(Clone, Debug, PartialEq)]
pub enum Activation {
    /// Uniform command along the span.
    Constant(f64),
    /// Magnitude of a sigmoid wave, multiplied by `scale`.
    Wave { wave: SigmoidWave, scale: f64 },
}

impl Activation {
    /// Non-negative amplitude at time `t`; negative commands are clamped.
    pub fn amplitude(&self, t: f64) -> f64 {
        let raw = match self {
            Activation::Constant(v) => *v,
            Activation::Wave { wave, scale } => scale * wave.magnitude.eval(t),
        };
        clamp_non_negative(raw, "actuator")
    }

    /// Spatial profile in `[0, 1]` at normalized arclength `x`.
    pub fn shape(&self, x: f64, t: f64) -> f64 {
        match self {
            Activation::Constant(_) => 1.0,
            Activation::Wave { wave, .. } => wave.shape(x, t),
        }
    }

    pub fn value(&self, x: f64, t: f64) -> f64 {
        self.amplitude(t) * self.shape(x, t)
    }
}

/// Route of a cable inside the cross-section, `d(s) = (Y₁, Y₂, 0)`.
#[derive(Clone, Debug, PartialEq)]
pub enum CableRoute {
    /// Fixed offset in metres.
    Fixed { y1: f64, y2: f64 },
    /// At `fraction·z(s)` from the centroid, at polar angle `angle` (rad) from d₁.
    Radial { fraction: f64, angle: f64 },
    /// Conical helix `Y₁ = f z cos(ωs + φ)`, `Y₂ = −f z sin(ωs + φ)`.
    Helix {
        fraction: f64,
        angular_rate: f64,
        phase: f64,
    },
}

impl CableRoute {
    /// `(d, d′)` at `s`.
    pub fn eval(&self, profile: &SectionProfile, s: f64) -> (Vec3, Vec3) {
        let z = profile.radius(s);
        let dz = profile.radius_slope();
        match *self {
            CableRoute::Fixed { y1, y2 } => (Vec3::new(y1, y2, 0.0), Vec3::zeros()),
            CableRoute::Radial { fraction, angle } => {
                let (sa, ca) = angle.sin_cos();
                (
                    Vec3::new(fraction * z * ca, fraction * z * sa, 0.0),
                    Vec3::new(fraction * dz * ca, fraction * dz * sa, 0.0),
                )
            }
            CableRoute::Helix {
                fraction,
                angular_rate,
                phase,
            } => {
                let th = angular_rate * s + phase;
                let (st, ct) = th.sin_cos();
                (
                    Vec3::new(fraction * z * ct, -fraction * z * st, 0.0),
                    Vec3::new(
                        fraction * (dz * ct - z * angular_rate * st),
                        -fraction * (dz * st + z * angular_rate * ct),
                        0.0,
                    ),
                )
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CableActuator {
    pub name: String,
    pub route: CableRoute,
    /// Active span `[x, y]` in metres.
    pub span: (f64, f64),
    /// Tension in newtons.
    pub activation: Activation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransversalActuator {
    pub name: String,
    pub span: (f64, f64),
    /// Contraction pressure in pascals.
    pub activation: Activation,
}

pub fn in_span(span: (f64, f64), s: f64) -> bool {
    s >= span.0 && s <= span.1
}

/// Unit tangent of the cable route in the local frame, `F_c d₀′ / ‖F_c d₀′‖`.
pub fn cable_tangent(d: &Vec3, d_prime: &Vec3, xi: &Twist, rho: f64, rho_prime: f64, s: f64) -> Result<Vec3> {
    let k = xi.angular();
    let n = xi.linear();
    let (y1, y2) = (d.x, d.y);
    let a = n.x + y1 * rho_prime - y2 * rho * k.z;
    let b = n.y + y1 * rho * k.z + y2 * rho_prime;
    let c = n.z - y1 * rho * k.y + y2 * rho * k.x;
    let fc = Mat3::new(rho, 0.0, a, 0.0, rho, b, 0.0, 0.0, c);
    let v = fc * Vec3::new(d_prime.x, d_prime.y, 1.0);
    let norm = v.norm();
    if !(norm > 0.0) {
        return Err(Error::DegenerateRoute { s });
    }
    Ok(v / norm)
}

/// Local-frame wrench `T·(ρ d̃ t; t)` exerted by a cable with tension `T`.
pub fn cable_wrench(
    d: &Vec3,
    d_prime: &Vec3,
    xi: &Twist,
    rho: f64,
    rho_prime: f64,
    tension: f64,
    s: f64,
) -> Result<Vec6> {
    let t = cable_tangent(d, d_prime, xi, rho, rho_prime, s)?;
    let m = hat3(d) * t * rho;
    Ok(Vec6::new(m.x, m.y, m.z, t.x, t.y, t.z) * tension)
}

/// Lateral traction magnitude `2πz²f₀` of a uniform contraction pressure `f₀`.
pub fn transversal_scalar(profile: &SectionProfile, s: f64, pressure: f64) -> f64 {
    2.0 * PI * profile.radius(s).powi(2) * pressure
}

/// Surrounding fluid and gravity.
#[derive(Clone, Debug, PartialEq)]
pub struct Environment {
    /// Fluid density (kg/m³); zero disables every hydrodynamic term.
    pub fluid_density: f64,
    pub added_mass: (f64, f64),
    pub lift: f64,
    pub drag: f64,
    /// Inertial-frame gravitational acceleration.
    pub gravity: Vec3,
}

impl Default for Environment {
    fn default() -> Self {
        Environment {
            fluid_density: 0.0,
            added_mass: (0.0, 0.0),
            lift: 0.0,
            drag: 0.0,
            gravity: Vec3::new(-9.81, 0.0, 0.0),
        }
    }
}

impl Environment {
    pub fn vacuum_without_gravity() -> Self {
        Environment {
            gravity: Vec3::zeros(),
            ..Environment::default()
        }
    }

    /// Drag/lift force per unit length on a section of radius `z` moving with
    /// local linear velocity `u`.
    pub fn drag_force(&self, z: f64, u: &Vec3) -> Vec3 {
        let d = Mat3::new(
            self.drag, -self.lift, 0.0, self.lift, self.drag, 0.0, 0.0, 0.0, 0.0,
        );
        -(d * u) * (z * self.fluid_density * u.norm())
    }
}

/// Distributed external wrench (local frame): gravity and buoyancy on the
/// deformed area `πρ²z²` plus drag and lift.
pub fn environment_wrench(
    env: &Environment,
    body_density: f64,
    profile: &SectionProfile,
    pose: &Pose,
    velocity: &Vec6,
    rho: f64,
    s: f64,
) -> Vec6 {
    let z = profile.radius(s);
    let area = PI * rho * rho * z * z;
    let weight = pose.rotation.transpose() * env.gravity * ((body_density - env.fluid_density) * area);
    let u = Vec3::new(velocity[3], velocity[4], velocity[5]);
    let f = weight + env.drag_force(z, &u);
    Vec6::new(0.0, 0.0, 0.0, f.x, f.y, f.z)
}

/// Added-mass contribution to the sectional inertia, `blockdiag(0, πz²ρ_a diag(B₁, B₂, 0))`.
pub fn added_mass_matrix(env: &Environment, profile: &SectionProfile, s: f64) -> Mat6 {
    let k = PI * profile.radius(s).powi(2) * env.fluid_density;
    Mat6::from_diagonal(&Vec6::new(
        0.0,
        0.0,
        0.0,
        k * env.added_mass.0,
        k * env.added_mass.1,
        0.0,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LoadFrame {
    /// Fixed direction in the inertial frame.
    Global,
    /// Rotates with the cross-section.
    Follower,
}

/// Concentrated force and moment at arclength `s`.
#[derive(Clone, Debug, PartialEq)]
pub struct PointLoad {
    pub s: f64,
    pub force: Vec3,
    pub moment: Vec3,
    pub frame: LoadFrame,
}

impl PointLoad {
    /// Wrench expressed in the local frame of the section with pose `pose`.
    pub fn local_wrench(&self, pose: &Pose) -> Vec6 {
        let (f, m) = match self.frame {
            LoadFrame::Follower => (self.force, self.moment),
            LoadFrame::Global => {
                let rt = pose.rotation.transpose();
                (rt * self.force, rt * self.moment)
            }
        };
        Vec6::new(m.x, m.y, m.z, f.x, f.y, f.z)
    }
}
