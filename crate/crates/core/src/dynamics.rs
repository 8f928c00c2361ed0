//! Generalized equations of motion, statics and rod diagnostics.
//!
//! Two coupled second-order systems are assembled by Gauss–Legendre summation
//! along the rod:
//!
//! ```text
//! M_ξ q̈_ξ + (C + D_ξ) q̇_ξ + K_ξ q_ξ + K̄_ξ q_ρ = B_ξ u + F_ξ
//! M_ρ q̈_ρ + D_ρ q̇_ρ + K_ρ(t) q_ρ + K̄_ρ q_ξ = B_ρ f + F_ρ
//! ```
//!
//! Actuation enters through `B` matrices whose columns are the generalized
//! loads of each actuator at unit amplitude, so `u` and `f` hold the
//! (non-negative) actuator amplitudes at time `t`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, RowDVector};

use crate::basis::{QuadratureRule, RhoBasis, XiBasis};
use crate::error::{Error, Result};
use crate::integrator::{IntegratorOptions, IntegratorStats, OdeSystem, Sdirk4};
use crate::kinematics::{FrameField, InflationSample, KinematicModel};
use crate::liegroup::{adjoint_se3, coadjoint_se3, mul_6xn, Mat6, Mat6xN, Twist, Vec3, Vec6};
use crate::loads::{
    added_mass_matrix, cable_wrench, environment_wrench, in_span, transversal_scalar, CableActuator, Environment,
    PointLoad, TransversalActuator,
};
use crate::material::{
    constitutive_matrices, strain_energy_density, strain_energy_density_classic, ConstitutiveLaw, MaterialParams,
    SectionProfile, SectionProperties,
};

/// Velocity-product operator used in the Coriolis term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CoriolisForm {
    /// `Jᵀ(M̄J̇ + M̄̇J + ad*_β M̄J)`, consistent with the rigid-body momentum balance.
    #[default]
    Coadjoint,
    /// Same with a plain `ad_β`; kept for comparison only.
    Adjoint,
}

/// Physical description of a rod and everything acting on it.
#[derive(Clone, Debug, PartialEq)]
pub struct RodSpec {
    pub material: MaterialParams,
    pub profile: SectionProfile,
    pub law: ConstitutiveLaw,
    pub environment: Environment,
    pub cables: Vec<CableActuator>,
    pub transversals: Vec<TransversalActuator>,
    pub point_loads: Vec<PointLoad>,
    pub coriolis: CoriolisForm,
}

impl RodSpec {
    /// Extended law, no actuators, no loads, no fluid, gravity off.
    pub fn new(material: MaterialParams, profile: SectionProfile) -> Self {
        RodSpec {
            material,
            profile,
            law: ConstitutiveLaw::Extended,
            environment: Environment::vacuum_without_gravity(),
            cables: Vec::new(),
            transversals: Vec::new(),
            point_loads: Vec::new(),
            coriolis: CoriolisForm::Coadjoint,
        }
    }
}

/// Generalized coordinates and velocities.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub q_xi: DVector<f64>,
    pub q_rho: DVector<f64>,
    pub qd_xi: DVector<f64>,
    pub qd_rho: DVector<f64>,
}

impl State {
    pub fn zeros(n_xi: usize, n_rho: usize) -> Self {
        State {
            q_xi: DVector::zeros(n_xi),
            q_rho: DVector::zeros(n_rho),
            qd_xi: DVector::zeros(n_xi),
            qd_rho: DVector::zeros(n_rho),
        }
    }

    /// At rest with the given configuration.
    pub fn at_rest(q_xi: DVector<f64>, q_rho: DVector<f64>) -> Self {
        let (n, m) = (q_xi.len(), q_rho.len());
        State {
            q_xi,
            q_rho,
            qd_xi: DVector::zeros(n),
            qd_rho: DVector::zeros(m),
        }
    }

    /// `(q_ξ, q_ρ, q̇_ξ, q̇_ρ)` stacked.
    pub fn to_vector(&self) -> DVector<f64> {
        let parts = [&self.q_xi, &self.q_rho, &self.qd_xi, &self.qd_rho];
        DVector::from_iterator(
            parts.iter().map(|p| p.len()).sum(),
            parts.iter().flat_map(|p| p.iter().copied()),
        )
    }

    pub fn from_vector(n_xi: usize, n_rho: usize, y: &DVector<f64>) -> Self {
        let n = n_xi + n_rho;
        State {
            q_xi: y.rows(0, n_xi).into_owned(),
            q_rho: y.rows(n_xi, n_rho).into_owned(),
            qd_xi: y.rows(n, n_xi).into_owned(),
            qd_rho: y.rows(n + n_xi, n_rho).into_owned(),
        }
    }
}

/// All matrices of the generalized equations at one state and time.
#[derive(Clone, Debug)]
pub struct AssembledSystem {
    pub t: f64,
    pub m_xi: DMatrix<f64>,
    /// Velocity-product matrix `C`. Only built by [`Model::assemble`].
    pub c: Option<DMatrix<f64>>,
    /// `C q̇_ξ`.
    pub coriolis_force: DVector<f64>,
    pub d_xi: DMatrix<f64>,
    pub k_xi: DMatrix<f64>,
    pub k_bar_xi: DMatrix<f64>,
    pub b_xi: DMatrix<f64>,
    pub u: DVector<f64>,
    pub f_xi: DVector<f64>,
    pub m_rho: DMatrix<f64>,
    pub d_rho: DMatrix<f64>,
    pub k_rho: DMatrix<f64>,
    pub k_bar_rho: DMatrix<f64>,
    pub b_rho: DMatrix<f64>,
    pub f0: DVector<f64>,
    pub f_rho: DVector<f64>,
}

impl AssembledSystem {
    /// `K_ξ q_ξ + K̄_ξ q_ρ − B_ξ u − F_ξ` and `K_ρ q_ρ + K̄_ρ q_ξ − B_ρ f − F_ρ`.
    pub fn static_residual(&self, state: &State) -> (DVector<f64>, DVector<f64>) {
        (
            &self.k_xi * &state.q_xi + &self.k_bar_xi * &state.q_rho - &self.b_xi * &self.u - &self.f_xi,
            &self.k_rho * &state.q_rho + &self.k_bar_rho * &state.q_xi - &self.b_rho * &self.f0 - &self.f_rho,
        )
    }
}

fn solve_spd(m: &DMatrix<f64>, rhs: DVector<f64>, t: f64, state: &State) -> Result<DVector<f64>> {
    if m.nrows() == 0 {
        return Ok(rhs);
    }
    match m.clone().cholesky() {
        Some(ch) => Ok(ch.solve(&rhs)),
        None => Err(Error::SingularMass {
            t,
            state: state.to_vector().iter().copied().collect(),
        }),
    }
}

/// Generalized accelerations `(q̈_ξ, q̈_ρ)`.
pub fn dynamics_rhs(sys: &AssembledSystem, state: &State) -> Result<(DVector<f64>, DVector<f64>)> {
    let force_xi = &sys.b_xi * &sys.u + &sys.f_xi
        - &sys.coriolis_force
        - &sys.d_xi * &state.qd_xi
        - &sys.k_xi * &state.q_xi
        - &sys.k_bar_xi * &state.q_rho;
    let force_rho = &sys.b_rho * &sys.f0 + &sys.f_rho
        - &sys.d_rho * &state.qd_rho
        - &sys.k_rho * &state.q_rho
        - &sys.k_bar_rho * &state.q_xi;
    Ok((
        solve_spd(&sys.m_xi, force_xi, sys.t, state)?,
        solve_spd(&sys.m_rho, force_rho, sys.t, state)?,
    ))
}

/// Bend point: interior maximum of the curvature magnitude.
#[derive(Clone, Debug, PartialEq)]
pub struct BendPoint {
    pub s: f64,
    pub curvature: f64,
    pub position: Vec3,
    pub speed: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostics {
    pub length: f64,
    pub delta_volume: f64,
    pub bend: Option<BendPoint>,
    pub tip_position: Vec3,
    pub elastic_energy: f64,
    pub kinetic_energy: f64,
}

/// One centerline sample at a kinematic node.
#[derive(Clone, Debug, PartialEq)]
pub struct CenterlineSample {
    pub s: f64,
    pub position: Vec3,
    pub rho: f64,
    pub strain: Twist,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StaticSolution {
    pub q_xi: DVector<f64>,
    pub q_rho: DVector<f64>,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
}

#[derive(Clone, Debug)]
struct PointData {
    s: f64,
    weight: f64,
    node: usize,
    props: SectionProperties,
    phi_xi: Mat6xN,
    phi_rho: RowDVector<f64>,
}

/// Number of samples used to locate the bend point.
const BEND_SCAN_SAMPLES: usize = 401;

/// A discretized rod: spec, bases, quadrature and the state-independent matrices.
#[derive(Clone, Debug)]
pub struct Model {
    pub spec: RodSpec,
    pub kinematics: KinematicModel,
    pub rule: QuadratureRule,
    points: Vec<PointData>,
    load_nodes: Vec<usize>,
    k_xi: DMatrix<f64>,
    d_xi: DMatrix<f64>,
    k_bar_xi: DMatrix<f64>,
    m_rho: DMatrix<f64>,
    d_rho: DMatrix<f64>,
    k_rho: DMatrix<f64>,
    scan: Vec<(f64, Mat6xN)>,
}

fn rank_one(a: &RowDVector<f64>, b: &RowDVector<f64>) -> DMatrix<f64> {
    a.transpose() * b
}

impl Model {
    pub fn new(spec: RodSpec, xi: XiBasis, rho: RhoBasis, rule: QuadratureRule) -> Result<Self> {
        spec.material.validate()?;
        spec.profile.validate()?;
        let length = spec.profile.length;
        for (what, l) in [("strain basis", xi.length), ("inflation basis", rho.length), ("quadrature", rule.length)] {
            if (l - length).abs() > 1e-12 * length {
                return Err(Error::InvalidParameter(format!(
                    "{what} length {l} differs from rod length {length}"
                )));
            }
        }
        if xi.dim() == 0 {
            return Err(Error::InvalidParameter("strain basis has no components".into()));
        }
        if spec.law == ConstitutiveLaw::Classic && rho.dim() > 0 {
            return Err(Error::InvalidParameter(
                "the classic law keeps cross-sections rigid; use an empty inflation basis".into(),
            ));
        }
        let spans = spec
            .cables
            .iter()
            .map(|c| (c.name.as_str(), c.span))
            .chain(spec.transversals.iter().map(|c| (c.name.as_str(), c.span)));
        for (name, (a, b)) in spans {
            if !(0.0 <= a && a <= b && b <= length) {
                return Err(Error::InvalidParameter(format!(
                    "actuator {name}: span [{a}, {b}] is not inside [0, {length}]"
                )));
            }
        }
        for load in &spec.point_loads {
            if !(0.0..=length).contains(&load.s) {
                return Err(Error::Domain { s: load.s, length });
            }
        }

        let kinematics = KinematicModel::new(xi, rho, &rule);
        let (n_xi, n_rho) = (kinematics.n_xi(), kinematics.n_rho());
        let mat = &spec.material;
        let mu = mat.shear_modulus();
        let lambda = mat.lame_lambda();
        let eta = mat.viscosity;

        let mut k_xi = DMatrix::zeros(n_xi, n_xi);
        let mut d_xi = DMatrix::zeros(n_xi, n_xi);
        let mut k_bar_xi = DMatrix::zeros(n_xi, n_rho);
        let mut m_rho = DMatrix::zeros(n_rho, n_rho);
        let mut d_rho = DMatrix::zeros(n_rho, n_rho);
        let mut k_rho = DMatrix::zeros(n_rho, n_rho);
        let mut points = Vec::with_capacity(rule.len());
        for (k, (&s, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            let node = rule.point_node[k];
            let props = spec.profile.properties(s);
            let cm = constitutive_matrices(mat, &props, spec.law);
            let phi = kinematics.station_basis(node).clone();
            let (phi_rho, dphi_rho) = kinematics.station_rho_basis(node).clone();
            let phi_t = phi.transpose();
            k_xi += &phi_t * (cm.stiffness * &phi) * w;
            d_xi += &phi_t * (cm.damping * &phi) * w;
            if n_rho > 0 {
                let coupling_row = cm.coupling.transpose() * &phi;
                k_bar_xi += coupling_row.transpose() * &phi_rho * w;
                let mass = rank_one(&phi_rho, &phi_rho);
                let slope = rank_one(&dphi_rho, &dphi_rho);
                let a = props.area;
                m_rho += &mass * (w * mat.density * (props.i11 + props.i22));
                k_rho += &slope * (w * mu * props.i33) + &mass * (w * 4.0 * (lambda + mu) * a);
                d_rho += &slope * (w * eta * props.i33) + &mass * (w * 4.0 * eta * a);
            }
            points.push(PointData {
                s,
                weight: w,
                node,
                props,
                phi_xi: phi,
                phi_rho,
            });
        }
        let load_nodes = spec.point_loads.iter().map(|p| rule.nearest_node(p.s)).collect();
        let scan = (0..BEND_SCAN_SAMPLES)
            .map(|i| {
                let s = length * i as f64 / (BEND_SCAN_SAMPLES - 1) as f64;
                (s, kinematics.xi.matrix(s))
            })
            .collect();
        Ok(Model {
            spec,
            kinematics,
            rule,
            points,
            load_nodes,
            k_xi,
            d_xi,
            k_bar_xi,
            m_rho,
            d_rho,
            k_rho,
            scan,
        })
    }

    pub fn n_xi(&self) -> usize {
        self.kinematics.n_xi()
    }

    pub fn n_rho(&self) -> usize {
        self.kinematics.n_rho()
    }

    pub fn length(&self) -> f64 {
        self.spec.profile.length
    }

    pub fn rest_state(&self) -> State {
        State::zeros(self.n_xi(), self.n_rho())
    }

    fn check_state(&self, state: &State) -> Result<()> {
        let checks = [
            ("strain coordinates", self.n_xi(), state.q_xi.len()),
            ("inflation coordinates", self.n_rho(), state.q_rho.len()),
            ("strain velocities", self.n_xi(), state.qd_xi.len()),
            ("inflation velocities", self.n_rho(), state.qd_rho.len()),
        ];
        for (what, expected, got) in checks {
            if expected != got {
                return Err(Error::Dimension { what, expected, got });
            }
        }
        Ok(())
    }

    fn fields(&self, state: &State, full_rates: bool) -> Result<(FrameField, Vec<InflationSample>)> {
        self.check_state(state)?;
        let frames = self.kinematics.propagate_with(&state.q_xi, Some(&state.qd_xi), full_rates);
        let inflation = self.kinematics.inflation(&state.q_rho, &state.qd_rho)?;
        Ok((frames, inflation))
    }

    /// Builds every matrix of the generalized equations at `(state, t)`.
    pub fn assemble(&self, state: &State, t: f64) -> Result<AssembledSystem> {
        self.assemble_with(state, t, true)
    }

    /// With `full == false` the matrix `C` is skipped and only `C q̇` is formed.
    fn assemble_with(&self, state: &State, t: f64, full: bool) -> Result<AssembledSystem> {
        let (frames, inflation) = self.fields(state, full)?;
        let (n_xi, n_rho) = (self.n_xi(), self.n_rho());
        let spec = &self.spec;
        let density = spec.material.density;
        let length = self.length();

        let mut m_xi = DMatrix::zeros(n_xi, n_xi);
        let mut c = full.then(|| DMatrix::zeros(n_xi, n_xi));
        let mut coriolis_force = DVector::zeros(n_xi);
        let mut f_xi = DVector::zeros(n_xi);
        let mut b_xi = DMatrix::zeros(n_xi, spec.cables.len());
        let mut b_rho = DMatrix::zeros(n_rho, spec.transversals.len());
        let mut k_rho = self.k_rho.clone();
        let mut f_rho = DVector::zeros(n_rho);

        for p in &self.points {
            let frame = &frames.samples[p.node];
            let infl = &inflation[p.node];
            let (rho, rho_dot) = (infl.rho, infl.rho_dot);
            let w = p.weight;
            let jac = &frame.jacobian;
            let beta = frame.velocity;

            // deformed section: area ∝ ρ², second moments ∝ ρ⁴
            let (r2, r4) = (rho * rho, rho.powi(4));
            let props = &p.props;
            let inertia = Vec6::new(props.i11, props.i22, props.i33, props.area, props.area, props.area);
            let scale = Vec6::new(r4, r4, r4, r2, r2, r2);
            let scale_rate = Vec6::new(
                4.0 * rho.powi(3) * rho_dot,
                4.0 * rho.powi(3) * rho_dot,
                4.0 * rho.powi(3) * rho_dot,
                2.0 * rho * rho_dot,
                2.0 * rho * rho_dot,
                2.0 * rho * rho_dot,
            );
            let m_bar = Mat6::from_diagonal(&(inertia.component_mul(&scale) * density))
                + added_mass_matrix(&spec.environment, &spec.profile, p.s);
            let m_bar_dot = Mat6::from_diagonal(&(inertia.component_mul(&scale_rate) * density));
            let velocity_product = match spec.coriolis {
                CoriolisForm::Coadjoint => coadjoint_se3(&Twist(beta)),
                CoriolisForm::Adjoint => adjoint_se3(&Twist(beta)),
            };
            let m_jac = mul_6xn(&m_bar, jac);
            m_xi.gemm_tr(w, jac, &m_jac, 1.0);
            if let Some(c) = c.as_mut() {
                let inner = mul_6xn(&m_bar, &frame.jacobian_rate)
                    + mul_6xn(&m_bar_dot, jac)
                    + mul_6xn(&velocity_product, &m_jac);
                c.gemm_tr(w, jac, &inner, 1.0);
            }
            let momentum_rate =
                m_bar * frame.acceleration_bias + m_bar_dot * beta + velocity_product * (m_bar * beta);
            coriolis_force.gemv_tr(w, jac, &momentum_rate, 1.0);

            let external = environment_wrench(&spec.environment, density, &spec.profile, &frame.pose, &beta, rho, p.s);
            f_xi.gemv_tr(w, jac, &external, 1.0);
            let x = p.s / length;
            for (a, cable) in spec.cables.iter().enumerate() {
                if !in_span(cable.span, p.s) {
                    continue;
                }
                let shape = cable.activation.shape(x, t);
                if shape == 0.0 {
                    continue;
                }
                let (d, d_prime) = cable.route.eval(&spec.profile, p.s);
                let wrench = cable_wrench(&d, &d_prime, &frame.strain, rho, infl.rho_prime, shape, p.s)?;
                // a tensioned cable loads the section against its internal wrench
                let mut target = b_xi.column_mut(a);
                target.gemv_tr(-w, &p.phi_xi, &wrench, 1.0);
            }

            if n_rho > 0 {
                let phi_rho_t = p.phi_rho.transpose();
                for (a, tm) in spec.transversals.iter().enumerate() {
                    if !in_span(tm.span, p.s) {
                        continue;
                    }
                    let shape = tm.activation.shape(x, t);
                    // contraction pushes the section inward
                    let traction = -transversal_scalar(&spec.profile, p.s, shape);
                    let mut target = b_rho.column_mut(a);
                    target += &phi_rho_t * (traction * w);
                }
                let omega = Twist(beta).angular();
                // first two diagonal entries of ω̃²
                let in_plane = -(omega.y * omega.y + omega.z * omega.z) - (omega.x * omega.x + omega.z * omega.z);
                let coef = density * (props.i11 + props.i22) * in_plane * w;
                if coef != 0.0 {
                    k_rho -= rank_one(&p.phi_rho, &p.phi_rho) * coef;
                    f_rho += &phi_rho_t * (coef * self.kinematics.rho.reference);
                }
            }
        }

        for (load, &node) in spec.point_loads.iter().zip(&self.load_nodes) {
            let frame = &frames.samples[node];
            f_xi += frame.jacobian.transpose() * load.local_wrench(&frame.pose);
        }

        let u = DVector::from_iterator(spec.cables.len(), spec.cables.iter().map(|c| c.activation.amplitude(t)));
        let f0 = DVector::from_iterator(
            spec.transversals.len(),
            spec.transversals.iter().map(|c| c.activation.amplitude(t)),
        );
        Ok(AssembledSystem {
            t,
            m_xi,
            c,
            coriolis_force,
            d_xi: self.d_xi.clone(),
            k_xi: self.k_xi.clone(),
            k_bar_xi: self.k_bar_xi.clone(),
            b_xi,
            u,
            f_xi,
            m_rho: self.m_rho.clone(),
            d_rho: self.d_rho.clone(),
            k_rho,
            k_bar_rho: self.k_bar_xi.transpose(),
            b_rho,
            f0,
            f_rho,
        })
    }

    pub fn accelerations(&self, state: &State, t: f64) -> Result<(DVector<f64>, DVector<f64>)> {
        dynamics_rhs(&self.assemble_with(state, t, false)?, state)
    }

    /// Equilibrium under the loads active at time `t`, starting from `guess`
    /// (the reference configuration if `None`).
    pub fn solve_statics(&self, t: f64, guess: Option<&State>) -> Result<StaticSolution> {
        const MAX_ITERATIONS: usize = 100;
        let (n_xi, n_rho) = (self.n_xi(), self.n_rho());
        let n = n_xi + n_rho;
        let mut q = match guess {
            Some(g) => {
                self.check_state(g)?;
                let v = g.to_vector();
                v.rows(0, n).into_owned()
            }
            None => DVector::zeros(n),
        };
        let split = |q: &DVector<f64>| State::at_rest(q.rows(0, n_xi).into_owned(), q.rows(n_xi, n_rho).into_owned());
        let mut stiffness = DMatrix::zeros(n, n);
        stiffness.view_mut((0, 0), (n_xi, n_xi)).copy_from(&self.k_xi);
        stiffness.view_mut((0, n_xi), (n_xi, n_rho)).copy_from(&self.k_bar_xi);
        stiffness.view_mut((n_xi, 0), (n_rho, n_xi)).copy_from(&self.k_bar_xi.transpose());
        stiffness.view_mut((n_xi, n_xi), (n_rho, n_rho)).copy_from(&self.k_rho);

        // generalized applied load (actuation plus external) at rest
        let load = |q: &DVector<f64>| -> Result<DVector<f64>> {
            let sys = self.assemble(&split(q), t)?;
            let a = &sys.b_xi * &sys.u + &sys.f_xi;
            let b = &sys.b_rho * &sys.f0 + &sys.f_rho;
            Ok(DVector::from_iterator(n, a.iter().chain(b.iter()).copied()))
        };

        let mut history = Vec::new();
        let mut applied = load(&q)?;
        let mut residual = &stiffness * &q - &applied;
        for iteration in 0..MAX_ITERATIONS {
            let norm = residual.norm();
            history.push(norm);
            let scale = applied.norm().max((&stiffness * &q).norm()).max(f64::MIN_POSITIVE);
            if norm <= 1e-14 * scale {
                return Ok(StaticSolution {
                    q_xi: q.rows(0, n_xi).into_owned(),
                    q_rho: q.rows(n_xi, n_rho).into_owned(),
                    iterations: iteration,
                    residual_history: history,
                });
            }
            let mut jac = stiffness.clone();
            let mut probe = q.clone();
            for j in 0..n {
                let h = 1e-7 * q[j].abs().max(1.0);
                probe[j] = q[j] + h;
                let shifted = load(&probe)?;
                probe[j] = q[j];
                let mut col = jac.column_mut(j);
                col -= (shifted - &applied) / h;
            }
            let step = jac.lu().solve(&(-&residual)).ok_or_else(|| Error::StaticsDiverged {
                iterations: iteration,
                residual_history: history.clone(),
            })?;

            let mut fraction = 1.0;
            let mut accepted = None;
            for _ in 0..=10 {
                let trial = &q + &step * fraction;
                if let Ok(trial_load) = load(&trial) {
                    let trial_residual = &stiffness * &trial - &trial_load;
                    if trial_residual.norm() < norm || fraction < 1.0 / 512.0 {
                        accepted = Some((trial, trial_load, trial_residual));
                        break;
                    }
                }
                fraction *= 0.5;
            }
            let Some((trial, trial_load, trial_residual)) = accepted else {
                return Err(Error::StaticsDiverged {
                    iterations: iteration + 1,
                    residual_history: history,
                });
            };
            let moved = (&trial - &q).norm();
            q = trial;
            applied = trial_load;
            residual = trial_residual;
            let scale = applied.norm().max((&stiffness * &q).norm()).max(f64::MIN_POSITIVE);
            if residual.norm() < 1e-9 * scale && moved < 1e-10 * q.norm().max(1.0) {
                history.push(residual.norm());
                return Ok(StaticSolution {
                    q_xi: q.rows(0, n_xi).into_owned(),
                    q_rho: q.rows(n_xi, n_rho).into_owned(),
                    iterations: iteration + 1,
                    residual_history: history,
                });
            }
        }
        Err(Error::StaticsDiverged {
            iterations: MAX_ITERATIONS,
            residual_history: history,
        })
    }

    /// Kinetic energy `½q̇ᵀMq̇` of both coordinate sets.
    pub fn kinetic_energy(&self, state: &State) -> Result<f64> {
        let sys = self.assemble_with(state, 0.0, false)?;
        Ok(0.5 * state.qd_xi.dot(&(&sys.m_xi * &state.qd_xi)) + 0.5 * state.qd_rho.dot(&(&sys.m_rho * &state.qd_rho)))
    }

    /// Stored elastic energy.
    pub fn elastic_energy(&self, state: &State) -> Result<f64> {
        self.check_state(state)?;
        let inflation = self.kinematics.inflation(&state.q_rho, &state.qd_rho)?;
        let reference = self.kinematics.xi.reference;
        let mut total = 0.0;
        for p in &self.points {
            let v = &p.phi_xi * &state.q_xi;
            let xi = Twist(Vec6::from_iterator(v.iter().copied()) + reference);
            let infl = &inflation[p.node];
            let density = match self.spec.law {
                ConstitutiveLaw::Extended => strain_energy_density(
                    &self.spec.material,
                    &self.spec.profile,
                    &xi,
                    infl.rho,
                    infl.rho_prime,
                    p.s,
                )?,
                ConstitutiveLaw::Classic => {
                    strain_energy_density_classic(&self.spec.material, &self.spec.profile, &xi, p.s)
                }
            };
            total += p.weight * density;
        }
        Ok(total)
    }

    /// Centerline positions and inflation at every kinematic node.
    pub fn centerline(&self, state: &State) -> Result<Vec<CenterlineSample>> {
        let (frames, inflation) = self.fields(state, false)?;
        Ok(frames
            .samples
            .iter()
            .zip(&inflation)
            .map(|(f, i)| CenterlineSample {
                s: f.s,
                position: f.pose.position,
                rho: i.rho,
                strain: f.strain,
            })
            .collect())
    }

    /// Arclength of the interior curvature maximum, if any.
    pub fn bend_point(&self, q_xi: &DVector<f64>) -> Option<(f64, f64)> {
        let curvature: Vec<f64> = self
            .scan
            .iter()
            .map(|(_, phi)| {
                let v = phi * q_xi;
                let k = Vec3::new(v[0], v[1], v[2]) + self.kinematics.xi.reference.fixed_rows::<3>(0);
                k.norm()
            })
            .collect();
        let peak = curvature.iter().cloned().fold(0.0, f64::max);
        if peak <= 0.0 {
            return None;
        }
        let margin = 1e-9 * peak;
        let mut best: Option<usize> = None;
        for i in 1..curvature.len() - 1 {
            let k = curvature[i];
            let strict = k > curvature[i - 1] + margin && k >= curvature[i + 1] + margin
                || k >= curvature[i - 1] + margin && k > curvature[i + 1] + margin;
            if strict && best.is_none_or(|b| k > curvature[b]) {
                best = Some(i);
            }
        }
        let i = best?;
        let h = self.scan[1].0 - self.scan[0].0;
        let (a, b, c) = (curvature[i - 1], curvature[i], curvature[i + 1]);
        let denom = a - 2.0 * b + c;
        let offset = if denom < 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
        let offset = offset.clamp(-1.0, 1.0);
        let s = self.scan[i].0 + offset * h;
        let value = b - 0.25 * (a - c) * offset;
        Some((s, value))
    }

    pub fn diagnostics(&self, state: &State) -> Result<Diagnostics> {
        let (frames, inflation) = self.fields(state, false)?;
        let mut length = 0.0;
        let mut volume = 0.0;
        let mut reference_volume = 0.0;
        for p in &self.points {
            let strain = frames.samples[p.node].strain;
            let stretch = strain.linear().norm();
            let rho = inflation[p.node].rho;
            let area = PI * p.props.radius * p.props.radius;
            length += p.weight * stretch;
            volume += p.weight * area * rho * rho * stretch;
            reference_volume += p.weight * area;
        }
        let bend = self.bend_point(&state.q_xi).map(|(s, curvature)| {
            let frame = self.kinematics.frame_at(&state.q_xi, Some(&state.qd_xi), s);
            BendPoint {
                s,
                curvature,
                position: frame.pose.position,
                speed: frame.velocity.fixed_rows::<3>(3).norm(),
            }
        });
        Ok(Diagnostics {
            length,
            delta_volume: volume / reference_volume - 1.0,
            bend,
            tip_position: frames.tip().pose.position,
            elastic_energy: self.elastic_energy(state)?,
            kinetic_energy: self.kinetic_energy(state)?,
        })
    }
}

/// First-order form of the generalized equations for the integrator.
pub struct ModelOde<'a> {
    pub model: &'a Model,
}

impl OdeSystem for ModelOde<'_> {
    fn dim(&self) -> usize {
        2 * (self.model.n_xi() + self.model.n_rho())
    }

    fn rhs(&self, t: f64, y: &DVector<f64>) -> Result<DVector<f64>> {
        let (n_xi, n_rho) = (self.model.n_xi(), self.model.n_rho());
        let state = State::from_vector(n_xi, n_rho, y);
        let (acc_xi, acc_rho) = self.model.accelerations(&state, t)?;
        let parts = [&state.qd_xi, &state.qd_rho, &acc_xi, &acc_rho];
        Ok(DVector::from_iterator(
            y.len(),
            parts.iter().flat_map(|p| p.iter().copied()),
        ))
    }
}

/// Integrates from `initial` at `t = 0` to `duration`, calling `observe` at
/// `t = 0` and at every multiple of `output_interval`.
pub fn simulate(
    model: &Model,
    initial: &State,
    duration: f64,
    output_interval: f64,
    options: IntegratorOptions,
    mut observe: impl FnMut(f64, &State) -> Result<()>,
) -> Result<IntegratorStats> {
    if !(duration > 0.0 && output_interval > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "duration ({duration}) and output interval ({output_interval}) must be positive"
        )));
    }
    model.check_state(initial)?;
    let ode = ModelOde { model };
    let mut integrator = Sdirk4::new(options);
    let (n_xi, n_rho) = (model.n_xi(), model.n_rho());
    let mut y = initial.to_vector();
    observe(0.0, initial)?;
    let steps = (duration / output_interval - 1e-9).ceil() as usize;
    let mut t = 0.0;
    for k in 1..=steps {
        let t_next = (k as f64 * output_interval).min(duration);
        y = integrator.advance(&ode, t, &y, t_next)?;
        t = t_next;
        observe(t, &State::from_vector(n_xi, n_rho, &y))?;
    }
    Ok(integrator.stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::RhoBoundary;
    use crate::loads::{Activation, CableRoute, LoadFrame};
    use approx::assert_relative_eq;

    fn silicone() -> MaterialParams {
        MaterialParams::new(1e5, 0.4999, 50.0, 1000.0).unwrap()
    }

    fn planar_model(spec: RodSpec) -> Model {
        let l = spec.profile.length;
        let mut degrees = [None; 6];
        degrees[1] = Some(3);
        degrees[5] = Some(2);
        let rho = if spec.law == ConstitutiveLaw::Extended {
            RhoBasis::new(l, 2, RhoBoundary::Neumann)
        } else {
            RhoBasis::empty(l)
        };
        Model::new(spec, XiBasis::new(l, degrees), rho, QuadratureRule::new(6, 4, l).unwrap()).unwrap()
    }

    fn spatial_model(spec: RodSpec) -> Model {
        let l = spec.profile.length;
        let degrees = [Some(2), Some(2), Some(1), Some(1), Some(1), Some(2)];
        let rho = if spec.law == ConstitutiveLaw::Extended {
            RhoBasis::new(l, 2, RhoBoundary::Neumann)
        } else {
            RhoBasis::empty(l)
        };
        Model::new(spec, XiBasis::new(l, degrees), rho, QuadratureRule::new(5, 4, l).unwrap()).unwrap()
    }

    fn random_state(model: &Model, seed: u64, scale: f64) -> State {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let mut v = |n: usize, k: f64| DVector::from_iterator(n, (0..n).map(|_| next() * k));
        State {
            q_xi: v(model.n_xi(), scale),
            q_rho: v(model.n_rho(), 0.05),
            qd_xi: v(model.n_xi(), scale),
            qd_rho: v(model.n_rho(), 0.05),
        }
    }

    #[test]
    fn unloaded_reference_is_equilibrium() {
        let mut spec = RodSpec::new(silicone(), SectionProfile::cylinder(0.5, 0.0075));
        spec.environment.gravity = Vec3::zeros();
        let model = spatial_model(spec);
        let state = model.rest_state();
        let sys = model.assemble(&state, 0.0).unwrap();
        assert_eq!(sys.f_xi.norm(), 0.0);
        let (a, b) = dynamics_rhs(&sys, &state).unwrap();
        assert_eq!(a.norm() + b.norm(), 0.0);
        let sol = model.solve_statics(0.0, None).unwrap();
        assert_eq!(sol.q_xi.norm() + sol.q_rho.norm(), 0.0);
    }

    #[test]
    fn mass_matrix_is_spd_and_coupling_symmetric() {
        let mut spec = RodSpec::new(silicone(), SectionProfile::cone(0.5, 0.015, 0.004));
        spec.environment = Environment {
            fluid_density: 1000.0,
            added_mass: (0.6, 0.6),
            lift: -0.1,
            drag: 1.1,
            gravity: Vec3::new(-9.81, 0.0, 0.0),
        };
        let model = spatial_model(spec);
        for seed in 0..50 {
            let state = random_state(&model, seed, 2.0);
            let sys = model.assemble(&state, 0.0).unwrap();
            assert!(sys.m_xi.clone().cholesky().is_some());
            assert!(sys.m_rho.clone().cholesky().is_some());
            assert!((&sys.m_xi - sys.m_xi.transpose()).norm() <= 1e-12 * sys.m_xi.norm());
            assert_eq!(sys.k_bar_xi, sys.k_bar_rho.transpose());
        }
        let sys = model.assemble(&model.rest_state(), 0.0).unwrap();
        for m in [&sys.d_xi, &sys.d_rho, &sys.m_rho] {
            let eig = m.clone().symmetric_eigen();
            assert!(eig.eigenvalues.min() > -1e-12 * m.norm());
        }
    }

    #[test]
    fn accelerations_match_dense_solve() {
        let mut spec = RodSpec::new(silicone(), SectionProfile::cylinder(0.5, 0.0075));
        spec.environment.gravity = Vec3::new(-9.81, 0.0, 0.0);
        let model = planar_model(spec);
        let mut state = random_state(&model, 7, 1.0);
        state.qd_xi.fill(0.0);
        state.qd_rho.fill(0.0);
        let sys = model.assemble(&state, 0.0).unwrap();
        let (acc, _) = dynamics_rhs(&sys, &state).unwrap();
        let rhs = &sys.f_xi - &sys.k_xi * &state.q_xi - &sys.k_bar_xi * &state.q_rho;
        let dense = sys.m_xi.clone().try_inverse().unwrap() * rhs;
        assert!((acc - &dense).norm() < 1e-9 * dense.norm());
        assert!(sys.f_xi.norm() > 0.0);
    }

    #[test]
    fn coriolis_force_matches_matrix_product() {
        for form in [CoriolisForm::Coadjoint, CoriolisForm::Adjoint] {
            let mut spec = RodSpec::new(silicone(), SectionProfile::cylinder(0.5, 0.0075));
            spec.coriolis = form;
            let model = spatial_model(spec);
            for seed in 0..5 {
                let state = random_state(&model, 20 + seed, 1.0);
                let sys = model.assemble(&state, 0.0).unwrap();
                let expected = sys.c.as_ref().unwrap() * &state.qd_xi;
                assert!((&sys.coriolis_force - &expected).norm() <= 1e-10 * expected.norm().max(1e-12));
                let (fast, _) = model.accelerations(&state, 0.0).unwrap();
                let (slow, _) = dynamics_rhs(&sys, &state).unwrap();
                assert!((&fast - &slow).norm() <= 1e-10 * slow.norm());
            }
        }
    }

    #[test]
    fn doubling_density_halves_initial_acceleration() {
        let make = |density: f64| {
            let mat = MaterialParams::new(1e5, 0.4999, 50.0, density).unwrap();
            let mut spec = RodSpec::new(mat, SectionProfile::cylinder(0.5, 0.0075));
            spec.point_loads.push(PointLoad {
                s: 0.5,
                force: Vec3::new(0.01, 0.0, -0.2),
                moment: Vec3::zeros(),
                frame: LoadFrame::Global,
            });
            planar_model(spec)
        };
        let (light, heavy) = (make(1000.0), make(2000.0));
        let state = light.rest_state();
        let (a1, b1) = light.accelerations(&state, 0.0).unwrap();
        let (a2, b2) = heavy.accelerations(&state, 0.0).unwrap();
        assert!((&a1 - a2 * 2.0).norm() < 1e-10 * a1.norm().max(1.0));
        assert!((&b1 - b2 * 2.0).norm() < 1e-10 * b1.norm().max(1.0));
    }

    #[test]
    fn coupling_blocks_match_constitutive_law() {
        let model = planar_model(RodSpec::new(silicone(), SectionProfile::cylinder(0.5, 0.0075)));
        // pure inflation ρ ≡ 1 + δ against pure stretch: energy cross term 2λA δ e L
        let mat = &model.spec.material;
        let a = PI * 0.0075f64.powi(2);
        let delta = 0.01;
        let q_rho = DVector::from_element(model.n_rho(), delta);
        let mut q_xi = DVector::zeros(model.n_xi());
        q_xi[model.kinematics.xi.offset(5)] = 0.02;
        let cross = q_xi.dot(&(&model.k_bar_xi * &q_rho));
        assert_relative_eq!(cross, 2.0 * mat.lame_lambda() * a * delta * 0.02 * 0.5, max_relative = 1e-10);
    }

    #[test]
    fn axial_stiffness_and_rigid_line() {
        let l = 0.5;
        let radius = 0.0075;
        let mat = silicone();
        let area = PI * radius * radius;
        let stiffness = mat.youngs_modulus * area / l;
        let build = |force: f64, pressure: f64| {
            let mut spec = RodSpec::new(mat.clone(), SectionProfile::cylinder(l, radius));
            spec.point_loads.push(PointLoad {
                s: l,
                force: Vec3::new(0.0, 0.0, -force),
                moment: Vec3::zeros(),
                frame: LoadFrame::Follower,
            });
            spec.transversals.push(TransversalActuator {
                name: "tm".into(),
                span: (0.0, l),
                activation: Activation::Constant(pressure / 2.0),
            });
            let mut degrees = [None; 6];
            degrees[5] = Some(2);
            Model::new(
                spec,
                XiBasis::new(l, degrees),
                RhoBasis::new(l, 1, RhoBoundary::Neumann),
                QuadratureRule::new(4, 4, l).unwrap(),
            )
            .unwrap()
        };
        for force in [0.5, 1.0, 2.0] {
            let model = build(force, 0.0);
            let sol = model.solve_statics(0.0, None).unwrap();
            let d = model.diagnostics(&State::at_rest(sol.q_xi, sol.q_rho)).unwrap();
            let shortening = l - d.length;
            assert_relative_eq!(force / shortening, stiffness, max_relative = 1e-6);
        }
        for force in [1.0, 3.0, 5.0] {
            let pressure = force / (mat.poisson * area);
            let model = build(force, pressure);
            let sol = model.solve_statics(0.0, None).unwrap();
            let d = model.diagnostics(&State::at_rest(sol.q_xi, sol.q_rho)).unwrap();
            assert!((d.length - l).abs() < 1e-10 * l, "{}", d.length - l);
        }
    }

    #[test]
    fn classic_cantilever_matches_beam_theory() {
        let l = 0.5;
        let radius = 0.0075;
        let mat = silicone();
        let force = 1e-4;
        let mut spec = RodSpec::new(mat.clone(), SectionProfile::cylinder(l, radius));
        spec.law = ConstitutiveLaw::Classic;
        spec.point_loads.push(PointLoad {
            s: l,
            force: Vec3::new(force, 0.0, 0.0),
            moment: Vec3::zeros(),
            frame: LoadFrame::Global,
        });
        let model = planar_model(spec);
        let sol = model.solve_statics(0.0, None).unwrap();
        let d = model.diagnostics(&State::at_rest(sol.q_xi, sol.q_rho)).unwrap();
        let i = PI * radius.powi(4) / 4.0;
        let expected = force * l.powi(3) / (3.0 * mat.youngs_modulus * i);
        assert_relative_eq!(d.tip_position.x, expected, max_relative = 0.05);
    }

    #[test]
    fn statics_is_a_fixed_point_of_dynamics() {
        let l = 0.5;
        let mut spec = RodSpec::new(silicone(), SectionProfile::cone(l, 0.015, 0.004));
        spec.cables.push(CableActuator {
            name: "lm".into(),
            route: CableRoute::Radial {
                fraction: 0.8,
                angle: 0.0,
            },
            span: (0.0, l),
            activation: Activation::Constant(0.5),
        });
        spec.transversals.push(TransversalActuator {
            name: "tm".into(),
            span: (0.0, 0.3),
            activation: Activation::Constant(2000.0),
        });
        let model = planar_model(spec);
        let sol = model.solve_statics(0.0, None).unwrap();
        let state = State::at_rest(sol.q_xi.clone(), sol.q_rho.clone());
        let (a, b) = model.accelerations(&state, 0.0).unwrap();
        assert!(a.norm() < 1e-6 && b.norm() < 1e-6, "{} {}", a.norm(), b.norm());
        assert!(sol.q_xi.norm() > 0.1);
    }

    #[test]
    fn volume_change_examples() {
        let model = planar_model(RodSpec::new(silicone(), SectionProfile::cone(0.5, 0.015, 0.004)));
        let d = model.diagnostics(&model.rest_state()).unwrap();
        assert_relative_eq!(d.length, 0.5, epsilon = 1e-14);
        assert!(d.delta_volume.abs() < 1e-14);
        assert!(d.bend.is_none());
        let mut q = DVector::zeros(model.n_xi());
        q[model.kinematics.xi.offset(5)] = 0.1;
        let d = model.diagnostics(&State::at_rest(q, DVector::zeros(model.n_rho()))).unwrap();
        assert_relative_eq!(d.delta_volume, 0.1, epsilon = 1e-12);
        assert_relative_eq!(d.length, 0.55, epsilon = 1e-12);
    }

    #[test]
    fn bend_point_is_located() {
        let model = planar_model(RodSpec::new(silicone(), SectionProfile::cylinder(0.5, 0.0075)));
        let off = model.kinematics.xi.offset(1);
        // constant curvature: no interior maximum
        let mut q = DVector::zeros(model.n_xi());
        q[off] = 2.0;
        assert!(model.bend_point(&q).is_none());
        // κ₂ = 3 − 2x² peaks at the midpoint (x = 2s/L − 1); P₂ = (3x² − 1)/2
        q[off] = 3.0 - 2.0 / 3.0;
        q[off + 2] = -4.0 / 3.0;
        let (s, k) = model.bend_point(&q).unwrap();
        assert_relative_eq!(s, 0.25, epsilon = 1e-9);
        assert_relative_eq!(k, 3.0, epsilon = 1e-9);
    }

    #[test]
    fn spinning_rod_inflation_load_scales_with_rate_squared() {
        let mut degrees = [None; 6];
        degrees[2] = Some(0);
        degrees[5] = Some(0);
        let l = 0.5;
        let model = Model::new(
            RodSpec::new(silicone(), SectionProfile::cylinder(l, 0.0075)),
            XiBasis::new(l, degrees),
            RhoBasis::new(l, 2, RhoBoundary::Neumann),
            QuadratureRule::new(4, 3, l).unwrap(),
        )
        .unwrap();
        // twist rate: every section spins about e₃ at a rate growing with s
        let load_at = |rate: f64| {
            let mut state = model.rest_state();
            state.qd_xi[0] = rate;
            model.assemble(&state, 0.0).unwrap().f_rho
        };
        let (f1, f2) = (load_at(1.0), load_at(2.0));
        assert!(f1.norm() > 0.0);
        assert!((f2 - &f1 * 4.0).norm() < 1e-12 * f1.norm());
    }

    #[test]
    fn rest_state_stays_put() {
        let model = planar_model(RodSpec::new(silicone(), SectionProfile::cylinder(0.5, 0.0075)));
        let mut last = None;
        simulate(&model, &model.rest_state(), 1.0, 0.5, IntegratorOptions::default(), |_, s| {
            last = Some(s.clone());
            Ok(())
        })
        .unwrap();
        assert!(last.unwrap().to_vector().amax() < 1e-10);
    }
}
