//! Forward kinematics along the rod: poses, geometric Jacobian and its time
//! derivative, velocity twists and the inflation field.
//!
//! Propagation marches from the clamped base through a sorted list of
//! stations. Each step uses the two-point Magnus expansion of the strain and
//! of the basis, so poses, Jacobians and Jacobian rates are all consistent
//! with one another to round-off.

use nalgebra::{DVector, RowDVector};

use crate::basis::{QuadratureRule, RhoBasis, XiBasis};
use crate::error::Result;
use crate::liegroup::{
    adjoint_se3, exp_se3, mul_6xn, tangent_operator, tangent_operator_rate, tangent_operator_rate_apply,
    zannah_magnus, zannah_nodes,
    Mat6xN, Pose, Twist, Vec6,
};
use crate::material::check_inflation;

/// Kinematic state at one station.
#[derive(Clone, Debug)]
pub struct FrameSample {
    pub s: f64,
    pub pose: Pose,
    /// 6×n_ξ body-frame Jacobian.
    pub jacobian: Mat6xN,
    /// Time derivative of `jacobian` along the current `q̇_ξ`. Has zero
    /// columns when only the bias was requested.
    pub jacobian_rate: Mat6xN,
    /// `J̇ q̇_ξ`, the velocity-dependent part of the acceleration twist.
    pub acceleration_bias: Vec6,
    /// Body velocity twist `J q̇_ξ`.
    pub velocity: Vec6,
    /// Strain twist at the station.
    pub strain: Twist,
}

/// Frames at every station of a [`KinematicModel`].
#[derive(Clone, Debug)]
pub struct FrameField {
    pub samples: Vec<FrameSample>,
}

impl FrameField {
    pub fn tip(&self) -> &FrameSample {
        self.samples.last().expect("frame field is never empty")
    }
}

/// Inflation ratio data at one station.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InflationSample {
    pub rho: f64,
    pub rho_prime: f64,
    pub rho_dot: f64,
    pub rho_prime_dot: f64,
}

#[derive(Clone, Debug)]
struct Step {
    h: f64,
    /// Basis at the two collocation points.
    phi: [Mat6xN; 2],
}

/// Bases plus precomputed basis evaluations on a fixed set of stations.
#[derive(Clone, Debug)]
pub struct KinematicModel {
    pub xi: XiBasis,
    pub rho: RhoBasis,
    pub stations: Vec<f64>,
    steps: Vec<Step>,
    station_phi: Vec<Mat6xN>,
    station_rho: Vec<(RowDVector<f64>, RowDVector<f64>)>,
}

impl KinematicModel {
    /// Stations are the kinematic nodes of `rule` (quadrature points plus interval ends).
    pub fn new(xi: XiBasis, rho: RhoBasis, rule: &QuadratureRule) -> Self {
        Self::with_stations(xi, rho, rule.nodes.clone())
    }

    /// Stations must start at 0 and be strictly increasing.
    pub fn with_stations(xi: XiBasis, rho: RhoBasis, stations: Vec<f64>) -> Self {
        assert!(!stations.is_empty() && stations[0] == 0.0);
        let [c1, c2] = zannah_nodes();
        let steps = stations
            .windows(2)
            .map(|w| {
                let h = w[1] - w[0];
                Step {
                    h,
                    phi: [xi.matrix(w[0] + c1 * h), xi.matrix(w[0] + c2 * h)],
                }
            })
            .collect();
        let station_phi = stations.iter().map(|&s| xi.matrix(s)).collect();
        let station_rho = stations.iter().map(|&s| rho.rows(s)).collect();
        KinematicModel {
            xi,
            rho,
            stations,
            steps,
            station_phi,
            station_rho,
        }
    }

    pub fn n_xi(&self) -> usize {
        self.xi.dim()
    }

    pub fn n_rho(&self) -> usize {
        self.rho.dim()
    }

    /// Basis matrix `Φ_ξ` at station `j`.
    pub fn station_basis(&self, j: usize) -> &Mat6xN {
        &self.station_phi[j]
    }

    /// `(Φ_ρ, Φ_ρ′)` at station `j`.
    pub fn station_rho_basis(&self, j: usize) -> &(RowDVector<f64>, RowDVector<f64>) {
        &self.station_rho[j]
    }

    fn twist(&self, phi: &Mat6xN, q: &DVector<f64>) -> Vec6 {
        let v = phi * q;
        Vec6::from_iterator(v.iter().copied())
    }

    /// Marches poses, Jacobians and (if `q_dot` is given) Jacobian rates and
    /// velocities from the base to every station.
    pub fn propagate(&self, q: &DVector<f64>, q_dot: Option<&DVector<f64>>) -> FrameField {
        self.propagate_with(q, q_dot, true)
    }

    /// Like [`propagate`](Self::propagate), but with `full_rates == false`
    /// only the bias `J̇ q̇` is carried, which is much cheaper than `J̇`.
    pub fn propagate_with(
        &self,
        q: &DVector<f64>,
        q_dot: Option<&DVector<f64>>,
        full_rates: bool,
    ) -> FrameField {
        let n = self.n_xi();
        let reference = self.xi.reference;
        let magnus_weight = 3f64.sqrt() / 12.0;
        let zero_rate = DVector::zeros(n);
        let qd = q_dot.unwrap_or(&zero_rate);

        let mut pose = Pose::identity();
        let mut jac = Mat6xN::zeros(n);
        let mut jac_rate = Mat6xN::zeros(if full_rates { n } else { 0 });
        let mut bias = Vec6::zeros();
        let mut samples = Vec::with_capacity(self.stations.len());
        let push = |samples: &mut Vec<FrameSample>,
                    j: usize,
                    pose: Pose,
                    jac: &Mat6xN,
                    jac_rate: &Mat6xN,
                    bias: Vec6| {
            let strain = Twist(self.twist(&self.station_phi[j], q) + reference);
            let v = jac * qd;
            samples.push(FrameSample {
                s: self.stations[j],
                pose,
                jacobian: jac.clone(),
                jacobian_rate: jac_rate.clone(),
                acceleration_bias: bias,
                velocity: Vec6::from_iterator(v.iter().copied()),
                strain,
            });
        };
        push(&mut samples, 0, pose, &jac, &jac_rate, bias);

        for (j, step) in self.steps.iter().enumerate() {
            let h = step.h;
            let xi1 = Twist(self.twist(&step.phi[0], q) + reference);
            let xi2 = Twist(self.twist(&step.phi[1], q) + reference);
            let omega = zannah_magnus(&xi1, &xi2, h);
            let w = magnus_weight * h * h;
            let ad1 = adjoint_se3(&xi1);
            let ad2 = adjoint_se3(&xi2);
            let step_pose = exp_se3(&omega);
            let back = step_pose.adjoint_inv();
            let tangent = tangent_operator(&omega);
            // derivative of the Magnus term with respect to q, and the
            // Jacobian update J ← Ad⁻¹(J + T Φ_Ω), column by column
            let mut phi_omega = Mat6xN::zeros(n);
            for c in 0..n {
                let p1 = step.phi[0].fixed_view::<6, 1>(0, c);
                let p2 = step.phi[1].fixed_view::<6, 1>(0, c);
                let col = (p1 + p2) * (0.5 * h) + (ad1 * p2 - ad2 * p1) * w;
                let updated = back * (jac.fixed_view::<6, 1>(0, c) + tangent * col);
                phi_omega.set_column(c, &col);
                jac.set_column(c, &updated);
            }
            let jac_next = &jac;

            if q_dot.is_some() {
                let xi1_dot = Twist(self.twist(&step.phi[0], qd));
                let xi2_dot = Twist(self.twist(&step.phi[1], qd));
                let od = &phi_omega * qd;
                let omega_dot = Twist(Vec6::from_iterator(od.iter().copied()));
                let tangent_omega_dot = tangent * omega_dot.0;
                let gamma = Twist(back * tangent_omega_dot);
                let ad_gamma = adjoint_se3(&gamma);
                let v_next = jac_next * qd;
                let v_next = Vec6::from_iterator(v_next.iter().copied());
                let commutator = adjoint_se3(&xi1_dot) * xi2_dot.0 * (2.0 * w);
                bias = -ad_gamma * v_next
                    + back
                        * (bias
                            + tangent_operator_rate_apply(&omega, &omega_dot, &omega_dot.0)
                            + tangent * commutator);
                if full_rates {
                    let phi_omega_dot = (adjoint_se3(&xi1_dot) * &step.phi[1]
                        - adjoint_se3(&xi2_dot) * &step.phi[0])
                        * w;
                    let tangent_dot = tangent_operator_rate(&omega, &omega_dot);
                    jac_rate = -mul_6xn(&ad_gamma, jac_next)
                        + mul_6xn(
                            &back,
                            &(&jac_rate + mul_6xn(&tangent_dot, &phi_omega) + mul_6xn(&tangent, &phi_omega_dot)),
                        );
                }
            }

            pose = pose.compose(&step_pose);
            if pose.orthonormality_error() > 1e-12 {
                pose = pose.orthonormalized();
            }
            push(&mut samples, j + 1, pose, &jac, &jac_rate, bias);
        }
        FrameField { samples }
    }

    /// Inflation ratio, slope and rates at every station.
    pub fn inflation(
        &self,
        q_rho: &DVector<f64>,
        q_rho_dot: &DVector<f64>,
    ) -> Result<Vec<InflationSample>> {
        let reference = self.rho.reference;
        self.station_rho
            .iter()
            .zip(&self.stations)
            .map(|((phi, dphi), &s)| {
                let sample = if phi.is_empty() {
                    InflationSample {
                        rho: reference,
                        rho_prime: 0.0,
                        rho_dot: 0.0,
                        rho_prime_dot: 0.0,
                    }
                } else {
                    InflationSample {
                        rho: phi.dot(&q_rho.transpose()) + reference,
                        rho_prime: dphi.dot(&q_rho.transpose()),
                        rho_dot: phi.dot(&q_rho_dot.transpose()),
                        rho_prime_dot: dphi.dot(&q_rho_dot.transpose()),
                    }
                };
                check_inflation(sample.rho, s)?;
                Ok(sample)
            })
            .collect()
    }

    /// Frame at an arbitrary arclength, by marching a fresh station list that
    /// reuses the model's stations below `s`.
    pub fn frame_at(&self, q: &DVector<f64>, q_dot: Option<&DVector<f64>>, s: f64) -> FrameSample {
        let mut stations: Vec<f64> = self.stations.iter().copied().take_while(|&x| x < s).collect();
        if stations.is_empty() {
            stations.push(0.0);
        }
        if s > *stations.last().unwrap() {
            stations.push(s);
        }
        let model = KinematicModel::with_stations(self.xi.clone(), self.rho.clone(), stations);
        model.propagate(q, q_dot).samples.pop().unwrap()
    }
}

/// Poses at every kinematic node of `rule`.
pub fn propagate_poses(basis: &XiBasis, q: &DVector<f64>, rule: &QuadratureRule) -> Vec<Pose> {
    let model = KinematicModel::new(basis.clone(), RhoBasis::empty(basis.length), rule);
    model.propagate(q, None).samples.into_iter().map(|f| f.pose).collect()
}

/// Jacobians at every kinematic node of `rule`.
pub fn propagate_jacobian(
    basis: &XiBasis,
    q: &DVector<f64>,
    rule: &QuadratureRule,
) -> Vec<Mat6xN> {
    let model = KinematicModel::new(basis.clone(), RhoBasis::empty(basis.length), rule);
    model
        .propagate(q, None)
        .samples
        .into_iter()
        .map(|f| f.jacobian)
        .collect()
}

/// Velocity twists `J q̇` and accelerations `J q̈ + J̇ q̇` at every kinematic node.
pub fn propagate_velocity_acceleration(
    basis: &XiBasis,
    q: &DVector<f64>,
    q_dot: &DVector<f64>,
    q_ddot: &DVector<f64>,
    rule: &QuadratureRule,
) -> (Vec<Vec6>, Vec<Vec6>) {
    let model = KinematicModel::new(basis.clone(), RhoBasis::empty(basis.length), rule);
    let field = model.propagate(q, Some(q_dot));
    let vel = field.samples.iter().map(|f| f.velocity).collect();
    let acc = field
        .samples
        .iter()
        .map(|f| {
            let a = &f.jacobian * q_ddot + &f.jacobian_rate * q_dot;
            Vec6::from_iterator(a.iter().copied())
        })
        .collect();
    (vel, acc)
}

/// `(ρ, ρ′, ρ̇)` at every quadrature point of `rule`.
pub fn inflation_field(
    basis: &RhoBasis,
    q: &DVector<f64>,
    q_dot: &DVector<f64>,
    rule: &QuadratureRule,
) -> Result<Vec<(f64, f64, f64)>> {
    rule.points
        .iter()
        .map(|&s| {
            let (rho, rho_prime) = basis.eval_inflation(q, s)?;
            let rho_dot = basis.eval_inflation_rate(q_dot, s)?;
            check_inflation(rho, s)?;
            Ok((rho, rho_prime, rho_dot))
        })
        .collect()
}
