//! SO(3)/SE(3) kernel: hat maps, adjoint algebra, the exponential and its
//! tangent operator, and the two-point fourth-order Magnus step.
//!
//! Twists are stacked `(angular, linear)` everywhere: a strain twist is
//! `ξ = (κ, ν)` and a velocity twist is `β = (ω, u)`. All 6×6 operators use
//! that block layout.

use nalgebra::{Matrix3, Matrix4, Matrix6, Vector3, Vector6};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;
pub type Vec6 = Vector6<f64>;
pub type Mat6 = Matrix6<f64>;
/// 6×n matrix, e.g. a strain basis or a geometric Jacobian.
pub type Mat6xN = nalgebra::Matrix6xX<f64>;

/// Below this rotation angle the trigonometric coefficients of `exp` and of
/// the tangent operator are evaluated from their Taylor series.
pub const SMALL_ANGLE: f64 = 0.1;

/// Element of se(3) in `(angular, linear)` order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Twist(pub Vec6);

/// Magnus expansion of a strain field over one propagation interval.
pub type MagnusTerm = Twist;

impl Twist {
    pub fn new(angular: Vec3, linear: Vec3) -> Self {
        Twist(Vec6::new(
            angular.x, angular.y, angular.z, linear.x, linear.y, linear.z,
        ))
    }

    pub fn zero() -> Self {
        Twist(Vec6::zeros())
    }

    pub fn from_slice(v: &[f64; 6]) -> Self {
        Twist(Vec6::from_column_slice(v))
    }

    pub fn angular(&self) -> Vec3 {
        self.0.fixed_rows::<3>(0).into_owned()
    }

    pub fn linear(&self) -> Vec3 {
        self.0.fixed_rows::<3>(3).into_owned()
    }

    pub fn scaled(&self, k: f64) -> Self {
        Twist(self.0 * k)
    }

    /// 4×4 matrix representation in se(3).
    pub fn hat(&self) -> Matrix4<f64> {
        let mut m = Matrix4::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&hat3(&self.angular()));
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.linear());
        m
    }

    /// Inverse of [`Twist::hat`]; ignores the symmetric part of the rotation block.
    pub fn vee(m: &Matrix4<f64>) -> Self {
        let w = Vec3::new(
            0.5 * (m[(2, 1)] - m[(1, 2)]),
            0.5 * (m[(0, 2)] - m[(2, 0)]),
            0.5 * (m[(1, 0)] - m[(0, 1)]),
        );
        let v = Vec3::new(m[(0, 3)], m[(1, 3)], m[(2, 3)]);
        Twist::new(w, v)
    }
}

impl std::ops::Add for Twist {
    type Output = Twist;
    fn add(self, rhs: Twist) -> Twist {
        Twist(self.0 + rhs.0)
    }
}

impl std::ops::Sub for Twist {
    type Output = Twist;
    fn sub(self, rhs: Twist) -> Twist {
        Twist(self.0 - rhs.0)
    }
}

/// Rigid transform `g = (R r; 0 1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub rotation: Mat3,
    pub position: Vec3,
}

impl Default for Pose {
    fn default() -> Self {
        Pose::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Pose {
            rotation: Mat3::identity(),
            position: Vec3::zeros(),
        }
    }

    pub fn new(rotation: Mat3, position: Vec3) -> Self {
        Pose { rotation, position }
    }

    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            position: self.position + self.rotation * other.position,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose {
            rotation: rt,
            position: -(rt * self.position),
        }
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.position);
        m
    }

    pub fn from_homogeneous(m: &Matrix4<f64>) -> Pose {
        Pose {
            rotation: m.fixed_view::<3, 3>(0, 0).into_owned(),
            position: m.fixed_view::<3, 1>(0, 3).into_owned(),
        }
    }

    /// `Ad_g = [[R, 0], [r̃R, R]]`.
    pub fn adjoint(&self) -> Mat6 {
        let r = &self.rotation;
        let mut m = Mat6::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(r);
        m.fixed_view_mut::<3, 3>(3, 3).copy_from(r);
        m.fixed_view_mut::<3, 3>(3, 0)
            .copy_from(&(hat3(&self.position) * r));
        m
    }

    /// `Ad*_g = [[R, r̃R], [0, R]]`.
    pub fn coadjoint(&self) -> Mat6 {
        let r = &self.rotation;
        let mut m = Mat6::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(r);
        m.fixed_view_mut::<3, 3>(3, 3).copy_from(r);
        m.fixed_view_mut::<3, 3>(0, 3)
            .copy_from(&(hat3(&self.position) * r));
        m
    }

    /// `Ad_{g⁻¹} = [[Rᵀ, 0], [−Rᵀr̃, Rᵀ]]`, without forming the inverse pose.
    pub fn adjoint_inv(&self) -> Mat6 {
        let rt = self.rotation.transpose();
        let mut m = Mat6::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&rt);
        m.fixed_view_mut::<3, 3>(3, 3).copy_from(&rt);
        m.fixed_view_mut::<3, 3>(3, 0)
            .copy_from(&(-(rt * hat3(&self.position))));
        m
    }

    /// Projects the rotation block back onto SO(3) (nearest orthonormal matrix).
    pub fn orthonormalized(&self) -> Pose {
        let svd = self.rotation.svd(true, true);
        let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
        let mut rot = u * vt;
        if rot.determinant() < 0.0 {
            let mut u = u;
            u.column_mut(2).neg_mut();
            rot = u * vt;
        }
        Pose {
            rotation: rot,
            position: self.position,
        }
    }

    pub fn orthonormality_error(&self) -> f64 {
        (self.rotation.transpose() * self.rotation - Mat3::identity()).norm()
    }
}

/// Skew matrix with `hat3(v) * w == v × w`.
pub fn hat3(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// `ad_ξ = [[κ̃, 0], [ν̃, κ̃]]`.
pub fn adjoint_se3(xi: &Twist) -> Mat6 {
    let k = hat3(&xi.angular());
    let n = hat3(&xi.linear());
    let mut m = Mat6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&k);
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&k);
    m.fixed_view_mut::<3, 3>(3, 0).copy_from(&n);
    m
}

/// `ad*_ξ = [[κ̃, ν̃], [0, κ̃]]`, i.e. `−ad_ξᵀ`.
pub fn coadjoint_se3(xi: &Twist) -> Mat6 {
    let k = hat3(&xi.angular());
    let n = hat3(&xi.linear());
    let mut m = Mat6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&k);
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&k);
    m.fixed_view_mut::<3, 3>(0, 3).copy_from(&n);
    m
}

fn horner(t2: f64, coeffs: &[f64]) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * t2 + c)
}

/// `(1 − cos θ)/θ²` and `(θ − sin θ)/θ³`.
fn exp_coefficients(theta: f64) -> (f64, f64) {
    if theta < SMALL_ANGLE {
        let t2 = theta * theta;
        (
            horner(
                t2,
                &[
                    1.0 / 2.0,
                    -1.0 / 24.0,
                    1.0 / 720.0,
                    -1.0 / 40320.0,
                    1.0 / 3628800.0,
                    -1.0 / 479001600.0,
                ],
            ),
            horner(
                t2,
                &[
                    1.0 / 6.0,
                    -1.0 / 120.0,
                    1.0 / 5040.0,
                    -1.0 / 362880.0,
                    1.0 / 39916800.0,
                    -1.0 / 6227020800.0,
                ],
            ),
        )
    } else {
        let (s, c) = theta.sin_cos();
        let t2 = theta * theta;
        ((1.0 - c) / t2, (theta - s) / (t2 * theta))
    }
}

/// Coefficients of `ad, ad², ad³, ad⁴` in the tangent operator, and their
/// θ-derivatives divided by θ (used for the time derivative).
struct TangentCoefficients {
    c: [f64; 4],
    dc_over_theta: [f64; 4],
}

fn tangent_coefficients(theta: f64) -> TangentCoefficients {
    if theta < SMALL_ANGLE {
        let t2 = theta * theta;
        let c = [
            horner(
                t2,
                &[
                    1.0 / 2.0,
                    0.0,
                    -1.0 / 720.0,
                    1.0 / 20160.0,
                    -1.0 / 1209600.0,
                    1.0 / 119750400.0,
                ],
            ),
            horner(
                t2,
                &[
                    1.0 / 6.0,
                    0.0,
                    -1.0 / 5040.0,
                    1.0 / 181440.0,
                    -1.0 / 13305600.0,
                    1.0 / 1556755200.0,
                ],
            ),
            horner(
                t2,
                &[
                    1.0 / 24.0,
                    -1.0 / 360.0,
                    1.0 / 13440.0,
                    -1.0 / 907200.0,
                    1.0 / 95800320.0,
                    -1.0 / 14529715200.0,
                ],
            ),
            horner(
                t2,
                &[
                    1.0 / 120.0,
                    -1.0 / 2520.0,
                    1.0 / 120960.0,
                    -1.0 / 9979200.0,
                    1.0 / 1245404160.0,
                    -1.0 / 217945728000.0,
                ],
            ),
        ];
        let dc_over_theta = [
            horner(
                t2,
                &[
                    0.0,
                    -1.0 / 180.0,
                    1.0 / 3360.0,
                    -1.0 / 151200.0,
                    1.0 / 11975040.0,
                    -1.0 / 1452971520.0,
                ],
            ),
            horner(
                t2,
                &[
                    0.0,
                    -1.0 / 1260.0,
                    1.0 / 30240.0,
                    -1.0 / 1663200.0,
                    1.0 / 155675520.0,
                    -1.0 / 21794572800.0,
                ],
            ),
            horner(
                t2,
                &[
                    -1.0 / 180.0,
                    1.0 / 3360.0,
                    -1.0 / 151200.0,
                    1.0 / 11975040.0,
                    -1.0 / 1452971520.0,
                    1.0 / 249080832000.0,
                ],
            ),
            horner(
                t2,
                &[
                    -1.0 / 1260.0,
                    1.0 / 30240.0,
                    -1.0 / 1663200.0,
                    1.0 / 155675520.0,
                    -1.0 / 21794572800.0,
                    1.0 / 4234374144000.0,
                ],
            ),
        ];
        TangentCoefficients { c, dc_over_theta }
    } else {
        let (s, c) = theta.sin_cos();
        let t = theta;
        let t2 = t * t;
        let t3 = t2 * t;
        let t4 = t2 * t2;
        let t5 = t4 * t;
        // numerators shared between c1'/θ and c3'/θ, and between c2'/θ and c4'/θ
        let n13 = -t2 * c + 5.0 * t * s + 8.0 * c - 8.0;
        let n24 = -t2 * s - 7.0 * t * c - 8.0 * t + 15.0 * s;
        TangentCoefficients {
            c: [
                (4.0 - 4.0 * c - t * s) / (2.0 * t2),
                (4.0 * t - 5.0 * s + t * c) / (2.0 * t3),
                (2.0 - 2.0 * c - t * s) / (2.0 * t4),
                (2.0 * t - 3.0 * s + t * c) / (2.0 * t5),
            ],
            dc_over_theta: [
                n13 / (2.0 * t4),
                n24 / (2.0 * t5),
                n13 / (2.0 * t4 * t2),
                n24 / (2.0 * t5 * t2),
            ],
        }
    }
}

/// `a · b` for a 6×6 times 6×n product, column by column. Much faster than
/// the general product for the small `n` used here.
pub fn mul_6xn(a: &Mat6, b: &Mat6xN) -> Mat6xN {
    let mut out = Mat6xN::zeros(b.ncols());
    for c in 0..b.ncols() {
        out.set_column(c, &(a * b.fixed_view::<6, 1>(0, c)));
    }
    out
}

/// Exponential map se(3) → SE(3), closed form in powers of `Ω̂` with θ = ‖κ‖.
pub fn exp_se3(omega: &Twist) -> Pose {
    let k = omega.angular();
    let theta = k.norm();
    let (a, b) = exp_coefficients(theta);
    let h = omega.hat();
    let h2 = h * h;
    let h3 = h2 * h;
    let m = Matrix4::identity() + h + h2 * a + h3 * b;
    Pose::from_homogeneous(&m)
}

/// Tangent operator `T_Ω = I + c₁ad + c₂ad² + c₃ad³ + c₄ad⁴`, equal to the
/// series Σ ad_Ω^k/(k+1)!.
pub fn tangent_operator(omega: &Twist) -> Mat6 {
    let theta = omega.angular().norm();
    let tc = tangent_coefficients(theta);
    let ad = adjoint_se3(omega);
    let ad2 = ad * ad;
    let ad3 = ad2 * ad;
    let ad4 = ad3 * ad;
    Mat6::identity() + ad * tc.c[0] + ad2 * tc.c[1] + ad3 * tc.c[2] + ad4 * tc.c[3]
}

/// Time derivative of `T_Ω` when `Ω` moves with rate `omega_dot`.
pub fn tangent_operator_rate(omega: &Twist, omega_dot: &Twist) -> Mat6 {
    let kappa = omega.angular();
    let theta = kappa.norm();
    let tc = tangent_coefficients(theta);
    let kdot = kappa.dot(&omega_dot.angular());
    let ad = adjoint_se3(omega);
    let add = adjoint_se3(omega_dot);
    let mut pow = [Mat6::identity(); 5];
    for k in 1..5 {
        pow[k] = pow[k - 1] * ad;
    }
    let mut out = Mat6::zeros();
    for k in 1..5 {
        // d(ad^k)/dt = Σ_j ad^j ad_Ω̇ ad^(k-1-j)
        let mut dpow = Mat6::zeros();
        for j in 0..k {
            dpow += pow[j] * add * pow[k - 1 - j];
        }
        out += pow[k] * (tc.dc_over_theta[k - 1] * kdot) + dpow * tc.c[k - 1];
    }
    out
}

/// `Ṫ_Ω v` without forming `Ṫ_Ω`.
pub fn tangent_operator_rate_apply(omega: &Twist, omega_dot: &Twist, v: &Vec6) -> Vec6 {
    let kappa = omega.angular();
    let tc = tangent_coefficients(kappa.norm());
    let kdot = kappa.dot(&omega_dot.angular());
    let ad = adjoint_se3(omega);
    let add = adjoint_se3(omega_dot);
    // powers ad^k v, and Σ_j ad^j ad_Ω̇ ad^(k-1-j) v built up recursively:
    // D_k = ad D_(k-1) + ad_Ω̇ ad^(k-1) v
    let mut pow = *v;
    let mut dpow = Vec6::zeros();
    let mut out = Vec6::zeros();
    for k in 0..4 {
        dpow = ad * dpow + add * pow;
        pow = ad * pow;
        out += pow * (tc.dc_over_theta[k] * kdot) + dpow * tc.c[k];
    }
    out
}

/// Two-point fourth-order Magnus step over an interval of length `h`, with
/// the twist sampled at `s + (1/2 ∓ √3/6)h`.
pub fn zannah_magnus(xi1: &Twist, xi2: &Twist, h: f64) -> MagnusTerm {
    let comm = adjoint_se3(xi1) * xi2.0;
    Twist((xi1.0 + xi2.0) * (0.5 * h) + comm * (3f64.sqrt() * h * h / 12.0))
}

/// Offsets of the two Magnus collocation points as fractions of the interval.
pub fn zannah_nodes() -> [f64; 2] {
    let d = 3f64.sqrt() / 6.0;
    [0.5 - d, 0.5 + d]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_vec6(rng: &mut ChaCha8Rng, scale: f64) -> Vec6 {
        Vec6::from_fn(|_, _| rng.random_range(-scale..scale))
    }

    fn rand_pose(rng: &mut ChaCha8Rng) -> Pose {
        exp_se3(&Twist(rand_vec6(rng, 2.0)))
    }

    /// Scaling-and-squaring Taylor oracle for the matrix exponential.
    fn expm6(a: &Mat6) -> Mat6 {
        let norm = a.norm();
        let squarings = (norm.max(1.0).log2().ceil() as i32 + 4).max(0);
        let scaled = a / 2f64.powi(squarings);
        let mut term = Mat6::identity();
        let mut sum = Mat6::identity();
        for k in 1..30 {
            term = term * scaled / k as f64;
            sum += term;
        }
        for _ in 0..squarings {
            sum = sum * sum;
        }
        sum
    }

    fn expm4(a: &Matrix4<f64>) -> Matrix4<f64> {
        let squarings = 8;
        let scaled = a / 2f64.powi(squarings);
        let mut term = Matrix4::identity();
        let mut sum = Matrix4::identity();
        for k in 1..30 {
            term = term * scaled / k as f64;
            sum += term;
        }
        for _ in 0..squarings {
            sum = sum * sum;
        }
        sum
    }

    #[test]
    fn hat3_examples() {
        assert_eq!(hat3(&Vec3::zeros()), Mat3::zeros());
        let e1 = hat3(&Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(e1, Mat3::new(0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let v = Vec3::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let w = Vec3::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let cross = Vec3::new(
                v.y * w.z - v.z * w.y,
                v.z * w.x - v.x * w.z,
                v.x * w.y - v.y * w.x,
            );
            assert_relative_eq!(hat3(&v) * w, cross, epsilon = 1e-15);
            assert_relative_eq!(hat3(&v).transpose(), -hat3(&v));
        }
    }

    #[test]
    fn adjoint_is_antisymmetric_bracket() {
        assert_eq!(adjoint_se3(&Twist::zero()), Mat6::zeros());
        let parallel = Twist::from_slice(&[0.0, 0.0, 2.0, 0.0, 0.0, 3.0]);
        assert_relative_eq!(adjoint_se3(&parallel) * parallel.0, Vec6::zeros());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let a = Twist(rand_vec6(&mut rng, 1.0));
            let b = Twist(rand_vec6(&mut rng, 1.0));
            assert_relative_eq!(
                adjoint_se3(&a) * b.0,
                -(adjoint_se3(&b) * a.0),
                epsilon = 1e-14
            );
            // ad matches the matrix commutator of the hats
            let comm = a.hat() * b.hat() - b.hat() * a.hat();
            assert_relative_eq!(Twist::vee(&comm).0, adjoint_se3(&a) * b.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn coadjoint_block_layout_and_duality() {
        assert_eq!(coadjoint_se3(&Twist::zero()), Mat6::zeros());
        let xi = Twist::from_slice(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let expected = Mat6::from_row_slice(&[
            0.0, -3.0, 2.0, 0.0, -6.0, 5.0, //
            3.0, 0.0, -1.0, 6.0, 0.0, -4.0, //
            -2.0, 1.0, 0.0, -5.0, 4.0, 0.0, //
            0.0, 0.0, 0.0, 0.0, -3.0, 2.0, //
            0.0, 0.0, 0.0, 3.0, 0.0, -1.0, //
            0.0, 0.0, 0.0, -2.0, 1.0, 0.0,
        ]);
        assert_eq!(coadjoint_se3(&xi), expected);
        assert_eq!(coadjoint_se3(&xi), -adjoint_se3(&xi).transpose());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let x = Twist(rand_vec6(&mut rng, 1.0));
            let f = rand_vec6(&mut rng, 1.0);
            let e = rand_vec6(&mut rng, 1.0);
            let lhs = (coadjoint_se3(&x) * f).dot(&e);
            let rhs = f.dot(&(adjoint_se3(&x) * e));
            assert!((lhs + rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn group_adjoint_examples() {
        assert_eq!(Pose::identity().adjoint(), Mat6::identity());
        let g = Pose::new(Mat3::identity(), Vec3::new(0.0, 0.0, 1.0));
        let ad = g.adjoint();
        assert_eq!(ad.fixed_view::<3, 3>(3, 0).into_owned(), hat3(&Vec3::new(0.0, 0.0, 1.0)));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let g1 = rand_pose(&mut rng);
            let g2 = rand_pose(&mut rng);
            assert_relative_eq!(
                g1.compose(&g2).adjoint(),
                g1.adjoint() * g2.adjoint(),
                epsilon = 1e-12
            );
            assert_relative_eq!(g1.adjoint_inv(), g1.inverse().adjoint(), epsilon = 1e-12);
            assert_relative_eq!(
                g1.coadjoint(),
                g1.adjoint().try_inverse().unwrap().transpose(),
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn exp_examples() {
        assert_eq!(exp_se3(&Twist::zero()), Pose::identity());
        let theta = 0.7;
        let p = exp_se3(&Twist::from_slice(&[0.0, 0.0, theta, 0.0, 0.0, 0.0]));
        let (s, c) = theta.sin_cos();
        let rodrigues = Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0);
        assert_relative_eq!(p.rotation, rodrigues, epsilon = 1e-15);
        assert_relative_eq!(p.position, Vec3::zeros());
        let t = exp_se3(&Twist::from_slice(&[0.0, 0.0, 0.0, 0.3, -0.2, 1.5]));
        assert_eq!(t.rotation, Mat3::identity());
        assert_relative_eq!(t.position, Vec3::new(0.3, -0.2, 1.5));
    }

    #[test]
    fn exp_matches_matrix_exponential_and_stays_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for i in 0..200 {
            // span both branches of the coefficient evaluation
            let scale = if i % 2 == 0 { 0.05 } else { 3.0 };
            let om = Twist(rand_vec6(&mut rng, scale));
            let g = exp_se3(&om);
            assert!(g.orthonormality_error() < 1e-10);
            assert!((g.rotation.determinant() - 1.0).abs() < 1e-10);
            assert_relative_eq!(g.to_homogeneous(), expm4(&om.hat()), epsilon = 1e-10);
        }
    }

    #[test]
    fn group_adjoint_of_exp_is_exp_of_algebra_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..50 {
            let mut v = rand_vec6(&mut rng, 1.0);
            let n = v.norm();
            if n > std::f64::consts::PI {
                v *= std::f64::consts::PI / n;
            }
            let om = Twist(v);
            assert_relative_eq!(
                exp_se3(&om).adjoint(),
                expm6(&adjoint_se3(&om)),
                epsilon = 1e-8
            );
        }
    }

    #[test]
    fn tangent_operator_identity_at_zero_and_series() {
        assert_eq!(tangent_operator(&Twist::zero()), Mat6::identity());
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let om = Twist(rand_vec6(&mut rng, 1.0));
            let ad = adjoint_se3(&om);
            let mut term = Mat6::identity();
            let mut series = Mat6::identity();
            for k in 1..40 {
                term = term * ad / (k as f64 + 1.0);
                series += term;
            }
            assert_relative_eq!(tangent_operator(&om), series, epsilon = 1e-12);
        }
    }

    #[test]
    fn tangent_operator_is_dexp() {
        // d/dε exp(Ω + εδ) · exp(Ω)⁻¹ = hat(T_Ω δ)
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let eps = 1e-6;
        for _ in 0..30 {
            let om = Twist(rand_vec6(&mut rng, 1.5));
            let d = Twist(rand_vec6(&mut rng, 1.0));
            let gp = exp_se3(&(om + d.scaled(eps))).to_homogeneous();
            let gm = exp_se3(&(om - d.scaled(eps))).to_homogeneous();
            let g = exp_se3(&om).to_homogeneous();
            let fd = (gp - gm) / (2.0 * eps) * g.try_inverse().unwrap();
            let analytic = tangent_operator(&om) * d.0;
            let fd_twist = Twist::vee(&fd).0;
            assert!((fd_twist - analytic).norm() <= 1e-6 * analytic.norm().max(1.0));
        }
    }

    #[test]
    fn small_angle_branch_is_continuous() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let mut v = rand_vec6(&mut rng, 1.0);
            let dir = v.fixed_rows::<3>(0).normalize();
            let below = dir * SMALL_ANGLE * (1.0 - 1e-12);
            let above = dir * SMALL_ANGLE * (1.0 + 1e-12);
            v.fixed_rows_mut::<3>(0).copy_from(&below);
            let tb = tangent_operator(&Twist(v));
            let eb = exp_se3(&Twist(v)).to_homogeneous();
            let rb = tangent_operator_rate(&Twist(v), &Twist(v));
            v.fixed_rows_mut::<3>(0).copy_from(&above);
            let ta = tangent_operator(&Twist(v));
            let ea = exp_se3(&Twist(v)).to_homogeneous();
            let ra = tangent_operator_rate(&Twist(v), &Twist(v));
            assert!((tb - ta).norm() < 1e-9);
            assert!((eb - ea).norm() < 1e-9);
            assert!((rb - ra).norm() < 1e-9);
        }
    }

    #[test]
    fn tangent_rate_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let eps = 1e-6;
        for i in 0..40 {
            let scale = if i % 2 == 0 { 0.03 } else { 1.5 };
            let om = Twist(rand_vec6(&mut rng, scale));
            let rate = Twist(rand_vec6(&mut rng, 1.0));
            let fd = (tangent_operator(&(om + rate.scaled(eps)))
                - tangent_operator(&(om - rate.scaled(eps))))
                / (2.0 * eps);
            let an = tangent_operator_rate(&om, &rate);
            assert!((fd - an).norm() < 1e-7 * an.norm().max(1.0), "{}", (fd - an).norm());
        }
    }

    #[test]
    fn tangent_rate_apply_matches_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for i in 0..40 {
            let scale = if i % 2 == 0 { 0.03 } else { 1.5 };
            let om = Twist(rand_vec6(&mut rng, scale));
            let rate = Twist(rand_vec6(&mut rng, 1.0));
            let v = rand_vec6(&mut rng, 1.0);
            let expected = tangent_operator_rate(&om, &rate) * v;
            let got = tangent_operator_rate_apply(&om, &rate, &v);
            assert!((got - expected).norm() < 1e-13 * expected.norm().max(1.0));
        }
    }

    #[test]
    fn small_product_matches_general() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let a = Mat6::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let b = Mat6xN::from_fn(9, |_, _| rng.random_range(-1.0..1.0));
        assert_relative_eq!(mul_6xn(&a, &b), a * &b, epsilon = 1e-14);
    }

    #[test]
    fn magnus_constant_twist() {
        let xi = Twist::from_slice(&[0.3, -1.0, 2.0, 0.1, 0.0, 1.0]);
        let om = zannah_magnus(&xi, &xi, 0.25);
        assert_relative_eq!(om.0, xi.0 * 0.25, epsilon = 1e-15);
        let g = exp_se3(&om).to_homogeneous();
        assert_relative_eq!(g, expm4(&(xi.hat() * 0.25)), epsilon = 1e-13);
    }

    #[test]
    fn magnus_commutator_term() {
        let x1 = Twist::from_slice(&[0.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
        let x2 = Twist::from_slice(&[1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let h = 0.1;
        let om = zannah_magnus(&x1, &x2, h);
        // ad_{x1} x2 = (κ1×κ2, ν1×κ2 + κ1×ν2) = ((0,1,0), (0,1,0) + (0,0,0))
        let comm = Vec6::new(0.0, 1.0, 0.0, 0.0, 1.0, 0.0);
        let expected = (x1.0 + x2.0) * 0.05 + comm * (3f64.sqrt() * 0.01 / 12.0);
        assert_relative_eq!(om.0, expected, epsilon = 1e-16);
    }

    #[test]
    fn zannah_nodes_are_gauss_points() {
        let [a, b] = zannah_nodes();
        assert_relative_eq!(a + b, 1.0);
        assert_relative_eq!(b - a, 1.0 / 3f64.sqrt(), epsilon = 1e-15);
    }
}
