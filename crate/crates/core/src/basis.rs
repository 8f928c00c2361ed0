//! Strain bases and composite Gauss–Legendre quadrature over `[0, L]`.
//!
//! The strain twist is expanded in Legendre polynomials per component and the
//! inflation ratio in a C¹ piecewise-cubic Hermite spline.

use nalgebra::{DVector, RowDVector};

use crate::error::{Error, Result};
use crate::liegroup::{zannah_nodes, Mat6xN, Twist, Vec6};

/// Legendre polynomials `P_0..=P_max` at `x ∈ [-1, 1]` via the three-term recurrence.
pub fn legendre_all(max_order: usize, x: f64) -> Vec<f64> {
    let mut p = Vec::with_capacity(max_order + 1);
    p.push(1.0);
    if max_order >= 1 {
        p.push(x);
    }
    for n in 1..max_order {
        let nf = n as f64;
        let next = ((2.0 * nf + 1.0) * x * p[n] - nf * p[n - 1]) / (nf + 1.0);
        p.push(next);
    }
    p
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let p = legendre_all(n, x);
    let pn = p[n];
    let dp = if n == 0 {
        0.0
    } else {
        n as f64 * (x * pn - p[n - 1]) / (x * x - 1.0)
    };
    (pn, dp)
}

/// `P_order(2s/L − 1)`.
pub fn legendre_eval(order: usize, s: f64, length: f64) -> Result<f64> {
    check_domain(s, length)?;
    Ok(legendre_all(order, 2.0 * s / length - 1.0)[order])
}

fn check_domain(s: f64, length: f64) -> Result<()> {
    let tol = 1e-12 * length.abs().max(1.0);
    if !(s >= -tol && s <= length + tol) {
        return Err(Error::Domain { s, length });
    }
    Ok(())
}

/// Standard cubic Hermite shape functions at `t ∈ [0, 1]` and their `t`-derivatives.
fn hermite_cubics(t: f64) -> ([f64; 4], [f64; 4]) {
    let t2 = t * t;
    let t3 = t2 * t;
    (
        [
            1.0 - 3.0 * t2 + 2.0 * t3,
            t - 2.0 * t2 + t3,
            3.0 * t2 - 2.0 * t3,
            -t2 + t3,
        ],
        [
            -6.0 * t + 6.0 * t2,
            1.0 - 4.0 * t + 3.0 * t2,
            6.0 * t - 6.0 * t2,
            -2.0 * t + 3.0 * t2,
        ],
    )
}

/// Mixed-boundary Hermite cubics `(p1, p2, p3, p4)` on segment `[a, b]` of a
/// rod of length `length`: `p1` vanishes on the base segment and `p4` on the
/// tip segment.
pub fn hermite_segment_eval(a: f64, b: f64, s: f64, length: f64) -> [f64; 4] {
    let t = (s - a) / (b - a);
    let (mut p, _) = hermite_cubics(t);
    if a <= 0.0 {
        p[0] = 0.0;
    }
    if b >= length {
        p[3] = 0.0;
    }
    p
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, z);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, z);
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Composite Gauss–Legendre rule over `[0, L]` together with the kinematic
/// marching grid.
///
/// Kinematic nodes are all quadrature points plus every interval endpoint,
/// sorted along the rod; forward kinematics steps from node to node and
/// evaluates the Magnus expansion at two collocation points per step.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub length: f64,
    pub n_intervals: usize,
    pub points_per_interval: usize,
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    /// Sorted kinematic nodes, starting at 0 and ending at L.
    pub nodes: Vec<f64>,
    /// Index into `nodes` of each quadrature point.
    pub point_node: Vec<usize>,
    /// Collocation pair for the step from `nodes[j]` to `nodes[j + 1]`.
    pub collocation: Vec<[f64; 2]>,
}

impl QuadratureRule {
    pub fn new(n_intervals: usize, points_per_interval: usize, length: f64) -> Result<Self> {
        if n_intervals < 1 {
            return Err(Error::InvalidParameter(
                "quadrature needs at least one interval".into(),
            ));
        }
        if points_per_interval < 2 {
            return Err(Error::InvalidParameter(
                "quadrature needs at least two points per interval".into(),
            ));
        }
        if !(length > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "rod length must be positive, got {length}"
            )));
        }
        let (x, w) = gauss_legendre(points_per_interval);
        let h = length / n_intervals as f64;
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let mut nodes = vec![0.0];
        let mut point_node = Vec::new();
        for i in 0..n_intervals {
            let a = i as f64 * h;
            for (xi, wi) in x.iter().zip(&w) {
                let s = a + 0.5 * h * (xi + 1.0);
                points.push(s);
                weights.push(0.5 * h * wi);
                point_node.push(nodes.len());
                nodes.push(s);
            }
            let b = if i + 1 == n_intervals {
                length
            } else {
                (i + 1) as f64 * h
            };
            nodes.push(b);
        }
        let [c1, c2] = zannah_nodes();
        let collocation = nodes
            .windows(2)
            .map(|n| {
                let step = n[1] - n[0];
                [n[0] + c1 * step, n[0] + c2 * step]
            })
            .collect();
        Ok(QuadratureRule {
            length,
            n_intervals,
            points_per_interval,
            points,
            weights,
            nodes,
            point_node,
            collocation,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&s, &w)| w * f(s))
            .sum()
    }

    /// Index of the kinematic node closest to `s`.
    pub fn nearest_node(&self, s: f64) -> usize {
        let mut best = 0;
        for (j, &n) in self.nodes.iter().enumerate() {
            if (n - s).abs() < (self.nodes[best] - s).abs() {
                best = j;
            }
        }
        best
    }
}

/// `build_quadrature` with the argument order used by configuration code.
pub fn build_quadrature(
    n_intervals: usize,
    points_per_interval: usize,
    length: f64,
) -> Result<QuadratureRule> {
    QuadratureRule::new(n_intervals, points_per_interval, length)
}

/// Component order inside a twist: `κ1, κ2, κ3, ν1, ν2, ν3`.
pub const STRAIN_NAMES: [&str; 6] = ["kappa1", "kappa2", "kappa3", "nu1", "nu2", "nu3"];

/// Legendre basis for the six strain components. Component `i` with degree
/// `Some(d)` contributes columns `P_0..=P_d` in row `i`.
#[derive(Clone, Debug)]
pub struct XiBasis {
    pub length: f64,
    pub degrees: [Option<usize>; 6],
    pub reference: Vec6,
    offsets: [usize; 6],
    dim: usize,
}

impl XiBasis {
    pub fn new(length: f64, degrees: [Option<usize>; 6]) -> Self {
        let mut offsets = [0; 6];
        let mut dim = 0;
        for i in 0..6 {
            offsets[i] = dim;
            dim += degrees[i].map_or(0, |d| d + 1);
        }
        XiBasis {
            length,
            degrees,
            reference: Vec6::new(0.0, 0.0, 0.0, 0.0, 0.0, 1.0),
            offsets,
            dim,
        }
    }

    pub fn with_reference(mut self, reference: Vec6) -> Self {
        self.reference = reference;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// First column belonging to strain component `component`.
    pub fn offset(&self, component: usize) -> usize {
        self.offsets[component]
    }

    /// `Φ_ξ(s)`, a 6×n block-diagonal matrix.
    pub fn matrix(&self, s: f64) -> Mat6xN {
        let x = (2.0 * s / self.length - 1.0).clamp(-1.0, 1.0);
        let max = self.degrees.iter().flatten().copied().max().unwrap_or(0);
        let p = legendre_all(max, x);
        let mut m = Mat6xN::zeros(self.dim);
        for (row, deg) in self.degrees.iter().enumerate() {
            if let Some(d) = deg {
                for k in 0..=*d {
                    m[(row, self.offsets[row] + k)] = p[k];
                }
            }
        }
        m
    }

    pub fn reference_twist(&self) -> Twist {
        Twist(self.reference)
    }

    fn check_dim(&self, q: &DVector<f64>) -> Result<()> {
        if q.len() != self.dim {
            return Err(Error::Dimension {
                what: "strain coordinates",
                expected: self.dim,
                got: q.len(),
            });
        }
        Ok(())
    }

    /// `ξ(s) = Φ_ξ(s) q + ξ*`.
    pub fn eval_strain(&self, q: &DVector<f64>, s: f64) -> Result<Twist> {
        self.check_dim(q)?;
        let v = &self.matrix(s) * q;
        Ok(Twist(Vec6::from_iterator(v.iter().copied()) + self.reference))
    }

    /// `ξ̇(s) = Φ_ξ(s) q̇`.
    pub fn eval_strain_rate(&self, qdot: &DVector<f64>, s: f64) -> Result<Twist> {
        self.check_dim(qdot)?;
        let v = &self.matrix(s) * qdot;
        Ok(Twist(Vec6::from_iterator(v.iter().copied())))
    }
}

/// Boundary conditions on the inflation ratio.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RhoBoundary {
    /// `ρ` pinned to its reference value at both ends.
    Dirichlet,
    /// Zero slope `ρ′` at both ends.
    Neumann,
    /// Pinned at the base, zero slope at the tip.
    Mixed,
}

impl std::str::FromStr for RhoBoundary {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dirichlet" => Ok(RhoBoundary::Dirichlet),
            "neumann" => Ok(RhoBoundary::Neumann),
            "mixed" => Ok(RhoBoundary::Mixed),
            other => Err(Error::InvalidParameter(format!(
                "unknown inflation boundary condition '{other}' (expected dirichlet, neumann or mixed)"
            ))),
        }
    }
}

/// C¹ piecewise-cubic Hermite basis for the inflation ratio on `m` equal
/// segments. Each breakpoint carries a value DOF and a slope DOF; the boundary
/// condition removes two of them, leaving `2m` columns. With zero segments the
/// basis is empty and `ρ ≡ ρ*`.
#[derive(Clone, Debug)]
pub struct RhoBasis {
    pub length: f64,
    pub segments: usize,
    pub boundary: RhoBoundary,
    pub reference: f64,
    /// Column of each raw DOF `(node, is_slope)`, flattened as `2·node + is_slope`.
    column_of: Vec<Option<usize>>,
    dim: usize,
}

impl RhoBasis {
    pub fn new(length: f64, segments: usize, boundary: RhoBoundary) -> Self {
        if segments == 0 {
            return RhoBasis::empty(length);
        }
        let raw = 2 * (segments + 1);
        let removed: [usize; 2] = match boundary {
            RhoBoundary::Dirichlet => [0, 2 * segments],
            RhoBoundary::Neumann => [1, 2 * segments + 1],
            RhoBoundary::Mixed => [0, 2 * segments + 1],
        };
        let mut column_of = vec![None; raw];
        let mut dim = 0;
        for (k, c) in column_of.iter_mut().enumerate() {
            if !removed.contains(&k) {
                *c = Some(dim);
                dim += 1;
            }
        }
        RhoBasis {
            length,
            segments,
            boundary,
            reference: 1.0,
            column_of,
            dim,
        }
    }

    pub fn empty(length: f64) -> Self {
        RhoBasis {
            length,
            segments: 0,
            boundary: RhoBoundary::Neumann,
            reference: 1.0,
            column_of: Vec::new(),
            dim: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `(Φ_ρ(s), Φ_ρ′(s))` as 1×n rows.
    pub fn rows(&self, s: f64) -> (RowDVector<f64>, RowDVector<f64>) {
        let mut phi = RowDVector::zeros(self.dim);
        let mut dphi = RowDVector::zeros(self.dim);
        if self.dim == 0 {
            return (phi, dphi);
        }
        let h = self.length / self.segments as f64;
        let seg = ((s / h).floor() as isize).clamp(0, self.segments as isize - 1) as usize;
        let a = seg as f64 * h;
        let t = ((s - a) / h).clamp(0.0, 1.0);
        let (p, dp) = hermite_cubics(t);
        // slope shape functions carry the segment length so their DOF is dρ/ds
        let scale = [1.0, h, 1.0, h];
        let raw = [2 * seg, 2 * seg + 1, 2 * seg + 2, 2 * seg + 3];
        for k in 0..4 {
            if let Some(c) = self.column_of[raw[k]] {
                phi[c] += scale[k] * p[k];
                dphi[c] += scale[k] * dp[k] / h;
            }
        }
        (phi, dphi)
    }

    fn check_dim(&self, q: &DVector<f64>) -> Result<()> {
        if q.len() != self.dim {
            return Err(Error::Dimension {
                what: "inflation coordinates",
                expected: self.dim,
                got: q.len(),
            });
        }
        Ok(())
    }

    /// `(ρ, ρ′)` at `s`.
    pub fn eval_inflation(&self, q: &DVector<f64>, s: f64) -> Result<(f64, f64)> {
        self.check_dim(q)?;
        let (phi, dphi) = self.rows(s);
        Ok(((phi * q)[0] + self.reference, (dphi * q)[0]))
    }

    /// `ρ̇` at `s`.
    pub fn eval_inflation_rate(&self, qdot: &DVector<f64>, s: f64) -> Result<f64> {
        self.check_dim(qdot)?;
        Ok((self.rows(s).0 * qdot)[0])
    }
}
