//! Adaptive L-stable SDIRK integrator for stiff first-order systems.
//!
//! Five-stage, fourth-order singly diagonally implicit Runge–Kutta method
//! (γ = 1/4, stiffly accurate) with an embedded third-order solution for step
//! control. Stage equations are solved by simplified Newton iteration with a
//! finite-difference Jacobian that is reused across steps until convergence
//! degrades.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A first-order system `y' = f(t, y)`.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &DVector<f64>) -> Result<DVector<f64>>;

    /// `∂f/∂y`; forward differences by default.
    fn jacobian(&self, t: f64, y: &DVector<f64>, f0: &DVector<f64>) -> Result<DMatrix<f64>> {
        let n = self.dim();
        let mut jac = DMatrix::zeros(n, n);
        let mut yp = y.clone();
        for j in 0..n {
            let h = f64::EPSILON.sqrt() * y[j].abs().max(1e-5);
            yp[j] = y[j] + h;
            let fp = self.rhs(t, &yp)?;
            jac.set_column(j, &((fp - f0) / h));
            yp[j] = y[j];
        }
        Ok(jac)
    }
}

const GAMMA: f64 = 0.25;
const C: [f64; 5] = [0.25, 0.75, 11.0 / 20.0, 0.5, 1.0];
const A: [[f64; 5]; 5] = [
    [0.25, 0.0, 0.0, 0.0, 0.0],
    [0.5, 0.25, 0.0, 0.0, 0.0],
    [17.0 / 50.0, -1.0 / 25.0, 0.25, 0.0, 0.0],
    [371.0 / 1360.0, -137.0 / 2720.0, 15.0 / 544.0, 0.25, 0.0],
    [25.0 / 24.0, -49.0 / 48.0, 125.0 / 16.0, -85.0 / 12.0, 0.25],
];
const B: [f64; 5] = [25.0 / 24.0, -49.0 / 48.0, 125.0 / 16.0, -85.0 / 12.0, 0.25];
const B_EMBEDDED: [f64; 5] = [59.0 / 48.0, -17.0 / 96.0, 225.0 / 32.0, -85.0 / 12.0, 0.0];

/// Butcher tableau `(c, A, b, b̂)`, exposed for order-condition checks.
pub fn tableau() -> ([f64; 5], [[f64; 5]; 5], [f64; 5], [f64; 5]) {
    (C, A, B, B_EMBEDDED)
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    pub initial_step: Option<f64>,
    pub max_step: f64,
    pub max_newton_iterations: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions {
            rtol: 1e-6,
            atol: 1e-8,
            initial_step: None,
            max_step: f64::INFINITY,
            max_newton_iterations: 7,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IntegratorStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evaluations: usize,
    pub jacobian_evaluations: usize,
    pub factorizations: usize,
}

/// Integrator state carried between calls to [`Sdirk4::advance`].
#[derive(Clone, Debug)]
pub struct Sdirk4 {
    pub options: IntegratorOptions,
    pub stats: IntegratorStats,
    step: Option<f64>,
    jacobian: Option<DMatrix<f64>>,
    jacobian_fresh: bool,
}

enum StageOutcome {
    Converged(DVector<f64>),
    Diverged,
}

impl Sdirk4 {
    pub fn new(options: IntegratorOptions) -> Self {
        Sdirk4 {
            options,
            stats: IntegratorStats::default(),
            step: None,
            jacobian: None,
            jacobian_fresh: false,
        }
    }

    fn weights(&self, y: &DVector<f64>, y_new: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            y.len(),
            y.iter()
                .zip(y_new.iter())
                .map(|(a, b)| 1.0 / (self.options.atol + self.options.rtol * a.abs().max(b.abs()))),
        )
    }

    fn norm(v: &DVector<f64>, w: &DVector<f64>) -> f64 {
        if v.is_empty() {
            return 0.0;
        }
        (v.component_mul(w).norm_squared() / v.len() as f64).sqrt()
    }

    fn refresh_jacobian<S: OdeSystem>(&mut self, sys: &S, t: f64, y: &DVector<f64>, f0: &DVector<f64>) -> Result<()> {
        self.jacobian = Some(sys.jacobian(t, y, f0)?);
        self.stats.jacobian_evaluations += 1;
        self.stats.rhs_evaluations += sys.dim();
        self.jacobian_fresh = true;
        Ok(())
    }

    /// Solves `Y = base + hγ f(t, Y)` for one stage.
    #[allow(clippy::too_many_arguments)]
    fn solve_stage<S: OdeSystem>(
        &mut self,
        sys: &S,
        lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
        t: f64,
        h: f64,
        base: &DVector<f64>,
        guess: DVector<f64>,
        weights: &DVector<f64>,
    ) -> StageOutcome {
        let mut y = guess;
        let mut previous = f64::INFINITY;
        for _ in 0..self.options.max_newton_iterations {
            let f = match sys.rhs(t, &y) {
                Ok(f) => f,
                Err(_) => return StageOutcome::Diverged,
            };
            self.stats.rhs_evaluations += 1;
            let residual = &y - base - f * (h * GAMMA);
            let delta = match lu.solve(&(-residual)) {
                Some(d) => d,
                None => return StageOutcome::Diverged,
            };
            y += &delta;
            let size = Self::norm(&delta, weights);
            if !size.is_finite() {
                return StageOutcome::Diverged;
            }
            if size < 1e-2 || (previous.is_finite() && size / previous * size < 1e-2 && size < 1.0) {
                return StageOutcome::Converged(y);
            }
            if previous.is_finite() && size > 0.9 * previous {
                return StageOutcome::Diverged;
            }
            previous = size;
        }
        StageOutcome::Diverged
    }

    fn initial_step(&self, y: &DVector<f64>, f0: &DVector<f64>, span: f64) -> f64 {
        if let Some(h) = self.options.initial_step {
            return h;
        }
        let w = self.weights(y, y);
        let d0 = Self::norm(y, &w);
        let d1 = Self::norm(f0, &w);
        let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h.min(span).min(self.options.max_step).max(1e-10)
    }

    /// Advances `y` from `t` to `t_end` with adaptive steps.
    pub fn advance<S: OdeSystem>(&mut self, sys: &S, t: f64, y: &DVector<f64>, t_end: f64) -> Result<DVector<f64>> {
        let mut t = t;
        let mut y = y.clone();
        if t_end <= t {
            return Ok(y);
        }
        let mut f0 = sys.rhs(t, &y)?;
        self.stats.rhs_evaluations += 1;
        let mut h = self.step.unwrap_or_else(|| self.initial_step(&y, &f0, t_end - t));
        if self.jacobian.is_none() {
            self.refresh_jacobian(sys, t, &y, &f0)?;
        }
        let n = y.len();
        loop {
            let remaining = t_end - t;
            if remaining <= 1e-13 * t_end.abs().max(1.0) {
                break;
            }
            let mut h_try = h.min(self.options.max_step);
            let clipped = h_try >= remaining;
            if clipped {
                h_try = remaining;
            }
            if h_try < 1e-14 * t.abs().max(1.0) {
                return Err(Error::StepUnderflow {
                    t,
                    h: h_try,
                    state: y.iter().copied().collect(),
                });
            }

            let jac = self.jacobian.as_ref().expect("jacobian initialized");
            let iteration = DMatrix::identity(n, n) - jac * (h_try * GAMMA);
            let lu = iteration.lu();
            self.stats.factorizations += 1;
            let w = self.weights(&y, &y);

            let mut k: Vec<DVector<f64>> = Vec::with_capacity(5);
            let mut failed = false;
            for i in 0..5 {
                let mut base = y.clone();
                for (j, kj) in k.iter().enumerate() {
                    base.axpy(h_try * A[i][j], kj, 1.0);
                }
                let guess = match k.last() {
                    Some(prev) => &base + prev * (h_try * GAMMA),
                    None => &base + &f0 * (h_try * GAMMA),
                };
                match self.solve_stage(sys, &lu, t + C[i] * h_try, h_try, &base, guess, &w) {
                    StageOutcome::Converged(stage) => k.push((stage - base) / (h_try * GAMMA)),
                    StageOutcome::Diverged => {
                        failed = true;
                        break;
                    }
                }
            }

            if failed {
                self.stats.rejected += 1;
                if !self.jacobian_fresh {
                    self.refresh_jacobian(sys, t, &y, &f0)?;
                } else {
                    h = h_try * 0.25;
                }
                continue;
            }

            let mut y_new = y.clone();
            let mut err = DVector::zeros(n);
            for i in 0..5 {
                y_new.axpy(h_try * B[i], &k[i], 1.0);
                err.axpy(h_try * (B[i] - B_EMBEDDED[i]), &k[i], 1.0);
            }
            // filter the estimate through the iteration matrix so stiff
            // components do not dominate it
            let err = lu.solve(&err).unwrap_or(err);
            let w_err = self.weights(&y, &y_new);
            let e = Self::norm(&err, &w_err);
            let factor = if e == 0.0 { 5.0 } else { (0.9 * e.powf(-0.25)).clamp(0.2, 5.0) };

            if e <= 1.0 && y_new.iter().all(|v| v.is_finite()) {
                let f_new = match sys.rhs(t + h_try, &y_new) {
                    Ok(f) => f,
                    Err(_) => {
                        self.stats.rejected += 1;
                        h = h_try * 0.25;
                        continue;
                    }
                };
                self.stats.rhs_evaluations += 1;
                self.stats.accepted += 1;
                t = if clipped { t_end } else { t + h_try };
                y = y_new;
                f0 = f_new;
                self.jacobian_fresh = false;
                let next = h_try * factor;
                // keep the natural step when clipping to an output time
                h = if clipped { h.max(next) } else { next };
            } else {
                self.stats.rejected += 1;
                h = h_try * factor.min(0.5);
            }
        }
        self.step = Some(h);
        Ok(y)
    }

    /// Drops the cached Jacobian, e.g. after a discontinuity in the system.
    pub fn reset(&mut self) {
        self.jacobian = None;
        self.jacobian_fresh = false;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn order_conditions() {
        let (c, a, b, bh) = tableau();
        let ac = |v: &[f64; 5]| -> [f64; 5] {
            let mut out = [0.0; 5];
            for i in 0..5 {
                out[i] = (0..5).map(|j| a[i][j] * v[j]).sum();
            }
            out
        };
        for i in 0..5 {
            assert_relative_eq!(a[i].iter().sum::<f64>(), c[i], epsilon = 1e-14);
            assert_eq!(a[i][i], GAMMA);
        }
        let dot = |x: &[f64; 5], y: &[f64; 5]| (0..5).map(|i| x[i] * y[i]).sum::<f64>();
        let ones = [1.0; 5];
        let c2 = c.map(|x| x * x);
        let c3 = c.map(|x| x * x * x);
        let a_c = ac(&c);
        let a_c2 = ac(&c2);
        let a_a_c = ac(&a_c);
        let c_ac: [f64; 5] = std::array::from_fn(|i| c[i] * a_c[i]);
        for (w, order) in [(b, 4), (bh, 3)] {
            assert_relative_eq!(dot(&w, &ones), 1.0, epsilon = 1e-13);
            assert_relative_eq!(dot(&w, &c), 0.5, epsilon = 1e-13);
            assert_relative_eq!(dot(&w, &c2), 1.0 / 3.0, epsilon = 1e-13);
            assert_relative_eq!(dot(&w, &a_c), 1.0 / 6.0, epsilon = 1e-13);
            if order == 4 {
                assert_relative_eq!(dot(&w, &c3), 0.25, epsilon = 1e-13);
                assert_relative_eq!(dot(&w, &c_ac), 0.125, epsilon = 1e-13);
                assert_relative_eq!(dot(&w, &a_c2), 1.0 / 12.0, epsilon = 1e-13);
                assert_relative_eq!(dot(&w, &a_a_c), 1.0 / 24.0, epsilon = 1e-13);
            }
        }
    }

    struct Linear(DMatrix<f64>);

    impl OdeSystem for Linear {
        fn dim(&self) -> usize {
            self.0.nrows()
        }
        fn rhs(&self, _t: f64, y: &DVector<f64>) -> Result<DVector<f64>> {
            Ok(&self.0 * y)
        }
    }

    #[test]
    fn damped_oscillator_matches_closed_form() {
        // x'' + 2ζω x' + ω² x = 0
        let (omega, zeta) = (3.0, 0.1);
        let sys = Linear(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -omega * omega, -2.0 * zeta * omega]));
        let mut integ = Sdirk4::new(IntegratorOptions {
            rtol: 1e-9,
            atol: 1e-12,
            ..Default::default()
        });
        let y = integ.advance(&sys, 0.0, &DVector::from_vec(vec![1.0, 0.0]), 2.0).unwrap();
        let wd = omega * (1.0 - zeta * zeta).sqrt();
        let t = 2.0;
        let exact = (-zeta * omega * t).exp() * ((wd * t).cos() + zeta * omega / wd * (wd * t).sin());
        assert!((y[0] - exact).abs() < 1e-7, "{} vs {}", y[0], exact);
    }

    #[test]
    fn stiff_decay_takes_large_steps() {
        let sys = Linear(DMatrix::from_row_slice(2, 2, &[-1e8, 0.0, 0.0, -1.0]));
        let mut integ = Sdirk4::new(IntegratorOptions::default());
        let y = integ.advance(&sys, 0.0, &DVector::from_vec(vec![1.0, 1.0]), 5.0).unwrap();
        assert!(y[0].abs() < 1e-8);
        assert_relative_eq!(y[1], (-5.0f64).exp(), max_relative = 1e-5);
        assert!(integ.stats.accepted < 200, "{:?}", integ.stats);
    }

    #[test]
    fn fourth_order_convergence_at_fixed_steps() {
        let sys = Linear(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]));
        let error_with = |n: usize| {
            let h = 1.0 / n as f64;
            let mut integ = Sdirk4::new(IntegratorOptions {
                rtol: 1e3,
                atol: 1e3,
                initial_step: Some(h),
                max_step: h,
                ..Default::default()
            });
            let mut y = DVector::from_vec(vec![1.0, 0.0]);
            for i in 0..n {
                y = integ.advance(&sys, i as f64 * h, &y, (i + 1) as f64 * h).unwrap();
            }
            (y[0] - 1f64.cos()).abs()
        };
        let rate = (error_with(10) / error_with(20)).log2();
        assert!(rate > 3.7 && rate < 4.5, "rate {rate}");
    }

    struct Blowup;

    impl OdeSystem for Blowup {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&self, t: f64, y: &DVector<f64>) -> Result<DVector<f64>> {
            if t > 0.5 {
                return Err(Error::InvalidParameter("beyond domain".into()));
            }
            Ok(y.clone())
        }
    }

    #[test]
    fn persistent_failure_reports_underflow() {
        let mut integ = Sdirk4::new(IntegratorOptions::default());
        let err = integ.advance(&Blowup, 0.0, &DVector::from_vec(vec![1.0]), 1.0).unwrap_err();
        assert!(matches!(err, Error::StepUnderflow { .. }));
    }
}
