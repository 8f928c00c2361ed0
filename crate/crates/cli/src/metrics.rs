//! Headline metrics of a run, raw and after low-order polynomial smoothing.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

/// Degree of the smoothing polynomial fitted to time profiles.
pub const SMOOTHING_DEGREE: usize = 5;

/// Samples used to evaluate smoothed profiles.
const FINE_SAMPLES: usize = 2001;

/// Least-squares polynomial fitted on `t` mapped to `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct PolyFit {
    coeffs: Vec<f64>,
    center: f64,
    half_width: f64,
}

impl PolyFit {
    /// `None` when there are too few samples for the degree.
    pub fn fit(t: &[f64], y: &[f64], degree: usize) -> Option<Self> {
        if t.len() != y.len() || t.len() <= degree {
            return None;
        }
        let (lo, hi) = (t[0], t[t.len() - 1]);
        let center = 0.5 * (lo + hi);
        let half_width = (0.5 * (hi - lo)).max(f64::MIN_POSITIVE);
        let a = DMatrix::from_fn(t.len(), degree + 1, |i, j| ((t[i] - center) / half_width).powi(j as i32));
        let b = DVector::from_column_slice(y);
        let coeffs = a.svd(true, true).solve(&b, 1e-14).ok()?;
        Some(PolyFit {
            coeffs: coeffs.iter().copied().collect(),
            center,
            half_width,
        })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let x = (t - self.center) / self.half_width;
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }
}

/// One output time of a dynamic run, as needed by the metrics.
#[derive(Clone, Debug)]
pub struct Sample {
    pub t: f64,
    pub length: f64,
    pub delta_volume: f64,
    /// Position and material speed of the bend point, when one exists.
    pub bend: Option<([f64; 3], f64)>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Extent {
    pub start: f64,
    pub end: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Peak {
    pub value: f64,
    pub time: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct DynamicMetrics {
    pub elongation: Extent,
    pub elongation_smoothed: Option<Extent>,
    /// Path length of the bend-point trajectory (m).
    pub bend_travel: f64,
    pub bend_travel_smoothed: Option<f64>,
    /// Peak material speed at the bend point (m/s).
    pub bend_speed_peak: Option<Peak>,
    pub bend_speed_peak_smoothed: Option<Peak>,
    /// Interior local maxima of the smoothed speed profile; one for a bell shape.
    pub bend_speed_interior_maxima: Option<usize>,
    /// First and last output time with a bend point.
    pub bend_window: Option<[f64; 2]>,
    pub max_abs_delta_volume: f64,
    pub delta_volume_range: [f64; 2],
}

fn extent(values: impl Iterator<Item = f64> + Clone) -> Extent {
    let first = values.clone().next().unwrap_or(f64::NAN);
    let last = values.clone().last().unwrap_or(f64::NAN);
    let min = values.clone().fold(f64::INFINITY, f64::min);
    let max = values.fold(f64::NEG_INFINITY, f64::max);
    Extent {
        start: first,
        end: last,
        min,
        max,
    }
}

fn fine_grid(lo: f64, hi: f64) -> impl Iterator<Item = f64> + Clone {
    (0..FINE_SAMPLES).map(move |k| lo + (hi - lo) * k as f64 / (FINE_SAMPLES - 1) as f64)
}

/// Strict interior local maxima of a sampled profile.
pub fn interior_maxima(values: &[f64]) -> usize {
    values
        .windows(3)
        .filter(|w| w[1] > w[0] && w[1] > w[2])
        .count()
}

pub fn dynamic_metrics(samples: &[Sample]) -> DynamicMetrics {
    let mut m = DynamicMetrics::default();
    if samples.is_empty() {
        return m;
    }
    let t: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let length: Vec<f64> = samples.iter().map(|s| s.length).collect();
    m.elongation = extent(length.iter().copied());
    m.elongation_smoothed = PolyFit::fit(&t, &length, SMOOTHING_DEGREE).map(|fit| {
        extent(fine_grid(t[0], t[t.len() - 1]).map(move |x| fit.eval(x)))
    });

    let dv = samples.iter().map(|s| s.delta_volume);
    let lo = dv.clone().fold(f64::INFINITY, f64::min);
    let hi = dv.fold(f64::NEG_INFINITY, f64::max);
    m.delta_volume_range = [lo, hi];
    m.max_abs_delta_volume = lo.abs().max(hi.abs());

    let bends: Vec<(f64, [f64; 3], f64)> = samples
        .iter()
        .filter_map(|s| s.bend.map(|(p, v)| (s.t, p, v)))
        .collect();
    if bends.is_empty() {
        return m;
    }
    // travel sums only over consecutive outputs that both have a bend point
    m.bend_travel = samples
        .windows(2)
        .filter_map(|w| match (w[0].bend, w[1].bend) {
            (Some((a, _)), Some((b, _))) => Some(((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2) + (b[2] - a[2]).powi(2)).sqrt()),
            _ => None,
        })
        .sum();
    let peak = bends
        .iter()
        .fold(None::<Peak>, |best, &(t, _, v)| match best {
            Some(b) if b.value >= v => Some(b),
            _ => Some(Peak { value: v, time: t }),
        });
    m.bend_speed_peak = peak;
    let (t0, t1) = (bends[0].0, bends[bends.len() - 1].0);
    m.bend_window = Some([t0, t1]);

    let bt: Vec<f64> = bends.iter().map(|b| b.0).collect();
    let fits: Option<Vec<PolyFit>> = (0..3)
        .map(|k| {
            let y: Vec<f64> = bends.iter().map(|b| b.1[k]).collect();
            PolyFit::fit(&bt, &y, SMOOTHING_DEGREE)
        })
        .collect();
    if let Some(fits) = fits {
        let points: Vec<[f64; 3]> = fine_grid(t0, t1).map(|x| [fits[0].eval(x), fits[1].eval(x), fits[2].eval(x)]).collect();
        m.bend_travel_smoothed = Some(
            points
                .windows(2)
                .map(|w| ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2) + (w[1][2] - w[0][2]).powi(2)).sqrt())
                .sum(),
        );
    }
    let speed: Vec<f64> = bends.iter().map(|b| b.2).collect();
    if let Some(fit) = PolyFit::fit(&bt, &speed, SMOOTHING_DEGREE) {
        let grid: Vec<f64> = fine_grid(t0, t1).collect();
        let values: Vec<f64> = grid.iter().map(|&x| fit.eval(x)).collect();
        let (i, &v) = values
            .iter()
            .enumerate()
            .fold((0, &f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best });
        m.bend_speed_peak_smoothed = Some(Peak { value: v, time: grid[i] });
        m.bend_speed_interior_maxima = Some(interior_maxima(&values));
    }
    m
}

/// Secant stiffness `F/ΔL` of a compressed rod whose length dropped by `shortening`.
/// A rod that does not shorten under load is rigid (`+∞`); with no load the
/// ratio is undefined (`NaN`).
pub fn secant_stiffness(force: f64, shortening: f64) -> f64 {
    if force == 0.0 {
        f64::NAN
    } else if shortening <= 0.0 {
        f64::INFINITY
    } else {
        force / shortening
    }
}

/// Least-squares slope of `force` against `shortening` (with intercept).
pub fn fitted_slope(shortening: &[f64], force: &[f64]) -> Option<f64> {
    let n = shortening.len() as f64;
    if shortening.len() < 2 || shortening.len() != force.len() {
        return None;
    }
    let mx = shortening.iter().sum::<f64>() / n;
    let my = force.iter().sum::<f64>() / n;
    let sxx: f64 = shortening.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = shortening.iter().zip(force).map(|(x, y)| (x - mx) * (y - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polyfit_reproduces_polynomials() {
        let t: Vec<f64> = (0..50).map(|k| 0.07 * k as f64).collect();
        let p = |x: f64| 0.3 - 1.2 * x + 0.5 * x.powi(3) - 0.02 * x.powi(5);
        let y: Vec<f64> = t.iter().map(|&x| p(x)).collect();
        let fit = PolyFit::fit(&t, &y, 5).unwrap();
        for x in [0.0, 0.4, 1.7, 3.43] {
            assert!((fit.eval(x) - p(x)).abs() < 1e-10);
        }
        assert!(PolyFit::fit(&t[..5], &y[..5], 5).is_none());
    }

    #[test]
    fn straight_bend_path_travel_is_its_length() {
        // bend point moving along a line at a bell-shaped speed
        let samples: Vec<Sample> = (0..=100)
            .map(|k| {
                let t = 0.01 * k as f64;
                let x = 0.4 * (3.0 * t * t - 2.0 * t * t * t);
                let v = 0.4 * (6.0 * t - 6.0 * t * t);
                Sample {
                    t,
                    length: 0.5 + 0.1 * t,
                    delta_volume: -0.01 * t,
                    bend: Some(([x, 0.0, 0.0], v)),
                }
            })
            .collect();
        let m = dynamic_metrics(&samples);
        assert!((m.bend_travel - 0.4).abs() < 1e-12);
        assert!((m.bend_travel_smoothed.unwrap() - 0.4).abs() < 1e-9);
        let peak = m.bend_speed_peak_smoothed.unwrap();
        assert!((peak.value - 0.6).abs() < 1e-9 && (peak.time - 0.5).abs() < 1e-3);
        assert_eq!(m.bend_speed_interior_maxima, Some(1));
        assert!((m.elongation.end - 0.6).abs() < 1e-12);
        assert!((m.max_abs_delta_volume - 0.01).abs() < 1e-12);
    }

    #[test]
    fn travel_skips_gaps_without_bend() {
        let mk = |t: f64, x: Option<f64>| Sample {
            t,
            length: 0.5,
            delta_volume: 0.0,
            bend: x.map(|x| ([x, 0.0, 0.0], 0.0)),
        };
        let samples = [mk(0.0, Some(0.0)), mk(0.1, Some(0.1)), mk(0.2, None), mk(0.3, Some(5.0)), mk(0.4, Some(5.2))];
        assert!((dynamic_metrics(&samples).bend_travel - 0.3).abs() < 1e-12);
    }

    #[test]
    fn stiffness_edge_cases() {
        assert!(secant_stiffness(0.0, 0.0).is_nan());
        assert_eq!(secant_stiffness(1.0, 0.0), f64::INFINITY);
        assert_eq!(secant_stiffness(1.0, -1e-9), f64::INFINITY);
        assert_eq!(secant_stiffness(2.0, 0.5), 4.0);
        assert!((fitted_slope(&[1.0, 2.0, 4.0], &[4.0, 7.0, 13.0]).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(fitted_slope(&[0.0], &[1.0]), None);
        assert_eq!(fitted_slope(&[1.0, 1.0], &[1.0, 2.0]), None);
    }

    #[test]
    fn interior_maxima_counts_humps() {
        assert_eq!(interior_maxima(&[0.0, 1.0, 0.0, 2.0, 1.0]), 2);
        assert_eq!(interior_maxima(&[0.0, 1.0, 2.0]), 0);
    }
}
