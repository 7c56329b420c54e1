//! Camera trajectory accumulation and envelope + Savitzky-Golay smoothing.
//!
//! A trajectory holds four cumulative series (`t_x`, `t_y`, `theta`,
//! `log s`). Scale lives in log space so that accumulation is additive.

use nalgebra::{DMatrix, DVector};

use crate::affine::{wrap_angle, AffineParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub t_x: Vec<f64>,
    pub t_y: Vec<f64>,
    pub theta: Vec<f64>,
    pub log_s: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t_x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_x.is_empty()
    }

    pub fn series(&self) -> [&[f64]; 4] {
        [&self.t_x, &self.t_y, &self.theta, &self.log_s]
    }

    pub fn from_series(series: [Vec<f64>; 4]) -> Self {
        let [t_x, t_y, theta, log_s] = series;
        debug_assert!(
            t_y.len() == t_x.len() && theta.len() == t_x.len() && log_s.len() == t_x.len()
        );
        Trajectory {
            t_x,
            t_y,
            theta,
            log_s,
        }
    }

    /// Sample `i` as parameters (scale exponentiated).
    pub fn params_at(&self, i: usize) -> AffineParams {
        AffineParams::new(self.t_x[i], self.t_y[i], self.theta[i], self.log_s[i].exp())
    }

    /// Same trajectory with a leading zero sample for the reference frame.
    pub fn with_origin(&self) -> Trajectory {
        let prepend = |v: &[f64]| std::iter::once(0.0).chain(v.iter().copied()).collect();
        Trajectory::from_series([
            prepend(&self.t_x),
            prepend(&self.t_y),
            prepend(&self.theta),
            prepend(&self.log_s),
        ])
    }

    /// Per-pair motion that accumulates back to this trajectory.
    pub fn differences(&self) -> Vec<AffineParams> {
        (0..self.len())
            .map(|i| {
                let prev = |v: &[f64]| if i == 0 { 0.0 } else { v[i - 1] };
                AffineParams::new(
                    self.t_x[i] - prev(&self.t_x),
                    self.t_y[i] - prev(&self.t_y),
                    wrap_angle(self.theta[i] - prev(&self.theta)),
                    (self.log_s[i] - prev(&self.log_s)).exp(),
                )
            })
            .collect()
    }
}

/// Prefix sums of the per-pair parameters (`log s` for scale).
pub fn accumulate(params: &[AffineParams]) -> Result<Trajectory> {
    if params.is_empty() {
        return Err(Error::SignalTooShort { len: 0, min: 1 });
    }
    let mut acc = [0.0f64; 4];
    let mut out: [Vec<f64>; 4] = Default::default();
    for p in params {
        let v = [p.t_x, p.t_y, p.theta, p.s.ln()];
        for k in 0..4 {
            acc[k] += v[k];
            out[k].push(acc[k]);
        }
    }
    Ok(Trajectory::from_series(out))
}

/// Local maxima and minima via the sign of the forward difference.
///
/// A plateau counts once, at its first index. Both endpoints are always
/// reported in both lists.
pub fn find_extrema(signal: &[f64]) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = signal.len();
    if n < 3 {
        return Err(Error::SignalTooShort { len: n, min: 3 });
    }
    let mut maxima = vec![0];
    let mut minima = vec![0];
    for i in 1..n - 1 {
        if signal[i] == signal[i - 1] {
            continue;
        }
        let Some(j) = (i + 1..n).find(|&j| signal[j] != signal[i]) else {
            break;
        };
        let rising = signal[i] > signal[i - 1];
        let falling_after = signal[j] < signal[i];
        if rising && falling_after {
            maxima.push(i);
        } else if !rising && !falling_after {
            minima.push(i);
        }
    }
    maxima.push(n - 1);
    minima.push(n - 1);
    Ok((maxima, minima))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopePair {
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
}

impl EnvelopePair {
    pub fn mean(&self) -> Vec<f64> {
        self.upper
            .iter()
            .zip(&self.lower)
            .map(|(u, l)| 0.5 * (u + l))
            .collect()
    }
}

/// Upper/lower envelopes through the maxima/minima knots.
pub fn envelope(signal: &[f64]) -> Result<EnvelopePair> {
    let (maxima, minima) = find_extrema(signal)?;
    let mut upper = interpolate_knots(&maxima, signal);
    let mut lower = interpolate_knots(&minima, signal);
    for (u, l) in upper.iter_mut().zip(lower.iter_mut()) {
        if *u < *l {
            std::mem::swap(u, l);
        }
    }
    Ok(EnvelopePair { upper, lower })
}

/// Piecewise-quadratic interpolation through `(k, signal[k])` evaluated at
/// every index. The interval `[k_j, k_{j+1}]` uses the parabola through
/// knots `j, j+1, j+2` (shifted left at the end). Fewer than 3 knots falls
/// back to linear.
fn interpolate_knots(knots: &[usize], signal: &[f64]) -> Vec<f64> {
    let n = signal.len();
    let m = knots.len();
    let mut out = vec![0.0; n];
    for j in 0..m - 1 {
        let (a, b) = (knots[j], knots[j + 1]);
        for (x, slot) in out.iter_mut().enumerate().take(b + 1).skip(a) {
            *slot = if m < 3 {
                let t = (x - a) as f64 / (b - a) as f64;
                signal[a] + t * (signal[b] - signal[a])
            } else {
                let s = j.min(m - 3);
                lagrange3(
                    [knots[s], knots[s + 1], knots[s + 2]].map(|k| (k as f64, signal[k])),
                    x as f64,
                )
            };
        }
    }
    out
}

fn lagrange3(pts: [(f64, f64); 3], x: f64) -> f64 {
    let [(x0, y0), (x1, y1), (x2, y2)] = pts;
    y0 * (x - x1) * (x - x2) / ((x0 - x1) * (x0 - x2))
        + y1 * (x - x0) * (x - x2) / ((x1 - x0) * (x1 - x2))
        + y2 * (x - x0) * (x - x1) / ((x2 - x0) * (x2 - x1))
}

/// Savitzky-Golay smoothing with the window clamped to the signal length.
pub fn savitzky_golay(signal: &[f64], window: usize, polyorder: usize) -> Result<Vec<f64>> {
    savitzky_golay_with(signal, window, polyorder, true)
}

/// Savitzky-Golay smoothing.
///
/// Interior samples take the value at the center of the least-squares
/// polynomial over the centered window. The first and last `window / 2`
/// samples evaluate the polynomial fitted to the first (last) full window
/// at their own position.
pub fn savitzky_golay_with(
    signal: &[f64],
    window: usize,
    polyorder: usize,
    clamp_window: bool,
) -> Result<Vec<f64>> {
    let n = signal.len();
    if n == 0 {
        return Err(Error::SignalTooShort { len: 0, min: 1 });
    }
    let mut w = window;
    if clamp_window && w > n {
        w = if n % 2 == 1 { n } else { n - 1 };
    }
    if w % 2 == 0 || w < polyorder + 1 || w > n {
        return Err(Error::BadWindow {
            window: w,
            polyorder,
        });
    }
    let h = w / 2;
    let coeffs = SavgolCoefficients::new(w, polyorder);
    let dot = |c: &[f64], start: usize| -> f64 {
        c.iter()
            .zip(&signal[start..start + w])
            .map(|(a, b)| a * b)
            .sum()
    };
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let v = if i < h {
            dot(&coeffs.at[i], 0)
        } else if i + h >= n {
            dot(&coeffs.at[w - (n - i)], n - w)
        } else {
            dot(&coeffs.at[h], i - h)
        };
        out.push(v);
    }
    Ok(out)
}

/// `at[e][j]`: weight of window sample `j` for the fit evaluated at window
/// position `e`.
struct SavgolCoefficients {
    at: Vec<Vec<f64>>,
}

impl SavgolCoefficients {
    fn new(window: usize, polyorder: usize) -> Self {
        let h = (window / 2) as f64;
        let scale = h.max(1.0);
        // Vandermonde on positions centered and scaled into [-1, 1].
        let xs: Vec<f64> = (0..window).map(|j| (j as f64 - h) / scale).collect();
        let vander = DMatrix::from_fn(window, polyorder + 1, |r, c| xs[r].powi(c as i32));
        let normal = vander.transpose() * &vander;
        let chol = normal
            .cholesky()
            .expect("Vandermonde normal matrix is positive definite for window > polyorder");
        let at = xs
            .iter()
            .map(|&x| {
                let basis = DVector::from_fn(polyorder + 1, |c, _| x.powi(c as i32));
                let a = chol.solve(&basis);
                (&vander * a).iter().copied().collect()
            })
            .collect();
        SavgolCoefficients { at }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingConfig {
    pub window: usize,
    pub polyorder: usize,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        SmoothingConfig {
            window: 51,
            polyorder: 1,
        }
    }
}

/// Result of [`smooth_trajectory_full`].
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedTrajectory {
    /// Measured trajectory `T_hat`.
    pub raw: Trajectory,
    /// Smoothed trajectory `T_tilde`.
    pub smooth: Trajectory,
    /// `delta = T_hat - T_tilde`, per series.
    pub delta: Trajectory,
    /// Smoothed per-pair motion; accumulates exactly to `smooth`.
    pub params: Vec<AffineParams>,
}

impl SmoothedTrajectory {
    /// Trajectory-space correction `T_tilde_i - T_hat_i` at sample `i`.
    pub fn correction(&self, i: usize) -> AffineParams {
        AffineParams::new(
            -self.delta.t_x[i],
            -self.delta.t_y[i],
            -self.delta.theta[i],
            (-self.delta.log_s[i]).exp(),
        )
    }
}

fn smooth_series(raw: &[f64], cfg: &SmoothingConfig) -> Result<Vec<f64>> {
    let env = envelope(raw)?;
    savitzky_golay(&env.mean(), cfg.window, cfg.polyorder)
}

pub fn smooth_trajectory_full(
    traj: &Trajectory,
    cfg: &SmoothingConfig,
) -> Result<SmoothedTrajectory> {
    if traj.len() < 3 {
        return Err(Error::SignalTooShort {
            len: traj.len(),
            min: 3,
        });
    }
    let [tx, ty, th, ls] = traj.series();
    let smoothed = [
        smooth_series(tx, cfg)?,
        smooth_series(ty, cfg)?,
        smooth_series(th, cfg)?,
        smooth_series(ls, cfg)?,
    ];
    let delta: [Vec<f64>; 4] = std::array::from_fn(|k| {
        traj.series()[k]
            .iter()
            .zip(&smoothed[k])
            .map(|(a, b)| a - b)
            .collect()
    });
    let smooth = Trajectory::from_series(smoothed);
    let delta = Trajectory::from_series(delta);
    // x_tilde_i = x_hat_i - (delta_i - delta_{i-1}), i.e. the first
    // differences of T_tilde.
    let params = smooth.differences();
    Ok(SmoothedTrajectory {
        raw: traj.clone(),
        smooth,
        delta,
        params,
    })
}

/// `(T_tilde, X_tilde)` for the given window and polynomial order.
pub fn smooth_trajectory(
    traj: &Trajectory,
    window: usize,
    polyorder: usize,
) -> Result<(Trajectory, Vec<AffineParams>)> {
    let out = smooth_trajectory_full(traj, &SmoothingConfig { window, polyorder })?;
    Ok((out.smooth, out.params))
}

/// CSV dump with columns `frame, tx_hat, ty_hat, th_hat, logs_hat,
/// tx_tilde, ty_tilde, th_tilde, logs_tilde`; row `i` is frame
/// `first_frame + i`.
pub fn trajectory_csv(raw: &Trajectory, smooth: &Trajectory, first_frame: usize) -> String {
    use std::fmt::Write;
    let mut s =
        String::from("frame,tx_hat,ty_hat,th_hat,logs_hat,tx_tilde,ty_tilde,th_tilde,logs_tilde\n");
    for i in 0..raw.len() {
        let _ = writeln!(
            s,
            "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
            first_frame + i,
            raw.t_x[i],
            raw.t_y[i],
            raw.theta[i],
            raw.log_s[i],
            smooth.t_x[i],
            smooth.t_y[i],
            smooth.theta[i],
            smooth.log_s[i]
        );
    }
    s
}
