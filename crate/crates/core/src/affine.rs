//! 4-DOF similarity transforms between consecutive frames.
//!
//! Convention used throughout the crate: a transform `A` for the frame pair
//! `(i, i + 1)` maps a point in frame `i` screen coordinates to the screen
//! position of the same scene point in frame `i + 1` (`dst = A * src`).
//! Screen coordinates have their origin at the top-left pixel.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Translation, rotation and isotropic scale of a frame-to-frame motion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineParams {
    /// Horizontal translation in pixels.
    pub t_x: f64,
    /// Vertical translation in pixels.
    pub t_y: f64,
    /// Rotation in radians, canonical range `(-pi, pi]`.
    pub theta: f64,
    /// Isotropic scale, strictly positive.
    pub s: f64,
}

impl AffineParams {
    pub const IDENTITY: AffineParams = AffineParams {
        t_x: 0.0,
        t_y: 0.0,
        theta: 0.0,
        s: 1.0,
    };

    pub fn new(t_x: f64, t_y: f64, theta: f64, s: f64) -> Self {
        AffineParams { t_x, t_y, theta, s }
    }

    pub fn translation(t_x: f64, t_y: f64) -> Self {
        AffineParams::new(t_x, t_y, 0.0, 1.0)
    }

    pub fn is_valid(&self) -> bool {
        self.t_x.is_finite()
            && self.t_y.is_finite()
            && self.theta.is_finite()
            && self.s.is_finite()
            && self.s > 0.0
            && self.theta > -PI
            && self.theta <= PI
    }

    pub fn to_matrix(&self) -> AffineMatrix {
        params_to_matrix(self)
    }

    /// Copy with `theta` wrapped into `(-pi, pi]`.
    pub fn canonical(mut self) -> Self {
        self.theta = wrap_angle(self.theta);
        self
    }

    /// Largest absolute component difference, with scale compared directly.
    pub fn max_abs_diff(&self, other: &AffineParams) -> f64 {
        let dtheta = wrap_angle(self.theta - other.theta).abs();
        (self.t_x - other.t_x)
            .abs()
            .max((self.t_y - other.t_y).abs())
            .max(dtheta)
            .max((self.s - other.s).abs())
    }

    pub fn to_line(&self) -> String {
        format!(
            "{:.17e} {:.17e} {:.17e} {:.17e}",
            self.t_x, self.t_y, self.theta, self.s
        )
    }
}

impl Default for AffineParams {
    fn default() -> Self {
        AffineParams::IDENTITY
    }
}

impl fmt::Display for AffineParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_line())
    }
}

impl FromStr for AffineParams {
    type Err = String;

    fn from_str(line: &str) -> std::result::Result<Self, Self::Err> {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(format!("expected 4 fields, found {}", fields.len()));
        }
        let mut v = [0.0f64; 4];
        for (slot, field) in v.iter_mut().zip(&fields) {
            *slot = field
                .parse()
                .map_err(|e| format!("bad number {field:?}: {e}"))?;
        }
        let p = AffineParams::new(v[0], v[1], v[2], v[3]);
        if !p.is_valid() {
            return Err(format!("parameters out of range: {line}"));
        }
        Ok(p)
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let mut t = theta.rem_euclid(2.0 * PI);
    if t > PI {
        t -= 2.0 * PI;
    }
    if t <= -PI {
        t += 2.0 * PI;
    }
    t
}

/// Row-major 2x3 matrix `[[m00, m01, m02], [m10, m11, m12]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMatrix {
    pub m: [[f64; 3]; 2],
}

impl AffineMatrix {
    pub const IDENTITY: AffineMatrix = AffineMatrix {
        m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
    };

    pub fn new(m: [[f64; 3]; 2]) -> Self {
        AffineMatrix { m }
    }

    pub fn translation(t_x: f64, t_y: f64) -> Self {
        AffineMatrix::new([[1.0, 0.0, t_x], [0.0, 1.0, t_y]])
    }

    pub fn apply(&self, pt: (f64, f64)) -> (f64, f64) {
        apply(self, pt)
    }

    pub fn det(&self) -> f64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn inverse(&self) -> Result<AffineMatrix> {
        let det = self.det();
        if !(det.abs() >= 1e-12) {
            return Err(Error::SingularTransform(det));
        }
        let [[a, b, tx], [c, d, ty]] = self.m;
        let ia = d / det;
        let ib = -b / det;
        let ic = -c / det;
        let id = a / det;
        Ok(AffineMatrix::new([
            [ia, ib, -(ia * tx + ib * ty)],
            [ic, id, -(ic * tx + id * ty)],
        ]))
    }

    pub fn max_abs_diff(&self, other: &AffineMatrix) -> f64 {
        self.m
            .iter()
            .flatten()
            .zip(other.m.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl Default for AffineMatrix {
    fn default() -> Self {
        AffineMatrix::IDENTITY
    }
}

/// A point observed at `src` in frame `i` and at `dst` in frame `i + 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub src: (f64, f64),
    pub dst: (f64, f64),
}

impl Correspondence {
    pub fn new(src: (f64, f64), dst: (f64, f64)) -> Self {
        Correspondence { src, dst }
    }

    pub fn is_finite(&self) -> bool {
        self.src.0.is_finite()
            && self.src.1.is_finite()
            && self.dst.0.is_finite()
            && self.dst.1.is_finite()
    }
}

pub fn params_to_matrix(p: &AffineParams) -> AffineMatrix {
    let (sin, cos) = p.theta.sin_cos();
    let a = p.s * cos;
    let b = p.s * sin;
    AffineMatrix::new([[a, -b, p.t_x], [b, a, p.t_y]])
}

pub fn matrix_to_params(a: &AffineMatrix) -> Result<AffineParams> {
    let [[m00, m01, m02], [m10, m11, m12]] = a.m;
    let s = m00.hypot(m10);
    if !(s > 1e-12) || !s.is_finite() {
        return Err(Error::NonSimilarity(format!(
            "zero or non-finite scale {s}"
        )));
    }
    // Columns must be orthogonal with equal norm and no reflection.
    let tol = 1e-6 * s.max(1.0);
    if (m00 - m11).abs() > tol || (m10 + m01).abs() > tol {
        return Err(Error::NonSimilarity(format!(
            "linear block [[{m00}, {m01}], [{m10}, {m11}]]"
        )));
    }
    Ok(AffineParams::new(m02, m12, wrap_angle(m10.atan2(m00)), s))
}

pub fn apply(a: &AffineMatrix, (x, y): (f64, f64)) -> (f64, f64) {
    let m = &a.m;
    (
        m[0][0] * x + m[0][1] * y + m[0][2],
        m[1][0] * x + m[1][1] * y + m[1][2],
    )
}

/// `compose(a, b)` applies `b` first, then `a`.
pub fn compose(a: &AffineMatrix, b: &AffineMatrix) -> AffineMatrix {
    let (p, q) = (&a.m, &b.m);
    let mut m = [[0.0; 3]; 2];
    for r in 0..2 {
        m[r][0] = p[r][0] * q[0][0] + p[r][1] * q[1][0];
        m[r][1] = p[r][0] * q[0][1] + p[r][1] * q[1][1];
        m[r][2] = p[r][0] * q[0][2] + p[r][1] * q[1][2] + p[r][2];
    }
    AffineMatrix::new(m)
}

/// Least-squares 4-DOF similarity minimizing `sum |dst - A src|^2`.
///
/// Solved in closed form on centroid-centered coordinates, where the normal
/// equations in `(a, b) = (s cos theta, s sin theta)` decouple.
pub fn fit_similarity(corrs: &[Correspondence]) -> Result<AffineParams> {
    if corrs.len() < 2 {
        return Err(Error::DegenerateConfiguration(format!(
            "need at least 2 correspondences, got {}",
            corrs.len()
        )));
    }
    if let Some(bad) = corrs.iter().find(|c| !c.is_finite()) {
        return Err(Error::DegenerateConfiguration(format!(
            "non-finite correspondence {bad:?}"
        )));
    }
    let n = corrs.len() as f64;
    let (mut sx, mut sy, mut dx, mut dy) = (0.0, 0.0, 0.0, 0.0);
    for c in corrs {
        sx += c.src.0;
        sy += c.src.1;
        dx += c.dst.0;
        dy += c.dst.1;
    }
    let (sx, sy, dx, dy) = (sx / n, sy / n, dx / n, dy / n);

    let (mut norm, mut dot, mut cross) = (0.0, 0.0, 0.0);
    for c in corrs {
        let (ax, ay) = (c.src.0 - sx, c.src.1 - sy);
        let (bx, by) = (c.dst.0 - dx, c.dst.1 - dy);
        norm += ax * ax + ay * ay;
        dot += ax * bx + ay * by;
        cross += ax * by - ay * bx;
    }
    if !(norm > 1e-12) {
        return Err(Error::DegenerateConfiguration(
            "all source points coincide".into(),
        ));
    }
    let a = dot / norm;
    let b = cross / norm;
    let s = a.hypot(b);
    if !(s > 0.0) {
        return Err(Error::DegenerateConfiguration(
            "all destination points coincide".into(),
        ));
    }
    let t_x = dx - (a * sx - b * sy);
    let t_y = dy - (b * sx + a * sy);
    Ok(AffineParams::new(t_x, t_y, wrap_angle(b.atan2(a)), s))
}

/// Sum of squared residuals of `p` over `corrs`.
pub fn residual_sum(p: &AffineParams, corrs: &[Correspondence]) -> f64 {
    let m = p.to_matrix();
    corrs
        .iter()
        .map(|c| {
            let (x, y) = m.apply(c.src);
            (x - c.dst.0).powi(2) + (y - c.dst.1).powi(2)
        })
        .sum()
}

/// Conjugates `p` into a coordinate system whose origin sits at `origin`
/// (old coordinates) and whose unit is `1 / factor` old pixels.
///
/// For `q = factor * (x - origin)`, the returned params map `q_i` to `q_{i+1}`.
pub fn change_frame(p: &AffineParams, origin: (f64, f64), factor: f64) -> AffineParams {
    let to_new = AffineMatrix::new([
        [factor, 0.0, -factor * origin.0],
        [0.0, factor, -factor * origin.1],
    ]);
    let to_old = AffineMatrix::new([[1.0 / factor, 0.0, origin.0], [0.0, 1.0 / factor, origin.1]]);
    let m = compose(&to_new, &compose(&p.to_matrix(), &to_old));
    // Conjugation by a similarity keeps the similarity structure exactly
    // up to rounding, so read the parameters directly.
    let [[m00, _, m02], [m10, _, m12]] = m.m;
    AffineParams::new(m02, m12, p.theta, m00.hypot(m10))
}
