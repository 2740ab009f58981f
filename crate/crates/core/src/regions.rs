//! Star-shaped regions `Ω = {v : ‖v‖ < ν(v/‖v‖)}` and their dilates `TΩ`.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Result};
use crate::linalg::{dot, inverse};
use crate::scalar::{dyadic, Rational};

/// Outcome of a strict-inequality test at a point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Inside,
    Outside,
    /// Within the floating tolerance of the boundary; counted and flagged.
    Boundary,
}

impl Verdict {
    pub fn counts(self) -> bool {
        !matches!(self, Verdict::Outside)
    }

    pub fn and(self, other: Verdict) -> Verdict {
        match (self, other) {
            (Verdict::Outside, _) | (_, Verdict::Outside) => Verdict::Outside,
            (Verdict::Boundary, _) | (_, Verdict::Boundary) => Verdict::Boundary,
            _ => Verdict::Inside,
        }
    }
}

pub(crate) const BOUNDARY_TOL: f64 = 1e-9;

/// Radial function sampled on the sphere and interpolated with a von Mises
/// kernel, `ν(u) = Σ w_k(u) ν_k` with `w_k ∝ exp(κ⟨u, u_k⟩)`. The result is
/// continuous, positive and bounded by `max ν_k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableFunction {
    pub directions: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub concentration: f64,
}

impl TableFunction {
    pub fn new(directions: Vec<Vec<f64>>, values: Vec<f64>, concentration: f64) -> Result<Self> {
        if directions.is_empty() || directions.len() != values.len() {
            return Err(invalid("table needs one value per direction"));
        }
        let n = directions[0].len();
        let mut dirs = Vec::with_capacity(directions.len());
        for d in directions {
            check_dim(n, d.len())?;
            let len = dot(&d, &d).sqrt();
            if !(len > 0.0) {
                return Err(invalid("table direction must be nonzero"));
            }
            dirs.push(d.iter().map(|x| x / len).collect());
        }
        if values.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(invalid("table values must be positive and finite"));
        }
        if !(concentration >= 0.0) || !concentration.is_finite() {
            return Err(invalid("table concentration must be a finite nonnegative number"));
        }
        Ok(TableFunction { directions: dirs, values, concentration })
    }

    pub fn dim(&self) -> usize {
        self.directions[0].len()
    }

    pub fn eval(&self, u: &[f64]) -> f64 {
        let logits: Vec<f64> =
            self.directions.iter().map(|d| self.concentration * dot(d, u)).collect();
        let top = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut num = 0.0;
        let mut den = 0.0;
        for (l, v) in logits.iter().zip(&self.values) {
            let w = (l - top).exp();
            num += w * v;
            den += w;
        }
        num / den
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StarRegion {
    /// `ν ≡ radius`.
    Ball { dim: usize, radius: f64 },
    /// `Ω = {x : xᵀPx < 1}` for positive-definite `P`.
    Ellipsoid { matrix: Vec<Vec<f64>> },
    /// `Ω = {x ∈ ℝ⁴ : max(B₁(x₁,x₂), B₂(x₃,x₄)) < 1}` for positive-definite
    /// binary forms `B₁`, `B₂` given by their 2×2 matrices.
    MaxSplit { first: [[f64; 2]; 2], second: [[f64; 2]; 2] },
    Table(TableFunction),
}

fn is_positive_definite(m: &[Vec<f64>]) -> bool {
    let n = m.len();
    if m.iter().any(|r| r.len() != n || r.iter().any(|x| !x.is_finite())) {
        return false;
    }
    for i in 0..n {
        for j in 0..i {
            if m[i][j] != m[j][i] {
                return false;
            }
        }
    }
    DMatrix::from_fn(n, n, |i, j| m[i][j]).cholesky().is_some()
}

fn min_eigenvalue(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    DMatrix::from_fn(n, n, |i, j| m[i][j])
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

fn binary(m: &[[f64; 2]; 2]) -> Vec<Vec<f64>> {
    vec![m[0].to_vec(), m[1].to_vec()]
}

fn bq(m: &[[f64; 2]; 2], x: f64, y: f64) -> f64 {
    m[0][0] * x * x + (m[0][1] + m[1][0]) * x * y + m[1][1] * y * y
}

impl StarRegion {
    pub fn ball(dim: usize, radius: f64) -> Result<Self> {
        let r = StarRegion::Ball { dim, radius };
        r.validate()?;
        Ok(r)
    }

    pub fn ellipsoid(matrix: Vec<Vec<f64>>) -> Result<Self> {
        let r = StarRegion::Ellipsoid { matrix };
        r.validate()?;
        Ok(r)
    }

    pub fn max_split(first: [[f64; 2]; 2], second: [[f64; 2]; 2]) -> Result<Self> {
        let r = StarRegion::MaxSplit { first, second };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            StarRegion::Ball { dim, radius } => {
                if *dim == 0 || !(*radius > 0.0) || !radius.is_finite() {
                    return Err(invalid("ball needs positive dimension and radius"));
                }
            }
            StarRegion::Ellipsoid { matrix } => {
                if matrix.is_empty() || !is_positive_definite(matrix) {
                    return Err(invalid("ellipsoid matrix must be symmetric positive definite"));
                }
            }
            StarRegion::MaxSplit { first, second } => {
                if !is_positive_definite(&binary(first)) || !is_positive_definite(&binary(second)) {
                    return Err(invalid("max-split blocks must be symmetric positive definite"));
                }
            }
            StarRegion::Table(t) => {
                TableFunction::new(t.directions.clone(), t.values.clone(), t.concentration)?;
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            StarRegion::Ball { dim, .. } => *dim,
            StarRegion::Ellipsoid { matrix } => matrix.len(),
            StarRegion::MaxSplit { .. } => 4,
            StarRegion::Table(t) => t.dim(),
        }
    }

    /// `ν(u)` for a unit vector `u`.
    pub fn radial(&self, u: &[f64]) -> f64 {
        match self {
            StarRegion::Ball { radius, .. } => *radius,
            StarRegion::Table(t) => t.eval(u),
            _ => 1.0 / self.gauge(u).sqrt(),
        }
    }

    /// For the quadratic regions, `g` with `TΩ = {g(x) < T²}`.
    fn gauge(&self, x: &[f64]) -> f64 {
        match self {
            StarRegion::Ball { radius, .. } => dot(x, x) / (radius * radius),
            StarRegion::Ellipsoid { matrix } => {
                let mut acc = 0.0;
                for (i, row) in matrix.iter().enumerate() {
                    acc += x[i] * dot(row, x);
                }
                acc
            }
            StarRegion::MaxSplit { first, second } => {
                bq(first, x[0], x[1]).max(bq(second, x[2], x[3]))
            }
            StarRegion::Table(_) => unreachable!("table regions have no quadratic gauge"),
        }
    }

    pub fn max_radial(&self) -> f64 {
        match self {
            StarRegion::Ball { radius, .. } => *radius,
            StarRegion::Ellipsoid { matrix } => 1.0 / min_eigenvalue(matrix).sqrt(),
            StarRegion::MaxSplit { first, second } => {
                (1.0 / min_eigenvalue(&binary(first)) + 1.0 / min_eigenvalue(&binary(second)))
                    .sqrt()
            }
            StarRegion::Table(t) => t.max_value(),
        }
    }

    /// Per-coordinate half-widths `h` with `TΩ ⊂ ∏ [−h_i, h_i]`.
    pub fn half_widths(&self, t: f64) -> Vec<f64> {
        let n = self.dim();
        match self {
            StarRegion::Ellipsoid { matrix } => {
                let inv = inverse(matrix).expect("validated positive-definite matrix");
                (0..n).map(|i| t * inv[i][i].sqrt()).collect()
            }
            StarRegion::MaxSplit { first, second } => {
                let w = |m: &[[f64; 2]; 2]| {
                    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
                    [t * (m[1][1] / det).sqrt(), t * (m[0][0] / det).sqrt()]
                };
                let (a, b) = (w(first), w(second));
                vec![a[0], a[1], b[0], b[1]]
            }
            _ => vec![t * self.max_radial(); n],
        }
    }

    /// `x ∈ TΩ ⇔ ‖x‖ < T·ν(x/‖x‖)`; the origin is inside for every `T > 0`.
    pub fn contains(&self, x: &[f64], t: f64) -> bool {
        if x.iter().all(|v| *v == 0.0) {
            return t > 0.0;
        }
        match self {
            StarRegion::Table(tf) => {
                let len = dot(x, x).sqrt();
                let u: Vec<f64> = x.iter().map(|v| v / len).collect();
                len < t * tf.eval(&u)
            }
            _ => self.gauge(x) < t * t,
        }
    }

    /// Membership of an integer point. With `exact`, the quadratic regions
    /// are decided exactly (their parameters are read as dyadic rationals);
    /// otherwise points within `1e-9` (relative) of the boundary are
    /// reported as [`Verdict::Boundary`].
    pub fn classify_integer(&self, x: &[i64], t: f64, exact: bool) -> Verdict {
        if x.iter().all(|v| *v == 0) {
            return Verdict::Inside;
        }
        let xf: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        let (lhs, rhs) = match self {
            StarRegion::Table(tf) => {
                let len = dot(&xf, &xf).sqrt();
                let u: Vec<f64> = xf.iter().map(|v| v / len).collect();
                (len, t * tf.eval(&u))
            }
            _ => (self.gauge(&xf), t * t),
        };
        let tol = BOUNDARY_TOL * rhs.abs().max(1.0);
        if lhs < rhs - tol {
            return Verdict::Inside;
        }
        if lhs > rhs + tol {
            return Verdict::Outside;
        }
        if exact && !matches!(self, StarRegion::Table(_)) {
            let t2 = dyadic(t).unwrap();
            let t2 = &t2 * &t2;
            return if self.exact_gauge(x) < t2 { Verdict::Inside } else { Verdict::Outside };
        }
        Verdict::Boundary
    }

    fn exact_gauge(&self, x: &[i64]) -> Rational {
        let xi: Vec<Rational> = x.iter().map(|&v| Rational::from_integer(BigInt::from(v))).collect();
        let quad = |m: &[Vec<f64>], v: &[Rational]| {
            let mut acc = Rational::zero();
            for i in 0..v.len() {
                for j in 0..v.len() {
                    acc += &v[i] * &v[j] * dyadic(m[i][j]).unwrap();
                }
            }
            acc
        };
        match self {
            StarRegion::Ball { radius, .. } => {
                let r = dyadic(*radius).unwrap();
                xi.iter().map(|v| v * v).fold(Rational::zero(), |a, b| a + b) / (&r * &r)
            }
            StarRegion::Ellipsoid { matrix } => quad(matrix, &xi),
            StarRegion::MaxSplit { first, second } => {
                let a = quad(&binary(first), &xi[0..2]);
                let b = quad(&binary(second), &xi[2..4]);
                if a > b {
                    a
                } else {
                    b
                }
            }
            StarRegion::Table(_) => unreachable!("table regions have no exact gauge"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_membership_is_strict() {
        let b = StarRegion::ball(4, 1.0).unwrap();
        let t = 6.0;
        assert!(b.contains(&[t / 2.0, 0.0, 0.0, 0.0], t));
        assert!(!b.contains(&[t, 0.0, 0.0, 0.0], t));
        assert!(b.contains(&[0.0; 4], 1e-9));
        assert_eq!(b.classify_integer(&[6, 0, 0, 0], t, true), Verdict::Outside);
        assert_eq!(b.classify_integer(&[6, 0, 0, 0], t, false), Verdict::Boundary);
        assert_eq!(b.classify_integer(&[5, 3, 0, 0], t, true), Verdict::Inside);
    }

    #[test]
    fn max_split_membership() {
        let id = [[1.0, 0.0], [0.0, 1.0]];
        let r = StarRegion::max_split(id, id).unwrap();
        assert!(r.contains(&[0.9, 0.0, 0.0, 0.5], 1.0));
        assert!(!r.contains(&[0.0, 0.0, 1.1, 0.0], 1.0));
        assert!((r.max_radial() - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn half_widths_bound_the_region() {
        let p = vec![vec![2.0, 0.5, 0.0], vec![0.5, 1.0, 0.2], vec![0.0, 0.2, 0.5]];
        let e = StarRegion::ellipsoid(p).unwrap();
        let h = e.half_widths(3.0);
        let mut rng = 12345u64;
        for _ in 0..20000 {
            let mut x = [0.0; 3];
            for (k, xk) in x.iter_mut().enumerate() {
                rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                *xk = ((rng >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0) * h[k] * 1.5;
            }
            if e.contains(&x, 3.0) {
                assert!(x.iter().zip(&h).all(|(v, w)| v.abs() <= *w));
            }
        }
    }

    #[test]
    fn table_interpolation_is_bounded() {
        let dirs = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![-1.0, -1.0, -1.0]];
        let t = TableFunction::new(dirs, vec![1.0, 2.0, 0.5, 1.5], 3.0).unwrap();
        for u in [[1.0, 0.0, 0.0], [0.0, 0.6, 0.8], [-0.6, 0.0, 0.8]] {
            let v = t.eval(&u);
            assert!(v > 0.0 && v <= 2.0);
        }
        assert!(TableFunction::new(vec![vec![1.0, 0.0, 0.0]], vec![0.0], 1.0).is_err());
    }

    #[test]
    fn invalid_regions_are_rejected() {
        assert!(StarRegion::ball(3, -1.0).is_err());
        assert!(StarRegion::ellipsoid(vec![vec![1.0, 0.0], vec![0.0, -1.0]]).is_err());
    }
}
