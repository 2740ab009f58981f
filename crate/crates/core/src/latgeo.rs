//! Geometry of numbers on (inhomogeneous) lattices: theta transforms, the
//! shift average, α-functions and their moments along `a_t K` orbits.
//!
//! `d(L)` is the covolume of `L ∩ Δ` and `α_i(Δ) = sup 1/d(L)` over
//! `Δ`-rational `L` of dimension `i`, so large `α` means a dense sublattice.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diophantine::linear_fit;
use crate::enumerate::{for_each_in_ellipsoid, gram_of};
use crate::error::{invalid, Error, Result};
use crate::forms::SymmetricForm;
use crate::linalg::{determinant, dot, ext_gcd, inverse, lll_reduce, vector_gcd};
use crate::subspaces::RationalSubspace;

pub const THETA_NODE_CAP: u64 = 1 << 26;
pub const ALPHA_NODE_CAP: u64 = 1 << 22;
pub const MIN_K_GRID: usize = 64;
pub const MIN_SHIFTS: usize = 1000;

/// `Δ + ξ` with `Δ` generated by the columns of `basis`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FullLattice {
    pub basis: Vec<Vec<f64>>,
    #[serde(default)]
    pub shift: Option<Vec<f64>>,
}

impl FullLattice {
    pub fn new(basis: Vec<Vec<f64>>, shift: Option<Vec<f64>>) -> Result<Self> {
        let l = FullLattice { basis, shift };
        l.validate()?;
        Ok(l)
    }

    pub fn standard(n: usize) -> Self {
        let basis = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        FullLattice { basis, shift: None }
    }

    pub fn diagonal(d: &[f64]) -> Result<Self> {
        let n = d.len();
        Self::new((0..n).map(|i| (0..n).map(|j| if i == j { d[i] } else { 0.0 }).collect()).collect(), None)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.basis.len();
        if n == 0 || self.basis.iter().any(|r| r.len() != n || r.iter().any(|x| !x.is_finite())) {
            return Err(invalid("lattice basis must be a finite square matrix"));
        }
        if let Some(s) = &self.shift {
            if s.len() != n || s.iter().any(|x| !x.is_finite()) {
                return Err(Error::DimensionMismatch { expected: n, got: s.len() });
            }
        }
        if !(self.det().abs() > 1e-300) {
            return Err(Error::Degenerate("lattice basis is singular".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn det(&self) -> f64 {
        determinant(&self.basis)
    }

    pub fn covol(&self) -> f64 {
        self.det().abs()
    }

    pub fn is_unimodular(&self) -> bool {
        (self.covol() - 1.0).abs() <= 1e-12
    }

    pub fn shift_or_zero(&self) -> Vec<f64> {
        self.shift.clone().unwrap_or_else(|| vec![0.0; self.dim()])
    }

    pub fn with_shift(&self, shift: Option<Vec<f64>>) -> Result<Self> {
        Self::new(self.basis.clone(), shift)
    }

    /// Generators as vectors (the columns of `basis`).
    pub fn generators(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..n).map(|j| (0..n).map(|i| self.basis[i][j]).collect()).collect()
    }

    /// `gΔ + gξ`.
    pub fn transformed(&self, g: &[Vec<f64>]) -> Result<Self> {
        let n = self.dim();
        if g.len() != n || g.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: g.len() });
        }
        let basis = (0..n)
            .map(|i| (0..n).map(|j| (0..n).map(|k| g[i][k] * self.basis[k][j]).sum()).collect())
            .collect();
        let shift = self.shift.as_ref().map(|s| (0..n).map(|i| dot(&g[i], s)).collect());
        Self::new(basis, shift)
    }

    /// Generators of `Δ* = {w : ⟨w, Δ⟩ ⊂ ℤ}`.
    pub fn dual(&self) -> Result<Self> {
        let inv = inverse(&self.basis).ok_or_else(|| Error::Degenerate("lattice basis is singular".into()))?;
        let n = self.dim();
        Self::new((0..n).map(|i| (0..n).map(|j| inv[j][i]).collect()).collect(), None)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestKind {
    /// Indicator of the open ball `‖v‖ < r`.
    RadialStep { r: f64 },
    /// Indicator of the open box `|v_i| < h_i`.
    Box { half_widths: Vec<f64> },
    /// `(1 − ‖v‖/r)₊`.
    RadialTent { r: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestFunction {
    pub kind: TestKind,
    #[serde(default = "one")]
    pub amplitude: f64,
}

fn one() -> f64 {
    1.0
}

/// Volume of the unit ball in `ℝⁿ`.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * PI / n as f64 * unit_ball_volume(n - 2),
    }
}

impl TestFunction {
    pub fn radial_step(r: f64) -> Self {
        TestFunction { kind: TestKind::RadialStep { r }, amplitude: 1.0 }
    }

    pub fn boxed(half_widths: Vec<f64>) -> Self {
        TestFunction { kind: TestKind::Box { half_widths }, amplitude: 1.0 }
    }

    pub fn radial_tent(r: f64) -> Self {
        TestFunction { kind: TestKind::RadialTent { r }, amplitude: 1.0 }
    }

    pub fn scaled(&self, c: f64) -> Self {
        TestFunction { kind: self.kind.clone(), amplitude: self.amplitude * c }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let ok = match &self.kind {
            TestKind::RadialStep { r } | TestKind::RadialTent { r } => *r > 0.0 && r.is_finite(),
            TestKind::Box { half_widths } => {
                if half_widths.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, got: half_widths.len() });
                }
                half_widths.iter().all(|h| *h > 0.0 && h.is_finite())
            }
        };
        if !ok || !self.amplitude.is_finite() {
            return Err(invalid("test function parameters must be positive and finite"));
        }
        Ok(())
    }

    pub fn support_radius(&self) -> f64 {
        match &self.kind {
            TestKind::RadialStep { r } | TestKind::RadialTent { r } => *r,
            TestKind::Box { half_widths } => dot(half_widths, half_widths).sqrt(),
        }
    }

    pub fn eval(&self, v: &[f64]) -> f64 {
        let base = match &self.kind {
            TestKind::RadialStep { r } => f64::from(u8::from(dot(v, v) < r * r)),
            TestKind::Box { half_widths } => {
                f64::from(u8::from(v.iter().zip(half_widths).all(|(x, h)| x.abs() < *h)))
            }
            TestKind::RadialTent { r } => (1.0 - dot(v, v).sqrt() / r).max(0.0),
        };
        self.amplitude * base
    }

    /// `∫_{ℝⁿ} f`.
    pub fn exact_integral(&self, n: usize) -> f64 {
        let base = match &self.kind {
            TestKind::RadialStep { r } => unit_ball_volume(n) * r.powi(n as i32),
            TestKind::Box { half_widths } => half_widths.iter().map(|h| 2.0 * h).product(),
            TestKind::RadialTent { r } => unit_ball_volume(n) * r.powi(n as i32) / (n as f64 + 1.0),
        };
        self.amplitude * base
    }
}

/// An LLL-reduced copy of a lattice, ready for repeated short-vector
/// enumeration around different centres.
struct Prepared {
    reduced: Vec<Vec<f64>>,
    gram: Vec<Vec<f64>>,
    /// Inverse of the matrix whose columns are `reduced`.
    inv: Vec<Vec<f64>>,
}

impl Prepared {
    fn new(lattice: &FullLattice) -> Result<Self> {
        let mut reduced = lattice.generators();
        lll_reduce(&mut reduced, 0.99);
        let n = reduced.len();
        let m: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| reduced[j][i]).collect()).collect();
        let inv = inverse(&m).ok_or_else(|| Error::Degenerate("lattice basis is singular".into()))?;
        Ok(Prepared { gram: gram_of(&reduced), reduced, inv })
    }

    fn point(&self, z: &[i64], shift: &[f64]) -> Vec<f64> {
        let mut v = shift.to_vec();
        for (zj, b) in z.iter().zip(&self.reduced) {
            if *zj != 0 {
                for (x, bj) in v.iter_mut().zip(b) {
                    *x += *zj as f64 * bj;
                }
            }
        }
        v
    }

    fn theta(&self, f: &TestFunction, shift: &[f64], cap: u64) -> Result<f64> {
        let centre: Vec<f64> = self.inv.iter().map(|row| -dot(row, shift)).collect();
        let r = f.support_radius();
        let mut acc = 0.0;
        for_each_in_ellipsoid(&self.gram, &centre, r * r, cap, |z, _| {
            acc += f.eval(&self.point(z, shift));
        })?;
        Ok(acc)
    }
}

/// `f̂(Δ + ξ) = Σ_{v ∈ Δ+ξ} f(v)`.
pub fn theta_transform(f: &TestFunction, lattice: &FullLattice) -> Result<f64> {
    theta_transform_capped(f, lattice, THETA_NODE_CAP)
}

pub fn theta_transform_capped(f: &TestFunction, lattice: &FullLattice, node_cap: u64) -> Result<f64> {
    lattice.validate()?;
    f.validate(lattice.dim())?;
    Prepared::new(lattice)?.theta(f, &lattice.shift_or_zero(), node_cap)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiegelReport {
    pub mean: f64,
    pub std_error: f64,
    pub exact_integral: f64,
    pub covol: f64,
    /// `∫f / covol(Δ)`, the shift average for any covolume.
    pub expected: f64,
    pub num_shifts: usize,
    pub seed: u64,
}

impl SiegelReport {
    pub fn z_score(&self) -> f64 {
        if self.std_error > 0.0 {
            (self.mean - self.expected) / self.std_error
        } else if self.mean == self.expected {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Averages `f̂(Δ + ξ)` over `ξ` uniform in the fundamental parallelepiped.
pub fn siegel_average(f: &TestFunction, lattice: &FullLattice, num_shifts: usize, seed: u64) -> Result<SiegelReport> {
    lattice.validate()?;
    let n = lattice.dim();
    f.validate(n)?;
    if num_shifts < MIN_SHIFTS {
        return Err(invalid(format!("siegel_average needs at least {MIN_SHIFTS} shifts, got {num_shifts}")));
    }
    let prepared = Prepared::new(lattice)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shifts: Vec<Vec<f64>> = (0..num_shifts)
        .map(|_| {
            let u: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            lattice.basis.iter().map(|row| dot(row, &u)).collect()
        })
        .collect();
    let values: Vec<f64> = shifts
        .par_iter()
        .map(|xi| prepared.theta(f, xi, THETA_NODE_CAP))
        .collect::<Result<_>>()?;
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0);
    let exact = f.exact_integral(n);
    Ok(SiegelReport {
        mean,
        std_error: (var / m).sqrt(),
        exact_integral: exact,
        covol: lattice.covol(),
        expected: exact / lattice.covol(),
        num_shifts,
        seed,
    })
}

/// `(γ_i)^i` for the Hermite constants, `i = 1..=8`.
const HERMITE_POW: [f64; 9] = [1.0, 1.0, 4.0 / 3.0, 2.0, 4.0, 8.0, 64.0 / 3.0, 64.0, 256.0];

fn covolume(vs: &[Vec<f64>]) -> f64 {
    if vs.is_empty() {
        return 1.0;
    }
    determinant(&gram_of(vs)).max(0.0).sqrt()
}

fn combine(vs: &[Vec<f64>], z: &[i64]) -> Vec<f64> {
    let mut out = vec![0.0; vs[0].len()];
    for (zj, v) in z.iter().zip(vs) {
        if *zj != 0 {
            for (o, x) in out.iter_mut().zip(v) {
                *o += *zj as f64 * x;
            }
        }
    }
    out
}

/// Unimodular `U` whose first column is the primitive vector `c`.
fn complete_basis(c: &[i64]) -> Vec<Vec<i128>> {
    let m = c.len();
    let mut c: Vec<i128> = c.iter().map(|&x| x as i128).collect();
    let mut w: Vec<Vec<i128>> = (0..m).map(|i| (0..m).map(|j| i128::from(i == j)).collect()).collect();
    for j in 1..m {
        let (a, b) = (c[0], c[j]);
        if b == 0 {
            continue;
        }
        let (g, x, y) = ext_gcd(a, b);
        // Rows (0, j) of c go through [[x, y], [−b/g, a/g]]; w absorbs the inverse.
        c[0] = g;
        c[j] = 0;
        for row in w.iter_mut() {
            let (w0, wj) = (row[0], row[j]);
            row[0] = w0 * (a / g) + wj * (b / g);
            row[j] = -w0 * y + wj * x;
        }
    }
    if c[0] < 0 {
        for row in w.iter_mut() {
            row[0] = -row[0];
        }
    }
    w
}

/// Orthogonal projection of `Δ` along the primitive vector `Σ z_j v_j`.
fn project_along(vs: &[Vec<f64>], z: &[i64]) -> Vec<Vec<f64>> {
    let u = complete_basis(z);
    let m = vs.len();
    let v = combine(vs, z);
    let vv = dot(&v, &v);
    (1..m)
        .map(|k| {
            let col: Vec<i64> = (0..m).map(|j| u[j][k] as i64).collect();
            let mut x = combine(vs, &col);
            let c = dot(&x, &v) / vv;
            for (xi, vi) in x.iter_mut().zip(&v) {
                *xi -= c * vi;
            }
            x
        })
        .collect()
}

fn canonical_sign(z: &[i64]) -> bool {
    z.iter().find(|&&x| x != 0).is_some_and(|&x| x > 0)
}

/// `λ₁` of the lattice spanned by `vs`, with a saturation flag.
fn shortest(vs: &[Vec<f64>], cap: u64) -> (f64, Vec<f64>, bool) {
    let mut reduced = vs.to_vec();
    lll_reduce(&mut reduced, 0.99);
    let first = reduced
        .iter()
        .min_by(|a, b| dot(a, a).total_cmp(&dot(b, b)))
        .expect("nonempty basis")
        .clone();
    let mut best = (dot(&first, &first), first);
    let gram = gram_of(&reduced);
    let centre = vec![0.0; reduced.len()];
    let status = for_each_in_ellipsoid(&gram, &centre, best.0, cap, |z, _| {
        if z.iter().any(|&x| x != 0) {
            let v = combine(&reduced, z);
            let nv = dot(&v, &v);
            if nv < best.0 {
                best = (nv, v);
            }
        }
    });
    (best.0.sqrt(), best.1, status.is_ok())
}

/// Smallest covolume of an `i`-dimensional sublattice of the lattice
/// spanned by `vs`. Uses `d_i(Δ) = min_v ‖v‖·d_{i−1}(π_{v⊥}Δ)` over
/// primitive `v` within the Hermite bound `‖v‖² ≤ γ_i d_i^{2/i}`.
fn min_covolume(vs: &[Vec<f64>], i: usize, cap: u64) -> (f64, bool) {
    let m = vs.len();
    if i == 0 {
        return (1.0, true);
    }
    if i == m {
        return (covolume(vs), true);
    }
    if i == 1 {
        let (l, _, sat) = shortest(vs, cap);
        return (l, sat);
    }
    let mut reduced = vs.to_vec();
    lll_reduce(&mut reduced, 0.99);
    let mut best = covolume(&reduced[..i]);
    let hermite = HERMITE_POW[i.min(8)];
    let radius_sq = |d: f64| (hermite * d * d).powf(1.0 / i as f64);
    let gram = gram_of(&reduced);
    let centre = vec![0.0; m];
    let mut candidates: Vec<(f64, Vec<i64>)> = Vec::new();
    let status = for_each_in_ellipsoid(&gram, &centre, radius_sq(best), cap, |z, _| {
        if canonical_sign(z) && vector_gcd(z) == 1 {
            let v = combine(&reduced, z);
            candidates.push((dot(&v, &v), z.to_vec()));
        }
    });
    let mut saturated = status.is_ok();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    for (nv, z) in candidates {
        if nv > radius_sq(best) * (1.0 + 1e-9) {
            break;
        }
        let (dp, sat) = min_covolume(&project_along(&reduced, &z), i - 1, cap);
        saturated &= sat;
        best = best.min(nv.sqrt() * dp);
    }
    (best, saturated)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaEstimate {
    pub i: usize,
    pub value: f64,
    pub min_covolume: f64,
    /// Whether every enumeration finished under the node cap; otherwise
    /// `value` is only a lower bound for `α_i`.
    pub saturated: bool,
}

/// `α_i(Δ)`. The case `i = n − 1` goes through the dual lattice,
/// `d_{n−1}(Δ) = covol(Δ)·λ₁(Δ*)`.
pub fn alpha_i(lattice: &FullLattice, i: usize, node_cap: u64) -> Result<AlphaEstimate> {
    lattice.validate()?;
    let n = lattice.dim();
    if i > n {
        return Err(invalid(format!("alpha index {i} exceeds the dimension {n}")));
    }
    let (d, saturated) = if i == n - 1 && n >= 2 {
        let (l, _, sat) = shortest(&lattice.dual()?.generators(), node_cap);
        (lattice.covol() * l, sat)
    } else {
        min_covolume(&lattice.generators(), i, node_cap)
    };
    Ok(AlphaEstimate { i, value: 1.0 / d, min_covolume: d, saturated })
}

/// `α_i` by the direct recursion only, for every `i` including `n − 1`.
pub fn alpha_i_direct(lattice: &FullLattice, i: usize, node_cap: u64) -> Result<AlphaEstimate> {
    lattice.validate()?;
    if i > lattice.dim() {
        return Err(invalid(format!("alpha index {i} exceeds the dimension {}", lattice.dim())));
    }
    let (d, saturated) = min_covolume(&lattice.generators(), i, node_cap);
    Ok(AlphaEstimate { i, value: 1.0 / d, min_covolume: d, saturated })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaReport {
    pub components: Vec<AlphaEstimate>,
    pub value: f64,
    pub saturated: bool,
}

/// `α(Δ) = max_{0 ≤ i ≤ n} α_i(Δ)`; the shift is ignored.
pub fn alpha(lattice: &FullLattice, node_cap: u64) -> Result<AlphaReport> {
    let components: Vec<AlphaEstimate> =
        (0..=lattice.dim()).map(|i| alpha_i(lattice, i, node_cap)).collect::<Result<_>>()?;
    let value = components.iter().map(|c| c.value).fold(0.0, f64::max);
    let saturated = components.iter().all(|c| c.saturated);
    Ok(AlphaReport { components, value, saturated })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    pub theta: f64,
    pub alpha: f64,
    pub ratio: f64,
    pub saturated: bool,
}

/// The pair `(f̂(Δ + ξ), α(Δ))` and their ratio.
pub fn lipschitz_check(f: &TestFunction, lattice: &FullLattice) -> Result<LipschitzReport> {
    let theta = theta_transform(f, lattice)?;
    let a = alpha(lattice, ALPHA_NODE_CAP)?;
    Ok(LipschitzReport { theta, alpha: a.value, ratio: theta / a.value, saturated: a.saturated })
}

/// The group `H` whose `a_t` and `K` drive the orbit diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrbitGroup {
    /// `SL₂ × SL₂` on `ℝ⁴ ≅ M₂(ℝ)`, `(x₁, x₂, x₃, x₄) ↔ [[x₁, x₂], [x₃, x₄]]`,
    /// acting by `v ↦ g₁ v g₂⁻¹`; `B = x₁x₄ − x₂x₃`.
    Split22,
    /// `SL₂` on `ℝ³ ≅ Sym₂(ℝ)`, `(x₁, x₂, x₃) ↔ [[x₁, x₂], [x₂, x₃]]`,
    /// acting by `v ↦ g v gᵀ`; `B = x₁x₃ − x₂²`.
    Split21,
}

type M2 = [[f64; 2]; 2];

fn rot(theta: f64) -> M2 {
    let (s, c) = theta.sin_cos();
    [[c, -s], [s, c]]
}

fn mul2(a: &M2, b: &M2) -> M2 {
    let mut m = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            m[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    m
}

fn inv2(a: &M2) -> M2 {
    let d = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    [[a[1][1] / d, -a[0][1] / d], [-a[1][0] / d, a[0][0] / d]]
}

fn b_t(t: f64) -> M2 {
    [[(-t / 2.0).exp(), 0.0], [0.0, (t / 2.0).exp()]]
}

impl OrbitGroup {
    pub fn dim(self) -> usize {
        match self {
            OrbitGroup::Split22 => 4,
            OrbitGroup::Split21 => 3,
        }
    }

    /// Matrix of the standard form `B`.
    pub fn standard_form(self) -> Vec<Vec<f64>> {
        match self {
            OrbitGroup::Split22 => vec![
                vec![0.0, 0.0, 0.0, 0.5],
                vec![0.0, 0.0, -0.5, 0.0],
                vec![0.0, -0.5, 0.0, 0.0],
                vec![0.5, 0.0, 0.0, 0.0],
            ],
            OrbitGroup::Split21 => vec![vec![0.0, 0.0, 0.5], vec![0.0, -1.0, 0.0], vec![0.5, 0.0, 0.0]],
        }
    }

    /// Matrix of `a_t k` with `k = (r_θ, r_φ)` (`φ` unused for `Split21`).
    pub fn action(self, t: f64, theta: f64, phi: f64) -> Vec<Vec<f64>> {
        match self {
            OrbitGroup::Split22 => {
                let g1 = mul2(&b_t(t), &rot(theta));
                let h = inv2(&mul2(&b_t(t), &rot(phi)));
                // Row-major vec(g₁ M h) = (g₁ ⊗ hᵀ) vec(M).
                let mut m = vec![vec![0.0; 4]; 4];
                for i in 0..2 {
                    for j in 0..2 {
                        for k in 0..2 {
                            for l in 0..2 {
                                m[2 * i + j][2 * k + l] = g1[i][k] * h[l][j];
                            }
                        }
                    }
                }
                m
            }
            OrbitGroup::Split21 => {
                let g = mul2(&b_t(t), &rot(theta));
                let sym = [[[1.0, 0.0], [0.0, 0.0]], [[0.0, 1.0], [1.0, 0.0]], [[0.0, 0.0], [0.0, 1.0]]];
                let mut m = vec![vec![0.0; 3]; 3];
                for (c, e) in sym.iter().enumerate() {
                    let gt = [[g[0][0], g[1][0]], [g[0][1], g[1][1]]];
                    let img = mul2(&mul2(&g, e), &gt);
                    m[0][c] = img[0][0];
                    m[1][c] = img[0][1];
                    m[2][c] = img[1][1];
                }
                m
            }
        }
    }
}

/// Uniform product grid on `K`; `θ = 0` and `φ = 0` are grid points.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KGrid {
    pub theta: usize,
    pub phi: usize,
}

impl KGrid {
    pub fn square(m: usize) -> Self {
        KGrid { theta: m, phi: m }
    }

    fn points(&self, group: OrbitGroup) -> Result<Vec<(f64, f64)>> {
        let phi = if group == OrbitGroup::Split21 { 1 } else { self.phi };
        let total = self.theta.saturating_mul(phi);
        if self.theta == 0 || phi == 0 || total < MIN_K_GRID {
            return Err(invalid(format!("K grid has {total} points; at least {MIN_K_GRID} are required")));
        }
        let step_t = 2.0 * PI / self.theta as f64;
        let step_p = 2.0 * PI / phi as f64;
        Ok((0..self.theta).flat_map(|a| (0..phi).map(move |b| (a as f64 * step_t, b as f64 * step_p))).collect())
    }
}

/// A lattice `Δ = gℤⁿ` with `Q = c·B∘g` for some `c > 0` (or `c < 0` when the
/// signature is reversed), rescaled to covolume one.
pub fn form_frame(q: &SymmetricForm<f64>, group: OrbitGroup) -> Result<FullLattice> {
    let n = group.dim();
    if q.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: q.dim() });
    }
    let eig = |m: &[Vec<f64>]| {
        let e = DMatrix::from_fn(n, n, |i, j| m[i][j]).symmetric_eigen();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| e.eigenvalues[b].total_cmp(&e.eigenvalues[a]));
        (idx.iter().map(|&k| e.eigenvalues[k]).collect::<Vec<f64>>(), idx.iter().map(|&k| e.eigenvectors.column(k).iter().cloned().collect::<Vec<f64>>()).collect::<Vec<_>>())
    };
    let (mut dq, mut pq) = eig(q.entries());
    let (db, pb) = eig(&group.standard_form());
    let pos = |d: &[f64]| d.iter().filter(|x| **x > 0.0).count();
    if pos(&dq) != pos(&db) {
        let (d2, p2) = eig(&q.entries().iter().map(|r| r.iter().map(|x| -x).collect()).collect::<Vec<Vec<f64>>>());
        dq = d2;
        pq = p2;
    }
    if pos(&dq) != pos(&db) || dq.iter().any(|x| x.abs() < 1e-300) {
        return Err(invalid("form signature does not match the orbit group"));
    }
    // g = R|E|^{-1/2}|D|^{1/2}Pᵀ gives gᵀ B g = Q.
    let mut g = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            g[i][j] = (0..n).map(|k| pb[k][i] * (dq[k].abs() / db[k].abs()).sqrt() * pq[k][j]).sum();
        }
    }
    let scale = determinant(&g).abs().powf(-1.0 / n as f64);
    for row in g.iter_mut() {
        for x in row.iter_mut() {
            *x *= scale;
        }
    }
    FullLattice::new(g, None)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub t: f64,
    pub i: usize,
    pub s: f64,
    pub moment: f64,
    pub points: usize,
    pub unsaturated: usize,
}

/// Riemann sum of `∫_K α_i(a_t k Δ)^s dk` on a uniform grid.
pub fn orbit_alpha_moment(
    lattice: &FullLattice,
    group: OrbitGroup,
    i: usize,
    s: f64,
    t: f64,
    grid: KGrid,
) -> Result<MomentReport> {
    lattice.validate()?;
    if lattice.dim() != group.dim() {
        return Err(Error::DimensionMismatch { expected: group.dim(), got: lattice.dim() });
    }
    if !(s > 0.0 && s < 2.0) {
        return Err(invalid(format!("moment exponent must lie in (0, 2), got {s}")));
    }
    if i > lattice.dim() || !t.is_finite() {
        return Err(invalid("alpha index or t out of range"));
    }
    let points = grid.points(group)?;
    let values: Vec<AlphaEstimate> = points
        .par_iter()
        .map(|&(th, ph)| alpha_i(&lattice.transformed(&group.action(t, th, ph))?, i, ALPHA_NODE_CAP))
        .collect::<Result<_>>()?;
    let moment = values.iter().map(|a| a.value.powf(s)).sum::<f64>() / values.len() as f64;
    Ok(MomentReport { t, i, s, moment, points: values.len(), unsaturated: values.iter().filter(|a| !a.saturated).count() })
}

/// Slope of `log moment` against `t`.
pub fn moment_log_slope(reports: &[MomentReport]) -> Result<f64> {
    if reports.len() < 2 || reports.iter().any(|r| !(r.moment > 0.0)) {
        return Err(invalid("slope needs at least two positive moments"));
    }
    let t: Vec<f64> = reports.iter().map(|r| r.t).collect();
    let y: Vec<f64> = reports.iter().map(|r| r.moment.ln()).collect();
    Ok(linear_fit(&t, &y).0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShrinkRow {
    pub t: f64,
    pub delta: f64,
    /// Haar measure of `{k : d(a_t k L) < δ}` on the grid.
    pub measure: f64,
    /// Shortest arcs in `θ` and `φ` containing the set, modulo `π`
    /// (`d` is invariant under `θ ↦ θ + π` and `φ ↦ φ + π`).
    pub theta_extent: f64,
    pub phi_extent: f64,
    pub theta_range: Option<(f64, f64)>,
    pub phi_range: Option<(f64, f64)>,
    /// `min_k d(a_t k L)` over the grid.
    pub min_d: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShrinkProfile {
    pub rows: Vec<ShrinkRow>,
    /// Fit `log θ-extent ≈ c − a·t + b·log δ` over the nonempty rows.
    pub t_exponent: Option<f64>,
    pub delta_exponent: Option<f64>,
}

/// Shortest arc on the circle `ℝ/πℤ` containing the given angles, with its ends.
fn arc(angles: &[f64], step: f64) -> (f64, Option<(f64, f64)>) {
    if angles.is_empty() {
        return (0.0, None);
    }
    let mut a: Vec<f64> = angles.iter().map(|x| x.rem_euclid(PI)).collect();
    a.sort_by(f64::total_cmp);
    a.dedup_by(|x, y| (*x - *y).abs() < 1e-12);
    let mut gap = (a[0] + PI - a[a.len() - 1], a.len() - 1);
    for k in 1..a.len() {
        let g = a[k] - a[k - 1];
        if g > gap.0 {
            gap = (g, k - 1);
        }
    }
    let start = a[(gap.1 + 1) % a.len()];
    let end = a[gap.1];
    // Each grid point stands for one cell.
    ((PI - gap.0 + step).min(PI), Some((start, end)))
}

/// Measures the thin set `{k : d(a_t k L) < δ}` for `L` given in the
/// coordinates of the lattice basis, over every `(t, δ)` pair.
pub fn shrink_profile(
    l: &RationalSubspace,
    lattice: &FullLattice,
    t_grid: &[f64],
    delta_grid: &[f64],
    grid: KGrid,
) -> Result<ShrinkProfile> {
    lattice.validate()?;
    let group = OrbitGroup::Split22;
    if lattice.dim() != 4 || l.ambient_dim() != 4 {
        return Err(Error::DimensionMismatch { expected: 4, got: lattice.dim() });
    }
    if t_grid.is_empty() || delta_grid.is_empty() || delta_grid.iter().any(|d| !(*d > 0.0)) {
        return Err(invalid("shrink profile needs nonempty t and positive δ grids"));
    }
    let points = grid.points(group)?;
    let gens = lattice.generators();
    let vs: Vec<Vec<f64>> = l.basis().iter().map(|z| combine(&gens, z)).collect();
    let step_t = 2.0 * PI / grid.theta as f64;
    let step_p = 2.0 * PI / grid.phi as f64;
    let mut rows = Vec::new();
    for &t in t_grid {
        let d: Vec<f64> = points
            .par_iter()
            .map(|&(th, ph)| {
                let g = group.action(t, th, ph);
                let img: Vec<Vec<f64>> = vs.iter().map(|v| g.iter().map(|r| dot(r, v)).collect()).collect();
                covolume(&img)
            })
            .collect();
        let min_d = d.iter().cloned().fold(f64::INFINITY, f64::min);
        for &delta in delta_grid {
            let inside: Vec<(f64, f64)> =
                points.iter().zip(&d).filter(|(_, &dk)| dk < delta).map(|(p, _)| *p).collect();
            let th: Vec<f64> = inside.iter().map(|p| p.0).collect();
            let ph: Vec<f64> = inside.iter().map(|p| p.1).collect();
            let (te, tr) = arc(&th, step_t);
            let (pe, pr) = arc(&ph, step_p);
            rows.push(ShrinkRow {
                t,
                delta,
                measure: inside.len() as f64 / points.len() as f64,
                theta_extent: te,
                phi_extent: pe,
                theta_range: tr,
                phi_range: pr,
                min_d,
            });
        }
    }
    let used: Vec<&ShrinkRow> = rows.iter().filter(|r| r.theta_extent > 0.0).collect();
    let (t_exponent, delta_exponent) = fit_shrink(&used);
    Ok(ShrinkProfile { rows, t_exponent, delta_exponent })
}

fn fit_shrink(rows: &[&ShrinkRow]) -> (Option<f64>, Option<f64>) {
    let y: Vec<f64> = rows.iter().map(|r| r.theta_extent.ln()).collect();
    let x1: Vec<f64> = rows.iter().map(|r| -r.t).collect();
    let x2: Vec<f64> = rows.iter().map(|r| r.delta.ln()).collect();
    let varies = |x: &[f64]| x.iter().any(|v| (v - x[0]).abs() > 1e-12);
    match (rows.len() >= 2 && varies(&x1), rows.len() >= 2 && varies(&x2)) {
        (false, false) => (None, None),
        (true, false) => (Some(linear_fit(&x1, &y).0), None),
        (false, true) => (None, Some(linear_fit(&x2, &y).0)),
        (true, true) => {
            let m = DMatrix::from_fn(rows.len(), 3, |r, c| [1.0, x1[r], x2[r]][c]);
            let b = nalgebra::DVector::from_column_slice(&y);
            let mtm = m.transpose() * &m;
            match mtm.clone().lu().solve(&(m.transpose() * b)) {
                Some(sol) if mtm.determinant().abs() > 1e-12 => (Some(sol[1]), Some(sol[2])),
                _ => (None, None),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, proptest, ProptestConfig};

    fn random_basis(n: usize, seed: u64, skew: f64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        loop {
            let b: Vec<Vec<f64>> =
                (0..n).map(|_| (0..n).map(|_| rng.gen_range(-skew..skew)).collect()).collect();
            if determinant(&b).abs() > 0.2 {
                return b;
            }
        }
    }

    fn unimodular(b: Vec<Vec<f64>>) -> FullLattice {
        let n = b.len();
        let s = determinant(&b).abs().powf(-1.0 / n as f64);
        FullLattice::new(b.iter().map(|r| r.iter().map(|x| x * s).collect()).collect(), None).unwrap()
    }

    fn box_oracle(f: &TestFunction, l: &FullLattice) -> f64 {
        let n = l.dim();
        let inv = inverse(&l.basis).unwrap();
        let xi = l.shift_or_zero();
        let r = f.support_radius();
        let bounds: Vec<(i64, i64)> = (0..n)
            .map(|i| {
                let c = -dot(&inv[i], &xi);
                let w = dot(&inv[i], &inv[i]).sqrt() * r;
                ((c - w).floor() as i64, (c + w).ceil() as i64)
            })
            .collect();
        let mut z: Vec<i64> = bounds.iter().map(|b| b.0).collect();
        let mut acc = 0.0;
        loop {
            let v: Vec<f64> = (0..n).map(|i| xi[i] + (0..n).map(|j| l.basis[i][j] * z[j] as f64).sum::<f64>()).collect();
            acc += f.eval(&v);
            let mut k = 0;
            loop {
                if k == n {
                    return acc;
                }
                z[k] += 1;
                if z[k] <= bounds[k].1 {
                    break;
                }
                z[k] = bounds[k].0;
                k += 1;
            }
        }
    }

    #[test]
    fn theta_small_cases() {
        let z4 = FullLattice::standard(4);
        assert_eq!(theta_transform(&TestFunction::radial_step(0.5), &z4).unwrap(), 1.0);
        let twice = FullLattice::diagonal(&[2.0; 4]).unwrap();
        assert_eq!(theta_transform(&TestFunction::radial_step(1.9), &twice).unwrap(), 1.0);
        let shifted = twice.with_shift(Some(vec![0.5; 4])).unwrap();
        assert_eq!(theta_transform(&TestFunction::radial_step(0.5), &shifted).unwrap(), 0.0);
        // Unit ball in ℤ³: the origin and six neighbours at distance 1 sit on or inside.
        assert_eq!(theta_transform(&TestFunction::radial_step(1.01), &FullLattice::standard(3)).unwrap(), 7.0);
        assert_eq!(theta_transform(&TestFunction::boxed(vec![1.5, 0.5, 0.5]), &FullLattice::standard(3)).unwrap(), 3.0);
        let tent = theta_transform(&TestFunction::radial_tent(2.0), &FullLattice::standard(2)).unwrap();
        let want = 1.0 + 4.0 * 0.5 + 4.0 * (1.0 - 2f64.sqrt() / 2.0);
        assert!((tent - want).abs() < 1e-12);
    }

    #[test]
    fn theta_matches_box_oracle() {
        for seed in 0..12 {
            let n = 3 + (seed as usize % 2);
            let mut l = unimodular(random_basis(n, seed, 2.0));
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            l.shift = Some((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
            for f in [
                TestFunction::radial_step(1.7),
                TestFunction::boxed((0..n).map(|k| 0.6 + 0.3 * k as f64).collect()),
                TestFunction::radial_tent(2.2),
            ] {
                let fast = theta_transform(&f, &l).unwrap();
                let slow = box_oracle(&f, &l);
                if matches!(f.kind, TestKind::RadialTent { .. }) {
                    assert!((fast - slow).abs() <= 1e-9 * slow.max(1.0));
                } else {
                    assert_eq!(fast, slow);
                }
            }
        }
    }

    #[test]
    fn theta_cap_is_reported() {
        let l = FullLattice::diagonal(&[1e-3, 1.0, 1.0]).unwrap();
        let err = theta_transform_capped(&TestFunction::radial_step(5.0), &l, 1000).unwrap_err();
        assert!(matches!(err, Error::CapExceeded(_)));
    }

    #[test]
    fn exact_integrals() {
        assert!((unit_ball_volume(4) - PI * PI / 2.0).abs() < 1e-14);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-14);
        assert_eq!(TestFunction::boxed(vec![0.5, 1.0, 2.0]).exact_integral(3), 8.0);
        // ∫ (1 − |x|)₊ dx = 1 on the line and π/3 in the plane.
        assert!((TestFunction::radial_tent(1.0).exact_integral(1) - 1.0).abs() < 1e-15);
        assert!((TestFunction::radial_tent(1.0).exact_integral(2) - PI / 3.0).abs() < 1e-15);
    }

    #[test]
    fn siegel_average_cases() {
        let lattices = [FullLattice::standard(4), unimodular(random_basis(4, 3, 1.0)), FullLattice::diagonal(&[0.5, 1.0, 2.0, 1.5]).unwrap()];
        for l in &lattices {
            let f = TestFunction::radial_step(1.0);
            let r = siegel_average(&f, l, 4000, 7).unwrap();
            assert!(r.z_score().abs() <= 3.0, "{r:?}");
            let doubled = siegel_average(&f.scaled(2.0), l, 4000, 7).unwrap();
            assert_eq!(doubled.mean, 2.0 * r.mean);
            assert_eq!(siegel_average(&f, l, 4000, 7).unwrap(), r);
        }
        assert!(siegel_average(&TestFunction::radial_step(1.0), &lattices[0], 10, 1).is_err());
    }

    #[test]
    fn alpha_standard_and_diagonal() {
        for n in 2..=5 {
            let a = alpha(&FullLattice::standard(n), ALPHA_NODE_CAP).unwrap();
            for c in &a.components {
                assert!((c.value - 1.0).abs() < 1e-12, "{c:?}");
                assert!(c.saturated);
            }
        }
        let l = FullLattice::diagonal(&[8.0, 1.0 / 8.0]).unwrap();
        assert!((alpha_i(&l, 1, ALPHA_NODE_CAP).unwrap().value - 8.0).abs() < 1e-12);
        let l = FullLattice::diagonal(&[0.1, 1.0, 1.0, 10.0]).unwrap();
        let vals: Vec<f64> = (0..=4).map(|i| alpha_i(&l, i, ALPHA_NODE_CAP).unwrap().value).collect();
        for (v, w) in vals.iter().zip([1.0, 10.0, 10.0, 10.0, 1.0]) {
            assert!((v - w).abs() < 1e-9, "{vals:?}");
        }
    }

    #[test]
    fn shortest_vector_by_scan() {
        for seed in 0..8 {
            let l = unimodular(random_basis(2, seed, 3.0));
            let mut best = f64::INFINITY;
            for a in -60i64..=60 {
                for b in -60i64..=60 {
                    if (a, b) != (0, 0) {
                        let x = l.basis[0][0] * a as f64 + l.basis[0][1] * b as f64;
                        let y = l.basis[1][0] * a as f64 + l.basis[1][1] * b as f64;
                        best = best.min((x * x + y * y).sqrt());
                    }
                }
            }
            let a1 = alpha_i(&l, 1, ALPHA_NODE_CAP).unwrap();
            assert!((a1.min_covolume - best).abs() < 1e-12);
        }
    }

    #[test]
    fn two_dimensional_sublattices_by_pairs() {
        // Minimum of ‖v ∧ w‖ over pairs of lattice vectors from a coefficient box.
        for seed in 0..4 {
            let l = unimodular(random_basis(4, 20 + seed, 1.0));
            let gens = l.generators();
            let mut vecs = Vec::new();
            let r = 3i64;
            for a in -r..=r {
                for b in -r..=r {
                    for c in -r..=r {
                        for d in -r..=r {
                            if (a, b, c, d) != (0, 0, 0, 0) {
                                vecs.push((combine(&gens, &[a, b, c, d]), [a, b, c, d]));
                            }
                        }
                    }
                }
            }
            vecs.sort_by(|x, y| dot(&x.0, &x.0).total_cmp(&dot(&y.0, &y.0)));
            vecs.truncate(300);
            let mut best = f64::INFINITY;
            for i in 0..vecs.len() {
                for j in i + 1..vecs.len() {
                    let (p, q) = (vecs[i].1, vecs[j].1);
                    let independent = (0..4).any(|a| (a + 1..4).any(|b| p[a] * q[b] != p[b] * q[a]));
                    if independent {
                        best = best.min(covolume(&[vecs[i].0.clone(), vecs[j].0.clone()]));
                    }
                }
            }
            let a2 = alpha_i(&l, 2, ALPHA_NODE_CAP).unwrap();
            assert!(a2.saturated);
            assert!((a2.min_covolume - best).abs() < 1e-9, "{} vs {best}", a2.min_covolume);
        }
    }

    #[test]
    fn dual_route_matches_recursion() {
        for seed in 0..10 {
            let n = 3 + (seed as usize % 2);
            let l = unimodular(random_basis(n, 40 + seed, 1.5));
            let via_dual = alpha_i(&l, n - 1, ALPHA_NODE_CAP).unwrap();
            let direct = alpha_i_direct(&l, n - 1, ALPHA_NODE_CAP).unwrap();
            assert!((via_dual.value - direct.value).abs() <= 1e-9 * via_dual.value);
        }
    }

    #[test]
    fn complete_basis_is_unimodular() {
        for c in [vec![3i64, 5, 7], vec![0, 0, 1], vec![-4, 9, 0, 6], vec![6, 10, 15]] {
            let u = complete_basis(&c);
            assert_eq!(u.iter().map(|r| r[0] as i64).collect::<Vec<_>>(), c);
            let m: Vec<Vec<i64>> = u.iter().map(|r| r.iter().map(|&x| x as i64).collect()).collect();
            assert_eq!(crate::linalg::integer_determinant(&m).unwrap().abs(), 1);
        }
    }

    #[test]
    fn lipschitz_cases() {
        let f = TestFunction::radial_step(0.5);
        let r = lipschitz_check(&f, &FullLattice::standard(4)).unwrap();
        assert_eq!((r.theta, r.alpha, r.ratio), (1.0, 1.0, 1.0));
        let base = unimodular(random_basis(4, 5, 1.0));
        let a = lipschitz_check(&f, &base).unwrap();
        let b = lipschitz_check(&f, &base.with_shift(Some(vec![0.3, -0.2, 0.1, 0.7])).unwrap()).unwrap();
        assert_eq!(a.alpha, b.alpha);
        let mut ratios = Vec::new();
        for eps in [0.5, 0.2, 0.1, 0.05, 0.02] {
            let l = FullLattice::diagonal(&[eps, 1.0, 1.0, 1.0 / eps]).unwrap();
            let rep = lipschitz_check(&TestFunction::radial_step(1.5), &l).unwrap();
            assert!(rep.alpha >= 1.0 / eps - 1e-9);
            ratios.push(rep.ratio);
        }
        let spread = ratios.iter().cloned().fold(0.0, f64::max) / ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(spread < 3.0, "{ratios:?}");
    }

    #[test]
    fn lipschitz_constant_covers_random_family() {
        let f = TestFunction::radial_step(1.0);
        let family = |offset: u64| -> Vec<LipschitzReport> {
            (0..100)
                .map(|k| {
                    let mut rng = ChaCha8Rng::seed_from_u64(offset + k);
                    let squeeze = (-rng.gen_range(0.0..4.0f64)).exp();
                    let g = random_basis(4, 1000 + offset + k, 1.0);
                    let base = unimodular(g);
                    let d = FullLattice::diagonal(&[squeeze, 1.0, 1.0, 1.0 / squeeze]).unwrap();
                    let mut l = base.transformed(&d.basis).unwrap();
                    l.shift = Some((0..4).map(|_| rng.gen_range(-1.0..1.0)).collect());
                    lipschitz_check(&f, &l).unwrap()
                })
                .collect()
        };
        let train = family(0);
        let c = 2.0 * train.iter().map(|r| r.ratio).fold(0.0, f64::max);
        let test = family(500);
        assert_eq!(test.iter().filter(|r| r.theta >= c * r.alpha).count(), 0);
    }

    fn orthogonal(n: usize, seed: u64) -> Vec<Vec<f64>> {
        let b = random_basis(n, seed, 1.0);
        let q = DMatrix::from_fn(n, n, |i, j| b[i][j]).qr().q();
        (0..n).map(|i| (0..n).map(|j| q[(i, j)]).collect()).collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn alpha_isometry_invariant(seed in 0u64..10_000) {
            let l = unimodular(random_basis(4, seed, 1.5));
            let g = orthogonal(4, seed + 1);
            let moved = l.transformed(&g).unwrap();
            for i in 1..4 {
                let a = alpha_i(&l, i, ALPHA_NODE_CAP).unwrap().value;
                let b = alpha_i(&moved, i, ALPHA_NODE_CAP).unwrap().value;
                prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
            }
        }

        #[test]
        fn alpha_at_least_one_for_unimodular(seed in 0u64..10_000) {
            // Every unimodular lattice has d_i ≤ γ-bounded covolume; α_0 = α_n = 1.
            let l = unimodular(random_basis(4, seed, 2.0));
            let a = alpha(&l, ALPHA_NODE_CAP).unwrap();
            prop_assert!(a.value >= 1.0 - 1e-12);
            prop_assert!((a.components[4].value - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn action_preserves_standard_form() {
        for group in [OrbitGroup::Split22, OrbitGroup::Split21] {
            let b = group.standard_form();
            let n = group.dim();
            let g = group.action(1.3, 0.4, -2.1);
            let gtbg: Vec<Vec<f64>> = (0..n)
                .map(|i| (0..n).map(|j| (0..n).map(|k| (0..n).map(|l| g[k][i] * b[k][l] * g[l][j]).sum::<f64>()).sum()).collect())
                .collect();
            for i in 0..n {
                for j in 0..n {
                    assert!((gtbg[i][j] - b[i][j]).abs() < 1e-12);
                }
            }
            assert!((determinant(&g) - 1.0).abs() < 1e-12);
        }
        // K acts by Euclidean isometries on M₂(ℝ).
        let k = OrbitGroup::Split22.action(0.0, 0.7, 1.9);
        let kt: Vec<Vec<f64>> = (0..4).map(|i| (0..4).map(|j| k[j][i]).collect()).collect();
        let p = crate::linalg::mat_mul(&kt, &k);
        for i in 0..4 {
            for j in 0..4 {
                assert!((p[i][j] - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn form_frame_pulls_back() {
        let q = SymmetricForm::new(vec![
            vec![1.0, 0.2, 0.0, 0.3],
            vec![0.2, 2f64.sqrt(), 0.1, 0.0],
            vec![0.0, 0.1, -1.0, 0.0],
            vec![0.3, 0.0, 0.0, -3f64.sqrt()],
        ])
        .unwrap();
        let l = form_frame(&q, OrbitGroup::Split22).unwrap();
        assert!(l.is_unimodular());
        let b = OrbitGroup::Split22.standard_form();
        let g = &l.basis;
        let pulled: Vec<Vec<f64>> = (0..4)
            .map(|i| (0..4).map(|j| (0..4).map(|k| (0..4).map(|m| g[k][i] * b[k][m] * g[m][j]).sum::<f64>()).sum()).collect())
            .collect();
        let c = pulled[0][0] / q.entries()[0][0];
        assert!(c > 0.0);
        for i in 0..4 {
            for j in 0..4 {
                assert!((pulled[i][j] - c * q.entries()[i][j]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn moment_grid_rules() {
        let z = FullLattice::standard(4);
        let r = orbit_alpha_moment(&z, OrbitGroup::Split22, 1, 1.5, 0.0, KGrid::square(8)).unwrap();
        assert!((r.moment - 1.0).abs() < 1e-12);
        assert_eq!(r.points, 64);
        assert!(orbit_alpha_moment(&z, OrbitGroup::Split22, 1, 1.5, 0.0, KGrid::square(7)).is_err());
        assert!(orbit_alpha_moment(&z, OrbitGroup::Split22, 1, 2.0, 0.0, KGrid::square(8)).is_err());
        let r = orbit_alpha_moment(&FullLattice::standard(3), OrbitGroup::Split21, 1, 1.0, 0.0, KGrid { theta: 64, phi: 1 }).unwrap();
        assert!(r.moment >= 1.0 - 1e-12);
    }

    #[test]
    fn alpha_two_grows_for_split_lattice() {
        let z = FullLattice::standard(4);
        let reps: Vec<MomentReport> = [1.0, 2.0, 3.0, 4.0]
            .iter()
            .map(|&t| orbit_alpha_moment(&z, OrbitGroup::Split22, 2, 1.5, t, KGrid::square(8)).unwrap())
            .collect();
        assert!(moment_log_slope(&reps).unwrap() >= 0.2);
    }

    #[test]
    fn null_plane_profile_ignores_phi() {
        let l = RationalSubspace::from_primitive_basis(vec![vec![1, 0, 0, 0], vec![0, 1, 0, 0]]).unwrap();
        let z = FullLattice::standard(4);
        let deltas = [0.4, 0.2, 0.1];
        let p = shrink_profile(&l, &z, &[5.0, 6.0, 7.0], &deltas, KGrid { theta: 8192, phi: 8 }).unwrap();
        for t in [5.0, 6.0, 7.0] {
            let mut last = f64::INFINITY;
            for r in p.rows.iter().filter(|r| r.t == t) {
                assert!(r.measure > 0.0 && r.measure <= last);
                last = r.measure;
                assert_eq!(r.phi_extent, PI);
                assert!((r.min_d - (-t).exp()).abs() < 1e-12);
            }
        }
        // Width ≈ 2 e^{−t/2} δ^{1/2}, matching e^{−t} m_t^{−1/2} δ^{1/2} with m_t = e^{−t}.
        let b = p.delta_exponent.unwrap();
        assert!((b - 0.5).abs() <= 0.15, "{b}");
        let a = p.t_exponent.unwrap();
        assert!((a - 0.5).abs() <= 0.15, "{a}");
    }
}
