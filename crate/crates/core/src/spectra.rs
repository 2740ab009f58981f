//! Flat 2-tori with an Aharonov–Bohm flux: the eigenvalues
//! `4π²‖w + α‖²`, `w ∈ 𝔥*`, their pair correlation and its reduction to a
//! signature (2,2) inhomogeneous form.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::forms::{InhomForm, SymmetricForm};
use crate::regions::StarRegion;

/// A lattice `𝔥 ⊂ ℝ²` whose generators are the columns of `basis`, with flux `α`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Torus {
    pub basis: [[f64; 2]; 2],
    pub flux: [f64; 2],
}

fn det2(m: &[[f64; 2]; 2]) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

impl Torus {
    pub fn new(basis: [[f64; 2]; 2], flux: [f64; 2]) -> Result<Self> {
        let t = Torus { basis, flux };
        t.validate()?;
        Ok(t)
    }

    pub fn square(flux: [f64; 2]) -> Self {
        Torus { basis: [[1.0, 0.0], [0.0, 1.0]], flux }
    }

    pub fn validate(&self) -> Result<()> {
        let d = det2(&self.basis);
        if !(d.abs() > 1e-300) || !d.is_finite() || self.flux.iter().any(|x| !x.is_finite()) {
            return Err(Error::Degenerate("torus basis must be invertible and finite".into()));
        }
        Ok(())
    }

    pub fn covol(&self) -> f64 {
        det2(&self.basis).abs()
    }

    /// `c_𝔥 = covol(𝔥)/(4π)`.
    pub fn weyl_c(&self) -> f64 {
        self.covol() / (4.0 * PI)
    }

    /// Columns of `(basisᵀ)⁻¹`.
    pub fn dual_basis(&self) -> Result<[[f64; 2]; 2]> {
        self.validate()?;
        let b = &self.basis;
        let d = det2(b);
        // (Bᵀ)⁻¹ = (B⁻¹)ᵀ and B⁻¹ = adj(B)/det.
        Ok([[b[1][1] / d, -b[1][0] / d], [-b[0][1] / d, b[0][0] / d]])
    }

    /// Coordinates `β` of the flux in the dual basis, `β₁w₁ + β₂w₂ = α`.
    pub fn flux_coordinates(&self) -> Result<[f64; 2]> {
        self.validate()?;
        // The dual basis matrix is (Bᵀ)⁻¹, so β = Bᵀα.
        let b = &self.basis;
        let a = &self.flux;
        Ok([b[0][0] * a[0] + b[1][0] * a[1], b[0][1] * a[0] + b[1][1] * a[1]])
    }

    /// Gram matrix of `B(x₁, x₂) = 4π²‖x₁w₁ + x₂w₂‖²`.
    pub fn eigen_form(&self) -> Result<[[f64; 2]; 2]> {
        let d = self.dual_basis()?;
        let col = |j: usize| [d[0][j], d[1][j]];
        let g = |i: usize, j: usize| 4.0 * PI * PI * (col(i)[0] * col(j)[0] + col(i)[1] * col(j)[1]);
        Ok([[g(0, 0), g(0, 1)], [g(1, 0), g(1, 1)]])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluxSpectrum {
    pub values: Vec<f64>,
    pub cutoff: f64,
    pub weyl_c: f64,
}

/// Every `4π²‖w + α‖² ≤ Λ` with multiplicity, sorted ascending.
pub fn eigenvalues(torus: &Torus, lambda_max: f64) -> Result<FluxSpectrum> {
    if !(lambda_max > 0.0 && lambda_max.is_finite()) {
        return Err(invalid(format!("lambda_max must be positive, got {lambda_max}")));
    }
    let dual = torus.dual_basis()?;
    let r = lambda_max.sqrt() / (2.0 * PI);
    // k = Bᵀ(y − α) for ‖y‖ ≤ r, so |k_i + (Bᵀα)_i| ≤ r‖b_i‖.
    let beta = torus.flux_coordinates()?;
    let b = &torus.basis;
    let range = |i: usize| {
        let len = (b[0][i] * b[0][i] + b[1][i] * b[1][i]).sqrt();
        ((-beta[i] - r * len).floor() as i64, (-beta[i] + r * len).ceil() as i64)
    };
    let (lo0, hi0) = range(0);
    let (lo1, hi1) = range(1);
    let four_pi2 = 4.0 * PI * PI;
    let mut values: Vec<f64> = (lo0..=hi0)
        .into_par_iter()
        .flat_map_iter(|k0| {
            (lo1..=hi1).filter_map(move |k1| {
                let x = dual[0][0] * k0 as f64 + dual[0][1] * k1 as f64 + torus.flux[0];
                let y = dual[1][0] * k0 as f64 + dual[1][1] * k1 as f64 + torus.flux[1];
                let v = four_pi2 * (x * x + y * y);
                (v <= lambda_max).then_some(v)
            })
        })
        .collect();
    values.sort_by(f64::total_cmp);
    Ok(FluxSpectrum { values, cutoff: lambda_max, weyl_c: torus.weyl_c() })
}

fn check_window(a: f64, b: f64) -> Result<()> {
    if !(a < b) {
        return Err(Error::InvalidInterval { a, b });
    }
    if a <= 0.0 && 0.0 <= b {
        return Err(invalid(format!("interval [{a}, {b}] contains 0")));
    }
    Ok(())
}

/// Number of ordered pairs `(j, k)` with `λ_j, λ_k < T` and
/// `a ≤ λ_j − λ_k ≤ b`, by a two-pointer sweep.
pub fn pair_count(spectrum: &FluxSpectrum, a: f64, b: f64, t: f64) -> Result<u64> {
    check_window(a, b)?;
    if t > spectrum.cutoff {
        return Err(invalid(format!("T = {t} exceeds the spectrum cutoff {}", spectrum.cutoff)));
    }
    let m = spectrum.values.partition_point(|&v| v < t);
    let v = &spectrum.values[..m];
    // For fixed j the rounded difference v_j − v_k is nonincreasing in k and
    // for fixed k nondecreasing in j, so both pointers only move forward.
    let (mut lo, mut hi) = (0usize, 0usize);
    let mut count = 0u64;
    for &vj in v {
        while lo < m && vj - v[lo] > b {
            lo += 1;
        }
        while hi < m && vj - v[hi] >= a {
            hi += 1;
        }
        if hi > lo {
            count += (hi - lo) as u64;
        }
    }
    Ok(count)
}

/// `R(a, b, T)`: the pair count divided by `T`.
pub fn pair_correlation(spectrum: &FluxSpectrum, a: f64, b: f64, t: f64) -> Result<f64> {
    Ok(pair_count(spectrum, a, b, t)? as f64 / t)
}

/// `Q(x) = B(x₁, x₂) − B(x₃, x₄)` with shift `(β, β)` and the region
/// `max(B(x₁, x₂)^{1/2}, B(x₃, x₄)^{1/2}) < 1`.
pub fn to_inhomogeneous_form(torus: &Torus) -> Result<(InhomForm<f64>, StarRegion)> {
    let g = torus.eigen_form()?;
    let beta = torus.flux_coordinates()?;
    let mut m = vec![vec![0.0; 4]; 4];
    for i in 0..2 {
        for j in 0..2 {
            m[i][j] = g[i][j];
            m[i + 2][j + 2] = -g[i][j];
        }
    }
    let form = InhomForm::new(SymmetricForm::new(m)?, vec![beta[0], beta[1], beta[0], beta[1]])?;
    Ok((form, StarRegion::max_split(g, g)?))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BerryTaborRow {
    pub t: f64,
    pub r: f64,
    pub c_squared: f64,
    pub deviation: f64,
}

/// Rows `(T, R, c², |R/(c²(b − a)) − 1|)`.
pub fn berry_tabor_table(torus: &Torus, a: f64, b: f64, t_grid: &[f64]) -> Result<Vec<BerryTaborRow>> {
    check_window(a, b)?;
    if t_grid.is_empty() || t_grid.iter().any(|&t| !(t > 0.0)) {
        return Err(invalid("T grid must be nonempty and positive"));
    }
    let top = t_grid.iter().cloned().fold(0.0, f64::max);
    let spectrum = eigenvalues(torus, top)?;
    let c2 = spectrum.weyl_c * spectrum.weyl_c;
    t_grid
        .iter()
        .map(|&t| {
            let r = pair_correlation(&spectrum, a, b, t)?;
            Ok(BerryTaborRow { t, r, c_squared: c2, deviation: (r / (c2 * (b - a)) - 1.0).abs() })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientReport {
    /// `(A₁, A₂)` of `B = x₁² + A₁x₁x₂ + A₂x₂²` after normalization.
    pub coefficients: [f64; 2],
    pub n: f64,
    pub c: f64,
    pub q_max: u64,
    pub passes: bool,
    /// First `(q, p₁, p₂)` with `max_i |A_i − p_i/q| ≤ C/q^N`.
    pub violation: Option<(u64, i64, i64)>,
}

/// Scans `q ∈ [2, q_max]` for `max_i |A_i − p_i/q| ≤ C/q^N` with nearest `p_i`.
pub fn coefficient_condition(torus: &Torus, n: f64, c: f64, q_max: u64) -> Result<CoefficientReport> {
    if !(n > 0.0 && c > 0.0) || q_max < 2 {
        return Err(invalid("need N > 0, C > 0 and q_max ≥ 2"));
    }
    let g = torus.eigen_form()?;
    let coefficients = [2.0 * g[0][1] / g[0][0], g[1][1] / g[0][0]];
    let mut violation = None;
    for q in 2..=q_max {
        let qf = q as f64;
        let p: Vec<i64> = coefficients.iter().map(|a| (a * qf).round() as i64).collect();
        let err = coefficients.iter().zip(&p).map(|(a, &p)| (a - p as f64 / qf).abs()).fold(0.0, f64::max);
        if err <= c / qf.powf(n) {
            violation = Some((q, p[0], p[1]));
            break;
        }
    }
    Ok(CoefficientReport { coefficients, n, c, q_max, passes: violation.is_none(), violation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_torus(seed: u64) -> Torus {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b = [[0.0; 2]; 2];
        loop {
            for row in b.iter_mut() {
                for x in row.iter_mut() {
                    *x = rng.gen_range(-1.5..1.5);
                }
            }
            if det2(&b).abs() > 0.3 {
                break;
            }
        }
        Torus::new(b, [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).unwrap()
    }

    #[test]
    fn dual_lattices() {
        assert_eq!(Torus::square([0.0, 0.0]).dual_basis().unwrap(), [[1.0, 0.0], [0.0, 1.0]]);
        let t = Torus::new([[2.0, 0.0], [0.0, 0.5]], [0.0, 0.0]).unwrap();
        assert_eq!(t.dual_basis().unwrap(), [[0.5, 0.0], [0.0, 2.0]]);
        for seed in 0..10 {
            let t = random_torus(seed);
            let d = t.dual_basis().unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    let p = d[0][i] * t.basis[0][j] + d[1][i] * t.basis[1][j];
                    assert!((p - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
                }
            }
        }
        assert!(Torus::new([[1.0, 2.0], [2.0, 4.0]], [0.0, 0.0]).is_err());
    }

    #[test]
    fn square_torus_low_levels() {
        let s = eigenvalues(&Torus::square([0.0, 0.0]), 4.0 * PI * PI * 1.5).unwrap();
        assert_eq!(s.values.len(), 5);
        assert_eq!(s.values[0], 0.0);
        assert!(s.values[1..].iter().all(|&v| (v - 4.0 * PI * PI).abs() < 1e-9));
        assert!((s.weyl_c - 1.0 / (4.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn matches_box_scan() {
        for seed in 0..5 {
            let t = random_torus(seed);
            let lmax = 3000.0;
            let s = eigenvalues(&t, lmax).unwrap();
            let d = t.dual_basis().unwrap();
            let mut brute = Vec::new();
            for k0 in -60i64..=60 {
                for k1 in -60i64..=60 {
                    let x = d[0][0] * k0 as f64 + d[0][1] * k1 as f64 + t.flux[0];
                    let y = d[1][0] * k0 as f64 + d[1][1] * k1 as f64 + t.flux[1];
                    let v = 4.0 * PI * PI * (x * x + y * y);
                    if v <= lmax {
                        brute.push(v);
                    }
                }
            }
            brute.sort_by(f64::total_cmp);
            assert_eq!(s.values, brute);
        }
    }

    #[test]
    fn weyl_law() {
        for t in [Torus::square([0.1, 0.3]), random_torus(42)] {
            let unimodular = Torus::new(
                [[t.basis[0][0] / t.covol().sqrt(), t.basis[0][1] / t.covol().sqrt()], [t.basis[1][0] / t.covol().sqrt(), t.basis[1][1] / t.covol().sqrt()]],
                t.flux,
            )
            .unwrap();
            let s = eigenvalues(&unimodular, 2e5).unwrap();
            let half = s.cutoff / 2.0;
            let count = s.values.partition_point(|&v| v <= half) as f64;
            assert!((count / (s.weyl_c * half) - 1.0).abs() <= 0.02);
        }
    }

    fn naive_pairs(v: &[f64], a: f64, b: f64, t: f64) -> u64 {
        let mut c = 0;
        for &x in v.iter().filter(|&&x| x < t) {
            for &y in v.iter().filter(|&&y| y < t) {
                let d = x - y;
                if a <= d && d <= b {
                    c += 1;
                }
            }
        }
        c
    }

    #[test]
    fn pair_count_matches_double_loop() {
        for seed in 0..4 {
            let t = random_torus(seed);
            let s = eigenvalues(&t, 5000.0).unwrap();
            assert!(s.values.len() <= 3000);
            for (a, b) in [(0.1, 1.1), (-3.0, -0.5), (5.0, 40.0), (0.0001, 0.5)] {
                assert_eq!(pair_count(&s, a, b, 4000.0).unwrap(), naive_pairs(&s.values, a, b, 4000.0));
                assert_eq!(pair_count(&s, a, b, 4000.0).unwrap(), pair_count(&s, -b, -a, 4000.0).unwrap());
            }
        }
        // Ties are index pairs: the square torus has multiplicity everywhere.
        let s = eigenvalues(&Torus::square([0.0, 0.0]), 2000.0).unwrap();
        assert_eq!(pair_count(&s, 1.0, 100.0, 1500.0).unwrap(), naive_pairs(&s.values, 1.0, 100.0, 1500.0));
    }

    #[test]
    fn window_validation() {
        let s = eigenvalues(&Torus::square([0.2, 0.1]), 100.0).unwrap();
        assert!(pair_correlation(&s, -1.0, 1.0, 50.0).is_err());
        assert!(pair_correlation(&s, 0.0, 1.0, 50.0).is_err());
        assert!(pair_correlation(&s, 2.0, 1.0, 50.0).is_err());
        assert!(pair_correlation(&s, 1.0, 2.0, 500.0).is_err());
        assert_eq!(pair_correlation(&s, 1e-9, 2e-9, 50.0).unwrap(), 0.0);
    }

    #[test]
    fn form_reproduces_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let t = random_torus(5);
        let (form, region) = to_inhomogeneous_form(&t).unwrap();
        let sig = form.homogeneous().signature().unwrap();
        assert_eq!((sig.positive, sig.negative), (2, 2));
        let d = t.dual_basis().unwrap();
        let lam = |k: [i64; 2]| {
            let x = d[0][0] * k[0] as f64 + d[0][1] * k[1] as f64 + t.flux[0];
            let y = d[1][0] * k[0] as f64 + d[1][1] * k[1] as f64 + t.flux[1];
            4.0 * PI * PI * (x * x + y * y)
        };
        for _ in 0..20 {
            let j = [rng.gen_range(-20..20), rng.gen_range(-20..20)];
            let k = [rng.gen_range(-20..20), rng.gen_range(-20..20)];
            let q = form.evaluate(&[j[0] as f64, j[1] as f64, k[0] as f64, k[1] as f64]).unwrap();
            let want = lam(j) - lam(k);
            assert!((q - want).abs() <= 1e-9 * (lam(j) + lam(k)).max(1.0));
            // Both eigenvalues below T² exactly when the shifted point lies in TΩ.
            let bj = lam(j).max(lam(k)).sqrt();
            let p: Vec<f64> = [j[0], j[1], k[0], k[1]].iter().map(|&x| x as f64).collect();
            let shifted: Vec<f64> = p.iter().zip(form.shift()).map(|(x, s)| x + s).collect();
            assert!(region.contains(&shifted, bj * 1.000001));
            assert!(!region.contains(&shifted, bj * 0.999999));
        }
        let (zero, _) = to_inhomogeneous_form(&Torus::square([0.0, 0.0])).unwrap();
        assert!(zero.shift().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn rational_flux_has_no_small_differences() {
        let rows = berry_tabor_table(&Torus::square([0.5, 0.5]), 0.1, 1.1, &[1e4, 2e4]).unwrap();
        assert!(rows.iter().all(|r| r.r == 0.0 && r.deviation == 1.0));
        let wide = berry_tabor_table(&Torus::square([0.5, 0.5]), 0.1, 2.1, &[1e4]).unwrap();
        assert_eq!(wide[0].c_squared * 2.0, rows[0].c_squared * 2.0);
    }

    #[test]
    fn coefficient_condition_cases() {
        let rational = Torus::square([0.0, 0.0]);
        let r = coefficient_condition(&rational, 3.0, 1e-3, 100).unwrap();
        assert!(!r.passes);
        // B = x₁² + √2 x₁x₂ + √3 x₂² after normalization.
        let g = [[1.0, 2f64.sqrt() / 2.0], [2f64.sqrt() / 2.0, 3f64.sqrt()]];
        let l11 = g[0][0].sqrt();
        let l21 = g[0][1] / l11;
        let l22 = (g[1][1] - l21 * l21).sqrt();
        // Dual basis D = Lᵀ/(2π) has Gram g/(4π²); the lattice basis is (Dᵀ)⁻¹.
        let s = 2.0 * PI;
        let dual = [[l11 / s, l21 / s], [0.0, l22 / s]];
        let det = det2(&dual);
        let basis = [[dual[1][1] / det, -dual[1][0] / det], [-dual[0][1] / det, dual[0][0] / det]];
        let t = Torus::new(basis, [0.0, 0.0]).unwrap();
        let r = coefficient_condition(&t, 3.0, 1e-3, 10_000).unwrap();
        assert!((r.coefficients[0] - 2f64.sqrt()).abs() < 1e-12);
        assert!((r.coefficients[1] - 3f64.sqrt()).abs() < 1e-12);
        assert!(r.passes, "{r:?}");
        let mut prev = false;
        for n in [1.0, 2.0, 3.0, 4.0] {
            let p = coefficient_condition(&t, n, 0.5, 2000).unwrap().passes;
            assert!(!prev || p);
            prev = p;
        }
    }
}
