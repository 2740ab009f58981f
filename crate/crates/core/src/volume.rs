//! Monte Carlo estimates of the shell volume
//! `Vol{x ∈ TΩ : a < Q_ξ(x) < b}` and of the constant `λ_{Q,Ω}` in
//! `Vol ∼ λ(b − a)T^{n−2}`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_interval, invalid, Result};
use crate::forms::InhomForm;
use crate::regions::StarRegion;
use crate::scalar::Scalar;

pub const MIN_SAMPLES: u64 = 10_000;
pub const BATCH: u64 = 1 << 16;
/// Fewer accepted samples than this raises `low_statistics`.
pub const LOW_STATISTICS: u64 = 100;
pub const GENERATOR: &str = "ChaCha8Rng";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellVolume {
    pub t: f64,
    pub volume: f64,
    pub std_error: f64,
    pub samples: u64,
    pub accepted: u64,
    pub box_volume: f64,
    pub seed: u64,
    pub low_statistics: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeEstimate {
    pub lambda_hat: f64,
    pub std_error: f64,
    pub samples: u64,
    pub t_used: f64,
    pub seed: u64,
    pub generator: String,
    pub t_grid: Vec<f64>,
    /// Weighted slope of `Vol/((b−a)T^{n−2}) − λ̂` against `1/T`.
    pub drift: f64,
    pub shells: Vec<ShellVolume>,
    pub low_statistics: bool,
}

/// Quadratic form in the `f64` arithmetic used by the sampler.
struct FloatShell {
    m: Vec<Vec<f64>>,
    xi: Vec<f64>,
}

impl FloatShell {
    fn new<S: Scalar>(form: &InhomForm<S>) -> Self {
        let f = form.to_f64();
        FloatShell { m: f.homogeneous().entries().clone(), xi: f.shift().to_vec() }
    }

    fn value(&self, x: &[f64], y: &mut [f64]) -> f64 {
        for (yi, (xi, s)) in y.iter_mut().zip(x.iter().zip(&self.xi)) {
            *yi = xi + s;
        }
        let mut total = 0.0;
        for (i, row) in self.m.iter().enumerate() {
            let mut r = 0.0;
            for (j, mij) in row.iter().enumerate() {
                r += mij * y[j];
            }
            total += y[i] * r;
        }
        total
    }
}

/// Substream for batch `k` of a run seeded with `seed`.
pub fn batch_rng(seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng
}

/// Box-sampling estimator: uniform points in the bounding box of `TΩ`,
/// accepted when inside `TΩ` with `a < Q_ξ(x) < b`; binomial standard error.
pub fn shell_volume_mc<S: Scalar>(
    form: &InhomForm<S>,
    region: &StarRegion,
    a: f64,
    b: f64,
    t: f64,
    samples: u64,
    seed: u64,
) -> Result<ShellVolume> {
    check_interval(a, b)?;
    check_dim(form.dim(), region.dim())?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid(format!("T must be positive, got {t}")));
    }
    if samples < MIN_SAMPLES {
        return Err(invalid(format!("need at least {MIN_SAMPLES} samples, got {samples}")));
    }
    let shell = FloatShell::new(form);
    let h = region.half_widths(t);
    let n = h.len();
    let box_volume: f64 = h.iter().map(|w| 2.0 * w).product();
    let batches = samples.div_ceil(BATCH);
    let accepted: u64 = (0..batches)
        .into_par_iter()
        .map(|k| {
            let mut rng = batch_rng(seed, k);
            let size = BATCH.min(samples - k * BATCH);
            let mut x = vec![0.0; n];
            let mut y = vec![0.0; n];
            let mut hits = 0u64;
            for _ in 0..size {
                for (xi, w) in x.iter_mut().zip(&h) {
                    *xi = rng.gen_range(-*w..*w);
                }
                let q = shell.value(&x, &mut y);
                if a < q && q < b && region.contains(&x, t) {
                    hits += 1;
                }
            }
            hits
        })
        .sum();
    let nf = samples as f64;
    let p = accepted as f64 / nf;
    // Zero hits would report a zero error; floor the variance at one hit.
    let var = (p * (1.0 - p)).max(1.0 / nf * (1.0 - 1.0 / nf));
    Ok(ShellVolume {
        t,
        volume: box_volume * p,
        std_error: box_volume * (var / nf).sqrt(),
        samples,
        accepted,
        box_volume,
        seed,
        low_statistics: accepted < LOW_STATISTICS,
    })
}

/// Weighted least-squares fit of `λ` over a grid of dilations; the seed for
/// grid point `i` is `seed + i`.
pub fn lambda_fit<S: Scalar>(
    form: &InhomForm<S>,
    region: &StarRegion,
    a: f64,
    b: f64,
    t_grid: &[f64],
    samples_per_t: u64,
    seed: u64,
) -> Result<VolumeEstimate> {
    if t_grid.len() < 3 {
        return Err(invalid(format!("lambda fit needs at least 3 T values, got {}", t_grid.len())));
    }
    if t_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(invalid("T grid must be strictly increasing"));
    }
    let exponent = form.dim() as i32 - 2;
    let shells = t_grid
        .iter()
        .enumerate()
        .map(|(i, &t)| shell_volume_mc(form, region, a, b, t, samples_per_t, seed.wrapping_add(i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let scaled: Vec<(f64, f64, f64)> = shells
        .iter()
        .map(|s| {
            let norm = (b - a) * s.t.powi(exponent);
            (1.0 / s.t, s.volume / norm, s.std_error / norm)
        })
        .collect();
    let weights: Vec<f64> = scaled.iter().map(|&(_, _, e)| 1.0 / (e * e)).collect();
    let wsum: f64 = weights.iter().sum();
    let lambda_hat = scaled.iter().zip(&weights).map(|(&(_, y, _), w)| w * y).sum::<f64>() / wsum;
    let xbar = scaled.iter().zip(&weights).map(|(&(x, _, _), w)| w * x).sum::<f64>() / wsum;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (&(x, y, _), w) in scaled.iter().zip(&weights) {
        sxy += w * (x - xbar) * (y - lambda_hat);
        sxx += w * (x - xbar) * (x - xbar);
    }
    Ok(VolumeEstimate {
        lambda_hat,
        std_error: wsum.sqrt().recip(),
        samples: samples_per_t * t_grid.len() as u64,
        t_used: *t_grid.last().unwrap(),
        seed,
        generator: GENERATOR.to_string(),
        t_grid: t_grid.to_vec(),
        drift: if sxx > 0.0 { sxy / sxx } else { 0.0 },
        low_statistics: shells.iter().any(|s| s.low_statistics),
        shells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::SymmetricForm;
    use std::f64::consts::PI;

    fn diag22() -> InhomForm<f64> {
        InhomForm::homogeneous_only(SymmetricForm::diagonal(vec![1.0, 1.0, -1.0, -1.0]).unwrap())
    }

    /// Vol{|x| < T, −1 < |u|² − |v|² < 1} = π²(T² − 1/2) for T ≥ 1, by
    /// integrating out the two polar angles.
    fn closed_form(t: f64) -> f64 {
        PI * PI * (t * t - 0.5)
    }

    /// Halton sequence in bases 2, 3, 5, 7 with the same acceptance rule.
    fn halton_volume(t: f64, points: u64) -> f64 {
        fn radical_inverse(mut i: u64, base: u64) -> f64 {
            let (mut f, mut r) = (1.0, 0.0);
            while i > 0 {
                f /= base as f64;
                r += f * (i % base) as f64;
                i /= base;
            }
            r
        }
        let mut hits = 0u64;
        for i in 1..=points {
            let x: Vec<f64> = [2, 3, 5, 7].iter().map(|&b| t * (2.0 * radical_inverse(i, b) - 1.0)).collect();
            let q = x[0] * x[0] + x[1] * x[1] - x[2] * x[2] - x[3] * x[3];
            if q.abs() < 1.0 && x.iter().map(|v| v * v).sum::<f64>() < t * t {
                hits += 1;
            }
        }
        (2.0 * t).powi(4) * hits as f64 / points as f64
    }

    #[test]
    fn matches_closed_form_and_qmc() {
        let t = 4.0;
        let r = shell_volume_mc(&diag22(), &StarRegion::ball(4, 1.0).unwrap(), -1.0, 1.0, t, 2_000_000, 7).unwrap();
        let exact = closed_form(t);
        assert!((r.volume - exact).abs() < 4.0 * r.std_error, "{} vs {exact} ± {}", r.volume, r.std_error);
        let qmc = halton_volume(t, 2_000_000);
        assert!((qmc - exact).abs() / exact < 0.01, "{qmc} vs {exact}");
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let reg = StarRegion::ball(4, 1.0).unwrap();
        let a = shell_volume_mc(&diag22(), &reg, -1.0, 1.0, 3.0, 100_000, 1).unwrap();
        let b = shell_volume_mc(&diag22(), &reg, -1.0, 1.0, 3.0, 100_000, 1).unwrap();
        let c = shell_volume_mc(&diag22(), &reg, -1.0, 1.0, 3.0, 100_000, 2).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.accepted, c.accepted);
    }

    #[test]
    fn empty_shell_limit() {
        let reg = StarRegion::ball(4, 1.0).unwrap();
        let r = shell_volume_mc(&diag22(), &reg, 0.3, 0.3 + 1e-12, 2.0, 100_000, 3).unwrap();
        assert_eq!(r.volume, 0.0);
        assert!(r.low_statistics && r.std_error > 0.0);
        assert!(shell_volume_mc(&diag22(), &reg, 1.0, 0.0, 2.0, 100_000, 3).is_err());
        assert!(shell_volume_mc(&diag22(), &reg, 0.0, 1.0, 2.0, 10, 3).is_err());
    }

    #[test]
    fn fit_recovers_lambda_and_rejects_bad_grids() {
        let reg = StarRegion::ball(4, 1.0).unwrap();
        let est = lambda_fit(&diag22(), &reg, -1.0, 1.0, &[8.0, 12.0, 16.0], 2_000_000, 11).unwrap();
        let lambda = PI * PI / 2.0;
        assert!((est.lambda_hat - lambda).abs() < 4.0 * est.std_error + 0.01 * lambda, "{est:?}");
        assert!(lambda_fit(&diag22(), &reg, -1.0, 1.0, &[5.0, 5.0, 5.0], 20_000, 1).is_err());
        assert!(lambda_fit(&diag22(), &reg, -1.0, 1.0, &[5.0, 6.0], 20_000, 1).is_err());
    }

    #[test]
    fn interval_and_shift_independence() {
        let reg = StarRegion::ball(4, 1.0).unwrap();
        let grid = [6.0, 8.0, 10.0];
        let base = lambda_fit(&diag22(), &reg, -0.5, 0.5, &grid, 1_000_000, 5).unwrap();
        let wide = lambda_fit(&diag22(), &reg, -0.5, 1.5, &grid, 1_000_000, 6).unwrap();
        let shifted_form = diag22().with_shift(vec![0.3, 0.1, 0.0, 0.2]).unwrap();
        let shifted = lambda_fit(&shifted_form, &reg, -0.5, 0.5, &grid, 1_000_000, 7).unwrap();
        for other in [&wide, &shifted] {
            let sigma = (base.std_error.powi(2) + other.std_error.powi(2)).sqrt();
            // The finite-T correction is O(1/T²) relative; allow it on top of 3σ.
            assert!((base.lambda_hat - other.lambda_hat).abs() < 3.0 * sigma + 0.02 * base.lambda_hat);
        }
    }

    #[test]
    fn std_error_scales_as_inverse_sqrt() {
        let reg = StarRegion::ball(4, 1.0).unwrap();
        let mut ratio = 0.0;
        for seed in 0..20 {
            let a = shell_volume_mc(&diag22(), &reg, -1.0, 1.0, 3.0, 50_000, seed).unwrap();
            let b = shell_volume_mc(&diag22(), &reg, -1.0, 1.0, 3.0, 100_000, seed + 100).unwrap();
            ratio += b.std_error / a.std_error;
        }
        ratio /= 20.0;
        assert!((ratio - 0.5f64.sqrt()).abs() < 0.1 * 0.5f64.sqrt(), "{ratio}");
    }
}
