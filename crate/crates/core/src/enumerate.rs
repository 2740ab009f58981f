//! Fincke–Pohst enumeration of integer points in an ellipsoid
//! `{z ∈ ℤⁿ : (z − c)ᵀ G (z − c) ≤ R²}`.
//!
//! The radius is inflated by a relative `1e-9` so no point is lost to
//! rounding; callers re-check their exact predicate on every visited point.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Upper-triangular factor in the form used by Fincke–Pohst:
/// `xᵀGx = Σ_i q[i][i] (x_i + Σ_{j>i} q[i][j] x_j)²`.
fn pohst_factor(gram: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = gram.len();
    let mut q: Vec<Vec<f64>> = gram.to_vec();
    for i in 0..n {
        for j in i + 1..n {
            q[j][i] = q[i][j];
            q[i][j] /= q[i][i];
        }
        for k in i + 1..n {
            for l in k..n {
                q[k][l] -= q[k][i] * q[i][l];
            }
        }
        if !(q[i][i] > 0.0) {
            return None;
        }
    }
    Some(q)
}

pub struct Enumeration {
    pub visited_nodes: u64,
}

/// Calls `visit(z, value)` for every integer point with
/// `(z − c)ᵀ G (z − c) ≤ radius_sq` (up to the rounding slack), where
/// `value` is the floating quadratic value. Fails once more than
/// `node_cap` search-tree nodes are opened.
pub fn for_each_in_ellipsoid(
    gram: &[Vec<f64>],
    center: &[f64],
    radius_sq: f64,
    node_cap: u64,
    mut visit: impl FnMut(&[i64], f64),
) -> Result<Enumeration> {
    let n = gram.len();
    let q = pohst_factor(gram)
        .ok_or_else(|| Error::Invalid("enumeration needs a positive-definite Gram matrix".into()))?;
    let bound = radius_sq * (1.0 + 1e-9) + 1e-12;
    let mut z = vec![0i64; n];
    let mut nodes = 0u64;
    if n == 0 {
        visit(&z, 0.0);
        return Ok(Enumeration { visited_nodes: 1 });
    }
    let frame = Frame { q: &q, c: center, bound, cap: node_cap };
    recurse(&frame, n - 1, 0.0, &mut z, &mut nodes, &mut visit)?;
    Ok(Enumeration { visited_nodes: nodes })
}

struct Frame<'a> {
    q: &'a [Vec<f64>],
    c: &'a [f64],
    bound: f64,
    cap: u64,
}

impl Frame<'_> {
    fn range(&self, level: usize, partial: f64, z: &[i64]) -> (f64, i64, i64) {
        let n = z.len();
        let mut shift = 0.0;
        for j in level + 1..n {
            shift += self.q[level][j] * (z[j] as f64 - self.c[j]);
        }
        let centre = self.c[level] - shift;
        let room = (self.bound - partial).max(0.0);
        let half = (room / self.q[level][level]).sqrt();
        (centre, (centre - half).ceil() as i64, (centre + half).floor() as i64)
    }
}

fn recurse(
    f: &Frame<'_>,
    level: usize,
    partial: f64,
    z: &mut [i64],
    nodes: &mut u64,
    visit: &mut dyn FnMut(&[i64], f64),
) -> Result<()> {
    let (centre, lo, hi) = f.range(level, partial, z);
    for v in lo..=hi {
        *nodes += 1;
        if *nodes > f.cap {
            return Err(Error::CapExceeded(format!(
                "ellipsoid enumeration opened more than {} nodes",
                f.cap
            )));
        }
        let d = v as f64 - centre;
        let val = partial + f.q[level][level] * d * d;
        if val > f.bound {
            continue;
        }
        z[level] = v;
        if level == 0 {
            visit(z, val);
        } else {
            recurse(f, level - 1, val, z, nodes, visit)?;
        }
    }
    Ok(())
}

/// Parallel variant of [`for_each_in_ellipsoid`] that keeps the points for
/// which `keep` returns `Some`. Work is split over the values of the last
/// coordinate; the output order is deterministic. `node_cap` applies per
/// split.
pub fn par_filter_in_ellipsoid<T: Send>(
    gram: &[Vec<f64>],
    center: &[f64],
    radius_sq: f64,
    node_cap: u64,
    keep: impl Fn(&[i64], f64) -> Option<T> + Sync,
) -> Result<Vec<T>> {
    let n = gram.len();
    if n < 2 {
        let mut out = Vec::new();
        for_each_in_ellipsoid(gram, center, radius_sq, node_cap, |z, v| {
            if let Some(t) = keep(z, v) {
                out.push(t);
            }
        })?;
        return Ok(out);
    }
    let q = pohst_factor(gram)
        .ok_or_else(|| Error::Invalid("enumeration needs a positive-definite Gram matrix".into()))?;
    let frame = Frame { q: &q, c: center, bound: radius_sq * (1.0 + 1e-9) + 1e-12, cap: node_cap };
    let top = n - 1;
    let (centre, lo, hi) = frame.range(top, 0.0, &vec![0; n]);
    let parts: Vec<Result<Vec<T>>> = (lo..=hi)
        .into_par_iter()
        .map(|v| {
            let d = v as f64 - centre;
            let val = frame.q[top][top] * d * d;
            let mut out = Vec::new();
            if val > frame.bound {
                return Ok(out);
            }
            let mut z = vec![0i64; n];
            z[top] = v;
            let mut nodes = 0u64;
            recurse(&frame, top - 1, val, &mut z, &mut nodes, &mut |p, w| {
                if let Some(t) = keep(p, w) {
                    out.push(t);
                }
            })?;
            Ok(out)
        })
        .collect();
    let mut out = Vec::new();
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Gram matrix `BᵀB` of the vectors `basis` (one vector per entry).
pub fn gram_of(basis: &[Vec<f64>]) -> Vec<Vec<f64>> {
    basis
        .iter()
        .map(|u| basis.iter().map(|v| crate::linalg::dot(u, v)).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_ball_points() {
        let g = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        let mut count = 0;
        for_each_in_ellipsoid(&g, &[0.0; 3], 4.0, u64::MAX, |z, _| {
            assert!(z.iter().map(|x| x * x).sum::<i64>() <= 4);
            count += 1;
        })
        .unwrap();
        let mut brute = 0;
        for a in -2i64..=2 {
            for b in -2i64..=2 {
                for c in -2i64..=2 {
                    if a * a + b * b + c * c <= 4 {
                        brute += 1;
                    }
                }
            }
        }
        assert_eq!(count, brute);
    }

    #[test]
    fn shifted_skew_ellipsoid_matches_box_scan() {
        let g = vec![vec![2.0, 0.7], vec![0.7, 1.0]];
        let c = [0.3, -1.4];
        let r2 = 9.5;
        let mut found = Vec::new();
        for_each_in_ellipsoid(&g, &c, r2, u64::MAX, |z, _| found.push(z.to_vec())).unwrap();
        let f = |x: f64, y: f64| 2.0 * x * x + 1.4 * x * y + y * y;
        let mut brute = Vec::new();
        for y in -20i64..=20 {
            for x in -20i64..=20 {
                if f(x as f64 - c[0], y as f64 - c[1]) <= r2 {
                    brute.push(vec![x, y]);
                }
            }
        }
        found.sort();
        brute.sort();
        assert_eq!(found, brute);
    }

    #[test]
    fn cap_is_enforced() {
        let g = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let r = for_each_in_ellipsoid(&g, &[0.0, 0.0], 1e6, 100, |_, _| {});
        assert!(matches!(r, Err(Error::CapExceeded(_))));
    }
}
