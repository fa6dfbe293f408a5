//! Facet enumeration of a full-dimensional point set by the double description
//! method on the homogenised cone `{h : h·(1, v) ≥ 0 for every point v}`.
//!
//! Adjacency of extreme rays is decided combinatorially from zero sets, which stays
//! exact under the heavy degeneracy of highly symmetric point sets. Zero sets are
//! `u128` bitmasks, so at most 128 points are supported.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `⟨normal, v⟩ ≤ offset`, with `‖normal‖ = 1`.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct Halfspace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl Halfspace {
    pub fn slack(&self, v: &[f64]) -> f64 {
        self.offset - self.normal.iter().zip(v).map(|(a, b)| a * b).sum::<f64>()
    }
}

#[derive(Clone, Debug)]
struct Ray {
    h: Vec<f64>,
    zeros: u128,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(h: &mut [f64]) {
    let n = dot(h, h).sqrt();
    h.iter_mut().for_each(|x| *x /= n);
}

/// Greedy choice of `d` linearly independent rows.
fn initial_basis(rows: &[Vec<f64>], d: usize, eps: f64) -> Option<Vec<usize>> {
    let mut chosen = Vec::new();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let mut r = DVector::from_column_slice(row);
        for q in &basis {
            let c = r.dot(q);
            r -= q * c;
        }
        let n = r.norm();
        if n > eps {
            basis.push(r / n);
            chosen.push(i);
            if chosen.len() == d {
                return Some(chosen);
            }
        }
    }
    None
}

/// All facets of `conv(points)`. Points must span their ambient space.
pub fn facets(points: &[Vec<f64>], eps: f64) -> Result<Vec<Halfspace>> {
    if points.is_empty() {
        return Err(Error::Dimension("no points".into()));
    }
    if points.len() > 128 {
        return Err(Error::TooLarge(format!(
            "{} points exceed the limit of 128",
            points.len()
        )));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::Dimension("points of mixed dimension".into()));
    }
    let d = dim + 1;
    let rows: Vec<Vec<f64>> = points
        .iter()
        .map(|p| std::iter::once(1.0).chain(p.iter().copied()).collect())
        .collect();
    let basis = initial_basis(&rows, d, 1e-9)
        .ok_or_else(|| Error::Dimension("points do not span a full-dimensional hull".into()))?;

    let b = DMatrix::from_fn(d, d, |i, j| rows[basis[i]][j]);
    let inv = b
        .try_inverse()
        .ok_or_else(|| Error::Internal("singular initial basis".into()))?;
    let mut processed: u128 = basis.iter().fold(0, |m, &i| m | (1 << i));
    let mut rays: Vec<Ray> = (0..d)
        .map(|j| {
            let mut h: Vec<f64> = inv.column(j).iter().copied().collect();
            normalize(&mut h);
            let zeros = basis
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != j)
                .fold(0u128, |m, (_, &r)| m | (1 << r));
            Ray { h, zeros }
        })
        .collect();

    for i in 0..rows.len() {
        if processed & (1 << i) != 0 {
            continue;
        }
        let s: Vec<f64> = rays.iter().map(|r| dot(&rows[i], &r.h)).collect();
        let (mut pos, mut neg) = (Vec::new(), Vec::new());
        for (k, &v) in s.iter().enumerate() {
            if v > eps {
                pos.push(k);
            } else if v < -eps {
                neg.push(k);
            } else {
                rays[k].zeros |= 1 << i;
            }
        }
        let mut fresh = Vec::new();
        for &p in &pos {
            for &n in &neg {
                let common = rays[p].zeros & rays[n].zeros;
                if (common.count_ones() as usize) < d - 2 {
                    continue;
                }
                let adjacent = rays
                    .iter()
                    .enumerate()
                    .all(|(k, r)| k == p || k == n || r.zeros & common != common);
                if !adjacent {
                    continue;
                }
                let mut h: Vec<f64> = rays[n]
                    .h
                    .iter()
                    .zip(&rays[p].h)
                    .map(|(hn, hp)| s[p] * hn - s[n] * hp)
                    .collect();
                normalize(&mut h);
                fresh.push(Ray {
                    h,
                    zeros: common | (1 << i),
                });
            }
        }
        let mut keep: Vec<Ray> = rays
            .into_iter()
            .zip(&s)
            .filter(|(_, &v)| v >= -eps)
            .map(|(r, _)| r)
            .collect();
        keep.extend(fresh);
        rays = keep;
        processed |= 1 << i;
    }

    let facets: Vec<Halfspace> = rays
        .into_iter()
        .map(|r| {
            // h0 + h·v ≥ 0  ⇔  ⟨−h, v⟩ ≤ h0
            let scale = dot(&r.h[1..], &r.h[1..]).sqrt();
            Halfspace {
                normal: r.h[1..].iter().map(|x| -x / scale).collect(),
                offset: r.h[0] / scale,
            }
        })
        .collect();
    Ok(facets)
}

/// Checks that every point satisfies every facet and that each facet is tight on
/// `dim` affinely independent points. Returns the worst violation.
pub fn verify(points: &[Vec<f64>], facets: &[Halfspace], tol: f64) -> Result<f64> {
    let dim = points.first().map_or(0, Vec::len);
    let mut worst: f64 = 0.0;
    for (k, f) in facets.iter().enumerate() {
        let slacks: Vec<f64> = points.iter().map(|p| f.slack(p)).collect();
        worst = worst.max(-slacks.iter().copied().fold(f64::INFINITY, f64::min));
        let tight: Vec<Vec<f64>> = points
            .iter()
            .zip(&slacks)
            .filter(|(_, &s)| s.abs() <= tol)
            .map(|(p, _)| p.clone())
            .collect();
        if tight.len() < dim {
            return Err(Error::Internal(format!(
                "facet {k} is tight on only {} points",
                tight.len()
            )));
        }
        let diffs: Vec<Vec<f64>> = tight[1..]
            .iter()
            .map(|p| p.iter().zip(&tight[0]).map(|(a, b)| a - b).collect())
            .collect();
        if initial_basis(&diffs, dim - 1, 1e-7).is_none() {
            return Err(Error::Internal(format!(
                "facet {k} has affinely dependent tight points"
            )));
        }
    }
    if worst > tol {
        return Err(Error::Internal(format!("points violate facets by {worst:e}")));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_has_six_facets() {
        let pts: Vec<Vec<f64>> = (0..8)
            .map(|k| (0..3).map(|b| ((k >> b) & 1) as f64).collect())
            .collect();
        let f = facets(&pts, 1e-9).unwrap();
        assert_eq!(f.len(), 6);
        verify(&pts, &f, 1e-9).unwrap();
    }

    #[test]
    fn cross_polytope_has_eight_facets() {
        let mut pts = Vec::new();
        for axis in 0..3 {
            for s in [-1.0, 1.0] {
                let mut p = vec![0.0; 3];
                p[axis] = s;
                pts.push(p);
            }
        }
        // an interior point must not disturb the result
        pts.push(vec![0.1, 0.0, 0.1]);
        let f = facets(&pts, 1e-9).unwrap();
        assert_eq!(f.len(), 8);
        verify(&pts, &f, 1e-9).unwrap();
        for h in &f {
            assert!((h.offset - 1.0 / 3f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn flat_points_are_rejected() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![2.0, 0.0]];
        assert!(matches!(facets(&pts, 1e-9), Err(Error::Dimension(_))));
    }
}
