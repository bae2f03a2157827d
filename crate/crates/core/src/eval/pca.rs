//! Two-component PCA by power iteration with deflation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Dense;

pub const POWER_TOL: f64 = 1e-10;
pub const POWER_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca2 {
    /// n × 2 projections onto the two leading axes.
    pub coords: Dense,
    pub components: [Vec<f64>; 2],
    pub eigenvalues: [f64; 2],
    /// Fraction of total variance captured by each axis.
    pub explained_variance: [f64; 2],
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

fn mat_vec(m: &Dense, v: &[f64]) -> Vec<f64> {
    (0..m.rows()).map(|r| dot(m.row(r), v)).collect()
}

/// Flips `v` so its largest-magnitude entry (first on ties) is positive.
fn orient(v: &mut [f64]) {
    let mut best = 0;
    for k in 1..v.len() {
        if v[k].abs() > v[best].abs() {
            best = k;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Leading eigenpair of a symmetric positive semidefinite matrix, or `None`
/// when the matrix is numerically zero.
fn leading_eigenpair(c: &Dense, scale: f64) -> Option<(f64, Vec<f64>)> {
    let p = c.rows();
    // start from the heaviest column; it has a component along the top axis
    // unless that axis is orthogonal to every basis vector we could pick
    let start = (0..p)
        .max_by(|&a, &b| {
            let na: f64 = (0..p).map(|r| c.get(r, a).powi(2)).sum();
            let nb: f64 = (0..p).map(|r| c.get(r, b).powi(2)).sum();
            na.total_cmp(&nb)
        })
        .unwrap_or(0);
    let mut v: Vec<f64> = (0..p).map(|r| c.get(r, start)).collect();
    if normalize(&mut v) <= scale * 1e-14 {
        return None;
    }
    for _ in 0..POWER_MAX_ITER {
        let mut w = mat_vec(c, &v);
        if normalize(&mut w) <= scale * 1e-14 {
            return None;
        }
        let delta = w.iter().zip(&v).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        v = w;
        if delta < POWER_TOL {
            break;
        }
    }
    let lambda = dot(&v, &mat_vec(c, &v));
    Some((lambda, v))
}

pub fn pca2(embeddings: &Dense) -> Result<Pca2> {
    let (n, p) = embeddings.shape();
    if n < 3 {
        return Err(Error::InvalidArgument(format!("PCA needs at least 3 rows, got {n}")));
    }
    if p < 2 {
        return Err(Error::InvalidArgument(format!("PCA needs at least 2 columns, got {p}")));
    }
    if !embeddings.is_finite() {
        return Err(Error::NonFinite("embedding matrix".into()));
    }

    let mut centered = embeddings.clone();
    for c in 0..p {
        let mean = (0..n).map(|r| embeddings.get(r, c)).sum::<f64>() / n as f64;
        for r in 0..n {
            centered.set(r, c, embeddings.get(r, c) - mean);
        }
    }
    let mut cov = centered.transpose().matmul(&centered)?;
    cov.scale_in_place(1.0 / (n as f64 - 1.0));
    let trace: f64 = (0..p).map(|k| cov.get(k, k)).sum();
    let scale = embeddings.max_abs().max(1.0);
    if trace <= scale * scale * 1e-24 {
        return Err(Error::Degenerate("all rows are identical".into()));
    }

    let (l1, mut v1) =
        leading_eigenpair(&cov, trace).ok_or_else(|| Error::Degenerate("zero covariance".into()))?;
    orient(&mut v1);

    let mut deflated = cov.clone();
    for r in 0..p {
        for c in 0..p {
            deflated.set(r, c, cov.get(r, c) - l1 * v1[r] * v1[c]);
        }
    }
    let (l2, mut v2) = match leading_eigenpair(&deflated, trace) {
        Some((l, v)) if l > trace * 1e-12 => (l, v),
        _ => {
            // rank-one data: any unit vector orthogonal to the first axis
            let k = (0..p)
                .min_by(|&a, &b| v1[a].abs().total_cmp(&v1[b].abs()))
                .unwrap_or(0);
            let mut e: Vec<f64> = (0..p).map(|r| if r == k { 1.0 } else { 0.0 }).collect();
            let along = dot(&e, &v1);
            e.iter_mut().zip(&v1).for_each(|(x, y)| *x -= along * y);
            normalize(&mut e);
            (0.0, e)
        }
    };
    // re-orthogonalize against the first axis to absorb deflation error
    let along = dot(&v2, &v1);
    v2.iter_mut().zip(&v1).for_each(|(x, y)| *x -= along * y);
    normalize(&mut v2);
    orient(&mut v2);

    let mut coords = Dense::zeros(n, 2);
    for r in 0..n {
        coords.set(r, 0, dot(centered.row(r), &v1));
        coords.set(r, 1, dot(centered.row(r), &v2));
    }
    Ok(Pca2 {
        coords,
        explained_variance: [l1 / trace, l2.max(0.0) / trace],
        eigenvalues: [l1, l2.max(0.0)],
        components: [v1, v2],
    })
}
