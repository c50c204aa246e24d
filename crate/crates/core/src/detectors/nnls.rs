//! Non-negative least squares by the Lawson-Hanson active-set method.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnlsFit {
    pub weights: Vec<f64>,
    /// Euclidean norm of `targets - design * weights`.
    pub residual_norm: f64,
}

/// `design^T (targets - design * w)`, the negative gradient of half the
/// squared residual.
fn negative_gradient(design: &[Vec<f64>], targets: &[f64], w: &[f64]) -> Vec<f64> {
    let d = w.len();
    let mut g = vec![0.0; d];
    for (row, &y) in design.iter().zip(targets) {
        let r = y - row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
        for j in 0..d {
            g[j] += row[j] * r;
        }
    }
    g
}

fn residual_norm(design: &[Vec<f64>], targets: &[f64], w: &[f64]) -> f64 {
    design
        .iter()
        .zip(targets)
        .map(|(row, &y)| (y - row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>()).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Largest violation of the KKT conditions at `w`: `|grad_j|` for positive
/// weights, `max(0, -grad_j)` for zero weights.
pub fn kkt_residual(design: &[Vec<f64>], targets: &[f64], w: &[f64]) -> f64 {
    let g = negative_gradient(design, targets, w);
    w.iter()
        .zip(&g)
        .map(|(&wj, &gj)| if wj > 0.0 { gj.abs() } else { gj.max(0.0) })
        .fold(0.0, f64::max)
}

/// Unconstrained least squares restricted to the columns in `cols`, by
/// Householder QR. Columns that are numerically dependent on earlier ones
/// get coefficient zero.
fn subset_least_squares(design: &[Vec<f64>], targets: &[f64], cols: &[usize]) -> Vec<f64> {
    let m = design.len();
    let p = cols.len();
    let mut a: Vec<Vec<f64>> = design.iter().map(|r| cols.iter().map(|&c| r[c]).collect()).collect();
    let mut b = targets.to_vec();
    let scale = a.iter().flatten().fold(0.0f64, |s, v| s.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut diag_ok = vec![false; p];

    let steps = p.min(m);
    for j in 0..steps {
        let norm = (j..m).map(|i| a[i][j] * a[i][j]).sum::<f64>().sqrt();
        if norm <= 1e-12 * scale * (m as f64).sqrt() {
            continue;
        }
        let alpha = if a[j][j] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (j..m).map(|i| a[i][j]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            diag_ok[j] = a[j][j].abs() > 1e-12 * scale;
            continue;
        }
        for col in j..p {
            let dot: f64 = (j..m).map(|i| v[i - j] * a[i][col]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in j..m {
                a[i][col] -= f * v[i - j];
            }
        }
        let dot: f64 = (j..m).map(|i| v[i - j] * b[i]).sum();
        let f = 2.0 * dot / vnorm2;
        for i in j..m {
            b[i] -= f * v[i - j];
        }
        diag_ok[j] = a[j][j].abs() > 1e-12 * scale;
    }

    let mut x = vec![0.0; p];
    for j in (0..steps).rev() {
        if !diag_ok[j] {
            continue;
        }
        let s: f64 = (j + 1..steps).map(|c| a[j][c] * x[c]).sum();
        x[j] = (b[j] - s) / a[j][j];
    }
    x
}

/// Unconstrained least squares over all columns of `design`.
pub(crate) fn least_squares(design: &[Vec<f64>], targets: &[f64]) -> Vec<f64> {
    let cols: Vec<usize> = (0..design.first().map_or(0, Vec::len)).collect();
    subset_least_squares(design, targets, &cols)
}

/// Minimizes `||targets - design * w||^2` subject to `w >= 0`.
///
/// `design` is given as rows, each of the same length d.
pub fn nnls(design: &[Vec<f64>], targets: &[f64]) -> Result<NnlsFit> {
    let m = design.len();
    if m == 0 || targets.len() != m {
        return Err(Error::Shape(format!(
            "design has {m} rows but targets has {} entries",
            targets.len()
        )));
    }
    let d = design[0].len();
    if d == 0 || design.iter().any(|r| r.len() != d) {
        return Err(Error::Shape("design rows must share a positive length".into()));
    }
    if design.iter().flatten().chain(targets).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite entry in NNLS input".into()));
    }

    let norm_a = design.iter().flatten().map(|v| v.abs()).sum::<f64>().max(1.0);
    let tol = 10.0 * f64::EPSILON * norm_a * (m.max(d) as f64);

    let mut w = vec![0.0; d];
    let mut passive = vec![false; d];
    let max_outer = 3 * d + 10;

    for _ in 0..max_outer {
        let g = negative_gradient(design, targets, &w);
        let candidate = (0..d)
            .filter(|&j| !passive[j])
            .max_by(|&a, &b| g[a].total_cmp(&g[b]));
        let j = match candidate {
            Some(j) if g[j] > tol => j,
            _ => break,
        };
        passive[j] = true;

        loop {
            let cols: Vec<usize> = (0..d).filter(|&c| passive[c]).collect();
            let sol = subset_least_squares(design, targets, &cols);
            let mut s = vec![0.0; d];
            for (&c, &v) in cols.iter().zip(&sol) {
                s[c] = v;
            }
            if cols.iter().all(|&c| s[c] > 0.0) {
                w = s;
                break;
            }
            let alpha = cols
                .iter()
                .filter(|&&c| s[c] <= 0.0)
                .map(|&c| w[c] / (w[c] - s[c]))
                .fold(f64::INFINITY, f64::min);
            for c in 0..d {
                w[c] += alpha * (s[c] - w[c]);
            }
            for &c in &cols {
                if w[c] <= tol {
                    w[c] = 0.0;
                    passive[c] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }

    // Polish: a final solve on the passive set removes drift from the
    // interpolation steps.
    let cols: Vec<usize> = (0..d).filter(|&c| passive[c]).collect();
    if !cols.is_empty() {
        let sol = subset_least_squares(design, targets, &cols);
        if sol.iter().all(|&v| v > 0.0) {
            for (&c, &v) in cols.iter().zip(&sol) {
                w[c] = v;
            }
        }
    }
    for v in w.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }

    Ok(NnlsFit {
        residual_norm: residual_norm(design, targets, &w),
        weights: w,
    })
}
