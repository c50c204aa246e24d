//! ARMA(p, q) fitting by conditional sum of squares, one-step forecasting,
//! and the residual-based detector built on them.
//!
//! The model is `y_t = c + sum phi_i y_{t-i} + sum theta_j e_{t-j} + e_t`.
//! Fitting conditions on the first `max(p, q)` observations, sets the
//! innovations before that to zero, and minimizes the sum of squared
//! one-step errors with Nelder-Mead over the standardized series.
//! Non-stationary AR or non-invertible MA candidates are rejected.

use serde::{Deserialize, Serialize};

use super::nnls::least_squares;
use super::{label_scores, magnitude, DetectorVerdict, ThresholdPolicy};
use crate::error::{Error, Result};
use crate::series::{standardize, LabeledSeries};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArmaParams {
    pub p: usize,
    pub q: usize,
    pub max_iterations: usize,
}

impl Default for ArmaParams {
    fn default() -> Self {
        Self {
            p: 2,
            q: 1,
            max_iterations: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmaModel {
    pub intercept: f64,
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    /// Innovation variance.
    pub sigma2: f64,
}

/// True when `1 - phi_1 z - ... - phi_p z^p` has every root outside the unit
/// circle, checked via the step-down (reverse Levinson-Durbin) recursion.
pub fn is_stationary(ar: &[f64]) -> bool {
    let mut a = ar.to_vec();
    while let Some(&k) = a.last() {
        if !(k.abs() < 1.0) {
            return false;
        }
        let m = a.len();
        let denom = 1.0 - k * k;
        let next: Vec<f64> = (0..m - 1).map(|j| (a[j] + k * a[m - 2 - j]) / denom).collect();
        a = next;
    }
    true
}

fn is_invertible(ma: &[f64]) -> bool {
    let neg: Vec<f64> = ma.iter().map(|t| -t).collect();
    is_stationary(&neg)
}

/// One-step forecast from lagged values and innovations, most recent last.
/// The contemporaneous innovation is taken as zero.
pub fn arma_forecast(model: &ArmaModel, values: &[f64], innovations: &[f64]) -> Result<f64> {
    let (p, q) = (model.ar.len(), model.ma.len());
    if values.len() < p || innovations.len() < q {
        return Err(Error::InsufficientData(format!(
            "forecast needs {p} lagged values and {q} lagged innovations"
        )));
    }
    let ar: f64 = (1..=p).map(|i| model.ar[i - 1] * values[values.len() - i]).sum();
    let ma: f64 = (1..=q).map(|j| model.ma[j - 1] * innovations[innovations.len() - j]).sum();
    Ok(model.intercept + ar + ma)
}

/// One-step innovations under the conditional recursion; the first
/// `max(p, q)` entries are zero.
pub fn arma_residuals(model: &ArmaModel, values: &[f64]) -> Vec<f64> {
    let start = model.ar.len().max(model.ma.len());
    let mut e = vec![0.0; values.len()];
    for t in start..values.len() {
        let forecast = arma_forecast(model, &values[..t], &e[..t]).expect("history covers the lags");
        e[t] = values[t] - forecast;
    }
    e
}

/// Mean squared conditional innovation, or `+inf` outside the admissible region.
fn css_objective(theta: &[f64], z: &[f64], p: usize, q: usize) -> f64 {
    let (ar, ma) = (&theta[1..1 + p], &theta[1 + p..1 + p + q]);
    if !is_stationary(ar) || !is_invertible(ma) {
        return f64::INFINITY;
    }
    let model = ArmaModel {
        intercept: theta[0],
        ar: ar.to_vec(),
        ma: ma.to_vec(),
        sigma2: 1.0,
    };
    let start = p.max(q);
    let e = arma_residuals(&model, z);
    let sse: f64 = e[start..].iter().map(|v| v * v).sum();
    let value = sse / (z.len() - start) as f64;
    if value.is_finite() {
        value
    } else {
        f64::INFINITY
    }
}

struct Minimum {
    x: Vec<f64>,
    fx: f64,
    iterations: usize,
    converged: bool,
}

/// Nelder-Mead simplex minimization.
fn nelder_mead<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], step: f64, max_iter: usize) -> Minimum {
    let dim = x0.len();
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..dim {
        let mut x = x0.to_vec();
        x[i] += step;
        simplex.push(x);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| f(x)).collect();
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iter {
        iterations += 1;
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let (best, worst) = (values[0], values[dim]);
        let diameter = simplex[1..]
            .iter()
            .map(|x| x.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if worst.is_finite() && worst - best <= 1e-12 + 1e-10 * best.abs() && diameter < 1e-6 {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..dim)
            .map(|j| simplex[..dim].iter().map(|x| x[j]).sum::<f64>() / dim as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[dim])
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };

        let reflected = along(-1.0);
        let fr = f(&reflected);
        if fr < values[0] {
            let expanded = along(-2.0);
            let fe = f(&expanded);
            if fe < fr {
                simplex[dim] = expanded;
                values[dim] = fe;
            } else {
                simplex[dim] = reflected;
                values[dim] = fr;
            }
            continue;
        }
        if fr < values[dim - 1] {
            simplex[dim] = reflected;
            values[dim] = fr;
            continue;
        }
        let (contracted, fc) = if fr < values[dim] {
            let c = along(-0.5);
            let fc = f(&c);
            (c, fc)
        } else {
            let c = along(0.5);
            let fc = f(&c);
            (c, fc)
        };
        if fc < values[dim].min(fr) {
            simplex[dim] = contracted;
            values[dim] = fc;
            continue;
        }
        // shrink toward the best vertex
        for i in 1..=dim {
            let x: Vec<f64> = simplex[i]
                .iter()
                .zip(&simplex[0])
                .map(|(xi, b)| b + 0.5 * (xi - b))
                .collect();
            values[i] = f(&x);
            simplex[i] = x;
        }
    }

    let best = (0..=dim).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
    Minimum {
        x: simplex[best].clone(),
        fx: values[best],
        iterations,
        converged,
    }
}

/// Least-squares AR(p) coefficients on the standardized series, shrunk
/// until stationary.
fn initial_ar(z: &[f64], p: usize) -> Vec<f64> {
    if p == 0 {
        return Vec::new();
    }
    let design: Vec<Vec<f64>> = (p..z.len())
        .map(|t| std::iter::once(1.0).chain((1..=p).map(|i| z[t - i])).collect())
        .collect();
    let mut ar = least_squares(&design, &z[p..])[1..].to_vec();
    while !is_stationary(&ar) {
        ar.iter_mut().for_each(|v| *v *= 0.9);
    }
    ar
}

fn to_original_units(theta: &[f64], p: usize, q: usize, mean: f64, sd: f64, mse: f64) -> ArmaModel {
    let ar = theta[1..1 + p].to_vec();
    let ma = theta[1 + p..1 + p + q].to_vec();
    ArmaModel {
        intercept: mean * (1.0 - ar.iter().sum::<f64>()) + sd * theta[0],
        ar,
        ma,
        sigma2: mse * sd * sd,
    }
}

/// Fits an ARMA(p, q) model by conditional sum of squares.
pub fn fit_arma(values: &[f64], params: &ArmaParams) -> Result<ArmaModel> {
    let (p, q) = (params.p, params.q);
    let needed = 10 * (p + q + 1);
    if values.len() < needed {
        return Err(Error::InsufficientData(format!(
            "ARMA({p},{q}) needs at least {needed} points, got {}",
            values.len()
        )));
    }
    let s = standardize(values)?;
    let z = &s.z;

    let mut x0 = vec![0.0];
    x0.extend(initial_ar(z, p));
    x0.extend(std::iter::repeat_n(0.0, q));

    let objective = |theta: &[f64]| css_objective(theta, z, p, q);
    let budget = params.max_iterations;
    let mut result = nelder_mead(objective, &x0, 0.1, budget);
    let mut spent = result.iterations;
    // restart from the optimum to escape a collapsed simplex
    if result.converged && spent < budget {
        let again = nelder_mead(objective, &result.x, 0.05, budget - spent);
        spent += again.iterations;
        if again.fx <= result.fx {
            result = Minimum {
                converged: again.converged,
                ..again
            };
        }
    }

    if !result.fx.is_finite() || result.fx <= 0.0 {
        return Err(Error::DegenerateScale(
            "ARMA objective has no finite positive minimum".into(),
        ));
    }
    let model = to_original_units(&result.x, p, q, s.mean, s.std_dev, result.fx);
    if !result.converged {
        let mut best_params = vec![model.intercept];
        best_params.extend(&model.ar);
        best_params.extend(&model.ma);
        return Err(Error::NonConvergence {
            iterations: spent,
            best_objective: model.sigma2,
            best_params,
        });
    }
    Ok(model)
}

/// Scores each point by how far it rises above the one-step ARMA forecast.
pub fn arma_detector(
    series: &LabeledSeries,
    params: &ArmaParams,
    policy: ThresholdPolicy,
) -> Result<Vec<DetectorVerdict>> {
    let values = series.values();
    let model = fit_arma(&values, params)?;
    let residuals = arma_residuals(&model, &values);
    let warm_up = params.p + params.q;
    let scores: Vec<Option<f64>> = residuals
        .iter()
        .enumerate()
        .map(|(t, &e)| (t >= warm_up).then_some(e))
        .collect();
    Ok(label_scores(&scores, magnitude(&values), policy))
}
