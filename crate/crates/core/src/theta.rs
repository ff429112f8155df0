//! Candidate parameter sets built from synthetic history: fit a logistic model
//! by maximum likelihood, then lay a grid of `points_per_axis` values per
//! coordinate around the fit, spaced in units of the fitted standard errors.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::model::{logistic, purchase_prob, Context, Theta};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThetaGridConfig {
    /// Number of historical observations.
    pub history: usize,
    pub points_per_axis: usize,
    /// Grid step in standard errors of the fit.
    pub spacing: f64,
    /// L2 penalty keeping the fit finite under perfect separation.
    pub ridge: f64,
    pub include_truth: bool,
}

impl Default for ThetaGridConfig {
    fn default() -> Self {
        Self {
            history: 500,
            points_per_axis: 3,
            spacing: 1.0,
            ridge: 1e-3,
            include_truth: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    pub theta: Theta,
    pub std_errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThetaSpace {
    pub thetas: Vec<Theta>,
    /// Position of the true parameter, when it is part of the space.
    pub true_index: Option<usize>,
    pub fit: LogisticFit,
}

/// Ridge-penalised logistic regression by Newton's method.
/// `observations` are `(context index, purchased)` pairs.
pub fn fit_logistic(
    contexts: &[Context],
    observations: &[(usize, bool)],
    ridge: f64,
) -> Result<LogisticFit> {
    let d = contexts.first().map_or(0, Context::dim);
    if d == 0 {
        return Err(config_err("cannot fit a model with no features"));
    }
    let mut w = DVector::<f64>::zeros(d);
    let mut hess = DMatrix::<f64>::zeros(d, d);
    for _ in 0..100 {
        let mut grad = -ridge * &w;
        hess = DMatrix::<f64>::identity(d, d) * ridge;
        for &(l, y) in observations {
            let x = DVector::from_column_slice(&contexts[l].features);
            let p = logistic(x.dot(&w));
            grad += &x * (f64::from(u8::from(y)) - p);
            hess += &x * x.transpose() * (p * (1.0 - p));
        }
        let step = hess
            .clone()
            .cholesky()
            .ok_or_else(|| config_err("history gives a singular information matrix"))?
            .solve(&grad);
        w += &step;
        if step.amax() < 1e-12 {
            break;
        }
    }
    let cov = hess
        .try_inverse()
        .ok_or_else(|| config_err("history gives a singular information matrix"))?;
    Ok(LogisticFit {
        theta: Theta(w.iter().copied().collect()),
        std_errors: (0..d).map(|k| cov[(k, k)].max(0.0).sqrt()).collect(),
    })
}

/// Draws `cfg.history` observations (type from `mix`, purchase from the true
/// parameter), fits them, and returns the grid around the fit.
pub fn build_theta_space<R: Rng + ?Sized>(
    contexts: &[Context],
    truth: &Theta,
    mix: &[f64],
    cfg: &ThetaGridConfig,
    rng: &mut R,
) -> Result<ThetaSpace> {
    if mix.len() != contexts.len() {
        return Err(Error::DimensionMismatch {
            expected: contexts.len(),
            actual: mix.len(),
        });
    }
    if cfg.points_per_axis == 0 {
        return Err(config_err("points_per_axis must be at least 1"));
    }
    let mut obs = Vec::with_capacity(cfg.history);
    for _ in 0..cfg.history {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut l = mix.len() - 1;
        for (k, p) in mix.iter().enumerate() {
            acc += p;
            if u < acc {
                l = k;
                break;
            }
        }
        let p = purchase_prob(&contexts[l], truth)?;
        obs.push((l, rng.random::<f64>() < p));
    }
    let fit = fit_logistic(contexts, &obs, cfg.ridge)?;
    let thetas = grid_around(&fit, cfg.points_per_axis, cfg.spacing);
    let mut thetas = thetas;
    if !thetas.contains(&fit.theta) {
        thetas.push(fit.theta.clone());
    }
    let true_index = if cfg.include_truth {
        Some(match thetas.iter().position(|t| t == truth) {
            Some(k) => k,
            None => {
                thetas.push(truth.clone());
                thetas.len() - 1
            }
        })
    } else {
        thetas.iter().position(|t| t == truth)
    };
    Ok(ThetaSpace {
        thetas,
        true_index,
        fit,
    })
}

fn grid_around(fit: &LogisticFit, points: usize, spacing: f64) -> Vec<Theta> {
    let d = fit.theta.dim();
    let centre = (points as f64 - 1.0) / 2.0;
    let offsets: Vec<f64> = (0..points).map(|g| (g as f64 - centre) * spacing).collect();
    let mut out = Vec::with_capacity(points.pow(d as u32));
    let mut digits = vec![0usize; d];
    loop {
        let v = (0..d)
            .map(|k| fit.theta.0[k] + offsets[digits[k]] * fit.std_errors[k])
            .collect();
        out.push(Theta(v));
        let mut k = d;
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            digits[k] += 1;
            if digits[k] < points {
                break;
            }
            digits[k] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit_contexts() -> Vec<Context> {
        vec![
            Context::new(0, vec![1.0, 0.0]),
            Context::new(1, vec![0.0, 1.0]),
        ]
    }

    #[test]
    fn orthogonal_contexts_fit_empirical_log_odds() {
        // 8/10 purchases for type 0 and 3/10 for type 1; with tiny ridge the
        // fit decouples into per-type log-odds.
        let mut obs = Vec::new();
        for k in 0..10 {
            obs.push((0, k < 8));
            obs.push((1, k < 3));
        }
        let fit = fit_logistic(&unit_contexts(), &obs, 1e-9).unwrap();
        assert!((fit.theta.0[0] - 4f64.ln()).abs() < 1e-6);
        assert!((fit.theta.0[1] - (3.0f64 / 7.0).ln()).abs() < 1e-6);
        // Fisher information for type 0: 10 * 0.8 * 0.2 = 1.6
        assert!((fit.std_errors[0] - (1.0f64 / 1.6).sqrt()).abs() < 1e-6);
    }

    #[test]
    fn grid_contains_fit_and_truth() {
        let truth = Theta(vec![9f64.ln(), 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let space = build_theta_space(
            &unit_contexts(),
            &truth,
            &[0.6, 0.4],
            &ThetaGridConfig::default(),
            &mut rng,
        )
        .unwrap();
        assert!(space.thetas.contains(&space.fit.theta));
        let k = space.true_index.unwrap();
        assert_eq!(space.thetas[k], truth);
        assert_eq!(space.thetas.len(), 10);
        // the fit from 500 draws lands within a few standard errors of the truth
        for c in 0..2 {
            assert!((space.fit.theta.0[c] - truth.0[c]).abs() < 4.0 * space.fit.std_errors[c]);
        }
    }

    #[test]
    fn even_grid_still_includes_fit() {
        let fit = LogisticFit {
            theta: Theta(vec![0.0]),
            std_errors: vec![1.0],
        };
        let g = grid_around(&fit, 2, 1.0);
        assert_eq!(g, vec![Theta(vec![-0.5]), Theta(vec![0.5])]);
    }
}
