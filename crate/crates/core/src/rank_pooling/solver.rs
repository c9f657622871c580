//! Solvers for the pairwise-hinge rank-pooling objective
//!
//! ```text
//! min_w  1/2 |w|^2 + lambda * sum_{i>j} max(0, 1 - w.(d_i - d_j))
//! ```
//!
//! Both solvers work in the span of the (re-centred) frame vectors: the
//! optimum is `w = sum_t c_t e_t` with `e_t = d_t - d_1`, so every step only
//! needs the `k x k` Gram matrix and the final weights cost one `k x D` pass.

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    /// Dual coordinate descent over the pair multipliers; stops on the
    /// duality gap.
    #[default]
    DualCoordinate,
    /// Subgradient descent with step `step0 / (t + 1)`.
    Subgradient,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub weights: Array1<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Primal minus dual objective; `NAN` for the subgradient solver.
    pub gap: f64,
}

struct Problem {
    centred: Array2<f64>,
    gram: Array2<f64>,
    /// (later frame, earlier frame, squared distance)
    pairs: Vec<(usize, usize, f64)>,
    /// Pairs whose frames coincide; each contributes a constant `lambda`.
    degenerate: usize,
}

impl Problem {
    fn new(features: ArrayView2<f64>) -> Problem {
        let (k, _) = features.dim();
        let first = features.row(0).to_owned();
        let centred = &features - &first;

        let mut gram = Array2::zeros((k, k));
        for i in 0..k {
            for j in 0..=i {
                let v = centred.row(i).dot(&centred.row(j));
                gram[[i, j]] = v;
                gram[[j, i]] = v;
            }
        }

        let mut pairs = Vec::with_capacity(k * (k.saturating_sub(1)) / 2);
        let mut degenerate = 0;
        for i in 1..k {
            for j in 0..i {
                let q: f64 = centred
                    .row(i)
                    .iter()
                    .zip(centred.row(j))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                if q > 0.0 {
                    pairs.push((i, j, q));
                } else {
                    degenerate += 1;
                }
            }
        }
        Problem {
            centred,
            gram,
            pairs,
            degenerate,
        }
    }

    fn scores(&self, coef: &Array1<f64>) -> Array1<f64> {
        self.gram.dot(coef)
    }

    fn primal(&self, coef: &Array1<f64>, scores: &Array1<f64>, lambda: f64) -> f64 {
        let reg = 0.5 * coef.dot(scores);
        let hinge: f64 = self
            .pairs
            .iter()
            .map(|&(i, j, _)| (1.0 - (scores[i] - scores[j])).max(0.0))
            .sum();
        reg.max(0.0) + lambda * (hinge + self.degenerate as f64)
    }

    fn weights(&self, coef: &Array1<f64>) -> Array1<f64> {
        let mut w = Array1::zeros(self.centred.ncols());
        for (t, &c) in coef.iter().enumerate() {
            if c != 0.0 {
                w.scaled_add(c, &self.centred.row(t));
            }
        }
        w
    }
}

pub fn dual_coordinate(features: ArrayView2<f64>, lambda: f64, max_iters: usize, tol: f64) -> Solution {
    let problem = Problem::new(features);
    let k = features.nrows();
    let mut alpha = vec![0.0; problem.pairs.len()];
    let mut coef = Array1::<f64>::zeros(k);
    let mut scores = Array1::<f64>::zeros(k);
    let mut objective = problem.primal(&coef, &scores, lambda);
    let mut gap = f64::INFINITY;
    let mut iterations = 0;

    while iterations < max_iters && !problem.pairs.is_empty() {
        iterations += 1;
        for (p, &(i, j, q)) in problem.pairs.iter().enumerate() {
            let grad = scores[i] - scores[j] - 1.0;
            let a = alpha[p];
            let projected = if a <= 0.0 {
                grad.min(0.0)
            } else if a >= lambda {
                grad.max(0.0)
            } else {
                grad
            };
            if projected == 0.0 {
                continue;
            }
            let next = (a - grad / q).clamp(0.0, lambda);
            let delta = next - a;
            if delta == 0.0 {
                continue;
            }
            alpha[p] = next;
            coef[i] += delta;
            coef[j] -= delta;
            for m in 0..k {
                scores[m] += delta * (problem.gram[[i, m]] - problem.gram[[j, m]]);
            }
        }
        // refresh to stop incremental drift
        scores = problem.scores(&coef);
        objective = problem.primal(&coef, &scores, lambda);
        let norm_sq = coef.dot(&scores).max(0.0);
        let dual = alpha.iter().sum::<f64>() + lambda * problem.degenerate as f64 - 0.5 * norm_sq;
        gap = objective - dual;
        if gap <= tol * objective.abs().max(1.0) {
            break;
        }
    }
    if problem.pairs.is_empty() {
        gap = 0.0;
    }

    Solution {
        weights: problem.weights(&coef),
        objective,
        iterations,
        gap,
    }
}

pub fn subgradient(features: ArrayView2<f64>, lambda: f64, max_iters: usize, tol: f64, step0: f64) -> Solution {
    let problem = Problem::new(features);
    let k = features.nrows();
    let mut coef = Array1::<f64>::zeros(k);
    let mut scores = Array1::<f64>::zeros(k);
    let mut previous = problem.primal(&coef, &scores, lambda);
    let mut best = (previous, coef.clone());
    let mut iterations = 0;

    while iterations < max_iters && !problem.pairs.is_empty() {
        let step = step0 / (iterations as f64 + 1.0);
        iterations += 1;
        let mut push = Array1::<f64>::zeros(k);
        for &(i, j, _) in &problem.pairs {
            if scores[i] - scores[j] < 1.0 {
                push[i] += lambda;
                push[j] -= lambda;
            }
        }
        coef = &coef * (1.0 - step) + &(push * step);
        scores = problem.scores(&coef);
        let objective = problem.primal(&coef, &scores, lambda);
        if objective < best.0 {
            best = (objective, coef.clone());
        }
        let decrease = previous - objective;
        if (0.0..tol).contains(&decrease) {
            break;
        }
        previous = objective;
    }

    Solution {
        weights: problem.weights(&best.1),
        objective: best.0,
        iterations,
        gap: f64::NAN,
    }
}
