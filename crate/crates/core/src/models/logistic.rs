//! L2-regularized logistic regression by full-batch gradient descent with a
//! backtracking step, so the loss trace is non-increasing by construction.

use super::{sigmoid, TargetKind};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticConfig {
    pub max_iters: u32,
    pub tol: f64,
    pub l2_lambda: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            max_iters: 500,
            tol: 1e-8,
            l2_lambda: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub l2_lambda: f64,
    pub training_loss_trace: Vec<f64>,
    pub feature_names: Vec<String>,
}

impl LinearModel {
    pub fn margin(&self, row: &[f64]) -> f64 {
        self.bias
            + self
                .weights
                .iter()
                .zip(row)
                .map(|(w, x)| w * x)
                .sum::<f64>()
    }
}

/// Mean log-loss plus (lambda/2)·||w||^2; the bias is unregularized.
pub(crate) fn logistic_loss(
    matrix: &FeatureMatrix,
    labels: &[u8],
    weights: &[f64],
    bias: f64,
    lambda: f64,
) -> f64 {
    let n = matrix.n_rows() as f64;
    let mut loss = 0.0;
    for i in 0..matrix.n_rows() {
        let margin = bias
            + weights
                .iter()
                .zip(matrix.row(i))
                .map(|(w, x)| w * x)
                .sum::<f64>();
        // Numerically stable log(1 + exp(-y_signed * margin)).
        let z = if labels[i] == 1 { -margin } else { margin };
        loss += if z > 0.0 {
            z + (-z).exp().ln_1p()
        } else {
            z.exp().ln_1p()
        };
    }
    loss / n + 0.5 * lambda * weights.iter().map(|w| w * w).sum::<f64>()
}

/// Mean-gradient of the loss above: ((sigma(m) - y)·x averaged, plus
/// lambda·w) for weights, mean residual for the bias.
pub(crate) fn logistic_gradient(
    matrix: &FeatureMatrix,
    labels: &[u8],
    weights: &[f64],
    bias: f64,
    lambda: f64,
) -> (Vec<f64>, f64) {
    let n = matrix.n_rows() as f64;
    let mut grad_w = vec![0.0; weights.len()];
    let mut grad_b = 0.0;
    for i in 0..matrix.n_rows() {
        let row = matrix.row(i);
        let margin = bias + weights.iter().zip(row).map(|(w, x)| w * x).sum::<f64>();
        let residual = sigmoid(margin) - f64::from(labels[i]);
        grad_b += residual;
        for (g, x) in grad_w.iter_mut().zip(row) {
            *g += residual * x;
        }
    }
    for (g, w) in grad_w.iter_mut().zip(weights) {
        *g = *g / n + lambda * w;
    }
    (grad_w, grad_b / n)
}

pub fn train_logistic(
    matrix: &FeatureMatrix,
    target: TargetKind,
    config: &LogisticConfig,
) -> Result<LinearModel> {
    if target != TargetKind::Binary {
        return Err(Error::Model(
            "logistic regression requires the binary target".to_string(),
        ));
    }
    if matrix.n_rows() == 0 {
        return Err(Error::Domain(
            "cannot fit logistic regression on an empty matrix".to_string(),
        ));
    }
    let labels = target.labels(matrix);
    let lambda = config.l2_lambda;
    let mut weights = vec![0.0; matrix.n_cols()];
    let mut bias = 0.0;
    let mut loss = logistic_loss(matrix, labels, &weights, bias, lambda);
    let mut trace = vec![loss];

    for _ in 0..config.max_iters {
        let (grad_w, grad_b) = logistic_gradient(matrix, labels, &weights, bias, lambda);
        let mut step = 1.0;
        let mut improved = false;
        for _ in 0..60 {
            let trial_w: Vec<f64> = weights
                .iter()
                .zip(&grad_w)
                .map(|(w, g)| w - step * g)
                .collect();
            let trial_b = bias - step * grad_b;
            let trial_loss = logistic_loss(matrix, labels, &trial_w, trial_b, lambda);
            if trial_loss < loss {
                weights = trial_w;
                bias = trial_b;
                let decrease = loss - trial_loss;
                loss = trial_loss;
                trace.push(loss);
                improved = decrease >= config.tol;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }

    Ok(LinearModel {
        weights,
        bias,
        l2_lambda: lambda,
        training_loss_trace: trace,
        feature_names: matrix.column_names.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix_from(rows: Vec<Vec<f64>>, labels: Vec<u8>) -> FeatureMatrix {
        let n_cols = rows[0].len();
        FeatureMatrix {
            keys: (0..rows.len()).map(|i| (i as u32 + 1, 1)).collect(),
            column_names: (0..n_cols).map(|j| format!("f{j}")).collect(),
            values: rows.into_iter().flatten().collect(),
            target_binary: labels.clone(),
            target_severity: labels,
            warnings: Vec::new(),
        }
    }

    #[test]
    fn balanced_labels_zero_weights_have_zero_bias_gradient() {
        let m = matrix_from(vec![vec![1.0], vec![-1.0], vec![2.0], vec![-2.0]], vec![1, 0, 1, 0]);
        let (_, grad_b) = logistic_gradient(&m, &m.target_binary, &[0.0], 0.0, 0.0);
        assert_eq!(grad_b, 0.0);
    }

    #[test]
    fn single_separable_point_strictly_decreases_loss() {
        let m = matrix_from(vec![vec![1.0]], vec![1]);
        let config = LogisticConfig {
            max_iters: 50,
            tol: 0.0,
            l2_lambda: 0.0,
        };
        let model = train_logistic(&m, TargetKind::Binary, &config).unwrap();
        for pair in model.training_loss_trace.windows(2) {
            assert!(pair[1] < pair[0], "trace not strictly decreasing: {pair:?}");
        }
    }

    #[test]
    fn loss_trace_is_non_increasing() {
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![f64::from(i % 5) - 2.0, f64::from(i % 3) - 1.0])
            .collect();
        let labels: Vec<u8> = (0..30).map(|i| ((i % 5) > 2) as u8).collect();
        let m = matrix_from(rows, labels);
        let model = train_logistic(&m, TargetKind::Binary, &LogisticConfig::default()).unwrap();
        for pair in model.training_loss_trace.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12);
        }
    }

    #[test]
    fn analytic_gradient_matches_central_differences() {
        // Deterministic pseudo-random instance, 20 rows x 5 features.
        let mut state = 0x2545F4914F6CDD1D_u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..5).map(|_| next() * 2.0).collect())
            .collect();
        let labels: Vec<u8> = (0..20).map(|_| (next() > 0.0) as u8).collect();
        let m = matrix_from(rows, labels);
        let weights: Vec<f64> = (0..5).map(|_| next()).collect();
        let bias = next();
        let lambda = 0.1;

        let (grad_w, grad_b) = logistic_gradient(&m, &m.target_binary, &weights, bias, lambda);
        let eps = 1e-5;
        for j in 0..5 {
            let mut up = weights.clone();
            let mut dn = weights.clone();
            up[j] += eps;
            dn[j] -= eps;
            let fd = (logistic_loss(&m, &m.target_binary, &up, bias, lambda)
                - logistic_loss(&m, &m.target_binary, &dn, bias, lambda))
                / (2.0 * eps);
            let rel = (grad_w[j] - fd).abs() / fd.abs().max(1e-8);
            assert!(rel <= 1e-6, "weight {j}: analytic {} vs fd {fd}", grad_w[j]);
        }
        let fd_b = (logistic_loss(&m, &m.target_binary, &weights, bias + eps, lambda)
            - logistic_loss(&m, &m.target_binary, &weights, bias - eps, lambda))
            / (2.0 * eps);
        let rel = (grad_b - fd_b).abs() / fd_b.abs().max(1e-8);
        assert!(rel <= 1e-6);
    }
}
