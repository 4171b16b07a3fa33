//! Platt scaling: sigma(a*m + b) fitted to held-out margins by gradient
//! descent. The slope is floored at a tiny positive value so calibration is
//! a strictly increasing map and never reorders the margin ranking.

use super::sigmoid;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

const SLOPE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlattCalibrator {
    pub a: f64,
    pub b: f64,
}

fn loss(margins: &[f64], labels: &[u8], a: f64, b: f64) -> f64 {
    let n = margins.len() as f64;
    margins
        .iter()
        .zip(labels)
        .map(|(&m, &y)| {
            let z = if y == 1 { -(a * m + b) } else { a * m + b };
            if z > 0.0 {
                z + (-z).exp().ln_1p()
            } else {
                z.exp().ln_1p()
            }
        })
        .sum::<f64>()
        / n
}

fn gradient(margins: &[f64], labels: &[u8], a: f64, b: f64) -> (f64, f64) {
    let n = margins.len() as f64;
    let mut ga = 0.0;
    let mut gb = 0.0;
    for (&m, &y) in margins.iter().zip(labels) {
        let residual = sigmoid(a * m + b) - f64::from(y);
        ga += residual * m;
        gb += residual;
    }
    (ga / n, gb / n)
}

/// Fit the calibrator on held-out margins. Labels must contain both classes.
pub fn fit_platt(margins: &[f64], labels: &[u8]) -> Result<PlattCalibrator> {
    if margins.len() != labels.len() {
        return Err(Error::Shape(format!(
            "margins ({}) and labels ({}) differ in length",
            margins.len(),
            labels.len()
        )));
    }
    let positives = labels.iter().filter(|&&y| y == 1).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::Domain(
            "calibration requires both classes in the labels".to_string(),
        ));
    }

    let mut a = SLOPE_FLOOR;
    let mut b = 0.0;
    let mut current = loss(margins, labels, a, b);
    for _ in 0..2000 {
        let (ga, gb) = gradient(margins, labels, a, b);
        let mut step = 1.0;
        let mut improved = false;
        for _ in 0..60 {
            let ta = (a - step * ga).max(SLOPE_FLOOR);
            let tb = b - step * gb;
            let trial = loss(margins, labels, ta, tb);
            if trial < current {
                improved = current - trial >= 1e-12;
                a = ta;
                b = tb;
                current = trial;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    Ok(PlattCalibrator { a, b })
}

/// Map margins through the fitted sigmoid.
pub fn apply_platt(calibrator: &PlattCalibrator, margins: &[f64]) -> Vec<f64> {
    margins
        .iter()
        .map(|&m| sigmoid(calibrator.a * m + calibrator.b))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn recovers_identity_when_margins_are_true_log_odds() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut margins = Vec::with_capacity(5000);
        let mut labels = Vec::with_capacity(5000);
        for _ in 0..5000 {
            let m: f64 = rng.random_range(-3.0..3.0);
            let p = sigmoid(m);
            margins.push(m);
            labels.push(u8::from(rng.random::<f64>() < p));
        }
        let cal = fit_platt(&margins, &labels).unwrap();
        assert!((cal.a - 1.0).abs() < 0.2, "a = {}", cal.a);
        assert!(cal.b.abs() < 0.2, "b = {}", cal.b);
    }

    #[test]
    fn constant_margins_leave_only_the_intercept_identifiable() {
        let margins = vec![0.7; 200];
        let labels: Vec<u8> = (0..200).map(|i| u8::from(i % 4 == 0)).collect();
        let cal = fit_platt(&margins, &labels).unwrap();
        assert!(cal.a.abs() < 0.1, "a = {}", cal.a);
        let p = apply_platt(&cal, &margins);
        assert!((p[0] - 0.25).abs() < 0.01, "sigma(b) = {}", p[0]);
    }

    #[test]
    fn single_class_labels_are_rejected() {
        assert!(fit_platt(&[0.1, 0.2], &[1, 1]).is_err());
    }

    #[test]
    fn calibration_preserves_strict_margin_ordering() {
        let margins = vec![-2.0, -0.5, 0.0, 0.4, 3.0];
        let labels = vec![0, 0, 1, 0, 1];
        let cal = fit_platt(&margins, &labels).unwrap();
        assert!(cal.a > 0.0);
        let p = apply_platt(&cal, &margins);
        for w in p.windows(2) {
            assert!(w[0] < w[1]);
        }
    }
}
