//! Focal loss with the piecewise-constant focusing schedule.

use super::train::TrainConfig;

/// Probabilities are clamped to `[PROB_EPS, 1 - PROB_EPS]` before the log.
pub const PROB_EPS: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FocalLoss {
    pub loss: f64,
    /// dL/dP at the clamped probability.
    pub d_prob: f64,
    pub gamma: f64,
}

#[inline]
pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

/// Focusing parameter: `gamma_lo` while the predicted probability of the true
/// class is below `gamma_break`, `gamma_hi` otherwise.
pub fn select_gamma(p: f64, label: bool, cfg: &TrainConfig) -> f64 {
    let p = clamp_prob(p);
    let p_true = if label { p } else { 1.0 - p };
    if p_true < cfg.gamma_break {
        cfg.gamma_lo
    } else {
        cfg.gamma_hi
    }
}

/// `L = -(Y (1-P)^γ ln P + (1-Y) P^γ ln(1-P))` and its derivative in `P`.
pub fn focal_loss_with_gamma(p: f64, label: bool, gamma: f64) -> (f64, f64) {
    let p = clamp_prob(p);
    if label {
        let q = 1.0 - p;
        let loss = -q.powf(gamma) * p.ln();
        let d = if gamma == 0.0 {
            -1.0 / p
        } else {
            gamma * q.powf(gamma - 1.0) * p.ln() - q.powf(gamma) / p
        };
        (loss, d)
    } else {
        let q = 1.0 - p;
        let loss = -p.powf(gamma) * q.ln();
        let d = if gamma == 0.0 {
            1.0 / q
        } else {
            -gamma * p.powf(gamma - 1.0) * q.ln() + p.powf(gamma) / q
        };
        (loss, d)
    }
}

pub fn focal_loss(p: f64, label: bool, cfg: &TrainConfig) -> FocalLoss {
    let gamma = select_gamma(p, label, cfg);
    let (loss, d_prob) = focal_loss_with_gamma(p, label, gamma);
    FocalLoss {
        loss,
        d_prob,
        gamma,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        let cfg = TrainConfig::default();
        let a = focal_loss(0.5, true, &cfg);
        assert_eq!(a.gamma, 3.0);
        assert!((a.loss - 0.125 * 2f64.ln()).abs() < 1e-15);
        assert!((a.loss - 0.0866).abs() < 1e-4);
        let b = focal_loss(0.1, true, &cfg);
        assert_eq!(b.gamma, 5.0);
        assert!((b.loss - 0.9f64.powi(5) * 10f64.ln()).abs() < 1e-12);
        assert!((b.loss - 1.3597).abs() < 1e-4);
    }

    #[test]
    fn saturated_correct_prediction_has_tiny_loss() {
        let cfg = TrainConfig::default();
        assert!(focal_loss(1.0 - PROB_EPS, true, &cfg).loss < 1e-20);
        assert!(focal_loss(1.0, true, &cfg).loss.is_finite());
        assert!(focal_loss(0.0, true, &cfg).loss.is_finite());
    }

    #[test]
    fn gamma_uses_true_class_probability() {
        let cfg = TrainConfig::default();
        assert_eq!(select_gamma(0.9, false, &cfg), 5.0);
        assert_eq!(select_gamma(0.1, false, &cfg), 3.0);
        assert_eq!(select_gamma(0.2, true, &cfg), 3.0);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        for &(p, y, g) in &[
            (0.3, true, 3.0),
            (0.7, false, 5.0),
            (0.05, true, 5.0),
            (0.5, false, 0.0),
        ] {
            let (_, d) = focal_loss_with_gamma(p, y, g);
            let h = 1e-6;
            let fd = (focal_loss_with_gamma(p + h, y, g).0 - focal_loss_with_gamma(p - h, y, g).0)
                / (2.0 * h);
            assert!(
                (fd - d).abs() < 1e-6 * d.abs().max(1.0),
                "p={p} y={y} g={g}"
            );
        }
    }
}
