//! SGD loop that turns a masked dense ETF into the frozen sparse classifier.

use alloc::vec::Vec;

use super::loss::{ssec_grad_raw, ssec_loss_raw};
use super::{diagnostics, make_dense_etf, make_mask};
use super::{ClassifierMatrix, EtfDiagnostics, SparseMask, SsecConfig};
use crate::error::{Error, Result};
use crate::numerics::{sgd_step_in_place, Matrix, RngStream};

/// How often the loss trace is sampled during construction.
const TRACE_EVERY: usize = 100;

/// Builds the sparse classifier: draw a dense ETF, apply a fresh random mask,
/// then run `cfg.sgd.steps` full-matrix SGD steps on the combined loss.
/// Masked entries start at zero and receive zero gradient, so they stay zero
/// through the whole optimization.
pub fn build_ssec(
    cfg: &SsecConfig,
    d: usize,
    c: usize,
    rng: &mut RngStream,
) -> Result<(ClassifierMatrix, SparseMask, EtfDiagnostics)> {
    let (psi, mask, diag, _) = build_ssec_traced(cfg, d, c, rng)?;
    Ok((psi, mask, diag))
}

/// [`build_ssec`] plus the loss sampled every 100 steps (and at the end),
/// which the test suites use to check the optimization trend.
pub fn build_ssec_traced(
    cfg: &SsecConfig,
    d: usize,
    c: usize,
    rng: &mut RngStream,
) -> Result<(ClassifierMatrix, SparseMask, EtfDiagnostics, Vec<f64>)> {
    cfg.validate()?;
    let etf = make_dense_etf(d, c, rng)?;
    let mask = make_mask(d, c, cfg.beta, rng)?;
    let mut w = mask.apply(etf.weights());
    let mut velocity = Matrix::zeros(d, c);
    let mut trace = Vec::with_capacity(cfg.sgd.steps / TRACE_EVERY + 2);

    for step in 0..cfg.sgd.steps {
        if step % TRACE_EVERY == 0 {
            trace.push(ssec_loss_raw(&w, cfg, &mask)?);
        }
        let grad = ssec_grad_raw(&w, cfg, &mask)?;
        if !grad.is_finite() {
            return Err(Error::Numeric {
                step,
                detail: "non-finite gradient during sparse classifier construction".into(),
            });
        }
        sgd_step_in_place(&mut w, &grad, &cfg.sgd, &mut velocity);
        if !w.is_finite() {
            return Err(Error::Numeric {
                step,
                detail: "non-finite weights during sparse classifier construction".into(),
            });
        }
    }
    trace.push(ssec_loss_raw(&w, cfg, &mask)?);

    let psi = ClassifierMatrix::new_sparse(w, &mask)?;
    let diag = diagnostics(&psi, &mask)?;
    Ok((psi, mask, diag, trace))
}

#[cfg(test)]
mod tests {
    use super::super::ssec_loss;
    use super::*;
    use crate::numerics::SgdConfig;

    fn quick_cfg(beta: f64, steps: usize) -> SsecConfig {
        SsecConfig {
            beta,
            sgd: SgdConfig { learning_rate: 1e-4, steps, momentum: 0.9 },
            ..SsecConfig::default()
        }
    }

    #[test]
    fn construction_is_deterministic() {
        let cfg = quick_cfg(0.5, 200);
        let (a, ma, _, _) = build_ssec_traced(&cfg, 32, 8, &mut RngStream::new(6, "b")).unwrap();
        let (b, mb, _, _) = build_ssec_traced(&cfg, 32, 8, &mut RngStream::new(6, "b")).unwrap();
        assert!(a.bits_eq(&b));
        assert_eq!(ma, mb);
    }

    #[test]
    fn masked_entries_stay_exactly_zero() {
        let cfg = quick_cfg(0.6, 500);
        let (psi, mask, _) = build_ssec(&cfg, 40, 10, &mut RngStream::new(17, "z")).unwrap();
        for r in 0..40 {
            for c in 0..10 {
                if !mask.is_kept(r, c) {
                    assert_eq!(psi.weights().get(r, c), 0.0);
                }
            }
        }
    }

    #[test]
    fn beta_zero_recovers_the_dense_etf_geometry() {
        let cfg = quick_cfg(0.0, 2000);
        let (psi, mask, diag) = build_ssec(&cfg, 32, 8, &mut RngStream::new(3, "d")).unwrap();
        let expected_angle = (-1.0f64 / 7.0).acos().to_degrees();
        assert!((diag.norm_mean - 1.0).abs() < 1e-3, "norm mean {}", diag.norm_mean);
        assert!((diag.min_angle_deg - expected_angle).abs() < 0.5, "min angle {}", diag.min_angle_deg);

        // The analytic ETF rescaled to gamma is a global optimum: the built
        // loss cannot beat it by more than numerical slack.
        let etf = make_dense_etf(32, 8, &mut RngStream::new(99, "ref")).unwrap();
        let scaled = ClassifierMatrix::new(etf.weights().scale(cfg.gamma), super::super::HeadRole::DenseEtf).unwrap();
        let analytic = ssec_loss(&scaled, &cfg, &mask).unwrap();
        let built = ssec_loss(&psi, &cfg, &mask).unwrap();
        assert!(built >= analytic - 1e-3, "built {built} vs analytic optimum {analytic}");
    }

    #[test]
    fn loss_trace_is_mostly_non_increasing() {
        let cfg = quick_cfg(0.6, 3000);
        let (_, _, _, trace) = build_ssec_traced(&cfg, 64, 16, &mut RngStream::new(8, "t")).unwrap();
        let pairs = trace.windows(2).count();
        let decreasing = trace.windows(2).filter(|w| w[1] <= w[0] + 1e-12).count();
        assert!(
            decreasing as f64 >= 0.95 * pairs as f64,
            "only {decreasing}/{pairs} checkpoints non-increasing: {trace:?}"
        );
    }

    #[test]
    fn small_construction_improves_both_terms() {
        let cfg = quick_cfg(0.6, 2000);
        let (psi, mask, diag, trace) =
            build_ssec_traced(&cfg, 64, 10, &mut RngStream::new(12, "q")).unwrap();
        assert!(trace.last().unwrap() < trace.first().unwrap());
        assert!(diag.norm_var < 1e-4, "norm variance {}", diag.norm_var);
        assert!((diag.norm_mean - 1.0).abs() < 0.05, "norm mean {}", diag.norm_mean);
        assert!(diag.min_angle_deg > 60.0, "min angle {}", diag.min_angle_deg);
        assert_eq!(psi.classes(), 10);
        assert_eq!(mask.kept_per_column(), 26);
    }
}
