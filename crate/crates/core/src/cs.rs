//! Compressed-sensing study: Gaussian measurement ensembles, identifiability
//! and support-stability probabilities, and extended-support size
//! histograms.
//!
//! Every trial is a pure function of `(master_seed, sparsity, trial_index)`
//! through a counter-based stream cipher, so runs are reproducible and
//! independent of execution order or worker count.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lasso::{
    fuchs_precertificate, identifiability_test, minimal_norm_certificate, Identifiability,
    SignedSupport,
};
use crate::linalg::Mat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplitudeLaw {
    UnitSigned,
    GaussianAmp,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    /// Ambient dimension (columns).
    pub p: usize,
    /// Measurements (rows).
    pub q: usize,
    /// Sparsity of the planted vector.
    pub s: usize,
    pub trials: usize,
    pub master_seed: u64,
    pub amplitude_law: AmplitudeLaw,
}

impl EnsembleConfig {
    fn validate(&self) -> Result<()> {
        if self.s > self.p || self.q > self.p || self.p == 0 || self.q == 0 {
            return Err(Error::InvalidInput(alloc::format!(
                "inconsistent ensemble dimensions (P={}, Q={}, s={})",
                self.p,
                self.q,
                self.s
            )));
        }
        Ok(())
    }

    pub fn with_sparsity(&self, s: usize) -> EnsembleConfig {
        EnsembleConfig { s, ..self.clone() }
    }
}

/// Draw the trial's measurement matrix and planted s-sparse vector. The
/// stream index encodes `(s, trial_index)`, so every `(config, trial)` pair
/// maps to one fixed instance.
pub fn sample_instance(config: &EnsembleConfig, trial_index: u64) -> (Mat, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(config.master_seed);
    rng.set_stream(((config.s as u64) << 32) ^ trial_index);
    let columns: Vec<Vec<f64>> = (0..config.p)
        .map(|_| (0..config.q).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    let op = Mat::from_columns(&columns);

    // support: partial Fisher–Yates gives a uniform s-subset
    let mut idx: Vec<usize> = (0..config.p).collect();
    for i in 0..config.s {
        let j = rng.gen_range(i..config.p);
        idx.swap(i, j);
    }
    let mut a0 = vec![0.0; config.p];
    for &i in &idx[..config.s] {
        a0[i] = match config.amplitude_law {
            AmplitudeLaw::UnitSigned => {
                if rng.gen_bool(0.5) {
                    1.0
                } else {
                    -1.0
                }
            }
            AmplitudeLaw::GaussianAmp => {
                // resampled away from exact zero so the support has size s
                loop {
                    let v: f64 = rng.sample(StandardNormal);
                    if v != 0.0 {
                        break v;
                    }
                }
            }
        };
    }
    (op, a0)
}

/// Per-trial outcome of the recovery analysis.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TrialOutcome {
    pub identifiable: bool,
    pub fuchs_valid: bool,
    /// Size of the extended support (minimal-norm certificate saturations);
    /// present only for identifiable trials when requested.
    pub ext_size: Option<usize>,
}

/// Run one trial: identifiability, Fuchs validity, and optionally the
/// extended-support size — all on the same draw.
pub fn evaluate_trial(
    config: &EnsembleConfig,
    trial_index: u64,
    want_ext: bool,
) -> TrialOutcome {
    if config.s == 0 {
        // the zero vector is trivially the unique solution
        return TrialOutcome { identifiable: true, fuchs_valid: true, ext_size: Some(0) };
    }
    let (op, a0) = sample_instance(config, trial_index);
    let support = SignedSupport::from_vector(&a0);
    let fuchs_valid = fuchs_precertificate(&op, &support).map(|c| c.valid).unwrap_or(false);
    let identifiable = identifiability_test(&op, &a0) == Identifiability::Identifiable;
    let ext_size = if identifiable && want_ext {
        minimal_norm_certificate(&op, &a0).ok().map(|c| c.saturation.len())
    } else {
        None
    };
    TrialOutcome { identifiable, fuchs_valid, ext_size }
}

#[derive(Debug, Clone, Serialize)]
pub struct TransitionCurve {
    pub s_values: Vec<usize>,
    pub p_identifiable: Vec<f64>,
    pub p_fuchs_valid: Vec<f64>,
    /// Binomial Wald standard errors.
    pub se_identifiable: Vec<f64>,
    pub se_fuchs: Vec<f64>,
    pub trials: usize,
    /// Trials where Fuchs validity held but the identifiability test did not
    /// (must stay zero: Fuchs implies identifiability).
    pub implication_violations: usize,
}

/// Aggregate per-trial outcomes into the transition curve; exposed so a
/// parallel driver can produce outcomes in any order and reduce identically.
pub fn aggregate_transition(
    s_values: &[usize],
    trials: usize,
    outcomes: &[Vec<TrialOutcome>],
) -> TransitionCurve {
    assert_eq!(s_values.len(), outcomes.len());
    let mut curve = TransitionCurve {
        s_values: s_values.to_vec(),
        p_identifiable: Vec::with_capacity(s_values.len()),
        p_fuchs_valid: Vec::with_capacity(s_values.len()),
        se_identifiable: Vec::with_capacity(s_values.len()),
        se_fuchs: Vec::with_capacity(s_values.len()),
        trials,
        implication_violations: 0,
    };
    for per_s in outcomes {
        assert_eq!(per_s.len(), trials);
        let n = trials as f64;
        let ident = per_s.iter().filter(|o| o.identifiable).count() as f64 / n;
        let fuchs = per_s.iter().filter(|o| o.fuchs_valid).count() as f64 / n;
        curve.implication_violations +=
            per_s.iter().filter(|o| o.fuchs_valid && !o.identifiable).count();
        curve.p_identifiable.push(ident);
        curve.p_fuchs_valid.push(fuchs);
        curve.se_identifiable.push(libm::sqrt(ident * (1.0 - ident) / n));
        curve.se_fuchs.push(libm::sqrt(fuchs * (1.0 - fuchs) / n));
    }
    curve
}

/// Identifiability and Fuchs-validity probabilities over a sparsity range,
/// both estimated from the same draws.
pub fn run_transition(config: &EnsembleConfig, s_range: &[usize]) -> Result<TransitionCurve> {
    config.validate()?;
    let mut outcomes = Vec::with_capacity(s_range.len());
    for &s in s_range {
        let cfg = config.with_sparsity(s);
        let per_s: Vec<TrialOutcome> =
            (0..config.trials as u64).map(|t| evaluate_trial(&cfg, t, false)).collect();
        outcomes.push(per_s);
    }
    Ok(aggregate_transition(s_range, config.trials, &outcomes))
}

#[derive(Debug, Clone, Serialize)]
pub struct SupportSizeHistogram {
    pub s: usize,
    /// `|J| → count` over identifiable trials.
    pub counts: BTreeMap<usize, usize>,
    pub identifiable_trials: usize,
    /// Non-identifiable draws (excluded from the histogram).
    pub excluded_trials: usize,
}

pub fn aggregate_histogram(s: usize, outcomes: &[TrialOutcome]) -> Result<SupportSizeHistogram> {
    let mut hist = SupportSizeHistogram {
        s,
        counts: BTreeMap::new(),
        identifiable_trials: 0,
        excluded_trials: 0,
    };
    for o in outcomes {
        if !o.identifiable {
            hist.excluded_trials += 1;
            continue;
        }
        let size = o.ext_size.ok_or_else(|| {
            Error::ProbeFailure("identifiable trial without an extended support size".into())
        })?;
        if size < s {
            return Err(Error::ProbeFailure(alloc::format!(
                "extended support of size {size} smaller than the sparsity {s}"
            )));
        }
        hist.identifiable_trials += 1;
        *hist.counts.entry(size).or_insert(0) += 1;
    }
    Ok(hist)
}

/// Histogram of extended-support sizes over identifiable trials at the
/// config's sparsity.
pub fn run_support_histogram(config: &EnsembleConfig) -> Result<SupportSizeHistogram> {
    config.validate()?;
    let outcomes: Vec<TrialOutcome> =
        (0..config.trials as u64).map(|t| evaluate_trial(config, t, true)).collect();
    aggregate_histogram(config.s, &outcomes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm_inf;

    fn small_config() -> EnsembleConfig {
        EnsembleConfig {
            p: 24,
            q: 12,
            s: 2,
            trials: 8,
            master_seed: 7,
            amplitude_law: AmplitudeLaw::UnitSigned,
        }
    }

    #[test]
    fn sampling_is_deterministic_and_sparse() {
        let cfg = small_config();
        let (op1, a1) = sample_instance(&cfg, 3);
        let (op2, a2) = sample_instance(&cfg, 3);
        assert_eq!(a1, a2);
        for j in 0..cfg.p {
            assert_eq!(op1.col(j), op2.col(j));
        }
        assert_eq!(a1.iter().filter(|&&v| v != 0.0).count(), cfg.s);
        assert!(a1.iter().all(|&v| v == 0.0 || v.abs() == 1.0));
        // different trial gives a different draw
        let (_, a3) = sample_instance(&cfg, 4);
        assert_ne!(a1, a3);
    }

    #[test]
    fn column_statistics_are_standard_normal() {
        let cfg = EnsembleConfig { p: 40, q: 50, trials: 0, ..small_config() };
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        let mut count = 0.0;
        for t in 0..5u64 {
            let (op, _) = sample_instance(&cfg, t);
            for j in 0..cfg.p {
                for &v in op.col(j) {
                    sum += v;
                    sumsq += v * v;
                    count += 1.0;
                }
            }
        }
        let mean = sum / count;
        let var = sumsq / count - mean * mean;
        assert!(mean.abs() < 0.05, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "variance {var}");
    }

    #[test]
    fn zero_sparsity_is_identifiable_by_convention() {
        let cfg = EnsembleConfig { s: 0, ..small_config() };
        let o = evaluate_trial(&cfg, 0, true);
        assert!(o.identifiable && o.fuchs_valid);
        assert_eq!(o.ext_size, Some(0));
    }

    #[test]
    fn transition_on_small_ensemble() {
        let cfg = small_config();
        let curve = run_transition(&cfg, &[0, 2, 11]).unwrap();
        assert_eq!(curve.implication_violations, 0);
        assert_eq!(curve.p_identifiable[0], 1.0);
        // s = Q − 1 on a 2Q ambient: recovery essentially never happens
        assert!(curve.p_identifiable[2] < 0.5);
        for (p, se) in curve.p_identifiable.iter().zip(&curve.se_identifiable) {
            assert!((0.0..=1.0).contains(p));
            assert!(*se <= 0.5 / (cfg.trials as f64).sqrt() + 1e-12);
        }
    }

    #[test]
    fn histogram_counts_identifiable_trials() {
        let cfg = EnsembleConfig { s: 3, trials: 12, ..small_config() };
        let hist = run_support_histogram(&cfg).unwrap();
        assert_eq!(hist.identifiable_trials + hist.excluded_trials, cfg.trials);
        let total: usize = hist.counts.values().sum();
        assert_eq!(total, hist.identifiable_trials);
        assert!(hist.counts.keys().all(|&k| k >= cfg.s));
    }

    #[test]
    fn fuchs_valid_trials_have_stable_support() {
        // Fuchs validity means the support itself is the extended support
        let cfg = EnsembleConfig { p: 30, q: 15, s: 2, trials: 20, ..small_config() };
        let mut seen = 0;
        for t in 0..cfg.trials as u64 {
            let o = evaluate_trial(&cfg, t, true);
            if o.fuchs_valid {
                assert!(o.identifiable, "Fuchs validity implies identifiability");
                assert_eq!(o.ext_size, Some(cfg.s));
                seen += 1;
            }
        }
        assert!(seen > 0, "no Fuchs-valid draws at this size");
    }

    #[test]
    fn gaussian_amplitudes_are_nonzero() {
        let cfg = EnsembleConfig { amplitude_law: AmplitudeLaw::GaussianAmp, ..small_config() };
        let (_, a0) = sample_instance(&cfg, 1);
        assert_eq!(a0.iter().filter(|&&v| v != 0.0).count(), cfg.s);
        assert!(norm_inf(&a0) != 1.0);
    }
}
