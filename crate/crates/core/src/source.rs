//! Photon-pair source statistics.
//!
//! A parametric down-conversion source emits photon pairs with thermal
//! number statistics; one mode goes to a heralding (trigger) detector,
//! the other into the quantum channel. This module computes the number
//! distribution, the per-n trigger probability of the heralding detector,
//! and the triggered/nontriggered split that the security analysis
//! consumes.

use crate::error::{Error, Result};

/// `1 - (1 - x)^n` computed without cancellation for small `x`.
fn one_minus_pow(x: f64, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    -f64::exp_m1(n as f64 * f64::ln_1p(-x))
}

/// Source parameters: pair-generation strength plus the heralding detector.
///
/// Any optical loss between the crystal and the heralding detector is
/// folded into `eta_a`; the detector is taken to see all photons of its
/// mode at that effective efficiency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceParams {
    mu: f64,
    eta_a: f64,
    d_a: f64,
}

impl SourceParams {
    /// Validated constructor.
    ///
    /// `mu` is the mean photon-pair rate (>= 0), `eta_a` the trigger
    /// detector efficiency and `d_a` its dark-count probability per pulse.
    /// `eta_a = 1` is rejected here: the trigger odds are unbounded for an
    /// ideal heralding detector and the triggered/nontriggered comparison
    /// degenerates. Use [`SourceParams::ideal_trigger`] for the
    /// conventional-analysis baseline that needs that corner.
    pub fn new(mu: f64, eta_a: f64, d_a: f64) -> Result<Self> {
        if !mu.is_finite() || mu < 0.0 {
            return Err(Error::invalid("mu", format!("must be >= 0, got {mu}")));
        }
        if !eta_a.is_finite() || !(0.0..1.0).contains(&eta_a) {
            return Err(Error::invalid(
                "eta_a",
                format!("must be in [0, 1), got {eta_a}"),
            ));
        }
        if !d_a.is_finite() || !(0.0..1.0).contains(&d_a) {
            return Err(Error::invalid(
                "d_a",
                format!("must be in [0, 1), got {d_a}"),
            ));
        }
        Ok(Self { mu, eta_a, d_a })
    }

    /// Source with an ideal, noiseless heralding detector (`eta_a = 1`,
    /// `d_a = 0`).
    ///
    /// Every pulse with at least one photon triggers, so the trigger odds
    /// are unbounded for n >= 1 and the triggered/nontriggered analysis is
    /// unavailable; only the conventional (triggered-data-only) analysis
    /// applies.
    pub fn ideal_trigger(mu: f64) -> Result<Self> {
        if !mu.is_finite() || mu < 0.0 {
            return Err(Error::invalid("mu", format!("must be >= 0, got {mu}")));
        }
        Ok(Self {
            mu,
            eta_a: 1.0,
            d_a: 0.0,
        })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn eta_a(&self) -> f64 {
        self.eta_a
    }

    pub fn d_a(&self) -> f64 {
        self.d_a
    }

    pub fn is_ideal_trigger(&self) -> bool {
        self.eta_a == 1.0
    }

    /// Probability of emitting exactly `n` photon pairs:
    /// `p_n = mu^n (1 + mu)^-(n+1)` (thermal/geometric statistics).
    pub fn photon_number_prob(&self, n: usize) -> f64 {
        let beta = self.mu / (1.0 + self.mu);
        beta.powi(n as i32) / (1.0 + self.mu)
    }

    /// Probability that the heralding detector clicks given `n` photons in
    /// its mode: `gamma_n = 1 - (1 - d_A)(1 - eta_A)^n`.
    pub fn trigger_prob(&self, n: usize) -> f64 {
        self.d_a + (1.0 - self.d_a) * one_minus_pow(self.eta_a, n)
    }

    /// Trigger odds `r_n = gamma_n / (1 - gamma_n)`.
    ///
    /// Strictly increasing in `n` for `eta_a > 0`; `r_0 = d_A / (1 - d_A)`.
    /// Errors with [`Error::UnboundedOdds`] when the trigger probability is
    /// 1 (ideal heralding detector, n >= 1).
    pub fn trigger_odds(&self, n: usize) -> Result<f64> {
        let odds = self.trigger_odds_unchecked(n);
        if odds.is_finite() {
            Ok(odds)
        } else {
            Err(Error::UnboundedOdds { n })
        }
    }

    /// Like [`trigger_odds`](Self::trigger_odds) but returns `+inf` instead
    /// of failing in the ideal-trigger corner.
    pub(crate) fn trigger_odds_unchecked(&self, n: usize) -> f64 {
        if n == 0 {
            return self.d_a / (1.0 - self.d_a);
        }
        let no_trigger = (1.0 - self.d_a) * (1.0 - self.eta_a).powi(n as i32);
        let trigger = self.trigger_prob(n);
        trigger / no_trigger
    }

    /// Trigger odds for n = 0, 1, 2. The bound machinery needs exactly
    /// these three regardless of where the number distribution truncates.
    pub fn odds_triple(&self) -> [f64; 3] {
        [
            self.trigger_odds_unchecked(0),
            self.trigger_odds_unchecked(1),
            self.trigger_odds_unchecked(2),
        ]
    }

    /// Truncated per-n statistics; see [`SourceStats`].
    pub fn stats(&self, policy: &TailPolicy) -> Result<SourceStats> {
        let beta = self.mu / (1.0 + self.mu);

        // The tail mass beyond n is exactly beta^(n+1), so the cutoff can
        // be found analytically.
        let mut n_max = 0usize;
        let mut tail = beta;
        while tail >= policy.tolerance {
            n_max += 1;
            if n_max > policy.max_terms {
                return Err(Error::Truncation {
                    cap: policy.max_terms,
                    tolerance: policy.tolerance,
                    tail_mass: tail,
                });
            }
            tail *= beta;
        }

        let len = n_max + 1;
        let mut probs = Vec::with_capacity(len);
        let mut trigger_probs = Vec::with_capacity(len);
        let mut odds = Vec::with_capacity(len);
        let mut triggered = Vec::with_capacity(len);
        let mut nontriggered = Vec::with_capacity(len);

        // gamma and 1 - gamma are kept as an exactly consistent pair so the
        // split ratio p_t/p_nt reproduces the odds to the last ulp: the
        // no-trigger side is a stable product, and gamma switches to the
        // expm1 route where the subtraction would cancel.
        let mut p = 1.0 / (1.0 + self.mu);
        let mut pow_a = 1.0;
        for n in 0..len {
            let no_trigger = (1.0 - self.d_a) * pow_a;
            let gamma = if no_trigger < 0.5 {
                1.0 - no_trigger
            } else {
                self.trigger_prob(n)
            };
            probs.push(p);
            trigger_probs.push(gamma);
            odds.push(gamma / no_trigger);
            triggered.push(p * gamma);
            nontriggered.push(p * no_trigger);
            p *= beta;
            pow_a *= 1.0 - self.eta_a;
        }

        Ok(SourceStats {
            params: *self,
            probs,
            trigger_probs,
            odds,
            triggered,
            nontriggered,
            tail_mass: tail,
        })
    }
}

/// Truncation policy for the photon-number expansion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailPolicy {
    /// Keep terms until the (exactly geometric) tail mass drops below this.
    pub tolerance: f64,
    /// Hard cap on the number of retained terms.
    pub max_terms: usize,
}

impl Default for TailPolicy {
    fn default() -> Self {
        Self {
            tolerance: 1e-14,
            max_terms: 100_000,
        }
    }
}

/// Per-photon-number source statistics up to the truncation cutoff.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceStats {
    params: SourceParams,
    probs: Vec<f64>,
    trigger_probs: Vec<f64>,
    odds: Vec<f64>,
    triggered: Vec<f64>,
    nontriggered: Vec<f64>,
    tail_mass: f64,
}

impl SourceStats {
    pub fn params(&self) -> &SourceParams {
        &self.params
    }

    /// Number of retained terms (largest n is `len() - 1`).
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Neglected tail mass beyond the truncation cutoff.
    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// `p_n` for the retained range.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `gamma_n` for the retained range.
    pub fn trigger_probs(&self) -> &[f64] {
        &self.trigger_probs
    }

    /// `r_n = gamma_n / (1 - gamma_n)`; `+inf` entries in the
    /// ideal-trigger corner.
    pub fn odds(&self) -> &[f64] {
        &self.odds
    }

    /// Joint probabilities `p_n gamma_n` of emission and trigger.
    pub fn triggered(&self) -> &[f64] {
        &self.triggered
    }

    /// Joint probabilities `p_n (1 - gamma_n)` of emission without trigger.
    pub fn nontriggered(&self) -> &[f64] {
        &self.nontriggered
    }

    /// Total triggered probability mass.
    pub fn triggered_mass(&self) -> f64 {
        self.triggered.iter().sum()
    }

    /// Triggered mass carried by multi-photon emissions (n >= 2).
    pub fn triggered_multi(&self) -> f64 {
        self.triggered.iter().skip(2).sum()
    }

    /// Mean of the retained number distribution.
    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(mu: f64, eta_a: f64, d_a: f64) -> SourceParams {
        SourceParams::new(mu, eta_a, d_a).unwrap()
    }

    #[test]
    fn vacuum_source_is_pure_vacuum() {
        let src = params(0.0, 0.5, 0.0);
        assert_eq!(src.photon_number_prob(0), 1.0);
        assert_eq!(src.photon_number_prob(1), 0.0);
        assert_eq!(src.photon_number_prob(7), 0.0);
    }

    #[test]
    fn number_distribution_matches_direct_evaluation() {
        // mu = 0.3: p_1 = 0.3 / 1.3^2 = 0.3 / 1.69
        let src = params(0.3, 0.5, 1e-6);
        assert_relative_eq!(src.photon_number_prob(1), 0.3 / 1.69, max_relative = 1e-14);
    }

    #[test]
    fn unit_strength_distribution_is_halving() {
        let src = params(1.0, 0.5, 0.0);
        let mut sum = 0.0;
        for n in 0..60 {
            let expected = 0.5f64.powi(n as i32 + 1);
            assert_relative_eq!(src.photon_number_prob(n), expected, max_relative = 1e-12);
            sum += src.photon_number_prob(n);
        }
        assert_relative_eq!(sum, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn trigger_prob_examples() {
        assert_eq!(params(0.3, 0.5, 0.0).trigger_prob(0), 0.0);
        // gamma_1 = 1 - (1 - 1e-6) * 0.5
        let g = params(0.3, 0.5, 1e-6).trigger_prob(1);
        assert_relative_eq!(g, 1.0 - (1.0 - 1e-6) * 0.5, max_relative = 1e-14);
        // zero efficiency leaves only dark counts
        assert_relative_eq!(params(0.3, 0.0, 0.2).trigger_prob(5), 0.2, max_relative = 1e-14);
    }

    #[test]
    fn trigger_odds_examples() {
        assert_eq!(params(0.3, 0.7, 0.0).trigger_odds(0).unwrap(), 0.0);
        // independent route: gamma / (1 - gamma) evaluated directly
        let gamma: f64 = 1.0 - (1.0 - 1e-6) * 0.5;
        let expected = gamma / (1.0 - gamma);
        let got = params(0.3, 0.5, 1e-6).trigger_odds(1).unwrap();
        assert_relative_eq!(got, expected, max_relative = 1e-12);
        assert_relative_eq!(got, 1.000002, max_relative = 1e-6);
    }

    #[test]
    fn odds_unbounded_for_ideal_trigger() {
        let src = SourceParams::ideal_trigger(0.3).unwrap();
        assert_eq!(src.trigger_odds(0).unwrap(), 0.0);
        assert!(matches!(
            src.trigger_odds(1),
            Err(Error::UnboundedOdds { n: 1 })
        ));
        assert!(src.trigger_odds_unchecked(2).is_infinite());
    }

    #[test]
    fn eta_a_one_rejected_by_validation() {
        assert!(SourceParams::new(0.3, 1.0, 0.0).is_err());
        assert!(SourceParams::new(-0.1, 0.5, 0.0).is_err());
        assert!(SourceParams::new(0.3, 0.5, 1.0).is_err());
    }

    #[test]
    fn odds_strictly_increasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let eta_a = rng.random_range(1e-6..1.0 - 1e-9);
            let d_a = rng.random_range(0.0..1.0 - 1e-9);
            let src = params(0.1, eta_a, d_a);
            let mut prev = src.trigger_odds(0).unwrap();
            for n in 1..=20 {
                let next = src.trigger_odds(n).unwrap();
                assert!(
                    next > prev,
                    "odds not increasing at n={n} for eta_a={eta_a}, d_a={d_a}"
                );
                prev = next;
            }
        }
    }

    #[test]
    fn r0_is_exactly_dark_count_odds() {
        for d_a in [0.0, 1e-9, 1e-6, 0.3, 0.9] {
            let src = params(0.5, 0.4, d_a);
            assert_eq!(src.trigger_odds(0).unwrap(), d_a / (1.0 - d_a));
        }
    }

    #[test]
    fn stats_normalization_and_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let mu = rng.random_range(0.0..10.0);
            let src = params(mu, 0.5, 1e-6);
            let stats = src.stats(&TailPolicy::default()).unwrap();
            let total: f64 = stats.probs().iter().sum();
            assert!((total - 1.0).abs() < 1e-12, "sum {total} for mu={mu}");
            assert!((stats.mean() - mu).abs() < 1e-9, "mean for mu={mu}");
        }
    }

    #[test]
    fn stats_completeness_of_split() {
        for (mu, eta_a, d_a) in [(0.3, 0.5, 1e-6), (2.0, 0.1, 0.0), (0.0, 0.9, 0.01)] {
            let stats = params(mu, eta_a, d_a).stats(&TailPolicy::default()).unwrap();
            let total: f64 = stats
                .triggered()
                .iter()
                .zip(stats.nontriggered())
                .map(|(t, nt)| t + nt)
                .sum();
            assert!((total - 1.0).abs() < 2e-14, "split sum {total}");
        }
    }

    #[test]
    fn split_ratio_consistent_with_odds() {
        let stats = params(0.7, 0.35, 1e-4).stats(&TailPolicy::default()).unwrap();
        for n in 0..stats.len() {
            let nt = stats.nontriggered()[n];
            if nt > 0.0 {
                let ratio = stats.triggered()[n] / nt;
                assert_relative_eq!(ratio, stats.odds()[n], max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn triggered_set_has_almost_no_vacuum() {
        // mu = 0.3, eta_A = 0.5, d_A = 1e-6: the triggered distribution is
        // dominated by n = 1 and its vacuum part is d_A * p_0.
        let stats = params(0.3, 0.5, 1e-6).stats(&TailPolicy::default()).unwrap();
        let t = stats.triggered();
        assert_relative_eq!(t[0], 1e-6 * stats.probs()[0], max_relative = 1e-9);
        assert!(t[1] > t[0] * 1e4);
        assert!(t[1] > t[2]);
        let vacuum_fraction = t[0] / stats.triggered_mass();
        assert!(vacuum_fraction < 1e-4);
    }

    #[test]
    fn vacuum_only_source_stats() {
        let stats = params(0.0, 0.5, 1e-6).stats(&TailPolicy::default()).unwrap();
        assert_eq!(stats.len(), 1);
        assert_eq!(stats.probs()[0], 1.0);
        assert_relative_eq!(stats.triggered()[0], 1e-6, max_relative = 1e-12);
    }

    #[test]
    fn truncation_cap_reports_tail_mass() {
        let policy = TailPolicy {
            tolerance: 1e-14,
            max_terms: 50,
        };
        let err = params(8.0, 0.5, 0.0).stats(&policy).unwrap_err();
        match err {
            Error::Truncation { cap, tail_mass, .. } => {
                assert_eq!(cap, 50);
                assert!(tail_mass > 1e-14);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn truncation_cutoff_follows_geometric_bound() {
        // mu = 0.3: beta = 0.3/1.3, smallest n with beta^(n+1) < 1e-14 is 21.
        let stats = params(0.3, 0.5, 0.0).stats(&TailPolicy::default()).unwrap();
        assert_eq!(stats.len(), 22);
        let beta: f64 = 0.3 / 1.3;
        assert!(beta.powi(22) < 1e-14);
        assert!(beta.powi(21) >= 1e-14);
    }
}
