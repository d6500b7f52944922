//! Security bounds and key rates.
//!
//! The heralded source fixes the per-photon-number ratio of triggered to
//! nontriggered rates at `r_n`, which no channel attack can alter. The
//! observed overall ratio `r = Q^(t)/Q^(nt)` therefore constrains how the
//! detections are distributed over the photon number: with `x` the unknown
//! vacuum fraction of nontriggered detections, the single-photon fraction
//! is lower-bounded and the single-photon error rate upper-bounded, and a
//! worst-case minimization over `x` yields an unconditionally secure key
//! rate. The nontriggered ensemble plays the role of a built-in decoy
//! state: nothing beyond the ordinary heralded setup is required.

use crate::channel::{ChannelParams, RateSummary};
use crate::error::{Error, Result};
use crate::minimize::{self, Minimum};
use crate::source::SourceStats;

/// Binary entropy `H2(e) = -e log2 e - (1-e) log2 (1-e)`, with the limit
/// convention `H2(0) = H2(1) = 0`.
pub fn binary_entropy(e: f64) -> f64 {
    if e <= 0.0 || e >= 1.0 {
        return 0.0;
    }
    -(e * e.log2()) - (1.0 - e) * (1.0 - e).log2()
}

/// Error-correction inefficiency as a function of the observed QBER.
///
/// Practical codes are characterized well enough by a constant factor, but
/// the type keeps the dependence on the QBER so rate-adaptive codes can
/// slot in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErrorCorrection {
    ConstantFactor(f64),
}

impl ErrorCorrection {
    pub fn factor(&self, _qber: f64) -> f64 {
        match self {
            ErrorCorrection::ConstantFactor(f) => *f,
        }
    }
}

/// Protocol-level constants of the rate formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolConstants {
    /// Sifting (protocol) efficiency `q`; 1/2 for standard BB84.
    pub sifting: f64,
    /// Error-correction inefficiency `f(E)`.
    pub error_correction: ErrorCorrection,
}

impl Default for ProtocolConstants {
    fn default() -> Self {
        Self {
            sifting: 0.5,
            error_correction: ErrorCorrection::ConstantFactor(1.22),
        }
    }
}

impl ProtocolConstants {
    pub fn validate(&self) -> Result<()> {
        if !self.sifting.is_finite() || !(0.0..=1.0).contains(&self.sifting) || self.sifting == 0.0
        {
            return Err(Error::invalid(
                "q",
                format!("must be in (0, 1], got {}", self.sifting),
            ));
        }
        let ErrorCorrection::ConstantFactor(f) = self.error_correction;
        if !f.is_finite() || f < 1.0 {
            return Err(Error::invalid("f_ec", format!("must be >= 1, got {f}")));
        }
        Ok(())
    }
}

/// Grid-then-refine policy for the worst-case minimization over the
/// vacuum fraction `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimizerPolicy {
    pub grid_points: usize,
    /// Golden-section stopping width relative to the feasible interval.
    pub rel_tolerance: f64,
}

impl Default for MinimizerPolicy {
    fn default() -> Self {
        Self {
            grid_points: 4097,
            rel_tolerance: 1e-12,
        }
    }
}

/// Lower bound on the single-photon fraction of nontriggered detections,
/// `(r2 - r - (r2 - r0) x) / (r2 - r1)`, as a function of the assumed
/// vacuum fraction `x`. May be negative; a non-positive value means the
/// bound is vacuous and no single photons can be credited.
pub fn single_photon_fraction_bound(
    x: f64,
    trigger_ratio: f64,
    r0: f64,
    r1: f64,
    r2: f64,
) -> f64 {
    (r2 - trigger_ratio - (r2 - r0) * x) / (r2 - r1)
}

/// Upper bound on the single-photon error rate at vacuum fraction `x`,
/// the tighter of the triggered-data and nontriggered-data routes:
/// `min{ (2 r E_t - r0 x) / (2 r1 xi), (2 E_nt - x) / (2 xi) }`.
///
/// Returns `None` when `xi <= 0` (the fraction bound is vacuous and the
/// error bound undefined; callers credit no single photons). The returned
/// value is not clamped; values of 1/2 or more simply mean no
/// privacy-amplification credit survives.
pub fn single_photon_error_bound(
    x: f64,
    summary: &RateSummary,
    r0: f64,
    r1: f64,
    xi: f64,
) -> Option<f64> {
    if xi <= 0.0 {
        return None;
    }
    let via_triggered =
        (2.0 * summary.trigger_ratio * summary.qber_triggered - r0 * x) / (2.0 * r1 * xi);
    let via_nontriggered = (2.0 * summary.qber_nontriggered - x) / (2.0 * xi);
    Some(via_triggered.min(via_nontriggered))
}

/// Key rate of one post-processing strategy, with the minimizer location
/// and a breakdown of the terms (all scaled by the sifting factor, so
/// `rate = vacuum_gain + single_photon_gain - ec_cost`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint {
    /// Key rate per pulse; negative means the strategy yields no key.
    pub rate: f64,
    /// Worst-case vacuum fraction `x*`.
    pub x_star: f64,
    /// Single-photon fraction bound at `x*`.
    pub xi_at_min: f64,
    /// Single-photon error bound at `x*`; `None` when vacuous.
    pub eps_at_min: Option<f64>,
    /// Error-correction cost.
    pub ec_cost: f64,
    /// Credited vacuum contribution.
    pub vacuum_gain: f64,
    /// Credited single-photon contribution after privacy amplification.
    pub single_photon_gain: f64,
}

/// Which strategy the final rate selects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Key from triggered events only.
    Triggered,
    /// Keys from both event classes, reconciled separately and
    /// privacy-amplified together.
    Both,
    /// No strategy yields a positive rate.
    Abort,
}

/// Full result: both strategies and the selected final rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyRateResult {
    pub triggered: RatePoint,
    pub both: RatePoint,
    /// `max{R_t, R_both, 0}`.
    pub final_rate: f64,
}

impl KeyRateResult {
    pub fn selected(&self) -> Strategy {
        if self.final_rate <= 0.0 {
            Strategy::Abort
        } else if self.both.rate >= self.triggered.rate {
            Strategy::Both
        } else {
            Strategy::Triggered
        }
    }
}

struct CreditMinimum {
    min: Minimum,
    xi: f64,
    eps: Option<f64>,
    vacuum_weighted: f64,
    single_weighted: f64,
}

fn odds_triple_checked(src: &SourceStats) -> Result<[f64; 3]> {
    let [r0, r1, r2] = src.params().odds_triple();
    if !r1.is_finite() {
        return Err(Error::UnboundedOdds { n: 1 });
    }
    if !r2.is_finite() {
        return Err(Error::UnboundedOdds { n: 2 });
    }
    if !(r0 < r1 && r1 < r2) {
        return Err(Error::invalid(
            "eta_a",
            "trigger odds are not strictly ordered; the triggered/nontriggered \
             analysis needs eta_a > 0",
        ));
    }
    Ok([r0, r1, r2])
}

fn check_observables(summary: &RateSummary) -> Result<()> {
    // NaN-aware: an unobserved quantity is as degenerate as a zero one
    if summary.gain_triggered.is_nan() || summary.gain_triggered <= 0.0 {
        return Err(Error::DegenerateObservables {
            quantity: "triggered gain",
        });
    }
    if summary.gain_nontriggered.is_nan() || summary.gain_nontriggered <= 0.0 {
        return Err(Error::DegenerateObservables {
            quantity: "nontriggered gain",
        });
    }
    Ok(())
}

/// Worst case over the vacuum fraction of
/// `w0 x + w1 xi(x) [1 - H2(eps(x))]`, the creditable gain per unit of
/// nontriggered rate.
fn minimized_credit(
    summary: &RateSummary,
    odds: [f64; 3],
    w0: f64,
    w1: f64,
    policy: &MinimizerPolicy,
) -> CreditMinimum {
    let [r0, r1, r2] = odds;
    let x_max = {
        let via_nontriggered = 2.0 * summary.qber_nontriggered;
        if r0 > 0.0 {
            let via_triggered =
                2.0 * summary.qber_triggered * (summary.trigger_ratio / r0);
            via_triggered.min(via_nontriggered)
        } else {
            via_nontriggered
        }
    };

    let objective = |x: f64| {
        let xi = single_photon_fraction_bound(x, summary.trigger_ratio, r0, r1, r2);
        let credit = match single_photon_error_bound(x, summary, r0, r1, xi) {
            Some(eps) => {
                let eps = eps.clamp(0.0, 0.5);
                w1 * xi * (1.0 - binary_entropy(eps))
            }
            None => 0.0,
        };
        w0 * x + credit
    };

    let x_tol = policy.rel_tolerance * x_max;
    let min = minimize::minimize(objective, 0.0, x_max, policy.grid_points, x_tol);

    let xi = single_photon_fraction_bound(min.x, summary.trigger_ratio, r0, r1, r2);
    let eps = single_photon_error_bound(min.x, summary, r0, r1, xi);
    let single_weighted = match eps {
        Some(e) => w1 * xi * (1.0 - binary_entropy(e.clamp(0.0, 0.5))),
        None => 0.0,
    };
    CreditMinimum {
        min,
        xi,
        eps,
        vacuum_weighted: w0 * min.x,
        single_weighted,
    }
}

/// Key rate from the triggered events, with the nontriggered data used
/// only to bound the single-photon contribution:
/// `R_t / q = -Q_t f(E_t) H2(E_t)
///            + Q_nt min_x { r0 x + r1 xi(x) [1 - H2(eps(x))] }`
/// over `0 <= x <= min{2 E_t (r / r0), 2 E_nt}`.
pub fn key_rate_triggered(
    summary: &RateSummary,
    src: &SourceStats,
    consts: &ProtocolConstants,
    policy: &MinimizerPolicy,
) -> Result<RatePoint> {
    check_observables(summary)?;
    consts.validate()?;
    let odds = odds_triple_checked(src)?;
    let [r0, r1, _] = odds;

    let q = consts.sifting;
    let f = consts.error_correction.factor(summary.qber_triggered);
    let ec_cost = q * summary.gain_triggered * f * binary_entropy(summary.qber_triggered);

    let credit = minimized_credit(summary, odds, r0, r1, policy);
    let vacuum_gain = q * summary.gain_nontriggered * credit.vacuum_weighted;
    let single_photon_gain = q * summary.gain_nontriggered * credit.single_weighted;

    Ok(RatePoint {
        rate: vacuum_gain + single_photon_gain - ec_cost,
        x_star: credit.min.x,
        xi_at_min: credit.xi,
        eps_at_min: credit.eps,
        ec_cost,
        vacuum_gain,
        single_photon_gain,
    })
}

/// Key rate when both event classes produce key: error reconciliation is
/// applied separately to each class, privacy amplification to the
/// concatenation:
/// `R_both / q = -Q_t f(E_t) H2(E_t) - Q_nt f(E_nt) H2(E_nt)
///               + Q_nt min_x { (1 + r0) x + (1 + r1) xi(x) [1 - H2(eps(x))] }`.
pub fn key_rate_both(
    summary: &RateSummary,
    src: &SourceStats,
    consts: &ProtocolConstants,
    policy: &MinimizerPolicy,
) -> Result<RatePoint> {
    check_observables(summary)?;
    consts.validate()?;
    let odds = odds_triple_checked(src)?;
    let [r0, r1, _] = odds;

    let q = consts.sifting;
    let f_t = consts.error_correction.factor(summary.qber_triggered);
    let f_nt = consts.error_correction.factor(summary.qber_nontriggered);
    let ec_cost = q
        * (summary.gain_triggered * f_t * binary_entropy(summary.qber_triggered)
            + summary.gain_nontriggered * f_nt * binary_entropy(summary.qber_nontriggered));

    let credit = minimized_credit(summary, odds, 1.0 + r0, 1.0 + r1, policy);
    let vacuum_gain = q * summary.gain_nontriggered * credit.vacuum_weighted;
    let single_photon_gain = q * summary.gain_nontriggered * credit.single_weighted;

    Ok(RatePoint {
        rate: vacuum_gain + single_photon_gain - ec_cost,
        x_star: credit.min.x,
        xi_at_min: credit.xi,
        eps_at_min: credit.eps,
        ec_cost,
        vacuum_gain,
        single_photon_gain,
    })
}

/// Combine the two strategies into the final rate `max{R_t, R_both, 0}`.
/// Negative per-strategy rates are preserved in the parts so the margin
/// to abort stays visible.
pub fn final_rate(triggered: RatePoint, both: RatePoint) -> KeyRateResult {
    KeyRateResult {
        triggered,
        both,
        final_rate: triggered.rate.max(both.rate).max(0.0),
    }
}

/// Both strategies plus the final selection in one call.
pub fn key_rates(
    summary: &RateSummary,
    src: &SourceStats,
    consts: &ProtocolConstants,
    policy: &MinimizerPolicy,
) -> Result<KeyRateResult> {
    let triggered = key_rate_triggered(summary, src, consts, policy)?;
    let both = key_rate_both(summary, src, consts, policy)?;
    Ok(final_rate(triggered, both))
}

/// Conventional analysis using triggered data only.
///
/// Without the nontriggered observations the multi-photon detections can
/// only be bounded by the emission probabilities, `Q_multi <= p_multi^(t)`,
/// and the vacuum contribution is pessimistically dropped:
/// `Q_1 >= Q_t - p_multi^(t)`, `e_1 <= Q_t E_t / Q_1`. Returns a
/// non-positive rate when the bound is vacuous (`Q_t <= p_multi^(t)`).
pub fn key_rate_conventional(
    summary: &RateSummary,
    src: &SourceStats,
    consts: &ProtocolConstants,
) -> Result<f64> {
    if summary.gain_triggered.is_nan() || summary.gain_triggered <= 0.0 {
        return Err(Error::DegenerateObservables {
            quantity: "triggered gain",
        });
    }
    consts.validate()?;

    let q = consts.sifting;
    let q_t = summary.gain_triggered;
    let e_t = summary.qber_triggered;
    let f = consts.error_correction.factor(e_t);
    let ec_cost = q_t * f * binary_entropy(e_t);

    let single_floor = q_t - src.triggered_multi();
    let gain = if single_floor > 0.0 {
        let e1 = (q_t * e_t / single_floor).min(0.5);
        single_floor * (1.0 - binary_entropy(e1))
    } else {
        0.0
    };
    Ok(q * (gain - ec_cost))
}

/// Key rate with an ideal single-photon source over the same channel:
/// every pulse carries exactly one photon, so `Q = Y_1`, `e_1 = E`, and
/// `R = q Q [1 - H2(E) - f(E) H2(E)]`.
pub fn key_rate_ideal_single_photon(ch: &ChannelParams, consts: &ProtocolConstants) -> Result<f64> {
    consts.validate()?;
    let gain = ch.yield_n(1);
    if gain <= 0.0 {
        return Ok(0.0);
    }
    let qber = ch.error_rate_n(1);
    let f = consts.error_correction.factor(qber);
    Ok(consts.sifting * gain * (1.0 - binary_entropy(qber) - f * binary_entropy(qber)))
}
