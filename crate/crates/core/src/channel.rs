//! Fiber channel and threshold-detector model, and the aggregation of
//! per-photon-number rates into the four protocol observables.
//!
//! Bob detects with two threshold detectors behind a polarizing beam
//! splitter; a pulse counts as detected when at least one clicks, and
//! double clicks are assigned a random bit. Both detectors share the same
//! efficiency and background probability.

use crate::error::{Error, Result};
use crate::source::{SourceParams, SourceStats};

/// `ln((1 - x)^n)`, valid for `x = 1` with `n = 0`.
fn ln_pow1m(x: f64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        n as f64 * f64::ln_1p(-x)
    }
}

/// Channel and receiver parameters.
///
/// `p_d` is the per-detector background probability per pulse, dark
/// counts and stray light combined; it is not decomposed further. The
/// two receiver detectors are identical by construction (the rate
/// formula requires equal efficiencies).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    alpha_db_per_km: f64,
    length_km: f64,
    eta_b: f64,
    p_d: f64,
    e_d: f64,
}

impl ChannelParams {
    pub fn new(
        alpha_db_per_km: f64,
        length_km: f64,
        eta_b: f64,
        p_d: f64,
        e_d: f64,
    ) -> Result<Self> {
        if !alpha_db_per_km.is_finite() || alpha_db_per_km < 0.0 {
            return Err(Error::invalid(
                "alpha_db_per_km",
                format!("must be >= 0, got {alpha_db_per_km}"),
            ));
        }
        if !length_km.is_finite() || length_km < 0.0 {
            return Err(Error::invalid(
                "length_km",
                format!("must be >= 0, got {length_km}"),
            ));
        }
        if !eta_b.is_finite() || !(0.0..=1.0).contains(&eta_b) {
            return Err(Error::invalid(
                "eta_b",
                format!("must be in [0, 1], got {eta_b}"),
            ));
        }
        if !p_d.is_finite() || !(0.0..1.0).contains(&p_d) {
            return Err(Error::invalid(
                "p_d",
                format!("must be in [0, 1), got {p_d}"),
            ));
        }
        if !e_d.is_finite() || !(0.0..=0.5).contains(&e_d) {
            return Err(Error::invalid(
                "e_d",
                format!("must be in [0, 0.5], got {e_d}"),
            ));
        }
        Ok(Self {
            alpha_db_per_km,
            length_km,
            eta_b,
            p_d,
            e_d,
        })
    }

    /// Fiber and receiver parameters of the Gobby-Yuan-Shields 122 km
    /// experiment, the standard telecom-fiber benchmark set:
    /// 0.21 dB/km loss, eta_B = 0.045, p_d = 8.5e-7, e_d = 3.3%.
    pub fn gys(length_km: f64) -> Result<Self> {
        Self::new(0.21, length_km, 0.045, 8.5e-7, 0.033)
    }

    /// Same channel at a different fiber length.
    pub fn at_distance(&self, length_km: f64) -> Result<Self> {
        Self::new(
            self.alpha_db_per_km,
            length_km,
            self.eta_b,
            self.p_d,
            self.e_d,
        )
    }

    pub fn alpha_db_per_km(&self) -> f64 {
        self.alpha_db_per_km
    }

    pub fn length_km(&self) -> f64 {
        self.length_km
    }

    pub fn eta_b(&self) -> f64 {
        self.eta_b
    }

    pub fn p_d(&self) -> f64 {
        self.p_d
    }

    pub fn e_d(&self) -> f64 {
        self.e_d
    }

    /// Fiber transmission `10^(-alpha l / 10)`.
    pub fn channel_transmission(&self) -> f64 {
        10f64.powf(-self.alpha_db_per_km * self.length_km / 10.0)
    }

    /// End-to-end single-photon detection probability
    /// `eta = eta_c * eta_B` (excluding background).
    pub fn transmission(&self) -> f64 {
        self.channel_transmission() * self.eta_b
    }

    /// Conditional detection probability given `n` photons sent:
    /// `1 - (1 - eta)^n (1 - p_d)^2`.
    pub fn yield_n(&self, n: usize) -> f64 {
        let eta = self.transmission();
        -f64::exp_m1(ln_pow1m(eta, n) + 2.0 * f64::ln_1p(-self.p_d))
    }

    /// `(1 - eta e_d)^n - (1 - eta (1 - e_d))^n`, the polarization term of
    /// the error rate, computed without cancellation.
    fn routing_diff(&self, n: usize) -> f64 {
        if n == 0 {
            return 0.0;
        }
        let eta = self.transmission();
        let ln_c = f64::ln_1p(-eta * self.e_d);
        let g = 1.0 - eta * (1.0 - self.e_d);
        if g <= 0.0 {
            // only reachable at eta = 1, e_d = 0
            return (n as f64 * ln_c).exp();
        }
        let ln_g = f64::ln_1p(-eta * (1.0 - self.e_d));
        (n as f64 * ln_g).exp() * f64::exp_m1(n as f64 * (ln_c - ln_g))
    }

    /// Conditional error-weighted detection probability given `n` photons:
    /// `Q_n e_n / p_n = (1/2) { 1 - (1-eta)^n (1-p_d)^2
    ///                          - (1-p_d) [ (1-eta e_d)^n - (1-eta+eta e_d)^n ] }`.
    ///
    /// At `n = 0` this is half the vacuum yield: background clicks carry a
    /// random bit, so `e_0 = 1/2`.
    pub fn error_weighted_yield_n(&self, n: usize) -> f64 {
        0.5 * (self.yield_n(n) - (1.0 - self.p_d) * self.routing_diff(n))
    }

    /// Conditional error rate `e_n` given `n` photons and a detection.
    /// Falls back to 1/2 when the yield vanishes (no detections to err on).
    pub fn error_rate_n(&self, n: usize) -> f64 {
        let y = self.yield_n(n);
        if y > 0.0 {
            self.error_weighted_yield_n(n) / y
        } else {
            0.5
        }
    }
}

/// The four protocol observables plus the trigger ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct RateSummary {
    /// Detection rate per pulse among triggered pulses, `Q^(t)`.
    pub gain_triggered: f64,
    /// QBER of the triggered detections, `E^(t)`.
    pub qber_triggered: f64,
    /// Detection rate per pulse among nontriggered pulses, `Q^(nt)`.
    pub gain_nontriggered: f64,
    /// QBER of the nontriggered detections, `E^(nt)`.
    pub qber_nontriggered: f64,
    /// `r = Q^(t) / Q^(nt)`.
    pub trigger_ratio: f64,
    /// Per-photon-number breakdown, when the computation path exposes it.
    pub per_n: Option<PerPhotonDiagnostics>,
}

/// Per-photon-number rate breakdown (diagnostic; not observable in the
/// actual protocol).
#[derive(Debug, Clone, PartialEq)]
pub struct PerPhotonDiagnostics {
    /// `Q_n^(t)` per photon number.
    pub gain_triggered: Vec<f64>,
    /// `Q_n^(nt)` per photon number.
    pub gain_nontriggered: Vec<f64>,
    /// Conditional error rates `e_n`.
    pub error_rates: Vec<f64>,
}

impl RateSummary {
    /// Vacuum fraction of the nontriggered detections,
    /// `x_true = Q_0^(nt) / Q^(nt)`, available with per-n diagnostics.
    pub fn true_vacuum_fraction(&self) -> Option<f64> {
        let per_n = self.per_n.as_ref()?;
        Some(per_n.gain_nontriggered.first()? / self.gain_nontriggered)
    }
}

/// Observables by direct truncated summation over the photon number.
///
/// Keeps the per-n breakdown as diagnostics. This is the reference path;
/// [`observables_closed_form`] is the fast equivalent.
pub fn observables(src: &SourceStats, ch: &ChannelParams) -> Result<RateSummary> {
    let len = src.len();
    let mut gain_t = Vec::with_capacity(len);
    let mut gain_nt = Vec::with_capacity(len);
    let mut errors = Vec::with_capacity(len);

    let mut q_t = 0.0;
    let mut q_nt = 0.0;
    let mut eq_t = 0.0;
    let mut eq_nt = 0.0;
    for n in 0..len {
        let y = ch.yield_n(n);
        let w = ch.error_weighted_yield_n(n);
        let t = src.triggered()[n];
        let nt = src.nontriggered()[n];
        gain_t.push(t * y);
        gain_nt.push(nt * y);
        errors.push(if y > 0.0 { w / y } else { 0.5 });
        q_t += t * y;
        q_nt += nt * y;
        eq_t += t * w;
        eq_nt += nt * w;
    }

    if q_t <= 0.0 {
        return Err(Error::DegenerateObservables {
            quantity: "triggered gain",
        });
    }
    if q_nt <= 0.0 {
        return Err(Error::DegenerateObservables {
            quantity: "nontriggered gain",
        });
    }

    Ok(RateSummary {
        gain_triggered: q_t,
        qber_triggered: eq_t / q_t,
        gain_nontriggered: q_nt,
        qber_nontriggered: eq_nt / q_nt,
        trigger_ratio: q_t / q_nt,
        per_n: Some(PerPhotonDiagnostics {
            gain_triggered: gain_t,
            gain_nontriggered: gain_nt,
            error_rates: errors,
        }),
    })
}

/// Error-weighted and plain gains for both event classes in closed form:
/// `(Q_t, Q_t E_t, Q_nt, Q_nt E_nt)`.
fn closed_form_parts(src: &SourceParams, ch: &ChannelParams) -> (f64, f64, f64, f64) {
    let mu = src.mu();
    let eta_a = src.eta_a();
    let d_a = src.d_a();
    let eta = ch.transmission();
    let p_d = ch.p_d();
    let e_d = ch.e_d();

    // G expressed through w = 1 - z: G = 1 / (1 + mu w). The w arguments
    // are exact products, so no cancellation occurs forming them.
    let g = |w: f64| 1.0 / (1.0 + mu * w);
    // G(z1) - G(z2) = mu (w2 - w1) / [(1 + mu w1)(1 + mu w2)]
    let g_diff = |w_small: f64, w_delta: f64| {
        mu * w_delta / ((1.0 + mu * w_small) * (1.0 + mu * (w_small + w_delta)))
    };

    let w_a = eta_a;
    let w_b = eta;
    let w_ab = eta_a + (1.0 - eta_a) * eta;
    let w_c = eta * e_d;
    let w_ac = eta_a + (1.0 - eta_a) * eta * e_d;

    let no_trigger = 1.0 - d_a;
    let bg = p_d * (2.0 - p_d); // 1 - (1 - p_d)^2

    // S_t(z) = sum_n p_n gamma_n z^n = G(z) - (1 - d_A) G(a z)
    let s_t_b = g(w_b) - no_trigger * g(w_ab);

    // Q^(t) = [S_t(1) - S_t(b)] + bg * S_t(b)
    let d_full = g_diff(0.0, eta); // G(1) - G(b)
    let d_heralded = g_diff(w_a, (1.0 - eta_a) * eta); // G(a) - G(ab)
    let q_t = (d_full - no_trigger * d_heralded) + bg * s_t_b;

    // Q^(nt) = (1 - d_A) { [G(a) - G(ab)] + bg G(ab) }
    let q_nt = no_trigger * (d_heralded + bg * g(w_ab));

    // Error sums need G(c) - G(g) and G(ac) - G(ag), where
    // c - g = eta (1 - 2 e_d) and ac - ag = (1 - eta_A) eta (1 - 2 e_d).
    let d_routing = g_diff(w_c, eta * (1.0 - 2.0 * e_d));
    let d_routing_heralded = g_diff(w_ac, (1.0 - eta_a) * eta * (1.0 - 2.0 * e_d));

    let eq_t = 0.5 * (q_t - (1.0 - p_d) * (d_routing - no_trigger * d_routing_heralded));
    let eq_nt = 0.5 * (q_nt - (1.0 - p_d) * no_trigger * d_routing_heralded);

    (q_t, eq_t, q_nt, eq_nt)
}

/// Observables in closed form via the geometric generating function
/// `G(z) = sum_n p_n z^n = 1 / (1 + mu (1 - z))`.
///
/// Every sum reduces to a handful of `G` evaluations at products of
/// `(1 - eta_A)`, `(1 - eta)`, `(1 - eta e_d)` and `(1 - eta (1 - e_d))`.
/// Differences of `G` values are formed analytically so small gains keep
/// full relative precision; agrees with [`observables`] to better than
/// 1e-10 relative.
pub fn observables_closed_form(src: &SourceParams, ch: &ChannelParams) -> Result<RateSummary> {
    let (q_t, eq_t, q_nt, eq_nt) = closed_form_parts(src, ch);
    if q_t <= 0.0 {
        return Err(Error::DegenerateObservables {
            quantity: "triggered gain",
        });
    }
    if q_nt <= 0.0 {
        return Err(Error::DegenerateObservables {
            quantity: "nontriggered gain",
        });
    }
    Ok(RateSummary {
        gain_triggered: q_t,
        qber_triggered: eq_t / q_t,
        gain_nontriggered: q_nt,
        qber_nontriggered: eq_nt / q_nt,
        trigger_ratio: q_t / q_nt,
        per_n: None,
    })
}

/// Observables as seen by the triggered-data-only protocol, which never
/// conditions on the nontriggered class. Unlike [`observables_closed_form`]
/// this tolerates a vanishing nontriggered gain (an ideal heralding
/// detector over a background-free channel detects nothing nontriggered);
/// the nontriggered fields are then NaN.
pub fn triggered_only_observables(src: &SourceParams, ch: &ChannelParams) -> Result<RateSummary> {
    let (q_t, eq_t, q_nt, eq_nt) = closed_form_parts(src, ch);
    if q_t <= 0.0 {
        return Err(Error::DegenerateObservables {
            quantity: "triggered gain",
        });
    }
    let observed_nt = q_nt > 0.0;
    Ok(RateSummary {
        gain_triggered: q_t,
        qber_triggered: eq_t / q_t,
        gain_nontriggered: if observed_nt { q_nt } else { f64::NAN },
        qber_nontriggered: if observed_nt { eq_nt / q_nt } else { f64::NAN },
        trigger_ratio: if observed_nt { q_t / q_nt } else { f64::NAN },
        per_n: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::TailPolicy;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn channel(alpha: f64, l: f64, eta_b: f64, p_d: f64, e_d: f64) -> ChannelParams {
        ChannelParams::new(alpha, l, eta_b, p_d, e_d).unwrap()
    }

    #[test]
    fn lossless_single_photon_always_detected() {
        let ch = channel(0.0, 0.0, 1.0, 0.0, 0.033);
        assert_eq!(ch.yield_n(1), 1.0);
    }

    #[test]
    fn vacuum_yield_is_background_only() {
        let ch = channel(0.21, 20.0, 0.045, 8.5e-7, 0.033);
        let p_d = 8.5e-7f64;
        let expected = 1.0 - (1.0 - p_d) * (1.0 - p_d);
        assert_relative_eq!(ch.yield_n(0), expected, max_relative = 1e-9);
        // stable route keeps full precision where the naive form loses it
        assert_relative_eq!(ch.yield_n(0), p_d * (2.0 - p_d), max_relative = 1e-14);
    }

    #[test]
    fn single_photon_yield_at_gys_20km() {
        let ch = ChannelParams::gys(20.0).unwrap();
        let eta = 0.045 * 10f64.powf(-0.21 * 20.0 / 10.0);
        let expected = 1.0 - (1.0 - eta) * (1.0 - 8.5e-7) * (1.0 - 8.5e-7);
        assert_relative_eq!(ch.yield_n(1), expected, max_relative = 1e-12);
        // frozen regression value
        assert_relative_eq!(ch.yield_n(1), 1.711019374922629e-2, max_relative = 1e-12);
    }

    #[test]
    fn error_weighted_yield_examples() {
        let ch = channel(0.21, 20.0, 0.045, 8.5e-7, 0.033);
        // vacuum: half the background yield, e_0 exactly 1/2
        assert_eq!(ch.error_weighted_yield_n(0), 0.5 * ch.yield_n(0));
        assert_eq!(ch.error_rate_n(0), 0.5);

        // no error mechanism: zero for all n
        let clean = channel(0.21, 20.0, 0.045, 0.0, 0.0);
        for n in 0..10 {
            assert!(clean.error_weighted_yield_n(n).abs() < 1e-15);
        }

        // lossless, no background: a single photon errs with e_d
        let ideal = channel(0.0, 0.0, 1.0, 0.0, 0.033);
        assert_relative_eq!(ideal.error_weighted_yield_n(1), 0.033, max_relative = 1e-12);
        assert_relative_eq!(ideal.error_rate_n(1), 0.033, max_relative = 1e-12);
    }

    #[test]
    fn error_rates_bounded() {
        let ch = channel(0.21, 50.0, 0.045, 8.5e-7, 0.033);
        for n in 0..50 {
            let e = ch.error_rate_n(n);
            assert!((0.0..=1.0).contains(&e), "e_{n} = {e}");
        }
    }

    fn gys_stats(mu: f64) -> SourceStats {
        SourceParams::new(mu, 0.5, 1e-6)
            .unwrap()
            .stats(&TailPolicy::default())
            .unwrap()
    }

    #[test]
    fn observables_match_independent_summation() {
        // naive reference: direct powf evaluation of the per-n model
        let mu = 0.19f64;
        let stats = gys_stats(mu);
        let ch = ChannelParams::gys(20.0).unwrap();
        let eta = 0.045 * 10f64.powf(-0.42);
        let (p_d, e_d) = (8.5e-7f64, 0.033f64);

        let mut q_t = 0.0;
        let mut q_nt = 0.0;
        let mut eq_t = 0.0;
        let mut eq_nt = 0.0;
        for n in 0..stats.len() {
            let nf = n as i32;
            let y = 1.0 - (1.0 - eta).powi(nf) * (1.0 - p_d).powi(2);
            let w = 0.5
                * (y - (1.0 - p_d)
                    * ((1.0 - eta * e_d).powi(nf) - (1.0 - eta + eta * e_d).powi(nf)));
            q_t += stats.triggered()[n] * y;
            q_nt += stats.nontriggered()[n] * y;
            eq_t += stats.triggered()[n] * w;
            eq_nt += stats.nontriggered()[n] * w;
        }

        let obs = observables(&stats, &ch).unwrap();
        assert_relative_eq!(obs.gain_triggered, q_t, max_relative = 1e-10);
        assert_relative_eq!(obs.gain_nontriggered, q_nt, max_relative = 1e-10);
        assert_relative_eq!(obs.qber_triggered, eq_t / q_t, max_relative = 1e-10);
        assert_relative_eq!(obs.qber_nontriggered, eq_nt / q_nt, max_relative = 1e-10);
    }

    #[test]
    fn observables_at_gys_20km_regression() {
        let obs = observables(&gys_stats(0.19), &ChannelParams::gys(20.0).unwrap()).unwrap();
        assert_relative_eq!(obs.gain_triggered, 1.886715622822876e-3, max_relative = 1e-10);
        assert_relative_eq!(obs.qber_triggered, 3.303635586090421e-2, max_relative = 1e-10);
        assert_relative_eq!(obs.gain_nontriggered, 1.355065917228777e-3, max_relative = 1e-10);
        assert_relative_eq!(obs.qber_nontriggered, 3.35346816595456e-2, max_relative = 1e-10);
    }

    #[test]
    fn triggered_to_nontriggered_per_n_ratio_is_the_odds() {
        let stats = gys_stats(0.19);
        let ch = ChannelParams::gys(20.0).unwrap();
        let obs = observables(&stats, &ch).unwrap();
        let per_n = obs.per_n.as_ref().unwrap();
        for n in 0..stats.len() {
            let nt = per_n.gain_nontriggered[n];
            if nt > 0.0 {
                assert_relative_eq!(
                    per_n.gain_triggered[n],
                    stats.odds()[n] * nt,
                    max_relative = 1e-12
                );
            }
        }
    }

    #[test]
    fn gain_decreases_and_qber_increases_with_distance() {
        let stats = gys_stats(0.19);
        let mut prev_q = f64::INFINITY;
        let mut prev_e = 0.0;
        for l in [0.0, 25.0, 50.0, 100.0, 150.0, 200.0] {
            let obs = observables(&stats, &ChannelParams::gys(l).unwrap()).unwrap();
            assert!(obs.gain_triggered < prev_q);
            assert!(obs.qber_triggered >= prev_e);
            prev_q = obs.gain_triggered;
            prev_e = obs.qber_triggered;
        }
    }

    #[test]
    fn background_dominated_limit_is_random() {
        let stats = gys_stats(0.19);
        let obs = observables(&stats, &ChannelParams::gys(800.0).unwrap()).unwrap();
        assert!((obs.qber_triggered - 0.5).abs() < 1e-3);
        assert!((obs.qber_nontriggered - 0.5).abs() < 1e-3);
    }

    #[test]
    fn vacuum_source_observables() {
        let stats = SourceParams::new(0.0, 0.5, 1e-6)
            .unwrap()
            .stats(&TailPolicy::default())
            .unwrap();
        let ch = ChannelParams::gys(20.0).unwrap();
        let obs = observables(&stats, &ch).unwrap();
        let bg = 8.5e-7 * (2.0 - 8.5e-7);
        assert_relative_eq!(obs.gain_triggered, 1e-6 * bg, max_relative = 1e-9);
        assert_eq!(obs.qber_triggered, 0.5);
        assert_eq!(obs.qber_nontriggered, 0.5);
    }

    #[test]
    fn closed_form_matches_summation_over_random_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let tail = TailPolicy::default();
        for _ in 0..200 {
            let mu = (rng.random_range(0.01f64.ln()..3.0f64.ln())).exp();
            let eta_a = rng.random_range(0.05..0.95);
            let d_a = rng.random_range(0.0..0.01);
            let l = rng.random_range(0.0..150.0);
            let eta_b = rng.random_range(0.02..1.0);
            let p_d = 10f64.powf(rng.random_range(-8.0..-4.0));
            let e_d = rng.random_range(0.005..0.45);

            let src = SourceParams::new(mu, eta_a, d_a).unwrap();
            let ch = ChannelParams::new(0.21, l, eta_b, p_d, e_d).unwrap();
            let by_sum = observables(&src.stats(&tail).unwrap(), &ch).unwrap();
            let closed = observables_closed_form(&src, &ch).unwrap();

            assert_relative_eq!(
                closed.gain_triggered,
                by_sum.gain_triggered,
                max_relative = 1e-10
            );
            assert_relative_eq!(
                closed.gain_nontriggered,
                by_sum.gain_nontriggered,
                max_relative = 1e-10
            );
            assert_relative_eq!(
                closed.qber_triggered,
                by_sum.qber_triggered,
                max_relative = 1e-10
            );
            assert_relative_eq!(
                closed.qber_nontriggered,
                by_sum.qber_nontriggered,
                max_relative = 1e-10
            );
        }
    }

    #[test]
    fn closed_form_vacuum_source() {
        let src = SourceParams::new(0.0, 0.5, 1e-6).unwrap();
        let ch = ChannelParams::gys(20.0).unwrap();
        let obs = observables_closed_form(&src, &ch).unwrap();
        let bg = 8.5e-7 * (2.0 - 8.5e-7);
        assert_relative_eq!(obs.gain_triggered, 1e-6 * bg, max_relative = 1e-12);
        assert_eq!(obs.qber_triggered, 0.5);
    }

    #[test]
    fn fully_dead_configuration_is_degenerate() {
        let src = SourceParams::new(0.3, 0.0, 0.0).unwrap();
        let ch = channel(0.21, 20.0, 0.0, 0.0, 0.033);
        assert!(matches!(
            observables_closed_form(&src, &ch),
            Err(Error::DegenerateObservables { .. })
        ));
        let stats = src.stats(&TailPolicy::default()).unwrap();
        assert!(matches!(
            observables(&stats, &ch),
            Err(Error::DegenerateObservables { .. })
        ));
    }
}
