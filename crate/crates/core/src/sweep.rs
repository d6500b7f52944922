//! Source-strength optimization, distance sweeps, and crossing finders.

use crate::bounds::{
    self, KeyRateResult, MinimizerPolicy, ProtocolConstants, Strategy,
};
use crate::channel::{observables_closed_form, triggered_only_observables, ChannelParams, RateSummary};
use crate::error::{Error, Result};
use crate::minimize;
use crate::source::{SourceParams, TailPolicy};

/// Which analysis a sweep runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    /// Triggered/nontriggered analysis with the built-in decoy comparison.
    EfficientPdc,
    /// Triggered-data-only analysis (multi-photon mass bounded by the
    /// source alone).
    ConventionalPdc,
    /// Ideal single-photon source over the same channel, as a reference.
    IdealSinglePhoton,
}

impl Protocol {
    pub fn name(&self) -> &'static str {
        match self {
            Protocol::EfficientPdc => "efficient_pdc",
            Protocol::ConventionalPdc => "conventional_pdc",
            Protocol::IdealSinglePhoton => "ideal_single_photon",
        }
    }
}

/// Source strength: fixed, or optimized per distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MuPolicy {
    Fixed(f64),
    Optimize,
}

/// Search window and resolution for the per-distance strength optimizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuSearch {
    pub lo: f64,
    pub hi: f64,
    /// Points of the logarithmic scan grid.
    pub grid_points: usize,
    /// Relative tolerance on the refined optimum.
    pub rel_tolerance: f64,
}

impl Default for MuSearch {
    fn default() -> Self {
        Self {
            lo: 1e-4,
            hi: 2.0,
            grid_points: 129,
            rel_tolerance: 1e-4,
        }
    }
}

/// Everything a distance sweep needs.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub distances_km: Vec<f64>,
    pub protocol: Protocol,
    pub mu: MuPolicy,
    /// Heralding detector efficiency; 1.0 is only valid together with a
    /// zero dark count and the conventional protocol.
    pub trigger_efficiency: f64,
    pub trigger_dark_count: f64,
    /// Channel template; the length field is overridden per distance.
    pub channel: ChannelParams,
    pub constants: ProtocolConstants,
    pub mu_search: MuSearch,
    pub x_minimizer: MinimizerPolicy,
    pub tail: TailPolicy,
}

impl SweepSpec {
    /// Curve defaults: efficient protocol, optimized strength, standard
    /// heralding detector (eta_A = 0.5, d_A = 1e-6) over the given channel.
    pub fn new(distances_km: Vec<f64>, channel: ChannelParams) -> Self {
        Self {
            distances_km,
            protocol: Protocol::EfficientPdc,
            mu: MuPolicy::Optimize,
            trigger_efficiency: 0.5,
            trigger_dark_count: 1e-6,
            channel,
            constants: ProtocolConstants::default(),
            mu_search: MuSearch::default(),
            x_minimizer: MinimizerPolicy::default(),
            tail: TailPolicy::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for pair in self.distances_km.windows(2) {
            if pair[1] <= pair[0] {
                return Err(Error::invalid(
                    "distances_km",
                    format!("must be strictly increasing, got {} after {}", pair[1], pair[0]),
                ));
            }
        }
        if let Some(first) = self.distances_km.first() {
            if !first.is_finite() || *first < 0.0 {
                return Err(Error::invalid(
                    "distances_km",
                    format!("distances must be >= 0, got {first}"),
                ));
            }
        }
        if !(self.mu_search.lo > 0.0 && self.mu_search.lo < self.mu_search.hi) {
            return Err(Error::invalid(
                "mu_search",
                format!(
                    "need 0 < lo < hi, got [{}, {}]",
                    self.mu_search.lo, self.mu_search.hi
                ),
            ));
        }
        if let MuPolicy::Fixed(mu) = self.mu {
            if !mu.is_finite() || mu < 0.0 {
                return Err(Error::invalid("mu", format!("must be >= 0, got {mu}")));
            }
        }
        // constructing source params validates the trigger fields
        self.source_params(self.mu_search.lo)?;
        self.constants.validate()?;
        Ok(())
    }

    fn source_params(&self, mu: f64) -> Result<SourceParams> {
        if self.trigger_efficiency == 1.0 {
            if self.trigger_dark_count != 0.0 {
                return Err(Error::invalid(
                    "d_a",
                    "must be 0 when eta_a = 1 (ideal heralding detector)",
                ));
            }
            SourceParams::ideal_trigger(mu)
        } else {
            SourceParams::new(mu, self.trigger_efficiency, self.trigger_dark_count)
        }
    }
}

/// Evaluation of one (distance, strength) point under a sweep's protocol.
#[derive(Debug, Clone, PartialEq)]
pub enum Evaluation {
    Efficient {
        summary: RateSummary,
        result: KeyRateResult,
    },
    Conventional {
        summary: RateSummary,
        /// Raw rate; may be negative.
        rate: f64,
    },
    Ideal {
        gain: f64,
        qber: f64,
        /// Raw rate; may be negative.
        rate: f64,
    },
}

impl Evaluation {
    /// Final rate, clamped at zero.
    pub fn final_rate(&self) -> f64 {
        match self {
            Evaluation::Efficient { result, .. } => result.final_rate,
            Evaluation::Conventional { rate, .. } | Evaluation::Ideal { rate, .. } => {
                rate.max(0.0)
            }
        }
    }

    pub fn selected(&self) -> Option<Strategy> {
        match self {
            Evaluation::Efficient { result, .. } => Some(result.selected()),
            _ => None,
        }
    }
}

/// Evaluate one point of a sweep.
pub fn evaluate(spec: &SweepSpec, length_km: f64, mu: f64) -> Result<Evaluation> {
    let ch = spec.channel.at_distance(length_km)?;
    match spec.protocol {
        Protocol::EfficientPdc => {
            let src = spec.source_params(mu)?;
            let summary = observables_closed_form(&src, &ch)?;
            let stats = src.stats(&spec.tail)?;
            let result = bounds::key_rates(&summary, &stats, &spec.constants, &spec.x_minimizer)?;
            Ok(Evaluation::Efficient { summary, result })
        }
        Protocol::ConventionalPdc => {
            let src = spec.source_params(mu)?;
            let summary = triggered_only_observables(&src, &ch)?;
            let stats = src.stats(&spec.tail)?;
            let rate = bounds::key_rate_conventional(&summary, &stats, &spec.constants)?;
            Ok(Evaluation::Conventional { summary, rate })
        }
        Protocol::IdealSinglePhoton => {
            let rate = bounds::key_rate_ideal_single_photon(&ch, &spec.constants)?;
            Ok(Evaluation::Ideal {
                gain: ch.yield_n(1),
                qber: ch.error_rate_n(1),
                rate,
            })
        }
    }
}

/// Best source strength at one distance: logarithmic grid scan over the
/// search window, then golden-section refinement. The objective is the
/// final (clamped) rate of the sweep's protocol.
///
/// Fails with [`Error::AllRatesZero`] when no strength in the window
/// yields a positive rate (beyond the cutoff distance).
pub fn optimize_mu(spec: &SweepSpec, length_km: f64) -> Result<(f64, Evaluation)> {
    let search = spec.mu_search;
    let rate_at = |mu: f64| match evaluate(spec, length_km, mu) {
        Ok(eval) => eval.final_rate(),
        Err(_) => 0.0,
    };

    // optimize on ln(mu); the optimum spans orders of magnitude between
    // protocols, so a log grid keeps the scan uniform in scale
    let best = minimize::maximize(
        |t: f64| rate_at(t.exp()),
        search.lo.ln(),
        search.hi.ln(),
        search.grid_points,
        f64::ln_1p(search.rel_tolerance),
    );

    if best.value <= 0.0 || best.value.is_nan() {
        return Err(Error::AllRatesZero {
            lo: search.lo,
            hi: search.hi,
        });
    }
    let mu_opt = best.x.exp();
    let eval = evaluate(spec, length_km, mu_opt)?;
    Ok((mu_opt, eval))
}

/// One row of a sweep table. Fields that do not apply to the protocol
/// (e.g. the nontriggered observables of the ideal single-photon
/// reference) are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub length_km: f64,
    pub mu: f64,
    pub gain_triggered: f64,
    pub qber_triggered: f64,
    pub gain_nontriggered: f64,
    pub qber_nontriggered: f64,
    pub trigger_ratio: f64,
    pub rate_triggered: f64,
    pub rate_both: f64,
    pub rate_final: f64,
    pub x_star: f64,
    /// Set when the strength optimizer found no positive rate at this
    /// distance; the row then carries `rate_final = 0`.
    pub failed: bool,
}

impl SweepRow {
    fn from_evaluation(length_km: f64, mu: f64, eval: &Evaluation) -> Self {
        match eval {
            Evaluation::Efficient { summary, result } => Self {
                length_km,
                mu,
                gain_triggered: summary.gain_triggered,
                qber_triggered: summary.qber_triggered,
                gain_nontriggered: summary.gain_nontriggered,
                qber_nontriggered: summary.qber_nontriggered,
                trigger_ratio: summary.trigger_ratio,
                rate_triggered: result.triggered.rate,
                rate_both: result.both.rate,
                rate_final: result.final_rate,
                x_star: match result.selected() {
                    Strategy::Both => result.both.x_star,
                    _ => result.triggered.x_star,
                },
                failed: false,
            },
            Evaluation::Conventional { summary, rate } => Self {
                length_km,
                mu,
                gain_triggered: summary.gain_triggered,
                qber_triggered: summary.qber_triggered,
                gain_nontriggered: summary.gain_nontriggered,
                qber_nontriggered: summary.qber_nontriggered,
                trigger_ratio: summary.trigger_ratio,
                rate_triggered: *rate,
                rate_both: f64::NAN,
                rate_final: rate.max(0.0),
                x_star: f64::NAN,
                failed: false,
            },
            Evaluation::Ideal { gain, qber, rate } => Self {
                length_km,
                mu: f64::NAN,
                gain_triggered: *gain,
                qber_triggered: *qber,
                gain_nontriggered: f64::NAN,
                qber_nontriggered: f64::NAN,
                trigger_ratio: f64::NAN,
                rate_triggered: *rate,
                rate_both: f64::NAN,
                rate_final: rate.max(0.0),
                x_star: f64::NAN,
                failed: false,
            },
        }
    }

    fn failed(length_km: f64) -> Self {
        Self {
            length_km,
            mu: f64::NAN,
            gain_triggered: f64::NAN,
            qber_triggered: f64::NAN,
            gain_nontriggered: f64::NAN,
            qber_nontriggered: f64::NAN,
            trigger_ratio: f64::NAN,
            rate_triggered: f64::NAN,
            rate_both: f64::NAN,
            rate_final: 0.0,
            x_star: f64::NAN,
            failed: true,
        }
    }
}

/// Run a sweep: one row per distance, in input order, deterministic for a
/// given spec. Rows are independent of each other.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let mut rows = Vec::with_capacity(spec.distances_km.len());
    for &l in &spec.distances_km {
        let row = match (spec.protocol, spec.mu) {
            (Protocol::IdealSinglePhoton, _) => {
                let eval = evaluate(spec, l, 0.0)?;
                SweepRow::from_evaluation(l, f64::NAN, &eval)
            }
            (_, MuPolicy::Fixed(mu)) => {
                let eval = evaluate(spec, l, mu)?;
                SweepRow::from_evaluation(l, mu, &eval)
            }
            (_, MuPolicy::Optimize) => match optimize_mu(spec, l) {
                Ok((mu, eval)) => SweepRow::from_evaluation(l, mu, &eval),
                Err(Error::AllRatesZero { .. }) => SweepRow::failed(l),
                Err(other) => return Err(other),
            },
        };
        rows.push(row);
    }
    Ok(rows)
}

fn rate_at(spec: &SweepSpec, l: f64) -> Result<f64> {
    match (spec.protocol, spec.mu) {
        (Protocol::IdealSinglePhoton, _) => Ok(evaluate(spec, l, 0.0)?.final_rate()),
        (_, MuPolicy::Fixed(mu)) => Ok(evaluate(spec, l, mu)?.final_rate()),
        (_, MuPolicy::Optimize) => match optimize_mu(spec, l) {
            Ok((_, eval)) => Ok(eval.final_rate()),
            Err(Error::AllRatesZero { .. }) => Ok(0.0),
            Err(other) => Err(other),
        },
    }
}

/// Largest distance with a positive final rate, located by bisection to a
/// resolution of 0.1 km. The bracket must have a positive rate at its low
/// end and zero at its high end.
pub fn find_cutoff(spec: &SweepSpec, lo_km: f64, hi_km: f64) -> Result<f64> {
    spec.validate()?;
    if lo_km.is_nan() || hi_km.is_nan() || lo_km >= hi_km {
        return Err(Error::InvalidBracket {
            reason: format!("need lo < hi, got [{lo_km}, {hi_km}]"),
        });
    }
    let rate_lo = rate_at(spec, lo_km)?;
    if rate_lo <= 0.0 || rate_lo.is_nan() {
        return Err(Error::InvalidBracket {
            reason: format!("rate is not positive at the low end {lo_km} km"),
        });
    }
    if rate_at(spec, hi_km)? > 0.0 {
        return Err(Error::InvalidBracket {
            reason: format!("rate is still positive at the high end {hi_km} km"),
        });
    }

    let mut lo = lo_km;
    let mut hi = hi_km;
    while hi - lo > 0.1 {
        let mid = 0.5 * (lo + hi);
        if rate_at(spec, mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Distance where the selected strategy switches from combined to
/// triggered-only key extraction, located by bisection to 0.1 km.
/// Requires the efficient protocol, the combined strategy at the low end
/// and the triggered-only strategy at the high end.
pub fn find_strategy_switch(spec: &SweepSpec, lo_km: f64, hi_km: f64) -> Result<f64> {
    spec.validate()?;
    if spec.protocol != Protocol::EfficientPdc {
        return Err(Error::InvalidBracket {
            reason: "strategy switch is defined for the efficient protocol only".into(),
        });
    }
    if lo_km.is_nan() || hi_km.is_nan() || lo_km >= hi_km {
        return Err(Error::InvalidBracket {
            reason: format!("need lo < hi, got [{lo_km}, {hi_km}]"),
        });
    }

    let selects_both = |l: f64| -> Result<bool> {
        let eval = match spec.mu {
            MuPolicy::Fixed(mu) => evaluate(spec, l, mu)?,
            MuPolicy::Optimize => match optimize_mu(spec, l) {
                Ok((_, eval)) => eval,
                Err(Error::AllRatesZero { .. }) => return Ok(false),
                Err(other) => return Err(other),
            },
        };
        Ok(eval.selected() == Some(Strategy::Both))
    };

    if !selects_both(lo_km)? {
        return Err(Error::InvalidBracket {
            reason: format!("combined strategy not selected at the low end {lo_km} km"),
        });
    }
    if selects_both(hi_km)? {
        return Err(Error::InvalidBracket {
            reason: format!("combined strategy still selected at the high end {hi_km} km"),
        });
    }

    let mut lo = lo_km;
    let mut hi = hi_km;
    while hi - lo > 0.1 {
        let mid = 0.5 * (lo + hi);
        if selects_both(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
