//! Pulse-level stochastic simulator and attack-vector construction.
//!
//! The simulator samples the full per-pulse chain: photon-pair number,
//! heralding click, photon routing through the lossy channel into the two
//! receiver detectors, background clicks, and the random-bit assignment of
//! double clicks. It validates the analytic observables empirically and
//! demonstrates the photon-number-splitting signature in the trigger
//! ratio. An attack replaces the physical channel by per-photon-number
//! yields and error rates chosen by the adversary; the per-n trigger
//! statistics are untouchable by construction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::{ChannelParams, PerPhotonDiagnostics, RateSummary};
use crate::error::{Error, Result};
use crate::source::{SourceParams, SourceStats, TailPolicy};

/// Generator identifier recorded in results; within one build the stream
/// is bit-stable for a given seed.
pub const RNG_ALGORITHM: &str = "chacha8";

const BATCH_SIZE: u64 = 1 << 20;

/// Per-photon-number channel behavior imposed by an adversary.
///
/// Any collective attack is equivalent, for these observables, to a choice
/// of yield `Y_n` and error rate `e_n` per photon number; vacuum
/// detections are background clicks, so `e_0 = 1/2` always.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackScenario {
    yields: Vec<f64>,
    error_rates: Vec<f64>,
    label: String,
}

impl AttackScenario {
    pub fn new(yields: Vec<f64>, error_rates: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if yields.is_empty() || yields.len() != error_rates.len() {
            return Err(Error::invalid(
                "attack",
                format!(
                    "need equal-length nonempty yield/error vectors, got {} and {}",
                    yields.len(),
                    error_rates.len()
                ),
            ));
        }
        for (n, y) in yields.iter().enumerate() {
            if !y.is_finite() || !(0.0..=1.0).contains(y) {
                return Err(Error::invalid("attack", format!("Y_{n} = {y} out of [0, 1]")));
            }
        }
        for (n, e) in error_rates.iter().enumerate() {
            if !e.is_finite() || !(0.0..=1.0).contains(e) {
                return Err(Error::invalid("attack", format!("e_{n} = {e} out of [0, 1]")));
            }
        }
        if error_rates[0] != 0.5 {
            return Err(Error::invalid(
                "attack",
                format!("e_0 must be 1/2 (background clicks), got {}", error_rates[0]),
            ));
        }
        Ok(Self {
            yields,
            error_rates,
            label: label.into(),
        })
    }

    pub fn yields(&self) -> &[f64] {
        &self.yields
    }

    pub fn error_rates(&self) -> &[f64] {
        &self.error_rates
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    fn yield_at(&self, n: usize) -> f64 {
        self.yields[n.min(self.yields.len() - 1)]
    }

    fn error_at(&self, n: usize) -> f64 {
        self.error_rates[n.min(self.error_rates.len() - 1)]
    }
}

/// Photon-number-splitting attack with a tunable single-photon block
/// fraction: multi-photon pulses are split and forwarded losslessly
/// (`Y_n = 1` for n >= 2) with the channel's conditional error rates, a
/// fraction `block_fraction` of single-photon pulses is suppressed, and
/// vacuum behaves as the honest channel.
pub fn pns_attack_vector(
    src: &SourceStats,
    ch: &ChannelParams,
    block_fraction: f64,
) -> Result<AttackScenario> {
    if !block_fraction.is_finite() || !(0.0..=1.0).contains(&block_fraction) {
        return Err(Error::invalid(
            "block_fraction",
            format!("must be in [0, 1], got {block_fraction}"),
        ));
    }
    let len = src.len().max(3);
    let mut yields = Vec::with_capacity(len);
    let mut error_rates = Vec::with_capacity(len);
    for n in 0..len {
        let y = match n {
            0 => ch.yield_n(0),
            1 => (1.0 - block_fraction) * ch.yield_n(1),
            _ => 1.0,
        };
        yields.push(y);
        error_rates.push(if n == 0 { 0.5 } else { ch.error_rate_n(n) });
    }
    AttackScenario::new(
        yields,
        error_rates,
        format!("pns-block-{block_fraction}"),
    )
}

/// Observables produced by an attack vector acting on the source
/// statistics: `Q_n^(t) = p_n^(t) Y_n`, `Q_n^(nt) = p_n^(nt) Y_n`.
pub fn attack_observables(src: &SourceStats, attack: &AttackScenario) -> Result<RateSummary> {
    let mut gain_t = Vec::with_capacity(src.len());
    let mut gain_nt = Vec::with_capacity(src.len());
    let mut errors = Vec::with_capacity(src.len());
    let mut q_t = 0.0;
    let mut q_nt = 0.0;
    let mut eq_t = 0.0;
    let mut eq_nt = 0.0;
    for n in 0..src.len() {
        let y = attack.yield_at(n);
        let e = attack.error_at(n);
        let t = src.triggered()[n] * y;
        let nt = src.nontriggered()[n] * y;
        gain_t.push(t);
        gain_nt.push(nt);
        errors.push(e);
        q_t += t;
        q_nt += nt;
        eq_t += t * e;
        eq_nt += nt * e;
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

/// Simulation configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub pulses: u64,
    pub seed: u64,
    pub source: SourceParams,
    pub channel: ChannelParams,
    pub attack: Option<AttackScenario>,
    pub tail: TailPolicy,
}

impl SimConfig {
    pub fn new(pulses: u64, seed: u64, source: SourceParams, channel: ChannelParams) -> Self {
        Self {
            pulses,
            seed,
            source,
            channel,
            attack: None,
            tail: TailPolicy::default(),
        }
    }
}

/// Outcome counts per (trigger, detection, error) cell.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CellCounts {
    pub triggered_correct: u64,
    pub triggered_error: u64,
    pub triggered_missed: u64,
    pub nontriggered_correct: u64,
    pub nontriggered_error: u64,
    pub nontriggered_missed: u64,
}

impl CellCounts {
    pub fn total(&self) -> u64 {
        self.triggered_correct
            + self.triggered_error
            + self.triggered_missed
            + self.nontriggered_correct
            + self.nontriggered_error
            + self.nontriggered_missed
    }

    fn merge(&mut self, other: &CellCounts) {
        self.triggered_correct += other.triggered_correct;
        self.triggered_error += other.triggered_error;
        self.triggered_missed += other.triggered_missed;
        self.nontriggered_correct += other.nontriggered_correct;
        self.nontriggered_error += other.nontriggered_error;
        self.nontriggered_missed += other.nontriggered_missed;
    }
}

/// Per-photon-number tallies; simulation-side truth that the protocol
/// itself cannot observe.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PerPhotonTally {
    pub pulses: u64,
    pub triggered: u64,
    pub detected_triggered: u64,
    pub detected_nontriggered: u64,
    pub errors_triggered: u64,
    pub errors_nontriggered: u64,
}

impl PerPhotonTally {
    fn merge(&mut self, other: &PerPhotonTally) {
        self.pulses += other.pulses;
        self.triggered += other.triggered;
        self.detected_triggered += other.detected_triggered;
        self.detected_nontriggered += other.detected_nontriggered;
        self.errors_triggered += other.errors_triggered;
        self.errors_nontriggered += other.errors_nontriggered;
    }
}

/// Empirical observables with binomial standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalRates {
    pub summary: RateSummary,
    pub se_gain_triggered: f64,
    pub se_qber_triggered: f64,
    pub se_gain_nontriggered: f64,
    pub se_qber_nontriggered: f64,
}

/// Simulation result: exact counts plus derived empirical rates.
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub pulses: u64,
    pub seed: u64,
    pub rng_algorithm: &'static str,
    pub cells: CellCounts,
    pub per_photon: Vec<PerPhotonTally>,
}

impl SimResult {
    /// Empirical observables; degenerate when either event class saw no
    /// detections.
    pub fn empirical(&self) -> Result<EmpiricalRates> {
        let n = self.pulses as f64;
        let det_t = self.cells.triggered_correct + self.cells.triggered_error;
        let det_nt = self.cells.nontriggered_correct + self.cells.nontriggered_error;
        if det_t == 0 {
            return Err(Error::DegenerateObservables {
                quantity: "triggered detections",
            });
        }
        if det_nt == 0 {
            return Err(Error::DegenerateObservables {
                quantity: "nontriggered detections",
            });
        }

        let q_t = det_t as f64 / n;
        let q_nt = det_nt as f64 / n;
        let e_t = self.cells.triggered_error as f64 / det_t as f64;
        let e_nt = self.cells.nontriggered_error as f64 / det_nt as f64;

        let per_n = PerPhotonDiagnostics {
            gain_triggered: self
                .per_photon
                .iter()
                .map(|t| t.detected_triggered as f64 / n)
                .collect(),
            gain_nontriggered: self
                .per_photon
                .iter()
                .map(|t| t.detected_nontriggered as f64 / n)
                .collect(),
            error_rates: self
                .per_photon
                .iter()
                .map(|t| {
                    let det = t.detected_triggered + t.detected_nontriggered;
                    if det == 0 {
                        0.5
                    } else {
                        (t.errors_triggered + t.errors_nontriggered) as f64 / det as f64
                    }
                })
                .collect(),
        };

        Ok(EmpiricalRates {
            summary: RateSummary {
                gain_triggered: q_t,
                qber_triggered: e_t,
                gain_nontriggered: q_nt,
                qber_nontriggered: e_nt,
                trigger_ratio: q_t / q_nt,
                per_n: Some(per_n),
            },
            se_gain_triggered: (q_t * (1.0 - q_t) / n).sqrt(),
            se_qber_triggered: (e_t * (1.0 - e_t) / det_t as f64).sqrt(),
            se_gain_nontriggered: (q_nt * (1.0 - q_nt) / n).sqrt(),
            se_qber_nontriggered: (e_nt * (1.0 - e_nt) / det_nt as f64).sqrt(),
        })
    }
}

struct Tallies {
    cells: CellCounts,
    per_photon: Vec<PerPhotonTally>,
}

impl Tallies {
    fn new(len: usize) -> Self {
        Self {
            cells: CellCounts::default(),
            per_photon: vec![PerPhotonTally::default(); len],
        }
    }

    fn merge(&mut self, other: &Tallies) {
        self.cells.merge(&other.cells);
        for (a, b) in self.per_photon.iter_mut().zip(&other.per_photon) {
            a.merge(b);
        }
    }
}

/// Run the pulse-level simulation.
///
/// Pulses are processed in batches whose generator streams derive from the
/// master seed (ChaCha stream = batch index), so the tally merge is
/// order-independent and the result is reproducible for a given seed.
pub fn simulate(config: &SimConfig) -> Result<SimResult> {
    if config.pulses == 0 {
        return Err(Error::invalid("pulses", "must be >= 1"));
    }
    let stats = config.source.stats(&config.tail)?;
    let gammas: Vec<f64> = stats.trigger_probs().to_vec();
    let tally_len = stats.len();

    let mu = config.source.mu();
    let beta = mu / (1.0 + mu);
    let ln_beta = beta.ln(); // -inf for mu = 0

    let eta = config.channel.transmission();
    let e_d = config.channel.e_d();
    let p_d = config.channel.p_d();
    let p_correct = eta * (1.0 - e_d);

    let mut totals = Tallies::new(tally_len);
    let batches = config.pulses.div_ceil(BATCH_SIZE);
    for batch in 0..batches {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(batch);
        let count = BATCH_SIZE.min(config.pulses - batch * BATCH_SIZE);
        let mut tallies = Tallies::new(tally_len);

        for _ in 0..count {
            // photon-pair number: geometric by inverse transform
            let n = if beta == 0.0 {
                0usize
            } else {
                let u: f64 = rng.random();
                ((-u).ln_1p() / ln_beta) as usize
            };

            let gamma = gammas
                .get(n)
                .copied()
                .unwrap_or_else(|| config.source.trigger_prob(n));
            let triggered = rng.random::<f64>() < gamma;

            let (detected, error) = match &config.attack {
                Some(attack) => {
                    let detected = rng.random::<f64>() < attack.yield_at(n);
                    let error = detected && rng.random::<f64>() < attack.error_at(n);
                    (detected, error)
                }
                None => {
                    // route each photon: correct detector, wrong detector, or lost
                    let mut any_correct = false;
                    let mut any_wrong = false;
                    for _ in 0..n {
                        let u: f64 = rng.random();
                        if u < p_correct {
                            any_correct = true;
                        } else if u < eta {
                            any_wrong = true;
                        }
                    }
                    let click_correct = any_correct || rng.random::<f64>() < p_d;
                    let click_wrong = any_wrong || rng.random::<f64>() < p_d;
                    let detected = click_correct || click_wrong;
                    let error = if !detected {
                        false
                    } else if click_correct && click_wrong {
                        // double click: random bit
                        rng.random::<f64>() < 0.5
                    } else {
                        click_wrong
                    };
                    (detected, error)
                }
            };

            let cells = &mut tallies.cells;
            match (triggered, detected, error) {
                (true, true, false) => cells.triggered_correct += 1,
                (true, true, true) => cells.triggered_error += 1,
                (true, false, _) => cells.triggered_missed += 1,
                (false, true, false) => cells.nontriggered_correct += 1,
                (false, true, true) => cells.nontriggered_error += 1,
                (false, false, _) => cells.nontriggered_missed += 1,
            }

            let slot = &mut tallies.per_photon[n.min(tally_len - 1)];
            slot.pulses += 1;
            if triggered {
                slot.triggered += 1;
                if detected {
                    slot.detected_triggered += 1;
                    if error {
                        slot.errors_triggered += 1;
                    }
                }
            } else if detected {
                slot.detected_nontriggered += 1;
                if error {
                    slot.errors_nontriggered += 1;
                }
            }
        }
        totals.merge(&tallies);
    }

    Ok(SimResult {
        pulses: config.pulses,
        seed: config.seed,
        rng_algorithm: RNG_ALGORITHM,
        cells: totals.cells,
        per_photon: totals.per_photon,
    })
}
