//! Key-rate analysis for BB84 with a triggered parametric down-conversion
//! source.
//!
//! The source emits photon pairs with thermal number statistics; one mode
//! is heralded by a threshold detector, the other travels to the receiver.
//! Running the protocol on triggered *and* nontriggered pulses and
//! comparing their detection rates constrains photon-number-splitting
//! attacks, because the per-photon-number trigger odds are fixed locally
//! at the source. The crate computes the resulting unconditionally secure
//! key rates, optimizes the source strength per distance, produces
//! rate-versus-distance tables, and cross-validates the analytics with a
//! pulse-level Monte Carlo simulator including attack scenarios.
//!
//! Module map:
//! - [`source`]: pair-number statistics and the heralding split
//! - [`channel`]: fiber/detector model and the four protocol observables
//! - [`bounds`]: single-photon bounds, per-strategy and final key rates
//! - [`sweep`]: strength optimization, distance sweeps, crossing finders
//! - [`montecarlo`]: pulse-level simulator and attack vectors

pub mod bounds;
pub mod channel;
pub mod error;
pub mod minimize;
pub mod montecarlo;
pub mod source;
pub mod sweep;

pub use bounds::{
    binary_entropy, final_rate, key_rate_both, key_rate_conventional,
    key_rate_ideal_single_photon, key_rate_triggered, key_rates, single_photon_error_bound,
    single_photon_fraction_bound, ErrorCorrection, KeyRateResult, MinimizerPolicy,
    ProtocolConstants, RatePoint, Strategy,
};
pub use channel::{
    observables, observables_closed_form, triggered_only_observables, ChannelParams,
    PerPhotonDiagnostics, RateSummary,
};
pub use error::{Error, Result};
pub use montecarlo::{
    attack_observables, pns_attack_vector, simulate, AttackScenario, CellCounts, EmpiricalRates,
    PerPhotonTally, SimConfig, SimResult,
};
pub use source::{SourceParams, SourceStats, TailPolicy};
pub use sweep::{
    evaluate, find_cutoff, find_strategy_switch, optimize_mu, run_sweep, Evaluation, MuPolicy,
    MuSearch, Protocol, SweepRow, SweepSpec,
};
