//! Flat `key = value` configuration files, schema validation, and merging
//! with command-line overrides.
//!
//! Format: UTF-8 text, one `key = value` per line, `#` starts a comment,
//! lists are comma-separated. Unknown keys and duplicates are rejected
//! with the offending line number.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use qkd_core::{
    ChannelParams, ErrorCorrection, MinimizerPolicy, MuPolicy, MuSearch, ProtocolConstants,
    Protocol, SourceParams, SweepSpec, TailPolicy,
};

/// Validation failure: bad config syntax, unknown or missing keys, or
/// out-of-range values.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// Output format of reports and tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

/// All recognized keys, each optional until resolution time.
#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    pub mu: Option<f64>,
    pub eta_a: Option<f64>,
    pub d_a: Option<f64>,

    pub alpha_db_per_km: Option<f64>,
    pub length_km: Option<f64>,
    pub eta_b: Option<f64>,
    pub p_d: Option<f64>,
    pub e_d: Option<f64>,

    pub q: Option<f64>,
    pub f_ec: Option<f64>,

    pub protocol: Option<Protocol>,
    pub distances_km: Option<Vec<f64>>,
    pub optimize_mu: Option<bool>,
    pub mu_lo: Option<f64>,
    pub mu_hi: Option<f64>,

    pub pulses: Option<u64>,
    pub seed: Option<u64>,
    pub z_threshold: Option<f64>,
    pub block_fraction: Option<f64>,

    pub cutoff_lo_km: Option<f64>,
    pub cutoff_hi_km: Option<f64>,

    pub format: Option<Format>,
    pub precision: Option<usize>,
    pub out: Option<String>,
}

fn parse_f64(key: &str, value: &str, line: usize) -> Result<f64, ConfigError> {
    value
        .parse::<f64>()
        .map_err(|_| ConfigError(format!("line {line}: invalid value for '{key}': '{value}' is not a number")))
}

fn parse_u64(key: &str, value: &str, line: usize) -> Result<u64, ConfigError> {
    value
        .parse::<u64>()
        .map_err(|_| ConfigError(format!("line {line}: invalid value for '{key}': '{value}' is not a nonnegative integer")))
}

fn parse_bool(key: &str, value: &str, line: usize) -> Result<bool, ConfigError> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => err(format!(
            "line {line}: invalid value for '{key}': expected true or false, got '{value}'"
        )),
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| ConfigError(format!("{}:{}", path.display(), e.0)))
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut config = RunConfig::default();
        let mut seen: Vec<String> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return err(format!("line {line}: expected 'key = value', got '{content}'"));
            };
            let key = key.trim();
            let value = value.trim();
            if seen.iter().any(|k| k == key) {
                return err(format!("line {line}: duplicate key '{key}'"));
            }
            seen.push(key.to_string());
            config.set(key, value, line)?;
        }
        Ok(config)
    }

    fn set(&mut self, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
        match key {
            "mu" => self.mu = Some(parse_f64(key, value, line)?),
            "eta_a" => self.eta_a = Some(parse_f64(key, value, line)?),
            "d_a" => self.d_a = Some(parse_f64(key, value, line)?),
            "alpha_db_per_km" => self.alpha_db_per_km = Some(parse_f64(key, value, line)?),
            "length_km" => self.length_km = Some(parse_f64(key, value, line)?),
            "eta_b" => self.eta_b = Some(parse_f64(key, value, line)?),
            "p_d" => self.p_d = Some(parse_f64(key, value, line)?),
            "e_d" => self.e_d = Some(parse_f64(key, value, line)?),
            "q" => self.q = Some(parse_f64(key, value, line)?),
            "f_ec" => self.f_ec = Some(parse_f64(key, value, line)?),
            "protocol" => {
                self.protocol = Some(match value {
                    "efficient_pdc" => Protocol::EfficientPdc,
                    "conventional_pdc" => Protocol::ConventionalPdc,
                    "ideal_single_photon" => Protocol::IdealSinglePhoton,
                    _ => {
                        return err(format!(
                            "line {line}: invalid value for 'protocol': '{value}' (expected \
                             efficient_pdc, conventional_pdc or ideal_single_photon)"
                        ))
                    }
                })
            }
            "distances_km" => {
                let mut distances = Vec::new();
                for part in value.split(',') {
                    let part = part.trim();
                    if part.is_empty() {
                        continue;
                    }
                    distances.push(parse_f64(key, part, line)?);
                }
                self.distances_km = Some(distances);
            }
            "optimize_mu" => self.optimize_mu = Some(parse_bool(key, value, line)?),
            "mu_lo" => self.mu_lo = Some(parse_f64(key, value, line)?),
            "mu_hi" => self.mu_hi = Some(parse_f64(key, value, line)?),
            "pulses" => self.pulses = Some(parse_u64(key, value, line)?),
            "seed" => self.seed = Some(parse_u64(key, value, line)?),
            "z_threshold" => self.z_threshold = Some(parse_f64(key, value, line)?),
            "block_fraction" => self.block_fraction = Some(parse_f64(key, value, line)?),
            "cutoff_lo_km" => self.cutoff_lo_km = Some(parse_f64(key, value, line)?),
            "cutoff_hi_km" => self.cutoff_hi_km = Some(parse_f64(key, value, line)?),
            "format" => {
                self.format = Some(match value {
                    "csv" => Format::Csv,
                    "json" => Format::Json,
                    _ => {
                        return err(format!(
                            "line {line}: invalid value for 'format': '{value}' (expected csv or json)"
                        ))
                    }
                })
            }
            "precision" => {
                let p = parse_u64(key, value, line)? as usize;
                if !(1..=17).contains(&p) {
                    return err(format!(
                        "line {line}: invalid value for 'precision': must be in 1..=17, got {p}"
                    ));
                }
                self.precision = Some(p);
            }
            "out" => self.out = Some(value.to_string()),
            _ => return err(format!("line {line}: unknown key '{key}'")),
        }
        Ok(())
    }

    // --- resolution with defaults -------------------------------------

    pub fn format(&self) -> Format {
        self.format.unwrap_or(Format::Csv)
    }

    pub fn precision(&self) -> usize {
        self.precision.unwrap_or(6)
    }

    pub fn protocol(&self) -> Protocol {
        self.protocol.unwrap_or(Protocol::EfficientPdc)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(1)
    }

    pub fn z_threshold(&self) -> f64 {
        self.z_threshold.unwrap_or(5.0)
    }

    pub fn block_fraction(&self) -> f64 {
        self.block_fraction.unwrap_or(1.0)
    }

    pub fn eta_a(&self) -> f64 {
        self.eta_a.unwrap_or(0.5)
    }

    pub fn d_a(&self) -> f64 {
        self.d_a.unwrap_or(1e-6)
    }

    pub fn require(&self, key: &str) -> Result<f64, ConfigError> {
        let value = match key {
            "mu" => self.mu,
            "length_km" => self.length_km,
            "cutoff_lo_km" => self.cutoff_lo_km,
            "cutoff_hi_km" => self.cutoff_hi_km,
            _ => None,
        };
        value.ok_or_else(|| ConfigError(format!("missing required key '{key}'")))
    }

    pub fn require_pulses(&self) -> Result<u64, ConfigError> {
        self.pulses
            .ok_or_else(|| ConfigError("missing required key 'pulses'".into()))
    }

    pub fn require_distances(&self) -> Result<Vec<f64>, ConfigError> {
        self.distances_km
            .clone()
            .ok_or_else(|| ConfigError("missing required key 'distances_km'".into()))
    }

    /// Source parameters; the ideal-trigger corner is only constructible
    /// for the conventional protocol.
    pub fn source_params(&self, mu: f64) -> Result<SourceParams, qkd_core::Error> {
        if self.eta_a() == 1.0 {
            if self.d_a() != 0.0 {
                return Err(qkd_core::Error::InvalidParameter {
                    name: "d_a",
                    reason: "must be 0 when eta_a = 1".into(),
                });
            }
            SourceParams::ideal_trigger(mu)
        } else {
            SourceParams::new(mu, self.eta_a(), self.d_a())
        }
    }

    pub fn channel(&self, length_km: f64) -> Result<ChannelParams, qkd_core::Error> {
        ChannelParams::new(
            self.alpha_db_per_km.unwrap_or(0.21),
            length_km,
            self.eta_b.unwrap_or(0.045),
            self.p_d.unwrap_or(8.5e-7),
            self.e_d.unwrap_or(0.033),
        )
    }

    pub fn constants(&self) -> ProtocolConstants {
        ProtocolConstants {
            sifting: self.q.unwrap_or(0.5),
            error_correction: ErrorCorrection::ConstantFactor(self.f_ec.unwrap_or(1.22)),
        }
    }

    pub fn mu_search(&self) -> MuSearch {
        MuSearch {
            lo: self.mu_lo.unwrap_or(1e-4),
            hi: self.mu_hi.unwrap_or(2.0),
            ..MuSearch::default()
        }
    }

    pub fn sweep_spec(&self) -> Result<SweepSpec, ConfigError> {
        let distances = self.require_distances()?;
        let optimize = self.optimize_mu.unwrap_or(true);
        let mu = if optimize || self.protocol() == Protocol::IdealSinglePhoton {
            MuPolicy::Optimize
        } else {
            MuPolicy::Fixed(self.require("mu")?)
        };
        let channel = self
            .channel(0.0)
            .map_err(|e| ConfigError(e.to_string()))?;
        Ok(SweepSpec {
            distances_km: distances,
            protocol: self.protocol(),
            mu,
            trigger_efficiency: self.eta_a(),
            trigger_dark_count: self.d_a(),
            channel,
            constants: self.constants(),
            mu_search: self.mu_search(),
            x_minimizer: MinimizerPolicy::default(),
            tail: TailPolicy::default(),
        })
    }

    /// Every key that affects the run, with its resolved value, for the
    /// report echo. Keys are sorted; values round-trip through the config
    /// parser.
    pub fn echo(&self, command: &str) -> BTreeMap<String, serde_json::Value> {
        use serde_json::{json, Value};
        let mut map: BTreeMap<String, Value> = BTreeMap::new();
        let num = |map: &mut BTreeMap<String, Value>, key: &str, v: f64| {
            map.insert(key.into(), json!(v));
        };

        num(&mut map, "eta_a", self.eta_a());
        num(&mut map, "d_a", self.d_a());
        num(&mut map, "alpha_db_per_km", self.alpha_db_per_km.unwrap_or(0.21));
        num(&mut map, "eta_b", self.eta_b.unwrap_or(0.045));
        num(&mut map, "p_d", self.p_d.unwrap_or(8.5e-7));
        num(&mut map, "e_d", self.e_d.unwrap_or(0.033));
        num(&mut map, "q", self.q.unwrap_or(0.5));
        num(&mut map, "f_ec", self.f_ec.unwrap_or(1.22));
        map.insert(
            "format".into(),
            json!(match self.format() {
                Format::Csv => "csv",
                Format::Json => "json",
            }),
        );
        map.insert("precision".into(), json!(self.precision()));

        match command {
            "rate" => {
                if let Some(mu) = self.mu {
                    num(&mut map, "mu", mu);
                }
                if let Some(l) = self.length_km {
                    num(&mut map, "length_km", l);
                }
            }
            "sweep" => {
                map.insert("protocol".into(), json!(self.protocol().name()));
                map.insert(
                    "distances_km".into(),
                    json!(self.distances_km.clone().unwrap_or_default()),
                );
                map.insert("optimize_mu".into(), json!(self.optimize_mu.unwrap_or(true)));
                if let Some(mu) = self.mu {
                    num(&mut map, "mu", mu);
                }
                num(&mut map, "mu_lo", self.mu_search().lo);
                num(&mut map, "mu_hi", self.mu_search().hi);
            }
            "montecarlo" | "attack" => {
                if let Some(mu) = self.mu {
                    num(&mut map, "mu", mu);
                }
                if let Some(l) = self.length_km {
                    num(&mut map, "length_km", l);
                }
                if let Some(p) = self.pulses {
                    map.insert("pulses".into(), json!(p));
                }
                map.insert("seed".into(), json!(self.seed()));
                num(&mut map, "z_threshold", self.z_threshold());
                if command == "attack" {
                    num(&mut map, "block_fraction", self.block_fraction());
                }
            }
            "cutoff" => {
                map.insert("protocol".into(), json!(self.protocol().name()));
                if let Some(lo) = self.cutoff_lo_km {
                    num(&mut map, "cutoff_lo_km", lo);
                }
                if let Some(hi) = self.cutoff_hi_km {
                    num(&mut map, "cutoff_hi_km", hi);
                }
                num(&mut map, "mu_lo", self.mu_search().lo);
                num(&mut map, "mu_hi", self.mu_search().hi);
                map.insert("optimize_mu".into(), json!(self.optimize_mu.unwrap_or(true)));
                if let Some(mu) = self.mu {
                    num(&mut map, "mu", mu);
                }
            }
            _ => {}
        }
        map
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_keys_and_comments() {
        let config = RunConfig::parse(
            "# channel\nmu = 0.19\nlength_km = 20 # trailing comment\ndistances_km = 0,10,20\n",
        )
        .unwrap();
        assert_eq!(config.mu, Some(0.19));
        assert_eq!(config.length_km, Some(20.0));
        assert_eq!(config.distances_km, Some(vec![0.0, 10.0, 20.0]));
    }

    #[test]
    fn rejects_unknown_key_with_line() {
        let e = RunConfig::parse("mu = 0.1\nbogus = 3\n").unwrap_err();
        assert!(e.0.contains("line 2"), "{e}");
        assert!(e.0.contains("bogus"), "{e}");
    }

    #[test]
    fn rejects_duplicates_and_bad_values() {
        let e = RunConfig::parse("mu = 0.1\nmu = 0.2\n").unwrap_err();
        assert!(e.0.contains("duplicate"), "{e}");
        let e = RunConfig::parse("mu = fast\n").unwrap_err();
        assert!(e.0.contains("not a number"), "{e}");
        let e = RunConfig::parse("protocol = quantum\n").unwrap_err();
        assert!(e.0.contains("protocol"), "{e}");
    }

    #[test]
    fn empty_distance_list() {
        let config = RunConfig::parse("distances_km =\n").unwrap();
        assert_eq!(config.distances_km, Some(vec![]));
    }

    #[test]
    fn missing_required_key_is_named() {
        let config = RunConfig::parse("").unwrap();
        let e = config.require("mu").unwrap_err();
        assert!(e.0.contains("'mu'"), "{e}");
    }
}
