//! Report and table emission: CSV with fixed headers and scientific
//! notation, JSON mirroring the same fields.

use qkd_core::{KeyRateResult, RateSummary, Strategy, SweepRow};
use serde_json::{json, Map, Value};

/// Scientific notation with `sig` significant digits, locale-independent.
/// Non-finite values become `nan`/`inf` so CSV consumers see a stable
/// token.
pub fn sci(value: f64, sig: usize) -> String {
    if value.is_nan() {
        return "nan".into();
    }
    if value.is_infinite() {
        return if value > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{:.*e}", sig.saturating_sub(1), value)
}

/// JSON value for a float; NaN and infinities map to null.
pub fn num(value: f64) -> Value {
    if value.is_finite() {
        json!(value)
    } else {
        Value::Null
    }
}

pub const SWEEP_HEADER: &str = "l_km,mu,Q_t,E_t,Q_nt,E_nt,r,R_t,R_both,R_final,x_star";

pub fn sweep_csv(rows: &[SweepRow], sig: usize) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for row in rows {
        let fields = [
            row.length_km,
            row.mu,
            row.gain_triggered,
            row.qber_triggered,
            row.gain_nontriggered,
            row.qber_nontriggered,
            row.trigger_ratio,
            row.rate_triggered,
            row.rate_both,
            row.rate_final,
            row.x_star,
        ];
        let line: Vec<String> = fields.iter().map(|&v| sci(v, sig)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn sweep_row_json(row: &SweepRow) -> Value {
    json!({
        "l_km": num(row.length_km),
        "mu": num(row.mu),
        "Q_t": num(row.gain_triggered),
        "E_t": num(row.qber_triggered),
        "Q_nt": num(row.gain_nontriggered),
        "E_nt": num(row.qber_nontriggered),
        "r": num(row.trigger_ratio),
        "R_t": num(row.rate_triggered),
        "R_both": num(row.rate_both),
        "R_final": num(row.rate_final),
        "x_star": num(row.x_star),
        "failed": row.failed,
    })
}

pub fn summary_json(summary: &RateSummary) -> Value {
    json!({
        "Q_t": num(summary.gain_triggered),
        "E_t": num(summary.qber_triggered),
        "Q_nt": num(summary.gain_nontriggered),
        "E_nt": num(summary.qber_nontriggered),
        "r": num(summary.trigger_ratio),
    })
}

pub fn strategy_name(strategy: Strategy) -> &'static str {
    match strategy {
        Strategy::Triggered => "triggered",
        Strategy::Both => "both",
        Strategy::Abort => "abort",
    }
}

pub fn key_rates_json(result: &KeyRateResult) -> Value {
    let point = |p: &qkd_core::RatePoint| {
        json!({
            "rate": num(p.rate),
            "x_star": num(p.x_star),
            "xi_at_min": num(p.xi_at_min),
            "eps_at_min": p.eps_at_min.map(num).unwrap_or(Value::Null),
            "ec_cost": num(p.ec_cost),
            "vacuum_gain": num(p.vacuum_gain),
            "single_photon_gain": num(p.single_photon_gain),
        })
    };
    json!({
        "R_t": num(result.triggered.rate),
        "R_both": num(result.both.rate),
        "R_final": num(result.final_rate),
        "strategy": strategy_name(result.selected()),
        "triggered": point(&result.triggered),
        "both": point(&result.both),
    })
}

/// `key,value` CSV lines from a flat list.
pub fn kv_csv(pairs: &[(String, String)]) -> String {
    let mut out = String::from("key,value\n");
    for (k, v) in pairs {
        out.push_str(k);
        out.push(',');
        out.push_str(v);
        out.push('\n');
    }
    out
}

pub fn report_json(
    command: &str,
    config: std::collections::BTreeMap<String, Value>,
    results: Value,
) -> Value {
    let mut config_map = Map::new();
    for (k, v) in config {
        config_map.insert(k, v);
    }
    json!({
        "command": command,
        "config": Value::Object(config_map),
        "results": results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scientific_formatting() {
        assert_eq!(sci(1.886715622822876e-3, 6), "1.88672e-3");
        assert_eq!(sci(0.19, 3), "1.90e-1");
        assert_eq!(sci(f64::NAN, 6), "nan");
        assert_eq!(sci(0.0, 4), "0.000e0");
    }

    #[test]
    fn nonfinite_json_is_null() {
        assert_eq!(num(f64::NAN), Value::Null);
        assert!(num(1.5).is_number());
    }
}
