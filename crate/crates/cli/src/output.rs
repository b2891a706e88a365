//! CSV and JSON emitters for tables and estimates.
//!
//! The table CSV has the fixed header
//! `r,F_size,R_depth,delta,eps,N_raw,log_N,normalized,packing_kind`; all
//! numeric fields use shortest round-trip formatting, so files are
//! byte-identical across runs of the same configuration.

use std::fmt::Write as _;

use microstate_entropy::entropy::{EntropyEstimate, EntropyTable};
use microstate_entropy::rat::to_f64;
use serde_json::{json, Value};

pub const TABLE_HEADER: &str = "r,F_size,R_depth,delta,eps,N_raw,log_N,normalized,packing_kind";

fn fmt_f64(v: f64) -> String {
    if v == f64::NEG_INFINITY {
        "-inf".to_string()
    } else if v == f64::INFINITY {
        "inf".to_string()
    } else {
        format!("{v}")
    }
}

pub fn table_csv(table: &EntropyTable) -> String {
    let mut out = String::from(TABLE_HEADER);
    out.push('\n');
    for row in &table.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            row.r,
            row.f_size,
            row.r_depth,
            fmt_f64(to_f64(row.delta)),
            fmt_f64(to_f64(row.eps)),
            row.n_raw,
            fmt_f64(row.log_n),
            fmt_f64(row.normalized),
            row.kind.as_str()
        );
    }
    out
}

/// Per-scale series of normalized value against the model index, and
/// per-index series against the scale. Row counts equal the table's.
pub fn plot_series(table: &EntropyTable) -> (String, String) {
    let mut keyed: Vec<(&microstate_entropy::entropy::TableRow, f64, f64)> = table
        .rows
        .iter()
        .map(|row| (row, to_f64(row.eps), to_f64(row.delta)))
        .collect();

    let mut vs_r = String::from("eps,delta,F_size,R_depth,r,normalized\n");
    keyed.sort_by(|a, b| {
        (a.1, a.2, a.0.f_size, a.0.r_depth, a.0.r)
            .partial_cmp(&(b.1, b.2, b.0.f_size, b.0.r_depth, b.0.r))
            .expect("finite keys")
    });
    for (row, eps, delta) in &keyed {
        let _ = writeln!(
            vs_r,
            "{},{},{},{},{},{}",
            fmt_f64(*eps),
            fmt_f64(*delta),
            row.f_size,
            row.r_depth,
            row.r,
            fmt_f64(row.normalized)
        );
    }

    let mut vs_eps = String::from("r,delta,F_size,R_depth,eps,normalized\n");
    keyed.sort_by(|a, b| {
        (a.0.r, a.2, a.0.f_size, a.0.r_depth, a.1)
            .partial_cmp(&(b.0.r, b.2, b.0.f_size, b.0.r_depth, b.1))
            .expect("finite keys")
    });
    for (row, eps, delta) in &keyed {
        let _ = writeln!(
            vs_eps,
            "{},{},{},{},{},{}",
            row.r,
            fmt_f64(*delta),
            row.f_size,
            row.r_depth,
            fmt_f64(*eps),
            fmt_f64(row.normalized)
        );
    }
    (vs_r, vs_eps)
}

fn json_extended(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else if v == f64::NEG_INFINITY {
        json!("-inf")
    } else {
        json!("inf")
    }
}

/// The estimate document: value, sequence, statistic, schedule hash,
/// reference and deviation (null when absent), plus the tail oscillation.
pub fn estimate_json(
    estimate: &EntropyEstimate,
    schedule_hash: &str,
    reference: Option<f64>,
    deviation: Option<f64>,
) -> Value {
    json!({
        "value": json_extended(estimate.value),
        "sequence": estimate.sequence.iter().map(|&v| json_extended(v)).collect::<Vec<_>>(),
        "statistic": estimate.statistic.as_str(),
        "schedule_hash": schedule_hash,
        "reference": reference.map(json_extended).unwrap_or(Value::Null),
        "deviation": deviation.map(json_extended).unwrap_or(Value::Null),
        "oscillation": estimate.oscillation.map(json_extended).unwrap_or(Value::Null),
        "partial": estimate.partial,
    })
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

pub fn config_hash(canonical: &str) -> String {
    format!("{:016x}", fnv1a64(canonical.as_bytes()))
}
