//! Metrics files.
//!
//! * `rounds.jsonl`: one [`RoundReport`] per line.
//! * `reputations.csv`: `round,c0,..,c{N-1}`, reputations after each round.
//! * `bytes.csv`: `round,client,model_down,masked_up,kem_pk,kem_ct,shares`
//!   for every participant.
//! * `summary.json`: the [`ExperimentResult`] header without the rounds.
//! * `latency.csv`: `round,seconds`, wall-clock and not reproducible.
//!
//! JSON keys are sorted and every float is written with 9 significant digits.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use super::run::{ExperimentResult, RoundReport};
use super::SimError;

/// Round `x` to 9 significant digits.
pub fn round_sig9(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.8e}").parse().expect("formatted float parses")
}

fn round_floats(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig9(n.as_f64().expect("f64"));
            serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(round_floats).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, round_floats(v))).collect()),
        other => other,
    }
}

/// Canonical JSON text for `value`: sorted keys, 9-digit floats.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String, SimError> {
    let v = serde_json::to_value(value).map_err(|e| SimError::Serialize(e.to_string()))?;
    serde_json::to_string(&round_floats(v)).map_err(|e| SimError::Serialize(e.to_string()))
}

fn csv_float(x: f64) -> String {
    let r = round_sig9(x);
    format!("{r}")
}

pub fn rounds_jsonl(rounds: &[RoundReport]) -> Result<String, SimError> {
    let mut out = String::new();
    for r in rounds {
        out.push_str(&canonical_json(r)?);
        out.push('\n');
    }
    Ok(out)
}

/// Write the metrics files of `result` into `dir`, creating it if needed.
pub fn emit_metrics(result: &ExperimentResult, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>, SimError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: &str, body: String| -> Result<(), SimError> {
        let path = dir.join(name);
        let mut f = fs::File::create(&path)?;
        f.write_all(body.as_bytes())?;
        written.push(path);
        Ok(())
    };

    put("rounds.jsonl", rounds_jsonl(&result.rounds)?)?;

    let n = result.config.federation.clients;
    let mut reps = String::from("round");
    for c in 0..n {
        reps.push_str(&format!(",c{c}"));
    }
    reps.push('\n');
    for r in &result.rounds {
        reps.push_str(&r.round.to_string());
        for c in &r.clients {
            reps.push(',');
            reps.push_str(&csv_float(c.reputation));
        }
        reps.push('\n');
    }
    put("reputations.csv", reps)?;

    let mut bytes = String::from("round,client,model_down,masked_up,kem_pk,kem_ct,shares\n");
    for r in &result.rounds {
        for c in r.clients.iter().filter(|c| c.participated) {
            let b = &c.bytes;
            bytes.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.round, c.id, b.model_down, b.masked_up, b.kem_pk, b.kem_ct, b.shares
            ));
        }
    }
    put("bytes.csv", bytes)?;

    let mut header = serde_json::to_value(result).map_err(|e| SimError::Serialize(e.to_string()))?;
    if let Value::Object(map) = &mut header {
        map.remove("rounds");
        map.insert("rounds_run".into(), Value::from(result.rounds.len()));
        map.insert("dp_composition".into(), Value::from("not tracked"));
    }
    put("summary.json", canonical_json(&header)? + "\n")?;

    let mut latency = String::from("round,seconds\n");
    for r in &result.rounds {
        latency.push_str(&format!("{},{:.6}\n", r.round, r.latency.as_secs_f64()));
    }
    put("latency.csv", latency)?;
    Ok(written)
}
