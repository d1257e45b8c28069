//! JSON trial-configuration loading.
//!
//! Decoding happens in three passes: serde_json parses the text (malformed
//! JSON then reports line and column), a schema walk checks every object for
//! missing, unknown, or mistyped keys so errors can name the full field path,
//! and only then is the value decoded into a `DesignConfig` and semantically
//! validated.

use std::path::Path;

use adaptrand_core::DesignConfig;
use serde_json::{Map, Value};

use crate::error::{CliError, Result};

fn invalid(msg: String) -> CliError {
    CliError::Validation(msg)
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn as_object<'v>(value: &'v Value, path: &str) -> Result<&'v Map<String, Value>> {
    value.as_object().ok_or_else(|| {
        let shown = if path.is_empty() { "config root" } else { path };
        invalid(format!("{shown}: expected an object"))
    })
}

/// Every required key present, every present key either required or optional.
fn check_keys(
    obj: &Map<String, Value>,
    path: &str,
    required: &[&str],
    optional: &[&str],
) -> Result<()> {
    for key in required {
        if !obj.contains_key(*key) {
            return Err(invalid(format!("{}: missing", join(path, key))));
        }
    }
    for key in obj.keys() {
        if !required.contains(&key.as_str()) && !optional.contains(&key.as_str()) {
            let shown = if path.is_empty() { "config root" } else { path };
            return Err(invalid(format!("{shown}: unknown key {key:?}")));
        }
    }
    Ok(())
}

fn check_number(obj: &Map<String, Value>, path: &str, key: &str) -> Result<()> {
    match obj[key] {
        Value::Number(_) => Ok(()),
        _ => Err(invalid(format!("{}: expected a number", join(path, key)))),
    }
}

fn check_integer(obj: &Map<String, Value>, path: &str, key: &str) -> Result<()> {
    if obj[key].as_u64().is_some() {
        Ok(())
    } else {
        Err(invalid(format!(
            "{}: expected a non-negative integer",
            join(path, key)
        )))
    }
}

fn check_number_array(obj: &Map<String, Value>, path: &str, key: &str) -> Result<()> {
    let full = join(path, key);
    let items = obj[key]
        .as_array()
        .ok_or_else(|| invalid(format!("{full}: expected an array of numbers")))?;
    for (i, item) in items.iter().enumerate() {
        if !matches!(item, Value::Number(_)) {
            return Err(invalid(format!("{full}[{i}]: expected a number")));
        }
    }
    Ok(())
}

fn check_integer_array(obj: &Map<String, Value>, path: &str, key: &str) -> Result<()> {
    let full = join(path, key);
    let items = obj[key]
        .as_array()
        .ok_or_else(|| invalid(format!("{full}: expected an array of integers")))?;
    for (i, item) in items.iter().enumerate() {
        if item.as_u64().is_none() {
            return Err(invalid(format!(
                "{full}[{i}]: expected a non-negative integer"
            )));
        }
    }
    Ok(())
}

fn check_choice<'o>(
    obj: &'o Map<String, Value>,
    path: &str,
    key: &str,
    allowed: &[&str],
) -> Result<&'o str> {
    let full = join(path, key);
    let text = obj[key]
        .as_str()
        .ok_or_else(|| invalid(format!("{full}: expected a string")))?;
    if allowed.contains(&text) {
        Ok(text)
    } else {
        Err(invalid(format!(
            "{full}: unknown value {text:?} (expected one of {allowed:?})"
        )))
    }
}

fn check_endpoint(value: &Value) -> Result<()> {
    let obj = as_object(value, "endpoint")?;
    if !obj.contains_key("type") {
        return Err(invalid("endpoint.type: missing".to_string()));
    }
    match check_choice(obj, "endpoint", "type", &["normal", "binary"])? {
        "normal" => {
            check_keys(obj, "endpoint", &["type", "means", "sigma"], &[])?;
            check_number_array(obj, "endpoint", "means")?;
            check_number(obj, "endpoint", "sigma")
        }
        _ => {
            check_keys(obj, "endpoint", &["type", "rates"], &[])?;
            check_number_array(obj, "endpoint", "rates")
        }
    }
}

fn check_randomization(value: &Value) -> Result<()> {
    let obj = as_object(value, "randomization")?;
    if !obj.contains_key("type") {
        return Err(invalid("randomization.type: missing".to_string()));
    }
    match check_choice(obj, "randomization", "type", &["fixed", "rabr", "dbcd"])? {
        "fixed" => {
            check_keys(obj, "randomization", &["type", "probs"], &[])?;
            check_number_array(obj, "randomization", "probs")
        }
        "rabr" => {
            check_keys(obj, "randomization", &["type", "block"], &["mode"])?;
            check_integer_array(obj, "randomization", "block")?;
            if obj.contains_key("mode") {
                check_choice(
                    obj,
                    "randomization",
                    "mode",
                    &["per-subject", "permuted-block"],
                )?;
            }
            Ok(())
        }
        _ => {
            check_keys(obj, "randomization", &["type", "eta", "target"], &[])?;
            check_number(obj, "randomization", "eta")?;
            let target = as_object(&obj["target"], "randomization.target")?;
            if !target.contains_key("type") {
                return Err(invalid("randomization.target.type: missing".to_string()));
            }
            match check_choice(
                target,
                "randomization.target",
                "type",
                &["phi-power", "neyman"],
            )? {
                "phi-power" => {
                    check_keys(target, "randomization.target", &["type", "lambda"], &[])?;
                    check_number(target, "randomization.target", "lambda")
                }
                _ => check_keys(target, "randomization.target", &["type"], &[]),
            }
        }
    }
}

fn check_analysis(value: &Value) -> Result<()> {
    let obj = as_object(value, "analysis")?;
    check_keys(obj, "analysis", &["alpha", "test", "multiplicity"], &[])?;
    check_number(obj, "analysis", "alpha")?;
    check_choice(obj, "analysis", "test", &["z-known-variance", "proportion"])?;
    check_choice(
        obj,
        "analysis",
        "multiplicity",
        &[
            "none",
            "bonferroni",
            "dunnett-single-step",
            "dunnett-step-down",
        ],
    )?;
    Ok(())
}

fn check_schema(value: &Value) -> Result<()> {
    let obj = as_object(value, "")?;
    check_keys(
        obj,
        "",
        &[
            "arms",
            "endpoint",
            "randomization",
            "burn_in",
            "total_n",
            "analysis",
        ],
        &[],
    )?;
    check_integer(obj, "", "arms")?;
    check_integer(obj, "", "burn_in")?;
    check_integer(obj, "", "total_n")?;
    check_endpoint(&obj["endpoint"])?;
    check_randomization(&obj["randomization"])?;
    check_analysis(&obj["analysis"])
}

/// Parse and validate a configuration from JSON text.
pub fn parse_config_str(text: &str) -> Result<DesignConfig> {
    let mut value: Value = serde_json::from_str(text)
        .map_err(|e| invalid(format!("config is not valid JSON: {e}")))?;
    check_schema(&value)?;
    // The mode key may be omitted for the adaptive block engine; the
    // per-subject cadence is the default.
    if let Some(rand) = value.get_mut("randomization").and_then(Value::as_object_mut) {
        if rand.get("type").and_then(Value::as_str) == Some("rabr") && !rand.contains_key("mode") {
            rand.insert("mode".to_string(), Value::String("per-subject".to_string()));
        }
    }
    let cfg: DesignConfig =
        serde_json::from_value(value).map_err(|e| invalid(format!("config: {e}")))?;
    cfg.validate().map_err(|e| invalid(e.to_string()))
}

/// Parse and validate a configuration file.
pub fn parse_config(path: &Path) -> Result<DesignConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text)
}
