//! Shared helpers for the CLI integration tests: invoking the binary and a
//! small structural validator for the JSON schemas shipped under docs/schemas.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn ean_binary() -> &'static str {
    env!("CARGO_BIN_EXE_ean")
}

pub fn run_ean(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(ean_binary());
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("spawn ean")
}

pub fn write_config(dir: &Path, name: &str, body: serde_json::Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(&body).unwrap()).unwrap();
    path
}

/// A supernet geometry small enough for fast integration tests.
pub fn tiny_config() -> serde_json::Value {
    serde_json::json!({
        "stage_sizes": [2, 2],
        "stage_widths": [6, 8],
        "block_hidden": 4,
        "attention_bottleneck": 3,
        "class_count": 3,
        "train_size": 48,
        "val_size": 24,
        "test_size": 24,
        "pretrain_steps": 15,
        "batch_size": 8,
        "scratch_steps": 10,
        "search_steps": 20,
        "ppo_start": 5,
        "bench_batch": 8,
        "bench_reps": 10
    })
}

pub fn schema_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/schemas")
}

pub fn load_schema(name: &str) -> serde_json::Value {
    let path = schema_dir().join(name);
    serde_json::from_str(&std::fs::read_to_string(&path).unwrap_or_else(|e| {
        panic!("read schema {}: {e}", path.display());
    }))
    .expect("schema parses")
}

/// Validate `value` against the subset of JSON Schema our schemas use:
/// `type` (including type arrays), `required`, `properties`, `items`,
/// `enum`, `minimum`, `maximum`, and `pattern`.
pub fn validate(schema: &serde_json::Value, value: &serde_json::Value, path: &str) -> Result<(), String> {
    use serde_json::Value;

    if let Some(type_spec) = schema.get("type") {
        let allowed: Vec<&str> = match type_spec {
            Value::String(s) => vec![s.as_str()],
            Value::Array(a) => a.iter().filter_map(Value::as_str).collect(),
            _ => return Err(format!("{path}: malformed type spec")),
        };
        let actual = match value {
            Value::Null => "null",
            Value::Bool(_) => "boolean",
            Value::Number(n) => {
                if n.is_i64() || n.is_u64() {
                    "integer"
                } else {
                    "number"
                }
            }
            Value::String(_) => "string",
            Value::Array(_) => "array",
            Value::Object(_) => "object",
        };
        let matches = allowed.iter().any(|t| {
            *t == actual || (*t == "number" && actual == "integer")
        });
        if !matches {
            return Err(format!("{path}: expected type {allowed:?}, got {actual}"));
        }
    }
    if value.is_null() {
        // Permitted by the type check above; nothing further applies.
        return Ok(());
    }
    if let Some(required) = schema.get("required").and_then(|r| r.as_array()) {
        let object = value
            .as_object()
            .ok_or_else(|| format!("{path}: required applies to objects"))?;
        for key in required.iter().filter_map(|k| k.as_str()) {
            if !object.contains_key(key) {
                return Err(format!("{path}: missing required property {key:?}"));
            }
        }
    }
    if let Some(properties) = schema.get("properties").and_then(|p| p.as_object()) {
        if let Some(object) = value.as_object() {
            for (key, subschema) in properties {
                if let Some(subvalue) = object.get(key) {
                    validate(subschema, subvalue, &format!("{path}.{key}"))?;
                }
            }
        }
    }
    if let Some(items) = schema.get("items") {
        if let Some(array) = value.as_array() {
            for (i, item) in array.iter().enumerate() {
                validate(items, item, &format!("{path}[{i}]"))?;
            }
        }
    }
    if let Some(options) = schema.get("enum").and_then(|e| e.as_array()) {
        if !options.contains(value) {
            return Err(format!("{path}: {value} not in enum {options:?}"));
        }
    }
    if let Some(minimum) = schema.get("minimum").and_then(|m| m.as_f64()) {
        let number = value
            .as_f64()
            .ok_or_else(|| format!("{path}: minimum applies to numbers"))?;
        if number < minimum {
            return Err(format!("{path}: {number} below minimum {minimum}"));
        }
    }
    if let Some(maximum) = schema.get("maximum").and_then(|m| m.as_f64()) {
        let number = value
            .as_f64()
            .ok_or_else(|| format!("{path}: maximum applies to numbers"))?;
        if number > maximum {
            return Err(format!("{path}: {number} above maximum {maximum}"));
        }
    }
    if let Some(pattern) = schema.get("pattern").and_then(|p| p.as_str()) {
        let text = value
            .as_str()
            .ok_or_else(|| format!("{path}: pattern applies to strings"))?;
        if !matches_scheme_pattern(pattern, text) {
            return Err(format!("{path}: {text:?} does not match {pattern:?}"));
        }
    }
    Ok(())
}

/// The only pattern our schemas use is the scheme-string alphabet
/// `^[01]+(/[01]+)*$`; check it directly rather than pulling in a regex
/// engine for one expression.
fn matches_scheme_pattern(pattern: &str, text: &str) -> bool {
    assert_eq!(
        pattern, "^[01]+(/[01]+)*$",
        "unexpected schema pattern; extend the validator"
    );
    !text.is_empty()
        && text.split('/').all(|stage| {
            !stage.is_empty() && stage.chars().all(|c| c == '0' || c == '1')
        })
}

pub fn assert_valid(schema_name: &str, value: &serde_json::Value) {
    let schema = load_schema(schema_name);
    if let Err(e) = validate(&schema, value, "$") {
        panic!("{schema_name}: {e}\nvalue: {value}");
    }
}
