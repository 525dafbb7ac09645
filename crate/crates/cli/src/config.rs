//! `--config <file.json>` support. Keys mirror long flag names; each entry is
//! spliced into the argument list unless the same flag was given explicitly.

use std::ffi::OsString;
use std::fs;

use anyhow::{Context, Result};
use serde_json::Value;

use crate::UsageError;

fn flag_name(arg: &OsString) -> Option<String> {
    let s = arg.to_str()?;
    let name = s.strip_prefix("--")?;
    Some(name.split_once('=').map_or(name, |(n, _)| n).to_string())
}

fn scalar(key: &str, value: &Value) -> Result<String> {
    match value {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        other => Err(UsageError(format!("config key `{key}` has unsupported value {other}")).into()),
    }
}

/// Returns the argument list with config-file entries merged in.
pub fn expand(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut config_path = None;
    let mut rest = Vec::with_capacity(args.len());
    let mut iter = args.into_iter();
    while let Some(arg) = iter.next() {
        match arg.to_str() {
            Some("--config") => {
                let path = iter
                    .next()
                    .ok_or_else(|| UsageError("--config needs a file argument".into()))?;
                config_path = Some(path);
            }
            Some(s) if s.starts_with("--config=") => config_path = Some(OsString::from(&s["--config=".len()..])),
            _ => rest.push(arg),
        }
    }
    let Some(path) = config_path else {
        return Ok(rest);
    };
    if rest.len() < 2 {
        return Err(UsageError("--config must follow a subcommand".into()).into());
    }
    let text = fs::read_to_string(&path).with_context(|| format!("reading config {}", path.to_string_lossy()))?;
    let doc: Value = serde_json::from_str(&text)
        .map_err(|e| UsageError(format!("config {} is not valid JSON: {e}", path.to_string_lossy())))?;
    let Value::Object(entries) = doc else {
        return Err(UsageError("config file must hold a JSON object".into()).into());
    };

    let explicit: Vec<String> = rest[2..].iter().filter_map(flag_name).collect();
    let mut injected = Vec::new();
    for (key, value) in &entries {
        if key == "config" {
            return Err(UsageError("config files cannot nest `config`".into()).into());
        }
        if explicit.iter().any(|f| f == key) {
            continue;
        }
        let flag = OsString::from(format!("--{key}"));
        match value {
            Value::Bool(true) => injected.push(flag),
            Value::Bool(false) | Value::Null => {}
            Value::Array(items) => {
                for item in items {
                    injected.push(flag.clone());
                    injected.push(scalar(key, item)?.into());
                }
            }
            other => {
                injected.push(flag);
                injected.push(scalar(key, other)?.into());
            }
        }
    }
    let mut out = rest[..2].to_vec();
    out.extend(injected);
    out.extend(rest.into_iter().skip(2));
    Ok(out)
}
