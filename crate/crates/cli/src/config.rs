use std::ffi::OsString;
use std::path::Path;

use serde_json::Value;

use crate::{usage, CliError, CliResult};

/// Inserts the flags of a JSON config file right after the subcommand
/// name, ahead of the flags given on the command line.
///
/// Keys are flag names with `-` or `_` separators. Arrays become
/// comma-separated lists, booleans become `--flag=true|false`, `null` is
/// ignored. Unknown keys are rejected by the argument parser.
pub(crate) fn expand(path: &Path, argv: &[OsString]) -> CliResult<Vec<OsString>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| usage(format!("{}: invalid JSON: {e}", path.display())))?;
    let Value::Object(map) = value else {
        return Err(usage(format!("{}: config must be a JSON object", path.display())));
    };
    let mut flags = Vec::new();
    for (key, value) in &map {
        let flag = format!("--{}", key.replace('_', "-"));
        if flag == "--config" {
            continue;
        }
        let scalar = |v: &Value| -> CliResult<String> {
            match v {
                Value::String(s) => Ok(s.clone()),
                Value::Number(n) => Ok(n.to_string()),
                Value::Bool(b) => Ok(b.to_string()),
                _ => Err(usage(format!("config key '{key}': unsupported value {v}"))),
            }
        };
        match value {
            Value::Null => {}
            Value::Bool(b) => flags.push(OsString::from(format!("{flag}={b}"))),
            Value::Array(items) => {
                let parts = items.iter().map(scalar).collect::<CliResult<Vec<_>>>()?;
                flags.push(OsString::from(flag));
                flags.push(OsString::from(parts.join(",")));
            }
            other => {
                flags.push(OsString::from(flag));
                flags.push(OsString::from(scalar(other)?));
            }
        }
    }
    let sub = subcommand_position(argv)
        .ok_or_else(|| usage("a subcommand is required"))?;
    let mut out: Vec<OsString> = argv[..=sub].to_vec();
    out.extend(flags);
    out.extend_from_slice(&argv[sub + 1..]);
    Ok(out)
}

// Global flags may precede the subcommand; both take one value.
fn subcommand_position(argv: &[OsString]) -> Option<usize> {
    let mut i = 1;
    while i < argv.len() {
        let arg = argv[i].to_string_lossy();
        if arg == "--threads" || arg == "--config" {
            i += 2;
        } else if arg.starts_with("--") {
            i += 1;
        } else {
            return Some(i);
        }
    }
    None
}
