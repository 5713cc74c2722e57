//! Flag and config-file merging. Config files use the same keys as the
//! long flags; a flag given on the command line wins over the file.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::CliError;

pub const OUTPUT_FORMAT_VERSION: u32 = 1;

/// Prints to stdout, ignoring a closed pipe.
pub fn emit(text: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn flags_object(flags: &impl Serialize) -> Result<Map<String, Value>, CliError> {
    match serde_json::to_value(flags).map_err(|e| CliError::Usage(e.to_string()))? {
        Value::Object(map) => Ok(map.into_iter().filter(|(k, v)| !v.is_null() && k != "config").collect()),
        _ => Err(CliError::Usage("flags did not serialize to an object".into())),
    }
}

fn file_object(path: &Path) -> Result<Map<String, Value>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(CliError::Usage(format!("config {} must hold a JSON object", path.display()))),
        Err(e) => Err(CliError::Usage(format!("config {}: {e}", path.display()))),
    }
}

/// Overlays the given flags on the optional config file and fills defaults.
/// Returns the typed configuration and its JSON echo.
pub fn resolve<T: DeserializeOwned + Serialize>(flags: &impl Serialize, config: Option<&Path>) -> Result<(T, Value), CliError> {
    let mut merged = match config {
        Some(p) => file_object(p)?,
        None => Map::new(),
    };
    merged.extend(flags_object(flags)?);
    let typed: T = serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::Usage(e.to_string()))?;
    let echo = serde_json::to_value(&typed).map_err(|e| CliError::Usage(e.to_string()))?;
    Ok((typed, echo))
}
