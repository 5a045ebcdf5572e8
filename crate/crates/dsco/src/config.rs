//! JSON problem files.

use std::path::Path;

use dsco_core::config::ProblemConfig;

use crate::{Error, Result};

/// Parses and validates a JSON problem description. Defaults are filled
/// in for every optional key; errors name the offending key.
pub fn parse_config(text: &str) -> Result<ProblemConfig> {
    let mut de = serde_json::Deserializer::from_str(text);
    let config: ProblemConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let message = inner.to_string();
        let key = if path == "." {
            backticked(&message).unwrap_or_else(|| path.clone())
        } else {
            path
        };
        dsco_core::Error::Config { key, reason: message }
    })?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<ProblemConfig> {
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    parse_config(&text)
}

/// Pretty JSON with every default written out.
pub fn to_json(config: &ProblemConfig) -> String {
    serde_json::to_string_pretty(config).expect("configs always serialise")
}

// serde reports a missing top-level field as "missing field `name`".
fn backticked(message: &str) -> Option<String> {
    let start = message.find('`')? + 1;
    let len = message[start..].find('`')?;
    Some(message[start..start + len].to_string())
}
