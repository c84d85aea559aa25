//! Flat key-value config files.
//!
//! Grammar, one entry per line:
//!
//! ```text
//! # comment
//! key = value        # keys match [A-Za-z0-9_-]+, value runs to end of line
//! ```
//!
//! Values are kept as raw strings; the CLI layer interprets them with the
//! same parsers as the corresponding flags, and flags always win over the
//! file.

use anyhow::{bail, Result};
use std::collections::HashMap;

pub fn parse_kv(text: &str) -> Result<HashMap<String, String>> {
    let mut map = HashMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("config line {}: expected `key = value`, got {:?}", lineno + 1, raw);
        };
        let key = key.trim();
        if key.is_empty()
            || !key
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        {
            bail!("config line {}: bad key {:?}", lineno + 1, key);
        }
        map.insert(key.to_string(), value.trim().to_string());
    }
    Ok(map)
}
