use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use lcmil::{Error, Result};

/// Recursively overlays `patch` onto `base`; objects merge key by key,
/// anything else in `patch` replaces the base value.
pub fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, p) => *slot = p,
    }
}

/// Values built from flags, overridden by the JSON file at `path` if given.
pub fn with_overrides<T: Serialize + DeserializeOwned>(
    from_flags: T,
    path: Option<&Path>,
) -> Result<T> {
    let Some(path) = path else {
        return Ok(from_flags);
    };
    let text = fs::read_to_string(path)?;
    let patch: Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
        source_name: path.display().to_string(),
        message: e.to_string(),
    })?;
    if !patch.is_object() {
        return Err(Error::Parse {
            source_name: path.display().to_string(),
            message: "config must be a JSON object".into(),
        });
    }
    let mut base = serde_json::to_value(from_flags)?;
    merge(&mut base, patch);
    serde_json::from_value(base).map_err(|e| Error::Parse {
        source_name: path.display().to_string(),
        message: e.to_string(),
    })
}
