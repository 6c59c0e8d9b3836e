//! Canonical persistence: one self-describing JSON document per record,
//! wrapped with a `schema` version field.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Document<T> {
    schema: u32,
    #[serde(flatten)]
    body: T,
}

pub fn to_document_string<T: Serialize>(value: &T) -> Result<String> {
    let doc = Document { schema: SCHEMA_VERSION, body: value };
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    Ok(text)
}

pub fn from_document_str<T: DeserializeOwned>(text: &str) -> Result<T> {
    let doc: Document<T> = serde_json::from_str(text)?;
    if doc.schema != SCHEMA_VERSION {
        return Err(Error::Serde(format!(
            "unsupported schema version {} (expected {SCHEMA_VERSION})",
            doc.schema
        )));
    }
    Ok(doc.body)
}

pub fn save<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, to_document_string(value)?)?;
    Ok(())
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    from_document_str(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::{Deserialize, Serialize};

    #[derive(Serialize, Deserialize, PartialEq, Debug)]
    struct Sample {
        name: String,
        n: u32,
    }

    #[test]
    fn round_trip_carries_schema_field() {
        let s = Sample { name: "x".into(), n: 7 };
        let text = to_document_string(&s).unwrap();
        assert!(text.contains("\"schema\": 1"));
        assert_eq!(from_document_str::<Sample>(&text).unwrap(), s);
    }

    #[test]
    fn wrong_schema_version_rejected() {
        let text = r#"{"schema": 2, "name": "x", "n": 7}"#;
        assert!(from_document_str::<Sample>(text).is_err());
    }
}
