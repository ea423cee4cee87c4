//! Embedding sidecar files: JSON lines of `{"id": ..., "vector": [...]}`.
//!
//! External exporters (real image encoders) write this format; the toy
//! encoders here write it too so both paths share one ingestion route.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub id: String,
    pub vector: Vec<f64>,
}

/// Reads a sidecar, checking that ids are unique, vectors share one
/// dimension and every entry is finite. Unknown extra fields are ignored.
pub fn read_sidecar<R: BufRead>(reader: R) -> Result<Vec<EmbeddingRecord>> {
    let mut out: Vec<EmbeddingRecord> = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: EmbeddingRecord =
            serde_json::from_str(&line).map_err(|e| Error::Format(format!("line {}: {e}", i + 1)))?;
        if let Some(first) = out.first() {
            if rec.vector.len() != first.vector.len() {
                return Err(Error::DimensionMismatch {
                    expected: first.vector.len(),
                    found: rec.vector.len(),
                });
            }
        }
        if rec.vector.is_empty() {
            return Err(Error::Format(format!("line {}: empty vector", i + 1)));
        }
        if rec.vector.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("embedding vector"));
        }
        if !seen.insert(rec.id.clone()) {
            return Err(Error::Format(format!("line {}: duplicate id `{}`", i + 1, rec.id)));
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn write_sidecar<W: Write>(mut w: W, records: &[EmbeddingRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_lossless() {
        let recs = vec![
            EmbeddingRecord { id: "a".into(), vector: vec![0.1, -2.5e-7, 3.0] },
            EmbeddingRecord { id: "b".into(), vector: vec![1.0 / 3.0, 0.0, 1e300] },
        ];
        let mut buf = Vec::new();
        write_sidecar(&mut buf, &recs).unwrap();
        assert_eq!(read_sidecar(&buf[..]).unwrap(), recs);
    }

    #[test]
    fn extra_fields_are_ignored() {
        let text = r#"{"id":"x","vector":[1,2],"meta":{"encoder":"vit","dim":2}}"#;
        assert_eq!(read_sidecar(text.as_bytes()).unwrap()[0].vector, [1.0, 2.0]);
    }

    #[test]
    fn ragged_dimensions_are_rejected() {
        let text = "{\"id\":\"a\",\"vector\":[1,2]}\n{\"id\":\"b\",\"vector\":[1]}\n";
        assert!(matches!(read_sidecar(text.as_bytes()), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let text = "{\"id\":\"a\",\"vector\":[1]}\n{\"id\":\"a\",\"vector\":[2]}\n";
        assert!(read_sidecar(text.as_bytes()).is_err());
    }
}
