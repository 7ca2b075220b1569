//! JSON measure files: `{"dim": d, "resolution": h, "atoms": [{"x": [..], "w": ..}]}`.
//!
//! Floats are written in shortest round-trip form, so a save/load cycle is exact.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SignedAtomicMeasure;
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct AtomRecord {
    x: Vec<f64>,
    w: f64,
}

#[derive(Serialize, Deserialize)]
struct MeasureRecord {
    dim: usize,
    resolution: f64,
    atoms: Vec<AtomRecord>,
}

pub fn to_json(mu: &SignedAtomicMeasure) -> String {
    let record = MeasureRecord {
        dim: mu.dim(),
        resolution: mu.resolution(),
        atoms: mu
            .iter()
            .map(|(x, w)| AtomRecord { x: x.to_vec(), w })
            .collect(),
    };
    serde_json::to_string(&record).expect("finite floats always serialize")
}

pub fn from_json(text: &str) -> Result<SignedAtomicMeasure> {
    let record: MeasureRecord = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
    let mut coords = Vec::with_capacity(record.atoms.len() * record.dim);
    let mut weights = Vec::with_capacity(record.atoms.len());
    for (i, atom) in record.atoms.into_iter().enumerate() {
        if atom.x.len() != record.dim {
            return Err(Error::Format(format!(
                "atom {i} has {} coordinates, expected {}",
                atom.x.len(),
                record.dim
            )));
        }
        if !atom.w.is_finite() || atom.x.iter().any(|c| !c.is_finite()) {
            return Err(Error::Format(format!("atom {i} is not finite")));
        }
        coords.extend(atom.x);
        weights.push(atom.w);
    }
    SignedAtomicMeasure::new(record.dim, coords, weights, record.resolution)
        .map_err(|e| Error::Format(e.to_string()))
}

pub fn save(mu: &SignedAtomicMeasure, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_json(mu))?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<SignedAtomicMeasure> {
    from_json(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let mu = SignedAtomicMeasure::new(
            2,
            vec![0.1, 1.0 / 3.0, -2.5e-300, 7.0],
            vec![std::f64::consts::PI, -1e-17],
            1.0 / 64.0,
        )
        .unwrap();
        let back = from_json(&to_json(&mu)).unwrap();
        assert_eq!(back, mu);
    }

    #[test]
    fn rejects_non_finite_and_malformed() {
        assert!(from_json(r#"{"dim":2,"resolution":0,"atoms":[{"x":[0,0],"w":NaN}]}"#).is_err());
        assert!(from_json(r#"{"dim":2,"resolution":0,"atoms":[{"x":[0,0],"w":1e999}]}"#).is_err());
        assert!(from_json(r#"{"dim":2,"resolution":0,"atoms":[{"x":[0],"w":1}]}"#).is_err());
        assert!(from_json(r#"{"dim":2,"atoms":[]}"#).is_err());
    }

    #[test]
    fn accepts_empty_measure() {
        let mu = from_json(r#"{"dim":3,"resolution":0,"atoms":[]}"#).unwrap();
        assert!(mu.is_empty());
        assert_eq!(mu.dim(), 3);
    }
}
