//! Geometric scale ladders and the per-rung reports built on them.

use serde::Serialize;

use crate::error::{Error, Result};

/// Default number of trailing rungs inspected by convergence rules.
pub const TAIL_RUNGS: usize = 5;

/// A strictly decreasing sequence of positive scales (radii or truncation levels).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ladder {
    scales: Vec<f64>,
}

impl Ladder {
    pub fn new(scales: Vec<f64>) -> Result<Self> {
        if scales.is_empty() {
            return Err(Error::invalid("ladder needs at least one rung"));
        }
        for (i, &s) in scales.iter().enumerate() {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::invalid(format!("ladder rung {i} is not a positive finite scale")));
            }
            if i > 0 && s >= scales[i - 1] {
                return Err(Error::invalid(format!("ladder rung {i} does not decrease")));
            }
        }
        Ok(Self { scales })
    }

    /// `rungs` scales `r0, r0*ratio, r0*ratio^2, ...`.
    pub fn geometric(r0: f64, ratio: f64, rungs: usize) -> Result<Self> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::invalid("ladder ratio must lie in (0, 1)"));
        }
        Self::new((0..rungs).map(|k| r0 * ratio.powi(k as i32)).collect())
    }

    /// Dyadic ladder with the default 20 rungs.
    pub fn dyadic(r0: f64) -> Result<Self> {
        Self::geometric(r0, 0.5, 20)
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn len(&self) -> usize {
        self.scales.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scales.is_empty()
    }

    pub fn finest(&self) -> f64 {
        *self.scales.last().expect("ladder is never empty")
    }

    /// Error naming the first rung that falls below `resolution`.
    pub fn check_resolution(&self, resolution: f64) -> Result<()> {
        match self.scales.iter().position(|&s| s < resolution) {
            Some(rung) => Err(Error::BelowResolution {
                rung,
                scale: self.scales[rung],
                resolution,
            }),
            None => Ok(()),
        }
    }
}

/// Values of a quantity along a ladder plus a verdict of type `V`.
#[derive(Debug, Clone, Serialize)]
pub struct LadderReport<V> {
    pub scales: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    /// Max pairwise distance between values over the trailing window.
    pub oscillation: f64,
    pub verdict: V,
}

impl<V> LadderReport<V> {
    pub fn scalar_values(&self) -> Vec<f64> {
        self.values.iter().map(|v| v[0]).collect()
    }
}

/// Max pairwise Euclidean distance among the last `m` vectors.
pub fn tail_oscillation(values: &[Vec<f64>], m: usize) -> f64 {
    let start = values.len().saturating_sub(m);
    let tail = &values[start..];
    let mut osc = 0.0f64;
    for i in 0..tail.len() {
        for j in i + 1..tail.len() {
            let d2: f64 = tail[i]
                .iter()
                .zip(&tail[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            osc = osc.max(d2.sqrt());
        }
    }
    osc
}

/// Least-squares slope of `ys` against `xs`.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}
