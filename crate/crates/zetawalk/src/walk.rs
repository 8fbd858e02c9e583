//! Reproducible Cauchy random walks.
//!
//! Increments are standard Cauchy, sampled by inverse CDF from keyed
//! ChaCha12 substreams. One substream per replicate makes every result a
//! pure function of (seed, replicate_index, N) independent of worker count
//! or scheduling.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

use crate::error::{Error, Result};
use crate::kahan::Kahan;

/// Key identifying one independent random substream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStreamKey {
    pub seed: u64,
    pub replicate_index: u64,
}

impl RngStreamKey {
    pub fn new(seed: u64, replicate_index: u64) -> Self {
        Self { seed, replicate_index }
    }

    /// The generator for this substream. The mapping key -> stream is pure;
    /// distinct replicate indices select statistically independent streams.
    pub fn rng(&self) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream(self.replicate_index);
        rng
    }
}

/// Uniform draw from the open interval (0, 1): 53-bit mantissa samples with
/// the exact endpoint 0 rejected, so tan never sees +-pi/2.
fn open_unit(rng: &mut ChaCha12Rng) -> f64 {
    loop {
        let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        if u != 0.0 {
            return u;
        }
    }
}

/// Standard Cauchy quantile: tan(pi (u - 1/2)), strictly increasing,
/// median 0.
pub fn cauchy_quantile(u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::Domain(format!(
            "cauchy_quantile requires 0 < u < 1, got {u}"
        )));
    }
    Ok((PI * (u - 0.5)).tan())
}

/// Partial sums S_1..S_N of i.i.d. standard Cauchy increments.
#[derive(Clone, Debug, PartialEq)]
pub struct WalkPath {
    key: RngStreamKey,
    values: Vec<f64>,
}

impl WalkPath {
    pub fn key(&self) -> RngStreamKey {
        self.key
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// S_n for 1-based n.
    pub fn position(&self, n: usize) -> f64 {
        self.values[n - 1]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Test hook: a walk with explicitly supplied positions.
    pub fn from_values(key: RngStreamKey, values: Vec<f64>) -> Self {
        Self { key, values }
    }

    /// CSV audit dump with columns (n, s_n).
    pub fn write_csv<W: Write>(&self, writer: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["n", "s_n"])?;
        for (i, v) in self.values.iter().enumerate() {
            w.write_record([(i + 1).to_string(), format!("{v:.17e}")])?;
        }
        w.flush()
    }
}

/// Generate the walk S_1..S_N from the keyed substream.
pub fn generate_walk(n: usize, key: RngStreamKey) -> WalkPath {
    assert!(n >= 1, "walk length must be at least 1");
    let mut rng = key.rng();
    let mut values = Vec::with_capacity(n);
    let mut acc = Kahan::new();
    for _ in 0..n {
        let u = open_unit(&mut rng);
        acc.add((PI * (u - 0.5)).tan());
        values.push(acc.value());
    }
    WalkPath { key, values }
}

/// Marginal density of S_n: p_n(u) = n / (pi (n^2 + u^2)).
pub fn walk_density(n: u32, u: f64) -> f64 {
    assert!(n >= 1, "walk_density requires n >= 1");
    let nf = n as f64;
    nf / (PI * (nf * nf + u * u))
}
