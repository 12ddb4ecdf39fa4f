use std::borrow::Borrow;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{BatchArrays, ReplayBuffer};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Buffer positions selected for one mini-batch.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleIndexSet {
    pub indices: Vec<usize>,
}

impl SampleIndexSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// `k` positions drawn i.i.d. uniformly from `[0, len)`, with replacement.
pub fn make_index_uniform<R: Rng + ?Sized>(rng: &mut R, k: usize, len: usize) -> Result<SampleIndexSet> {
    if len == 0 {
        return Err(Error::EmptyBuffer);
    }
    Ok(SampleIndexSet {
        indices: (0..k).map(|_| rng.random_range(0..len)).collect(),
    })
}

fn window_bounds(i: usize, n: usize, d: usize) -> (usize, usize) {
    (i.saturating_sub(n), (i + n + 1).min(d))
}

/// Indices within `n` of `i`, clamped to `[0, d)`, excluding `i` itself.
pub fn neighbor_window(i: usize, n: usize, d: usize) -> Result<Vec<usize>> {
    if i >= d {
        return Err(Error::Index { index: i, len: d });
    }
    if n == 0 {
        return Err(Error::Parameter("neighbors must be at least 1".into()));
    }
    let (lo, hi) = window_bounds(i, n, d);
    Ok((lo..i).chain(i + 1..hi).collect())
}

/// Concatenated neighbor windows of `anchors` over a buffer of length `len`,
/// stopping after the first window that brings the total to at least `b`.
///
/// The result is not truncated; it may be shorter than `b` if the anchors run
/// out first.
pub fn neighbor_sequence(anchors: &[usize], len: usize, n: usize, b: usize) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::Parameter("neighbors must be at least 1".into()));
    }
    let mut out = Vec::with_capacity(b + 2 * n);
    for &i in anchors {
        if i >= len {
            return Err(Error::Index { index: i, len });
        }
        let (lo, hi) = window_bounds(i, n, len);
        out.extend(lo..i);
        out.extend(i + 1..hi);
        if out.len() >= b {
            break;
        }
    }
    Ok(out)
}

/// Exactly `b` neighbor-window positions, or `InsufficientData`.
pub fn neighbor_indices(anchors: &[usize], len: usize, n: usize, b: usize) -> Result<SampleIndexSet> {
    let mut seq = neighbor_sequence(anchors, len, n, b)?;
    if seq.len() < b {
        return Err(Error::InsufficientData {
            gathered: seq.len(),
            wanted: b,
        });
    }
    seq.truncate(b);
    Ok(SampleIndexSet { indices: seq })
}

/// Neighbor sampling over a single buffer, unpacked into parallel arrays.
pub fn neighbor_batch<S: Scalar>(
    anchors: &SampleIndexSet,
    buffer: &ReplayBuffer<S>,
    n: usize,
    b: usize,
) -> Result<BatchArrays<S>> {
    let set = neighbor_indices(&anchors.indices, buffer.len(), n, b)?;
    buffer.gather(&set.indices)
}

/// Applies one index set to every agent's buffer so that record `k` of each
/// returned batch comes from the same environment step.
pub fn collect_joint<S: Scalar, B: Borrow<ReplayBuffer<S>>>(
    buffers: &[B],
    indices: &SampleIndexSet,
) -> Result<Vec<BatchArrays<S>>> {
    let Some(first) = buffers.first().map(Borrow::borrow) else {
        return Ok(Vec::new());
    };
    for (j, b) in buffers.iter().map(Borrow::borrow).enumerate() {
        if b.len() != first.len() || b.cursor() != first.cursor() {
            return Err(Error::Alignment(format!(
                "buffer {j} has len {} cursor {}, buffer 0 has len {} cursor {}",
                b.len(),
                b.cursor(),
                first.len(),
                first.cursor()
            )));
        }
    }
    buffers
        .iter()
        .map(|b| b.borrow().gather(&indices.indices))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    Uniform,
    Neighbor,
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SamplerKind::Uniform => "uniform",
            SamplerKind::Neighbor => "neighbor",
        })
    }
}

impl FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(SamplerKind::Uniform),
            "neighbor" => Ok(SamplerKind::Neighbor),
            other => Err(Error::Config(format!("unknown sampler {other:?} (expected uniform or neighbor)"))),
        }
    }
}

/// Result of one index draw.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Draw {
    pub indices: SampleIndexSet,
    /// The neighbor sampler could not fill the batch and uniform indices were used instead.
    pub fell_back: bool,
}

/// Chooses which buffer positions form a mini-batch. Implementations differ
/// only in index selection; the gathered shapes are identical.
pub trait IndexSampler: Send + Sync {
    fn draw(&self, rng: &mut dyn RngCore, len: usize, batch: usize) -> Result<Draw>;
    fn kind(&self) -> SamplerKind;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct UniformSampler;

impl IndexSampler for UniformSampler {
    fn draw(&self, rng: &mut dyn RngCore, len: usize, batch: usize) -> Result<Draw> {
        Ok(Draw {
            indices: make_index_uniform(rng, batch, len)?,
            fell_back: false,
        })
    }

    fn kind(&self) -> SamplerKind {
        SamplerKind::Uniform
    }
}

#[derive(Clone, Copy, Debug)]
pub struct NeighborSampler {
    pub neighbors: usize,
}

/// Anchors beyond the expected `ceil(b / 2n)` to absorb clamped edge windows.
pub const ANCHOR_MARGIN: usize = 8;

impl NeighborSampler {
    pub fn new(neighbors: usize) -> Result<Self> {
        if neighbors == 0 {
            return Err(Error::Parameter("neighbors must be at least 1".into()));
        }
        Ok(Self { neighbors })
    }

    pub fn anchor_count(&self, batch: usize) -> usize {
        batch.div_ceil(2 * self.neighbors) + ANCHOR_MARGIN
    }
}

impl IndexSampler for NeighborSampler {
    fn draw(&self, rng: &mut dyn RngCore, len: usize, batch: usize) -> Result<Draw> {
        let anchors = make_index_uniform(rng, self.anchor_count(batch), len)?;
        match neighbor_indices(&anchors.indices, len, self.neighbors, batch) {
            Ok(indices) => Ok(Draw {
                indices,
                fell_back: false,
            }),
            Err(Error::InsufficientData { gathered, wanted }) => {
                log::debug!("neighbor sampling gathered {gathered}/{wanted}; falling back to uniform");
                Ok(Draw {
                    indices: make_index_uniform(rng, batch, len)?,
                    fell_back: true,
                })
            }
            Err(e) => Err(e),
        }
    }

    fn kind(&self) -> SamplerKind {
        SamplerKind::Neighbor
    }
}

pub fn make_sampler(kind: SamplerKind, neighbors: usize) -> Result<Box<dyn IndexSampler>> {
    Ok(match kind {
        SamplerKind::Uniform => Box::new(UniformSampler),
        SamplerKind::Neighbor => Box::new(NeighborSampler::new(neighbors)?),
    })
}
