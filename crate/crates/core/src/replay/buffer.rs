use std::io::{Read, Write};

use crate::error::{check_len, Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct Transition<S> {
    pub obs: Vec<S>,
    pub action: Vec<S>,
    pub reward: S,
    pub next_obs: Vec<S>,
    pub done: bool,
}

/// Fixed-capacity ring buffer stored as five parallel flat arrays, so a run
/// of consecutive slots is one contiguous copy per field.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplayBuffer<S> {
    capacity: usize,
    obs_dim: usize,
    act_dim: usize,
    obs: Vec<S>,
    actions: Vec<S>,
    rewards: Vec<S>,
    next_obs: Vec<S>,
    dones: Vec<bool>,
    cursor: usize,
    len: usize,
    total_inserts: u64,
}

/// Unpacked mini-batch: `obses_t, actions, rewards, obses_tp1, dones`.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchArrays<S> {
    pub obs_dim: usize,
    pub act_dim: usize,
    pub obses_t: Vec<S>,
    pub actions: Vec<S>,
    pub rewards: Vec<S>,
    pub obses_tp1: Vec<S>,
    pub dones: Vec<bool>,
}

impl<S: Scalar> BatchArrays<S> {
    pub fn with_capacity(obs_dim: usize, act_dim: usize, n: usize) -> Self {
        Self {
            obs_dim,
            act_dim,
            obses_t: Vec::with_capacity(n * obs_dim),
            actions: Vec::with_capacity(n * act_dim),
            rewards: Vec::with_capacity(n),
            obses_tp1: Vec::with_capacity(n * obs_dim),
            dones: Vec::with_capacity(n),
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn obs(&self, k: usize) -> &[S] {
        &self.obses_t[k * self.obs_dim..(k + 1) * self.obs_dim]
    }

    pub fn next_obs(&self, k: usize) -> &[S] {
        &self.obses_tp1[k * self.obs_dim..(k + 1) * self.obs_dim]
    }

    pub fn action(&self, k: usize) -> &[S] {
        &self.actions[k * self.act_dim..(k + 1) * self.act_dim]
    }

    pub fn truncate(&mut self, n: usize) {
        self.obses_t.truncate(n * self.obs_dim);
        self.actions.truncate(n * self.act_dim);
        self.rewards.truncate(n);
        self.obses_tp1.truncate(n * self.obs_dim);
        self.dones.truncate(n);
    }
}

impl<S: Scalar> ReplayBuffer<S> {
    /// Shapes are fixed by the first insert.
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Parameter("replay capacity must be positive".into()));
        }
        Ok(Self {
            capacity,
            obs_dim: 0,
            act_dim: 0,
            obs: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            next_obs: Vec::new(),
            dones: Vec::new(),
            cursor: 0,
            len: 0,
            total_inserts: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Next slot to be written; equals `total_inserts mod capacity`.
    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn total_inserts(&self) -> u64 {
        self.total_inserts
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn act_dim(&self) -> usize {
        self.act_dim
    }

    pub fn add(&mut self, t: Transition<S>) -> Result<()> {
        self.push(&t.obs, &t.action, t.reward, &t.next_obs, t.done)
    }

    pub fn push(&mut self, obs: &[S], action: &[S], reward: S, next_obs: &[S], done: bool) -> Result<()> {
        check_len("next_obs length", obs.len(), next_obs.len())?;
        if !reward.is_finite() {
            return Err(Error::NonFinite("transition reward".into()));
        }
        if self.total_inserts == 0 {
            if obs.is_empty() || action.is_empty() {
                return Err(Error::Parameter("transition observation and action must be non-empty".into()));
            }
            self.obs_dim = obs.len();
            self.act_dim = action.len();
        } else {
            check_len("transition obs", self.obs_dim, obs.len())?;
            check_len("transition action", self.act_dim, action.len())?;
        }
        let (od, ad, slot) = (self.obs_dim, self.act_dim, self.cursor);
        if self.len < self.capacity {
            self.obs.extend_from_slice(obs);
            self.actions.extend_from_slice(action);
            self.rewards.push(reward);
            self.next_obs.extend_from_slice(next_obs);
            self.dones.push(done);
            self.len += 1;
        } else {
            self.obs[slot * od..(slot + 1) * od].copy_from_slice(obs);
            self.actions[slot * ad..(slot + 1) * ad].copy_from_slice(action);
            self.rewards[slot] = reward;
            self.next_obs[slot * od..(slot + 1) * od].copy_from_slice(next_obs);
            self.dones[slot] = done;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
        self.total_inserts += 1;
        Ok(())
    }

    pub fn get(&self, i: usize) -> Result<Transition<S>> {
        if i >= self.len {
            return Err(Error::Index { index: i, len: self.len });
        }
        let (od, ad) = (self.obs_dim, self.act_dim);
        Ok(Transition {
            obs: self.obs[i * od..(i + 1) * od].to_vec(),
            action: self.actions[i * ad..(i + 1) * ad].to_vec(),
            reward: self.rewards[i],
            next_obs: self.next_obs[i * od..(i + 1) * od].to_vec(),
            done: self.dones[i],
        })
    }

    fn append_run(&self, out: &mut BatchArrays<S>, start: usize, end: usize) {
        let (od, ad) = (self.obs_dim, self.act_dim);
        out.obses_t.extend_from_slice(&self.obs[start * od..end * od]);
        out.actions.extend_from_slice(&self.actions[start * ad..end * ad]);
        out.rewards.extend_from_slice(&self.rewards[start..end]);
        out.obses_tp1.extend_from_slice(&self.next_obs[start * od..end * od]);
        out.dones.extend_from_slice(&self.dones[start..end]);
    }

    /// Copies the records at `indices` in order. Runs of consecutive indices
    /// are copied as whole slices.
    pub fn gather(&self, indices: &[usize]) -> Result<BatchArrays<S>> {
        let mut out = BatchArrays::with_capacity(self.obs_dim, self.act_dim, indices.len());
        let mut k = 0;
        while k < indices.len() {
            let start = indices[k];
            if start >= self.len {
                return Err(Error::Index { index: start, len: self.len });
            }
            let mut end = start + 1;
            k += 1;
            while k < indices.len() && indices[k] == end && end < self.len {
                end += 1;
                k += 1;
            }
            self.append_run(&mut out, start, end);
        }
        Ok(out)
    }

    /// Versioned little-endian dump of the live slots.
    pub fn write_snapshot<W: Write>(&self, mut w: W) -> Result<()> {
        let mut buf = Vec::with_capacity(64 + self.len * (2 * self.obs_dim + self.act_dim + 2) * S::BYTES);
        buf.extend_from_slice(SNAPSHOT_MAGIC);
        buf.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
        buf.push(S::TAG);
        for v in [self.obs_dim as u64, self.act_dim as u64, self.capacity as u64, self.len as u64, self.cursor as u64, self.total_inserts] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for arr in [&self.obs, &self.actions, &self.rewards, &self.next_obs] {
            for &x in arr.iter() {
                x.write_le(&mut buf);
            }
        }
        buf.extend(self.dones.iter().map(|&d| d as u8));
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_snapshot<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        const HEADER: usize = 4 + 2 + 1 + 6 * 8;
        if bytes.len() < HEADER || &bytes[..4] != SNAPSHOT_MAGIC {
            return Err(Error::Format("not a replay snapshot".into()));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != SNAPSHOT_VERSION {
            return Err(Error::Format(format!("unsupported replay snapshot version {version}")));
        }
        if bytes[6] != S::TAG {
            return Err(Error::Format("replay snapshot scalar width mismatch".into()));
        }
        let field = |i: usize| u64::from_le_bytes(bytes[7 + 8 * i..15 + 8 * i].try_into().unwrap());
        let (od, ad, capacity, len, cursor, total) = (
            field(0) as usize,
            field(1) as usize,
            field(2) as usize,
            field(3) as usize,
            field(4) as usize,
            field(5),
        );
        if capacity == 0 || len > capacity || cursor >= capacity {
            return Err(Error::Format("corrupt replay snapshot header".into()));
        }
        let scalars = len * (2 * od + ad + 1);
        check_len("replay snapshot payload", scalars * S::BYTES + len, bytes.len() - HEADER)?;
        let mut values = bytes[HEADER..HEADER + scalars * S::BYTES]
            .chunks_exact(S::BYTES)
            .map(S::read_le);
        let mut take = |n: usize| values.by_ref().take(n).collect::<Vec<S>>();
        let obs = take(len * od);
        let actions = take(len * ad);
        let rewards = take(len);
        let next_obs = take(len * od);
        let dones = bytes[HEADER + scalars * S::BYTES..].iter().map(|&b| b != 0).collect();
        Ok(Self {
            capacity,
            obs_dim: od,
            act_dim: ad,
            obs,
            actions,
            rewards,
            next_obs,
            dones,
            cursor,
            len,
            total_inserts: total,
        })
    }
}

const SNAPSHOT_MAGIC: &[u8; 4] = b"RPLB";
const SNAPSHOT_VERSION: u16 = 1;
