//! Binary checkpoints of the complete learner state.
//!
//! Layout: the 8-byte magic `LCRISCKP`, a little-endian `u32` format
//! version, a `u64` header length, a JSON header, a `u64` count of payload
//! values and then that many little-endian `f64`s. The header records the
//! configuration, counters, the rng state and the shape of every tensor;
//! the payload holds the tensors in header order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::ddpg::{Ddpg, DdpgConfig};
use super::mlp::{Activation, Mlp};
use super::replay::{ReplayBuffer, Transition};
use super::train::{EpisodeStats, TrainState};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"LCRISCKP";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct NetShape {
    name: String,
    sizes: Vec<usize>,
    activations: Vec<Activation>,
}

impl NetShape {
    fn of(name: &str, net: &Mlp) -> Self {
        let mut sizes = vec![net.input_dim()];
        sizes.extend(net.layers.iter().map(|l| l.outputs));
        Self {
            name: name.to_string(),
            sizes,
            activations: net.layers.iter().map(|l| l.activation).collect(),
        }
    }

    fn build(&self) -> Result<Mlp> {
        if self.activations.len() + 1 != self.sizes.len() {
            return Err(Error::Checkpoint(format!(
                "network '{}' has inconsistent shape",
                self.name
            )));
        }
        let mut net = Mlp::zeros(&self.sizes, Activation::Identity, Activation::Identity)
            .map_err(|e| Error::Checkpoint(format!("network '{}': {e}", self.name)))?;
        for (l, a) in net.layers.iter_mut().zip(&self.activations) {
            l.activation = *a;
        }
        Ok(net)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct OptMeta {
    name: String,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    steps: u64,
    len: usize,
}

impl OptMeta {
    fn of(name: &str, opt: &Adam) -> Self {
        Self {
            name: name.to_string(),
            lr: opt.lr,
            beta1: opt.beta1,
            beta2: opt.beta2,
            eps: opt.eps,
            steps: opt.steps,
            len: opt.first.len(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct BufferMeta {
    capacity: usize,
    cursor: usize,
    len: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    config: DdpgConfig,
    seed: u64,
    episode: usize,
    total_steps: u64,
    history: Vec<EpisodeStats>,
    rng: ChaCha8Rng,
    obs_dim: usize,
    act_dim: usize,
    networks: Vec<NetShape>,
    optimizers: Vec<OptMeta>,
    buffer: BufferMeta,
}

fn networks(agent: &Ddpg) -> [(&'static str, &Mlp); 4] {
    [
        ("actor", &agent.actor),
        ("critic", &agent.critic),
        ("target_actor", &agent.target_actor),
        ("target_critic", &agent.target_critic),
    ]
}

/// Serialises a learner state into a byte vector.
pub fn encode(state: &TrainState) -> Result<Vec<u8>> {
    let agent = &state.agent;
    let header = Header {
        config: agent.config.clone(),
        seed: state.seed,
        episode: state.episode,
        total_steps: state.total_steps,
        history: state.history.clone(),
        rng: state.rng.clone(),
        obs_dim: agent.obs_dim(),
        act_dim: agent.act_dim(),
        networks: networks(agent).iter().map(|(n, net)| NetShape::of(n, net)).collect(),
        optimizers: vec![
            OptMeta::of("actor", &agent.actor_opt),
            OptMeta::of("critic", &agent.critic_opt),
        ],
        buffer: BufferMeta {
            capacity: state.buffer.capacity(),
            cursor: state.buffer.cursor(),
            len: state.buffer.len(),
        },
    };

    let mut payload: Vec<f64> = Vec::new();
    for (_, net) in networks(agent) {
        payload.extend(net.params());
    }
    for opt in [&agent.actor_opt, &agent.critic_opt] {
        payload.extend_from_slice(&opt.first);
        payload.extend_from_slice(&opt.second);
    }
    for t in state.buffer.items() {
        payload.extend_from_slice(&t.state);
        payload.extend_from_slice(&t.action);
        payload.push(t.reward);
        payload.extend_from_slice(&t.next_state);
        payload.push(if t.done { 1.0 } else { 0.0 });
    }

    let json = serde_json::to_vec(&header).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let mut out = Vec::with_capacity(28 + json.len() + 8 * payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    for x in payload {
        out.extend_from_slice(&x.to_le_bytes());
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint("truncated checkpoint".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

struct Floats<'a> {
    data: &'a [u8],
    pos: usize,
}

impl Floats<'_> {
    fn next_n(&mut self, n: usize) -> Result<Vec<f64>> {
        if self.pos + n * 8 > self.data.len() {
            return Err(Error::Checkpoint("payload shorter than the header describes".into()));
        }
        let v = self.data[self.pos..self.pos + n * 8]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        self.pos += n * 8;
        Ok(v)
    }
}

/// Restores a learner state from bytes produced by [`encode`].
pub fn decode(bytes: &[u8]) -> Result<TrainState> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(8)? != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file".into()));
    }
    let version = u32::from_le_bytes(cur.take(4)?.try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let header_len = cur.u64()? as usize;
    let header: Header =
        serde_json::from_slice(cur.take(header_len)?).map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;
    let count = cur.u64()? as usize;
    let data = cur.take(
        count
            .checked_mul(8)
            .ok_or_else(|| Error::Checkpoint("bad payload size".into()))?,
    )?;
    if cur.pos != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes after payload".into()));
    }
    let mut floats = Floats { data, pos: 0 };

    if header.networks.len() != 4 || header.optimizers.len() != 2 {
        return Err(Error::Checkpoint("unexpected tensor directory".into()));
    }
    let mut nets = Vec::with_capacity(4);
    for shape in &header.networks {
        let mut net = shape.build()?;
        let params = floats.next_n(net.param_count())?;
        net.set_params(&params)?;
        nets.push(net);
    }
    let mut opts = Vec::with_capacity(2);
    for (meta, net) in header.optimizers.iter().zip([&nets[0], &nets[1]]) {
        if meta.len != net.param_count() {
            return Err(Error::Checkpoint(format!(
                "optimizer '{}' does not match its network",
                meta.name
            )));
        }
        opts.push(Adam {
            lr: meta.lr,
            beta1: meta.beta1,
            beta2: meta.beta2,
            eps: meta.eps,
            steps: meta.steps,
            first: floats.next_n(meta.len)?,
            second: floats.next_n(meta.len)?,
        });
    }

    let (obs, act) = (header.obs_dim, header.act_dim);
    if nets[0].input_dim() != obs || nets[0].output_dim() != act {
        return Err(Error::Checkpoint(
            "actor shape disagrees with recorded dimensions".into(),
        ));
    }
    let mut items = Vec::with_capacity(header.buffer.len);
    for _ in 0..header.buffer.len {
        let state = floats.next_n(obs)?;
        let action = floats.next_n(act)?;
        let reward = floats.next_n(1)?[0];
        let next_state = floats.next_n(obs)?;
        let done = floats.next_n(1)?[0] != 0.0;
        items.push(Transition {
            state,
            action,
            reward,
            next_state,
            done,
        });
    }
    if floats.pos != data.len() {
        return Err(Error::Checkpoint("payload longer than the header describes".into()));
    }
    let buffer = ReplayBuffer::from_parts(items, header.buffer.capacity, header.buffer.cursor)?;

    let mut nets = nets.into_iter();
    let mut opts = opts.into_iter();
    let agent = Ddpg {
        config: header.config,
        actor: nets.next().expect("four networks"),
        critic: nets.next().expect("four networks"),
        target_actor: nets.next().expect("four networks"),
        target_critic: nets.next().expect("four networks"),
        actor_opt: opts.next().expect("two optimizers"),
        critic_opt: opts.next().expect("two optimizers"),
    };
    Ok(TrainState {
        agent,
        buffer,
        rng: header.rng,
        seed: header.seed,
        episode: header.episode,
        total_steps: header.total_steps,
        history: header.history,
    })
}

pub fn save(state: &TrainState, path: &Path) -> Result<()> {
    let bytes = encode(state)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<TrainState> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    BufReader::new(file)
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
