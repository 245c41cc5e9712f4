//! Transition datasets: storage, normalization statistics, file format,
//! and seeded batch sampling.
//!
//! A dataset is immutable once constructed; normalization statistics are
//! computed in the constructor, so they are always in sync with the
//! transitions. Files use a plain-text header plus a little-endian binary
//! body with a SHA-256 checksum — round trips are byte-exact on the
//! transitions, and the stats are recomputed on load.

use crate::error::{Error, Result};
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::Path;

/// Smallest allowed state standard deviation; constant components are
/// floored here instead of producing zero divisors.
pub const STD_FLOOR: f64 = 1e-6;

const MAGIC: &str = "hipode-dataset v1";
const HEADER_END: &[u8] = b"---\n";

/// One `(s, a, r, s', done)` tuple in raw environment units.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
}

impl Transition {
    fn validate(&self, state_dim: usize, action_dim: usize) -> Result<()> {
        if self.state.len() != state_dim || self.next_state.len() != state_dim {
            return Err(Error::DimMismatch {
                context: "transition state",
                expected: state_dim,
                actual: self.state.len().max(self.next_state.len()),
            });
        }
        if self.action.len() != action_dim {
            return Err(Error::DimMismatch {
                context: "transition action",
                expected: action_dim,
                actual: self.action.len(),
            });
        }
        if self.action.iter().any(|a| !(-1.0..=1.0).contains(a)) {
            return Err(Error::invalid(format!(
                "action out of [-1, 1] bounds: {:?}",
                self.action
            )));
        }
        Ok(())
    }
}

/// Ordered transition store plus normalization statistics.
#[derive(Debug, Clone)]
pub struct TransitionDataset {
    transitions: Vec<Transition>,
    state_mean: Vec<f64>,
    state_std: Vec<f64>,
    source_tag: String,
    state_dim: usize,
    action_dim: usize,
}

impl TransitionDataset {
    pub fn new(transitions: Vec<Transition>, source_tag: impl Into<String>) -> Result<Self> {
        if transitions.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let state_dim = transitions[0].state.len();
        let action_dim = transitions[0].action.len();
        for t in &transitions {
            t.validate(state_dim, action_dim)?;
        }
        let (state_mean, state_std) = state_stats(&transitions, state_dim);
        Ok(TransitionDataset {
            transitions,
            state_mean,
            state_std,
            source_tag: source_tag.into(),
            state_dim,
            action_dim,
        })
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn get(&self, index: usize) -> &Transition {
        &self.transitions[index]
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn source_tag(&self) -> &str {
        &self.source_tag
    }

    pub fn state_mean(&self) -> &[f64] {
        &self.state_mean
    }

    pub fn state_std(&self) -> &[f64] {
        &self.state_std
    }

    /// `(s - mean) / std`, componentwise.
    pub fn normalize_state(&self, s: &[f64]) -> Vec<f64> {
        assert_eq!(s.len(), self.state_dim, "normalize_state: dim");
        s.iter()
            .zip(self.state_mean.iter().zip(self.state_std.iter()))
            .map(|(x, (m, sd))| (x - m) / sd)
            .collect()
    }

    /// Inverse of [`normalize_state`](Self::normalize_state).
    pub fn denormalize_state(&self, z: &[f64]) -> Vec<f64> {
        assert_eq!(z.len(), self.state_dim, "denormalize_state: dim");
        z.iter()
            .zip(self.state_mean.iter().zip(self.state_std.iter()))
            .map(|(x, (m, sd))| x * sd + m)
            .collect()
    }

    /// Uniform sample with replacement; reproducible for a fixed rng state.
    pub fn sample_indices(&self, batch_size: usize, rng: &mut ChaCha12Rng) -> Result<Vec<usize>> {
        if batch_size == 0 {
            return Err(Error::invalid("batch_size must be >= 1"));
        }
        if self.transitions.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok((0..batch_size)
            .map(|_| rng.random_range(0..self.transitions.len()))
            .collect())
    }

    pub fn sample_batch(&self, batch_size: usize, rng: &mut ChaCha12Rng) -> Result<Vec<&Transition>> {
        Ok(self
            .sample_indices(batch_size, rng)?
            .into_iter()
            .map(|i| &self.transitions[i])
            .collect())
    }

    /// Convenience wrapper drawing from a dedicated stream for `seed`.
    pub fn sample_batch_seeded(&self, batch_size: usize, seed: u64) -> Result<Vec<&Transition>> {
        let mut rng = crate::rng::substream(seed, "data.sample_batch");
        self.sample_batch(batch_size, &mut rng)
    }

    /// Reward range over the dataset, for optional reward clipping.
    pub fn reward_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for t in &self.transitions {
            lo = lo.min(t.reward);
            hi = hi.max(t.reward);
        }
        (lo, hi)
    }

    /// New dataset with `extra` transitions appended; stats recomputed.
    pub fn with_appended(
        &self,
        extra: impl IntoIterator<Item = Transition>,
        source_tag: impl Into<String>,
    ) -> Result<Self> {
        let mut transitions = self.transitions.clone();
        transitions.extend(extra);
        TransitionDataset::new(transitions, source_tag)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut payload = Vec::with_capacity(self.transitions.len() * (self.record_len()) * 8);
        for t in &self.transitions {
            for x in &t.state {
                payload.extend_from_slice(&x.to_le_bytes());
            }
            for x in &t.action {
                payload.extend_from_slice(&x.to_le_bytes());
            }
            payload.extend_from_slice(&t.reward.to_le_bytes());
            for x in &t.next_state {
                payload.extend_from_slice(&x.to_le_bytes());
            }
            payload.push(u8::from(t.done));
        }
        let digest = hex::encode(Sha256::digest(&payload));
        let header = format!(
            "{MAGIC}\nstate_dim {}\naction_dim {}\ncount {}\ntag {}\nsha256 {digest}\n",
            self.state_dim,
            self.action_dim,
            self.transitions.len(),
            self.source_tag,
        );
        let mut file =
            std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        file.write_all(header.as_bytes())
            .and_then(|_| file.write_all(HEADER_END))
            .and_then(|_| file.write_all(&payload))
            .map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let path_str = path.display().to_string();
        let malformed = |detail: String| Error::MalformedFile {
            path: path_str.clone(),
            detail,
        };

        let split = bytes
            .windows(HEADER_END.len())
            .position(|w| w == HEADER_END)
            .ok_or_else(|| malformed("missing header terminator".into()))?;
        let header = std::str::from_utf8(&bytes[..split])
            .map_err(|_| malformed("header not utf-8".into()))?;
        let payload = &bytes[split + HEADER_END.len()..];

        let mut lines = header.lines();
        if lines.next() != Some(MAGIC) {
            return Err(malformed("bad magic".into()));
        }
        let mut state_dim = None;
        let mut action_dim = None;
        let mut count = None;
        let mut tag = String::new();
        let mut checksum = None;
        for line in lines {
            let mut parts = line.splitn(2, ' ');
            let key = parts.next().unwrap_or("");
            let val = parts.next().unwrap_or("");
            match key {
                "state_dim" => state_dim = val.trim().parse::<usize>().ok(),
                "action_dim" => action_dim = val.trim().parse::<usize>().ok(),
                "count" => count = val.trim().parse::<usize>().ok(),
                "tag" => tag = val.to_string(),
                "sha256" => checksum = Some(val.trim().to_string()),
                "" => {}
                other => return Err(malformed(format!("unknown header key `{other}`"))),
            }
        }
        let state_dim = state_dim.ok_or_else(|| malformed("missing state_dim".into()))?;
        let action_dim = action_dim.ok_or_else(|| malformed("missing action_dim".into()))?;
        let count = count.ok_or_else(|| malformed("missing count".into()))?;
        if state_dim == 0 || action_dim == 0 {
            return Err(malformed("zero dimension".into()));
        }
        let expected = checksum.ok_or_else(|| malformed("missing checksum".into()))?;
        let actual = hex::encode(Sha256::digest(payload));
        if actual != expected {
            return Err(Error::ChecksumMismatch { path: path_str });
        }

        let record_bytes = (2 * state_dim + action_dim + 1) * 8 + 1;
        if payload.len() != count * record_bytes {
            return Err(malformed(format!(
                "payload has {} bytes, expected {} for {count} records",
                payload.len(),
                count * record_bytes
            )));
        }

        let read_f64s = |src: &[u8], n: usize| -> Vec<f64> {
            src.chunks_exact(8)
                .take(n)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect()
        };

        let mut transitions = Vec::with_capacity(count);
        for rec in payload.chunks_exact(record_bytes) {
            let mut off = 0;
            let state = read_f64s(&rec[off..], state_dim);
            off += state_dim * 8;
            let action = read_f64s(&rec[off..], action_dim);
            off += action_dim * 8;
            let reward = f64::from_le_bytes(rec[off..off + 8].try_into().unwrap());
            off += 8;
            let next_state = read_f64s(&rec[off..], state_dim);
            off += state_dim * 8;
            let done = match rec[off] {
                0 => false,
                1 => true,
                other => return Err(malformed(format!("bad done byte {other}"))),
            };
            transitions.push(Transition {
                state,
                action,
                reward,
                next_state,
                done,
            });
        }
        TransitionDataset::new(transitions, tag)
    }

    fn record_len(&self) -> usize {
        2 * self.state_dim + self.action_dim + 1
    }
}

/// Population mean/std per state component, std floored at [`STD_FLOOR`].
fn state_stats(transitions: &[Transition], state_dim: usize) -> (Vec<f64>, Vec<f64>) {
    let n = transitions.len() as f64;
    let mut mean = vec![0.0; state_dim];
    for t in transitions {
        for (m, x) in mean.iter_mut().zip(t.state.iter()) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; state_dim];
    for t in transitions {
        for ((v, x), m) in var.iter_mut().zip(t.state.iter()).zip(mean.iter()) {
            let d = x - m;
            *v += d * d;
        }
    }
    let std = var
        .iter()
        .map(|v| (v / n).sqrt().max(STD_FLOOR))
        .collect();
    (mean, std)
}
