//! Network checkpoints: a short text header followed by raw little-endian
//! `f64` values.
//!
//! ```text
//! HMAMP-CKPT 1
//! name policy
//! layers 14 128 64 3
//! extra 3
//! seed 7
//! step 500
//! ---
//! <(num_params + extra) × f64 LE>
//! ```
//!
//! `extra` counts trailing values stored after the MLP parameters (the
//! policy log-std, or feature-normalizer statistics for the discriminator).

use std::fs;
use std::io::Write;
use std::path::Path;

use super::mlp::{MlpSpec, ParamVector};
use crate::error::{Error, Result};

const MAGIC: &str = "HMAMP-CKPT 1";
const SEPARATOR: &str = "---\n";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub name: String,
    pub spec: MlpSpec,
    pub params: ParamVector,
    pub extra: Vec<f64>,
    pub seed: u64,
    pub step: u64,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let sizes: Vec<String> = self.spec.layer_sizes.iter().map(|s| s.to_string()).collect();
        let mut out = format!(
            "{MAGIC}\nname {}\nlayers {}\nextra {}\nseed {}\nstep {}\n{SEPARATOR}",
            self.name,
            sizes.join(" "),
            self.extra.len(),
            self.seed,
            self.step
        )
        .into_bytes();
        out.reserve(8 * (self.params.len() + self.extra.len()));
        for v in self.params.0.iter().chain(&self.extra) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let split = bytes
            .windows(SEPARATOR.len())
            .position(|w| w == SEPARATOR.as_bytes())
            .ok_or_else(|| Error::Checkpoint("missing header terminator".into()))?;
        let header = std::str::from_utf8(&bytes[..split])
            .map_err(|_| Error::Checkpoint("header is not UTF-8".into()))?;
        let body = &bytes[split + SEPARATOR.len()..];

        let mut lines = header.lines();
        if lines.next() != Some(MAGIC) {
            return Err(Error::Checkpoint("bad magic line".into()));
        }
        let mut name = None;
        let mut layers = None;
        let mut extra = None;
        let mut seed = None;
        let mut step = None;
        for line in lines {
            let (key, value) = line.split_once(' ').unwrap_or((line, ""));
            let parse_u64 = |v: &str| {
                v.trim()
                    .parse::<u64>()
                    .map_err(|_| Error::Checkpoint(format!("bad value for {key}: {v:?}")))
            };
            match key {
                "name" => name = Some(value.to_string()),
                "layers" => {
                    let sizes = value
                        .split_whitespace()
                        .map(|s| {
                            s.parse::<usize>()
                                .map_err(|_| Error::Checkpoint(format!("bad layer width {s:?}")))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    layers = Some(MlpSpec::new(sizes)?);
                }
                "extra" => extra = Some(parse_u64(value)? as usize),
                "seed" => seed = Some(parse_u64(value)?),
                "step" => step = Some(parse_u64(value)?),
                other => return Err(Error::Checkpoint(format!("unknown header key {other:?}"))),
            }
        }
        let missing = |k: &str| Error::Checkpoint(format!("header is missing {k:?}"));
        let spec = layers.ok_or_else(|| missing("layers"))?;
        let extra_len = extra.ok_or_else(|| missing("extra"))?;
        let n = spec.num_params();
        if body.len() != 8 * (n + extra_len) {
            return Err(Error::Checkpoint(format!(
                "body holds {} bytes, header implies {}",
                body.len(),
                8 * (n + extra_len)
            )));
        }
        let values: Vec<f64> = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        let (p, e) = values.split_at(n);
        Ok(Self {
            name: name.ok_or_else(|| missing("name"))?,
            spec,
            params: ParamVector(p.to_vec()),
            extra: e.to_vec(),
            seed: seed.ok_or_else(|| missing("seed"))?,
            step: step.ok_or_else(|| missing("step"))?,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut file = fs::File::create(path)?;
        file.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    /// Loads and checks that the stored topology matches `expected`.
    pub fn load_expecting(path: &Path, expected: &MlpSpec, extra: usize) -> Result<Self> {
        let ckpt = Self::load(path)?;
        if &ckpt.spec != expected || ckpt.extra.len() != extra {
            return Err(Error::Checkpoint(format!(
                "{} stores layers {:?} (+{} extra), configuration expects {:?} (+{extra})",
                path.display(),
                ckpt.spec.layer_sizes,
                ckpt.extra.len(),
                expected.layer_sizes
            )));
        }
        Ok(ckpt)
    }
}
