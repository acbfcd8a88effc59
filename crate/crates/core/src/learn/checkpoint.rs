//! Self-describing checkpoint container.
//!
//! Layout: `b"BIPEDCKP"`, format version (u32 LE), header length (u32 LE), a
//! JSON header, then named parameter blocks. Each block is
//! `name_len u32 | name | ndim u32 | dims u32… | f32 LE data`.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::mlp::Mlp;
use super::normalizer::RunningNorm;
use super::policy::ActorCritic;
use crate::env::{CurriculumPhase, Observation};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"BIPEDCKP";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockInfo {
    pub name: String,
    pub dims: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub obs_dim: usize,
    pub action_dim: usize,
    pub hidden: Vec<usize>,
    pub clock_control: bool,
    pub phase: CurriculumPhase,
    pub iterations: usize,
    pub samples: u64,
    pub seed: u64,
    pub config_hash: String,
    /// Full run configuration as TOML.
    pub config: String,
    pub obs_norm: RunningNorm,
    pub blocks: Vec<BlockInfo>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub model: ActorCritic<f32>,
}

fn mlp_blocks<'a>(prefix: &str, mlp: &'a Mlp<f32>, out: &mut Vec<(BlockInfo, &'a [f32])>) {
    for l in 0..mlp.num_layers() {
        let (inp, o) = mlp.layer_shape(l);
        let (w, b) = mlp.layer_range(l);
        out.push((
            BlockInfo {
                name: format!("{prefix}.{l}.weight"),
                dims: vec![o, inp],
            },
            &mlp.params()[w],
        ));
        out.push((
            BlockInfo {
                name: format!("{prefix}.{l}.bias"),
                dims: vec![o],
            },
            &mlp.params()[b],
        ));
    }
}

fn blocks(model: &ActorCritic<f32>) -> Vec<(BlockInfo, &[f32])> {
    let mut out = Vec::new();
    mlp_blocks("actor", &model.actor, &mut out);
    mlp_blocks("critic", &model.critic, &mut out);
    out.push((
        BlockInfo {
            name: "log_std".into(),
            dims: vec![model.log_std.len()],
        },
        &model.log_std,
    ));
    out
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| bad("truncated checkpoint"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

impl Checkpoint {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        model: ActorCritic<f32>,
        obs_norm: RunningNorm,
        clock_control: bool,
        phase: CurriculumPhase,
        iterations: usize,
        samples: u64,
        seed: u64,
        config: &crate::config::Config,
    ) -> Self {
        let hidden = model.actor.sizes()[1..model.actor.sizes().len() - 1].to_vec();
        let header = CheckpointHeader {
            format_version: FORMAT_VERSION,
            obs_dim: model.obs_dim(),
            action_dim: model.action_dim(),
            hidden,
            clock_control,
            phase,
            iterations,
            samples,
            seed,
            config_hash: config.hash(),
            config: config.to_toml_string(),
            obs_norm,
            blocks: blocks(&model).into_iter().map(|(b, _)| b).collect(),
        };
        Self { header, model }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&self.header).expect("header serializes");
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for (info, data) in blocks(&self.model) {
            out.extend_from_slice(&(info.name.len() as u32).to_le_bytes());
            out.extend_from_slice(info.name.as_bytes());
            out.extend_from_slice(&(info.dims.len() as u32).to_le_bytes());
            for d in &info.dims {
                out.extend_from_slice(&(*d as u32).to_le_bytes());
            }
            for v in data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut c = Cursor { bytes, pos: 0 };
        if c.take(8)? != MAGIC {
            return Err(bad("not a checkpoint (bad magic)"));
        }
        let version = c.u32()?;
        if version != FORMAT_VERSION {
            return Err(bad(format!("unsupported format version {version}")));
        }
        let hlen = c.u32()? as usize;
        let header: CheckpointHeader =
            serde_json::from_slice(c.take(hlen)?).map_err(|e| bad(format!("bad header: {e}")))?;

        let mut sizes = vec![header.obs_dim];
        sizes.extend_from_slice(&header.hidden);
        let mut actor_sizes = sizes.clone();
        actor_sizes.push(header.action_dim);
        sizes.push(1);
        let mut model = ActorCritic {
            actor: Mlp::zeros(&actor_sizes).map_err(|e| bad(e.to_string()))?,
            critic: Mlp::zeros(&sizes).map_err(|e| bad(e.to_string()))?,
            log_std: vec![0.0; header.action_dim],
        };
        let expected: Vec<BlockInfo> = blocks(&model).into_iter().map(|(b, _)| b).collect();
        if expected != header.blocks {
            return Err(bad("block table does not match the declared shapes"));
        }
        let mut data: Vec<Vec<f32>> = Vec::with_capacity(expected.len());
        for info in &expected {
            let nlen = c.u32()? as usize;
            let name = std::str::from_utf8(c.take(nlen)?).map_err(|_| bad("block name is not UTF-8"))?;
            let ndim = c.u32()? as usize;
            let dims = (0..ndim)
                .map(|_| c.u32().map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            if name != info.name || dims != info.dims {
                return Err(bad(format!(
                    "unexpected block {name} {dims:?}, wanted {} {:?}",
                    info.name, info.dims
                )));
            }
            let n: usize = dims.iter().product();
            let raw = c.take(n * 4)?;
            data.push(
                raw.chunks_exact(4)
                    .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                    .collect(),
            );
        }
        if c.pos != bytes.len() {
            return Err(bad("trailing bytes after the last block"));
        }
        let mut it = data.into_iter();
        for mlp in [&mut model.actor, &mut model.critic] {
            for l in 0..mlp.num_layers() {
                let (w, b) = mlp.layer_range(l);
                mlp.params_mut()[w].copy_from_slice(&it.next().unwrap());
                mlp.params_mut()[b].copy_from_slice(&it.next().unwrap());
            }
        }
        model.log_std = it.next().unwrap();
        if header.obs_norm.dim() != header.obs_dim {
            return Err(bad("normalizer dimension does not match obs_dim"));
        }
        Ok(Self { header, model })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .map_err(|e| Error::Checkpoint(format!("cannot open {}: {e}", path.display())))?
            .read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    /// Run configuration stored with the checkpoint.
    pub fn config(&self) -> Result<crate::config::Config> {
        crate::config::Config::from_toml_str(&self.header.config)
    }

    pub fn policy(&self) -> Policy {
        Policy {
            model: self.model.clone(),
            norm: self.header.obs_norm.clone(),
            clock_control: self.header.clock_control,
        }
    }
}

/// Deterministic deployment policy: frozen normalization, mean action.
#[derive(Clone, Debug, PartialEq)]
pub struct Policy {
    pub model: ActorCritic<f32>,
    pub norm: RunningNorm,
    pub clock_control: bool,
}

impl Policy {
    pub fn action_dim(&self) -> usize {
        self.model.action_dim()
    }

    pub fn act(&self, obs: &Observation) -> Result<Vec<f64>> {
        if self.norm.dim() != obs.0.len() {
            return Err(Error::Config(format!(
                "policy expects {} observations, env provides {}",
                self.norm.dim(),
                obs.0.len()
            )));
        }
        let x = self.norm.normalize(obs.as_slice());
        let (mean, _) = self.model.mlp_forward(&x)?;
        Ok(mean.iter().map(|&v| f64::from(v)).collect())
    }

    pub fn value(&self, obs: &Observation) -> Result<f64> {
        let x = self.norm.normalize(obs.as_slice());
        Ok(f64::from(self.model.mlp_forward(&x)?.1))
    }
}
