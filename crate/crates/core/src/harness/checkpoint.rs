//! Snapshot files: `COERLCKP`, a little-endian u64 header length, a JSON
//! header, then the flat parameter vector as little-endian f64.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::envs::EnvName;
use crate::error::{Error, Result};
use crate::policy::{GaussianPolicy, PolicySpec};
use crate::tensor::ParameterVector;

const MAGIC: &[u8; 8] = b"COERLCKP";
pub const FORMAT_VERSION: u32 = 1;

/// What the parameter vector encodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ModelKind {
    GaussianPolicy { policy: PolicySpec },
    RawVector { dim: usize },
}

impl ModelKind {
    pub fn param_count(&self) -> Result<usize> {
        match self {
            ModelKind::GaussianPolicy { policy } => policy.param_count(),
            ModelKind::RawVector { dim } => Ok(*dim),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub model: ModelKind,
    pub env: EnvName,
    pub config_hash: String,
    pub generation: u64,
    /// Subproblem index within the generation (1-based); `None` for the
    /// end-of-generation snapshot.
    pub stage: Option<usize>,
    pub param_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub theta: ParameterVector,
}

impl Checkpoint {
    pub fn new(
        model: ModelKind,
        env: EnvName,
        config_hash: String,
        generation: u64,
        stage: Option<usize>,
        theta: ParameterVector,
    ) -> Result<Self> {
        let expected = model.param_count()?;
        if expected != theta.len() {
            return Err(Error::DimensionMismatch {
                what: "checkpoint parameters",
                expected,
                actual: theta.len(),
            });
        }
        Ok(Self {
            header: CheckpointHeader {
                format_version: FORMAT_VERSION,
                model,
                env,
                config_hash,
                generation,
                stage,
                param_count: theta.len(),
            },
            theta,
        })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&self.header)?;
        let mut out = Vec::with_capacity(16 + header.len() + 8 * self.theta.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for v in self.theta.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, String> {
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err("not a checkpoint file".into());
        }
        let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let body_start = 16usize
            .checked_add(header_len)
            .filter(|&e| e <= bytes.len())
            .ok_or("truncated header")?;
        let header: CheckpointHeader =
            serde_json::from_slice(&bytes[16..body_start]).map_err(|e| format!("bad header: {e}"))?;
        if header.format_version != FORMAT_VERSION {
            return Err(format!("unsupported format version {}", header.format_version));
        }
        let body = &bytes[body_start..];
        if body.len() != header.param_count * 8 {
            return Err(format!(
                "expected {} parameters, found {} bytes",
                header.param_count,
                body.len()
            ));
        }
        match header.model.param_count() {
            Ok(n) if n == header.param_count => {}
            _ => return Err("parameter count disagrees with the model description".into()),
        }
        let theta: Vec<f64> = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self {
            header,
            theta: theta.into(),
        })
    }

    /// Writes atomically (temp file then rename).
    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        let tmp = path.with_extension("bin.tmp");
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&bytes)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        Self::from_bytes(&bytes).map_err(|reason| Error::Checkpoint {
            path: path.to_path_buf(),
            reason,
        })
    }

    pub fn policy(&self) -> Result<GaussianPolicy> {
        match &self.header.model {
            ModelKind::GaussianPolicy { policy } => GaussianPolicy::from_theta(policy, self.theta.clone()),
            ModelKind::RawVector { .. } => Err(Error::InvalidInput(
                "checkpoint holds a raw vector, not a policy".into(),
            )),
        }
    }
}

pub fn checkpoint_file_name(generation: u64, stage: Option<usize>) -> String {
    match stage {
        None => format!("ckpt_{generation}.bin"),
        Some(j) => format!("ckpt_{generation}_s{j}.bin"),
    }
}

pub fn checkpoint_path(dir: &Path, generation: u64, stage: Option<usize>) -> PathBuf {
    dir.join(checkpoint_file_name(generation, stage))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Activation;

    fn sample() -> Checkpoint {
        let spec = PolicySpec {
            state_dim: 2,
            action_dim: 1,
            hidden_dims: vec![3],
            activation: Activation::Tanh,
        };
        let n = spec.param_count().unwrap();
        let theta: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin() * 1e-3).collect();
        Checkpoint::new(
            ModelKind::GaussianPolicy { policy: spec },
            EnvName::Lqr,
            "abc".into(),
            7,
            Some(2),
            theta.into(),
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let c = sample();
        let bytes = c.to_bytes().unwrap();
        assert_eq!(&bytes[..8], b"COERLCKP");
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_bytes().unwrap(), bytes);
        back.policy().unwrap();
    }

    #[test]
    fn corrupt_files_rejected() {
        let bytes = sample().to_bytes().unwrap();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        assert!(Checkpoint::from_bytes(b"NOTACKPT00000000").is_err());
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        assert!(Checkpoint::from_bytes(&wrong).is_err());
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let c = sample();
        let path = checkpoint_path(dir.path(), 7, Some(2));
        assert!(path.ends_with("ckpt_7_s2.bin"));
        c.save(&path).unwrap();
        assert_eq!(Checkpoint::load(&path).unwrap(), c);
        let missing = Checkpoint::load(&dir.path().join("nope.bin"));
        assert!(missing.is_err());
    }

    #[test]
    fn mismatched_length_rejected() {
        let r = Checkpoint::new(
            ModelKind::RawVector { dim: 3 },
            EnvName::Quadratic,
            String::new(),
            0,
            None,
            vec![1.0; 4].into(),
        );
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }
}
