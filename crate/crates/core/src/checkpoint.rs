//! Model checkpoints: `"BLMC" | u16 version | u32 header length | JSON header | f32 blob`,
//! little-endian. The header names every tensor with its shape, in blob order, and carries the
//! model shape and training configuration.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Params;
use crate::solver::ffnn::{Ffnn, FfnnShape};
use crate::solver::vae::{LatentRanges, SentenceModel, SentenceVae, TwoLevelShape, TwoLevelVae, VaeShape};
use crate::solver::TrainConfig;

pub const MAGIC: &[u8; 4] = b"BLMC";
pub const VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)] // one model per checkpoint, rarely moved
pub enum Model {
    Ffnn(Ffnn<f32>),
    Sentence(SentenceModel),
    TwoLevel(TwoLevelVae<f32>),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Ffnn(_) => "ffnn",
            Model::Sentence(_) => "vae-sentence",
            Model::TwoLevel(_) => "vae-two-level",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub config: TrainConfig,
    /// Identity of the embedding provider the model was trained on.
    pub provider: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum ShapeHeader {
    Ffnn {
        shape: FfnnShape,
    },
    VaeSentence {
        shape: VaeShape,
        n_negs: usize,
        ranges: bool,
    },
    VaeTwoLevel {
        shape: TwoLevelShape,
    },
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorHeader {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    model: ShapeHeader,
    provider: String,
    config: TrainConfig,
    tensors: Vec<TensorHeader>,
}

fn tensors<P: Params<f32>>(p: &P, prefix: &str) -> Vec<TensorHeader> {
    p.names()
        .into_iter()
        .zip(p.shapes())
        .map(|(name, shape)| TensorHeader {
            name: format!("{prefix}{name}"),
            shape,
        })
        .collect()
}

pub fn write_checkpoint_to(mut w: impl Write, ck: &Checkpoint) -> Result<()> {
    let (model, mut list, mut blob) = match &ck.model {
        Model::Ffnn(m) => (ShapeHeader::Ffnn { shape: m.shape }, tensors(m, ""), m.flatten()),
        Model::Sentence(m) => {
            let mut list = tensors(&m.vae, "");
            let mut blob = m.vae.flatten();
            if let Some(r) = &m.ranges {
                for (name, v) in [("ranges.min", &r.min), ("ranges.max", &r.max)] {
                    list.push(TensorHeader {
                        name: name.into(),
                        shape: vec![v.len()],
                    });
                    blob.extend(v);
                }
            }
            let shape = ShapeHeader::VaeSentence {
                shape: m.vae.shape,
                n_negs: m.n_negs,
                ranges: m.ranges.is_some(),
            };
            (shape, list, blob)
        }
        Model::TwoLevel(m) => (ShapeHeader::VaeTwoLevel { shape: m.shape }, tensors(m, ""), m.flatten()),
    };
    let header = Header {
        model,
        provider: ck.provider.clone(),
        config: ck.config,
        tensors: std::mem::take(&mut list),
    };
    let json = serde_json::to_vec(&header)?;
    let len = u32::try_from(json.len()).map_err(|_| Error::Checkpoint("header too large".into()))?;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&len.to_le_bytes())?;
    w.write_all(&json)?;
    let mut bytes = Vec::with_capacity(blob.len() * 4);
    for x in blob.drain(..) {
        bytes.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

pub fn write_checkpoint(path: impl AsRef<Path>, ck: &Checkpoint) -> Result<()> {
    let mut buf = Vec::new();
    write_checkpoint_to(&mut buf, ck)?;
    std::fs::write(path, buf)?;
    Ok(())
}

fn load<P: Params<f32>>(mut p: P, values: &[f32], what: &str) -> Result<P> {
    if !p.load_flat(values) {
        return Err(Error::Checkpoint(format!(
            "{what}: blob holds {} values, the model needs {}",
            values.len(),
            p.count()
        )));
    }
    if !p.all_finite() {
        return Err(Error::Checkpoint(format!("{what}: non-finite parameters")));
    }
    Ok(p)
}

pub fn read_checkpoint_from(mut r: impl Read) -> Result<Checkpoint> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let short = || Error::Checkpoint("file is truncated".into());
    if bytes.len() < 10 {
        return Err(short());
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(Error::Checkpoint(format!(
            "version {version} is not supported (expected {VERSION})"
        )));
    }
    let len = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let header_end = 10 + len;
    if bytes.len() < header_end {
        return Err(short());
    }
    let header: Header = serde_json::from_slice(&bytes[10..header_end])?;
    let payload = &bytes[header_end..];
    if payload.len() % 4 != 0 {
        return Err(short());
    }
    let values: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let declared: usize = header.tensors.iter().map(|t| t.shape.iter().product::<usize>()).sum();
    if declared != values.len() {
        return Err(Error::Checkpoint(format!(
            "header declares {declared} values, blob holds {}",
            values.len()
        )));
    }
    let model = match header.model {
        ShapeHeader::Ffnn { shape } => Model::Ffnn(load(Ffnn::zeros(shape), &values, "ffnn")?),
        ShapeHeader::VaeSentence { shape, n_negs, ranges } => {
            let vae = SentenceVae::zeros(shape);
            let n = vae.count();
            if values.len() < n {
                return Err(short());
            }
            let vae = load(vae, &values[..n], "sentence model")?;
            let ranges = if ranges {
                let rest = &values[n..];
                if rest.len() != 2 * shape.latent {
                    return Err(Error::Checkpoint("latent ranges do not match the latent size".into()));
                }
                Some(LatentRanges {
                    min: rest[..shape.latent].to_vec(),
                    max: rest[shape.latent..].to_vec(),
                })
            } else {
                None
            };
            Model::Sentence(SentenceModel { vae, n_negs, ranges })
        }
        ShapeHeader::VaeTwoLevel { shape } => {
            Model::TwoLevel(load(TwoLevelVae::zeros(shape), &values, "two-level model")?)
        }
    };
    Ok(Checkpoint {
        model,
        config: header.config,
        provider: header.provider,
    })
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    read_checkpoint_from(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ConvGeom;
    use crate::seed;

    fn small_vae() -> VaeShape {
        VaeShape {
            geom: ConvGeom {
                channels: 1,
                height: 6,
                width: 5,
                kh: 3,
                kw: 2,
                filters: 2,
            },
            latent: 2,
        }
    }

    fn round_trip(model: Model) {
        let ck = Checkpoint {
            model,
            config: TrainConfig::default(),
            provider: "p".into(),
        };
        let mut buf = Vec::new();
        write_checkpoint_to(&mut buf, &ck).unwrap();
        let back = read_checkpoint_from(&buf[..]).unwrap();
        assert_eq!(back, ck);
        let mut again = Vec::new();
        write_checkpoint_to(&mut again, &back).unwrap();
        assert_eq!(buf, again);
        assert!(read_checkpoint_from(&buf[..buf.len() - 3]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_checkpoint_from(&bad[..])
            .unwrap_err()
            .to_string()
            .contains("bad magic"));
    }

    #[test]
    fn every_model_kind_round_trips() {
        round_trip(Model::Ffnn(Ffnn::init(
            FfnnShape {
                rows: 2,
                dim: 3,
                hidden: 4,
            },
            1,
        )));
        let mut rng = seed::stream(1, "ck");
        round_trip(Model::Sentence(SentenceModel {
            vae: SentenceVae::init(small_vae(), &mut rng),
            n_negs: 7,
            ranges: Some(LatentRanges {
                min: vec![-1.0, -0.5],
                max: vec![1.0, 0.25],
            }),
        }));
        let shape = TwoLevelShape {
            sentence: small_vae(),
            rows: 3,
            task_latent: 2,
        };
        round_trip(Model::TwoLevel(TwoLevelVae::init(shape, &mut rng)));
    }
}
