//! Training configuration files. Precedence, highest first: command-line flags, the TOML
//! file given with `--config`, built-in defaults. A seed is mandatory.

use std::path::{Path, PathBuf};

use blm::nn::ConvGeom;
use blm::solver::ffnn::FfnnShape;
use blm::solver::vae::{TwoLevelShape, VaeShape};
use blm::solver::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::fail::{Fail, R};

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub train: TrainSection,
    pub model: ModelSection,
    pub paths: PathsSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub lr: Option<f64>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub eps: Option<f64>,
    pub threads: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub hidden: Option<usize>,
    pub filters: Option<usize>,
    pub kernel: Option<[usize; 2]>,
    pub latent: Option<usize>,
    pub task_latent: Option<usize>,
    pub n_negs: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    pub data: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub emb: Vec<PathBuf>,
    pub out: Option<PathBuf>,
    pub log: Option<PathBuf>,
    pub warm_start: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> R<FileConfig> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| Fail::io(path, e))?;
        toml::from_str(&text).map_err(|e| Fail::usage(format!("{}: {e}", path.display())))
    }
}

/// Flag values; `None` defers to the file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub lr: Option<f64>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub threads: Option<usize>,
    pub n_negs: Option<usize>,
    pub data: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub emb: Vec<PathBuf>,
    pub out: Option<PathBuf>,
    pub log: Option<PathBuf>,
    pub warm_start: Option<PathBuf>,
}

/// Everything a training run depends on besides input bytes.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub train: TrainConfig,
    pub ffnn: FfnnShape,
    pub vae: TwoLevelShape,
    pub n_negs: usize,
    pub data: PathBuf,
    pub dev: Option<PathBuf>,
    pub emb: Vec<PathBuf>,
    pub out: PathBuf,
    pub log: PathBuf,
    pub warm_start: Option<PathBuf>,
}

pub fn resolve(file: FileConfig, o: Overrides, thread_cap: Option<usize>) -> R<Resolved> {
    let seed = o
        .seed
        .or(file.seed)
        .ok_or_else(|| Fail::usage("a seed is required (--seed or `seed` in the config file)"))?;
    let d = TrainConfig::default();
    let t = &file.train;
    let mut train = TrainConfig {
        lr: o.lr.or(t.lr).unwrap_or(d.lr),
        batch_size: o.batch_size.or(t.batch_size).unwrap_or(d.batch_size),
        epochs: o.epochs.or(t.epochs).unwrap_or(d.epochs),
        seed,
        beta1: t.beta1.unwrap_or(d.beta1),
        beta2: t.beta2.unwrap_or(d.beta2),
        eps: t.eps.unwrap_or(d.eps),
        threads: o.threads.or(t.threads).unwrap_or(d.threads),
    };
    if let Some(cap) = thread_cap {
        train.threads = train.threads.min(cap);
    }
    train.check()?;
    let m = &file.model;
    let mut ffnn = FfnnShape::default();
    if let Some(h) = m.hidden {
        ffnn.hidden = h;
    }
    let base = VaeShape::default();
    let [kh, kw] = m.kernel.unwrap_or([base.geom.kh, base.geom.kw]);
    let sentence = VaeShape {
        geom: ConvGeom {
            kh,
            kw,
            filters: m.filters.unwrap_or(base.geom.filters),
            ..base.geom
        },
        latent: m.latent.unwrap_or(base.latent),
    };
    sentence.check()?;
    let vae = TwoLevelShape {
        sentence,
        task_latent: m.task_latent.unwrap_or(TwoLevelShape::default().task_latent),
        ..TwoLevelShape::default()
    };
    let p = file.paths;
    let data = o.data.or(p.data).ok_or_else(|| Fail::usage("--data is required"))?;
    let out = o.out.or(p.out).ok_or_else(|| Fail::usage("--out is required"))?;
    let log = o.log.or(p.log).unwrap_or_else(|| {
        let mut s = out.as_os_str().to_owned();
        s.push(".log.jsonl");
        PathBuf::from(s)
    });
    let emb = if o.emb.is_empty() { p.emb } else { o.emb };
    if emb.is_empty() {
        return Err(Fail::usage("at least one --emb file is required"));
    }
    let r = Resolved {
        train,
        ffnn,
        vae,
        n_negs: o.n_negs.or(m.n_negs).unwrap_or(7),
        data,
        dev: o.dev.or(p.dev),
        emb,
        out,
        log,
        warm_start: o.warm_start.or(p.warm_start),
    };
    for path in std::iter::once(&r.data)
        .chain(&r.dev)
        .chain(&r.emb)
        .chain(&r.warm_start)
    {
        if !path.is_file() {
            return Err(Fail::usage(format!("{} does not exist", path.display())));
        }
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file(src: &str) -> FileConfig {
        toml::from_str(src).unwrap()
    }

    fn paths() -> (tempfile::TempDir, Overrides) {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("d.jsonl");
        std::fs::write(&data, "").unwrap();
        let o = Overrides {
            data: Some(data.clone()),
            emb: vec![data],
            out: Some(dir.path().join("m.blmc")),
            ..Overrides::default()
        };
        (dir, o)
    }

    #[test]
    fn flags_beat_file_beats_defaults() {
        let (_d, mut o) = paths();
        let f = file("seed = 3\n[train]\nlr = 0.01\nepochs = 9\n[model]\nhidden = 16\n");
        o.epochs = Some(2);
        let r = resolve(f, o, None).unwrap();
        assert_eq!(r.train.seed, 3);
        assert_eq!(r.train.lr, 0.01);
        assert_eq!(r.train.epochs, 2);
        assert_eq!(r.train.batch_size, 100);
        assert_eq!(r.ffnn.hidden, 16);
        assert!(r.log.to_string_lossy().ends_with("m.blmc.log.jsonl"));
    }

    #[test]
    fn seed_is_mandatory_and_unknown_keys_rejected() {
        let (_d, o) = paths();
        let e = resolve(FileConfig::default(), o, None).unwrap_err();
        assert!(e.usage && e.message.contains("seed"));
        assert!(toml::from_str::<FileConfig>("sede = 1").is_err());
    }

    #[test]
    fn thread_cap_applies() {
        let (_d, mut o) = paths();
        o.seed = Some(1);
        o.threads = Some(8);
        assert_eq!(resolve(FileConfig::default(), o, Some(2)).unwrap().train.threads, 2);
    }
}
