//! Run configuration: defaults, an optional TOML file, and command-line
//! overrides, resolved in that order.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use hyst_core::corpus::{Split, DATA_FILE, DEV_LIST, TEST_LIST};
use hyst_core::nn::encoder::EncoderConfig;
use hyst_core::nn::train::TrainConfig;
use serde::{Deserialize, Serialize};

/// Environment variables consulted, in order, for the data root.
pub const DATA_ENV_VARS: [&str; 2] = ["HYST_DATA_DIR", "MULTIWOZ_DIR"];

/// Fraction of dialogues kept in desk-scale mode.
pub const DESK_SUBSAMPLE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSection {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
}

/// Fully resolved settings for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
    pub split: Split,
    pub max_ngram: usize,
    pub threshold: f64,
    pub seeds: Vec<u64>,
    pub subsample: f64,
    pub train: TrainSection,
    pub ov: EncoderConfig,
    pub jst: EncoderConfig,
}

impl RunConfig {
    /// Full-scale defaults.
    pub fn full() -> Self {
        Self {
            data_dir: PathBuf::new(),
            out_dir: PathBuf::from("runs"),
            split: Split::Test,
            max_ngram: hyst_core::candidates::DEFAULT_MAX_NGRAM,
            threshold: hyst_core::ov::DEFAULT_THRESHOLD,
            seeds: vec![1, 2, 3],
            subsample: 1.0,
            train: TrainSection {
                lr: 1e-3,
                batch_size: 128,
                epochs: 20,
            },
            ov: EncoderConfig::ov(),
            jst: EncoderConfig::jst(),
        }
    }

    /// Small models on a hashed 10% subsample, sized for minutes of CPU.
    pub fn desk() -> Self {
        Self {
            subsample: DESK_SUBSAMPLE,
            train: TrainSection {
                lr: 3e-3,
                batch_size: 16,
                epochs: 15,
            },
            ov: EncoderConfig::desk(true),
            jst: EncoderConfig::desk(false),
            ..Self::full()
        }
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            lr: self.train.lr,
            batch_size: self.train.batch_size,
            epochs: self.train.epochs,
            seed,
        }
    }

    /// Checks every setting, including that the data files exist, so that
    /// mistakes surface before any compute.
    pub fn validate(&self) -> Result<()> {
        if self.data_dir.as_os_str().is_empty() {
            bail!(
                "no data directory: pass --data-dir, set data_dir in the config file, or export {}",
                DATA_ENV_VARS.join(" or ")
            );
        }
        for name in [DATA_FILE, DEV_LIST, TEST_LIST] {
            let path = self.data_dir.join(name);
            if !path.is_file() {
                bail!("data directory {} has no {name}", self.data_dir.display());
            }
        }
        if self.max_ngram == 0 {
            bail!("max_ngram must be at least 1");
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            bail!("threshold must lie strictly between 0 and 1, got {}", self.threshold);
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            bail!("subsample must lie in (0, 1], got {}", self.subsample);
        }
        if self.seeds.is_empty() || self.seeds.len() % 2 == 0 {
            bail!("seeds must hold an odd number of entries for ensembling, got {}", self.seeds.len());
        }
        let distinct: BTreeSet<u64> = self.seeds.iter().copied().collect();
        if distinct.len() != self.seeds.len() {
            bail!("seeds must be distinct, got {:?}", self.seeds);
        }
        self.train_config(self.seeds[0]).validate().context("invalid [train] section")?;
        self.ov.validate().map_err(anyhow::Error::msg).context("invalid [ov] section")?;
        self.jst.validate().map_err(anyhow::Error::msg).context("invalid [jst] section")?;
        Ok(())
    }

    /// The settings that determine artifact contents, without any paths.
    pub fn fingerprint_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        let obj = v.as_object_mut().expect("config is an object");
        obj.remove("data_dir");
        obj.remove("out_dir");
        serde_json::to_string(&v).expect("config serializes")
    }
}

/// Optional overrides read from a TOML file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub desk_scale: Option<bool>,
    pub data_dir: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub split: Option<Split>,
    pub max_ngram: Option<usize>,
    pub threshold: Option<f64>,
    pub seeds: Option<Vec<u64>>,
    pub subsample: Option<f64>,
    pub train: Option<TrainOverrides>,
    pub ov: Option<EncoderOverrides>,
    pub jst: Option<EncoderOverrides>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainOverrides {
    pub lr: Option<f64>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderOverrides {
    pub token_embed_dim: Option<usize>,
    pub utterance_hidden_dim: Option<usize>,
    pub dialogue_hidden_dim: Option<usize>,
    pub act_embed_dim: Option<usize>,
    pub act_hidden_dim: Option<usize>,
    pub context_ff_dim: Option<usize>,
    pub max_turn_tokens: Option<usize>,
    pub max_history_turns: Option<usize>,
    pub use_acts: Option<bool>,
}

impl EncoderOverrides {
    fn apply(&self, e: &mut EncoderConfig) {
        let set = |dst: &mut usize, src: Option<usize>| {
            if let Some(v) = src {
                *dst = v;
            }
        };
        set(&mut e.token_embed_dim, self.token_embed_dim);
        set(&mut e.utterance_hidden_dim, self.utterance_hidden_dim);
        set(&mut e.dialogue_hidden_dim, self.dialogue_hidden_dim);
        set(&mut e.act_embed_dim, self.act_embed_dim);
        set(&mut e.act_hidden_dim, self.act_hidden_dim);
        set(&mut e.context_ff_dim, self.context_ff_dim);
        set(&mut e.max_turn_tokens, self.max_turn_tokens);
        set(&mut e.max_history_turns, self.max_history_turns);
        if let Some(v) = self.use_acts {
            e.use_acts = v;
        }
    }
}

impl FileConfig {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }
}

/// Settings given on the command line; each one beats the config file.
#[derive(Debug, Clone, Default)]
pub struct FlagOverrides {
    pub desk_scale: bool,
    pub data_dir: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub split: Option<Split>,
    pub max_ngram: Option<usize>,
    pub threshold: Option<f64>,
}

/// Builds the run configuration. The base is the full-scale or desk-scale
/// preset, then the file, then the flags; the data root falls back to the
/// environment when neither names it.
pub fn resolve(file: Option<&FileConfig>, flags: &FlagOverrides) -> RunConfig {
    let empty = FileConfig::default();
    let file = file.unwrap_or(&empty);
    let desk = flags.desk_scale || file.desk_scale.unwrap_or(false);
    let mut c = if desk { RunConfig::desk() } else { RunConfig::full() };

    if let Some(v) = &file.data_dir {
        c.data_dir = v.clone();
    }
    if let Some(v) = &file.out_dir {
        c.out_dir = v.clone();
    }
    if let Some(v) = file.split {
        c.split = v;
    }
    if let Some(v) = file.max_ngram {
        c.max_ngram = v;
    }
    if let Some(v) = file.threshold {
        c.threshold = v;
    }
    if let Some(v) = &file.seeds {
        c.seeds = v.clone();
    }
    if let Some(v) = file.subsample {
        c.subsample = v;
    }
    if let Some(t) = &file.train {
        if let Some(v) = t.lr {
            c.train.lr = v;
        }
        if let Some(v) = t.batch_size {
            c.train.batch_size = v;
        }
        if let Some(v) = t.epochs {
            c.train.epochs = v;
        }
    }
    if let Some(o) = &file.ov {
        o.apply(&mut c.ov);
    }
    if let Some(o) = &file.jst {
        o.apply(&mut c.jst);
    }

    if let Some(v) = &flags.data_dir {
        c.data_dir = v.clone();
    }
    if let Some(v) = &flags.out_dir {
        c.out_dir = v.clone();
    }
    if let Some(v) = flags.split {
        c.split = v;
    }
    if let Some(v) = flags.max_ngram {
        c.max_ngram = v;
    }
    if let Some(v) = flags.threshold {
        c.threshold = v;
    }
    if c.data_dir.as_os_str().is_empty() {
        if let Some(dir) = DATA_ENV_VARS.iter().find_map(|k| std::env::var_os(k)) {
            c.data_dir = PathBuf::from(dir);
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_beat_file_and_file_beats_preset() {
        let file: FileConfig = toml::from_str(
            "max_ngram = 4\nthreshold = 0.7\n[train]\nepochs = 2\n[ov]\ncontext_ff_dim = 8\n",
        )
        .unwrap();
        let flags = FlagOverrides {
            desk_scale: true,
            threshold: Some(0.3),
            data_dir: Some("d".into()),
            ..Default::default()
        };
        let c = resolve(Some(&file), &flags);
        assert_eq!(c.max_ngram, 4);
        assert_eq!(c.threshold, 0.3);
        assert_eq!(c.train.epochs, 2);
        assert_eq!(c.train.batch_size, 16);
        assert_eq!(c.ov.context_ff_dim, 8);
        assert_eq!(c.ov.token_embed_dim, 32);
        assert_eq!(c.subsample, DESK_SUBSAMPLE);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<FileConfig>("max_ngrams = 4\n").is_err());
    }

    #[test]
    fn fingerprint_ignores_paths() {
        let mut a = RunConfig::desk();
        let mut b = RunConfig::desk();
        a.data_dir = "x".into();
        b.data_dir = "y".into();
        b.out_dir = "z".into();
        assert_eq!(a.fingerprint_json(), b.fingerprint_json());
        b.threshold = 0.6;
        assert_ne!(a.fingerprint_json(), b.fingerprint_json());
    }

    #[test]
    fn validation_catches_bad_seeds_before_compute() {
        let dir = tempfile::tempdir().unwrap();
        for name in [DATA_FILE, DEV_LIST, TEST_LIST] {
            fs::write(dir.path().join(name), "[]").unwrap();
        }
        let mut c = RunConfig::desk();
        c.data_dir = dir.path().to_path_buf();
        c.validate().unwrap();
        c.seeds = vec![1, 1, 2];
        assert!(c.validate().unwrap_err().to_string().contains("distinct"));
        c.seeds = vec![1, 2];
        assert!(c.validate().is_err());
        c.seeds = vec![1, 2, 3];
        c.threshold = 1.0;
        assert!(c.validate().is_err());
        c.threshold = 0.5;
        c.data_dir = dir.path().join("missing");
        assert!(c.validate().is_err());
    }
}
