use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::composition::CompositionSetting;
use crate::data::VocabSizes;
use crate::error::{Error, Result};
use crate::io::read_to_string;
use crate::metrics::HleporParams;

/// Everything a training run depends on.
///
/// The file format is one `key = value` per line; `#` starts a comment.
/// Relative paths are resolved against the directory of the file.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub train_src: PathBuf,
    pub train_tgt: PathBuf,
    pub dev_src: PathBuf,
    pub dev_refs: Vec<PathBuf>,
    pub table: PathBuf,
    pub output_dir: PathBuf,
    pub setting: CompositionSetting,
    pub emb_dim: usize,
    pub hidden_dim: usize,
    pub vocab: VocabSizes,
    pub max_len: usize,
    pub batch_size: usize,
    pub dropout: f64,
    pub clip_norm: f64,
    pub adadelta_rho: f64,
    pub adadelta_eps: f64,
    pub beam_width: usize,
    pub max_updates: usize,
    pub valid_interval: usize,
    pub seed: u64,
    /// Reshuffle the training pairs before every pass.
    pub shuffle: bool,
    pub hlepor: HleporParams,
}

const PATH_KEYS: [&str; 6] = ["train_src", "train_tgt", "dev_src", "dev_refs", "table", "output_dir"];

impl ExperimentConfig {
    /// A config with the given paths and the full-scale hyperparameters.
    pub fn new(
        train_src: impl Into<PathBuf>,
        train_tgt: impl Into<PathBuf>,
        dev_src: impl Into<PathBuf>,
        dev_refs: Vec<PathBuf>,
        table: impl Into<PathBuf>,
        output_dir: impl Into<PathBuf>,
    ) -> Self {
        ExperimentConfig {
            train_src: train_src.into(),
            train_tgt: train_tgt.into(),
            dev_src: dev_src.into(),
            dev_refs,
            table: table.into(),
            output_dir: output_dir.into(),
            setting: CompositionSetting::WCR,
            emb_dim: 620,
            hidden_dim: 1000,
            vocab: VocabSizes::default(),
            max_len: 50,
            batch_size: 80,
            dropout: 0.5,
            clip_norm: 1.0,
            adadelta_rho: 0.95,
            adadelta_eps: 1e-6,
            beam_width: 10,
            max_updates: 2000,
            valid_interval: 100,
            seed: 1234,
            shuffle: true,
            hlepor: HleporParams::default(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse(&text, Some(base))
    }

    /// Parses the file format. With `base`, relative paths are joined to it.
    pub fn parse(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut values: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            let key = key.trim().to_string();
            if values.insert(key.clone(), (i + 1, value.trim().to_string())).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key {key:?}", i + 1)));
            }
        }
        let mut take = |key: &str| values.remove(key);
        let path = |v: &str| match base {
            Some(b) if Path::new(v).is_relative() => b.join(v),
            _ => PathBuf::from(v),
        };
        let mut required_path = |key: &str| -> Result<PathBuf> {
            take(key)
                .map(|(_, v)| path(&v))
                .ok_or_else(|| Error::Config(format!("missing key {key:?}")))
        };
        let train_src = required_path("train_src")?;
        let train_tgt = required_path("train_tgt")?;
        let dev_src = required_path("dev_src")?;
        let table = required_path("table")?;
        let output_dir = required_path("output_dir")?;
        let dev_refs = match take("dev_refs") {
            Some((_, v)) => v.split(',').map(|p| path(p.trim())).collect(),
            None => return Err(Error::Config("missing key \"dev_refs\"".into())),
        };
        let mut c = ExperimentConfig::new(train_src, train_tgt, dev_src, dev_refs, table, output_dir);

        fn num<T: std::str::FromStr>(key: &str, entry: Option<(usize, String)>, slot: &mut T) -> Result<()> {
            if let Some((line, v)) = entry {
                *slot = v
                    .parse()
                    .map_err(|_| Error::Config(format!("line {line}: bad value {v:?} for {key}")))?;
            }
            Ok(())
        }
        if let Some((line, v)) = take("setting") {
            c.setting = v
                .parse()
                .map_err(|e: Error| Error::Config(format!("line {line}: {e}")))?;
        }
        num("emb_dim", take("emb_dim"), &mut c.emb_dim)?;
        num("hidden_dim", take("hidden_dim"), &mut c.hidden_dim)?;
        num("word_vocab", take("word_vocab"), &mut c.vocab.word)?;
        num("char_vocab", take("char_vocab"), &mut c.vocab.character)?;
        num("radical_vocab", take("radical_vocab"), &mut c.vocab.radical)?;
        num("target_vocab", take("target_vocab"), &mut c.vocab.target)?;
        num("max_len", take("max_len"), &mut c.max_len)?;
        num("batch_size", take("batch_size"), &mut c.batch_size)?;
        num("dropout", take("dropout"), &mut c.dropout)?;
        num("clip_norm", take("clip_norm"), &mut c.clip_norm)?;
        num("adadelta_rho", take("adadelta_rho"), &mut c.adadelta_rho)?;
        num("adadelta_eps", take("adadelta_eps"), &mut c.adadelta_eps)?;
        num("beam_width", take("beam_width"), &mut c.beam_width)?;
        num("max_updates", take("max_updates"), &mut c.max_updates)?;
        num("valid_interval", take("valid_interval"), &mut c.valid_interval)?;
        num("seed", take("seed"), &mut c.seed)?;
        num("shuffle", take("shuffle"), &mut c.shuffle)?;
        num("hlepor_alpha", take("hlepor_alpha"), &mut c.hlepor.alpha)?;
        num("hlepor_beta", take("hlepor_beta"), &mut c.hlepor.beta)?;
        num("hlepor_context", take("hlepor_context"), &mut c.hlepor.context)?;
        num("hlepor_w_length", take("hlepor_w_length"), &mut c.hlepor.w_length)?;
        num("hlepor_w_position", take("hlepor_w_position"), &mut c.hlepor.w_position)?;
        num("hlepor_w_precision_recall", take("hlepor_w_precision_recall"), &mut c.hlepor.w_precision_recall)?;
        if let Some((key, (line, _))) = values.into_iter().next() {
            return Err(Error::Config(format!("line {line}: unknown key {key:?}")));
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("emb_dim", self.emb_dim),
            ("hidden_dim", self.hidden_dim),
            ("max_len", self.max_len),
            ("batch_size", self.batch_size),
            ("beam_width", self.beam_width),
            ("valid_interval", self.valid_interval),
        ];
        for (key, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{key} must be positive")));
            }
        }
        let min = crate::data::SPECIALS.len();
        let sizes = [
            ("word_vocab", self.vocab.word),
            ("char_vocab", self.vocab.character),
            ("radical_vocab", self.vocab.radical),
            ("target_vocab", self.vocab.target),
        ];
        for (key, v) in sizes {
            if v < min {
                return Err(Error::Config(format!("{key} must be at least {min}")));
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config("dropout must be in [0, 1)".into()));
        }
        if !(self.clip_norm > 0.0 && self.clip_norm.is_finite()) {
            return Err(Error::Config("clip_norm must be positive".into()));
        }
        if !(self.adadelta_rho > 0.0 && self.adadelta_rho < 1.0) {
            return Err(Error::Config("adadelta_rho must be in (0, 1)".into()));
        }
        if !(self.adadelta_eps > 0.0 && self.adadelta_eps.is_finite()) {
            return Err(Error::Config("adadelta_eps must be positive".into()));
        }
        if self.dev_refs.is_empty() {
            return Err(Error::Config("dev_refs needs at least one file".into()));
        }
        for p in &self.dev_refs {
            if p.to_string_lossy().contains(',') {
                return Err(Error::Config(format!("reference path {} contains a comma", p.display())));
            }
        }
        self.hlepor.validate().map_err(|e| Error::Config(e.to_string()))
    }

    /// The file format. Parsing the result gives back an equal config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        let p = |p: &Path| p.display().to_string();
        kv(PATH_KEYS[0], p(&self.train_src));
        kv(PATH_KEYS[1], p(&self.train_tgt));
        kv(PATH_KEYS[2], p(&self.dev_src));
        kv(PATH_KEYS[3], self.dev_refs.iter().map(|r| p(r)).collect::<Vec<_>>().join(","));
        kv(PATH_KEYS[4], p(&self.table));
        kv(PATH_KEYS[5], p(&self.output_dir));
        kv("setting", self.setting.abbreviation().into());
        kv("emb_dim", self.emb_dim.to_string());
        kv("hidden_dim", self.hidden_dim.to_string());
        kv("word_vocab", self.vocab.word.to_string());
        kv("char_vocab", self.vocab.character.to_string());
        kv("radical_vocab", self.vocab.radical.to_string());
        kv("target_vocab", self.vocab.target.to_string());
        kv("max_len", self.max_len.to_string());
        kv("batch_size", self.batch_size.to_string());
        kv("dropout", self.dropout.to_string());
        kv("clip_norm", self.clip_norm.to_string());
        kv("adadelta_rho", self.adadelta_rho.to_string());
        kv("adadelta_eps", self.adadelta_eps.to_string());
        kv("beam_width", self.beam_width.to_string());
        kv("max_updates", self.max_updates.to_string());
        kv("valid_interval", self.valid_interval.to_string());
        kv("seed", self.seed.to_string());
        kv("shuffle", self.shuffle.to_string());
        kv("hlepor_alpha", self.hlepor.alpha.to_string());
        kv("hlepor_beta", self.hlepor.beta.to_string());
        kv("hlepor_context", self.hlepor.context.to_string());
        kv("hlepor_w_length", self.hlepor.w_length.to_string());
        kv("hlepor_w_position", self.hlepor.w_position.to_string());
        kv("hlepor_w_precision_recall", self.hlepor.w_precision_recall.to_string());
        out
    }

    /// SHA-256 of [`to_text`](Self::to_text), in hex.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_text().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// The same config for another setting, writing under `output_dir/<slug>`.
    pub fn for_setting(&self, setting: CompositionSetting) -> Self {
        let mut c = self.clone();
        c.setting = setting;
        c.output_dir = self.output_dir.join(setting.slug());
        c
    }
}
