use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{load_vocab_dir, save_vocab_dir, ExperimentConfig, RunLedger, ValidationRecord};
use crate::data::{encode_batches, read_lines, read_parallel, tokenize, EncodedSource, GranularVocabulary};
use crate::decode::{default_max_len, detokenize, greedy};
use crate::decomposition::DecompositionTable;
use crate::error::{Error, Result};
use crate::io::{open, write_atomic};
use crate::metrics::{bleu, ReferenceSet, Sentence};
use crate::model::{save_checkpoint, Adadelta, Dropout, ModelDims};
use crate::ModelParams;

/// The development set as the validator sees it.
#[derive(Debug, Clone)]
pub struct DevSet {
    /// `None` for empty source lines, which translate to empty output.
    pub sources: Vec<Option<EncodedSource>>,
    pub refs: ReferenceSet,
}

impl DevSet {
    pub fn load(config: &ExperimentConfig, vocab: &GranularVocabulary, table: &DecompositionTable) -> Result<Self> {
        let lines = read_lines(open(&config.dev_src)?, "dev source")?;
        let mut streams = Vec::with_capacity(config.dev_refs.len());
        for p in &config.dev_refs {
            let refs = read_lines(open(p)?, "dev reference")?;
            if refs.len() != lines.len() {
                return Err(Error::Input(format!(
                    "{} has {} lines but the dev source has {}",
                    p.display(),
                    refs.len(),
                    lines.len()
                )));
            }
            streams.push(refs.iter().map(|l| tokenize(l)).collect());
        }
        let sources = lines
            .iter()
            .map(|l| {
                let tokens = tokenize(l);
                if tokens.is_empty() {
                    Ok(None)
                } else {
                    EncodedSource::encode(&tokens, vocab, table).map(Some)
                }
            })
            .collect::<Result<_>>()?;
        Ok(DevSet {
            sources,
            refs: ReferenceSet::from_streams(streams)?,
        })
    }

    /// Greedy translations of every source line, one sentence at a time.
    pub fn translate(&self, model: &ModelParams<f32>, vocab: &GranularVocabulary) -> Result<Vec<Sentence>> {
        self.sources
            .iter()
            .map(|s| match s {
                None => Ok(Vec::new()),
                Some(src) => {
                    let t = greedy(model, src, default_max_len(src.len()))?;
                    Ok(tokenize(&detokenize(&t.tokens, vocab)))
                }
            })
            .collect()
    }

    /// Case-sensitive corpus BLEU-4 of greedy translations.
    pub fn bleu(&self, model: &ModelParams<f32>, vocab: &GranularVocabulary) -> Result<f64> {
        let hyps = self.translate(model, vocab)?;
        Ok(bleu(&hyps, &self.refs, 4, false)?.value)
    }
}

/// What a finished training run leaves behind.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub config: ExperimentConfig,
    pub ledger: RunLedger,
    pub vocab: GranularVocabulary,
    /// Parameters after the last update.
    pub model: ModelParams<f32>,
    pub init_checkpoint: PathBuf,
    pub updates: usize,
    /// Training pairs dropped by the length filter.
    pub dropped_pairs: usize,
}

impl TrainOutcome {
    pub fn best_checkpoint(&self) -> Option<PathBuf> {
        let record = self.ledger.best_record()?;
        record.checkpoint.as_ref().map(|name| self.config.output_dir.join(name))
    }
}

pub fn checkpoint_name(update: usize) -> String {
    format!("model-{update}.ckpt")
}

fn write_meta(path: &Path, config: &ExperimentConfig, update: usize, dev_bleu: f64) -> Result<()> {
    let mut meta = String::new();
    let _ = writeln!(meta, "update = {update}");
    let _ = writeln!(meta, "dev_bleu = {dev_bleu}");
    let _ = writeln!(meta, "setting = {}", config.setting);
    let _ = writeln!(meta, "seed = {}", config.seed);
    let _ = writeln!(meta, "config_hash = {}", config.hash());
    let mut name = path.as_os_str().to_owned();
    name.push(".meta");
    write_atomic(Path::new(&name), meta.as_bytes())
}

/// Reads the `dev_bleu` recorded beside a checkpoint.
pub fn recorded_dev_bleu(checkpoint: &Path) -> Result<f64> {
    let mut name = checkpoint.as_os_str().to_owned();
    name.push(".meta");
    let text = crate::io::read_to_string(Path::new(&name))?;
    text.lines()
        .filter_map(|l| l.split_once('='))
        .find(|(k, _)| k.trim() == "dev_bleu")
        .and_then(|(_, v)| v.trim().parse().ok())
        .ok_or_else(|| Error::Checkpoint(format!("{} has no dev_bleu", Path::new(&name).display())))
}

/// Trains one model and validates it on the dev set every
/// `valid_interval` updates and after the last one, checkpointing each
/// improvement in dev BLEU.
pub fn train(config: &ExperimentConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let table = DecompositionTable::load(open(&config.table)?)?;
    let corpus = read_parallel(open(&config.train_src)?, open(&config.train_tgt)?, config.max_len)?;
    if corpus.pairs.is_empty() {
        return Err(Error::Input("no training pair survived the length filter".into()));
    }
    let vocab = GranularVocabulary::build(&corpus.pairs, &table, config.vocab)?;
    let out = &config.output_dir;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    save_vocab_dir(out, &vocab)?;
    write_atomic(&out.join("table.tsv"), table.to_text().as_bytes())?;
    write_atomic(&out.join("config.txt"), config.to_text().as_bytes())?;

    let dims = ModelDims {
        emb: config.emb_dim,
        hidden: config.hidden_dim,
        word_vocab: vocab.words.len(),
        char_vocab: vocab.characters.len(),
        radical_vocab: vocab.radicals.len(),
        target_vocab: vocab.target.len(),
    };
    let mut model = ModelParams::<f32>::init(config.setting, dims, config.seed);
    let init_checkpoint = out.join("init.ckpt");
    save_checkpoint(&model, &init_checkpoint)?;

    let dev = DevSet::load(config, &vocab, &table)?;
    let mut opt = Adadelta::new(&model, config.adadelta_rho, config.adadelta_eps, Some(config.clip_norm))?;
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0xd7d7_d7d7);
    let shuffle_seed = |pass: u64| config.shuffle.then(|| config.seed.wrapping_add(pass));
    let mut pass = 0u64;
    let mut batches = encode_batches(&corpus.pairs, &vocab, &table, config.batch_size, shuffle_seed(pass))?;
    let mut next = 0;

    let mut ledger = RunLedger::default();
    let mut loss_sum = 0.0;
    let mut loss_count = 0usize;
    for update in 1..=config.max_updates {
        if next == batches.len() {
            pass += 1;
            next = 0;
            if config.shuffle {
                batches = encode_batches(&corpus.pairs, &vocab, &table, config.batch_size, shuffle_seed(pass))?;
            }
        }
        let batch = &batches[next];
        next += 1;
        let dropout = (config.dropout > 0.0).then_some(Dropout {
            rate: config.dropout,
            rng: &mut dropout_rng,
        });
        let (loss, grads) = model.loss_and_gradients(batch, dropout)?;
        if !loss.mean.is_finite() {
            return Err(Error::NonFinite(format!("training loss {} at update {update}", loss.mean)));
        }
        opt.update(&mut model, &grads).map_err(|e| match e {
            Error::NonFinite(what) => Error::NonFinite(format!("{what} at update {update}")),
            other => other,
        })?;
        loss_sum += loss.mean;
        loss_count += 1;

        if update % config.valid_interval == 0 || update == config.max_updates {
            let dev_bleu = dev.bleu(&model, &vocab)?;
            let checkpoint = if ledger.improves(dev_bleu) {
                let path = out.join(checkpoint_name(update));
                save_checkpoint(&model, &path)?;
                write_meta(&path, config, update, dev_bleu)?;
                Some(PathBuf::from(checkpoint_name(update)))
            } else {
                None
            };
            ledger.records.push(ValidationRecord {
                update,
                dev_bleu,
                train_loss: loss_sum / loss_count as f64,
                checkpoint,
            });
            loss_sum = 0.0;
            loss_count = 0;
            write_atomic(&out.join("ledger.tsv"), ledger.to_tsv().as_bytes())?;
        }
    }
    if config.max_updates == 0 {
        write_atomic(&out.join("ledger.tsv"), ledger.to_tsv().as_bytes())?;
    }
    Ok(TrainOutcome {
        config: config.clone(),
        ledger,
        vocab,
        model,
        init_checkpoint,
        updates: config.max_updates,
        dropped_pairs: corpus.dropped,
    })
}

/// A trained model with the vocabularies and table stored beside it.
#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub model: ModelParams<f32>,
    pub vocab: GranularVocabulary,
    pub table: DecompositionTable,
}

/// Loads a checkpoint written by [`train`] together with its run directory.
pub fn load_model(checkpoint: &Path) -> Result<LoadedModel> {
    let dir = checkpoint.parent().unwrap_or(Path::new("."));
    let model = crate::model::load_checkpoint(checkpoint)?;
    let vocab = load_vocab_dir(dir)?;
    let table = DecompositionTable::load(open(&dir.join("table.tsv"))?)?;
    let sizes = [
        (model.dims.word_vocab, vocab.words.len()),
        (model.dims.char_vocab, vocab.characters.len()),
        (model.dims.radical_vocab, vocab.radicals.len()),
        (model.dims.target_vocab, vocab.target.len()),
    ];
    if sizes.iter().any(|(a, b)| a != b) {
        return Err(Error::Checkpoint(format!(
            "{} does not match the vocabularies in {}",
            checkpoint.display(),
            dir.display()
        )));
    }
    Ok(LoadedModel { model, vocab, table })
}
