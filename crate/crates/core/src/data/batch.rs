use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::vocab::{GranularVocabulary, EOS, PAD};
use super::SentencePair;
use crate::decomposition::DecompositionTable;
use crate::error::{Error, Result};

/// One source sentence as ids at every granularity. Position `j` of
/// `chars` and `radicals` holds the ids of the characters and radicals of
/// word `j`; each granularity falls back to UNK on its own.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedSource {
    pub words: Vec<u32>,
    pub chars: Vec<Vec<u32>>,
    pub radicals: Vec<Vec<u32>>,
}

impl EncodedSource {
    pub fn encode<S: AsRef<str>>(
        tokens: &[S],
        vocab: &GranularVocabulary,
        table: &DecompositionTable,
    ) -> Result<Self> {
        let mut out = EncodedSource {
            words: Vec::with_capacity(tokens.len()),
            chars: Vec::with_capacity(tokens.len()),
            radicals: Vec::with_capacity(tokens.len()),
        };
        for token in tokens {
            let token = token.as_ref();
            let d = table.decompose_word(token)?;
            out.words.push(vocab.words.id(token));
            out.chars
                .push(d.characters.iter().map(|&c| vocab.characters.char_id(c)).collect());
            out.radicals
                .push(d.radicals.iter().map(|&r| vocab.radicals.char_id(r)).collect());
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// A padded mini-batch. Target rows are the reference tokens followed by
/// EOS; padding uses [`PAD`] and is excluded by the masks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedBatch {
    pub source_words: Vec<Vec<u32>>,
    pub source_chars: Vec<Vec<Vec<u32>>>,
    pub source_radicals: Vec<Vec<Vec<u32>>>,
    pub source_mask: Vec<Vec<bool>>,
    pub source_lens: Vec<usize>,
    pub target: Vec<Vec<u32>>,
    pub target_mask: Vec<Vec<bool>>,
    pub target_lens: Vec<usize>,
}

impl EncodedBatch {
    /// Pads `sources` and `targets` (without EOS) into one batch.
    pub fn new(sources: &[EncodedSource], targets: &[Vec<u32>]) -> Result<Self> {
        if sources.len() != targets.len() || sources.is_empty() {
            return Err(Error::Input(format!(
                "batch needs matching non-empty sides, got {} sources and {} targets",
                sources.len(),
                targets.len()
            )));
        }
        if sources.iter().any(EncodedSource::is_empty) {
            return Err(Error::Input("empty source sentence in batch".into()));
        }
        let tx = sources.iter().map(EncodedSource::len).max().unwrap_or(0);
        let ty = targets.iter().map(|t| t.len() + 1).max().unwrap_or(0);
        let mut b = EncodedBatch {
            source_words: Vec::new(),
            source_chars: Vec::new(),
            source_radicals: Vec::new(),
            source_mask: Vec::new(),
            source_lens: Vec::new(),
            target: Vec::new(),
            target_mask: Vec::new(),
            target_lens: Vec::new(),
        };
        for (s, t) in sources.iter().zip(targets) {
            let n = s.len();
            let mut words = s.words.clone();
            words.resize(tx, PAD);
            let mut chars = s.chars.clone();
            chars.resize(tx, Vec::new());
            let mut radicals = s.radicals.clone();
            radicals.resize(tx, Vec::new());
            b.source_words.push(words);
            b.source_chars.push(chars);
            b.source_radicals.push(radicals);
            b.source_mask.push((0..tx).map(|j| j < n).collect());
            b.source_lens.push(n);

            let mut row = t.clone();
            row.push(EOS);
            let m = row.len();
            row.resize(ty, PAD);
            b.target.push(row);
            b.target_mask.push((0..ty).map(|j| j < m).collect());
            b.target_lens.push(m);
        }
        Ok(b)
    }

    pub fn len(&self) -> usize {
        self.source_words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source_words.is_empty()
    }

    pub fn source_len(&self) -> usize {
        self.source_words.first().map_or(0, Vec::len)
    }

    pub fn target_len(&self) -> usize {
        self.target.first().map_or(0, Vec::len)
    }

    /// Appends padding so the source has at least `src` and the target at
    /// least `tgt` positions.
    pub fn pad_to(&mut self, src: usize, tgt: usize) {
        for i in 0..self.len() {
            if self.source_words[i].len() < src {
                self.source_words[i].resize(src, PAD);
                self.source_chars[i].resize(src, Vec::new());
                self.source_radicals[i].resize(src, Vec::new());
                self.source_mask[i].resize(src, false);
            }
            if self.target[i].len() < tgt {
                self.target[i].resize(tgt, PAD);
                self.target_mask[i].resize(tgt, false);
            }
        }
    }

    /// Number of real target tokens, EOS included.
    pub fn target_tokens(&self) -> usize {
        self.target_lens.iter().sum()
    }
}

/// Splits `pairs` into batches of at most `batch_size`, in corpus order
/// unless a shuffle seed is given.
pub fn encode_batches(
    pairs: &[SentencePair],
    vocab: &GranularVocabulary,
    table: &DecompositionTable,
    batch_size: usize,
    shuffle_seed: Option<u64>,
) -> Result<Vec<EncodedBatch>> {
    if batch_size == 0 {
        return Err(Error::Input("batch size must be positive".into()));
    }
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    if let Some(seed) = shuffle_seed {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    order
        .chunks(batch_size)
        .map(|chunk| {
            let mut sources = Vec::with_capacity(chunk.len());
            let mut targets = Vec::with_capacity(chunk.len());
            for &i in chunk {
                sources.push(EncodedSource::encode(&pairs[i].source, vocab, table)?);
                targets.push(pairs[i].target.iter().map(|t| vocab.target.id(t)).collect());
            }
            EncodedBatch::new(&sources, &targets)
        })
        .collect()
}
