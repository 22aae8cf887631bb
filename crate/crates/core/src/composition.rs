//! Multi-granularity input vectors.
//!
//! Each source position is a segmented word. Its input vector is the
//! concatenation, in the order word, character, radical, of the parts that
//! the [`CompositionSetting`] activates:
//!
//! * the word part is the word's embedding row;
//! * the character part is the sum of the rows of the word's characters;
//! * the radical part is the sum of the rows of all radicals of those
//!   characters.
//!
//! Sums are order-free, so a word's character and radical parts are fixed
//! width no matter how many characters or radicals it has.

use std::fmt;
use std::str::FromStr;

use ndarray::{s, Array1, Array2, Array3, ArrayView1};
use rand::Rng;

use crate::data::EncodedBatch;
use crate::error::{Error, Result};
use crate::real::Real;

/// Which sub-embeddings make up the encoder input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CompositionSetting {
    /// Words only (the baseline).
    W,
    /// Word + character + radical.
    WCR,
    /// Word + character.
    WC,
    /// Word + radical.
    WR,
    /// Character + radical, still at word positions.
    CR,
}

impl CompositionSetting {
    /// All settings in the order they are reported.
    pub const ALL: [CompositionSetting; 5] = [
        CompositionSetting::W,
        CompositionSetting::WCR,
        CompositionSetting::WC,
        CompositionSetting::WR,
        CompositionSetting::CR,
    ];

    pub fn uses_word(self) -> bool {
        !matches!(self, CompositionSetting::CR)
    }

    pub fn uses_char(self) -> bool {
        matches!(
            self,
            CompositionSetting::WCR | CompositionSetting::WC | CompositionSetting::CR
        )
    }

    pub fn uses_radical(self) -> bool {
        matches!(
            self,
            CompositionSetting::WCR | CompositionSetting::WR | CompositionSetting::CR
        )
    }

    pub fn active_parts(self) -> usize {
        self.uses_word() as usize + self.uses_char() as usize + self.uses_radical() as usize
    }

    pub fn abbreviation(self) -> &'static str {
        match self {
            CompositionSetting::W => "W",
            CompositionSetting::WCR => "W+C+R",
            CompositionSetting::WC => "W+C",
            CompositionSetting::WR => "W+R",
            CompositionSetting::CR => "C+R",
        }
    }

    /// Lower-case name without punctuation, usable in file names.
    pub fn slug(self) -> &'static str {
        match self {
            CompositionSetting::W => "w",
            CompositionSetting::WCR => "wcr",
            CompositionSetting::WC => "wc",
            CompositionSetting::WR => "wr",
            CompositionSetting::CR => "cr",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            CompositionSetting::W => 0,
            CompositionSetting::WCR => 1,
            CompositionSetting::WC => 2,
            CompositionSetting::WR => 3,
            CompositionSetting::CR => 4,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }
}

impl fmt::Display for CompositionSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.abbreviation())
    }
}

impl FromStr for CompositionSetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('+', "");
        Self::ALL
            .into_iter()
            .find(|c| c.slug() == key)
            .ok_or_else(|| Error::Config(format!("unknown composition setting {s:?}")))
    }
}

/// Width of a composed input vector.
pub fn input_dim(setting: CompositionSetting, d: usize) -> usize {
    d * setting.active_parts()
}

/// Source-side embedding tables. All three share the width `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTables<T> {
    pub word: Array2<T>,
    pub character: Array2<T>,
    pub radical: Array2<T>,
}

impl<T: Real> EmbeddingTables<T> {
    pub fn zeros(sizes: (usize, usize, usize), d: usize) -> Self {
        EmbeddingTables {
            word: Array2::zeros((sizes.0, d)),
            character: Array2::zeros((sizes.1, d)),
            radical: Array2::zeros((sizes.2, d)),
        }
    }

    /// Entries drawn uniformly from [-0.08, 0.08].
    pub fn uniform(sizes: (usize, usize, usize), d: usize, rng: &mut impl Rng) -> Self {
        let mut t = Self::zeros(sizes, d);
        for table in [&mut t.word, &mut t.character, &mut t.radical] {
            table.mapv_inplace(|_| T::lit(rng.random_range(-0.08..=0.08)));
        }
        t
    }

    pub fn d(&self) -> usize {
        self.word.ncols()
    }
}

/// A composed encoder input for one token.
#[derive(Debug, Clone, PartialEq)]
pub struct InputVector<T>(pub Array1<T>);

impl<T> InputVector<T> {
    pub fn width(&self) -> usize {
        self.0.len()
    }
}

fn row<'a, T>(table: &'a Array2<T>, id: u32, what: &'static str) -> Result<ArrayView1<'a, T>> {
    let i = id as usize;
    if i >= table.nrows() {
        return Err(Error::OutOfBounds {
            what,
            index: i,
            size: table.nrows(),
        });
    }
    Ok(table.row(i))
}

fn sum_rows<T: Real>(
    table: &Array2<T>,
    ids: &[u32],
    what: &'static str,
    mut out: ndarray::ArrayViewMut1<T>,
) -> Result<()> {
    for &id in ids {
        out += &row(table, id, what)?;
    }
    Ok(())
}

fn write_token<T: Real>(
    setting: CompositionSetting,
    word_id: u32,
    char_ids: &[u32],
    radical_ids: &[u32],
    tables: &EmbeddingTables<T>,
    mut out: ndarray::ArrayViewMut1<T>,
) -> Result<()> {
    let d = tables.d();
    let mut offset = 0;
    if setting.uses_word() {
        out.slice_mut(s![offset..offset + d])
            .assign(&row(&tables.word, word_id, "word table")?);
        offset += d;
    }
    if setting.uses_char() {
        sum_rows(&tables.character, char_ids, "character table", out.slice_mut(s![offset..offset + d]))?;
        offset += d;
    }
    if setting.uses_radical() {
        sum_rows(&tables.radical, radical_ids, "radical table", out.slice_mut(s![offset..offset + d]))?;
    }
    Ok(())
}

/// Builds the input vector of one word from its ids.
pub fn compose_token<T: Real>(
    setting: CompositionSetting,
    word_id: u32,
    char_ids: &[u32],
    radical_ids: &[u32],
    tables: &EmbeddingTables<T>,
) -> Result<InputVector<T>> {
    let mut out = Array1::zeros(input_dim(setting, tables.d()));
    write_token(setting, word_id, char_ids, radical_ids, tables, out.view_mut())?;
    Ok(InputVector(out))
}

/// Composed inputs of a batch, `(batch, position, width)`, with a 0/1 mask
/// of shape `(batch, position)`. Padding positions are zero vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ComposedBatch<T> {
    pub inputs: Array3<T>,
    pub mask: Array2<T>,
}

impl<T: Real> ComposedBatch<T> {
    pub fn width(&self) -> usize {
        self.inputs.dim().2
    }

    /// The composed vector at one position.
    pub fn token(&self, b: usize, j: usize) -> InputVector<T> {
        InputVector(self.inputs.slice(s![b, j, ..]).to_owned())
    }
}

pub fn compose_batch<T: Real>(
    setting: CompositionSetting,
    batch: &EncodedBatch,
    tables: &EmbeddingTables<T>,
) -> Result<ComposedBatch<T>> {
    let (nb, tx) = (batch.len(), batch.source_len());
    let mut inputs = Array3::zeros((nb, tx, input_dim(setting, tables.d())));
    let mut mask = Array2::zeros((nb, tx));
    for b in 0..nb {
        for j in 0..tx {
            if !batch.source_mask[b][j] {
                continue;
            }
            mask[[b, j]] = T::one();
            write_token(
                setting,
                batch.source_words[b][j],
                &batch.source_chars[b][j],
                &batch.source_radicals[b][j],
                tables,
                inputs.slice_mut(s![b, j, ..]),
            )?;
        }
    }
    Ok(ComposedBatch { inputs, mask })
}

/// Scatters gradients of the composed inputs back onto the table rows.
pub(crate) fn backprop_batch<T: Real>(
    setting: CompositionSetting,
    batch: &EncodedBatch,
    d_inputs: &Array3<T>,
    grads: &mut EmbeddingTables<T>,
) {
    let d = grads.d();
    for b in 0..batch.len() {
        for j in 0..batch.source_len() {
            if !batch.source_mask[b][j] {
                continue;
            }
            let g = d_inputs.slice(s![b, j, ..]);
            let mut offset = 0;
            if setting.uses_word() {
                let mut r = grads.word.row_mut(batch.source_words[b][j] as usize);
                r += &g.slice(s![offset..offset + d]);
                offset += d;
            }
            if setting.uses_char() {
                for &c in &batch.source_chars[b][j] {
                    let mut r = grads.character.row_mut(c as usize);
                    r += &g.slice(s![offset..offset + d]);
                }
                offset += d;
            }
            if setting.uses_radical() {
                for &rad in &batch.source_radicals[b][j] {
                    let mut r = grads.radical.row_mut(rad as usize);
                    r += &g.slice(s![offset..offset + d]);
                }
            }
        }
    }
}
