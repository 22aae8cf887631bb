use std::collections::HashMap;
use std::fmt;

use crate::data::SentencePair;
use crate::decomposition::DecompositionTable;
use crate::error::{Error, Result};

pub const PAD: u32 = 0;
pub const UNK: u32 = 1;
pub const BOS: u32 = 2;
pub const EOS: u32 = 3;

/// Surface forms of the reserved ids, in id order.
pub const SPECIALS: [&str; 4] = ["<pad>", "UNK", "<s>", "</s>"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Granularity {
    Word,
    Character,
    Radical,
    Target,
}

impl Granularity {
    pub const ALL: [Granularity; 4] = [
        Granularity::Word,
        Granularity::Character,
        Granularity::Radical,
        Granularity::Target,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Granularity::Word => "word",
            Granularity::Character => "char",
            Granularity::Radical => "radical",
            Granularity::Target => "target",
        }
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A frequency-ranked id space. Ids `0..4` are the specials.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    freqs: Vec<u64>,
    index: HashMap<String, u32>,
}

impl Vocab {
    /// Keeps the `max_size - SPECIALS.len()` most frequent items; ties go
    /// to the lower codepoint sequence.
    pub fn from_counts(counts: HashMap<String, u64>, max_size: usize) -> Self {
        let mut items: Vec<(String, u64)> = counts
            .into_iter()
            .filter(|(t, _)| !SPECIALS.contains(&t.as_str()))
            .collect();
        items.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        items.truncate(max_size.saturating_sub(SPECIALS.len()));
        let mut tokens: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        let mut freqs = vec![0; SPECIALS.len()];
        for (t, f) in items {
            tokens.push(t);
            freqs.push(f);
        }
        Self::from_parts(tokens, freqs)
    }

    fn from_parts(tokens: Vec<String>, freqs: Vec<u64>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocab {
            tokens,
            freqs,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    /// Id of `token`, or [`UNK`] when it is out of vocabulary.
    pub fn id(&self, token: &str) -> u32 {
        self.get(token).unwrap_or(UNK)
    }

    pub fn char_id(&self, c: char) -> u32 {
        let mut buf = [0u8; 4];
        self.id(c.encode_utf8(&mut buf))
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn frequency(&self, id: u32) -> Option<u64> {
        self.freqs.get(id as usize).copied()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// `<token>\t<frequency>` per line, in id order.
    pub fn to_text(&self) -> String {
        self.tokens
            .iter()
            .zip(&self.freqs)
            .map(|(t, f)| format!("{t}\t{f}\n"))
            .collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut tokens = Vec::new();
        let mut freqs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let (t, f) = line
                .rsplit_once('\t')
                .ok_or_else(|| Error::parse(i + 1, "expected <token>\\t<frequency>"))?;
            let f = f
                .parse()
                .map_err(|_| Error::parse(i + 1, format!("bad frequency {f:?}")))?;
            tokens.push(t.to_string());
            freqs.push(f);
        }
        if tokens.len() < SPECIALS.len()
            || tokens.iter().zip(SPECIALS).any(|(t, s)| t != s)
        {
            return Err(Error::Input("vocabulary does not start with the special tokens".into()));
        }
        Ok(Self::from_parts(tokens, freqs))
    }
}

/// Size limits for the four id spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VocabSizes {
    pub word: usize,
    pub character: usize,
    pub radical: usize,
    pub target: usize,
}

impl Default for VocabSizes {
    fn default() -> Self {
        VocabSizes {
            word: 30_000,
            character: 2_500,
            radical: 1_000,
            target: 30_000,
        }
    }
}

/// Source vocabularies at three granularities plus the target word vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GranularVocabulary {
    pub words: Vocab,
    pub characters: Vocab,
    pub radicals: Vocab,
    pub target: Vocab,
}

impl GranularVocabulary {
    pub fn build(
        pairs: &[SentencePair],
        table: &DecompositionTable,
        sizes: VocabSizes,
    ) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::Input("cannot build vocabularies from an empty corpus".into()));
        }
        let n = SPECIALS.len();
        if sizes.word < n || sizes.character < n || sizes.radical < n || sizes.target < n {
            return Err(Error::Input(format!(
                "vocabulary sizes must be at least {n} (the number of special tokens)"
            )));
        }
        let mut words: HashMap<String, u64> = HashMap::new();
        let mut chars: HashMap<String, u64> = HashMap::new();
        let mut radicals: HashMap<String, u64> = HashMap::new();
        let mut target: HashMap<String, u64> = HashMap::new();
        for pair in pairs {
            for token in &pair.source {
                *words.entry(token.clone()).or_default() += 1;
                let d = table.decompose_word(token)?;
                for c in d.characters {
                    *chars.entry(c.to_string()).or_default() += 1;
                }
                for r in d.radicals {
                    *radicals.entry(r.to_string()).or_default() += 1;
                }
            }
            for token in &pair.target {
                *target.entry(token.clone()).or_default() += 1;
            }
        }
        Ok(GranularVocabulary {
            words: Vocab::from_counts(words, sizes.word),
            characters: Vocab::from_counts(chars, sizes.character),
            radicals: Vocab::from_counts(radicals, sizes.radical),
            target: Vocab::from_counts(target, sizes.target),
        })
    }

    pub fn get(&self, g: Granularity) -> &Vocab {
        match g {
            Granularity::Word => &self.words,
            Granularity::Character => &self.characters,
            Granularity::Radical => &self.radicals,
            Granularity::Target => &self.target,
        }
    }

    /// Fraction of token occurrences covered by each vocabulary.
    pub fn coverage(&self, pairs: &[SentencePair], table: &DecompositionTable) -> Coverage {
        let mut hits = [0u64; 4];
        let mut totals = [0u64; 4];
        let mut count = |slot: usize, known: bool| {
            totals[slot] += 1;
            hits[slot] += known as u64;
        };
        for pair in pairs {
            for token in &pair.source {
                count(0, self.words.get(token).is_some());
                for c in token.chars() {
                    count(1, self.characters.char_id(c) != UNK);
                    for r in table.decompose_char(c) {
                        count(2, self.radicals.char_id(r) != UNK);
                    }
                }
            }
            for token in &pair.target {
                count(3, self.target.get(token).is_some());
            }
        }
        let frac = |i: usize| {
            if totals[i] == 0 {
                1.0
            } else {
                hits[i] as f64 / totals[i] as f64
            }
        };
        Coverage {
            word: frac(0),
            character: frac(1),
            radical: frac(2),
            target: frac(3),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coverage {
    pub word: f64,
    pub character: f64,
    pub radical: f64,
    pub target: f64,
}
