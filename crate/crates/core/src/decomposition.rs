//! Character decomposition tables.
//!
//! A table maps a single character to the ordered list of its immediate
//! components. Decomposition is one level deep: components are never
//! expanded further. Characters missing from the table decompose to
//! themselves, so every word has at least one radical per character.
//!
//! The on-disk format is one entry per line, the character and its
//! space-separated components separated by a single TAB:
//!
//! ```text
//! # version: fixture-1
//! 森	木 木 木
//! ```

use std::collections::HashMap;
use std::io::Read;

use crate::error::{Error, Result};

/// Immutable mapping from a character to its components.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DecompositionTable {
    entries: HashMap<char, Vec<char>>,
    version: String,
    duplicates: usize,
}

/// A word split into its characters and their concatenated components.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordDecomposition {
    pub word: String,
    pub characters: Vec<char>,
    pub radicals: Vec<char>,
}

impl WordDecomposition {
    /// Number of characters (`m`).
    pub fn m(&self) -> usize {
        self.characters.len()
    }

    /// Number of radicals (`n`).
    pub fn n(&self) -> usize {
        self.radicals.len()
    }
}

impl DecompositionTable {
    /// Parses a table from a UTF-8 stream. Later entries for the same key
    /// replace earlier ones; the number of replaced keys is kept in
    /// [`DecompositionTable::duplicates`].
    pub fn load(mut source: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        source
            .read_to_end(&mut bytes)
            .map_err(|e| Error::Input(format!("reading decomposition table: {e}")))?;
        let text = String::from_utf8(bytes).map_err(|e| {
            let line = 1 + e.as_bytes()[..e.utf8_error().valid_up_to()]
                .iter()
                .filter(|&&b| b == b'\n')
                .count();
            Error::parse(line, "invalid UTF-8")
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        if text.trim().is_empty() {
            return Err(Error::Input("empty decomposition table".into()));
        }
        let mut table = DecompositionTable {
            version: "unversioned".to_string(),
            ..Default::default()
        };
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.strip_suffix('\r').unwrap_or(raw);
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(v) = comment.trim().strip_prefix("version:") {
                    table.version = v.trim().to_string();
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 2 {
                return Err(Error::parse(
                    line_no,
                    format!("expected 2 tab-separated fields, found {}", fields.len()),
                ));
            }
            let mut key = fields[0].chars();
            let ch = match (key.next(), key.next()) {
                (Some(c), None) => c,
                _ => {
                    return Err(Error::parse(
                        line_no,
                        format!("key {:?} is not a single character", fields[0]),
                    ))
                }
            };
            // multi-scalar components are split into single characters
            let components: Vec<char> = fields[1]
                .split(' ')
                .flat_map(|part| part.chars())
                .collect();
            if components.is_empty() {
                return Err(Error::parse(line_no, "empty component list"));
            }
            if table.entries.insert(ch, components).is_some() {
                table.duplicates += 1;
            }
        }
        if table.entries.is_empty() {
            return Err(Error::Input("decomposition table has no entries".into()));
        }
        Ok(table)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    /// Number of keys that appeared more than once while loading.
    pub fn duplicates(&self) -> usize {
        self.duplicates
    }

    pub fn get(&self, c: char) -> Option<&[char]> {
        self.entries.get(&c).map(Vec::as_slice)
    }

    /// Components of `c`, or `[c]` when the table has no entry for it.
    pub fn decompose_char(&self, c: char) -> Vec<char> {
        match self.entries.get(&c) {
            Some(parts) => parts.clone(),
            None => vec![c],
        }
    }

    pub fn decompose_word(&self, word: &str) -> Result<WordDecomposition> {
        if word.is_empty() {
            return Err(Error::Input("cannot decompose an empty word".into()));
        }
        let characters: Vec<char> = word.chars().collect();
        let radicals = characters
            .iter()
            .flat_map(|&c| self.decompose_char(c))
            .collect();
        Ok(WordDecomposition {
            word: word.to_string(),
            characters,
            radicals,
        })
    }

    /// Serializes the table back to its text format, entries sorted by key.
    pub fn to_text(&self) -> String {
        let mut keys: Vec<&char> = self.entries.keys().collect();
        keys.sort();
        let mut out = format!("# version: {}\n", self.version);
        for k in keys {
            let parts: Vec<String> = self.entries[k].iter().map(|c| c.to_string()).collect();
            out.push_str(&format!("{k}\t{}\n", parts.join(" ")));
        }
        out
    }
}
