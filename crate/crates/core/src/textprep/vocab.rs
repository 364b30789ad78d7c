use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io_util::write_atomic;

use super::{ADDR, CL, END, FEEDER, NUM, POLE, TP, UNK};

/// Special tokens, always present at indices `0..SPECIALS.len()`.
pub const SPECIALS: [&str; 8] = [UNK, TP, CL, FEEDER, POLE, NUM, ADDR, END];

#[derive(Clone, Debug, PartialEq)]
pub struct Vocab {
    tokens: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
    cutoff: u64,
}

/// Keep every token whose corpus count exceeds `cutoff`.
///
/// Specials come first in fixed order; the rest are sorted by descending
/// count, ties broken lexicographically.
pub fn build_vocab<S: AsRef<str>>(corpus: &[Vec<S>], cutoff: u64) -> Result<Vocab> {
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for seq in corpus {
        for tok in seq {
            *counts.entry(tok.as_ref()).or_insert(0) += 1;
        }
    }
    if counts.is_empty() {
        return Err(Error::invalid("cannot build a vocabulary from an empty corpus"));
    }
    let mut kept: Vec<(&str, u64)> = counts
        .iter()
        .filter(|(t, &c)| c > cutoff && !SPECIALS.contains(t))
        .map(|(t, &c)| (*t, c))
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let entries = SPECIALS
        .iter()
        .map(|s| (s.to_string(), counts.get(s).copied().unwrap_or(0)))
        .chain(kept.into_iter().map(|(t, c)| (t.to_string(), c)));
    Vocab::from_entries(entries, cutoff)
}

impl Vocab {
    fn from_entries(entries: impl IntoIterator<Item = (String, u64)>, cutoff: u64) -> Result<Self> {
        let mut tokens = Vec::new();
        let mut counts = Vec::new();
        let mut index = HashMap::new();
        for (tok, count) in entries {
            if index.insert(tok.clone(), tokens.len()).is_some() {
                return Err(Error::Data(format!("duplicate vocabulary token {tok:?}")));
            }
            tokens.push(tok);
            counts.push(count);
        }
        for (i, s) in SPECIALS.iter().enumerate() {
            if index.get(*s) != Some(&i) {
                return Err(Error::Data(format!("special token {s} must be at index {i}")));
            }
        }
        Ok(Vocab {
            tokens,
            counts,
            index,
            cutoff,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn cutoff(&self) -> u64 {
        self.cutoff
    }

    pub fn unk(&self) -> usize {
        0
    }

    pub fn index(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn index_or_unk(&self, token: &str) -> usize {
        self.index(token).unwrap_or(0)
    }

    pub fn token(&self, i: usize) -> Option<&str> {
        self.tokens.get(i).map(String::as_str)
    }

    pub fn count(&self, i: usize) -> Option<u64> {
        self.counts.get(i).copied()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// `# cutoff <n>` followed by `token<TAB>count` lines in index order.
    pub fn to_text(&self) -> String {
        let mut out = format!("# cutoff {}\n", self.cutoff);
        for (t, c) in self.tokens.iter().zip(&self.counts) {
            out.push_str(&format!("{t}\t{c}\n"));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let cutoff = lines
            .next()
            .and_then(|l| l.strip_prefix("# cutoff "))
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| Error::Data("vocabulary file must start with '# cutoff <n>'".into()))?;
        let mut entries = Vec::new();
        for (n, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let (tok, count) = line
                .rsplit_once('\t')
                .ok_or_else(|| Error::Data(format!("vocabulary line {}: expected token<TAB>count", n + 2)))?;
            let count = count
                .parse()
                .map_err(|_| Error::Data(format!("vocabulary line {}: bad count {count:?}", n + 2)))?;
            entries.push((tok.to_string(), count));
        }
        Vocab::from_entries(entries, cutoff)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_text().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Vocab::parse(&std::fs::read_to_string(path)?)
    }
}
