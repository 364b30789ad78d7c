//! Repair-log text: normalization, identifier substitution, vocabulary and encoding.

mod patterns;
mod vocab;

pub use patterns::{PatternRule, PatternTable, DEFAULT_PATTERNS};
pub use vocab::{build_vocab, Vocab, SPECIALS};

use crate::error::{Error, Result};

pub const UNK: &str = "<unk>";
pub const TP: &str = "<tp>";
pub const CL: &str = "<cl>";
pub const FEEDER: &str = "<feeder>";
pub const POLE: &str = "<pole>";
pub const NUM: &str = "<num>";
pub const ADDR: &str = "<addr>";
pub const END: &str = "<end>";

/// Characters removed before tokenization. Hyphens and slashes are kept.
pub const STRIPPED_PUNCTUATION: &[char] = &['.', ',', '!', '?', ';', ':', '"', '\'', '(', ')', '@', '#'];

/// A normalized token and the byte offset in the raw text where it starts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub offset: usize,
}

/// Encoded log: vocabulary indices plus raw-text byte offsets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenSeq {
    pub ids: Vec<usize>,
    pub offsets: Vec<usize>,
}

impl TokenSeq {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Normalize raw log text into tokens using the builtin pattern table.
pub fn normalize(raw: &str) -> Vec<String> {
    normalize_spans(raw, PatternTable::builtin())
        .into_iter()
        .map(|t| t.text)
        .collect()
}

/// Like [`normalize`] for arbitrary bytes; invalid UTF-8 becomes U+FFFD.
pub fn normalize_bytes(raw: &[u8]) -> Vec<String> {
    normalize(&String::from_utf8_lossy(raw))
}

/// Normalize with an explicit pattern table, keeping raw-text offsets.
pub fn normalize_spans(raw: &str, table: &PatternTable) -> Vec<Token> {
    // lowercase and strip punctuation, remembering where each output byte came from
    let mut text = String::with_capacity(raw.len());
    let mut origin: Vec<usize> = Vec::with_capacity(raw.len());
    for (pos, ch) in raw.char_indices() {
        if STRIPPED_PUNCTUATION.contains(&ch) {
            continue;
        }
        for lc in ch.to_lowercase() {
            let before = text.len();
            text.push(lc);
            origin.extend(std::iter::repeat(pos).take(text.len() - before));
        }
    }
    origin.push(raw.len());

    let mut claims: Vec<(usize, usize, &str)> = Vec::new();
    let mut masked = text.clone();
    for rule in &table.rules {
        let found: Vec<(usize, usize)> = rule.regex.find_iter(&masked).map(|m| (m.start(), m.end())).collect();
        for (s, e) in found {
            if s == e {
                continue;
            }
            claims.push((s, e, rule.token.as_str()));
            // matches cover whole chars, so an ASCII fill keeps the string valid
            let fill = "\u{1}".repeat(e - s);
            masked.replace_range(s..e, &fill);
        }
    }
    claims.sort_by_key(|c| c.0);

    let mut out = Vec::new();
    let mut cursor = 0;
    let push_plain = |segment_start: usize, segment: &str, out: &mut Vec<Token>| {
        let mut idx = 0;
        for word in segment.split_whitespace() {
            let rel = segment[idx..].find(word).unwrap() + idx;
            idx = rel + word.len();
            let text = if word.bytes().all(|b| b.is_ascii_digit()) {
                NUM.to_string()
            } else {
                word.to_string()
            };
            out.push(Token {
                text,
                offset: origin[segment_start + rel],
            });
        }
    };
    for (s, e, token) in claims {
        push_plain(cursor, &text[cursor..s], &mut out);
        out.push(Token {
            text: token.to_string(),
            offset: origin[s],
        });
        cursor = e;
    }
    push_plain(cursor, &text[cursor..], &mut out);
    out
}

/// Map tokens to vocabulary indices. Unknown tokens become `<unk>`; an empty
/// list becomes a single `<unk>`.
pub fn encode(tokens: &[String], vocab: &Vocab) -> TokenSeq {
    if tokens.is_empty() {
        return TokenSeq {
            ids: vec![vocab.unk()],
            offsets: vec![0],
        };
    }
    TokenSeq {
        ids: tokens.iter().map(|t| vocab.index_or_unk(t)).collect(),
        offsets: (0..tokens.len()).collect(),
    }
}

/// Encode tokens that carry raw-text offsets.
pub fn encode_spans(tokens: &[Token], vocab: &Vocab) -> TokenSeq {
    if tokens.is_empty() {
        return TokenSeq {
            ids: vec![vocab.unk()],
            offsets: vec![0],
        };
    }
    TokenSeq {
        ids: tokens.iter().map(|t| vocab.index_or_unk(&t.text)).collect(),
        offsets: tokens.iter().map(|t| t.offset).collect(),
    }
}

pub fn decode(seq: &TokenSeq, vocab: &Vocab) -> Result<Vec<String>> {
    seq.ids
        .iter()
        .map(|&i| {
            vocab
                .token(i)
                .map(str::to_string)
                .ok_or_else(|| Error::invalid(format!("token index {i} outside vocabulary of {}", vocab.len())))
        })
        .collect()
}

/// Tokens fed to the encoder for one raw log: normalized text, `<unk>` if
/// nothing survived, then `<end>`.
pub fn log_tokens(raw: &str) -> Vec<Token> {
    let mut tokens = normalize_spans(raw, PatternTable::builtin());
    if tokens.is_empty() {
        tokens.push(Token {
            text: UNK.to_string(),
            offset: 0,
        });
    }
    tokens.push(Token {
        text: END.to_string(),
        offset: raw.len(),
    });
    tokens
}

/// Normalize, terminate and encode one raw log.
pub fn prepare_log(raw: &str, vocab: &Vocab) -> TokenSeq {
    encode_spans(&log_tokens(raw), vocab)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn case_and_punctuation() {
        assert_eq!(normalize("Lights OUT."), s(&["lights", "out"]));
        assert!(normalize("").is_empty());
        assert!(normalize("  \t ").is_empty());
    }

    #[test]
    fn identifier_patterns() {
        assert_eq!(
            normalize("TP 231 @ S/s of S Cherry St"),
            s(&["<tp>", "s/s", "of", "<addr>"])
        );
        assert_eq!(normalize("cl#1234 closed"), s(&["<cl>", "closed"]));
        assert_eq!(normalize("Fdr 2731 tripped"), s(&["<feeder>", "tripped"]));
        assert_eq!(normalize("replaced P-603 xarm"), s(&["replaced", "<pole>", "xarm"]));
        assert_eq!(normalize("1520 N Main Ave, 3 spans"), s(&["<addr>", "<num>", "spans"]));
        assert_eq!(normalize("26kv fuse 12"), s(&["26kv", "fuse", "<num>"]));
    }

    #[test]
    fn offsets_point_into_raw_text() {
        let raw = "Crew @ TP 231, fuse";
        let toks = normalize_spans(raw, PatternTable::builtin());
        let starts: Vec<&str> = toks.iter().map(|t| &raw[t.offset..t.offset + 2]).collect();
        assert_eq!(starts, vec!["Cr", "TP", "fu"]);
    }

    #[test]
    fn invalid_utf8_is_replaced() {
        let toks = normalize_bytes(b"fuse \xff\xfe blown");
        assert_eq!(toks.len(), 3);
        assert_eq!(toks[2], "blown");
    }

    #[test]
    fn builtin_table_is_versioned() {
        let t = PatternTable::builtin();
        assert_eq!(t.version, 1);
        assert_eq!(t.rules.len(), 5);
        assert!(PatternTable::parse("<x>\tfoo").is_err());
        assert!(PatternTable::parse("version 1\n<x> foo").is_err());
        assert!(PatternTable::parse("version 1\n<x>\t(").is_err());
    }
}
