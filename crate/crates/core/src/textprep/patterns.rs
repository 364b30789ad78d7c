use regex::Regex;

use crate::error::{Error, Result};

/// The identifier pattern table shipped with the crate.
pub const DEFAULT_PATTERNS: &str = include_str!("../../patterns/id_patterns.txt");

#[derive(Clone, Debug)]
pub struct PatternRule {
    pub token: String,
    pub regex: Regex,
}

/// Ordered identifier substitution rules.
#[derive(Clone, Debug)]
pub struct PatternTable {
    pub version: u32,
    pub rules: Vec<PatternRule>,
}

impl PatternTable {
    pub fn parse(text: &str) -> Result<Self> {
        let mut version = None;
        let mut rules = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim_end();
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            if let Some(v) = line.strip_prefix("version ") {
                version = Some(
                    v.trim()
                        .parse()
                        .map_err(|_| Error::Config(format!("pattern line {}: bad version", n + 1)))?,
                );
                continue;
            }
            let (token, pattern) = line
                .split_once('\t')
                .ok_or_else(|| Error::Config(format!("pattern line {}: expected <token>\\t<regex>", n + 1)))?;
            let regex = Regex::new(pattern.trim())
                .map_err(|e| Error::Config(format!("pattern line {}: {e}", n + 1)))?;
            rules.push(PatternRule {
                token: token.trim().to_string(),
                regex,
            });
        }
        let version = version.ok_or_else(|| Error::Config("pattern table has no version line".into()))?;
        Ok(PatternTable { version, rules })
    }

    pub fn builtin() -> &'static PatternTable {
        static TABLE: std::sync::OnceLock<PatternTable> = std::sync::OnceLock::new();
        TABLE.get_or_init(|| PatternTable::parse(DEFAULT_PATTERNS).expect("builtin pattern table parses"))
    }
}
