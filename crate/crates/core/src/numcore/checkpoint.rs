//! Plain-text parameter checkpoints.
//!
//! ```text
//! outagecast-checkpoint 1
//! seed <u64>
//! config-hash <hex>
//! meta <key> <value ...>           zero or more
//! param <name> <rows> <cols>
//! <rows*cols values, row-major, space separated>
//! ...
//! end
//! ```
//!
//! Values are written with Rust's shortest round-trip float formatting, so a
//! save/load cycle reproduces every parameter bit for bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{ParamSet, Tensor};
use crate::error::{Error, Result};

const MAGIC: &str = "outagecast-checkpoint 1";

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub seed: u64,
    pub config_hash: String,
    pub meta: BTreeMap<String, String>,
    pub params: ParamSet,
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{MAGIC}").unwrap();
        writeln!(s, "seed {}", self.seed).unwrap();
        writeln!(s, "config-hash {}", self.config_hash).unwrap();
        for (k, v) in &self.meta {
            writeln!(s, "meta {k} {v}").unwrap();
        }
        for id in self.params.ids() {
            let t = self.params.value(id);
            writeln!(s, "param {} {} {}", self.params.name(id), t.rows(), t.cols()).unwrap();
            let values: Vec<String> = t.data().iter().map(|x| format!("{x:?}")).collect();
            writeln!(s, "{}", values.join(" ")).unwrap();
        }
        writeln!(s, "end").unwrap();
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |line: usize, why: &str| Error::Checkpoint(format!("line {}: {why}", line + 1));
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, l)) if l.trim() == MAGIC => {}
            _ => return Err(bad(0, "missing checkpoint header")),
        }
        let mut seed = None;
        let mut config_hash = None;
        let mut meta = BTreeMap::new();
        let mut params = ParamSet::new(0);
        let mut ended = false;
        while let Some((n, line)) = lines.next() {
            let mut parts = line.splitn(2, ' ');
            let key = parts.next().unwrap_or("");
            let rest = parts.next().unwrap_or("").trim();
            match key {
                "seed" => seed = Some(rest.parse::<u64>().map_err(|_| bad(n, "bad seed"))?),
                "config-hash" => config_hash = Some(rest.to_string()),
                "meta" => {
                    let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
                    meta.insert(k.to_string(), v.to_string());
                }
                "param" => {
                    let fields: Vec<&str> = rest.split_whitespace().collect();
                    if fields.len() != 3 {
                        return Err(bad(n, "param header needs name rows cols"));
                    }
                    let rows: usize = fields[1].parse().map_err(|_| bad(n, "bad rows"))?;
                    let cols: usize = fields[2].parse().map_err(|_| bad(n, "bad cols"))?;
                    let (m, data_line) = lines.next().ok_or_else(|| bad(n, "missing data line"))?;
                    let data = data_line
                        .split_whitespace()
                        .map(|v| v.parse::<f64>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|_| bad(m, "bad value"))?;
                    let t = Tensor::from_vec(rows, cols, data).map_err(|_| bad(m, "wrong value count"))?;
                    params.insert(fields[0], t)?;
                }
                "end" => {
                    ended = true;
                    break;
                }
                "" => {}
                other => return Err(bad(n, &format!("unknown record `{other}`"))),
            }
        }
        if !ended {
            return Err(Error::Checkpoint("truncated checkpoint (no `end`)".into()));
        }
        let seed = seed.ok_or_else(|| Error::Checkpoint("missing seed".into()))?;
        let mut restored = ParamSet::new(seed);
        for id in params.ids() {
            restored.insert(params.name(id), params.value(id).clone())?;
        }
        Ok(Checkpoint {
            seed,
            config_hash: config_hash.ok_or_else(|| Error::Checkpoint("missing config-hash".into()))?,
            meta,
            params: restored,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io_util::write_atomic(path, self.to_text().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Checkpoint(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }
}
