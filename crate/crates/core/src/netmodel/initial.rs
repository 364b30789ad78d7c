use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::gammadist::GammaParams;
use crate::numcore::{Graph, Init, ParamId, ParamSet, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InitialConfig {
    pub input_dim: usize,
    pub h1: usize,
    pub h2: usize,
}

impl InitialConfig {
    pub fn new(input_dim: usize) -> Self {
        InitialConfig {
            input_dim,
            h1: 32,
            h2: 32,
        }
    }

    pub fn to_meta(&self) -> BTreeMap<String, String> {
        BTreeMap::from([
            ("model".into(), "initial".into()),
            ("input_dim".into(), self.input_dim.to_string()),
            ("h1".into(), self.h1.to_string()),
            ("h2".into(), self.h2.to_string()),
        ])
    }

    pub fn from_meta(meta: &BTreeMap<String, String>) -> Result<Self> {
        if meta.get("model").map(String::as_str) != Some("initial") {
            return Err(Error::Checkpoint("not an initial-predictor checkpoint".into()));
        }
        Ok(InitialConfig {
            input_dim: meta_usize(meta, "input_dim")?,
            h1: meta_usize(meta, "h1")?,
            h2: meta_usize(meta, "h2")?,
        })
    }
}

pub(crate) fn meta_usize(meta: &BTreeMap<String, String>, key: &str) -> Result<usize> {
    meta.get(key)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Checkpoint(format!("checkpoint metadata lacks {key}")))
}

/// Two ReLU layers followed by softplus heads for `k` and `theta`.
#[derive(Clone, Debug)]
pub struct InitialPredictor {
    pub config: InitialConfig,
    pub params: ParamSet,
    w1: ParamId,
    b1: ParamId,
    w2: ParamId,
    b2: ParamId,
    wk: ParamId,
    bk: ParamId,
    wt: ParamId,
    bt: ParamId,
}

impl InitialPredictor {
    pub fn new(config: InitialConfig, seed: u64) -> Result<Self> {
        let mut p = ParamSet::new(seed);
        let InitialConfig { input_dim, h1, h2 } = config;
        Ok(InitialPredictor {
            config,
            w1: p.add("init.w1", input_dim, h1, Init::Xavier)?,
            b1: p.add("init.b1", 1, h1, Init::Zeros)?,
            w2: p.add("init.w2", h1, h2, Init::Xavier)?,
            b2: p.add("init.b2", 1, h2, Init::Zeros)?,
            wk: p.add("init.w_k", h2, 1, Init::Xavier)?,
            bk: p.add("init.b_k", 1, 1, Init::Zeros)?,
            wt: p.add("init.w_theta", h2, 1, Init::Xavier)?,
            bt: p.add("init.b_theta", 1, 1, Init::Zeros)?,
            params: p,
        })
    }

    /// Rebuild from saved parameters, checking names and shapes.
    pub fn from_params(config: InitialConfig, saved: &ParamSet) -> Result<Self> {
        let mut model = InitialPredictor::new(config, saved.seed())?;
        copy_params(&mut model.params, saved)?;
        Ok(model)
    }

    /// `(k, theta)` nodes for a feature row of length `input_dim`.
    pub fn forward(&self, g: &mut Graph<'_>, f: &[f64]) -> Result<(Var, Var)> {
        if f.len() != self.config.input_dim {
            return Err(Error::Shape {
                op: "initial_forward",
                lhs: [1, f.len()],
                rhs: [1, self.config.input_dim],
            });
        }
        let x = g.constant(Tensor::row(f.to_vec()))?;
        let (w1, b1, w2, b2) = (g.param(self.w1), g.param(self.b1), g.param(self.w2), g.param(self.b2));
        let a1 = g.matmul(x, w1)?;
        let a1 = g.add(a1, b1)?;
        let g1 = g.relu(a1)?;
        let a2 = g.matmul(g1, w2)?;
        let a2 = g.add(a2, b2)?;
        let g2 = g.relu(a2)?;
        let (wk, bk, wt, bt) = (g.param(self.wk), g.param(self.bk), g.param(self.wt), g.param(self.bt));
        let k = g.matmul(g2, wk)?;
        let k = g.add(k, bk)?;
        let k = g.softplus(k)?;
        let t = g.matmul(g2, wt)?;
        let t = g.add(t, bt)?;
        let t = g.softplus(t)?;
        Ok((k, t))
    }

    pub fn predict(&self, f: &[f64]) -> Result<GammaParams> {
        let mut g = Graph::with_params(&self.params);
        let (k, t) = self.forward(&mut g, f)?;
        GammaParams::new(g.value(k).item(), g.value(t).item())
    }
}

pub(crate) fn copy_params(dst: &mut ParamSet, src: &ParamSet) -> Result<()> {
    if dst.len() != src.len() {
        return Err(Error::Checkpoint(format!(
            "checkpoint has {} parameters, model expects {}",
            src.len(),
            dst.len()
        )));
    }
    let ids: Vec<_> = dst.ids().collect();
    for id in ids {
        let name = dst.name(id).to_string();
        let sid = src
            .id(&name)
            .ok_or_else(|| Error::Checkpoint(format!("checkpoint lacks parameter {name}")))?;
        let value = src.value(sid);
        if value.shape() != dst.value(id).shape() {
            return Err(Error::Checkpoint(format!(
                "parameter {name} has shape {:?}, model expects {:?}",
                value.shape(),
                dst.value(id).shape()
            )));
        }
        *dst.value_mut(id) = value.clone();
    }
    Ok(())
}
