use std::collections::BTreeMap;

use super::gru::{Gru, GruMask, GruNodes};
use super::initial::{copy_params, meta_usize};
use crate::error::{Error, Result};
use crate::gammadist::{nll_node, GammaParams};
use crate::numcore::{Graph, Init, ParamId, ParamSet, Tensor, Var};

/// Sizes of the log encoder and update network.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RealtimeConfig {
    pub vocab_size: usize,
    pub feature_dim: usize,
    /// embedding width `e`
    pub embed: usize,
    /// bi-GRU cell size `c` per direction
    pub cell: usize,
    /// update-network state size `d`
    pub state: usize,
    pub heads: usize,
    pub layer_norm: bool,
    /// Skip the bi-GRU and attend over raw embeddings.
    pub context_free: bool,
}

impl RealtimeConfig {
    pub fn new(vocab_size: usize, feature_dim: usize) -> Self {
        RealtimeConfig {
            vocab_size,
            feature_dim,
            embed: 32,
            cell: 32,
            state: 64,
            heads: 2,
            layer_norm: true,
            context_free: false,
        }
    }

    /// Width of each token representation `h_i`.
    pub fn token_width(&self) -> usize {
        if self.context_free {
            self.embed
        } else {
            2 * self.cell
        }
    }

    /// Width of the log summary `s_t`.
    pub fn summary_width(&self) -> usize {
        self.token_width() * self.heads
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.heads) {
            return Err(Error::invalid(format!("heads must be 1 or 2, got {}", self.heads)));
        }
        if self.vocab_size == 0 || self.embed == 0 || self.state == 0 || (!self.context_free && self.cell == 0) {
            return Err(Error::invalid("vocabulary and layer sizes must be positive"));
        }
        Ok(())
    }

    pub fn to_meta(&self) -> BTreeMap<String, String> {
        BTreeMap::from([
            ("model".into(), "realtime".into()),
            ("vocab_size".into(), self.vocab_size.to_string()),
            ("feature_dim".into(), self.feature_dim.to_string()),
            ("embed".into(), self.embed.to_string()),
            ("cell".into(), self.cell.to_string()),
            ("state".into(), self.state.to_string()),
            ("heads".into(), self.heads.to_string()),
            ("layer_norm".into(), self.layer_norm.to_string()),
            ("context_free".into(), self.context_free.to_string()),
        ])
    }

    pub fn from_meta(meta: &BTreeMap<String, String>) -> Result<Self> {
        if meta.get("model").map(String::as_str) != Some("realtime") {
            return Err(Error::Checkpoint("not a real-time model checkpoint".into()));
        }
        let flag = |k: &str| match meta.get(k).map(String::as_str) {
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            _ => Err(Error::Checkpoint(format!("checkpoint metadata lacks {k}"))),
        };
        Ok(RealtimeConfig {
            vocab_size: meta_usize(meta, "vocab_size")?,
            feature_dim: meta_usize(meta, "feature_dim")?,
            embed: meta_usize(meta, "embed")?,
            cell: meta_usize(meta, "cell")?,
            state: meta_usize(meta, "state")?,
            heads: meta_usize(meta, "heads")?,
            layer_norm: flag("layer_norm")?,
            context_free: flag("context_free")?,
        })
    }
}

#[derive(Clone, Debug)]
struct Head {
    m1: ParamId,
    b1: ParamId,
    m2: ParamId,
    b2: ParamId,
}

/// Dropout masks for one outage's pass, reused at every step.
#[derive(Clone, Debug, PartialEq)]
pub struct RealtimeMasks {
    pub encoder_forward: GruMask,
    pub encoder_backward: GruMask,
    pub update: GruMask,
}

/// Per-outage graph handles shared by every log step.
struct Nodes {
    embedding: Var,
    forward: Option<GruNodes>,
    backward: Option<GruNodes>,
    heads: Vec<[Var; 4]>,
    update: GruNodes,
    p: Var,
    vk: Var,
    bk: Var,
    vt: Var,
    bt: Var,
    zero_cell: Option<Var>,
}

/// Output of one update step.
#[derive(Clone, Debug)]
pub struct StepVars {
    pub k: Var,
    pub theta: Var,
    /// `1 x n` attention weights per head
    pub attention: Vec<Var>,
    pub state: Var,
}

/// Log encoder (embedding, bi-GRU, multi-head attention) and update GRU with
/// Gamma heads, sharing one parameter set.
#[derive(Clone, Debug)]
pub struct RealtimeModel {
    pub config: RealtimeConfig,
    pub params: ParamSet,
    embedding: ParamId,
    forward: Option<Gru>,
    backward: Option<Gru>,
    heads: Vec<Head>,
    update: Gru,
    p: ParamId,
    vk: ParamId,
    bk: ParamId,
    vt: ParamId,
    bt: ParamId,
}

/// One report as seen by the model: hours since onset and token indices.
#[derive(Clone, Copy, Debug)]
pub struct LogStep<'a> {
    pub elapsed_hours: f64,
    pub tokens: &'a [usize],
}

impl RealtimeModel {
    pub fn new(config: RealtimeConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut p = ParamSet::new(seed);
        let embedding = p.add("enc.embedding", config.vocab_size, config.embed, Init::Uniform(0.05))?;
        let (forward, backward) = if config.context_free {
            (None, None)
        } else {
            (
                Some(Gru::new(&mut p, "enc.fwd", config.embed, config.cell, config.layer_norm)?),
                Some(Gru::new(&mut p, "enc.bwd", config.embed, config.cell, config.layer_norm)?),
            )
        };
        let w = config.token_width();
        let mut heads = Vec::new();
        for h in 0..config.heads {
            heads.push(Head {
                m1: p.add(&format!("att{h}.m1"), config.state, w, Init::Xavier)?,
                b1: p.add(&format!("att{h}.b1"), 1, w, Init::Zeros)?,
                m2: p.add(&format!("att{h}.m2"), w, w, Init::Xavier)?,
                b2: p.add(&format!("att{h}.b2"), 1, w, Init::Zeros)?,
            });
        }
        let update_in = config.feature_dim + config.summary_width() + 1;
        let update = Gru::new(&mut p, "upd.gru", update_in, config.state, config.layer_norm)?;
        Ok(RealtimeModel {
            config,
            embedding,
            forward,
            backward,
            heads,
            update,
            p: p.add("upd.p", config.feature_dim, config.state, Init::Xavier)?,
            vk: p.add("upd.v_k", config.state, 1, Init::Xavier)?,
            bk: p.add("upd.beta_k", 1, 1, Init::Zeros)?,
            vt: p.add("upd.v_theta", config.state, 1, Init::Xavier)?,
            bt: p.add("upd.beta_theta", 1, 1, Init::Zeros)?,
            params: p,
        })
    }

    pub fn from_params(config: RealtimeConfig, saved: &ParamSet) -> Result<Self> {
        let mut model = RealtimeModel::new(config, saved.seed())?;
        copy_params(&mut model.params, saved)?;
        Ok(model)
    }

    /// `(input, hidden)` sizes of the forward encoder, backward encoder and update GRUs.
    pub fn mask_shapes(&self) -> [(usize, usize); 3] {
        let c = &self.config;
        let enc = if c.context_free { (0, 0) } else { (c.embed, c.cell) };
        [enc, enc, (self.update.input, c.state)]
    }

    fn nodes(&self, g: &mut Graph<'_>, masks: Option<&RealtimeMasks>) -> Result<Nodes> {
        let forward = match &self.forward {
            Some(gru) => Some(gru.nodes(g, masks.map(|m| &m.encoder_forward))?),
            None => None,
        };
        let backward = match &self.backward {
            Some(gru) => Some(gru.nodes(g, masks.map(|m| &m.encoder_backward))?),
            None => None,
        };
        let zero_cell = match self.config.context_free {
            true => None,
            false => Some(g.constant(Tensor::zeros(1, self.config.cell))?),
        };
        let heads = self
            .heads
            .iter()
            .map(|h| [g.param(h.m1), g.param(h.b1), g.param(h.m2), g.param(h.b2)])
            .collect();
        Ok(Nodes {
            embedding: g.param(self.embedding),
            forward,
            backward,
            heads,
            update: self.update.nodes(g, masks.map(|m| &m.update))?,
            p: g.param(self.p),
            vk: g.param(self.vk),
            bk: g.param(self.bk),
            vt: g.param(self.vt),
            bt: g.param(self.bt),
            zero_cell,
        })
    }

    /// `H` (`n x token_width`) for one log.
    fn token_states(&self, g: &mut Graph<'_>, nodes: &Nodes, tokens: &[usize]) -> Result<Var> {
        if tokens.is_empty() {
            return Err(Error::invalid("cannot encode an empty token sequence"));
        }
        if let Some(&bad) = tokens.iter().find(|&&t| t >= self.config.vocab_size) {
            return Err(Error::invalid(format!(
                "token index {bad} outside vocabulary of {}",
                self.config.vocab_size
            )));
        }
        let x = g.gather(nodes.embedding, tokens)?;
        let (Some(fwd), Some(bwd), Some(fn_), Some(bn)) = (&self.forward, &self.backward, &nodes.forward, &nodes.backward)
        else {
            return Ok(x);
        };
        let n = tokens.len();
        let zero = nodes.zero_cell.expect("recurrent encoder has a zero state");
        let xf = fwd.project_inputs(g, fn_, x)?;
        let xb = bwd.project_inputs(g, bn, x)?;
        let mut hf = Vec::with_capacity(n);
        let mut h = zero;
        for i in 0..n {
            let row = g.row(xf, i)?;
            h = fwd.step_projected(g, fn_, row, h)?;
            hf.push(h);
        }
        let mut hb = vec![zero; n];
        let mut h = zero;
        for i in (0..n).rev() {
            let row = g.row(xb, i)?;
            h = bwd.step_projected(g, bn, row, h)?;
            hb[i] = h;
        }
        let rows: Vec<Var> = (0..n)
            .map(|i| g.concat(&[hf[i], hb[i]]))
            .collect::<Result<_>>()?;
        g.stack_rows(&rows)
    }

    /// Summary `s_t` and per-head attention for one log, attending from `o_prev`.
    fn encode(&self, g: &mut Graph<'_>, nodes: &Nodes, tokens: &[usize], o_prev: Var) -> Result<(Var, Vec<Var>)> {
        let h = self.token_states(g, nodes, tokens)?;
        let mut outs = Vec::with_capacity(nodes.heads.len());
        let mut attn = Vec::with_capacity(nodes.heads.len());
        for &[m1, b1, m2, b2] in &nodes.heads {
            let q = g.matmul(o_prev, m1)?;
            let q = g.add(q, b1)?;
            let q = g.relu(q)?;
            let y = g.matmul(h, m2)?;
            let y = g.add_row(y, b2)?;
            let y = g.relu(y)?;
            let yt = g.transpose(y)?;
            let scores = g.matmul(q, yt)?;
            let alpha = g.softmax(scores)?;
            outs.push(g.matmul(alpha, h)?);
            attn.push(alpha);
        }
        Ok((g.concat(&outs)?, attn))
    }

    /// Unroll the update network over an outage's logs.
    pub fn run(
        &self,
        g: &mut Graph<'_>,
        features: &[f64],
        logs: &[LogStep<'_>],
        masks: Option<&RealtimeMasks>,
    ) -> Result<Vec<StepVars>> {
        if features.len() != self.config.feature_dim {
            return Err(Error::Shape {
                op: "update_step",
                lhs: [1, features.len()],
                rhs: [1, self.config.feature_dim],
            });
        }
        let mut last = 0.0;
        for l in logs {
            if !(l.elapsed_hours >= 0.0) || !l.elapsed_hours.is_finite() {
                return Err(Error::invalid(format!("elapsed time must be non-negative, got {}", l.elapsed_hours)));
            }
            if l.elapsed_hours < last {
                return Err(Error::invalid("repair logs must be in time order"));
            }
            last = l.elapsed_hours;
        }
        let nodes = self.nodes(g, masks)?;
        let f = g.constant(Tensor::row(features.to_vec()))?;
        let mut o = g.matmul(f, nodes.p)?;
        let mut out = Vec::with_capacity(logs.len());
        for l in logs {
            let (s, attention) = self.encode(g, &nodes, l.tokens, o)?;
            let t = g.scalar(l.elapsed_hours.ln_1p())?;
            let x = g.concat(&[f, s, t])?;
            o = self.update.step(g, &nodes.update, x, o)?;
            let k = g.matmul(o, nodes.vk)?;
            let k = g.add(k, nodes.bk)?;
            let k = g.softplus(k)?;
            let theta = g.matmul(o, nodes.vt)?;
            let theta = g.add(theta, nodes.bt)?;
            let theta = g.softplus(theta)?;
            out.push(StepVars {
                k,
                theta,
                attention,
                state: o,
            });
        }
        Ok(out)
    }

    /// Sum over logs of the Gamma NLL of each step's target (hours).
    pub fn sequence_loss(
        &self,
        g: &mut Graph<'_>,
        features: &[f64],
        logs: &[LogStep<'_>],
        targets: &[f64],
        masks: Option<&RealtimeMasks>,
    ) -> Result<Var> {
        if logs.is_empty() {
            return Err(Error::invalid("real-time loss needs at least one log"));
        }
        if logs.len() != targets.len() {
            return Err(Error::invalid(format!(
                "{} logs but {} targets",
                logs.len(),
                targets.len()
            )));
        }
        let steps = self.run(g, features, logs, masks)?;
        let mut total: Option<Var> = None;
        for (s, &d) in steps.iter().zip(targets) {
            let nll = nll_node(g, s.k, s.theta, d)?;
            total = Some(match total {
                Some(t) => g.add(t, nll)?,
                None => nll,
            });
        }
        Ok(total.unwrap())
    }

    /// Frozen-parameter predictions and attention weights for every log.
    pub fn predict(&self, features: &[f64], logs: &[LogStep<'_>]) -> Result<Vec<(GammaParams, Vec<Vec<f64>>)>> {
        let mut g = Graph::with_params(&self.params);
        let steps = self.run(&mut g, features, logs, None)?;
        steps
            .iter()
            .map(|s| {
                let p = GammaParams::new(g.value(s.k).item(), g.value(s.theta).item())?;
                let attn = s.attention.iter().map(|a| g.value(*a).data().to_vec()).collect();
                Ok((p, attn))
            })
            .collect()
    }
}
