use crate::error::Result;
use crate::numcore::{Graph, Init, ParamId, ParamSet, Tensor, Var};

/// Gated recurrent unit with one layer norm per gate pre-activation.
///
/// The layer-norm bias of each gate is that gate's bias. Without layer norm
/// the same parameter is added directly.
#[derive(Clone, Debug)]
pub struct Gru {
    pub input: usize,
    pub hidden: usize,
    pub layer_norm: bool,
    w: [ParamId; 3],
    u: [ParamId; 3],
    gain: [ParamId; 3],
    bias: [ParamId; 3],
}

/// Per-sequence dropout multipliers for one GRU (inverted scaling included).
#[derive(Clone, Debug, PartialEq)]
pub struct GruMask {
    pub input: Vec<f64>,
    pub recurrent: Vec<f64>,
}

impl GruMask {
    pub fn ones(input: usize, hidden: usize) -> Self {
        GruMask {
            input: vec![1.0; input],
            recurrent: vec![1.0; hidden],
        }
    }
}

/// Graph-side handles for one sequence: concatenated weights and mask leaves.
#[derive(Clone, Copy, Debug)]
pub struct GruNodes {
    w: Var,
    u: Var,
    gain: [Var; 3],
    bias: [Var; 3],
    input_mask: Option<Var>,
    recurrent_mask: Option<Var>,
}

const GATES: [&str; 3] = ["z", "r", "h"];

impl Gru {
    pub fn new(params: &mut ParamSet, prefix: &str, input: usize, hidden: usize, layer_norm: bool) -> Result<Self> {
        let mut w = Vec::new();
        let mut u = Vec::new();
        let mut gain = Vec::new();
        let mut bias = Vec::new();
        for gate in GATES {
            w.push(params.add(&format!("{prefix}.w_{gate}"), input, hidden, Init::Xavier)?);
            u.push(params.add(&format!("{prefix}.u_{gate}"), hidden, hidden, Init::Xavier)?);
            gain.push(params.add(&format!("{prefix}.ln_gain_{gate}"), 1, hidden, Init::Ones)?);
            bias.push(params.add(&format!("{prefix}.b_{gate}"), 1, hidden, Init::Zeros)?);
        }
        let arr = |v: Vec<ParamId>| [v[0], v[1], v[2]];
        Ok(Gru {
            input,
            hidden,
            layer_norm,
            w: arr(w),
            u: arr(u),
            gain: arr(gain),
            bias: arr(bias),
        })
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        self.w.iter().chain(&self.u).chain(&self.gain).chain(&self.bias).copied().collect()
    }

    /// Set up weights and masks once per sequence.
    pub fn nodes(&self, g: &mut Graph<'_>, mask: Option<&GruMask>) -> Result<GruNodes> {
        let w: Vec<Var> = self.w.iter().map(|&p| g.param(p)).collect();
        let u: Vec<Var> = self.u.iter().map(|&p| g.param(p)).collect();
        let w = g.concat(&w)?;
        let u = g.concat(&u)?;
        let gain = self.gain.map(|p| g.param(p));
        let bias = self.bias.map(|p| g.param(p));
        let (input_mask, recurrent_mask) = match mask {
            Some(m) => (
                Some(g.constant(Tensor::row(m.input.clone()))?),
                Some(g.constant(Tensor::row(m.recurrent.clone()))?),
            ),
            None => (None, None),
        };
        Ok(GruNodes {
            w,
            u,
            gain,
            bias,
            input_mask,
            recurrent_mask,
        })
    }

    /// Apply the input mask and project a whole `n x input` sequence at once.
    pub fn project_inputs(&self, g: &mut Graph<'_>, nodes: &GruNodes, x: Var) -> Result<Var> {
        let x = match nodes.input_mask {
            Some(m) => g.mul_row(x, m)?,
            None => x,
        };
        g.matmul(x, nodes.w)
    }

    fn norm(&self, g: &mut Graph<'_>, nodes: &GruNodes, gate: usize, pre: Var) -> Result<Var> {
        if self.layer_norm {
            g.layer_norm(pre, nodes.gain[gate], nodes.bias[gate])
        } else {
            g.add_row(pre, nodes.bias[gate])
        }
    }

    /// One step given the projected input row `x W` (`1 x 3h`).
    pub fn step_projected(&self, g: &mut Graph<'_>, nodes: &GruNodes, xw: Var, h_prev: Var) -> Result<Var> {
        let n = self.hidden;
        let h_in = match nodes.recurrent_mask {
            Some(m) => g.mul(h_prev, m)?,
            None => h_prev,
        };
        let hu = g.matmul(h_in, nodes.u)?;
        let mut gates = [None, None];
        for (i, gate) in gates.iter_mut().enumerate() {
            let xs = g.slice_cols(xw, i * n, n)?;
            let hs = g.slice_cols(hu, i * n, n)?;
            let pre = g.add(xs, hs)?;
            let normed = self.norm(g, nodes, i, pre)?;
            *gate = Some(g.sigmoid(normed)?);
        }
        let (z, r) = (gates[0].unwrap(), gates[1].unwrap());
        let xh = g.slice_cols(xw, 2 * n, n)?;
        let uh = g.slice_cols(hu, 2 * n, n)?;
        let ruh = g.mul(r, uh)?;
        let pre = g.add(xh, ruh)?;
        let normed = self.norm(g, nodes, 2, pre)?;
        let cand = g.tanh(normed)?;
        let keep = g.one_minus(z)?;
        let a = g.mul(keep, h_prev)?;
        let b = g.mul(z, cand)?;
        g.add(a, b)
    }

    /// One step from a raw `1 x input` row.
    pub fn step(&self, g: &mut Graph<'_>, nodes: &GruNodes, x: Var, h_prev: Var) -> Result<Var> {
        let xw = self.project_inputs(g, nodes, x)?;
        self.step_projected(g, nodes, xw, h_prev)
    }
}
