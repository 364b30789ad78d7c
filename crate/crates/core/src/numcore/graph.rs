use super::{Gradients, ParamId, ParamSet, Tensor};
use crate::error::{Error, Result};
use crate::gammadist::special::{digamma, ln_gamma};

/// Epsilon added to the variance inside layer normalisation.
pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Handle to a node in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    /// `a (n x m) + b (1 x m)` broadcast over rows.
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    /// `a (n x m) * b (1 x m)` broadcast over rows.
    MulRow(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Concat(Vec<Var>),
    StackRows(Vec<Var>),
    Row(Var, usize),
    SliceCols(Var, usize),
    Gather(Var, Vec<usize>),
    Transpose(Var),
    Relu(Var),
    Softplus(Var),
    Sigmoid(Var),
    Tanh(Var),
    Log(Var),
    Exp(Var),
    Recip(Var),
    LnGamma(Var),
    Softmax(Var),
    LayerNorm { x: Var, gain: Var, bias: Var },
    Sum(Var),
}

#[derive(Debug)]
struct Node {
    op: Op,
    /// `None` for parameter leaves, whose value lives in the borrowed [`ParamSet`].
    value: Option<Tensor>,
    /// Per-op saved state (layer norm keeps normalised inputs and inverse std).
    aux: Vec<f64>,
}

/// Define-by-run reverse-mode autodiff graph.
///
/// Every op checks shapes and rejects non-finite results, so any value that
/// makes it into the graph is finite. Parameter leaves borrow their data from
/// a [`ParamSet`]; each parameter gets exactly one leaf per graph.
pub struct Graph<'p> {
    params: Option<&'p ParamSet>,
    nodes: Vec<Node>,
    param_nodes: Vec<Option<Var>>,
    grads: Vec<Option<Tensor>>,
}

impl Default for Graph<'_> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'p> Graph<'p> {
    pub fn new() -> Self {
        Graph {
            params: None,
            nodes: Vec::new(),
            param_nodes: Vec::new(),
            grads: Vec::new(),
        }
    }

    pub fn with_params(params: &'p ParamSet) -> Self {
        Graph {
            params: Some(params),
            nodes: Vec::with_capacity(1024),
            param_nodes: vec![None; params.len()],
            grads: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(t), _) => t,
            (None, Op::Param(id)) => self
                .params
                .expect("parameter leaf without parameter set")
                .value(*id),
            (None, _) => unreachable!("non-parameter node without value"),
        }
    }

    pub fn shape(&self, v: Var) -> [usize; 2] {
        self.value(v).shape()
    }

    /// Accumulated gradient of the last backward roots with respect to `v`.
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn zero_grad(&mut self) {
        self.grads.clear();
    }

    fn push(&mut self, op: Op, value: Tensor, name: &'static str) -> Result<Var> {
        self.push_aux(op, value, Vec::new(), name)
    }

    fn push_aux(&mut self, op: Op, value: Tensor, aux: Vec<f64>, name: &'static str) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite { op: name });
        }
        self.nodes.push(Node {
            op,
            value: Some(value),
            aux,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Non-learnable input.
    pub fn constant(&mut self, value: Tensor) -> Result<Var> {
        self.push(Op::Leaf, value, "constant")
    }

    pub fn scalar(&mut self, x: f64) -> Result<Var> {
        self.constant(Tensor::scalar(x))
    }

    /// Leaf for a registered parameter; repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_nodes[id.0] {
            return v;
        }
        self.nodes.push(Node {
            op: Op::Param(id),
            value: None,
            aux: Vec::new(),
        });
        let v = Var(self.nodes.len() - 1);
        self.param_nodes[id.0] = Some(v);
        v
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(Error::Shape { op, lhs: sa, rhs: sb });
        }
        Ok(())
    }

    fn row_broadcast(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sb[0] != 1 || sb[1] != sa[1] {
            return Err(Error::Shape { op, lhs: sa, rhs: sb });
        }
        Ok(())
    }

    fn zip_with(&self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Tensor {
        let (ta, tb) = (self.value(a), self.value(b));
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::from_vec(ta.rows(), ta.cols(), data).expect("shape checked")
    }

    fn row_zip_with(&self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Tensor {
        let (ta, tb) = (self.value(a), self.value(b));
        let m = ta.cols();
        let data = ta
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| f(x, tb.data()[i % m.max(1)]))
            .collect();
        Tensor::from_vec(ta.rows(), m, data).expect("shape checked")
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        self.push(Op::MatMul(a, b), out, "matmul")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let out = self.zip_with(a, b, |x, y| x + y);
        self.push(Op::Add(a, b), out, "add")
    }

    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        self.row_broadcast("add_row", a, bias)?;
        let out = self.row_zip_with(a, bias, |x, y| x + y);
        self.push(Op::AddRow(a, bias), out, "add_row")
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let out = self.zip_with(a, b, |x, y| x - y);
        self.push(Op::Sub(a, b), out, "sub")
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let out = self.zip_with(a, b, |x, y| x * y);
        self.push(Op::Mul(a, b), out, "mul")
    }

    pub fn mul_row(&mut self, a: Var, row: Var) -> Result<Var> {
        self.row_broadcast("mul_row", a, row)?;
        let out = self.row_zip_with(a, row, |x, y| x * y);
        self.push(Op::MulRow(a, row), out, "mul_row")
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var> {
        let out = self.value(a).map(|x| x * factor);
        self.push(Op::Scale(a, factor), out, "scale")
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Result<Var> {
        let out = self.value(a).map(|x| x + c);
        self.push(Op::AddScalar(a), out, "add_scalar")
    }

    /// `1 - a`, elementwise.
    pub fn one_minus(&mut self, a: Var) -> Result<Var> {
        let neg = self.scale(a, -1.0)?;
        self.add_scalar(neg, 1.0)
    }

    /// Concatenates along columns; all parts must have the same row count.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::invalid("concat of zero tensors"));
        }
        let rows = self.shape(parts[0])[0];
        for &p in parts {
            let s = self.shape(p);
            if s[0] != rows {
                return Err(Error::Shape {
                    op: "concat",
                    lhs: self.shape(parts[0]),
                    rhs: s,
                });
            }
        }
        let cols: usize = parts.iter().map(|&p| self.shape(p)[1]).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row_slice(r));
            }
        }
        let out = Tensor::from_vec(rows, cols, data)?;
        self.push(Op::Concat(parts.to_vec()), out, "concat")
    }

    /// Stacks `1 x m` rows into an `n x m` matrix.
    pub fn stack_rows(&mut self, rows: &[Var]) -> Result<Var> {
        if rows.is_empty() {
            return Err(Error::invalid("stack of zero rows"));
        }
        let first = self.shape(rows[0]);
        let mut data = Vec::with_capacity(rows.len() * first[1]);
        for &r in rows {
            let s = self.shape(r);
            if s != [1, first[1]] {
                return Err(Error::Shape {
                    op: "stack_rows",
                    lhs: first,
                    rhs: s,
                });
            }
            data.extend_from_slice(self.value(r).data());
        }
        let out = Tensor::from_vec(rows.len(), first[1], data)?;
        self.push(Op::StackRows(rows.to_vec()), out, "stack_rows")
    }

    pub fn row(&mut self, a: Var, r: usize) -> Result<Var> {
        let t = self.value(a);
        if r >= t.rows() {
            return Err(Error::Shape {
                op: "row",
                lhs: t.shape(),
                rhs: [r, 0],
            });
        }
        let out = Tensor::row(t.row_slice(r).to_vec());
        self.push(Op::Row(a, r), out, "row")
    }

    /// Columns `start..start + len`.
    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let t = self.value(a);
        if start + len > t.cols() {
            return Err(Error::Shape {
                op: "slice_cols",
                lhs: t.shape(),
                rhs: [start, len],
            });
        }
        let mut data = Vec::with_capacity(t.rows() * len);
        for r in 0..t.rows() {
            data.extend_from_slice(&t.row_slice(r)[start..start + len]);
        }
        let out = Tensor::from_vec(t.rows(), len, data)?;
        self.push(Op::SliceCols(a, start), out, "slice_cols")
    }

    /// Selects rows of `table` (embedding lookup, i.e. one-hot rows times the table).
    pub fn gather(&mut self, table: Var, indices: &[usize]) -> Result<Var> {
        let t = self.value(table);
        let mut data = Vec::with_capacity(indices.len() * t.cols());
        for &i in indices {
            if i >= t.rows() {
                return Err(Error::Shape {
                    op: "gather",
                    lhs: t.shape(),
                    rhs: [i, 0],
                });
            }
            data.extend_from_slice(t.row_slice(i));
        }
        let out = Tensor::from_vec(indices.len(), t.cols(), data)?;
        self.push(Op::Gather(table, indices.to_vec()), out, "gather")
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).transpose();
        self.push(Op::Transpose(a), out, "transpose")
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(|x| if x > 0.0 { x } else { 0.0 });
        self.push(Op::Relu(a), out, "relu")
    }

    pub fn softplus(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(softplus);
        self.push(Op::Softplus(a), out, "softplus")
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(sigmoid);
        self.push(Op::Sigmoid(a), out, "sigmoid")
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(f64::tanh);
        self.push(Op::Tanh(a), out, "tanh")
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(f64::ln);
        self.push(Op::Log(a), out, "log")
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(f64::exp);
        self.push(Op::Exp(a), out, "exp")
    }

    pub fn recip(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(|x| 1.0 / x);
        self.push(Op::Recip(a), out, "recip")
    }

    /// `ln Γ(a)` elementwise; defined for positive inputs only.
    pub fn ln_gamma(&mut self, a: Var) -> Result<Var> {
        if self.value(a).data().iter().any(|&x| x <= 0.0) {
            return Err(Error::invalid("ln_gamma requires positive arguments"));
        }
        let out = self.value(a).map(ln_gamma);
        self.push(Op::LnGamma(a), out, "ln_gamma")
    }

    /// Softmax over each row.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        let mut out = Tensor::zeros(t.rows(), t.cols());
        for r in 0..t.rows() {
            let row = t.row_slice(r);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = row.iter().map(|x| (x - max).exp()).collect();
            let total: f64 = exps.iter().sum();
            let cols = t.cols();
            for (c, e) in exps.into_iter().enumerate() {
                out.data_mut()[r * cols + c] = e / total;
            }
        }
        self.push(Op::Softmax(a), out, "softmax")
    }

    /// Per-row layer normalisation followed by `gain * x_hat + bias` (both `1 x m`).
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Result<Var> {
        self.row_broadcast("layer_norm", x, gain)?;
        self.row_broadcast("layer_norm", x, bias)?;
        let t = self.value(x);
        let (rows, m) = (t.rows(), t.cols());
        let g = self.value(gain).data();
        let b = self.value(bias).data();
        let mut out = Tensor::zeros(rows, m);
        // aux layout: x_hat (rows * m) followed by inv_std (rows)
        let mut aux = vec![0.0; rows * m + rows];
        for r in 0..rows {
            let row = t.row_slice(r);
            let mean = row.iter().sum::<f64>() / m as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m as f64;
            let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            aux[rows * m + r] = inv;
            for c in 0..m {
                let xh = (row[c] - mean) * inv;
                aux[r * m + c] = xh;
                out.data_mut()[r * m + c] = g[c] * xh + b[c];
            }
        }
        self.push_aux(Op::LayerNorm { x, gain, bias }, out, aux, "layer_norm")
    }

    /// Sum of all entries, as a `1 x 1` tensor.
    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let out = Tensor::scalar(self.value(a).sum());
        self.push(Op::Sum(a), out, "sum")
    }

    /// Runs reverse accumulation from a scalar root. Gradients add onto any
    /// left by earlier calls until [`Graph::zero_grad`] is called.
    pub fn backward(&mut self, root: Var) -> Result<()> {
        let shape = self.shape(root);
        if shape != [1, 1] {
            return Err(Error::NonScalarRoot(shape));
        }
        let mut local: Vec<Option<Tensor>> = vec![None; root.0 + 1];
        local[root.0] = Some(Tensor::scalar(1.0));
        for i in (0..=root.0).rev() {
            let Some(g) = local[i].take() else { continue };
            self.propagate(i, &g, &mut local);
            if !g.is_finite() {
                return Err(Error::NonFinite { op: "backward" });
            }
            // keep the node's own gradient for inspection
            local[i] = Some(g);
        }
        if self.grads.len() < local.len() {
            self.grads.resize(local.len(), None);
        }
        for (i, g) in local.into_iter().enumerate() {
            if let Some(g) = g {
                match &mut self.grads[i] {
                    Some(acc) => acc.add_assign(&g),
                    slot @ None => *slot = Some(g),
                }
            }
        }
        Ok(())
    }

    /// Gradients of every parameter leaf touched by the graph.
    pub fn param_grads(&self) -> Gradients {
        let entries = self
            .param_nodes
            .iter()
            .enumerate()
            .filter_map(|(pid, v)| {
                let v = (*v)?;
                let g = self.grad(v)?;
                Some((ParamId(pid), g.clone()))
            })
            .collect();
        Gradients { entries }
    }

    fn propagate(&self, i: usize, g: &Tensor, local: &mut [Option<Tensor>]) {
        let node = &self.nodes[i];
        let out = || node.value.as_ref().expect("op node has a value");
        match &node.op {
            Op::Leaf | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
                // dA = dC * B^T
                let mut da = Tensor::zeros(m, k);
                for r in 0..m {
                    let grow = g.row_slice(r);
                    for p in 0..k {
                        let brow = tb.row_slice(p);
                        da.data_mut()[r * k + p] = grow.iter().zip(brow).map(|(x, y)| x * y).sum();
                    }
                }
                // dB = A^T * dC
                let mut db = Tensor::zeros(k, n);
                for r in 0..m {
                    let grow = g.row_slice(r);
                    for p in 0..k {
                        let a_rp = ta.get(r, p);
                        if a_rp == 0.0 {
                            continue;
                        }
                        let dst = &mut db.data_mut()[p * n..(p + 1) * n];
                        for (d, x) in dst.iter_mut().zip(grow) {
                            *d += a_rp * x;
                        }
                    }
                }
                accumulate(local, *a, da);
                accumulate(local, *b, db);
            }
            Op::Add(a, b) => {
                accumulate(local, *a, g.clone());
                accumulate(local, *b, g.clone());
            }
            Op::AddRow(a, b) => {
                accumulate(local, *a, g.clone());
                accumulate(local, *b, column_sums(g));
            }
            Op::Sub(a, b) => {
                accumulate(local, *a, g.clone());
                accumulate(local, *b, g.map(|x| -x));
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                accumulate(local, *a, zip(g, tb, |x, y| x * y));
                accumulate(local, *b, zip(g, ta, |x, y| x * y));
            }
            Op::MulRow(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let m = ta.cols();
                let da_data = g
                    .data()
                    .iter()
                    .enumerate()
                    .map(|(i, x)| x * tb.data()[i % m])
                    .collect();
                let da = Tensor::from_vec(ta.rows(), m, da_data).expect("shape");
                let mut db = Tensor::zeros(1, m);
                for (i, (x, y)) in g.data().iter().zip(ta.data()).enumerate() {
                    db.data_mut()[i % m] += x * y;
                }
                accumulate(local, *a, da);
                accumulate(local, *b, db);
            }
            Op::Scale(a, f) => accumulate(local, *a, g.map(|x| x * f)),
            Op::AddScalar(a) => accumulate(local, *a, g.clone()),
            Op::Concat(parts) => {
                let rows = g.rows();
                let mut offset = 0;
                for &p in parts {
                    let w = self.shape(p)[1];
                    let mut data = Vec::with_capacity(rows * w);
                    for r in 0..rows {
                        data.extend_from_slice(&g.row_slice(r)[offset..offset + w]);
                    }
                    accumulate(local, p, Tensor::from_vec(rows, w, data).expect("shape"));
                    offset += w;
                }
            }
            Op::StackRows(rows) => {
                for (r, &p) in rows.iter().enumerate() {
                    accumulate(local, p, Tensor::row(g.row_slice(r).to_vec()));
                }
            }
            Op::Row(a, r) => {
                let s = self.shape(*a);
                let mut da = Tensor::zeros(s[0], s[1]);
                da.data_mut()[r * s[1]..(r + 1) * s[1]].copy_from_slice(g.data());
                accumulate(local, *a, da);
            }
            Op::SliceCols(a, start) => {
                let s = self.shape(*a);
                let w = g.cols();
                let mut da = Tensor::zeros(s[0], s[1]);
                for r in 0..s[0] {
                    da.data_mut()[r * s[1] + start..r * s[1] + start + w].copy_from_slice(g.row_slice(r));
                }
                accumulate(local, *a, da);
            }
            Op::Gather(table, indices) => {
                let s = self.shape(*table);
                let mut dt = Tensor::zeros(s[0], s[1]);
                for (r, &idx) in indices.iter().enumerate() {
                    let dst = &mut dt.data_mut()[idx * s[1]..(idx + 1) * s[1]];
                    for (d, x) in dst.iter_mut().zip(g.row_slice(r)) {
                        *d += x;
                    }
                }
                accumulate(local, *table, dt);
            }
            Op::Transpose(a) => accumulate(local, *a, g.transpose()),
            Op::Relu(a) => {
                let ta = self.value(*a);
                accumulate(local, *a, zip(g, ta, |x, y| if y > 0.0 { x } else { 0.0 }));
            }
            Op::Softplus(a) => {
                let ta = self.value(*a);
                accumulate(local, *a, zip(g, ta, |x, y| x * sigmoid(y)));
            }
            Op::Sigmoid(a) => accumulate(local, *a, zip(g, out(), |x, s| x * s * (1.0 - s))),
            Op::Tanh(a) => accumulate(local, *a, zip(g, out(), |x, t| x * (1.0 - t * t))),
            Op::Log(a) => {
                let ta = self.value(*a);
                accumulate(local, *a, zip(g, ta, |x, y| x / y));
            }
            Op::Exp(a) => accumulate(local, *a, zip(g, out(), |x, e| x * e)),
            Op::Recip(a) => accumulate(local, *a, zip(g, out(), |x, r| -x * r * r)),
            Op::LnGamma(a) => {
                let ta = self.value(*a);
                accumulate(local, *a, zip(g, ta, |x, y| x * digamma(y)));
            }
            Op::Softmax(a) => {
                let y = out();
                let cols = y.cols();
                let mut da = Tensor::zeros(y.rows(), cols);
                for r in 0..y.rows() {
                    let (yr, gr) = (y.row_slice(r), g.row_slice(r));
                    let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for c in 0..cols {
                        da.data_mut()[r * cols + c] = yr[c] * (gr[c] - dot);
                    }
                }
                accumulate(local, *a, da);
            }
            Op::LayerNorm { x, gain, bias } => {
                let s = self.shape(*x);
                let (rows, m) = (s[0], s[1]);
                let gv = self.value(*gain).data();
                let mut dx = Tensor::zeros(rows, m);
                let mut dgain = Tensor::zeros(1, m);
                let mut dbias = Tensor::zeros(1, m);
                for r in 0..rows {
                    let inv = node.aux[rows * m + r];
                    let xh = &node.aux[r * m..(r + 1) * m];
                    let gr = g.row_slice(r);
                    let dxh: Vec<f64> = gr.iter().zip(gv).map(|(a, b)| a * b).collect();
                    let mean_dxh = dxh.iter().sum::<f64>() / m as f64;
                    let mean_dxh_xh = dxh.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>() / m as f64;
                    for c in 0..m {
                        dx.data_mut()[r * m + c] = inv * (dxh[c] - mean_dxh - xh[c] * mean_dxh_xh);
                        dgain.data_mut()[c] += gr[c] * xh[c];
                        dbias.data_mut()[c] += gr[c];
                    }
                }
                accumulate(local, *x, dx);
                accumulate(local, *gain, dgain);
                accumulate(local, *bias, dbias);
            }
            Op::Sum(a) => {
                let s = self.shape(*a);
                accumulate(local, *a, Tensor::filled(s[0], s[1], g.item()));
            }
        }
    }
}

fn accumulate(local: &mut [Option<Tensor>], v: Var, g: Tensor) {
    match &mut local[v.0] {
        Some(acc) => acc.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

fn zip(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::from_vec(a.rows(), a.cols(), data).expect("shape")
}

fn column_sums(g: &Tensor) -> Tensor {
    let mut out = Tensor::zeros(1, g.cols());
    for r in 0..g.rows() {
        for (o, x) in out.data_mut().iter_mut().zip(g.row_slice(r)) {
            *o += x;
        }
    }
    out
}

/// `log(1 + exp(x))` without overflow, floored at the smallest positive
/// normal so the result stays strictly positive after underflow.
pub fn softplus(x: f64) -> f64 {
    (x.max(0.0) + (-x.abs()).exp().ln_1p()).max(f64::MIN_POSITIVE)
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
