use super::{Graph, ParamSet, Tensor, Var};
use crate::error::{Error, Result};

/// Outcome of comparing analytic gradients against central differences.
#[derive(Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter name and flat index of the worst entry.
    pub worst: Option<(String, usize)>,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
    /// Every checked entry as `(name, index, analytic, numeric)`.
    pub entries: Vec<(String, usize, f64, f64)>,
}

impl std::fmt::Debug for GradCheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GradCheckReport")
            .field("max_rel_error", &self.max_rel_error)
            .field("worst", &self.worst)
            .field("analytic", &self.analytic)
            .field("numeric", &self.numeric)
            .field("checked", &self.checked)
            .finish_non_exhaustive()
    }
}

impl GradCheckReport {
    /// Worst relative error among entries whose gradient magnitude exceeds `floor`.
    pub fn max_rel_error_above(&self, floor: f64) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.2.abs().max(e.3.abs()) > floor)
            .map(|e| relative_error(e.2, e.3))
            .fold(0.0, f64::max)
    }

    pub fn max_abs_error(&self) -> f64 {
        self.entries.iter().map(|e| (e.2 - e.3).abs()).fold(0.0, f64::max)
    }
}

/// Relative error used throughout gradient checking.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

fn evaluate<F>(params: &ParamSet, loss: &F) -> Result<f64>
where
    F: Fn(&mut Graph<'_>) -> Result<Var>,
{
    let mut g = Graph::with_params(params);
    let root = loss(&mut g)?;
    Ok(g.value(root).item())
}

/// Checks every scalar of every parameter with central differences of width `eps`.
pub fn grad_check<F>(params: &mut ParamSet, eps: f64, loss: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph<'_>) -> Result<Var>,
{
    let analytic: Vec<Tensor> = {
        let mut g = Graph::with_params(params);
        let root = loss(&mut g)?;
        g.backward(root)?;
        let grads = g.param_grads();
        params
            .ids()
            .map(|id| {
                grads
                    .get(id)
                    .cloned()
                    .unwrap_or_else(|| Tensor::zeros(params.value(id).rows(), params.value(id).cols()))
            })
            .collect()
    };

    let first = evaluate(params, &loss)?;
    let second = evaluate(params, &loss)?;
    if first.to_bits() != second.to_bits() {
        return Err(Error::NonDeterministic { first, second });
    }

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
        entries: Vec::new(),
    };
    let ids: Vec<_> = params.ids().collect();
    for id in ids {
        for j in 0..params.value(id).len() {
            let original = params.value(id).data()[j];
            params.value_mut(id).data_mut()[j] = original + eps;
            let plus = evaluate(params, &loss);
            params.value_mut(id).data_mut()[j] = original - eps;
            let minus = evaluate(params, &loss);
            params.value_mut(id).data_mut()[j] = original;
            let numeric = (plus? - minus?) / (2.0 * eps);
            let a = analytic[id.index()].data()[j];
            let err = relative_error(a, numeric);
            report.checked += 1;
            report.entries.push((params.name(id).to_string(), j, a, numeric));
            if report.worst.is_none() || err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = Some((params.name(id).to_string(), j));
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}
