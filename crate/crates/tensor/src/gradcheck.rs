use crate::error::Result;
use crate::graph::{Graph, Var};
use crate::param::ParamStore;
use crate::tensor::Tensor;

/// Denominator floor of the relative error, so entries whose true gradient
/// is essentially zero are judged by absolute error instead.
pub const REL_ERROR_FLOOR: f64 = 1e-3;

/// Worst disagreement between analytic and central-difference gradients.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub checked: usize,
    /// Location of the worst entry, e.g. `input 1[7]` or `enc.w1[3]`.
    pub worst: Option<String>,
}

impl GradCheckReport {
    fn record(&mut self, analytic: f64, numeric: f64, label: impl FnOnce() -> String) {
        let abs = (analytic - numeric).abs();
        let rel = abs / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR);
        self.checked += 1;
        self.max_abs_error = self.max_abs_error.max(abs);
        if rel > self.max_rel_error || self.worst.is_none() {
            self.max_rel_error = self.max_rel_error.max(rel);
            self.worst = Some(label());
        }
    }
}

fn scalar_of(graph: &Graph<f64>, v: Var) -> f64 {
    graph.value(v).item()
}

/// Compares the gradient of the scalar built by `f` with central finite
/// differences (step `eps`) for every entry of every input.
pub fn gradient_check<F>(f: F, inputs: &[Tensor<f64>], eps: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var>,
{
    let eval = |values: &[Tensor<f64>]| -> Result<f64> {
        let mut g = Graph::new();
        let vars: Vec<Var> = values.iter().map(|t| g.constant(t.clone())).collect();
        let root = f(&mut g, &vars)?;
        Ok(scalar_of(&g, root))
    };
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.tracked(t.clone())).collect();
    let root = f(&mut g, &vars)?;
    let grads = g.backward(root)?;
    let mut report = GradCheckReport::default();
    let mut work = inputs.to_vec();
    for (k, &var) in vars.iter().enumerate() {
        for i in 0..inputs[k].numel() {
            let orig = inputs[k].data()[i];
            work[k].data_mut()[i] = orig + eps;
            let up = eval(&work)?;
            work[k].data_mut()[i] = orig - eps;
            let down = eval(&work)?;
            work[k].data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let analytic = grads.get(var).map_or(0.0, |g| g[i]);
            report.record(analytic, numeric, || format!("input {k}[{i}]"));
        }
    }
    Ok(report)
}

/// Like [`gradient_check`] but with respect to the parameters of `store`.
/// `f` must build the same computation on every call. At most
/// `max_per_param` evenly spaced entries of each parameter are perturbed.
pub fn gradient_check_params<F>(
    store: &ParamStore<f64>,
    mut f: F,
    eps: f64,
    max_per_param: usize,
) -> Result<GradCheckReport>
where
    F: FnMut(&mut Graph<f64>, &ParamStore<f64>) -> Result<Var>,
{
    let mut work = store.clone();
    work.zero_grad();
    let mut g = Graph::new();
    let root = f(&mut g, &work)?;
    g.backward_into(root, &mut work)?;
    let analytic: Vec<Vec<f64>> = work.iter().map(|p| p.grad.clone()).collect();
    work.zero_grad();

    let mut report = GradCheckReport::default();
    let ids: Vec<_> = work.iter().map(|p| work.id(&p.name).expect("registered")).collect();
    for (k, id) in ids.into_iter().enumerate() {
        let len = work.get(id).value.numel();
        let stride = len.div_ceil(max_per_param.max(1)).max(1);
        for i in (0..len).step_by(stride) {
            let orig = work.get(id).value.data()[i];
            let mut at = |value: f64, work: &mut ParamStore<f64>| -> Result<f64> {
                work.get_mut(id).value.data_mut()[i] = value;
                let mut g = Graph::inference();
                let root = f(&mut g, work)?;
                Ok(scalar_of(&g, root))
            };
            let up = at(orig + eps, &mut work)?;
            let down = at(orig - eps, &mut work)?;
            work.get_mut(id).value.data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let name = &work.get(id).name;
            report.record(analytic[k][i], numeric, || format!("{name}[{i}]"));
        }
    }
    Ok(report)
}
