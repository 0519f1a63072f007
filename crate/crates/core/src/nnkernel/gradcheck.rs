use super::graph::{Graph, NodeId};
use super::params::{ParamId, ParamStore};
use super::KernelError;

pub const GRADCHECK_MAX_PARAMS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    /// Max over scalars of `|g_a − g_n| / max(|g_a|, |g_n|, 1e-8)`.
    pub max_rel_error: f64,
    /// Parameter name and flat index of the worst scalar.
    pub worst: Option<(String, usize)>,
    /// Analytic and numeric gradient at the worst scalar.
    pub worst_values: (f64, f64),
    pub checked: usize,
}

/// Compares reverse-mode gradients against central differences.
///
/// `loss` builds the scalar loss on a fresh graph each time it is called;
/// it must depend on the store only through the graph.
pub fn gradcheck<F>(store: &ParamStore<f64>, eps: f64, loss: F) -> Result<GradcheckReport, KernelError>
where
    F: Fn(&mut Graph<'_, f64>) -> Result<NodeId, KernelError>,
{
    gradcheck_params(store, &store.ids().collect::<Vec<_>>(), eps, loss)
}

/// [`gradcheck`] restricted to `ids`, for objectives that treat the other
/// parameters as frozen.
pub fn gradcheck_params<F>(
    store: &ParamStore<f64>,
    ids: &[ParamId],
    eps: f64,
    loss: F,
) -> Result<GradcheckReport, KernelError>
where
    F: Fn(&mut Graph<'_, f64>) -> Result<NodeId, KernelError>,
{
    let count = store.num_scalars();
    if count > GRADCHECK_MAX_PARAMS {
        return Err(KernelError::TooManyParams {
            count,
            limit: GRADCHECK_MAX_PARAMS,
        });
    }
    let eval = |s: &ParamStore<f64>| -> Result<f64, KernelError> {
        let mut g = Graph::new(s);
        let l = loss(&mut g)?;
        let v = g.scalar(l);
        if !v.is_finite() {
            return Err(KernelError::NonFinite("loss".into()));
        }
        Ok(v)
    };

    let mut grads = store.zero_grads();
    {
        let mut g = Graph::new(store);
        let l = loss(&mut g)?;
        g.backward(l, &mut grads)?;
    }

    let mut work = store.clone();
    let mut report = GradcheckReport {
        max_rel_error: 0.0,
        worst: None,
        worst_values: (0.0, 0.0),
        checked: 0,
    };
    for &id in ids {
        for j in 0..store.get(id).len() {
            let orig = store.get(id).data[j];
            work.get_mut(id).data[j] = orig + eps;
            let plus = eval(&work)?;
            work.get_mut(id).data[j] = orig - eps;
            let minus = eval(&work)?;
            work.get_mut(id).data[j] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let analytic = grads.get(id).data[j];
            let denom = analytic.abs().max(numeric.abs()).max(1e-8);
            let rel = (analytic - numeric).abs() / denom;
            if rel > report.max_rel_error || report.worst.is_none() {
                if rel > report.max_rel_error {
                    report.max_rel_error = rel;
                }
                report.worst = Some((store.name(id).to_owned(), j));
                report.worst_values = (analytic, numeric);
            }
            report.checked += 1;
        }
    }
    Ok(report)
}
