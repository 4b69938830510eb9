use alloc::format;

use super::graph::{Graph, Var};
use super::params::ParamStore;
use crate::{Error, Result};

/// Largest `|analytic − central difference| / max(1, |central difference|)`
/// over every scalar in `params`, for the scalar function built by `f`.
///
/// `params` is perturbed in place and restored before returning.
pub fn grad_check<F>(params: &mut ParamStore, h: f64, mut f: F) -> Result<f64>
where
    F: FnMut(&ParamStore, &mut Graph) -> Result<Var>,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Contract(format!("finite-difference step must be positive, got {h}")));
    }
    let mut graph = Graph::new();
    let out = f(params, &mut graph)?;
    let analytic = graph.backward(out)?.into_params();

    let mut eval = |p: &ParamStore| -> Result<f64> {
        let mut g = Graph::new();
        let out = f(p, &mut g)?;
        Ok(g.value(out).data()[0])
    };

    let mut worst: f64 = 0.0;
    for id in params.ids().collect::<alloc::vec::Vec<_>>() {
        for j in 0..params.get(id).len() {
            let orig = params.get(id).data()[j];
            params.get_mut(id).data_mut()[j] = orig + h;
            let plus = eval(params);
            params.get_mut(id).data_mut()[j] = orig - h;
            let minus = eval(params);
            params.get_mut(id).data_mut()[j] = orig;
            let numeric = (plus? - minus?) / (2.0 * h);
            let exact = analytic.get(id).map_or(0.0, |g| g.data()[j]);
            let err = libm::fabs(exact - numeric) / libm::fabs(numeric).max(1.0);
            worst = worst.max(err);
        }
    }
    Ok(worst)
}
