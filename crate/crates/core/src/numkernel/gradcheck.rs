use alloc::format;
use alloc::vec::Vec;

use super::graph::{Graph, Var};
use super::params::{Bound, ParamStore};
use crate::error::{Error, Result};

/// Magnitude below which gradient differences are compared absolutely.
pub const GRAD_CHECK_FLOOR: f64 = 1e-6;

/// Compares reverse-mode gradients with central finite differences for every
/// scalar of every store, returning the worst relative error
/// `|analytic - numeric| / max(|analytic|, |numeric|, GRAD_CHECK_FLOOR)`.
pub fn grad_check<F>(stores: &[ParamStore], step: f64, loss: F) -> Result<f64>
where
    F: Fn(&mut Graph, &[Bound]) -> Result<Var>,
{
    if !(step > 0.0) {
        return Err(Error::Invalid(format!("step must be positive, got {step}")));
    }
    let eval = |stores: &[ParamStore]| -> Result<f64> {
        let mut g = Graph::new();
        let bound: Vec<Bound> = stores.iter().map(|s| s.bind(&mut g)).collect();
        let out = loss(&mut g, &bound)?;
        let v = g.value(out);
        if v.shape() != (1, 1) || !v.item().is_finite() {
            return Err(Error::NonFinite(format!("loss value {:?}", v.data())));
        }
        Ok(v.item())
    };

    let mut g = Graph::new();
    let bound: Vec<Bound> = stores.iter().map(|s| s.bind(&mut g)).collect();
    let out = loss(&mut g, &bound)?;
    let grads = g.backward(out)?;

    let mut work: Vec<ParamStore> = stores.to_vec();
    let mut worst: f64 = 0.0;
    for si in 0..stores.len() {
        for id in stores[si].ids() {
            let analytic = grads
                .get(bound[si].var(id))
                .cloned()
                .unwrap_or_else(|| stores[si].get(id).map(|_| 0.0));
            for j in 0..stores[si].get(id).data().len() {
                let orig = stores[si].get(id).data()[j];
                work[si].get_mut(id).data_mut()[j] = orig + step;
                let up = eval(&work)?;
                work[si].get_mut(id).data_mut()[j] = orig - step;
                let down = eval(&work)?;
                work[si].get_mut(id).data_mut()[j] = orig;
                let numeric = (up - down) / (2.0 * step);
                let a = analytic.data()[j];
                let denom = a.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR);
                worst = worst.max((a - numeric).abs() / denom);
            }
        }
    }
    Ok(worst)
}
