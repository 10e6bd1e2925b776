use super::graph::{Graph, Var};
use super::params::ParamStore;
use crate::error::{Error, Result};

/// Compares reverse-mode gradients of a scalar function of `store` with
/// central finite differences and returns the largest
/// `|analytic - numeric| / max(1, |analytic|)` over all parameter entries.
///
/// `f` must build the same computation every time it is called; any
/// randomness inside it has to be seeded from scratch per call.
pub fn grad_check<F>(store: &ParamStore, epsilon: f64, f: F) -> Result<f64>
where
    F: Fn(&ParamStore, &mut Graph) -> Result<Var>,
{
    if !(1e-7..=1e-3).contains(&epsilon) {
        return Err(Error::Config(format!(
            "grad_check epsilon {epsilon} outside [1e-7, 1e-3]"
        )));
    }
    let mut graph = Graph::new();
    let out = f(store, &mut graph)?;
    scalar_of(&graph, out)?;
    let analytic = graph.param_grads(&graph.backward(out)?);

    let eval = |s: &ParamStore| -> Result<f64> {
        let mut g = Graph::new();
        let v = f(s, &mut g)?;
        scalar_of(&g, v)
    };

    let mut probe = store.clone();
    let mut worst = 0.0f64;
    let names: Vec<String> = store.names().map(str::to_string).collect();
    for name in names {
        let n = store.get(&name).map_or(0, |t| t.len());
        for i in 0..n {
            let orig = store.get(&name).expect("listed")[i];
            probe.get_mut(&name).expect("listed").data_mut()[i] = orig + epsilon;
            let up = eval(&probe)?;
            probe.get_mut(&name).expect("listed").data_mut()[i] = orig - epsilon;
            let down = eval(&probe)?;
            probe.get_mut(&name).expect("listed").data_mut()[i] = orig;

            let numeric = (up - down) / (2.0 * epsilon);
            let a = analytic.get(&name).map_or(0.0, |g| g.data()[i]);
            let err = (a - numeric).abs() / a.abs().max(1.0);
            worst = worst.max(err);
        }
    }
    Ok(worst)
}

fn scalar_of(graph: &Graph, v: Var) -> Result<f64> {
    let t = graph.value(v);
    if t.len() != 1 {
        return Err(Error::Shape(format!(
            "grad_check needs a scalar, got {:?}",
            t.shape()
        )));
    }
    let x = t.data()[0];
    if !x.is_finite() {
        return Err(Error::Numeric("function value is not finite".into()));
    }
    Ok(x)
}
