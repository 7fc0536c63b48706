use crate::error::{Error, Result};
use crate::nn::ParamVector;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Adam optimizer state over one flat parameter vector.
///
/// Moment constants are the standard defaults and are fixed; only the
/// stepsize is tunable (and may be annealed between steps by the caller).
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step_count: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub stepsize: f64,
}

impl AdamState {
    pub fn new(param_len: usize, stepsize: f64) -> Self {
        AdamState { step_count: 0, m: vec![0.0; param_len], v: vec![0.0; param_len], stepsize }
    }
}

/// One Adam update with bias correction, in place.
///
/// With `maximize` set the step ascends the objective (the gradient is
/// negated on entry, so maximize on L is entrywise identical to minimize on
/// −L). Non-finite gradient entries abort with the step index in the error.
pub fn adam_step(
    state: &mut AdamState,
    params: &mut ParamVector,
    grad: &ParamVector,
    maximize: bool,
) -> Result<()> {
    let n = params.len();
    if grad.len() != n || state.m.len() != n || state.v.len() != n {
        return Err(Error::Config(format!(
            "adam_step length mismatch: params {}, grad {}, moments {}",
            n,
            grad.len(),
            state.m.len()
        )));
    }
    if state.stepsize <= 0.0 {
        return Err(Error::Config("adam stepsize must be > 0".into()));
    }
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::Numeric(format!(
            "non-finite gradient entry {} at adam step {}",
            i,
            state.step_count + 1
        )));
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let bc1 = 1.0 - ADAM_BETA1.powi(t);
    let bc2 = 1.0 - ADAM_BETA2.powi(t);
    let sign = if maximize { -1.0 } else { 1.0 };
    for i in 0..n {
        let g = sign * grad[i];
        state.m[i] = ADAM_BETA1 * state.m[i] + (1.0 - ADAM_BETA1) * g;
        state.v[i] = ADAM_BETA2 * state.v[i] + (1.0 - ADAM_BETA2) * g * g;
        let mh = state.m[i] / bc1;
        let vh = state.v[i] / bc2;
        params[i] -= state.stepsize * mh / (vh.sqrt() + ADAM_EPS);
    }
    Ok(())
}
