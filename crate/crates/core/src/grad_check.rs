//! Central finite-difference verification of analytic gradients.
//!
//! `grad_check` treats every entry of every parameter as a coordinate,
//! compares the tape gradient against (f(x+eps) - f(x-eps)) / 2 eps and
//! reports the worst relative error per parameter.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::Result;
use crate::tensor::{ParamSet, Tape, Tensor};

#[derive(Debug, Clone)]
pub struct GradCheckEntry {
    pub name: String,
    pub max_rel_err: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub entries: Vec<GradCheckEntry>,
    pub tol: f64,
}

impl GradCheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.max_rel_err)
            .fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.max_rel_err <= self.tol)
    }
}

fn rel_err(a: f64, n: f64) -> f64 {
    let denom = a.abs().max(n.abs()).max(1e-6);
    (a - n).abs() / denom
}

/// Compare the analytic gradient of a scalar-valued function against central
/// finite differences over every parameter coordinate.
pub fn grad_check<F>(f: F, params: &mut ParamSet, eps: f64, tol: f64) -> Result<GradCheckReport>
where
    F: Fn(&Tape, &ParamSet) -> Result<Tensor>,
{
    assert!(eps > 0.0, "grad_check step must be positive");
    params.zero_grad();
    let tape = Tape::new();
    let loss = f(&tape, params)?;
    loss.item()?;
    // Functions may record on their own tape (e.g. a full model forward),
    // so the backward pass runs on the tape the loss actually lives on.
    loss.tape().backward(&loss)?;
    loss.tape().accumulate_grads(params);
    let analytic: Vec<Vec<f64>> = params.iter().map(|p| p.grad.clone()).collect();

    let eval = |params: &ParamSet| -> Result<f64> {
        let tape = Tape::new();
        f(&tape, params)?.item()
    };

    let mut entries = Vec::new();
    for (pi, id) in params.ids().enumerate().collect::<Vec<_>>() {
        let mut worst = 0.0f64;
        for j in 0..params.get(id).value.len() {
            let orig = params.get(id).value[j];
            params.get_mut(id).value[j] = orig + eps;
            let plus = eval(params)?;
            params.get_mut(id).value[j] = orig - eps;
            let minus = eval(params)?;
            params.get_mut(id).value[j] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            worst = worst.max(rel_err(analytic[pi][j], numeric));
        }
        entries.push(GradCheckEntry {
            name: params.get(id).name.clone(),
            max_rel_err: worst,
        });
    }
    Ok(GradCheckReport { entries, tol })
}
