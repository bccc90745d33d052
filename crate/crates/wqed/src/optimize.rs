//! Derivative-free 1-D maximization: a coarse grid scan brackets the best
//! sample, Brent's method refines it.

use crate::error::{Error, Result};
use argmin::core::{CostFunction, Executor};
use argmin::solver::brent::BrentOpt;
use std::cell::RefCell;

/// Number of coarse grid samples.
pub const GRID: usize = 64;
/// Default relative tolerance on the optimum location.
pub const REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Optimum {
    pub x: f64,
    pub value: f64,
}

struct Neg<'a, F> {
    f: &'a F,
    err: &'a RefCell<Option<Error>>,
    sign: f64,
}

impl<F: Fn(f64) -> Result<f64>> CostFunction for Neg<'_, F> {
    type Param = f64;
    type Output = f64;
    fn cost(&self, x: &f64) -> std::result::Result<f64, argmin::core::Error> {
        match (self.f)(*x) {
            Ok(v) => Ok(self.sign * v),
            Err(e) => {
                self.err.borrow_mut().get_or_insert(e);
                Ok(f64::INFINITY)
            }
        }
    }
}

fn brent<F: Fn(f64) -> Result<f64>>(f: &F, a: f64, b: f64, rel_tol: f64, sign: f64) -> Result<Optimum> {
    let err = RefCell::new(None);
    let cost = Neg { f, err: &err, sign };
    let eps = rel_tol.max(f64::EPSILON.sqrt());
    let abs = 1e-3 * rel_tol * (b - a).abs().max(f64::MIN_POSITIVE);
    let solver = BrentOpt::new(a, b).set_tolerance(eps, abs);
    let res = Executor::new(cost, solver)
        .configure(|s| s.max_iters(200))
        .run()
        .map_err(|e| Error::InvalidArgument(format!("optimizer failed: {e}")))?;
    if let Some(e) = err.borrow_mut().take() {
        return Err(e);
    }
    let st = res.state();
    let x = st.best_param.ok_or_else(|| Error::InvalidArgument("optimizer produced no point".into()))?;
    Ok(Optimum { x, value: sign * st.best_cost })
}

/// Maximize `f` on [lo, hi] with [`GRID`] samples followed by Brent.
///
/// Fails with `NoInteriorMaximum` when the best sample sits on the boundary.
pub fn maximize<F: Fn(f64) -> Result<f64>>(f: F, lo: f64, hi: f64, rel_tol: f64) -> Result<Optimum> {
    let xs = crate::model::linspace(lo, hi, GRID);
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &x) in xs.iter().enumerate() {
        let v = f(x)?;
        if v > best.1 {
            best = (i, v);
        }
    }
    let i = best.0;
    if i == 0 || i == GRID - 1 {
        return Err(Error::NoInteriorMaximum { lo, hi });
    }
    let opt = brent(&f, xs[i - 1], xs[i + 1], rel_tol, -1.0)?;
    // Brent only ever improves on the bracket midpoint in exact arithmetic
    Ok(if opt.value >= best.1 { opt } else { Optimum { x: xs[i], value: best.1 } })
}

/// Local minimum of `f` inside [a, b].
pub fn minimize_bracket<F: Fn(f64) -> Result<f64>>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<Optimum> {
    brent(&f, a, b, rel_tol, 1.0)
}
