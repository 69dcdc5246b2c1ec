//! Flexible GMRES (right preconditioned, no restarts).

use crate::error::{IbmgError, Result};
use crate::grid::dot;

/// Outcome of an FGMRES run.
#[derive(Clone, Debug, PartialEq)]
pub struct FgmresOutcome {
    pub iterations: usize,
    /// Relative residual `||b - A x|| / ||b||` after each iteration (index 0 is the start).
    pub history: Vec<f64>,
    pub converged: bool,
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Solves `A x = b` starting from the incoming `x`.
///
/// `apply(v, out)` computes `out = A v`; `precond(v, out)` computes
/// `out = M_k^{-1} v` and may change from one iteration to the next. The run
/// stops after `max_iters` iterations or once the residual drops to
/// `tol * ||b||`. A lucky breakdown counts as convergence.
pub fn fgmres<F, P>(
    mut apply: F,
    mut precond: P,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iters: usize,
) -> Result<FgmresOutcome>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<()>,
    P: FnMut(&[f64], &mut [f64]) -> Result<()>,
{
    let n = b.len();
    assert_eq!(x.len(), n);
    let bnorm = norm(b);
    let mut r = vec![0.0; n];
    apply(x, &mut r)?;
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let beta = norm(&r);
    let scale = if bnorm > 0.0 { bnorm } else { beta.max(f64::MIN_POSITIVE) };
    let mut history = vec![beta / scale];
    if beta == 0.0 || beta <= tol * bnorm {
        return Ok(FgmresOutcome {
            iterations: 0,
            history,
            converged: true,
        });
    }

    let mut v: Vec<Vec<f64>> = Vec::with_capacity(max_iters + 1);
    let mut z: Vec<Vec<f64>> = Vec::with_capacity(max_iters);
    let mut hess: Vec<Vec<f64>> = Vec::with_capacity(max_iters);
    let mut cs: Vec<f64> = Vec::with_capacity(max_iters);
    let mut sn: Vec<f64> = Vec::with_capacity(max_iters);
    let mut g = vec![beta];
    r.iter_mut().for_each(|ri| *ri /= beta);
    v.push(r);

    let mut converged = false;
    let mut k = 0;
    while k < max_iters {
        let mut zk = vec![0.0; n];
        precond(&v[k], &mut zk)?;
        let mut w = vec![0.0; n];
        apply(&zk, &mut w)?;
        z.push(zk);

        // Modified Gram-Schmidt.
        let mut hk = vec![0.0; k + 2];
        for (i, vi) in v.iter().enumerate() {
            let hik = dot(&w, vi);
            hk[i] = hik;
            w.iter_mut().zip(vi).for_each(|(wj, vj)| *wj -= hik * vj);
        }
        let hnext = norm(&w);
        hk[k + 1] = hnext;
        if !hk.iter().all(|h| h.is_finite()) {
            return Err(IbmgError::Breakdown(k + 1));
        }

        for i in 0..k {
            let t = cs[i] * hk[i] + sn[i] * hk[i + 1];
            hk[i + 1] = -sn[i] * hk[i] + cs[i] * hk[i + 1];
            hk[i] = t;
        }
        let denom = hk[k].hypot(hk[k + 1]);
        let (c, s) = if denom == 0.0 {
            (1.0, 0.0)
        } else {
            (hk[k] / denom, hk[k + 1] / denom)
        };
        cs.push(c);
        sn.push(s);
        hk[k] = c * hk[k] + s * hk[k + 1];
        hk[k + 1] = 0.0;
        let gk = g[k];
        g[k] = c * gk;
        g.push(-s * gk);
        hess.push(hk);
        k += 1;

        let res = g[k].abs();
        history.push(res / scale);
        let lucky = hnext <= 1e-14 * beta;
        if res <= tol * bnorm || lucky {
            converged = true;
            break;
        }
        if hk_singular(&hess[k - 1], k - 1) {
            return Err(IbmgError::Breakdown(k));
        }
        w.iter_mut().for_each(|wj| *wj /= hnext);
        v.push(w);
    }

    // Back substitution on the triangular factor.
    let mut y = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = g[i];
        for j in i + 1..k {
            s -= hess[j][i] * y[j];
        }
        let d = hess[i][i];
        y[i] = if d != 0.0 { s / d } else { 0.0 };
    }
    for (yj, zj) in y.iter().zip(&z) {
        x.iter_mut().zip(zj).for_each(|(xi, zi)| *xi += yj * zi);
    }
    Ok(FgmresOutcome {
        iterations: k,
        history,
        converged,
    })
}

fn hk_singular(h: &[f64], k: usize) -> bool {
    h[k] == 0.0
}
