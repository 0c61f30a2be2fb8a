//! Restarted GMRES for complex linear systems given as a matrix-free apply.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Outcome of a converged solve.
#[derive(Debug, Clone)]
pub struct GmresSolution {
    pub x: Vec<Complex64>,
    pub iterations: usize,
    /// Final relative residual `‖b − Ax‖/‖b‖`, recomputed explicitly.
    pub residual: f64,
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// GMRES(`restart`) from a zero initial guess, stopping at relative residual `tol`.
pub fn gmres<F>(
    apply: F,
    b: &[Complex64],
    tol: f64,
    restart: usize,
    max_iter: usize,
) -> Result<GmresSolution>
where
    F: Fn(&[Complex64]) -> Vec<Complex64>,
{
    let n = b.len();
    let bnorm = norm(b);
    let zero = Complex64::new(0.0, 0.0);
    if bnorm == 0.0 {
        return Ok(GmresSolution {
            x: vec![zero; n],
            iterations: 0,
            residual: 0.0,
        });
    }
    let restart = restart.max(1).min(n.max(1));
    let mut x = vec![zero; n];
    let mut total = 0;
    let mut trace = Vec::new();
    loop {
        let ax = apply(&x);
        let r: Vec<Complex64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = norm(&r);
        trace.push(beta / bnorm);
        if beta / bnorm <= tol {
            return Ok(GmresSolution {
                x,
                iterations: total,
                residual: beta / bnorm,
            });
        }
        if total >= max_iter {
            return Err(Error::Convergence {
                iterations: total,
                residual: beta / bnorm,
                detail: format!(
                    "GMRES residual trace {:?}",
                    trace.iter().map(|r| format!("{r:.3e}")).collect::<Vec<_>>()
                ),
            });
        }
        let mut v: Vec<Vec<Complex64>> = vec![r.iter().map(|z| z / beta).collect()];
        let mut hm = vec![vec![zero; restart]; restart + 1];
        let mut cs = vec![zero; restart];
        let mut sn = vec![zero; restart];
        let mut g = vec![zero; restart + 1];
        g[0] = Complex64::new(beta, 0.0);
        let mut k_used = 0;
        for k in 0..restart {
            let mut w = apply(&v[k]);
            for (i, vi) in v.iter().enumerate() {
                let hik = dot(vi, &w);
                hm[i][k] = hik;
                for (wj, vj) in w.iter_mut().zip(vi) {
                    *wj -= hik * vj;
                }
            }
            let hnext = norm(&w);
            hm[k + 1][k] = Complex64::new(hnext, 0.0);
            for i in 0..k {
                let t = cs[i].conj() * hm[i][k] + sn[i].conj() * hm[i + 1][k];
                hm[i + 1][k] = -sn[i] * hm[i][k] + cs[i] * hm[i + 1][k];
                hm[i][k] = t;
            }
            let (a, bb) = (hm[k][k], hm[k + 1][k]);
            let den = (a.norm_sqr() + bb.norm_sqr()).sqrt();
            if den == 0.0 {
                cs[k] = Complex64::new(1.0, 0.0);
                sn[k] = zero;
            } else {
                cs[k] = a / den;
                sn[k] = bb / den;
            }
            hm[k][k] = cs[k].conj() * a + sn[k].conj() * bb;
            hm[k + 1][k] = zero;
            g[k + 1] = -sn[k] * g[k];
            g[k] = cs[k].conj() * g[k];
            total += 1;
            k_used = k + 1;
            if g[k + 1].norm() / bnorm <= 0.5 * tol || hnext == 0.0 || total >= max_iter {
                break;
            }
            v.push(w.iter().map(|z| z / hnext).collect());
        }
        let mut y = vec![zero; k_used];
        for i in (0..k_used).rev() {
            let s: Complex64 = (i + 1..k_used).map(|j| hm[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / hm[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for (xi, vji) in x.iter_mut().zip(&v[j]) {
                *xi += yj * vji;
            }
        }
    }
}
