//! Banded equality-constrained QP by stage-wise elimination.
//!
//! Stages are eliminated from `q = n` down to `1`. Eliminating stage `q`
//! touches only the `d` stages below it, so the band never fills in; every
//! elimination also downdates the `c x c` multiplier matrix `G` and the
//! constraint offsets `a`. After the multipliers are solved from the small
//! dense system, the steps `delta_q` are recovered in ascending order.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linearize::{QuadraticModel, SymBand};
use crate::scalar::Real;

/// Pivots below this fraction of the largest diagonal entry are regularized
/// when the model allows it.
pub const RIDGE_REL: f64 = 1e-12;

/// Multiply-accumulate counts of the elimination, one field per workload.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct OpCounters {
    /// Band updates of `Q`.
    pub q_updates: u64,
    /// Cholesky of the multiplier system.
    pub multiplier_factor: u64,
    /// Updates of `C`.
    pub c_updates: u64,
    /// Updates of `B`.
    pub b_updates: u64,
    /// Updates of `a`.
    pub a_updates: u64,
    /// Updates of the symmetric `G`.
    pub g_updates: u64,
}

impl OpCounters {
    pub fn total(&self) -> u64 {
        self.q_updates + self.multiplier_factor + self.c_updates + self.b_updates + self.a_updates + self.g_updates
    }
}

/// Per-stage data kept by the backward pass.
#[derive(Debug, Clone)]
pub struct DPWorkspace<T> {
    n: usize,
    c: usize,
    d: usize,
    pivots: Vec<T>,
    /// `rows[q * d + k - 1]` is the eliminated row entry `Q^{(q)}_{q, q-k}`.
    rows: Vec<T>,
    /// `b_rows[q * c + j]` is `B^{(q)}_{q, j}`.
    b_rows: Vec<T>,
    c_rows: Vec<T>,
    /// `G^{(0)}`, row-major `c x c`.
    pub g: Vec<T>,
    /// `a^{(0)}`.
    pub a: Vec<T>,
    /// `b^{(0)}`.
    pub b: T,
    pub counters: OpCounters,
    /// Number of pivots that had to be regularized.
    pub ridged: usize,
    /// Cholesky factor of `M^{-1} - G`, set by [`solve_multipliers`].
    chol: Vec<T>,
    m_inv: Vec<T>,
}

impl<T: Real> DPWorkspace<T> {
    pub fn pivots(&self) -> &[T] {
        &self.pivots
    }

    pub fn constraints(&self) -> usize {
        self.c
    }
}

/// Solution of the quadratic subproblem.
#[derive(Debug, Clone)]
pub struct DPSolution<T> {
    pub delta: Vec<T>,
    pub sigma: Vec<T>,
    pub lambda: Vec<T>,
    pub counters: OpCounters,
    pub ridged: usize,
}

/// Furthest sub-diagonal with a nonzero entry of a dense symmetric matrix.
/// A diagonal matrix has bandwidth 0, a tridiagonal one 1.
pub fn bandwidth<T: Real>(q: &[Vec<T>]) -> usize {
    q.iter()
        .enumerate()
        .map(|(k, row)| (0..k).find(|&s| row[s] != T::zero()).map_or(0, |s| k - s))
        .max()
        .unwrap_or(0)
}

pub fn backward_pass<T: Real>(model: &QuadraticModel<T>) -> Result<DPWorkspace<T>> {
    let n = model.n();
    let c = model.constraints();
    let d = model.bandwidth();
    let mut q: SymBand<T> = model.q.clone();
    let mut bw = model.b.clone();
    let mut cw = model.c.clone();
    let mut g = vec![T::zero(); c * c];
    let mut a = model.a.clone();
    let mut b0 = T::zero();
    let mut counters = OpCounters::default();
    let mut ridged = 0;

    let ridge = T::lit(RIDGE_REL) * q.max_abs_diagonal();

    let mut pivots = vec![T::zero(); n];
    let mut rows = vec![T::zero(); n * d];
    let mut brow = vec![T::zero(); c];

    for s in (0..n).rev() {
        let mut piv = q.get(s, s);
        if !(piv > ridge) {
            if model.allow_ridge && !piv.is_nan() {
                piv = piv.max(T::zero()) + ridge;
                ridged += 1;
            } else if !(piv > T::zero()) {
                return Err(Error::IndefiniteModel { stage: s + 1, pivot: piv.as_f64() });
            }
        }
        let kmax = d.min(s);
        for k in 1..=kmax {
            rows[s * d + k - 1] = q.get(s, s - k);
        }
        brow.copy_from_slice(&bw[s * c..(s + 1) * c]);
        let cs = cw[s];
        pivots[s] = piv;

        for k1 in 1..=kmax {
            let r = s - k1;
            let factor = rows[s * d + k1 - 1] / piv;
            for k2 in k1..=kmax {
                q.add(r, s - k2, -factor * rows[s * d + k2 - 1]);
            }
            counters.q_updates += (kmax - k1 + 1) as u64;
            cw[r] -= factor * cs;
            counters.c_updates += 1;
            for (dst, src) in bw[r * c..(r + 1) * c].iter_mut().zip(&brow) {
                *dst -= factor * *src;
            }
            counters.b_updates += c as u64;
        }
        for i in 0..c {
            let bi = brow[i] / piv;
            for j in i..c {
                g[i * c + j] -= bi * brow[j];
            }
            a[i] -= cs * bi;
        }
        counters.g_updates += (c * (c + 1) / 2) as u64;
        counters.a_updates += c as u64;
        b0 -= T::lit(0.5) * cs * cs / piv;
    }
    for i in 0..c {
        for j in 0..i {
            g[i * c + j] = g[j * c + i];
        }
    }
    // Rows at and below stage s are final once s is eliminated, so the
    // working copies double as the stored elimination.
    Ok(DPWorkspace { n, c, d, pivots, rows, b_rows: bw, c_rows: cw, g, a, b: b0, counters, ridged, chol: Vec::new(), m_inv: Vec::new() })
}

/// In-place Cholesky `K = L L'` of a row-major symmetric matrix; returns the
/// multiply-accumulate count. Fails on a pivot lost to cancellation.
pub(crate) fn cholesky_in_place<T: Real>(k: &mut [T], c: usize) -> Option<u64> {
    let mut ops = 0u64;
    for j in 0..c {
        let orig = k[j * c + j];
        let mut diag = orig;
        for p in 0..j {
            diag -= k[j * c + p] * k[j * c + p];
        }
        ops += j as u64;
        if !(diag > T::lit(16.0) * T::epsilon() * orig.abs()) {
            return None;
        }
        let l = diag.sqrt();
        k[j * c + j] = l;
        for i in j + 1..c {
            let mut v = k[i * c + j];
            for p in 0..j {
                v -= k[i * c + p] * k[j * c + p];
            }
            ops += j as u64;
            k[i * c + j] = v / l;
        }
    }
    Some(ops)
}

pub(crate) fn cholesky_solve<T: Real>(l: &[T], c: usize, rhs: &mut [T]) {
    for i in 0..c {
        let mut v = rhs[i];
        for p in 0..i {
            v -= l[i * c + p] * rhs[p];
        }
        rhs[i] = v / l[i * c + i];
    }
    for i in (0..c).rev() {
        let mut v = rhs[i];
        for p in i + 1..c {
            v -= l[p * c + i] * rhs[p];
        }
        rhs[i] = v / l[i * c + i];
    }
}

/// Solves the multiplier system `(M^{-1} - G) lambda = a - M^{-1} D`, then
/// `sigma = -M^{-1} (lambda + D)`. An infinite `M_jj` pins `sigma_j = 0`.
pub fn solve_multipliers<T: Real>(ws: &mut DPWorkspace<T>, m: &[T], d: &[T]) -> Result<(Vec<T>, Vec<T>)> {
    let c = ws.c;
    let mut m_inv = Vec::with_capacity(c);
    for &mj in m {
        if !(mj > T::zero()) {
            return Err(Error::SingularMultiplierSystem);
        }
        m_inv.push(if mj.is_infinite() { T::zero() } else { T::one() / mj });
    }
    let mut k: Vec<T> = ws.g.iter().map(|x| -*x).collect();
    let mut lambda = vec![T::zero(); c];
    for j in 0..c {
        k[j * c + j] += m_inv[j];
        lambda[j] = ws.a[j] - m_inv[j] * d[j];
    }
    let ops = cholesky_in_place(&mut k, c).ok_or(Error::SingularMultiplierSystem)?;
    ws.counters.multiplier_factor += ops;
    cholesky_solve(&k, c, &mut lambda);
    let sigma = (0..c).map(|j| -m_inv[j] * (lambda[j] + d[j])).collect();
    ws.chol = k;
    ws.m_inv = m_inv;
    Ok((lambda, sigma))
}

pub fn forward_pass<T: Real>(ws: &DPWorkspace<T>, lambda: &[T]) -> Vec<T> {
    forward_with(ws, &ws.c_rows, lambda)
}

fn forward_with<T: Real>(ws: &DPWorkspace<T>, c_rows: &[T], lambda: &[T]) -> Vec<T> {
    let (n, c, d) = (ws.n, ws.c, ws.d);
    let mut delta = vec![T::zero(); n];
    for s in 0..n {
        let mut acc = c_rows[s];
        for k in 1..=d.min(s) {
            acc += ws.rows[s * d + k - 1] * delta[s - k];
        }
        for j in 0..c {
            acc += ws.b_rows[s * c + j] * lambda[j];
        }
        delta[s] = -acc / ws.pivots[s];
    }
    delta
}

/// Solves the same system for new linear terms `(c, d, a)`, reusing the
/// elimination and the multiplier factor. Costs `O(n (d + c))`.
pub fn resolve<T: Real>(ws: &DPWorkspace<T>, c: &[T], d: &[T], a: &[T]) -> (Vec<T>, Vec<T>, Vec<T>) {
    assert_eq!(ws.chol.len(), ws.c * ws.c, "solve_multipliers must run first");
    let (n, m, band) = (ws.n, ws.c, ws.d);
    let mut cw = c.to_vec();
    let mut a0 = a.to_vec();
    for s in (0..n).rev() {
        let cs = cw[s];
        let piv = ws.pivots[s];
        for k in 1..=band.min(s) {
            cw[s - k] -= ws.rows[s * band + k - 1] / piv * cs;
        }
        for j in 0..m {
            a0[j] -= cs * ws.b_rows[s * m + j] / piv;
        }
    }
    let mut lambda: Vec<T> = (0..m).map(|j| a0[j] - ws.m_inv[j] * d[j]).collect();
    cholesky_solve(&ws.chol, m, &mut lambda);
    let sigma = (0..m).map(|j| -ws.m_inv[j] * (lambda[j] + d[j])).collect();
    let delta = forward_with(ws, &cw, &lambda);
    (delta, sigma, lambda)
}

/// Residuals of the stationarity and constraint equations at a candidate solution.
pub fn kkt_residual<T: Real>(model: &QuadraticModel<T>, delta: &[T], sigma: &[T], lambda: &[T]) -> (Vec<T>, Vec<T>, Vec<T>) {
    let m = model.constraints();
    let mut r1 = model.q.mul_vec(delta);
    for (r, x) in r1.iter_mut().enumerate() {
        let row = model.b_row(r);
        *x += model.c[r] + row.iter().zip(lambda).map(|(b, l)| *b * *l).sum::<T>();
    }
    let r2 = (0..m)
        .map(|j| if model.m[j].is_infinite() { T::zero() } else { model.m[j] * sigma[j] + lambda[j] + model.d[j] })
        .collect();
    let mut r3: Vec<T> = (0..m).map(|j| model.a[j] + sigma[j]).collect();
    for (r, dr) in delta.iter().enumerate() {
        for (x, b) in r3.iter_mut().zip(model.b_row(r)) {
            *x += *b * *dr;
        }
    }
    (r1, r2, r3)
}

pub fn dp_solve<T: Real>(model: &QuadraticModel<T>) -> Result<DPSolution<T>> {
    dp_solve_refined(model, 0)
}

/// `dp_solve` followed by `sweeps` rounds of iterative refinement against
/// the full residual. Refinement recovers accuracy lost when `Q` alone is
/// much worse conditioned than the constrained system.
pub fn dp_solve_refined<T: Real>(model: &QuadraticModel<T>, sweeps: usize) -> Result<DPSolution<T>> {
    let mut ws = backward_pass(model)?;
    let (mut lambda, mut sigma) = solve_multipliers(&mut ws, &model.m, &model.d)?;
    let mut delta = forward_pass(&ws, &lambda);
    for _ in 0..sweeps {
        let (r1, r2, r3) = kkt_residual(model, &delta, &sigma, &lambda);
        let (dd, ds, dl) = resolve(&ws, &r1, &r2, &r3);
        for (x, e) in delta.iter_mut().zip(dd) {
            *x += e;
        }
        for (x, e) in sigma.iter_mut().zip(ds) {
            *x += e;
        }
        for (x, e) in lambda.iter_mut().zip(dl) {
            *x += e;
        }
    }
    Ok(DPSolution { delta, sigma, lambda, counters: ws.counters, ridged: ws.ridged })
}
