//! Second-order model of the barrier Lagrangian at an iterate.
//!
//! The model in the step `(delta, sigma)` with multipliers `lambda` is
//!
//! ```text
//! 1/2 delta' Q delta + delta' C + 1/2 sigma' M sigma + sigma' D
//!     subject to  a + sigma + B' delta = 0
//! ```
//!
//! `Q` and `C` are the exact Hessian and gradient of the smoothness measure
//! (it is quadratic) plus the positivity barrier; `B` is the Jacobian of the
//! log-price residuals with respect to the forward rates and `a` the
//! residuals themselves. Constraint curvature is not included.

use serde::{Deserialize, Serialize};

use crate::curve::{coupon_sum, eval_w, integrated, residual_from_integrated, ForwardCurve};
use crate::error::{Error, Result};
use crate::problem::CurveProblem;
use crate::scalar::Real;

/// Symmetric band matrix holding the diagonal and `d` sub-diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct SymBand<T> {
    n: usize,
    d: usize,
    // Row r holds entries (r, r), (r, r-1), ..., (r, r-d).
    data: Vec<T>,
}

impl<T: Real> SymBand<T> {
    pub fn zeros(n: usize, d: usize) -> Self {
        SymBand { n, d, data: vec![T::zero(); n * (d + 1)] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Storage bandwidth.
    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    fn idx(&self, r: usize, s: usize) -> Option<usize> {
        let (hi, lo) = if r >= s { (r, s) } else { (s, r) };
        let k = hi - lo;
        (k <= self.d).then(|| hi * (self.d + 1) + k)
    }

    /// Entry `(r, s)`, zero outside the band.
    #[inline]
    pub fn get(&self, r: usize, s: usize) -> T {
        self.idx(r, s).map_or(T::zero(), |i| self.data[i])
    }

    /// Adds `v` to `(r, s)` (and, by symmetry, `(s, r)`).
    #[inline]
    pub fn add(&mut self, r: usize, s: usize, v: T) {
        let i = self.idx(r, s).expect("entry inside band");
        self.data[i] += v;
    }

    #[inline]
    pub fn set(&mut self, r: usize, s: usize, v: T) {
        let i = self.idx(r, s).expect("entry inside band");
        self.data[i] = v;
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        (0..self.n).map(|r| (0..self.n).map(|s| self.get(r, s)).collect()).collect()
    }

    pub fn from_dense(dense: &[Vec<T>], d: usize) -> Self {
        let n = dense.len();
        let mut m = Self::zeros(n, d);
        for r in 0..n {
            for s in r.saturating_sub(d)..=r {
                m.set(r, s, dense[r][s]);
            }
        }
        m
    }

    /// Furthest sub-diagonal holding a nonzero entry.
    pub fn bandwidth(&self) -> usize {
        let mut best = 0;
        for r in 0..self.n {
            for k in (1..=self.d.min(r)).rev() {
                if self.data[r * (self.d + 1) + k] != T::zero() {
                    best = best.max(k);
                    break;
                }
            }
        }
        best
    }

    pub fn max_abs_diagonal(&self) -> T {
        (0..self.n).map(|r| self.get(r, r).abs()).fold(T::zero(), T::max)
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.n];
        for r in 0..self.n {
            let lo = r.saturating_sub(self.d);
            let hi = (r + self.d).min(self.n - 1);
            for s in lo..=hi {
                y[r] += self.get(r, s) * x[s];
            }
        }
        y
    }
}

/// Forward rate (per year) at which the proximal weight matches the positivity barrier's curvature.
pub const PROXIMAL_REF_RATE: f64 = 0.04;

/// Barrier weights `mu` (positivity) and `mu_tilde` (bid/ask interval).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierWeights<T> {
    pub mu: T,
    pub mu_tilde: T,
}

/// The quadratic subproblem at one Newton iterate.
///
/// A constraint whose log price is pinned (zero spread) carries
/// `m[j] = +inf` and `d[j] = 0`: its slack is fixed at zero.
#[derive(Debug, Clone)]
pub struct QuadraticModel<T> {
    pub q: SymBand<T>,
    pub c: Vec<T>,
    /// Row-major `n x m`: `b[r * m + j]`.
    pub b: Vec<T>,
    pub a: Vec<T>,
    pub m: Vec<T>,
    pub d: Vec<T>,
    /// Value of the barrier objective at the expansion point, excluding the multiplier term.
    pub b_const: T,
    /// Small pivots may be regularized instead of rejected (positivity barrier off).
    pub allow_ridge: bool,
    /// Proximal weight already added to the diagonal of `q` (positivity barrier off).
    pub proximal: T,
}

impl<T: Real> QuadraticModel<T> {
    pub fn n(&self) -> usize {
        self.c.len()
    }

    /// Constraint count.
    pub fn constraints(&self) -> usize {
        self.a.len()
    }

    pub fn bandwidth(&self) -> usize {
        self.q.d()
    }

    #[inline]
    pub fn b_row(&self, r: usize) -> &[T] {
        let m = self.constraints();
        &self.b[r * m..(r + 1) * m]
    }

    #[inline]
    pub fn b_at(&self, r: usize, j: usize) -> T {
        self.b[r * self.constraints() + j]
    }
}

fn check_interior<T: Real>(problem: &CurveProblem<T>, f: &[T], rho: &[T]) -> Result<()> {
    if f.len() != problem.n() || rho.len() != problem.m() {
        return Err(Error::Domain("iterate dimensions do not match the problem".into()));
    }
    if problem.positivity {
        if let Some((r, v)) = f.iter().enumerate().find(|(_, v)| !(**v > T::zero())) {
            return Err(Error::InfeasibleIterate(format!("f[{}] = {v} is not positive", r + 1)));
        }
    }
    for (j, (b, rho)) in problem.bounds.iter().zip(rho).enumerate() {
        if !b.is_degenerate() && !(*rho > b.rho_b && *rho < b.rho_a) {
            return Err(Error::InfeasibleIterate(format!(
                "rho[{j}] = {rho} outside ({}, {})",
                b.rho_b, b.rho_a
            )));
        }
    }
    Ok(())
}

/// Expands the barrier Lagrangian around `(f, rho)`.
pub fn build_model<T: Real>(
    problem: &CurveProblem<T>,
    f: &[T],
    rho: &[T],
    barriers: BarrierWeights<T>,
) -> Result<QuadraticModel<T>> {
    check_interior(problem, f, rho)?;
    let n = problem.n();
    let m = problem.m();
    let xi = &problem.grid.xi;
    let gamma = problem.weights.gamma;
    let phi = problem.weights.phi;
    let two = T::lit(2.0);

    let mut q = SymBand::zeros(n, if phi > T::zero() { 2 } else { 1 });
    let mut c = vec![T::zero(); n];

    if gamma > T::zero() {
        for r in 0..n - 1 {
            let w = gamma / xi[r];
            q.add(r, r, w);
            q.add(r + 1, r + 1, w);
            q.add(r + 1, r, -w);
            let g = w * (f[r + 1] - f[r]);
            c[r] -= g;
            c[r + 1] += g;
        }
    }
    if phi > T::zero() {
        for r in 1..n.saturating_sub(1) {
            let k = two / (xi[r - 1] + xi[r]);
            let st = [k / xi[r - 1], -k * (T::one() / xi[r - 1] + T::one() / xi[r]), k / xi[r]];
            let w = phi * xi[r];
            let curv = st[0] * f[r - 1] + st[1] * f[r] + st[2] * f[r + 1];
            for a in 0..3 {
                c[r - 1 + a] += w * curv * st[a];
                for b in 0..=a {
                    q.add(r - 1 + a, r - 1 + b, w * st[a] * st[b]);
                }
            }
        }
    }

    let mut b_const = eval_w_slice(problem, f);
    let mut proximal = T::zero();
    if problem.positivity {
        for r in 0..n {
            q.add(r, r, barriers.mu / (f[r] * f[r]));
            c[r] -= barriers.mu / f[r];
            b_const -= barriers.mu * f[r].ln();
        }
    } else {
        // Without the barrier, Q is singular along constant (and for the
        // second-difference measure, affine) curves. The proximal term the
        // barrier would contribute at the reference rate keeps every pivot
        // positive; it does not alter the gradient, so fixed points are unchanged.
        proximal = barriers.mu / T::lit(PROXIMAL_REF_RATE * PROXIMAL_REF_RATE);
        for r in 0..n {
            q.add(r, r, proximal);
        }
    }

    let s = integrated(f, xi);
    let mut bmat = vec![T::zero(); n * m];
    let mut a = vec![T::zero(); m];
    let mut mdiag = vec![T::zero(); m];
    let mut dvec = vec![T::zero(); m];
    for (j, sched) in problem.schedules.iter().enumerate() {
        let last = sched.last_stage();
        let end = s[last - 1];
        let flows: Vec<T> = sched
            .stages
            .iter()
            .zip(&sched.alphas)
            .map(|(&stage, &alpha)| alpha * (end - s[stage - 1]).exp())
            .collect();
        // suffix[i] = sum of discounted-forward flows paid at or after payment i
        let mut suffix = vec![T::zero(); flows.len() + 1];
        for i in (0..flows.len()).rev() {
            suffix[i] = suffix[i + 1] + flows[i];
        }
        let v = suffix[0];
        let mut next = 0;
        // Stage r (0-based) is stage r+1; flows strictly after it are those with R_i > r+1.
        for r in 0..last - 1 {
            while next < sched.stages.len() && sched.stages[next] <= r + 1 {
                next += 1;
            }
            bmat[r * m + j] = xi[r] * suffix[next] / v;
        }
        a[j] = residual_from_integrated(&s, rho[j], sched).value;
        debug_assert!((coupon_sum(&s, sched) - v).abs() <= T::lit(1e-9) * v);

        let bounds = &problem.bounds[j];
        if bounds.is_degenerate() {
            mdiag[j] = T::infinity();
            dvec[j] = T::zero();
        } else {
            let to_ask = bounds.rho_a - rho[j];
            let to_bid = rho[j] - bounds.rho_b;
            let mt = barriers.mu_tilde;
            mdiag[j] = mt * (T::one() / (to_ask * to_ask) + T::one() / (to_bid * to_bid));
            dvec[j] = mt * (T::one() / to_ask - T::one() / to_bid);
            b_const -= mt * (to_ask.ln() + to_bid.ln());
        }
    }

    Ok(QuadraticModel {
        q,
        c,
        b: bmat,
        a,
        m: mdiag,
        d: dvec,
        b_const,
        allow_ridge: !problem.positivity,
        proximal,
    })
}

fn eval_w_slice<T: Real>(problem: &CurveProblem<T>, f: &[T]) -> T {
    let curve = ForwardCurve { grid: problem.grid.clone(), f: f.to_vec() };
    eval_w(&curve, &problem.weights)
}

/// The barrier Lagrangian `Z` at `(f, rho)` with multipliers `lambda`.
pub fn eval_z<T: Real>(
    problem: &CurveProblem<T>,
    f: &[T],
    rho: &[T],
    barriers: BarrierWeights<T>,
    lambda: &[T],
) -> Result<T> {
    check_interior(problem, f, rho)?;
    let mut z = eval_w_slice(problem, f);
    let s = integrated(f, &problem.grid.xi);
    for (j, sched) in problem.schedules.iter().enumerate() {
        z += lambda[j] * residual_from_integrated(&s, rho[j], sched).value;
        let b = &problem.bounds[j];
        if !b.is_degenerate() {
            z -= barriers.mu_tilde * ((rho[j] - b.rho_b).ln() + (b.rho_a - rho[j]).ln());
        }
    }
    if problem.positivity {
        z -= barriers.mu * f.iter().map(|x| x.ln()).sum::<T>();
    }
    Ok(z)
}
