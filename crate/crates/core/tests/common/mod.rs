//! Shared oracles and generators for the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::Rng;
use smoothfwd::{
    BarrierWeights, CalendarDate, CashFlowSchedule, CurveGrid, CurveProblem, LogPriceBounds, QuadraticModel,
    SmoothnessWeights, SymBand,
};

/// Random banded SPD model: diagonally dominant `Q` plus a positive shift.
pub fn random_model(rng: &mut StdRng, n: usize, c: usize, d: usize, pinned_prob: f64) -> QuadraticModel<f64> {
    let mut q = SymBand::zeros(n, d);
    let mut row_sum = vec![0.0; n];
    for r in 0..n {
        for k in 1..=d.min(r) {
            let v: f64 = rng.gen_range(-1.0..1.0);
            q.set(r, r - k, v);
            row_sum[r] += v.abs();
            row_sum[r - k] += v.abs();
        }
    }
    for r in 0..n {
        q.set(r, r, row_sum[r] + rng.gen_range(0.05..2.0));
    }
    let m = (0..c)
        .map(|_| if rng.gen_bool(pinned_prob) { f64::INFINITY } else { rng.gen_range(0.1..10.0) })
        .collect::<Vec<_>>();
    let d_vec = m.iter().map(|mj| if mj.is_infinite() { 0.0 } else { rng.gen_range(-1.0..1.0) }).collect();
    QuadraticModel {
        q,
        c: (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        b: (0..n * c).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        a: (0..c).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        m,
        d: d_vec,
        b_const: 0.0,
        allow_ridge: false,
        proximal: 0.0,
    }
}

/// Dense solution of the model's KKT system:
/// `Q delta + B lambda = -C`, `M sigma + lambda = -D`, `B' delta + sigma = -a`,
/// with `sigma_j = 0` wherever `M_jj` is infinite.
pub struct DenseKkt {
    pub delta: Vec<f64>,
    pub sigma: Vec<f64>,
    pub lambda: Vec<f64>,
}

pub fn dense_kkt(model: &QuadraticModel<f64>) -> DenseKkt {
    let n = model.n();
    let c = model.constraints();
    let free: Vec<usize> = (0..c).filter(|&j| model.m[j].is_finite()).collect();
    let k = free.len();
    let dim = n + k + c;
    let mut a = DMatrix::<f64>::zeros(dim, dim);
    let mut rhs = DVector::<f64>::zeros(dim);
    let qd = model.q.to_dense();
    for r in 0..n {
        for s in 0..n {
            a[(r, s)] = qd[r][s];
        }
        for j in 0..c {
            a[(r, n + k + j)] = model.b_at(r, j);
            a[(n + k + j, r)] = model.b_at(r, j);
        }
        rhs[r] = -model.c[r];
    }
    for (i, &j) in free.iter().enumerate() {
        a[(n + i, n + i)] = model.m[j];
        a[(n + i, n + k + j)] = 1.0;
        a[(n + k + j, n + i)] = 1.0;
        rhs[n + i] = -model.d[j];
    }
    for j in 0..c {
        rhs[n + k + j] = -model.a[j];
    }
    let x = a.lu().solve(&rhs).expect("KKT matrix is nonsingular");
    let mut sigma = vec![0.0; c];
    for (i, &j) in free.iter().enumerate() {
        sigma[j] = x[n + i];
    }
    DenseKkt {
        delta: x.rows(0, n).iter().copied().collect(),
        sigma,
        lambda: x.rows(n + k, c).iter().copied().collect(),
    }
}

/// Largest `|x - y| / max(|y|, floor)` over the entries.
pub fn max_rel_err(x: &[f64], y: &[f64], floor: f64) -> f64 {
    assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| (a - b).abs() / b.abs().max(floor)).fold(0.0, f64::max)
}

pub fn origin() -> CalendarDate {
    CalendarDate::from_dmy(9, 7, 2001).unwrap()
}

/// Small random problem on a nonuniform grid together with an interior point.
pub struct RandomIterate {
    pub problem: CurveProblem<f64>,
    pub f: Vec<f64>,
    pub rho: Vec<f64>,
    pub barriers: BarrierWeights<f64>,
}

pub fn random_iterate(rng: &mut StdRng, n: usize, m: usize) -> RandomIterate {
    let xi: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..1.5)).collect();
    let grid = CurveGrid::from_lengths(origin(), xi, 1.0).unwrap();
    let mut schedules = Vec::new();
    let mut bounds = Vec::new();
    for j in 0..m {
        let last = rng.gen_range(2..=n);
        let flows = rng.gen_range(1..=last.min(4));
        let mut stages: Vec<usize> = (0..flows - 1).map(|_| rng.gen_range(1..last)).collect();
        stages.sort_unstable();
        stages.dedup();
        stages.push(last);
        let coupon = rng.gen_range(0.0..0.1);
        let mut alphas = vec![coupon; stages.len()];
        *alphas.last_mut().unwrap() += 1.0;
        schedules.push(CashFlowSchedule::new(format!("B{j}"), stages, alphas).unwrap());
        let lo = rng.gen_range(-1.0..0.0);
        bounds.push(LogPriceBounds { rho_b: lo, rho_a: lo + rng.gen_range(0.05..0.5) });
    }
    let rho = bounds.iter().map(|b| b.rho_b + rng.gen_range(0.1..0.9) * b.spread()).collect();
    let weights = SmoothnessWeights::new(rng.gen_range(0.1..2.0), rng.gen_range(0.1..2.0)).unwrap();
    let problem = CurveProblem::new(grid, schedules, bounds, weights, true).unwrap();
    let f = (0..n).map(|_| rng.gen_range(0.5..1.5)).collect();
    let barriers = BarrierWeights { mu: rng.gen_range(1e-3..1e-1), mu_tilde: rng.gen_range(1e-3..1e-1) };
    RandomIterate { problem, f, rho, barriers }
}

/// Central difference of `g` along coordinate `i` of `x`.
pub fn central_diff(x: &[f64], i: usize, h: f64, g: impl Fn(&[f64]) -> f64) -> f64 {
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    xp[i] += h;
    xm[i] -= h;
    (g(&xp) - g(&xm)) / (2.0 * h)
}

/// Mixed second central difference of `g` along coordinates `i`, `j`.
pub fn second_diff(x: &[f64], i: usize, j: usize, h: f64, g: impl Fn(&[f64]) -> f64) -> f64 {
    let at = |di: f64, dj: f64| {
        let mut y = x.to_vec();
        y[i] += di;
        y[j] += dj;
        g(&y)
    };
    if i == j {
        (at(h, 0.0) - 2.0 * g(x) + at(-h, 0.0)) / (h * h)
    } else {
        (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h)
    }
}

/// Least-squares line `y = a + b x` and its coefficient of determination.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let ss_res: f64 = x.iter().zip(y).map(|(xi, yi)| (yi - a - b * xi).powi(2)).sum();
    let ss_tot: f64 = y.iter().map(|yi| (yi - my).powi(2)).sum();
    (a, b, 1.0 - ss_res / ss_tot)
}

fn objective(it: &RandomIterate, f: &[f64], rho: &[f64]) -> f64 {
    smoothfwd::eval_z(&it.problem, f, rho, it.barriers, &vec![0.0; it.problem.m()]).unwrap()
}

fn residuals(it: &RandomIterate, f: &[f64], rho: &[f64]) -> Vec<f64> {
    let curve = smoothfwd::ForwardCurve { grid: it.problem.grid.clone(), f: f.to_vec() };
    it.problem
        .schedules
        .iter()
        .zip(rho)
        .map(|(s, r)| smoothfwd::constraint_residual(&curve, *r, s).unwrap().value)
        .collect()
}

/// Worst relative disagreement between the model at `it` and central
/// differences of the objective and constraints. Each block is compared with
/// a floor of `1e-3` times its largest entry.
pub fn linearization_error(it: &RandomIterate) -> f64 {
    const H: f64 = 1e-5;
    let p = &it.problem;
    let (n, m) = (p.n(), p.m());
    let build = |f: &[f64], rho: &[f64]| smoothfwd::build_model(p, f, rho, it.barriers).unwrap();
    let model = build(&it.f, &it.rho);
    let mut worst = 0.0f64;
    let mut cmp = |a: &[f64], b: &[f64]| {
        let scale = b.iter().fold(0.0f64, |s, x| s.max(x.abs()));
        worst = worst.max(max_rel_err(a, b, 1e-3 * scale.max(1e-300)));
    };

    let c_fd: Vec<f64> = (0..n).map(|i| central_diff(&it.f, i, H, |f| objective(it, f, &it.rho))).collect();
    cmp(&model.c, &c_fd);

    let dense = model.q.to_dense();
    let mut q_fd = vec![vec![0.0; n]; n];
    for s in 0..n {
        let mut fp = it.f.clone();
        let mut fm = it.f.clone();
        fp[s] += H;
        fm[s] -= H;
        let (cp, cm) = (build(&fp, &it.rho).c, build(&fm, &it.rho).c);
        for r in 0..n {
            q_fd[r][s] = (cp[r] - cm[r]) / (2.0 * H);
        }
    }
    cmp(&dense.concat(), &q_fd.concat());

    cmp(&model.a, &residuals(it, &it.f, &it.rho));
    for j in 0..m {
        let col: Vec<f64> = (0..n).map(|r| model.b_at(r, j)).collect();
        let fd: Vec<f64> = (0..n).map(|r| central_diff(&it.f, r, H, |f| residuals(it, f, &it.rho)[j])).collect();
        cmp(&col, &fd);
        let unit = central_diff(&it.rho, j, H, |rho| residuals(it, &it.f, rho)[j]);
        cmp(&[unit], &[1.0]);
    }

    let d_fd: Vec<f64> = (0..m).map(|j| central_diff(&it.rho, j, H, |rho| objective(it, &it.f, rho))).collect();
    cmp(&model.d, &d_fd);
    let m_fd: Vec<f64> = (0..m)
        .map(|j| {
            let mut rp = it.rho.clone();
            let mut rm = it.rho.clone();
            rp[j] += H;
            rm[j] -= H;
            (build(&it.f, &rp).d[j] - build(&it.f, &rm).d[j]) / (2.0 * H)
        })
        .collect();
    cmp(&model.m, &m_fd);
    worst
}
