//! Reference implementations used as test oracles. They share no code with
//! the library beyond its public types.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `psi(n)` for a positive integer via the harmonic series.
pub fn digamma_int(n: usize) -> f64 {
    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
    -EULER_GAMMA + (1..n).map(|j| 1.0 / j as f64).sum::<f64>()
}

/// Kozachenko–Leonenko entropy by exhaustive neighbour search.
pub fn brute_knn_entropy(rows: &[Vec<f64>], k: usize) -> f64 {
    let n = rows.len();
    let d = rows[0].len();
    let mut log_sum = 0.0;
    for i in 0..n {
        let mut dist: Vec<f64> = (0..n)
            .filter(|&j| j != i)
            .map(|j| {
                rows[i]
                    .iter()
                    .zip(&rows[j])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        dist.sort_by(f64::total_cmp);
        log_sum += (2.0 * dist[k - 1]).ln();
    }
    digamma_int(n) - digamma_int(k) + d as f64 * log_sum / n as f64
}

/// Pseudo-observations `#{s : x_s <= x_t} / T` per column.
pub fn brute_copula(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len();
    rows.iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .map(|(j, &v)| rows.iter().filter(|o| o[j] <= v).count() as f64 / n as f64)
                .collect()
        })
        .collect()
}

/// Least squares with intercept through the normal equations, solved by
/// Gaussian elimination with partial pivoting. Returns `(intercept, coefficients)`.
pub fn ols_normal_equations(x: &[Vec<f64>], y: &[f64]) -> (f64, Vec<f64>) {
    let p = x[0].len() + 1;
    let design: Vec<Vec<f64>> = x
        .iter()
        .map(|r| std::iter::once(1.0).chain(r.iter().copied()).collect())
        .collect();
    let mut a = vec![vec![0.0; p + 1]; p];
    for (row, &target) in design.iter().zip(y) {
        for i in 0..p {
            for j in 0..p {
                a[i][j] += row[i] * row[j];
            }
            a[i][p] += row[i] * target;
        }
    }
    for col in 0..p {
        let pivot = (col..p)
            .max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        for r in col + 1..p {
            let f = a[r][col] / a[col][col];
            let pivot_row = a[col].clone();
            for (dst, src) in a[r][col..].iter_mut().zip(&pivot_row[col..]) {
                *dst -= f * src;
            }
        }
    }
    let mut beta = vec![0.0; p];
    for r in (0..p).rev() {
        let s: f64 = (r + 1..p).map(|c| a[r][c] * beta[c]).sum();
        beta[r] = (a[r][p] - s) / a[r][r];
    }
    (beta[0], beta[1..].to_vec())
}

/// Dual of epsilon-SVR in minimisation form over `v = alpha - alpha*`:
/// `0.5 v'Kv + eps * sum|v| - y'v`.
pub fn svr_dual_objective(kernel: &[Vec<f64>], y: &[f64], eps: f64, v: &[f64]) -> f64 {
    let n = y.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += v[i] * kernel[i][j] * v[j];
        }
    }
    0.5 * quad + eps * v.iter().map(|x| x.abs()).sum::<f64>() - y.iter().zip(v).map(|(a, b)| a * b).sum::<f64>()
}

/// Projection of `z` onto `{b in [0, c]^2n : sum(b[..n]) = sum(b[n..])}` by
/// bisection on the multiplier of the equality constraint.
fn project(z: &[f64], n: usize, c: f64) -> Vec<f64> {
    let sign = |i: usize| if i < n { 1.0 } else { -1.0 };
    let at = |lambda: f64| -> (Vec<f64>, f64) {
        let b: Vec<f64> = z
            .iter()
            .enumerate()
            .map(|(i, &zi)| (zi - lambda * sign(i)).clamp(0.0, c))
            .collect();
        let g = b.iter().enumerate().map(|(i, bi)| sign(i) * bi).sum();
        (b, g)
    };
    let span = z.iter().fold(0.0f64, |m, v| m.max(v.abs())) + c + 1.0;
    let (mut lo, mut hi) = (-span, span);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if at(mid).1 > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi)).0
}

/// Accelerated projected gradient on the 2n-variable epsilon-SVR dual.
/// Returns `v = alpha - alpha*` and the dual objective.
pub fn svr_qp_oracle(kernel: &[Vec<f64>], y: &[f64], c: f64, eps: f64) -> (Vec<f64>, f64) {
    let n = y.len();
    let lipschitz = 2.0
        * kernel
            .iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
        + 1e-12;
    let grad = |b: &[f64]| -> Vec<f64> {
        let v: Vec<f64> = (0..n).map(|i| b[i] - b[n + i]).collect();
        let kv: Vec<f64> = (0..n).map(|i| (0..n).map(|j| kernel[i][j] * v[j]).sum()).collect();
        (0..2 * n)
            .map(|s| {
                if s < n {
                    kv[s] + eps - y[s]
                } else {
                    -kv[s - n] + eps + y[s - n]
                }
            })
            .collect()
    };
    let mut b = vec![0.0; 2 * n];
    let mut w = b.clone();
    let mut t = 1.0f64;
    for _ in 0..200_000 {
        let g = grad(&w);
        let z: Vec<f64> = w.iter().zip(&g).map(|(a, gi)| a - gi / lipschitz).collect();
        let next = project(&z, n, c);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        w = next
            .iter()
            .zip(&b)
            .map(|(a, p)| a + (t - 1.0) / t_next * (a - p))
            .collect();
        b = next;
        t = t_next;
        // Successive iterates can coincide during a momentum bounce, so stop
        // on the projected-gradient residual instead.
        let gb = grad(&b);
        let step: Vec<f64> = b.iter().zip(&gb).map(|(a, gi)| a - gi / lipschitz).collect();
        let residual = project(&step, n, c)
            .iter()
            .zip(&b)
            .map(|(a, p)| (a - p).abs())
            .fold(0.0, f64::max);
        if residual < 1e-13 {
            break;
        }
    }
    let v: Vec<f64> = (0..n).map(|i| b[i] - b[n + i]).collect();
    let obj = svr_dual_objective(kernel, y, eps, &v);
    (v, obj)
}

pub fn linear_kernel(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn rbf_kernel(gamma: f64) -> impl Fn(&[f64], &[f64]) -> f64 {
    move |a, b| (-gamma * a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>()).exp()
}

/// Per-column `(x - mean) / std` with population std, 1 for constant columns.
pub fn standardize(x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = x.len() as f64;
    let d = x[0].len();
    let stats: Vec<(f64, f64)> = (0..d)
        .map(|j| {
            let m = x.iter().map(|r| r[j]).sum::<f64>() / n;
            let v = x.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / n;
            (m, if v > 0.0 { v.sqrt() } else { 1.0 })
        })
        .collect();
    x.iter()
        .map(|r| r.iter().zip(&stats).map(|(v, (m, s))| (v - m) / s).collect())
        .collect()
}

/// Small random regression instance.
pub fn small_instance(seed: u64, n: usize, d: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let y: Vec<f64> = x
        .iter()
        .map(|r| r.iter().sum::<f64>().sin() * 3.0 + rng.random_range(-0.5..0.5))
        .collect();
    (x, y)
}

pub fn names(d: usize) -> Vec<String> {
    (0..d).map(|i| format!("f{i}")).collect()
}
