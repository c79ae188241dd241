//! Reference solvers for tests. Everything here is deliberately naive and
//! shares no code with the main library. Matrices are row-major `Vec<f64>`.

/// Soft-margin SVM dual solved by accelerated projected gradient.
pub struct QpSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    /// `Σα − ½αᵀQα`.
    pub objective: f64,
}

/// Maximizes `Σα − ½ Σ α_i α_j y_i y_j K_ij` over `0 ≤ α ≤ C`, `yᵀα = 0`.
pub fn svm_dual_qp(k: &[f64], y: &[f64], c: f64, iterations: usize) -> QpSolution {
    let m = y.len();
    assert_eq!(k.len(), m * m);
    let q: Vec<f64> = (0..m * m).map(|t| y[t / m] * y[t % m] * k[t]).collect();
    let grad = |a: &[f64]| -> Vec<f64> {
        (0..m)
            .map(|i| (0..m).map(|j| q[i * m + j] * a[j]).sum::<f64>() - 1.0)
            .collect()
    };
    // Lipschitz bound: largest row sum of |Q|
    let lip = (0..m)
        .map(|i| (0..m).map(|j| q[i * m + j].abs()).sum::<f64>())
        .fold(1e-12, f64::max);
    let step = 1.0 / lip;

    let mut a = vec![0.0; m];
    let mut value = 0.0;
    let mut z = a.clone();
    let mut t = 1.0f64;
    let mut still = 0;
    for _ in 0..iterations {
        let g = grad(&z);
        let v: Vec<f64> = (0..m).map(|i| z[i] - step * g[i]).collect();
        let next = project(&v, y, c);
        let next_value = dual_value(&q, &next);
        // restart momentum whenever the objective drops
        if next_value < value {
            z = a.clone();
            t = 1.0;
            continue;
        }
        let moved = next.iter().zip(&a).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        still = if moved < 1e-15 * (1.0 + c) { still + 1 } else { 0 };
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let w = (t - 1.0) / t_next;
        z = (0..m).map(|i| next[i] + w * (next[i] - a[i])).collect();
        a = next;
        value = next_value;
        t = t_next;
        if still >= 50 {
            break;
        }
    }
    let objective = dual_value(&q, &a);
    let g = grad(&a);
    let eps = 1e-9 * c;
    let free: Vec<usize> = (0..m).filter(|&i| a[i] > eps && a[i] < c - eps).collect();
    let bias = if free.is_empty() {
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for i in 0..m {
            let v = -y[i] * g[i];
            let at_upper = a[i] >= c - eps;
            // α = 0 with y = +1, or α = C with y = −1, bounds b from below
            if (y[i] > 0.0) != at_upper {
                lo = lo.max(v);
            } else {
                hi = hi.min(v);
            }
        }
        if lo.is_finite() && hi.is_finite() {
            0.5 * (lo + hi)
        } else if lo.is_finite() {
            lo
        } else {
            hi
        }
    } else {
        free.iter().map(|&i| -y[i] * g[i]).sum::<f64>() / free.len() as f64
    };
    QpSolution { alpha: a, bias, objective }
}

fn dual_value(q: &[f64], a: &[f64]) -> f64 {
    let m = a.len();
    let mut quad = 0.0;
    for i in 0..m {
        for j in 0..m {
            quad += a[i] * q[i * m + j] * a[j];
        }
    }
    a.iter().sum::<f64>() - 0.5 * quad
}

/// Euclidean projection onto `{0 ≤ α ≤ C, yᵀα = 0}`: `α = clip(v − λy)` with
/// `λ` found by bisection on the monotone map `λ ↦ yᵀα(λ)`.
pub fn project(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let at = |lam: f64| -> Vec<f64> { v.iter().zip(y).map(|(vi, yi)| (vi - lam * yi).clamp(0.0, c)).collect() };
    let h = |lam: f64| -> f64 { at(lam).iter().zip(y).map(|(a, yi)| a * yi).sum() };
    let span = v.iter().map(|x| x.abs()).fold(0.0, f64::max) + c + 1.0;
    let (mut lo, mut hi) = (-span, span);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

/// Central difference `(f(x + h e_k) − f(x − h e_k)) / 2h` for every k.
pub fn central_difference<F: FnMut(&[f64]) -> f64>(x: &[f64], h: f64, mut f: F) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|k| {
            p[k] = x[k] + h;
            let up = f(&p);
            p[k] = x[k] - h;
            let down = f(&p);
            p[k] = x[k];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Cyclic Jacobi eigenvalue iteration for a symmetric `n × n` matrix.
/// Returns eigenvalues in descending order with unit eigenvectors as columns
/// of the row-major `n × n` matrix.
pub fn jacobi_eigen(a: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(a.len(), n * n);
    let mut a = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vectors = vec![0.0; n * n];
    for (new, &old) in order.iter().enumerate() {
        for k in 0..n {
            vectors[k * n + new] = v[k * n + old];
        }
    }
    (values, vectors)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_dual() {
        let s = svm_dual_qp(&[1.0, 0.0, 0.0, 1.0], &[1.0, -1.0], 10.0, 5000);
        assert!((s.alpha[0] - 1.0).abs() < 1e-9 && (s.alpha[1] - 1.0).abs() < 1e-9);
        assert!((s.objective - 1.0).abs() < 1e-12);
        assert!(s.bias.abs() < 1e-9);
    }

    #[test]
    fn projection_is_feasible() {
        let v = [3.0, -1.0, 0.5, 2.0, 0.2];
        let y = [1.0, 1.0, -1.0, -1.0, 1.0];
        let a = project(&v, &y, 1.0);
        let eq: f64 = a.iter().zip(&y).map(|(a, y)| a * y).sum();
        assert!(eq.abs() < 1e-12);
        assert!(a.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn jacobi_small() {
        let (vals, vecs) = jacobi_eigen(&[2.0, 1.0, 1.0, 2.0], 2);
        assert!((vals[0] - 3.0).abs() < 1e-12 && (vals[1] - 1.0).abs() < 1e-12);
        assert!((vecs[0].abs() - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn central_difference_of_cubic() {
        let g = central_difference(&[1.0, 2.0], 1e-4, |x| x[0].powi(3) + x[0] * x[1]);
        assert!((g[0] - 5.0).abs() < 1e-7 && (g[1] - 1.0).abs() < 1e-7);
    }
}
