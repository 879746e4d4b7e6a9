//! Small unconstrained minimizers used by the ratio searches: limited-memory
//! BFGS with Armijo backtracking, and a Newton polish with a finite-difference
//! Hessian.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsConfig {
    pub max_iters: usize,
    pub memory: usize,
    /// Stop once the sup-norm of the gradient falls below this.
    pub grad_tol: f64,
    /// Stop after several iterations with relative improvement below this.
    pub f_tol: f64,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self {
            max_iters: 500,
            memory: 8,
            grad_tol: 1e-11,
            f_tol: 1e-15,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iters: usize,
    pub grad_norm: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sup_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Minimize `f`, which returns the value and writes the gradient. Non-finite
/// values are treated as outside the domain and rejected by the line search.
pub fn lbfgs<F>(f: F, x0: Vec<f64>, cfg: &LbfgsConfig) -> Minimum
where
    F: Fn(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    if !fx.is_finite() || n == 0 {
        return Minimum {
            grad_norm: f64::INFINITY,
            x,
            value: fx,
            iters: 0,
        };
    }
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(cfg.memory);
    let mut stalls = 0;
    let mut iters = 0;
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    while iters < cfg.max_iters {
        if sup_norm(&g) <= cfg.grad_tol {
            break;
        }
        iters += 1;
        // Two-loop recursion.
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &d);
            for (di, yi) in d.iter_mut().zip(y) {
                *di -= a * yi;
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = history.back() {
            let gamma = dot(s, y) / dot(y, y);
            for di in d.iter_mut() {
                *di *= gamma;
            }
        } else {
            let scale = 1.0 / sup_norm(&g).max(1.0);
            for di in d.iter_mut() {
                *di *= scale;
            }
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &d);
            for (di, si) in d.iter_mut().zip(s) {
                *di += (a - b) * si;
            }
        }
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            history.clear();
            d = g.iter().map(|v| -v / sup_norm(&g).max(1.0)).collect();
            slope = dot(&g, &d);
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            for i in 0..n {
                x_new[i] = x[i] + step * d[i];
            }
            let f_new = f(&x_new, &mut g_new);
            if f_new.is_finite() && f_new <= fx + 1e-4 * step * slope {
                accepted = Some(f_new);
                break;
            }
            step *= 0.5;
        }
        let Some(f_new) = accepted else {
            if history.is_empty() {
                break;
            }
            history.clear();
            continue;
        };

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-300 {
            if history.len() == cfg.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        let improvement = fx - f_new;
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        fx = f_new;
        if improvement <= cfg.f_tol * fx.abs().max(1e-300) {
            stalls += 1;
            if stalls >= 5 {
                break;
            }
        } else {
            stalls = 0;
        }
    }
    Minimum {
        grad_norm: sup_norm(&g),
        x,
        value: fx,
        iters,
    }
}

/// Newton iterations on the gradient with a central-difference Hessian.
/// Directions with negligible curvature (such as scale invariance) are
/// projected out. A step is kept only if it lowers the gradient norm without
/// raising the value by more than `value_slack`.
pub fn newton_polish<F>(f: F, start: Minimum, steps: usize, value_slack: f64) -> Minimum
where
    F: Fn(&[f64], &mut [f64]) -> f64,
{
    let n = start.x.len();
    let mut best = start;
    if n == 0 {
        return best;
    }
    let mut g = vec![0.0; n];
    let mut gp = vec![0.0; n];
    let mut gm = vec![0.0; n];
    for _ in 0..steps {
        let fx = f(&best.x, &mut g);
        if !fx.is_finite() {
            break;
        }
        let mut h = DMatrix::<f64>::zeros(n, n);
        let mut xp = best.x.clone();
        for j in 0..n {
            let e = 1e-5 * best.x[j].abs().max(1.0);
            xp[j] = best.x[j] + e;
            let a = f(&xp, &mut gp);
            xp[j] = best.x[j] - e;
            let b = f(&xp, &mut gm);
            xp[j] = best.x[j];
            if !a.is_finite() || !b.is_finite() {
                return best;
            }
            for i in 0..n {
                h[(i, j)] = (gp[i] - gm[i]) / (2.0 * e);
            }
        }
        let h = 0.5 * (&h + h.transpose());
        let eig = SymmetricEigen::new(h);
        let top = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let gv = DVector::from_column_slice(&g);
        let mut step = DVector::zeros(n);
        for k in 0..n {
            let lam = eig.eigenvalues[k];
            if lam.abs() > 1e-9 * top {
                let v = eig.eigenvectors.column(k);
                step -= v * (v.dot(&gv) / lam);
            }
        }
        let x_new: Vec<f64> = best.x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
        let f_new = f(&x_new, &mut gp);
        let gn = sup_norm(&gp);
        if f_new.is_finite() && gn < best.grad_norm && f_new <= fx + value_slack {
            best = Minimum {
                x: x_new,
                value: f_new,
                iters: best.iters + 1,
                grad_norm: gn,
            };
        } else {
            break;
        }
    }
    best
}
