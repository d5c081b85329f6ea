//! Box-bounded quasi-Newton minimization with finite-difference gradients.
//!
//! A projected BFGS: the inverse-Hessian approximation is updated with the
//! usual rank-two formula, trial points are clamped into the box, and
//! coordinates pinned at a bound with an outward gradient are frozen for the
//! step. Objectives are treated as black boxes; `+inf`/NaN mark infeasible
//! points and make the line search back off.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SpeError};

#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        assert_eq!(lower.len(), upper.len());
        Self { lower, upper }
    }

    pub fn unbounded(dim: usize) -> Self {
        Self::new(vec![f64::NEG_INFINITY; dim], vec![f64::INFINITY; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    fn clamp(&self, x: &mut [f64]) {
        for ((v, &lo), &hi) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(lo, hi);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimizeOptions {
    /// Stop when the projected gradient's max-norm drops below this.
    pub grad_tol: f64,
    /// Stop when an accepted step changes the objective by less than
    /// `f_tol * (1 + |f|)`.
    pub f_tol: f64,
    pub max_iter: usize,
    /// Cap on the max-norm of a single trial step.
    pub max_step: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            grad_tol: 1e-6,
            f_tol: 1e-13,
            max_iter: 200,
            max_step: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    GradientTolerance,
    FunctionTolerance,
    /// No descent step could be found even after resetting the curvature
    /// model; the point is a numerical stationary point.
    Stalled,
    MaxIterations,
}

impl Termination {
    pub fn converged(self) -> bool {
        !matches!(self, Termination::MaxIterations)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    pub termination: Termination,
}

/// Central-difference gradient, falling back to one-sided differences at the
/// box edges.
pub fn numerical_gradient<F>(f: &F, x: &[f64], fx: f64, bounds: &Bounds) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = 6e-6 * x[i].abs().max(1.0);
            let up = (x[i] + h).min(bounds.upper[i]);
            let down = (x[i] - h).max(bounds.lower[i]);
            probe[i] = up;
            let f_up = f(&probe);
            probe[i] = down;
            let f_down = f(&probe);
            probe[i] = x[i];
            match (f_up.is_finite(), f_down.is_finite()) {
                (true, true) if up > down => (f_up - f_down) / (up - down),
                (true, false) if up > x[i] => (f_up - fx) / (up - x[i]),
                (false, true) if down < x[i] => (fx - f_down) / (x[i] - down),
                _ => 0.0,
            }
        })
        .collect()
}

fn projected_gradient(x: &[f64], g: &[f64], bounds: &Bounds) -> Vec<f64> {
    x.iter()
        .zip(g)
        .zip(bounds.lower.iter().zip(&bounds.upper))
        .map(|((&xi, &gi), (&lo, &hi))| {
            if (xi <= lo && gi > 0.0) || (xi >= hi && gi < 0.0) {
                0.0
            } else {
                gi
            }
        })
        .collect()
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimize `f` from `x0` inside `bounds`.
pub fn minimize<F>(f: F, x0: &[f64], bounds: &Bounds, opts: &MinimizeOptions) -> Result<Minimum>
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    if bounds.dim() != n {
        return Err(SpeError::Optimization(format!(
            "bounds have dimension {}, start has {n}",
            bounds.dim()
        )));
    }
    let mut x = x0.to_vec();
    bounds.clamp(&mut x);
    let mut fx = f(&x);
    if !fx.is_finite() {
        return Err(SpeError::Optimization(format!("objective is {fx} at the starting point")));
    }
    let mut g = numerical_gradient(&f, &x, fx, bounds);
    let mut h_inv = identity(n);
    let mut fresh_curvature = true;

    for iter in 0..opts.max_iter {
        let pg = projected_gradient(&x, &g, bounds);
        let gnorm = max_norm(&pg);
        if gnorm < opts.grad_tol {
            return Ok(Minimum {
                x,
                value: fx,
                iterations: iter,
                grad_norm: gnorm,
                termination: Termination::GradientTolerance,
            });
        }

        let mut dir: Vec<f64> = (0..n).map(|i| -dot(&h_inv[i], &pg)).collect();
        for i in 0..n {
            if pg[i] == 0.0 && ((x[i] <= bounds.lower[i] && dir[i] < 0.0) || (x[i] >= bounds.upper[i] && dir[i] > 0.0))
            {
                dir[i] = 0.0;
            }
        }
        if dot(&dir, &pg) >= 0.0 {
            h_inv = identity(n);
            fresh_curvature = true;
            dir = pg.iter().map(|v| -v).collect();
        }

        let dnorm = max_norm(&dir);
        let mut step = if dnorm > opts.max_step { opts.max_step / dnorm } else { 1.0 };
        let mut accepted = None;
        for _ in 0..60 {
            let mut trial: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + step * di).collect();
            bounds.clamp(&mut trial);
            let ft = f(&trial);
            let moved: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
            if ft.is_finite() && ft <= fx + 1e-4 * dot(&g, &moved) && max_norm(&moved) > 0.0 {
                accepted = Some((trial, ft, moved));
                break;
            }
            step *= 0.5;
        }

        let Some((x_new, f_new, s)) = accepted else {
            if fresh_curvature {
                return Ok(Minimum {
                    x,
                    value: fx,
                    iterations: iter,
                    grad_norm: gnorm,
                    termination: Termination::Stalled,
                });
            }
            h_inv = identity(n);
            fresh_curvature = true;
            continue;
        };

        let g_new = numerical_gradient(&f, &x_new, f_new, bounds);
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let small_change = (fx - f_new).abs() <= opts.f_tol * (1.0 + fx.abs());
        x = x_new;
        fx = f_new;
        g = g_new;

        if small_change {
            let pg = projected_gradient(&x, &g, bounds);
            return Ok(Minimum {
                x,
                value: fx,
                iterations: iter + 1,
                grad_norm: max_norm(&pg),
                termination: Termination::FunctionTolerance,
            });
        }

        if sy > 1e-14 {
            if fresh_curvature {
                let scale = sy / dot(&y, &y);
                h_inv = identity(n);
                for (i, row) in h_inv.iter_mut().enumerate() {
                    row[i] = scale;
                }
            }
            bfgs_update(&mut h_inv, &s, &y, sy);
            fresh_curvature = false;
        }
    }

    let pg = projected_gradient(&x, &g, bounds);
    Ok(Minimum {
        x,
        value: fx,
        iterations: opts.max_iter,
        grad_norm: max_norm(&pg),
        termination: Termination::MaxIterations,
    })
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

/// `H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T`
fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| dot(&h[i], y)).collect();
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}
