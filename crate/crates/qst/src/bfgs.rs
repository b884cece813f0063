//! Dense BFGS with a strong-Wolfe line search.
//!
//! Self-contained quasi-Newton minimizer over `ℝⁿ` for objectives that
//! return value and gradient together. The inverse Hessian is kept as a
//! dense matrix; the dimensions in this crate stay in the low hundreds.

use ndarray::{Array1, Array2};

/// Why the iteration stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    /// Accepted step shorter than the step tolerance.
    StepTolerance,
    /// Gradient vanished (found an exact stationary point).
    ZeroGradient,
    /// The line search could not make progress.
    LineSearchStall,
    /// Iteration budget exhausted.
    MaxIterations,
}

#[derive(Clone, Copy, Debug)]
pub struct BfgsOptions {
    pub max_iters: usize,
    /// Stop when the accepted step norm drops below this.
    pub step_tol: f64,
    /// Armijo (sufficient decrease) constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            max_iters: 10_000,
            step_tol: 1e-12,
            c1: 1e-4,
            c2: 0.9,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BfgsOutcome {
    pub x: Array1<f64>,
    pub value: f64,
    pub grad_norm: f64,
    /// Accepted BFGS iterations.
    pub iterations: usize,
    pub stop: StopReason,
}

/// Minimizes `f` starting from `x0`. `f` returns `(value, gradient)`.
///
/// Accepted iterates never increase the objective (strong-Wolfe steps
/// satisfy sufficient decrease). On a stationary start the function
/// returns immediately with zero iterations.
pub fn minimize<F>(mut f: F, x0: Array1<f64>, opts: &BfgsOptions) -> BfgsOutcome
where
    F: FnMut(&Array1<f64>) -> (f64, Array1<f64>),
{
    let n = x0.len();
    let mut x = x0;
    let (mut fx, mut gx) = f(&x);
    let mut h = Array2::<f64>::eye(n);
    let mut first_update = true;

    for iter in 0..opts.max_iters {
        let grad_norm = norm(&gx);
        if grad_norm == 0.0 {
            return outcome(x, fx, grad_norm, iter, StopReason::ZeroGradient);
        }
        let mut dir = -h.dot(&gx);
        let mut slope = dir.dot(&gx);
        if !slope.is_finite() || slope >= 0.0 {
            // Inverse Hessian lost positive definiteness; restart from
            // steepest descent.
            h = Array2::eye(n);
            dir = -gx.clone();
            slope = -grad_norm * grad_norm;
            if slope == 0.0 {
                return outcome(x, fx, grad_norm, iter, StopReason::ZeroGradient);
            }
        }

        let ls = match strong_wolfe(&mut f, &x, fx, &dir, slope, opts) {
            Some(ls) => ls,
            None => return outcome(x, fx, grad_norm, iter, StopReason::LineSearchStall),
        };

        let step = &dir * ls.t;
        let x_new = &x + &step;
        let s = step;
        let y = &ls.grad - &gx;

        x = x_new;
        fx = ls.value;
        gx = ls.grad;

        let step_norm = norm(&s);
        if step_norm < opts.step_tol {
            return outcome(x, fx, norm(&gx), iter + 1, StopReason::StepTolerance);
        }

        let sy = s.dot(&y);
        if sy > 1e-12 * norm(&s) * norm(&y) {
            if first_update {
                // Scale the seed matrix before the first update; this is
                // the usual heuristic that fixes the initial step size.
                let yy = y.dot(&y);
                if yy > 0.0 {
                    let scale = sy / yy;
                    h.mapv_inplace(|v| v * scale);
                }
                first_update = false;
            }
            bfgs_update(&mut h, &s, &y, sy);
        }
    }
    let grad_norm = norm(&gx);
    outcome(x, fx, grad_norm, opts.max_iters, StopReason::MaxIterations)
}

fn outcome(
    x: Array1<f64>,
    value: f64,
    grad_norm: f64,
    iterations: usize,
    stop: StopReason,
) -> BfgsOutcome {
    BfgsOutcome {
        x,
        value,
        grad_norm,
        iterations,
        stop,
    }
}

fn norm(v: &Array1<f64>) -> f64 {
    v.dot(v).sqrt()
}

/// `H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ` with `ρ = 1/(yᵀs)`.
fn bfgs_update(h: &mut Array2<f64>, s: &Array1<f64>, y: &Array1<f64>, sy: f64) {
    let rho = 1.0 / sy;
    let hy = h.dot(y);
    let yhy = y.dot(&hy);
    let n = h.nrows();
    for i in 0..n {
        for j in 0..n {
            h[(i, j)] += rho * rho * yhy * s[i] * s[j] + rho * s[i] * s[j]
                - rho * (s[i] * hy[j] + hy[i] * s[j]);
        }
    }
}

struct LineSearchResult {
    t: f64,
    value: f64,
    grad: Array1<f64>,
}

/// Strong-Wolfe line search (bracket + zoom with cubic interpolation).
fn strong_wolfe<F>(
    f: &mut F,
    x: &Array1<f64>,
    f0: f64,
    dir: &Array1<f64>,
    slope0: f64,
    opts: &BfgsOptions,
) -> Option<LineSearchResult>
where
    F: FnMut(&Array1<f64>) -> (f64, Array1<f64>),
{
    const MAX_BRACKET: usize = 20;
    const MAX_ZOOM: usize = 30;
    let c1 = opts.c1;
    let c2 = opts.c2;

    let eval = |f: &mut F, t: f64| -> (f64, Array1<f64>, f64) {
        let xt = x + &(dir * t);
        let (v, g) = f(&xt);
        let slope = g.dot(dir);
        (v, g, slope)
    };

    let mut t_prev = 0.0f64;
    let mut f_prev = f0;
    let mut slope_prev = slope0;
    let mut t = 1.0f64;

    let mut bracket: Option<(f64, f64, f64, f64, f64, f64)> = None;
    let mut result: Option<LineSearchResult> = None;

    for i in 0..MAX_BRACKET {
        let (ft, gt, st) = eval(f, t);
        if !ft.is_finite() {
            // Retreat into the finite region.
            t = 0.5 * (t_prev + t);
            continue;
        }
        if ft > f0 + c1 * t * slope0 || (i > 0 && ft >= f_prev) {
            bracket = Some((t_prev, f_prev, slope_prev, t, ft, st));
            break;
        }
        if st.abs() <= -c2 * slope0 {
            result = Some(LineSearchResult {
                t,
                value: ft,
                grad: gt,
            });
            break;
        }
        if st >= 0.0 {
            bracket = Some((t, ft, st, t_prev, f_prev, slope_prev));
            break;
        }
        t_prev = t;
        f_prev = ft;
        slope_prev = st;
        t *= 2.0;
    }

    if let Some(r) = result {
        return Some(r);
    }
    let (mut lo, mut f_lo, mut s_lo, mut hi, mut f_hi, mut s_hi) = bracket?;

    for _ in 0..MAX_ZOOM {
        let mut tj = cubic_interpolate(lo, f_lo, s_lo, hi, f_hi, s_hi);
        let (a, b) = if lo < hi { (lo, hi) } else { (hi, lo) };
        let width = b - a;
        if !tj.is_finite() || tj <= a + 0.1 * width || tj >= b - 0.1 * width {
            tj = 0.5 * (a + b);
        }
        let (ftj, gtj, stj) = eval(f, tj);
        if ftj > f0 + c1 * tj * slope0 || ftj >= f_lo {
            hi = tj;
            f_hi = ftj;
            s_hi = stj;
        } else {
            if stj.abs() <= -c2 * slope0 {
                return Some(LineSearchResult {
                    t: tj,
                    value: ftj,
                    grad: gtj,
                });
            }
            if stj * (hi - lo) >= 0.0 {
                hi = lo;
                f_hi = f_lo;
                s_hi = s_lo;
            }
            lo = tj;
            f_lo = ftj;
            s_lo = stj;
        }
        if width < 1e-16 * (1.0 + a.abs()) {
            break;
        }
    }
    // Accept the best bracketed point if it at least satisfies Armijo;
    // otherwise report a stall.
    if f_lo < f0 + c1 * lo * slope0 && lo > 0.0 {
        let (v, g, _) = eval(f, lo);
        return Some(LineSearchResult {
            t: lo,
            value: v,
            grad: g,
        });
    }
    None
}

/// Minimizer of the cubic through `(x1, f1, g1)` and `(x2, f2, g2)`.
fn cubic_interpolate(x1: f64, f1: f64, g1: f64, x2: f64, f2: f64, g2: f64) -> f64 {
    let d1 = g1 + g2 - 3.0 * (f1 - f2) / (x1 - x2);
    let d2_sqr = d1 * d1 - g1 * g2;
    if d2_sqr >= 0.0 {
        let d2 = d2_sqr.sqrt().copysign(x2 - x1);
        x2 - (x2 - x1) * (g2 + d2 - d1) / (g2 - g1 + 2.0 * d2)
    } else {
        0.5 * (x1 + x2)
    }
}
