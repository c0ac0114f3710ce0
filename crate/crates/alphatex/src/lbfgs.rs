//! Limited-memory BFGS with a strong-Wolfe line search.

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    GradientSmall,
    MaxIterations,
    LineSearchFailed,
}

#[derive(Debug, Clone)]
pub struct LbfgsOptions {
    pub max_iterations: usize,
    pub memory: usize,
    pub grad_tolerance: f64,
    pub c1: f64,
    pub c2: f64,
    /// Initial trial step of the very first line search.
    pub initial_step: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            memory: 20,
            grad_tolerance: 1e-10,
            c1: 1e-4,
            c2: 0.9,
            initial_step: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub iter: usize,
    pub loss: f64,
    pub grad_norm: f64,
}

#[derive(Debug)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub loss: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub stop: StopReason,
    pub history: Vec<IterationRecord>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

struct Pair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

/// Two-loop recursion producing the search direction -H g.
fn two_loop(g: &[f64], pairs: &[Pair]) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(pairs.len());
    for p in pairs.iter().rev() {
        let a = p.rho * dot(&p.s, &q);
        for (qi, yi) in q.iter_mut().zip(&p.y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some(last) = pairs.last() {
        let gamma = dot(&last.s, &last.y) / dot(&last.y, &last.y);
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
    }
    for (p, &a) in pairs.iter().zip(alphas.iter().rev()) {
        let b = p.rho * dot(&p.y, &q);
        for (qi, si) in q.iter_mut().zip(&p.s) {
            *qi += (a - b) * si;
        }
    }
    for qi in q.iter_mut() {
        *qi = -*qi;
    }
    q
}

struct LinePoint {
    t: f64,
    f: f64,
    df: f64,
    x: Vec<f64>,
    g: Vec<f64>,
}

/// Strong-Wolfe line search (bracket then zoom with bisection).
fn line_search<F>(
    f0: f64,
    df0: f64,
    x0: &[f64],
    d: &[f64],
    t_init: f64,
    c1: f64,
    c2: f64,
    eval: &mut F,
) -> Option<LinePoint>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let probe = |t: f64, eval: &mut F| -> Option<LinePoint> {
        let x: Vec<f64> = x0.iter().zip(d).map(|(xi, di)| xi + t * di).collect();
        let (f, g) = eval(&x)?;
        if !f.is_finite() {
            return None;
        }
        let df = dot(&g, d);
        Some(LinePoint { t, f, df, x, g })
    };
    let wolfe = |p: &LinePoint| p.f <= f0 + c1 * p.t * df0 && p.df.abs() <= c2 * df0.abs();
    let mut lo_t = 0.0;
    let mut lo_f = f0;
    let mut hi: Option<LinePoint> = None;
    let mut t = t_init;
    let mut prev: Option<LinePoint> = None;
    for _ in 0..20 {
        match probe(t, eval) {
            Some(p) => {
                if wolfe(&p) {
                    return Some(p);
                }
                if p.f > f0 + c1 * p.t * df0 || prev.as_ref().is_some_and(|q| p.f >= q.f) {
                    if let Some(q) = prev {
                        lo_t = q.t;
                        lo_f = q.f;
                    }
                    hi = Some(p);
                    break;
                }
                if p.df >= 0.0 {
                    // Minimum bracketed between the previous point and this one.
                    if let Some(q) = prev {
                        lo_t = q.t;
                        lo_f = q.f;
                    }
                    hi = Some(p);
                    break;
                }
                t *= 2.0;
                prev = Some(p);
            }
            None => {
                // Non-finite loss: treat as too-large step and shrink.
                hi = Some(LinePoint {
                    t,
                    f: f64::INFINITY,
                    df: 0.0,
                    x: Vec::new(),
                    g: Vec::new(),
                });
                break;
            }
        }
    }
    let mut hi = hi?;
    let mut best: Option<LinePoint> = None;
    for _ in 0..40 {
        let mid = 0.5 * (lo_t + hi.t);
        if mid <= 0.0 || (hi.t - lo_t).abs() < 1e-16 * t_init.max(1.0) {
            break;
        }
        match probe(mid, eval) {
            Some(p) => {
                if wolfe(&p) {
                    return Some(p);
                }
                if p.f > f0 + c1 * p.t * df0 || p.f >= lo_f {
                    hi = p;
                } else if p.df * (hi.t - lo_t) >= 0.0 {
                    hi = LinePoint {
                        t: lo_t,
                        f: lo_f,
                        df: 0.0,
                        x: Vec::new(),
                        g: Vec::new(),
                    };
                    lo_t = p.t;
                    lo_f = p.f;
                    best = Some(p);
                } else {
                    lo_t = p.t;
                    lo_f = p.f;
                    best = Some(p);
                }
            }
            None => {
                hi = LinePoint {
                    t: mid,
                    f: f64::INFINITY,
                    df: 0.0,
                    x: Vec::new(),
                    g: Vec::new(),
                };
            }
        }
    }
    // Fall back to the best sufficient-decrease point seen, if any.
    best.filter(|p| p.f < f0)
}

/// Minimizes `objective` starting at `x0`. The objective returns loss and
/// gradient; an Err or non-finite loss is treated as a line-search failure.
pub fn minimize<F>(objective: F, x0: Vec<f64>, opts: &LbfgsOptions) -> Result<LbfgsResult>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    minimize_with_progress(objective, x0, opts, |_| {})
}

/// Same as `minimize`, invoking `progress` after every iteration record.
pub fn minimize_with_progress<F, P>(
    mut objective: F,
    x0: Vec<f64>,
    opts: &LbfgsOptions,
    mut progress: P,
) -> Result<LbfgsResult>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    P: FnMut(&IterationRecord),
{
    let mut x = x0;
    let (mut f, mut g) = objective(&x)?;
    let mut history = Vec::new();
    let mut pairs: Vec<Pair> = Vec::new();
    let mut best_x = x.clone();
    let mut best_f = f;
    let mut failures = 0usize;
    let mut stop = StopReason::MaxIterations;
    let mut iters = 0usize;
    let rec0 = IterationRecord {
        iter: 0,
        loss: f,
        grad_norm: norm(&g),
    };
    progress(&rec0);
    history.push(rec0);
    for iter in 1..=opts.max_iterations {
        let gn = norm(&g);
        if gn < opts.grad_tolerance {
            stop = StopReason::GradientSmall;
            break;
        }
        let mut d = two_loop(&g, &pairs);
        let mut df0 = dot(&g, &d);
        if df0 >= 0.0 {
            // Not a descent direction: drop the memory and use steepest descent.
            pairs.clear();
            d = g.iter().map(|v| -v).collect();
            df0 = -gn * gn;
        }
        let t_init = if pairs.is_empty() && iters == 0 {
            opts.initial_step / gn.max(1.0)
        } else {
            1.0
        };
        let mut evals = 0usize;
        let mut eval = |xt: &[f64]| -> Option<(f64, Vec<f64>)> {
            evals += 1;
            objective(xt).ok().filter(|(f, _)| f.is_finite())
        };
        match line_search(f, df0, &x, &d, t_init, opts.c1, opts.c2, &mut eval) {
            Some(p) => {
                failures = 0;
                let s: Vec<f64> = p.x.iter().zip(&x).map(|(a, b)| a - b).collect();
                let yv: Vec<f64> = p.g.iter().zip(&g).map(|(a, b)| a - b).collect();
                let sy = dot(&s, &yv);
                if sy > 1e-10 * norm(&yv) * norm(&s) {
                    if pairs.len() == opts.memory {
                        pairs.remove(0);
                    }
                    pairs.push(Pair {
                        rho: 1.0 / sy,
                        s,
                        y: yv,
                    });
                }
                x = p.x;
                f = p.f;
                g = p.g;
                if f < best_f {
                    best_f = f;
                    best_x = x.clone();
                }
            }
            None => {
                failures += 1;
                pairs.clear();
                if failures >= 2 {
                    stop = StopReason::LineSearchFailed;
                    iters = iter;
                    break;
                }
            }
        }
        iters = iter;
        let rec = IterationRecord {
            iter,
            loss: f,
            grad_norm: norm(&g),
        };
        progress(&rec);
        history.push(rec);
    }
    if f > best_f {
        x = best_x;
        f = best_f;
    }
    let gn = norm(&g);
    Ok(LbfgsResult {
        x,
        loss: f,
        grad_norm: gn,
        iterations: iters,
        stop,
        history,
    })
}
