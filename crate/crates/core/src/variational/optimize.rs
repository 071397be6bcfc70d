//! Forward-difference gradients, gradient descent and Powell's
//! conjugate-direction method, all recording best-so-far traces.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default forward-difference step.
pub const DEFAULT_FD_STEP: f64 = 1e-4;

/// Default spacing, in objective evaluations, between trace records.
pub const DEFAULT_TRACE_INTERVAL: u64 = 50;

/// Relative bracket width at which the golden-section search stops.
pub const GOLDEN_TOL: f64 = 1e-8;

/// First trial step of the bracketing search along a direction.
pub const LINE_SEARCH_STEP: f64 = 0.1;

const GOLD: f64 = 1.618_033_988_749_895;
const GOLDEN_C: f64 = 0.381_966_011_250_105_1;
const MAX_BRACKET_STEPS: usize = 60;
/// Consecutive increases tolerated before gradient descent halves its rate.
const DIVERGENCE_STEPS: usize = 10;

/// A scalar objective. `eval_index` identifies the call so that stochastic
/// objectives can derive their randomness from it; deterministic objectives ignore it.
pub trait Objective: Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64], eval_index: u64) -> Result<f64>;
}

/// Adapts a plain function of `x` to [`Objective`].
pub struct FnObjective<F> {
    dim: usize,
    f: F,
}

impl<F> FnObjective<F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> Objective for FnObjective<F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64], _eval_index: u64) -> Result<f64> {
        Ok((self.f)(x))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientEstimate {
    pub g: Vec<f64>,
    pub delta: f64,
    /// `f(x)` followed by `f(x + δ e_i)` for each coordinate.
    pub values: Vec<f64>,
}

impl GradientEstimate {
    pub fn norm(&self) -> f64 {
        self.g.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// `(f(x + δ e_i) − f(x)) / δ` for every coordinate, from `N + 1` evaluations
/// indexed `first_eval_index..first_eval_index + N + 1`. Evaluations run in parallel.
pub fn finite_diff_gradient<O: Objective + ?Sized>(
    obj: &O,
    x: &[f64],
    delta: f64,
    first_eval_index: u64,
) -> Result<GradientEstimate> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::validation(format!("delta must be positive, got {delta}")));
    }
    let values = (0..=x.len())
        .into_par_iter()
        .map(|i| {
            let mut y = x.to_vec();
            if i > 0 {
                y[i - 1] += delta;
            }
            let v = obj.value(&y, first_eval_index + i as u64)?;
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    value: v,
                    coordinate: i.checked_sub(1),
                });
            }
            Ok(v)
        })
        .collect::<Result<Vec<f64>>>()?;
    let g = values[1..].iter().map(|v| (v - values[0]) / delta).collect();
    Ok(GradientEstimate { g, delta, values })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub evals: u64,
    pub best_f: f64,
    pub best_x: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIterations,
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationTrace {
    pub records: Vec<TraceRecord>,
    pub best_f: f64,
    pub best_x: Vec<f64>,
    pub evals_used: u64,
    pub stop: StopReason,
    /// Events worth reporting, such as step-size reductions.
    pub notes: Vec<String>,
}

impl OptimizationTrace {
    /// `false` when the evaluation budget ran out first.
    pub fn complete(&self) -> bool {
        self.stop != StopReason::BudgetExhausted
    }
}

enum Stop {
    Budget,
    Failed(Error),
}

impl From<Error> for Stop {
    fn from(e: Error) -> Self {
        Stop::Failed(e)
    }
}

/// Counts evaluations, enforces the budget and keeps the best-so-far trace.
struct Tracker<'a, O: ?Sized> {
    obj: &'a O,
    evals: u64,
    budget: u64,
    interval: u64,
    best_f: f64,
    best_x: Vec<f64>,
    records: Vec<TraceRecord>,
}

impl<'a, O: Objective + ?Sized> Tracker<'a, O> {
    fn new(obj: &'a O, budget: u64, interval: u64) -> Self {
        Self {
            obj,
            evals: 0,
            budget,
            interval: interval.max(1),
            best_f: f64::INFINITY,
            best_x: Vec::new(),
            records: Vec::new(),
        }
    }

    fn eval(&mut self, x: &[f64]) -> std::result::Result<f64, Stop> {
        if self.evals >= self.budget {
            return Err(Stop::Budget);
        }
        let v = self.obj.value(x, self.evals)?;
        if !v.is_finite() {
            return Err(Stop::Failed(Error::NonFinite {
                value: v,
                coordinate: None,
            }));
        }
        self.observe(v, x);
        Ok(v)
    }

    fn observe(&mut self, v: f64, x: &[f64]) {
        self.evals += 1;
        if v < self.best_f {
            self.best_f = v;
            self.best_x = x.to_vec();
        }
        if self.evals == 1 || self.evals.is_multiple_of(self.interval) {
            self.push_record();
        }
    }

    fn push_record(&mut self) {
        self.records.push(TraceRecord {
            evals: self.evals,
            best_f: self.best_f,
            best_x: self.best_x.clone(),
        });
    }

    fn finish(mut self, stop: StopReason, notes: Vec<String>) -> OptimizationTrace {
        if self.records.last().map(|r| r.evals) != Some(self.evals) && self.evals > 0 {
            self.push_record();
        }
        OptimizationTrace {
            records: self.records,
            best_f: self.best_f,
            best_x: self.best_x,
            evals_used: self.evals,
            stop,
            notes,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradientDescentOptions {
    pub rate: f64,
    pub iters: usize,
    pub tol: f64,
    #[serde(default = "default_fd_step")]
    pub delta: f64,
}

fn default_fd_step() -> f64 {
    DEFAULT_FD_STEP
}

/// `x ← x − η ∇f(x)` with forward-difference gradients. Stops after `iters`
/// steps or once `‖∇f‖ < tol`. If `f(x_t)` rises for ten consecutive steps the
/// rate is halved and a note is added to the trace.
pub fn gradient_descent<O: Objective + ?Sized>(
    obj: &O,
    x0: &[f64],
    opts: GradientDescentOptions,
    interval: u64,
) -> Result<OptimizationTrace> {
    if !(opts.rate > 0.0 && opts.rate.is_finite()) {
        return Err(Error::validation(format!("rate must be positive, got {}", opts.rate)));
    }
    check_start(obj, x0)?;
    let mut tracker = Tracker::new(obj, u64::MAX, interval);
    let mut notes = Vec::new();
    let mut x = x0.to_vec();
    let mut rate = opts.rate;
    let mut prev: Option<f64> = None;
    let mut rises = 0usize;
    let mut stop = StopReason::MaxIterations;
    for it in 0..opts.iters {
        let grad = finite_diff_gradient(obj, &x, opts.delta, tracker.evals)?;
        let mut probe = x.clone();
        for (i, &v) in grad.values.iter().enumerate() {
            if i > 0 {
                probe.copy_from_slice(&x);
                probe[i - 1] += opts.delta;
            }
            tracker.observe(v, &probe);
        }
        let fx = grad.values[0];
        rises = match prev {
            Some(p) if fx > p => rises + 1,
            _ => 0,
        };
        if rises >= DIVERGENCE_STEPS {
            rate *= 0.5;
            rises = 0;
            notes.push(format!("iteration {it}: rate halved to {rate:e}"));
        }
        prev = Some(fx);
        if grad.norm() < opts.tol {
            stop = StopReason::Converged;
            break;
        }
        x.iter_mut().zip(&grad.g).for_each(|(xi, gi)| *xi -= rate * gi);
    }
    Ok(tracker.finish(stop, notes))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowellOptions {
    pub ftol: f64,
    pub max_evals: u64,
}

/// Powell's conjugate-direction method. Directions start as the coordinate
/// axes and are reset every `dim` iterations; each line minimization brackets
/// the minimum and refines it by golden-section search, and a step is taken
/// only if it strictly lowers `f`.
pub fn powell_minimize<O: Objective + ?Sized>(
    obj: &O,
    x0: &[f64],
    opts: PowellOptions,
    interval: u64,
) -> Result<OptimizationTrace> {
    check_start(obj, x0)?;
    let n = x0.len();
    if opts.max_evals < n as u64 + 1 {
        return Err(Error::validation(format!(
            "max_evals must be at least dim + 1 = {}, got {}",
            n + 1,
            opts.max_evals
        )));
    }
    if !(opts.ftol > 0.0) {
        return Err(Error::validation(format!("ftol must be positive, got {}", opts.ftol)));
    }
    let mut tracker = Tracker::new(obj, opts.max_evals, interval);
    let stop = match powell_loop(&mut tracker, x0, opts.ftol) {
        Ok(()) => StopReason::Converged,
        Err(Stop::Budget) => StopReason::BudgetExhausted,
        Err(Stop::Failed(e)) => return Err(e),
    };
    Ok(tracker.finish(stop, Vec::new()))
}

fn check_start<O: Objective + ?Sized>(obj: &O, x0: &[f64]) -> Result<()> {
    if x0.len() != obj.dim() {
        return Err(Error::DimensionMismatch {
            expected: obj.dim(),
            found: x0.len(),
        });
    }
    if let Some(i) = x0.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            value: x0[i],
            coordinate: Some(i),
        });
    }
    Ok(())
}

fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

fn powell_loop<O: Objective + ?Sized>(
    t: &mut Tracker<'_, O>,
    x0: &[f64],
    ftol: f64,
) -> std::result::Result<(), Stop> {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut fx = t.eval(&x)?;
    if n == 0 {
        return Ok(());
    }
    let mut dirs: Vec<Vec<f64>> = (0..n).map(|i| unit(n, i)).collect();
    for iter in 1.. {
        let (x_start, f_start) = (x.clone(), fx);
        let (mut big, mut ibig) = (0.0, 0);
        for (i, d) in dirs.iter().enumerate() {
            let before = fx;
            fx = line_minimize(t, &mut x, fx, d)?;
            if before - fx > big {
                big = before - fx;
                ibig = i;
            }
        }
        if 2.0 * (f_start - fx) <= ftol * (f_start.abs() + fx.abs()) + 1e-300 {
            return Ok(());
        }
        let new_dir: Vec<f64> = x.iter().zip(&x_start).map(|(a, b)| a - b).collect();
        let x_ext: Vec<f64> = x.iter().zip(&new_dir).map(|(a, d)| a + d).collect();
        let f_ext = t.eval(&x_ext)?;
        if f_ext < f_start {
            let test = 2.0 * (f_start - 2.0 * fx + f_ext) * (f_start - fx - big).powi(2)
                - big * (f_start - f_ext).powi(2);
            if test < 0.0 {
                fx = line_minimize(t, &mut x, fx, &new_dir)?;
                dirs[ibig] = dirs[n - 1].clone();
                dirs[n - 1] = new_dir;
            }
        }
        if iter % n == 0 {
            dirs = (0..n).map(|i| unit(n, i)).collect();
        }
    }
    Ok(())
}

/// Minimizes along `x + α d` and moves `x` only on strict decrease. Returns the new `f(x)`.
fn line_minimize<O: Objective + ?Sized>(
    t: &mut Tracker<'_, O>,
    x: &mut Vec<f64>,
    fx: f64,
    d: &[f64],
) -> std::result::Result<f64, Stop> {
    let point = |a: f64| -> Vec<f64> { x.iter().zip(d).map(|(xi, di)| xi + a * di).collect() };
    let f = |t: &mut Tracker<'_, O>, a: f64| t.eval(&point(a));

    // Bracket: a, b, c with f(b) ≤ f(a) and f(b) ≤ f(c).
    let (mut a, mut fa) = (0.0, fx);
    let (mut b, mut fb) = (LINE_SEARCH_STEP, f(t, LINE_SEARCH_STEP)?);
    if fb > fa {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let mut c = b + GOLD * (b - a);
    let mut fc = f(t, c)?;
    let mut steps = 0;
    while fb > fc && steps < MAX_BRACKET_STEPS {
        a = b;
        fa = fb;
        b = c;
        fb = fc;
        c = b + GOLD * (b - a);
        fc = f(t, c)?;
        steps += 1;
    }
    let _ = fa;

    // Golden-section refinement.
    let (mut x0, mut x3) = (a, c);
    let (mut x1, mut x2);
    if (c - b).abs() > (b - a).abs() {
        x1 = b;
        x2 = b + GOLDEN_C * (c - b);
    } else {
        x2 = b;
        x1 = b - GOLDEN_C * (b - a);
    }
    let mut f1 = if x1 == b { fb } else { f(t, x1)? };
    let mut f2 = if x2 == b { fb } else { f(t, x2)? };
    while (x3 - x0).abs() > GOLDEN_TOL * (1.0 + x1.abs() + x2.abs()) {
        if f2 < f1 {
            x0 = x1;
            x1 = x2;
            x2 = x1 + GOLDEN_C * (x3 - x1);
            f1 = f2;
            f2 = f(t, x2)?;
        } else {
            x3 = x2;
            x2 = x1;
            x1 = x2 - GOLDEN_C * (x2 - x0);
            f2 = f1;
            f1 = f(t, x1)?;
        }
    }
    let candidates = [(b, fb), (x1, f1), (x2, f2), (c, fc)];
    let (alpha, f_best) = candidates
        .into_iter()
        .fold((0.0, fx), |acc, (al, fv)| if fv < acc.1 { (al, fv) } else { acc });
    if f_best < fx {
        *x = point(alpha);
        Ok(f_best)
    } else {
        Ok(fx)
    }
}
