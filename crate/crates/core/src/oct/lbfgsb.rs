//! Projected limited-memory BFGS on a box.
//!
//! Variables sitting on a bound whose gradient points outward form the
//! active set and are frozen for the iteration. The two-loop direction is
//! computed on the free variables, the step is capped where the first free
//! variable reaches its bound, and a strong-Wolfe search picks the step.

use std::collections::VecDeque;

use super::problem::{dot, max_norm, projected_gradient, BoxProblem, Outcome, Settings};
use crate::error::Result;

const C1: f64 = 1e-4;
const C2: f64 = 0.9;
const MAX_SEARCH: usize = 25;

struct Pair {
    s: Vec<f64>,
    y: Vec<f64>,
}

struct Trial {
    t: f64,
    x: Vec<f64>,
    f: f64,
    g: Vec<f64>,
    slope: f64,
}

struct LineSearch<'a, P: BoxProblem> {
    problem: &'a mut P,
    x: &'a [f64],
    d: &'a [f64],
    f0: f64,
    slope0: f64,
    budget: usize,
}

impl<P: BoxProblem> LineSearch<'_, P> {
    fn eval(&mut self, t: f64) -> Result<Trial> {
        let mut x: Vec<f64> = self.x.iter().zip(self.d).map(|(xi, di)| xi + t * di).collect();
        self.problem.clip(&mut x);
        let (f, g) = self.problem.value_and_gradient(&x)?;
        let slope = dot(&g, self.d);
        Ok(Trial { t, x, f, g, slope })
    }

    fn exhausted(&self) -> bool {
        self.problem.evaluations() >= self.budget
    }

    fn armijo(&self, trial: &Trial) -> bool {
        trial.f <= self.f0 + C1 * trial.t * self.slope0
    }

    fn curvature(&self, trial: &Trial) -> bool {
        trial.slope.abs() <= -C2 * self.slope0
    }

    /// Returns an accepted trial, or `None` if no decrease was found.
    fn run(&mut self, t_init: f64, t_max: f64) -> Result<Option<Trial>> {
        let mut prev: Option<Trial> = None;
        let mut t = t_init.min(t_max);
        for _ in 0..MAX_SEARCH {
            let trial = self.eval(t)?;
            let prev_f = prev.as_ref().map_or(self.f0, |p| p.f);
            if !self.armijo(&trial) || (prev.is_some() && trial.f >= prev_f) {
                return self.zoom(prev, trial);
            }
            if self.curvature(&trial) {
                return Ok(Some(trial));
            }
            if trial.slope >= 0.0 {
                let hi = prev.unwrap_or_else(|| self.origin());
                return self.zoom(Some(trial), hi);
            }
            if trial.t >= t_max || self.exhausted() {
                return Ok(Some(trial));
            }
            t = (2.0 * trial.t).min(t_max);
            prev = Some(trial);
        }
        Ok(prev)
    }

    fn origin(&self) -> Trial {
        Trial {
            t: 0.0,
            x: self.x.to_vec(),
            f: self.f0,
            g: Vec::new(),
            slope: self.slope0,
        }
    }

    /// `lo` satisfies sufficient decrease (or is the origin); the minimizer
    /// lies between `lo` and `hi`.
    fn zoom(&mut self, lo: Option<Trial>, hi: Trial) -> Result<Option<Trial>> {
        let mut lo = lo.unwrap_or_else(|| self.origin());
        let mut hi = hi;
        for _ in 0..MAX_SEARCH {
            if self.exhausted() {
                break;
            }
            let width = hi.t - lo.t;
            // quadratic through (lo.f, lo.slope) and hi.f
            let denom = 2.0 * (hi.f - lo.f - lo.slope * width);
            let mut t = if denom > 0.0 {
                lo.t - lo.slope * width * width / denom
            } else {
                lo.t + 0.5 * width
            };
            let (a, b) = if lo.t < hi.t { (lo.t, hi.t) } else { (hi.t, lo.t) };
            let guard = 0.1 * (b - a);
            if !(t > a + guard && t < b - guard) {
                t = 0.5 * (a + b);
            }
            if (b - a) <= 1e-14 * b.abs().max(1.0) {
                break;
            }
            let trial = self.eval(t)?;
            if !self.armijo(&trial) || trial.f >= lo.f {
                hi = trial;
            } else {
                if self.curvature(&trial) {
                    return Ok(Some(trial));
                }
                if trial.slope * (hi.t - lo.t) >= 0.0 {
                    hi = lo;
                }
                lo = trial;
            }
        }
        Ok((lo.t > 0.0).then_some(lo))
    }
}

fn two_loop(g: &[f64], free: &[bool], history: &VecDeque<Pair>) -> Vec<f64> {
    let mask = |v: &[f64]| -> Vec<f64> { v.iter().zip(free).map(|(x, &f)| if f { *x } else { 0.0 }).collect() };
    let mut q = mask(g);
    let pairs: Vec<(Vec<f64>, Vec<f64>, f64)> = history
        .iter()
        .filter_map(|p| {
            let (s, y) = (mask(&p.s), mask(&p.y));
            let sy = dot(&s, &y);
            (sy > 1e-12 * dot(&y, &y) && sy > 0.0).then(|| (s, y, 1.0 / sy))
        })
        .collect();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = pairs.last() {
        let gamma = dot(s, y) / dot(y, y);
        for qi in &mut q {
            *qi *= gamma;
        }
    }
    for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += si * (a - b);
        }
    }
    q.iter().map(|qi| -qi).collect()
}

fn max_feasible_step(x: &[f64], d: &[f64], lower: f64, upper: f64) -> f64 {
    x.iter().zip(d).fold(f64::INFINITY, |t, (&xi, &di)| {
        if di > 0.0 {
            t.min((upper - xi) / di)
        } else if di < 0.0 {
            t.min((lower - xi) / di)
        } else {
            t
        }
    })
}

pub fn minimize<P: BoxProblem>(problem: &mut P, x0: &[f64], settings: &Settings) -> Result<Outcome> {
    let (lower, upper) = (problem.lower(), problem.upper());
    let snap = (upper - lower) * 1e-13;
    let mut x = x0.to_vec();
    problem.clip(&mut x);
    let (mut f, mut g) = problem.value_and_gradient(&x)?;
    let mut history: VecDeque<Pair> = VecDeque::with_capacity(settings.memory);
    let mut iterations = 0;

    loop {
        let pg = projected_gradient(&x, &g, lower, upper);
        if max_norm(&pg) < settings.pgrad_tol {
            return Ok(Outcome { x, value: f, converged: true, iterations });
        }
        if problem.evaluations() >= settings.max_evaluations {
            return Ok(Outcome { x, value: f, converged: false, iterations });
        }
        iterations += 1;

        let free: Vec<bool> = pg.iter().map(|&v| v != 0.0).collect();
        let mut d = two_loop(&g, &free, &history);
        // drop components that would push through a bound the iterate sits on
        for (di, &xi) in d.iter_mut().zip(&x) {
            if (xi <= lower && *di < 0.0) || (xi >= upper && *di > 0.0) {
                *di = 0.0;
            }
        }
        let mut slope = dot(&d, &g);
        if history.is_empty() || !(slope < 0.0) {
            history.clear();
            d = pg.iter().map(|v| -v).collect();
            slope = dot(&d, &g);
        }
        let t_max = max_feasible_step(&x, &d, lower, upper);
        let t_init = if history.is_empty() {
            0.1 * (upper - lower) / max_norm(&d)
        } else {
            1.0
        };

        let mut search = LineSearch {
            problem: &mut *problem,
            x: &x,
            d: &d,
            f0: f,
            slope0: slope,
            budget: settings.max_evaluations,
        };
        let Some(trial) = search.run(t_init, t_max)? else {
            if history.is_empty() {
                // no decrease along steepest descent
                return Ok(Outcome { x, value: f, converged: true, iterations });
            }
            history.clear();
            continue;
        };

        let mut x_new = trial.x;
        for v in &mut x_new {
            if (*v - lower).abs() < snap {
                *v = lower;
            } else if (upper - *v).abs() < snap {
                *v = upper;
            }
        }
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = trial.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).max(f64::MIN_POSITIVE) && sy > 0.0 {
            if history.len() == settings.memory {
                history.pop_front();
            }
            history.push_back(Pair { s, y });
        }
        let decrease = f - trial.f;
        x = x_new;
        f = trial.f;
        g = trial.g;
        if decrease < settings.cost_tol * f.abs().max(1.0) {
            return Ok(Outcome { x, value: f, converged: true, iterations });
        }
    }
}
