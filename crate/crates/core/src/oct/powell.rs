//! Powell's direction-set method. Each line minimization is a bounded
//! Brent search over the step interval that keeps the point inside the box.

use super::problem::{BoxProblem, Outcome, Settings};
use crate::error::Result;

const GOLDEN: f64 = 0.381_966_011_250_105_1;
const BRENT_ITERS: usize = 60;

fn feasible_interval(x: &[f64], u: &[f64], lower: f64, upper: f64) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for (&xi, &ui) in x.iter().zip(u) {
        if ui > 0.0 {
            lo = lo.max((lower - xi) / ui);
            hi = hi.min((upper - xi) / ui);
        } else if ui < 0.0 {
            lo = lo.max((upper - xi) / ui);
            hi = hi.min((lower - xi) / ui);
        }
    }
    (lo.min(0.0), hi.max(0.0))
}

fn point<P: BoxProblem>(problem: &P, x: &[f64], u: &[f64], t: f64) -> Vec<f64> {
    let mut p: Vec<f64> = x.iter().zip(u).map(|(a, b)| a + t * b).collect();
    problem.clip(&mut p);
    p
}

/// Minimizes `f(x + t u)` over the feasible `t`; returns the new point and
/// value if it improves on `f0`.
fn line_minimize<P: BoxProblem>(
    problem: &mut P,
    x: &[f64],
    u: &[f64],
    f0: f64,
    budget: usize,
) -> Result<Option<(Vec<f64>, f64)>> {
    let (mut a, mut b) = feasible_interval(x, u, problem.lower(), problem.upper());
    if !(b - a > 0.0) || !a.is_finite() || !b.is_finite() {
        return Ok(None);
    }
    let scale = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let xtol = 1e-7 * (problem.upper() - problem.lower()) / scale.max(f64::MIN_POSITIVE);

    // Brent's bounded minimization, seeded with the known value at t = 0.
    let (mut v, mut w, mut t) = (0.0f64, 0.0f64, 0.0f64);
    let (mut fv, mut fw, mut ft) = (f0, f0, f0);
    let (mut d, mut e) = (0.0f64, 0.0f64);
    for _ in 0..BRENT_ITERS {
        if problem.evaluations() >= budget {
            break;
        }
        let mid = 0.5 * (a + b);
        let tol1 = 1.5e-8 * t.abs() + xtol / 3.0;
        let tol2 = 2.0 * tol1;
        if (t - mid).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (t - w) * (ft - fv);
            let mut q = (t - v) * (ft - fw);
            let mut p = (t - v) * q - (t - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let e_prev = e;
            e = d;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (a - t) && p < q * (b - t) {
                d = p / q;
                let trial = t + d;
                if trial - a < tol2 || b - trial < tol2 {
                    d = if mid >= t { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if t >= mid { a - t } else { b - t };
            d = GOLDEN * e;
        }
        let step = if d.abs() >= tol1 { t + d } else { t + tol1.copysign(d) };
        let trial = step.clamp(a, b);
        let f = problem.value(&point(problem, x, u, trial))?;
        if f <= ft {
            if trial >= t {
                a = t;
            } else {
                b = t;
            }
            (v, fv) = (w, fw);
            (w, fw) = (t, ft);
            (t, ft) = (trial, f);
        } else {
            if trial < t {
                a = trial;
            } else {
                b = trial;
            }
            if f <= fw || w == t {
                (v, fv) = (w, fw);
                (w, fw) = (trial, f);
            } else if f <= fv || v == t || v == w {
                (v, fv) = (trial, f);
            }
        }
    }
    Ok((ft < f0).then(|| (point(problem, x, u, t), ft)))
}

fn axes(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            let mut u = vec![0.0; n];
            u[i] = 1.0;
            u
        })
        .collect()
}

pub fn minimize<P: BoxProblem>(problem: &mut P, x0: &[f64], settings: &Settings) -> Result<Outcome> {
    let n = x0.len();
    let mut x = x0.to_vec();
    problem.clip(&mut x);
    let mut f = problem.value(&x)?;
    let mut directions = axes(n);
    let mut on_axes = true;
    let mut iterations = 0;
    let budget = settings.max_evaluations;

    loop {
        if problem.evaluations() >= budget {
            return Ok(Outcome { x, value: f, converged: false, iterations });
        }
        iterations += 1;
        let (x_start, f_start) = (x.clone(), f);
        let (mut biggest, mut biggest_drop) = (0, 0.0);
        for (i, u) in directions.iter().enumerate() {
            if let Some((x_new, f_new)) = line_minimize(problem, &x, u, f, budget)? {
                if f - f_new > biggest_drop {
                    biggest_drop = f - f_new;
                    biggest = i;
                }
                x = x_new;
                f = f_new;
            }
        }
        if f_start - f < settings.cost_tol {
            if on_axes {
                return Ok(Outcome { x, value: f, converged: true, iterations });
            }
            // learned directions can be pinned by an active bound
            directions = axes(n);
            on_axes = true;
            continue;
        }
        on_axes = false;

        let shift: Vec<f64> = x.iter().zip(&x_start).map(|(a, b)| a - b).collect();
        let extrapolated = point(problem, &x, &shift, 1.0);
        let f_ext = problem.value(&extrapolated)?;
        if f_ext < f_start {
            let t = 2.0 * (f_start - 2.0 * f + f_ext) * (f_start - f - biggest_drop).powi(2)
                - biggest_drop * (f_start - f_ext).powi(2);
            if t < 0.0 {
                if let Some((x_new, f_new)) = line_minimize(problem, &x, &shift, f, budget)? {
                    x = x_new;
                    f = f_new;
                }
                directions[biggest] = directions[n - 1].clone();
                directions[n - 1] = shift;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oct::problem::testing::Rosenbrock;

    #[test]
    fn finds_rosenbrock_minimum() {
        let mut p = Rosenbrock::new(3, -5.0, 5.0);
        let settings = Settings {
            cost_tol: 1e-14,
            ..Settings::default()
        };
        let out = minimize(&mut p, &[-1.2, 1.0, 0.5], &settings).unwrap();
        assert!(out.converged);
        for v in &out.x {
            assert!((v - 1.0).abs() < 1e-3, "{:?}", out.x);
        }
    }

    #[test]
    fn stays_in_box() {
        let mut p = Rosenbrock::new(2, -2.0, 0.5);
        let out = minimize(&mut p, &[-1.0, -1.0], &Settings::default()).unwrap();
        assert!((out.x[0] - 0.5).abs() < 1e-6);
        assert!((out.x[1] - 0.25).abs() < 1e-4);
    }
}
