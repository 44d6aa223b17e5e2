//! Nelder–Mead simplex with reflection 1, expansion 2, contraction 0.5 and
//! shrink 0.5. Vertices may leave the box; they are clipped only when the
//! cost is evaluated.

use super::problem::{BoxProblem, Outcome, Settings};
use crate::error::Result;

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

struct Simplex {
    vertices: Vec<Vec<f64>>,
    values: Vec<f64>,
}

impl Simplex {
    fn sort(&mut self) {
        let mut order: Vec<usize> = (0..self.values.len()).collect();
        order.sort_by(|&a, &b| self.values[a].total_cmp(&self.values[b]));
        self.vertices = order.iter().map(|&i| self.vertices[i].clone()).collect();
        self.values = order.iter().map(|&i| self.values[i]).collect();
    }

    fn centroid(&self) -> Vec<f64> {
        let n = self.vertices.len() - 1;
        let mut c = vec![0.0; self.vertices[0].len()];
        for v in &self.vertices[..n] {
            for (ci, vi) in c.iter_mut().zip(v) {
                *ci += vi / n as f64;
            }
        }
        c
    }
}

fn along(from: &[f64], to: &[f64], k: f64) -> Vec<f64> {
    from.iter().zip(to).map(|(a, b)| a + k * (b - a)).collect()
}

fn eval<P: BoxProblem>(problem: &mut P, x: &[f64]) -> Result<f64> {
    let mut clipped = x.to_vec();
    problem.clip(&mut clipped);
    problem.value(&clipped)
}

/// `edge` is the initial simplex edge length along each axis.
pub fn minimize<P: BoxProblem>(problem: &mut P, x0: &[f64], edge: f64, settings: &Settings) -> Result<Outcome> {
    let n = x0.len();
    let mut start = x0.to_vec();
    problem.clip(&mut start);
    let mut vertices = vec![start.clone()];
    for i in 0..n {
        let mut v = start.clone();
        // step inward when the edge would leave the box
        v[i] += if v[i] + edge <= problem.upper() { edge } else { -edge };
        vertices.push(v);
    }
    let values = vertices
        .iter()
        .map(|v| eval(problem, v))
        .collect::<Result<Vec<_>>>()?;
    let mut simplex = Simplex { vertices, values };
    let mut iterations = 0;

    loop {
        simplex.sort();
        let best = simplex.values[0];
        let worst = simplex.values[n];
        if worst - best < settings.cost_tol {
            break;
        }
        if problem.evaluations() >= settings.max_evaluations {
            let mut x = simplex.vertices[0].clone();
            problem.clip(&mut x);
            return Ok(Outcome { x, value: best, converged: false, iterations });
        }
        iterations += 1;

        let centroid = simplex.centroid();
        let reflected = along(&centroid, &simplex.vertices[n], -REFLECT);
        let f_r = eval(problem, &reflected)?;

        if f_r < best {
            let expanded = along(&centroid, &reflected, EXPAND);
            let f_e = eval(problem, &expanded)?;
            if f_e < f_r {
                simplex.vertices[n] = expanded;
                simplex.values[n] = f_e;
            } else {
                simplex.vertices[n] = reflected;
                simplex.values[n] = f_r;
            }
            continue;
        }
        if f_r < simplex.values[n - 1] {
            simplex.vertices[n] = reflected;
            simplex.values[n] = f_r;
            continue;
        }

        let (candidate, f_c) = if f_r < worst {
            let outside = along(&centroid, &reflected, CONTRACT);
            let f = eval(problem, &outside)?;
            (outside, if f <= f_r { f } else { f64::INFINITY })
        } else {
            let inside = along(&centroid, &simplex.vertices[n], CONTRACT);
            let f = eval(problem, &inside)?;
            (inside, if f < worst { f } else { f64::INFINITY })
        };
        if f_c.is_finite() {
            simplex.vertices[n] = candidate;
            simplex.values[n] = f_c;
            continue;
        }

        let anchor = simplex.vertices[0].clone();
        for i in 1..=n {
            simplex.vertices[i] = along(&anchor, &simplex.vertices[i], SHRINK);
            simplex.values[i] = eval(problem, &simplex.vertices[i])?;
        }
    }

    let mut x = simplex.vertices[0].clone();
    problem.clip(&mut x);
    Ok(Outcome {
        x,
        value: simplex.values[0],
        converged: true,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oct::problem::testing::Rosenbrock;

    #[test]
    fn finds_rosenbrock_minimum() {
        let mut p = Rosenbrock::new(2, -5.0, 5.0);
        let settings = Settings {
            cost_tol: 1e-14,
            ..Settings::default()
        };
        let out = minimize(&mut p, &[-1.2, 1.0], 0.5, &settings).unwrap();
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-3 && (out.x[1] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn clipped_result_is_feasible() {
        let mut p = Rosenbrock::new(3, -1.0, 0.5);
        let out = minimize(&mut p, &[0.0, 0.0, 0.0], 0.3, &Settings::default()).unwrap();
        assert!(out.x.iter().all(|v| (-1.0..=0.5).contains(v)));
        assert!(out.value < Rosenbrock::new(3, -1.0, 0.5).value(&[0.0; 3]).unwrap());
    }
}
