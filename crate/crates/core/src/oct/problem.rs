use crate::error::Result;

/// A cost over the box `[lower, upper]^dim` with evaluation counting.
pub trait BoxProblem {
    fn dim(&self) -> usize;
    fn lower(&self) -> f64;
    fn upper(&self) -> f64;
    fn value(&mut self, x: &[f64]) -> Result<f64>;
    fn value_and_gradient(&mut self, x: &[f64]) -> Result<(f64, Vec<f64>)>;
    fn evaluations(&self) -> usize;

    fn clip(&self, x: &mut [f64]) {
        let (lo, hi) = (self.lower(), self.upper());
        for v in x {
            *v = v.clamp(lo, hi);
        }
    }
}

impl BoxProblem for super::Objective {
    fn dim(&self) -> usize {
        super::Objective::dim(self)
    }

    fn lower(&self) -> f64 {
        0.0
    }

    fn upper(&self) -> f64 {
        super::Objective::upper(self)
    }

    fn value(&mut self, x: &[f64]) -> Result<f64> {
        super::Objective::value(self, x)
    }

    fn value_and_gradient(&mut self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        super::Objective::value_and_gradient(self, x)
    }

    fn evaluations(&self) -> usize {
        super::Objective::evaluations(self)
    }
}

/// Stopping rules shared by all minimizers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settings {
    pub max_evaluations: usize,
    /// Stop when an iteration lowers the cost by less than this.
    pub cost_tol: f64,
    /// Stop when the projected gradient's max-norm falls below this.
    pub pgrad_tol: f64,
    /// L-BFGS history length.
    pub memory: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            max_evaluations: 200_000,
            cost_tol: 1e-10,
            pgrad_tol: 1e-8,
            memory: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gradient with components that point out of the box zeroed.
pub fn projected_gradient(x: &[f64], g: &[f64], lower: f64, upper: f64) -> Vec<f64> {
    x.iter()
        .zip(g)
        .map(|(&xi, &gi)| {
            if (xi <= lower && gi > 0.0) || (xi >= upper && gi < 0.0) {
                0.0
            } else {
                gi
            }
        })
        .collect()
}

pub(crate) fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;

    /// Extended Rosenbrock with an analytic gradient.
    pub struct Rosenbrock {
        pub n: usize,
        pub lower: f64,
        pub upper: f64,
        pub evals: usize,
    }

    impl Rosenbrock {
        pub fn new(n: usize, lower: f64, upper: f64) -> Self {
            Rosenbrock { n, lower, upper, evals: 0 }
        }

        fn f(x: &[f64]) -> f64 {
            x.windows(2)
                .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
                .sum()
        }
    }

    impl BoxProblem for Rosenbrock {
        fn dim(&self) -> usize {
            self.n
        }
        fn lower(&self) -> f64 {
            self.lower
        }
        fn upper(&self) -> f64 {
            self.upper
        }
        fn value(&mut self, x: &[f64]) -> Result<f64> {
            self.evals += 1;
            Ok(Self::f(x))
        }
        fn value_and_gradient(&mut self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
            self.evals += 1;
            let mut g = vec![0.0; x.len()];
            for i in 0..x.len() - 1 {
                let t = x[i + 1] - x[i] * x[i];
                g[i] += -400.0 * x[i] * t - 2.0 * (1.0 - x[i]);
                g[i + 1] += 200.0 * t;
            }
            Ok((Self::f(x), g))
        }
        fn evaluations(&self) -> usize {
            self.evals
        }
    }
}
