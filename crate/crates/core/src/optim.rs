//! Derivative-free Nelder–Mead simplex minimization.

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

#[derive(Debug, Clone, Copy)]
pub struct NelderMead<T> {
    pub max_iter: usize,
    /// Stop once the spread of simplex values is below `f_tol·(1 + |f_best|)`
    /// and its diameter below `x_tol`.
    pub f_tol: T,
    pub x_tol: T,
}

impl<T: Real> Default for NelderMead<T> {
    fn default() -> Self {
        Self {
            max_iter: 4000,
            f_tol: lit(1e-12),
            x_tol: lit(1e-9),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum<T> {
    pub point: Vec<T>,
    pub value: T,
    pub iterations: usize,
    pub converged: bool,
    /// Best objective after each iteration.
    pub history: Vec<T>,
}

impl<T: Real> NelderMead<T> {
    /// Minimizes `f` from `x0` with an axis-aligned initial simplex of the given
    /// per-coordinate steps. Non-finite objective values are treated as `+∞`.
    pub fn minimize<F>(&self, mut f: F, x0: &[T], steps: &[T]) -> Result<Minimum<T>>
    where
        F: FnMut(&[T]) -> T,
    {
        let n = x0.len();
        if n == 0 || steps.len() != n {
            return Err(Error::invalid("x0 and steps must be non-empty and equal length"));
        }
        let mut eval = |x: &[T]| {
            let v = f(x);
            if v.is_finite() {
                v
            } else {
                T::infinity()
            }
        };
        let half = lit::<T>(0.5);
        let two = lit::<T>(2.0);

        let mut simplex: Vec<Vec<T>> = Vec::with_capacity(n + 1);
        simplex.push(x0.to_vec());
        for i in 0..n {
            let mut v = x0.to_vec();
            v[i] = v[i] + steps[i];
            simplex.push(v);
        }
        let mut values: Vec<T> = simplex.iter().map(|v| eval(v)).collect();
        let mut history = Vec::new();
        let mut iterations = 0;
        let mut converged = false;

        while iterations < self.max_iter {
            let mut order: Vec<usize> = (0..=n).collect();
            order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("no NaN"));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            values = order.iter().map(|&i| values[i]).collect();

            let best = values[0];
            let worst = values[n];
            let diameter = simplex[1..]
                .iter()
                .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (*a - *b).abs()))
                .fold(T::zero(), T::max);
            if best.is_finite()
                && (worst - best) <= self.f_tol * (T::one() + best.abs())
                && diameter <= self.x_tol
            {
                converged = true;
                break;
            }
            iterations += 1;

            let centroid: Vec<T> = (0..n)
                .map(|j| simplex[..n].iter().map(|v| v[j]).sum::<T>() / lit(n as f64))
                .collect();
            let along = |coef: T| -> Vec<T> {
                centroid
                    .iter()
                    .zip(&simplex[n])
                    .map(|(c, w)| *c + coef * (*c - *w))
                    .collect()
            };

            let xr = along(T::one());
            let fr = eval(&xr);
            if fr < values[0] {
                let xe = along(two);
                let fe = eval(&xe);
                if fe < fr {
                    simplex[n] = xe;
                    values[n] = fe;
                } else {
                    simplex[n] = xr;
                    values[n] = fr;
                }
            } else if fr < values[n - 1] {
                simplex[n] = xr;
                values[n] = fr;
            } else {
                let (xc, fc) = if fr < values[n] {
                    let xc = along(half);
                    let fc = eval(&xc);
                    (xc, fc)
                } else {
                    let xc = along(-half);
                    let fc = eval(&xc);
                    (xc, fc)
                };
                if fc < values[n].min(fr) {
                    simplex[n] = xc;
                    values[n] = fc;
                } else {
                    for i in 1..=n {
                        let shrunk: Vec<T> = simplex[i]
                            .iter()
                            .zip(&simplex[0])
                            .map(|(v, b)| *b + half * (*v - *b))
                            .collect();
                        values[i] = eval(&shrunk);
                        simplex[i] = shrunk;
                    }
                }
            }
            history.push(values.iter().copied().fold(T::infinity(), T::min));
        }

        let best = (0..=n)
            .min_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("no NaN"))
            .expect("non-empty simplex");
        Ok(Minimum {
            point: simplex[best].clone(),
            value: values[best],
            iterations,
            converged,
            history,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let nm = NelderMead::<f64> {
            max_iter: 10_000,
            ..Default::default()
        };
        let m = nm
            .minimize(
                |x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
                &[-1.2, 1.0],
                &[0.5, 0.5],
            )
            .unwrap();
        assert!(m.converged);
        assert!((m.point[0] - 1.0).abs() < 1e-6 && (m.point[1] - 1.0).abs() < 1e-6);
        assert!(m.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn infinite_region_is_avoided() {
        let nm = NelderMead::<f64>::default();
        let m = nm
            .minimize(
                |x| if x[0] < 0.0 { f64::NAN } else { (x[0] - 2.0).powi(2) },
                &[0.5],
                &[1.0],
            )
            .unwrap();
        assert!((m.point[0] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn iteration_cap_reports_not_converged() {
        let nm = NelderMead::<f64> {
            max_iter: 3,
            ..Default::default()
        };
        let m = nm.minimize(|x| x[0] * x[0] + x[1] * x[1], &[5.0, 5.0], &[1.0, 1.0]).unwrap();
        assert!(!m.converged);
        assert_eq!(m.iterations, 3);
    }
}
