//! Nelder-Mead simplex minimisation for small parameter counts.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct NelderMead {
    /// Stop once every vertex lies within this distance of the best, per coordinate.
    pub x_tol: f64,
    /// ...and the function values span at most this much.
    pub f_tol: f64,
    pub max_evals: usize,
    /// Edge length of the initial simplex.
    pub initial_step: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            x_tol: 1e-5,
            f_tol: 1e-10,
            max_evals: 2000,
            initial_step: 0.01,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Minimum {
    pub point: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

impl NelderMead {
    pub fn minimize(&self, f: impl Fn(&[f64]) -> f64, start: &[f64]) -> Result<Minimum> {
        let n = start.len();
        let counter = std::cell::Cell::new(0usize);
        let eval = |x: &[f64]| {
            counter.set(counter.get() + 1);
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };
        if n == 0 {
            let v = eval(start);
            return Ok(Minimum {
                point: vec![],
                value: v,
                evaluations: 1,
            });
        }
        let mut simplex: Vec<Vec<f64>> = vec![start.to_vec()];
        for i in 0..n {
            let mut p = start.to_vec();
            p[i] += if p[i] != 0.0 {
                self.initial_step.max(0.05 * p[i].abs())
            } else {
                self.initial_step
            };
            simplex.push(p);
        }
        let mut values: Vec<f64> = simplex.iter().map(|p| eval(p)).collect();

        loop {
            let evals = counter.get();
            let mut order: Vec<usize> = (0..=n).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            values = order.iter().map(|&i| values[i]).collect();

            let spread_x = simplex[1..]
                .iter()
                .flat_map(|p| p.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            let spread_f = (values[n] - values[0]).abs();
            if spread_x <= self.x_tol && spread_f <= self.f_tol {
                return Ok(Minimum {
                    point: simplex[0].clone(),
                    value: values[0],
                    evaluations: evals,
                });
            }
            if evals >= self.max_evals {
                return Err(Error::NoConvergence {
                    evaluations: evals,
                    best_point: simplex[0].clone(),
                    best_value: values[0],
                });
            }

            let centroid: Vec<f64> = (0..n)
                .map(|j| simplex[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64)
                .collect();
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&simplex[n])
                    .map(|(c, w)| c + t * (w - c))
                    .collect()
            };
            let xr = along(-1.0);
            let fr = eval(&xr);
            if fr < values[0] {
                let xe = along(-2.0);
                let fe = eval(&xe);
                if fe < fr {
                    simplex[n] = xe;
                    values[n] = fe;
                } else {
                    simplex[n] = xr;
                    values[n] = fr;
                }
                continue;
            }
            if fr < values[n - 1] {
                simplex[n] = xr;
                values[n] = fr;
                continue;
            }
            let (xc, fc) = if fr < values[n] {
                let xc = along(-0.5);
                let fc = eval(&xc);
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = eval(&xc);
                (xc, fc)
            };
            if fc < values[n].min(fr) {
                simplex[n] = xc;
                values[n] = fc;
                continue;
            }
            for i in 1..=n {
                let p: Vec<f64> = simplex[i]
                    .iter()
                    .zip(&simplex[0])
                    .map(|(x, b)| b + 0.5 * (x - b))
                    .collect();
                values[i] = eval(&p);
                simplex[i] = p;
            }
        }
    }

    /// Runs from every start and keeps the best converged result.
    ///
    /// Each start is restarted from its own optimum until the value stops
    /// improving, which guards against simplex collapse.
    pub fn minimize_multistart(
        &self,
        f: impl Fn(&[f64]) -> f64,
        starts: &[Vec<f64>],
    ) -> Result<Minimum> {
        let mut best: Option<Minimum> = None;
        let mut last_err = None;
        for s in starts {
            // a start that runs out of budget continues from its best vertex
            let mut run = None;
            let mut point = s.clone();
            let mut spent = 0;
            for _ in 0..=8 {
                match self.minimize(&f, &point) {
                    Ok(m) => {
                        run = Some(m);
                        break;
                    }
                    Err(Error::NoConvergence {
                        evaluations,
                        best_point,
                        best_value,
                    }) => {
                        spent += evaluations;
                        point = best_point.clone();
                        last_err = Some(Error::NoConvergence {
                            evaluations: spent,
                            best_point,
                            best_value,
                        });
                    }
                    Err(e) => {
                        last_err = Some(e);
                        break;
                    }
                }
            }
            let Some(mut run) = run else { continue };
            run.evaluations += spent;
            for _ in 0..8 {
                match self.minimize(&f, &run.point) {
                    Ok(m) if m.value < run.value - self.f_tol => {
                        let total = run.evaluations + m.evaluations;
                        run = Minimum {
                            evaluations: total,
                            ..m
                        };
                    }
                    _ => break,
                }
            }
            if best.as_ref().map_or(true, |b| run.value < b.value) {
                best = Some(run);
            }
        }
        match (best, last_err) {
            (Some(b), _) => Ok(b),
            (None, Some(e)) => Err(e),
            (None, None) => Err(Error::Degenerate("no starting points".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let nm = NelderMead {
            max_evals: 5000,
            ..Default::default()
        };
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let m = nm.minimize_multistart(f, &[vec![-1.2, 1.0]]).unwrap();
        assert!((m.point[0] - 1.0).abs() < 1e-4 && (m.point[1] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn budget_exhaustion_reports_best() {
        let nm = NelderMead {
            max_evals: 10,
            ..Default::default()
        };
        let f = |x: &[f64]| x.iter().map(|v| (v - 3.0).powi(2)).sum::<f64>();
        match nm.minimize(f, &[0.0, 0.0, 0.0]) {
            Err(Error::NoConvergence { best_value, .. }) => assert!(best_value < 27.0),
            other => panic!("expected budget failure, got {other:?}"),
        }
    }
}
