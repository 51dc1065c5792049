//! Derivative-free minimisation (Nelder–Mead) for small parameter vectors.

#[derive(Debug, Clone)]
pub(crate) struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct NelderMead {
    pub initial_step: f64,
    pub f_tol: f64,
    pub x_tol: f64,
    pub max_iter: usize,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            initial_step: 0.1,
            f_tol: 1e-12,
            x_tol: 1e-9,
            max_iter: 2000,
        }
    }
}

impl NelderMead {
    /// Minimises `f` from `x0`. Non-finite values are treated as +inf.
    pub fn minimize(&self, f: impl Fn(&[f64]) -> f64, x0: &[f64]) -> Minimum {
        let dim = x0.len();
        let eval = |x: &[f64]| {
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
        simplex.push((x0.to_vec(), eval(x0)));
        for i in 0..dim {
            let mut x = x0.to_vec();
            x[i] += if x[i] == 0.0 {
                self.initial_step
            } else {
                self.initial_step * x[i].abs().max(1.0)
            };
            let v = eval(&x);
            simplex.push((x, v));
        }

        let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
        let mut iterations = 0;
        let mut converged = false;
        while iterations < self.max_iter {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let best = simplex[0].1;
            let worst = simplex[dim].1;
            let spread = (worst - best).abs();
            let size = simplex[1..]
                .iter()
                .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            if best.is_finite()
                && ((spread <= self.f_tol * (best.abs() + self.f_tol) && size <= self.x_tol.sqrt())
                    || size <= self.x_tol)
            {
                converged = true;
                break;
            }
            iterations += 1;

            let mut centroid = vec![0.0; dim];
            for (x, _) in &simplex[..dim] {
                for (c, xi) in centroid.iter_mut().zip(x) {
                    *c += xi / dim as f64;
                }
            }
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&simplex[dim].0)
                    .map(|(c, w)| c + t * (c - w))
                    .collect()
            };

            let xr = along(alpha);
            let fr = eval(&xr);
            if fr < simplex[0].1 {
                let xe = along(gamma);
                let fe = eval(&xe);
                simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < simplex[dim - 1].1 {
                simplex[dim] = (xr, fr);
            } else {
                let (xc, fc) = if fr < simplex[dim].1 {
                    let xc = along(rho * alpha);
                    let fc = eval(&xc);
                    (xc, fc)
                } else {
                    let xc = along(-rho);
                    let fc = eval(&xc);
                    (xc, fc)
                };
                if fc < simplex[dim].1.min(fr) {
                    simplex[dim] = (xc, fc);
                } else {
                    let x_best = simplex[0].0.clone();
                    for (x, v) in simplex.iter_mut().skip(1) {
                        for (xi, bi) in x.iter_mut().zip(&x_best) {
                            *xi = bi + sigma * (*xi - bi);
                        }
                        *v = eval(x);
                    }
                }
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (x, value) = simplex.swap_remove(0);
        Minimum {
            x,
            value,
            converged,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let m = NelderMead {
            max_iter: 5000,
            ..Default::default()
        }
        .minimize(f, &[-1.2, 1.0]);
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-4 && (m.x[1] - 1.0).abs() < 1e-4, "{:?}", m.x);
    }

    #[test]
    fn infinite_region_is_avoided() {
        let f = |x: &[f64]| if x[0] < 0.5 { f64::INFINITY } else { (x[0] - 2.0).powi(2) };
        let m = NelderMead::default().minimize(f, &[1.0]);
        assert!((m.x[0] - 2.0).abs() < 1e-4);
    }
}
