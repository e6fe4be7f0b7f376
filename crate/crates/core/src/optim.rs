//! Derivative-free minimization used by the maximum likelihood fits.

/// Nelder–Mead settings. Convergence is declared when the spread of objective
/// values across the simplex falls below `ftol`.
#[derive(Clone, Debug)]
pub struct NelderMead {
    pub max_evals: usize,
    pub ftol: f64,
    pub initial_step: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        NelderMead {
            max_evals: 4000,
            ftol: 1e-6,
            initial_step: 0.5,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub converged: bool,
}

impl NelderMead {
    /// Minimizes `f` from `x0`. Non-finite objective values are treated as +inf.
    pub fn minimize<F>(&self, mut f: F, x0: &[f64]) -> Minimum
    where
        F: FnMut(&[f64]) -> f64,
    {
        let n = x0.len();
        let mut eval = |x: &[f64]| {
            let v = f(x);
            if v.is_finite() {
                v
            } else {
                f64::INFINITY
            }
        };
        let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        simplex.push(x0.to_vec());
        for i in 0..n {
            let mut p = x0.to_vec();
            p[i] += self.initial_step;
            simplex.push(p);
        }
        let mut values: Vec<f64> = simplex.iter().map(|p| eval(p)).collect();
        let mut evals = n + 1;
        let mut converged = false;

        // standard coefficients
        let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);

        while evals < self.max_evals {
            let mut order: Vec<usize> = (0..=n).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            values = order.iter().map(|&i| values[i]).collect();

            let spread = values[n] - values[0];
            if spread.is_finite() && spread.abs() <= self.ftol {
                converged = true;
                break;
            }

            let mut centroid = vec![0.0; n];
            for p in &simplex[..n] {
                for (c, v) in centroid.iter_mut().zip(p) {
                    *c += v / n as f64;
                }
            }
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&simplex[n])
                    .map(|(c, w)| c + t * (c - w))
                    .collect()
            };

            let xr = along(alpha);
            let fr = eval(&xr);
            evals += 1;
            if fr < values[0] {
                let xe = along(gamma);
                let fe = eval(&xe);
                evals += 1;
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
                let xc = along(rho);
                let fc = eval(&xc);
                (xc, fc)
            } else {
                let xc = along(-rho);
                let fc = eval(&xc);
                (xc, fc)
            };
            evals += 1;
            if fc < values[n].min(fr) {
                simplex[n] = xc;
                values[n] = fc;
                continue;
            }
            // shrink toward the best vertex
            let best = simplex[0].clone();
            for k in 1..=n {
                for (v, b) in simplex[k].iter_mut().zip(&best) {
                    *v = b + sigma * (*v - b);
                }
                values[k] = eval(&simplex[k]);
            }
            evals += n;
        }

        let (ib, _) = values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty simplex");
        Minimum {
            x: simplex[ib].clone(),
            f: values[ib],
            evals,
            converged,
        }
    }

    /// Restarts from the previous optimum until the objective stops improving.
    pub fn minimize_restarting<F>(&self, mut f: F, x0: &[f64], restarts: usize) -> Minimum
    where
        F: FnMut(&[f64]) -> f64,
    {
        let mut best = self.minimize(&mut f, x0);
        for _ in 0..restarts {
            let next = self.minimize(&mut f, &best.x);
            let improved = next.f < best.f - self.ftol;
            let evals = best.evals + next.evals;
            if next.f <= best.f {
                best = Minimum { evals, ..next };
            } else {
                best.evals = evals;
            }
            if !improved {
                break;
            }
        }
        best
    }
}

/// Maps an unbounded real onto `(lo, hi)`.
pub fn to_bounded(u: f64, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) / (1.0 + (-u).exp())
}

/// Inverse of [`to_bounded`]; values at or past a bound are nudged inside.
pub fn from_bounded(v: f64, lo: f64, hi: f64) -> f64 {
    let p = ((v - lo) / (hi - lo)).clamp(1e-9, 1.0 - 1e-9);
    (p / (1.0 - p)).ln()
}
