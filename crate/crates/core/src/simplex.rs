//! Nelder–Mead downhill simplex minimizer with a fixed, axis-aligned initial
//! simplex (the same scheme as MATLAB's `fminsearch` up to the step size).

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMead {
    /// Offset added along each coordinate to build the initial simplex.
    pub initial_step: f64,
    /// Convergence: max-norm distance of every vertex from the best one.
    pub xtol: f64,
    /// Convergence: spread between worst and best objective values.
    pub ftol: f64,
    pub max_iterations: usize,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            initial_step: 0.5,
            xtol: 1e-8,
            ftol: 1e-12,
            max_iterations: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexOutcome {
    pub x: Vec<f64>,
    pub fx: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Best objective value after each iteration (index 0 is the initial simplex).
    pub best_history: Vec<f64>,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

impl NelderMead {
    pub fn minimize<F>(&self, mut f: F, x0: &[f64]) -> SimplexOutcome
    where
        F: FnMut(&[f64]) -> f64,
    {
        let n = x0.len();
        let mut evaluations = 0usize;
        let mut eval = |x: &[f64]| {
            evaluations += 1;
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };

        if n == 0 {
            let fx = eval(x0);
            return SimplexOutcome {
                x: Vec::new(),
                fx,
                iterations: 0,
                evaluations: 1,
                converged: true,
                best_history: vec![fx],
            };
        }

        let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        pts.push(x0.to_vec());
        for i in 0..n {
            let mut p = x0.to_vec();
            p[i] += self.initial_step;
            pts.push(p);
        }
        let mut vals: Vec<f64> = pts.iter().map(|p| eval(p)).collect();

        let mut iterations = 0;
        let mut converged = false;
        let mut best_history = Vec::new();
        loop {
            sort_simplex(&mut pts, &mut vals);
            best_history.push(vals[0]);

            let diameter = pts[1..]
                .iter()
                .map(|p| p.iter().zip(&pts[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .fold(0.0, f64::max);
            let spread = vals[n] - vals[0];
            if diameter < self.xtol && spread <= self.ftol {
                converged = true;
                break;
            }
            if iterations >= self.max_iterations {
                break;
            }
            iterations += 1;

            let centroid: Vec<f64> = (0..n)
                .map(|k| pts[..n].iter().map(|p| p[k]).sum::<f64>() / n as f64)
                .collect();
            let along =
                |coef: f64| -> Vec<f64> { centroid.iter().zip(&pts[n]).map(|(c, w)| c + coef * (c - w)).collect() };

            let xr = along(REFLECT);
            let fr = eval(&xr);
            if fr < vals[0] {
                let xe = along(REFLECT * EXPAND);
                let fe = eval(&xe);
                if fe < fr {
                    pts[n] = xe;
                    vals[n] = fe;
                } else {
                    pts[n] = xr;
                    vals[n] = fr;
                }
                continue;
            }
            if fr < vals[n - 1] {
                pts[n] = xr;
                vals[n] = fr;
                continue;
            }
            // Contraction, outside if the reflected point beats the worst.
            let (xc, fc) = if fr < vals[n] {
                let xc = along(REFLECT * CONTRACT);
                let fc = eval(&xc);
                (xc, if fc <= fr { fc } else { f64::INFINITY })
            } else {
                let xc = along(-CONTRACT);
                let fc = eval(&xc);
                (xc, if fc < vals[n] { fc } else { f64::INFINITY })
            };
            if fc.is_finite() {
                pts[n] = xc;
                vals[n] = fc;
                continue;
            }
            let best = pts[0].clone();
            for i in 1..=n {
                for k in 0..n {
                    pts[i][k] = best[k] + SHRINK * (pts[i][k] - best[k]);
                }
                vals[i] = eval(&pts[i]);
            }
        }

        SimplexOutcome {
            x: pts[0].clone(),
            fx: vals[0],
            iterations,
            evaluations,
            converged,
            best_history,
        }
    }
}

fn sort_simplex(pts: &mut [Vec<f64>], vals: &mut [f64]) {
    let mut idx: Vec<usize> = (0..vals.len()).collect();
    // Stable sort keeps tie order deterministic.
    idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    let p: Vec<Vec<f64>> = idx.iter().map(|&i| pts[i].clone()).collect();
    let v: Vec<f64> = idx.iter().map(|&i| vals[i]).collect();
    pts.clone_from_slice(&p);
    vals.copy_from_slice(&v);
}
