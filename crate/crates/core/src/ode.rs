//! Explicit adaptive Runge–Kutta 5(4) integrator (Dormand–Prince) with
//! fifth-order continuous output.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OdeError {
    #[error("step size underflow at t = {t:.6e} (h = {h:.3e}); problem may be stiff")]
    StepUnderflow { t: f64, h: f64 },
    #[error("maximum number of steps ({max_steps}) exceeded at t = {t:.6e}")]
    MaxSteps { t: f64, max_steps: usize },
    #[error("non-finite state encountered at t = {t:.6e}")]
    NonFinite { t: f64 },
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Adaptive Dormand–Prince 5(4) stepper settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Upper bound on the step size, in the caller's time units.
    pub h_max: Option<f64>,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Self::new(1e-11, 1e-13)
    }
}

/// One accepted step with its interpolation coefficients.
#[derive(Debug, Clone)]
struct Segment {
    t: f64,
    h: f64,
    // Five blocks of `dim` coefficients, Hairer's rcont1..rcont5.
    coeffs: Vec<f64>,
}

/// Solution of an initial value problem, evaluable anywhere in its span.
#[derive(Debug, Clone)]
pub struct DenseSolution {
    dim: usize,
    t0: f64,
    y0: Vec<f64>,
    t_end: f64,
    y_end: Vec<f64>,
    segments: Vec<Segment>,
    rejected: usize,
}

impl DenseSolution {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn t_start(&self) -> f64 {
        self.t0
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn final_state(&self) -> &[f64] {
        &self.y_end
    }

    pub fn accepted_steps(&self) -> usize {
        self.segments.len()
    }

    pub fn rejected_steps(&self) -> usize {
        self.rejected
    }

    /// Times of the accepted step boundaries, including both endpoints.
    pub fn step_times(&self) -> Vec<f64> {
        let mut ts: Vec<f64> = self.segments.iter().map(|s| s.t).collect();
        ts.push(self.t_end);
        ts
    }

    /// Evaluates the continuous extension at `t`, clamped to the solved span.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, &mut out);
        out
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        if self.segments.is_empty() || t <= self.t0 {
            out.copy_from_slice(if t <= self.t0 { &self.y0 } else { &self.y_end });
            return;
        }
        if t >= self.t_end {
            out.copy_from_slice(&self.y_end);
            return;
        }
        let idx = match self
            .segments
            .binary_search_by(|s| s.t.partial_cmp(&t).unwrap_or(std::cmp::Ordering::Less))
        {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        };
        let seg = &self.segments[idx];
        let theta = (t - seg.t) / seg.h;
        let theta1 = 1.0 - theta;
        let n = self.dim;
        let c = &seg.coeffs;
        for i in 0..n {
            out[i] =
                c[i] + theta * (c[n + i] + theta1 * (c[2 * n + i] + theta * (c[3 * n + i] + theta1 * c[4 * n + i])));
        }
    }
}

impl Dopri5 {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            max_steps: 2_000_000,
            h_max: None,
        }
    }

    pub fn with_h_max(mut self, h_max: f64) -> Self {
        self.h_max = Some(h_max);
        self
    }

    /// Integrates `y' = rhs(t, y)` from `t0` to `t1 > t0`.
    pub fn solve<F>(&self, rhs: F, t0: f64, t1: f64, y0: &[f64]) -> Result<DenseSolution, OdeError>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        self.solve_guarded(rhs, t0, t1, y0, |_, _| Ok::<(), OdeError>(()))
    }

    /// Like [`solve`](Self::solve), but calls `guard` after every accepted
    /// step; an error from the guard aborts the integration.
    pub fn solve_guarded<F, G, E>(
        &self,
        mut rhs: F,
        t0: f64,
        t1: f64,
        y0: &[f64],
        mut guard: G,
    ) -> Result<DenseSolution, E>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
        G: FnMut(f64, &[f64]) -> Result<(), E>,
        E: From<OdeError>,
    {
        let n = y0.len();
        let span = t1 - t0;
        let mut sol = DenseSolution {
            dim: n,
            t0,
            y0: y0.to_vec(),
            t_end: t0,
            y_end: y0.to_vec(),
            segments: Vec::new(),
            rejected: 0,
        };
        if span <= 0.0 {
            return Ok(sol);
        }
        let h_max = self.h_max.unwrap_or(span).min(span);

        let mut t = t0;
        let mut y = y0.to_vec();
        let mut k1 = vec![0.0; n];
        let mut k2 = vec![0.0; n];
        let mut k3 = vec![0.0; n];
        let mut k4 = vec![0.0; n];
        let mut k5 = vec![0.0; n];
        let mut k6 = vec![0.0; n];
        let mut k7 = vec![0.0; n];
        let mut ytmp = vec![0.0; n];
        let mut ynew = vec![0.0; n];

        rhs(t, &y, &mut k1);
        let mut h = self.initial_step(&mut rhs, t, &y, &k1, h_max, &mut ytmp, &mut k2);

        let mut steps = 0usize;
        while t < t1 {
            if steps >= self.max_steps {
                return Err(OdeError::MaxSteps {
                    t,
                    max_steps: self.max_steps,
                }
                .into());
            }
            let last = t + h >= t1 || (t1 - (t + h)) < 1e-12 * span;
            if last {
                h = t1 - t;
            }
            if h.abs() <= 16.0 * f64::EPSILON * t.abs().max(span) {
                return Err(OdeError::StepUnderflow { t, h }.into());
            }

            for i in 0..n {
                ytmp[i] = y[i] + h * A21 * k1[i];
            }
            rhs(t + C2 * h, &ytmp, &mut k2);
            for i in 0..n {
                ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
            }
            rhs(t + C3 * h, &ytmp, &mut k3);
            for i in 0..n {
                ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            rhs(t + C4 * h, &ytmp, &mut k4);
            for i in 0..n {
                ytmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            rhs(t + C5 * h, &ytmp, &mut k5);
            for i in 0..n {
                ytmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            let t_new = if last { t1 } else { t + h };
            rhs(t_new, &ytmp, &mut k6);
            for i in 0..n {
                ynew[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
            }
            rhs(t_new, &ynew, &mut k7);
            steps += 1;

            let mut err = 0.0;
            for i in 0..n {
                let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sk = self.atol + self.rtol * y[i].abs().max(ynew[i].abs());
                err += (e / sk) * (e / sk);
            }
            let err = (err / n.max(1) as f64).sqrt();
            if !err.is_finite() {
                return Err(OdeError::NonFinite { t }.into());
            }

            if err <= 1.0 {
                let mut coeffs = vec![0.0; 5 * n];
                for i in 0..n {
                    let ydiff = ynew[i] - y[i];
                    let bspl = h * k1[i] - ydiff;
                    coeffs[i] = y[i];
                    coeffs[n + i] = ydiff;
                    coeffs[2 * n + i] = bspl;
                    coeffs[3 * n + i] = ydiff - h * k7[i] - bspl;
                    coeffs[4 * n + i] =
                        h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
                }
                sol.segments.push(Segment { t, h, coeffs });
                t = t_new;
                std::mem::swap(&mut y, &mut ynew);
                std::mem::swap(&mut k1, &mut k7);
                guard(t, &y)?;
                let fac = (0.9 * err.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
                h = (h * fac).min(h_max);
            } else {
                sol.rejected += 1;
                let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
                h *= fac;
            }
        }
        sol.t_end = t1;
        sol.y_end = y;
        Ok(sol)
    }

    #[allow(clippy::too_many_arguments)]
    fn initial_step<F>(
        &self,
        rhs: &mut F,
        t: f64,
        y: &[f64],
        f0: &[f64],
        h_max: f64,
        ytmp: &mut [f64],
        f1: &mut [f64],
    ) -> f64
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let n = y.len().max(1) as f64;
        let (mut d0, mut d1) = (0.0, 0.0);
        for i in 0..y.len() {
            let sk = self.atol + self.rtol * y[i].abs();
            d0 += (y[i] / sk).powi(2);
            d1 += (f0[i] / sk).powi(2);
        }
        let (d0, d1) = ((d0 / n).sqrt(), (d1 / n).sqrt());
        let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h0 = h0.min(h_max);
        for i in 0..y.len() {
            ytmp[i] = y[i] + h0 * f0[i];
        }
        rhs(t + h0, ytmp, f1);
        let mut d2 = 0.0;
        for i in 0..y.len() {
            let sk = self.atol + self.rtol * y[i].abs();
            d2 += ((f1[i] - f0[i]) / sk).powi(2);
        }
        let d2 = (d2 / n).sqrt() / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(h_max)
    }
}
