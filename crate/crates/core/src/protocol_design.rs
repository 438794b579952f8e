//! Trap-frequency protocols ω₁(t).
//!
//! Designed protocols start from a scaling-factor ansatz ρ(s), s = t/t_f,
//! for the lowest normal mode and invert its Ermakov equation:
//!
//! ```text
//! ω₁² = ω₀²/ρ⁴ − ρ̈/(A² ρ)
//! ```
//!
//! with A = Ω/ω₁ of the design mode. All derivatives of ω₁ are taken in
//! closed form from the ansatz, which is why ansätze carry derivatives up to
//! fourth order. The linear and cosine ramps are kept as baselines.

use std::f64::consts::PI;
use std::fmt;

use crate::chain_model::{Chain, NormalModeBasis};
use crate::{Error, Result};

/// Radicand probe density for designed protocols (interior points).
pub const PROBE_POINTS: usize = 2048;

/// End points and duration of a ramp. γ = √(ω₀/ω_f) is derived.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySpec {
    omega0: f64,
    omegaf: f64,
    tf: f64,
}

impl BoundarySpec {
    pub fn new(omega0: f64, omegaf: f64, tf: f64) -> Result<Self> {
        for (name, v) in [("omega0", omega0), ("omegaf", omegaf), ("tf", tf)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self { omega0, omegaf, tf })
    }

    /// ω_f = ω₀/γ².
    pub fn from_gamma_squared(omega0: f64, gamma_squared: f64, tf: f64) -> Result<Self> {
        if !(gamma_squared.is_finite() && gamma_squared > 0.0) {
            return Err(Error::InvalidInput(format!(
                "gamma_squared must be positive, got {gamma_squared}"
            )));
        }
        Self::new(omega0, omega0 / gamma_squared, tf)
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn omegaf(&self) -> f64 {
        self.omegaf
    }

    pub fn tf(&self) -> f64 {
        self.tf
    }

    pub fn gamma(&self) -> f64 {
        (self.omega0 / self.omegaf).sqrt()
    }

    pub fn with_tf(&self, tf: f64) -> Result<Self> {
        Self::new(self.omega0, self.omegaf, tf)
    }

    /// Same ramp run backwards (compression ↔ expansion).
    pub fn swapped(&self) -> Self {
        Self {
            omega0: self.omegaf,
            omegaf: self.omega0,
            tf: self.tf,
        }
    }
}

/// ρ and its first four derivatives with respect to s.
pub type Derivatives = [f64; 5];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnsatzKind {
    /// Ninth-order polynomial with no free parameters.
    Smoothstep9,
    /// Polynomial of order 10 or more whose top `order − 9` coefficients are free.
    ExtendedPoly { order: usize },
    /// Three-term cosine series.
    Cosine3,
}

impl fmt::Display for AnsatzKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnsatzKind::Smoothstep9 => write!(f, "smoothstep9"),
            AnsatzKind::ExtendedPoly { order } => write!(f, "extended_poly{order}"),
            AnsatzKind::Cosine3 => write!(f, "cosine3"),
        }
    }
}

/// Scaling-factor ansatz ρ(s) with ρ(0) = 1, ρ(1) = γ and vanishing first
/// to fourth derivatives at both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct RhoAnsatz {
    kind: AnsatzKind,
    gamma: f64,
    /// Monomial coefficients in s, or cosine amplitudes for `Cosine3`.
    coefficients: Vec<f64>,
    free_params: Vec<f64>,
    /// For `ExtendedPoly`, q(s) in ρ = smoothstep + s⁵(1−s)⁵ q(s). Evaluating
    /// this form keeps the end conditions exact however large the free
    /// coefficients get; the monomial sum loses them to cancellation.
    bump: Vec<f64>,
}

const SMOOTHSTEP_WEIGHTS: [f64; 5] = [126.0, -420.0, 540.0, -315.0, 70.0];
const COSINE_AMPLITUDES: [f64; 3] = [-150.0, 25.0, -3.0];

impl RhoAnsatz {
    pub fn smoothstep(gamma: f64) -> Self {
        let mut c = vec![0.0; 10];
        c[0] = 1.0;
        for (k, w) in SMOOTHSTEP_WEIGHTS.iter().enumerate() {
            c[5 + k] = w * (gamma - 1.0);
        }
        Self {
            kind: AnsatzKind::Smoothstep9,
            gamma,
            coefficients: c,
            free_params: Vec::new(),
            bump: Vec::new(),
        }
    }

    pub fn cosine(gamma: f64) -> Self {
        Self {
            kind: AnsatzKind::Cosine3,
            gamma,
            coefficients: COSINE_AMPLITUDES.to_vec(),
            free_params: Vec::new(),
            bump: Vec::new(),
        }
    }

    pub fn kind(&self) -> AnsatzKind {
        self.kind
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn free_params(&self) -> &[f64] {
        &self.free_params
    }

    pub fn eval(&self, s: f64) -> Derivatives {
        match self.kind {
            AnsatzKind::Cosine3 => cosine_ansatz(self.gamma, s),
            AnsatzKind::Smoothstep9 => poly_derivatives(&self.coefficients, s),
            AnsatzKind::ExtendedPoly { .. } => {
                let mut out = smoothstep_rho(self.gamma, s);
                let w = poly_derivatives(&BUMP, s);
                let q = poly_derivatives(&self.bump, s);
                for (k, slot) in out.iter_mut().enumerate() {
                    *slot += (0..=k).map(|j| binomial(k, j) * w[j] * q[k - j]).sum::<f64>();
                }
                out
            }
        }
    }
}

/// Value and first four derivatives of Σ c_n sⁿ.
fn poly_derivatives(c: &[f64], s: f64) -> Derivatives {
    let mut out = [0.0; 5];
    for (k, slot) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for n in (k..c.len()).rev() {
            acc = acc * s + c[n] * falling(n, k);
        }
        *slot = acc;
    }
    out
}

/// s⁵(1−s)⁵ in monomials.
const BUMP: [f64; 11] = [0.0, 0.0, 0.0, 0.0, 0.0, 1.0, -5.0, 10.0, -10.0, 5.0, -1.0];

fn binomial(n: usize, k: usize) -> f64 {
    falling(n, k) / falling(k, k)
}

/// n!/(n−k)!
fn falling(n: usize, k: usize) -> f64 {
    (0..k).map(|j| (n - j) as f64).product()
}

/// The ninth-order ansatz and its four s-derivatives.
pub fn smoothstep_rho(gamma: f64, s: f64) -> Derivatives {
    RhoAnsatz::smoothstep(gamma).eval(s)
}

/// Cosine-series ansatz (1+γ)/2 + (γ−1)/256 Σ aₙ cos((2n−1)πs) with
/// aₙ = (−150, 25, −3), and its four s-derivatives.
pub fn cosine_ansatz(gamma: f64, s: f64) -> Derivatives {
    let scale = (gamma - 1.0) / 256.0;
    let mut out = [0.0; 5];
    out[0] = (1.0 + gamma) / 2.0;
    for (n, a) in COSINE_AMPLITUDES.iter().enumerate() {
        let k = (2 * n + 1) as f64 * PI;
        let (sin, cos) = (k * s).sin_cos();
        out[0] += scale * a * cos;
        out[1] -= scale * a * k * sin;
        out[2] -= scale * a * k * k * cos;
        out[3] += scale * a * k.powi(3) * sin;
        out[4] += scale * a * k.powi(4) * cos;
    }
    out
}

/// Polynomial ansatz of the given order whose coefficients a₁₀… are the
/// `free_params`; a₀…a₉ follow from the ten boundary conditions.
pub fn build_extended_ansatz(gamma: f64, order: usize, free_params: &[f64]) -> Result<RhoAnsatz> {
    if !(9..=24).contains(&order) {
        return Err(Error::InvalidInput(format!(
            "ansatz order must be in 9..=24, got {order}"
        )));
    }
    if free_params.len() != order - 9 {
        return Err(Error::InvalidInput(format!(
            "order {order} needs {} free parameters, got {}",
            order - 9,
            free_params.len()
        )));
    }
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidInput(format!("gamma must be positive, got {gamma}")));
    }
    if order == 9 {
        return Ok(RhoAnsatz::smoothstep(gamma));
    }
    // The top coefficients of smoothstep + s⁵(1−s)⁵ q(s) come from q alone
    // through a triangular map with −1 on the diagonal.
    let m = order - 10;
    let mut bump = vec![0.0; m + 1];
    for t in (0..=m).rev() {
        let rest: f64 = (t + 1..=m.min(t + 5)).map(|i| bump[i] * BUMP[10 + t - i]).sum();
        bump[t] = rest - free_params[t];
    }
    let mut coefficients = RhoAnsatz::smoothstep(gamma).coefficients;
    coefficients.resize(order + 1, 0.0);
    for (i, q) in bump.iter().enumerate() {
        for (j, w) in BUMP.iter().enumerate().skip(5) {
            coefficients[i + j] += q * w;
        }
    }
    coefficients[10..].copy_from_slice(free_params);

    Ok(RhoAnsatz {
        kind: AnsatzKind::ExtendedPoly { order },
        gamma,
        coefficients,
        free_params: free_params.to_vec(),
        bump,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    Designed {
        ansatz: RhoAnsatz,
        a_ref: f64,
    },
    Linear,
    Cosine,
    /// Frozen trap at ω₀ (requires ω_f = ω₀).
    Constant,
}

impl Provenance {
    pub fn label(&self) -> String {
        match self {
            Provenance::Designed { ansatz, .. } => format!("designed:{}", ansatz.kind()),
            Provenance::Linear => "linear".into(),
            Provenance::Cosine => "cosine".into(),
            Provenance::Constant => "constant".into(),
        }
    }
}

/// ω₁ and its first two time derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmegaSample {
    pub omega: f64,
    pub domega: f64,
    pub ddomega: f64,
}

/// A trap-frequency ramp on [0, t_f] with analytic derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolCurve {
    provenance: Provenance,
    /// Boundary of the forward ramp; a reversed curve runs it backwards.
    forward: BoundarySpec,
    reversed: bool,
}

impl ProtocolCurve {
    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn is_reversed(&self) -> bool {
        self.reversed
    }

    /// Effective boundary: ω₁(0), ω₁(t_f) and t_f of this curve.
    pub fn boundary(&self) -> BoundarySpec {
        if self.reversed {
            self.forward.swapped()
        } else {
            self.forward
        }
    }

    pub fn tf(&self) -> f64 {
        self.forward.tf
    }

    pub fn is_designed(&self) -> bool {
        matches!(self.provenance, Provenance::Designed { .. })
    }

    /// Time-reversed copy: ω₁'(t) = ω₁(t_f − t).
    pub fn reversed(&self) -> Self {
        Self {
            reversed: !self.reversed,
            ..self.clone()
        }
    }

    pub fn omega(&self, t: f64) -> f64 {
        self.eval(t).omega
    }

    pub fn eval(&self, t: f64) -> OmegaSample {
        let tf = self.forward.tf;
        let t = t.clamp(0.0, tf);
        if self.reversed {
            let s = self.eval_forward(tf - t);
            OmegaSample {
                omega: s.omega,
                domega: -s.domega,
                ddomega: s.ddomega,
            }
        } else {
            self.eval_forward(t)
        }
    }

    fn eval_forward(&self, t: f64) -> OmegaSample {
        let BoundarySpec { omega0, omegaf, tf } = self.forward;
        match &self.provenance {
            Provenance::Designed { ansatz, a_ref } => {
                let r = ansatz.eval(t / tf);
                let k = 1.0 / (a_ref * a_ref * (omega0 * tf).powi(2));
                let (w, w1, w2) = scaled_omega(&r, k);
                OmegaSample {
                    omega: omega0 * w,
                    domega: omega0 * w1 / tf,
                    ddomega: omega0 * w2 / (tf * tf),
                }
            }
            Provenance::Linear => OmegaSample {
                omega: omega0 + (omegaf - omega0) * t / tf,
                domega: (omegaf - omega0) / tf,
                ddomega: 0.0,
            },
            Provenance::Cosine => {
                let half = (omega0 - omegaf) / 2.0;
                let k = PI / tf;
                let (sin, cos) = (k * t).sin_cos();
                OmegaSample {
                    omega: (omega0 + omegaf) / 2.0 + half * cos,
                    domega: -half * k * sin,
                    ddomega: -half * k * k * cos,
                }
            }
            Provenance::Constant => OmegaSample {
                omega: omega0,
                domega: 0.0,
                ddomega: 0.0,
            },
        }
    }

    /// `n ≥ 2` uniformly spaced samples including both ends.
    pub fn sample(&self, n: usize) -> Vec<(f64, OmegaSample)> {
        let n = n.max(2);
        let tf = self.tf();
        (0..n)
            .map(|k| {
                let t = if k == n - 1 { tf } else { tf * k as f64 / (n - 1) as f64 };
                (t, self.eval(t))
            })
            .collect()
    }

    /// Scaled first and second derivatives at both ends.
    pub fn boundary_audit(&self) -> BoundaryAudit {
        let b = self.boundary();
        let (tf, w0) = (b.tf, b.omega0);
        let start = self.eval(0.0);
        let end = self.eval(tf);
        BoundaryAudit {
            start_d1: start.domega.abs() * tf / w0,
            start_d2: start.ddomega.abs() * tf * tf / w0,
            end_d1: end.domega.abs() * tf / w0,
            end_d2: end.ddomega.abs() * tf * tf / w0,
        }
    }

    /// One-line `key=value` description sufficient to rebuild the curve.
    pub fn metadata(&self) -> String {
        let b = self.forward;
        let mut s = format!(
            "provenance={} omega0={:e} omegaf={:e} tf={:e} gamma={:e} reversed={}",
            match &self.provenance {
                Provenance::Designed { .. } => "designed",
                Provenance::Linear => "linear",
                Provenance::Cosine => "cosine",
                Provenance::Constant => "constant",
            },
            b.omega0,
            b.omegaf,
            b.tf,
            b.gamma(),
            self.reversed
        );
        if let Provenance::Designed { ansatz, a_ref } = &self.provenance {
            let fp: Vec<String> = ansatz.free_params().iter().map(|x| format!("{x:e}")).collect();
            let order = match ansatz.kind() {
                AnsatzKind::Smoothstep9 => 9,
                AnsatzKind::ExtendedPoly { order } => order,
                AnsatzKind::Cosine3 => 0,
            };
            s.push_str(&format!(
                " ansatz={} order={} a_ref={:e} free_params={}",
                match ansatz.kind() {
                    AnsatzKind::Cosine3 => "cosine3",
                    _ => "poly",
                },
                order,
                a_ref,
                if fp.is_empty() { "-".to_string() } else { fp.join(";") }
            ));
        }
        s
    }

    /// Rebuilds a curve from [`metadata`](Self::metadata) output.
    pub fn from_metadata(line: &str) -> Result<Self> {
        let get = |key: &str| -> Result<&str> {
            line.split_whitespace()
                .find_map(|kv| kv.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
                .ok_or_else(|| Error::InvalidInput(format!("protocol metadata lacks `{key}`")))
        };
        let num = |key: &str| -> Result<f64> {
            get(key)?
                .parse::<f64>()
                .map_err(|e| Error::InvalidInput(format!("bad `{key}` in protocol metadata: {e}")))
        };
        let boundary = BoundarySpec::new(num("omega0")?, num("omegaf")?, num("tf")?)?;
        let reversed = get("reversed").map(|v| v == "true").unwrap_or(false);
        let curve = match get("provenance")? {
            "linear" => linear_protocol(boundary),
            "cosine" => cosine_protocol(boundary),
            "constant" => constant_protocol(boundary.omega0(), boundary.tf())?,
            "designed" => {
                let a_ref = num("a_ref")?;
                let ansatz = match get("ansatz")? {
                    "cosine3" => RhoAnsatz::cosine(boundary.gamma()),
                    "poly" => {
                        let order: usize = get("order")?
                            .parse()
                            .map_err(|e| Error::InvalidInput(format!("bad `order`: {e}")))?;
                        let raw = get("free_params")?;
                        let fp = if raw == "-" {
                            Vec::new()
                        } else {
                            raw.split(';')
                                .map(|x| {
                                    x.parse::<f64>()
                                        .map_err(|e| Error::InvalidInput(format!("bad free parameter `{x}`: {e}")))
                                })
                                .collect::<Result<Vec<_>>>()?
                        };
                        if order == 9 {
                            RhoAnsatz::smoothstep(boundary.gamma())
                        } else {
                            build_extended_ansatz(boundary.gamma(), order, &fp)?
                        }
                    }
                    other => {
                        return Err(Error::InvalidInput(format!("unknown ansatz `{other}`")));
                    }
                };
                omega_from_rho(&ansatz, &boundary, a_ref)?
            }
            other => return Err(Error::InvalidInput(format!("unknown provenance `{other}`"))),
        };
        Ok(if reversed { curve.reversed() } else { curve })
    }

    /// CSV with columns t, ω₁, ω̇₁, ω̈₁, preceded by `#` metadata lines.
    pub fn to_csv(&self, samples: usize, extra_header: &[String]) -> String {
        let mut out = String::new();
        for h in extra_header {
            out.push_str("# ");
            out.push_str(h);
            out.push('\n');
        }
        out.push_str("# ");
        out.push_str(&self.metadata());
        out.push('\n');
        out.push_str("t[s],omega1[rad/s],domega1[rad/s^2],ddomega1[rad/s^3]\n");
        for (t, w) in self.sample(samples) {
            out.push_str(&format!(
                "{:.12e},{:.12e},{:.12e},{:.12e}\n",
                t, w.omega, w.domega, w.ddomega
            ));
        }
        out
    }
}

/// (ω/ω₀, d/ds, d²/ds²) from ρ derivatives, with k = 1/(A² ω₀² t_f²).
fn scaled_omega(r: &Derivatives, k: f64) -> (f64, f64, f64) {
    let [p, p1, p2, p3, p4] = *r;
    let w2 = 1.0 / p.powi(4) - k * p2 / p;
    let q = p3 * p - p2 * p1;
    let w2d = -4.0 * p1 / p.powi(5) - k * q / (p * p);
    let w2dd = 20.0 * p1 * p1 / p.powi(6)
        - 4.0 * p2 / p.powi(5)
        - k * ((p4 * p - p2 * p2) / (p * p) - 2.0 * p1 * q / p.powi(3));
    let w = w2.sqrt();
    let wd = w2d / (2.0 * w);
    let wdd = (w2dd - 2.0 * wd * wd) / (2.0 * w);
    (w, wd, wdd)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryAudit {
    /// |ω̇₁(0)| t_f/ω₀
    pub start_d1: f64,
    /// |ω̈₁(0)| t_f²/ω₀
    pub start_d2: f64,
    pub end_d1: f64,
    pub end_d2: f64,
}

impl BoundaryAudit {
    pub const D1_TOL: f64 = 1e-9;
    pub const D2_TOL: f64 = 1e-8;

    pub fn satisfied(&self) -> bool {
        self.start_d1 < Self::D1_TOL
            && self.end_d1 < Self::D1_TOL
            && self.start_d2 < Self::D2_TOL
            && self.end_d2 < Self::D2_TOL
    }
}

/// Inverts the design-mode Ermakov equation for ω₁(t).
///
/// Fails with [`Error::InvalidProtocol`] if ρ or ω₁² is non-positive
/// anywhere on the probe grid, which means t_f is too short for this ansatz.
pub fn omega_from_rho(ansatz: &RhoAnsatz, boundary: &BoundarySpec, a_ref: f64) -> Result<ProtocolCurve> {
    if !(a_ref.is_finite() && a_ref > 0.0) {
        return Err(Error::InvalidInput(format!(
            "mode frequency ratio must be positive, got {a_ref}"
        )));
    }
    let gamma = boundary.gamma();
    if (ansatz.gamma() - gamma).abs() > 1e-12 * gamma {
        return Err(Error::InvalidInput(format!(
            "ansatz built for γ = {} but boundary has γ = {gamma}",
            ansatz.gamma()
        )));
    }
    let w0 = boundary.omega0();
    let tf = boundary.tf();
    let k = 1.0 / (a_ref * a_ref * (w0 * tf).powi(2));
    let probes = (0..=PROBE_POINTS + 1).map(|i| i as f64 / (PROBE_POINTS + 1) as f64);
    for s in probes {
        let r = ansatz.eval(s);
        let radicand = if r[0] > 0.0 {
            1.0 / r[0].powi(4) - k * r[2] / r[0]
        } else {
            f64::NEG_INFINITY
        };
        if !(radicand > 0.0) {
            return Err(Error::InvalidProtocol {
                t: s * tf,
                radicand: radicand * w0 * w0,
            });
        }
    }
    Ok(ProtocolCurve {
        provenance: Provenance::Designed {
            ansatz: ansatz.clone(),
            a_ref,
        },
        forward: *boundary,
        reversed: false,
    })
}

/// ω₁(t) = ω₀ + (ω_f − ω₀) t/t_f.
pub fn linear_protocol(boundary: BoundarySpec) -> ProtocolCurve {
    ProtocolCurve {
        provenance: Provenance::Linear,
        forward: boundary,
        reversed: false,
    }
}

/// ω₁(t) = (ω₀+ω_f)/2 + (ω₀−ω_f)/2 · cos(πt/t_f).
pub fn cosine_protocol(boundary: BoundarySpec) -> ProtocolCurve {
    ProtocolCurve {
        provenance: Provenance::Cosine,
        forward: boundary,
        reversed: false,
    }
}

/// Frozen trap at `omega` for a duration `tf`.
pub fn constant_protocol(omega: f64, tf: f64) -> Result<ProtocolCurve> {
    Ok(ProtocolCurve {
        provenance: Provenance::Constant,
        forward: BoundarySpec::new(omega, omega, tf)?,
        reversed: false,
    })
}

/// Mass-weighted momentum shift of one normal mode,
/// p₀ν = c_ν ω̇₁ ω₁^{-5/3}, for a given protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumShift {
    pub mode: usize,
    /// c_ν (kg^½ · m · s^{-1/3}).
    pub coefficient: f64,
    protocol: ProtocolCurve,
}

impl MomentumShift {
    pub fn p0(&self, t: f64) -> f64 {
        let w = self.protocol.eval(t);
        self.coefficient * w.domega * w.omega.powf(-5.0 / 3.0)
    }

    pub fn p0dot(&self, t: f64) -> f64 {
        let w = self.protocol.eval(t);
        p0dot_from_sample(self.coefficient, &w)
    }

    pub fn protocol(&self) -> &ProtocolCurve {
        &self.protocol
    }
}

pub(crate) fn p0dot_from_sample(coefficient: f64, w: &OmegaSample) -> f64 {
    coefficient * (w.ddomega * w.omega.powf(-5.0 / 3.0) - 5.0 / 3.0 * w.domega * w.domega * w.omega.powf(-8.0 / 3.0))
}

/// Coefficients c_ν such that p₀ν = c_ν ω̇₁ ω₁^{-5/3}.
///
/// Follows p₀ν = Σ_i a_νi √m_i q̇_i⁽⁰⁾ with q_i⁽⁰⁾ = l(t) u_i and
/// l = (C/m₁)^{1/3} ω₁^{-2/3}.
pub fn momentum_shift_coefficients(chain: &Chain, basis: &NormalModeBasis) -> Vec<f64> {
    let l_unit = (chain.coulomb_strength() / chain.reference_mass()).cbrt();
    basis
        .position_weights(chain)
        .into_iter()
        .map(|s| -2.0 / 3.0 * s * l_unit)
        .collect()
}

pub fn momentum_shifts(chain: &Chain, basis: &NormalModeBasis, protocol: &ProtocolCurve) -> Vec<MomentumShift> {
    momentum_shift_coefficients(chain, basis)
        .into_iter()
        .enumerate()
        .map(|(mode, coefficient)| MomentumShift {
            mode,
            coefficient,
            protocol: protocol.clone(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const W0: f64 = 2.0 * PI * 1.2e6;

    fn gamma3() -> f64 {
        3f64.sqrt().sqrt()
    }

    #[test]
    fn smoothstep_endpoints_and_midpoint() {
        let g = gamma3();
        let a = smoothstep_rho(g, 0.0);
        assert_eq!(a, [1.0, 0.0, 0.0, 0.0, 0.0]);
        let b = smoothstep_rho(g, 1.0);
        assert!((b[0] - g).abs() < 1e-12);
        for d in &b[1..] {
            assert!(d.abs() < 1e-9, "{b:?}");
        }
        let m = smoothstep_rho(g, 0.5);
        assert!((m[0] - (1.0 + g) / 2.0).abs() < 1e-14);
    }

    #[test]
    fn smoothstep_is_monotone_for_expansion() {
        let g = gamma3();
        let vals: Vec<f64> = (0..=1000).map(|k| smoothstep_rho(g, k as f64 / 1000.0)[0]).collect();
        assert!(vals.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn extended_ansatz_reduces_to_smoothstep() {
        let g = 1.7;
        let base = RhoAnsatz::smoothstep(g);
        for order in [11usize, 13] {
            let ext = build_extended_ansatz(g, order, &vec![0.0; order - 9]).unwrap();
            for (k, c) in base.coefficients().iter().enumerate() {
                assert!((ext.coefficients()[k] - c).abs() < 1e-9 * c.abs().max(1.0));
            }
            for k in 10..=order {
                assert_eq!(ext.coefficients()[k], 0.0);
            }
        }
    }

    #[test]
    fn extended_ansatz_keeps_boundary_conditions() {
        let g = gamma3();
        let ext = build_extended_ansatz(g, 13, &[3.5, -7.0, 12.0, -4.25]).unwrap();
        let a = ext.eval(0.0);
        let b = ext.eval(1.0);
        assert!((a[0] - 1.0).abs() < 1e-12 && (b[0] - g).abs() < 1e-12);
        for k in 1..5 {
            assert!(a[k].abs() < 1e-12);
            assert!(b[k].abs() < 1e-9, "derivative {k}: {}", b[k]);
        }
        assert!(build_extended_ansatz(g, 11, &[1.0]).is_err());
    }

    #[test]
    fn cosine_ansatz_values() {
        let g = 2.0;
        let a = cosine_ansatz(g, 0.0);
        assert!((a[0] - 1.0).abs() < 1e-14);
        assert!(a[1].abs() < 1e-12 && a[2].abs() < 1e-12 && a[3].abs() < 1e-12 && a[4].abs() < 1e-9);
        let b = cosine_ansatz(g, 1.0);
        assert!((b[0] - g).abs() < 1e-14);
        assert!(b[1].abs() < 1e-12 && b[2].abs() < 1e-12 && b[3].abs() < 1e-9 && b[4].abs() < 1e-9);
        assert!((cosine_ansatz(g, 0.5)[0] - 1.5).abs() < 1e-14);
    }

    #[test]
    fn designed_protocol_endpoints() {
        let b = BoundarySpec::from_gamma_squared(W0, 3.0, 3e-6).unwrap();
        assert!((b.omegaf() / (2.0 * PI) - 0.4e6).abs() < 1e-6);
        let p = omega_from_rho(&RhoAnsatz::smoothstep(b.gamma()), &b, 1.0).unwrap();
        assert!((p.omega(0.0) / W0 - 1.0).abs() < 1e-14);
        assert!((p.omega(b.tf()) / b.omegaf() - 1.0).abs() < 1e-12);
        assert!(p.boundary_audit().satisfied(), "{:?}", p.boundary_audit());
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let b = BoundarySpec::from_gamma_squared(W0, 3.0, 2.5e-6).unwrap();
        let ansatz = build_extended_ansatz(b.gamma(), 11, &[2.0, -1.5]).unwrap();
        let curves = [
            omega_from_rho(&ansatz, &b, 1.0).unwrap(),
            omega_from_rho(&RhoAnsatz::cosine(b.gamma()), &b, 1.0).unwrap(),
            cosine_protocol(b),
            linear_protocol(b).reversed(),
        ];
        for p in &curves {
            let h = b.tf() * 1e-5;
            for k in 1..100 {
                let t = b.tf() * k as f64 / 100.0;
                let fd1 = (p.omega(t + h) - p.omega(t - h)) / (2.0 * h);
                let w = p.eval(t);
                let scale = W0 / b.tf();
                assert!(
                    (fd1 - w.domega).abs() < 1e-6 * scale,
                    "{:?} t={t}",
                    p.provenance().label()
                );
                let fd2 = (p.eval(t + h).domega - p.eval(t - h).domega) / (2.0 * h);
                assert!((fd2 - w.ddomega).abs() < 1e-6 * scale / b.tf());
            }
        }
    }

    #[test]
    fn too_short_final_time_is_rejected() {
        let b = BoundarySpec::from_gamma_squared(W0, 3.0, 0.1e-6).unwrap();
        match omega_from_rho(&RhoAnsatz::smoothstep(b.gamma()), &b, 1.0) {
            Err(Error::InvalidProtocol { t, radicand }) => {
                assert!(t > 0.0 && t < b.tf());
                assert!(radicand <= 0.0);
            }
            other => panic!("expected InvalidProtocol, got {other:?}"),
        }
    }

    #[test]
    fn baselines_and_audit_flags() {
        let b = BoundarySpec::from_gamma_squared(W0, 3.0, 2e-6).unwrap();
        let lin = linear_protocol(b);
        assert_eq!(lin.omega(0.0), W0);
        assert!((lin.omega(b.tf()) - b.omegaf()).abs() < 1e-6);
        assert!((lin.omega(b.tf() / 2.0) - (W0 + b.omegaf()) / 2.0).abs() < 1e-6);
        assert!(!lin.boundary_audit().satisfied());

        let cos = cosine_protocol(b);
        assert_eq!(cos.omega(0.0), W0);
        assert!((cos.omega(b.tf()) - b.omegaf()).abs() < 1e-6);
        assert!((cos.omega(b.tf() / 2.0) - (W0 + b.omegaf()) / 2.0).abs() < 1e-6);
        let audit = cos.boundary_audit();
        assert!(audit.start_d1 < 1e-12);
        let expected = (W0 - b.omegaf()) * PI * PI / 2.0 * b.tf().powi(2) / b.tf().powi(2) / W0;
        assert!((audit.start_d2 - expected).abs() < 1e-12);
        assert!(!audit.satisfied());
    }

    #[test]
    fn reversed_curve_swaps_ends() {
        let b = BoundarySpec::from_gamma_squared(W0, 3.0, 4e-6).unwrap();
        let p = omega_from_rho(&RhoAnsatz::smoothstep(b.gamma()), &b, 1.0).unwrap();
        let r = p.reversed();
        assert!((r.omega(0.0) - b.omegaf()).abs() < 1e-6);
        assert!((r.omega(b.tf()) - W0).abs() < 1e-6);
        assert_eq!(r.boundary().omega0(), b.omegaf());
        let t = 1.3e-6;
        assert!((r.eval(t).domega + p.eval(b.tf() - t).domega).abs() < 1e-9 * W0 / b.tf());
    }

    #[test]
    fn metadata_round_trip() {
        let b = BoundarySpec::from_gamma_squared(W0, 3.0, 2.5e-6).unwrap();
        let ansatz = build_extended_ansatz(b.gamma(), 11, &[0.123456789012345, -9.87]).unwrap();
        let curves = vec![
            omega_from_rho(&ansatz, &b, 1.0).unwrap(),
            omega_from_rho(&RhoAnsatz::smoothstep(b.gamma()), &b, 1.0)
                .unwrap()
                .reversed(),
            omega_from_rho(&RhoAnsatz::cosine(b.gamma()), &b, 3f64.sqrt()).unwrap(),
            linear_protocol(b),
            cosine_protocol(b),
            constant_protocol(W0, 1e-6).unwrap(),
        ];
        for c in curves {
            let back = ProtocolCurve::from_metadata(&c.metadata()).unwrap();
            assert_eq!(back, c);
        }
    }

    #[test]
    fn protocol_csv_layout() {
        let b = BoundarySpec::from_gamma_squared(W0, 3.0, 2.5e-6).unwrap();
        let csv = linear_protocol(b).to_csv(5, &["tool=test".into()]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# tool=test");
        assert!(lines[1].starts_with("# provenance=linear"));
        assert_eq!(lines[2], "t[s],omega1[rad/s],domega1[rad/s^2],ddomega1[rad/s^3]");
        assert_eq!(lines.len(), 3 + 5);
    }
}
