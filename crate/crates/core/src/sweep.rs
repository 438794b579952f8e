//! Final-time sweeps: build a protocol for each t_f, simulate it in the lab
//! frame, and collect the excitation. Rows are independent and are evaluated
//! in parallel when the `parallel` feature is enabled.

use std::fmt;

use crate::auxiliary_dynamics::{
    harmonic_evaluation, optimize_free_params, EnergyCenter, ShootingProblem, ShootingResult,
};
use crate::chain_model::{normal_mode_basis, Chain, NormalModeBasis};
use crate::lab_dynamics::{integrate_hamilton, LabOptions};
use crate::ode::Dopri5;
use crate::protocol_design::{
    cosine_protocol, linear_protocol, omega_from_rho, BoundarySpec, ProtocolCurve, RhoAnsatz,
};
use crate::simplex::NelderMead;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtocolFamily {
    /// Ninth-order ansatz on the lowest mode, no optimization.
    Smoothstep,
    /// Cosine-series ansatz on the lowest mode.
    CosineAnsatz,
    /// Extended polynomial with free parameters fixed by shooting.
    Shooting {
        order: usize,
    },
    Linear,
    Cosine,
}

impl fmt::Display for ProtocolFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProtocolFamily::Smoothstep => write!(f, "smoothstep"),
            ProtocolFamily::CosineAnsatz => write!(f, "cosine_ansatz"),
            ProtocolFamily::Shooting { order } => write!(f, "shooting{order}"),
            ProtocolFamily::Linear => write!(f, "linear"),
            ProtocolFamily::Cosine => write!(f, "cosine"),
        }
    }
}

impl ProtocolFamily {
    pub fn is_designed(&self) -> bool {
        matches!(
            self,
            ProtocolFamily::Smoothstep | ProtocolFamily::CosineAnsatz | ProtocolFamily::Shooting { .. }
        )
    }
}

/// How rows of a sweep are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Rayon's global pool; identical to `Sequential` without the
    /// `parallel` feature.
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    pub omega0: f64,
    pub gamma_squared: f64,
    pub optimizer: NelderMead,
    pub aux_integrator: Dopri5,
    pub lab: LabOptions,
    pub center: EnergyCenter,
    /// Also evaluate the harmonic-frame prediction for designed families.
    pub harmonic: bool,
}

impl SweepSettings {
    pub fn new(omega0: f64, gamma_squared: f64) -> Self {
        Self {
            omega0,
            gamma_squared,
            optimizer: NelderMead::default(),
            aux_integrator: Dopri5::default(),
            lab: LabOptions::default(),
            center: EnergyCenter::default(),
            harmonic: true,
        }
    }

    pub fn boundary(&self, tf: f64) -> Result<BoundarySpec> {
        BoundarySpec::from_gamma_squared(self.omega0, self.gamma_squared, tf)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub tf: f64,
    /// Lab-frame quanta summed over final normal modes (NaN on error).
    pub total_quanta: f64,
    pub per_mode_quanta: Vec<f64>,
    /// Harmonic-frame prediction of the final quanta, designed families only.
    pub harmonic_quanta: Option<f64>,
    pub free_params: Vec<f64>,
    pub converged: Option<bool>,
    pub error: Option<String>,
}

impl SweepRow {
    fn failed(tf: f64, err: &Error) -> Self {
        Self {
            tf,
            total_quanta: f64::NAN,
            per_mode_quanta: Vec::new(),
            harmonic_quanta: None,
            free_params: Vec::new(),
            converged: None,
            error: Some(err.to_string()),
        }
    }
}

/// Protocol of the given family for one boundary, plus the shooting result
/// when the family needs optimization.
pub fn build_protocol(
    chain: &Chain,
    basis: &NormalModeBasis,
    family: ProtocolFamily,
    boundary: BoundarySpec,
    settings: &SweepSettings,
) -> Result<(ProtocolCurve, Option<ShootingResult>)> {
    let a_ref = basis.frequency_ratios[0];
    match family {
        ProtocolFamily::Smoothstep => Ok((
            omega_from_rho(&RhoAnsatz::smoothstep(boundary.gamma()), &boundary, a_ref)?,
            None,
        )),
        ProtocolFamily::CosineAnsatz => Ok((
            omega_from_rho(&RhoAnsatz::cosine(boundary.gamma()), &boundary, a_ref)?,
            None,
        )),
        ProtocolFamily::Shooting { order } => {
            let problem = ShootingProblem {
                chain: chain.clone(),
                basis: basis.clone(),
                boundary,
                design_mode: 0,
                order,
                center: settings.center,
                integrator: settings.aux_integrator.clone(),
            };
            let result = optimize_free_params(&problem, &settings.optimizer)?;
            Ok((result.protocol.clone(), Some(result)))
        }
        ProtocolFamily::Linear => Ok((linear_protocol(boundary), None)),
        ProtocolFamily::Cosine => Ok((cosine_protocol(boundary), None)),
    }
}

/// One sweep row: design (and optimize) at `tf`, then simulate.
pub fn evaluate_row(
    chain: &Chain,
    basis: &NormalModeBasis,
    family: ProtocolFamily,
    tf: f64,
    settings: &SweepSettings,
) -> SweepRow {
    let run = || -> Result<SweepRow> {
        let boundary = settings.boundary(tf)?;
        let (protocol, shooting) = build_protocol(chain, basis, family, boundary, settings)?;
        let harmonic_quanta = match (&shooting, family.is_designed() && settings.harmonic) {
            (Some(s), _) => Some(s.evaluation.total_quanta),
            (None, true) => Some(
                harmonic_evaluation(
                    chain,
                    basis,
                    &protocol,
                    Some(0),
                    settings.center,
                    &settings.aux_integrator,
                )?
                .total_quanta,
            ),
            (None, false) => None,
        };
        let report = integrate_hamilton(chain, &protocol, &settings.lab)?.excitation_report()?;
        Ok(SweepRow {
            tf,
            total_quanta: report.total_quanta,
            per_mode_quanta: report.per_mode_quanta,
            harmonic_quanta,
            free_params: shooting.as_ref().map(|s| s.free_params.clone()).unwrap_or_default(),
            converged: shooting.as_ref().map(|s| s.converged),
            error: None,
        })
    };
    run().unwrap_or_else(|e| SweepRow::failed(tf, &e))
}

/// Excitation versus final time. `tf_list` must be positive and strictly
/// ascending; per-row failures are recorded in the row and do not stop the
/// sweep. Output order always follows `tf_list`.
pub fn sweep_tf(
    chain: &Chain,
    family: ProtocolFamily,
    tf_list: &[f64],
    settings: &SweepSettings,
    execution: Execution,
) -> Result<Vec<SweepRow>> {
    if tf_list.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::InvalidInput("final times must be positive".into()));
    }
    if tf_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("final times must be strictly ascending".into()));
    }
    let basis = normal_mode_basis(chain, settings.omega0)?;
    let row = |&tf: &f64| evaluate_row(chain, &basis, family, tf, settings);
    Ok(match execution {
        Execution::Sequential => tf_list.iter().map(row).collect(),
        Execution::Parallel => run_parallel(tf_list, row),
    })
}

#[cfg(feature = "parallel")]
fn run_parallel<F>(tf_list: &[f64], row: F) -> Vec<SweepRow>
where
    F: Fn(&f64) -> SweepRow + Sync + Send,
{
    use rayon::prelude::*;
    tf_list.par_iter().map(row).collect()
}

#[cfg(not(feature = "parallel"))]
fn run_parallel<F>(tf_list: &[f64], row: F) -> Vec<SweepRow>
where
    F: Fn(&f64) -> SweepRow,
{
    tf_list.iter().map(row).collect()
}

/// CSV rendering of sweep rows: t_f in μs, quanta per mode, optional harmonic
/// prediction and free parameters.
pub fn rows_to_csv(rows: &[SweepRow], modes: usize, extra_header: &[String]) -> String {
    let mut out = String::new();
    for h in extra_header {
        out.push_str(&format!("# {h}\n"));
    }
    let mut header = vec!["tf[us]".to_string(), "total_quanta".into()];
    header.extend((1..=modes).map(|k| format!("mode{k}_quanta")));
    header.push("harmonic_quanta".into());
    header.push("converged".into());
    header.push("free_params".into());
    header.push("error".into());
    out.push_str(&header.join(","));
    out.push('\n');
    for r in rows {
        let mut cells = vec![format!("{:.6}", r.tf * 1e6), fmt_num(r.total_quanta)];
        for k in 0..modes {
            cells.push(r.per_mode_quanta.get(k).map_or_else(String::new, |q| fmt_num(*q)));
        }
        cells.push(r.harmonic_quanta.map_or_else(String::new, fmt_num));
        cells.push(r.converged.map_or_else(String::new, |c| c.to_string()));
        cells.push(
            r.free_params
                .iter()
                .map(|x| format!("{x:.12e}"))
                .collect::<Vec<_>>()
                .join(";"),
        );
        cells.push(r.error.as_deref().unwrap_or("").replace(',', ";"));
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.12e}")
    }
}
