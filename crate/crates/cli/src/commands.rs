use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use ionramp::auxiliary_dynamics::harmonic_evaluation;
use ionramp::chain_model::{normal_mode_basis, Chain, IonSpecies};
use ionramp::lab_dynamics::{integrate_hamilton, LabOptions};
use ionramp::protocol_design::{constant_protocol, BoundarySpec, ProtocolCurve};
use ionramp::sweep::{build_protocol, rows_to_csv, sweep_tf, Execution, ProtocolFamily, SweepRow};

use crate::config::RunConfig;

/// How a successful command finished.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Done,
    /// Results were written, but the optimizer stopped before converging.
    Unconverged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Figure {
    Fig1,
    Fig4,
    Fig7,
}

/// Writes files into the output directory with a common `#` header.
pub struct Output {
    dir: PathBuf,
    header: Vec<String>,
}

impl Output {
    pub fn new(dir: &Path, cfg: &RunConfig, command: &str) -> Self {
        Self {
            dir: dir.to_path_buf(),
            header: vec![
                format!("ionramp {}", env!("CARGO_PKG_VERSION")),
                format!("config_sha256 {}", cfg.hash()),
                format!("command {command}"),
            ],
        }
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    fn header_block(&self) -> String {
        self.header.iter().map(|h| format!("# {h}\n")).collect()
    }

    pub fn write(&self, name: &str, body: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.dir)
            .with_context(|| format!("cannot create output directory {}", self.dir.display()))?;
        let path = self.dir.join(name);
        std::fs::write(&path, body).with_context(|| format!("cannot write {}", path.display()))?;
        println!("wrote {}", path.display());
        Ok(path)
    }

    /// Like [`write`](Self::write) for bodies that carry no header yet.
    pub fn write_with_header(&self, name: &str, body: &str) -> Result<PathBuf> {
        self.write(name, &format!("{}{body}", self.header_block()))
    }
}

pub fn modes(cfg: &RunConfig, out: &Output) -> Result<Status> {
    let chain = cfg.chain()?;
    let w0 = cfg.omega0();
    let wf = w0 / cfg.trap.gamma_squared;
    let basis = normal_mode_basis(&chain, w0)?;
    let n = chain.len();

    let mut csv = String::from("mode,A,Omega0/2pi[MHz],Omegaf/2pi[MHz]");
    for i in 1..=n {
        write!(csv, ",a{i}")?;
    }
    csv.push('\n');
    println!(
        "{:>4} {:>16} {:>14} {:>14}  eigenvector",
        "mode", "A", "Ω₀/2π [MHz]", "Ω_f/2π [MHz]"
    );
    for (nu, a) in basis.frequency_ratios.iter().enumerate() {
        let v = basis.vector(nu);
        let f0 = a * w0 / (2.0 * std::f64::consts::PI) * 1e-6;
        let ff = a * wf / (2.0 * std::f64::consts::PI) * 1e-6;
        write!(csv, "{},{:.15e},{:.12e},{:.12e}", nu + 1, a, f0, ff)?;
        for x in &v {
            write!(csv, ",{x:.15e}")?;
        }
        csv.push('\n');
        let comps: Vec<String> = v.iter().map(|x| format!("{x:+.6}")).collect();
        println!(
            "{:>4} {:>16.12} {:>14.6} {:>14.6}  ({})",
            nu + 1,
            a,
            f0,
            ff,
            comps.join(", ")
        );
    }
    out.write_with_header("modes.csv", &csv)?;
    Ok(Status::Done)
}

pub fn design(cfg: &RunConfig, out: &Output) -> Result<Status> {
    if !cfg.protocol.kind.is_designed() {
        bail!(
            "protocol.kind: design needs a designed protocol (shooting, smoothstep or cosine_ansatz), got {:?}",
            cfg.protocol.kind
        );
    }
    let chain = cfg.chain()?;
    let boundary = BoundarySpec::from_gamma_squared(cfg.omega0(), cfg.trap.gamma_squared, cfg.single_tf()?)?;
    let basis = normal_mode_basis(&chain, cfg.omega0())?;
    let settings = cfg.sweep_settings();
    let family = cfg.family().expect("designed kinds map to a family");
    let (protocol, shooting) = build_protocol(&chain, &basis, family, boundary, &settings)?;

    let mut status = Status::Done;
    let report = match &shooting {
        Some(result) => {
            println!(
                "free parameters: {}  objective: {:.3e} quanta  converged: {}",
                result.free_params.len(),
                result.objective_quanta(),
                result.converged
            );
            if !result.converged {
                status = Status::Unconverged;
                eprintln!(
                    "warning: optimizer stopped after {} iterations without converging; best point written",
                    result.iterations
                );
            }
            result.report()
        }
        None => {
            let eval = harmonic_evaluation(
                &chain,
                &basis,
                &protocol,
                Some(0),
                settings.center,
                &settings.aux_integrator,
            )?;
            println!(
                "free parameters: 0  harmonic excitation: {:.3e} quanta",
                eval.total_quanta
            );
            let audit = protocol.boundary_audit();
            let mut s = format!("protocol: {}\nfree_parameter_count: 0\n", protocol.metadata());
            writeln!(s, "objective_J: {:.12e}", eval.total_excess)?;
            writeln!(s, "objective_quanta: {:.12e}", eval.total_quanta)?;
            writeln!(
                s,
                "omega_bc_residuals: start_d1={:.3e} start_d2={:.3e} end_d1={:.3e} end_d2={:.3e}",
                audit.start_d1, audit.start_d2, audit.end_d1, audit.end_d2
            )?;
            s.push_str("mode,rho,drho[1/s],alpha[kg^0.5 m],dalpha[kg^0.5 m/s],rho_minus_gamma,excess_quanta\n");
            for m in &eval.modes {
                writeln!(
                    s,
                    "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                    m.mode + 1,
                    m.state.rho,
                    m.state.drho,
                    m.state.alpha,
                    m.state.dalpha,
                    m.rho_residual,
                    m.quanta
                )?;
            }
            s
        }
    };
    out.write("protocol.csv", &protocol.to_csv(cfg.output.samples, out.header()))?;
    out.write_with_header("design_report.txt", &report)?;
    Ok(status)
}

/// Reads a protocol CSV written by `design` (or `verify`) back into a curve.
pub fn read_protocol(path: &Path) -> Result<ProtocolCurve> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read protocol {}", path.display()))?;
    let line = text
        .lines()
        .filter_map(|l| l.strip_prefix('#'))
        .find(|l| l.contains("provenance="))
        .with_context(|| format!("{} has no `# provenance=...` metadata line", path.display()))?;
    Ok(ProtocolCurve::from_metadata(line.trim())?)
}

pub fn verify(cfg: &RunConfig, protocol_file: Option<&Path>, out: &Output) -> Result<Status> {
    let chain = cfg.chain()?;
    let protocol = match protocol_file {
        Some(path) => read_protocol(path)?,
        None => {
            let tf = cfg.single_tf()?;
            match cfg.family() {
                None => constant_protocol(cfg.omega0(), tf)?,
                Some(family) => {
                    let boundary = BoundarySpec::from_gamma_squared(cfg.omega0(), cfg.trap.gamma_squared, tf)?;
                    let basis = normal_mode_basis(&chain, cfg.omega0())?;
                    let (p, shooting) = build_protocol(&chain, &basis, family, boundary, &cfg.sweep_settings())?;
                    if let Some(s) = shooting.filter(|s| !s.converged) {
                        eprintln!("warning: optimizer did not converge ({} iterations)", s.iterations);
                    }
                    p
                }
            }
        }
    };
    let traj = integrate_hamilton(&chain, &protocol, &LabOptions::default())?;
    let report = traj.excitation_report()?;
    println!(
        "total excitation: {:.6e} quanta  (energy balance residual {:.1e})",
        report.total_quanta,
        report.energy_balance_residual.unwrap_or(f64::NAN)
    );
    out.write_with_header("verify_report.txt", &report.to_text())?;
    out.write("trajectory.csv", &traj.to_csv(cfg.output.samples, out.header()))?;
    Ok(Status::Done)
}

fn execution() -> Execution {
    Execution::default()
}

pub fn sweep(cfg: &RunConfig, out: &Output) -> Result<Status> {
    let Some(family) = cfg.family() else {
        bail!("protocol.kind: sweep needs a ramp, `constant` has nothing to sweep");
    };
    let tfs = cfg
        .tf_list()
        .context("trap: sweep needs tf_list_us, tf_sweep or tf_us")?;
    let chain = cfg.chain()?;
    let rows = sweep_tf(&chain, family, &tfs, &cfg.sweep_settings(), execution())?;
    report_row_errors(&rows);
    out.write(
        &format!("sweep_{family}.csv"),
        &rows_to_csv(&rows, chain.len(), out.header()),
    )?;
    Ok(Status::Done)
}

fn report_row_errors(rows: &[SweepRow]) {
    for r in rows {
        if let Some(e) = &r.error {
            eprintln!("t_f = {:.3} us: {e}", r.tf * 1e6);
        }
    }
}

/// Geometric grid between `start` and `stop` (μs), returned in seconds.
fn log_grid(start: f64, stop: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![start * 1e-6];
    }
    let ratio = (stop / start).ln() / (points - 1) as f64;
    (0..points)
        .map(|k| {
            if k + 1 == points {
                stop
            } else {
                start * (ratio * k as f64).exp()
            }
        })
        .map(|us| us * 1e-6)
        .collect()
}

fn curve_csv(header: &[String], label: &str, rows: &[SweepRow], pick: impl Fn(&SweepRow) -> Option<f64>) -> String {
    let mut s = String::new();
    for h in header {
        s.push_str(&format!("# {h}\n"));
    }
    s.push_str(&format!("# curve {label}\n"));
    s.push_str("tf[us],quanta,error\n");
    for r in rows {
        let q = pick(r).map_or_else(|| "nan".to_string(), |q| format!("{q:.12e}"));
        let err = r.error.as_deref().unwrap_or("").replace(',', ";");
        s.push_str(&format!("{:.6},{q},{err}\n", r.tf * 1e6));
    }
    s
}

pub fn reproduce(figure: Figure, cfg: &RunConfig, out: &Output) -> Result<Status> {
    let settings = cfg.sweep_settings();
    let (start, stop) = match figure {
        Figure::Fig1 => (1.0, 8.0),
        Figure::Fig4 => (1.0, 10.0),
        Figure::Fig7 => (1.0, 40.0),
    };
    let tfs = if cfg.has_tf_grid() {
        cfg.tf_list().expect("grid present")
    } else {
        log_grid(start, stop, cfg.output.sweep_points)
    };
    let ca = |n| Chain::uniform(IonSpecies::ca40(), n);
    let order = cfg.protocol.order;
    let total = |r: &SweepRow| r.error.is_none().then_some(r.total_quanta);

    let mut curves: Vec<(String, String, Vec<SweepRow>, bool)> = Vec::new();
    match figure {
        Figure::Fig1 => {
            let chain = ca(2)?;
            let shooting = sweep_tf(&chain, ProtocolFamily::Shooting { order }, &tfs, &settings, execution())?;
            let smooth = sweep_tf(&chain, ProtocolFamily::Smoothstep, &tfs, &settings, execution())?;
            curves.push((
                "fig1_shooting_harmonic.csv".into(),
                format!("shooting{order} harmonic"),
                shooting.clone(),
                true,
            ));
            curves.push((
                "fig1_shooting_classical.csv".into(),
                format!("shooting{order} classical"),
                shooting,
                false,
            ));
            curves.push((
                "fig1_smoothstep_classical.csv".into(),
                "smoothstep classical".into(),
                smooth,
                false,
            ));
        }
        Figure::Fig4 => {
            for n in [2, 4, 8] {
                let rows = sweep_tf(&ca(n)?, ProtocolFamily::Smoothstep, &tfs, &settings, execution())?;
                curves.push((
                    format!("fig4_n{n}.csv"),
                    format!("smoothstep classical N={n}"),
                    rows,
                    false,
                ));
            }
        }
        Figure::Fig7 => {
            let chain = ca(2)?;
            for (family, name) in [
                (ProtocolFamily::Shooting { order }, "shooting"),
                (ProtocolFamily::Linear, "linear"),
                (ProtocolFamily::Cosine, "cosine"),
            ] {
                let rows = sweep_tf(&chain, family, &tfs, &settings, execution())?;
                curves.push((format!("fig7_{name}.csv"), format!("{family} classical"), rows, false));
            }
        }
    }
    for (file, label, rows, harmonic) in &curves {
        report_row_errors(rows);
        let body = if *harmonic {
            curve_csv(out.header(), label, rows, |r| r.harmonic_quanta)
        } else {
            curve_csv(out.header(), label, rows, total)
        };
        out.write(file, &body)?;
    }
    Ok(Status::Done)
}

/// Built-in configuration for `reproduce` without `--config`.
pub fn figure_defaults() -> RunConfig {
    RunConfig::parse(
        r#"
[chain]
species = ["Ca40", "Ca40"]

[trap]
omega0_mhz = 1.2
gamma_squared = 3.0
"#,
    )
    .expect("built-in config is valid")
}
