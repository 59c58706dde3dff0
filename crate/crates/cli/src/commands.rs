//! Subcommands. Each returns a machine-readable summary and writes its
//! tables into `output.directory`.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::Instant;

use membrane_core::energy::{energy_reduced_expanded, indicator_truncation_remainder};
use membrane_core::{
    cap_alpha, cap_perimeter, el_residuals, energy_diffuse, energy_j, energy_k, energy_k_indicator, energy_reduced,
    energy_sharp_reduced, green_of_projection, height_residual, interface_colatitudes, jump_extract, perturb,
    reformulation_residual, run_flow, run_flow_observed, sharp_energy_series, tanh_caps, two_cap_flow, Cap, CapSet,
    EnergyReport, FlowParams, FlowState, FlowStatus, GridSpec, JumpOptions, ModelParams, SpectralField, TwoCapOptions,
    TwoCapStatus,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::checkpoint::Checkpoint;
use crate::config::{GridConfig, Initial, RunConfig, SnapshotFormat};
use crate::error::CliError;
use crate::output::{diagnostics_table, latlon_matrix, vtk_structured, write_file, Table};

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Parameters echoed into the relax diagnostics.
#[derive(Serialize)]
struct RelaxParams<'a> {
    model: &'a ModelParams,
    grid: &'a GridConfig,
    flow: &'a FlowParams,
    initial: &'a Initial,
}

#[derive(Debug, Clone, Serialize)]
pub struct RelaxSummary {
    pub status: FlowStatus,
    pub steps: usize,
    pub rejected_steps: u64,
    pub t: f64,
    pub step_count: u64,
    pub energy_reduced: f64,
    pub j_eps: f64,
    pub k: f64,
    /// `E_DI(G(Pφ), φ)` split into its parts.
    pub energy: EnergyReport,
    pub mass_drift: f64,
    pub residual_r1: f64,
    pub residual_r2: f64,
    pub wall_time_s: f64,
    pub checkpoint: PathBuf,
}

fn write_snapshot(dir: &Path, formats: &[SnapshotFormat], state: &FlowState) -> Result<(), CliError> {
    let step = state.step_count;
    for f in formats {
        match f {
            SnapshotFormat::Latlon => {
                write_file(
                    &dir.join(format!("phi_{step:08}.txt")),
                    &latlon_matrix("phi", &state.phi.synthesize(), state.t, step),
                )?;
                write_file(
                    &dir.join(format!("u_{step:08}.txt")),
                    &latlon_matrix("u", &state.u.synthesize(), state.t, step),
                )?;
            }
            SnapshotFormat::Vtk => {
                write_file(&dir.join(format!("state_{step:08}.vtk")), &vtk_structured(&state.phi, &state.u, state.t))?;
            }
        }
    }
    Ok(())
}

/// Runs the gradient flow to convergence or `t_end`.
///
/// Outputs: `diagnostics.csv`, `final.ck`, `summary.json` and, when enabled,
/// snapshots under `snapshots/`. Divergence or step underflow is reported
/// as a numerical failure after the outputs are written.
pub fn relax(config: &RunConfig) -> Result<RelaxSummary, CliError> {
    let start = Instant::now();
    let out = &config.output.directory;
    ensure_dir(out)?;
    let grid = config.build_grid()?;
    let init = config.initial_state(&grid)?;
    let params = config.model;
    let flow = config.flow_params();
    let snap_dir = out.join("snapshots");
    if flow.snapshot_every > 0 {
        ensure_dir(&snap_dir)?;
    }
    let mut snapshot_error = None;
    let outcome = run_flow_observed(&init.phi, &params, &flow, init.t, init.step_count, |s| {
        if snapshot_error.is_none() {
            snapshot_error = write_snapshot(&snap_dir, &config.output.formats, s).err();
        }
    })?;
    if let Some(e) = snapshot_error {
        return Err(e);
    }
    let rows = &outcome.diagnostics.rows;
    let echo = RelaxParams { model: &params, grid: &config.grid, flow: &flow, initial: &config.initial };
    diagnostics_table(&echo, rows).write(&out.join("diagnostics.csv"))?;
    let state = &outcome.state;
    let ck_path = out.join("final.ck");
    Checkpoint::from_state(state, &params).write(&ck_path)?;
    let summary = RelaxSummary {
        status: outcome.status,
        steps: rows.len() - 1,
        rejected_steps: outcome.diagnostics.rejected_steps,
        t: state.t,
        step_count: state.step_count,
        energy_reduced: energy_reduced(&state.phi, &params),
        j_eps: energy_j(&state.phi, &params),
        k: energy_k(&state.phi, &params),
        energy: energy_diffuse(&state.u, &state.phi, &params)?,
        mass_drift: rows.iter().map(|r| (r.mass - params.alpha).abs()).fold(0.0, f64::max),
        residual_r1: outcome.residuals.0,
        residual_r2: outcome.residuals.1,
        wall_time_s: start.elapsed().as_secs_f64(),
        checkpoint: ck_path,
    };
    write_file(&out.join("summary.json"), &to_json(&summary))?;
    if outcome.status.is_failure() {
        return Err(CliError::Numerical(format!("flow stopped with status {:?} at t = {}", outcome.status, state.t)));
    }
    Ok(summary)
}

pub fn to_json(value: &impl Serialize) -> String {
    serde_json::to_string_pretty(value).expect("summary serializes") + "\n"
}

/// One row of the Γ-convergence table.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GammaRow {
    pub eps: f64,
    pub j_eps: f64,
    pub line_target: f64,
    pub j_error: f64,
    pub j_rate: Option<f64>,
    pub k: f64,
    pub k_target: f64,
    pub k_error: f64,
    pub energy: f64,
    pub sharp_energy: f64,
    pub energy_error: f64,
    pub energy_rate: Option<f64>,
}

fn rate(prev: Option<(f64, f64)>, eps: f64, err: f64) -> Option<f64> {
    prev.map(|(pe, perr)| (perr / err).ln() / (pe / eps).ln())
}

/// Tanh profiles of the configured caps for each `ε` against the sharp
/// targets `b̂|γ|`, `K(χ)` and `Ẽ_SI(γ)`. Writes `gamma.csv`.
pub fn gamma_study(config: &RunConfig) -> Result<Vec<GammaRow>, CliError> {
    let caps = config
        .initial
        .caps()?
        .ok_or_else(|| CliError::Config("gamma-study needs a tanh_cap or tanh_band initial state".into()))?;
    let grid = config.build_grid()?;
    let r = config.model.radius;
    let resolvable = 4.0 * PI * r / grid.n_theta() as f64;
    if let Some(e) = config.gamma.eps.iter().find(|&&e| e < resolvable) {
        return Err(CliError::Config(format!("eps = {e} is below the resolvable width {resolvable:.4}")));
    }
    let base = ModelParams { alpha: cap_alpha(&caps), ..config.model };
    let chi = caps.sample(&grid);
    let k_target = energy_k_indicator(&chi, &base)?;
    let line_target = base.line_tension_sharp() * cap_perimeter(&caps, r);
    let sharp = energy_sharp_reduced(&caps, &grid, &base)?;
    let raw: Vec<(f64, f64, f64)> = config
        .gamma
        .eps
        .par_iter()
        .map(|&eps| {
            let p = ModelParams { epsilon: eps, ..base };
            let phi = tanh_caps(&grid, &caps, &p)?;
            Ok((eps, energy_j(&phi, &p), energy_k(&phi, &p)))
        })
        .collect::<Result<_, CliError>>()?;
    let mut rows = Vec::with_capacity(raw.len());
    let (mut prev_j, mut prev_e) = (None, None);
    for (eps, j, k) in raw {
        let j_error = (j - line_target).abs() / line_target;
        let energy_error = (j + k - sharp).abs();
        rows.push(GammaRow {
            eps,
            j_eps: j,
            line_target,
            j_error,
            j_rate: rate(prev_j, eps, j_error),
            k,
            k_target,
            k_error: (k - k_target).abs(),
            energy: j + k,
            sharp_energy: sharp,
            energy_error,
            energy_rate: rate(prev_e, eps, energy_error),
        });
        prev_j = Some((eps, j_error));
        prev_e = Some((eps, energy_error));
    }
    ensure_dir(&config.output.directory)?;
    let echo = RelaxParams { model: &base, grid: &config.grid, flow: &config.flow, initial: &config.initial };
    let mut t = Table::new(
        "gamma-limit study",
        &echo,
        &[
            ("eps", "length"),
            ("J_eps", "energy"),
            ("line_target", "energy"),
            ("J_rel_error", "1"),
            ("J_rate", "1"),
            ("K", "energy"),
            ("K_chi", "energy"),
            ("K_error", "energy"),
            ("E_reduced", "energy"),
            ("E_sharp", "energy"),
            ("E_error", "energy"),
            ("E_rate", "1"),
        ],
    );
    for r in &rows {
        t.row(&[
            r.eps,
            r.j_eps,
            r.line_target,
            r.j_error,
            r.j_rate.unwrap_or(f64::NAN),
            r.k,
            r.k_target,
            r.k_error,
            r.energy,
            r.sharp_energy,
            r.energy_error,
            r.energy_rate.unwrap_or(f64::NAN),
        ]);
    }
    t.write(&config.output.directory.join("gamma.csv"))?;
    Ok(rows)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MatchedAngles {
    pub t: f64,
    pub sharp_north: f64,
    pub sharp_south: f64,
    pub field_north: f64,
    pub field_south: f64,
}

impl MatchedAngles {
    pub fn max_deviation(&self) -> f64 {
        (self.sharp_north - self.field_north).abs().max((self.sharp_south - self.field_south).abs())
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct JumpRow {
    pub eps: f64,
    pub theta: f64,
    pub jump_lap: f64,
    pub ratio: f64,
    pub jump_grad: f64,
    pub jump_u: f64,
    pub u_scale: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AxisymSummary {
    pub status: TwoCapStatus,
    pub final_theta: Vec<f64>,
    pub comparison: Vec<MatchedAngles>,
    pub jumps: Vec<JumpRow>,
}

/// North and south cap angles of an axisymmetric two-cap profile.
pub fn two_cap_angles(phi: &SpectralField) -> Result<(f64, f64), CliError> {
    match interface_colatitudes(phi)[..] {
        [a, b] => Ok((a, PI - b)),
        ref zs => Err(CliError::Numerical(format!("expected two interfaces, found {}", zs.len()))),
    }
}

/// Sharp two-cap trajectory, optionally against the phase-field flow, and
/// the jump-condition study. Writes `trajectory.csv`, `comparison.csv` and
/// `jumps.csv`.
pub fn axisym(config: &RunConfig) -> Result<AxisymSummary, CliError> {
    let a = &config.axisym;
    let out = &config.output.directory;
    ensure_dir(out)?;
    let caps = CapSet::two(a.theta_north, a.theta_south)?;
    let params = ModelParams { alpha: cap_alpha(&caps), ..config.model };
    let options = TwoCapOptions { l_max: a.series_l_max, ..Default::default() };
    let traj = two_cap_flow(&caps, &params, a.dt, a.t_end, &options)?;
    let mut table = Table::new(
        "two-cap sharp-interface trajectory",
        &serde_json::json!({ "model": params, "axisym": a }),
        &[("t", "time"), ("theta_north", "rad"), ("theta_south", "rad"), ("E_sharp", "energy")],
    );
    for s in &traj.samples {
        table.row(&[s.t, s.theta[0], s.theta[1], s.energy]);
    }
    table.write(&out.join("trajectory.csv"))?;
    let last = traj.samples.last().expect("trajectory has a start");

    let comparison = if a.compare { compare_two_cap(config, &caps, &params)? } else { Vec::new() };
    if a.compare {
        let mut t = Table::new(
            "sharp vs phase-field interface angles",
            &serde_json::json!({ "model": params, "axisym": a, "grid": config.grid, "flow": config.flow }),
            &[
                ("t", "time"),
                ("sharp_north", "rad"),
                ("field_north", "rad"),
                ("sharp_south", "rad"),
                ("field_south", "rad"),
                ("max_deviation", "rad"),
            ],
        );
        for m in &comparison {
            t.row(&[m.t, m.sharp_north, m.field_north, m.sharp_south, m.field_south, m.max_deviation()]);
        }
        t.write(&out.join("comparison.csv"))?;
    }

    let jumps = jump_study(config)?;
    if !jumps.is_empty() {
        let mut t = Table::new(
            "jump conditions of relaxed single caps",
            &serde_json::json!({ "model": config.model, "axisym": a, "grid": config.grid, "flow": config.flow }),
            &[
                ("eps", "length"),
                ("theta", "rad"),
                ("jump_lap_u", "1/length"),
                ("ratio", "1"),
                ("jump_grad_u", "1"),
                ("jump_u", "length"),
                ("u_scale", "length"),
            ],
        );
        for j in &jumps {
            t.row(&[j.eps, j.theta, j.jump_lap, j.ratio, j.jump_grad, j.jump_u, j.u_scale]);
        }
        t.write(&out.join("jumps.csv"))?;
    }

    let summary = AxisymSummary { status: traj.status, final_theta: last.theta.clone(), comparison, jumps };
    write_file(&out.join("summary.json"), &to_json(&summary))?;
    if traj.status == TwoCapStatus::StepUnderflow {
        return Err(CliError::Numerical("two-cap flow step underflow".into()));
    }
    Ok(summary)
}

/// Both flows advanced segment by segment so that they meet at exactly the
/// matched times.
pub fn compare_two_cap(
    config: &RunConfig,
    caps: &CapSet,
    params: &ModelParams,
) -> Result<Vec<MatchedAngles>, CliError> {
    let a = &config.axisym;
    let n = a.matched_times.max(1);
    let seg = a.t_end / n as f64;
    let grid = config.build_grid()?;
    let options = TwoCapOptions { l_max: a.series_l_max, ..Default::default() };
    let flow = FlowParams { t_end: seg, stop_tol: 0.0, snapshot_every: 0, ..config.flow };
    let mut phi = tanh_caps(&grid, caps, params)?;
    let mut sharp = caps.clone();
    let mut t = 0.0;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let traj = two_cap_flow(&sharp, params, a.dt.min(seg), seg, &options)?;
        if traj.status != TwoCapStatus::Completed {
            return Err(CliError::Numerical(format!("sharp flow stopped early: {:?}", traj.status)));
        }
        let th = &traj.samples.last().expect("non-empty").theta;
        sharp = CapSet::two(th[0], th[1])?;
        let run = run_flow_observed(&phi, params, &flow, t, 0, |_| {})?;
        if run.status != FlowStatus::ReachedEnd {
            return Err(CliError::Numerical(format!("phase-field flow stopped early: {:?}", run.status)));
        }
        phi = run.state.phi;
        t = run.state.t;
        let (fn_, fs) = two_cap_angles(&phi)?;
        out.push(MatchedAngles { t, sharp_north: th[0], sharp_south: th[1], field_north: fn_, field_south: fs });
    }
    Ok(out)
}

/// Relaxes a single north cap for each `axisym.jump_eps` and extracts the
/// one-sided jumps of `u` across its interface.
pub fn jump_study(config: &RunConfig) -> Result<Vec<JumpRow>, CliError> {
    let a = &config.axisym;
    if a.jump_eps.is_empty() {
        return Ok(Vec::new());
    }
    let grid = config.build_grid()?;
    let caps = CapSet::single(Cap::north(a.jump_theta0))?;
    let base = ModelParams { alpha: cap_alpha(&caps), ..config.model };
    let flow = FlowParams { snapshot_every: 0, ..config.flow };
    a.jump_eps
        .par_iter()
        .map(|&eps| {
            let p = ModelParams { epsilon: eps, ..base };
            let phi = tanh_caps(&grid, &caps, &p)?;
            let run = run_flow(&phi, &p, &flow)?;
            if run.status.is_failure() {
                return Err(CliError::Numerical(format!("relaxation at eps = {eps} failed: {:?}", run.status)));
            }
            let j = jump_extract(&run.state.phi, &run.state.u, &p, &JumpOptions::default())?;
            Ok(JumpRow {
                eps,
                theta: j.theta,
                jump_lap: j.jump_lap,
                ratio: j.jump_lap / (-2.0 * p.coupling),
                jump_grad: j.jump_grad,
                jump_u: j.jump_u,
                u_scale: j.u_scale,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergySummary {
    pub t: f64,
    pub step_count: u64,
    pub energy_reduced: f64,
    pub j_eps: f64,
    pub k: f64,
    pub diffuse: EnergyReport,
}

/// Energies of a stored state, evaluated with the stored parameters.
pub fn energy(path: &Path) -> Result<EnergySummary, CliError> {
    let ck = Checkpoint::read(path)?;
    let grid = ck.build_grid()?;
    let phi = ck.phi_on(&grid)?;
    let p = ck.params;
    let u = green_of_projection(&phi, &p);
    Ok(EnergySummary {
        t: ck.t,
        step_count: ck.step_count,
        energy_reduced: energy_reduced(&phi, &p),
        j_eps: energy_j(&phi, &p),
        k: energy_k(&phi, &p),
        diffuse: energy_diffuse(&u, &phi, &p)?,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn below(name: &str, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, passed: value.is_finite() && value < tolerance }
    }
}

/// Fast invariant suite over transforms, operators, energies, the flow and
/// persistence.
pub fn selftest() -> Result<Vec<Check>, CliError> {
    let mut checks = Vec::new();
    let p = ModelParams { epsilon: 0.2, sigma: 0.5, ..Default::default() };
    let grid = GridSpec::new(1.0, 24, 2.0).build()?;
    let phi = perturb(&SpectralField::constant(&grid, p.alpha), 0.8, 11, 24);

    let back = phi.synthesize().analyze()?;
    let rt = phi.coeffs().iter().zip(back.coeffs()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    checks.push(Check::below("transform round trip", rt, 1e-12));
    let parseval = (phi.synthesize().map(|v| v * v).integrate() - phi.norm_sq()).abs() / phi.norm_sq();
    checks.push(Check::below("parseval", parseval, 1e-12));

    checks.push(Check::below("reformulation residual", reformulation_residual(&phi, &p), 1e-10));
    let u = green_of_projection(&phi, &p);
    checks.push(Check::below("height equation residual", height_residual(&u, &phi, &p)?, 1e-9));
    let reduced = energy_reduced(&phi, &p);
    let diffuse = energy_diffuse(&u, &phi, &p)?.total;
    checks.push(Check::below("E_DI(G(P phi), phi) = J + K", (diffuse - reduced).abs() / reduced.abs(), 1e-9));
    let expanded = energy_reduced_expanded(&phi, &p)?;
    checks.push(Check::below("expanded reduced energy", (expanded - reduced).abs() / reduced.abs(), 1e-9));

    let zonal = GridSpec::zonal(1.0, 512, 2.0).build()?;
    let equator = CapSet::single(Cap::north(PI / 2.0))?;
    let series = sharp_energy_series(&equator, &p, 1 << 14).total;
    let on_grid = energy_sharp_reduced(&equator, &zonal, &p)?;
    checks.push(Check::below("sharp energy: grid vs series", (on_grid - series).abs() / series, 1e-5));
    let rem = indicator_truncation_remainder(&equator.sample(&zonal), &p)?;
    checks.push(Check::below("indicator truncation remainder >= 0", (-rem).max(0.0), 1e-12));

    let small = GridSpec::new(1.0, 16, 2.0).build()?;
    let fp = FlowParams { dt: 1e-3, t_end: 0.05, stop_tol: 0.0, ..Default::default() };
    let start = tanh_caps(&small, &CapSet::two(1.0, 0.8)?, &ModelParams { alpha: 0.0, ..p })?;
    let pa = ModelParams { alpha: start.mean(), ..p };
    let run = run_flow(&perturb(&start, 0.05, 3, 8), &pa, &fp)?;
    let rows = &run.diagnostics.rows;
    let drift = rows.iter().map(|r| (r.mass - pa.alpha).abs()).fold(0.0, f64::max);
    checks.push(Check::below("mass drift", drift, 1e-12));
    let rise = rows.windows(2).map(|w| (w[1].energy - w[0].energy) / w[0].energy.abs()).fold(f64::MIN, f64::max);
    checks.push(Check::below("energy increase per step (relative)", rise.max(0.0), 1e-12));
    let (r1, r2) = el_residuals(&run.state, &pa)?;
    checks.push(Check::below("height residual along flow", r2, 1e-9));
    checks.push(Check::below("finite EL residual", if r1.is_finite() { 0.0 } else { 1.0 }, 0.5));

    let ck = Checkpoint::from_state(&run.state, &pa);
    let bytes = ck.to_bytes();
    let same = Checkpoint::from_bytes(&bytes)?.to_bytes() == bytes;
    checks.push(Check::below("checkpoint round trip", if same { 0.0 } else { 1.0 }, 0.5));
    Ok(checks)
}

/// Fixed-width pass/fail matrix.
pub fn format_checks(checks: &[Check]) -> String {
    let mut s = String::new();
    for c in checks {
        let mark = if c.passed { "PASS" } else { "FAIL" };
        s.push_str(&format!("{mark}  {:<40} {:>12.3e}  < {:.0e}\n", c.name, c.value, c.tolerance));
    }
    s
}
