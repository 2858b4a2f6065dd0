//! Command-line front end: runs the particle engines, the hydrodynamic
//! solver, and the convergence experiments from a JSON configuration, and
//! writes machine-readable CSV / JSON artifacts.

mod config;

use clap::{Parser, Subcommand};
use config::{preset, ConfigFile, ModelSpec, Resolved};
use hydroaction_core::hydro::{solve_pde, DensitySeries, Grid};
use hydroaction_core::lab;
use hydroaction_core::scalars::Scalars;
use serde_json::json;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "hydroaction", version, about = "Interacting-particle action toolkit")]
struct Cli {
    /// JSON configuration overlaying the preset.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory for CSV / JSON artifacts.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Overrides the RNG seed of the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (also HYDROACTION_THREADS; flag wins).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Baseline scenario: sep or zrp-linear.
    #[arg(long, global = true, default_value = "zrp-linear")]
    preset: String,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Checks the configuration and echoes the resolved form.
    Validate,
    /// Kinetic Monte Carlo action estimate on one lattice.
    Simulate,
    /// Master-equation action on one lattice (exact, small sectors).
    Exact,
    /// Solves the macroscopic density equation; writes density.csv.
    Hydro,
    /// Macroscopic action breakdown of the solved density path.
    Action,
    /// Exact / Monte Carlo actions across lattice sizes against the
    /// macroscopic target; writes tilted_limit.csv.
    Converge,
}

enum CliError {
    /// Configuration / schema problems: exit code 2.
    Config(String),
    /// Runtime failures: exit code 1.
    Runtime(String),
}

impl From<hydroaction_core::CoreError> for CliError {
    fn from(e: hydroaction_core::CoreError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("i/o error: {e}"))
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(CliError::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            std::process::exit(2);
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            std::process::exit(1);
        }
    }
}

fn resolve(cli: &Cli) -> Result<Resolved, CliError> {
    let mut resolved = preset(&cli.preset).map_err(CliError::Config)?;
    if let Some(path) = &cli.config {
        let raw = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let file: ConfigFile = serde_json::from_str(&raw)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        resolved = resolved.overlay(file);
    }
    if let Some(seed) = cli.seed {
        resolved.seed = seed;
    }
    resolved.threads = cli.threads.or_else(|| {
        std::env::var("HYDROACTION_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    resolved.validate().map_err(CliError::Config)?;
    Ok(resolved)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let resolved = resolve(&cli)?;
    if let Some(n) = resolved.threads {
        // a second pool build in the same process is fine to ignore
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    fs::create_dir_all(&cli.out)?;
    write_json(&cli.out.join("resolved_config.json"), &serde_json::to_value(&resolved).unwrap())?;

    match cli.cmd {
        Cmd::Validate => {
            println!("configuration ok (preset {})", resolved.preset);
            Ok(())
        }
        Cmd::Simulate => cmd_simulate(&cli.out, &resolved),
        Cmd::Exact => cmd_exact(&cli.out, &resolved),
        Cmd::Hydro => cmd_hydro(&cli.out, &resolved),
        Cmd::Action => cmd_action(&cli.out, &resolved),
        Cmd::Converge => cmd_converge(&cli.out, &resolved),
    }
}

fn cmd_simulate(out: &Path, r: &Resolved) -> Result<(), CliError> {
    let sc = r.scenario().map_err(CliError::Config)?;
    let l = r.lattice_l;
    let stats = lab::kmc_action(&sc, l)?;
    write_json(
        &out.join("summary.json"),
        &json!({
            "command": "simulate",
            "l": l,
            "n_traj": stats.count,
            "action_rescaled": stats.mean,
            "stderr": stats.std_error,
            "variance": stats.variance,
        }),
    )?;
    println!(
        "kmc action at L = {l}: {:.6e} +- {:.1e} ({} trajectories)",
        stats.mean, stats.std_error, stats.count
    );
    Ok(())
}

fn cmd_exact(out: &Path, r: &Resolved) -> Result<(), CliError> {
    let sc = r.scenario().map_err(CliError::Config)?;
    let l = r.lattice_l;
    let (b, sector) = lab::exact_action(&sc, l)?;
    let vol = (l as f64).powi(sc.d as i32);
    write_json(
        &out.join("summary.json"),
        &json!({
            "command": "exact",
            "l": l,
            "n_states": sector.n_states(),
            "action": b.total,
            "action_rescaled": b.total / vol,
            "free_energy_initial": b.free_energy_initial,
            "free_energy_final": b.free_energy_final,
            "psi_integral": b.psi_integral,
            "psi_star_integral": b.psi_star_integral,
            "coupling_integral": b.coupling_integral,
            "pairing_integral": b.pairing_integral,
            "quad_error": b.quad_error,
        }),
    )?;
    println!(
        "exact action at L = {l}: {:.6e} ({} states)",
        b.total,
        sector.n_states()
    );
    Ok(())
}

fn solve_series(r: &Resolved) -> Result<DensitySeries, CliError> {
    let sc = r.scenario().map_err(CliError::Config)?;
    if sc.d != 1 {
        return Err(CliError::Config(
            "the macroscopic solver and action are implemented for d = 1".into(),
        ));
    }
    let grid = Grid::new(vec![r.grid_m])?;
    let scal = Scalars::new(&sc.model);
    let rho0: Vec<f64> = (0..r.grid_m).map(|c| sc.rho0(&grid.center(c))).collect();
    Ok(solve_pde(&grid, &scal, &sc.pot, &rho0, &sc.times(), sc.ode_rtol)?)
}

fn cmd_hydro(out: &Path, r: &Resolved) -> Result<(), CliError> {
    let series = solve_series(r)?;
    write_density_csv(&out.join("density.csv"), &series)?;
    let nt = series.times.len();
    let mut summary = json!({
        "command": "hydro",
        "grid_m": r.grid_m,
        "n_time": nt - 1,
        "mass_initial": series.mass(0),
        "mass_final": series.mass(nt - 1),
        "clamped_evaluations": series.clamped,
    });
    // pure linear zero-range with no potential solves the heat equation:
    // report the L2 error against the decayed Fourier modes
    if r.model == ModelSpec::ZrpLinear && r.potential.is_zero() && r.tilt.is_zero() {
        summary["heat_l2_error"] = json!(heat_l2_error(r, &series));
    }
    write_json(&out.join("summary.json"), &summary)?;
    println!(
        "density path solved: {} cells, {} times, mass drift {:.3e}",
        r.grid_m,
        nt,
        (series.mass(nt - 1) - series.mass(0)).abs()
    );
    Ok(())
}

fn heat_l2_error(r: &Resolved, series: &DensitySeries) -> f64 {
    let m = r.grid_m;
    let mut worst = 0.0f64;
    for (k, t) in series.times.iter().enumerate() {
        let mut acc = 0.0;
        for c in 0..m {
            let u = series.grid.center(c);
            let mut exact = r.rho0_mean;
            for mode in &r.rho0_modes.modes {
                let kk = mode.k[0] as f64;
                let decay = (-(2.0 * std::f64::consts::PI * kk).powi(2) * t).exp();
                let phase = 2.0 * std::f64::consts::PI * kk * u[0];
                exact += decay * (mode.cos * phase.cos() + mode.sin * phase.sin());
            }
            let diff = series.fields[k][c] - exact;
            acc += diff * diff;
        }
        worst = worst.max((acc / m as f64).sqrt());
    }
    worst
}

fn cmd_action(out: &Path, r: &Resolved) -> Result<(), CliError> {
    let sc = r.scenario().map_err(CliError::Config)?;
    if sc.d != 1 {
        return Err(CliError::Config(
            "the macroscopic action is implemented for d = 1".into(),
        ));
    }
    let ms = lab::macro_side(&sc)?;
    write_density_csv(&out.join("density.csv"), &ms.series)?;
    let b = &ms.breakdown;
    write_json(
        &out.join("summary.json"),
        &json!({
            "command": "action",
            "tilt_action_target": ms.target,
            "tilt_action_target_dual": ms.target_dual,
            "free_energy_initial": b.free_energy_initial,
            "free_energy_final": b.free_energy_final,
            "e": b.e,
            "e_star": b.e_star,
            "e_star_dual": b.e_star_dual,
            "total": b.total,
            "quarter_norm_form": b.quarter_norm_form,
            "chain_rule_residual": b.chain_rule_residual,
        }),
    )?;
    println!(
        "macro action: total {:.6e}, tilt target {:.6e}",
        b.total, ms.target
    );
    Ok(())
}

fn cmd_converge(out: &Path, r: &Resolved) -> Result<(), CliError> {
    let sc = r.scenario().map_err(CliError::Config)?;
    if sc.d != 1 {
        return Err(CliError::Config(
            "the convergence experiment is implemented for d = 1".into(),
        ));
    }
    let rep = lab::run_tilted_limit(&sc)?;
    let mut csv = String::from("L,engine,action_rescaled,stderr,macro_target,gap\n");
    for row in &rep.rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.l,
            row.engine,
            fmt(row.action_rescaled),
            fmt(row.stderr),
            fmt(row.macro_target),
            fmt(row.gap)
        ));
    }
    write_atomic(&out.join("tilted_limit.csv"), csv.as_bytes())?;
    write_json(
        &out.join("summary.json"),
        &json!({
            "command": "converge",
            "macro_target": rep.macro_target,
            "macro_target_dual_form": rep.macro_target_dual_form,
            "final_relative_gap": rep.final_relative_gap,
            "trend": rep.trend,
            "rows": rep.rows,
        }),
    )?;
    println!(
        "converge: macro target {:.6e}, final relative gap {:.3e}, decreasing: {}",
        rep.macro_target, rep.final_relative_gap, rep.trend.strictly_decreasing
    );
    Ok(())
}

/// Fixed-width scientific notation so reruns are byte-identical.
fn fmt(x: f64) -> String {
    format!("{x:.12e}")
}

fn write_density_csv(path: &Path, series: &DensitySeries) -> Result<(), CliError> {
    let m = series.grid.dims[0];
    let mut csv = String::from("t,cell_index,u,rho\n");
    for (k, t) in series.times.iter().enumerate() {
        for c in 0..m {
            let u = series.grid.center(c)[0];
            csv.push_str(&format!("{},{},{},{}\n", fmt(*t), c, fmt(u), fmt(series.fields[k][c])));
        }
    }
    write_atomic(path, csv.as_bytes())
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let mut body = serde_json::to_string_pretty(value).unwrap();
    body.push('\n');
    write_atomic(path, body.as_bytes())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
