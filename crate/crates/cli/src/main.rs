//! `pmc`: command-line front end for the curvature solver.
//!
//! Exit codes: 0 on success, 1 on config errors (including unknown keys and
//! bad flag combinations), 2 when a solve fails to converge.

mod config;
mod expr;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use serde_json::json;

use pmc_core::diagnostics::{default_scan_family, necessary_condition_scan, DiagnosticsBundle};
use pmc_core::evolution::trajectory_monitors;
use pmc_core::l1::DEFAULT_CAPS;
use pmc_core::radial::radial_apply;
use pmc_core::{
    continue_to_limit, detachment_report, evolve, example_fields, solve_l1, solve_regularized,
    thresholds, DetachClass, EvolutionConfig, Grid, GridSpec, ScalarField, SolveReport,
    SolverError,
};

#[derive(Parser)]
#[command(name = "pmc", version, about = "Prescribed mean curvature with absorption")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the limit problem, or a single regularized problem with --p
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Fixed regularization exponent (> 1); skips the continuation
        #[arg(long)]
        p: Option<f64>,
    },
    /// Run the continuation and record the per-exponent trace
    Continuation {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Truncation chain for a merely integrable right-hand side
    L1 {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Check the discrete operator against the closed-form radial solution
    RadialVerify {
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long = "N", default_value_t = 3)]
        n: usize,
        #[arg(long, default_value_t = 0.05)]
        rmin: f64,
        #[arg(long, default_value_t = 2001)]
        nodes: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Implicit time stepping from the configured initial state
    Evolve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        lambda: f64,
        #[arg(long, default_value_t = 40)]
        steps: usize,
    },
    /// Print the two critical datum-size constants for dimension N
    Thresholds {
        #[arg(long = "N", default_value_t = 3)]
        n: usize,
    },
    /// Worst |integral of f| / perimeter over concentric subsets
    Scan {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Parallelize independent family entries over this many threads
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

enum Failure {
    Config(String),
    Solver(SolverError),
}

impl From<SolverError> for Failure {
    fn from(e: SolverError) -> Failure {
        Failure::Solver(e)
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let result = match cli.cmd {
        Cmd::Solve { config, out, p } => cmd_solve(&config, &out, p),
        Cmd::Continuation { config, out } => cmd_continuation(&config, &out),
        Cmd::L1 { config, out } => cmd_l1(&config, &out),
        Cmd::RadialVerify { alpha, n, rmin, nodes, out } => {
            cmd_radial_verify(alpha, n, rmin, nodes, out.as_deref())
        }
        Cmd::Evolve { config, out, lambda, steps } => cmd_evolve(&config, &out, lambda, steps),
        Cmd::Thresholds { n } => cmd_thresholds(n),
        Cmd::Scan { config, out, jobs } => cmd_scan(&config, &out, jobs),
    };
    match result {
        Ok(()) => {}
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            std::process::exit(1);
        }
        Err(Failure::Solver(e)) => {
            eprintln!("solver error: {e}");
            std::process::exit(2);
        }
    }
}

fn load(path: &Path) -> Result<config::Config, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    config::parse(&text).map_err(Failure::Config)
}

fn io_fail(what: &Path, e: std::io::Error) -> Failure {
    Failure::Config(format!("cannot write {}: {e}", what.display()))
}

fn write_field(dir: &Path, name: &str, u: &ScalarField) -> Result<(), Failure> {
    let path = dir.join(name);
    let mut w = BufWriter::new(File::create(&path).map_err(|e| io_fail(&path, e))?);
    u.write_csv(&mut w).map_err(|e| io_fail(&path, e))?;
    w.flush().map_err(|e| io_fail(&path, e))
}

fn write_manifest(dir: &Path, manifest: &serde_json::Value) -> Result<(), Failure> {
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    fs::write(&path, text + "\n").map_err(|e| io_fail(&path, e))
}

fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| io_fail(dir, e))
}

/// Ambient dimension for the norm exponents in the diagnostics bundle; the
/// weak norm needs N >= 2, so interval grids report their norms at N = 2.
fn bundle_dim(grid: &Grid) -> u32 {
    grid.dim().max(2) as u32
}

fn grid_json(grid: &Grid) -> serde_json::Value {
    json!({
        "kind": grid.kind().label(),
        "shape": grid.shape(),
        "spacing": grid.spacing(),
        "nodes": grid.num_nodes(),
    })
}

fn detachment_json(report: &SolveReport) -> serde_json::Value {
    let d = detachment_report(report);
    let count = |class: DetachClass| {
        d.classes.iter().filter(|c| **c == class).count()
    };
    json!({
        "attached": count(DetachClass::Attached),
        "detached_consistent": count(DetachClass::DetachedConsistent),
        "violation": count(DetachClass::Violation),
        "tol_u": d.tol_u,
        "tol_z": d.tol_z,
    })
}

fn cmd_solve(cfg_path: &Path, out: &Path, p_flag: Option<f64>) -> Result<(), Failure> {
    let cfg = load(cfg_path)?;
    let grid = cfg.grid().map_err(Failure::Config)?;
    let f = cfg.datum(&grid).map_err(Failure::Config)?;
    let g = cfg.absorption().map_err(Failure::Config)?;
    let opts = cfg.newton().map_err(Failure::Config)?;
    let p = match p_flag {
        Some(v) => Some(v),
        None => cfg.solver_p().map_err(Failure::Config)?,
    };
    if let Some(v) = p {
        if v <= 1.0 {
            return Err(Failure::Config(format!("p must exceed 1, got {v}")));
        }
    }
    ensure_dir(out)?;

    let (report, solve_kind) = match p {
        Some(v) => {
            let (u, z, stats) = solve_regularized(&grid, &f, &g, v, &opts, None)?;
            let report = SolveReport { u, z, steps: Vec::new(), converged: true };
            let kind = json!({
                "p": v,
                "newton": {
                    "iterations": stats.iterations,
                    "final_residual": stats.final_residual,
                    "energy": stats.energy,
                    "residual_floor": stats.residual_floor,
                },
            });
            (report, kind)
        }
        None => {
            let sched = cfg.schedule().map_err(Failure::Config)?;
            let report = continue_to_limit(&grid, &f, &g, &sched, &opts, None)?;
            let kind = json!({
                "p": "limit",
                "continuation_steps": report.steps.len(),
                "final_p": report.steps.last().map(|s| s.p),
            });
            (report, kind)
        }
    };

    let f_field = f.sample(&grid);
    let bundle =
        DiagnosticsBundle::compute(&report.u, &report.z, &f_field, &g, bundle_dim(&grid));
    write_field(out, "u.csv", &report.u)?;
    let manifest = json!({
        "manifest_version": 1,
        "command": "solve",
        "seed": cfg.seed().map_err(Failure::Config)?,
        "config": cfg.text,
        "grid": grid_json(&grid),
        "solve": solve_kind,
        "diagnostics": serde_json::to_value(&bundle).expect("bundle serializes"),
        "detachment": detachment_json(&report),
        "outputs": ["u.csv"],
    });
    write_manifest(out, &manifest)?;
    println!(
        "solved: sup {:.6e}, bv {:.6e}, max pairing defect {:.3e}",
        bundle.linf, bundle.bv, bundle.pairing_defect_max
    );
    Ok(())
}

fn cmd_continuation(cfg_path: &Path, out: &Path) -> Result<(), Failure> {
    let cfg = load(cfg_path)?;
    let grid = cfg.grid().map_err(Failure::Config)?;
    let f = cfg.datum(&grid).map_err(Failure::Config)?;
    let g = cfg.absorption().map_err(Failure::Config)?;
    let opts = cfg.newton().map_err(Failure::Config)?;
    let sched = cfg.schedule().map_err(Failure::Config)?;
    ensure_dir(out)?;

    let report = continue_to_limit(&grid, &f, &g, &sched, &opts, None)?;
    write_field(out, "u.csv", &report.u)?;

    let path = out.join("steps.csv");
    let mut w = BufWriter::new(File::create(&path).map_err(|e| io_fail(&path, e))?);
    writeln!(
        w,
        "p,newton_iterations,final_residual,sup_norm,p_gradient_term,bv_seminorm,energy"
    )
    .map_err(|e| io_fail(&path, e))?;
    for s in &report.steps {
        writeln!(
            w,
            "{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            s.p, s.newton_iterations, s.final_residual, s.sup_norm, s.p_gradient_term,
            s.bv_seminorm, s.energy
        )
        .map_err(|e| io_fail(&path, e))?;
    }
    w.flush().map_err(|e| io_fail(&path, e))?;

    let manifest = json!({
        "manifest_version": 1,
        "command": "continuation",
        "seed": cfg.seed().map_err(Failure::Config)?,
        "config": cfg.text,
        "grid": grid_json(&grid),
        "steps": serde_json::to_value(&report.steps).expect("steps serialize"),
        "detachment": detachment_json(&report),
        "outputs": ["u.csv", "steps.csv"],
    });
    write_manifest(out, &manifest)?;
    let last = report.steps.last().expect("continuation ran at least one step");
    println!(
        "continuation: {} steps, final p {:.6}, sup {:.6e}",
        report.steps.len(),
        last.p,
        last.sup_norm
    );
    Ok(())
}

fn cmd_l1(cfg_path: &Path, out: &Path) -> Result<(), Failure> {
    let cfg = load(cfg_path)?;
    let grid = cfg.grid().map_err(Failure::Config)?;
    let f = cfg.datum(&grid).map_err(Failure::Config)?;
    let g = cfg.absorption().map_err(Failure::Config)?;
    let opts = cfg.newton().map_err(Failure::Config)?;
    let sched = cfg.schedule().map_err(Failure::Config)?;
    ensure_dir(out)?;

    let (report, diag) = solve_l1(&grid, &f, &g, &DEFAULT_CAPS, &sched, &opts)?;
    write_field(out, "u.csv", &report.u)?;

    let path = out.join("rows.csv");
    let mut w = BufWriter::new(File::create(&path).map_err(|e| io_fail(&path, e))?);
    writeln!(
        w,
        "cap,datum_l1,continuation_steps,sup_norm,tk_bv_slope,absorption_l1,capped_diff"
    )
    .map_err(|e| io_fail(&path, e))?;
    for r in &diag.rows {
        let diff = r.capped_diff.map(|d| format!("{d:.16e}")).unwrap_or_default();
        writeln!(
            w,
            "{:.16e},{:.16e},{},{:.16e},{:.16e},{:.16e},{}",
            r.cap, r.datum_l1, r.continuation_steps, r.sup_norm, r.tk_bv_slope,
            r.absorption_l1, diff
        )
        .map_err(|e| io_fail(&path, e))?;
    }
    w.flush().map_err(|e| io_fail(&path, e))?;

    let manifest = json!({
        "manifest_version": 1,
        "command": "l1",
        "seed": cfg.seed().map_err(Failure::Config)?,
        "config": cfg.text,
        "grid": grid_json(&grid),
        "truncation": serde_json::to_value(&diag).expect("diagnostics serialize"),
        "outputs": ["u.csv", "rows.csv"],
    });
    write_manifest(out, &manifest)?;
    println!(
        "truncation chain: {} caps, stabilized {}, final sup {:.6e}",
        diag.rows.len(),
        diag.stabilized,
        diag.rows.last().map(|r| r.sup_norm).unwrap_or(0.0)
    );
    Ok(())
}

fn cmd_radial_verify(
    alpha: f64,
    n: usize,
    rmin: f64,
    nodes: usize,
    out: Option<&Path>,
) -> Result<(), Failure> {
    if n < 3 {
        return Err(Failure::Config(format!("the closed-form family needs N >= 3, got {n}")));
    }
    if !(alpha > 0.0 && alpha < (n - 1) as f64) {
        return Err(Failure::Config(format!(
            "alpha must lie in (0, {}), got {alpha}",
            n - 1
        )));
    }
    if !(rmin > 0.0 && rmin < 1.0) {
        return Err(Failure::Config(format!("rmin must lie in (0, 1), got {rmin}")));
    }
    if nodes < 11 {
        return Err(Failure::Config(format!("need at least 11 nodes, got {nodes}")));
    }

    let residual_sup = |count: usize| -> f64 {
        let grid = Arc::new(
            Grid::build(&GridSpec::Radial { r_min: rmin, r_max: 1.0, nodes: count, dim: n })
                .expect("validated radial spec"),
        );
        let (u, f) = example_fields(alpha, n, &grid);
        let applied = radial_apply(&u, n);
        (0..grid.num_nodes())
            .filter(|&i| !grid.is_boundary(i))
            .map(|i| (applied.data()[i] + u.data()[i] - f.data()[i]).abs())
            .fold(0.0, f64::max)
    };

    let coarse_nodes = (nodes + 1) / 2;
    let e_coarse = residual_sup(coarse_nodes);
    let e_fine = residual_sup(nodes);
    let order = (e_coarse / e_fine).log2();
    println!("nodes {coarse_nodes}: max residual {e_coarse:.3e}");
    println!("nodes {nodes}: max residual {e_fine:.3e}");
    println!("order {order:.2}");

    if let Some(dir) = out {
        ensure_dir(dir)?;
        let manifest = json!({
            "manifest_version": 1,
            "command": "radial-verify",
            "alpha": alpha,
            "dim": n,
            "rmin": rmin,
            "results": [
                {"nodes": coarse_nodes, "max_residual": e_coarse},
                {"nodes": nodes, "max_residual": e_fine},
            ],
            "order": order,
            "outputs": [],
        });
        write_manifest(dir, &manifest)?;
    }
    Ok(())
}

fn cmd_evolve(cfg_path: &Path, out: &Path, lambda: f64, steps: usize) -> Result<(), Failure> {
    if lambda <= 0.0 {
        return Err(Failure::Config(format!("lambda must be positive, got {lambda}")));
    }
    if steps == 0 {
        return Err(Failure::Config("steps must be at least 1".into()));
    }
    let cfg = load(cfg_path)?;
    let grid = cfg.grid().map_err(Failure::Config)?;
    let f = cfg.datum(&grid).map_err(Failure::Config)?;
    let opts = cfg.newton().map_err(Failure::Config)?;
    let sched = cfg.schedule().map_err(Failure::Config)?;
    ensure_dir(out)?;

    let u0 = f.sample(&grid);
    let ecfg = EvolutionConfig::new(lambda, steps);
    let trajectory = evolve(&u0, &ecfg, &sched, &opts)?;
    let monitors = trajectory_monitors(&trajectory, lambda);

    let mut outputs = Vec::with_capacity(trajectory.len());
    for (k, state) in trajectory.iter().enumerate() {
        let name = format!("u_step_{k:03}.csv");
        write_field(out, &name, state)?;
        outputs.push(name);
    }

    let manifest = json!({
        "manifest_version": 1,
        "command": "evolve",
        "seed": cfg.seed().map_err(Failure::Config)?,
        "config": cfg.text,
        "grid": grid_json(&grid),
        "lambda": lambda,
        "steps": steps,
        "monitors": serde_json::to_value(&monitors).expect("monitors serialize"),
        "outputs": outputs,
    });
    write_manifest(out, &manifest)?;
    let last = monitors.last().expect("trajectory is nonempty");
    println!(
        "evolved {} steps to t = {:.4}: sup {:.6e}, l1 {:.6e}",
        steps, last.time, last.sup_norm, last.l1_norm
    );
    Ok(())
}

fn cmd_thresholds(n: usize) -> Result<(), Failure> {
    if n < 2 {
        return Err(Failure::Config(format!("thresholds need N >= 2, got {n}")));
    }
    let (large, borderline) = thresholds(n as u32);
    println!("datum-size threshold  N*omega_N^(1/N)     = {large:.4}");
    println!("weak-LN borderline    (N-1)*omega_N^(1/N) = {borderline:.4}");
    Ok(())
}

fn cmd_scan(cfg_path: &Path, out: &Path, jobs: usize) -> Result<(), Failure> {
    if jobs == 0 {
        return Err(Failure::Config("jobs must be at least 1".into()));
    }
    let cfg = load(cfg_path)?;
    let grid = cfg.grid().map_err(Failure::Config)?;
    let f = cfg.datum(&grid).map_err(Failure::Config)?;
    ensure_dir(out)?;

    let f_field = f.sample(&grid);
    let family = default_scan_family(&grid);
    let jobs = jobs.min(family.len());
    let rows = if jobs == 1 {
        necessary_condition_scan(&f_field, &family).rows
    } else {
        let chunk = family.len().div_ceil(jobs);
        let field_ref = &f_field;
        let pieces: Vec<Vec<_>> = std::thread::scope(|sc| {
            let handles: Vec<_> = family
                .chunks(chunk)
                .map(|piece| sc.spawn(move || necessary_condition_scan(field_ref, piece).rows))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("scan worker panicked"))
                .collect()
        });
        pieces.into_iter().flatten().collect()
    };

    let worst = rows
        .iter()
        .max_by(|a, b| a.ratio.total_cmp(&b.ratio))
        .expect("scan family is nonempty");

    let path = out.join("rows.csv");
    let mut w = BufWriter::new(File::create(&path).map_err(|e| io_fail(&path, e))?);
    writeln!(w, "label,integral,perimeter,ratio").map_err(|e| io_fail(&path, e))?;
    for r in &rows {
        writeln!(
            w,
            "{},{:.16e},{:.16e},{:.16e}",
            r.label, r.integral, r.perimeter, r.ratio
        )
        .map_err(|e| io_fail(&path, e))?;
    }
    w.flush().map_err(|e| io_fail(&path, e))?;

    let manifest = json!({
        "manifest_version": 1,
        "command": "scan",
        "seed": cfg.seed().map_err(Failure::Config)?,
        "config": cfg.text,
        "grid": grid_json(&grid),
        "jobs": jobs,
        "worst_ratio": worst.ratio,
        "witness": worst.label,
        "rows": serde_json::to_value(&rows).expect("rows serialize"),
        "outputs": ["rows.csv"],
    });
    write_manifest(out, &manifest)?;
    println!("worst ratio {:.4} ({})", worst.ratio, worst.label);
    Ok(())
}
