//! Batch entry point: dispatch verifications, calibrations, solves, and
//! experiments; emit CSV reports with JSON mirrors.
//!
//! Exit codes: 0 all checks passed, 1 at least one assertion failed,
//! 2 configuration error.

use carnot::config::{ConfigError, RunConfig};
use carnot::expr::parse_with_params;
use carnot::gauge::gauge_calibrate;
use carnot::greens::calibrate_c_p;
use carnot::quadrature::QuadratureRule;
use carnot::report::{sort_rows, CheckRow, ReportDoc};
use carnot::solver::{
    comparison_experiment, discretize, solve_dirichlet, trivial_solution_experiment,
    uniqueness_experiment, Grid, Init, Load, Reaction, SolveOpts, TrivialVariant,
};
use carnot::suite::{bc_battery, run_criterion_opts, CriterionResult, SuiteOpts, CRITERIA};
use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "carnot",
    about = "Verification harness and Dirichlet solver for p-sub-Laplacian calculus on stratified Lie groups"
)]
struct Cli {
    /// Config file (TOML) with group, domain, expressions, and params.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Report output directory.
    #[arg(long, global = true, default_value = "reports")]
    out: PathBuf,
    /// Seed for every sampled corpus.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Override the default quadrature order where not degree-pinned.
    #[arg(long, global = true)]
    order: Option<usize>,
    /// Suppress per-check console output.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print strata, homogeneous dimension, and ranks of a group.
    GroupInfo {
        /// Preset id (r<N>, h<n>, free2_<m>, engel); overrides the config.
        preset: Option<String>,
    },
    /// Run one identity battery.
    Verify {
        #[arg(value_enum)]
        identity: VerifyTarget,
    },
    /// Calibrate the gauge shape or the flux constants c_p.
    Calibrate {
        #[arg(value_enum)]
        target: CalibrateTarget,
    },
    /// Solve the Dirichlet problem from a config file.
    Solve,
    /// Run a theorem-level experiment.
    Experiment {
        #[arg(value_enum)]
        which: ExperimentTarget,
    },
    /// Run the full acceptance battery.
    Suite,
}

#[derive(Clone, Copy, ValueEnum)]
enum VerifyTarget {
    Divergence,
    Green1,
    Green2,
    Picone,
    Hardy,
    DiazSaa,
    MeanValue,
    Flux,
    Bc,
}

#[derive(Clone, Copy, ValueEnum)]
enum CalibrateTarget {
    Gauge,
    Cp,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExperimentTarget {
    Trivial,
    Schrodinger,
    Comparison,
    Uniqueness,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("config error: {e}");
            ExitCode::from(2)
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, ConfigError> {
    match &cli.config {
        Some(path) => RunConfig::load(path),
        None => Ok(RunConfig::default()),
    }
}

fn run(cli: &Cli) -> Result<bool, ConfigError> {
    match &cli.command {
        Command::GroupInfo { preset } => group_info(cli, preset.as_deref()),
        Command::Verify { identity } => verify(cli, *identity),
        Command::Calibrate { target } => calibrate(cli, *target),
        Command::Solve => solve(cli),
        Command::Experiment { which } => experiment(cli, *which),
        Command::Suite => suite(cli),
    }
}

fn group_info(cli: &Cli, preset: Option<&str>) -> Result<bool, ConfigError> {
    let cfg = load_config(cli)?;
    let group = match preset {
        Some(id) => carnot::config::GroupConfig::preset_id(id).build()?,
        None => cfg.build_group()?,
    };
    println!("name: {}", group.name());
    println!("strata: {:?}", group.strata());
    println!("dimension: {}", group.dim());
    println!("homogeneous dimension Q: {}", group.homogeneous_dimension());
    println!("generators: {}", group.first_stratum());
    println!(
        "Hoermander rank at origin: {}",
        group.hoermander_rank(&vec![0.0; group.dim()])
    );
    Ok(true)
}

fn emit(
    cli: &Cli,
    stem: &str,
    config: serde_json::Value,
    results: &[CriterionResult],
) -> Result<bool, ConfigError> {
    let mut rows: Vec<CheckRow> = results.iter().flat_map(|r| r.rows.clone()).collect();
    sort_rows(&mut rows);
    let doc = ReportDoc::new(stem, config, rows);
    doc.write(&cli.out, stem)?;
    let mut all_pass = true;
    for r in results {
        if !cli.quiet {
            println!("{}", r.summary_line());
            for line in &r.notes {
                println!("    {line}");
            }
        }
        if !r.pass {
            all_pass = false;
            for row in r.rows.iter().filter(|row| !row.pass) {
                eprintln!(
                    "FAIL {}: residual {:.6e} exceeds {:.1e}",
                    row.id, row.residual, row.tolerance
                );
            }
        }
    }
    if !cli.quiet {
        println!(
            "report: {}/{{{stem}.csv, {stem}.json}}",
            cli.out.display()
        );
    }
    Ok(all_pass)
}

fn suite_opts(cli: &Cli) -> SuiteOpts {
    SuiteOpts {
        seed: cli.seed,
        order: cli.order,
    }
}

fn verify(cli: &Cli, target: VerifyTarget) -> Result<bool, ConfigError> {
    let opts = suite_opts(cli);
    let (stem, results) = match target {
        VerifyTarget::Divergence => ("verify_divergence", vec![run_criterion_opts(1, &opts)]),
        VerifyTarget::Green1 => ("verify_green1", vec![run_criterion_opts(2, &opts)]),
        VerifyTarget::Green2 => ("verify_green2", vec![run_criterion_opts(3, &opts)]),
        VerifyTarget::Picone => ("verify_picone", vec![run_criterion_opts(4, &opts)]),
        VerifyTarget::MeanValue => ("verify_mean_value", vec![run_criterion_opts(5, &opts)]),
        VerifyTarget::Flux => ("verify_flux", vec![run_criterion_opts(6, &opts)]),
        VerifyTarget::Hardy | VerifyTarget::DiazSaa => {
            let mut res = run_criterion_opts(8, &opts);
            let keep = match target {
                VerifyTarget::Hardy => "hardy",
                _ => "diaz_saa",
            };
            res.rows.retain(|r| r.identity == keep);
            res.pass = res.rows.iter().all(|r| r.pass);
            res.observed = res.rows.iter().map(|r| r.residual).fold(0.0, f64::max);
            (
                if matches!(target, VerifyTarget::Hardy) {
                    "verify_hardy"
                } else {
                    "verify_diaz_saa"
                },
                vec![res],
            )
        }
        VerifyTarget::Bc => ("verify_bc", vec![bc_battery(&opts)]),
    };
    let config = serde_json::json!({
        "seed": cli.seed,
        "order": cli.order,
        "target": stem,
    });
    emit(cli, stem, config, &results)
}

fn calibrate(cli: &Cli, target: CalibrateTarget) -> Result<bool, ConfigError> {
    let cfg = load_config(cli)?;
    let group = match &cfg.group {
        Some(gc) => gc.build()?,
        None => carnot::config::GroupConfig::preset_id("h1").build()?,
    };
    let pg = gauge_calibrate(&group)?;
    match target {
        CalibrateTarget::Gauge => {
            println!("group: {}", group.name());
            println!("gauge: {}", pg.expression());
            if let Some(beta) = pg.shape_parameter() {
                println!("shape parameter: {beta:.9}");
            }
            println!("max |L_inf d| over the calibration cloud: {:.3e}", pg.infinity_residual());
            Ok(pg.infinity_residual() < 1e-8)
        }
        CalibrateTarget::Cp => {
            let order = cli.order.unwrap_or(20);
            let rule = QuadratureRule::new(order);
            let p = cfg.params().p;
            let ps = if cli.config.is_some() {
                vec![p]
            } else {
                vec![1.5, 2.0, 3.0]
            };
            let mut ok = true;
            for p in ps {
                match calibrate_c_p(&pg, &group, p, &rule) {
                    Ok(c) => println!("c_p(p = {p}) = {c:.12e}"),
                    Err(e) => {
                        eprintln!("calibration failed for p = {p}: {e}");
                        ok = false;
                    }
                }
            }
            Ok(ok)
        }
    }
}

fn build_grid(cfg: &RunConfig) -> Result<(Grid, f64), ConfigError> {
    let group = cfg.build_group()?;
    let params = cfg.params();
    let (lo, hi) = match &cfg.domain {
        Some(carnot::config::DomainConfig::Box { lo, hi }) => (lo.clone(), hi.clone()),
        Some(_) => {
            return Err(ConfigError::Bad {
                field: "domain.kind".into(),
                message: "the solver grid needs a box domain".into(),
            })
        }
        None => (vec![0.0; group.dim()], vec![1.0; group.dim()]),
    };
    let mut n = params.n.clone();
    if n.len() == 1 {
        n = vec![n[0]; group.dim()];
    }
    if n.len() != group.dim() {
        return Err(ConfigError::Bad {
            field: "params.n".into(),
            message: format!("expected {} axis counts, got {}", group.dim(), n.len()),
        });
    }
    let grid = discretize(&group, &lo, &hi, &n).map_err(|e| ConfigError::Bad {
        field: "params.n".into(),
        message: e.to_string(),
    })?;
    Ok((grid, params.p))
}

fn default_grid() -> Grid {
    let group = carnot::config::GroupConfig::preset_id("h1").build().unwrap();
    discretize(&group, &[0.0; 3], &[1.0; 3], &[9, 9, 9]).unwrap()
}

fn solve(cli: &Cli) -> Result<bool, ConfigError> {
    let cfg = load_config(cli)?;
    if cfg.group.is_none() {
        return Err(ConfigError::Missing("group"));
    }
    let (grid, p) = build_grid(&cfg)?;
    let params = cfg.params();
    let group = cfg.build_group()?;
    let reaction = match &cfg.expressions.reaction {
        Some(text) => Some(Reaction::unchecked(cfg.rho_expression(
            "expressions.reaction",
            text,
            &group,
        )?)),
        None => None,
    };
    let load = match &reaction {
        Some(r) => Load::Expr(r),
        None => Load::None,
    };
    let opts = SolveOpts {
        tol: params.tol,
        max_iter: params.max_iter,
        eps: params.eps,
        seed: params.seed,
        init: Init::Zero,
        eps_continuation: (p - 2.0).abs() > 0.4,
    };
    match solve_dirichlet(&grid, p, load, &opts) {
        Ok(sol) => {
            std::fs::create_dir_all(&cli.out)?;
            let mut csv = String::new();
            for j in 0..grid.dim() {
                csv.push_str(&format!("x{},", j + 1));
            }
            csv.push_str("u\n");
            for i in 0..grid.node_count() {
                for c in grid.coords(i) {
                    csv.push_str(&format!("{c:.12e},"));
                }
                csv.push_str(&format!("{:.12e}\n", sol.values[i]));
            }
            std::fs::write(cli.out.join("solution.csv"), csv)?;
            let doc = serde_json::json!({
                "command": "solve",
                "group": grid.group_name(),
                "p": p,
                "counts": grid.counts(),
                "eps": sol.eps,
                "tol": params.tol,
                "seed": params.seed,
                "iterations": sol.iterations,
                "energy": sol.energy,
                "gradient_norm": sol.gradient_norm,
                "weak_residual": sol.weak_residual_norm,
                "energy_trace_len": sol.energy_trace.len(),
                "sup_norm": sol.sup_norm(),
            });
            std::fs::write(
                cli.out.join("solution.json"),
                serde_json::to_string_pretty(&doc).unwrap() + "\n",
            )?;
            if !cli.quiet {
                println!(
                    "converged in {} iterations; |grad| = {:.3e}, weak residual {:.3e}",
                    sol.iterations, sol.gradient_norm, sol.weak_residual_norm
                );
                println!("wrote {}/solution.csv and solution.json", cli.out.display());
            }
            Ok(true)
        }
        Err(e) => {
            eprintln!("solver: {e}");
            Ok(false)
        }
    }
}

fn experiment(cli: &Cli, which: ExperimentTarget) -> Result<bool, ConfigError> {
    let cfg = load_config(cli)?;
    let (grid, p) = if cfg.group.is_some() {
        build_grid(&cfg)?
    } else {
        (default_grid(), cfg.params().p)
    };
    let params = cfg.params();
    let rep = match which {
        ExperimentTarget::Trivial => {
            trivial_solution_experiment(&grid, p, &TrivialVariant::Plain, params.n_starts, cli.seed)
        }
        ExperimentTarget::Schrodinger => {
            let q_text = cfg.expressions.q.clone().unwrap_or_else(|| "1".into());
            let q = parse_with_params(&q_text, &["rho"]).map_err(|source| ConfigError::Expr {
                field: "expressions.q".into(),
                source,
            })?;
            trivial_solution_experiment(
                &grid,
                p,
                &TrivialVariant::Schrodinger(q),
                params.n_starts,
                cli.seed,
            )
        }
        ExperimentTarget::Comparison => {
            let f_text = cfg.expressions.f.clone().unwrap_or_else(|| "1".into());
            let f = carnot::expr::parse_expression(&f_text).map_err(|source| ConfigError::Expr {
                field: "expressions.f".into(),
                source,
            })?;
            comparison_experiment(&grid, p, params.q_exp, &f, params.delta)
        }
        ExperimentTarget::Uniqueness => {
            let r_text = cfg
                .expressions
                .reaction
                .clone()
                .unwrap_or_else(|| "1".into());
            let expr = parse_with_params(&r_text, &["rho"]).map_err(|source| ConfigError::Expr {
                field: "expressions.reaction".into(),
                source,
            })?;
            let xs: Vec<Vec<f64>> = (0..5)
                .map(|i| grid.coords((37 * i + 11) % grid.node_count()).to_vec())
                .collect();
            let reaction = Reaction::analyze(expr, p, &xs).map_err(|e| ConfigError::Bad {
                field: "expressions.reaction".into(),
                message: e.to_string(),
            })?;
            uniqueness_experiment(&grid, p, &reaction, params.n_starts, cli.seed)
        }
    };
    match rep {
        Ok(rep) => {
            let row = CheckRow {
                id: format!("experiment.{}", rep.name),
                identity: rep.name.clone(),
                group: grid.group_name().to_string(),
                domain: format!("box {:?}", grid.counts()),
                p,
                lhs: rep.metric,
                rhs: 0.0,
                residual: rep.metric,
                tolerance: rep.tolerance,
                pass: rep.pass,
            };
            let doc = ReportDoc::new(
                &format!("experiment_{}", rep.name),
                serde_json::json!({
                    "seed": cli.seed,
                    "p": p,
                    "counts": grid.counts(),
                    "notes": rep.notes,
                }),
                vec![row],
            );
            doc.write(&cli.out, &format!("experiment_{}", rep.name))?;
            if !cli.quiet {
                println!(
                    "[{}] {}: metric {:.3e} (tolerance {:.1e})",
                    if rep.pass { "PASS" } else { "FAIL" },
                    rep.name,
                    rep.metric,
                    rep.tolerance
                );
                for n in &rep.notes {
                    println!("    {n}");
                }
            }
            Ok(rep.pass)
        }
        Err(e) => {
            eprintln!("experiment: {e}");
            Ok(false)
        }
    }
}

fn suite(cli: &Cli) -> Result<bool, ConfigError> {
    let opts = suite_opts(cli);
    // worker pool over criteria; results are collected in index order
    let results: Vec<CriterionResult> = std::thread::scope(|scope| {
        let handles: Vec<_> = (1..=CRITERIA)
            .map(|i| scope.spawn(move || run_criterion_opts(i, &opts)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("criterion panicked")).collect()
    });
    let config = serde_json::json!({
        "seed": cli.seed,
        "order": cli.order,
        "criteria": results.iter().map(|r| serde_json::json!({
            "id": r.id,
            "title": r.title,
            "pass": r.pass,
            "observed": r.observed,
            "tolerance": r.tolerance,
            "notes": r.notes,
        })).collect::<Vec<_>>(),
    });
    emit(cli, "suite", config, &results)
}
