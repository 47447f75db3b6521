//! Command-line driver: parameter checking, parameter search, the full
//! find pipeline and standalone record verification.
//!
//! Exit codes: 0 success, 1 negative result (infeasible configuration or a
//! failed check), 2 usage error.

use clap::{Parser, Subcommand};
use npendulum::report::{census_csv, census_text, RecordFile};
use npendulum::{
    census, certify, constants_report, parameter_search, potential_bounds_certificate,
    validate_winding, ConfigFile, Error, Forcing, Harmonic,
};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "npendulum",
    about = "Find and certify rotational periodic solutions of the forced planar N-pendulum",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate every constant and certificate for a configuration.
    CheckParams {
        config: PathBuf,
        /// Eigen-sweep resolution per difference coordinate.
        #[arg(long, default_value_t = 64)]
        resolution: usize,
    },
    /// Search the structured family for feasible masses and lengths.
    SearchParams {
        #[arg(long)]
        n: usize,
        /// Winding vector, comma separated (e.g. 1,0).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        v: Vec<i64>,
        /// Sup-norm budget for the forcing.
        #[arg(long, default_value_t = 0.0)]
        m0: f64,
        #[arg(long, default_value_t = 200)]
        budget: usize,
        /// Where to write the ready-to-run config.
        #[arg(long, default_value = "config.toml")]
        out: PathBuf,
    },
    /// Run the full pipeline and write solution records plus a census.
    Find {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        /// Override worker parallelism (default from the config, 1).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Re-certify previously written solution records.
    Verify {
        records: Vec<PathBuf>,
        #[arg(long, default_value_t = 4096)]
        steps: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::InvalidParameter(_) | Error::InvalidWinding(_)
                | Error::Mismatch(_) | Error::Io(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::CheckParams { config, resolution } => check_params(&config, resolution),
        Command::SearchParams { n, v, m0, budget, out } => search_params(n, &v, m0, budget, &out),
        Command::Find { config, out_dir, threads } => find(&config, &out_dir, threads),
        Command::Verify { records, steps } => verify_records(&records, steps),
    }
}

fn check_params(path: &PathBuf, resolution: usize) -> Result<ExitCode, Error> {
    let cfg = ConfigFile::load(path)?;
    let problem = cfg.build()?;
    let n0 = problem.winding.n0();
    let n = problem.params.n();
    if n0 == 0 || n0 == n {
        eprintln!(
            "error: the level machinery requires 1 <= N0 <= N-1 (winding {:?} has N0 = {n0})",
            problem.winding.components()
        );
        return Ok(ExitCode::from(2));
    }
    let report = constants_report(
        &problem.params,
        &problem.winding,
        &problem.forcing,
        problem.period,
        resolution,
    );
    println!("lambda        = {:.17e} (grid upper bound {:.17e})", report.lambda, report.lambda_grid);
    println!("gamma1        = {:.17e}", report.gamma1);
    println!("gamma2        = {:.17e}", report.gamma2);
    if let Some(g) = report.gamma {
        println!("gamma         = {:.17e}", g);
    }
    if let Some(gs) = &report.gamma_set {
        println!("Gamma set     = {:?}", gs.closed_form);
        println!("  (half-differences agree: {})", gs.consistent());
    }
    println!("M0            = {:.17e}", report.m0);
    println!("f_v           = {:.17e}", report.f_v);
    println!(
        "feasible      = {} (margin {:.6})",
        report.feasible,
        report.margin.unwrap_or(f64::NAN)
    );
    if let (Some(t1), Some(t2)) = (report.t1, report.t2) {
        println!("period window = [{t1:.17e}, {t2:.17e}]");
        println!(
            "T = {} in window: {} (window inequality sampled ok: {})",
            report.period, report.period_in_window, report.window_inequality_ok
        );
    }
    println!("a0            = {:.17e}", report.a0);
    match &report.levels {
        Some(lv) => {
            for (i, ((c1, c2), a)) in lv.c1.iter().zip(&lv.c2).zip(&lv.a).enumerate() {
                println!(
                    "level k = {}: C1 {:.12e} < a {:.12e} < C2 {:.12e}",
                    i + 1,
                    c1,
                    a,
                    c2
                );
            }
            println!("a_n = {:.12e}", lv.a_n);
        }
        None => println!("levels: unavailable (infeasible or T outside window)"),
    }

    let sigma = problem.winding.i0().to_vec();
    let mut certificates_ok = true;
    for k in 1..(1usize << n0) {
        match potential_bounds_certificate(&problem.params, &sigma, k, 16) {
            Ok(c) => println!(
                "certificate k = {k}: max V|M = {:.12e} <= beta(k) = {:.12e}; min V|O = {:.12e} >= beta(k+1) = {:.12e}",
                c.max_v_on_m, c.beta_k, c.min_v_on_o, c.beta_k1
            ),
            Err(e) => {
                certificates_ok = false;
                println!("certificate k = {k}: FAILED ({e})");
            }
        }
    }
    Ok(if report.feasible && certificates_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn search_params(
    n: usize,
    v: &[i64],
    m0: f64,
    budget: usize,
    out: &PathBuf,
) -> Result<ExitCode, Error> {
    let winding = validate_winding(v)?;
    let n0 = winding.n0();
    if n0 == 0 || n0 >= n {
        eprintln!("error: need 1 <= N0 <= N-1 (winding {v:?} has N0 = {n0})");
        return Ok(ExitCode::from(2));
    }
    match parameter_search(n, &winding, m0, budget) {
        Ok(found) => {
            let t1 = found.report.t1.unwrap();
            let t2 = found.report.t2.unwrap();
            let t_mid = 0.5 * (t1 + t2);
            // A ready-to-run config: sine forcing at the M0 budget on the
            // first rotating coordinate (odd forcing keeps the sign-corner
            // seeds on the symmetric locus).
            let rot = (0..n).find(|i| v[*i] != 0).unwrap();
            let mut components = vec![Vec::new(); n];
            if m0 > 0.0 {
                components[rot] = vec![Harmonic { k: 1, cos_amp: 0.0, sin_amp: m0 / 1.001 }];
            }
            let forcing = Forcing::new(t_mid, components)?;
            let cfg = ConfigFile::from_parts(&found.params, v, t_mid, &forcing);
            cfg.save(out)?;
            println!(
                "feasible: margin {:.6} after {} evaluations; window [{:.6}, {:.6}]",
                found.margin, found.evaluated, t1, t2
            );
            println!("m = {:?}", found.params.masses());
            println!("l = {:?}", found.params.lengths());
            println!("wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Err(Error::BudgetExhausted { best_margin }) => {
            eprintln!("no feasible parameters found (best margin {best_margin:.6})");
            Ok(ExitCode::from(1))
        }
        Err(e) => Err(e),
    }
}

fn find(config: &PathBuf, out_dir: &PathBuf, threads: Option<usize>) -> Result<ExitCode, Error> {
    let cfg = ConfigFile::load(config)?;
    let problem = cfg.build()?;
    let mut opts = problem.solver;
    if let Some(t) = threads {
        opts.threads = t;
    }
    let report = census(
        &problem.params,
        &problem.forcing,
        &problem.winding,
        problem.period,
        problem.k_trunc,
        problem.grid_m,
        &opts,
    )?;
    std::fs::create_dir_all(out_dir)?;
    for record in &report.records {
        let file = RecordFile::from_record(record, &cfg);
        file.save(&out_dir.join(format!("solution_{:03}.toml", record.id)))?;
    }
    let text = census_text(&report);
    std::fs::write(out_dir.join("census.txt"), &text)?;
    std::fs::write(out_dir.join("census.csv"), census_csv(&report))?;
    print!("{text}");
    println!("wrote {} records to {}", report.records.len(), out_dir.display());
    Ok(ExitCode::SUCCESS)
}

fn verify_records(records: &[PathBuf], steps: usize) -> Result<ExitCode, Error> {
    if records.is_empty() {
        eprintln!("error: no record files given");
        return Ok(ExitCode::from(2));
    }
    let mut all_pass = true;
    for path in records {
        let file = RecordFile::load(path)?;
        let problem = file.problem.build()?;
        let lp = file.loop_path()?;
        let cert = certify(&problem.params, &problem.forcing, &lp, steps)?;
        println!(
            "{}: {} (defect {:.3e} < {:.3e}, residual {:.3e} < {:.3e})",
            path.display(),
            if cert.pass { "PASS" } else { "FAIL" },
            cert.defect,
            cert.defect_threshold,
            cert.max_residual,
            cert.residual_threshold
        );
        all_pass &= cert.pass;
    }
    Ok(if all_pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
