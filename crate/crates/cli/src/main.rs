use clap::{Args, Parser, Subcommand};
use gafp_cli::pipeline::{execute, Command, Flags};
use gafp_cli::report::RunReport;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Approximate fixed points of cyclical maps on G-metric spaces.
#[derive(Parser)]
#[command(name = "gafp", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Args)]
struct Common {
    /// Problem file to load.
    spec: PathBuf,
    /// Override the solve epsilon (and the declared epsilon list).
    #[arg(long)]
    epsilon: Option<f64>,
    /// Override the Picard start point.
    #[arg(long)]
    x0: Option<f64>,
    /// Measure displacement k steps apart (epsilon-fixed points of T^k).
    #[arg(long)]
    k: Option<usize>,
    /// Override the grid resolution h.
    #[arg(long)]
    grid: Option<f64>,
    /// Override the pair/triple enumeration budget.
    #[arg(long)]
    budget: Option<usize>,
    /// Override the sampling seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Write the machine-readable report to this path.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Write the solve trace or fset members as CSV to this path.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Promote warnings (cyclicity violations, vacuous passes) to failures.
    #[arg(long)]
    strict: bool,
}

#[derive(Subcommand)]
enum Sub {
    /// Check the G-metric axioms and the operator's cyclicity.
    Check(Common),
    /// Fit empirical contraction constants for every operator class.
    Classify(Common),
    /// Run Picard iteration from x0 until the displacement drops below epsilon.
    Solve(Common),
    /// Enumerate the epsilon-fixed-point set and measure its diameters.
    Fset(Common),
    /// Full pipeline: classification, solve sweep, bounds, diameter theorems.
    Verify(Common),
    /// Aggregate of check, classify, solve, fset, and verify.
    Report(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, common) = match cli.command {
        Sub::Check(c) => (Command::Check, c),
        Sub::Classify(c) => (Command::Classify, c),
        Sub::Solve(c) => (Command::Solve, c),
        Sub::Fset(c) => (Command::Fset, c),
        Sub::Verify(c) => (Command::Verify, c),
        Sub::Report(c) => (Command::Report, c),
    };
    let flags = Flags {
        epsilon: common.epsilon,
        x0: common.x0,
        k: common.k,
        grid: common.grid,
        budget: common.budget,
        seed: common.seed,
        strict: common.strict,
    };

    let outcome = execute(command, &common.spec, &flags);
    print_human(&outcome.report);

    if let Some(path) = &common.json {
        let body = serde_json::to_string_pretty(&outcome.report).expect("report serializes");
        if let Err(err) = write_atomic(path, body.as_bytes()) {
            eprintln!("error: cannot write {}: {err}", path.display());
            return ExitCode::from(3);
        }
    }
    if let Some(path) = &common.csv {
        match &outcome.csv {
            Some(csv) => {
                if let Err(err) = write_atomic(path, csv.as_bytes()) {
                    eprintln!("error: cannot write {}: {err}", path.display());
                    return ExitCode::from(3);
                }
            }
            None => eprintln!("note: this command produced no CSV payload"),
        }
    }

    ExitCode::from(outcome.report.exit_code.clamp(0, 255) as u8)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}

fn print_human(report: &RunReport) {
    println!(
        "{} {} (digest {})",
        report.command,
        report.spec_path,
        &report.spec_digest[..12.min(report.spec_digest.len())]
    );
    if let Some(axioms) = &report.results.axioms {
        println!(
            "  axioms: {} ({} sample points, tol {})",
            pass_str(axioms.pass),
            axioms.sample_size,
            axioms.tol
        );
        for check in &axioms.checks {
            if !check.pass {
                println!(
                    "    {} fails ({} violations)",
                    check.axiom, check.total_violations
                );
            }
        }
    }
    if let Some(cyc) = &report.results.cyclicity {
        println!(
            "  cyclicity: {} ({} images checked, {} violations)",
            pass_str(cyc.pass),
            cyc.checked,
            cyc.total_violations
        );
    }
    if let Some(cls) = &report.results.classification {
        for entry in &cls.entries {
            println!(
                "  {}: constant {:.6} ({}){}",
                entry.class.label(),
                entry.constant,
                if entry.admissible { "admissible" } else { "inadmissible" },
                match entry.rate {
                    Some(r) => format!(", rate {r:.6}"),
                    None => String::new(),
                }
            );
        }
        if let Some(moh) = &cls.mohsenialhosseini {
            println!(
                "  g-mohsenialhosseini: holds = {}, eta = {:.6}, 3*eta = {:.6}{}",
                moh.holds,
                moh.eta,
                moh.three_eta,
                if moh.fitted { " (fitted)" } else { "" }
            );
        }
    }
    if let Some(solve) = &report.results.solve {
        println!(
            "  solve: {:?} from x0 = {} with epsilon = {} (k = {})",
            solve.outcome, solve.x0, solve.epsilon, solve.k
        );
        if let Some(n) = solve.hit_index {
            println!(
                "    hit at n = {n}, iterate {}, delta {}",
                solve.hit_iterate.unwrap_or(f64::NAN),
                solve.final_delta
            );
        }
    }
    if let Some(fsets) = &report.results.fset {
        for f in fsets {
            match (f.min_member, f.max_member) {
                (Some(lo), Some(hi)) => println!(
                    "  fset eps = {}: {} members in [{lo}, {hi}], pair diameter {}",
                    f.epsilon,
                    f.member_count,
                    f.delta_pair.unwrap_or(f64::NAN)
                ),
                _ => println!("  fset eps = {}: empty", f.epsilon),
            }
        }
    }
    if let Some(diameters) = &report.results.diameters {
        for d in diameters {
            println!(
                "  diameter {} eps = {}: pair {:.6} triple {:.6} bound {:.6} -> {}{}",
                d.class.label(),
                d.epsilon,
                d.delta_pair,
                d.delta_triple,
                d.bound,
                pass_str(d.pass),
                if d.vacuous { " (vacuous)" } else { "" }
            );
        }
    }
    if let Some(v) = &report.results.verify {
        println!(
            "  verify: {} ({} starts, {} hits, {} diameter checks, {} failures)",
            pass_str(v.pass),
            v.starts,
            v.hits,
            v.diameter_reports,
            v.diameter_failures
        );
        for rc in &v.rate_checks {
            println!(
                "    rate {} = {:.6}: max ratio {:.6}, envelope violations {}, bound violations {}",
                rc.class.label(),
                rc.rate,
                rc.max_decay_ratio,
                rc.envelope_violations,
                rc.bound_violations
            );
        }
    }
    for warning in &report.warnings {
        println!("  warning: {warning}");
    }
    if let Some(error) = &report.error {
        eprintln!("error: {error}");
    }
    println!("  exit: {}", report.exit_code);
}

fn pass_str(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "FAIL"
    }
}
