//! Command execution: load a problem file, run the requested stages, and
//! assemble a [`RunReport`]. Pure with respect to the filesystem apart from
//! reading the spec; JSON/CSV emission happens in `main`.

use crate::report::{
    FsetSummary, RateCheck, Results, RunReport, SolveSummary, VerifySummary, EXIT_FAULT,
    EXIT_OK, EXIT_PARSE_ERROR, EXIT_VERIFICATION_FAILED, SCHEMA_VERSION,
};
use gafp_core::atlas::{enumerate_fset, set_diameter, verify_diameter, DiameterReport};
use gafp_core::axioms::{check_axioms, AxiomReport};
use gafp_core::engine::{iteration_bound, picard_solve, power_solve, SolveConfig, SolveOutcome};
use gafp_core::error::Fault;
use gafp_core::ops::{
    classify_all, verify_cyclicity_on, ClassParams, CyclicMap, OperatorClass,
};
use gafp_core::problem::{parse_spec, serialize_spec, validate_coverage, ProblemSpec};
use gafp_core::space::{domain_grids, union_grid, GMetricDef, GSpace, DEFAULT_TOL};
use sha2::{Digest, Sha256};
use std::fmt;
use std::path::Path;

/// Points fed to the axiom checker by `check` and by the custom-metric
/// gate (subsampled evenly from the union grid).
const AXIOM_SAMPLE_CAP: usize = 48;

/// Grid starts examined by `verify` (subsampled evenly when the grid is
/// larger).
const VERIFY_START_CAP: usize = 500;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Check,
    Classify,
    Solve,
    Fset,
    Verify,
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Classify => "classify",
            Command::Solve => "solve",
            Command::Fset => "fset",
            Command::Verify => "verify",
            Command::Report => "report",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Flags {
    pub epsilon: Option<f64>,
    pub x0: Option<f64>,
    pub k: Option<usize>,
    pub grid: Option<f64>,
    pub budget: Option<usize>,
    pub seed: Option<u64>,
    pub strict: bool,
}

/// Everything a command run produces: the report plus optional CSV payload
/// (a solve trace or fset member list).
pub struct Outcome {
    pub report: RunReport,
    pub csv: Option<String>,
}

struct Ctx {
    spec: ProblemSpec,
    space: GSpace,
    map: CyclicMap,
    grids: Vec<Vec<f64>>,
    union: Vec<f64>,
}

/// Run one command against a problem file.
pub fn execute(command: Command, spec_path: &Path, flags: &Flags) -> Outcome {
    let mut report = RunReport {
        schema_version: SCHEMA_VERSION,
        command: command.name().to_string(),
        spec_path: spec_path.display().to_string(),
        spec_digest: String::new(),
        results: Results::default(),
        warnings: Vec::new(),
        error: None,
        exit_code: EXIT_OK,
    };

    let text = match std::fs::read_to_string(spec_path) {
        Ok(text) => text,
        Err(err) => {
            report.error = Some(format!("cannot read {}: {err}", spec_path.display()));
            report.exit_code = EXIT_PARSE_ERROR;
            return Outcome { report, csv: None };
        }
    };

    let mut spec = match parse_spec(&text) {
        Ok(spec) => spec,
        Err(err) => {
            report.error = Some(err.to_string());
            report.exit_code = EXIT_PARSE_ERROR;
            return Outcome { report, csv: None };
        }
    };

    if let Some(h) = flags.grid {
        spec.run.grid_h = h;
    }
    if let Some(seed) = flags.seed {
        spec.run.seed = seed;
    }
    if let Some(budget) = flags.budget {
        spec.run.budget = budget;
    }
    if let Some(eps) = flags.epsilon {
        spec.run.epsilon = eps;
        spec.run.epsilons = vec![eps];
    }
    if let Some(x0) = flags.x0 {
        spec.run.x0 = Some(x0);
    }

    report.spec_digest = hex_sha256(&serialize_spec(&spec));

    let ctx = match build_ctx(spec) {
        Ok(ctx) => ctx,
        Err(fault) => {
            report.error = Some(fault.to_string());
            report.exit_code = EXIT_FAULT;
            return Outcome { report, csv: None };
        }
    };

    // Custom metrics must pass the axiom check before anything trusts them.
    if !matches!(command, Command::Check) {
        if let GMetricDef::Custom(_) = ctx.space.gmetric {
            match gate_axioms(&ctx) {
                Ok(axioms) => {
                    if !axioms.pass {
                        report.results.axioms = Some(axioms);
                        report.error =
                            Some("custom G-metric failed the axiom check on the working grid".into());
                        report.exit_code = EXIT_VERIFICATION_FAILED;
                        return Outcome { report, csv: None };
                    }
                }
                Err(fault) => {
                    report.error = Some(fault.to_string());
                    report.exit_code = EXIT_FAULT;
                    return Outcome { report, csv: None };
                }
            }
        }
    }

    let csv = match run_command(command, &ctx, flags, &mut report) {
        Ok(csv) => csv,
        Err(fault) => {
            report.error = Some(fault.to_string());
            report.exit_code = EXIT_FAULT;
            return Outcome { report, csv: None };
        }
    };

    if flags.strict && report.exit_code == EXIT_OK && !report.warnings.is_empty() {
        report.exit_code = EXIT_VERIFICATION_FAILED;
    }
    Outcome { report, csv }
}

fn build_ctx(spec: ProblemSpec) -> Result<Ctx, Fault> {
    let space = spec.space()?;
    let map = CyclicMap::from_spec(&spec)?;
    let grids = domain_grids(&space, &spec.grid_plan())?;
    validate_coverage(&spec.map, &grids)?;
    let union = union_grid(&grids);
    Ok(Ctx {
        spec,
        space,
        map,
        grids,
        union,
    })
}

fn hex_sha256(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn axiom_sample(union: &[f64]) -> Vec<f64> {
    subsample(union, AXIOM_SAMPLE_CAP)
}

fn subsample(points: &[f64], cap: usize) -> Vec<f64> {
    if points.len() <= cap {
        return points.to_vec();
    }
    (0..cap)
        .map(|i| points[i * (points.len() - 1) / (cap - 1)])
        .collect()
}

fn gate_axioms(ctx: &Ctx) -> Result<AxiomReport, Fault> {
    check_axioms(&ctx.space, &axiom_sample(&ctx.union), DEFAULT_TOL)
}

fn run_command(
    command: Command,
    ctx: &Ctx,
    flags: &Flags,
    report: &mut RunReport,
) -> Result<Option<String>, Fault> {
    match command {
        Command::Check => {
            run_check(ctx, report)?;
            Ok(None)
        }
        Command::Classify => {
            run_classify(ctx, report)?;
            Ok(None)
        }
        Command::Solve => run_solve(ctx, flags, report).map(Some),
        Command::Fset => run_fset(ctx, report).map(Some),
        Command::Verify => {
            run_verify(ctx, report)?;
            Ok(None)
        }
        Command::Report => {
            run_check(ctx, report)?;
            run_classify(ctx, report)?;
            let csv = if ctx.spec.run.x0.is_some() {
                Some(run_solve(ctx, flags, report)?)
            } else {
                report
                    .warnings
                    .push("no x0 declared; solve stage skipped".into());
                None
            };
            run_fset(ctx, report)?;
            run_verify(ctx, report)?;
            Ok(csv)
        }
    }
}

fn run_check(ctx: &Ctx, report: &mut RunReport) -> Result<(), Fault> {
    let axioms = check_axioms(&ctx.space, &axiom_sample(&ctx.union), DEFAULT_TOL)?;
    if !axioms.pass {
        for check in axioms.checks.iter().filter(|c| !c.pass) {
            if let Some(v) = check.violations.first() {
                report.warnings.push(format!(
                    "axiom {} fails with witness {:?} (lhs {}, rhs {})",
                    check.axiom, v.points, v.lhs, v.rhs
                ));
            }
        }
        report.exit_code = EXIT_VERIFICATION_FAILED;
    }
    report.results.axioms = Some(axioms);

    let cyclicity = verify_cyclicity_on(&ctx.map, &ctx.grids, DEFAULT_TOL)?;
    if !cyclicity.pass {
        let shown = cyclicity.violations.len().min(3);
        for v in &cyclicity.violations[..shown] {
            report.warnings.push(format!(
                "cyclicity violation: T({}) = {} from set {} lands outside set {}",
                v.x, v.image, v.set, v.target_set
            ));
        }
        if cyclicity.total_violations as usize > shown {
            report.warnings.push(format!(
                "cyclicity: {} violations in total",
                cyclicity.total_violations
            ));
        }
    }
    report.results.cyclicity = Some(cyclicity);
    Ok(())
}

fn run_classify(ctx: &Ctx, report: &mut RunReport) -> Result<(), Fault> {
    let classification = classify_all(
        &ctx.space,
        &ctx.map,
        &ctx.grids,
        &ctx.spec.params,
        ctx.spec.run.budget,
        ctx.spec.run.seed,
    )?;
    for entry in &classification.entries {
        if !entry.admissible {
            report.warnings.push(format!(
                "class {}: empirical constant {} is outside the admissible range",
                entry.class.label(),
                entry.constant
            ));
        }
    }
    match &classification.mohsenialhosseini {
        Some(check) => {
            if !check.holds {
                report.warnings.push(format!(
                    "disjunctive class fails on {} pairs (alpha {}, beta {}, gamma {})",
                    check.total_failing, check.params.alpha, check.params.beta, check.params.gamma
                ));
            }
            if !check.rate_condition_met {
                report.warnings.push(format!(
                    "disjunctive class: 3*eta = {} >= 1, no geometric rate",
                    check.three_eta
                ));
            }
        }
        None => report
            .warnings
            .push("disjunctive class skipped: fitted alpha out of range".into()),
    }
    report.results.classification = Some(classification);
    Ok(())
}

fn run_solve(ctx: &Ctx, flags: &Flags, report: &mut RunReport) -> Result<String, Fault> {
    let x0 = ctx
        .spec
        .run
        .x0
        .ok_or_else(|| Fault::parameter("solve needs x0 (declare it in [run] or pass --x0)"))?;
    let config = SolveConfig {
        epsilon: ctx.spec.run.epsilon,
        x0,
        max_iter: ctx.spec.run.max_iter,
        divergence_factor: ctx.spec.run.divergence_factor,
    };
    let k = flags.k.unwrap_or(1);
    let trace = if k == 1 {
        picard_solve(&ctx.space, &ctx.map, &config)?
    } else {
        power_solve(&ctx.space, &ctx.map, k, &config)?
    };
    if trace.outcome != SolveOutcome::Hit {
        report.exit_code = EXIT_VERIFICATION_FAILED;
        report.warnings.push(format!(
            "solve did not reach an epsilon-fixed point (outcome: {:?})",
            trace.outcome
        ));
    }
    report.results.solve = Some(SolveSummary {
        epsilon: config.epsilon,
        x0,
        k,
        outcome: trace.outcome,
        hit_index: trace.hit_index,
        hit_iterate: trace.hit_iterate(),
        steps: trace.displacements.len(),
        delta0: trace.displacements[0],
        final_delta: *trace.displacements.last().expect("nonempty"),
    });
    let mut csv = Vec::new();
    trace.write_csv(&mut csv).expect("writing to a Vec");
    Ok(String::from_utf8(csv).expect("ascii csv"))
}

fn run_fset(ctx: &Ctx, report: &mut RunReport) -> Result<String, Fault> {
    let mut summaries = Vec::new();
    let mut csv = String::from("epsilon,member\n");
    for &epsilon in &ctx.spec.run.epsilons {
        let fset = enumerate_fset(&ctx.space, &ctx.map, epsilon, &ctx.grids)?;
        for member in &fset.members {
            csv.push_str(&format!("{epsilon},{member}\n"));
        }
        if fset.members.is_empty() {
            report.warnings.push(format!(
                "F_eps is empty at epsilon = {epsilon} (smallest grid displacement exceeds it)"
            ));
            summaries.push(FsetSummary {
                epsilon,
                member_count: 0,
                grid_size: fset.grid_size,
                min_member: None,
                max_member: None,
                delta_pair: None,
                delta_triple: None,
                approximate: false,
            });
            continue;
        }
        let diameters = set_diameter(&ctx.space, &fset, ctx.spec.run.budget, ctx.spec.run.seed)?;
        summaries.push(FsetSummary {
            epsilon,
            member_count: fset.members.len(),
            grid_size: fset.grid_size,
            min_member: fset.members.first().copied(),
            max_member: fset.members.last().copied(),
            delta_pair: Some(diameters.delta_pair),
            delta_triple: Some(diameters.delta_triple),
            approximate: diameters.approximate,
        });
    }
    report.results.fset = Some(summaries);
    Ok(csv)
}

fn run_verify(ctx: &Ctx, report: &mut RunReport) -> Result<(), Fault> {
    if report.results.cyclicity.is_none() {
        let cyclicity = verify_cyclicity_on(&ctx.map, &ctx.grids, DEFAULT_TOL)?;
        if !cyclicity.pass {
            report.warnings.push(format!(
                "cyclicity: {} violations on the working grid",
                cyclicity.total_violations
            ));
        }
        report.results.cyclicity = Some(cyclicity);
    }
    if report.results.classification.is_none() {
        run_classify(ctx, report)?;
    }
    let classification = report
        .results
        .classification
        .as_ref()
        .expect("classification just ran");

    // Rates worth checking: admissible ratio classes plus the disjunctive
    // class when its check holds with a geometric rate.
    let mut rates: Vec<(OperatorClass, f64)> = classification
        .entries
        .iter()
        .filter_map(|e| e.rate.map(|r| (e.class, r)))
        .collect();
    let mut moh_params: Option<ClassParams> = None;
    if let Some(check) = &classification.mohsenialhosseini {
        if check.holds {
            moh_params = Some(check.params);
            if check.rate_condition_met {
                rates.push((OperatorClass::GMohsenialhosseini, check.three_eta));
            }
        }
    }

    let epsilon = ctx.spec.run.epsilon;
    let starts = subsample(&ctx.union, VERIFY_START_CAP);
    let mut hits = 0usize;
    let mut non_hits = 0usize;
    let mut failed = false;

    let mut traces = Vec::with_capacity(starts.len());
    if rates.is_empty() {
        report
            .warnings
            .push("no admissible contraction class: solve sweep skipped".into());
    } else {
        for &x0 in &starts {
            let config = SolveConfig {
                epsilon,
                x0,
                max_iter: ctx.spec.run.max_iter,
                divergence_factor: ctx.spec.run.divergence_factor,
            };
            let trace = picard_solve(&ctx.space, &ctx.map, &config)?;
            if trace.outcome == SolveOutcome::Hit {
                hits += 1;
            } else {
                non_hits += 1;
                failed = true;
            }
            traces.push(trace);
        }
    }

    let mut rate_checks = Vec::new();
    for (class, rate) in rates {
        let mut envelope_violations = 0u64;
        let mut bound_violations = 0u64;
        let mut max_ratio = 0.0f64;
        let mut max_n_star = 0usize;
        let mut example_bound = None;
        for trace in &traces {
            for &ratio in &trace.decay_ratios {
                max_ratio = max_ratio.max(ratio);
                if ratio > rate + DEFAULT_TOL {
                    envelope_violations += 1;
                }
            }
            let bound = iteration_bound(trace.displacements[0], epsilon, rate)?;
            max_n_star = max_n_star.max(bound.n_star);
            if let Some(hit) = trace.hit_index {
                if hit > bound.n_star {
                    bound_violations += 1;
                }
            }
            if example_bound.is_none() {
                example_bound = Some(bound);
            }
        }
        if envelope_violations > 0 || bound_violations > 0 {
            failed = true;
        }
        rate_checks.push(RateCheck {
            class,
            rate,
            max_decay_ratio: max_ratio,
            envelope_violations,
            bound_violations,
            max_n_star,
            example_bound,
        });
    }

    // Diameter theorems for the classes that have one.
    let mut diameter_reports: Vec<DiameterReport> = Vec::new();
    let mut diameter_failures = 0usize;
    let mut diameter_targets: Vec<(OperatorClass, ClassParams)> = Vec::new();
    for class in [OperatorClass::GMohseni, OperatorClass::GMohseniSemi] {
        let alpha = match ctx.spec.params.alpha {
            Some(a) if class.constant_admissible(a) => Some(a),
            _ => {
                let entry = classification.entry(class);
                entry.admissible.then_some(entry.constant)
            }
        };
        match alpha {
            Some(a) => diameter_targets.push((class, ClassParams::alpha_only(a))),
            None => report.warnings.push(format!(
                "diameter bound for {} skipped: no admissible alpha",
                class.label()
            )),
        }
    }
    match moh_params {
        Some(params) => {
            diameter_targets.push((OperatorClass::GMohsenialhosseini, params));
        }
        None => report.warnings.push(
            "diameter bound for g-mohsenialhosseini skipped: class check absent or failing"
                .into(),
        ),
    }
    for (class, params) in diameter_targets {
        for &eps in &ctx.spec.run.epsilons {
            let dr = verify_diameter(
                &ctx.space,
                &ctx.map,
                class,
                &params,
                eps,
                &ctx.grids,
                ctx.spec.run.budget,
                ctx.spec.run.seed,
            )?;
            if dr.vacuous {
                report.warnings.push(format!(
                    "diameter check for {} at epsilon = {eps} is vacuous (empty F_eps)",
                    class.label()
                ));
            }
            if !dr.pass {
                diameter_failures += 1;
                failed = true;
            }
            diameter_reports.push(dr);
        }
    }

    let summary = VerifySummary {
        epsilon,
        starts: traces.len(),
        hits,
        non_hits,
        rate_checks,
        diameter_reports: diameter_reports.len(),
        diameter_failures,
        pass: !failed,
    };
    report.results.diameters = Some(diameter_reports);
    report.results.verify = Some(summary);
    if failed {
        report.exit_code = EXIT_VERIFICATION_FAILED;
    }
    Ok(())
}
