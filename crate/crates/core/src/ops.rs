//! Cyclical operators over X_1..X_m and their contraction classes.
//!
//! A cyclical operator maps each X_i into X_{i+1} (indices wrap). Writing
//! D(u,v) for the derived metric, the classes compare D(Tx,Ty) against:
//!
//! * plain:          alpha * D(x,y)                      alpha in (0,1)
//! * bracketed:      alpha * [D(x,y) + D(Tx,Ty)]         alpha in (0,1/2)
//! * crosswise:      alpha * [D(x,Ty) + D(y,Tx)]         alpha in (0,1/2)
//! * displacement:   alpha * [D(x,y) + D(x,Tx)]          alpha in (0,1/2)
//! * disjunctive:    any of the first three with (alpha, beta, gamma)
//!
//! The empirical constant of a class is the supremum of the per-pair ratio
//! over cross pairs drawn from the working grids.

use crate::error::{Fault, Point};
use crate::expr::Bindings;
use crate::problem::{eval_expr, MapBody, ProblemSpec};
use crate::space::{
    derived_metric, domain_grids, subset_contains, GridPlan, GSpace, DEFAULT_TOL,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Margin applied to strict range boundaries so float noise cannot flip an
/// admissibility verdict.
pub const ADMISSIBILITY_MARGIN: f64 = 1e-6;

/// Cyclicity violations kept verbatim in a report; the rest are counted.
const MAX_VIOLATIONS: usize = 1000;

/// Failing pairs kept verbatim by the disjunctive-class check.
const MAX_FAILING_PAIRS: usize = 100;

/// A cyclical operator: the space it acts on plus its defining expression.
#[derive(Clone, Debug)]
pub struct CyclicMap {
    pub domain: GSpace,
    pub body: MapBody,
}

impl CyclicMap {
    pub fn from_spec(spec: &ProblemSpec) -> Result<CyclicMap, Fault> {
        Ok(CyclicMap {
            domain: spec.space()?,
            body: spec.map.clone(),
        })
    }
}

/// Apply the operator at a point. Single-expression maps are total;
/// piecewise maps fault on uncovered points.
pub fn apply_map(map: &CyclicMap, x: f64) -> Result<f64, Fault> {
    match &map.body {
        MapBody::Single(expr) => eval_expr(expr, x),
        MapBody::Piecewise(pw) => match pw.matched(x) {
            Some(body) => body
                .eval(&Bindings::for_x(x))
                .map_err(|f| Fault::from_eval(f, Point::Scalar(x))),
            None => Err(Fault::UnmatchedPoint { x }),
        },
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorClass {
    GAlphaPlain,
    GMohseni,
    GChatterjea,
    GMohsenialhosseini,
    GMohseniSemi,
}

impl OperatorClass {
    pub const RATIO_CLASSES: [OperatorClass; 4] = [
        OperatorClass::GAlphaPlain,
        OperatorClass::GMohseni,
        OperatorClass::GChatterjea,
        OperatorClass::GMohseniSemi,
    ];

    pub fn label(self) -> &'static str {
        match self {
            OperatorClass::GAlphaPlain => "g-alpha-plain",
            OperatorClass::GMohseni => "g-mohseni",
            OperatorClass::GChatterjea => "g-chatterjea",
            OperatorClass::GMohsenialhosseini => "g-mohsenialhosseini",
            OperatorClass::GMohseniSemi => "g-mohseni-semi",
        }
    }

    /// Admissible range for the class's single constant; disjunctive-class
    /// parameters are validated separately.
    pub fn constant_range(self) -> Option<(f64, f64)> {
        match self {
            OperatorClass::GAlphaPlain => Some((0.0, 1.0)),
            OperatorClass::GMohseni
            | OperatorClass::GChatterjea
            | OperatorClass::GMohseniSemi => Some((0.0, 0.5)),
            OperatorClass::GMohsenialhosseini => None,
        }
    }

    pub fn constant_admissible(self, c: f64) -> bool {
        match self.constant_range() {
            Some((lo, hi)) => c >= lo + ADMISSIBILITY_MARGIN && c <= hi - ADMISSIBILITY_MARGIN,
            None => false,
        }
    }
}

/// Parameters for the disjunctive class, with the combined constant
/// eta = max(alpha, beta/(1-beta), gamma/(1-gamma)).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ClassParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl ClassParams {
    pub fn alpha_only(alpha: f64) -> Self {
        ClassParams {
            alpha,
            beta: 0.0,
            gamma: 0.0,
        }
    }

    pub fn eta(&self) -> f64 {
        let b = self.beta / (1.0 - self.beta);
        let g = self.gamma / (1.0 - self.gamma);
        self.alpha.max(b).max(g)
    }

    /// Alpha in [0,1), beta and gamma in [0,1/2), margin-adjusted.
    pub fn validate_disjunctive(&self) -> Result<(), Fault> {
        let ok = |v: f64, hi: f64| v.is_finite() && v >= 0.0 && v <= hi - ADMISSIBILITY_MARGIN;
        if !ok(self.alpha, 1.0) {
            return Err(Fault::parameter(format!(
                "alpha = {} outside [0, 1)",
                self.alpha
            )));
        }
        if !ok(self.beta, 0.5) {
            return Err(Fault::parameter(format!(
                "beta = {} outside [0, 1/2)",
                self.beta
            )));
        }
        if !ok(self.gamma, 0.5) {
            return Err(Fault::parameter(format!(
                "gamma = {} outside [0, 1/2)",
                self.gamma
            )));
        }
        Ok(())
    }
}

/// Geometric per-iteration factor implied by a class's constant:
/// alpha, alpha/(1-alpha), 3*eta, or 2*alpha. `None` means the factor
/// reaches 1 and carries no guarantee.
pub fn contraction_rate(
    class: OperatorClass,
    params: &ClassParams,
) -> Result<Option<f64>, Fault> {
    let a = params.alpha;
    match class {
        OperatorClass::GAlphaPlain
        | OperatorClass::GMohseni
        | OperatorClass::GChatterjea
        | OperatorClass::GMohseniSemi => {
            if !class.constant_admissible(a) {
                let (lo, hi) = class.constant_range().expect("ratio class");
                return Err(Fault::parameter(format!(
                    "alpha = {a} is not inside ({lo}, {hi}) for class {}",
                    class.label()
                )));
            }
            let rate = match class {
                OperatorClass::GAlphaPlain => a,
                OperatorClass::GMohseni | OperatorClass::GChatterjea => a / (1.0 - a),
                OperatorClass::GMohseniSemi => 2.0 * a,
                OperatorClass::GMohsenialhosseini => unreachable!(),
            };
            Ok(if rate < 1.0 { Some(rate) } else { None })
        }
        OperatorClass::GMohsenialhosseini => {
            params.validate_disjunctive()?;
            let rate = 3.0 * params.eta();
            Ok(if rate < 1.0 { Some(rate) } else { None })
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CyclicityViolation {
    /// 1-based index of the source subset.
    pub set: usize,
    pub x: f64,
    pub image: f64,
    /// 1-based index of the subset the image should have landed in.
    pub target_set: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct CyclicityReport {
    pub checked: u64,
    pub pass: bool,
    pub violations: Vec<CyclicityViolation>,
    pub total_violations: u64,
    pub truncated: bool,
}

/// Check T(X_i) into X_{i+1} at every grid point, membership up to `tol`.
/// Violations are data, not faults.
pub fn verify_cyclicity(
    map: &CyclicMap,
    plan: &GridPlan,
    tol: f64,
) -> Result<CyclicityReport, Fault> {
    let grids = domain_grids(&map.domain, plan)?;
    verify_cyclicity_on(map, &grids, tol)
}

pub fn verify_cyclicity_on(
    map: &CyclicMap,
    grids: &[Vec<f64>],
    tol: f64,
) -> Result<CyclicityReport, Fault> {
    let m = map.domain.subsets.len();
    let mut report = CyclicityReport {
        checked: 0,
        pass: true,
        violations: Vec::new(),
        total_violations: 0,
        truncated: false,
    };
    for i in 0..m {
        let next = (i + 1) % m;
        let target = &map.domain.subsets[next];
        for &x in &grids[i] {
            let image = apply_map(map, x)?;
            report.checked += 1;
            if !subset_contains(target, &grids[next], image, tol) {
                report.pass = false;
                report.total_violations += 1;
                if report.violations.len() < MAX_VIOLATIONS {
                    report.violations.push(CyclicityViolation {
                        set: i + 1,
                        x,
                        image,
                        target_set: next + 1,
                    });
                } else {
                    report.truncated = true;
                }
            }
        }
    }
    Ok(report)
}

/// Per-pair ratio whose supremum is the least admissible constant for the
/// class. Denominators below tolerance contribute 0: such pairs impose no
/// constraint.
pub fn pair_ratio(
    space: &GSpace,
    map: &CyclicMap,
    class: OperatorClass,
    x: f64,
    y: f64,
) -> Result<f64, Fault> {
    let tx = apply_map(map, x)?;
    let ty = apply_map(map, y)?;
    ratio_from_parts(space, class, x, y, tx, ty)
}

fn ratio_from_parts(
    space: &GSpace,
    class: OperatorClass,
    x: f64,
    y: f64,
    tx: f64,
    ty: f64,
) -> Result<f64, Fault> {
    let num = derived_metric(space, tx, ty)?;
    let denom = match class {
        OperatorClass::GAlphaPlain => derived_metric(space, x, y)?,
        OperatorClass::GMohseni => derived_metric(space, x, y)? + num,
        OperatorClass::GChatterjea => {
            derived_metric(space, x, ty)? + derived_metric(space, y, tx)?
        }
        OperatorClass::GMohseniSemi => {
            derived_metric(space, x, y)? + derived_metric(space, x, tx)?
        }
        OperatorClass::GMohsenialhosseini => {
            return Err(Fault::UnsupportedClass {
                class: "g-mohsenialhosseini",
                reason: "it is disjunctive; use verify_mohsenialhosseini",
            });
        }
    };
    if denom <= DEFAULT_TOL {
        return Ok(0.0);
    }
    Ok(num / denom)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ConstantFit {
    pub constant: f64,
    pub witness: (f64, f64),
    pub admissible: bool,
    pub pairs_examined: u64,
    pub exhaustive: bool,
}

// Precomputed operator images, one per grid point, in grid order.
fn map_images(map: &CyclicMap, grids: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, Fault> {
    grids
        .iter()
        .map(|g| g.iter().map(|&x| apply_map(map, x)).collect())
        .collect()
}

// Visit cross pairs (x in X_i, y in X_{i+1}) exhaustively when the pair
// count fits the budget, otherwise via seeded uniform sampling of `budget`
// pairs. Returns (pairs_examined, exhaustive).
fn for_each_cross_pair<F>(
    grids: &[Vec<f64>],
    images: &[Vec<f64>],
    budget: usize,
    seed: u64,
    mut visit: F,
) -> Result<(u64, bool), Fault>
where
    F: FnMut(f64, f64, f64, f64) -> Result<(), Fault>,
{
    let m = grids.len();
    if m == 0 || grids.iter().any(|g| g.is_empty()) {
        return Err(Fault::EmptyDomain);
    }
    let block_sizes: Vec<u64> = (0..m)
        .map(|i| grids[i].len() as u64 * grids[(i + 1) % m].len() as u64)
        .collect();
    let total: u64 = block_sizes.iter().sum();
    if total == 0 {
        return Err(Fault::EmptyDomain);
    }

    if total <= budget as u64 {
        for i in 0..m {
            let next = (i + 1) % m;
            for (xi, &x) in grids[i].iter().enumerate() {
                for (yi, &y) in grids[next].iter().enumerate() {
                    visit(x, y, images[i][xi], images[next][yi])?;
                }
            }
        }
        return Ok((total, true));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..budget {
        let mut r = rng.gen_range(0..total);
        let mut i = 0;
        while r >= block_sizes[i] {
            r -= block_sizes[i];
            i += 1;
        }
        let next = (i + 1) % m;
        let cols = grids[next].len() as u64;
        let xi = (r / cols) as usize;
        let yi = (r % cols) as usize;
        visit(
            grids[i][xi],
            grids[next][yi],
            images[i][xi],
            images[next][yi],
        )?;
    }
    Ok((budget as u64, false))
}

/// Supremum of [`pair_ratio`] over cross pairs, with the witness pair that
/// attains it (lexicographically smallest on ties).
pub fn empirical_constant(
    space: &GSpace,
    map: &CyclicMap,
    grids: &[Vec<f64>],
    class: OperatorClass,
    budget: usize,
    seed: u64,
) -> Result<ConstantFit, Fault> {
    if budget == 0 {
        return Err(Fault::parameter("classification budget must be at least 1"));
    }
    if class == OperatorClass::GMohsenialhosseini {
        return Err(Fault::UnsupportedClass {
            class: "g-mohsenialhosseini",
            reason: "it is disjunctive; use verify_mohsenialhosseini",
        });
    }
    let images = map_images(map, grids)?;
    let mut best = -1.0f64;
    let mut witness = (f64::NAN, f64::NAN);
    let (pairs_examined, exhaustive) =
        for_each_cross_pair(grids, &images, budget, seed, |x, y, tx, ty| {
            let r = ratio_from_parts(space, class, x, y, tx, ty)?;
            let lex_smaller =
                x < witness.0 || (x == witness.0 && y < witness.1) || witness.0.is_nan();
            if r > best || (r == best && lex_smaller) {
                best = r;
                witness = (x, y);
            }
            Ok(())
        })?;
    Ok(ConstantFit {
        constant: best.max(0.0),
        witness,
        admissible: class.constant_admissible(best),
        pairs_examined,
        exhaustive,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DisjunctiveCheck {
    pub params: ClassParams,
    pub eta: f64,
    pub three_eta: f64,
    /// Whether the geometric-rate condition 3*eta < 1 is met.
    pub rate_condition_met: bool,
    pub holds: bool,
    pub failing_pairs: Vec<(f64, f64)>,
    pub total_failing: u64,
    pub pairs_examined: u64,
    pub exhaustive: bool,
    /// True when alpha was fitted from the grids rather than supplied.
    pub fitted: bool,
}

/// Check the disjunctive class: every cross pair must satisfy at least one
/// of the alpha-, beta-, or gamma-form inequalities.
pub fn verify_mohsenialhosseini(
    space: &GSpace,
    map: &CyclicMap,
    grids: &[Vec<f64>],
    params: &ClassParams,
    budget: usize,
    seed: u64,
) -> Result<DisjunctiveCheck, Fault> {
    params.validate_disjunctive()?;
    if budget == 0 {
        return Err(Fault::parameter("verification budget must be at least 1"));
    }
    let images = map_images(map, grids)?;
    let mut failing = Vec::new();
    let mut total_failing = 0u64;
    let (pairs_examined, exhaustive) =
        for_each_cross_pair(grids, &images, budget, seed, |x, y, tx, ty| {
            let lhs = derived_metric(space, tx, ty)?;
            let bracket = derived_metric(space, x, y)? + lhs;
            let crosswise =
                derived_metric(space, x, ty)? + derived_metric(space, y, tx)?;
            let ok = lhs <= params.alpha * bracket + DEFAULT_TOL
                || lhs <= params.beta * bracket + DEFAULT_TOL
                || lhs <= params.gamma * crosswise + DEFAULT_TOL;
            if !ok {
                total_failing += 1;
                if failing.len() < MAX_FAILING_PAIRS {
                    failing.push((x, y));
                }
            }
            Ok(())
        })?;
    let eta = params.eta();
    let three_eta = 3.0 * eta;
    Ok(DisjunctiveCheck {
        params: *params,
        eta,
        three_eta,
        rate_condition_met: three_eta < 1.0,
        holds: total_failing == 0,
        failing_pairs: failing,
        total_failing,
        pairs_examined,
        exhaustive,
        fitted: false,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassEntry {
    pub class: OperatorClass,
    pub constant: f64,
    pub witness: (f64, f64),
    pub admissible: bool,
    pub pairs_examined: u64,
    pub exhaustive: bool,
    /// Rate implied by the fitted constant, when admissible.
    pub rate: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassificationReport {
    pub budget: usize,
    pub seed: u64,
    pub entries: Vec<ClassEntry>,
    /// The disjunctive-class check; absent when the fitted alpha falls
    /// outside its range.
    pub mohsenialhosseini: Option<DisjunctiveCheck>,
}

impl ClassificationReport {
    pub fn entry(&self, class: OperatorClass) -> &ClassEntry {
        self.entries
            .iter()
            .find(|e| e.class == class)
            .expect("all ratio classes are classified")
    }
}

/// Fit all four ratio classes and run the disjunctive check. Parameters
/// supplied by the problem take precedence; otherwise alpha is fitted from
/// the bracketed-form supremum with beta = gamma = 0.
pub fn classify_all(
    space: &GSpace,
    map: &CyclicMap,
    grids: &[Vec<f64>],
    declared: &crate::problem::ClassParamsInput,
    budget: usize,
    seed: u64,
) -> Result<ClassificationReport, Fault> {
    let mut entries = Vec::new();
    for class in OperatorClass::RATIO_CLASSES {
        let fit = empirical_constant(space, map, grids, class, budget, seed)?;
        let rate = if fit.admissible {
            contraction_rate(class, &ClassParams::alpha_only(fit.constant))?
        } else {
            None
        };
        entries.push(ClassEntry {
            class,
            constant: fit.constant,
            witness: fit.witness,
            admissible: fit.admissible,
            pairs_examined: fit.pairs_examined,
            exhaustive: fit.exhaustive,
            rate,
        });
    }

    let fitted = declared.alpha.is_none();
    let alpha = match declared.alpha {
        Some(a) => a,
        None => entries
            .iter()
            .find(|e| e.class == OperatorClass::GMohseni)
            .map(|e| e.constant)
            .expect("bracketed class fitted above"),
    };
    let params = ClassParams {
        alpha,
        beta: declared.beta.unwrap_or(0.0),
        gamma: declared.gamma.unwrap_or(0.0),
    };
    let mohsenialhosseini = match params.validate_disjunctive() {
        Ok(()) => {
            let mut check = verify_mohsenialhosseini(space, map, grids, &params, budget, seed)?;
            check.fitted = fitted;
            Some(check)
        }
        Err(_) => None,
    };

    Ok(ClassificationReport {
        budget,
        seed,
        entries,
        mohsenialhosseini,
    })
}
