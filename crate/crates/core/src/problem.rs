//! The problem-definition language: line-oriented `key = value` sections
//! describing the carrier sets, the cyclical map, class parameters, and run
//! configuration.
//!
//! ```text
//! [space]
//! m = 2
//! set_1 = (0, 0.8]
//! set_2 = { 1/k | -1/(2*k) : k = 1..25 }
//! gmetric = builder max scale 0.5
//!
//! [map]
//! expr = x/4                       # single-expression map, or:
//! branch_1 = [0, 0.5) -> 0         # ordered piecewise branches
//! default = x                      # optional fallback branch
//!
//! [params]
//! alpha = 0.3333333333333333
//!
//! [run]
//! epsilons = 0.05, 0.1, 0.3
//! epsilon = 0.01
//! x0 = 0.8
//! grid_h = 0.01
//! ...
//! ```
//!
//! `#` starts a comment. Numeric values accept constant expressions
//! (`alpha = 1/3`). `serialize_spec` emits the canonical form: fixed
//! section and key order, resolved defaults, shortest-round-trip floats;
//! `parse(serialize(s))` is structurally equal to `s` and a second
//! serialization is byte-identical.

use crate::error::{Fault, ParseError};
use crate::expr::{parse_expr, Bindings, Expr, Var};
use crate::space::{GMetricDef, GShape, GridPlan, GSpace, Interval, RealSubset};

const DEFAULT_GRID_H: f64 = 0.01;
const DEFAULT_MAX_POINTS: usize = 1_000_000;
const DEFAULT_MAX_ITER: usize = 1_000_000;
const DEFAULT_DIVERGENCE_FACTOR: f64 = 1000.0;
const DEFAULT_SEED: u64 = 42;
const DEFAULT_BUDGET: usize = 10_000_000;
const DEFAULT_K_MAX: i64 = 1000;

/// One guarded branch of a piecewise map.
#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub guard: Interval,
    pub body: Expr,
}

/// A piecewise map: ordered branches plus an optional default. Guards are
/// required to be pairwise disjoint on the working grid; see
/// [`validate_coverage`].
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseDef {
    pub branches: Vec<Branch>,
    pub default: Option<Expr>,
}

impl PiecewiseDef {
    /// The branch body that applies at `x`, if any.
    pub fn matched(&self, x: f64) -> Option<&Expr> {
        self.branches
            .iter()
            .find(|b| b.guard.contains(x))
            .map(|b| &b.body)
            .or(self.default.as_ref())
    }

    /// How many explicit guards contain `x` (the default does not count).
    pub fn explicit_matches(&self, x: f64) -> usize {
        self.branches.iter().filter(|b| b.guard.contains(x)).count()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum MapBody {
    Single(Expr),
    Piecewise(PiecewiseDef),
}

/// Optional class parameters from the `[params]` section.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ClassParamsInput {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
}

/// Resolved `[run]` configuration with all defaults applied.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub epsilons: Vec<f64>,
    pub epsilon: f64,
    pub x0: Option<f64>,
    pub grid_h: f64,
    pub max_points: usize,
    pub max_iter: usize,
    pub divergence_factor: f64,
    pub seed: u64,
    pub budget: usize,
}

/// A fully resolved problem declaration.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemSpec {
    pub m: usize,
    pub subsets: Vec<RealSubset>,
    pub gmetric: GMetricDef,
    pub map: MapBody,
    pub params: ClassParamsInput,
    pub run: RunConfig,
}

impl ProblemSpec {
    pub fn grid_plan(&self) -> GridPlan {
        GridPlan {
            h: self.run.grid_h,
            max_points: self.run.max_points,
        }
    }

    pub fn space(&self) -> Result<GSpace, Fault> {
        GSpace::new(self.subsets.clone(), self.gmetric.clone())
    }
}

/// Evaluate a single-variable expression at `x`.
pub fn eval_expr(ast: &Expr, x: f64) -> Result<f64, Fault> {
    ast.eval(&Bindings::for_x(x))
        .map_err(|f| Fault::from_eval(f, crate::error::Point::Scalar(x)))
}

/// Check that every grid point is matched by exactly one branch (or falls
/// through to a declared default). Single-expression maps are total.
pub fn validate_coverage(map: &MapBody, grids: &[Vec<f64>]) -> Result<(), Fault> {
    let MapBody::Piecewise(pw) = map else {
        return Ok(());
    };
    for grid in grids {
        for &x in grid {
            let matches = pw.explicit_matches(x);
            if matches > 1 {
                return Err(Fault::parameter(format!(
                    "piecewise guards overlap at grid point x = {x} ({matches} branches match)"
                )));
            }
            if matches == 0 && pw.default.is_none() {
                return Err(Fault::parameter(format!(
                    "no piecewise branch covers grid point x = {x}"
                )));
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    Space,
    Map,
    Params,
    Run,
}

struct KeyedValue {
    line: usize,
    /// 0-based column where the value text starts on its line.
    value_col: usize,
    value: String,
}

#[derive(Default)]
struct RawSpec {
    m: Option<(usize, KeyedValue)>,
    sets: Vec<(usize, KeyedValue)>,
    gmetric: Option<KeyedValue>,
    map_expr: Option<KeyedValue>,
    branches: Vec<(usize, KeyedValue)>,
    default_branch: Option<KeyedValue>,
    alpha: Option<KeyedValue>,
    beta: Option<KeyedValue>,
    gamma: Option<KeyedValue>,
    epsilons: Option<KeyedValue>,
    epsilon: Option<KeyedValue>,
    x0: Option<KeyedValue>,
    grid_h: Option<KeyedValue>,
    max_points: Option<KeyedValue>,
    max_iter: Option<KeyedValue>,
    divergence_factor: Option<KeyedValue>,
    seed: Option<KeyedValue>,
    budget: Option<KeyedValue>,
}

/// Parse a problem declaration. Errors carry 1-based line/column positions.
pub fn parse_spec(text: &str) -> Result<ProblemSpec, ParseError> {
    let mut raw = RawSpec::default();
    let mut section: Option<Section> = None;
    let mut last_line = 0;

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let content = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        };
        if content.trim().is_empty() {
            continue;
        }
        let trimmed = content.trim_start();
        let indent = content.len() - trimmed.len();
        if let Some(rest) = trimmed.strip_prefix('[') {
            let Some(name) = rest.trim_end().strip_suffix(']') else {
                return Err(ParseError::new(
                    line_no,
                    indent + 1,
                    "section header must look like [name]",
                ));
            };
            section = Some(match name {
                "space" => Section::Space,
                "map" => Section::Map,
                "params" => Section::Params,
                "run" => Section::Run,
                other => {
                    return Err(ParseError::new(
                        line_no,
                        indent + 2,
                        format!("unknown section '{other}' (expected space, map, params, run)"),
                    ));
                }
            });
            continue;
        }

        let Some(eq) = content.find('=') else {
            return Err(ParseError::new(
                line_no,
                indent + 1,
                "expected 'key = value'",
            ));
        };
        let key = content[..eq].trim();
        if key.is_empty() {
            return Err(ParseError::new(line_no, indent + 1, "missing key before '='"));
        }
        let after = &content[eq + 1..];
        let value_trimmed = after.trim();
        let value_col = eq + 1 + (after.len() - after.trim_start().len());
        let kv = KeyedValue {
            line: line_no,
            value_col,
            value: value_trimmed.to_string(),
        };
        let key_col = indent + 1;

        let Some(section) = section else {
            return Err(ParseError::new(
                line_no,
                key_col,
                format!("key '{key}' appears before any section header"),
            ));
        };

        match section {
            Section::Space => match key {
                "m" => put_once(&mut raw.m, parse_usize_value(&kv)?.pipe(kv), key, key_col)?,
                "gmetric" => put_kv(&mut raw.gmetric, kv, key, key_col)?,
                _ => {
                    if let Some(idx) = indexed_key(key, "set_") {
                        push_indexed(&mut raw.sets, idx, kv, key, key_col)?;
                    } else {
                        return Err(unknown_key(line_no, key_col, key, "space"));
                    }
                }
            },
            Section::Map => match key {
                "expr" => put_kv(&mut raw.map_expr, kv, key, key_col)?,
                "default" => put_kv(&mut raw.default_branch, kv, key, key_col)?,
                _ => {
                    if let Some(idx) = indexed_key(key, "branch_") {
                        push_indexed(&mut raw.branches, idx, kv, key, key_col)?;
                    } else {
                        return Err(unknown_key(line_no, key_col, key, "map"));
                    }
                }
            },
            Section::Params => match key {
                "alpha" => put_kv(&mut raw.alpha, kv, key, key_col)?,
                "beta" => put_kv(&mut raw.beta, kv, key, key_col)?,
                "gamma" => put_kv(&mut raw.gamma, kv, key, key_col)?,
                _ => return Err(unknown_key(line_no, key_col, key, "params")),
            },
            Section::Run => match key {
                "epsilons" => put_kv(&mut raw.epsilons, kv, key, key_col)?,
                "epsilon" => put_kv(&mut raw.epsilon, kv, key, key_col)?,
                "x0" => put_kv(&mut raw.x0, kv, key, key_col)?,
                "grid_h" => put_kv(&mut raw.grid_h, kv, key, key_col)?,
                "max_points" => put_kv(&mut raw.max_points, kv, key, key_col)?,
                "max_iter" => put_kv(&mut raw.max_iter, kv, key, key_col)?,
                "divergence_factor" => put_kv(&mut raw.divergence_factor, kv, key, key_col)?,
                "seed" => put_kv(&mut raw.seed, kv, key, key_col)?,
                "budget" => put_kv(&mut raw.budget, kv, key, key_col)?,
                _ => return Err(unknown_key(line_no, key_col, key, "run")),
            },
        }
    }

    assemble(raw, last_line.max(1))
}

// small helper to keep the (usize, KeyedValue) tuple construction readable
trait Pipe: Sized {
    fn pipe(self, kv: KeyedValue) -> (Self, KeyedValue) {
        (self, kv)
    }
}
impl Pipe for usize {}

fn unknown_key(line: usize, col: usize, key: &str, section: &str) -> ParseError {
    ParseError::new(
        line,
        col,
        format!("unknown key '{key}' in [{section}]"),
    )
}

fn put_kv(
    slot: &mut Option<KeyedValue>,
    kv: KeyedValue,
    key: &str,
    key_col: usize,
) -> Result<(), ParseError> {
    if slot.is_some() {
        return Err(ParseError::new(
            kv.line,
            key_col,
            format!("duplicate key '{key}'"),
        ));
    }
    *slot = Some(kv);
    Ok(())
}

fn put_once(
    slot: &mut Option<(usize, KeyedValue)>,
    value: (usize, KeyedValue),
    key: &str,
    key_col: usize,
) -> Result<(), ParseError> {
    if slot.is_some() {
        return Err(ParseError::new(
            value.1.line,
            key_col,
            format!("duplicate key '{key}'"),
        ));
    }
    *slot = Some(value);
    Ok(())
}

fn push_indexed(
    acc: &mut Vec<(usize, KeyedValue)>,
    idx: usize,
    kv: KeyedValue,
    key: &str,
    key_col: usize,
) -> Result<(), ParseError> {
    if acc.iter().any(|(i, _)| *i == idx) {
        return Err(ParseError::new(
            kv.line,
            key_col,
            format!("duplicate key '{key}'"),
        ));
    }
    acc.push((idx, kv));
    Ok(())
}

fn indexed_key(key: &str, prefix: &str) -> Option<usize> {
    key.strip_prefix(prefix)?.parse().ok().filter(|&i| i >= 1)
}

fn parse_usize_value(kv: &KeyedValue) -> Result<usize, ParseError> {
    kv.value.trim().parse::<usize>().map_err(|_| {
        ParseError::new(
            kv.line,
            kv.value_col + 1,
            format!("expected a nonnegative integer, got '{}'", kv.value.trim()),
        )
    })
}

fn parse_u64_value(kv: &KeyedValue) -> Result<u64, ParseError> {
    kv.value.trim().parse::<u64>().map_err(|_| {
        ParseError::new(
            kv.line,
            kv.value_col + 1,
            format!("expected a nonnegative integer, got '{}'", kv.value.trim()),
        )
    })
}

/// Numeric values are constant expressions: `alpha = 1/3` is legal.
fn parse_const_value(kv: &KeyedValue) -> Result<f64, ParseError> {
    parse_const_at(&kv.value, kv.line, kv.value_col)
}

fn parse_const_at(text: &str, line: usize, col: usize) -> Result<f64, ParseError> {
    let expr = parse_expr(text, &[], line, col)?;
    expr.eval(&Bindings::default()).map_err(|_| {
        ParseError::new(line, col + 1, "constant expression does not evaluate to a finite value")
    })
}

fn parse_interval_at(text: &str, line: usize, col: usize) -> Result<Interval, ParseError> {
    let trimmed = text.trim_start();
    let lead = text.len() - trimmed.len();
    let open_col = col + lead + 1;
    let mut chars = trimmed.chars();
    let lo_open = match chars.next() {
        Some('(') => true,
        Some('[') => false,
        _ => {
            return Err(ParseError::new(
                line,
                open_col,
                "interval must start with '(' or '['",
            ))
        }
    };
    let body = trimmed[1..].trim_end();
    let (body, hi_open) = match body.chars().last() {
        Some(')') => (&body[..body.len() - 1], true),
        Some(']') => (&body[..body.len() - 1], false),
        _ => {
            return Err(ParseError::new(
                line,
                col + text.trim_end().len(),
                "interval must end with ')' or ']'",
            ))
        }
    };
    let Some(comma) = body.find(',') else {
        return Err(ParseError::new(
            line,
            open_col + 1,
            "interval needs two comma-separated bounds",
        ));
    };
    let lo_text = &body[..comma];
    let hi_text = &body[comma + 1..];
    let lo = parse_const_at(lo_text, line, col + lead + 1)?;
    let hi = parse_const_at(hi_text, line, col + lead + 2 + comma)?;
    let iv = Interval {
        lo,
        hi,
        lo_open,
        hi_open,
    };
    if lo > hi {
        return Err(ParseError::new(
            line,
            open_col,
            format!("interval bounds out of order: {lo} > {hi}"),
        ));
    }
    if lo == hi && (lo_open || hi_open) {
        return Err(ParseError::new(
            line,
            open_col,
            "a single-point interval must be closed on both ends",
        ));
    }
    Ok(iv)
}

fn parse_subset(kv: &KeyedValue) -> Result<RealSubset, ParseError> {
    let text = kv.value.trim();
    if text.starts_with('{') {
        parse_family(kv)
    } else {
        Ok(RealSubset::Interval(parse_interval_at(
            &kv.value,
            kv.line,
            kv.value_col,
        )?))
    }
}

fn parse_family(kv: &KeyedValue) -> Result<RealSubset, ParseError> {
    let text = kv.value.trim_start();
    let lead = kv.value.len() - text.len();
    let base = kv.value_col + lead; // 0-based col of '{'
    let inner = text
        .strip_prefix('{')
        .expect("caller checked the brace")
        .trim_end();
    let Some(inner) = inner.strip_suffix('}') else {
        return Err(ParseError::new(
            kv.line,
            base + text.trim_end().len(),
            "family must end with '}'",
        ));
    };
    let Some(colon) = inner.find(':') else {
        return Err(ParseError::new(
            kv.line,
            base + 2,
            "family needs a ': k = a..b' index range",
        ));
    };
    let gens_text = &inner[..colon];
    let range_text = &inner[colon + 1..];

    let mut generators = Vec::new();
    let mut offset = 0usize;
    for piece in gens_text.split('|') {
        let gen_col = base + 1 + offset; // 0-based col of the piece
        let expr = parse_expr(piece, &[Var::K], kv.line, gen_col)?;
        generators.push(expr);
        offset += piece.len() + 1;
    }

    let range_col = base + 1 + colon + 1; // 0-based col just after ':'
    let (k_min, k_max) = parse_k_range(range_text, kv.line, range_col)?;
    if k_min < 1 {
        return Err(ParseError::new(
            kv.line,
            range_col + 1,
            format!("family index must start at 1 or above, got {k_min}"),
        ));
    }
    if k_max < k_min {
        return Err(ParseError::new(
            kv.line,
            range_col + 1,
            format!("family index range is empty: {k_min}..{k_max}"),
        ));
    }
    Ok(RealSubset::FiniteFamily {
        generators,
        k_min,
        k_max,
    })
}

fn parse_k_range(text: &str, line: usize, col: usize) -> Result<(i64, i64), ParseError> {
    // expected shape: k = a..b  (b optional; defaults to 1000)
    let bad = |msg: &str| ParseError::new(line, col + 1, msg.to_string());
    let s = text.trim();
    let s = s
        .strip_prefix('k')
        .ok_or_else(|| bad("family range must look like 'k = a..b'"))?
        .trim_start();
    let s = s
        .strip_prefix('=')
        .ok_or_else(|| bad("family range must look like 'k = a..b'"))?
        .trim();
    let (lo_text, hi_text) = match s.find("..") {
        Some(pos) => (&s[..pos], &s[pos + 2..]),
        None => return Err(bad("family range must use '..', e.g. 'k = 1..25'")),
    };
    let k_min: i64 = lo_text
        .trim()
        .parse()
        .map_err(|_| bad("family range start must be an integer"))?;
    let hi_text = hi_text.trim();
    let k_max: i64 = if hi_text.is_empty() {
        DEFAULT_K_MAX
    } else {
        hi_text
            .parse()
            .map_err(|_| bad("family range end must be an integer"))?
    };
    Ok((k_min, k_max))
}

fn parse_gmetric(kv: &KeyedValue) -> Result<GMetricDef, ParseError> {
    let text = kv.value.trim_start();
    let lead = kv.value.len() - text.len();
    let base = kv.value_col + lead;
    if let Some(rest) = text.strip_prefix("custom") {
        let expr_col = base + text.len() - rest.len();
        let expr = parse_expr(rest, &[Var::X, Var::Y, Var::Z], kv.line, expr_col)?;
        return Ok(GMetricDef::Custom(expr));
    }
    if let Some(rest) = text.strip_prefix("builder") {
        let fields: Vec<&str> = rest.split_whitespace().collect();
        if fields.len() != 3 || fields[1] != "scale" {
            return Err(ParseError::new(
                kv.line,
                base + 1,
                "builder metric must look like 'builder max scale 0.5'",
            ));
        }
        let shape = match fields[0] {
            "max" => GShape::Max,
            "sum" => GShape::Sum,
            other => {
                return Err(ParseError::new(
                    kv.line,
                    base + 1,
                    format!("unknown builder shape '{other}' (expected max or sum)"),
                ))
            }
        };
        let scale: f64 = fields[2].parse().map_err(|_| {
            ParseError::new(
                kv.line,
                base + 1,
                format!("builder scale must be a number, got '{}'", fields[2]),
            )
        })?;
        if scale <= 0.0 || !scale.is_finite() {
            return Err(ParseError::new(
                kv.line,
                base + 1,
                format!("builder scale must be positive, got {scale}"),
            ));
        }
        return Ok(GMetricDef::Builder { shape, scale });
    }
    Err(ParseError::new(
        kv.line,
        base + 1,
        "gmetric must start with 'builder' or 'custom'",
    ))
}

fn parse_branch(kv: &KeyedValue) -> Result<Branch, ParseError> {
    let Some(arrow) = kv.value.find("->") else {
        return Err(ParseError::new(
            kv.line,
            kv.value_col + 1,
            "branch must look like '[lo, hi) -> expr'",
        ));
    };
    let guard = parse_interval_at(&kv.value[..arrow], kv.line, kv.value_col)?;
    let body_col = kv.value_col + arrow + 2;
    let body = parse_expr(&kv.value[arrow + 2..], &[Var::X], kv.line, body_col)?;
    Ok(Branch { guard, body })
}

fn assemble(raw: RawSpec, last_line: usize) -> Result<ProblemSpec, ParseError> {
    let missing = |what: &str| ParseError::new(last_line, 1, format!("missing required {what}"));

    let (m, m_kv) = raw.m.ok_or_else(|| missing("key 'm' in [space]"))?;
    if m < 1 {
        return Err(ParseError::new(
            m_kv.line,
            m_kv.value_col + 1,
            "m must be at least 1",
        ));
    }

    let mut sets = raw.sets;
    sets.sort_by_key(|(idx, _)| *idx);
    if sets.len() != m {
        return Err(ParseError::new(
            m_kv.line,
            m_kv.value_col + 1,
            format!("m = {m} but {} subsets are declared", sets.len()),
        ));
    }
    for (pos, (idx, kv)) in sets.iter().enumerate() {
        if *idx != pos + 1 {
            return Err(ParseError::new(
                kv.line,
                1,
                format!("subset indices must run 1..{m} without gaps; found set_{idx}"),
            ));
        }
    }
    let subsets = sets
        .iter()
        .map(|(_, kv)| parse_subset(kv))
        .collect::<Result<Vec<_>, _>>()?;

    let gmetric = match &raw.gmetric {
        Some(kv) => parse_gmetric(kv)?,
        None => return Err(missing("key 'gmetric' in [space]")),
    };

    let map = match (&raw.map_expr, raw.branches.is_empty()) {
        (Some(kv), true) => {
            if raw.default_branch.is_some() {
                return Err(ParseError::new(
                    kv.line,
                    1,
                    "'default' only applies to piecewise maps",
                ));
            }
            MapBody::Single(parse_expr(
                &kv.value,
                &[Var::X],
                kv.line,
                kv.value_col,
            )?)
        }
        (None, false) => {
            let mut branches = raw.branches;
            branches.sort_by_key(|(idx, _)| *idx);
            for (pos, (idx, kv)) in branches.iter().enumerate() {
                if *idx != pos + 1 {
                    return Err(ParseError::new(
                        kv.line,
                        1,
                        format!("branch indices must run from 1 without gaps; found branch_{idx}"),
                    ));
                }
            }
            let parsed = branches
                .iter()
                .map(|(_, kv)| parse_branch(kv))
                .collect::<Result<Vec<_>, _>>()?;
            let default = match &raw.default_branch {
                Some(kv) => Some(parse_expr(&kv.value, &[Var::X], kv.line, kv.value_col)?),
                None => None,
            };
            MapBody::Piecewise(PiecewiseDef {
                branches: parsed,
                default,
            })
        }
        (Some(kv), false) => {
            return Err(ParseError::new(
                kv.line,
                1,
                "[map] must declare either 'expr' or branches, not both",
            ));
        }
        (None, true) => return Err(missing("[map] section with 'expr' or branches")),
    };

    let params = ClassParamsInput {
        alpha: raw.alpha.as_ref().map(parse_const_value).transpose()?,
        beta: raw.beta.as_ref().map(parse_const_value).transpose()?,
        gamma: raw.gamma.as_ref().map(parse_const_value).transpose()?,
    };

    let epsilons_kv = raw.epsilons.ok_or_else(|| missing("key 'epsilons' in [run]"))?;
    let mut epsilons = Vec::new();
    let mut offset = 0usize;
    for piece in epsilons_kv.value.split(',') {
        let col = epsilons_kv.value_col + offset;
        let v = parse_const_at(piece, epsilons_kv.line, col)?;
        if v <= 0.0 {
            return Err(ParseError::new(
                epsilons_kv.line,
                col + 1,
                format!("epsilon values must be positive, got {v}"),
            ));
        }
        epsilons.push(v);
        offset += piece.len() + 1;
    }

    let epsilon = match &raw.epsilon {
        Some(kv) => {
            let v = parse_const_value(kv)?;
            if v <= 0.0 {
                return Err(ParseError::new(
                    kv.line,
                    kv.value_col + 1,
                    format!("epsilon must be positive, got {v}"),
                ));
            }
            v
        }
        None => epsilons[0],
    };

    let x0 = raw.x0.as_ref().map(parse_const_value).transpose()?;

    let grid_h = match &raw.grid_h {
        Some(kv) => {
            let v = parse_const_value(kv)?;
            if v <= 0.0 {
                return Err(ParseError::new(
                    kv.line,
                    kv.value_col + 1,
                    format!("grid_h must be positive, got {v}"),
                ));
            }
            v
        }
        None => DEFAULT_GRID_H,
    };

    let max_points = match &raw.max_points {
        Some(kv) => {
            let v = parse_usize_value(kv)?;
            if v == 0 {
                return Err(ParseError::new(
                    kv.line,
                    kv.value_col + 1,
                    "max_points must be at least 1",
                ));
            }
            v
        }
        None => DEFAULT_MAX_POINTS,
    };

    let max_iter = match &raw.max_iter {
        Some(kv) => {
            let v = parse_usize_value(kv)?;
            if v == 0 {
                return Err(ParseError::new(
                    kv.line,
                    kv.value_col + 1,
                    "max_iter must be at least 1",
                ));
            }
            v
        }
        None => DEFAULT_MAX_ITER,
    };

    let divergence_factor = match &raw.divergence_factor {
        Some(kv) => {
            let v = parse_const_value(kv)?;
            if v <= 1.0 {
                return Err(ParseError::new(
                    kv.line,
                    kv.value_col + 1,
                    format!("divergence_factor must exceed 1, got {v}"),
                ));
            }
            v
        }
        None => DEFAULT_DIVERGENCE_FACTOR,
    };

    let seed = match &raw.seed {
        Some(kv) => parse_u64_value(kv)?,
        None => DEFAULT_SEED,
    };

    let budget = match &raw.budget {
        Some(kv) => {
            let v = parse_usize_value(kv)?;
            if v == 0 {
                return Err(ParseError::new(
                    kv.line,
                    kv.value_col + 1,
                    "budget must be at least 1",
                ));
            }
            v
        }
        None => DEFAULT_BUDGET,
    };

    Ok(ProblemSpec {
        m,
        subsets,
        gmetric,
        map,
        params,
        run: RunConfig {
            epsilons,
            epsilon,
            x0,
            grid_h,
            max_points,
            max_iter,
            divergence_factor,
            seed,
            budget,
        },
    })
}

// ---------------------------------------------------------------------------
// Canonical serialization
// ---------------------------------------------------------------------------

/// Canonical text form: fixed section/key order, defaults written out,
/// shortest-round-trip float formatting.
pub fn serialize_spec(spec: &ProblemSpec) -> String {
    let mut out = String::new();
    out.push_str("[space]\n");
    out.push_str(&format!("m = {}\n", spec.m));
    for (i, subset) in spec.subsets.iter().enumerate() {
        out.push_str(&format!("set_{} = {}\n", i + 1, subset.canonical()));
    }
    out.push_str(&format!("gmetric = {}\n", spec.gmetric.canonical()));

    out.push_str("\n[map]\n");
    match &spec.map {
        MapBody::Single(expr) => {
            out.push_str(&format!("expr = {}\n", expr.to_canonical()));
        }
        MapBody::Piecewise(pw) => {
            for (i, branch) in pw.branches.iter().enumerate() {
                out.push_str(&format!(
                    "branch_{} = {} -> {}\n",
                    i + 1,
                    branch.guard.canonical(),
                    branch.body.to_canonical()
                ));
            }
            if let Some(default) = &pw.default {
                out.push_str(&format!("default = {}\n", default.to_canonical()));
            }
        }
    }

    let p = &spec.params;
    if p.alpha.is_some() || p.beta.is_some() || p.gamma.is_some() {
        out.push_str("\n[params]\n");
        if let Some(v) = p.alpha {
            out.push_str(&format!("alpha = {v}\n"));
        }
        if let Some(v) = p.beta {
            out.push_str(&format!("beta = {v}\n"));
        }
        if let Some(v) = p.gamma {
            out.push_str(&format!("gamma = {v}\n"));
        }
    }

    let r = &spec.run;
    out.push_str("\n[run]\n");
    let eps = r
        .epsilons
        .iter()
        .map(|e| format!("{e}"))
        .collect::<Vec<_>>()
        .join(", ");
    out.push_str(&format!("epsilons = {eps}\n"));
    out.push_str(&format!("epsilon = {}\n", r.epsilon));
    if let Some(x0) = r.x0 {
        out.push_str(&format!("x0 = {x0}\n"));
    }
    out.push_str(&format!("grid_h = {}\n", r.grid_h));
    out.push_str(&format!("max_points = {}\n", r.max_points));
    out.push_str(&format!("max_iter = {}\n", r.max_iter));
    out.push_str(&format!("divergence_factor = {}\n", r.divergence_factor));
    out.push_str(&format!("seed = {}\n", r.seed));
    out.push_str(&format!("budget = {}\n", r.budget));
    out
}
