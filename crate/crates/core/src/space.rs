//! Point sets on the real line and G-metrics over them.
//!
//! A G-metric is a three-argument generalization of a metric. The default
//! construction here is `builder max scale 0.5`, i.e.
//! `G(x,y,z) = 0.5 * max(|x-y|, |y-z|, |x-z|)`, whose derived metric
//! `d_G(x,y) = G(x,y,y) + G(y,x,x)` collapses to the usual `|x-y|`.

use crate::error::{Fault, Point};
use crate::expr::{Bindings, Expr};

/// Absolute comparison tolerance used throughout; all domains are O(1).
pub const DEFAULT_TOL: f64 = 1e-9;

pub(crate) fn is_positive_real(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

/// A real interval with independently open/closed endpoints.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_open: bool,
    pub hi_open: bool,
}

impl Interval {
    pub fn closed(lo: f64, hi: f64) -> Self {
        Interval {
            lo,
            hi,
            lo_open: false,
            hi_open: false,
        }
    }

    /// Exact membership, honoring open endpoints.
    pub fn contains(&self, x: f64) -> bool {
        let above = if self.lo_open { x > self.lo } else { x >= self.lo };
        let below = if self.hi_open { x < self.hi } else { x <= self.hi };
        above && below
    }

    /// Distance from `x` to the closure of the interval.
    pub fn distance(&self, x: f64) -> f64 {
        if x < self.lo {
            self.lo - x
        } else if x > self.hi {
            x - self.hi
        } else {
            0.0
        }
    }

    /// True when the interval contains no points at all.
    pub fn is_empty(&self) -> bool {
        self.lo > self.hi || (self.lo == self.hi && (self.lo_open || self.hi_open))
    }

    pub fn canonical(&self) -> String {
        format!(
            "{}{}, {}{}",
            if self.lo_open { '(' } else { '[' },
            self.lo,
            self.hi,
            if self.hi_open { ')' } else { ']' },
        )
    }
}

/// One carrier subset X_i: either an interval or a truncated family of
/// generated points such as `{ 1/k | -1/(2*k) : k = 1..25 }`.
#[derive(Clone, Debug, PartialEq)]
pub enum RealSubset {
    Interval(Interval),
    FiniteFamily {
        generators: Vec<Expr>,
        k_min: i64,
        k_max: i64,
    },
}

impl RealSubset {
    pub fn canonical(&self) -> String {
        match self {
            RealSubset::Interval(iv) => iv.canonical(),
            RealSubset::FiniteFamily {
                generators,
                k_min,
                k_max,
            } => {
                let gens = generators
                    .iter()
                    .map(|g| g.to_canonical())
                    .collect::<Vec<_>>()
                    .join(" | ");
                format!("{{ {gens} : k = {k_min}..{k_max} }}")
            }
        }
    }
}

/// Shape of the builder G-metric: combine the three pairwise distances by
/// max or by sum.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GShape {
    Max,
    Sum,
}

#[derive(Clone, Debug, PartialEq)]
pub enum GMetricDef {
    Builder { shape: GShape, scale: f64 },
    /// Arbitrary expression in x, y, z. Must pass the axiom check on the
    /// working grid before use; the CLI pipeline enforces that.
    Custom(Expr),
}

impl GMetricDef {
    pub fn default_builder() -> Self {
        GMetricDef::Builder {
            shape: GShape::Max,
            scale: 0.5,
        }
    }

    pub fn canonical(&self) -> String {
        match self {
            GMetricDef::Builder { shape, scale } => {
                let shape = match shape {
                    GShape::Max => "max",
                    GShape::Sum => "sum",
                };
                format!("builder {shape} scale {scale}")
            }
            GMetricDef::Custom(e) => format!("custom {}", e.to_canonical()),
        }
    }
}

/// The carrier X_1..X_m together with its G-metric. `symmetric` is detected
/// at construction (builder metrics are symmetric by shape).
#[derive(Clone, Debug)]
pub struct GSpace {
    pub subsets: Vec<RealSubset>,
    pub gmetric: GMetricDef,
    pub symmetric: bool,
}

impl GSpace {
    pub fn new(subsets: Vec<RealSubset>, gmetric: GMetricDef) -> Result<GSpace, Fault> {
        let symmetric = match &gmetric {
            GMetricDef::Builder { .. } => true,
            GMetricDef::Custom(_) => {
                let probe = probe_points(&subsets)?;
                detect_symmetry(&gmetric, &probe)?
            }
        };
        Ok(GSpace {
            subsets,
            gmetric,
            symmetric,
        })
    }
}

/// Evaluate the space's G-metric at a triple.
pub fn eval_g(space: &GSpace, x: f64, y: f64, z: f64) -> Result<f64, Fault> {
    match &space.gmetric {
        GMetricDef::Builder { shape, scale } => {
            let dxy = (x - y).abs();
            let dyz = (y - z).abs();
            let dxz = (x - z).abs();
            let combined = match shape {
                GShape::Max => dxy.max(dyz).max(dxz),
                GShape::Sum => dxy + dyz + dxz,
            };
            Ok(scale * combined)
        }
        GMetricDef::Custom(expr) => expr
            .eval(&Bindings::for_xyz(x, y, z))
            .map_err(|failure| Fault::from_eval(failure, Point::Triple(x, y, z))),
    }
}

/// The derived metric d_G(x,y) = G(x,y,y) + G(y,x,x). For symmetric spaces
/// this equals 2 G(x,y,y).
pub fn derived_metric(space: &GSpace, x: f64, y: f64) -> Result<f64, Fault> {
    Ok(eval_g(space, x, y, y)? + eval_g(space, y, x, x)?)
}

/// Grid resolution and a hard cap on generated points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridPlan {
    pub h: f64,
    pub max_points: usize,
}

impl Default for GridPlan {
    fn default() -> Self {
        GridPlan {
            h: 0.01,
            max_points: 1_000_000,
        }
    }
}

/// Discretize one subset.
///
/// Intervals become arithmetic grids `lo + i*h`; an open left endpoint
/// starts one step inside, an open right endpoint excludes the boundary
/// point. Families evaluate their generators over the k-range, deduplicate,
/// and keep descending-magnitude order (stable).
pub fn discretize(subset: &RealSubset, plan: &GridPlan) -> Result<Vec<f64>, Fault> {
    if !is_positive_real(plan.h) {
        return Err(Fault::parameter(format!(
            "grid step must be a positive real, got {}",
            plan.h
        )));
    }
    match subset {
        RealSubset::Interval(iv) => {
            if iv.is_empty() {
                return Err(Fault::EmptyGrid { index: 0 });
            }
            if iv.lo == iv.hi {
                return Ok(vec![iv.lo]);
            }
            let span = iv.hi - iv.lo;
            let steps = (span / plan.h + 1e-9).floor();
            if !steps.is_finite() || steps >= usize::MAX as f64 {
                return Err(Fault::GridCapExceeded {
                    count: usize::MAX,
                    cap: plan.max_points,
                });
            }
            let i_max = steps as usize;
            let i_min = usize::from(iv.lo_open);
            if i_max >= i_min {
                let count = i_max - i_min + 1;
                if count > plan.max_points {
                    return Err(Fault::GridCapExceeded {
                        count,
                        cap: plan.max_points,
                    });
                }
            }
            let mut out = Vec::new();
            for i in i_min..=i_max {
                let x = iv.lo + (i as f64) * plan.h;
                if x > iv.hi + DEFAULT_TOL {
                    break;
                }
                if iv.hi_open && x >= iv.hi - DEFAULT_TOL {
                    break;
                }
                if iv.lo_open && x <= iv.lo + DEFAULT_TOL {
                    continue;
                }
                out.push(x);
            }
            if out.is_empty() {
                return Err(Fault::EmptyGrid { index: 0 });
            }
            Ok(out)
        }
        RealSubset::FiniteFamily {
            generators,
            k_min,
            k_max,
        } => {
            if k_max < k_min || generators.is_empty() {
                return Err(Fault::EmptyGrid { index: 0 });
            }
            let range = (k_max - k_min + 1) as usize;
            let count = generators.len().saturating_mul(range);
            if count > plan.max_points {
                return Err(Fault::GridCapExceeded {
                    count,
                    cap: plan.max_points,
                });
            }
            let mut out = Vec::with_capacity(count);
            for gen in generators {
                for k in *k_min..=*k_max {
                    let v = gen
                        .eval(&Bindings::for_k(k as f64))
                        .map_err(|f| Fault::from_eval(f, Point::Scalar(k as f64)))?;
                    out.push(v);
                }
            }
            out.sort_by(|a, b| b.abs().partial_cmp(&a.abs()).expect("finite values"));
            out.dedup();
            Ok(out)
        }
    }
}

/// Grids for all subsets of a space, in declaration order. Empty-grid
/// faults carry the (1-based) subset index.
pub fn domain_grids(space: &GSpace, plan: &GridPlan) -> Result<Vec<Vec<f64>>, Fault> {
    space
        .subsets
        .iter()
        .enumerate()
        .map(|(i, s)| {
            discretize(s, plan).map_err(|f| match f {
                Fault::EmptyGrid { .. } => Fault::EmptyGrid { index: i + 1 },
                other => other,
            })
        })
        .collect()
}

/// Sorted ascending union of per-subset grids, exact duplicates removed.
pub fn union_grid(grids: &[Vec<f64>]) -> Vec<f64> {
    let mut all: Vec<f64> = grids.iter().flatten().copied().collect();
    all.sort_by(f64::total_cmp);
    all.dedup();
    all
}

/// Is `x` in the subset, up to `tol`? Intervals use distance to the
/// closure; families use distance to their generated values.
pub fn subset_contains(
    subset: &RealSubset,
    subset_grid: &[f64],
    x: f64,
    tol: f64,
) -> bool {
    match subset {
        RealSubset::Interval(iv) => iv.distance(x) <= tol,
        RealSubset::FiniteFamily { .. } => {
            subset_grid.iter().any(|v| (v - x).abs() <= tol)
        }
    }
}

/// Is `x` in any subset of the space, up to the default tolerance?
/// Family values are regenerated on demand.
pub fn point_on_domain(space: &GSpace, x: f64, tol: f64) -> Result<bool, Fault> {
    for subset in &space.subsets {
        match subset {
            RealSubset::Interval(iv) => {
                if iv.distance(x) <= tol {
                    return Ok(true);
                }
            }
            family @ RealSubset::FiniteFamily { .. } => {
                let values = discretize(
                    family,
                    &GridPlan {
                        h: 1.0,
                        max_points: usize::MAX,
                    },
                )?;
                if values.iter().any(|v| (v - x).abs() <= tol) {
                    return Ok(true);
                }
            }
        }
    }
    Ok(false)
}

// Deterministic probe sample for symmetry detection: a few interior points
// per interval plus leading family values.
fn probe_points(subsets: &[RealSubset]) -> Result<Vec<f64>, Fault> {
    let mut pool = Vec::new();
    for subset in subsets {
        match subset {
            RealSubset::Interval(iv) => {
                if iv.is_empty() {
                    continue;
                }
                if iv.lo == iv.hi {
                    pool.push(iv.lo);
                    continue;
                }
                let span = iv.hi - iv.lo;
                for j in 0..8 {
                    pool.push(iv.lo + span * (2.0 * j as f64 + 1.0) / 16.0);
                }
            }
            family @ RealSubset::FiniteFamily { .. } => {
                let values = discretize(
                    family,
                    &GridPlan {
                        h: 1.0,
                        max_points: usize::MAX,
                    },
                )?;
                pool.extend(values.into_iter().take(8));
            }
        }
    }
    Ok(pool)
}

fn detect_symmetry(gmetric: &GMetricDef, probe: &[f64]) -> Result<bool, Fault> {
    let space = GSpace {
        subsets: Vec::new(),
        gmetric: gmetric.clone(),
        symmetric: false,
    };
    for &x in probe {
        for &y in probe {
            let a = eval_g(&space, x, y, y)?;
            let b = eval_g(&space, y, x, x)?;
            if (a - b).abs() > DEFAULT_TOL {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_expr, Var};

    fn default_space() -> GSpace {
        GSpace::new(
            vec![RealSubset::Interval(Interval::closed(0.0, 1.0))],
            GMetricDef::default_builder(),
        )
        .unwrap()
    }

    #[test]
    fn eval_g_zero_on_diagonal() {
        let s = default_space();
        assert_eq!(eval_g(&s, 0.0, 0.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn eval_g_builder_max_formula() {
        // 0.5 * max(0.4, 0.6, 1) = 0.5
        let s = default_space();
        let v = eval_g(&s, 0.0, 0.4, 1.0).unwrap();
        assert!((v - 0.5).abs() < 1e-15, "got {v}");
    }

    #[test]
    fn eval_g_symmetric_under_argument_reversal() {
        let s = default_space();
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..100 {
            let (a, b, c) = (next(), next(), next());
            assert_eq!(
                eval_g(&s, a, b, c).unwrap(),
                eval_g(&s, c, b, a).unwrap()
            );
        }
    }

    #[test]
    fn derived_metric_matches_absolute_difference() {
        let s = default_space();
        let v = derived_metric(&s, 0.8, 0.2).unwrap();
        assert!((v - 0.6).abs() < 1e-15, "got {v}");
        assert_eq!(derived_metric(&s, 0.37, 0.37).unwrap(), 0.0);
    }

    #[test]
    fn symmetric_space_halves_derived_metric() {
        let s = default_space();
        assert!(s.symmetric);
        for (x, y) in [(0.1, 0.9), (0.25, 0.3), (0.0, 1.0)] {
            let d = derived_metric(&s, x, y).unwrap();
            let g = eval_g(&s, x, y, y).unwrap();
            assert!((d - 2.0 * g).abs() <= 1e-15);
        }
    }

    #[test]
    fn custom_metric_symmetry_is_detected() {
        let asym = parse_expr("abs(x-y)+abs(x-z)", &[Var::X, Var::Y, Var::Z], 1, 0).unwrap();
        let space = GSpace::new(
            vec![RealSubset::Interval(Interval::closed(0.0, 1.0))],
            GMetricDef::Custom(asym),
        )
        .unwrap();
        // G(x,y,y) = 2|x-y| but G(y,x,x) = 2|x-y| as well; this particular
        // expression is symmetric in the probe sense.
        assert!(space.symmetric);

        let skew = parse_expr("abs(x-y)+x*0.001", &[Var::X, Var::Y, Var::Z], 1, 0).unwrap();
        let space = GSpace::new(
            vec![RealSubset::Interval(Interval::closed(0.0, 1.0))],
            GMetricDef::Custom(skew),
        )
        .unwrap();
        assert!(!space.symmetric);
    }

    #[test]
    fn discretize_open_left_interval() {
        let iv = RealSubset::Interval(Interval {
            lo: 0.0,
            hi: 0.8,
            lo_open: true,
            hi_open: false,
        });
        let grid = discretize(&iv, &GridPlan { h: 0.1, max_points: 1000 }).unwrap();
        assert_eq!(grid.len(), 8);
        assert!((grid[0] - 0.1).abs() < 1e-12);
        assert!((grid[7] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn discretize_keeps_closed_right_endpoint_despite_rounding() {
        let iv = RealSubset::Interval(Interval::closed(0.01, 0.5));
        let grid = discretize(&iv, &GridPlan { h: 0.01, max_points: 1000 }).unwrap();
        assert_eq!(grid.len(), 50);
        assert!((grid.last().unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn discretize_unit_fraction_family() {
        let gen = parse_expr("1/k", &[Var::K], 1, 0).unwrap();
        let fam = RealSubset::FiniteFamily {
            generators: vec![gen],
            k_min: 1,
            k_max: 4,
        };
        let grid = discretize(&fam, &GridPlan::default()).unwrap();
        assert_eq!(grid, vec![1.0, 0.5, 1.0 / 3.0, 0.25]);
    }

    #[test]
    fn discretize_degenerate_open_interval_is_empty_grid() {
        let iv = RealSubset::Interval(Interval {
            lo: 0.3,
            hi: 0.3,
            lo_open: true,
            hi_open: true,
        });
        assert!(matches!(
            discretize(&iv, &GridPlan::default()),
            Err(Fault::EmptyGrid { .. })
        ));
    }

    #[test]
    fn discretize_respects_point_cap() {
        let iv = RealSubset::Interval(Interval::closed(0.0, 1.0));
        let err = discretize(&iv, &GridPlan { h: 0.001, max_points: 100 }).unwrap_err();
        match err {
            Fault::GridCapExceeded { count, cap } => {
                assert_eq!(cap, 100);
                assert_eq!(count, 1001);
            }
            other => panic!("unexpected fault: {other}"),
        }
    }

    #[test]
    fn refining_the_grid_keeps_coarse_points() {
        let iv = RealSubset::Interval(Interval {
            lo: 0.0,
            hi: 0.8,
            lo_open: true,
            hi_open: false,
        });
        let coarse = discretize(&iv, &GridPlan { h: 0.1, max_points: 10_000 }).unwrap();
        let fine = discretize(&iv, &GridPlan { h: 0.05, max_points: 10_000 }).unwrap();
        for p in &coarse {
            assert!(fine.contains(p), "refinement dropped {p}");
        }
    }

    #[test]
    fn union_grid_deduplicates_coincident_points() {
        let a = vec![0.01, 0.02, 0.03];
        let b = vec![0.02, 0.03, 0.04];
        assert_eq!(union_grid(&[a, b]), vec![0.01, 0.02, 0.03, 0.04]);
    }
}
