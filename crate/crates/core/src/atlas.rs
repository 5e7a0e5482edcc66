//! Enumeration of the epsilon-fixed-point set F_eps on a discretized
//! domain, its diameter, and the closed-form diameter bounds.
//!
//! Two diameters are measured and both must stay under the bound: the
//! pairwise sup of d_G(x,y) and the triple sup of G(x,y,z). Per class the
//! bounds are 2*eps*(1+alpha)/(1-2*alpha) (bracketed), 2*eps*(1+eta)/(1-eta)
//! (disjunctive), and eps*(2+alpha)/(1-alpha) (displacement form).

use crate::engine::displacement;
use crate::error::Fault;
use crate::ops::{CyclicMap, ClassParams, OperatorClass, ADMISSIBILITY_MARGIN};
use crate::space::{
    derived_metric, eval_g, is_positive_real, union_grid, GMetricDef, GSpace, DEFAULT_TOL,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Grid points whose displacement is strictly below epsilon.
#[derive(Clone, Debug, Serialize)]
pub struct FixedPointSet {
    pub epsilon: f64,
    /// Sorted ascending, deduplicated.
    pub members: Vec<f64>,
    /// Size of the union grid the members were drawn from.
    pub grid_size: usize,
}

/// Enumerate F_eps over the union of the subset grids.
pub fn enumerate_fset(
    space: &GSpace,
    map: &CyclicMap,
    epsilon: f64,
    grids: &[Vec<f64>],
) -> Result<FixedPointSet, Fault> {
    if !is_positive_real(epsilon) {
        return Err(Fault::parameter(format!(
            "epsilon must be a positive real, got {epsilon}"
        )));
    }
    let grid = union_grid(grids);
    if grid.is_empty() {
        return Err(Fault::EmptyDomain);
    }
    let mut members = Vec::new();
    for &x in &grid {
        if displacement(space, map, x)? < epsilon {
            members.push(x);
        }
    }
    Ok(FixedPointSet {
        epsilon,
        members,
        grid_size: grid.len(),
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Diameters {
    /// sup of G(x,y,z) over member triples.
    pub delta_triple: f64,
    /// sup of d_G(x,y) over member pairs.
    pub delta_pair: f64,
    /// True when the triple sup is a sampled lower bound rather than exact.
    pub approximate: bool,
}

/// Measure both diameters of the set.
///
/// For builder metrics both suprema are attained at the extreme members,
/// so they are computed exactly from min and max. Custom metrics get an
/// exhaustive sweep while member_count^3 fits `triple_budget`, and a
/// seeded sampled lower bound (flagged approximate) beyond that.
pub fn set_diameter(
    space: &GSpace,
    fset: &FixedPointSet,
    triple_budget: usize,
    seed: u64,
) -> Result<Diameters, Fault> {
    let members = &fset.members;
    if members.is_empty() {
        return Err(Fault::EmptySet);
    }
    if members.len() == 1 {
        return Ok(Diameters {
            delta_triple: 0.0,
            delta_pair: 0.0,
            approximate: false,
        });
    }
    // members are sorted ascending
    let lo = members[0];
    let hi = *members.last().expect("nonempty");

    if matches!(space.gmetric, GMetricDef::Builder { .. }) {
        // On the line, builder metrics are monotone in the pairwise
        // distances, so the extremes realize both suprema (for the sum
        // shape any middle point gives the same triple value).
        return Ok(Diameters {
            delta_triple: eval_g(space, lo, hi, hi)?.max(eval_g(space, lo, lo, hi)?),
            delta_pair: derived_metric(space, lo, hi)?,
            approximate: false,
        });
    }

    let n = members.len();
    let triples = (n as u128).pow(3);
    let mut delta_triple = 0.0f64;
    let mut delta_pair = 0.0f64;
    let approximate = triples > triple_budget as u128;
    if !approximate {
        for &x in members {
            for &y in members {
                for &z in members {
                    delta_triple = delta_triple.max(eval_g(space, x, y, z)?);
                }
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                delta_pair = delta_pair.max(derived_metric(space, members[i], members[j])?);
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..triple_budget {
            let x = members[rng.gen_range(0..n)];
            let y = members[rng.gen_range(0..n)];
            let z = members[rng.gen_range(0..n)];
            delta_triple = delta_triple.max(eval_g(space, x, y, z)?);
            delta_pair = delta_pair.max(derived_metric(space, x, y)?);
        }
    }
    Ok(Diameters {
        delta_triple,
        delta_pair,
        approximate,
    })
}

/// Closed-form diameter bound for the classes that have one.
pub fn diameter_bound(
    class: OperatorClass,
    params: &ClassParams,
    epsilon: f64,
) -> Result<f64, Fault> {
    if !is_positive_real(epsilon) {
        return Err(Fault::parameter(format!(
            "epsilon must be a positive real, got {epsilon}"
        )));
    }
    let a = params.alpha;
    match class {
        OperatorClass::GMohseni => {
            if !class.constant_admissible(a) {
                return Err(Fault::parameter(format!(
                    "alpha = {a} is outside (0, 1/2); the bound has a pole at 1/2"
                )));
            }
            Ok(2.0 * epsilon * (1.0 + a) / (1.0 - 2.0 * a))
        }
        OperatorClass::GMohseniSemi => {
            if !class.constant_admissible(a) {
                return Err(Fault::parameter(format!(
                    "alpha = {a} is outside (0, 1/2)"
                )));
            }
            Ok(epsilon * (2.0 + a) / (1.0 - a))
        }
        OperatorClass::GMohsenialhosseini => {
            params.validate_disjunctive()?;
            let eta = params.eta();
            if eta > 1.0 - ADMISSIBILITY_MARGIN {
                return Err(Fault::parameter(format!(
                    "eta = {eta} leaves no room under the pole at 1"
                )));
            }
            Ok(2.0 * epsilon * (1.0 + eta) / (1.0 - eta))
        }
        OperatorClass::GAlphaPlain | OperatorClass::GChatterjea => Err(Fault::UnsupportedClass {
            class: class.label(),
            reason: "no diameter bound is available for this class",
        }),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DiameterReport {
    pub epsilon: f64,
    pub class: OperatorClass,
    pub params: ClassParams,
    pub bound: f64,
    pub member_count: usize,
    pub delta_pair: f64,
    pub delta_triple: f64,
    /// Sampled rather than exact diameters (custom metric over budget).
    pub approximate: bool,
    /// Empty F_eps: the bound holds vacuously.
    pub vacuous: bool,
    pub pass: bool,
}

/// Enumerate F_eps, measure its diameters, and compare with the class
/// bound. An empty set passes vacuously and is flagged.
#[allow(clippy::too_many_arguments)]
pub fn verify_diameter(
    space: &GSpace,
    map: &CyclicMap,
    class: OperatorClass,
    params: &ClassParams,
    epsilon: f64,
    grids: &[Vec<f64>],
    triple_budget: usize,
    seed: u64,
) -> Result<DiameterReport, Fault> {
    let bound = diameter_bound(class, params, epsilon)?;
    let fset = enumerate_fset(space, map, epsilon, grids)?;
    if fset.members.is_empty() {
        return Ok(DiameterReport {
            epsilon,
            class,
            params: *params,
            bound,
            member_count: 0,
            delta_pair: 0.0,
            delta_triple: 0.0,
            approximate: false,
            vacuous: true,
            pass: true,
        });
    }
    let diameters = set_diameter(space, &fset, triple_budget, seed)?;
    let pass = diameters.delta_pair <= bound + DEFAULT_TOL
        && diameters.delta_triple <= bound + DEFAULT_TOL;
    Ok(DiameterReport {
        epsilon,
        class,
        params: *params,
        bound,
        member_count: fset.members.len(),
        delta_pair: diameters.delta_pair,
        delta_triple: diameters.delta_triple,
        approximate: diameters.approximate,
        vacuous: false,
        pass,
    })
}
