//! Picard iteration toward epsilon-fixed points.
//!
//! The displacement of a point is Delta(x) = G(x,Tx,Tx) + G(Tx,x,x); a
//! point is an epsilon-fixed point when Delta(x) < epsilon (strict). The
//! solver iterates x_{n+1} = T(x_n) and records the displacement sequence,
//! its decay ratios, and optionally the theorem-derived iteration bound.

use crate::error::Fault;
use crate::ops::{apply_map, CyclicMap};
use crate::space::{derived_metric, is_positive_real, point_on_domain, GSpace, DEFAULT_TOL};
use serde::Serialize;
use std::io::{self, Write};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveConfig {
    pub epsilon: f64,
    pub x0: f64,
    pub max_iter: usize,
    pub divergence_factor: f64,
}

impl SolveConfig {
    pub fn new(epsilon: f64, x0: f64) -> Self {
        SolveConfig {
            epsilon,
            x0,
            max_iter: 1_000_000,
            divergence_factor: 1000.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveOutcome {
    /// Some Delta_n fell below epsilon.
    Hit,
    /// max_iter displacements were computed without a hit.
    Exhausted,
    /// Delta_n exceeded divergence_factor * Delta_0.
    Diverged,
}

/// Record of one Picard run. `iterates` always extends `k` entries past the
/// last measured displacement, so `displacements[n]` compares `iterates[n]`
/// with `iterates[n + k]`.
#[derive(Clone, Debug)]
pub struct SolveTrace {
    pub k: usize,
    pub epsilon: f64,
    pub iterates: Vec<f64>,
    pub displacements: Vec<f64>,
    /// decay_ratios[n] = Delta_{n+1} / Delta_n.
    pub decay_ratios: Vec<f64>,
    pub hit_index: Option<usize>,
    pub outcome: SolveOutcome,
    pub bound: Option<IterationBound>,
}

impl SolveTrace {
    pub fn with_bound(mut self, bound: IterationBound) -> Self {
        self.bound = Some(bound);
        self
    }

    /// The iterate that achieved the hit, when there is one.
    pub fn hit_iterate(&self) -> Option<f64> {
        self.hit_index.map(|n| self.iterates[n])
    }

    /// Plot-ready CSV: `n,x_n,delta_n,ratio_n`, one row per measured
    /// displacement; the final row's ratio column is empty.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "n,x_n,delta_n,ratio_n")?;
        for (n, delta) in self.displacements.iter().enumerate() {
            match self.decay_ratios.get(n) {
                Some(r) => writeln!(w, "{},{},{},{}", n, self.iterates[n], delta, r)?,
                None => writeln!(w, "{},{},{},", n, self.iterates[n], delta)?,
            }
        }
        Ok(())
    }
}

/// Smallest n with rate^n * delta0 < epsilon, computed by repeated
/// multiplication so the count matches what a geometric envelope actually
/// does in floating point.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct IterationBound {
    pub rate: f64,
    pub delta0: f64,
    pub epsilon: f64,
    pub n_star: usize,
}

/// Displacement Delta(x) = G(x,Tx,Tx) + G(Tx,x,x) = d_G(x, Tx).
pub fn displacement(space: &GSpace, map: &CyclicMap, x: f64) -> Result<f64, Fault> {
    let tx = apply_map(map, x)?;
    derived_metric(space, x, tx)
}

/// Iterate x_{n+1} = T(x_n) until Delta_n < epsilon, divergence, or
/// exhaustion. The orbit is exact: points are never snapped to a grid.
pub fn picard_solve(
    space: &GSpace,
    map: &CyclicMap,
    config: &SolveConfig,
) -> Result<SolveTrace, Fault> {
    power_solve(space, map, 1, config)
}

/// Like [`picard_solve`] but measures displacement k steps apart:
/// Delta^k_n = d_G(T^n x, T^{n+k} x). A hit at n makes T^n x an
/// epsilon-fixed point of T^k.
pub fn power_solve(
    space: &GSpace,
    map: &CyclicMap,
    k: usize,
    config: &SolveConfig,
) -> Result<SolveTrace, Fault> {
    if k == 0 {
        return Err(Fault::parameter("power_solve requires k >= 1"));
    }
    if !is_positive_real(config.epsilon) {
        return Err(Fault::parameter(format!(
            "epsilon must be a positive real, got {}",
            config.epsilon
        )));
    }
    if config.max_iter == 0 {
        return Err(Fault::parameter("max_iter must be at least 1"));
    }
    let factor_ok = config.divergence_factor.is_finite() && config.divergence_factor > 1.0;
    if !factor_ok {
        return Err(Fault::parameter(format!(
            "divergence_factor must exceed 1, got {}",
            config.divergence_factor
        )));
    }
    if !point_on_domain(space, config.x0, DEFAULT_TOL)? {
        return Err(Fault::StartOutsideDomain { x0: config.x0 });
    }

    let mut iterates = vec![config.x0];
    let mut displacements: Vec<f64> = Vec::new();
    let mut decay_ratios = Vec::new();
    let mut hit_index = None;
    let outcome;

    let mut n = 0usize;
    loop {
        while iterates.len() <= n + k {
            let x = *iterates.last().expect("nonempty orbit");
            let next = apply_map(map, x).map_err(|f| match f {
                Fault::UnmatchedPoint { x } => Fault::OrbitUnmatched {
                    index: iterates.len() - 1,
                    x,
                },
                other => other,
            })?;
            iterates.push(next);
        }
        let delta = derived_metric(space, iterates[n], iterates[n + k])?;
        displacements.push(delta);
        if n >= 1 {
            // safe: a zero previous displacement would already have hit
            decay_ratios.push(delta / displacements[n - 1]);
        }
        if delta < config.epsilon {
            hit_index = Some(n);
            outcome = SolveOutcome::Hit;
            break;
        }
        if delta > config.divergence_factor * displacements[0] {
            outcome = SolveOutcome::Diverged;
            break;
        }
        if n + 1 >= config.max_iter {
            outcome = SolveOutcome::Exhausted;
            break;
        }
        n += 1;
    }

    Ok(SolveTrace {
        k,
        epsilon: config.epsilon,
        iterates,
        displacements,
        decay_ratios,
        hit_index,
        outcome,
        bound: None,
    })
}

/// Smallest n >= 0 with rate^n * delta0 < epsilon. Exact by iterated
/// multiplication; no logarithm rounding hazards.
pub fn iteration_bound(delta0: f64, epsilon: f64, rate: f64) -> Result<IterationBound, Fault> {
    if !is_positive_real(epsilon) {
        return Err(Fault::parameter(format!(
            "epsilon must be a positive real, got {epsilon}"
        )));
    }
    let delta0_ok = delta0.is_finite() && delta0 >= 0.0;
    if !delta0_ok {
        return Err(Fault::parameter(format!(
            "delta0 must be a nonnegative real, got {delta0}"
        )));
    }
    let rate_ok = rate > 0.0 && rate < 1.0;
    if !rate_ok {
        return Err(Fault::parameter(format!(
            "rate must lie strictly inside (0, 1), got {rate}"
        )));
    }
    let mut n = 0usize;
    let mut value = delta0;
    while value >= epsilon {
        value *= rate;
        n += 1;
        // rates within a whisker of 1 can stall in floating point
        if n > 100_000_000 {
            return Err(Fault::parameter(format!(
                "iteration bound did not resolve after {n} steps (rate {rate})"
            )));
        }
    }
    Ok(IterationBound {
        rate,
        delta0,
        epsilon,
        n_star: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;
    use crate::problem::parse_spec;

    fn setup(text: &str) -> (GSpace, CyclicMap) {
        let spec = parse_spec(text).unwrap();
        let space = spec.space().unwrap();
        let map = CyclicMap::from_spec(&spec).unwrap();
        (space, map)
    }

    #[test]
    fn displacement_on_example_3_8() {
        let (space, map) = setup(bundled::EXAMPLE_3_8);
        let d = displacement(&space, &map, 0.8).unwrap();
        assert!((d - 0.6).abs() < 1e-12, "got {d}");
    }

    #[test]
    fn displacement_of_a_fixed_point_is_zero() {
        let text = "[space]\nm = 1\nset_1 = [0, 1]\ngmetric = builder max scale 0.5\n\n[map]\nexpr = x\n\n[run]\nepsilons = 0.1\n";
        let (space, map) = setup(text);
        assert_eq!(displacement(&space, &map, 0.4).unwrap(), 0.0);
    }

    #[test]
    fn displacement_on_the_cyclic_sequence_example() {
        let (space, map) = setup(bundled::EXAMPLE_CYCLIC_SEQ);
        // T(1) = -1/5, so Delta = |1 - (-0.2)| = 1.2
        let d = displacement(&space, &map, 1.0).unwrap();
        assert!((d - 1.2).abs() < 1e-12, "got {d}");
    }

    #[test]
    fn picard_solve_hits_at_the_oracle_index() {
        // oracle: x_n = 0.8 / 4^n, Delta_n = 0.75 x_n; first Delta < 0.01 at n = 3
        let (space, map) = setup(bundled::EXAMPLE_3_8);
        let trace = picard_solve(&space, &map, &SolveConfig::new(0.01, 0.8)).unwrap();
        assert_eq!(trace.hit_index, Some(3));
        assert_eq!(trace.outcome, SolveOutcome::Hit);
        assert!((trace.hit_iterate().unwrap() - 0.0125).abs() < 1e-12);
        assert!((trace.displacements[3] - 0.009375).abs() < 1e-12);
        for (n, d) in trace.displacements.iter().enumerate() {
            let oracle = 0.75 * 0.8 / 4f64.powi(n as i32);
            assert!((d - oracle).abs() < 1e-12, "Delta_{n} = {d} vs {oracle}");
        }
    }

    #[test]
    fn start_already_inside_epsilon_hits_at_zero() {
        let (space, map) = setup(bundled::EXAMPLE_3_8);
        let trace = picard_solve(&space, &map, &SolveConfig::new(2.0, 0.8)).unwrap();
        assert_eq!(trace.hit_index, Some(0));
    }

    #[test]
    fn constant_displacement_exhausts_max_iter() {
        let text = "[space]\nm = 1\nset_1 = [0, 1000000]\ngmetric = builder max scale 0.5\n\n[map]\nexpr = x+1\n\n[run]\nepsilons = 0.5\n";
        let (space, map) = setup(text);
        let mut config = SolveConfig::new(0.5, 0.0);
        config.max_iter = 200;
        let trace = picard_solve(&space, &map, &config).unwrap();
        assert_eq!(trace.outcome, SolveOutcome::Exhausted);
        assert_eq!(trace.hit_index, None);
        assert_eq!(trace.displacements.len(), 200);
    }

    #[test]
    fn growing_displacement_reports_divergence() {
        let text = "[space]\nm = 1\nset_1 = [1, 10]\ngmetric = builder max scale 0.5\n\n[map]\nexpr = x*2\n\n[run]\nepsilons = 0.1\n";
        let (space, map) = setup(text);
        let mut config = SolveConfig::new(1e-9, 1.0);
        config.divergence_factor = 100.0;
        let trace = picard_solve(&space, &map, &config).unwrap();
        assert_eq!(trace.outcome, SolveOutcome::Diverged);
    }

    #[test]
    fn start_outside_the_domain_is_a_fault() {
        let (space, map) = setup(bundled::EXAMPLE_3_8);
        assert!(matches!(
            picard_solve(&space, &map, &SolveConfig::new(0.01, 3.0)),
            Err(Fault::StartOutsideDomain { .. })
        ));
    }

    #[test]
    fn hit_displacement_reproduces_under_recomputation() {
        let (space, map) = setup(bundled::EXAMPLE_3_8);
        let trace = picard_solve(&space, &map, &SolveConfig::new(0.01, 0.8)).unwrap();
        let x = trace.hit_iterate().unwrap();
        let d = displacement(&space, &map, x).unwrap();
        assert!(d < 0.01);
        assert_eq!(d, trace.displacements[trace.hit_index.unwrap()]);
    }

    #[test]
    fn power_solve_two_step_oracle() {
        // Delta^2_n = |x_n - x_{n+2}| = 0.9375 x_n; first below 0.1 at n = 2
        let (space, map) = setup(bundled::EXAMPLE_3_8);
        let trace = power_solve(&space, &map, 2, &SolveConfig::new(0.1, 0.8)).unwrap();
        assert_eq!(trace.hit_index, Some(2));
        assert!((trace.displacements[1] - 0.1875).abs() < 1e-12);
        assert!((trace.displacements[2] - 0.046875).abs() < 1e-12);
    }

    #[test]
    fn power_solve_with_k_one_matches_picard_exactly() {
        let (space, map) = setup(bundled::EXAMPLE_3_8);
        let config = SolveConfig::new(0.01, 0.8);
        let a = picard_solve(&space, &map, &config).unwrap();
        let b = power_solve(&space, &map, 1, &config).unwrap();
        assert_eq!(a.hit_index, b.hit_index);
        assert_eq!(a.iterates, b.iterates);
        assert_eq!(a.displacements, b.displacements);
        assert_eq!(a.decay_ratios, b.decay_ratios);
    }

    #[test]
    fn power_solve_identity_map_hits_immediately() {
        let text = "[space]\nm = 1\nset_1 = [0, 1]\ngmetric = builder max scale 0.5\n\n[map]\nexpr = x\n\n[run]\nepsilons = 0.1\n";
        let (space, map) = setup(text);
        for k in [1, 2, 5] {
            let trace = power_solve(&space, &map, k, &SolveConfig::new(0.1, 0.5)).unwrap();
            assert_eq!(trace.hit_index, Some(0));
            assert_eq!(trace.displacements[0], 0.0);
        }
    }

    #[test]
    fn iteration_bound_matches_hand_unrolled_geometry() {
        // 0.6 * 0.5^5 = 0.01875 >= 0.01; 0.6 * 0.5^6 = 0.009375 < 0.01
        let b = iteration_bound(0.6, 0.01, 0.5).unwrap();
        assert_eq!(b.n_star, 6);
    }

    #[test]
    fn iteration_bound_zero_when_already_below() {
        let b = iteration_bound(0.005, 0.01, 0.9).unwrap();
        assert_eq!(b.n_star, 0);
    }

    #[test]
    fn iteration_bound_rejects_rate_one() {
        assert!(matches!(
            iteration_bound(1.0, 0.1, 1.0),
            Err(Fault::Parameter { .. })
        ));
        assert!(matches!(
            iteration_bound(1.0, 0.1, 0.0),
            Err(Fault::Parameter { .. })
        ));
    }

    #[test]
    fn iteration_bound_invariant_holds() {
        for (delta0, eps, rate) in [
            (0.6, 0.01, 0.5),
            (1.0, 1e-6, 0.25),
            (5.0, 0.9, 0.99),
            (0.0, 0.5, 0.5),
        ] {
            let b = iteration_bound(delta0, eps, rate).unwrap();
            let mut v = delta0;
            for _ in 0..b.n_star {
                v *= rate;
            }
            assert!(v < eps, "rate^n_star * delta0 = {v} >= {eps}");
            if b.n_star > 0 {
                let mut v = delta0;
                for _ in 0..b.n_star - 1 {
                    v *= rate;
                }
                assert!(v >= eps, "n_star not minimal");
            }
        }
    }

    #[test]
    fn displacements_shrink_monotonically_on_contractive_examples() {
        // asymptotic regularity, witnessed numerically: Delta_n never grows
        // and ends below every epsilon of interest
        for text in [bundled::EXAMPLE_3_8, bundled::EXAMPLE_4_15] {
            let (space, map) = setup(text);
            let trace = picard_solve(&space, &map, &SolveConfig::new(1e-6, 0.8)).unwrap();
            assert_eq!(trace.outcome, SolveOutcome::Hit);
            for w in trace.displacements.windows(2) {
                assert!(w[1] <= w[0], "displacement grew: {} -> {}", w[0], w[1]);
            }
            let last = trace.displacements.last().unwrap();
            for eps in [0.01, 0.05, 0.1, 0.3] {
                assert!(last < &eps);
            }
        }
    }

    #[test]
    fn orbit_leaving_the_branches_faults_with_the_iterate_index() {
        let text = "[space]\nm = 1\nset_1 = [0, 0.6)\ngmetric = builder max scale 0.5\n\n[map]\nbranch_1 = [0, 0.6) -> x+0.3\n\n[run]\nepsilons = 0.001\n";
        let (space, map) = setup(text);
        let err = picard_solve(&space, &map, &SolveConfig::new(0.001, 0.5)).unwrap_err();
        match err {
            Fault::OrbitUnmatched { index, x } => {
                assert_eq!(index, 1);
                assert!((x - 0.8).abs() < 1e-12);
            }
            other => panic!("unexpected fault: {other}"),
        }
    }

    #[test]
    fn csv_trace_has_one_row_per_displacement() {
        let (space, map) = setup(bundled::EXAMPLE_3_8);
        let trace = picard_solve(&space, &map, &SolveConfig::new(0.01, 0.8)).unwrap();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "n,x_n,delta_n,ratio_n");
        assert_eq!(lines.len(), 1 + trace.displacements.len());
        assert!(lines.last().unwrap().ends_with(','));
    }
}
