//! Sample-based verification of the five G-metric axioms.
//!
//! Given a finite sample, each axiom is checked exhaustively over the
//! relevant tuples; G5's rectangle inequality quantifies over a fourth
//! point, so the full check is O(n^4) on precomputed tables.

use crate::error::Fault;
use crate::space::{eval_g, GSpace};
use serde::Serialize;

/// Witnesses kept per axiom; the total count is always reported.
const MAX_WITNESSES: usize = 8;

/// Guard against accidentally quadratic-memory samples (n^3 f64 table).
const MAX_SAMPLE: usize = 600;

#[derive(Clone, Debug, Serialize)]
pub struct AxiomViolation {
    /// The tuple that breaks the axiom: (x), (x,y), (x,y,z) or (x,y,z,a).
    pub points: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AxiomCheck {
    pub axiom: &'static str,
    pub checked: u64,
    pub pass: bool,
    pub violations: Vec<AxiomViolation>,
    pub total_violations: u64,
}

impl AxiomCheck {
    fn new(axiom: &'static str) -> Self {
        AxiomCheck {
            axiom,
            checked: 0,
            pass: true,
            violations: Vec::new(),
            total_violations: 0,
        }
    }

    fn record(&mut self, points: Vec<f64>, lhs: f64, rhs: f64) {
        self.pass = false;
        self.total_violations += 1;
        if self.violations.len() < MAX_WITNESSES {
            self.violations.push(AxiomViolation { points, lhs, rhs });
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AxiomReport {
    pub sample_size: usize,
    pub tol: f64,
    pub checks: Vec<AxiomCheck>,
    pub pass: bool,
}

impl AxiomReport {
    pub fn check(&self, axiom: &str) -> &AxiomCheck {
        self.checks
            .iter()
            .find(|c| c.axiom == axiom)
            .expect("known axiom name")
    }
}

/// Check G1..G5 over every relevant tuple drawn from `sample`.
///
/// * G1: G(x,x,x) = 0
/// * G2: 0 < G(x,x,y) for x != y
/// * G3: G(x,x,y) <= G(x,y,z) for z != y
/// * G4: G is invariant under all permutations of its arguments
/// * G5: G(x,y,z) <= G(x,a,a) + G(a,y,z) for every a
pub fn check_axioms(space: &GSpace, sample: &[f64], tol: f64) -> Result<AxiomReport, Fault> {
    let pts: Vec<f64> = sample.to_vec();
    let n = pts.len();
    let mut distinct = pts.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Fault::SampleTooSmall);
    }
    if n > MAX_SAMPLE {
        return Err(Fault::parameter(format!(
            "axiom sample of {n} points exceeds the supported maximum of {MAX_SAMPLE}"
        )));
    }

    // g[(i*n + j)*n + l] = G(p_i, p_j, p_l)
    let mut g = vec![0.0f64; n * n * n];
    for i in 0..n {
        for j in 0..n {
            for l in 0..n {
                g[(i * n + j) * n + l] = eval_g(space, pts[i], pts[j], pts[l])?;
            }
        }
    }
    let gv = |i: usize, j: usize, l: usize| g[(i * n + j) * n + l];

    let mut g1 = AxiomCheck::new("G1");
    for (i, &p) in pts.iter().enumerate() {
        g1.checked += 1;
        let v = gv(i, i, i);
        if v.abs() > tol {
            g1.record(vec![p], v, 0.0);
        }
    }

    let mut g2 = AxiomCheck::new("G2");
    for i in 0..n {
        for j in 0..n {
            if pts[i] == pts[j] {
                continue;
            }
            g2.checked += 1;
            let v = gv(i, i, j);
            if v <= tol {
                g2.record(vec![pts[i], pts[i], pts[j]], v, 0.0);
            }
        }
    }

    let mut g3 = AxiomCheck::new("G3");
    for i in 0..n {
        for j in 0..n {
            let lhs = gv(i, i, j);
            for l in 0..n {
                if pts[l] == pts[j] {
                    continue;
                }
                g3.checked += 1;
                let rhs = gv(i, j, l);
                if lhs > rhs + tol {
                    g3.record(vec![pts[i], pts[j], pts[l]], lhs, rhs);
                }
            }
        }
    }

    let mut g4 = AxiomCheck::new("G4");
    for i in 0..n {
        for j in i..n {
            for l in j..n {
                g4.checked += 1;
                let perms = [
                    gv(i, j, l),
                    gv(i, l, j),
                    gv(j, i, l),
                    gv(j, l, i),
                    gv(l, i, j),
                    gv(l, j, i),
                ];
                let mut lo = perms[0];
                let mut hi = perms[0];
                for &p in &perms[1..] {
                    lo = lo.min(p);
                    hi = hi.max(p);
                }
                if hi - lo > tol {
                    g4.record(vec![pts[i], pts[j], pts[l]], hi, lo);
                }
            }
        }
    }

    // G5 via min over the interposed point: a violation exists iff
    // G(x,y,z) exceeds min_a [G(x,a,a) + G(a,y,z)].
    let mut g5 = AxiomCheck::new("G5");
    let mut pair = vec![0.0f64; n * n]; // pair[i*n + a] = G(p_i, p_a, p_a)
    for i in 0..n {
        for a in 0..n {
            pair[i * n + a] = gv(i, a, a);
        }
    }
    for j in 0..n {
        for l in 0..n {
            for i in 0..n {
                g5.checked += 1;
                let target = gv(i, j, l);
                let mut best = f64::INFINITY;
                let mut best_a = 0;
                for a in 0..n {
                    let v = pair[i * n + a] + gv(a, j, l);
                    if v < best {
                        best = v;
                        best_a = a;
                    }
                }
                if target > best + tol {
                    g5.record(
                        vec![pts[i], pts[j], pts[l], pts[best_a]],
                        target,
                        best,
                    );
                }
            }
        }
    }

    let checks = vec![g1, g2, g3, g4, g5];
    let pass = checks.iter().all(|c| c.pass);
    Ok(AxiomReport {
        sample_size: n,
        tol,
        checks,
        pass,
    })
}
