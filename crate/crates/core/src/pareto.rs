//! Dominance, Pareto-front maintenance and the ε-constraint front loop.
//!
//! All vectors live in minimization space (see
//! [`objective_vector`](crate::model::objective_vector)). The front loop
//! repeatedly asks a lexicographic single-objective solver for a solution
//! that is not weakly dominated by any point found so far: for each front
//! point `p` the solver must return a solution with `f_i < p_i` for at least
//! one `i`. The lexicographic minimum of what remains is always globally
//! non-dominated, so every solve adds one new front vector and the loop ends
//! exactly when the cut problem becomes infeasible.

use std::cmp::Ordering;
use std::fmt;
use std::time::Duration;

use thiserror::Error;

use crate::model::Assignment;
use crate::solver::{SearchStatistics, SolveError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParetoError {
    #[error("objective vectors of length {0} and {1}")]
    LengthMismatch(usize, usize),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrontError {
    #[error("model has no feasible assignment")]
    InfeasibleModel,
    #[error("front exceeded {0} points")]
    PointLimit(usize),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Pareto(#[from] ParetoError),
}

/// Objective values in minimization space.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveVector(pub Vec<f64>);

impl ObjectiveVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// Lexicographic order by `f64::total_cmp`.
    pub fn lex_cmp(&self, other: &ObjectiveVector) -> Ordering {
        for (a, b) in self.0.iter().zip(&other.0) {
            match a.total_cmp(b) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        self.0.len().cmp(&other.0.len())
    }
}

impl From<Vec<f64>> for ObjectiveVector {
    fn from(v: Vec<f64>) -> Self {
        ObjectiveVector(v)
    }
}

impl fmt::Display for ObjectiveVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

/// `a` is no worse than `b` everywhere and strictly better somewhere.
pub fn dominates(a: &ObjectiveVector, b: &ObjectiveVector) -> Result<bool, ParetoError> {
    if a.len() != b.len() {
        return Err(ParetoError::LengthMismatch(a.len(), b.len()));
    }
    let mut strict = false;
    for (x, y) in a.0.iter().zip(&b.0) {
        if x > y {
            return Ok(false);
        }
        strict |= x < y;
    }
    Ok(strict)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParetoPoint {
    pub objectives: ObjectiveVector,
    pub assignment: Assignment,
    /// Values of partition handles this point was computed under.
    pub partition: Vec<(String, f64)>,
}

impl ParetoPoint {
    pub fn new(objectives: impl Into<ObjectiveVector>, assignment: Assignment) -> Self {
        ParetoPoint {
            objectives: objectives.into(),
            assignment,
            partition: Vec::new(),
        }
    }
}

/// A mutually non-dominated set with one representative per vector.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParetoFront {
    points: Vec<ParetoPoint>,
}

impl ParetoFront {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn points(&self) -> &[ParetoPoint] {
        &self.points
    }

    pub fn into_points(self) -> Vec<ParetoPoint> {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Adds `candidate` unless some member dominates or equals it; drops the
    /// members it dominates. Returns whether the candidate was kept.
    pub fn insert(&mut self, candidate: ParetoPoint) -> Result<bool, ParetoError> {
        for p in &self.points {
            if p.objectives.len() != candidate.objectives.len() {
                return Err(ParetoError::LengthMismatch(
                    p.objectives.len(),
                    candidate.objectives.len(),
                ));
            }
            if p.objectives == candidate.objectives
                || dominates(&p.objectives, &candidate.objectives)?
            {
                return Ok(false);
            }
        }
        let mut keep = Vec::with_capacity(self.points.len() + 1);
        for p in self.points.drain(..) {
            if !dominates(&candidate.objectives, &p.objectives)? {
                keep.push(p);
            }
        }
        keep.push(candidate);
        self.points = keep;
        Ok(true)
    }

    /// Appends without dominance checks. Used for unions of partitioned
    /// fronts, which are non-dominated only within a partition.
    pub(crate) fn push_unchecked(&mut self, p: ParetoPoint) {
        self.points.push(p);
    }

    /// Points sorted lexicographically by objective vector.
    pub fn sorted(&self) -> Vec<&ParetoPoint> {
        let mut v: Vec<&ParetoPoint> = self.points.iter().collect();
        v.sort_by(|a, b| a.objectives.lex_cmp(&b.objectives));
        v
    }

    /// The objective vectors, lexicographically sorted.
    pub fn vectors(&self) -> Vec<Vec<f64>> {
        self.sorted()
            .into_iter()
            .map(|p| p.objectives.0.clone())
            .collect()
    }

    /// Whether no member dominates another.
    pub fn is_mutually_non_dominated(&self) -> bool {
        self.points.iter().all(|a| {
            self.points
                .iter()
                .all(|b| !dominates(&a.objectives, &b.objectives).unwrap_or(true))
        })
    }
}

/// Non-dominated subset of the union; incumbents of `fa` win ties.
pub fn merge(fa: &ParetoFront, fb: &ParetoFront) -> Result<ParetoFront, ParetoError> {
    let mut out = fa.clone();
    for p in fb.points() {
        out.insert(p.clone())?;
    }
    Ok(out)
}

/// A solution of one lexicographic solve.
#[derive(Debug, Clone, PartialEq)]
pub struct LexSolution {
    pub assignment: Assignment,
    pub objectives: ObjectiveVector,
    pub stats: SearchStatistics,
}

/// Single-objective lexicographic solve with non-domination cuts: every
/// vector in `cuts` requires the solution to be strictly better in at least
/// one coordinate.
pub trait LexSolver: Sync {
    fn solve_lex(
        &self,
        model: &crate::model::SystemModel,
        cuts: &[ObjectiveVector],
    ) -> Result<Option<LexSolution>, SolveError>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    /// Worker threads for independent subproblems; 1 is the deterministic
    /// reference mode.
    pub threads: usize,
    /// Abort when a front grows past this many points.
    pub max_points: Option<usize>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            threads: 1,
            max_points: None,
        }
    }
}

/// Totals over the solves of one front computation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrontStatistics {
    pub solves: usize,
    pub nodes_expanded: u64,
    pub backtracks: u64,
    pub wall_time: Duration,
}

impl FrontStatistics {
    fn absorb(&mut self, s: &SearchStatistics) {
        self.solves += 1;
        self.nodes_expanded += s.nodes_expanded;
        self.backtracks += s.backtracks;
        self.wall_time += s.wall_time;
    }
}

pub fn compute_front(
    m: &crate::model::SystemModel,
    solver: &dyn LexSolver,
    cfg: &EngineConfig,
) -> Result<ParetoFront, FrontError> {
    compute_front_traced(m, solver, cfg).map(|(f, _)| f)
}

/// [`compute_front`] that also reports solver statistics.
pub fn compute_front_traced(
    m: &crate::model::SystemModel,
    solver: &dyn LexSolver,
    cfg: &EngineConfig,
) -> Result<(ParetoFront, FrontStatistics), FrontError> {
    let mut front = ParetoFront::new();
    let mut cuts: Vec<ObjectiveVector> = Vec::new();
    let mut stats = FrontStatistics::default();
    loop {
        let found = solver.solve_lex(m, &cuts)?;
        let Some(sol) = found else {
            stats.solves += 1;
            break;
        };
        stats.absorb(&sol.stats);
        cuts.push(sol.objectives.clone());
        front.insert(ParetoPoint::new(sol.objectives, sol.assignment))?;
        if let Some(limit) = cfg.max_points {
            if front.len() > limit {
                return Err(FrontError::PointLimit(limit));
            }
        }
    }
    if front.is_empty() {
        return Err(FrontError::InfeasibleModel);
    }
    Ok((front, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(x: &[f64]) -> ObjectiveVector {
        ObjectiveVector(x.to_vec())
    }

    fn pt(x: &[f64]) -> ParetoPoint {
        ParetoPoint::new(v(x), Assignment::new())
    }

    #[test]
    fn dominance_examples() {
        assert!(dominates(&v(&[1.0, 2.0]), &v(&[1.0, 3.0])).unwrap());
        assert!(!dominates(&v(&[1.0, 2.0]), &v(&[2.0, 1.0])).unwrap());
        assert!(!dominates(&v(&[2.0, 1.0]), &v(&[1.0, 2.0])).unwrap());
        assert!(!dominates(&v(&[1.0, 2.0]), &v(&[1.0, 2.0])).unwrap());
        assert_eq!(
            dominates(&v(&[1.0]), &v(&[1.0, 2.0])),
            Err(ParetoError::LengthMismatch(1, 2))
        );
    }

    #[test]
    fn insert_examples() {
        let mut f = ParetoFront::new();
        f.insert(pt(&[1.0, 3.0])).unwrap();
        f.insert(pt(&[3.0, 1.0])).unwrap();
        let mut g = f.clone();
        assert!(g.insert(pt(&[2.0, 2.0])).unwrap());
        assert_eq!(
            g.vectors(),
            vec![vec![1.0, 3.0], vec![2.0, 2.0], vec![3.0, 1.0]]
        );
        let mut g = f.clone();
        g.insert(pt(&[0.0, 0.0])).unwrap();
        assert_eq!(g.vectors(), vec![vec![0.0, 0.0]]);
        let mut g = ParetoFront::new();
        g.insert(pt(&[1.0, 3.0])).unwrap();
        assert!(!g.insert(pt(&[1.0, 3.0])).unwrap());
        assert_eq!(g.len(), 1);
    }

    #[test]
    fn merge_examples() {
        let mut a = ParetoFront::new();
        a.insert(pt(&[1.0, 3.0])).unwrap();
        let mut b = ParetoFront::new();
        b.insert(pt(&[3.0, 1.0])).unwrap();
        assert_eq!(merge(&a, &b).unwrap().len(), 2);
        let mut a = ParetoFront::new();
        a.insert(pt(&[1.0, 1.0])).unwrap();
        let mut b = ParetoFront::new();
        b.insert(pt(&[2.0, 2.0])).unwrap();
        assert_eq!(merge(&a, &b).unwrap().vectors(), vec![vec![1.0, 1.0]]);
        let mut b = ParetoFront::new();
        b.insert(pt(&[5.0, 5.0])).unwrap();
        assert_eq!(
            merge(&ParetoFront::new(), &b).unwrap().vectors(),
            vec![vec![5.0, 5.0]]
        );
    }

    fn vec3() -> impl Strategy<Value = ObjectiveVector> {
        prop::collection::vec(0i32..4, 3)
            .prop_map(|x| v(&x.iter().map(|&i| i as f64).collect::<Vec<_>>()))
    }

    proptest! {
        #[test]
        fn dominance_is_strict_partial_order(a in vec3(), b in vec3(), c in vec3()) {
            prop_assert!(!dominates(&a, &a).unwrap());
            if dominates(&a, &b).unwrap() {
                prop_assert!(!dominates(&b, &a).unwrap());
                if dominates(&b, &c).unwrap() {
                    prop_assert!(dominates(&a, &c).unwrap());
                }
            }
        }

        #[test]
        fn insert_keeps_front_non_dominated(xs in prop::collection::vec(vec3(), 0..40)) {
            let mut f = ParetoFront::new();
            for x in &xs {
                f.insert(ParetoPoint::new(x.clone(), Assignment::new())).unwrap();
                prop_assert!(f.is_mutually_non_dominated());
            }
            // every input is covered by some member
            for x in &xs {
                prop_assert!(f.points().iter().any(|p| p.objectives == *x || dominates(&p.objectives, x).unwrap()));
            }
        }
    }
}
