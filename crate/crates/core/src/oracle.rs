//! Exhaustive reference implementations for differential testing.
//!
//! Nothing here touches the search or pruning code; only model evaluation
//! and the fleet schedule evaluation are shared with the solver side.

use std::cmp::Ordering;

use rayon::prelude::*;
use thiserror::Error;

use crate::bench::fleet::{
    schedule_cost_time, Design, FleetObjectives, FleetParams, Package, Schedule,
};
use crate::model::{Assignment, CompiledExpr, ModelError, SystemModel};
use crate::pareto::{LexSolution, LexSolver, ObjectiveVector, ParetoFront, ParetoPoint};
use crate::solver::{SearchStatistics, SolveError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumerationBudget {
    pub max_combinations: u128,
}

impl Default for EnumerationBudget {
    fn default() -> Self {
        EnumerationBudget {
            max_combinations: 10_000_000,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("{needed} combinations exceed the enumeration budget of {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl From<OracleError> for SolveError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::Model(m) => SolveError::Model(m),
            // Surfaces as a search limit for callers of the LexSolver trait.
            OracleError::BudgetExceeded { budget, .. } => {
                SolveError::NodeLimitExceeded(budget.min(u64::MAX as u128) as u64)
            }
        }
    }
}

struct Evaluator<'m> {
    m: &'m SystemModel,
    constraints: Vec<(CompiledExpr, CompiledExpr)>,
    objectives: Vec<CompiledExpr>,
}

impl<'m> Evaluator<'m> {
    fn new(m: &'m SystemModel) -> Result<Self, ModelError> {
        let constraints = m
            .constraints()
            .iter()
            .map(|c| Ok((m.compile(&c.lhs)?, m.compile(&c.rhs)?)))
            .collect::<Result<_, ModelError>>()?;
        let objectives = m
            .objectives()
            .iter()
            .map(|o| m.compile(&o.expr))
            .collect::<Result<_, _>>()?;
        Ok(Evaluator {
            m,
            constraints,
            objectives,
        })
    }

    /// Canonical objective vector of a feasible assignment.
    fn feasible_objectives(&self, rows: &[usize]) -> Result<Option<Vec<f64>>, ModelError> {
        for ((l, r), c) in self.constraints.iter().zip(self.m.constraints()) {
            if !c.holds(l.eval(self.m, rows)?, r.eval(self.m, rows)?) {
                return Ok(None);
            }
        }
        let mut out = Vec::with_capacity(self.objectives.len());
        for (e, o) in self.objectives.iter().zip(self.m.objectives()) {
            out.push(o.direction.canonical(e.eval(self.m, rows)?));
        }
        Ok(Some(out))
    }

    fn ids(&self, rows: &[usize]) -> Vec<&'m str> {
        self.m
            .catalogs()
            .iter()
            .zip(rows)
            .map(|(c, &r)| c.components[r].id.as_str())
            .collect()
    }

    /// Visits every assignment whose first variable takes row `first`.
    fn for_each_with_first(
        &self,
        first: usize,
        f: &mut dyn FnMut(&[usize]) -> Result<(), ModelError>,
    ) -> Result<(), ModelError> {
        let sizes: Vec<usize> = self.m.catalogs().iter().map(|c| c.len()).collect();
        let mut rows = vec![0usize; sizes.len()];
        rows[0] = first;
        loop {
            f(&rows)?;
            let mut i = sizes.len() - 1;
            loop {
                if i == 0 {
                    return Ok(());
                }
                rows[i] += 1;
                if rows[i] < sizes[i] {
                    break;
                }
                rows[i] = 0;
                i -= 1;
            }
        }
    }
}

fn check_budget(m: &SystemModel, budget: EnumerationBudget) -> Result<(), OracleError> {
    let needed = m.combinations();
    if needed > budget.max_combinations {
        return Err(OracleError::BudgetExceeded {
            needed,
            budget: budget.max_combinations,
        });
    }
    Ok(())
}

fn lex(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

fn weakly_better_everywhere(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y)
}

/// Non-dominated archive; equal vectors keep the smallest id tuple.
#[derive(Default)]
struct Archive<'m> {
    points: Vec<(Vec<f64>, Vec<&'m str>, Vec<usize>)>,
}

impl<'m> Archive<'m> {
    fn offer(&mut self, obj: Vec<f64>, ids: Vec<&'m str>, rows: &[usize]) {
        for (o, i, r) in self.points.iter_mut() {
            if *o == obj {
                if ids < *i {
                    *i = ids;
                    *r = rows.to_vec();
                }
                return;
            }
            if weakly_better_everywhere(o, &obj) {
                return;
            }
        }
        self.points
            .retain(|(o, _, _)| !weakly_better_everywhere(&obj, o));
        self.points.push((obj, ids, rows.to_vec()));
    }

    fn absorb(&mut self, other: Archive<'m>) {
        for (o, i, r) in other.points {
            self.offer(o, i, &r);
        }
    }
}

/// Every Pareto-optimal objective vector with one representative
/// assignment each. An infeasible model yields an empty front.
pub fn brute_force_front(
    m: &SystemModel,
    budget: EnumerationBudget,
) -> Result<ParetoFront, OracleError> {
    brute_force_front_par(m, budget, 1)
}

/// [`brute_force_front`] split over `threads` workers by the first variable.
pub fn brute_force_front_par(
    m: &SystemModel,
    budget: EnumerationBudget,
    threads: usize,
) -> Result<ParetoFront, OracleError> {
    check_budget(m, budget)?;
    let ev = Evaluator::new(m)?;
    let part = |first: usize| -> Result<Archive, ModelError> {
        let mut arch = Archive::default();
        ev.for_each_with_first(first, &mut |rows| {
            if let Some(obj) = ev.feasible_objectives(rows)? {
                arch.offer(obj, ev.ids(rows), rows);
            }
            Ok(())
        })?;
        Ok(arch)
    };
    let n0 = m.catalogs()[0].len();
    let parts: Vec<Archive> = if threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool");
        pool.install(|| (0..n0).into_par_iter().map(part).collect::<Result<_, _>>())?
    } else {
        (0..n0).map(part).collect::<Result<_, _>>()?
    };
    let mut all = Archive::default();
    for p in parts {
        all.absorb(p);
    }
    all.points.sort_by(|a, b| lex(&a.0, &b.0));
    let mut front = ParetoFront::new();
    for (obj, _, rows) in all.points {
        front.push_unchecked(ParetoPoint::new(obj, Assignment::from_rows(m, &rows)));
    }
    Ok(front)
}

/// Lexicographic minimum of the canonical objective vector among feasible
/// assignments satisfying every cut; ties go to the lexicographically first
/// component-id tuple in model variable order.
pub fn brute_force_lex_cut(
    m: &SystemModel,
    cuts: &[ObjectiveVector],
    budget: EnumerationBudget,
) -> Result<Option<(Assignment, ObjectiveVector)>, OracleError> {
    check_budget(m, budget)?;
    let ev = Evaluator::new(m)?;
    let mut best: Option<(Vec<f64>, Vec<&str>, Vec<usize>)> = None;
    for first in 0..m.catalogs()[0].len() {
        ev.for_each_with_first(first, &mut |rows| {
            let Some(obj) = ev.feasible_objectives(rows)? else {
                return Ok(());
            };
            let cut_ok = cuts
                .iter()
                .all(|c| obj.iter().zip(&c.0).any(|(f, p)| f < p));
            if !cut_ok {
                return Ok(());
            }
            let ids = ev.ids(rows);
            let replace = match &best {
                None => true,
                Some((bo, bi, _)) => match lex(&obj, bo) {
                    Ordering::Less => true,
                    Ordering::Equal => ids < *bi,
                    Ordering::Greater => false,
                },
            };
            if replace {
                best = Some((obj, ids, rows.to_vec()));
            }
            Ok(())
        })?;
    }
    Ok(best.map(|(o, _, r)| (Assignment::from_rows(m, &r), ObjectiveVector(o))))
}

pub fn brute_force_lex(
    m: &SystemModel,
    budget: EnumerationBudget,
) -> Result<Option<(Assignment, ObjectiveVector)>, OracleError> {
    brute_force_lex_cut(m, &[], budget)
}

/// Enumeration as a [`LexSolver`], so the front loop can run on top of it.
#[derive(Debug, Clone, Default)]
pub struct BruteForceSolver {
    pub budget: EnumerationBudget,
}

impl LexSolver for BruteForceSolver {
    fn solve_lex(
        &self,
        model: &SystemModel,
        cuts: &[ObjectiveVector],
    ) -> Result<Option<LexSolution>, SolveError> {
        let start = std::time::Instant::now();
        let found = brute_force_lex_cut(model, cuts, self.budget)?;
        Ok(found.map(|(assignment, objectives)| LexSolution {
            assignment,
            objectives,
            stats: SearchStatistics {
                nodes_expanded: model.combinations().min(u64::MAX as u128) as u64,
                backtracks: 0,
                wall_time: start.elapsed(),
            },
        }))
    }
}

/// Every non-dominated `(makespan, cost)` of a fleet (or `(cost)` for the
/// cost-only variant), by enumerating each design per slot and each slot
/// per package, without symmetry breaking. Sorted lexicographically.
pub fn brute_force_fleet_front(
    designs: &[Design],
    packages: &[Package],
    params: &FleetParams,
    budget: EnumerationBudget,
) -> Result<Vec<Vec<f64>>, OracleError> {
    let n = params.fleet_size;
    let needed = (designs.len() as u128)
        .checked_pow(n as u32)
        .and_then(|d| {
            (n as u128)
                .checked_pow(packages.len() as u32)
                .and_then(|p| d.checked_mul(p))
        })
        .unwrap_or(u128::MAX);
    if needed > budget.max_combinations {
        return Err(OracleError::BudgetExceeded {
            needed,
            budget: budget.max_combinations,
        });
    }
    let mut found: Vec<Vec<f64>> = Vec::new();
    let mut sched = Schedule {
        slots: vec![0; n],
        packages: vec![0; packages.len()],
    };
    loop {
        loop {
            if let Ok((t, c)) = schedule_cost_time(&sched, designs, packages, params) {
                let v = match params.objectives {
                    FleetObjectives::Multi => vec![t, c],
                    FleetObjectives::Cost => vec![c],
                };
                if !found.iter().any(|o| weakly_better_everywhere(o, &v)) {
                    found.retain(|o| !weakly_better_everywhere(&v, o));
                    found.push(v);
                }
            }
            if !odometer(&mut sched.packages, n) {
                break;
            }
        }
        if !odometer(&mut sched.slots, designs.len()) {
            break;
        }
    }
    found.sort_by(|a, b| lex(a, b));
    Ok(found)
}

fn odometer(digits: &mut [usize], base: usize) -> bool {
    for d in digits.iter_mut().rev() {
        *d += 1;
        if *d < base {
            return true;
        }
        *d = 0;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Catalog, Component, Constraint, Expr, Objective};

    fn toy() -> SystemModel {
        let a = Catalog::new(
            "A",
            vec!["cost".into(), "perf".into()],
            vec![
                Component::new("a1", vec![1.0, 1.0]),
                Component::new("a2", vec![3.0, 4.0]),
            ],
        )
        .unwrap();
        let b = Catalog::new(
            "B",
            vec!["cost".into(), "perf".into()],
            vec![
                Component::new("b1", vec![1.0, 1.0]),
                Component::new("b2", vec![2.0, 1.0]),
            ],
        )
        .unwrap();
        SystemModel::new(
            vec![a, b],
            vec![],
            vec![
                Objective::minimize("cost", Expr::prop("A", "cost") + Expr::prop("B", "cost")),
                Objective::maximize("perf", Expr::prop("A", "perf") + Expr::prop("B", "perf")),
            ],
        )
        .unwrap()
    }

    #[test]
    fn toy_front() {
        let f = brute_force_front(&toy(), EnumerationBudget::default()).unwrap();
        assert_eq!(f.vectors(), vec![vec![2.0, -2.0], vec![4.0, -5.0]]);
        let par = brute_force_front_par(&toy(), EnumerationBudget::default(), 3).unwrap();
        assert_eq!(par, f);
    }

    #[test]
    fn infeasible_is_empty() {
        let m = toy();
        let never = Constraint::less_eq("never", Expr::prop("A", "cost"), Expr::Const(0.0));
        let m =
            SystemModel::new(m.catalogs().to_vec(), vec![never], m.objectives().to_vec()).unwrap();
        assert!(brute_force_front(&m, EnumerationBudget::default())
            .unwrap()
            .is_empty());
        assert!(brute_force_lex(&m, EnumerationBudget::default())
            .unwrap()
            .is_none());
    }

    #[test]
    fn ties_pick_first_ids() {
        let m = toy();
        let m = SystemModel::new(
            m.catalogs().to_vec(),
            vec![],
            vec![Objective::minimize("perf", Expr::prop("B", "perf"))],
        )
        .unwrap();
        let (a, _) = brute_force_lex(&m, EnumerationBudget::default())
            .unwrap()
            .unwrap();
        assert_eq!(a, Assignment::new().with("A", "a1").with("B", "b1"));
    }

    #[test]
    fn budget() {
        let err = brute_force_front(
            &toy(),
            EnumerationBudget {
                max_combinations: 3,
            },
        );
        assert_eq!(
            err,
            Err(OracleError::BudgetExceeded {
                needed: 4,
                budget: 3
            })
        );
    }
}
