//! Backtracking tree search for the lexicographic single-objective problem.
//!
//! Each node holds the live rows of every variable. Interval bounds of every
//! constraint side and objective are computed from the live rows, and rows
//! that cannot satisfy a constraint, a non-domination cut or the incumbent
//! bound are filtered out until a fixpoint is reached. A constraint
//! `L <= R` rejects a row when `lo(L) > hi(R)`; a cut `p` rejects a row when
//! `lo(f_i) >= p_i` for every objective `i`; the incumbent rejects a row
//! when no completion can be lexicographically strictly better.

use std::collections::VecDeque;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::interval::Interval;
use crate::model::{
    Assignment, CompiledExpr, ModelError, Relation, SystemModel, EQUALITY_TOLERANCE,
};
use crate::pareto::{LexSolution, LexSolver, ObjectiveVector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("node limit of {0} exceeded")]
    NodeLimitExceeded(u64),
    #[error("deadline reached")]
    DeadlineReached,
    #[error("interval division by a range containing zero")]
    IntervalDivisionByZero,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VariableOrder {
    ModelOrder,
    SmallestDomainFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueOrder {
    BestObjectiveFirst,
    CatalogOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Propagation {
    /// Plain enumeration; constraints are only checked at leaves.
    None,
    BoundsOnly,
    /// Bounds reasoning plus removal of rows violating single-variable
    /// constraints before search.
    BoundsPlusUnary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub variable_order: VariableOrder,
    pub value_order: ValueOrder,
    pub propagation: Propagation,
    pub node_limit: Option<u64>,
    /// Abort once this instant has passed; checked every 1024 nodes.
    pub deadline: Option<Instant>,
    /// Breaks ties between equally sized domains under
    /// `SmallestDomainFirst`; 0 keeps model order.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            variable_order: VariableOrder::SmallestDomainFirst,
            value_order: ValueOrder::BestObjectiveFirst,
            propagation: Propagation::BoundsPlusUnary,
            node_limit: None,
            deadline: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SearchStatistics {
    pub nodes_expanded: u64,
    pub backtracks: u64,
    pub wall_time: Duration,
}

/// The backtracking solver as a [`LexSolver`].
#[derive(Debug, Clone, Default)]
pub struct CpSolver {
    pub config: SolverConfig,
}

impl CpSolver {
    pub fn new(config: SolverConfig) -> Self {
        CpSolver { config }
    }
}

impl LexSolver for CpSolver {
    fn solve_lex(
        &self,
        model: &SystemModel,
        cuts: &[ObjectiveVector],
    ) -> Result<Option<LexSolution>, SolveError> {
        solve_lexicographic(model, cuts, &self.config)
    }
}

/// Lexicographically minimal canonical objective vector over assignments
/// satisfying every constraint and cut. `Ok(None)` means infeasible.
pub fn solve_lexicographic(
    m: &SystemModel,
    cuts: &[ObjectiveVector],
    cfg: &SolverConfig,
) -> Result<Option<LexSolution>, SolveError> {
    let start = Instant::now();
    let problem = Problem::new(m, cuts);
    let mut search = Search {
        p: &problem,
        cfg,
        incumbent: None,
        stats: SearchStatistics::default(),
        tie_rank: tie_rank(m.variable_count(), cfg.seed),
    };
    let mut domains: Vec<Vec<u32>> = m
        .catalogs()
        .iter()
        .map(|c| (0..c.len() as u32).collect())
        .collect();
    let mut feasible = true;
    if cfg.propagation == Propagation::BoundsPlusUnary {
        feasible = problem.unary_filter(&mut domains)?;
    }
    if feasible {
        if cfg.propagation == Propagation::None {
            let mut rows = vec![0usize; m.variable_count()];
            search.enumerate(0, &mut rows)?;
        } else {
            let ranges = problem.ranges_of(&domains);
            let active: Vec<u32> = (0..problem.cuts.len() as u32).collect();
            search.node(domains, ranges, None, &active)?;
        }
    }
    search.stats.wall_time = start.elapsed();
    Ok(search.incumbent.map(|(obj, rows)| LexSolution {
        assignment: Assignment::from_rows(m, &rows),
        objectives: ObjectiveVector(obj),
        stats: search.stats,
    }))
}

/// Sound interval of `expr` over every completion of `partial`.
pub fn bound_expression(
    expr: &crate::model::Expr,
    partial: &Assignment,
    m: &SystemModel,
) -> Result<Interval, SolveError> {
    let compiled = m.compile(expr)?;
    let mut bounds = Vec::new();
    for (v, cat) in m.catalogs().iter().enumerate() {
        let fixed = match partial.get(&cat.variable) {
            Some(id) => {
                Some(
                    m.component_index(v, id)
                        .ok_or_else(|| ModelError::UnknownComponent {
                            variable: cat.variable.clone(),
                            id: id.to_string(),
                        })?,
                )
            }
            None => None,
        };
        let row: Vec<Interval> = (0..cat.properties.len())
            .map(|p| match fixed {
                Some(r) => Interval::point(m.value(v, r, p)),
                None => {
                    let (lo, hi) = cat.range(p).expect("validated catalogs are non-empty");
                    Interval::new(lo, hi)
                }
            })
            .collect();
        bounds.push(row);
    }
    ieval_strict(&compiled, &bounds).ok_or(SolveError::IntervalDivisionByZero)
}

fn ieval_strict(e: &CompiledExpr, b: &[Vec<Interval>]) -> Option<Interval> {
    Some(match e {
        CompiledExpr::Const(c) => Interval::point(*c),
        CompiledExpr::Prop { var, prop } => b[*var][*prop],
        CompiledExpr::Neg(a) => ieval_strict(a, b)?.neg(),
        CompiledExpr::Add(x, y) => ieval_strict(x, b)?.add(ieval_strict(y, b)?),
        CompiledExpr::Sub(x, y) => ieval_strict(x, b)?.sub(ieval_strict(y, b)?),
        CompiledExpr::Mul(x, y) => ieval_strict(x, b)?.mul(ieval_strict(y, b)?),
        CompiledExpr::Div(x, y) => ieval_strict(x, b)?.div(ieval_strict(y, b)?)?,
        CompiledExpr::Min(cs) => fold_iv(cs.iter().map(|c| ieval_strict(c, b)), Interval::min)?,
        CompiledExpr::Max(cs) => fold_iv(cs.iter().map(|c| ieval_strict(c, b)), Interval::max)?,
    })
}

fn fold_iv(
    mut it: impl Iterator<Item = Option<Interval>>,
    f: fn(Interval, Interval) -> Interval,
) -> Option<Interval> {
    let mut acc = it.next()??;
    for x in it {
        acc = f(acc, x?);
    }
    Some(acc)
}

struct CompiledConstraint {
    lhs: CompiledExpr,
    rhs: CompiledExpr,
    equality: bool,
    vars: Vec<usize>,
}

impl CompiledConstraint {
    fn refuted(&self, ranges: &[Interval], off: &[usize]) -> bool {
        let l = ieval(&self.lhs, ranges, off);
        let r = ieval(&self.rhs, ranges, off);
        if self.equality {
            l.lo > r.hi + EQUALITY_TOLERANCE || r.lo > l.hi + EQUALITY_TOLERANCE
        } else {
            l.lo > r.hi
        }
    }
}

/// Interval evaluation over a flat slot table; division by a range that
/// contains zero yields the entire line, which disables pruning there.
fn ieval(e: &CompiledExpr, ranges: &[Interval], off: &[usize]) -> Interval {
    match e {
        CompiledExpr::Const(c) => Interval::point(*c),
        CompiledExpr::Prop { var, prop } => ranges[off[*var] + prop],
        CompiledExpr::Neg(a) => ieval(a, ranges, off).neg(),
        CompiledExpr::Add(x, y) => ieval(x, ranges, off).add(ieval(y, ranges, off)),
        CompiledExpr::Sub(x, y) => ieval(x, ranges, off).sub(ieval(y, ranges, off)),
        CompiledExpr::Mul(x, y) => ieval(x, ranges, off).mul(ieval(y, ranges, off)),
        CompiledExpr::Div(x, y) => ieval(x, ranges, off)
            .div(ieval(y, ranges, off))
            .unwrap_or(Interval::ENTIRE),
        CompiledExpr::Min(cs) => cs
            .iter()
            .map(|c| ieval(c, ranges, off))
            .reduce(Interval::min)
            .unwrap_or(Interval::ENTIRE),
        CompiledExpr::Max(cs) => cs
            .iter()
            .map(|c| ieval(c, ranges, off))
            .reduce(Interval::max)
            .unwrap_or(Interval::ENTIRE),
    }
}

struct Problem<'m> {
    m: &'m SystemModel,
    offset: Vec<usize>,
    used: Vec<Vec<usize>>,
    constraints: Vec<CompiledConstraint>,
    /// Objectives in minimization space.
    objectives: Vec<CompiledExpr>,
    objective_vars: Vec<Vec<usize>>,
    /// Objectives mentioning each variable.
    var_objectives: Vec<Vec<usize>>,
    in_objective: Vec<bool>,
    var_constraints: Vec<Vec<usize>>,
    cuts: Vec<Vec<f64>>,
}

impl<'m> Problem<'m> {
    fn new(m: &'m SystemModel, cuts: &[ObjectiveVector]) -> Self {
        let n = m.variable_count();
        let mut offset = Vec::with_capacity(n);
        let mut acc = 0;
        for c in m.catalogs() {
            offset.push(acc);
            acc += c.properties.len();
        }
        let mut used = vec![Vec::new(); n];
        let mut note = |e: &CompiledExpr| {
            e.visit_props(&mut |v, p| {
                if !used[v].contains(&p) {
                    used[v].push(p);
                }
            })
        };
        let compile = |e| m.compile(e).expect("model expressions resolve");
        let constraints: Vec<CompiledConstraint> = m
            .constraints()
            .iter()
            .map(|c| {
                let lhs = compile(&c.lhs);
                let rhs = compile(&c.rhs);
                let mut vars = lhs.variables();
                vars.extend(rhs.variables());
                vars.sort_unstable();
                vars.dedup();
                CompiledConstraint {
                    lhs,
                    rhs,
                    equality: c.relation == Relation::Equal,
                    vars,
                }
            })
            .collect();
        let objectives: Vec<CompiledExpr> = m
            .objectives()
            .iter()
            .map(|o| {
                let e = compile(&o.expr);
                match o.direction {
                    crate::model::Direction::Minimize => e,
                    crate::model::Direction::Maximize => CompiledExpr::Neg(Box::new(e)),
                }
            })
            .collect();
        for c in &constraints {
            note(&c.lhs);
            note(&c.rhs);
        }
        for o in &objectives {
            note(o);
        }
        let objective_vars: Vec<Vec<usize>> = objectives.iter().map(|o| o.variables()).collect();
        let mut in_objective = vec![false; n];
        let mut var_objectives = vec![Vec::new(); n];
        for (i, vs) in objective_vars.iter().enumerate() {
            for &v in vs {
                in_objective[v] = true;
                var_objectives[v].push(i);
            }
        }
        let mut var_constraints = vec![Vec::new(); n];
        for (i, c) in constraints.iter().enumerate() {
            if c.vars.len() > 1 {
                for &v in &c.vars {
                    var_constraints[v].push(i);
                }
            }
        }
        Problem {
            m,
            offset,
            used,
            constraints,
            objectives,
            objective_vars,
            var_objectives,
            in_objective,
            var_constraints,
            cuts: cuts.iter().map(|c| c.0.clone()).collect(),
        }
    }

    fn slot_count(&self) -> usize {
        self.m.catalogs().iter().map(|c| c.properties.len()).sum()
    }

    /// Drops rows violating constraints over a single variable; returns
    /// false if the problem is infeasible outright.
    fn unary_filter(&self, domains: &mut [Vec<u32>]) -> Result<bool, SolveError> {
        let mut rows = vec![0usize; self.m.variable_count()];
        for (c, orig) in self.constraints.iter().zip(self.m.constraints()) {
            match c.vars.as_slice() {
                [] => {
                    let l = c.lhs.eval(self.m, &rows)?;
                    let r = c.rhs.eval(self.m, &rows)?;
                    if !orig.holds(l, r) {
                        return Ok(false);
                    }
                }
                [v] => {
                    let v = *v;
                    let mut keep = Vec::with_capacity(domains[v].len());
                    for &row in &domains[v] {
                        rows[v] = row as usize;
                        let l = c.lhs.eval(self.m, &rows)?;
                        let r = c.rhs.eval(self.m, &rows)?;
                        if orig.holds(l, r) {
                            keep.push(row);
                        }
                    }
                    rows[v] = 0;
                    if keep.is_empty() {
                        return Ok(false);
                    }
                    domains[v] = keep;
                }
                _ => {}
            }
        }
        Ok(true)
    }

    fn ranges_of(&self, domains: &[Vec<u32>]) -> Vec<Interval> {
        let mut ranges = vec![Interval::point(0.0); self.slot_count()];
        for v in 0..domains.len() {
            self.recompute(&mut ranges, v, &domains[v]);
        }
        ranges
    }

    fn recompute(&self, ranges: &mut [Interval], v: usize, dom: &[u32]) {
        for &p in &self.used[v] {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &r in dom {
                let x = self.m.value(v, r as usize, p);
                lo = lo.min(x);
                hi = hi.max(x);
            }
            ranges[self.offset[v] + p] = Interval { lo, hi };
        }
    }

    fn set_point(&self, ranges: &mut [Interval], v: usize, row: u32) {
        for &p in &self.used[v] {
            ranges[self.offset[v] + p] = Interval::point(self.m.value(v, row as usize, p));
        }
    }

    fn objective_lows(&self, ranges: &[Interval], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.objectives
                .iter()
                .map(|o| ieval(o, ranges, &self.offset).lo),
        );
    }

    /// Whether objective lower bounds `lo` rule out an acceptable solution:
    /// some cut is unsatisfiable or nothing can beat the incumbent.
    fn objective_refuted(&self, lo: &[f64], active: &[u32], incumbent: Option<&[f64]>) -> bool {
        if active
            .iter()
            .any(|&k| lo.iter().zip(&self.cuts[k as usize]).all(|(l, c)| l >= c))
        {
            return true;
        }
        match incumbent {
            Some(inc) => !can_improve(lo, inc),
            None => false,
        }
    }

    /// Cuts some completion of `ranges` could still violate. A cut whose
    /// value some objective is certain to beat is dropped for the subtree.
    fn live_cuts(&self, ranges: &[Interval], active: &[u32]) -> Vec<u32> {
        if active.is_empty() {
            return Vec::new();
        }
        let highs: Vec<f64> = self
            .objectives
            .iter()
            .map(|o| ieval(o, ranges, &self.offset).hi)
            .collect();
        active
            .iter()
            .copied()
            .filter(|&k| {
                highs
                    .iter()
                    .zip(&self.cuts[k as usize])
                    .all(|(h, c)| h >= c)
            })
            .collect()
    }
}

/// Whether a vector bounded below by `lo` can be lexicographically strictly
/// smaller than `inc`.
fn can_improve(lo: &[f64], inc: &[f64]) -> bool {
    for (l, i) in lo.iter().zip(inc) {
        if l > i {
            return false;
        }
        if l < i {
            return true;
        }
    }
    false
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}

fn tie_rank(n: usize, seed: u64) -> Vec<u64> {
    if seed == 0 {
        return (0..n as u64).collect();
    }
    // splitmix64 keyed by seed
    (0..n as u64)
        .map(|i| {
            let mut z = seed.wrapping_add(i.wrapping_mul(0x9E37_79B9_7F4A_7C15));
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            z ^ (z >> 31)
        })
        .collect()
}

struct Search<'p, 'm> {
    p: &'p Problem<'m>,
    cfg: &'p SolverConfig,
    incumbent: Option<(Vec<f64>, Vec<usize>)>,
    stats: SearchStatistics,
    tie_rank: Vec<u64>,
}

impl Search<'_, '_> {
    fn tick(&mut self) -> Result<(), SolveError> {
        self.stats.nodes_expanded += 1;
        if let Some(limit) = self.cfg.node_limit {
            if self.stats.nodes_expanded > limit {
                return Err(SolveError::NodeLimitExceeded(limit));
            }
        }
        if let Some(d) = self.cfg.deadline {
            if self.stats.nodes_expanded % 1024 == 0 && Instant::now() >= d {
                return Err(SolveError::DeadlineReached);
            }
        }
        Ok(())
    }

    /// Exact check of a complete assignment; updates the incumbent.
    fn leaf(&mut self, rows: &[usize]) -> Result<(), SolveError> {
        let m = self.p.m;
        for (c, orig) in self.p.constraints.iter().zip(m.constraints()) {
            let l = c.lhs.eval(m, rows)?;
            let r = c.rhs.eval(m, rows)?;
            if !orig.holds(l, r) {
                return Ok(());
            }
        }
        let obj = self
            .p
            .objectives
            .iter()
            .map(|o| o.eval(m, rows))
            .collect::<Result<Vec<f64>, _>>()?;
        if !self
            .p
            .cuts
            .iter()
            .all(|cut| obj.iter().zip(cut).any(|(f, c)| f < c))
        {
            return Ok(());
        }
        let better = match &self.incumbent {
            None => true,
            Some((inc, _)) => lex_less(&obj, inc),
        };
        if better {
            self.incumbent = Some((obj, rows.to_vec()));
        }
        Ok(())
    }

    fn enumerate(&mut self, var: usize, rows: &mut Vec<usize>) -> Result<(), SolveError> {
        self.tick()?;
        if var == rows.len() {
            return self.leaf(rows);
        }
        for r in 0..self.p.m.catalogs()[var].len() {
            rows[var] = r;
            self.enumerate(var + 1, rows)?;
        }
        Ok(())
    }

    /// Filters domains to a fixpoint. `dirty` is the variable just fixed, or
    /// `None` to start from every constraint. Returns false on a wipeout.
    fn propagate(
        &mut self,
        domains: &mut [Vec<u32>],
        ranges: &mut [Interval],
        dirty: Option<usize>,
        active: &[u32],
    ) -> bool {
        let p = self.p;
        let pseudo = p.constraints.len();
        let mut queued = vec![false; pseudo + 1];
        let mut queue = VecDeque::new();
        let push = |c: usize, queue: &mut VecDeque<usize>, queued: &mut Vec<bool>| {
            if !queued[c] {
                queued[c] = true;
                queue.push_back(c);
            }
        };
        match dirty {
            None => {
                for (i, c) in p.constraints.iter().enumerate() {
                    if c.vars.len() > 1 {
                        push(i, &mut queue, &mut queued);
                    }
                }
            }
            Some(v) => {
                for &c in &p.var_constraints[v] {
                    push(c, &mut queue, &mut queued);
                }
            }
        }
        let objective_filter = self.incumbent.is_some() || !active.is_empty();
        if objective_filter {
            push(pseudo, &mut queue, &mut queued);
        }
        let mut lows = Vec::with_capacity(p.objectives.len());
        while let Some(ci) = queue.pop_front() {
            queued[ci] = false;
            let vars: &[usize] = if ci == pseudo {
                &[]
            } else {
                &p.constraints[ci].vars
            };
            let objective_vars: Vec<usize>;
            let vars = if ci == pseudo {
                objective_vars = (0..domains.len()).filter(|&v| p.in_objective[v]).collect();
                &objective_vars[..]
            } else {
                vars
            };
            for &w in vars {
                if domains[w].len() <= 1 {
                    continue;
                }
                let before = domains[w].len();
                let mut dom = std::mem::take(&mut domains[w]);
                if ci == pseudo {
                    let inc = self.incumbent.as_ref().map(|(v, _)| v.as_slice());
                    // Objectives without `w` keep their bound across its
                    // values, so only cuts they already reach can refute.
                    p.objective_lows(ranges, &mut lows);
                    let dep = &p.var_objectives[w];
                    let reach: Vec<&[f64]> = active
                        .iter()
                        .map(|&k| p.cuts[k as usize].as_slice())
                        .filter(|cut| {
                            (0..lows.len()).all(|i| dep.contains(&i) || lows[i] >= cut[i])
                        })
                        .collect();
                    if reach.is_empty() && inc.is_none() {
                        domains[w] = dom;
                        continue;
                    }
                    dom.retain(|&row| {
                        p.set_point(ranges, w, row);
                        for &i in dep {
                            lows[i] = ieval(&p.objectives[i], ranges, &p.offset).lo;
                        }
                        let cut = reach.iter().any(|c| dep.iter().all(|&i| lows[i] >= c[i]));
                        !(cut || inc.is_some_and(|inc| !can_improve(&lows, inc)))
                    });
                } else {
                    let c = &p.constraints[ci];
                    dom.retain(|&row| {
                        p.set_point(ranges, w, row);
                        !c.refuted(ranges, &p.offset)
                    });
                }
                p.recompute(ranges, w, &dom);
                let changed = dom.len() != before;
                domains[w] = dom;
                if domains[w].is_empty() {
                    return false;
                }
                if changed {
                    for &c in &p.var_constraints[w] {
                        push(c, &mut queue, &mut queued);
                    }
                    if objective_filter && p.in_objective[w] {
                        push(pseudo, &mut queue, &mut queued);
                    }
                }
            }
        }
        // Constraints whose variables are all fixed were checked exactly
        // while filtering their last open variable; re-check the node as a
        // whole against cuts and the incumbent.
        if objective_filter {
            p.objective_lows(ranges, &mut lows);
            let inc = self.incumbent.as_ref().map(|(v, _)| v.as_slice());
            if p.objective_refuted(&lows, active, inc) {
                return false;
            }
        }
        true
    }

    fn node(
        &mut self,
        mut domains: Vec<Vec<u32>>,
        mut ranges: Vec<Interval>,
        dirty: Option<usize>,
        active: &[u32],
    ) -> Result<(), SolveError> {
        self.tick()?;
        if !self.propagate(&mut domains, &mut ranges, dirty, active) {
            self.stats.backtracks += 1;
            return Ok(());
        }
        let active = self.p.live_cuts(&ranges, active);
        let Some(var) = self.choose_variable(&domains) else {
            let rows: Vec<usize> = domains.iter().map(|d| d[0] as usize).collect();
            return self.leaf(&rows);
        };
        let values = self.order_values(var, &domains, &mut ranges);
        for row in values {
            let mut child = domains.clone();
            child[var] = vec![row];
            let mut child_ranges = ranges.clone();
            self.p.set_point(&mut child_ranges, var, row);
            // The incumbent may have improved in an earlier sibling.
            if let Some((inc, _)) = &self.incumbent {
                let mut lows = Vec::new();
                self.p.objective_lows(&child_ranges, &mut lows);
                if !can_improve(&lows, inc) {
                    continue;
                }
            }
            self.node(child, child_ranges, Some(var), &active)?;
        }
        Ok(())
    }

    fn choose_variable(&self, domains: &[Vec<u32>]) -> Option<usize> {
        let open = (0..domains.len()).filter(|&v| domains[v].len() > 1);
        match self.cfg.variable_order {
            VariableOrder::ModelOrder => open.min(),
            VariableOrder::SmallestDomainFirst => {
                open.min_by_key(|&v| (domains[v].len(), self.tie_rank[v], v))
            }
        }
    }

    fn order_values(&self, var: usize, domains: &[Vec<u32>], ranges: &mut [Interval]) -> Vec<u32> {
        let dom = domains[var].clone();
        if self.cfg.value_order == ValueOrder::CatalogOrder || !self.p.in_objective[var] {
            return dom;
        }
        let p = self.p;
        let relevant: Vec<usize> = (0..p.objectives.len())
            .filter(|&i| p.objective_vars[i].contains(&var))
            .collect();
        let mut keyed: Vec<(Vec<f64>, u32)> = dom
            .iter()
            .map(|&row| {
                p.set_point(ranges, var, row);
                let key = relevant
                    .iter()
                    .map(|&i| ieval(&p.objectives[i], ranges, &p.offset).lo)
                    .collect();
                (key, row)
            })
            .collect();
        p.recompute(ranges, var, &dom);
        keyed.sort_by(|a, b| {
            for (x, y) in a.0.iter().zip(&b.0) {
                match x.total_cmp(y) {
                    std::cmp::Ordering::Equal => continue,
                    o => return o,
                }
            }
            std::cmp::Ordering::Equal
        });
        keyed.into_iter().map(|(_, r)| r).collect()
    }
}
