//! Monotone subsystem decomposition.
//!
//! A subsystem `X` (a set of variables) is replaced by a single aggregate
//! variable whose catalog is the Pareto front of `X` over its *external
//! columns*: the properties of `X` that the rest of the model can see.
//! When every external column is consistent, some optimal solution of the
//! whole model uses a front point of `X`, so solving the reduced model loses
//! nothing.
//!
//! The interface of `X` is every constraint whose variables meet both `X`
//! and its complement, plus every objective mentioning `X`. Aggregation
//! rewrites collapse sub-expressions over `X` (typically a partial sum of
//! costs) into one derived column. Anything of `X` left in the interface
//! after rewriting becomes a raw column named `{Var}_{prop}`.
//!
//! Inconsistent columns can be declared as *handles*: the subsystem is then
//! solved once per combination of handle values and the fronts are united,
//! each point carrying its handle values as ordinary columns.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use thiserror::Error;

use crate::consistency::{
    classify_over, shared_functions, ConsistencyError, ConsistencyKind, FunctionId, FunctionRole,
    FunctionView, Polarity, Violation,
};
use crate::interval::Interval;
use crate::model::{
    evaluate, is_feasible, objective_vector, Assignment, Catalog, Component, Constraint, Direction,
    Expr, ModelError, Objective, PropertyKey, SystemModel,
};
use crate::pareto::{
    compute_front_traced, EngineConfig, FrontError, FrontStatistics, LexSolver, ParetoFront,
    ParetoPoint,
};
use crate::solver::bound_expression;

pub const DEFAULT_HANDLE_CAP: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecomposeError {
    #[error(transparent)]
    Consistency(#[from] ConsistencyError),
    #[error("subsystem `{0}` must be a strict subset of the model variables")]
    NotStrictSubset(String),
    #[error("subsystem `{subsystem}` is not fully consistent: {}", fmt_violations(.violations))]
    InconsistentSubsystem {
        subsystem: String,
        violations: Vec<Violation>,
    },
    #[error("rewrite `{name}`: {reason}")]
    InvalidRewrite { name: String, reason: String },
    #[error("subsystem `{0}` has no feasible assignment")]
    EmptyFront(String),
    #[error("function `{function}` needs `{property}`, which the aggregate does not export")]
    UnroutableReference {
        function: String,
        property: PropertyKey,
    },
    #[error("subsystem `{0}` reuses a name but differs in structure")]
    ReplicaMismatch(String),
    #[error("subsystem `{subsystem}` has {combinations} handle value combinations, cap is {cap}")]
    HandleCapExceeded {
        subsystem: String,
        combinations: u128,
        cap: usize,
    },
    #[error("a decomposed solution violates an original constraint")]
    ReconstructionInfeasible(Assignment),
    #[error(transparent)]
    Front(#[from] FrontError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn fmt_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| format!("{} in {} ({:?})", x.property, x.function, x.polarity))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Declares that `expr` (over subsystem variables only) is exported as one
/// derived column called `name`.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregationRewrite {
    pub name: String,
    pub expr: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsystemSpec {
    /// Identifies the subsystem; specs sharing a name are replicas and are
    /// solved once.
    pub name: String,
    /// Name of the aggregate variable; defaults to `name`. Replicas need
    /// distinct aliases.
    pub alias: Option<String>,
    pub variables: Vec<String>,
    pub rewrites: Vec<AggregationRewrite>,
    pub handles: Vec<PropertyKey>,
}

impl SubsystemSpec {
    pub fn new(
        name: impl Into<String>,
        variables: impl IntoIterator<Item = impl Into<String>>,
    ) -> Self {
        SubsystemSpec {
            name: name.into(),
            alias: None,
            variables: variables.into_iter().map(Into::into).collect(),
            rewrites: Vec::new(),
            handles: Vec::new(),
        }
    }

    pub fn with_rewrite(mut self, name: impl Into<String>, expr: Expr) -> Self {
        self.rewrites.push(AggregationRewrite {
            name: name.into(),
            expr,
        });
        self
    }

    pub fn with_handle(mut self, key: PropertyKey) -> Self {
        self.handles.push(key);
        self
    }

    pub fn with_alias(mut self, alias: impl Into<String>) -> Self {
        self.alias = Some(alias.into());
        self
    }

    pub fn aggregate_variable(&self) -> &str {
        self.alias.as_deref().unwrap_or(&self.name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExternalDirection {
    MaximizeIt,
    MinimizeIt,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnSource {
    Raw(PropertyKey),
    Derived(String),
}

/// An optimized column of the aggregate.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalProperty {
    pub column: String,
    pub source: ColumnSource,
    /// Value of the column in terms of subsystem properties.
    pub definition: Expr,
    pub direction: ExternalDirection,
}

/// Everything needed to solve a subsystem and splice it back in.
#[derive(Debug, Clone)]
pub struct SubsystemPlan {
    pub spec: SubsystemSpec,
    pub externals: Vec<ExternalProperty>,
    /// `(column, property)` for each handle.
    pub handles: Vec<(String, PropertyKey)>,
    /// Interface functions rewritten over the aggregate variable.
    pub interface: BTreeMap<FunctionId, Expr>,
    /// Subsystem variables, internal constraints, one objective per
    /// external column.
    pub child: SystemModel,
}

impl SubsystemPlan {
    pub fn aggregate_variable(&self) -> &str {
        self.spec.aggregate_variable()
    }

    /// Column names in aggregate order: externals, then handles.
    pub fn columns(&self) -> Vec<String> {
        self.externals
            .iter()
            .map(|e| e.column.clone())
            .chain(self.handles.iter().map(|(c, _)| c.clone()))
            .collect()
    }

    fn definitions(&self) -> Vec<Expr> {
        self.externals
            .iter()
            .map(|e| e.definition.clone())
            .chain(self.handles.iter().map(|(_, k)| Expr::Prop(k.clone())))
            .collect()
    }
}

/// A subsystem front as a catalog, with the internal assignment behind
/// every row.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateComponent {
    pub catalog: Catalog,
    pub provenance: Vec<Assignment>,
    pub columns: Vec<String>,
}

impl AggregateComponent {
    pub fn provenance_of(&self, id: &str) -> Option<&Assignment> {
        self.catalog
            .components
            .iter()
            .position(|c| c.id == id)
            .map(|i| &self.provenance[i])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecomposeConfig {
    pub engine: EngineConfig,
    /// Maximum number of handle value combinations per subsystem.
    pub handle_cap: usize,
}

impl Default for DecomposeConfig {
    fn default() -> Self {
        DecomposeConfig {
            engine: EngineConfig::default(),
            handle_cap: DEFAULT_HANDLE_CAP,
        }
    }
}

pub fn raw_column(k: &PropertyKey) -> String {
    format!("{}_{}", k.variable, k.property)
}

fn add_terms(e: &Expr) -> Vec<&Expr> {
    match e {
        Expr::Add(a, b) => {
            let mut v = add_terms(a);
            v.extend(add_terms(b));
            v
        }
        other => vec![other],
    }
}

/// Replaces `pattern` in `e` by `rep`: either as an exact subtree or as a
/// sub-multiset of the terms of a sum, in which case the replacement takes
/// the place of the first matched term.
pub fn apply_rewrite(e: &Expr, pattern: &Expr, rep: &Expr) -> Expr {
    if e == pattern {
        return rep.clone();
    }
    if let (Expr::Add(..), Expr::Add(..)) = (e, pattern) {
        let terms = add_terms(e);
        let wanted = add_terms(pattern);
        let mut used = vec![false; terms.len()];
        let mut all = true;
        for w in &wanted {
            match (0..terms.len()).find(|&i| !used[i] && terms[i] == *w) {
                Some(i) => used[i] = true,
                None => {
                    all = false;
                    break;
                }
            }
        }
        if all {
            let first = used.iter().position(|&u| u).expect("pattern has terms");
            let rest = terms
                .iter()
                .enumerate()
                .filter_map(|(i, t)| {
                    if i == first {
                        Some(rep.clone())
                    } else if used[i] {
                        None
                    } else {
                        Some(apply_rewrite(t, pattern, rep))
                    }
                })
                .collect::<Vec<_>>();
            return Expr::sum(rest);
        }
    }
    let r = |x: &Expr| Box::new(apply_rewrite(x, pattern, rep));
    match e {
        Expr::Const(_) | Expr::Prop(_) => e.clone(),
        Expr::Neg(a) => Expr::Neg(r(a)),
        Expr::Add(a, b) => Expr::Add(r(a), r(b)),
        Expr::Sub(a, b) => Expr::Sub(r(a), r(b)),
        Expr::Mul(a, b) => Expr::Mul(r(a), r(b)),
        Expr::Div(a, b) => Expr::Div(r(a), r(b)),
        Expr::Min(cs) => Expr::Min(cs.iter().map(|c| apply_rewrite(c, pattern, rep)).collect()),
        Expr::Max(cs) => Expr::Max(cs.iter().map(|c| apply_rewrite(c, pattern, rep)).collect()),
    }
}

/// Interface analysis of `spec` inside `m`.
pub fn plan_subsystem(
    m: &SystemModel,
    spec: &SubsystemSpec,
) -> Result<SubsystemPlan, DecomposeError> {
    let shared = shared_functions(m, spec.variables.iter().map(String::as_str))?;
    let x: BTreeSet<&str> = spec.variables.iter().map(String::as_str).collect();
    if x.len() >= m.variable_count() {
        return Err(DecomposeError::NotStrictSubset(spec.name.clone()));
    }
    let agg = spec.aggregate_variable();
    if m.variable_index(agg).is_some() && !x.contains(agg) {
        return Err(ModelError::DuplicateVariable(agg.to_string()).into());
    }
    for h in &spec.handles {
        m.resolve(h)?;
        if !x.contains(h.variable.as_str()) {
            return Err(DecomposeError::Consistency(ConsistencyError::NotASubset(
                h.variable.clone(),
            )));
        }
    }
    let mut rewrites = Vec::new();
    for rw in &spec.rewrites {
        for k in rw.expr.property_refs() {
            m.resolve(k)?;
            if !x.contains(k.variable.as_str()) {
                return Err(DecomposeError::InvalidRewrite {
                    name: rw.name.clone(),
                    reason: format!("`{k}` is outside the subsystem"),
                });
            }
        }
        rewrites.push((rw, Expr::prop(agg, rw.name.clone())));
    }

    let mut interface_ids = shared.clone();
    for (i, o) in m.objectives().iter().enumerate() {
        if o.expr.variables().iter().any(|v| x.contains(v)) {
            interface_ids.insert(FunctionId::Objective(i));
        }
    }

    // Rewrite the interface; collect columns in first-use order.
    let mut interface = BTreeMap::new();
    let mut columns: Vec<(String, ColumnSource, Expr)> = Vec::new();
    let handle_cols: BTreeSet<String> = spec.handles.iter().map(raw_column).collect();
    for &id in &interface_ids {
        let mut e = m.function(id).expect("function of model").clone();
        for (rw, rep) in &rewrites {
            e = apply_rewrite(&e, &rw.expr, rep);
        }
        for k in e.property_refs() {
            let (col, src, def) = if k.variable == agg && !x.contains(agg) {
                let rw = spec
                    .rewrites
                    .iter()
                    .find(|r| r.name == k.property)
                    .expect("rewrite column");
                (
                    rw.name.clone(),
                    ColumnSource::Derived(rw.name.clone()),
                    rw.expr.clone(),
                )
            } else if x.contains(k.variable.as_str()) {
                (
                    raw_column(k),
                    ColumnSource::Raw(k.clone()),
                    Expr::Prop(k.clone()),
                )
            } else {
                continue;
            };
            if !handle_cols.contains(&col) && !columns.iter().any(|c| c.0 == col) {
                columns.push((col, src, def));
            }
        }
        let routed = e.map_props(&|k| {
            if x.contains(k.variable.as_str()) {
                Expr::prop(agg, raw_column(k))
            } else {
                Expr::Prop(k.clone())
            }
        });
        interface.insert(id, routed);
    }

    // Column ranges for sign reasoning.
    let mut col_range: HashMap<String, Interval> = HashMap::new();
    for (col, _, def) in &columns {
        let iv = bound_expression(def, &Assignment::new(), m).unwrap_or(Interval::ENTIRE);
        col_range.insert(col.clone(), iv);
    }
    for h in &spec.handles {
        let (v, p) = m.resolve(h)?;
        let (lo, hi) = m.catalogs()[v].range(p).expect("non-empty catalog");
        col_range.insert(raw_column(h), Interval::new(lo, hi));
    }
    let range = |k: &PropertyKey| -> Interval {
        if k.variable == agg {
            return col_range
                .get(&k.property)
                .copied()
                .unwrap_or(Interval::ENTIRE);
        }
        match m.resolve(k) {
            Ok((v, p)) => {
                let (lo, hi) = m.catalogs()[v].range(p).expect("non-empty catalog");
                Interval::new(lo, hi)
            }
            Err(_) => Interval::ENTIRE,
        }
    };
    let declared = |f: FunctionId, k: &PropertyKey| -> Option<Polarity> {
        if k.variable != agg {
            return None;
        }
        m.declared_polarities()
            .iter()
            .find(|d| {
                d.function == f
                    && x.contains(d.property.variable.as_str())
                    && raw_column(&d.property) == k.property
            })
            .map(|d| d.polarity)
    };
    let views: Vec<FunctionView<'_>> = interface
        .iter()
        .map(|(&id, e)| FunctionView {
            id,
            role: FunctionRole::of(m, id),
            expr: e,
        })
        .collect();

    let mut externals = Vec::new();
    let mut violations = Vec::new();
    for (col, source, definition) in columns {
        let key = PropertyKey::new(agg, col.clone());
        let c = classify_over(&views, &key, &range, &declared);
        let direction =
            match c.kind {
                ConsistencyKind::ConsistentMax => ExternalDirection::MaximizeIt,
                ConsistencyKind::ConsistentMin => ExternalDirection::MinimizeIt,
                ConsistencyKind::Inconsistent => {
                    let property = match &source {
                        ColumnSource::Raw(k) => k.clone(),
                        ColumnSource::Derived(_) => key.clone(),
                    };
                    violations.extend(c.witnesses.into_iter().map(|(function, polarity)| {
                        Violation {
                            function,
                            property: property.clone(),
                            polarity,
                        }
                    }));
                    continue;
                }
            };
        externals.push(ExternalProperty {
            column: col,
            source,
            definition,
            direction,
        });
    }
    if !violations.is_empty() {
        return Err(DecomposeError::InconsistentSubsystem {
            subsystem: spec.name.clone(),
            violations,
        });
    }

    // Child model: subsystem variables in model order.
    let catalogs: Vec<Catalog> = m
        .catalogs()
        .iter()
        .filter(|c| x.contains(c.variable.as_str()))
        .cloned()
        .collect();
    let constraints: Vec<Constraint> = m
        .constraints()
        .iter()
        .filter(|c| {
            let vs = c.variables();
            !vs.is_empty() && vs.iter().all(|v| x.contains(v))
        })
        .cloned()
        .collect();
    let mut objectives: Vec<Objective> = externals
        .iter()
        .map(|e| Objective {
            name: e.column.clone(),
            expr: e.definition.clone(),
            direction: match e.direction {
                ExternalDirection::MaximizeIt => Direction::Maximize,
                ExternalDirection::MinimizeIt => Direction::Minimize,
            },
        })
        .collect();
    if objectives.is_empty() {
        // Nothing is visible from outside: any feasible assignment will do.
        objectives.push(Objective::minimize("feasible", Expr::Const(0.0)));
    }
    let child = SystemModel::new(catalogs, constraints, objectives)?;
    Ok(SubsystemPlan {
        spec: spec.clone(),
        externals,
        handles: spec
            .handles
            .iter()
            .map(|h| (raw_column(h), h.clone()))
            .collect(),
        interface,
        child,
    })
}

/// External columns of `spec` with their optimization directions.
pub fn external_properties(
    m: &SystemModel,
    spec: &SubsystemSpec,
) -> Result<Vec<ExternalProperty>, DecomposeError> {
    Ok(plan_subsystem(m, spec)?.externals)
}

/// Front of the planned child model; with handles, the union of the fronts
/// of every handle value combination, tagged with the handle values.
pub fn solve_plan(
    plan: &SubsystemPlan,
    solver: &dyn LexSolver,
    cfg: &DecomposeConfig,
) -> Result<(ParetoFront, FrontStatistics), DecomposeError> {
    let child = &plan.child;
    let name = &plan.spec.name;
    let front_of = |m: &SystemModel| match compute_front_traced(m, solver, &cfg.engine) {
        Ok(r) => Ok(Some(r)),
        Err(FrontError::InfeasibleModel) => Ok(None),
        Err(e) => Err(DecomposeError::from(e)),
    };
    if plan.handles.is_empty() {
        return front_of(child)?.ok_or_else(|| DecomposeError::EmptyFront(name.clone()));
    }
    let mut axes: Vec<(usize, usize, Vec<f64>)> = Vec::new();
    for (_, k) in &plan.handles {
        let (v, p) = child.resolve(k)?;
        axes.push((v, p, child.catalogs()[v].distinct_values(p)));
    }
    let combos: u128 = axes.iter().map(|a| a.2.len() as u128).product();
    if combos > cfg.handle_cap as u128 {
        return Err(DecomposeError::HandleCapExceeded {
            subsystem: name.clone(),
            combinations: combos,
            cap: cfg.handle_cap,
        });
    }
    let mut value_sets: Vec<Vec<f64>> = vec![Vec::new()];
    for (_, _, vals) in &axes {
        value_sets = value_sets
            .into_iter()
            .flat_map(|prefix| {
                vals.iter().map(move |&x| {
                    let mut p = prefix.clone();
                    p.push(x);
                    p
                })
            })
            .collect();
    }
    let solve_one =
        |values: &Vec<f64>| -> Result<Option<(ParetoFront, FrontStatistics)>, DecomposeError> {
            let mut cats = Vec::with_capacity(child.variable_count());
            for (vi, cat) in child.catalogs().iter().enumerate() {
                let filtered = cat.filtered(|comp| {
                    axes.iter()
                        .zip(values)
                        .all(|((v, p, _), x)| *v != vi || comp.values[*p] == *x)
                });
                if filtered.is_empty() {
                    return Ok(None);
                }
                cats.push(filtered);
            }
            let sub = SystemModel::new(
                cats,
                child.constraints().to_vec(),
                child.objectives().to_vec(),
            )?;
            let Some((mut front, stats)) = front_of(&sub)? else {
                return Ok(None);
            };
            let tags: Vec<(String, f64)> = plan
                .handles
                .iter()
                .map(|(c, _)| c.clone())
                .zip(values.iter().copied())
                .collect();
            let points: Vec<ParetoPoint> = std::mem::take(&mut front)
                .into_points()
                .into_iter()
                .map(|mut p| {
                    p.partition = tags.clone();
                    p
                })
                .collect();
            let mut tagged = ParetoFront::new();
            for p in points {
                tagged.push_unchecked(p);
            }
            Ok(Some((tagged, stats)))
        };
    let parts: Vec<Option<(ParetoFront, FrontStatistics)>> = if cfg.engine.threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.engine.threads)
            .build()
            .expect("thread pool");
        pool.install(|| {
            value_sets
                .par_iter()
                .map(solve_one)
                .collect::<Result<_, _>>()
        })?
    } else {
        value_sets.iter().map(solve_one).collect::<Result<_, _>>()?
    };
    let mut union = ParetoFront::new();
    let mut total = FrontStatistics::default();
    for (front, stats) in parts.into_iter().flatten() {
        total.solves += stats.solves;
        total.nodes_expanded += stats.nodes_expanded;
        total.backtracks += stats.backtracks;
        total.wall_time += stats.wall_time;
        for p in front.into_points() {
            union.push_unchecked(p);
        }
    }
    if union.is_empty() {
        return Err(DecomposeError::EmptyFront(name.clone()));
    }
    Ok((union, total))
}

/// Pareto front of the subsystem over its external columns.
pub fn optimize_subsystem(
    m: &SystemModel,
    spec: &SubsystemSpec,
    solver: &dyn LexSolver,
    cfg: &DecomposeConfig,
) -> Result<ParetoFront, DecomposeError> {
    let plan = plan_subsystem(m, spec)?;
    Ok(solve_plan(&plan, solver, cfg)?.0)
}

/// The front as a catalog. Rows are ordered by handle values, then by
/// objective vector; ids are `{name}#{k}` with the spec name, so replicas
/// get identical catalogs.
pub fn build_aggregate(
    front: &ParetoFront,
    plan: &SubsystemPlan,
) -> Result<AggregateComponent, DecomposeError> {
    if front.is_empty() {
        return Err(DecomposeError::EmptyFront(plan.spec.name.clone()));
    }
    let defs = plan.definitions();
    let n_ext = plan.externals.len();
    let mut rows: Vec<(Vec<f64>, &ParetoPoint)> = Vec::with_capacity(front.len());
    for p in front.points() {
        let values = defs
            .iter()
            .map(|d| evaluate(d, &p.assignment, &plan.child))
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push((values, p));
    }
    rows.sort_by(|a, b| {
        let ha = &a.0[n_ext..];
        let hb = &b.0[n_ext..];
        ha.iter()
            .zip(hb)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.1.objectives.lex_cmp(&b.1.objectives))
    });
    let agg = plan.aggregate_variable();
    let columns = plan.columns();
    let mut components = Vec::with_capacity(rows.len());
    let mut provenance = Vec::with_capacity(rows.len());
    for (k, (values, p)) in rows.into_iter().enumerate() {
        components.push(Component::new(format!("{}#{k}", plan.spec.name), values));
        provenance.push(p.assignment.clone());
    }
    let catalog = Catalog::new(agg, columns.clone(), components)?;
    Ok(AggregateComponent {
        catalog,
        provenance,
        columns,
    })
}

/// The parent model with the subsystem replaced by `agg`.
pub fn compose(
    m: &SystemModel,
    plan: &SubsystemPlan,
    agg: &AggregateComponent,
) -> Result<SystemModel, DecomposeError> {
    let x: BTreeSet<&str> = plan.spec.variables.iter().map(String::as_str).collect();
    let agg_var = plan.aggregate_variable();
    for (&id, e) in &plan.interface {
        for k in e.property_refs() {
            if k.variable == agg_var && !agg.columns.contains(&k.property) {
                return Err(DecomposeError::UnroutableReference {
                    function: m.function_name(id),
                    property: k.clone(),
                });
            }
        }
    }
    let mut catalogs = Vec::new();
    let mut placed = false;
    for c in m.catalogs() {
        if x.contains(c.variable.as_str()) {
            if !placed {
                catalogs.push(agg.catalog.clone());
                placed = true;
            }
        } else {
            catalogs.push(c.clone());
        }
    }
    let mut constraints = Vec::new();
    let mut index_map: HashMap<FunctionId, FunctionId> = HashMap::new();
    for (i, c) in m.constraints().iter().enumerate() {
        let vs = c.variables();
        if !vs.is_empty() && vs.iter().all(|v| x.contains(v)) {
            continue;
        }
        let side = |id: FunctionId, e: &Expr| {
            plan.interface
                .get(&id)
                .cloned()
                .unwrap_or_else(|| e.clone())
        };
        let j = constraints.len();
        index_map.insert(FunctionId::Lhs(i), FunctionId::Lhs(j));
        index_map.insert(FunctionId::Rhs(i), FunctionId::Rhs(j));
        constraints.push(Constraint {
            name: c.name.clone(),
            lhs: side(FunctionId::Lhs(i), &c.lhs),
            rhs: side(FunctionId::Rhs(i), &c.rhs),
            relation: c.relation,
        });
    }
    let objectives = m
        .objectives()
        .iter()
        .enumerate()
        .map(|(i, o)| {
            index_map.insert(FunctionId::Objective(i), FunctionId::Objective(i));
            Objective {
                name: o.name.clone(),
                expr: plan
                    .interface
                    .get(&FunctionId::Objective(i))
                    .cloned()
                    .unwrap_or_else(|| o.expr.clone()),
                direction: o.direction,
            }
        })
        .collect();
    let mut out = SystemModel::new(catalogs, constraints, objectives)?;
    for d in m.declared_polarities() {
        let Some(&f) = index_map.get(&d.function) else {
            continue;
        };
        let key = if x.contains(d.property.variable.as_str()) {
            let col = raw_column(&d.property);
            if !agg.columns.contains(&col) {
                continue;
            }
            PropertyKey::new(agg_var, col)
        } else {
            d.property.clone()
        };
        if out.function(f).is_some_and(|e| e.mentions(&key)) {
            out = out.with_declared_polarity(f, key, d.polarity)?;
        }
    }
    Ok(out)
}

/// Replaces aggregate choices by the assignments behind them, recursively.
pub fn flatten(
    a: &Assignment,
    aggregates: &HashMap<String, AggregateComponent>,
) -> Result<Assignment, DecomposeError> {
    let mut out = Assignment::new();
    for (var, id) in a.iter() {
        match aggregates.get(var) {
            Some(agg) => {
                let inner = agg
                    .provenance_of(id)
                    .ok_or_else(|| ModelError::UnknownComponent {
                        variable: var.to_string(),
                        id: id.to_string(),
                    })?;
                out.extend(&flatten(inner, aggregates)?);
            }
            None => out.set(var, id),
        }
    }
    Ok(out)
}

fn same_structure(a: &SystemModel, b: &SystemModel) -> bool {
    a.catalogs() == b.catalogs()
        && a.constraints().len() == b.constraints().len()
        && a.constraints()
            .iter()
            .zip(b.constraints())
            .all(|(x, y)| x.lhs == y.lhs && x.rhs == y.rhs && x.relation == y.relation)
        && a.objectives().len() == b.objectives().len()
        && a.objectives()
            .iter()
            .zip(b.objectives())
            .all(|(x, y)| x.expr == y.expr && x.direction == y.direction)
}

struct CachedSolve {
    child: SystemModel,
    front: ParetoFront,
}

/// Subsystem fronts by spec name, so replicated subsystems are solved once.
#[derive(Default)]
pub struct SubsystemCache {
    entries: HashMap<String, CachedSolve>,
    solves: usize,
}

impl SubsystemCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of subsystem front computations performed.
    pub fn solves(&self) -> usize {
        self.solves
    }

    /// Front for `plan`, computed on first use of its name. Later plans with
    /// the same name must match structurally up to a positional renaming of
    /// variables; their front is the cached one with variables renamed.
    pub fn front_for(
        &mut self,
        plan: &SubsystemPlan,
        solver: &dyn LexSolver,
        cfg: &DecomposeConfig,
    ) -> Result<(ParetoFront, bool), DecomposeError> {
        let name = &plan.spec.name;
        if let Some(hit) = self.entries.get(name) {
            let to_cached: HashMap<String, String> = plan
                .child
                .variable_names()
                .zip(hit.child.variable_names())
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect();
            if plan.child.variable_count() != hit.child.variable_count()
                || !same_structure(&plan.child.rename_variables(&to_cached)?, &hit.child)
            {
                return Err(DecomposeError::ReplicaMismatch(name.clone()));
            }
            let to_current: HashMap<&str, &str> = to_cached
                .iter()
                .map(|(a, b)| (b.as_str(), a.as_str()))
                .collect();
            let mut front = ParetoFront::new();
            for p in hit.front.points() {
                let mut a = Assignment::new();
                for (v, id) in p.assignment.iter() {
                    a.set(to_current[v], id);
                }
                let mut q = p.clone();
                q.assignment = a;
                front.push_unchecked(q);
            }
            return Ok((front, true));
        }
        let (front, _) = solve_plan(plan, solver, cfg)?;
        self.store(name, &plan.child, &front);
        Ok((front, false))
    }

    /// Front of a whole model under `name`: `compute` runs on first use
    /// only. Later requests must pass a structurally identical model.
    pub fn model_front(
        &mut self,
        name: &str,
        m: &SystemModel,
        compute: impl FnOnce(&SystemModel) -> Result<ParetoFront, DecomposeError>,
    ) -> Result<(ParetoFront, bool), DecomposeError> {
        if let Some(hit) = self.entries.get(name) {
            if !same_structure(m, &hit.child) {
                return Err(DecomposeError::ReplicaMismatch(name.to_string()));
            }
            return Ok((hit.front.clone(), true));
        }
        let front = compute(m)?;
        self.store(name, m, &front);
        Ok((front, false))
    }

    fn store(&mut self, name: &str, child: &SystemModel, front: &ParetoFront) {
        self.solves += 1;
        self.entries.insert(
            name.to_string(),
            CachedSolve {
                child: child.clone(),
                front: front.clone(),
            },
        );
    }
}

/// One subsystem stage of [`decompose_solve_traced`].
#[derive(Debug, Clone, PartialEq)]
pub struct StageTrace {
    pub subsystem: String,
    pub aggregate: String,
    pub external_columns: usize,
    pub front_size: usize,
    pub reused: bool,
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecomposeTrace {
    pub stages: Vec<StageTrace>,
    pub reduced_combinations: u128,
    pub final_stats: FrontStatistics,
    pub wall_time: Duration,
}

/// Solves `m` by folding the subsystems (innermost first) into aggregates
/// and computing the front of the reduced model. Returned assignments are
/// over the original variables and objective vectors are evaluated on `m`.
pub fn decompose_solve(
    m: &SystemModel,
    specs: &[SubsystemSpec],
    solver: &dyn LexSolver,
    cfg: &DecomposeConfig,
) -> Result<ParetoFront, DecomposeError> {
    let mut cache = SubsystemCache::new();
    Ok(decompose_solve_traced(m, specs, solver, cfg, &mut cache)?.0)
}

pub fn decompose_solve_traced(
    m: &SystemModel,
    specs: &[SubsystemSpec],
    solver: &dyn LexSolver,
    cfg: &DecomposeConfig,
    cache: &mut SubsystemCache,
) -> Result<(ParetoFront, DecomposeTrace), DecomposeError> {
    let start = Instant::now();
    let mut current = m.clone();
    let mut aggregates: HashMap<String, AggregateComponent> = HashMap::new();
    let mut stages = Vec::new();
    for spec in specs {
        let t = Instant::now();
        let plan = plan_subsystem(&current, spec)?;
        let (front, reused) = cache.front_for(&plan, solver, cfg)?;
        let agg = build_aggregate(&front, &plan)?;
        current = compose(&current, &plan, &agg)?;
        stages.push(StageTrace {
            subsystem: spec.name.clone(),
            aggregate: plan.aggregate_variable().to_string(),
            external_columns: plan.externals.len(),
            front_size: agg.catalog.len(),
            reused,
            wall_time: t.elapsed(),
        });
        aggregates.insert(plan.aggregate_variable().to_string(), agg);
    }
    let reduced_combinations = current.combinations();
    let (reduced, final_stats) = compute_front_traced(&current, solver, &cfg.engine)?;
    let mut front = ParetoFront::new();
    for p in reduced.points() {
        let a = flatten(&p.assignment, &aggregates)?;
        if !is_feasible(m, &a)? {
            return Err(DecomposeError::ReconstructionInfeasible(a));
        }
        let obj = objective_vector(m, &a)?;
        front
            .insert(ParetoPoint::new(obj, a))
            .map_err(FrontError::from)?;
    }
    let trace = DecomposeTrace {
        stages,
        reduced_combinations,
        final_stats,
        wall_time: start.elapsed(),
    };
    Ok((front, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{brute_force_front, EnumerationBudget};
    use crate::solver::CpSolver;

    fn cat(var: &str, props: &[&str], rows: &[&[f64]]) -> Catalog {
        Catalog::new(
            var,
            props.iter().map(|s| s.to_string()).collect(),
            rows.iter()
                .enumerate()
                .map(|(i, v)| {
                    Component::new(format!("{}{}", var.to_lowercase(), i + 1), v.to_vec())
                })
                .collect(),
        )
        .unwrap()
    }

    fn battery_model() -> SystemModel {
        let m = cat(
            "M",
            &["voltage", "current", "cost"],
            &[&[11.1, 2.0, 10.0], &[7.4, 3.0, 8.0]],
        );
        let b = cat(
            "B",
            &["voltage", "current", "cost"],
            &[
                &[12.0, 10.0, 5.0],
                &[12.0, 8.0, 4.0],
                &[10.0, 12.0, 6.0],
                &[12.0, 9.0, 7.0],
            ],
        );
        let power = Constraint::less_eq(
            "power",
            4.0 * (Expr::prop("M", "voltage") * Expr::prop("M", "current")),
            Expr::prop("B", "voltage") * Expr::prop("B", "current"),
        );
        SystemModel::new(
            vec![m, b],
            vec![power],
            vec![Objective::minimize(
                "cost",
                Expr::prop("B", "cost") + Expr::prop("M", "cost"),
            )],
        )
        .unwrap()
    }

    #[test]
    fn battery_externals() {
        let m = battery_model();
        let ext = external_properties(&m, &SubsystemSpec::new("Bat", ["B"])).unwrap();
        let got: Vec<(ColumnSource, ExternalDirection)> =
            ext.into_iter().map(|e| (e.source, e.direction)).collect();
        assert_eq!(
            got,
            vec![
                (
                    ColumnSource::Raw(PropertyKey::new("B", "voltage")),
                    ExternalDirection::MaximizeIt
                ),
                (
                    ColumnSource::Raw(PropertyKey::new("B", "current")),
                    ExternalDirection::MaximizeIt
                ),
                (
                    ColumnSource::Raw(PropertyKey::new("B", "cost")),
                    ExternalDirection::MinimizeIt
                ),
            ]
        );
    }

    #[test]
    fn battery_front_drops_dominated_tuple() {
        let m = battery_model();
        let spec = SubsystemSpec::new("Bat", ["B"]);
        let f = optimize_subsystem(&m, &spec, &CpSolver::default(), &DecomposeConfig::default())
            .unwrap();
        let mut ids: Vec<&str> = f
            .points()
            .iter()
            .map(|p| p.assignment.get("B").unwrap())
            .collect();
        ids.sort();
        assert_eq!(ids, vec!["b1", "b2", "b3"]);
        let plan = plan_subsystem(&m, &spec).unwrap();
        let agg = build_aggregate(&f, &plan).unwrap();
        assert_eq!(agg.columns, vec!["B_voltage", "B_current", "B_cost"]);
        assert_eq!(agg.catalog.len(), 3);
        let reduced = compose(&m, &plan, &agg).unwrap();
        assert_eq!(
            reduced.variable_names().collect::<Vec<_>>(),
            vec!["M", "Bat"]
        );
    }

    #[test]
    fn decomposed_front_matches_brute_force() {
        let m = battery_model();
        let flat = brute_force_front(&m, EnumerationBudget::default()).unwrap();
        let dec = decompose_solve(
            &m,
            &[SubsystemSpec::new("Bat", ["B"])],
            &CpSolver::default(),
            &DecomposeConfig::default(),
        )
        .unwrap();
        assert_eq!(dec.vectors(), flat.vectors());
        for p in dec.points() {
            assert!(is_feasible(&m, &p.assignment).unwrap());
            assert_eq!(p.assignment.len(), 2);
        }
        let none =
            decompose_solve(&m, &[], &CpSolver::default(), &DecomposeConfig::default()).unwrap();
        assert_eq!(none.vectors(), flat.vectors());
    }

    #[test]
    fn no_shared_functions_means_no_externals() {
        let a = cat("A", &["x"], &[&[1.0], &[2.0]]);
        let b = cat("B", &["y"], &[&[1.0]]);
        let m = SystemModel::new(
            vec![a, b],
            vec![Constraint::less_eq(
                "a",
                Expr::prop("A", "x"),
                Expr::Const(1.5),
            )],
            vec![Objective::minimize("y", Expr::prop("B", "y"))],
        )
        .unwrap();
        let spec = SubsystemSpec::new("S", ["A"]);
        assert!(external_properties(&m, &spec).unwrap().is_empty());
        let f = optimize_subsystem(&m, &spec, &CpSolver::default(), &DecomposeConfig::default())
            .unwrap();
        assert_eq!(f.len(), 1);
    }

    #[test]
    fn sum_rewrite_takes_first_position() {
        let e = Expr::sum([
            Expr::prop("A", "c"),
            Expr::prop("B", "c"),
            Expr::prop("C", "c"),
        ]);
        let pat = Expr::prop("C", "c") + Expr::prop("A", "c");
        let out = apply_rewrite(&e, &pat, &Expr::prop("S", "cost"));
        assert_eq!(out, Expr::prop("S", "cost") + Expr::prop("B", "c"));
        let nested = Expr::max(vec![e.clone()]) * 2.0;
        assert_eq!(
            apply_rewrite(&nested, &pat, &Expr::prop("S", "cost")),
            Expr::max(vec![out]) * 2.0
        );
        assert_eq!(
            apply_rewrite(
                &e,
                &(Expr::prop("D", "c") + Expr::prop("A", "c")),
                &Expr::Const(0.0)
            ),
            e
        );
    }

    #[test]
    fn rewrite_outside_subsystem_rejected() {
        let m = battery_model();
        let spec = SubsystemSpec::new("Bat", ["B"]).with_rewrite("c", Expr::prop("M", "cost"));
        assert!(matches!(
            plan_subsystem(&m, &spec),
            Err(DecomposeError::InvalidRewrite { .. })
        ));
    }

    #[test]
    fn equality_needs_a_handle() {
        let a = cat(
            "A",
            &["v", "cost"],
            &[&[3.3, 1.0], &[5.0, 2.0], &[3.3, 4.0]],
        );
        let b = cat("B", &["v", "cost"], &[&[5.0, 1.0], &[3.3, 3.0]]);
        let m = SystemModel::new(
            vec![a, b],
            vec![Constraint::equal(
                "logic",
                Expr::prop("A", "v"),
                Expr::prop("B", "v"),
            )],
            vec![Objective::minimize(
                "cost",
                Expr::prop("A", "cost") + Expr::prop("B", "cost"),
            )],
        )
        .unwrap();
        let spec = SubsystemSpec::new("S", ["A"]);
        assert!(matches!(
            plan_subsystem(&m, &spec),
            Err(DecomposeError::InconsistentSubsystem { .. })
        ));
        let spec = spec.with_handle(PropertyKey::new("A", "v"));
        let f = optimize_subsystem(&m, &spec, &CpSolver::default(), &DecomposeConfig::default())
            .unwrap();
        let mut tags: Vec<f64> = f.points().iter().map(|p| p.partition[0].1).collect();
        tags.sort_by(f64::total_cmp);
        assert_eq!(tags, vec![3.3, 5.0]);
        let dec = decompose_solve(
            &m,
            &[spec],
            &CpSolver::default(),
            &DecomposeConfig::default(),
        )
        .unwrap();
        let flat = brute_force_front(&m, EnumerationBudget::default()).unwrap();
        assert_eq!(dec.vectors(), flat.vectors());
        let capped = DecomposeConfig {
            handle_cap: 1,
            ..DecomposeConfig::default()
        };
        let spec = SubsystemSpec::new("S", ["A"]).with_handle(PropertyKey::new("A", "v"));
        assert!(matches!(
            optimize_subsystem(&m, &spec, &CpSolver::default(), &capped),
            Err(DecomposeError::HandleCapExceeded {
                combinations: 2,
                ..
            })
        ));
    }

    #[test]
    fn replicas_share_one_solve() {
        let mk = |v: &str| Catalog {
            variable: v.into(),
            ..cat(
                "A",
                &["cost", "perf"],
                &[&[1.0, 1.0], &[2.0, 3.0], &[3.0, 2.0]],
            )
        };
        let m = SystemModel::new(
            vec![mk("A1"), mk("A2"), cat("T", &["cap"], &[&[4.0], &[5.0]])],
            vec![Constraint::less_eq(
                "budget",
                Expr::prop("A1", "cost") + Expr::prop("A2", "cost"),
                Expr::prop("T", "cap"),
            )],
            vec![
                Objective::minimize(
                    "cost",
                    Expr::prop("A1", "cost") + Expr::prop("A2", "cost") + Expr::prop("T", "cap"),
                ),
                Objective::maximize("perf", Expr::prop("A1", "perf") + Expr::prop("A2", "perf")),
            ],
        )
        .unwrap();
        let specs = [
            SubsystemSpec::new("part", ["A1"]).with_alias("P1"),
            SubsystemSpec::new("part", ["A2"]).with_alias("P2"),
        ];
        let mut cache = SubsystemCache::new();
        let (front, trace) = decompose_solve_traced(
            &m,
            &specs,
            &CpSolver::default(),
            &DecomposeConfig::default(),
            &mut cache,
        )
        .unwrap();
        assert_eq!(cache.solves(), 1);
        assert!(trace.stages[1].reused);
        let flat = brute_force_front(&m, EnumerationBudget::default()).unwrap();
        assert_eq!(front.vectors(), flat.vectors());
    }
}
