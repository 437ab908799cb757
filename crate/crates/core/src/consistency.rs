//! Constraint graph, property polarity and subsystem consistency.
//!
//! A property is *monotone* in a function if increasing it never decreases
//! the function value and *antitone* if increasing it never increases it.
//! A property is a consistent maximization property when it is antitone in
//! every constraint left side and minimized objective it appears in and
//! monotone in every right side and maximized objective; consistent
//! minimization is the dual. A subsystem is fully consistent when every
//! property of every function it shares with the rest of the model is
//! consistent.
//!
//! Polarity is certified by sign propagation over interval ranges taken from
//! the catalogs. The analysis is sound but incomplete: it answers
//! [`Polarity::Mixed`] whenever it cannot prove a direction.
//! [`verify_polarity_exhaustive`] is the brute-force counterpart used to
//! audit it.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

use crate::interval::{Interval, Sign};
use crate::model::{Direction, Expr, ModelError, PropertyKey, Relation, SystemModel};

/// Default cap on the number of evaluations an exhaustive check may perform.
pub const DEFAULT_ENUMERATION_CAP: u64 = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConsistencyError {
    #[error("subsystem has no variables")]
    EmptySubsystem,
    #[error("`{0}` is not a variable of the model")]
    NotASubset(String),
    #[error("function {0:?} does not exist")]
    UnknownFunction(FunctionId),
    #[error("exhaustive check needs {needed} evaluations, cap is {cap}")]
    EnumerationCapExceeded { needed: u128, cap: u64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A function node: one side of a constraint or an objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FunctionId {
    Lhs(usize),
    Rhs(usize),
    Objective(usize),
}

impl fmt::Display for FunctionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FunctionId::Lhs(i) => write!(f, "L{i}"),
            FunctionId::Rhs(i) => write!(f, "R{i}"),
            FunctionId::Objective(i) => write!(f, "F{i}"),
        }
    }
}

/// Bipartite multigraph between variables and functions. One edge per
/// syntactic property occurrence, so repeated references give parallel
/// edges.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintGraph {
    pub variables: BTreeSet<String>,
    pub functions: Vec<FunctionId>,
    pub edges: Vec<(FunctionId, PropertyKey)>,
}

impl ConstraintGraph {
    pub fn edges_of(&self, f: FunctionId) -> impl Iterator<Item = &PropertyKey> {
        self.edges
            .iter()
            .filter(move |(g, _)| *g == f)
            .map(|(_, k)| k)
    }

    /// Variables adjacent to a function node.
    pub fn neighbors(&self, f: FunctionId) -> BTreeSet<&str> {
        self.edges_of(f).map(|k| k.variable.as_str()).collect()
    }
}

pub fn build_graph(m: &SystemModel) -> ConstraintGraph {
    let mut functions = Vec::new();
    let mut edges = Vec::new();
    for (id, expr) in m.functions() {
        functions.push(id);
        edges.extend(expr.property_refs().into_iter().map(|k| (id, k.clone())));
    }
    ConstraintGraph {
        variables: m.variable_names().map(str::to_string).collect(),
        functions,
        edges,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarity {
    Constant,
    Monotone,
    Antitone,
    Mixed,
}

impl Polarity {
    pub fn join(self, other: Polarity) -> Polarity {
        use Polarity::*;
        match (self, other) {
            (Constant, p) | (p, Constant) => p,
            (a, b) if a == b => a,
            _ => Mixed,
        }
    }

    pub fn flip(self) -> Polarity {
        match self {
            Polarity::Monotone => Polarity::Antitone,
            Polarity::Antitone => Polarity::Monotone,
            p => p,
        }
    }

    /// Polarity of `g * c` where `g` has polarity `self` and `c` has sign `s`.
    fn scale(self, s: Sign) -> Polarity {
        match (self, s) {
            (Polarity::Constant, _) | (_, Sign::Zero) => Polarity::Constant,
            (p, Sign::NonNegative) => p,
            (p, Sign::NonPositive) => p.flip(),
            (_, Sign::Unknown) => Polarity::Mixed,
        }
    }

    /// Whether this polarity is admissible where `want` is required; a
    /// constant occurrence satisfies any requirement.
    pub fn satisfies(self, want: Polarity) -> bool {
        self == Polarity::Constant || self == want
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Polarity::Constant => "constant",
            Polarity::Monotone => "monotone",
            Polarity::Antitone => "antitone",
            Polarity::Mixed => "mixed",
        };
        f.write_str(s)
    }
}

/// Catalog range of one property column.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueRange {
    pub property: PropertyKey,
    pub lo: f64,
    pub hi: f64,
}

/// Ranges of every property column of the model.
pub fn value_ranges(m: &SystemModel) -> Vec<ValueRange> {
    let mut out = Vec::new();
    for cat in m.catalogs() {
        for (p, name) in cat.properties.iter().enumerate() {
            if let Some((lo, hi)) = cat.range(p) {
                out.push(ValueRange {
                    property: PropertyKey::new(cat.variable.clone(), name.clone()),
                    lo,
                    hi,
                });
            }
        }
    }
    out
}

/// Sign-propagation polarity of `p` in `expr`. Properties without a range
/// are treated as unbounded.
pub fn polarity(expr: &Expr, p: &PropertyKey, ranges: &[ValueRange]) -> Polarity {
    let map: HashMap<&PropertyKey, Interval> = ranges
        .iter()
        .map(|r| (&r.property, Interval::new(r.lo, r.hi)))
        .collect();
    polarity_with(expr, p, &|k| {
        map.get(k).copied().unwrap_or(Interval::ENTIRE)
    })
}

pub(crate) fn polarity_with(
    expr: &Expr,
    p: &PropertyKey,
    range: &dyn Fn(&PropertyKey) -> Interval,
) -> Polarity {
    if !expr.mentions(p) {
        return Polarity::Constant;
    }
    analyze(expr, p, range).0
}

fn analyze(
    expr: &Expr,
    p: &PropertyKey,
    range: &dyn Fn(&PropertyKey) -> Interval,
) -> (Polarity, Interval) {
    match expr {
        Expr::Const(c) => (Polarity::Constant, Interval::point(*c)),
        Expr::Prop(k) => {
            let pol = if k == p {
                Polarity::Monotone
            } else {
                Polarity::Constant
            };
            (pol, range(k))
        }
        Expr::Neg(a) => {
            let (pa, ra) = analyze(a, p, range);
            (pa.flip(), ra.neg())
        }
        Expr::Add(a, b) => {
            let (pa, ra) = analyze(a, p, range);
            let (pb, rb) = analyze(b, p, range);
            (pa.join(pb), ra.add(rb))
        }
        Expr::Sub(a, b) => {
            let (pa, ra) = analyze(a, p, range);
            let (pb, rb) = analyze(b, p, range);
            (pa.join(pb.flip()), ra.sub(rb))
        }
        Expr::Mul(a, b) => {
            let (pa, ra) = analyze(a, p, range);
            let (pb, rb) = analyze(b, p, range);
            (product_polarity(pa, ra, pb, rb), ra.mul(rb))
        }
        Expr::Div(a, b) => {
            let (pa, ra) = analyze(a, p, range);
            let (pb, rb) = analyze(b, p, range);
            match ra.div(rb) {
                Some(q) => {
                    // a / b = a * (1/b); 1/b reverses direction on a
                    // sign-definite range.
                    let recip = Interval::point(1.0).div(rb).unwrap_or(Interval::ENTIRE);
                    (product_polarity(pa, ra, pb.flip(), recip), q)
                }
                None => {
                    let pol = if pa == Polarity::Constant && pb == Polarity::Constant {
                        Polarity::Constant
                    } else {
                        Polarity::Mixed
                    };
                    (pol, Interval::ENTIRE)
                }
            }
        }
        Expr::Min(cs) | Expr::Max(cs) => {
            let is_min = matches!(expr, Expr::Min(_));
            let mut pol = Polarity::Constant;
            let mut acc: Option<Interval> = None;
            for c in cs {
                let (pc, rc) = analyze(c, p, range);
                pol = pol.join(pc);
                acc = Some(match acc {
                    None => rc,
                    Some(r) if is_min => r.min(rc),
                    Some(r) => r.max(rc),
                });
            }
            (pol, acc.unwrap_or(Interval::ENTIRE))
        }
    }
}

// f(x2) - f(x1) = (a2 - a1) * b2 + a1 * (b2 - b1)
fn product_polarity(pa: Polarity, ra: Interval, pb: Polarity, rb: Interval) -> Polarity {
    pa.scale(rb.sign()).join(pb.scale(ra.sign()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConsistencyKind {
    ConsistentMax,
    ConsistentMin,
    Inconsistent,
}

impl fmt::Display for ConsistencyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConsistencyKind::ConsistentMax => "consistent-max",
            ConsistencyKind::ConsistentMin => "consistent-min",
            ConsistencyKind::Inconsistent => "inconsistent",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyClassification {
    pub property: PropertyKey,
    pub kind: ConsistencyKind,
    pub witnesses: Vec<(FunctionId, Polarity)>,
}

/// How a function is pushed by optimization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionRole {
    Lhs { equality: bool },
    Rhs { equality: bool },
    Objective(Direction),
}

impl FunctionRole {
    pub fn of(m: &SystemModel, f: FunctionId) -> FunctionRole {
        match f {
            FunctionId::Lhs(i) => FunctionRole::Lhs {
                equality: m.constraints()[i].relation == Relation::Equal,
            },
            FunctionId::Rhs(i) => FunctionRole::Rhs {
                equality: m.constraints()[i].relation == Relation::Equal,
            },
            FunctionId::Objective(i) => FunctionRole::Objective(m.objectives()[i].direction),
        }
    }

    fn is_equality(self) -> bool {
        matches!(
            self,
            FunctionRole::Lhs { equality: true } | FunctionRole::Rhs { equality: true }
        )
    }

    /// Polarity a maximization property must have here.
    fn wanted_for_max(self) -> Polarity {
        match self {
            FunctionRole::Lhs { .. } | FunctionRole::Objective(Direction::Minimize) => {
                Polarity::Antitone
            }
            FunctionRole::Rhs { .. } | FunctionRole::Objective(Direction::Maximize) => {
                Polarity::Monotone
            }
        }
    }
}

/// A function as seen by the classifier.
pub struct FunctionView<'a> {
    pub id: FunctionId,
    pub role: FunctionRole,
    pub expr: &'a Expr,
}

/// Classifies `p` over an explicit list of functions.
pub fn classify_over(
    functions: &[FunctionView<'_>],
    p: &PropertyKey,
    range: &dyn Fn(&PropertyKey) -> Interval,
    declared: &dyn Fn(FunctionId, &PropertyKey) -> Option<Polarity>,
) -> PropertyClassification {
    let mut witnesses = Vec::new();
    let mut max_ok = true;
    let mut min_ok = true;
    let mut in_equality = false;
    for f in functions {
        if !f.expr.mentions(p) {
            continue;
        }
        let pol = declared(f.id, p).unwrap_or_else(|| polarity_with(f.expr, p, range));
        witnesses.push((f.id, pol));
        if f.role.is_equality() {
            in_equality = true;
        }
        let want = f.role.wanted_for_max();
        max_ok &= pol.satisfies(want);
        min_ok &= pol.satisfies(want.flip());
    }
    let kind = if in_equality {
        ConsistencyKind::Inconsistent
    } else if max_ok {
        ConsistencyKind::ConsistentMax
    } else if min_ok {
        ConsistencyKind::ConsistentMin
    } else {
        ConsistencyKind::Inconsistent
    };
    PropertyClassification {
        property: p.clone(),
        kind,
        witnesses,
    }
}

struct Context<'m> {
    model: &'m SystemModel,
    ranges: HashMap<PropertyKey, Interval>,
}

impl<'m> Context<'m> {
    fn new(model: &'m SystemModel) -> Self {
        let ranges = value_ranges(model)
            .into_iter()
            .map(|r| (r.property, Interval::new(r.lo, r.hi)))
            .collect();
        Context { model, ranges }
    }

    fn classify(&self, p: &PropertyKey, fns: &[FunctionId]) -> PropertyClassification {
        let views: Vec<FunctionView<'_>> = fns
            .iter()
            .map(|&id| FunctionView {
                id,
                role: FunctionRole::of(self.model, id),
                expr: self.model.function(id).expect("function id from model"),
            })
            .collect();
        let declared = |f: FunctionId, k: &PropertyKey| {
            self.model
                .declared_polarities()
                .iter()
                .find(|d| d.function == f && &d.property == k)
                .map(|d| d.polarity)
        };
        classify_over(
            &views,
            p,
            &|k| self.ranges.get(k).copied().unwrap_or(Interval::ENTIRE),
            &declared,
        )
    }
}

/// Classifies `p` over every function of the model.
pub fn classify_property(m: &SystemModel, p: &PropertyKey) -> PropertyClassification {
    let fns: Vec<FunctionId> = m.functions().map(|(id, _)| id).collect();
    Context::new(m).classify(p, &fns)
}

/// Classifies `p` considering only `functions`.
pub fn classify_property_in(
    m: &SystemModel,
    p: &PropertyKey,
    functions: &BTreeSet<FunctionId>,
) -> PropertyClassification {
    let fns: Vec<FunctionId> = functions.iter().copied().collect();
    Context::new(m).classify(p, &fns)
}

/// Classification of every property referenced by some function, sorted
/// by property.
pub fn classify_all(m: &SystemModel) -> Vec<PropertyClassification> {
    let ctx = Context::new(m);
    let fns: Vec<FunctionId> = m.functions().map(|(id, _)| id).collect();
    referenced_properties(m, &fns)
        .iter()
        .map(|p| ctx.classify(p, &fns))
        .collect()
}

fn referenced_properties(m: &SystemModel, fns: &[FunctionId]) -> BTreeSet<PropertyKey> {
    fns.iter()
        .filter_map(|&f| m.function(f))
        .flat_map(|e| e.property_refs().into_iter().cloned())
        .collect()
}

fn check_subset<'a>(
    m: &SystemModel,
    x: impl IntoIterator<Item = &'a str>,
) -> Result<BTreeSet<&'a str>, ConsistencyError> {
    let mut set = BTreeSet::new();
    for v in x {
        if m.variable_index(v).is_none() {
            return Err(ConsistencyError::NotASubset(v.to_string()));
        }
        set.insert(v);
    }
    if set.is_empty() {
        return Err(ConsistencyError::EmptySubsystem);
    }
    Ok(set)
}

/// Functions shared between `x` and the rest of the model.
///
/// Sharing is decided per constraint: when the variables of a constraint
/// (both sides together) meet `x` and its complement, both of its side
/// functions are shared, since each side bounds the other. An objective is
/// shared when its own variables meet both.
pub fn shared_functions<'a>(
    m: &SystemModel,
    x: impl IntoIterator<Item = &'a str>,
) -> Result<BTreeSet<FunctionId>, ConsistencyError> {
    let x = check_subset(m, x)?;
    let straddles = |vars: BTreeSet<&str>| {
        vars.iter().any(|v| x.contains(v)) && vars.iter().any(|v| !x.contains(v))
    };
    let mut out = BTreeSet::new();
    for (i, c) in m.constraints().iter().enumerate() {
        if straddles(c.variables()) {
            out.insert(FunctionId::Lhs(i));
            out.insert(FunctionId::Rhs(i));
        }
    }
    for (i, o) in m.objectives().iter().enumerate() {
        if straddles(o.expr.variables()) {
            out.insert(FunctionId::Objective(i));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub function: FunctionId,
    pub property: PropertyKey,
    pub polarity: Polarity,
}

/// Checks that every property of every shared function is consistent
/// (classified over the shared functions).
pub fn is_fully_consistent<'a>(
    m: &SystemModel,
    x: impl IntoIterator<Item = &'a str>,
) -> Result<(bool, Vec<Violation>), ConsistencyError> {
    let shared = shared_functions(m, x)?;
    let fns: Vec<FunctionId> = shared.iter().copied().collect();
    let ctx = Context::new(m);
    let mut violations = Vec::new();
    for p in referenced_properties(m, &fns) {
        let c = ctx.classify(&p, &fns);
        if c.kind == ConsistencyKind::Inconsistent {
            violations.extend(
                c.witnesses
                    .into_iter()
                    .map(|(function, polarity)| Violation {
                        function,
                        property: p.clone(),
                        polarity,
                    }),
            );
        }
    }
    Ok((violations.is_empty(), violations))
}

/// Brute-force polarity of `p` in function `f`.
///
/// Every other property of the function ranges independently over the
/// distinct values of its catalog column; for each such combination the
/// function is evaluated along the sorted distinct values of `p`. The result
/// is the strongest label consistent with every observed step.
pub fn verify_polarity_exhaustive(
    m: &SystemModel,
    f: FunctionId,
    p: &PropertyKey,
    cap: u64,
) -> Result<Polarity, ConsistencyError> {
    let expr = m.function(f).ok_or(ConsistencyError::UnknownFunction(f))?;
    let domain = |k: &PropertyKey| -> Result<Vec<f64>, ConsistencyError> {
        let (v, q) = m.resolve(k)?;
        Ok(m.catalogs()[v].distinct_values(q))
    };
    let p_values = domain(p)?;
    let others: BTreeMap<PropertyKey, Vec<f64>> = expr
        .property_refs()
        .into_iter()
        .filter(|k| *k != p)
        .map(|k| Ok((k.clone(), domain(k)?)))
        .collect::<Result<_, ConsistencyError>>()?;
    verify_polarity_over(expr, p, &p_values, &others, cap)
}

/// Exhaustive polarity over explicit value domains.
pub fn verify_polarity_over(
    expr: &Expr,
    p: &PropertyKey,
    p_values: &[f64],
    others: &BTreeMap<PropertyKey, Vec<f64>>,
    cap: u64,
) -> Result<Polarity, ConsistencyError> {
    if !expr.mentions(p) {
        return Ok(Polarity::Constant);
    }
    let needed = others.values().fold(p_values.len() as u128, |acc, d| {
        acc.saturating_mul(d.len() as u128)
    });
    if needed > cap as u128 {
        return Err(ConsistencyError::EnumerationCapExceeded { needed, cap });
    }
    let mut sorted = p_values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let keys: Vec<&PropertyKey> = others.keys().collect();
    let doms: Vec<&Vec<f64>> = others.values().collect();
    if doms.iter().any(|d| d.is_empty()) {
        return Ok(Polarity::Constant);
    }
    let mut idx = vec![0usize; keys.len()];
    let (mut up, mut down) = (false, false);
    loop {
        let mut prev: Option<f64> = None;
        for &pv in &sorted {
            let lookup = |k: &PropertyKey| -> Result<f64, ModelError> {
                if k == p {
                    return Ok(pv);
                }
                let i = keys
                    .binary_search(&k)
                    .map_err(|_| ModelError::UnresolvedProperty(k.clone()))?;
                Ok(doms[i][idx[i]])
            };
            let v = expr.eval_with(&lookup)?;
            if let Some(pr) = prev {
                up |= v > pr;
                down |= v < pr;
            }
            prev = Some(v);
        }
        if up && down {
            return Ok(Polarity::Mixed);
        }
        // odometer
        let mut k = 0;
        loop {
            if k == idx.len() {
                return Ok(match (up, down) {
                    (false, false) => Polarity::Constant,
                    (true, false) => Polarity::Monotone,
                    (false, true) => Polarity::Antitone,
                    (true, true) => Polarity::Mixed,
                });
            }
            idx[k] += 1;
            if idx[k] < doms[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}
