//! The catalog-domain optimization model.
//!
//! A [`SystemModel`] is a set of variables, each ranging over the rows of a
//! [`Catalog`], together with inequality (or equality) constraints and a list
//! of objectives. Every property of every component is a finite real, so all
//! expressions evaluate in a single numeric tower.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::ops;

use thiserror::Error;

use crate::consistency::{FunctionId, Polarity};

/// Absolute tolerance used when checking `==` constraints.
pub const EQUALITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("property {0} has no assigned component")]
    UnresolvedProperty(PropertyKey),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("unknown property {0}")]
    UnknownProperty(PropertyKey),
    #[error("unknown component `{id}` for variable `{variable}`")]
    UnknownComponent { variable: String, id: String },
    #[error("division by zero")]
    DivisionByZero,
    #[error("expression produced a non-finite value")]
    NonFinite,
    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),
    #[error("duplicate property `{property}` in catalog `{variable}`")]
    DuplicateProperty { variable: String, property: String },
    #[error("duplicate component id `{id}` in catalog `{variable}`")]
    DuplicateComponent { variable: String, id: String },
    #[error("component `{id}` of `{variable}` has {found} values, expected {expected}")]
    RaggedComponent {
        variable: String,
        id: String,
        expected: usize,
        found: usize,
    },
    #[error("component `{id}` of `{variable}` has a non-finite value")]
    NonFiniteComponent { variable: String, id: String },
    #[error("catalog `{0}` has no components")]
    EmptyCatalog(String),
    #[error("model has no objectives")]
    NoObjectives,
    #[error("duplicate constraint or objective name `{0}`")]
    DuplicateName(String),
    #[error("empty name")]
    EmptyName,
}

/// A `Variable.property` reference.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PropertyKey {
    pub variable: String,
    pub property: String,
}

impl PropertyKey {
    pub fn new(variable: impl Into<String>, property: impl Into<String>) -> Self {
        PropertyKey {
            variable: variable.into(),
            property: property.into(),
        }
    }
}

impl fmt::Display for PropertyKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.variable, self.property)
    }
}

/// One row of a catalog.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub id: String,
    pub values: Vec<f64>,
}

impl Component {
    pub fn new(id: impl Into<String>, values: Vec<f64>) -> Self {
        Component {
            id: id.into(),
            values,
        }
    }
}

/// The finite domain of one variable: equal-length property tuples.
#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    pub variable: String,
    pub properties: Vec<String>,
    pub components: Vec<Component>,
}

impl Catalog {
    /// Builds a catalog, checking that names are unique, rows are rectangular
    /// and every value is finite. An empty component list is allowed here;
    /// [`SystemModel::new`] rejects it.
    pub fn new(
        variable: impl Into<String>,
        properties: Vec<String>,
        components: Vec<Component>,
    ) -> Result<Self, ModelError> {
        let variable = variable.into();
        if variable.is_empty() {
            return Err(ModelError::EmptyName);
        }
        let mut seen = BTreeSet::new();
        for p in &properties {
            if p.is_empty() {
                return Err(ModelError::EmptyName);
            }
            if !seen.insert(p.as_str()) {
                return Err(ModelError::DuplicateProperty {
                    variable,
                    property: p.clone(),
                });
            }
        }
        let mut ids = BTreeSet::new();
        for c in &components {
            if !ids.insert(c.id.as_str()) {
                return Err(ModelError::DuplicateComponent {
                    variable,
                    id: c.id.clone(),
                });
            }
            if c.values.len() != properties.len() {
                return Err(ModelError::RaggedComponent {
                    variable,
                    id: c.id.clone(),
                    expected: properties.len(),
                    found: c.values.len(),
                });
            }
            if c.values.iter().any(|v| !v.is_finite()) {
                return Err(ModelError::NonFiniteComponent {
                    variable,
                    id: c.id.clone(),
                });
            }
        }
        Ok(Catalog {
            variable,
            properties,
            components,
        })
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn property_index(&self, name: &str) -> Option<usize> {
        self.properties.iter().position(|p| p == name)
    }

    pub fn component(&self, id: &str) -> Option<&Component> {
        self.components.iter().find(|c| c.id == id)
    }

    pub fn column(&self, prop: usize) -> impl Iterator<Item = f64> + '_ {
        self.components.iter().map(move |c| c.values[prop])
    }

    /// `(min, max)` of a column, `None` for an empty catalog.
    pub fn range(&self, prop: usize) -> Option<(f64, f64)> {
        self.column(prop).fold(None, |acc, v| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
        })
    }

    /// Sorted distinct values of a column.
    pub fn distinct_values(&self, prop: usize) -> Vec<f64> {
        let mut vals: Vec<f64> = self.column(prop).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        vals
    }

    /// Copy of the catalog keeping only the rows accepted by `keep`.
    pub fn filtered(&self, mut keep: impl FnMut(&Component) -> bool) -> Catalog {
        Catalog {
            variable: self.variable.clone(),
            properties: self.properties.clone(),
            components: self
                .components
                .iter()
                .filter(|c| keep(c))
                .cloned()
                .collect(),
        }
    }
}

/// Arithmetic over property references.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Prop(PropertyKey),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Min(Vec<Expr>),
    Max(Vec<Expr>),
}

impl Expr {
    pub fn prop(variable: impl Into<String>, property: impl Into<String>) -> Expr {
        Expr::Prop(PropertyKey::new(variable, property))
    }

    pub fn constant(v: f64) -> Expr {
        Expr::Const(v)
    }

    pub fn min(children: Vec<Expr>) -> Expr {
        Expr::Min(children)
    }

    pub fn max(children: Vec<Expr>) -> Expr {
        Expr::Max(children)
    }

    /// Sum of `terms`, left associated. An empty sum is `0`.
    pub fn sum(terms: impl IntoIterator<Item = Expr>) -> Expr {
        let mut it = terms.into_iter();
        match it.next() {
            None => Expr::Const(0.0),
            Some(first) => it.fold(first, |acc, t| acc + t),
        }
    }

    /// Every property reference in syntactic order, repeats included.
    pub fn property_refs(&self) -> Vec<&PropertyKey> {
        let mut out = Vec::new();
        self.collect_refs(&mut out);
        out
    }

    fn collect_refs<'a>(&'a self, out: &mut Vec<&'a PropertyKey>) {
        match self {
            Expr::Const(_) => {}
            Expr::Prop(k) => out.push(k),
            Expr::Neg(a) => a.collect_refs(out),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.collect_refs(out);
                b.collect_refs(out);
            }
            Expr::Min(cs) | Expr::Max(cs) => cs.iter().for_each(|c| c.collect_refs(out)),
        }
    }

    pub fn variables(&self) -> BTreeSet<&str> {
        self.property_refs()
            .into_iter()
            .map(|k| k.variable.as_str())
            .collect()
    }

    pub fn mentions(&self, key: &PropertyKey) -> bool {
        self.property_refs().into_iter().any(|k| k == key)
    }

    /// Evaluates with an arbitrary property lookup.
    pub fn eval_with(
        &self,
        lookup: &dyn Fn(&PropertyKey) -> Result<f64, ModelError>,
    ) -> Result<f64, ModelError> {
        let v = match self {
            Expr::Const(c) => *c,
            Expr::Prop(k) => lookup(k)?,
            Expr::Neg(a) => -a.eval_with(lookup)?,
            Expr::Add(a, b) => a.eval_with(lookup)? + b.eval_with(lookup)?,
            Expr::Sub(a, b) => a.eval_with(lookup)? - b.eval_with(lookup)?,
            Expr::Mul(a, b) => a.eval_with(lookup)? * b.eval_with(lookup)?,
            Expr::Div(a, b) => {
                let n = a.eval_with(lookup)?;
                let d = b.eval_with(lookup)?;
                if d == 0.0 {
                    return Err(ModelError::DivisionByZero);
                }
                n / d
            }
            Expr::Min(cs) => fold_extreme(cs, lookup, f64::min)?,
            Expr::Max(cs) => fold_extreme(cs, lookup, f64::max)?,
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ModelError::NonFinite)
        }
    }

    /// Rewrites every property reference through `f`.
    pub fn map_props(&self, f: &dyn Fn(&PropertyKey) -> Expr) -> Expr {
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Prop(k) => f(k),
            Expr::Neg(a) => Expr::Neg(Box::new(a.map_props(f))),
            Expr::Add(a, b) => Expr::Add(Box::new(a.map_props(f)), Box::new(b.map_props(f))),
            Expr::Sub(a, b) => Expr::Sub(Box::new(a.map_props(f)), Box::new(b.map_props(f))),
            Expr::Mul(a, b) => Expr::Mul(Box::new(a.map_props(f)), Box::new(b.map_props(f))),
            Expr::Div(a, b) => Expr::Div(Box::new(a.map_props(f)), Box::new(b.map_props(f))),
            Expr::Min(cs) => Expr::Min(cs.iter().map(|c| c.map_props(f)).collect()),
            Expr::Max(cs) => Expr::Max(cs.iter().map(|c| c.map_props(f)).collect()),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Const(c) if *c < 0.0 => 3,
            _ => 4,
        }
    }
}

fn fold_extreme(
    cs: &[Expr],
    lookup: &dyn Fn(&PropertyKey) -> Result<f64, ModelError>,
    pick: fn(f64, f64) -> f64,
) -> Result<f64, ModelError> {
    let mut acc: Option<f64> = None;
    for c in cs {
        let v = c.eval_with(lookup)?;
        acc = Some(acc.map_or(v, |a| pick(a, v)));
    }
    acc.ok_or(ModelError::NonFinite)
}

// Printing is re-parseable: it parenthesizes by precedence so the parser
// rebuilds the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn child(f: &mut fmt::Formatter<'_>, e: &Expr, min_prec: u8) -> fmt::Result {
            if e.precedence() < min_prec {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        }
        fn list(f: &mut fmt::Formatter<'_>, name: &str, cs: &[Expr]) -> fmt::Result {
            write!(f, "{name}(")?;
            for (i, c) in cs.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{c}")?;
            }
            write!(f, ")")
        }
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Prop(k) => write!(f, "{k}"),
            // `-(3)` keeps a negated literal distinct from the literal -3
            Expr::Neg(a) if matches!(**a, Expr::Const(_)) => write!(f, "-({a})"),
            Expr::Neg(a) => {
                write!(f, "-")?;
                child(f, a, 4)
            }
            Expr::Add(a, b) => {
                child(f, a, 1)?;
                write!(f, " + ")?;
                child(f, b, 2)
            }
            Expr::Sub(a, b) => {
                child(f, a, 1)?;
                write!(f, " - ")?;
                child(f, b, 2)
            }
            Expr::Mul(a, b) => {
                child(f, a, 2)?;
                write!(f, " * ")?;
                child(f, b, 3)
            }
            Expr::Div(a, b) => {
                child(f, a, 2)?;
                write!(f, " / ")?;
                child(f, b, 3)
            }
            Expr::Min(cs) => list(f, "min", cs),
            Expr::Max(cs) => list(f, "max", cs),
        }
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $variant:ident) => {
        impl ops::$tr for Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                Expr::$variant(Box::new(self), Box::new(rhs))
            }
        }
        impl ops::$tr<f64> for Expr {
            type Output = Expr;
            fn $m(self, rhs: f64) -> Expr {
                Expr::$variant(Box::new(self), Box::new(Expr::Const(rhs)))
            }
        }
        impl ops::$tr<Expr> for f64 {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                Expr::$variant(Box::new(Expr::Const(self)), Box::new(rhs))
            }
        }
    };
}

binop!(Add, add, Add);
binop!(Sub, sub, Sub);
binop!(Mul, mul, Mul);
binop!(Div, div, Div);

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    LessOrEqual,
    Equal,
}

/// `lhs <= rhs` or `lhs == rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub lhs: Expr,
    pub rhs: Expr,
    pub relation: Relation,
}

impl Constraint {
    pub fn less_eq(name: impl Into<String>, lhs: Expr, rhs: Expr) -> Self {
        Constraint {
            name: name.into(),
            lhs,
            rhs,
            relation: Relation::LessOrEqual,
        }
    }

    pub fn equal(name: impl Into<String>, lhs: Expr, rhs: Expr) -> Self {
        Constraint {
            name: name.into(),
            lhs,
            rhs,
            relation: Relation::Equal,
        }
    }

    pub fn variables(&self) -> BTreeSet<&str> {
        let mut v = self.lhs.variables();
        v.extend(self.rhs.variables());
        v
    }

    /// Whether `lhs` and `rhs` values satisfy the relation.
    pub fn holds(&self, lhs: f64, rhs: f64) -> bool {
        match self.relation {
            Relation::LessOrEqual => lhs <= rhs,
            Relation::Equal => (lhs - rhs).abs() <= EQUALITY_TOLERANCE,
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.relation {
            Relation::LessOrEqual => "<=",
            Relation::Equal => "==",
        };
        write!(f, "{} {op} {}", self.lhs, self.rhs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Minimize,
    Maximize,
}

impl Direction {
    /// Maps a raw value into minimization space and back (negation is an
    /// involution, so the same function does both).
    pub fn canonical(self, v: f64) -> f64 {
        match self {
            Direction::Minimize => v,
            Direction::Maximize => -v,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub name: String,
    pub expr: Expr,
    pub direction: Direction,
}

impl Objective {
    pub fn minimize(name: impl Into<String>, expr: Expr) -> Self {
        Objective {
            name: name.into(),
            expr,
            direction: Direction::Minimize,
        }
    }

    pub fn maximize(name: impl Into<String>, expr: Expr) -> Self {
        Objective {
            name: name.into(),
            expr,
            direction: Direction::Maximize,
        }
    }
}

/// A user-asserted polarity of one property inside one function, used when
/// sign propagation is too conservative.
#[derive(Debug, Clone, PartialEq)]
pub struct DeclaredPolarity {
    pub function: FunctionId,
    pub property: PropertyKey,
    pub polarity: Polarity,
}

/// Variables, catalogs, constraints and objectives. Immutable once built.
#[derive(Debug, Clone)]
pub struct SystemModel {
    catalogs: Vec<Catalog>,
    constraints: Vec<Constraint>,
    objectives: Vec<Objective>,
    declared: Vec<DeclaredPolarity>,
    var_index: HashMap<String, usize>,
    prop_index: Vec<HashMap<String, usize>>,
    id_index: Vec<HashMap<String, usize>>,
}

impl PartialEq for SystemModel {
    fn eq(&self, other: &Self) -> bool {
        self.catalogs == other.catalogs
            && self.constraints == other.constraints
            && self.objectives == other.objectives
            && self.declared == other.declared
    }
}

impl SystemModel {
    /// Validates and indexes a model. Variables are ordered as `catalogs`.
    pub fn new(
        catalogs: Vec<Catalog>,
        constraints: Vec<Constraint>,
        objectives: Vec<Objective>,
    ) -> Result<Self, ModelError> {
        if objectives.is_empty() {
            return Err(ModelError::NoObjectives);
        }
        let mut var_index = HashMap::new();
        let mut prop_index = Vec::with_capacity(catalogs.len());
        let mut id_index = Vec::with_capacity(catalogs.len());
        for (i, cat) in catalogs.iter().enumerate() {
            // Re-run row validation for catalogs built field by field.
            let cat = Catalog::new(
                cat.variable.clone(),
                cat.properties.clone(),
                cat.components.clone(),
            )?;
            if cat.is_empty() {
                return Err(ModelError::EmptyCatalog(cat.variable));
            }
            if var_index.insert(cat.variable.clone(), i).is_some() {
                return Err(ModelError::DuplicateVariable(cat.variable));
            }
            prop_index.push(
                cat.properties
                    .iter()
                    .enumerate()
                    .map(|(j, p)| (p.clone(), j))
                    .collect(),
            );
            id_index.push(
                cat.components
                    .iter()
                    .enumerate()
                    .map(|(j, c)| (c.id.clone(), j))
                    .collect(),
            );
        }
        let mut names = BTreeSet::new();
        for name in constraints
            .iter()
            .map(|c| &c.name)
            .chain(objectives.iter().map(|o| &o.name))
        {
            if name.is_empty() {
                return Err(ModelError::EmptyName);
            }
            if !names.insert(name.as_str()) {
                return Err(ModelError::DuplicateName(name.clone()));
            }
        }
        let model = SystemModel {
            catalogs,
            constraints,
            objectives,
            declared: Vec::new(),
            var_index,
            prop_index,
            id_index,
        };
        for e in model.functions() {
            for k in e.1.property_refs() {
                model.resolve(k)?;
            }
        }
        Ok(model)
    }

    /// Adds a declared polarity for `(function, property)`.
    pub fn with_declared_polarity(
        mut self,
        function: FunctionId,
        property: PropertyKey,
        polarity: Polarity,
    ) -> Result<Self, ModelError> {
        self.resolve(&property)?;
        self.declared.push(DeclaredPolarity {
            function,
            property,
            polarity,
        });
        Ok(self)
    }

    pub fn declared_polarities(&self) -> &[DeclaredPolarity] {
        &self.declared
    }

    pub fn catalogs(&self) -> &[Catalog] {
        &self.catalogs
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objectives(&self) -> &[Objective] {
        &self.objectives
    }

    pub fn variable_count(&self) -> usize {
        self.catalogs.len()
    }

    pub fn variable_names(&self) -> impl Iterator<Item = &str> {
        self.catalogs.iter().map(|c| c.variable.as_str())
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.var_index.get(name).copied()
    }

    pub fn catalog(&self, name: &str) -> Option<&Catalog> {
        self.variable_index(name).map(|i| &self.catalogs[i])
    }

    /// Resolves a property reference to `(variable index, property index)`.
    pub fn resolve(&self, key: &PropertyKey) -> Result<(usize, usize), ModelError> {
        let v = self
            .variable_index(&key.variable)
            .ok_or_else(|| ModelError::UnknownVariable(key.variable.clone()))?;
        let p = self.prop_index[v]
            .get(&key.property)
            .copied()
            .ok_or_else(|| ModelError::UnknownProperty(key.clone()))?;
        Ok((v, p))
    }

    pub fn component_index(&self, var: usize, id: &str) -> Option<usize> {
        self.id_index[var].get(id).copied()
    }

    /// Number of complete assignments, saturating at `u128::MAX`.
    pub fn combinations(&self) -> u128 {
        self.catalogs
            .iter()
            .fold(1u128, |acc, c| acc.saturating_mul(c.len() as u128))
    }

    /// Every function of the model with its identifier: one per constraint
    /// side and one per objective.
    pub fn functions(&self) -> impl Iterator<Item = (FunctionId, &Expr)> {
        let cons = self
            .constraints
            .iter()
            .enumerate()
            .flat_map(|(i, c)| [(FunctionId::Lhs(i), &c.lhs), (FunctionId::Rhs(i), &c.rhs)]);
        let objs = self
            .objectives
            .iter()
            .enumerate()
            .map(|(i, o)| (FunctionId::Objective(i), &o.expr));
        cons.chain(objs)
    }

    pub fn function(&self, id: FunctionId) -> Option<&Expr> {
        match id {
            FunctionId::Lhs(i) => self.constraints.get(i).map(|c| &c.lhs),
            FunctionId::Rhs(i) => self.constraints.get(i).map(|c| &c.rhs),
            FunctionId::Objective(i) => self.objectives.get(i).map(|o| &o.expr),
        }
    }

    pub fn function_name(&self, id: FunctionId) -> String {
        match id {
            FunctionId::Lhs(i) => format!("{}.lhs", self.constraints[i].name),
            FunctionId::Rhs(i) => format!("{}.rhs", self.constraints[i].name),
            FunctionId::Objective(i) => self.objectives[i].name.clone(),
        }
    }

    /// Compiles an expression against this model's indices.
    pub fn compile(&self, expr: &Expr) -> Result<CompiledExpr, ModelError> {
        Ok(match expr {
            Expr::Const(c) => CompiledExpr::Const(*c),
            Expr::Prop(k) => {
                let (var, prop) = self.resolve(k)?;
                CompiledExpr::Prop { var, prop }
            }
            Expr::Neg(a) => CompiledExpr::Neg(Box::new(self.compile(a)?)),
            Expr::Add(a, b) => {
                CompiledExpr::Add(Box::new(self.compile(a)?), Box::new(self.compile(b)?))
            }
            Expr::Sub(a, b) => {
                CompiledExpr::Sub(Box::new(self.compile(a)?), Box::new(self.compile(b)?))
            }
            Expr::Mul(a, b) => {
                CompiledExpr::Mul(Box::new(self.compile(a)?), Box::new(self.compile(b)?))
            }
            Expr::Div(a, b) => {
                CompiledExpr::Div(Box::new(self.compile(a)?), Box::new(self.compile(b)?))
            }
            Expr::Min(cs) => CompiledExpr::Min(
                cs.iter()
                    .map(|c| self.compile(c))
                    .collect::<Result<_, _>>()?,
            ),
            Expr::Max(cs) => CompiledExpr::Max(
                cs.iter()
                    .map(|c| self.compile(c))
                    .collect::<Result<_, _>>()?,
            ),
        })
    }

    /// The value of `var`'s property `prop` when it takes catalog row `row`.
    pub fn value(&self, var: usize, row: usize, prop: usize) -> f64 {
        self.catalogs[var].components[row].values[prop]
    }

    /// Returns a copy with variables renamed through `map` (names missing
    /// from the map are kept).
    pub fn rename_variables(
        &self,
        map: &HashMap<String, String>,
    ) -> Result<SystemModel, ModelError> {
        let rn = |n: &str| map.get(n).cloned().unwrap_or_else(|| n.to_string());
        let re = |e: &Expr| e.map_props(&|k| Expr::prop(rn(&k.variable), k.property.clone()));
        let catalogs = self
            .catalogs
            .iter()
            .map(|c| Catalog {
                variable: rn(&c.variable),
                ..c.clone()
            })
            .collect();
        let constraints = self
            .constraints
            .iter()
            .map(|c| Constraint {
                name: c.name.clone(),
                lhs: re(&c.lhs),
                rhs: re(&c.rhs),
                relation: c.relation,
            })
            .collect();
        let objectives = self
            .objectives
            .iter()
            .map(|o| Objective {
                name: o.name.clone(),
                expr: re(&o.expr),
                direction: o.direction,
            })
            .collect();
        SystemModel::new(catalogs, constraints, objectives)
    }
}

/// An expression with property references resolved to indices, for hot loops.
#[derive(Debug, Clone, PartialEq)]
pub enum CompiledExpr {
    Const(f64),
    Prop { var: usize, prop: usize },
    Neg(Box<CompiledExpr>),
    Add(Box<CompiledExpr>, Box<CompiledExpr>),
    Sub(Box<CompiledExpr>, Box<CompiledExpr>),
    Mul(Box<CompiledExpr>, Box<CompiledExpr>),
    Div(Box<CompiledExpr>, Box<CompiledExpr>),
    Min(Vec<CompiledExpr>),
    Max(Vec<CompiledExpr>),
}

impl CompiledExpr {
    /// Evaluates against a complete choice of catalog rows (`rows[var]`).
    pub fn eval(&self, m: &SystemModel, rows: &[usize]) -> Result<f64, ModelError> {
        let v = self.eval_raw(m, rows)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ModelError::NonFinite)
        }
    }

    fn eval_raw(&self, m: &SystemModel, rows: &[usize]) -> Result<f64, ModelError> {
        Ok(match self {
            CompiledExpr::Const(c) => *c,
            CompiledExpr::Prop { var, prop } => m.value(*var, rows[*var], *prop),
            CompiledExpr::Neg(a) => -a.eval_raw(m, rows)?,
            CompiledExpr::Add(a, b) => a.eval_raw(m, rows)? + b.eval_raw(m, rows)?,
            CompiledExpr::Sub(a, b) => a.eval_raw(m, rows)? - b.eval_raw(m, rows)?,
            CompiledExpr::Mul(a, b) => a.eval_raw(m, rows)? * b.eval_raw(m, rows)?,
            CompiledExpr::Div(a, b) => {
                let n = a.eval_raw(m, rows)?;
                let d = b.eval_raw(m, rows)?;
                if d == 0.0 {
                    return Err(ModelError::DivisionByZero);
                }
                n / d
            }
            CompiledExpr::Min(cs) => {
                let mut acc = f64::INFINITY;
                for c in cs {
                    acc = acc.min(c.eval_raw(m, rows)?);
                }
                acc
            }
            CompiledExpr::Max(cs) => {
                let mut acc = f64::NEG_INFINITY;
                for c in cs {
                    acc = acc.max(c.eval_raw(m, rows)?);
                }
                acc
            }
        })
    }

    /// Sorted, deduplicated variable indices referenced.
    pub fn variables(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.visit_props(&mut |v, _| out.push(v));
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn visit_props(&self, f: &mut dyn FnMut(usize, usize)) {
        match self {
            CompiledExpr::Const(_) => {}
            CompiledExpr::Prop { var, prop } => f(*var, *prop),
            CompiledExpr::Neg(a) => a.visit_props(f),
            CompiledExpr::Add(a, b)
            | CompiledExpr::Sub(a, b)
            | CompiledExpr::Mul(a, b)
            | CompiledExpr::Div(a, b) => {
                a.visit_props(f);
                b.visit_props(f);
            }
            CompiledExpr::Min(cs) | CompiledExpr::Max(cs) => {
                cs.iter().for_each(|c| c.visit_props(f))
            }
        }
    }
}

/// One chosen component per variable, by name.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assignment(BTreeMap<String, String>);

impl Assignment {
    pub fn new() -> Self {
        Assignment(BTreeMap::new())
    }

    pub fn set(&mut self, variable: impl Into<String>, component: impl Into<String>) {
        self.0.insert(variable.into(), component.into());
    }

    pub fn with(mut self, variable: impl Into<String>, component: impl Into<String>) -> Self {
        self.set(variable, component);
        self
    }

    pub fn get(&self, variable: &str) -> Option<&str> {
        self.0.get(variable).map(String::as_str)
    }

    pub fn remove(&mut self, variable: &str) -> Option<String> {
        self.0.remove(variable)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn extend(&mut self, other: &Assignment) {
        for (k, v) in other.iter() {
            self.set(k, v);
        }
    }

    pub fn from_rows(m: &SystemModel, rows: &[usize]) -> Assignment {
        Assignment(
            m.catalogs
                .iter()
                .zip(rows)
                .map(|(c, &r)| (c.variable.clone(), c.components[r].id.clone()))
                .collect(),
        )
    }

    /// Row index per model variable; fails unless the assignment is complete.
    pub fn to_rows(&self, m: &SystemModel) -> Result<Vec<usize>, ModelError> {
        m.catalogs
            .iter()
            .enumerate()
            .map(|(v, c)| {
                let id = self
                    .get(&c.variable)
                    .ok_or_else(|| ModelError::UnknownVariable(c.variable.clone()))?;
                m.component_index(v, id)
                    .ok_or_else(|| ModelError::UnknownComponent {
                        variable: c.variable.clone(),
                        id: id.to_string(),
                    })
            })
            .collect()
    }
}

fn lookup_in<'a>(
    a: &'a Assignment,
    m: &'a SystemModel,
) -> impl Fn(&PropertyKey) -> Result<f64, ModelError> + 'a {
    move |k| {
        let (v, p) = m.resolve(k)?;
        let id = a
            .get(&k.variable)
            .ok_or_else(|| ModelError::UnresolvedProperty(k.clone()))?;
        let row = m
            .component_index(v, id)
            .ok_or_else(|| ModelError::UnknownComponent {
                variable: k.variable.clone(),
                id: id.to_string(),
            })?;
        Ok(m.value(v, row, p))
    }
}

/// Evaluates `expr` under assignment `a`.
pub fn evaluate(expr: &Expr, a: &Assignment, m: &SystemModel) -> Result<f64, ModelError> {
    expr.eval_with(&lookup_in(a, m))
}

pub fn check_constraint(
    c: &Constraint,
    a: &Assignment,
    m: &SystemModel,
) -> Result<bool, ModelError> {
    let l = evaluate(&c.lhs, a, m)?;
    let r = evaluate(&c.rhs, a, m)?;
    Ok(c.holds(l, r))
}

/// Objective values in minimization space: maximized objectives are negated.
pub fn objective_vector(m: &SystemModel, a: &Assignment) -> Result<Vec<f64>, ModelError> {
    m.objectives
        .iter()
        .map(|o| evaluate(&o.expr, a, m).map(|v| o.direction.canonical(v)))
        .collect()
}

/// Whether `a` satisfies every constraint of `m`.
pub fn is_feasible(m: &SystemModel, a: &Assignment) -> Result<bool, ModelError> {
    for c in &m.constraints {
        if !check_constraint(c, a, m)? {
            return Ok(false);
        }
    }
    Ok(true)
}
