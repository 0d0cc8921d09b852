//! The three core operators (union, strict join, ext) and their derived
//! forms, parameterized by registered binary scalar operations.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::error::{LaraError, Result};
use crate::record::Record;
use crate::rewrite::{choose_union_strategy, join_support_bound_cell, key_relation, SupportBound, UnionStrategy};
use crate::scalar::{Kind, Scalar};
use crate::schema::{KeyAttr, TableSchema, ValueAttr};
use crate::table::AssociativeTable;

/// Declared algebraic property flags of a binary scalar operation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpProperties {
    pub associative: bool,
    pub commutative: bool,
    pub idempotent: bool,
}

/// Role hint for a binary operation: aggregation-like or multiplication-like.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpRole {
    Plus,
    Times,
}

type ScalarFn = dyn Fn(&Scalar, &Scalar) -> Result<Scalar> + Send + Sync;
type UnaryFn = dyn Fn(&Scalar) -> Result<Scalar> + Send + Sync;

/// A named binary scalar operation with declared algebraic structure.
///
/// Identity and annihilator elements are declared per kind (at most one
/// each). Declared structure is spot-validated on random samples at
/// registration; a declared-but-false property is a registration error.
#[derive(Clone)]
pub struct BinaryOpSpec {
    name: String,
    role: OpRole,
    eval: Arc<ScalarFn>,
    properties: OpProperties,
    identities: Vec<Scalar>,
    annihilators: Vec<Scalar>,
    distributes_over: BTreeSet<String>,
    zero_product: bool,
    inverse: Option<Arc<UnaryFn>>,
}

impl fmt::Debug for BinaryOpSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BinaryOpSpec")
            .field("name", &self.name)
            .field("role", &self.role)
            .field("properties", &self.properties)
            .field("identities", &self.identities)
            .field("annihilators", &self.annihilators)
            .finish()
    }
}

impl BinaryOpSpec {
    pub fn new(
        name: impl Into<String>,
        role: OpRole,
        eval: impl Fn(&Scalar, &Scalar) -> Result<Scalar> + Send + Sync + 'static,
    ) -> BinaryOpSpec {
        BinaryOpSpec {
            name: name.into(),
            role,
            eval: Arc::new(eval),
            properties: OpProperties::default(),
            identities: Vec::new(),
            annihilators: Vec::new(),
            distributes_over: BTreeSet::new(),
            zero_product: false,
            inverse: None,
        }
    }

    pub fn with_properties(mut self, properties: OpProperties) -> Self {
        self.properties = properties;
        self
    }

    pub fn with_identities(mut self, identities: Vec<Scalar>) -> Self {
        self.identities = identities;
        self
    }

    pub fn with_annihilators(mut self, annihilators: Vec<Scalar>) -> Self {
        self.annihilators = annihilators;
        self
    }

    pub fn distributing_over<'a>(mut self, names: impl IntoIterator<Item = &'a str>) -> Self {
        self.distributes_over = names.into_iter().map(String::from).collect();
        self
    }

    pub fn with_zero_product(mut self) -> Self {
        self.zero_product = true;
        self
    }

    pub fn with_inverse(
        mut self,
        inv: impl Fn(&Scalar) -> Result<Scalar> + Send + Sync + 'static,
    ) -> Self {
        self.inverse = Some(Arc::new(inv));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn role(&self) -> OpRole {
        self.role
    }

    pub fn properties(&self) -> OpProperties {
        self.properties
    }

    pub fn zero_product(&self) -> bool {
        self.zero_product
    }

    pub fn eval(&self, a: &Scalar, b: &Scalar) -> Result<Scalar> {
        (self.eval)(a, b)
    }

    pub fn invert(&self, v: &Scalar) -> Result<Scalar> {
        match &self.inverse {
            Some(f) => f(v),
            None => Err(LaraError::eval(format!(
                "operator `{}` has no multiplicative inverse",
                self.name
            ))),
        }
    }

    pub fn has_inverse(&self) -> bool {
        self.inverse.is_some()
    }

    pub fn identity_for(&self, kind: Kind) -> Option<&Scalar> {
        self.identities.iter().find(|s| s.kind() == kind)
    }

    pub fn annihilator_for(&self, kind: Kind) -> Option<&Scalar> {
        self.annihilators.iter().find(|s| s.kind() == kind)
    }

    pub fn has_identity(&self) -> bool {
        !self.identities.is_empty()
    }

    pub fn is_identity(&self, v: &Scalar) -> bool {
        self.identity_for(v.kind()).is_some_and(|i| i.approx_eq(v))
    }

    pub fn is_annihilator(&self, v: &Scalar) -> bool {
        self.annihilator_for(v.kind())
            .is_some_and(|a| a.approx_eq(v))
    }

    pub fn distributes_over(&self, plus: &str) -> bool {
        self.distributes_over.contains(plus)
    }

    /// Spot-validate declared structure on random samples. Kinds on which
    /// the evaluator errors are skipped.
    pub fn validate(&self, seed: u64) -> Result<()> {
        let mut rng = StdRng::seed_from_u64(seed);
        let kinds = [Kind::Bool, Kind::Int, Kind::Real, Kind::Text];
        let fail = |msg: String| Err(LaraError::OpRegistration(format!("`{}`: {msg}", self.name)));

        for kind in kinds {
            let probe = (
                sample_scalar(kind, &mut rng),
                sample_scalar(kind, &mut rng),
            );
            if self.eval(&probe.0, &probe.1).is_err() {
                continue;
            }
            for _ in 0..1000 {
                let a = sample_scalar(kind, &mut rng);
                if let Some(id) = self.identity_for(kind) {
                    if !self.eval(&a, id)?.approx_eq(&a) || !self.eval(id, &a)?.approx_eq(&a) {
                        return fail(format!("declared identity {id} is not an identity on {a}"));
                    }
                }
                if let Some(ann) = self.annihilator_for(kind) {
                    let zz = self.eval(ann, ann)?;
                    if !self.eval(&a, ann)?.approx_eq(&zz) || !self.eval(ann, &a)?.approx_eq(&zz) {
                        return fail(format!(
                            "declared annihilator {ann} does not annihilate {a}"
                        ));
                    }
                }
            }
            for _ in 0..200 {
                let a = sample_scalar(kind, &mut rng);
                let b = sample_scalar(kind, &mut rng);
                let c = sample_scalar(kind, &mut rng);
                if self.properties.associative {
                    let l = self.eval(&self.eval(&a, &b)?, &c)?;
                    let r = self.eval(&a, &self.eval(&b, &c)?)?;
                    if !l.approx_eq(&r) {
                        return fail(format!("declared associative but fails on {a},{b},{c}"));
                    }
                }
                if self.properties.commutative && !self.eval(&a, &b)?.approx_eq(&self.eval(&b, &a)?)
                {
                    return fail(format!("declared commutative but fails on {a},{b}"));
                }
                if self.properties.idempotent && !self.eval(&a, &a)?.approx_eq(&a) {
                    return fail(format!("declared idempotent but fails on {a}"));
                }
            }
        }
        Ok(())
    }
}

fn sample_scalar(kind: Kind, rng: &mut StdRng) -> Scalar {
    match kind {
        Kind::Bool => Scalar::Bool(rng.gen()),
        Kind::Int => Scalar::Int(rng.gen_range(-6..=6)),
        Kind::Real => Scalar::Real(rng.gen_range(-3.0..3.0)),
        Kind::Text => {
            let n = rng.gen_range(0..4);
            Scalar::Text((0..n).map(|_| rng.gen_range('a'..='e')).collect())
        }
    }
}

fn numeric_binop(
    name: &'static str,
    f_int: fn(i64, i64) -> i64,
    f_real: fn(f64, f64) -> f64,
) -> impl Fn(&Scalar, &Scalar) -> Result<Scalar> {
    move |a, b| match (a, b) {
        (Scalar::Int(x), Scalar::Int(y)) => Ok(Scalar::Int(f_int(*x, *y))),
        (Scalar::Real(x), Scalar::Real(y)) => Ok(Scalar::Real(f_real(*x, *y))),
        (Scalar::Int(x), Scalar::Real(y)) => Ok(Scalar::Real(f_real(*x as f64, *y))),
        (Scalar::Real(x), Scalar::Int(y)) => Ok(Scalar::Real(f_real(*x, *y as f64))),
        _ => Err(LaraError::eval(format!(
            "`{name}` is not defined on {} and {}",
            a.kind(),
            b.kind()
        ))),
    }
}

/// Registry of named binary operations.
#[derive(Clone)]
pub struct OpRegistry {
    ops: BTreeMap<String, Arc<BinaryOpSpec>>,
}

impl OpRegistry {
    pub fn empty() -> OpRegistry {
        OpRegistry {
            ops: BTreeMap::new(),
        }
    }

    /// Registry preloaded with the built-in operators:
    /// add, mul, max, min, or, and, concat. Validated once per process.
    pub fn with_builtins() -> OpRegistry {
        static BUILTINS: std::sync::OnceLock<OpRegistry> = std::sync::OnceLock::new();
        BUILTINS
            .get_or_init(|| {
                let mut reg = OpRegistry::empty();
                for op in builtin_ops() {
                    reg.register(op).expect("builtin operators validate");
                }
                reg
            })
            .clone()
    }

    /// Validate declared structure and add the operation.
    pub fn register(&mut self, op: BinaryOpSpec) -> Result<Arc<BinaryOpSpec>> {
        op.validate(0xC0FFEE)?;
        let arc = Arc::new(op);
        self.ops.insert(arc.name.clone(), arc.clone());
        Ok(arc)
    }

    pub fn get(&self, name: &str) -> Result<Arc<BinaryOpSpec>> {
        self.ops.get(name).cloned().ok_or_else(|| {
            LaraError::eval(format!("unknown operator `{name}`"))
        })
    }
}

pub fn builtin_ops() -> Vec<BinaryOpSpec> {
    let assoc_comm = OpProperties {
        associative: true,
        commutative: true,
        idempotent: false,
    };
    let lattice = OpProperties {
        associative: true,
        commutative: true,
        idempotent: true,
    };
    vec![
        BinaryOpSpec::new("add", OpRole::Plus, numeric_binop("add", |a, b| a + b, |a, b| a + b))
            .with_properties(assoc_comm)
            .with_identities(vec![Scalar::Int(0), Scalar::Real(0.0)])
            .with_annihilators(vec![Scalar::Real(f64::NEG_INFINITY)])
            .distributing_over(["max", "min"])
            .with_inverse(|v| match v {
                Scalar::Int(x) => Ok(Scalar::Int(-x)),
                Scalar::Real(x) => Ok(Scalar::Real(-x)),
                _ => Err(LaraError::eval("`add` inverse needs a numeric value")),
            }),
        BinaryOpSpec::new("mul", OpRole::Times, numeric_binop("mul", |a, b| a * b, |a, b| a * b))
            .with_properties(assoc_comm)
            .with_identities(vec![Scalar::Int(1), Scalar::Real(1.0)])
            .with_annihilators(vec![Scalar::Int(0), Scalar::Real(0.0)])
            .distributing_over(["add"])
            .with_zero_product()
            .with_inverse(|v| match v {
                Scalar::Real(x) if *x != 0.0 => Ok(Scalar::Real(1.0 / x)),
                Scalar::Real(_) => Err(LaraError::eval("`mul` inverse of zero")),
                _ => Err(LaraError::eval("`mul` inverse needs a real value")),
            }),
        BinaryOpSpec::new("max", OpRole::Plus, numeric_binop("max", i64::max, f64::max))
            .with_properties(lattice)
            .with_identities(vec![Scalar::Int(i64::MIN), Scalar::Real(f64::NEG_INFINITY)])
            .with_annihilators(vec![Scalar::Int(i64::MAX), Scalar::Real(f64::INFINITY)]),
        BinaryOpSpec::new("min", OpRole::Plus, numeric_binop("min", i64::min, f64::min))
            .with_properties(lattice)
            .with_identities(vec![Scalar::Int(i64::MAX), Scalar::Real(f64::INFINITY)])
            .with_annihilators(vec![Scalar::Int(i64::MIN), Scalar::Real(f64::NEG_INFINITY)]),
        BinaryOpSpec::new("or", OpRole::Plus, |a, b| match (a, b) {
            (Scalar::Bool(x), Scalar::Bool(y)) => Ok(Scalar::Bool(*x || *y)),
            _ => Err(LaraError::eval("`or` needs boolean values")),
        })
        .with_properties(lattice)
        .with_identities(vec![Scalar::Bool(false)])
        .with_annihilators(vec![Scalar::Bool(true)]),
        BinaryOpSpec::new("and", OpRole::Times, |a, b| match (a, b) {
            (Scalar::Bool(x), Scalar::Bool(y)) => Ok(Scalar::Bool(*x && *y)),
            _ => Err(LaraError::eval("`and` needs boolean values")),
        })
        .with_properties(lattice)
        .with_identities(vec![Scalar::Bool(true)])
        .with_annihilators(vec![Scalar::Bool(false)])
        .distributing_over(["or"])
        .with_zero_product(),
        BinaryOpSpec::new("concat", OpRole::Plus, |a, b| match (a, b) {
            (Scalar::Text(x), Scalar::Text(y)) => Ok(Scalar::Text(format!("{x}{y}"))),
            _ => Err(LaraError::eval("`concat` needs text values")),
        })
        .with_properties(OpProperties {
            associative: true,
            commutative: false,
            idempotent: false,
        })
        .with_identities(vec![Scalar::text("")]),
    ]
}

/// Per-value-attribute operator assignment. A single op may be supplied to
/// apply to all attributes.
#[derive(Clone, Default)]
pub struct OpMap {
    default: Option<Arc<BinaryOpSpec>>,
    per_attr: BTreeMap<String, Arc<BinaryOpSpec>>,
}

impl OpMap {
    pub fn single(op: Arc<BinaryOpSpec>) -> OpMap {
        OpMap {
            default: Some(op),
            per_attr: BTreeMap::new(),
        }
    }

    pub fn empty() -> OpMap {
        OpMap::default()
    }

    pub fn with(mut self, attr: impl Into<String>, op: Arc<BinaryOpSpec>) -> OpMap {
        self.per_attr.insert(attr.into(), op);
        self
    }

    pub fn get(&self, attr: &str) -> Option<&Arc<BinaryOpSpec>> {
        self.per_attr.get(attr).or(self.default.as_ref())
    }
}

// ---------------------------------------------------------------------------
// Union
// ---------------------------------------------------------------------------

fn fold_tree(values: &[Scalar], op: &BinaryOpSpec) -> Result<Scalar> {
    match values {
        [] => unreachable!("fold_tree called on empty group"),
        [v] => Ok(v.clone()),
        _ => {
            let mid = values.len() / 2;
            let l = fold_tree(&values[..mid], op)?;
            let r = fold_tree(&values[mid..], op)?;
            op.eval(&l, &r)
        }
    }
}

/// Fold a nonempty group of values with the given structural-recursion
/// strategy. An empty group folds to the attribute default.
fn fold_group(
    values: &[Scalar],
    op: &BinaryOpSpec,
    default: &Scalar,
    strategy: UnionStrategy,
) -> Result<Scalar> {
    if values.is_empty() {
        return Ok(default.clone());
    }
    match strategy {
        UnionStrategy::LinearOrdered => {
            let mut acc = values[0].clone();
            for v in &values[1..] {
                acc = op.eval(&acc, v)?;
            }
            Ok(acc)
        }
        UnionStrategy::ParallelDisjointOrdered => fold_tree(values, op),
        UnionStrategy::ParallelUnordered => {
            // Unordered: any permutation of the group is admissible.
            let mut reordered: Vec<Scalar> = values.to_vec();
            reordered.reverse();
            fold_tree(&reordered, op)
        }
        UnionStrategy::OverlapTolerant => {
            // Overlap tolerance removes the disjointness bookkeeping; this
            // realization still hands each element to exactly one partition.
            let rotate = values.len() / 2;
            let mut reordered: Vec<Scalar> = values[rotate..].to_vec();
            reordered.extend_from_slice(&values[..rotate]);
            fold_tree(&reordered, op)
        }
    }
}

/// Whether union must check that every aggregated attribute's default is the
/// declared identity of its operator. `Skip` is for callers that guarantee
/// the fold semantics some other way (e.g. folding min over values known to
/// be non-negative).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdentityCheck {
    Require,
    Skip,
}

/// Union: keys intersect, values union, colliding values aggregated by the
/// per-attribute operator. Strategy is chosen from declared operator
/// properties.
pub fn union(
    a: &AssociativeTable,
    b: &AssociativeTable,
    plus: &OpMap,
) -> Result<AssociativeTable> {
    union_impl(a, b, plus, None, IdentityCheck::Require)
}

/// Union with an explicit execution strategy for every attribute.
pub fn union_with_strategy(
    a: &AssociativeTable,
    b: &AssociativeTable,
    plus: &OpMap,
    strategy: UnionStrategy,
) -> Result<AssociativeTable> {
    union_impl(a, b, plus, Some(strategy), IdentityCheck::Require)
}

/// Union without the identity-matches-default precondition.
pub fn union_unchecked(
    a: &AssociativeTable,
    b: &AssociativeTable,
    plus: &OpMap,
) -> Result<AssociativeTable> {
    union_impl(a, b, plus, None, IdentityCheck::Skip)
}

fn union_impl(
    a: &AssociativeTable,
    b: &AssociativeTable,
    plus: &OpMap,
    strategy: Option<UnionStrategy>,
    check: IdentityCheck,
) -> Result<AssociativeTable> {
    let (sa, sb) = (a.schema(), b.schema());
    for k in sa.key_names() {
        if sb.value_names().contains(k) {
            return Err(LaraError::schema(format!(
                "attribute `{k}` is a key on one side and a value on the other"
            )));
        }
    }
    for k in sb.key_names() {
        if sa.value_names().contains(k) {
            return Err(LaraError::schema(format!(
                "attribute `{k}` is a key on one side and a value on the other"
            )));
        }
    }

    // Result keys: intersection, in A's order.
    let mut key_attrs = Vec::new();
    for k in sa.key_attrs() {
        if let Some(kind) = sb.key_kind(&k.name) {
            if kind != k.kind {
                return Err(LaraError::schema(format!(
                    "key attribute `{}` has differing kinds",
                    k.name
                )));
            }
            key_attrs.push(k.clone());
        }
    }

    // Result values: union, A's order then B-only attrs.
    let mut value_attrs: Vec<ValueAttr> = sa.value_attrs().to_vec();
    for v in sb.value_attrs() {
        match sa.value_attr(&v.name) {
            Some(av) => {
                if av.kind != v.kind {
                    return Err(LaraError::schema(format!(
                        "shared value attribute `{}` has differing kinds",
                        v.name
                    )));
                }
                if !av.default.approx_eq(&v.default) {
                    return Err(LaraError::schema(format!(
                        "shared value attribute `{}` has differing defaults; union requires they agree",
                        v.name
                    )));
                }
            }
            None => value_attrs.push(v.clone()),
        }
    }

    // Whether folding may actually aggregate multiple rows on each side.
    let result_key_names: BTreeSet<&str> = key_attrs.iter().map(|k| k.name.as_str()).collect();
    let agg_a = sa.key_names().len() > result_key_names.len();
    let agg_b = sb.key_names().len() > result_key_names.len();

    struct AttrPlan {
        a_idx: Option<usize>,
        b_idx: Option<usize>,
        op: Option<Arc<BinaryOpSpec>>,
        default: Scalar,
    }
    let mut plans = Vec::new();
    for v in &value_attrs {
        let a_idx = sa.value_index(&v.name);
        let b_idx = sb.value_index(&v.name);
        let needs_op = (a_idx.is_some() && b_idx.is_some())
            || (a_idx.is_some() && agg_a)
            || (b_idx.is_some() && agg_b);
        let op = plus.get(&v.name).cloned();
        if needs_op {
            let Some(op) = &op else {
                return Err(LaraError::schema(format!(
                    "union is missing an aggregation operator for value attribute `{}`",
                    v.name
                )));
            };
            if check == IdentityCheck::Require && !op.is_identity(&v.default) {
                return Err(LaraError::schema(format!(
                    "default {} of `{}` is not the declared identity of operator `{}`",
                    v.default, v.name, op.name
                )));
            }
        }
        plans.push(AttrPlan {
            a_idx,
            b_idx,
            op,
            default: v.default.clone(),
        });
    }

    let schema = TableSchema::new(key_attrs, value_attrs)?;

    // Group support rows of each side by their projection onto result keys.
    let a_proj: Vec<usize> = schema
        .key_attrs()
        .iter()
        .map(|k| sa.key_index(&k.name).expect("intersection key"))
        .collect();
    let b_proj: Vec<usize> = schema
        .key_attrs()
        .iter()
        .map(|k| sb.key_index(&k.name).expect("intersection key"))
        .collect();

    type Groups = BTreeMap<Vec<Scalar>, Vec<Vec<Scalar>>>;
    let group = |t: &AssociativeTable, proj: &[usize]| -> Groups {
        let mut groups: Groups = BTreeMap::new();
        for (k, v) in t.support_rows() {
            let rk: Vec<Scalar> = proj.iter().map(|&i| k[i].clone()).collect();
            groups.entry(rk).or_default().push(v.clone());
        }
        groups
    };
    let groups_a = group(a, &a_proj);
    let groups_b = group(b, &b_proj);

    let mut keys: BTreeSet<Vec<Scalar>> = groups_a.keys().cloned().collect();
    keys.extend(groups_b.keys().cloned());

    let empty: Vec<Vec<Scalar>> = Vec::new();
    let mut out = AssociativeTable::new(schema);
    for key in keys {
        let ga = groups_a.get(&key).unwrap_or(&empty);
        let gb = groups_b.get(&key).unwrap_or(&empty);
        let mut row = Vec::with_capacity(plans.len());
        for plan in &plans {
            let strat = |op: &Arc<BinaryOpSpec>| {
                strategy.unwrap_or_else(|| {
                    choose_union_strategy(op).unwrap_or(UnionStrategy::LinearOrdered)
                })
            };
            let fold_side = |group: &[Vec<Scalar>], idx: usize| -> Result<Option<Scalar>> {
                if group.is_empty() {
                    return Ok(None);
                }
                let col: Vec<Scalar> = group.iter().map(|r| r[idx].clone()).collect();
                if col.len() == 1 {
                    return Ok(Some(col[0].clone()));
                }
                let op = plan.op.as_ref().expect("aggregating attr has an op");
                Ok(Some(fold_group(&col, op, &plan.default, strat(op))?))
            };
            let fa = match plan.a_idx {
                Some(i) => fold_side(ga, i)?,
                None => None,
            };
            let fb = match plan.b_idx {
                Some(i) => fold_side(gb, i)?,
                None => None,
            };
            let v = match (fa, fb) {
                (Some(x), Some(y)) => {
                    let op = plan.op.as_ref().expect("shared attr has an op");
                    op.eval(&x, &y)?
                }
                (Some(x), None) => x,
                (None, Some(y)) => y,
                (None, None) => plan.default.clone(),
            };
            row.push(v);
        }
        out.insert_row(key, row)?;
    }
    Ok(out.canonicalize())
}

// ---------------------------------------------------------------------------
// Strict join
// ---------------------------------------------------------------------------

/// Per-attribute multiply inside a join. The indicator variants are the
/// "multiply by one" placeholders used by relaxed join, where the 1 and 0 of
/// an introduced indicator column stand for the identity and annihilator of
/// the multiplication.
#[derive(Clone)]
pub(crate) enum JoinAttrOp {
    User(Arc<BinaryOpSpec>),
    /// Left side is an indicator column, right side carries the values.
    IndicatorLeft,
    /// Right side is an indicator column, left side carries the values.
    IndicatorRight,
    /// Both sides are indicator columns.
    IndicatorBoth,
}

pub(crate) struct JoinAttr {
    pub name: String,
    pub a_idx: usize,
    pub b_idx: usize,
    pub op: JoinAttrOp,
    pub a_default: Scalar,
    pub b_default: Scalar,
}

impl JoinAttr {
    fn eval(&self, a: &Scalar, b: &Scalar) -> Result<Scalar> {
        match &self.op {
            JoinAttrOp::User(op) => op.eval(a, b),
            JoinAttrOp::IndicatorLeft => Ok(if *a == Scalar::Int(1) {
                b.clone()
            } else {
                self.b_default.clone()
            }),
            JoinAttrOp::IndicatorRight => Ok(if *b == Scalar::Int(1) {
                a.clone()
            } else {
                self.a_default.clone()
            }),
            JoinAttrOp::IndicatorBoth => Ok(Scalar::Int(
                (*a == Scalar::Int(1) && *b == Scalar::Int(1)) as i64,
            )),
        }
    }

    /// (left default annihilates, right default annihilates)
    fn flags(&self) -> (bool, bool) {
        match &self.op {
            JoinAttrOp::User(op) => (
                op.is_annihilator(&self.a_default),
                op.is_annihilator(&self.b_default),
            ),
            _ => (true, true),
        }
    }
}

/// Strict join: keys union, values intersect, matching values multiplied by
/// the per-attribute operator. Refused when the key-relation support
/// analysis yields an unbounded result.
pub fn strict_join(
    a: &AssociativeTable,
    b: &AssociativeTable,
    times: &OpMap,
) -> Result<AssociativeTable> {
    let (sa, sb) = (a.schema(), b.schema());
    let mut attrs = Vec::new();
    for (i, v) in sa.value_attrs().iter().enumerate() {
        if let Some(bv) = sb.value_attr(&v.name) {
            let Some(op) = times.get(&v.name) else {
                return Err(LaraError::schema(format!(
                    "strict join is missing a multiplication operator for `{}`",
                    v.name
                )));
            };
            attrs.push(JoinAttr {
                name: v.name.clone(),
                a_idx: i,
                b_idx: sb.value_index(&v.name).unwrap(),
                op: JoinAttrOp::User(op.clone()),
                a_default: v.default.clone(),
                b_default: bv.default.clone(),
            });
        }
    }
    strict_join_core(a, b, attrs)
}

pub(crate) fn strict_join_core(
    a: &AssociativeTable,
    b: &AssociativeTable,
    attrs: Vec<JoinAttr>,
) -> Result<AssociativeTable> {
    let (sa, sb) = (a.schema(), b.schema());
    for k in sa.key_names() {
        if sb.value_names().contains(k) {
            return Err(LaraError::schema(format!(
                "strict join: `{k}` is a key of one operand and a value of the other"
            )));
        }
    }
    for k in sb.key_names() {
        if sa.value_names().contains(k) {
            return Err(LaraError::schema(format!(
                "strict join: `{k}` is a key of one operand and a value of the other"
            )));
        }
    }
    for k in sa.key_attrs() {
        if let Some(kind) = sb.key_kind(&k.name) {
            if kind != k.kind {
                return Err(LaraError::schema(format!(
                    "shared key attribute `{}` has differing kinds",
                    k.name
                )));
            }
        }
    }

    // Result keys: A's keys then B's unique keys.
    let mut key_attrs: Vec<KeyAttr> = sa.key_attrs().to_vec();
    let b_unique: Vec<&KeyAttr> = sb
        .key_attrs()
        .iter()
        .filter(|k| sa.key_index(&k.name).is_none())
        .collect();
    key_attrs.extend(b_unique.iter().map(|k| (*k).clone()));

    // Result values: shared attrs with default 0_A (x) 0_B.
    let mut value_attrs = Vec::new();
    for attr in &attrs {
        let default = attr.eval(&attr.a_default, &attr.b_default)?;
        value_attrs.push(ValueAttr {
            name: attr.name.clone(),
            kind: default.kind(),
            default,
        });
    }
    let schema = TableSchema::new(key_attrs, value_attrs)?;

    let mut out = AssociativeTable::new(schema.clone());
    if attrs.is_empty() {
        // No shared value attributes: the result is an empty table over the
        // union of the key headers and necessarily has zero support.
        return Ok(out);
    }

    let relation = key_relation(&sa.key_names(), &sb.key_names());
    let mut bounds = Vec::new();
    for attr in &attrs {
        let (a_ann, b_ann) = attr.flags();
        let bound = join_support_bound_cell(relation, a_ann, b_ann);
        if bound == SupportBound::Unbounded {
            return Err(LaraError::UnboundedJoin(format!(
                "value attribute `{}`: key relationship {relation:?} with defaults \
                 ({} annihilates: {a_ann}, {} annihilates: {b_ann}) admits infinite support",
                attr.name, attr.a_default, attr.b_default
            )));
        }
        bounds.push(bound);
    }

    // Layout helpers: positions of the A key and B key inside a result key.
    let a_key_len = sa.key_attrs().len();
    let b_pos: Vec<usize> = sb
        .key_attrs()
        .iter()
        .map(|k| schema.key_index(&k.name).unwrap())
        .collect();
    let a_shared_proj: Vec<usize> = sa
        .key_attrs()
        .iter()
        .enumerate()
        .filter(|(_, k)| sb.key_index(&k.name).is_some())
        .map(|(i, _)| i)
        .collect();
    let b_shared_proj: Vec<usize> = sb
        .key_attrs()
        .iter()
        .enumerate()
        .filter(|(_, k)| sa.key_index(&k.name).is_some())
        .map(|(i, _)| i)
        .collect();

    // Candidate result keys allowed by the per-attribute support bounds.
    let mut candidates: BTreeSet<Vec<Scalar>> = BTreeSet::new();
    let result_len = schema.key_attrs().len();
    let extend_from_a = |candidates: &mut BTreeSet<Vec<Scalar>>| {
        // Valid when K_B is a subset of K_A: the A key is the result key.
        for (k, _) in a.support_rows() {
            candidates.insert(k.clone());
        }
    };
    let extend_from_b = |candidates: &mut BTreeSet<Vec<Scalar>>| {
        for (k, _) in b.support_rows() {
            let mut row = vec![Scalar::Int(0); result_len];
            for (i, v) in k.iter().enumerate() {
                row[b_pos[i]] = v.clone();
            }
            candidates.insert(row);
        }
    };
    let extend_from_pairs = |candidates: &mut BTreeSet<Vec<Scalar>>| {
        // Natural join of the two supports on the shared key attributes.
        let mut b_index: BTreeMap<Vec<Scalar>, Vec<&Vec<Scalar>>> = BTreeMap::new();
        for (k, _) in b.support_rows() {
            let shared: Vec<Scalar> = b_shared_proj.iter().map(|&i| k[i].clone()).collect();
            b_index.entry(shared).or_default().push(k);
        }
        for (ka, _) in a.support_rows() {
            let shared: Vec<Scalar> = a_shared_proj.iter().map(|&i| ka[i].clone()).collect();
            if let Some(rows) = b_index.get(&shared) {
                for kb in rows {
                    let mut row = vec![Scalar::Int(0); result_len];
                    row[..a_key_len].clone_from_slice(ka);
                    for (i, v) in kb.iter().enumerate() {
                        row[b_pos[i]] = v.clone();
                    }
                    candidates.insert(row);
                }
            }
        }
    };
    for bound in &bounds {
        match bound {
            SupportBound::SubsetA => extend_from_a(&mut candidates),
            SupportBound::SubsetB => extend_from_b(&mut candidates),
            SupportBound::SubsetUnion => {
                extend_from_a(&mut candidates);
                extend_from_b(&mut candidates);
            }
            SupportBound::SubsetIntersection | SupportBound::SubsetProduct => {
                extend_from_pairs(&mut candidates)
            }
            SupportBound::Unbounded => unreachable!("refused above"),
        }
    }

    for key in candidates {
        let a_key = &key[..a_key_len];
        let b_key: Vec<Scalar> = b_pos.iter().map(|&i| key[i].clone()).collect();
        let av = a.lookup_row(a_key);
        let bv = b.lookup_row(&b_key);
        let mut row = Vec::with_capacity(attrs.len());
        for attr in &attrs {
            row.push(attr.eval(&av[attr.a_idx], &bv[attr.b_idx])?);
        }
        out.insert_row(key, row)?;
    }
    Ok(out.canonicalize())
}

// ---------------------------------------------------------------------------
// Ext and its special cases
// ---------------------------------------------------------------------------

type ExtFn = dyn Fn(&Record, &Record) -> Result<AssociativeTable> + Send + Sync;

/// A row-to-table function suitable for `ext`. The evaluator must return the
/// empty-support table over the output schema when handed the default value
/// record (validated on samples), and every returned table has finite
/// support because it is returned as an explicit table.
#[derive(Clone)]
pub struct ExtFunction {
    name: String,
    input_schema: TableSchema,
    output_keys: Vec<KeyAttr>,
    output_values: Vec<ValueAttr>,
    eval: Arc<ExtFn>,
}

impl ExtFunction {
    pub fn new(
        name: impl Into<String>,
        input_schema: TableSchema,
        output_keys: Vec<KeyAttr>,
        output_values: Vec<ValueAttr>,
        eval: impl Fn(&Record, &Record) -> Result<AssociativeTable> + Send + Sync + 'static,
    ) -> ExtFunction {
        ExtFunction {
            name: name.into(),
            input_schema,
            output_keys,
            output_values,
            eval: Arc::new(eval),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn output_schema(&self) -> Result<TableSchema> {
        TableSchema::new(self.output_keys.clone(), self.output_values.clone())
    }

    pub fn input_schema(&self) -> &TableSchema {
        &self.input_schema
    }

    pub fn call(&self, key: &Record, value: &Record) -> Result<AssociativeTable> {
        (self.eval)(key, value)
    }
}

/// Extend a row-to-table function over a whole table (flatmap).
pub fn ext(a: &AssociativeTable, f: &ExtFunction) -> Result<AssociativeTable> {
    let sa = a.schema();
    if !f.input_schema.equivalent(sa) {
        return Err(LaraError::schema(format!(
            "ext function `{}` does not accept the operand schema",
            f.name
        )));
    }
    for k in &f.output_keys {
        if sa.key_index(&k.name).is_some() || sa.value_index(&k.name).is_some() {
            return Err(LaraError::schema(format!(
                "ext output key `{}` clashes with an operand attribute",
                k.name
            )));
        }
    }
    let out_schema = f.output_schema()?;

    // Restriction 1 sampled at support keys plus 10 random keys: the default
    // value record must map to an empty-support table.
    let zero = sa.default_record();
    let mut rng = StdRng::seed_from_u64(7);
    let mut sample_keys: Vec<Record> = a.support_rows()
        .take(10)
        .map(|(k, _)| sa.key_row_to_record(k))
        .collect();
    for _ in 0..10 {
        let row: Vec<Scalar> = sa
            .key_attrs()
            .iter()
            .map(|k| sample_scalar(k.kind, &mut rng))
            .collect();
        sample_keys.push(sa.key_row_to_record(&row));
    }
    if sa.key_attrs().is_empty() {
        sample_keys.push(Record::empty());
    }
    for k in &sample_keys {
        let t = f.call(k, &zero)?;
        if t.support_len() != 0 {
            return Err(LaraError::ExtContract(format!(
                "`{}` maps the default value record at key {k} to a non-empty table",
                f.name
            )));
        }
    }

    let mut key_attrs = sa.key_attrs().to_vec();
    key_attrs.extend(f.output_keys.iter().cloned());
    let schema = TableSchema::new(key_attrs, f.output_values.clone())?;
    let mut out = AssociativeTable::new(schema);
    for (k, v) in a.support_rows() {
        let t = f.call(&sa.key_row_to_record(k), &sa.value_row_to_record(v))?;
        if !t.schema().equivalent(&out_schema) {
            return Err(LaraError::ExtContract(format!(
                "`{}` returned a table with an unexpected schema",
                f.name
            )));
        }
        let ts = t.schema().clone();
        for (nk, nv) in t.support_rows() {
            // Reorder the produced row into the declared output layout.
            let mut key = k.clone();
            for ok in &f.output_keys {
                key.push(nk[ts.key_index(&ok.name).unwrap()].clone());
            }
            let val: Vec<Scalar> = f
                .output_values
                .iter()
                .map(|ov| nv[ts.value_index(&ov.name).unwrap()].clone())
                .collect();
            out.insert_row(key, val)?;
        }
    }
    Ok(out.canonicalize())
}

type MapFn = dyn Fn(&Record) -> Result<Record> + Send + Sync;

/// A value-record-to-value-record function for `map`/`mapnz`.
#[derive(Clone)]
pub struct MapFunction {
    output_values: Vec<ValueAttr>,
    eval: Arc<MapFn>,
}

impl MapFunction {
    pub fn new(
        output_values: Vec<ValueAttr>,
        eval: impl Fn(&Record) -> Result<Record> + Send + Sync + 'static,
    ) -> MapFunction {
        MapFunction {
            output_values,
            eval: Arc::new(eval),
        }
    }

    /// A map that keeps the value header and transforms a single attribute.
    pub fn on_attr(
        table: &AssociativeTable,
        attr: &str,
        f: impl Fn(&Scalar) -> Result<Scalar> + Send + Sync + 'static,
    ) -> MapFunction {
        let attr = attr.to_string();
        MapFunction {
            output_values: table.schema().value_attrs().to_vec(),
            eval: Arc::new(move |v: &Record| {
                let mut out = v.clone();
                let cur = v
                    .get(&attr)
                    .ok_or_else(|| LaraError::schema(format!("no attribute `{attr}`")))?;
                out.set(attr.clone(), f(cur)?);
                Ok(out)
            }),
        }
    }

    pub fn output_values(&self) -> &[ValueAttr] {
        &self.output_values
    }

    pub fn call(&self, value: &Record) -> Result<Record> {
        (self.eval)(value)
    }

    fn output_default(&self) -> Record {
        Record::from_pairs(
            self.output_values
                .iter()
                .map(|v| (v.name.clone(), v.default.clone())),
        )
    }
}

fn map_impl(
    a: &AssociativeTable,
    g: &MapFunction,
    check_default: bool,
) -> Result<AssociativeTable> {
    let sa = a.schema();
    let new_default = g.output_default();
    if check_default {
        let mapped = g.call(&sa.default_record())?;
        if !mapped.approx_eq(&new_default) {
            return Err(LaraError::ExtContract(format!(
                "map function sends the default record to {mapped}, expected {new_default}"
            )));
        }
    }
    let schema = TableSchema::new(sa.key_attrs().to_vec(), g.output_values.clone())?;
    let mut out = AssociativeTable::new(schema.clone());
    for (k, v) in a.support_rows() {
        let mapped = g.call(&sa.value_row_to_record(v))?;
        out.insert_row(k.clone(), schema.value_to_row(&mapped)?)?;
    }
    Ok(out.canonicalize())
}

/// Map: ext that adds no key attributes. The function must send the old
/// default record to the new one.
pub fn map(a: &AssociativeTable, g: &MapFunction) -> Result<AssociativeTable> {
    map_impl(a, g, true)
}

/// Map applied only to support rows; the default record maps to the new
/// default by definition.
pub fn mapnz(a: &AssociativeTable, g: &MapFunction) -> Result<AssociativeTable> {
    map_impl(a, g, false)
}

/// Keep only the listed value attributes.
pub fn project_values(a: &AssociativeTable, names: &[&str]) -> Result<AssociativeTable> {
    let sa = a.schema();
    let mut keep = Vec::new();
    for n in names {
        let Some(attr) = sa.value_attr(n) else {
            return Err(LaraError::schema(format!("no value attribute `{n}`")));
        };
        keep.push(attr.clone());
    }
    let idx: Vec<usize> = names.iter().map(|n| sa.value_index(n).unwrap()).collect();
    let schema = TableSchema::new(sa.key_attrs().to_vec(), keep)?;
    let mut out = AssociativeTable::new(schema);
    for (k, v) in a.rows() {
        out.insert_row(k.clone(), idx.iter().map(|&i| v[i].clone()).collect())?;
    }
    Ok(out.canonicalize())
}

/// Rename attributes. The renaming must be injective, preserve key/value
/// roles, and not collide with retained names.
pub fn rename_attrs(
    a: &AssociativeTable,
    renaming: &BTreeMap<String, String>,
) -> Result<AssociativeTable> {
    let sa = a.schema();
    let rename = |name: &str| -> String {
        renaming
            .get(name)
            .cloned()
            .unwrap_or_else(|| name.to_string())
    };
    for old in renaming.keys() {
        if sa.key_index(old).is_none() && sa.value_index(old).is_none() {
            return Err(LaraError::schema(format!("no attribute `{old}` to rename")));
        }
    }
    let key_attrs = sa
        .key_attrs()
        .iter()
        .map(|k| KeyAttr {
            name: rename(&k.name),
            kind: k.kind,
        })
        .collect();
    let value_attrs = sa
        .value_attrs()
        .iter()
        .map(|v| ValueAttr {
            name: rename(&v.name),
            kind: v.kind,
            default: v.default.clone(),
        })
        .collect();
    let schema = TableSchema::new(key_attrs, value_attrs)?;
    let mut out = AssociativeTable::new(schema);
    for (k, v) in a.rows() {
        out.insert_row(k.clone(), v.clone())?;
    }
    Ok(out)
}

/// Append indicator value attributes: 1 on support rows, default 0.
pub fn supone(a: &AssociativeTable, new_attrs: &[&str]) -> Result<AssociativeTable> {
    let sa = a.schema();
    let mut value_attrs = sa.value_attrs().to_vec();
    for n in new_attrs {
        if sa.key_index(n).is_some() || sa.value_index(n).is_some() {
            return Err(LaraError::schema(format!(
                "supone attribute `{n}` clashes with an existing attribute"
            )));
        }
        value_attrs.push(ValueAttr {
            name: n.to_string(),
            kind: Kind::Int,
            default: Scalar::Int(0),
        });
    }
    let schema = TableSchema::new(sa.key_attrs().to_vec(), value_attrs)?;
    let mut out = AssociativeTable::new(schema);
    for (k, v) in a.support_rows() {
        let mut row = v.clone();
        row.extend(new_attrs.iter().map(|_| Scalar::Int(1)));
        out.insert_row(k.clone(), row)?;
    }
    Ok(out)
}

/// Fresh name for a promotion indicator: the old name plus enough
/// apostrophes to guarantee freshness.
pub fn fresh_indicator_name(schema: &TableSchema, base: &str) -> String {
    let mut name = format!("{base}'");
    while schema.key_index(&name).is_some() || schema.value_index(&name).is_some() {
        name.push('\'');
    }
    name
}

/// Promote a value attribute to key status, adding a fresh indicator value
/// attribute that is 1 on the former support rows.
pub fn promote(a: &AssociativeTable, attr: &str) -> Result<AssociativeTable> {
    let name = fresh_indicator_name(a.schema(), attr);
    promote_named(a, attr, &name)
}

/// Promotion with an explicit indicator attribute name.
pub fn promote_named(
    a: &AssociativeTable,
    attr: &str,
    indicator: &str,
) -> Result<AssociativeTable> {
    let sa = a.schema();
    let Some(promoted) = sa.value_attr(attr) else {
        return Err(LaraError::schema(format!("no value attribute `{attr}`")));
    };
    if sa.key_index(indicator).is_some() || sa.value_index(indicator).is_some() {
        return Err(LaraError::schema(format!(
            "indicator name `{indicator}` is not fresh"
        )));
    }
    let mut key_attrs = sa.key_attrs().to_vec();
    key_attrs.push(KeyAttr {
        name: promoted.name.clone(),
        kind: promoted.kind,
    });
    let mut value_attrs = vec![ValueAttr {
        name: indicator.to_string(),
        kind: Kind::Int,
        default: Scalar::Int(0),
    }];
    let kept: Vec<usize> = sa
        .value_attrs()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.name != attr)
        .map(|(i, _)| i)
        .collect();
    value_attrs.extend(kept.iter().map(|&i| sa.value_attrs()[i].clone()));
    let promoted_idx = sa.value_index(attr).unwrap();
    let schema = TableSchema::new(key_attrs, value_attrs)?;
    let mut out = AssociativeTable::new(schema);
    for (k, v) in a.support_rows() {
        let mut key = k.clone();
        key.push(v[promoted_idx].clone());
        let mut row = vec![Scalar::Int(1)];
        row.extend(kept.iter().map(|&i| v[i].clone()));
        out.insert_row(key, row)?;
    }
    Ok(out)
}

/// Relaxed join: mirrors relational inner join on the key attributes.
///
/// Pipeline: promote value attributes that are keys on the other side,
/// introduce multiply-by-one indicators for value attributes unique to the
/// other side, strict join, then drop the promotion indicators.
pub fn relaxed_join(
    a: &AssociativeTable,
    b: &AssociativeTable,
    times: &OpMap,
) -> Result<AssociativeTable> {
    let mut a2 = a.clone();
    let mut b2 = b.clone();
    let mut promoted_inds: BTreeSet<String> = BTreeSet::new();

    let promote_list_a: Vec<String> = a
        .schema()
        .value_attrs()
        .iter()
        .filter(|v| b.schema().key_index(&v.name).is_some())
        .map(|v| v.name.clone())
        .collect();
    let promote_list_b: Vec<String> = b
        .schema()
        .value_attrs()
        .iter()
        .filter(|v| a.schema().key_index(&v.name).is_some())
        .map(|v| v.name.clone())
        .collect();
    for attr in &promote_list_a {
        let ind = fresh_indicator_name(a2.schema(), attr);
        a2 = promote_named(&a2, attr, &ind)?;
        promoted_inds.insert(ind);
    }
    for attr in &promote_list_b {
        let ind = fresh_indicator_name(b2.schema(), attr);
        b2 = promote_named(&b2, attr, &ind)?;
        promoted_inds.insert(ind);
    }

    // Multiply-by-one indicators for the value attributes unique to the
    // other side.
    let only_in_b: Vec<String> = b2
        .schema()
        .value_attrs()
        .iter()
        .filter(|v| a2.schema().value_index(&v.name).is_none())
        .map(|v| v.name.clone())
        .collect();
    let only_in_a: Vec<String> = a2
        .schema()
        .value_attrs()
        .iter()
        .filter(|v| b2.schema().value_index(&v.name).is_none())
        .map(|v| v.name.clone())
        .collect();
    let a_indicators: BTreeSet<&str> = only_in_b.iter().map(String::as_str).collect();
    let b_indicators: BTreeSet<&str> = only_in_a.iter().map(String::as_str).collect();
    let a3 = supone(&a2, &only_in_b.iter().map(String::as_str).collect::<Vec<_>>())?;
    let b3 = supone(&b2, &only_in_a.iter().map(String::as_str).collect::<Vec<_>>())?;

    let mut attrs = Vec::new();
    for (i, v) in a3.schema().value_attrs().iter().enumerate() {
        let Some(bv) = b3.schema().value_attr(&v.name) else {
            continue;
        };
        let left_ind = a_indicators.contains(v.name.as_str()) || promoted_inds.contains(&v.name);
        let right_ind = b_indicators.contains(v.name.as_str()) || promoted_inds.contains(&v.name);
        // A promotion indicator is genuine on its own side and introduced on
        // the other, so treat it as an indicator pair.
        let op = match (left_ind, right_ind) {
            (true, true) => JoinAttrOp::IndicatorBoth,
            (true, false) => JoinAttrOp::IndicatorLeft,
            (false, true) => JoinAttrOp::IndicatorRight,
            (false, false) => {
                let Some(op) = times.get(&v.name) else {
                    return Err(LaraError::schema(format!(
                        "relaxed join is missing a multiplication operator for `{}`",
                        v.name
                    )));
                };
                JoinAttrOp::User(op.clone())
            }
        };
        attrs.push(JoinAttr {
            name: v.name.clone(),
            a_idx: i,
            b_idx: b3.schema().value_index(&v.name).unwrap(),
            op,
            a_default: v.default.clone(),
            b_default: bv.default.clone(),
        });
    }
    let joined = strict_join_core(&a3, &b3, attrs)?;

    let keep: Vec<&str> = joined
        .schema()
        .value_attrs()
        .iter()
        .map(|v| v.name.as_str())
        .filter(|n| !promoted_inds.contains(*n))
        .collect();
    project_values(&joined, &keep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::scalar::Kind;

    fn reg() -> OpRegistry {
        OpRegistry::with_builtins()
    }

    fn s(x: &str) -> Scalar {
        Scalar::text(x)
    }
    fn i(x: i64) -> Scalar {
        Scalar::Int(x)
    }

    #[test]
    fn union_aggregates_collapsed_keys() {
        let r = fixtures::request_table();
        let qty = project_values(&r, &["qty"]).unwrap();
        let by_supplier = union(
            &qty,
            &AssociativeTable::empty_table([("sid", Kind::Text)]),
            &OpMap::single(reg().get("add").unwrap()),
        )
        .unwrap();
        assert_eq!(by_supplier.support_len(), 2);
        assert_eq!(by_supplier.lookup_row(&[s("s01")]), vec![i(3)]);
        assert_eq!(by_supplier.lookup_row(&[s("s02")]), vec![i(1)]);
    }

    #[test]
    fn union_merges_disjoint_value_headers() {
        // No shared value attribute and equal keys: plain horizontal glue,
        // no operator ever runs.
        let p = fixtures::part_table();
        let color = project_values(&p, &["color"]).unwrap();
        let wgt = project_values(&p, &["wgt"]).unwrap();
        let glued = union(&color, &wgt, &OpMap::empty()).unwrap();
        assert!(glued.tables_equal(&p));
    }

    #[test]
    fn union_requires_identity_default_when_aggregating() {
        let r = fixtures::request_table();
        let qty = project_values(&r, &["qty"]).unwrap();
        let e = AssociativeTable::empty_table([("sid", Kind::Text)]);
        // max's Int identity is i64::MIN, not the table default 0.
        let err = union(&qty, &e, &OpMap::single(reg().get("max").unwrap()));
        assert!(matches!(err, Err(LaraError::Schema(_))));
        // The unchecked variant is the caller-owns-the-precondition escape.
        let folded =
            union_unchecked(&qty, &e, &OpMap::single(reg().get("max").unwrap())).unwrap();
        assert_eq!(folded.lookup_row(&[s("s01")]), vec![i(3)]);
    }

    #[test]
    fn union_strategies_agree_for_add() {
        let r = fixtures::request_table();
        let qty = project_values(&r, &["qty"]).unwrap();
        let e = AssociativeTable::empty_table([]);
        let add = reg().get("add").unwrap();
        let base = union(&qty, &e, &OpMap::single(add.clone())).unwrap();
        for strat in [
            UnionStrategy::LinearOrdered,
            UnionStrategy::ParallelDisjointOrdered,
            UnionStrategy::ParallelUnordered,
            UnionStrategy::OverlapTolerant,
        ] {
            let got =
                union_with_strategy(&qty, &e, &OpMap::single(add.clone()), strat).unwrap();
            assert!(got.tables_equal(&base), "strategy {strat:?} diverged");
        }
        assert_eq!(base.lookup_row(&[]), vec![i(4)]);
    }

    #[test]
    fn strict_join_builds_cartesian_totals() {
        let mul = reg().get("mul").unwrap();
        let t = strict_join(
            &fixtures::car_table(),
            &fixtures::fuel_table(),
            &OpMap::single(mul),
        )
        .unwrap();
        assert_eq!(t.support_len(), 6);
        assert_eq!(t.lookup_row(&[s("compact"), s("reg")]), vec![Scalar::Real(4.0)]);
        assert_eq!(t.lookup_row(&[s("SUV"), s("prem")]), vec![Scalar::Real(15.0)]);
        assert_eq!(t.lookup_row(&[s("electric"), s("reg")]), vec![Scalar::Real(2.0)]);
    }

    #[test]
    fn strict_join_drops_one_sided_values() {
        // Values intersect: request's qty/urgent do not survive a join with
        // part (color/wgt); the only shared value header is empty.
        let and = reg().get("and").unwrap();
        let joined = strict_join(
            &fixtures::request_table(),
            &fixtures::part_table(),
            &OpMap::single(and),
        )
        .unwrap();
        assert!(joined.schema().value_attrs().is_empty());
        assert!(joined.support().is_empty());
    }

    #[test]
    fn strict_join_refuses_unbounded_support() {
        // Non-annihilator defaults on both sides with incomparable keys.
        let a = fixtures::table(
            vec![("x", Kind::Text)],
            vec![("v", i(1))],
            vec![(vec![s("a")], vec![i(2)])],
        );
        let b = fixtures::table(
            vec![("y", Kind::Text)],
            vec![("v", i(1))],
            vec![(vec![s("b")], vec![i(3)])],
        );
        let err = strict_join(&a, &b, &OpMap::single(reg().get("mul").unwrap()));
        assert!(matches!(err, Err(LaraError::UnboundedJoin(_))));
    }

    #[test]
    fn ext_wordcount() {
        let d = fixtures::docs_table();
        let f = ExtFunction::new(
            "wordcount",
            d.schema().clone(),
            vec![],
            vec![ValueAttr {
                name: "cnt".into(),
                kind: Kind::Int,
                default: i(0),
            }],
            |_k, v| {
                let txt = v.get("txt").unwrap().as_text().unwrap();
                let n = txt.split_whitespace().count() as i64;
                let schema = TableSchema::build(vec![], vec![("cnt", i(0))])?;
                let mut out = AssociativeTable::new(schema);
                out.insert_row(vec![], vec![i(n)])?;
                Ok(out)
            },
        );
        let counts = ext(&d, &f).unwrap();
        assert_eq!(counts.lookup_row(&[s("d01")]), vec![i(3)]);
        assert_eq!(counts.lookup_row(&[s("d02")]), vec![i(7)]);
        assert_eq!(counts.lookup_row(&[s("d04")]), vec![i(5)]);
    }

    #[test]
    fn ext_tokenize_explodes_rows() {
        let d = fixtures::docs_table();
        let f = ExtFunction::new(
            "tokenize",
            d.schema().clone(),
            vec![KeyAttr {
                name: "wrd".into(),
                kind: Kind::Text,
            }],
            vec![ValueAttr {
                name: "cnt".into(),
                kind: Kind::Int,
                default: i(0),
            }],
            |_k, v| {
                let txt = v.get("txt").unwrap().as_text().unwrap().to_string();
                let schema = TableSchema::build(
                    vec![("wrd", Kind::Text)],
                    vec![("cnt", i(0))],
                )?;
                let mut out = AssociativeTable::new(schema);
                let mut counts: BTreeMap<String, i64> = BTreeMap::new();
                for w in txt.split_whitespace() {
                    *counts.entry(w.to_string()).or_default() += 1;
                }
                for (w, n) in counts {
                    out.insert_row(vec![Scalar::text(w)], vec![i(n)])?;
                }
                Ok(out)
            },
        );
        let tokens = ext(&d, &f).unwrap();
        assert_eq!(tokens.support_len(), 14);
        assert_eq!(tokens.lookup_row(&[s("d02"), s("shells")]), vec![i(2)]);
        assert_eq!(tokens.lookup_row(&[s("d04"), s("seashore")]), vec![i(1)]);
    }

    #[test]
    fn ext_rejects_functions_with_default_support() {
        let d = fixtures::docs_table();
        let f = ExtFunction::new(
            "bad",
            d.schema().clone(),
            vec![],
            vec![ValueAttr {
                name: "cnt".into(),
                kind: Kind::Int,
                default: i(0),
            }],
            |_k, _v| {
                let schema = TableSchema::build(vec![], vec![("cnt", i(0))])?;
                let mut out = AssociativeTable::new(schema);
                out.insert_row(vec![], vec![i(1)])?; // nonzero even on defaults
                Ok(out)
            },
        );
        assert!(matches!(ext(&d, &f), Err(LaraError::ExtContract(_))));
    }

    #[test]
    fn map_checks_default_preservation() {
        let p = fixtures::part_table();
        let bump = MapFunction::on_attr(&p, "wgt", |v| {
            Ok(i(v.as_i64().unwrap_or(0) + 1))
        });
        assert!(matches!(map(&p, &bump), Err(LaraError::ExtContract(_))));
        let doubled = mapnz(&p, &MapFunction::on_attr(&p, "wgt", |v| {
            Ok(i(v.as_i64().unwrap_or(0) * 2))
        }))
        .unwrap();
        assert_eq!(
            doubled.lookup_row(&[s("p01")]),
            vec![s("blue"), i(6)]
        );
    }

    #[test]
    fn supone_marks_support() {
        let p = fixtures::weekly_parts();
        let marked = supone(&p, &["state"]).unwrap();
        assert_eq!(
            marked.lookup_row(&[s("M"), s("p01")]),
            vec![s("blue"), i(1)]
        );
        assert_eq!(
            marked.lookup_row(&[s("M"), s("p09")]),
            vec![s("white"), i(0)]
        );
    }

    #[test]
    fn promote_moves_value_to_key() {
        let p = fixtures::colored_parts();
        let promoted = promote_named(&p, "color", "ind").unwrap();
        assert_eq!(
            promoted.schema().key_names().into_iter().collect::<Vec<_>>(),
            vec!["color", "pid"]
        );
        assert_eq!(promoted.lookup_row(&[s("p01"), s("blue")]), vec![i(1)]);
        assert_eq!(promoted.lookup_row(&[s("p01"), s("red")]), vec![i(0)]);
        assert_eq!(promoted.support_len(), 3);
    }

    #[test]
    fn relaxed_join_mirrors_relational_inner_join() {
        let joined = relaxed_join(
            &fixtures::weekly_parts(),
            &fixtures::weekly_suppliers(),
            &OpMap::empty(),
        )
        .unwrap();
        assert_eq!(joined.support_len(), 5);
        assert_eq!(
            joined.lookup_row(&[s("M"), s("p01"), s("s01")]),
            vec![s("blue"), s("WA")]
        );
        assert_eq!(
            joined.lookup_row(&[s("T"), s("p01"), s("s02")]),
            vec![s("red"), s("DE")]
        );
        // Closed-world anomaly: off-support combinations read as defaults.
        assert_eq!(
            joined.lookup_row(&[s("T"), s("p01"), s("s01")]),
            vec![s("white"), s("GA")]
        );
    }

    #[test]
    fn relaxed_join_promotes_shared_attrs() {
        let joined = relaxed_join(
            &fixtures::colored_parts(),
            &fixtures::color_opinions(),
            &OpMap::empty(),
        )
        .unwrap();
        assert_eq!(joined.support_len(), 2);
        assert_eq!(joined.lookup_row(&[s("p01"), s("blue")]), vec![s("y")]);
        assert_eq!(joined.lookup_row(&[s("p03"), s("blue")]), vec![s("y")]);
        assert_eq!(joined.lookup_row(&[s("p02"), s("red")]), vec![s("n")]);
    }

    #[test]
    fn rename_preserves_rows() {
        let p = fixtures::part_table();
        let renamed = rename_attrs(
            &p,
            &BTreeMap::from([("pid".to_string(), "part".to_string())]),
        )
        .unwrap();
        assert_eq!(renamed.schema().key_attrs()[0].name, "part");
        let back = rename_attrs(
            &renamed,
            &BTreeMap::from([("part".to_string(), "pid".to_string())]),
        )
        .unwrap();
        assert!(back.tables_equal(&p));
    }

    #[test]
    fn registry_rejects_false_property_claims() {
        let mut registry = OpRegistry::empty();
        let bogus = BinaryOpSpec::new("sub", OpRole::Plus, |a, b| {
            Ok(i(a.as_i64().unwrap_or(0) - b.as_i64().unwrap_or(0)))
        })
        .with_properties(OpProperties {
            associative: true,
            commutative: false,
            idempotent: false,
        })
        .with_identities(vec![i(0)]);
        assert!(matches!(
            registry.register(bogus),
            Err(LaraError::OpRegistration(_))
        ));
    }

    #[test]
    fn fresh_indicator_names_avoid_clashes() {
        let p = fixtures::colored_parts();
        assert_eq!(fresh_indicator_name(p.schema(), "ind"), "ind'");
        assert_eq!(fresh_indicator_name(p.schema(), "colo"), "colo'");
        let promoted = promote_named(&p, "color", "color'").unwrap();
        assert_eq!(fresh_indicator_name(promoted.schema(), "color"), "color''");
    }
}
