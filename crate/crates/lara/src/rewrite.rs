//! Property-driven execution strategies, join support analysis, plan
//! expressions, and algebraic rewrites over them.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{LaraError, Result};
use crate::ops::{
    ext, project_values, relaxed_join, rename_attrs, strict_join, union, BinaryOpSpec,
    ExtFunction, OpMap, OpRegistry,
};
use crate::scalar::Kind;
use crate::schema::{KeyAttr, TableSchema, ValueAttr};
use crate::table::AssociativeTable;

/// How union's aggregation fold may be executed. Each strategy is sound for
/// operators declaring at least the listed properties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UnionStrategy {
    /// Sequential left fold in canonical key order; needs only an identity.
    LinearOrdered,
    /// Balanced tree over order-preserving partitions; needs associativity.
    ParallelDisjointOrdered,
    /// Balanced tree over arbitrary partitions; needs commutativity too.
    ParallelUnordered,
    /// Partitions may additionally overlap; needs idempotence too.
    OverlapTolerant,
}

/// Pick the loosest sound strategy for an operator from its declared
/// properties. An operator without a declared identity cannot seed the fold
/// and is refused.
pub fn choose_union_strategy(op: &BinaryOpSpec) -> Result<UnionStrategy> {
    if !op.has_identity() {
        return Err(LaraError::schema(format!(
            "operator `{}` declares no identity; no union strategy is sound",
            op.name()
        )));
    }
    let p = op.properties();
    Ok(match (p.associative, p.commutative, p.idempotent) {
        (true, true, true) => UnionStrategy::OverlapTolerant,
        (true, true, false) => UnionStrategy::ParallelUnordered,
        (true, false, _) => UnionStrategy::ParallelDisjointOrdered,
        (false, _, _) => UnionStrategy::LinearOrdered,
    })
}

/// Relationship between the key attribute sets of two join operands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeyRelation {
    Equal,
    ASubset,
    ASuperset,
    Incomparable,
}

pub fn key_relation(a: &BTreeSet<&str>, b: &BTreeSet<&str>) -> KeyRelation {
    if a == b {
        KeyRelation::Equal
    } else if a.is_subset(b) {
        KeyRelation::ASubset
    } else if a.is_superset(b) {
        KeyRelation::ASuperset
    } else {
        KeyRelation::Incomparable
    }
}

/// Upper bound on the support of a strict join, which doubles as the
/// enumeration strategy that realizes it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SupportBound {
    /// Contained in the intersection of the mapped supports.
    SubsetIntersection,
    /// Contained in the support of the left operand.
    SubsetA,
    /// Contained in the support of the right operand.
    SubsetB,
    /// Contained in the union of the mapped supports.
    SubsetUnion,
    /// Contained in the product of the supports over the shared keys.
    SubsetProduct,
    /// No finite bound; the join is refused.
    Unbounded,
}

/// One cell of the support-bound table: given the key relationship and
/// whether each side's default annihilates under the multiplication.
pub fn join_support_bound_cell(
    relation: KeyRelation,
    a_annihilates: bool,
    b_annihilates: bool,
) -> SupportBound {
    match (relation, a_annihilates, b_annihilates) {
        (KeyRelation::Incomparable, true, true) => SupportBound::SubsetProduct,
        (_, true, true) => SupportBound::SubsetIntersection,
        (KeyRelation::Equal, true, false) => SupportBound::SubsetA,
        (KeyRelation::Equal, false, true) => SupportBound::SubsetB,
        (KeyRelation::Equal, false, false) => SupportBound::SubsetUnion,
        (KeyRelation::ASubset, false, true) => SupportBound::SubsetB,
        (KeyRelation::ASuperset, true, false) => SupportBound::SubsetA,
        _ => SupportBound::Unbounded,
    }
}

/// Support bound of `A join B` under a per-attribute multiplication: the
/// loosest of the per-attribute cells. `exact` reports whether the bound is
/// an equality, which needs the zero-product property on every attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JoinBound {
    pub bound: SupportBound,
    pub exact: bool,
}

pub fn join_support_bound(
    a: &TableSchema,
    b: &TableSchema,
    times: &OpMap,
) -> Result<JoinBound> {
    let relation = key_relation(&a.key_names(), &b.key_names());
    let mut bound = SupportBound::SubsetIntersection;
    let mut exact = true;
    let mut shared = 0usize;
    for v in a.value_attrs() {
        let Some(bv) = b.value_attr(&v.name) else {
            continue;
        };
        shared += 1;
        let Some(op) = times.get(&v.name) else {
            return Err(LaraError::schema(format!(
                "no multiplication operator for `{}`",
                v.name
            )));
        };
        let cell = join_support_bound_cell(
            relation,
            op.is_annihilator(&v.default),
            op.is_annihilator(&bv.default),
        );
        bound = bound.max(cell);
        exact = exact && op.zero_product();
    }
    if shared == 0 {
        // No shared value attributes: the join has empty support.
        return Ok(JoinBound {
            bound: SupportBound::SubsetIntersection,
            exact: false,
        });
    }
    // Exactness also requires a single-attribute bound; with several shared
    // attributes the union of candidate sets is only an upper bound.
    Ok(JoinBound {
        bound,
        exact: exact && shared == 1 && bound != SupportBound::SubsetUnion,
    })
}

// ---------------------------------------------------------------------------
// Plan expressions
// ---------------------------------------------------------------------------

/// Serializable per-attribute operator names for a plan node.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq, Eq)]
pub struct PlanOps {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_attr: BTreeMap<String, String>,
}

impl PlanOps {
    pub fn single(name: impl Into<String>) -> PlanOps {
        PlanOps {
            default: Some(name.into()),
            per_attr: BTreeMap::new(),
        }
    }

    pub fn resolve(&self, registry: &OpRegistry) -> Result<OpMap> {
        let mut map = match &self.default {
            Some(name) => OpMap::single(registry.get(name)?),
            None => OpMap::empty(),
        };
        for (attr, name) in &self.per_attr {
            map = map.with(attr.clone(), registry.get(name)?);
        }
        Ok(map)
    }
}

/// A query plan over named tables, operators, and ext functions.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub enum PlanExpr {
    TableRef(String),
    /// Table with the given key header, no value attributes, empty support.
    EmptyTable(Vec<(String, Kind)>),
    Union {
        left: Box<PlanExpr>,
        right: Box<PlanExpr>,
        plus: PlanOps,
    },
    StrictJoin {
        left: Box<PlanExpr>,
        right: Box<PlanExpr>,
        times: PlanOps,
    },
    RelaxedJoin {
        left: Box<PlanExpr>,
        right: Box<PlanExpr>,
        times: PlanOps,
    },
    Ext {
        input: Box<PlanExpr>,
        func: String,
    },
    ProjectValues {
        input: Box<PlanExpr>,
        names: Vec<String>,
    },
    Rename {
        input: Box<PlanExpr>,
        renaming: BTreeMap<String, String>,
    },
}

impl PlanExpr {
    pub fn table(name: impl Into<String>) -> PlanExpr {
        PlanExpr::TableRef(name.into())
    }

    pub fn union(left: PlanExpr, right: PlanExpr, plus: PlanOps) -> PlanExpr {
        PlanExpr::Union {
            left: Box::new(left),
            right: Box::new(right),
            plus,
        }
    }

    pub fn strict_join(left: PlanExpr, right: PlanExpr, times: PlanOps) -> PlanExpr {
        PlanExpr::StrictJoin {
            left: Box::new(left),
            right: Box::new(right),
            times,
        }
    }
}

/// Evaluation context: table bindings, operator registry, ext functions.
#[derive(Clone, Default)]
pub struct EvalContext {
    pub tables: BTreeMap<String, AssociativeTable>,
    pub registry: OpRegistry,
    pub ext_funcs: BTreeMap<String, Arc<ExtFunction>>,
}

impl Default for OpRegistry {
    fn default() -> Self {
        OpRegistry::with_builtins()
    }
}

impl EvalContext {
    pub fn new() -> EvalContext {
        EvalContext {
            tables: BTreeMap::new(),
            registry: OpRegistry::with_builtins(),
            ext_funcs: BTreeMap::new(),
        }
    }

    pub fn bind(&mut self, name: impl Into<String>, table: AssociativeTable) {
        self.tables.insert(name.into(), table);
    }

    fn table(&self, name: &str) -> Result<&AssociativeTable> {
        self.tables
            .get(name)
            .ok_or_else(|| LaraError::eval(format!("unbound table `{name}`")))
    }

    fn ext_func(&self, name: &str) -> Result<&Arc<ExtFunction>> {
        self.ext_funcs
            .get(name)
            .ok_or_else(|| LaraError::eval(format!("unbound ext function `{name}`")))
    }
}

fn empty_schema(keys: &[(String, Kind)]) -> Result<TableSchema> {
    TableSchema::new(
        keys.iter()
            .map(|(name, kind)| KeyAttr {
                name: name.clone(),
                kind: *kind,
            })
            .collect(),
        Vec::new(),
    )
}

/// Bottom-up schema inference; doubles as the plan type check.
pub fn infer_schema(expr: &PlanExpr, ctx: &EvalContext) -> Result<TableSchema> {
    match expr {
        PlanExpr::TableRef(name) => Ok(ctx.table(name)?.schema().clone()),
        PlanExpr::EmptyTable(keys) => empty_schema(keys),
        PlanExpr::Union { left, right, .. } => {
            let (a, b) = (infer_schema(left, ctx)?, infer_schema(right, ctx)?);
            let mut key_attrs = Vec::new();
            for k in a.key_attrs() {
                if b.key_kind(&k.name) == Some(k.kind) {
                    key_attrs.push(k.clone());
                }
            }
            let mut value_attrs = a.value_attrs().to_vec();
            for v in b.value_attrs() {
                if a.value_attr(&v.name).is_none() {
                    value_attrs.push(v.clone());
                }
            }
            TableSchema::new(key_attrs, value_attrs)
        }
        PlanExpr::StrictJoin { left, right, times } => {
            let (a, b) = (infer_schema(left, ctx)?, infer_schema(right, ctx)?);
            let mut key_attrs = a.key_attrs().to_vec();
            for k in b.key_attrs() {
                if a.key_index(&k.name).is_none() {
                    key_attrs.push(k.clone());
                }
            }
            let ops = times.resolve(&ctx.registry)?;
            let mut value_attrs = Vec::new();
            for v in a.value_attrs() {
                if let Some(bv) = b.value_attr(&v.name) {
                    let op = ops.get(&v.name).ok_or_else(|| {
                        LaraError::schema(format!("no multiplication operator for `{}`", v.name))
                    })?;
                    let default = op.eval(&v.default, &bv.default)?;
                    value_attrs.push(ValueAttr {
                        name: v.name.clone(),
                        kind: default.kind(),
                        default,
                    });
                }
            }
            TableSchema::new(key_attrs, value_attrs)
        }
        PlanExpr::RelaxedJoin { left, right, .. } => {
            let (a, b) = (infer_schema(left, ctx)?, infer_schema(right, ctx)?);
            let mut key_attrs = a.key_attrs().to_vec();
            for v in a.value_attrs() {
                if b.key_index(&v.name).is_some() {
                    key_attrs.push(KeyAttr {
                        name: v.name.clone(),
                        kind: v.kind,
                    });
                }
            }
            for k in b.key_attrs() {
                if key_attrs.iter().all(|x| x.name != k.name) {
                    key_attrs.push(k.clone());
                }
            }
            for v in b.value_attrs() {
                if a.key_index(&v.name).is_some() && key_attrs.iter().all(|x| x.name != v.name) {
                    key_attrs.push(KeyAttr {
                        name: v.name.clone(),
                        kind: v.kind,
                    });
                }
            }
            let mut value_attrs: Vec<ValueAttr> = a
                .value_attrs()
                .iter()
                .filter(|v| b.key_index(&v.name).is_none())
                .cloned()
                .collect();
            for v in b.value_attrs() {
                if a.key_index(&v.name).is_none()
                    && value_attrs.iter().all(|x| x.name != v.name)
                {
                    value_attrs.push(v.clone());
                }
            }
            TableSchema::new(key_attrs, value_attrs)
        }
        PlanExpr::Ext { input, func } => {
            let a = infer_schema(input, ctx)?;
            let f = ctx.ext_func(func)?;
            let out = f.output_schema()?;
            let mut key_attrs = a.key_attrs().to_vec();
            key_attrs.extend(out.key_attrs().iter().cloned());
            TableSchema::new(key_attrs, out.value_attrs().to_vec())
        }
        PlanExpr::ProjectValues { input, names } => {
            let a = infer_schema(input, ctx)?;
            let mut value_attrs = Vec::new();
            for n in names {
                let v = a
                    .value_attr(n)
                    .ok_or_else(|| LaraError::schema(format!("no value attribute `{n}`")))?;
                value_attrs.push(v.clone());
            }
            TableSchema::new(a.key_attrs().to_vec(), value_attrs)
        }
        PlanExpr::Rename { input, renaming } => {
            let a = infer_schema(input, ctx)?;
            let rename = |n: &str| renaming.get(n).cloned().unwrap_or_else(|| n.to_string());
            TableSchema::new(
                a.key_attrs()
                    .iter()
                    .map(|k| KeyAttr {
                        name: rename(&k.name),
                        kind: k.kind,
                    })
                    .collect(),
                a.value_attrs()
                    .iter()
                    .map(|v| ValueAttr {
                        name: rename(&v.name),
                        kind: v.kind,
                        default: v.default.clone(),
                    })
                    .collect(),
            )
        }
    }
}

pub fn eval(expr: &PlanExpr, ctx: &EvalContext) -> Result<AssociativeTable> {
    match expr {
        PlanExpr::TableRef(name) => Ok(ctx.table(name)?.clone()),
        PlanExpr::EmptyTable(keys) => Ok(AssociativeTable::new(empty_schema(keys)?)),
        PlanExpr::Union { left, right, plus } => union(
            &eval(left, ctx)?,
            &eval(right, ctx)?,
            &plus.resolve(&ctx.registry)?,
        ),
        PlanExpr::StrictJoin { left, right, times } => strict_join(
            &eval(left, ctx)?,
            &eval(right, ctx)?,
            &times.resolve(&ctx.registry)?,
        ),
        PlanExpr::RelaxedJoin { left, right, times } => relaxed_join(
            &eval(left, ctx)?,
            &eval(right, ctx)?,
            &times.resolve(&ctx.registry)?,
        ),
        PlanExpr::Ext { input, func } => ext(&eval(input, ctx)?, ctx.ext_func(func)?),
        PlanExpr::ProjectValues { input, names } => {
            let n: Vec<&str> = names.iter().map(String::as_str).collect();
            project_values(&eval(input, ctx)?, &n)
        }
        PlanExpr::Rename { input, renaming } => rename_attrs(&eval(input, ctx)?, renaming),
    }
}

// ---------------------------------------------------------------------------
// Rewrites
// ---------------------------------------------------------------------------

fn ops_distribute(times: &PlanOps, plus: &PlanOps, attrs: &[String], reg: &OpRegistry) -> Result<bool> {
    let t = times.resolve(reg)?;
    let p = plus.resolve(reg)?;
    for attr in attrs {
        let (Some(to), Some(po)) = (t.get(attr), p.get(attr)) else {
            return Ok(false);
        };
        if !to.distributes_over(po.name()) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `A join (B union C)  =>  (A join B) union (A join C)` when the
/// multiplication distributes over the aggregation and neither branch of the
/// union hides key attributes the other would have shared with `A`.
/// Returns `None` when not applicable.
pub fn distribute_join_over_union(expr: &PlanExpr, ctx: &EvalContext) -> Result<Option<PlanExpr>> {
    let PlanExpr::StrictJoin { left, right, times } = expr else {
        return Ok(None);
    };
    let PlanExpr::Union {
        left: b,
        right: c,
        plus,
    } = right.as_ref()
    else {
        return Ok(None);
    };
    let sa = infer_schema(left, ctx)?;
    let sb = infer_schema(b, ctx)?;
    let sc = infer_schema(c, ctx)?;
    let union_schema = infer_schema(right, ctx)?;
    let shared_vals: Vec<String> = sa
        .value_attrs()
        .iter()
        .filter(|v| union_schema.value_attr(&v.name).is_some())
        .map(|v| v.name.clone())
        .collect();
    if !ops_distribute(times, plus, &shared_vals, &ctx.registry)? {
        return Ok(None);
    }
    let ka = sa.key_names();
    let kb = sb.key_names();
    let kc = sc.key_names();
    let ab: BTreeSet<&str> = ka.intersection(&kb).copied().collect();
    let ac: BTreeSet<&str> = ka.intersection(&kc).copied().collect();
    if !ab.is_subset(&kc) || !ac.is_subset(&kb) {
        return Ok(None);
    }
    Ok(Some(PlanExpr::Union {
        left: Box::new(PlanExpr::StrictJoin {
            left: left.clone(),
            right: b.clone(),
            times: times.clone(),
        }),
        right: Box::new(PlanExpr::StrictJoin {
            left: left.clone(),
            right: c.clone(),
            times: times.clone(),
        }),
        plus: plus.clone(),
    }))
}

/// `(A join B) union C  =>  ((A union E) join (B union E')) union (C union E'')`
/// where each empty table pads an operand's keys with the attributes it is
/// missing, so the join inside can see every grouping attribute. The
/// aggregation must be what the padding empty unions preserve (identity on
/// defaults) and the multiplication must distribute over it.
pub fn push_union_through_join(expr: &PlanExpr, ctx: &EvalContext) -> Result<Option<PlanExpr>> {
    let PlanExpr::Union { left, right, plus } = expr else {
        return Ok(None);
    };
    let PlanExpr::StrictJoin {
        left: a,
        right: b,
        times,
    } = left.as_ref()
    else {
        return Ok(None);
    };
    let c = right;
    let sa = infer_schema(a, ctx)?;
    let sb = infer_schema(b, ctx)?;
    let sc = infer_schema(c, ctx)?;
    let join_schema = infer_schema(left, ctx)?;
    let shared_vals: Vec<String> = join_schema
        .value_attrs()
        .iter()
        .filter(|v| sc.value_attr(&v.name).is_some())
        .map(|v| v.name.clone())
        .collect();
    if !ops_distribute(times, plus, &shared_vals, &ctx.registry)? {
        return Ok(None);
    }

    let keys_of = |schemas: [&TableSchema; 2]| -> Vec<(String, Kind)> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for s in schemas {
            for k in s.key_attrs() {
                if seen.insert(k.name.clone()) {
                    out.push((k.name.clone(), k.kind));
                }
            }
        }
        out
    };
    let pad = |operand: &PlanExpr, keys: Vec<(String, Kind)>| PlanExpr::Union {
        left: Box::new(operand.clone()),
        right: Box::new(PlanExpr::EmptyTable(keys)),
        plus: plus.clone(),
    };
    Ok(Some(PlanExpr::Union {
        left: Box::new(PlanExpr::StrictJoin {
            left: Box::new(pad(a, keys_of([&sc, &sb]))),
            right: Box::new(pad(b, keys_of([&sc, &sa]))),
            times: times.clone(),
        }),
        right: Box::new(pad(c, keys_of([&sa, &sb]))),
        plus: plus.clone(),
    }))
}

/// Split a table reference into a union of its single-value-attribute
/// projections. Applicable when the table has more than one value attribute
/// and each default is the identity of the aggregation chosen for it.
pub fn decompose_rewrite(
    expr: &PlanExpr,
    plus: &PlanOps,
    ctx: &EvalContext,
) -> Result<Option<PlanExpr>> {
    let schema = infer_schema(expr, ctx)?;
    if schema.value_attrs().len() < 2 {
        return Ok(None);
    }
    let mut parts = schema.value_attrs().iter().map(|v| PlanExpr::ProjectValues {
        input: Box::new(expr.clone()),
        names: vec![v.name.clone()],
    });
    let first = parts.next().unwrap();
    Ok(Some(parts.fold(first, |acc, p| PlanExpr::Union {
        left: Box::new(acc),
        right: Box::new(p),
        plus: plus.clone(),
    })))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::ops::OpRole;
    use crate::scalar::Scalar;

    fn i(x: i64) -> Scalar {
        Scalar::Int(x)
    }

    #[test]
    fn strategy_follows_declared_properties() {
        let registry = OpRegistry::with_builtins();
        assert_eq!(
            choose_union_strategy(&registry.get("add").unwrap()).unwrap(),
            UnionStrategy::ParallelUnordered
        );
        assert_eq!(
            choose_union_strategy(&registry.get("max").unwrap()).unwrap(),
            UnionStrategy::OverlapTolerant
        );
        assert_eq!(
            choose_union_strategy(&registry.get("concat").unwrap()).unwrap(),
            UnionStrategy::ParallelDisjointOrdered
        );
        let bare = BinaryOpSpec::new("first", OpRole::Plus, |a, _| Ok(a.clone()));
        assert!(choose_union_strategy(&bare).is_err());
    }

    #[test]
    fn support_bound_cells() {
        use KeyRelation::*;
        use SupportBound::*;
        assert_eq!(join_support_bound_cell(Equal, true, true), SubsetIntersection);
        assert_eq!(join_support_bound_cell(ASubset, true, true), SubsetIntersection);
        assert_eq!(join_support_bound_cell(Incomparable, true, true), SubsetProduct);
        assert_eq!(join_support_bound_cell(Equal, true, false), SubsetA);
        assert_eq!(join_support_bound_cell(Equal, false, true), SubsetB);
        assert_eq!(join_support_bound_cell(Equal, false, false), SubsetUnion);
        assert_eq!(join_support_bound_cell(ASubset, false, true), SubsetB);
        assert_eq!(join_support_bound_cell(ASuperset, true, false), SubsetA);
        assert_eq!(join_support_bound_cell(ASubset, true, false), Unbounded);
        assert_eq!(join_support_bound_cell(ASuperset, false, true), Unbounded);
        assert_eq!(join_support_bound_cell(Incomparable, false, false), Unbounded);
        assert_eq!(join_support_bound_cell(Incomparable, true, false), Unbounded);
    }

    #[test]
    fn product_bound_is_exact_under_zero_product() {
        let registry = OpRegistry::with_builtins();
        let times = OpMap::single(registry.get("mul").unwrap());
        let b = join_support_bound(
            fixtures::car_table().schema(),
            fixtures::fuel_table().schema(),
            &times,
        )
        .unwrap();
        assert_eq!(b.bound, SupportBound::SubsetProduct);
        assert!(b.exact);
        // add has no zero-product property, so only the upper bound holds.
        let loose = join_support_bound(
            fixtures::car_table().schema(),
            fixtures::car_table().schema(),
            &OpMap::single(registry.get("add").unwrap()),
        )
        .unwrap();
        assert!(!loose.exact);
    }

    fn vec_table(name_kinds: &[&str], rows: &[(&[i64], i64)]) -> AssociativeTable {
        fixtures::table(
            name_kinds.iter().map(|n| (*n, Kind::Int)).collect(),
            vec![("v", i(0))],
            rows.iter()
                .map(|(k, v)| (k.iter().map(|x| i(*x)).collect(), vec![i(*v)]))
                .collect(),
        )
    }

    fn gdl_ctx() -> EvalContext {
        let mut ctx = EvalContext::new();
        ctx.bind(
            "R",
            vec_table(&["a", "b"], &[(&[1, 1], 2), (&[1, 2], 3), (&[2, 2], 5)]),
        );
        ctx.bind(
            "S",
            vec_table(&["b", "c"], &[(&[1, 1], 7), (&[2, 1], 1), (&[2, 3], 4)]),
        );
        ctx.bind(
            "T",
            vec_table(&["c", "d"], &[(&[1, 1], 2), (&[3, 2], 6)]),
        );
        ctx
    }

    #[test]
    fn plan_eval_matches_direct_calls() {
        let ctx = gdl_ctx();
        let plan = PlanExpr::strict_join(
            PlanExpr::table("R"),
            PlanExpr::table("S"),
            PlanOps::single("mul"),
        );
        let got = eval(&plan, &ctx).unwrap();
        let want = strict_join(
            ctx.tables.get("R").unwrap(),
            ctx.tables.get("S").unwrap(),
            &OpMap::single(ctx.registry.get("mul").unwrap()),
        )
        .unwrap();
        assert!(got.tables_equal(&want));
        assert!(infer_schema(&plan, &ctx).unwrap().equivalent(got.schema()));
    }

    #[test]
    fn distribute_join_over_union_is_sound() {
        let mut ctx = gdl_ctx();
        ctx.bind(
            "S2",
            vec_table(&["b", "c"], &[(&[1, 1], 3), (&[2, 2], 9)]),
        );
        let expr = PlanExpr::strict_join(
            PlanExpr::table("R"),
            PlanExpr::union(
                PlanExpr::table("S"),
                PlanExpr::table("S2"),
                PlanOps::single("add"),
            ),
            PlanOps::single("mul"),
        );
        let rewritten = distribute_join_over_union(&expr, &ctx).unwrap().unwrap();
        assert!(matches!(rewritten, PlanExpr::Union { .. }));
        let before = eval(&expr, &ctx).unwrap();
        let after = eval(&rewritten, &ctx).unwrap();
        assert!(before.tables_equal(&after));
    }

    #[test]
    fn distribute_requires_declared_distributivity() {
        let mut ctx = gdl_ctx();
        ctx.bind("S2", vec_table(&["b", "c"], &[(&[1, 1], 3)]));
        // add does not distribute over mul.
        let expr = PlanExpr::strict_join(
            PlanExpr::table("R"),
            PlanExpr::union(
                PlanExpr::table("S"),
                PlanExpr::table("S2"),
                PlanOps::single("mul"),
            ),
            PlanOps::single("add"),
        );
        assert!(distribute_join_over_union(&expr, &ctx).unwrap().is_none());
    }

    #[test]
    fn push_union_through_join_is_sound() {
        // Aggregating a two-table join down to `a` early: the classic
        // sum-of-products factoring.
        let ctx = gdl_ctx();
        let expr = PlanExpr::union(
            PlanExpr::strict_join(
                PlanExpr::table("R"),
                PlanExpr::table("S"),
                PlanOps::single("mul"),
            ),
            PlanExpr::EmptyTable(vec![("a".into(), Kind::Int)]),
            PlanOps::single("add"),
        );
        let rewritten = push_union_through_join(&expr, &ctx).unwrap().unwrap();
        let before = eval(&expr, &ctx).unwrap();
        let after = eval(&rewritten, &ctx).unwrap();
        assert!(before.tables_equal(&after));
    }

    #[test]
    fn three_way_chain_aggregation_rewrite() {
        // (R join S join T) union E_a  ==  (((R join S) union E_{a,c}) join T) union E_a
        let ctx = gdl_ctx();
        let mul = PlanOps::single("mul");
        let plus = PlanOps::single("add");
        let naive = PlanExpr::union(
            PlanExpr::strict_join(
                PlanExpr::strict_join(PlanExpr::table("R"), PlanExpr::table("S"), mul.clone()),
                PlanExpr::table("T"),
                mul.clone(),
            ),
            PlanExpr::EmptyTable(vec![("a".into(), Kind::Int)]),
            plus.clone(),
        );
        let smart = PlanExpr::union(
            PlanExpr::strict_join(
                PlanExpr::union(
                    PlanExpr::strict_join(PlanExpr::table("R"), PlanExpr::table("S"), mul.clone()),
                    PlanExpr::EmptyTable(vec![("a".into(), Kind::Int), ("c".into(), Kind::Int)]),
                    plus.clone(),
                ),
                PlanExpr::table("T"),
                mul,
            ),
            PlanExpr::EmptyTable(vec![("a".into(), Kind::Int)]),
            plus,
        );
        let a = eval(&naive, &ctx).unwrap();
        let b = eval(&smart, &ctx).unwrap();
        assert!(a.tables_equal(&b));
    }

    #[test]
    fn decompose_is_identity_under_union() {
        let mut ctx = EvalContext::new();
        ctx.bind("P", fixtures::part_table());
        let expr = PlanExpr::table("P");
        let split = decompose_rewrite(&expr, &PlanOps::single("add"), &ctx)
            .unwrap()
            .unwrap();
        let back = eval(&split, &ctx).unwrap();
        assert!(back.tables_equal(&fixtures::part_table()));
        // Single-value tables have nothing to split.
        ctx.bind("C", fixtures::colored_parts());
        assert!(decompose_rewrite(&PlanExpr::table("C"), &PlanOps::single("add"), &ctx)
            .unwrap()
            .is_none());
    }
}
