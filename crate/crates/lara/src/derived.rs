//! Operations built from union, strict join, and ext: relational selection,
//! difference, division, outer join, the CombBLAS-style array surface, and
//! the two convolution methods.

use std::sync::Arc;

use crate::error::{LaraError, Result};
use crate::ops::{
    ext, map, mapnz, rename_attrs, strict_join, strict_join_core, union, union_unchecked,
    BinaryOpSpec, ExtFunction, JoinAttr, JoinAttrOp, MapFunction, OpMap, OpRegistry, OpRole,
};
use crate::record::Record;
use crate::scalar::{Kind, Scalar};
use crate::schema::{TableSchema, ValueAttr};
use crate::table::AssociativeTable;

/// Selection: rows failing the predicate take the default values. Built as
/// an ext whose row function keeps or empties each row.
pub fn select(
    a: &AssociativeTable,
    predicate: impl Fn(&Record, &Record) -> Result<bool> + Send + Sync + 'static,
) -> Result<AssociativeTable> {
    let schema = a.schema().clone();
    let out_values = schema.value_attrs().to_vec();
    let f = ExtFunction::new(
        "select",
        schema.clone(),
        Vec::new(),
        out_values.clone(),
        move |k, v| {
            let row_schema = TableSchema::new(Vec::new(), out_values.clone())?;
            let mut t = AssociativeTable::new(row_schema.clone());
            let default = row_schema.default_record();
            if *v != default && predicate(k, v)? {
                t.insert(&Record::empty(), v)?;
            }
            Ok(t)
        },
    );
    ext(a, &f)
}

/// Indicator table over `src`'s support, with `src`'s keys and the given
/// value attribute names as int columns holding 1.
fn indicator_over(src: &AssociativeTable, names: &[String]) -> Result<AssociativeTable> {
    let value_attrs = names
        .iter()
        .map(|n| ValueAttr {
            name: n.clone(),
            kind: Kind::Int,
            default: Scalar::Int(0),
        })
        .collect();
    let schema = TableSchema::new(src.schema().key_attrs().to_vec(), value_attrs)?;
    let mut out = AssociativeTable::new(schema);
    for (k, _) in src.support_rows() {
        out.insert_row(k.clone(), vec![Scalar::Int(1); names.len()])?;
    }
    Ok(out)
}

/// `A` restricted to the keys whose projection onto `K_A ∩ K_B` is in
/// `supp(B)`'s projection, multiplied by an indicator of `B`'s support.
fn restrict_to_support(
    a: &AssociativeTable,
    b: &AssociativeTable,
    or_like: &Arc<BinaryOpSpec>,
) -> Result<AssociativeTable> {
    let names: Vec<String> = a
        .schema()
        .value_attrs()
        .iter()
        .map(|v| v.name.clone())
        .collect();
    let ind = indicator_over(b, &names)?;
    // Collapse the indicator onto the shared keys; folded 1s remain 1.
    let shared: Vec<(&str, Kind)> = b
        .schema()
        .key_attrs()
        .iter()
        .filter(|k| a.schema().key_index(&k.name).is_some())
        .map(|k| (k.name.as_str(), k.kind))
        .collect();
    let collapsed = union_unchecked(
        &ind,
        &AssociativeTable::empty_table(shared),
        &OpMap::single(or_like.clone()),
    )?;
    let attrs = a
        .schema()
        .value_attrs()
        .iter()
        .enumerate()
        .map(|(i, v)| JoinAttr {
            name: v.name.clone(),
            a_idx: i,
            b_idx: collapsed.schema().value_index(&v.name).unwrap(),
            op: JoinAttrOp::IndicatorRight,
            a_default: v.default.clone(),
            b_default: Scalar::Int(0),
        })
        .collect();
    strict_join_core(a, &collapsed, attrs)
}

/// Difference on supports: rows of `A` whose shared-key projection lands in
/// `supp(B)` are cancelled by adding their additive inverse.
pub fn difference(
    a: &AssociativeTable,
    b: &AssociativeTable,
    registry: &OpRegistry,
) -> Result<AssociativeTable> {
    let add = registry.get("add")?;
    let max = registry.get("max")?;
    let matched = restrict_to_support(a, b, &max)?;
    let neg = {
        let add = add.clone();
        MapFunction::new(matched.schema().value_attrs().to_vec(), move |v| {
            let mut out = Record::empty();
            for (name, s) in v.iter() {
                out.set(name.to_string(), add.invert(s)?);
            }
            Ok(out)
        })
    };
    let negated = mapnz(&matched, &neg)?;
    union(a, &negated, &OpMap::single(add))
}

fn check_division_operands<'a>(
    a: &'a AssociativeTable,
    b: &AssociativeTable,
    times: &OpMap,
) -> Result<Vec<(&'a ValueAttr, Arc<BinaryOpSpec>)>> {
    for k in b.schema().key_attrs() {
        if a.schema().key_kind(&k.name) != Some(k.kind) {
            return Err(LaraError::Division(format!(
                "divisor key `{}` is not a key of the dividend",
                k.name
            )));
        }
    }
    if b.support_len() == 0 {
        return Err(LaraError::Division(
            "division by a table with empty support is undefined".into(),
        ));
    }
    let mut shared = Vec::new();
    for v in b.schema().value_attrs() {
        let Some(av) = a.schema().value_attr(&v.name) else {
            continue;
        };
        let Some(op) = times.get(&v.name) else {
            return Err(LaraError::Division(format!(
                "no multiplication operator for `{}`",
                v.name
            )));
        };
        if !op.has_inverse() {
            return Err(LaraError::Division(format!(
                "operator `{}` has no multiplicative inverse",
                op.name()
            )));
        }
        shared.push((av, op.clone()));
    }
    if shared.is_empty() {
        return Err(LaraError::Division(
            "dividend and divisor share no value attributes".into(),
        ));
    }
    Ok(shared)
}

fn quotient_keys(a: &AssociativeTable, b: &AssociativeTable) -> Vec<(String, Kind)> {
    a.schema()
        .key_attrs()
        .iter()
        .filter(|k| b.schema().key_index(&k.name).is_none())
        .map(|k| (k.name.clone(), k.kind))
        .collect()
}

/// Division, per-row algorithm: the min-join over `b` in `supp(B)` of
/// `(A join b⁻¹) union E_{K_A \ K_B}`. Inverts a join with `B` when the
/// shared value type is a group under the multiplication.
pub fn divide(
    a: &AssociativeTable,
    b: &AssociativeTable,
    times: &OpMap,
    registry: &OpRegistry,
) -> Result<AssociativeTable> {
    let shared = check_division_operands(a, b, times)?;
    let min = registry.get("min")?;
    let quot_keys = quotient_keys(a, b);
    let quot_keys_ref: Vec<(&str, Kind)> =
        quot_keys.iter().map(|(n, k)| (n.as_str(), *k)).collect();

    let binv_schema = TableSchema::new(
        b.schema().key_attrs().to_vec(),
        shared.iter().map(|(av, _)| (*av).clone()).collect(),
    )?;
    let mut result: Option<AssociativeTable> = None;
    for (bk, bv) in b.support_rows() {
        let mut binv = AssociativeTable::new(binv_schema.clone());
        let mut row = Vec::with_capacity(shared.len());
        for (av, op) in &shared {
            let v = &bv[b.schema().value_index(&av.name).unwrap()];
            row.push(if v.approx_eq(&av.default) {
                v.clone()
            } else {
                op.invert(v)?
            });
        }
        binv.insert_row(bk.clone(), row)?;
        let joined = strict_join(a, &binv, times)?;
        let quotient = union_unchecked(
            &joined,
            &AssociativeTable::empty_table(quot_keys_ref.iter().copied()),
            &OpMap::single(min.clone()),
        )?;
        result = Some(match result {
            None => quotient,
            Some(acc) => strict_join(&acc, &quotient, &OpMap::single(min.clone()))?,
        });
    }
    Ok(result.expect("divisor support checked nonempty"))
}

/// Division, counter-column algorithm: join with the inverted divisor all at
/// once, count matches while aggregating with `[min,+]`, and delete rows
/// that did not match every divisor row.
pub fn divide_counter(
    a: &AssociativeTable,
    b: &AssociativeTable,
    times: &OpMap,
    registry: &OpRegistry,
) -> Result<AssociativeTable> {
    let shared = check_division_operands(a, b, times)?;
    let min = registry.get("min")?;
    let add = registry.get("add")?;
    let b_rows = b.support_len() as i64;

    let inverter = {
        let shared: Vec<(String, Scalar, Arc<BinaryOpSpec>)> = shared
            .iter()
            .map(|(av, op)| (av.name.clone(), av.default.clone(), op.clone()))
            .collect();
        MapFunction::new(b.schema().value_attrs().to_vec(), move |v| {
            let mut out = v.clone();
            for (name, default, op) in &shared {
                let cur = v.get(name).expect("shared attr present");
                if !cur.approx_eq(default) {
                    out.set(name.clone(), op.invert(cur)?);
                }
            }
            Ok(out)
        })
    };
    let binv = mapnz(b, &inverter)?;
    let joined = strict_join(a, &binv, times)?;

    let mut counter = String::from("i");
    while joined.schema().value_index(&counter).is_some()
        || joined.schema().key_index(&counter).is_some()
    {
        counter.push('\'');
    }
    let mut counted_values = joined.schema().value_attrs().to_vec();
    counted_values.push(ValueAttr {
        name: counter.clone(),
        kind: Kind::Int,
        default: Scalar::Int(0),
    });
    let count_one = {
        let counter = counter.clone();
        MapFunction::new(counted_values, move |v| {
            let mut out = v.clone();
            out.set(counter.clone(), Scalar::Int(1));
            Ok(out)
        })
    };
    let x = mapnz(&joined, &count_one)?;

    let quot_keys = quotient_keys(a, b);
    let mut plus = OpMap::single(min);
    plus = plus.with(counter.clone(), add);
    let y = union_unchecked(
        &x,
        &AssociativeTable::empty_table(quot_keys.iter().map(|(n, k)| (n.as_str(), *k))),
        &plus,
    )?;

    let kept: Vec<ValueAttr> = y
        .schema()
        .value_attrs()
        .iter()
        .filter(|v| v.name != counter)
        .cloned()
        .collect();
    let deleter = {
        let counter = counter.clone();
        let kept = kept.clone();
        MapFunction::new(kept.clone(), move |v| {
            let full = v.get(&counter) == Some(&Scalar::Int(b_rows));
            let mut out = Record::empty();
            for attr in &kept {
                out.set(
                    attr.name.clone(),
                    if full {
                        v.get(&attr.name).expect("kept attr").clone()
                    } else {
                        attr.default.clone()
                    },
                );
            }
            Ok(out)
        })
    };
    mapnz(&y, &deleter)
}

/// One side of the outer join: `A join (replace(V_A)(B) union E_{K_B\K_A})`,
/// keeping every row of `A` paired with every key combination `B`'s support
/// offers for the attributes `A` lacks.
pub fn outer_half(
    a: &AssociativeTable,
    b: &AssociativeTable,
    or_like: &Arc<BinaryOpSpec>,
) -> Result<AssociativeTable> {
    let names: Vec<String> = a
        .schema()
        .value_attrs()
        .iter()
        .map(|v| v.name.clone())
        .collect();
    let ind = indicator_over(b, &names)?;
    let b_only: Vec<(&str, Kind)> = b
        .schema()
        .key_attrs()
        .iter()
        .filter(|k| a.schema().key_index(&k.name).is_none())
        .map(|k| (k.name.as_str(), k.kind))
        .collect();
    let padded = union_unchecked(
        &ind,
        &AssociativeTable::empty_table(b_only),
        &OpMap::single(or_like.clone()),
    )?;
    let attrs = a
        .schema()
        .value_attrs()
        .iter()
        .enumerate()
        .map(|(i, v)| JoinAttr {
            name: v.name.clone(),
            a_idx: i,
            b_idx: padded.schema().value_index(&v.name).unwrap(),
            op: JoinAttrOp::IndicatorRight,
            a_default: v.default.clone(),
            b_default: Scalar::Int(0),
        })
        .collect();
    strict_join_core(a, &padded, attrs)
}

/// Outer join: relaxed-join rows plus rows where only one side matches, the
/// other side's value attributes taking their defaults.
pub fn outer_join(
    a: &AssociativeTable,
    b: &AssociativeTable,
    registry: &OpRegistry,
) -> Result<AssociativeTable> {
    for v in a.schema().value_attrs() {
        if b.schema().value_attr(&v.name).is_some() || b.schema().key_index(&v.name).is_some() {
            return Err(LaraError::schema(format!(
                "outer join requires disjoint value attributes; `{}` clashes",
                v.name
            )));
        }
    }
    for v in b.schema().value_attrs() {
        if a.schema().key_index(&v.name).is_some() {
            return Err(LaraError::schema(format!(
                "outer join requires consistent roles; `{}` clashes",
                v.name
            )));
        }
    }
    let max = registry.get("max")?;
    let left = outer_half(a, b, &max)?;
    let right = outer_half(b, a, &max)?;
    union(&left, &right, &OpMap::empty())
}

// ---------------------------------------------------------------------------
// CombBLAS-style array surface
// ---------------------------------------------------------------------------

fn require_key_count(t: &AssociativeTable, n: usize, what: &str) -> Result<()> {
    if t.schema().key_attrs().len() != n {
        return Err(LaraError::schema(format!(
            "{what} must have exactly {n} key attribute(s), found {}",
            t.schema().key_attrs().len()
        )));
    }
    Ok(())
}

/// Sparse matrix-matrix multiply: `(A join B) union E_{r,c}` over the
/// non-shared key attributes.
pub fn spgemm(
    a: &AssociativeTable,
    b: &AssociativeTable,
    plus: &OpMap,
    times: &OpMap,
) -> Result<AssociativeTable> {
    require_key_count(a, 2, "spgemm operand A")?;
    require_key_count(b, 2, "spgemm operand B")?;
    let shared: Vec<&str> = a
        .schema()
        .key_attrs()
        .iter()
        .filter(|k| b.schema().key_index(&k.name).is_some())
        .map(|k| k.name.as_str())
        .collect();
    if shared.len() != 1 {
        return Err(LaraError::schema(format!(
            "spgemm operands must share exactly one key attribute, found {}",
            shared.len()
        )));
    }
    let joined = strict_join(a, b, times)?;
    let outer: Vec<(&str, Kind)> = joined
        .schema()
        .key_attrs()
        .iter()
        .filter(|k| k.name != shared[0])
        .map(|k| (k.name.as_str(), k.kind))
        .collect();
    union(&joined, &AssociativeTable::empty_table(outer), plus)
}

/// Sparse matrix-vector multiply: `(A join v) union E_r`.
pub fn spmv(
    a: &AssociativeTable,
    v: &AssociativeTable,
    plus: &OpMap,
    times: &OpMap,
) -> Result<AssociativeTable> {
    require_key_count(a, 2, "spmv matrix")?;
    require_key_count(v, 1, "spmv vector")?;
    let vk = &v.schema().key_attrs()[0].name;
    if a.schema().key_index(vk).is_none() {
        return Err(LaraError::schema(format!(
            "spmv vector key `{vk}` is not a key of the matrix"
        )));
    }
    let joined = strict_join(a, v, times)?;
    let outer: Vec<(&str, Kind)> = a
        .schema()
        .key_attrs()
        .iter()
        .filter(|k| k.name != *vk)
        .map(|k| (k.name.as_str(), k.kind))
        .collect();
    union(&joined, &AssociativeTable::empty_table(outer), plus)
}

/// Elementwise multiply of same-keyed tables, with optional complementing of
/// one side's pattern. Complementing both sides is disallowed.
pub fn spewisex(
    a: &AssociativeTable,
    b: &AssociativeTable,
    times: &OpMap,
    not_a: bool,
    not_b: bool,
    registry: &OpRegistry,
) -> Result<AssociativeTable> {
    if a.schema().key_names() != b.schema().key_names() {
        return Err(LaraError::schema(
            "spewisex operands must have the same key attributes",
        ));
    }
    match (not_a, not_b) {
        (true, true) => Err(LaraError::schema(
            "spewisex with both patterns complemented is disallowed",
        )),
        (false, true) => difference(a, b, registry),
        (true, false) => difference(b, a, registry),
        (false, false) => strict_join(a, b, times),
    }
}

/// Elementwise sum: plain union.
pub fn spewisesum(
    a: &AssociativeTable,
    b: &AssociativeTable,
    plus: &OpMap,
) -> Result<AssociativeTable> {
    union(a, b, plus)
}

/// Reduce along dimensions: `A union E_X` over the kept key attributes.
pub fn reduce(
    a: &AssociativeTable,
    plus: &OpMap,
    keep_keys: &[&str],
) -> Result<AssociativeTable> {
    let mut keys = Vec::new();
    for n in keep_keys {
        let Some(kind) = a.schema().key_kind(n) else {
            return Err(LaraError::schema(format!("no key attribute `{n}` to keep")));
        };
        keys.push((*n, kind));
    }
    union(a, &AssociativeTable::empty_table(keys), plus)
}

/// Subset reference via a mask function over value records.
pub fn spref_mask(a: &AssociativeTable, mask: &MapFunction) -> Result<AssociativeTable> {
    map(a, mask)
}

/// Subset reference via a key-selecting table: `A join R` with `R` an
/// all-ones indicator over the selected keys.
pub fn spref_table(a: &AssociativeTable, keep: &AssociativeTable, registry: &OpRegistry) -> Result<AssociativeTable> {
    for k in keep.schema().key_attrs() {
        if a.schema().key_kind(&k.name) != Some(k.kind) {
            return Err(LaraError::schema(format!(
                "spref selector key `{}` is not a key of the operand",
                k.name
            )));
        }
    }
    restrict_to_support(a, keep, &registry.get("max")?)
}

/// Assignment: `(A union_{⊕∖} B) union_+ B`, zeroing `A` where `B` has
/// support, then adding `B`.
pub fn spasgn(
    a: &AssociativeTable,
    b: &AssociativeTable,
    registry: &OpRegistry,
) -> Result<AssociativeTable> {
    if a.schema().key_names() != b.schema().key_names() {
        return Err(LaraError::schema(
            "spasgn operands must have the same key attributes",
        ));
    }
    let mut zero_out = OpMap::empty();
    for v in a.schema().value_attrs() {
        let Some(bv) = b.schema().value_attr(&v.name) else {
            continue;
        };
        let b_default = bv.default.clone();
        let a_default = v.default.clone();
        let op = BinaryOpSpec::new("zero-where-assigned", OpRole::Plus, move |x, y| {
            Ok(if y.approx_eq(&b_default) {
                x.clone()
            } else {
                a_default.clone()
            })
        });
        zero_out = zero_out.with(v.name.clone(), Arc::new(op));
    }
    let cleared = union_unchecked(a, b, &zero_out)?;
    union(&cleared, b, &OpMap::single(registry.get("add")?))
}

/// Scale rows or columns of `A` by a vector: `A join v`. A sparse vector
/// whose absent entries mean "leave unscaled" carries default 1 and needs
/// the vector's key to be a proper subset of `A`'s for the join to stay
/// bounded.
pub fn scale(
    a: &AssociativeTable,
    v: &AssociativeTable,
    times: &OpMap,
    sparse_default_one: bool,
) -> Result<AssociativeTable> {
    require_key_count(v, 1, "scale vector")?;
    let vk = &v.schema().key_attrs()[0].name;
    if a.schema().key_index(vk).is_none() {
        return Err(LaraError::schema(format!(
            "scale vector key `{vk}` is not a key of the operand"
        )));
    }
    if sparse_default_one && v.schema().key_attrs().len() >= a.schema().key_attrs().len() {
        return Err(LaraError::schema(
            "sparse default-one scaling needs the vector keys to be a proper subset",
        ));
    }
    strict_join(a, v, times)
}

/// Apply a function to every value record: plain map.
pub fn apply(a: &AssociativeTable, g: &MapFunction) -> Result<AssociativeTable> {
    map(a, g)
}

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

/// A convolution kernel as the finite set of relative key offsets it writes
/// to, together with the operation combining overlapping contributions.
#[derive(Clone)]
pub struct ConvolutionKernel {
    pub offsets: Vec<Vec<i64>>,
    pub combine: Arc<BinaryOpSpec>,
}

/// Shift every support key of `A` by `delta`.
fn shift_keys(a: &AssociativeTable, delta: &[i64]) -> Result<AssociativeTable> {
    let mut out = AssociativeTable::new(a.schema().clone());
    for (k, v) in a.support_rows() {
        let mut key = Vec::with_capacity(k.len());
        for (s, d) in k.iter().zip(delta) {
            match s {
                Scalar::Int(x) => key.push(Scalar::Int(x + d)),
                _ => {
                    return Err(LaraError::schema(
                        "shift convolution needs integer key attributes",
                    ))
                }
            }
        }
        out.insert_row(key, v.clone())?;
    }
    Ok(out)
}

/// Convolution by shifting: one shifted copy of `A` per kernel offset,
/// folded together with joins that combine overlapping entries. The copies
/// share the key header, so the equal-keys join condition keeps every
/// partial result bounded.
pub fn convolve_shift(a: &AssociativeTable, kernel: &ConvolutionKernel) -> Result<AssociativeTable> {
    if kernel.offsets.is_empty() {
        return Err(LaraError::schema("convolution kernel has no offsets"));
    }
    let arity = a.schema().key_attrs().len();
    for off in &kernel.offsets {
        if off.len() != arity {
            return Err(LaraError::schema(format!(
                "kernel offset arity {} does not match the {arity} key attribute(s)",
                off.len()
            )));
        }
    }
    let times = OpMap::single(kernel.combine.clone());
    let mut result: Option<AssociativeTable> = None;
    for off in &kernel.offsets {
        let shifted = shift_keys(a, off)?;
        result = Some(match result {
            None => shifted,
            Some(acc) => strict_join(&acc, &shifted, &times)?,
        });
    }
    Ok(result.unwrap())
}

/// d-moving sum over a time series with one real key `t` and one value `v`:
/// each output time `t'` holds the sum of values at times in `[t'-d, t']`.
pub fn moving_sum(
    t: &AssociativeTable,
    d: f64,
    registry: &OpRegistry,
) -> Result<AssociativeTable> {
    let schema = t.schema();
    if schema.key_attrs().len() != 1
        || schema.key_attrs()[0].kind != Kind::Real
        || schema.value_attrs().len() != 1
    {
        return Err(LaraError::schema(
            "moving sum needs one real key attribute and one value attribute",
        ));
    }
    if d <= 0.0 {
        return Err(LaraError::schema("moving sum window must be positive"));
    }
    let t_name = schema.key_attrs()[0].name.clone();
    let v_name = schema.value_attrs()[0].name.clone();
    let t_prime = format!("{t_name}'");

    // Key-into-value map: each support row's value becomes its own time.
    let key_into_value = {
        let (t_name, v_name) = (t_name.clone(), v_name.clone());
        let default_rec = schema.default_record();
        let out = vec![ValueAttr {
            name: v_name.clone(),
            kind: Kind::Real,
            default: Scalar::Real(0.0),
        }];
        ExtFunction::new(
            "key-into-value",
            schema.clone(),
            Vec::new(),
            out.clone(),
            move |k, v| {
                let row_schema = TableSchema::new(Vec::new(), out.clone())?;
                let mut table = AssociativeTable::new(row_schema);
                if !v.approx_eq(&default_rec) {
                    let time = k.get(&t_name).expect("time key").clone();
                    table.insert(
                        &Record::empty(),
                        &Record::from_pairs([(v_name.clone(), time)]),
                    )?;
                }
                Ok(table)
            },
        )
    };
    let t0 = ext(t, &key_into_value)?;
    let t0p = rename_attrs(
        &t0,
        &[(t_name.clone(), t_prime.clone())].into_iter().collect(),
    )?;

    // Window indicator: 1 when the right time falls within [left, left+d].
    let window = Arc::new(
        BinaryOpSpec::new("window", OpRole::Times, move |a, b| {
            let err = || LaraError::eval("window operator needs numeric values");
            let (x, y) = (a.as_f64().ok_or_else(err)?, b.as_f64().ok_or_else(err)?);
            Ok(Scalar::Int((x != 0.0 && x <= y && y <= x + d) as i64))
        })
        .with_annihilators(vec![Scalar::Real(0.0)]),
    );
    let r = strict_join(&t0, &t0p, &OpMap::single(window))?;

    let weighted = strict_join(&r, t, &OpMap::single(registry.get("mul")?))?;
    let kind = schema_key_kind(t);
    union(
        &weighted,
        &AssociativeTable::empty_table([(t_prime.as_str(), kind)]),
        &OpMap::single(registry.get("add")?),
    )
}

fn schema_key_kind(t: &AssociativeTable) -> Kind {
    t.schema().key_attrs()[0].kind
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
    fn r(x: f64) -> Scalar {
        Scalar::Real(x)
    }

    fn mul_map() -> OpMap {
        OpMap::single(reg().get("mul").unwrap())
    }

    #[test]
    fn select_keeps_matching_rows() {
        let p = fixtures::part_table();
        let heavy = select(&p, |_k, v| {
            Ok(v.get("wgt").and_then(|w| w.as_i64()).unwrap_or(0) > 2)
        })
        .unwrap();
        assert_eq!(heavy.support_len(), 2);
        assert_eq!(heavy.lookup_row(&[s("p01")]), vec![s("blue"), i(3)]);
        assert_eq!(heavy.lookup_row(&[s("p02")]), vec![s("red"), i(4)]);
        assert_eq!(heavy.lookup_row(&[s("p04")]), vec![s("white"), i(0)]);
    }

    #[test]
    fn difference_removes_matched_support() {
        let registry = reg();
        let a = fixtures::table(
            vec![("k", Kind::Text)],
            vec![("v", i(0))],
            vec![
                (vec![s("a")], vec![i(1)]),
                (vec![s("b")], vec![i(2)]),
                (vec![s("c")], vec![i(3)]),
            ],
        );
        let b = fixtures::table(
            vec![("k", Kind::Text)],
            vec![("v", i(0))],
            vec![(vec![s("b")], vec![i(9)]), (vec![s("d")], vec![i(9)])],
        );
        let d = difference(&a, &b, &registry).unwrap();
        assert_eq!(d.support_len(), 2);
        assert_eq!(d.lookup_row(&[s("a")]), vec![i(1)]);
        assert_eq!(d.lookup_row(&[s("b")]), vec![i(0)]);
        assert_eq!(d.lookup_row(&[s("c")]), vec![i(3)]);
    }

    #[test]
    fn divide_recovers_cartesian_factor() {
        let registry = reg();
        let c = fixtures::car_table();
        let p = fixtures::fuel_table();
        let t = strict_join(&c, &p, &mul_map()).unwrap();
        assert_eq!(t.lookup_row(&[s("compact"), s("reg")]), vec![r(4.0)]);
        assert_eq!(t.lookup_row(&[s("SUV"), s("prem")]), vec![r(15.0)]);
        let q = divide(&t, &p, &mul_map(), &registry).unwrap();
        assert!(q.tables_equal(&c));
    }

    #[test]
    fn divide_takes_minimum_quotient() {
        let registry = reg();
        let t = fixtures::nonproduct_totals();
        let p = fixtures::fuel_table();
        let q = divide(&t, &p, &mul_map(), &registry).unwrap();
        assert_eq!(q.support_len(), 1);
        assert_eq!(q.lookup_row(&[s("electric")]), vec![r(1.5)]);
    }

    #[test]
    fn divide_counter_agrees_with_divide() {
        let registry = reg();
        let t = fixtures::nonproduct_totals();
        let p = fixtures::fuel_table();
        let by_min = divide(&t, &p, &mul_map(), &registry).unwrap();
        let by_count = divide_counter(&t, &p, &mul_map(), &registry).unwrap();
        assert!(by_min.tables_equal(&by_count));
        assert_eq!(by_count.lookup_row(&[s("electric")]), vec![r(1.5)]);
    }

    #[test]
    fn divide_rejects_empty_divisor() {
        let registry = reg();
        let t = fixtures::nonproduct_totals();
        let empty = AssociativeTable::new(fixtures::fuel_table().schema().clone());
        assert!(matches!(
            divide(&t, &empty, &mul_map(), &registry),
            Err(LaraError::Division(_))
        ));
    }

    #[test]
    fn outer_join_keeps_both_supports() {
        let registry = reg();
        let out = outer_join(
            &fixtures::weekly_parts(),
            &fixtures::weekly_suppliers(),
            &registry,
        )
        .unwrap();
        assert_eq!(out.support_len(), 11);
        // Matched row carries both values.
        assert_eq!(
            out.lookup_row(&[s("M"), s("p01"), s("s01")]),
            vec![s("blue"), s("WA")]
        );
        // Left-only row keeps the left value; the right reads as default.
        assert_eq!(
            out.lookup_row(&[s("W"), s("p01"), s("s01")]),
            vec![s("yellow"), s("GA")]
        );
        // Right-only row keeps the right value.
        assert_eq!(
            out.lookup_row(&[s("F"), s("p01"), s("s01")]),
            vec![s("white"), s("CA")]
        );
    }

    #[test]
    fn spgemm_matches_dense_product() {
        let a = fixtures::table(
            vec![("r", Kind::Int), ("m", Kind::Int)],
            vec![("v", i(0))],
            vec![
                (vec![i(1), i(1)], vec![i(1)]),
                (vec![i(1), i(2)], vec![i(2)]),
                (vec![i(2), i(1)], vec![i(3)]),
                (vec![i(2), i(2)], vec![i(4)]),
            ],
        );
        let b = fixtures::table(
            vec![("m", Kind::Int), ("c", Kind::Int)],
            vec![("v", i(0))],
            vec![
                (vec![i(1), i(1)], vec![i(5)]),
                (vec![i(1), i(2)], vec![i(6)]),
                (vec![i(2), i(1)], vec![i(7)]),
                (vec![i(2), i(2)], vec![i(8)]),
            ],
        );
        let registry = reg();
        let c = spgemm(
            &a,
            &b,
            &OpMap::single(registry.get("add").unwrap()),
            &OpMap::single(registry.get("mul").unwrap()),
        )
        .unwrap();
        assert_eq!(c.lookup_row(&[i(1), i(1)]), vec![i(19)]);
        assert_eq!(c.lookup_row(&[i(1), i(2)]), vec![i(22)]);
        assert_eq!(c.lookup_row(&[i(2), i(1)]), vec![i(43)]);
        assert_eq!(c.lookup_row(&[i(2), i(2)]), vec![i(50)]);
    }

    #[test]
    fn spmv_contracts_the_shared_key() {
        let registry = reg();
        let a = fixtures::table(
            vec![("r", Kind::Int), ("c", Kind::Int)],
            vec![("v", i(0))],
            vec![
                (vec![i(1), i(1)], vec![i(2)]),
                (vec![i(1), i(2)], vec![i(3)]),
                (vec![i(2), i(2)], vec![i(4)]),
            ],
        );
        let v = fixtures::table(
            vec![("c", Kind::Int)],
            vec![("v", i(0))],
            vec![(vec![i(1)], vec![i(10)]), (vec![i(2)], vec![i(100)])],
        );
        let y = spmv(
            &a,
            &v,
            &OpMap::single(registry.get("add").unwrap()),
            &OpMap::single(registry.get("mul").unwrap()),
        )
        .unwrap();
        assert_eq!(y.lookup_row(&[i(1)]), vec![i(320)]);
        assert_eq!(y.lookup_row(&[i(2)]), vec![i(400)]);
    }

    #[test]
    fn spewisex_not_b_is_difference() {
        let registry = reg();
        let a = fixtures::table(
            vec![("r", Kind::Int)],
            vec![("v", i(0))],
            vec![(vec![i(1)], vec![i(5)]), (vec![i(2)], vec![i(6)])],
        );
        let b = fixtures::table(
            vec![("r", Kind::Int)],
            vec![("v", i(0))],
            vec![(vec![i(2)], vec![i(7)])],
        );
        let masked = spewisex(&a, &b, &mul_map(), false, true, &registry).unwrap();
        assert_eq!(masked.lookup_row(&[i(1)]), vec![i(5)]);
        assert_eq!(masked.lookup_row(&[i(2)]), vec![i(0)]);
        assert!(matches!(
            spewisex(&a, &b, &mul_map(), true, true, &registry),
            Err(LaraError::Schema(_))
        ));
    }

    #[test]
    fn reduce_sums_dropped_dimensions() {
        let registry = reg();
        let a = fixtures::conv_matrix();
        let rowsums = reduce(&a, &OpMap::single(registry.get("add").unwrap()), &["i"]).unwrap();
        assert_eq!(rowsums.lookup_row(&[i(1)]), vec![i(6)]);
        assert_eq!(rowsums.lookup_row(&[i(2)]), vec![i(15)]);
        assert_eq!(rowsums.lookup_row(&[i(3)]), vec![i(24)]);
    }

    #[test]
    fn sparse_default_one_scale_leaves_missing_columns() {
        let a = fixtures::conv_matrix();
        // Vector over j with default 1: only column 2 is scaled.
        let v = fixtures::table(
            vec![("j", Kind::Int)],
            vec![("v", i(1))],
            vec![(vec![i(2)], vec![i(10)])],
        );
        let scaled = scale(&a, &v, &mul_map(), true).unwrap();
        assert_eq!(scaled.lookup_row(&[i(1), i(1)]), vec![i(1)]);
        assert_eq!(scaled.lookup_row(&[i(1), i(2)]), vec![i(20)]);
        assert_eq!(scaled.lookup_row(&[i(3), i(3)]), vec![i(9)]);
        assert_eq!(scaled.support_len(), 9);
    }

    #[test]
    fn spasgn_overwrites_the_assigned_block() {
        let registry = reg();
        let a = fixtures::conv_matrix();
        let b = fixtures::table(
            vec![("i", Kind::Int), ("j", Kind::Int)],
            vec![("v", i(0))],
            vec![(vec![i(2), i(2)], vec![i(50)])],
        );
        let assigned = spasgn(&a, &b, &registry).unwrap();
        assert_eq!(assigned.lookup_row(&[i(2), i(2)]), vec![i(50)]);
        assert_eq!(assigned.lookup_row(&[i(1), i(1)]), vec![i(1)]);
        assert_eq!(assigned.support_len(), 9);
    }

    #[test]
    fn shifted_convolution_sums_the_kernel_window() {
        let registry = reg();
        let kernel = ConvolutionKernel {
            offsets: vec![vec![1, -1], vec![0, -1], vec![-1, -1]],
            combine: registry.get("add").unwrap(),
        };
        let out = convolve_shift(&fixtures::conv_matrix(), &kernel).unwrap();
        assert_eq!(out.lookup_row(&[i(2), i(1)]), vec![i(15)]);
        assert_eq!(out.lookup_row(&[i(0), i(0)]), vec![i(1)]);
        assert_eq!(out.lookup_row(&[i(2), i(2)]), vec![i(18)]);
        assert_eq!(out.lookup_row(&[i(4), i(2)]), vec![i(9)]);
        assert_eq!(out.support_len(), 15);
    }

    #[test]
    fn prefix_sum_as_shifted_convolution() {
        let registry = reg();
        let a = fixtures::table(
            vec![("k", Kind::Int)],
            vec![("v", i(0))],
            vec![
                (vec![i(1)], vec![i(1)]),
                (vec![i(2)], vec![i(1)]),
                (vec![i(3)], vec![i(1)]),
            ],
        );
        let kernel = ConvolutionKernel {
            offsets: vec![vec![0], vec![1], vec![2]],
            combine: registry.get("add").unwrap(),
        };
        let out = convolve_shift(&a, &kernel).unwrap();
        assert_eq!(out.lookup_row(&[i(1)]), vec![i(1)]);
        assert_eq!(out.lookup_row(&[i(2)]), vec![i(2)]);
        assert_eq!(out.lookup_row(&[i(3)]), vec![i(3)]);
    }

    #[test]
    fn moving_sum_windows_are_closed() {
        let registry = reg();
        let out = moving_sum(&fixtures::time_series(), 2.0, &registry).unwrap();
        assert_eq!(out.support_len(), 6);
        let expect = [(1.0, 4), (1.3, 12), (2.5, 18), (3.1, 16), (5.0, 5), (9.0, 42)];
        for (t, v) in expect {
            assert_eq!(out.lookup_row(&[r(t)]), vec![i(v)], "window ending at {t}");
        }
    }

    #[test]
    fn moving_sum_single_point() {
        let registry = reg();
        let one = fixtures::table(
            vec![("t", Kind::Real)],
            vec![("v", i(0))],
            vec![(vec![r(7.0)], vec![i(5)])],
        );
        let out = moving_sum(&one, 3.0, &registry).unwrap();
        assert_eq!(out.lookup_row(&[r(7.0)]), vec![i(5)]);
    }
}
