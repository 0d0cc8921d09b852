//! Reference algorithms over associative tables: joint PageRank across two
//! edge tables, Markov-chain clustering, and LU decomposition.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lara::derived::spgemm;
use lara::error::{LaraError, Result};
use lara::ops::{
    mapnz, rename_attrs, strict_join, union, union_unchecked, BinaryOpSpec, MapFunction, OpMap,
    OpRegistry, OpRole,
};
use lara::{AssociativeTable, Kind, Scalar, TableSchema, ValueAttr};

fn real(x: f64) -> Scalar {
    Scalar::Real(x)
}

fn require_edge_schema(t: &AssociativeTable, what: &str) -> Result<()> {
    let s = t.schema();
    if s.key_attrs().len() != 2
        || s.key_index("src").is_none()
        || s.key_index("dst").is_none()
        || s.value_attrs().len() != 1
        || s.value_attrs()[0].name != "val"
    {
        return Err(LaraError::schema(format!(
            "{what} must have keys (src, dst) and a single value `val`"
        )));
    }
    Ok(())
}

/// Indicator over the named key of `t`: 1.0 wherever any support row
/// projects onto it.
fn key_indicator(t: &AssociativeTable, key: &str, registry: &OpRegistry) -> Result<AssociativeTable> {
    let ones = mapnz(
        t,
        &MapFunction::new(
            vec![ValueAttr {
                name: "val".into(),
                kind: Kind::Real,
                default: real(0.0),
            }],
            |_| {
                let mut out = lara::Record::empty();
                out.set("val", real(1.0));
                Ok(out)
            },
        ),
    )?;
    let kind = t.schema().key_kind(key).expect("key present");
    union_unchecked(
        &ones,
        &AssociativeTable::empty_table([(key, kind)]),
        &OpMap::single(registry.get("max")?),
    )
}

fn invert_values(t: &AssociativeTable) -> Result<AssociativeTable> {
    mapnz(t, &MapFunction::on_attr(t, "val", |v| {
        let x = v.as_f64().ok_or_else(|| LaraError::eval("expected a numeric value"))?;
        Ok(real(1.0 / x))
    }))
}

/// PageRank on the nodes common to two edge tables. Restart probability is
/// `1 - c`; the starting vector is seeded for reproducibility.
pub fn joint_pagerank(
    s1: &AssociativeTable,
    s2: &AssociativeTable,
    c: f64,
    iters: usize,
    seed: u64,
) -> Result<AssociativeTable> {
    if !(0.0 < c && c < 1.0) {
        return Err(LaraError::eval("damping factor c must lie in (0, 1)"));
    }
    require_edge_schema(s1, "first edge table")?;
    require_edge_schema(s2, "second edge table")?;
    let registry = OpRegistry::with_builtins();
    let mul = OpMap::single(registry.get("mul")?);
    let add = OpMap::single(registry.get("add")?);

    // Sources common to both networks.
    let common = strict_join(
        &key_indicator(s1, "src", &registry)?,
        &key_indicator(s2, "src", &registry)?,
        &mul,
    )?;

    // Keep only edges out of common sources; average edges both networks
    // have. The two-operand merge is exact, unlike folding a binary average.
    let avg = Arc::new(BinaryOpSpec::new("avg2", OpRole::Plus, |a, b| {
        match (a.as_f64(), b.as_f64()) {
            (Some(x), Some(y)) => Ok(real((x + y) / 2.0)),
            _ => Err(LaraError::eval("avg needs numeric values")),
        }
    }));
    let a1 = strict_join(s1, &common, &mul)?;
    let a2 = strict_join(s2, &common, &mul)?;
    let mut a = union_unchecked(&a1, &a2, &OpMap::single(avg))?;

    // Normalize each row of `a` by its out-degree.
    let d_out = union(
        &a,
        &AssociativeTable::empty_table([("src", a.schema().key_kind("src").unwrap())]),
        &add,
    )?;
    a = strict_join(&a, &invert_values(&d_out)?, &mul)?;

    // Random start vector over the destinations, normalized to sum 1.
    let dst_ind = key_indicator(&a, "dst", &registry)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = AssociativeTable::new(dst_ind.schema().clone());
    for (k, _) in dst_ind.support_rows() {
        r.insert_row(k.clone(), vec![real(rng.gen_range(0.0..1.0))])?;
    }
    let total = union(&r, &AssociativeTable::empty_table([]), &add)?;
    r = strict_join(&r, &invert_values(&total)?, &mul)?;

    // Restart vector: (1 - c) / |supp(r)| on r's support.
    let count = r.support_len() as f64;
    let restart = (1.0 - c) / count;
    let mut rv = AssociativeTable::new(r.schema().clone());
    for (k, _) in r.support_rows() {
        rv.insert_row(k.clone(), vec![real(restart)])?;
    }

    // Kernel: r := (A join c*r-over-src) union_+ restart.
    let rename: BTreeMap<String, String> = BTreeMap::from([("dst".into(), "src".into())]);
    for _ in 0..iters {
        let scaled = mapnz(&r, &MapFunction::on_attr(&r, "val", move |v| {
            Ok(real(v.as_f64().unwrap_or(0.0) * c))
        }))?;
        let by_src = rename_attrs(&scaled, &rename)?;
        let flowed = strict_join(&a, &by_src, &mul)?;
        r = union(&flowed, &rv, &add)?;
    }
    Ok(r)
}

/// Matrix multiply over (row, col) tables via rename-join-aggregate.
pub fn matmul(
    a: &AssociativeTable,
    b: &AssociativeTable,
    registry: &OpRegistry,
) -> Result<AssociativeTable> {
    let (rk, ck) = row_col_names(a)?;
    let renaming: BTreeMap<String, String> = BTreeMap::from([
        (rk.clone(), ck.clone()),
        (ck.clone(), format!("{ck}'")),
    ]);
    let rhs = rename_attrs(b, &renaming)?;
    let prod = spgemm(
        a,
        &rhs,
        &OpMap::single(registry.get("add")?),
        &OpMap::single(registry.get("mul")?),
    )?;
    rename_attrs(&prod, &BTreeMap::from([(format!("{ck}'"), ck)]))
}

fn row_col_names(a: &AssociativeTable) -> Result<(String, String)> {
    let keys = a.schema().key_attrs();
    if keys.len() != 2 {
        return Err(LaraError::schema("matrix tables need exactly two keys"));
    }
    Ok((keys[0].name.clone(), keys[1].name.clone()))
}

/// Result of Markov-chain clustering: the converged matrix and the chaos
/// value observed after each outer iteration.
pub struct MclOutcome {
    pub matrix: AssociativeTable,
    pub chaos: Vec<f64>,
}

/// Markov-chain clustering: repeatedly square the matrix (expansion), square
/// entries and column-normalize (inflation), prune small entries, and stop
/// once the per-column chaos measure (column max minus sum of squared
/// entries) settles.
pub fn mcl(mat: &AssociativeTable, prunelimit: f64, epsilon: f64) -> Result<MclOutcome> {
    if epsilon <= 0.0 {
        return Err(LaraError::eval("epsilon must be positive"));
    }
    if prunelimit < 0.0 {
        return Err(LaraError::eval("prunelimit must be nonnegative"));
    }
    let (_, col) = row_col_names(mat)?;
    let sv = mat.schema().value_attrs();
    if sv.len() != 1 {
        return Err(LaraError::schema("matrix tables need a single value"));
    }
    let vname = sv[0].name.clone();
    let registry = OpRegistry::with_builtins();
    let add = OpMap::single(registry.get("add")?);
    let max = OpMap::single(registry.get("max")?);
    // Guarded division: a/0 reads as 0, keeping empty columns empty.
    let div0 = Arc::new(
        BinaryOpSpec::new("div0", OpRole::Times, |a, b| {
            match (a.as_f64(), b.as_f64()) {
                (Some(x), Some(y)) => Ok(real(if y == 0.0 { 0.0 } else { x / y })),
                _ => Err(LaraError::eval("div0 needs numeric values")),
            }
        })
        .with_annihilators(vec![real(0.0)]),
    );

    let col_kind = mat.schema().key_kind(&col).unwrap();
    let mut mat = mat.clone();
    let mut newchaos = 1000.0f64;
    let mut history = Vec::new();
    loop {
        let oldchaos = newchaos;
        let axa = matmul(&mat, &mat, &registry)?;
        let square = mapnz(&axa, &MapFunction::on_attr(&axa, &vname, |v| {
            let x = v.as_f64().unwrap_or(0.0);
            Ok(real(x * x))
        }))?;
        let colsums = union(
            &square,
            &AssociativeTable::empty_table([(col.as_str(), col_kind)]),
            &add,
        )?;
        let temp = strict_join(&square, &colsums, &OpMap::single(div0.clone()))?;
        let pruned = mapnz(&temp, &MapFunction::on_attr(&temp, &vname, move |v| {
            let x = v.as_f64().unwrap_or(0.0);
            Ok(real(if x > prunelimit { x } else { 0.0 }))
        }))?;

        // Chaos: max over columns of (column max - column sum of squares).
        let sq = mapnz(&pruned, &MapFunction::on_attr(&pruned, &vname, |v| {
            let x = v.as_f64().unwrap_or(0.0);
            Ok(real(x * x))
        }))?;
        let colsqs = union(
            &sq,
            &AssociativeTable::empty_table([(col.as_str(), col_kind)]),
            &add,
        )?;
        let colmaxs = union_unchecked(
            &pruned,
            &AssociativeTable::empty_table([(col.as_str(), col_kind)]),
            &max,
        )?;
        let spread = Arc::new(BinaryOpSpec::new("spread", OpRole::Times, |a, b| {
            match (a.as_f64(), b.as_f64()) {
                (Some(x), Some(y)) => Ok(real(x - y)),
                _ => Err(LaraError::eval("spread needs numeric values")),
            }
        }));
        let per_col = strict_join(&colmaxs, &colsqs, &OpMap::single(spread))?;
        let chaos_table = union_unchecked(
            &per_col,
            &AssociativeTable::empty_table([]),
            &max,
        )?;
        newchaos = chaos_table
            .lookup_row(&[])
            .first()
            .and_then(Scalar::as_f64)
            .unwrap_or(0.0);
        history.push(newchaos);
        mat = pruned;
        if oldchaos - newchaos <= epsilon {
            break;
        }
    }
    Ok(MclOutcome {
        matrix: mat,
        chaos: history,
    })
}

/// Identity matrix over integer keys 1..=n.
pub fn ident(n: i64, row: &str, col: &str, val: &str) -> Result<AssociativeTable> {
    let schema = TableSchema::build(
        vec![(row, Kind::Int), (col, Kind::Int)],
        vec![(val, real(0.0))],
    )?;
    let mut t = AssociativeTable::new(schema);
    for i in 1..=n {
        t.insert_row(vec![Scalar::Int(i), Scalar::Int(i)], vec![real(1.0)])?;
    }
    Ok(t)
}

/// LU decomposition without pivoting over a square table with integer keys
/// 1..=n. Fails on a zero pivot.
pub fn lu_decompose(a: &AssociativeTable) -> Result<(AssociativeTable, AssociativeTable)> {
    let (rk, ck) = row_col_names(a)?;
    if a.schema().key_kind(&rk) != Some(Kind::Int) || a.schema().key_kind(&ck) != Some(Kind::Int) {
        return Err(LaraError::schema("LU needs integer row and column keys"));
    }
    let vname = a.schema().value_attrs()[0].name.clone();
    let n = a
        .support_rows()
        .flat_map(|(k, _)| k.iter().filter_map(Scalar::as_i64))
        .max()
        .unwrap_or(0);
    let registry = OpRegistry::with_builtins();

    let mut l = ident(n, &rk, &ck, &vname)?;
    let mut acc = a.clone();
    for j in 1..n {
        let pivot = acc
            .lookup_row(&[Scalar::Int(j), Scalar::Int(j)])
            .first()
            .and_then(Scalar::as_f64)
            .unwrap_or(0.0);
        if pivot == 0.0 {
            return Err(LaraError::eval(format!("zero pivot at ({j}, {j})")));
        }
        let mut t = ident(n, &rk, &ck, &vname)?;
        for i in (j + 1)..=n {
            let aij = acc
                .lookup_row(&[Scalar::Int(i), Scalar::Int(j)])
                .first()
                .and_then(Scalar::as_f64)
                .unwrap_or(0.0);
            let r = aij / pivot;
            if r != 0.0 {
                l.insert_row(vec![Scalar::Int(i), Scalar::Int(j)], vec![real(r)])?;
                t.insert_row(vec![Scalar::Int(i), Scalar::Int(j)], vec![real(-r)])?;
            }
        }
        acc = matmul(&t, &acc, &registry)?;
    }
    Ok((l, acc))
}
