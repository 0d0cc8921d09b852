//! Worked examples with embedded inputs and expected outputs, used by the
//! `reproduce-figure` subcommand and the acceptance tests. Printed reals in
//! the expected tables carry three decimals, so comparison runs at 1e-3.

use std::sync::Arc;

use lara::derived::{convolve_shift, divide, divide_counter, outer_half, outer_join, ConvolutionKernel};
use lara::error::{LaraError, Result};
use lara::fixtures;
use lara::io::{to_triples, write_delimited};
use lara::ops::{
    ext, mapnz, promote_named, relaxed_join, rename_attrs, strict_join, supone, union,
    union_unchecked, BinaryOpSpec, ExtFunction, MapFunction, OpMap, OpRegistry, OpRole,
};
use lara::{AssociativeTable, Kind, Scalar, TableSchema, ValueAttr};

const PRINTED_TOLERANCE: f64 = 1e-3;

fn s(x: &str) -> Scalar {
    Scalar::text(x)
}
fn i(x: i64) -> Scalar {
    Scalar::Int(x)
}
fn r(x: f64) -> Scalar {
    Scalar::Real(x)
}

/// Outcome of regenerating one figure: the rendered result and whether it
/// matched the embedded expectation.
pub struct FigureCheck {
    pub id: String,
    pub ok: bool,
    pub rendered: String,
    pub diff: Option<String>,
}

pub fn ids() -> Vec<&'static str> {
    vec![
        "2", "3b", "3c", "5b", "5d", "5e", "7b", "7d", "8c", "8h", "9g", "10b", "10d", "10e",
        "11c", "11d", "11e", "12c", "12d", "13b", "13c", "13d", "13e", "13f",
    ]
}

fn render(tables: &[AssociativeTable]) -> String {
    let mut out = String::new();
    for t in tables {
        let mut buf = Vec::new();
        write_delimited(&t.canonicalize(), &mut buf, '\t').expect("render");
        out.push_str(&String::from_utf8(buf).unwrap());
        out.push('\n');
    }
    out
}

/// Support-for-support comparison with a tolerance on real values.
fn tables_close(a: &AssociativeTable, b: &AssociativeTable, tol: f64) -> bool {
    if !a.schema().equivalent(b.schema()) {
        return false;
    }
    let close = |x: &Scalar, y: &Scalar| match (x, y) {
        (Scalar::Real(p), Scalar::Real(q)) => (p - q).abs() <= tol,
        _ => x == y,
    };
    let covered = |from: &AssociativeTable, to: &AssociativeTable| -> bool {
        from.support_rows().all(|(k, _)| {
            let key = from.schema().key_row_to_record(k);
            let (Ok(x), Ok(y)) = (from.lookup(&key), to.lookup(&key)) else {
                return false;
            };
            let matched = x
                .iter()
                .all(|(name, v)| y.get(name).is_some_and(|w| close(v, w)));
            matched
        })
    };
    covered(a, b) && covered(b, a)
}

fn check_tables(
    id: &str,
    produced: Vec<AssociativeTable>,
    expected: Vec<AssociativeTable>,
) -> FigureCheck {
    let ok = produced.len() == expected.len()
        && produced
            .iter()
            .zip(&expected)
            .all(|(p, e)| tables_close(p, e, PRINTED_TOLERANCE));
    let diff = (!ok).then(|| format!("expected:\n{}", render(&expected)));
    FigureCheck {
        id: id.to_string(),
        ok,
        rendered: render(&produced),
        diff,
    }
}

fn check_text(id: &str, produced: String, expected: &str) -> FigureCheck {
    let ok = produced.trim() == expected.trim();
    FigureCheck {
        id: id.to_string(),
        ok,
        diff: (!ok).then(|| format!("expected:\n{expected}")),
        rendered: produced,
    }
}

fn registry() -> OpRegistry {
    OpRegistry::with_builtins()
}

fn mul_map() -> OpMap {
    OpMap::single(registry().get("mul").unwrap())
}

fn car_fuel_totals() -> AssociativeTable {
    strict_join(&fixtures::car_table(), &fixtures::fuel_table(), &mul_map()).unwrap()
}

/// The time-value table with each support value replaced by its own time.
fn key_into_value(t: &AssociativeTable) -> Result<AssociativeTable> {
    let out = vec![ValueAttr {
        name: "v".into(),
        kind: Kind::Real,
        default: r(0.0),
    }];
    let row_schema = TableSchema::new(Vec::new(), out.clone())?;
    let f = ExtFunction::new("key-into-value", t.schema().clone(), vec![], out, move |k, v| {
        let mut table = AssociativeTable::new(row_schema.clone());
        if v.iter().any(|(_, x)| x.as_f64() != Some(0.0)) {
            table.insert_row(vec![], vec![k.get("t").unwrap().clone()])?;
        }
        Ok(table)
    });
    ext(t, &f)
}

fn window_op(d: f64) -> Arc<BinaryOpSpec> {
    Arc::new(
        BinaryOpSpec::new("window", OpRole::Times, move |a, b| {
            let (x, y) = (a.as_f64().unwrap_or(0.0), b.as_f64().unwrap_or(0.0));
            Ok(i((x != 0.0 && x <= y && y <= x + d) as i64))
        })
        .with_annihilators(vec![r(0.0)]),
    )
}

fn moving_sum_steps() -> Result<[AssociativeTable; 5]> {
    let t = fixtures::time_series();
    let t0 = key_into_value(&t)?;
    let t0p = rename_attrs(&t0, &[("t".to_string(), "t'".to_string())].into())?;
    let rel = strict_join(&t0, &t0p, &OpMap::single(window_op(2.0)))?;
    let weighted = strict_join(&rel, &t, &mul_map())?;
    let summed = union(
        &weighted,
        &AssociativeTable::empty_table([("t'", Kind::Real)]),
        &OpMap::single(registry().get("add")?),
    )?;
    Ok([t0, t0p, rel, weighted, summed])
}

fn counter_division_steps() -> Result<[AssociativeTable; 3]> {
    let t = fixtures::nonproduct_totals();
    let p = fixtures::fuel_table();
    let reg = registry();
    let inv = mapnz(&p, &MapFunction::on_attr(&p, "v", |v| {
        let x = v.as_f64().ok_or_else(|| LaraError::eval("numeric value expected"))?;
        Ok(r(1.0 / x))
    }))?;
    let joined = strict_join(&t, &inv, &mul_map())?;
    let mut counted_values = joined.schema().value_attrs().to_vec();
    counted_values.push(ValueAttr {
        name: "i".into(),
        kind: Kind::Int,
        default: i(0),
    });
    let x = mapnz(&joined, &MapFunction::new(counted_values, |v| {
        let mut out = v.clone();
        out.set("i", Scalar::Int(1));
        Ok(out)
    }))?;
    let plus = OpMap::single(reg.get("min")?).with("i", reg.get("add")?);
    let y = union_unchecked(&x, &AssociativeTable::empty_table([("car", Kind::Text)]), &plus)?;
    let q = divide_counter(&t, &p, &mul_map(), &reg)?;
    Ok([x, y, q])
}

pub fn reproduce(id: &str) -> Result<FigureCheck> {
    let reg = registry();
    match id {
        "2" => Ok(check_tables(
            id,
            vec![
                fixtures::part_table(),
                fixtures::supplier_table(),
                fixtures::request_table(),
            ],
            vec![
                fixtures::table(
                    vec![("pid", Kind::Text)],
                    vec![("color", s("white")), ("wgt", i(0))],
                    vec![
                        (vec![s("p01")], vec![s("blue"), i(3)]),
                        (vec![s("p02")], vec![s("red"), i(4)]),
                        (vec![s("p04")], vec![s("blue"), i(2)]),
                    ],
                ),
                fixtures::table(
                    vec![("sid", Kind::Text)],
                    vec![("fav", s("unknown")), ("state", s("WA"))],
                    vec![
                        (vec![s("s01")], vec![s("blue"), s("WA")]),
                        (vec![s("s02")], vec![s("red"), s("NJ")]),
                        (vec![s("s04")], vec![s("blue"), s("NJ")]),
                    ],
                ),
                fixtures::table(
                    vec![("sid", Kind::Text), ("pid", Kind::Text)],
                    vec![("qty", i(0)), ("urgent", s("n"))],
                    vec![
                        (vec![s("s01"), s("p02")], vec![i(3), s("n")]),
                        (vec![s("s02"), s("p03")], vec![i(1), s("n")]),
                    ],
                ),
            ],
        )),
        "3b" => {
            let t = to_triples(&fixtures::meetings_table());
            let mut text = String::new();
            for (name, lookup) in t.key_lookups.iter().chain(&t.value_lookups) {
                text.push_str(name);
                for (idx, v) in lookup.iter().enumerate() {
                    text.push_str(&format!(" {v}={}", idx + 1));
                }
                text.push('\n');
            }
            for (k, v) in &t.triples {
                let k: Vec<String> = k.iter().map(usize::to_string).collect();
                let v: Vec<String> = v.iter().map(usize::to_string).collect();
                text.push_str(&format!("{} {}\n", k.join(" "), v.join(" ")));
            }
            Ok(check_text(
                id,
                text,
                "r 0730=1 1145=2 1400=3\n\
                 c Alice=1 Bob=2 Casey=3 Joe=4\n\
                 v 15=1 30=2 60=3\n\
                 1 1 2\n1 3 2\n2 2 3\n2 4 3\n3 2 1\n3 3 1",
            ))
        }
        "3c" => {
            let m = fixtures::meetings_table();
            let mut people = std::collections::BTreeSet::new();
            let mut times = std::collections::BTreeSet::new();
            for (k, _) in m.support_rows() {
                times.insert(k[0].clone());
                people.insert(k[1].clone());
            }
            let mut text = String::from("id");
            for p in &people {
                text.push_str(&format!(" {p}"));
            }
            text.push('\n');
            for t in &times {
                text.push_str(&t.to_string());
                for p in &people {
                    let v = m.lookup_row(&[t.clone(), p.clone()]);
                    if v[0] == i(0) {
                        text.push_str(" null");
                    } else {
                        text.push_str(&format!(" {}", v[0]));
                    }
                }
                text.push('\n');
            }
            Ok(check_text(
                id,
                text,
                "id Alice Bob Casey Joe\n\
                 0730 30 null 30 null\n\
                 1145 null 60 null 60\n\
                 1400 null 15 15 null",
            ))
        }
        "5b" => Ok(check_tables(
            id,
            vec![supone(&fixtures::weekly_parts(), &["state"])?],
            vec![fixtures::table(
                vec![("cid", Kind::Text), ("pid", Kind::Text)],
                vec![("color", s("white")), ("state", i(0))],
                vec![
                    (vec![s("M"), s("p01")], vec![s("blue"), i(1)]),
                    (vec![s("T"), s("p01")], vec![s("red"), i(1)]),
                    (vec![s("M"), s("p02")], vec![s("green"), i(1)]),
                    (vec![s("W"), s("p01")], vec![s("yellow"), i(1)]),
                ],
            )],
        )),
        "5d" => Ok(check_tables(
            id,
            vec![supone(&fixtures::weekly_suppliers(), &["color"])?],
            vec![fixtures::table(
                vec![("cid", Kind::Text), ("sid", Kind::Text)],
                vec![("state", s("GA")), ("color", i(0))],
                vec![
                    (vec![s("M"), s("s01")], vec![s("WA"), i(1)]),
                    (vec![s("M"), s("s02")], vec![s("NJ"), i(1)]),
                    (vec![s("T"), s("s02")], vec![s("DE"), i(1)]),
                    (vec![s("F"), s("s01")], vec![s("CA"), i(1)]),
                ],
            )],
        )),
        "5e" => Ok(check_tables(
            id,
            vec![relaxed_join(
                &fixtures::weekly_parts(),
                &fixtures::weekly_suppliers(),
                &OpMap::empty(),
            )?],
            vec![fixtures::table(
                vec![("cid", Kind::Text), ("pid", Kind::Text), ("sid", Kind::Text)],
                vec![("color", s("white")), ("state", s("GA"))],
                vec![
                    (vec![s("M"), s("p01"), s("s01")], vec![s("blue"), s("WA")]),
                    (vec![s("M"), s("p01"), s("s02")], vec![s("blue"), s("NJ")]),
                    (vec![s("M"), s("p02"), s("s01")], vec![s("green"), s("WA")]),
                    (vec![s("M"), s("p02"), s("s02")], vec![s("green"), s("NJ")]),
                    (vec![s("T"), s("p01"), s("s02")], vec![s("red"), s("DE")]),
                ],
            )],
        )),
        "7b" => Ok(check_tables(
            id,
            vec![promote_named(&fixtures::colored_parts(), "color", "ind")?],
            vec![fixtures::table(
                vec![("pid", Kind::Text), ("color", Kind::Text)],
                vec![("ind", i(0))],
                vec![
                    (vec![s("p01"), s("blue")], vec![i(1)]),
                    (vec![s("p02"), s("red")], vec![i(1)]),
                    (vec![s("p03"), s("blue")], vec![i(1)]),
                ],
            )],
        )),
        "7d" => Ok(check_tables(
            id,
            vec![relaxed_join(
                &fixtures::colored_parts(),
                &fixtures::color_opinions(),
                &OpMap::empty(),
            )?],
            vec![fixtures::table(
                vec![("pid", Kind::Text), ("color", Kind::Text)],
                vec![("pretty", s("n"))],
                vec![
                    (vec![s("p01"), s("blue")], vec![s("y")]),
                    (vec![s("p03"), s("blue")], vec![s("y")]),
                ],
            )],
        )),
        "8c" => Ok(check_tables(
            id,
            vec![car_fuel_totals()],
            vec![fixtures::table(
                vec![("car", Kind::Text), ("fuel", Kind::Text)],
                vec![("v", r(0.0))],
                vec![
                    (vec![s("compact"), s("reg")], vec![r(4.0)]),
                    (vec![s("compact"), s("prem")], vec![r(6.0)]),
                    (vec![s("SUV"), s("reg")], vec![r(10.0)]),
                    (vec![s("SUV"), s("prem")], vec![r(15.0)]),
                    (vec![s("electric"), s("reg")], vec![r(2.0)]),
                    (vec![s("electric"), s("prem")], vec![r(3.0)]),
                ],
            )],
        )),
        "8h" => Ok(check_tables(
            id,
            vec![divide(&car_fuel_totals(), &fixtures::fuel_table(), &mul_map(), &reg)?],
            vec![fixtures::car_table()],
        )),
        "9g" => Ok(check_tables(
            id,
            vec![divide(
                &fixtures::nonproduct_totals(),
                &fixtures::fuel_table(),
                &mul_map(),
                &reg,
            )?],
            vec![fixtures::table(
                vec![("car", Kind::Text)],
                vec![("v", r(0.0))],
                vec![(vec![s("electric")], vec![r(1.5)])],
            )],
        )),
        "10b" => Ok(check_tables(
            id,
            vec![outer_half(
                &fixtures::weekly_parts(),
                &fixtures::weekly_suppliers(),
                &reg.get("max")?,
            )?],
            vec![fixtures::table(
                vec![("cid", Kind::Text), ("pid", Kind::Text), ("sid", Kind::Text)],
                vec![("color", s("white"))],
                vec![
                    (vec![s("M"), s("p01"), s("s01")], vec![s("blue")]),
                    (vec![s("M"), s("p01"), s("s02")], vec![s("blue")]),
                    (vec![s("M"), s("p02"), s("s01")], vec![s("green")]),
                    (vec![s("M"), s("p02"), s("s02")], vec![s("green")]),
                    (vec![s("T"), s("p01"), s("s01")], vec![s("red")]),
                    (vec![s("T"), s("p01"), s("s02")], vec![s("red")]),
                    (vec![s("W"), s("p01"), s("s01")], vec![s("yellow")]),
                    (vec![s("W"), s("p01"), s("s02")], vec![s("yellow")]),
                ],
            )],
        )),
        "10d" => Ok(check_tables(
            id,
            vec![outer_half(
                &fixtures::weekly_suppliers(),
                &fixtures::weekly_parts(),
                &reg.get("max")?,
            )?],
            vec![fixtures::table(
                vec![("cid", Kind::Text), ("sid", Kind::Text), ("pid", Kind::Text)],
                vec![("state", s("GA"))],
                vec![
                    (vec![s("M"), s("s01"), s("p01")], vec![s("WA")]),
                    (vec![s("M"), s("s02"), s("p01")], vec![s("NJ")]),
                    (vec![s("M"), s("s01"), s("p02")], vec![s("WA")]),
                    (vec![s("M"), s("s02"), s("p02")], vec![s("NJ")]),
                    (vec![s("T"), s("s02"), s("p01")], vec![s("DE")]),
                    (vec![s("T"), s("s02"), s("p02")], vec![s("DE")]),
                    (vec![s("F"), s("s01"), s("p01")], vec![s("CA")]),
                    (vec![s("F"), s("s01"), s("p02")], vec![s("CA")]),
                ],
            )],
        )),
        "10e" => Ok(check_tables(
            id,
            vec![outer_join(
                &fixtures::weekly_parts(),
                &fixtures::weekly_suppliers(),
                &reg,
            )?],
            vec![fixtures::table(
                vec![("cid", Kind::Text), ("pid", Kind::Text), ("sid", Kind::Text)],
                vec![("color", s("white")), ("state", s("GA"))],
                vec![
                    (vec![s("M"), s("p01"), s("s01")], vec![s("blue"), s("WA")]),
                    (vec![s("M"), s("p01"), s("s02")], vec![s("blue"), s("NJ")]),
                    (vec![s("M"), s("p02"), s("s01")], vec![s("green"), s("WA")]),
                    (vec![s("M"), s("p02"), s("s02")], vec![s("green"), s("NJ")]),
                    (vec![s("T"), s("p01"), s("s02")], vec![s("red"), s("DE")]),
                    (vec![s("T"), s("p01"), s("s01")], vec![s("red"), s("GA")]),
                    (vec![s("T"), s("p02"), s("s02")], vec![s("white"), s("DE")]),
                    (vec![s("W"), s("p01"), s("s01")], vec![s("yellow"), s("GA")]),
                    (vec![s("W"), s("p01"), s("s02")], vec![s("yellow"), s("GA")]),
                    (vec![s("F"), s("p01"), s("s01")], vec![s("white"), s("CA")]),
                    (vec![s("F"), s("p02"), s("s01")], vec![s("white"), s("CA")]),
                ],
            )],
        )),
        "11c" | "11d" | "11e" => {
            let [x, y, q] = counter_division_steps()?;
            let (produced, expected) = match id {
                "11c" => (
                    x,
                    fixtures::table(
                        vec![("car", Kind::Text), ("fuel", Kind::Text)],
                        vec![("v", r(0.0)), ("i", i(0))],
                        vec![
                            (vec![s("compact"), s("reg")], vec![r(2.0), i(1)]),
                            (vec![s("SUV"), s("prem")], vec![r(7.0), i(1)]),
                            (vec![s("electric"), s("reg")], vec![r(1.5), i(1)]),
                            (vec![s("electric"), s("prem")], vec![r(2.333), i(1)]),
                        ],
                    ),
                ),
                "11d" => (
                    y,
                    fixtures::table(
                        vec![("car", Kind::Text)],
                        vec![("v", r(0.0)), ("i", i(0))],
                        vec![
                            (vec![s("compact")], vec![r(2.0), i(1)]),
                            (vec![s("SUV")], vec![r(7.0), i(1)]),
                            (vec![s("electric")], vec![r(1.5), i(2)]),
                        ],
                    ),
                ),
                _ => (
                    q,
                    fixtures::table(
                        vec![("car", Kind::Text)],
                        vec![("v", r(0.0))],
                        vec![(vec![s("electric")], vec![r(1.5)])],
                    ),
                ),
            };
            Ok(check_tables(id, vec![produced], vec![expected]))
        }
        "12c" => {
            let kernel = ConvolutionKernel {
                offsets: vec![vec![1, -1], vec![0, -1], vec![-1, -1]],
                combine: reg.get("add")?,
            };
            let rows: Vec<(i64, i64, i64)> = vec![
                (0, 0, 1), (0, 1, 2), (0, 2, 3),
                (1, 0, 5), (1, 1, 7), (1, 2, 9),
                (2, 0, 12), (2, 1, 15), (2, 2, 18),
                (3, 0, 11), (3, 1, 13), (3, 2, 15),
                (4, 0, 7), (4, 1, 8), (4, 2, 9),
            ];
            Ok(check_tables(
                id,
                vec![convolve_shift(&fixtures::conv_matrix(), &kernel)?],
                vec![fixtures::table(
                    vec![("i", Kind::Int), ("j", Kind::Int)],
                    vec![("v", i(0))],
                    rows.into_iter()
                        .map(|(a, b, v)| (vec![i(a), i(b)], vec![i(v)]))
                        .collect(),
                )],
            ))
        }
        "12d" => {
            let shifted = |di: i64, dj: i64| -> Result<AssociativeTable> {
                convolve_shift(
                    &fixtures::conv_matrix(),
                    &ConvolutionKernel {
                        offsets: vec![vec![di, dj]],
                        combine: reg.get("add")?,
                    },
                )
            };
            let partial = |di: i64| {
                fixtures::table(
                    vec![("i", Kind::Int), ("j", Kind::Int)],
                    vec![("v", i(0))],
                    (1..=3i64)
                        .flat_map(|ii| (1..=3i64).map(move |jj| (ii, jj)))
                        .map(|(ii, jj)| {
                            (vec![i(ii + di), i(jj - 1)], vec![i((ii - 1) * 3 + jj)])
                        })
                        .collect(),
                )
            };
            Ok(check_tables(
                id,
                vec![shifted(1, -1)?, shifted(0, -1)?, shifted(-1, -1)?],
                vec![partial(1), partial(0), partial(-1)],
            ))
        }
        "13b" | "13c" | "13d" | "13e" | "13f" => {
            let [t0, t0p, rel, weighted, summed] = moving_sum_steps()?;
            let times = [1.0, 1.3, 2.5, 3.1, 5.0, 9.0];
            let pairs: Vec<(f64, f64)> = vec![
                (1.0, 1.0), (1.0, 1.3), (1.0, 2.5),
                (1.3, 1.3), (1.3, 2.5), (1.3, 3.1),
                (2.5, 2.5), (2.5, 3.1),
                (3.1, 3.1), (3.1, 5.0),
                (5.0, 5.0),
                (9.0, 9.0),
            ];
            let vals = |t: f64| -> i64 {
                match t {
                    x if x == 1.0 => 4,
                    x if x == 1.3 => 8,
                    x if x == 2.5 => 6,
                    x if x == 3.1 => 2,
                    x if x == 5.0 => 3,
                    _ => 42,
                }
            };
            let (produced, expected) = match id {
                "13b" => (
                    t0,
                    fixtures::table(
                        vec![("t", Kind::Real)],
                        vec![("v", r(0.0))],
                        times.iter().map(|t| (vec![r(*t)], vec![r(*t)])).collect(),
                    ),
                ),
                "13c" => (
                    t0p,
                    fixtures::table(
                        vec![("t'", Kind::Real)],
                        vec![("v", r(0.0))],
                        times.iter().map(|t| (vec![r(*t)], vec![r(*t)])).collect(),
                    ),
                ),
                "13d" => (
                    rel,
                    fixtures::table(
                        vec![("t", Kind::Real), ("t'", Kind::Real)],
                        vec![("v", i(0))],
                        pairs.iter().map(|(a, b)| (vec![r(*a), r(*b)], vec![i(1)])).collect(),
                    ),
                ),
                "13e" => (
                    weighted,
                    fixtures::table(
                        vec![("t", Kind::Real), ("t'", Kind::Real)],
                        vec![("v", i(0))],
                        pairs
                            .iter()
                            .map(|(a, b)| (vec![r(*a), r(*b)], vec![i(vals(*a))]))
                            .collect(),
                    ),
                ),
                _ => (
                    summed,
                    fixtures::table(
                        vec![("t'", Kind::Real)],
                        vec![("v", i(0))],
                        vec![
                            (vec![r(1.0)], vec![i(4)]),
                            (vec![r(1.3)], vec![i(12)]),
                            (vec![r(2.5)], vec![i(18)]),
                            (vec![r(3.1)], vec![i(16)]),
                            (vec![r(5.0)], vec![i(5)]),
                            (vec![r(9.0)], vec![i(42)]),
                        ],
                    ),
                ),
            };
            Ok(check_tables(id, vec![produced], vec![expected]))
        }
        other => Err(LaraError::eval(format!("unknown figure id `{other}`"))),
    }
}
