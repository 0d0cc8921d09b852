//! Small sample tables used throughout the tests and the demo subcommands.

use crate::scalar::{Kind, Scalar};
use crate::schema::TableSchema;
use crate::table::AssociativeTable;

fn build<'a>(
    keys: Vec<(&'a str, Kind)>,
    values: Vec<(&'a str, Scalar)>,
    rows: Vec<(Vec<Scalar>, Vec<Scalar>)>,
) -> AssociativeTable {
    let schema = TableSchema::build(keys, values).unwrap();
    let mut t = AssociativeTable::new(schema);
    for (k, v) in rows {
        t.insert_row(k, v).unwrap();
    }
    t
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

/// Part table: pid -> (color [white], wgt [0]).
pub fn part_table() -> AssociativeTable {
    build(
        vec![("pid", Kind::Text)],
        vec![("color", s("white")), ("wgt", i(0))],
        vec![
            (vec![s("p01")], vec![s("blue"), i(3)]),
            (vec![s("p02")], vec![s("red"), i(4)]),
            (vec![s("p04")], vec![s("blue"), i(2)]),
        ],
    )
}

/// Supplier table: sid -> (fav [unknown], state [WA]).
pub fn supplier_table() -> AssociativeTable {
    build(
        vec![("sid", Kind::Text)],
        vec![("fav", s("unknown")), ("state", s("WA"))],
        vec![
            (vec![s("s01")], vec![s("blue"), s("WA")]),
            (vec![s("s02")], vec![s("red"), s("NJ")]),
            (vec![s("s04")], vec![s("blue"), s("NJ")]),
        ],
    )
}

/// Request table: (sid, pid) -> (qty [0], urgent [n]).
pub fn request_table() -> AssociativeTable {
    build(
        vec![("sid", Kind::Text), ("pid", Kind::Text)],
        vec![("qty", i(0)), ("urgent", s("n"))],
        vec![
            (vec![s("s01"), s("p02")], vec![i(3), s("n")]),
            (vec![s("s02"), s("p03")], vec![i(1), s("n")]),
        ],
    )
}

/// Document table: doc -> txt [''].
pub fn docs_table() -> AssociativeTable {
    build(
        vec![("doc", Kind::Text)],
        vec![("txt", s(""))],
        vec![
            (vec![s("d01")], vec![s("she sells seashells")]),
            (vec![s("d02")], vec![s("shells she sells are shells from sea")]),
            (vec![s("d04")], vec![s("so she sells seashore shells")]),
        ],
    )
}

/// Weekly parts: (cid, pid) -> color [white]. Used in the relaxed-join and
/// outer-join examples.
pub fn weekly_parts() -> AssociativeTable {
    build(
        vec![("cid", Kind::Text), ("pid", Kind::Text)],
        vec![("color", s("white"))],
        vec![
            (vec![s("M"), s("p01")], vec![s("blue")]),
            (vec![s("T"), s("p01")], vec![s("red")]),
            (vec![s("M"), s("p02")], vec![s("green")]),
            (vec![s("W"), s("p01")], vec![s("yellow")]),
        ],
    )
}

/// Weekly suppliers: (cid, sid) -> state [GA].
pub fn weekly_suppliers() -> AssociativeTable {
    build(
        vec![("cid", Kind::Text), ("sid", Kind::Text)],
        vec![("state", s("GA"))],
        vec![
            (vec![s("M"), s("s01")], vec![s("WA")]),
            (vec![s("M"), s("s02")], vec![s("NJ")]),
            (vec![s("T"), s("s02")], vec![s("DE")]),
            (vec![s("F"), s("s01")], vec![s("CA")]),
        ],
    )
}

/// Colored parts: pid -> color [white]. Used in the promotion example.
pub fn colored_parts() -> AssociativeTable {
    build(
        vec![("pid", Kind::Text)],
        vec![("color", s("white"))],
        vec![
            (vec![s("p01")], vec![s("blue")]),
            (vec![s("p02")], vec![s("red")]),
            (vec![s("p03")], vec![s("blue")]),
        ],
    )
}

/// Color opinions: color -> pretty [n].
pub fn color_opinions() -> AssociativeTable {
    build(
        vec![("color", Kind::Text)],
        vec![("pretty", s("n"))],
        vec![
            (vec![s("blue")], vec![s("y")]),
            (vec![s("green")], vec![s("y")]),
        ],
    )
}

/// Car counts: car -> v [0.0].
pub fn car_table() -> AssociativeTable {
    build(
        vec![("car", Kind::Text)],
        vec![("v", r(0.0))],
        vec![
            (vec![s("compact")], vec![r(2.0)]),
            (vec![s("SUV")], vec![r(5.0)]),
            (vec![s("electric")], vec![r(1.0)]),
        ],
    )
}

/// Fuel prices: fuel -> v [0.0].
pub fn fuel_table() -> AssociativeTable {
    build(
        vec![("fuel", Kind::Text)],
        vec![("v", r(0.0))],
        vec![
            (vec![s("reg")], vec![r(2.0)]),
            (vec![s("prem")], vec![r(3.0)]),
        ],
    )
}

/// Car-fuel totals that are not a Cartesian product: (car, fuel) -> v [0.0].
pub fn nonproduct_totals() -> AssociativeTable {
    build(
        vec![("car", Kind::Text), ("fuel", Kind::Text)],
        vec![("v", r(0.0))],
        vec![
            (vec![s("compact"), s("reg")], vec![r(4.0)]),
            (vec![s("SUV"), s("prem")], vec![r(21.0)]),
            (vec![s("electric"), s("reg")], vec![r(3.0)]),
            (vec![s("electric"), s("prem")], vec![r(7.0)]),
        ],
    )
}

/// A 3x3 dense block inside a 5x5 grid: (i, j) -> v [0].
pub fn conv_matrix() -> AssociativeTable {
    let mut rows = Vec::new();
    for ii in 1..=3i64 {
        for jj in 1..=3i64 {
            rows.push((vec![i(ii), i(jj)], vec![i((ii - 1) * 3 + jj)]));
        }
    }
    build(vec![("i", Kind::Int), ("j", Kind::Int)], vec![("v", i(0))], rows)
}

/// Time series: t -> v [0].
pub fn time_series() -> AssociativeTable {
    build(
        vec![("t", Kind::Real)],
        vec![("v", i(0))],
        vec![
            (vec![r(1.0)], vec![i(4)]),
            (vec![r(1.3)], vec![i(8)]),
            (vec![r(2.5)], vec![i(6)]),
            (vec![r(3.1)], vec![i(2)]),
            (vec![r(5.0)], vec![i(3)]),
            (vec![r(9.0)], vec![i(42)]),
        ],
    )
}

/// Meeting attendance: (r, c) -> v [0]. Used by the triple-export example.
pub fn meetings_table() -> AssociativeTable {
    build(
        vec![("r", Kind::Text), ("c", Kind::Text)],
        vec![("v", i(0))],
        vec![
            (vec![s("0730"), s("Alice")], vec![i(30)]),
            (vec![s("0730"), s("Casey")], vec![i(30)]),
            (vec![s("1145"), s("Bob")], vec![i(60)]),
            (vec![s("1145"), s("Joe")], vec![i(60)]),
            (vec![s("1400"), s("Bob")], vec![i(15)]),
            (vec![s("1400"), s("Casey")], vec![i(15)]),
        ],
    )
}

/// Build a table from schema pieces and rows; panics on malformed input.
/// Test/demo helper.
pub fn table<'a>(
    keys: Vec<(&'a str, Kind)>,
    values: Vec<(&'a str, Scalar)>,
    rows: Vec<(Vec<Scalar>, Vec<Scalar>)>,
) -> AssociativeTable {
    build(keys, values, rows)
}
