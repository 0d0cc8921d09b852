use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand};
use lara::io::{read_delimited, write_delimited, write_delimited_file, SchemaSidecar};
use lara::ops::OpMap;
use lara::rewrite::{eval, EvalContext};
use lara::{AssociativeTable, Kind, Scalar, TableSchema};
use lara_cli::plan::PlanDocument;
use lara_cli::{algorithms, figures};

#[derive(Parser)]
#[command(name = "lara", version, about = "Associative-table algebra toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest a delimited file with a schema sidecar and reprint it in
    /// canonical form (sorted support, defaults dropped).
    Load {
        file: PathBuf,
        /// TOML sidecar describing keys, values, kinds, and defaults.
        #[arg(long)]
        schema: PathBuf,
        #[arg(long, default_value_t = ',')]
        delimiter: char,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a plan document (RON) against its named input tables.
    Eval {
        plan: PathBuf,
        #[arg(long, default_value_t = ',')]
        delimiter: char,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// PageRank restricted to sources common to two edge lists.
    Pagerank {
        edges1: PathBuf,
        edges2: PathBuf,
        /// Sidecar for both edge tables; defaults to (src,dst; val real 0).
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long, default_value_t = ',')]
        delimiter: char,
        /// Damping complement: restart probability is 1 - c.
        #[arg(long, default_value_t = 0.85)]
        c: f64,
        #[arg(long, default_value_t = 20)]
        iters: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Markov-chain clustering of a (row, col; value) matrix table.
    Mcl {
        file: PathBuf,
        /// Sidecar for the matrix; defaults to (row,col; value real 0).
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long, default_value_t = ',')]
        delimiter: char,
        #[arg(long, default_value_t = 0.0)]
        prunelimit: f64,
        #[arg(long, default_value_t = 1e-4)]
        epsilon: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// LU factorization (no pivoting) of an integer-indexed square matrix.
    Lu {
        file: PathBuf,
        /// Sidecar for the matrix; defaults to (r,c int; v real 0).
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long, default_value_t = ',')]
        delimiter: char,
        /// Prefix for output files <out>.L and <out>.U; stdout otherwise.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rebuild one of the worked examples and diff it against its embedded
    /// expected output. `--list` shows the known ids.
    ReproduceFigure {
        id: Option<String>,
        #[arg(long)]
        list: bool,
    },
}

enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Failure {
        Failure::Runtime(e.into())
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(anyhow!(msg.into()))
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("usage error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load_table(file: &Path, sidecar: &SchemaSidecar, delimiter: char) -> Result<AssociativeTable> {
    let f = fs::File::open(file).with_context(|| format!("opening {}", file.display()))?;
    let t = read_delimited(std::io::BufReader::new(f), delimiter, sidecar, &OpMap::empty())
        .with_context(|| format!("reading {}", file.display()))?;
    Ok(t)
}

fn sidecar_from(path: Option<&Path>, fallback: TableSchema) -> Result<SchemaSidecar> {
    match path {
        Some(p) => {
            let text =
                fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(SchemaSidecar::parse(&text)?)
        }
        None => Ok(SchemaSidecar::from_schema(&fallback)),
    }
}

fn emit(table: &AssociativeTable, out: Option<&Path>) -> Result<()> {
    let canonical = table.canonicalize();
    match out {
        Some(p) => write_delimited_file(&canonical, p, ',')?,
        None => {
            let mut stdout = std::io::stdout().lock();
            write_delimited(&canonical, &mut stdout, ',')?;
        }
    }
    Ok(())
}

fn matrix_schema(row: &str, col: &str, kind: Kind, val: &str) -> TableSchema {
    TableSchema::build(vec![(row, kind), (col, kind)], vec![(val, Scalar::Real(0.0))])
        .expect("matrix schema")
}

fn run(cmd: Command) -> std::result::Result<(), Failure> {
    match cmd {
        Command::Load {
            file,
            schema,
            delimiter,
            out,
        } => {
            let sidecar = sidecar_from(Some(&schema), edge_schema())?;
            let table = load_table(&file, &sidecar, delimiter)?;
            emit(&table, out.as_deref())?;
            Ok(())
        }
        Command::Eval {
            plan,
            delimiter: _,
            out,
        } => {
            let text =
                fs::read_to_string(&plan).with_context(|| format!("reading {}", plan.display()))?;
            if text.trim().is_empty() {
                return Err(usage(format!("plan file {} is empty", plan.display())));
            }
            let doc = PlanDocument::parse(&text)?;
            let base = plan.parent().unwrap_or(Path::new("."));
            let mut ctx = EvalContext::new();
            for (name, src) in &doc.tables {
                let sidecar = sidecar_from(Some(&base.join(&src.schema)), edge_schema())?;
                let table = load_table(&base.join(&src.path), &sidecar, src.delimiter)?;
                ctx.bind(name.clone(), table);
            }
            let result = eval(&doc.plan, &ctx)?;
            emit(&result, out.as_deref())?;
            Ok(())
        }
        Command::Pagerank {
            edges1,
            edges2,
            schema,
            delimiter,
            c,
            iters,
            seed,
            out,
        } => {
            if !(0.0 < c && c < 1.0) {
                return Err(usage("--c must lie strictly between 0 and 1"));
            }
            let sidecar = sidecar_from(schema.as_deref(), edge_schema())?;
            let s1 = load_table(&edges1, &sidecar, delimiter)?;
            let s2 = load_table(&edges2, &sidecar, delimiter)?;
            let r = algorithms::joint_pagerank(&s1, &s2, c, iters, seed)?;
            emit(&r, out.as_deref())?;
            Ok(())
        }
        Command::Mcl {
            file,
            schema,
            delimiter,
            prunelimit,
            epsilon,
            out,
        } => {
            if epsilon <= 0.0 {
                return Err(usage("--epsilon must be positive"));
            }
            let sidecar =
                sidecar_from(schema.as_deref(), matrix_schema("row", "col", Kind::Text, "value"));
            let mat = load_table(&file, &sidecar?, delimiter)?;
            let outcome = algorithms::mcl(&mat, prunelimit, epsilon)?;
            let chaos: Vec<String> = outcome.chaos.iter().map(f64::to_string).collect();
            eprintln!("chaos: {}", chaos.join(" "));
            emit(&outcome.matrix, out.as_deref())?;
            Ok(())
        }
        Command::Lu {
            file,
            schema,
            delimiter,
            out,
        } => {
            let sidecar = sidecar_from(schema.as_deref(), matrix_schema("r", "c", Kind::Int, "v"))?;
            let a = load_table(&file, &sidecar, delimiter)?;
            let (l, u) = algorithms::lu_decompose(&a)?;
            match out {
                Some(prefix) => {
                    let p = prefix.display();
                    write_delimited_file(&l.canonicalize(), &PathBuf::from(format!("{p}.L")), ',')?;
                    write_delimited_file(&u.canonicalize(), &PathBuf::from(format!("{p}.U")), ',')?;
                }
                None => {
                    let mut stdout = std::io::stdout().lock();
                    writeln!(stdout, "L")?;
                    write_delimited(&l.canonicalize(), &mut stdout, ',')?;
                    writeln!(stdout, "U")?;
                    write_delimited(&u.canonicalize(), &mut stdout, ',')?;
                }
            }
            Ok(())
        }
        Command::ReproduceFigure { id, list } => {
            if list {
                println!("{}", figures::ids().join(" "));
                return Ok(());
            }
            let id = id.ok_or_else(|| usage("expected a figure id (or --list)"))?;
            if !figures::ids().contains(&id.as_str()) {
                return Err(usage(format!(
                    "unknown figure id `{id}`; known ids: {}",
                    figures::ids().join(" ")
                )));
            }
            let check = figures::reproduce(&id)?;
            print!("{}", check.rendered);
            if check.ok {
                Ok(())
            } else {
                Err(Failure::Runtime(anyhow!(
                    "figure {id} does not match its expected output\n{}",
                    check.diff.unwrap_or_default()
                )))
            }
        }
    }
}

fn edge_schema() -> TableSchema {
    TableSchema::build(
        vec![("src", Kind::Text), ("dst", Kind::Text)],
        vec![("val", Scalar::Real(0.0))],
    )
    .expect("edge schema")
}
