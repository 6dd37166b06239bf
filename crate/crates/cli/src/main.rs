use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use ambiglab::cones::classify_pair;
use ambiglab::generators::{gen_coded_instance, gen_mixed_instance, gen_sparse_instance};
use ambiglab::quotient::decompose;
use ambiglab::verification::{estimate_unidentifiable_dim, verify_instance, Family};
use ambiglab::{AdversarialInstance, Error, IndexSet};
use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

mod demo;
mod sweep;

/// Exit codes shared by all subcommands.
mod exit {
    pub const FAIL: u8 = 1;
    pub const INCONCLUSIVE: u8 = 2;
    pub const MALFORMED: u8 = 3;
    pub const ERROR: u8 = 4;
}

#[derive(Parser)]
#[command(name = "ambiglab", version, about = "Unidentifiability witnesses for blind linear deconvolution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenFamily {
    Sparse,
    Coded,
    Mixed,
}

#[derive(Clone, Copy, ValueEnum)]
enum DimFamily {
    Sparse,
    Coded,
}

#[derive(clap::Args)]
struct Shape {
    #[arg(long)]
    m: usize,
    #[arg(long)]
    n: Option<usize>,
    /// Index set of the x side, e.g. "3,4,7".
    #[arg(long, default_value = "")]
    lambda1: String,
    /// Index set of the y side.
    #[arg(long, default_value = "")]
    lambda2: String,
    /// Code vector on lambda1.
    #[arg(long, default_value = "", allow_hyphen_values = true)]
    b: String,
    /// Code vector on lambda2.
    #[arg(long, default_value = "", allow_hyphen_values = true)]
    bprime: String,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a certified instance as JSON.
    Gen {
        #[arg(long, value_enum, default_value = "coded")]
        family: GenFamily,
        #[command(flatten)]
        shape: Shape,
        /// Given y for the mixed family.
        #[arg(long, allow_hyphen_values = true)]
        y: Option<String>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verify an instance; exit 0 on pass, 1 on failure, 3 on malformed input.
    Verify {
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Quotient decomposition of a vector given as a JSON array or comma list.
    Quotient {
        #[arg(long = "in")]
        input: Option<PathBuf>,
        /// Inline vector, e.g. "1,-1".
        #[arg(long, allow_hyphen_values = true)]
        w: Option<String>,
        #[arg(long, default_value_t = ambiglab::DEFAULT_TOL)]
        tol: f64,
    },
    /// Classify an index set and code vector.
    Classify {
        #[arg(long)]
        lambda1: String,
        #[arg(long, allow_hyphen_values = true)]
        b: String,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = ambiglab::DEFAULT_TOL)]
        tol: f64,
    },
    /// Jacobian-rank probe; exit 0 on agreement, 1 on disagreement, 2 if inconclusive.
    Dim {
        #[arg(long, value_enum, default_value = "coded")]
        family: DimFamily,
        #[command(flatten)]
        shape: Shape,
        #[arg(long, default_value_t = 9)]
        trials: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Reproduce the worked example and write plot data.
    Demo {
        /// Directory for CSV output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Campaign over a grid of sizes, written as CSV.
    Sweep {
        #[arg(long, default_value = "5..9")]
        m: String,
        #[arg(long, default_value = "5..9")]
        n: String,
        #[arg(long, value_enum, default_value = "theorem2")]
        grid: sweep::Grid,
        #[arg(long, default_value_t = 4)]
        trials: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> anyhow::Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    let s = s.trim().trim_start_matches('[').trim_end_matches(']');
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|t| t.trim().parse::<T>().map_err(|e| anyhow!("bad {what} entry {t:?}: {e}")))
        .collect()
}

fn index_set(s: &str, what: &str) -> anyhow::Result<IndexSet> {
    Ok(IndexSet::new(parse_list::<usize>(s, what)?)?)
}

fn read_input(path: Option<&Path>) -> anyhow::Result<String> {
    match path {
        Some(p) => fs::read_to_string(p).with_context(|| format!("reading {}", p.display())),
        None => {
            let mut s = String::new();
            io::stdin().read_to_string(&mut s)?;
            Ok(s)
        }
    }
}

fn write_output(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> anyhow::Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

/// Input that could not be parsed; reported with its own exit code.
#[derive(Debug)]
struct Malformed(String);

impl std::fmt::Display for Malformed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "malformed input: {}", self.0)
    }
}

impl std::error::Error for Malformed {}

fn run(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Gen { family, shape, y, seed, out } => {
            let l1 = index_set(&shape.lambda1, "lambda1")?;
            let inst = match family {
                GenFamily::Sparse => {
                    let n = shape.n.ok_or_else(|| anyhow!("--n is required"))?;
                    gen_sparse_instance(&l1, &index_set(&shape.lambda2, "lambda2")?, shape.m, n, seed)?
                }
                GenFamily::Coded => {
                    let n = shape.n.ok_or_else(|| anyhow!("--n is required"))?;
                    gen_coded_instance(
                        &l1,
                        &parse_list::<f64>(&shape.b, "b")?,
                        &index_set(&shape.lambda2, "lambda2")?,
                        &parse_list::<f64>(&shape.bprime, "bprime")?,
                        shape.m,
                        n,
                        seed,
                    )?
                }
                GenFamily::Mixed => {
                    let y = parse_list::<f64>(y.as_deref().ok_or_else(|| anyhow!("--y is required"))?, "y")?;
                    gen_mixed_instance(&l1, shape.m, &y, seed)?
                }
            };
            write_output(out.as_deref(), &to_json(&inst)?)?;
            Ok(0)
        }
        Command::Verify { input, tol, out } => {
            let text = read_input(input.as_deref())?;
            let inst: AdversarialInstance = serde_json::from_str(&text).map_err(|e| Malformed(e.to_string()))?;
            let report = match verify_instance(&inst, tol) {
                Ok(r) => r,
                Err(Error::InvalidArgument(msg)) => return Err(Malformed(msg).into()),
                Err(e) => return Err(e.into()),
            };
            write_output(out.as_deref(), &to_json(&report)?)?;
            Ok(if report.pass { 0 } else { exit::FAIL })
        }
        Command::Quotient { input, w, tol } => {
            let w: Vec<f64> = match w {
                Some(s) => parse_list(&s, "w").map_err(|e| Malformed(e.to_string()))?,
                None => {
                    let text = read_input(input.as_deref())?;
                    match serde_json::from_str(&text) {
                        Ok(v) => v,
                        Err(_) => parse_list(&text, "w").map_err(|e| Malformed(e.to_string()))?,
                    }
                }
            };
            let q = decompose(&w, tol)?;
            write_output(None, &to_json(&q)?)?;
            Ok(0)
        }
        Command::Classify { lambda1, b, m, tol } => {
            let t = classify_pair(&index_set(&lambda1, "lambda1")?, &parse_list::<f64>(&b, "b")?, m, tol)?;
            write_output(None, &to_json(&t)?)?;
            Ok(0)
        }
        Command::Dim { family, shape, trials, seed } => {
            let n = shape.n.ok_or_else(|| anyhow!("--n is required"))?;
            let l1 = index_set(&shape.lambda1, "lambda1")?;
            let l2 = index_set(&shape.lambda2, "lambda2")?;
            let fam = match family {
                DimFamily::Sparse => Family::sparse(l1, l2, shape.m, n),
                DimFamily::Coded => Family::coded(
                    l1,
                    parse_list(&shape.b, "b")?,
                    l2,
                    parse_list(&shape.bprime, "bprime")?,
                    shape.m,
                    n,
                ),
            };
            match estimate_unidentifiable_dim(&fam, trials, seed) {
                Ok(r) => {
                    write_output(None, &to_json(&r)?)?;
                    Ok(if r.agreement { 0 } else { exit::FAIL })
                }
                Err(Error::Inconclusive(msg)) => {
                    eprintln!("inconclusive: {msg}");
                    Ok(exit::INCONCLUSIVE)
                }
                Err(e) => Err(e.into()),
            }
        }
        Command::Demo { out } => {
            let text = demo::run(out.as_deref())?;
            write_output(None, &text)?;
            Ok(0)
        }
        Command::Sweep { m, n, grid, trials, seed, out } => {
            if trials == 0 {
                bail!("--trials must be at least 1");
            }
            let rows = sweep::run(sweep::parse_range(&m)?, sweep::parse_range(&n)?, grid, trials, seed)?;
            let csv = sweep::to_csv(&rows)?;
            write_output(out.as_deref(), &csv)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Malformed>().is_some() {
                ExitCode::from(exit::MALFORMED)
            } else {
                ExitCode::from(exit::ERROR)
            }
        }
    }
}
