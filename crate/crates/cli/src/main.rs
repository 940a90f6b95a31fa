use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use num_bigint::BigUint;
use serde_json::json;

use lacunary::correlations::{correlation, Method, TestFunction, TestKind};
use lacunary::counting::{CountBudget, CountQuery, HomogeneousVariant, System};
use lacunary::fracparts::{
    frac_parts, required_precision_for, sample_alpha, FixedPointAlpha, DEFAULT_GUARD, DEFAULT_MAX_PRECISION,
};
use lacunary::harness::{self, ExperimentConfig, Ledger};
use lacunary::io::{fmt_f64, read_sequence_csv, read_theta_csv, sequence_csv, theta_csv, write_atomic};
use lacunary::poisson_model::{interval_count_pmf, level_spacing_cdf, level_spacing_pdf};
use lacunary::sequences::{SequenceSpec, DEFAULT_BIT_BUDGET};
use lacunary::smallparts::{g_max, lambda_measure};
use lacunary::spacings::{interval_counts, ks_distance, normalized_spacings, Histogram, SpacingMode};

#[derive(Parser)]
#[command(name = "lacunary", version, about = "Spacing statistics of fractional parts of lacunary sequences")]
struct Cli {
    /// Worker threads (overrides LACUNARY_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Writes a(1..N) as CSV (index, value).
    GenSequence {
        #[command(flatten)]
        seq: SeqArgs,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Writes {alpha a(x)} for x = 1..N as CSV (x, theta).
    Fracparts {
        #[command(flatten)]
        seq: SeqArgs,
        #[arg(long)]
        n: usize,
        /// Seed of a random alpha.
        #[arg(long, conflicts_with = "alpha")]
        seed: Option<u64>,
        /// Rational alpha "p/q".
        #[arg(long)]
        alpha: Option<String>,
        #[arg(long, default_value_t = DEFAULT_GUARD)]
        guard: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Normalized level-a spacings of a theta file.
    Spacings {
        #[arg(long)]
        theta: PathBuf,
        #[arg(long, default_value_t = 1)]
        level: u32,
        #[arg(long, default_value = "circular")]
        mode: SpacingMode,
        /// Histogram bins "width:upper".
        #[arg(long, default_value = "0.1:10")]
        bins: String,
        /// Spacings CSV (delta).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Histogram CSV (s, empirical_density, poisson_density).
        #[arg(long)]
        hist: Option<PathBuf>,
    },
    /// Occupancy of random arcs of length lambda/N.
    Intervals {
        #[arg(long)]
        theta: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 8)]
        max_k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulates the Poisson model.
    Poisson {
        #[command(flatten)]
        what: PoissonWhat,
        #[arg(long, default_value_t = 1)]
        level: u32,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        /// "start:stop:step" for densities, "0:kmax" for the pmf.
        #[arg(long, default_value = "0:10:0.1")]
        grid: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// k-level correlation R_k(f, N) of a theta file.
    Correlate {
        #[arg(long)]
        theta: PathBuf,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value = "bump")]
        f: TestKind,
        #[arg(long, default_value_t = 1.0)]
        rho: f64,
        #[arg(long, default_value = "windowed")]
        method: Method,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact solution counts; appends one JSON line to --out.
    Count(CountArgs),
    /// Small fractional parts: G(N) and Lambda measures
    #[command(subcommand)]
    Smallparts(SmallCmd),
    /// Run, report and replay configured experiments
    #[command(subcommand)]
    Experiment(ExpCmd),
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct PoissonWhat {
    /// Level spacing density P_a(s).
    #[arg(long)]
    pdf: bool,
    /// Level spacing distribution function.
    #[arg(long)]
    cdf: bool,
    /// Interval count probabilities for Poisson(lambda).
    #[arg(long)]
    pmf: bool,
}

#[derive(Args)]
struct SeqArgs {
    /// geometric | fibonacci | polynomial | explicit
    #[arg(long, default_value = "geometric")]
    kind: String,
    #[arg(long, default_value_t = 2)]
    base: u64,
    #[arg(long, default_value_t = 1)]
    first: u64,
    #[arg(long, default_value_t = 2)]
    second: u64,
    #[arg(long, default_value_t = 2)]
    degree: u32,
    /// Sequence CSV for the explicit kind.
    #[arg(long)]
    values: Option<PathBuf>,
    /// Bit cap on materialised values.
    #[arg(long, default_value_t = DEFAULT_BIT_BUDGET)]
    bit_budget: u64,
}

impl SeqArgs {
    fn spec(&self) -> Result<SequenceSpec> {
        Ok(match self.kind.as_str() {
            "geometric" => SequenceSpec::geometric(self.base),
            "fibonacci" | "fibonacci_like" => SequenceSpec::fibonacci_like(self.first, self.second),
            "polynomial" => SequenceSpec::polynomial(self.degree),
            "explicit" => {
                let path = self.values.as_ref().context("--values is required for the explicit kind")?;
                SequenceSpec::explicit(read_sequence_csv(path)?)
            }
            other => bail!("unknown sequence kind {other:?}"),
        })
    }

    fn generate(&self, n: usize) -> Result<Vec<BigUint>> {
        Ok(lacunary::sequences::generate_with_budget(&self.spec()?, n, self.bit_budget)?)
    }
}

#[derive(Args)]
struct CountArgs {
    /// sandwich | hyperplane_pair | homogeneous | pair_equation | contrast_triple
    #[arg(long)]
    system: System,
    #[arg(long)]
    n: u64,
    #[arg(long, default_value_t = 3)]
    r: usize,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value = "distinct")]
    variant: String,
    /// Sandwich coefficients a_1,...,a_r.
    #[arg(long, value_delimiter = ',')]
    a: Vec<u64>,
    /// Hyperplane indices z_1,...,z_r (1-based).
    #[arg(long, value_delimiter = ',')]
    z: Vec<usize>,
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    b: i64,
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    d: i64,
    /// Rational bound "p/q".
    #[arg(long, default_value = "1")]
    c: String,
    #[arg(long)]
    max_cost: Option<f64>,
    #[command(flatten)]
    seq: SeqArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum SmallCmd {
    /// Largest number of points in an open arc of length 2/N.
    Gmax {
        #[arg(long)]
        theta: PathBuf,
    },
    /// Exact measure of the set of alpha with all ||alpha a_j|| <= 1/N.
    Lambda {
        #[arg(long, value_delimiter = ',', required = true)]
        a: Vec<u64>,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ExpCmd {
    /// Runs a configured experiment and appends it to the ledger.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "runs.jsonl")]
        ledger: PathBuf,
        /// CSV output directory; defaults to a folder named after the record id.
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
    /// Summarises a ledger record and writes its CSV series.
    Report {
        #[arg(long)]
        id: Option<String>,
        #[arg(long, default_value = "runs.jsonl")]
        ledger: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Reruns a record and compares summaries.
    Replay {
        #[arg(long)]
        id: String,
        #[arg(long, default_value = "runs.jsonl")]
        ledger: PathBuf,
    },
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => Ok(std::io::stdout().write_all(bytes)?),
    }
}

fn emit_json(out: Option<&Path>, v: &serde_json::Value) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(v)?;
    bytes.push(b'\n');
    emit(out, &bytes)
}

fn parse_ratio(s: &str) -> Result<(u64, u64)> {
    let (p, q) = s.split_once('/').unwrap_or((s, "1"));
    Ok((p.trim().parse().context("alpha numerator")?, q.trim().parse().context("alpha denominator")?))
}

fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<f64> = s.split(':').map(|x| x.trim().parse::<f64>()).collect::<Result<_, _>>()?;
    let [start, stop, step] = parts[..] else { bail!("grid must be start:stop:step") };
    if !(step > 0.0) || stop < start {
        bail!("bad grid {s:?}");
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|i| start + i as f64 * step).collect())
}

fn csv_rows(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

fn run(cli: Cli) -> Result<ExitCode> {
    harness::configure_threads(cli.threads)?;
    match cli.cmd {
        Cmd::GenSequence { seq, n, out } => {
            let values = seq.generate(n)?;
            emit(out.as_deref(), &sequence_csv(&values)?)?;
        }
        Cmd::Fracparts { seq, n, seed, alpha, guard, out } => {
            let values = seq.generate(n)?;
            let precision = required_precision_for(&values, guard, DEFAULT_MAX_PRECISION)?;
            let alpha = match alpha {
                Some(s) => {
                    let (p, q) = parse_ratio(&s)?;
                    FixedPointAlpha::from_rational(p, q, precision)?
                }
                None => sample_alpha(seed.unwrap_or(0), precision)?,
            };
            let points = frac_parts(&alpha, &values, guard)?;
            emit(out.as_deref(), &theta_csv(&points)?)?;
            eprintln!("alpha {} ({} bits), N = {n}, guard {guard}", alpha.digest(), alpha.precision_bits());
        }
        Cmd::Spacings { theta, level, mode, bins, out, hist } => {
            let points = read_theta_csv(&theta)?;
            let sample = normalized_spacings(&points, level as usize, mode)?;
            let (w, upper) = bins.split_once(':').context("bins must be width:upper")?;
            let mut h = Histogram::new(w.trim().parse()?, upper.trim().parse()?);
            h.extend(sample.deltas.iter().copied());
            let ks = ks_distance(&sample.deltas, |s| level_spacing_cdf(level, s).unwrap_or(f64::NAN));
            if let Some(p) = out {
                let rows = sample.deltas.iter().map(|d| vec![fmt_f64(*d)]);
                emit(Some(&p), &csv_rows(&["delta"], rows)?)?;
            }
            if let Some(p) = hist {
                let rows = h
                    .densities()
                    .into_iter()
                    .map(|(s, d)| Ok(vec![fmt_f64(s), fmt_f64(d), fmt_f64(level_spacing_pdf(level, s)?)]))
                    .collect::<Result<Vec<_>>>()?;
                emit(Some(&p), &csv_rows(&["s", "empirical_density", "poisson_density"], rows)?)?;
            }
            emit_json(
                None,
                &json!({ "level": level, "mode": mode, "N": points.len(), "spacings": sample.deltas.len(), "ks": ks }),
            )?;
        }
        Cmd::Intervals { theta, lambda, trials, seed, max_k, out } => {
            let points = read_theta_csv(&theta)?;
            let h = interval_counts(&points, lambda, trials, seed)?;
            let mut rows = Vec::new();
            for k in 0..=max_k {
                rows.push(vec![k.to_string(), fmt_f64(h.freq(k)), fmt_f64(interval_count_pmf(lambda, k as u64)?)]);
            }
            if let Some(p) = out {
                emit(Some(&p), &csv_rows(&["k", "empirical_freq", "poisson_pmf"], rows)?)?;
            }
            emit_json(None, &json!({ "lambda": lambda, "trials": trials, "counts": h.counts, "mean": h.mean() }))?;
        }
        Cmd::Poisson { what, level, lambda, grid, out } => {
            let bytes = if what.pmf {
                let kmax: u64 = match grid.split(':').collect::<Vec<_>>()[..] {
                    [_, hi] => hi.trim().parse()?,
                    _ => 10,
                };
                let rows = (0..=kmax)
                    .map(|k| Ok(vec![k.to_string(), fmt_f64(interval_count_pmf(lambda, k)?)]))
                    .collect::<Result<Vec<_>>>()?;
                csv_rows(&["k", "pmf"], rows)?
            } else {
                let f = if what.pdf { level_spacing_pdf } else { level_spacing_cdf };
                let rows = parse_grid(&grid)?
                    .into_iter()
                    .map(|s| Ok(vec![fmt_f64(s), fmt_f64(f(level, s)?)]))
                    .collect::<Result<Vec<_>>>()?;
                csv_rows(&["s", if what.pdf { "pdf" } else { "cdf" }], rows)?
            };
            emit(out.as_deref(), &bytes)?;
        }
        Cmd::Correlate { theta, k, f, rho, method, out } => {
            let points = read_theta_csv(&theta)?;
            let tf = TestFunction::for_order(f, k, rho)?;
            let res = correlation(&points, k, &tf, method)?;
            let mut v = serde_json::to_value(&res)?;
            v["f"] = serde_json::to_value(tf)?;
            emit_json(out.as_deref(), &v)?;
        }
        Cmd::Count(args) => {
            let variant = match args.variant.as_str() {
                "distinct" => HomogeneousVariant::Distinct,
                "repeated" | "sys3" => HomogeneousVariant::Repeated,
                other => bail!("unknown variant {other:?}"),
            };
            let n = args.n;
            let query = match args.system {
                System::Sandwich => CountQuery::Sandwich { a: args.a.clone(), b: args.b, c: args.c.clone(), n },
                System::HyperplanePair => {
                    CountQuery::HyperplanePair { z: args.z.clone(), b: args.b, d: args.d, c: args.c.clone(), n }
                }
                System::Homogeneous => CountQuery::Homogeneous { r: args.r, n, variant },
                System::PairEquation => CountQuery::PairEquation { k: args.k, n },
                System::ContrastTriple => CountQuery::ContrastTriple { n },
            };
            let values = match args.system {
                System::Sandwich => Vec::new(),
                System::HyperplanePair => {
                    let top = args.z.iter().copied().max().unwrap_or(0).max(n as usize);
                    args.seq.generate(top)?
                }
                _ => args.seq.generate(n as usize)?,
            };
            let mut budget = CountBudget::default();
            if let Some(c) = args.max_cost {
                budget.max_cost = c;
            }
            let res = query.run(&values, &budget)?;
            let mut v = serde_json::to_value(&res)?;
            v["sequence"] = serde_json::to_value(args.seq.spec()?)?;
            let line = serde_json::to_string(&v)?;
            if let Some(p) = &args.out {
                let mut f = OpenOptions::new().create(true).append(true).open(p)?;
                writeln!(f, "{line}")?;
            }
            println!("{line}");
        }
        Cmd::Smallparts(SmallCmd::Gmax { theta }) => {
            let points = read_theta_csv(&theta)?;
            emit_json(None, &serde_json::to_value(g_max(&points))?)?;
        }
        Cmd::Smallparts(SmallCmd::Lambda { a, n, out }) => {
            emit_json(out.as_deref(), &serde_json::to_value(lambda_measure(&a, n)?)?)?;
        }
        Cmd::Experiment(ExpCmd::Run { config, ledger, data_dir }) => {
            let cfg = ExperimentConfig::load(&config)?;
            let ledger = Ledger::open(ledger);
            let record = harness::run_experiment(&cfg, &ledger, None)?;
            let dir = data_dir.unwrap_or_else(|| {
                ledger.path().parent().unwrap_or(Path::new(".")).join(&record.id)
            });
            harness::write_data_files(&record, &dir)?;
            print!("{}", harness::summary_text(&record));
            println!("data files: {}", dir.display());
            return Ok(if record.passed { ExitCode::SUCCESS } else { ExitCode::from(1) });
        }
        Cmd::Experiment(ExpCmd::Report { id, ledger, out_dir }) => {
            let ledger = Ledger::open(ledger);
            let id = match id {
                Some(id) => id,
                None => ledger.last()?.id,
            };
            let rep = harness::report(&ledger, &id, out_dir.as_deref())?;
            print!("{}", rep.text);
            for f in &rep.files {
                println!("wrote {}", f.display());
            }
            let passed = ledger.find(&id)?.passed;
            return Ok(if passed { ExitCode::SUCCESS } else { ExitCode::from(1) });
        }
        Cmd::Experiment(ExpCmd::Replay { id, ledger }) => {
            let record = Ledger::open(ledger).find(&id)?;
            let same = harness::replay(&record)?;
            println!("{}: replay {}", record.id, if same { "identical" } else { "DIFFERS" });
            return Ok(if same { ExitCode::SUCCESS } else { ExitCode::from(1) });
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
