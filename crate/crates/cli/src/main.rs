//! `mq`: command-line front end of the markov-quantile library.
//!
//! Exit codes: 0 on success, 1 when a verification fails or a refinement
//! does not converge, 2 on bad input.

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use markov_quantile::action::{energy, energy_limit, EnergyRefinement, Partition};
use markov_quantile::invariants::{self, Context, Outcome};
use markov_quantile::io::{self, FamilySpec};
use markov_quantile::levels::{l_finite, AtomicLevelSet};
use markov_quantile::oracle::{oracle_compare, oracle_l, BinKernel};
use markov_quantile::{
    essential, jump_rates, Error, Essential, MarkovChainLaw, ProcessHandle, ProcessVariant,
    Refinement, Threshold,
};

#[derive(Parser)]
#[command(name = "mq", version, about = "Markov-quantile processes of families of measures on the real line")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Family spec file, or the name of a builtin family.
    #[arg(long)]
    family: String,
    /// Write the artifact here instead of standard output.
    #[arg(long)]
    out: Option<String>,
    /// Refinement tolerance, overriding the spec file.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Pair law of (X_s, X_t) as JSON.
    Coupling {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        s: f64,
        #[arg(long, allow_hyphen_values = true)]
        t: f64,
        /// `mq`, `quantile`, or `markov-at R` with R a comma-separated list.
        #[arg(long, num_args = 1..=2, default_values = ["mq"], allow_hyphen_values = true)]
        process: Vec<String>,
    },
    /// Sampled paths as CSV.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Comma-separated times, or `a:b:m` for m equal steps.
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// Defaults to the seed of the spec file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, num_args = 1..=2, default_values = ["mq"], allow_hyphen_values = true)]
        process: Vec<String>,
    },
    /// Analytic and empirical jump rates of an integer-valued family.
    Rates {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        t: f64,
        #[arg(long, allow_hyphen_values = true)]
        k: i64,
        #[arg(long, default_value_t = 1e-3)]
        h: f64,
    },
    /// Whether an interval of times is essential inside a probe interval.
    Essential {
        #[command(flatten)]
        common: Common,
        /// `a,b` (equal ends for a single time).
        #[arg(long, allow_hyphen_values = true)]
        interval: String,
        /// `s,t` with s < a and b < t.
        #[arg(long, allow_hyphen_values = true)]
        probe: String,
    },
    /// Energy of the family on a partition, or its refined limit.
    Energy {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true, conflicts_with = "refine")]
        partition: Option<String>,
        /// Stopping tolerance of the dyadic refinement over the window.
        #[arg(long)]
        refine: Option<f64>,
    },
    /// Runs the property suite and reports pass/fail per property.
    Check {
        #[command(flatten)]
        common: Common,
        /// Only properties whose name starts with this.
        #[arg(long)]
        filter: Option<String>,
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long)]
        cases: Option<usize>,
    },
    /// Exact level couplings against the bin-matrix oracle.
    Oracle {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1024)]
        bins: usize,
        /// Atomic times to compose; defaults to the sample times of the window.
        #[arg(long, allow_hyphen_values = true)]
        times: Option<String>,
    },
}

enum Failure {
    Input(String),
    Verification(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NoConvergence { .. }
            | Error::Capacity { .. }
            | Error::MarginalMismatch { .. }
            | Error::NotDoublyStochastic { .. } => Failure::Verification(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

/// `Ok(false)` when a verification failed.
type RunResult = Result<bool, Failure>;

fn list(s: &str) -> Result<Vec<f64>, Failure> {
    s.split(',')
        .filter(|x| !x.trim().is_empty())
        .map(|x| x.trim().parse::<f64>().map_err(|_| Failure::Input(format!("not a number: '{x}'"))))
        .collect()
}

fn pair(s: &str) -> Result<(f64, f64), Failure> {
    match list(s)?.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => Err(Failure::Input(format!("expected two numbers, got '{s}'"))),
    }
}

fn grid(s: &str) -> Result<Vec<f64>, Failure> {
    let parts: Vec<&str> = s.split(':').collect();
    if let [a, b, m] = parts.as_slice() {
        let m: usize = m.parse().map_err(|_| Failure::Input(format!("bad step count '{m}'")))?;
        let (a, b) = (list(a)?, list(b)?);
        if a.len() != 1 || b.len() != 1 {
            return Err(Failure::Input(format!("bad grid '{s}'")));
        }
        return Ok(Partition::uniform(a[0], b[0], m)?.points().to_vec());
    }
    list(s)
}

fn variant(args: &[String]) -> Result<ProcessVariant, Failure> {
    match args {
        [p] if p == "mq" => Ok(ProcessVariant::MarkovQuantile),
        [p] if p == "quantile" => Ok(ProcessVariant::Quantile),
        [p, r] if p == "markov-at" => Ok(ProcessVariant::MadeMarkovAt(list(r)?)),
        _ => Err(Failure::Input(format!("unknown process '{}'", args.join(" ")))),
    }
}

fn load(c: &Common) -> Result<FamilySpec, Failure> {
    let mut spec = io::load_family(&c.family)?;
    if let Some(t) = c.tol {
        spec.refine_tol = t;
    }
    Ok(spec)
}

fn emit(c: &Common, text: &str) -> Result<(), Failure> {
    match &c.out {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure::Input(format!("{path}: {e}"))),
        None => {
            // A closed pipe (as with `| head`) is not an error.
            let _ = std::io::Write::write_all(&mut std::io::stdout().lock(), text.as_bytes());
            Ok(())
        }
    }
}

fn emit_json(c: &Common, v: &Value) -> Result<(), Failure> {
    emit(c, &(io::to_json(v) + "\n"))
}

fn rate_pair((up, down): (f64, f64)) -> Value {
    json!({"up_rate": up, "down_rate": down})
}

fn run(cmd: Command) -> RunResult {
    match cmd {
        Command::Coupling { common, s, t, process } => {
            let spec = load(&common)?;
            let h = ProcessHandle::new(spec.family, variant(&process)?)
                .with_refinement(Refinement::with_tol(spec.refine_tol));
            emit_json(&common, &io::coupling_json(s, t, &h.coupling(s, t)?))?;
            Ok(true)
        }
        Command::Simulate { common, grid: g, n, seed, process } => {
            let spec = load(&common)?;
            let seed = seed.unwrap_or(spec.seed);
            let h = ProcessHandle::new(spec.family, variant(&process)?)
                .with_refinement(Refinement::with_tol(spec.refine_tol));
            emit(&common, &io::ensemble_csv(&h.simulate(&grid(&g)?, n, seed)?))?;
            Ok(true)
        }
        Command::Rates { common, t, k, h } => {
            let spec = load(&common)?;
            let r = jump_rates(&spec.family, t, k, h, &Refinement::with_tol(spec.refine_tol))?;
            let v = json!({
                "t": t,
                "k": k,
                "h": h,
                "analytic": rate_pair(r.analytic),
                "empirical": rate_pair(r.empirical),
                "empirical_raw": rate_pair(r.empirical_raw),
            });
            emit_json(&common, &v)?;
            Ok(true)
        }
        Command::Essential { common, interval, probe } => {
            let spec = load(&common)?;
            let (a, b) = pair(&interval)?;
            let (s, t) = pair(&probe)?;
            let (verdict, gap) = essential(&spec.family, (a, b), (s, t), spec.refine_tol)?;
            let v = match verdict {
                Essential::Yes => json!(true),
                Essential::No => json!(false),
                Essential::Indeterminate => json!("Indeterminate"),
            };
            emit_json(&common, &json!({"interval": [a, b], "probe": [s, t], "essential": v, "gap": gap}))?;
            Ok(true)
        }
        Command::Energy { common, partition, refine } => {
            let spec = load(&common)?;
            let v = match partition {
                Some(p) => io::energy_json(&energy(&spec.family, &Partition::new(list(&p)?)?)?, None),
                None => {
                    let settings = EnergyRefinement { tol: refine.unwrap_or(spec.refine_tol), ..Default::default() };
                    let (a, b) = spec.window;
                    let lim = energy_limit(&spec.family, a, b, &settings)?;
                    let last = lim.history.last().map_or(1, |h| h.0);
                    let report = energy(&spec.family, &Partition::uniform(a, b, last)?)?;
                    io::energy_json(&report, Some(&lim))
                }
            };
            emit_json(&common, &v)?;
            Ok(true)
        }
        Command::Check { common, filter, paths, cases } => {
            let spec = load(&common)?;
            let mut ctx = Context::from_spec(&spec);
            if let Some(p) = paths {
                ctx.n_paths = p;
            }
            if let Some(c) = cases {
                ctx.cases = c;
            }
            let reports = invariants::run(&ctx, filter.as_deref());
            if reports.is_empty() {
                return Err(Failure::Input("no property matches the filter".into()));
            }
            let mut text = String::new();
            for r in &reports {
                let tag = match r.outcome {
                    Outcome::Pass(_) => "PASS",
                    Outcome::Fail(_) => "FAIL",
                    Outcome::NotApplicable(_) => "N/A ",
                };
                text.push_str(&format!("{tag} {:<36} {:>8.2}s  {}\n", r.name, r.seconds, r.outcome.detail()));
            }
            let failed = reports.iter().filter(|r| !r.outcome.passed()).count();
            text.push_str(&format!("{} properties, {} failed\n", reports.len(), failed));
            emit(&common, &text)?;
            Ok(failed == 0)
        }
        Command::Oracle { common, bins, times } => {
            let spec = load(&common)?;
            let ts = match times {
                Some(t) => list(&t)?,
                None => Context::from_spec(&spec).sample_times(),
            };
            let sets = ts.iter().map(|&t| spec.family.atomic_levels(t)).collect::<Result<Vec<AtomicLevelSet>, _>>()?;
            let exact = l_finite(&spec.family, &ts)?;
            let matrix = oracle_l(&sets, bins)?;
            let rho = oracle_compare(&exact, &matrix)?;
            // Three-time law: split the times in two halves.
            let mid = ts.len() / 2;
            let first = l_finite(&spec.family, &ts[..mid])?;
            let second = l_finite(&spec.family, &ts[mid..])?;
            let steps = [oracle_l(&sets[..mid], bins)?, oracle_l(&sets[mid..], bins)?];
            let chain = MarkovChainLaw::new(vec![first.into_kernel(), second.into_kernel()]);
            let mut fd: f64 = 0.0;
            for i in 0..=8 {
                for j in 0..=8 {
                    for k in 0..=8 {
                        let lv = [i as f64 / 8.0, j as f64 / 8.0, k as f64 / 8.0];
                        let th: Vec<Threshold> = lv.iter().map(|&u| Threshold::Level(u)).collect();
                        fd = fd.max((chain.fd_cdf(&th)? - BinKernel::fd_cdf(&steps, &lv)?).abs());
                    }
                }
            }
            let pass = rho <= 1e-9 && fd <= 1e-9;
            let v = json!({
                "bins": bins,
                "times": ts,
                "rho": rho,
                "fd_cdf_max_diff": fd,
                "stationarity_defect": exact.kernel().stationarity_defect(),
                "matrix_stationarity_defect": matrix.stationarity_defect(),
                "pass": pass,
            });
            emit_json(&common, &v)?;
            Ok(pass)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("MQ_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Verification(m)) => {
            eprintln!("mq: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Input(m)) => {
            eprintln!("mq: {m}");
            ExitCode::from(2)
        }
    }
}
