//! The `uccsim` command line.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 when inputs fail
//! validation or a run violates the bound it checks.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::agreement::{agreement_entropy_audit, chernoff_bound, Strategy, Tail};
use crate::csample::{correlated_sample, cost_shape, sharpened_pair, SharedRandomness};
use crate::dist::JointDistribution;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::families::{in_family, parity_distance_bound, parity_distance_exact, sample_dq};
use crate::lowerbound::lowerbound_sweep;
use crate::model::{BitString, BoolFunction, Domain};
use crate::oracle::exact_one_way_cc;
use crate::rng::{derive_seed, stream_rng};
use crate::uncertain::{generate_instance, run_trials, summarize};

pub const SEED_ENV: &str = "UCCSIM_SEED";
const INSTANCE_STREAM: u64 = 0x494e_5354;

#[derive(Parser, Debug)]
#[command(name = "uccsim", version, about = "Simulations of one-way communication under contextual uncertainty")]
struct Cli {
    /// Worker threads; 1 runs sequentially.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Monte Carlo error of the uncertain-context protocol on a random instance.
    UncertainRun(UncertainArgs),
    /// Cost and agreement of interactive correlated sampling.
    CsampleBench(CsampleArgs),
    /// Spectral discrepancy bounds over a grid of p and n.
    LowerboundSweep(SweepArgs),
    /// Min-entropy audit of an agreement strategy.
    AgreementAudit(AuditArgs),
    /// Exact one-way communication complexity of a small function.
    OracleCc(OracleArgs),
    /// Sampled members of the noisy parity family.
    FamilyAudit(FamilyArgs),
}

#[derive(Args, Debug)]
struct UncertainArgs {
    #[arg(long)]
    n: u32,
    #[arg(long)]
    k: u32,
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    #[arg(long, default_value_t = 0.2)]
    theta: f64,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long)]
    seed: Option<u64>,
    /// `product` or `noisy:P`.
    #[arg(long, default_value = "product")]
    mu: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CsampleArgs {
    #[arg(long, default_value_t = 16)]
    universe: usize,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    /// Divergences in bits; each gives a pair with that KL divergence.
    #[arg(long, default_value = "0,1,2,3")]
    d_grid: String,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long, default_value = "0.1,0.25")]
    p_grid: String,
    #[arg(long, default_value = "1,2,3")]
    n_grid: String,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AuditArgs {
    #[arg(long = "sizeY", alias = "size-y")]
    size_y: usize,
    #[arg(long)]
    delta2: f64,
    /// JSON strategy file.
    #[arg(long)]
    strategy: PathBuf,
}

#[derive(Args, Debug)]
struct OracleArgs {
    /// `parity:S=0b101`, `constant:0`, `constant:1`, `equality`, or `file:PATH`.
    #[arg(long)]
    function: String,
    /// `product`, `noisy:P`, or `file:PATH`.
    #[arg(long, default_value = "product")]
    mu: String,
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    /// Input length; defaults to the width of the parity mask, else 2.
    #[arg(long)]
    n: Option<u32>,
}

#[derive(Args, Debug)]
struct FamilyArgs {
    #[arg(long, default_value_t = 60)]
    n: u32,
    #[arg(long, default_value_t = 0.1)]
    p: f64,
    #[arg(long, default_value_t = 0.2)]
    q: f64,
    #[arg(long, default_value_t = 1000)]
    samples: u64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Outcome {
    Ok,
    Violation(String),
}

/// Entry point; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let jobs = cli.jobs;
    let result = Execution::with_jobs(jobs, move |exec| dispatch(cli.command, exec));
    match result {
        Ok(Outcome::Ok) => 0,
        Ok(Outcome::Violation(msg)) => {
            eprintln!("validation failure: {msg}");
            2
        }
        Err(e @ (Error::Parse(_) | Error::Io(_) | Error::Json(_))) => {
            eprintln!("error: {e}");
            1
        }
        Err(e) => {
            eprintln!("validation failure: {e}");
            2
        }
    }
}

fn dispatch(cmd: Command, exec: Execution) -> Result<Outcome> {
    match cmd {
        Command::UncertainRun(a) => uncertain_run(a, exec),
        Command::CsampleBench(a) => csample_bench(a, exec),
        Command::LowerboundSweep(a) => sweep(a, exec),
        Command::AgreementAudit(a) => audit(a),
        Command::OracleCc(a) => oracle(a),
        Command::FamilyAudit(a) => family(a),
    }
}

fn resolve_seed(seed: Option<u64>) -> Result<u64> {
    match seed {
        Some(s) => Ok(s),
        None => match std::env::var(SEED_ENV) {
            Ok(v) => v.trim().parse().map_err(|_| Error::Parse(format!("{SEED_ENV}={v:?} is not a u64"))),
            Err(_) => Ok(0),
        },
    }
}

fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse().map_err(|_| Error::Parse(format!("bad list entry {t:?}"))))
        .collect()
}

/// Parses `product`, `noisy:P` or `file:PATH`.
pub fn parse_mu(text: &str, n: u32) -> Result<JointDistribution> {
    if text == "product" {
        return JointDistribution::uniform_product(n);
    }
    if let Some(p) = text.strip_prefix("noisy:") {
        let p: f64 = p.parse().map_err(|_| Error::Parse(format!("bad flip probability {p:?}")))?;
        return JointDistribution::noisy_hypercube(n, p);
    }
    if let Some(path) = text.strip_prefix("file:") {
        return JointDistribution::from_json(&std::fs::read_to_string(path)?);
    }
    Err(Error::Parse(format!("unknown distribution {text:?}")))
}

fn parse_function(text: &str, n: Option<u32>) -> Result<BoolFunction> {
    if let Some(mask) = text.strip_prefix("parity:S=") {
        let bits = BitString::parse(mask)?;
        let n = n.unwrap_or(bits.len());
        return BoolFunction::parity(n, bits.value());
    }
    if let Some(path) = text.strip_prefix("file:") {
        return BoolFunction::from_json(&std::fs::read_to_string(path)?);
    }
    let d = Domain::square(n.unwrap_or(2))?;
    match text {
        "constant:0" => Ok(BoolFunction::constant(d, false)),
        "constant:1" => Ok(BoolFunction::constant(d, true)),
        "equality" => BoolFunction::from_fn(d, |x, y| x == y),
        _ => Err(Error::Parse(format!("unknown function {text:?}"))),
    }
}

fn header(command: &str, seed: Option<u64>, params: &[(&str, String)]) -> String {
    let mut h = format!("# uccsim {command}");
    if let Some(s) = seed {
        let _ = write!(h, " seed={s}");
    }
    for (k, v) in params {
        let _ = write!(h, " {k}={v}");
    }
    h.push('\n');
    h
}

fn write_out(path: &Option<PathBuf>, body: &str) -> Result<()> {
    if let Some(p) = path {
        std::fs::write(p, body)?;
    }
    Ok(())
}

fn b01(b: bool) -> u8 {
    b as u8
}

fn uncertain_run(a: UncertainArgs, exec: Execution) -> Result<Outcome> {
    let seed = resolve_seed(a.seed)?;
    let mu = parse_mu(&a.mu, a.n)?;
    let inst = generate_instance(&mu, a.k, a.eps, a.delta, &mut stream_rng(seed, INSTANCE_STREAM))?;
    let records = run_trials(&inst, a.theta, a.trials, seed, exec)?;
    let est = summarize(&records)?;
    let bound = a.eps + 2.0 * a.delta + a.theta;
    let mut body = header(
        "uncertain-run",
        Some(seed),
        &[
            ("n", a.n.to_string()),
            ("k", a.k.to_string()),
            ("eps", a.eps.to_string()),
            ("delta", a.delta.to_string()),
            ("theta", a.theta.to_string()),
            ("trials", a.trials.to_string()),
            ("mu", a.mu.clone()),
        ],
    );
    body.push_str("trial,x,y,output,truth,correct,bits,sampling_ok\n");
    for r in &records {
        let _ = writeln!(
            body,
            "{},{},{},{},{},{},{},{}",
            r.trial,
            r.x,
            r.y,
            b01(r.output),
            b01(r.truth),
            b01(r.correct),
            r.bits,
            b01(r.sampling_ok)
        );
    }
    write_out(&a.out, &body)?;
    println!(
        "error={:.6} half_width={:.6} bound={:.6} mean_bits={:.3} sampling_failures={} trials={}",
        est.error, est.half_width, bound, est.mean_bits, est.sampling_failures, est.trials
    );
    if est.error > bound + est.half_width {
        return Ok(Outcome::Violation(format!("error {} exceeds {}", est.error, bound + est.half_width)));
    }
    Ok(Outcome::Ok)
}

fn csample_bench(a: CsampleArgs, exec: Execution) -> Result<Outcome> {
    let seed = resolve_seed(a.seed)?;
    let grid: Vec<u32> = parse_list(&a.d_grid)?;
    let mut body = header(
        "csample-bench",
        Some(seed),
        &[
            ("universe", a.universe.to_string()),
            ("eps", a.eps.to_string()),
            ("d_grid", a.d_grid.clone()),
            ("trials", a.trials.to_string()),
        ],
    );
    body.push_str("seed,D_PQ_bits,eps,bits_alice,rounds,success\n");
    let mut worst_c = 0.0f64;
    for &d in &grid {
        let (p, q) = sharpened_pair(a.universe, d)?;
        let base = derive_seed(seed, d as u64);
        let runs = exec.map(a.trials as usize, |t| {
            let s = derive_seed(base, t as u64);
            correlated_sample(&p, &q, a.eps, &SharedRandomness::new(s)).map(|r| (s, r))
        });
        let mut bits = 0u64;
        let mut agreed = 0u64;
        for run in runs {
            let (s, r) = run?;
            bits += r.stats.bits_alice;
            agreed += r.agreed() as u64;
            let _ = writeln!(body, "{s},{d},{},{},{},{}", a.eps, r.stats.bits_alice, r.stats.rounds, b01(r.agreed()));
        }
        let mean = bits as f64 / a.trials.max(1) as f64;
        let c = mean / cost_shape(d as f64, a.eps);
        worst_c = worst_c.max(c);
        println!(
            "D={d} mean_bits={mean:.3} agreement={:.4} C={c:.4}",
            agreed as f64 / a.trials.max(1) as f64
        );
    }
    println!("C_max={worst_c:.4}");
    write_out(&a.out, &body)?;
    Ok(Outcome::Ok)
}

fn sweep(a: SweepArgs, exec: Execution) -> Result<Outcome> {
    let ps: Vec<f64> = parse_list(&a.p_grid)?;
    let ns: Vec<u32> = parse_list(&a.n_grid)?;
    let rows = lowerbound_sweep(&ps, &ns, a.eps, exec)?;
    let mut body = header(
        "lowerbound-sweep",
        None,
        &[("p_grid", a.p_grid.clone()), ("n_grid", a.n_grid.clone()), ("eps", a.eps.to_string())],
    );
    body.push_str("p,n,spectral_bound,disc_exact,cc_lb_bits\n");
    let mut violation = None;
    for r in &rows {
        let exact = r.disc_exact.map_or("NA".to_string(), |d| d.to_string());
        let _ = writeln!(body, "{},{},{},{},{}", r.p, r.n, r.spectral_bound, exact, r.cc_lb_bits);
        if let Some(d) = r.disc_exact {
            if d > r.spectral_bound * (1.0 + 1e-12) {
                violation = Some(format!("p={} n={}: exact {d} above bound {}", r.p, r.n, r.spectral_bound));
            }
        }
    }
    print!("{}", body.lines().skip(1).map(|l| format!("{l}\n")).collect::<String>());
    write_out(&a.out, &body)?;
    Ok(violation.map_or(Outcome::Ok, Outcome::Violation))
}

fn audit(a: AuditArgs) -> Result<Outcome> {
    let strategy = Strategy::from_json(&std::fs::read_to_string(&a.strategy)?)?;
    let report = match agreement_entropy_audit(&strategy, a.size_y, a.delta2) {
        Ok(r) => r,
        Err(e @ Error::DistanceViolation { .. }) => return Ok(Outcome::Violation(e.to_string())),
        Err(e) => return Err(e),
    };
    println!(
        "min_entropy={:.6} bound={:.6} outputs={} radius={}",
        report.min_entropy, report.bound, report.distinct_outputs, report.radius
    );
    if !report.holds() {
        return Ok(Outcome::Violation(format!(
            "min-entropy {} below {}",
            report.min_entropy, report.bound
        )));
    }
    Ok(Outcome::Ok)
}

fn oracle(a: OracleArgs) -> Result<Outcome> {
    let f = parse_function(&a.function, a.n)?;
    let mu = parse_mu(&a.mu, f.domain().x_bits)?;
    println!("{}", exact_one_way_cc(&f, &mu, a.eps)?);
    Ok(Outcome::Ok)
}

fn family(a: FamilyArgs) -> Result<Outcome> {
    let seed = resolve_seed(a.seed)?;
    let mut rng = stream_rng(seed, 0);
    let mut body = header(
        "family-audit",
        Some(seed),
        &[
            ("n", a.n.to_string()),
            ("p", a.p.to_string()),
            ("q", a.q.to_string()),
            ("samples", a.samples.to_string()),
        ],
    );
    body.push_str("sample,sym_diff,in_family,distance_exact,bound_pqn\n");
    let bound = parity_distance_bound(a.p, a.q, a.n);
    let mut outside = 0u64;
    let mut violation = None;
    for i in 0..a.samples {
        let (s, t) = sample_dq(a.n, a.q, &mut rng)?;
        let member = in_family(&s, &t, a.q)?;
        let dist = parity_distance_exact(&s, &t, a.p)?;
        outside += (!member) as u64;
        if member && dist > bound + 1e-12 {
            violation = Some(format!("sample {i}: distance {dist} above {bound}"));
        }
        let _ = writeln!(body, "{i},{},{},{dist},{bound}", s.xor(&t)?.weight(), b01(member));
    }
    let tail = chernoff_bound(a.n as u64, a.q * a.n as f64 / 2.0, Tail::Upper { delta: 1.0 })?;
    println!(
        "outside_family={:.6} chernoff_bound={tail:.6} samples={}",
        outside as f64 / a.samples.max(1) as f64,
        a.samples
    );
    write_out(&a.out, &body)?;
    Ok(violation.map_or(Outcome::Ok, Outcome::Violation))
}
