use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{bail, Context};
use clap::{Parser, ValueEnum};
use ffhe::study::{run_study, StudyMethod, StudyReport};
use ffhe::{Error, Options, WarmStart};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Ffhe,
    Nr,
    NrWarmFfhe,
    Compare,
}

impl From<MethodArg> for StudyMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Ffhe => StudyMethod::Ffhe,
            MethodArg::Nr => StudyMethod::Nr,
            MethodArg::NrWarmFfhe => StudyMethod::NrWarmFfhe,
            MethodArg::Compare => StudyMethod::Compare,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ReportArg {
    Text,
    Json,
}

/// Load flow with SSSC/IPFC devices by flexible holomorphic embedding or
/// Newton-Raphson.
///
/// Exit status: 0 when every run converged, 2 when any diverged, 1 on bad
/// input.
#[derive(Debug, Parser)]
#[command(name = "ffhe", version)]
struct Cli {
    /// MATPOWER case file.
    #[arg(long, required_unless_present = "batch")]
    case: Option<PathBuf>,

    /// Device file (one sssc/ipfc record per line).
    #[arg(long)]
    devices: Option<PathBuf>,

    #[arg(long, value_enum, default_value = "nr-warm-ffhe")]
    method: MethodArg,

    /// Largest residual accepted as converged, p.u.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,

    /// Series order cap for FFHE.
    #[arg(long, default_value_t = 60)]
    max_terms: usize,

    /// Newton iterations before FFHE in nr-warm-ffhe and compare.
    #[arg(long, default_value_t = 3)]
    warm_iters: usize,

    /// Sum series with Padé approximants.
    #[arg(long)]
    pade: bool,

    #[arg(long, value_enum, default_value = "text")]
    report: ReportArg,

    /// File listing studies, one per line: CASE [DEVICES]. Paths are
    /// relative to the batch file. Other flags apply to every study.
    #[arg(long, conflicts_with_all = ["case", "devices"])]
    batch: Option<PathBuf>,
}

struct Job {
    case: PathBuf,
    devices: Option<PathBuf>,
}

fn read_batch(path: &Path) -> anyhow::Result<Vec<Job>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut jobs = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() > 2 {
            bail!("{}:{}: expected CASE [DEVICES], got {} fields", path.display(), n + 1, fields.len());
        }
        jobs.push(Job {
            case: dir.join(fields[0]),
            devices: fields.get(1).map(|d| dir.join(d)),
        });
    }
    Ok(jobs)
}

fn is_input_error(e: &Error) -> bool {
    match e {
        Error::InFile { source, .. } => is_input_error(source),
        Error::Numerical(_) | Error::SingularMatrix(_) | Error::LimitCycling(_) => false,
        Error::SingularReciprocal(_) | Error::SingularMagnitude(_) | Error::Order { .. } => false,
        _ => true,
    }
}

/// Runs the jobs on up to `available_parallelism` threads, keeping order.
fn run_all(jobs: &[Job], method: StudyMethod, opts: &Options) -> Vec<Result<StudyReport, Error>> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(jobs.len()).max(1);
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<StudyReport, Error>>>> =
        Mutex::new((0..jobs.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(k) else { break };
                let r = run_study(&job.case, job.devices.as_deref(), method, opts);
                results.lock().unwrap()[k] = Some(r);
            });
        }
    });
    results.into_inner().unwrap().into_iter().map(|r| r.expect("every job ran")).collect()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // clap reports usage errors with status 2, which here means divergence
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<ExitCode> {
    if cli.warm_iters == 0 {
        bail!("--warm-iters must be at least 1");
    }
    if !(cli.tol > 0.0) {
        bail!("--tol must be positive");
    }
    let opts = Options {
        tol: cli.tol,
        n_max: cli.max_terms,
        pade: cli.pade,
        warm_start: WarmStart::Nr(cli.warm_iters),
        ..Options::default()
    };
    let method = StudyMethod::from(cli.method);
    let jobs = match (&cli.batch, &cli.case) {
        (Some(b), _) => read_batch(b)?,
        (None, Some(case)) => vec![Job { case: case.clone(), devices: cli.devices.clone() }],
        (None, None) => bail!("either --case or --batch is required"),
    };

    let results = run_all(&jobs, method, &opts);
    let mut input_error = false;
    let mut diverged = false;
    let mut reports = Vec::new();
    for (job, r) in jobs.iter().zip(results) {
        match r {
            Ok(rep) => {
                diverged |= !rep.converged();
                reports.push(rep);
            }
            Err(e) => {
                eprintln!("error: {}: {e}", job.case.display());
                if is_input_error(&e) {
                    input_error = true;
                } else {
                    diverged = true;
                }
            }
        }
    }

    match cli.report {
        ReportArg::Text => {
            for (k, rep) in reports.iter().enumerate() {
                if k > 0 {
                    println!("\n{}", "=".repeat(72));
                }
                print!("{}", rep.to_text());
            }
        }
        ReportArg::Json if cli.batch.is_some() => println!("{}", serde_json::to_string_pretty(&reports)?),
        ReportArg::Json => {
            if let Some(rep) = reports.first() {
                println!("{}", rep.to_json()?);
            }
        }
    }

    Ok(if input_error {
        ExitCode::from(1)
    } else if diverged {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}
