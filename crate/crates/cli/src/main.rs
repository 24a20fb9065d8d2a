use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use diffeo_core::diskmodel::{self, CubeCoords, DiskPoint, SpherePoint};
use diffeo_core::instance::ChepInstance;
use diffeo_core::lifting::LiftConfig;
use diffeo_core::smoothfn;
use diffeo_core::subdivision::{self, CylPoint, PsiMap, Side};
use diffeo_core::verify::{self, RunConfig, Suite};
use diffeo_core::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_PRECONDITION: u8 = 3;

#[derive(Parser)]
#[command(name = "diffeo", version, about = "Evaluate and verify smooth homotopy constructions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a verification suite
    Verify {
        /// smoothfn, diskmodel, homotopy, subdivision, diffeology, lifting or all
        suite: Suite,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Evaluate a named map; prints coordinates separated by spaces
    #[command(long_about = EVAL_HELP)]
    Eval {
        map: String,
        #[arg(allow_negative_numbers = true)]
        args: Vec<f64>,
        /// Evaluate psi and psi_inv without the wrinkle
        #[arg(long)]
        disable_wrinkle: bool,
    },
    /// Run the covering-homotopy lift on an instance file or bundled instance name
    Chep {
        instance: String,
        /// Write samples of H to this CSV file
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Write sampled (input, region, output) rows of psi as CSV
    DumpSubdivision {
        /// Dimension n of the cylinder disk (psi maps D^(n+1) to D^n x I)
        #[arg(long, default_value_t = 1)]
        n: usize,
        /// Grid points per axis in (s, t)
        #[arg(long, default_value_t = 11)]
        grid: usize,
        /// Output file; standard output when omitted
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        disable_wrinkle: bool,
    },
}

const EVAL_HELP: &str = "Evaluate a named map at the given coordinates.

Maps:
  gamma t | lambda t | lambda_inv y | xi s | xi_inv y
  Q n t1..tn          cube coordinates to D^n
  q v1..v(n+1) t      q_n(v, t)
  gen_plot x1..xn     Q_n(lambda(x1), .., lambda(xn))
  section w1..w(n+1)  canonical cube coordinates of w
  include_k w..       D^n to D^(n+1)
  retract w..         D^(n+1) to D^n
  reflect v..         sphere point to its reflection
  rho w..             the wrinkle on D^(n+1)
  phi s t v..         phi on the source point of (v, s, t)
  psi w..             prints the cylinder disk coordinates, then the time
  psi_inv v.. time    inverse of psi";

#[derive(Args, Clone)]
struct RunArgs {
    #[arg(long, default_value_t = 1e-12)]
    tol_alg: f64,
    #[arg(long, default_value_t = 1e-8)]
    tol_rt: f64,
    #[arg(long, default_value_t = 1e-4)]
    tol_fd: f64,
    #[arg(long, default_value_t = 1e-6)]
    tol_lift: f64,
    /// Large sample count (small counts use a tenth)
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, default_value_t = 3)]
    fd_order: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
    report: ReportFormat,
    /// Debug: evaluate psi without the wrinkle
    #[arg(long)]
    disable_wrinkle: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Json,
    Text,
}

impl RunArgs {
    fn config(&self) -> RunConfig {
        RunConfig {
            tol_alg: self.tol_alg,
            tol_rt: self.tol_rt,
            tol_fd: self.tol_fd,
            tol_lift: self.tol_lift,
            samples: self.samples,
            fd_order: self.fd_order,
            seed: self.seed,
            wrinkle: !self.disable_wrinkle,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Verify { suite, run } => cmd_verify(suite, &run),
        Command::Eval {
            map,
            args,
            disable_wrinkle,
        } => cmd_eval(&map, &args, PsiMap { wrinkle: !disable_wrinkle }),
        Command::Chep { instance, csv, run } => cmd_chep(&instance, csv, &run),
        Command::DumpSubdivision {
            n,
            grid,
            out,
            seed,
            disable_wrinkle,
        } => cmd_dump(n, grid, out, seed, PsiMap { wrinkle: !disable_wrinkle }),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Precondition { .. } => EXIT_PRECONDITION,
                Error::Domain(_) | Error::Parse(_) => EXIT_USAGE,
                _ => EXIT_FAIL,
            })
        }
    }
}

fn cmd_verify(suite: Suite, run: &RunArgs) -> Result<u8, Error> {
    let report = verify::run(suite, &run.config())?;
    match run.report {
        ReportFormat::Json => println!("{}", report.to_json()),
        ReportFormat::Text => print!("{}", report.to_text()),
    }
    Ok(if report.pass { 0 } else { EXIT_FAIL })
}

fn fmt(x: f64) -> String {
    if x == 0.0 || (1e-4..1e15).contains(&x.abs()) || !x.is_finite() {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|&x| fmt(x)).collect::<Vec<_>>().join(" ")
}

fn arity(map: &str, args: &[f64], want: usize) -> Result<(), Error> {
    if args.len() == want {
        Ok(())
    } else {
        Err(Error::Domain(format!("{map} takes {want} argument(s), got {}", args.len())))
    }
}

fn cmd_eval(map: &str, args: &[f64], psi: PsiMap) -> Result<u8, Error> {
    let scalar = |f: &dyn Fn(f64) -> Result<f64, Error>| -> Result<Vec<f64>, Error> {
        arity(map, args, 1)?;
        Ok(vec![f(args[0])?])
    };
    let disk = || DiskPoint::new(args.to_vec());
    let cyl = |c: CylPoint| {
        let mut v = c.disk.coords().to_vec();
        v.push(c.time);
        v
    };
    let out = match map {
        "gamma" => scalar(&|t| Ok(smoothfn::gamma(t)))?,
        "lambda" => scalar(&|t| Ok(smoothfn::lambda_fn(t)))?,
        "lambda_inv" => scalar(&|y| Ok(smoothfn::lambda_inv(y)))?,
        "xi" => scalar(&|s| Ok(smoothfn::xi(s)))?,
        "xi_inv" => scalar(&smoothfn::xi_inv)?,
        "Q" => {
            let n = args.first().copied().ok_or_else(|| Error::Domain("Q takes n then n cube coordinates".into()))?;
            if n < 0.0 || n.fract() != 0.0 {
                return Err(Error::Domain(format!("Q expects a whole dimension, got {n}")));
            }
            arity(map, &args[1..], n as usize)?;
            diskmodel::q_cube(&CubeCoords::new(args[1..].to_vec())?).into_coords()
        }
        "q" => {
            let (t, v) = args.split_last().ok_or_else(|| Error::Domain("q takes v then t".into()))?;
            diskmodel::q(&DiskPoint::new(v.to_vec())?, *t)?.into_coords()
        }
        "gen_plot" => diskmodel::gen_plot(args).into_coords(),
        "section" => diskmodel::section(&disk()?).into_vec(),
        "include_k" => diskmodel::include_k(&disk()?).into_coords(),
        "retract" => diskmodel::retract(&disk()?)?.into_coords(),
        "reflect" => diskmodel::reflect(&SpherePoint::new(args.to_vec())?).coords().to_vec(),
        "rho" => subdivision::rho(&disk()?)?.into_coords(),
        "phi" => {
            if args.len() < 3 {
                return Err(Error::Domain("phi takes s, t, then v".into()));
            }
            cyl(subdivision::phi_map(args[0], args[1], &DiskPoint::new(args[2..].to_vec())?)?)
        }
        "psi" => cyl(psi.apply(&disk()?)?),
        "psi_inv" => {
            let (t, v) = args.split_last().ok_or_else(|| Error::Domain("psi_inv takes v then time".into()))?;
            psi.invert(&CylPoint::new(DiskPoint::new(v.to_vec())?, *t)?)?.into_coords()
        }
        other => return Err(Error::Domain(format!("unknown map {other:?}; see `diffeo eval --help`"))),
    };
    println!("{}", join(&out));
    Ok(0)
}

fn cmd_chep(instance: &str, csv_path: Option<PathBuf>, run: &RunArgs) -> Result<u8, Error> {
    let cfg = run.config();
    cfg.validate()?;
    let text = if diffeo_core::instance::bundled(instance).is_some() {
        instance.to_string()
    } else {
        std::fs::read_to_string(instance).map_err(|e| Error::Domain(format!("cannot read {instance}: {e}")))?
    };
    let inst = ChepInstance::load(&text)?;
    let lc = LiftConfig {
        samples: cfg.samples.map_or(1_000, |s| (s / 10).max(1)),
        tolerance: cfg.tol_lift,
        seed: cfg.seed,
    };
    let (big_h, report) = inst.run(&lc)?;
    let json = serde_json::json!({
        "instance": inst.name,
        "samples": report.samples,
        "initial": report.initial,
        "base": report.base,
        "projection": report.projection,
        "tol": report.tolerance,
        "pass": report.passed(),
    });
    match run.report {
        ReportFormat::Json => println!("{}", serde_json::to_string_pretty(&json).expect("json")),
        ReportFormat::Text => println!(
            "{} {} initial={:e} base={:e} projection={:e} tol={:e} samples={}",
            if report.passed() { "PASS" } else { "FAIL" },
            inst.name,
            report.initial,
            report.base,
            report.projection,
            report.tolerance,
            report.samples
        ),
    }
    if let Some(path) = csv_path {
        let mut w = csv::Writer::from_path(&path).map_err(|e| Error::Domain(e.to_string()))?;
        w.write_record(["point", "t", "value"]).map_err(|e| Error::Domain(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        for _ in 0..100 {
            let x = inst.complex.sample_point(&mut rng);
            for t in verify::grid(0.0, 1.0, 5) {
                let y = big_h.eval(&x, t)?;
                w.write_record([x.to_string(), t.to_string(), join(&y.flatten())])
                    .map_err(|e| Error::Domain(e.to_string()))?;
            }
        }
        w.flush().map_err(|e| Error::Domain(e.to_string()))?;
    }
    Ok(if report.passed() { 0 } else { EXIT_FAIL })
}

fn cmd_dump(n: usize, grid: usize, out: Option<PathBuf>, seed: u64, psi: PsiMap) -> Result<u8, Error> {
    if n == 0 || grid < 2 {
        return Err(Error::Domain("dump-subdivision needs n >= 1 and grid >= 2".into()));
    }
    let sink: Box<dyn std::io::Write> = match &out {
        Some(p) => Box::new(std::fs::File::create(p).map_err(|e| Error::Domain(e.to_string()))?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut w = csv::WriterBuilder::new().flexible(false).from_writer(sink);
    let mut header = vec!["n".to_string(), "s".into(), "t".into()];
    header.extend((1..=n).map(|i| format!("v{i}")));
    header.push("region".into());
    header.extend((1..=n + 1).map(|i| format!("out{i}")));
    header.push("time".into());
    let err = |e: csv::Error| Error::Domain(e.to_string());
    w.write_record(&header).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for s in verify::grid(0.0, 1.0, grid) {
        for t in verify::grid(0.0, 1.0, grid) {
            let v = diskmodel::sample_disk(n - 1, &mut rng);
            let w_src = subdivision::source_point(&v, s, t)?;
            let c = psi.apply(&w_src)?;
            let region = subdivision::region_classify(s, t, Side::Source)
                .iter()
                .map(|r| format!("V{}", r.value))
                .collect::<Vec<_>>()
                .join("|");
            let mut row = vec![n.to_string(), fmt(s), fmt(t)];
            row.extend(v.coords().iter().map(|&x| fmt(x)));
            row.push(region);
            row.extend(c.disk.coords().iter().map(|&x| fmt(x)));
            row.push(fmt(c.time));
            w.write_record(&row).map_err(err)?;
        }
    }
    w.flush().map_err(|e| Error::Domain(e.to_string()))?;
    std::io::stdout().flush().ok();
    Ok(0)
}
