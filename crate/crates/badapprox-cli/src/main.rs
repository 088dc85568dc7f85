use std::path::PathBuf;
use std::process::ExitCode;

use badapprox::cantor::ExtractMode;
use badapprox_cli::commands::{cmd_algebraic, cmd_certify, cmd_construct, cmd_count, cmd_intersect, cmd_report, cmd_sweep};
use badapprox_cli::config::{AlgebraicOp, OUT_ENV};
use badapprox_cli::{CliError, RunConfig, RunReport};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "badapprox", version, about = "Certify weighted badly approximable points and build Cantor sequences on curves")]
struct Cli {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output root for run directories.
    #[arg(long, global = true, env = OUT_ENV)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Print the report as JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Replace an existing run directory.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Exhaustive margin search for a rational point.
    Certify {
        /// Coordinates, comma separated.
        #[arg(long, allow_hyphen_values = true)]
        y: Option<String>,
        #[arg(long)]
        weights: Option<String>,
        /// Search integer linear forms instead of denominators.
        #[arg(long)]
        dual: bool,
        #[arg(long = "q-max", visible_alias = "Q")]
        q_max: Option<u64>,
        #[arg(long = "h-max", visible_alias = "H")]
        h_max: Option<u64>,
    },
    /// Build a Cantor sequence on a curve and certify a point of its limit.
    Construct(ConstructArgs),
    /// Intersect existing runs that share R and I0.
    Intersect {
        #[arg(required = true, num_args = 2..)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        name: Option<String>,
    },
    /// Count lattice points in a centred open box.
    Count {
        /// Rows separated by ';', entries by ','; columns are basis vectors.
        #[arg(long)]
        matrix: Option<String>,
        /// Half-widths of the box.
        #[arg(long = "box")]
        half_widths: Option<String>,
        #[arg(long)]
        budget: Option<u64>,
    },
    /// Polynomial approximation checks at a rational point.
    Algebraic(AlgebraicArgs),
    /// Build a grid of (R, m) and report d_q.
    Sweep {
        #[arg(long)]
        curve: Option<String>,
        #[arg(long = "weights")]
        weights: Vec<String>,
        #[arg(long = "R", value_delimiter = ',')]
        big_r: Vec<u64>,
        #[arg(long, value_delimiter = ',')]
        m: Vec<u32>,
        /// Levels built beyond m.
        #[arg(long)]
        depth: Option<u32>,
        #[arg(long)]
        i0: Option<String>,
        #[arg(long)]
        budget: Option<u64>,
    },
    /// Reload a run directory and recheck it.
    Report { run: PathBuf },
}

#[derive(Args)]
struct ConstructArgs {
    /// `veronese:N` or components in x separated by ';'.
    #[arg(long)]
    curve: Option<String>,
    /// Repeat to intersect several weight vectors.
    #[arg(long = "weights")]
    weights: Vec<String>,
    #[arg(long = "R")]
    big_r: Option<u64>,
    #[arg(long)]
    m: Option<u32>,
    #[arg(long = "q-max")]
    q_max: Option<u32>,
    #[arg(long)]
    i0: Option<String>,
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long)]
    extract: Option<Extract>,
    #[arg(long)]
    name: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Extract {
    Leftmost,
    Midmost,
}

#[derive(Args)]
struct AlgebraicArgs {
    op: AlgebraicOp,
    #[arg(long, allow_hyphen_values = true)]
    xi: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long = "h-max")]
    h_max: Option<u64>,
    #[arg(long = "h-min")]
    h_min: Option<u64>,
    #[arg(long)]
    c2: Option<String>,
    #[arg(long = "Q")]
    q: Option<u64>,
    #[arg(long)]
    eps0: Option<String>,
    /// Components in x1..xm separated by ';'.
    #[arg(long)]
    map: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    center: Option<String>,
    #[arg(long)]
    radius: Option<String>,
    #[arg(long)]
    d: Option<u32>,
    #[arg(long, allow_hyphen_values = true)]
    u: Option<String>,
}

fn set<T>(slot: &mut Option<T>, v: Option<T>) {
    if v.is_some() {
        *slot = v;
    }
}

fn set_vec<T>(slot: &mut Option<Vec<T>>, v: Vec<T>) {
    if !v.is_empty() {
        *slot = Some(v);
    }
}

fn run(cli: Cli) -> Result<RunReport, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    set(&mut cfg.output, cli.out);
    set(&mut cfg.threads, cli.threads);
    match cli.cmd {
        Cmd::Certify { y, weights, dual, q_max, h_max } => {
            let c = &mut cfg.certify;
            set(&mut c.y, y);
            set(&mut c.weights, weights);
            if dual {
                c.dual = Some(true);
            }
            set(&mut c.q_max, q_max);
            set(&mut c.h_max, h_max);
            cmd_certify(&cfg)
        }
        Cmd::Construct(a) => {
            let c = &mut cfg.construct;
            set(&mut c.curve, a.curve);
            set_vec(&mut c.weights, a.weights);
            set(&mut c.big_r, a.big_r);
            set(&mut c.m, a.m);
            set(&mut c.q_max, a.q_max);
            set(&mut c.i0, a.i0);
            set(&mut c.budget, a.budget);
            set(
                &mut c.extract,
                a.extract.map(|e| match e {
                    Extract::Leftmost => ExtractMode::Leftmost,
                    Extract::Midmost => ExtractMode::Midmost,
                }),
            );
            set(&mut c.name, a.name);
            cmd_construct(&cfg, cli.force).map(|(r, _)| r)
        }
        Cmd::Intersect { runs, name } => cmd_intersect(&cfg, &runs, name, cli.force).map(|(r, _)| r),
        Cmd::Count { matrix, half_widths, budget } => {
            let c = &mut cfg.count;
            set(&mut c.matrix, matrix);
            set(&mut c.half_widths, half_widths);
            set(&mut c.budget, budget);
            cmd_count(&cfg)
        }
        Cmd::Algebraic(a) => {
            let c = &mut cfg.algebraic;
            c.op = Some(a.op);
            set(&mut c.xi, a.xi);
            set(&mut c.n, a.n);
            set(&mut c.h_max, a.h_max);
            set(&mut c.h_min, a.h_min);
            set(&mut c.c2, a.c2);
            set(&mut c.q, a.q);
            set(&mut c.eps0, a.eps0);
            set(&mut c.map, a.map);
            set(&mut c.center, a.center);
            set(&mut c.radius, a.radius);
            set(&mut c.d, a.d);
            set(&mut c.u, a.u);
            cmd_algebraic(&cfg)
        }
        Cmd::Sweep { curve, weights, big_r, m, depth, i0, budget } => {
            let c = &mut cfg.sweep;
            set(&mut c.curve, curve);
            set_vec(&mut c.weights, weights);
            set_vec(&mut c.big_r, big_r);
            set_vec(&mut c.m, m);
            set(&mut c.depth, depth);
            set(&mut c.i0, i0);
            set(&mut c.budget, budget);
            cmd_sweep(&cfg)
        }
        Cmd::Report { run } => cmd_report(&run),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let json = cli.json;
    match run(cli) {
        Ok(rep) => {
            if json {
                println!("{}", serde_json::to_string_pretty(&rep).expect("report serializes"));
            } else {
                print!("{}", rep.render());
            }
            if rep.all_hold() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(4)
            }
        }
        Err(e) => {
            if json {
                let v = serde_json::json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
                eprintln!("{v}");
            } else {
                eprintln!("error [{}]: {e}", e.kind());
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
