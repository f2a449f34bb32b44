use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use semispline::config::StudyConfig;
use semispline::data::{read_xy_file, write_predictions, write_xy};
use semispline::kernelreg::Bandwidth;
use semispline::modelselect::{count_criteria, CriteriaConfig};
use semispline::parametric::resolve_model;
use semispline::pls::{SmootherChoice, SmootherSpec};
use semispline::simlab::{example_truth, generate_dataset, SimResult};
use semispline::spse::{fit_spse, unit_grid, Gamma};
use semispline::{Error, Result};

#[derive(Parser)]
#[command(name = "semispline", version, about = "Semiparametric penalized spline regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a semiparametric spline to `x,y` data and write predictions on a grid.
    Fit(FitArgs),
    /// Score candidate models and print the selected one on the last line.
    Select(SelectArgs),
    /// Run a Monte Carlo study file.
    Simulate(SimulateArgs),
    /// Write a seeded dataset of a reference example.
    Generate(GenerateArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// Correction exponent: 0 additive, 1 multiplicative.
    #[arg(long, default_value_t = 0)]
    gamma: u8,
    /// Spline degree p.
    #[arg(long, default_value_t = 1)]
    degree: usize,
    /// Difference penalty order m.
    #[arg(long, default_value_t = 2)]
    penalty_order: usize,
    /// Resolve model names against this example's library.
    #[arg(long)]
    example: Option<u32>,
}

impl ModelArgs {
    fn gamma(&self) -> Result<Gamma> {
        Gamma::try_from(self.gamma)
    }
}

#[derive(Args)]
struct FitArgs {
    data: PathBuf,
    /// Model name or expression, e.g. `sin`, `poly3`, `1 + x + cos(2)`.
    #[arg(long)]
    model: String,
    #[command(flatten)]
    common: ModelArgs,
    /// Fixed smoothing parameter (needs --knots).
    #[arg(long, requires = "knots", conflicts_with_all = ["gcv", "rates"])]
    lambda: Option<f64>,
    /// Number of equal knot segments K (needs --lambda).
    #[arg(long, requires = "lambda")]
    knots: Option<usize>,
    /// Choose (K, lambda) by GCV (the default).
    #[arg(long, conflicts_with = "rates")]
    gcv: bool,
    /// Use K = ceil(n^(1/(2p+1))) and lambda = n^(p/(2p+1)).
    #[arg(long)]
    rates: bool,
    /// Add pointwise interval columns at this level.
    #[arg(long)]
    ci_level: Option<f64>,
    /// Number of equally spaced output points on [0, 1].
    #[arg(long, default_value_t = 101)]
    grid: usize,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SelectArgs {
    data: PathBuf,
    /// Comma separated candidate models.
    #[arg(long, value_delimiter = ',', required = true)]
    candidates: Vec<String>,
    #[command(flatten)]
    common: ModelArgs,
    /// Number of evaluation points z_j = j/J.
    #[arg(long, default_value_t = 100)]
    grid_j: usize,
    /// Pilot bandwidth; cross-validated when absent.
    #[arg(long)]
    pilot_bandwidth: Option<f64>,
    /// Write the report CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    study: PathBuf,
    /// Worker threads; all cores when absent.
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides the study's [output] dir.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    example: u32,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    match path {
        Some(p) => File::create(p)
            .map(|f| Box::new(f) as Box<dyn Write>)
            .map_err(|e| Error::Io {
                path: p.to_path_buf(),
                source: e,
            }),
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn fit(args: &FitArgs) -> Result<()> {
    let (xs, ys) = read_xy_file(&args.data)?;
    let model = resolve_model(&args.model, args.common.example)?;
    let (p, m) = (args.common.degree, args.common.penalty_order);
    let choice = match (args.knots, args.lambda) {
        (Some(k), Some(l)) => SmootherChoice::Fixed(SmootherSpec::new(p, k, m, l)?),
        _ if args.rates => SmootherChoice::Rates { degree: p, order: m },
        _ => SmootherChoice::gcv(p, m),
    };
    let fit = fit_spse(&xs, &ys, &model, args.common.gamma()?, &choice)?;
    let rows = fit.predictions(&unit_grid(args.grid), args.ci_level)?;
    write_predictions(&rows, output(args.out.as_deref())?)
}

fn select(args: &SelectArgs) -> Result<()> {
    let (xs, ys) = read_xy_file(&args.data)?;
    let candidates = args
        .candidates
        .iter()
        .map(|c| resolve_model(c, args.common.example))
        .collect::<Result<Vec<_>>>()?;
    let mut config = CriteriaConfig::new(
        args.common.gamma()?,
        args.common.degree,
        args.common.penalty_order,
    );
    config.grid_j = args.grid_j;
    if let Some(h) = args.pilot_bandwidth {
        config.pilot_bandwidth = Bandwidth::Fixed(h);
    }
    let report = count_criteria(&xs, &ys, &candidates, &config)?;
    match &args.out {
        Some(p) => report.write_csv(output(Some(p))?)?,
        None => print!("{}", report.to_csv_string()?),
    }
    println!("{}", report.selected_a_lambda);
    Ok(())
}

fn print_summary(result: &SimResult) {
    println!(
        "{:<20} {:>5} {:>5} {:>12} {:>12} {:>12}",
        "arm", "used", "excl", "ISB x1e3", "V x1e3", "MISE x1e3"
    );
    for a in &result.arms {
        println!(
            "{:<20} {:>5} {:>5} {:>12.3} {:>12.3} {:>12.3}",
            a.label,
            a.used,
            a.excluded,
            a.isb * 1e3,
            a.v * 1e3,
            a.mise * 1e3
        );
    }
    for s in &result.selections {
        println!();
        println!(
            "{:<20} {:>6} {:>9} {:>11} {:>6} {:>6}",
            s.label, "C_a", "C_lambda", "C_a_lambda", "AIC", "TIC"
        );
        for (i, m) in s.candidates.iter().enumerate() {
            println!(
                "{:<20} {:>6} {:>9} {:>11} {:>6} {:>6}",
                m, s.c_a[i], s.c_lambda[i], s.c_a_lambda[i], s.aic[i], s.tic[i]
            );
        }
        if s.failed > 0 {
            println!("({} replicates failed)", s.failed);
        }
    }
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let config = StudyConfig::load(&args.study)?;
    config.to_spec()?;
    let dir = match (&args.out_dir, config.output_dir()) {
        (Some(d), _) => d.clone(),
        (None, Some(d)) => d.to_path_buf(),
        (None, None) => {
            return Err(Error::Config(vec![
                "no output directory: pass --out-dir or set [output] dir".into(),
            ]))
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = args.threads {
        if t == 0 {
            return Err(Error::InvalidInput("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(t);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
    let outcome = pool.install(|| config.execute(&dir))?;
    print_summary(&outcome.result);
    println!();
    println!("reports written to {}", dir.display());
    Ok(())
}

fn generate(args: &GenerateArgs) -> Result<()> {
    let truth = example_truth(args.example)?;
    let (xs, ys) = generate_dataset(&truth, args.n, args.seed);
    write_xy(&xs, &ys, output(args.out.as_deref())?)
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Fit(a) => fit(a),
        Command::Select(a) => select(a),
        Command::Simulate(a) => simulate(a),
        Command::Generate(a) => generate(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
