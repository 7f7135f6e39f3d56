//! `pvcmc` command-line runner.
//!
//! Exit codes: 0 success, 1 configuration error, 2 runtime failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pvcmc::dataio::{self, make_pairing_mask};
use pvcmc::experiment::{self, DatasetSource, ExperimentConfig, ReportFormat, SyntheticSpec};
use pvcmc::linalg::Matrix;
use pvcmc::{metrics, spectral, trainer};

#[derive(Parser, Debug)]
#[command(name = "pvcmc", version, about = "Partial multi-view clustering sweeps and single runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Paired-fraction sweep with seeded repeats; writes mean±std reports.
    Run(RunArgs),
    /// One training run; dumps Z, view weights, loss history and labels.
    Train(RunArgs),
    /// ACC and NMI of a predicted label file against a reference.
    Eval(EvalArgs),
    /// Write a synthetic Gaussian-mixture dataset with a manifest.
    Synth(SynthArgs),
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    /// JSON file mirroring the experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset manifest; replaces the configured source.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Share of fully observed samples; comma-separated for sweeps.
    #[arg(long, value_delimiter = ',')]
    paired_fraction: Vec<f64>,
    #[arg(long)]
    repeats: Option<usize>,
    /// Base seed; repeat r uses seed + r.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    k_latent: Option<usize>,
    #[arg(long)]
    clusters: Option<usize>,
    #[arg(long)]
    lambda1: Option<f64>,
    #[arg(long)]
    lambda2: Option<f64>,
    #[arg(long)]
    lambda3: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    knn_k: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    epochs_step1: Option<usize>,
    #[arg(long)]
    epochs_step3: Option<usize>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// csv, markdown, or both.
    #[arg(long, default_value = "both")]
    format: String,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Reference labels, one integer per line.
    truth: PathBuf,
    /// Predicted labels, one integer per line.
    predicted: PathBuf,
    /// text or json.
    #[arg(long, default_value = "text")]
    format: String,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 3)]
    clusters: usize,
    #[arg(long, default_value_t = 150)]
    n: usize,
    /// Feature width of each view.
    #[arg(long, value_delimiter = ',', default_values_t = [10, 12])]
    dims: Vec<usize>,
    #[arg(long, default_value_t = 10.0)]
    separation: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "synthetic")]
    out_dir: PathBuf,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl Failure {
    fn runtime(e: impl std::fmt::Display) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Run(a) => run(&a),
        Command::Train(a) => train(&a),
        Command::Eval(a) => eval(&a),
        Command::Synth(a) => synth(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn build_config(a: &RunArgs) -> Result<ExperimentConfig, Failure> {
    let mut c = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?;
            ExperimentConfig::from_json(&text).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(m) = &a.manifest {
        c.source = DatasetSource::Manifest(m.clone());
    }
    if !a.paired_fraction.is_empty() {
        c.paired_fractions = a.paired_fraction.clone();
    }
    let hp = &mut c.train.hp;
    macro_rules! set {
        ($field:expr, $value:expr) => {
            if let Some(v) = $value {
                $field = v;
            }
        };
    }
    set!(hp.latent_dim, a.k_latent);
    set!(hp.lambda1, a.lambda1);
    set!(hp.lambda2, a.lambda2);
    set!(hp.lambda3, a.lambda3);
    set!(hp.alpha, a.alpha);
    set!(hp.tau, a.tau);
    set!(c.repeats, a.repeats);
    set!(c.base_seed, a.seed);
    set!(c.clusters, a.clusters);
    set!(c.jobs, a.jobs);
    set!(c.train.knn_k, a.knn_k);
    set!(c.train.learning_rate, a.learning_rate);
    set!(c.train.epochs_step1, a.epochs_step1);
    set!(c.train.epochs_step3, a.epochs_step3);
    c.validate().map_err(|e| Failure::Config(e.to_string()))?;
    Ok(c)
}

fn report_formats(s: &str) -> Result<Vec<ReportFormat>, Failure> {
    if s.eq_ignore_ascii_case("both") {
        return Ok(vec![ReportFormat::Csv, ReportFormat::Markdown]);
    }
    s.parse::<ReportFormat>().map(|f| vec![f]).map_err(|e| Failure::Config(e.to_string()))
}

fn run(a: &RunArgs) -> Outcome {
    let config = build_config(a)?;
    let formats = report_formats(&a.format)?;
    let report = experiment::run_experiment(&config).map_err(Failure::runtime)?;
    for f in &formats {
        let path = a.out_dir.join(format!("report.{}", f.extension()));
        experiment::emit_report(&report, *f, &path).map_err(Failure::runtime)?;
        println!("wrote {}", path.display());
    }
    let md = experiment::render_report(&report, ReportFormat::Markdown).map_err(Failure::runtime)?;
    let md = String::from_utf8_lossy(&md);
    for line in md.lines().take_while(|l| !l.starts_with("### Metadata")) {
        println!("{line}");
    }
    let failed = report.cells.iter().filter(|c| c.failure.is_some()).count();
    if failed > 0 {
        return Err(Failure::Runtime(format!("{failed} of {} cells failed", report.cells.len())));
    }
    Ok(())
}

fn write_matrix(m: &Matrix, path: &Path) -> pvcmc::Result<()> {
    let mut f = fs::File::create(path)?;
    for i in 0..m.rows {
        let row: Vec<String> = m.row(i).iter().map(|x| format!("{x:?}")).collect();
        writeln!(f, "{}", row.join(","))?;
    }
    Ok(())
}

fn train(a: &RunArgs) -> Outcome {
    let config = build_config(a)?;
    let [fraction] = config.paired_fractions[..] else {
        return Err(Failure::Config("train needs exactly one paired fraction (--paired-fraction)".into()));
    };
    let out = &a.out_dir;
    let run = || -> pvcmc::Result<()> {
        fs::create_dir_all(out)?;
        let dataset = config.load_dataset()?;
        let train_config = config.train_config(0);
        let mask = make_pairing_mask(dataset.n_samples(), fraction, dataset.n_views(), config.base_seed)?;
        let result = trainer::train(&dataset, &mask, &train_config)?;
        write_matrix(&result.z, &out.join("z.csv"))?;
        result.write_run_log(&out.join("history.csv"))?;
        fs::write(out.join("checkpoint.json"), result.to_json()?)?;
        fs::write(
            out.join("weights.json"),
            serde_json::to_string_pretty(&serde_json::json!({
                "weights": result.weights.0,
                "metadata": result.metadata,
            }))?,
        )?;
        if let Some(imp) = &result.imputation {
            imp.write_neighbors_csv(&out.join("neighbors.csv"))?;
        }
        let s = spectral::affinity_from_z(&result.z);
        let sc = spectral::spectral_cluster_detailed(&s, config.clusters, train_config.seed, &Default::default())?;
        sc.write_diagnostics(&out.join("eigenvalues.csv"), &out.join("embedding.csv"))?;
        let labels: String = sc.labels.labels.iter().map(|l| format!("{l}\n")).collect();
        fs::write(out.join("labels.csv"), labels)?;
        println!("paired fraction {fraction}, {} epochs, weights {:?}", result.loss_history.len(), result.weights.0);
        if let Some(y) = &dataset.labels {
            let acc = metrics::acc(y, &sc.labels.labels)?;
            let nmi = metrics::nmi(y, &sc.labels.labels)?;
            println!("ACC {acc:.4} NMI {nmi:.4}");
        }
        println!("wrote {}", out.display());
        Ok(())
    };
    run().map_err(Failure::runtime)
}

fn eval(a: &EvalArgs) -> Outcome {
    let json = match a.format.as_str() {
        "json" => true,
        "text" => false,
        other => return Err(Failure::Config(format!("unknown format {other:?}; use text or json"))),
    };
    let y = dataio::read_labels(&a.truth, None).map_err(Failure::runtime)?;
    let l = dataio::read_labels(&a.predicted, None).map_err(Failure::runtime)?;
    let acc = metrics::acc(&y, &l).map_err(Failure::runtime)?;
    let nmi = metrics::nmi(&y, &l).map_err(Failure::runtime)?;
    if json {
        println!("{}", serde_json::json!({ "acc": acc, "nmi": nmi, "n": y.len() }));
    } else {
        println!("ACC {acc:.4}\nNMI {nmi:.4}");
    }
    Ok(())
}

fn synth(a: &SynthArgs) -> Outcome {
    let spec = SyntheticSpec { clusters: a.clusters, n: a.n, dims: a.dims.clone(), separation: a.separation, seed: a.seed };
    let ds = dataio::generate_synthetic(spec.clusters, spec.n, &spec.dims, spec.separation, spec.seed)
        .map_err(|e| Failure::Config(e.to_string()))?;
    let manifest = dataio::save_dataset(&ds, &a.out_dir).map_err(Failure::runtime)?;
    println!("wrote {}", manifest.display());
    Ok(())
}
