use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use csi_har_cli::{cmd_eval, cmd_predict, cmd_synth, cmd_train, load_model, CliError, PredictInput, RunConfig};
use csi_har_core::dataset::SynthConfig;
use csi_har_core::fusion::Topology;
use csi_har_core::kernel_bank::kernel_count;
use csi_har_core::ridge::SolverChoice;

#[derive(Parser)]
#[command(name = "csi-har", version, about = "Activity and orientation recognition from WiFi CSI amplitudes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic multi-AP dataset.
    Synth(SynthArgs),
    /// Train one model on the training split and save it.
    Train {
        #[command(flatten)]
        run: RunArgs,
        /// Model archive to write.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the multi-run evaluation protocol and write reports.
    Eval {
        #[command(flatten)]
        run: RunArgs,
        /// Directory for report.txt, report.json and predictions.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Predict activity and orientation for one sample.
    Predict {
        /// Model archive.
        #[arg(long)]
        model: PathBuf,
        /// Amplitude file per AP as AP=PATH; a bare PATH is accepted for
        /// single-AP models.
        inputs: Vec<String>,
        /// Print the configuration stored in the archive and exit.
        #[arg(long)]
        show_config: bool,
        /// Print the result as JSON.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Start from the 52 x 256, 5-AP, 6-user, 20-repetition shape (the
    /// default); the flags below override single fields.
    #[arg(long)]
    paper_shape: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    subcarriers: Option<usize>,
    #[arg(long)]
    length: Option<usize>,
    #[arg(long)]
    aps: Option<usize>,
    #[arg(long)]
    users: Option<usize>,
    #[arg(long)]
    samples_per_cell: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration to start from; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset directory or manifest.
    #[arg(long)]
    data: Option<PathBuf>,
    /// sap, cmap or amap; eval accepts a comma-separated list.
    #[arg(long, value_delimiter = ',')]
    topology: Vec<Topology>,
    /// Access point ids; all APs in the dataset when omitted.
    #[arg(long, value_delimiter = ',')]
    ap: Vec<u32>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    train_fraction: Option<f64>,
    /// Keep users disjoint between training and test sets.
    #[arg(long)]
    cross_user: bool,
    #[arg(long)]
    kernel_length: Option<usize>,
    #[arg(long)]
    max_dilations: Option<usize>,
    /// Features per AP; a multiple of the kernel count.
    #[arg(long)]
    features: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    alphas: Vec<f64>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long, value_parser = parse_solver)]
    solver: Option<SolverChoice>,
    /// Evaluate runs concurrently (uses more memory).
    #[arg(long)]
    parallel_runs: bool,
    /// Print the resolved configuration as JSON and exit.
    #[arg(long)]
    show_config: bool,
}

fn parse_solver(s: &str) -> Result<SolverChoice, String> {
    match s {
        "auto" => Ok(SolverChoice::Auto),
        "primal" => Ok(SolverChoice::Primal),
        "dual" => Ok(SolverChoice::Dual),
        other => Err(format!("unknown solver {other:?} (auto, primal, dual)")),
    }
}

impl RunArgs {
    fn resolve(self) -> Result<(RunConfig, bool), CliError> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?
            }
            None => RunConfig::default(),
        };
        if let Some(d) = self.data {
            cfg.data = d;
        }
        if !self.topology.is_empty() {
            cfg.topologies = self.topology;
        }
        if !self.ap.is_empty() {
            cfg.aps = self.ap;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(r) = self.runs {
            cfg.runs = r;
        }
        if let Some(f) = self.train_fraction {
            cfg.train_fraction = f;
        }
        cfg.cross_user |= self.cross_user;
        if let Some(len) = self.kernel_length {
            cfg.bank.kernel_length = len;
            cfg.bank.num_kernels = kernel_count(len).unwrap_or(0);
        }
        if let Some(m) = self.max_dilations {
            cfg.bank.max_dilations_per_kernel = m;
        }
        if let Some(f) = self.features {
            cfg.bank.total_features = f;
        }
        if !self.alphas.is_empty() {
            cfg.alphas = self.alphas;
        }
        if let Some(k) = self.folds {
            cfg.folds = k;
        }
        if let Some(s) = self.solver {
            cfg.solver = s;
        }
        cfg.parallel_runs |= self.parallel_runs;
        Ok((cfg, self.show_config))
    }
}

fn print_config(cfg: &RunConfig) {
    println!("{}", serde_json::to_string_pretty(cfg).expect("configs always serialize"));
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth(a) => {
            let base = SynthConfig::full_shape(0);
            let cfg = SynthConfig {
                subcarriers: a.subcarriers.unwrap_or(base.subcarriers),
                length: a.length.unwrap_or(base.length),
                num_aps: a.aps.unwrap_or(base.num_aps),
                users: a.users.unwrap_or(base.users),
                samples_per_cell: a.samples_per_cell.unwrap_or(base.samples_per_cell),
                noise_std: a.noise.unwrap_or(base.noise_std),
                seed: a.seed.unwrap_or(base.seed),
            };
            let manifest = cmd_synth(&cfg, &a.out)?;
            println!(
                "wrote {} samples x {} APs to {}",
                cfg.total_samples(),
                cfg.num_aps,
                manifest.display()
            );
        }
        Command::Train { run, out } => {
            let (mut cfg, show) = run.resolve()?;
            if out.is_some() {
                cfg.model_out = out;
            }
            if show {
                print_config(&cfg);
                return Ok(());
            }
            let started = Instant::now();
            let archive = cmd_train(&cfg)?;
            let m = &archive.model;
            println!("trained {} over APs {:?} in {:.1?}", m.topology, m.ap_ids, started.elapsed());
            for (i, (a, o)) in m.activity_heads.iter().zip(&m.orientation_heads).enumerate() {
                println!(
                    "  head {}: {} features, alpha activity {} (cv {:.3}), orientation {} (cv {:.3})",
                    i + 1,
                    a.num_features(),
                    a.alpha,
                    a.cv_accuracy.iter().copied().fold(f64::MIN, f64::max),
                    o.alpha,
                    o.cv_accuracy.iter().copied().fold(f64::MIN, f64::max),
                );
            }
            if let Some(p) = &cfg.model_out {
                println!("model written to {}", p.display());
            }
        }
        Command::Eval { run, out } => {
            let (mut cfg, show) = run.resolve()?;
            if out.is_some() {
                cfg.report_dir = out;
            }
            if show {
                print_config(&cfg);
                return Ok(());
            }
            let started = Instant::now();
            let outcome = cmd_eval(&cfg)?;
            print!("{}", outcome.text);
            for f in &outcome.files {
                eprintln!("wrote {}", f.display());
            }
            eprintln!("evaluation took {:.1?}", started.elapsed());
        }
        Command::Predict {
            model,
            inputs,
            show_config,
            json,
        } => {
            let archive = load_model(&model)?;
            if show_config {
                print_config(&archive.config);
                return Ok(());
            }
            if inputs.is_empty() {
                return Err(CliError::Usage("no input files given".into()));
            }
            let inputs: Vec<PredictInput> = inputs.iter().map(|s| s.parse()).collect::<Result<_, _>>()?;
            let out = cmd_predict(&archive, &inputs)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&out).expect("predictions always serialize"));
            } else {
                println!("activity: {}", out.activity);
                println!("orientation: {}", out.orientation);
                for h in &out.heads {
                    let cells: Vec<String> = h
                        .classes
                        .iter()
                        .zip(&h.scores)
                        .map(|(c, s)| format!("{c}={s:.4}"))
                        .collect();
                    println!("  {} head, APs {:?}: {}", h.task, h.ap_ids, cells.join(" "));
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code())
        }
    }
}
