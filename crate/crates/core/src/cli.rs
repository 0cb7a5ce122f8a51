//! Command-line harness: training, prediction, gradient checking, synthetic
//! data generation and seeded run matrices with CSV output.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::{self, LabeledDataset, SplitSpec};
use crate::evolution::{self, EvolutionConfig, Mode, RunLog};
use crate::gp_program::{
    self, evaluate, generate, label_for_score, sigmoid, Individual, ProgramTree,
};
use crate::grad_engine::{self, AggGradMode, GradCheckError};
use crate::image_ops::Image;

/// Exit code for a successful command.
pub const EXIT_OK: i32 = 0;
/// Exit code for a failed run, I/O error or breached threshold.
pub const EXIT_FAILURE: i32 = 1;
/// Exit code for invalid arguments or configuration.
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "memegp", version, about = "Memetic GP image classifier")]
pub struct Cli {
    /// Worker threads (defaults to one per core).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evolve a classifier and write its logs and model.
    Train(TrainArgs),
    /// Classify one image with a saved model.
    Predict(PredictArgs),
    /// Compare analytic filter gradients with finite differences.
    Gradcheck(GradcheckArgs),
    /// Write the synthetic bright-quadrant dataset as graymap files.
    Synth(SynthArgs),
    /// Run every (shuffle seed, evolution seed, mode) combination.
    Matrix(MatrixArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Dataset root holding one subdirectory of .pgm files per class.
    #[arg(long, conflicts_with = "synth", required_unless_present = "synth")]
    pub dataset: Option<PathBuf>,
    /// Use the generated bright-quadrant dataset instead of files.
    #[arg(long)]
    pub synth: bool,
    #[arg(long, default_value_t = 50)]
    pub synth_per_class: usize,
    #[arg(long, default_value_t = 16)]
    pub synth_side: usize,
    #[arg(long, default_value_t = 0.05)]
    pub synth_noise: f64,
    #[arg(long, default_value_t = 1)]
    pub synth_seed: u64,
    /// Fraction of each class used for training.
    #[arg(long, default_value_t = 0.5)]
    pub train_frac: f64,
}

#[derive(Debug, Clone, Args)]
pub struct EvoArgs {
    /// Population size (200, or 1024 with --paper-params).
    #[arg(long)]
    pub pop: Option<usize>,
    #[arg(long, default_value_t = 50)]
    pub gens: usize,
    /// Use the full-scale population of 1024.
    #[arg(long)]
    pub paper_params: bool,
    /// SGD epochs per local search application.
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.5)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.10)]
    pub batch_frac: f64,
    /// Individuals tuned per local search application.
    #[arg(long, default_value_t = 25)]
    pub top_k: usize,
    /// Generations between local search applications.
    #[arg(long, default_value_t = 10)]
    pub ls_period: usize,
    /// Epochs of the final polish in lse mode.
    #[arg(long, default_value_t = 100)]
    pub final_epochs: usize,
    /// Backpropagate through aggregation with its exact Jacobian instead
    /// of passing the gradient straight through.
    #[arg(long)]
    pub exact_agg_grad: bool,
    /// Disable copying the best individual into the next generation.
    #[arg(long)]
    pub no_elitism: bool,
}

impl EvoArgs {
    pub fn config(&self, mode: Mode, seed: u64) -> EvolutionConfig {
        let mut cfg = if self.paper_params {
            EvolutionConfig::full_scale()
        } else {
            EvolutionConfig::default()
        };
        if let Some(p) = self.pop {
            cfg.population_size = p;
        }
        cfg.generations = self.gens;
        cfg.mode = mode;
        cfg.seed = seed;
        cfg.elitism = !self.no_elitism;
        let ls = &mut cfg.local_search;
        ls.epochs = self.epochs;
        ls.learning_rate = self.lr;
        ls.batch_fraction = self.batch_frac;
        ls.top_k = self.top_k;
        ls.period = self.ls_period;
        ls.final_epochs = self.final_epochs;
        ls.agg_grad = if self.exact_agg_grad {
            AggGradMode::Exact
        } else {
            AggGradMode::PassThrough
        };
        cfg
    }
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub evo: EvoArgs,
    #[arg(long, default_value = "base")]
    pub mode: Mode,
    /// Evolution seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Seed of the train/test shuffle.
    #[arg(long, default_value_t = 0)]
    pub shuffle_seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    /// Model file written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Graymap image to classify.
    #[arg(long)]
    pub image: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 6)]
    pub max_depth: usize,
    /// Side length of the random input images.
    #[arg(long, default_value_t = 16)]
    pub image_size: usize,
    /// Central finite-difference step.
    #[arg(long, default_value_t = 1e-4)]
    pub step: f64,
    /// Corrupt the analytic gradients to exercise the failure path.
    #[arg(long, hide = true)]
    pub break_grad: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub per_class: usize,
    #[arg(long, default_value_t = 16)]
    pub side: usize,
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct MatrixArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub evo: EvoArgs,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
    pub shuffle_seeds: Vec<u64>,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    pub evo_seeds: Vec<u64>,
    #[arg(long, value_delimiter = ',', default_value = "base,ls,lse")]
    pub modes: Vec<Mode>,
    /// Skip cells whose summary already exists.
    #[arg(long)]
    pub resume: bool,
    #[arg(long)]
    pub out: PathBuf,
}

/// Error carrying the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(m: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: m.into(),
        }
    }

    fn failure(m: impl Into<String>) -> Self {
        Self {
            code: EXIT_FAILURE,
            message: m.into(),
        }
    }
}

impl From<dataset::DatasetError> for CliError {
    fn from(e: dataset::DatasetError) -> Self {
        CliError::failure(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::failure(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::failure(e.to_string())
    }
}

/// Parses `args` (program name first) and runs the command, returning the
/// process exit code.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

pub fn execute(cli: &Cli) -> Result<i32, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(CliError::usage("--jobs must be positive"));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::failure(e.to_string()))?;
    pool.install(|| match &cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Gradcheck(a) => cmd_gradcheck(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Matrix(a) => cmd_matrix(a),
    })
}

fn load_data(d: &DataArgs) -> Result<LabeledDataset, CliError> {
    if !(d.train_frac > 0.0 && d.train_frac < 1.0) {
        return Err(CliError::usage(format!(
            "--train-frac {} outside (0, 1)",
            d.train_frac
        )));
    }
    if d.synth {
        check_synth(d.synth_side, d.synth_noise)?;
        let mut rng = ChaCha8Rng::seed_from_u64(d.synth_seed);
        Ok(dataset::synth_bright_quadrant(
            d.synth_per_class,
            d.synth_side,
            d.synth_noise,
            &mut rng,
        ))
    } else {
        let path = d
            .dataset
            .as_ref()
            .ok_or_else(|| CliError::usage("either --dataset or --synth is required"))?;
        Ok(dataset::load_dir(path)?)
    }
}

fn check_synth(side: usize, noise: f64) -> Result<(), CliError> {
    if side < 8 {
        return Err(CliError::usage(format!("synthetic side {side} below 8")));
    }
    if !(0.0..0.3).contains(&noise) {
        return Err(CliError::usage(format!(
            "synthetic noise {noise} outside [0, 0.3)"
        )));
    }
    Ok(())
}

/// Table-style summary of one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub train_acc: f64,
    pub test_acc: f64,
    pub train_time_m: f64,
    pub test_time_ms: f64,
}

pub const SUMMARY_HEADER: [&str; 4] = ["train_acc", "test_acc", "train_time_m", "test_time_ms"];

impl Summary {
    pub fn from_log(log: &RunLog) -> Self {
        Self {
            train_acc: log.train_accuracy,
            test_acc: log.test_accuracy,
            train_time_m: log.train_time.as_secs_f64() / 60.0,
            test_time_ms: duration_ms(log.test_time_per_image),
        }
    }

    fn values(&self) -> [f64; 4] {
        [
            self.train_acc,
            self.test_acc,
            self.train_time_m,
            self.test_time_ms,
        ]
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let mut rdr = csv::Reader::from_path(path)?;
        let rec = rdr
            .records()
            .next()
            .ok_or_else(|| CliError::failure(format!("{}: no summary row", path.display())))??;
        let num = |i: usize| -> Result<f64, CliError> {
            rec.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| CliError::failure(format!("{}: bad column {i}", path.display())))
        };
        Ok(Self {
            train_acc: num(0)?,
            test_acc: num(1)?,
            train_time_m: num(2)?,
            test_time_ms: num(3)?,
        })
    }
}

fn duration_ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// Writes `run.csv`, `ls.csv`, `best_model.sexp`, `best_model.dot` and,
/// last, `summary.csv` into `dir`.
pub fn write_run_outputs(dir: &Path, best: &Individual, log: &RunLog) -> Result<Summary, CliError> {
    fs::create_dir_all(dir)?;

    let mut w = csv::Writer::from_path(dir.join("run.csv"))?;
    w.write_record([
        "generation",
        "best_fitness",
        "mean_fitness",
        "mean_size",
        "elapsed_ms",
    ])?;
    for r in &log.generations {
        w.write_record([
            r.generation.to_string(),
            r.best_fitness.to_string(),
            r.mean_fitness.to_string(),
            r.mean_size.to_string(),
            format!("{:.3}", r.elapsed_ms),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("ls.csv"))?;
    w.write_record([
        "generation",
        "kind",
        "individuals",
        "epochs",
        "best_before",
        "best_after",
    ])?;
    for e in &log.ls_events {
        w.write_record([
            e.generation.to_string(),
            e.kind.name().to_string(),
            e.individuals.to_string(),
            e.epochs.to_string(),
            e.best_before.to_string(),
            e.best_after.to_string(),
        ])?;
    }
    w.flush()?;

    fs::write(
        dir.join("best_model.sexp"),
        gp_program::serialize(&best.tree) + "\n",
    )?;
    fs::write(dir.join("best_model.dot"), gp_program::to_dot(&best.tree))?;

    let summary = Summary::from_log(log);
    let mut w = csv::Writer::from_path(dir.join("summary.csv"))?;
    w.write_record(SUMMARY_HEADER)?;
    w.write_record(summary.values().map(|v| v.to_string()))?;
    w.flush()?;
    Ok(summary)
}

fn run_experiment(
    ds: &LabeledDataset,
    evo: &EvoArgs,
    train_frac: f64,
    mode: Mode,
    seed: u64,
    shuffle_seed: u64,
    out: &Path,
) -> Result<Summary, CliError> {
    let cfg = evo.config(mode, seed);
    cfg.validate().map_err(|e| CliError::usage(e.to_string()))?;
    let spec = SplitSpec {
        shuffle_seed,
        train_fraction: train_frac,
        stratified: true,
    };
    let (train, test) = dataset::split(ds, &spec)?;
    let (best, log) = evolution::run(&cfg, &train.items, &test.items)
        .map_err(|e| CliError::usage(e.to_string()))?;
    write_run_outputs(out, &best, &log)
}

pub fn cmd_train(a: &TrainArgs) -> Result<i32, CliError> {
    let ds = load_data(&a.data)?;
    info!("dataset {} with {} images", ds.name, ds.len());
    let s = run_experiment(
        &ds,
        &a.evo,
        a.data.train_frac,
        a.mode,
        a.seed,
        a.shuffle_seed,
        &a.out,
    )?;
    println!(
        "train accuracy {:.4}  test accuracy {:.4}  train time {:.3} min  test time {:.4} ms/image",
        s.train_acc, s.test_acc, s.train_time_m, s.test_time_ms
    );
    Ok(EXIT_OK)
}

pub fn cmd_predict(a: &PredictArgs) -> Result<i32, CliError> {
    let text = fs::read_to_string(&a.model)
        .map_err(|e| CliError::failure(format!("{}: {e}", a.model.display())))?;
    let tree = gp_program::deserialize(text.trim())
        .map_err(|e| CliError::failure(format!("{}: {e}", a.model.display())))?;
    let img = dataset::load_pgm(&a.image)?;
    let x = evaluate(&tree, &img).map_err(|e| CliError::failure(e.to_string()))?;
    let y = sigmoid(x);
    println!("class {} score {:.8}", label_for_score(y), y);
    Ok(EXIT_OK)
}

/// Threshold the overall gradient-check error must stay below.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

pub fn cmd_gradcheck(a: &GradcheckArgs) -> Result<i32, CliError> {
    if a.trials == 0 {
        return Err(CliError::usage("--trials must be at least 1"));
    }
    if a.max_depth < gp_program::DEPTH_MIN || a.max_depth > gp_program::DEPTH_MAX {
        return Err(CliError::usage(format!(
            "--max-depth {} out of range",
            a.max_depth
        )));
    }
    if a.step.is_nan() || a.step <= 0.0 {
        return Err(CliError::usage("--step must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let max_attempts = a.trials * 100;
    let (mut done, mut attempts, mut no_conv, mut kinks, mut unevaluable) = (0, 0, 0, 0, 0);
    let mut overall: f64 = 0.0;
    while done < a.trials {
        attempts += 1;
        if attempts > max_attempts {
            return Err(CliError::failure(format!(
                "gave up after {max_attempts} sampled trees"
            )));
        }
        let tree = generate(&mut rng, gp_program::DEPTH_MIN, a.max_depth);
        let img = Image::random(a.image_size, a.image_size, &mut rng);
        let t = if rng.gen_bool(0.5) { 1.0 } else { 0.0 };
        let report = if a.break_grad {
            grad_engine::grad_check_with(&tree, &img, t, a.step, broken_gradients)
        } else {
            grad_engine::grad_check(&tree, &img, t, a.step)
        };
        match report {
            Ok(r) => {
                done += 1;
                overall = overall.max(r.max_rel_error);
                if r.max_rel_error.is_nan() {
                    overall = f64::INFINITY;
                }
                println!(
                    "trial {done:>3}: {:>3} coefficients, max relative error {:.3e}",
                    r.coefficients, r.max_rel_error
                );
            }
            Err(GradCheckError::NoConvolution) => {
                no_conv += 1;
                println!("resampled: tree without a convolve node");
            }
            Err(GradCheckError::KinkCrossed(k)) => {
                kinks += 1;
                println!("resampled: step crosses a kink at coefficient {k}");
            }
            Err(GradCheckError::Eval(e)) => {
                unevaluable += 1;
                println!("resampled: {e}");
            }
        }
    }
    let pass = overall < GRADCHECK_TOLERANCE;
    println!(
        "overall max relative error {overall:.3e} over {done} trials \
         ({no_conv} without convolve, {kinks} at kinks, {unevaluable} unevaluable resampled): {}",
        if pass { "PASS" } else { "FAIL" }
    );
    Ok(if pass { EXIT_OK } else { EXIT_FAILURE })
}

/// Exact gradients with a constant offset on every coefficient.
fn broken_gradients(
    tree: &ProgramTree,
    img: &Image,
    t: f64,
) -> Result<grad_engine::GradientSet, gp_program::EvalError> {
    let mut g = grad_engine::gradients(tree, img, t, AggGradMode::Exact)?;
    for e in &mut g.entries {
        e.grad.iter_mut().flatten().for_each(|v| *v += 1e-3);
    }
    Ok(g)
}

pub fn cmd_synth(a: &SynthArgs) -> Result<i32, CliError> {
    check_synth(a.side, a.noise)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let ds = dataset::synth_bright_quadrant(a.per_class, a.side, a.noise, &mut rng);
    dataset::save_dir(&ds, &a.out)?;
    println!("wrote {} images to {}", ds.len(), a.out.display());
    Ok(EXIT_OK)
}

/// Seeds and modes of a run matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMatrixSpec {
    pub shuffle_seeds: Vec<u64>,
    pub evo_seeds: Vec<u64>,
    pub modes: Vec<Mode>,
}

impl RunMatrixSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.shuffle_seeds.is_empty() || self.evo_seeds.is_empty() || self.modes.is_empty() {
            return Err(
                "run matrix needs at least one shuffle seed, evolution seed and mode".into(),
            );
        }
        Ok(())
    }

    /// Cells ordered by mode, then shuffle seed, then evolution seed.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &mode in &self.modes {
            for &shuffle_seed in &self.shuffle_seeds {
                for &evo_seed in &self.evo_seeds {
                    out.push(Cell {
                        mode,
                        shuffle_seed,
                        evo_seed,
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub mode: Mode,
    pub shuffle_seed: u64,
    pub evo_seed: u64,
}

impl Cell {
    pub fn dir_name(&self) -> String {
        format!(
            "{}-shuffle{}-seed{}",
            self.mode, self.shuffle_seed, self.evo_seed
        )
    }
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn cmd_matrix(a: &MatrixArgs) -> Result<i32, CliError> {
    let spec = RunMatrixSpec {
        shuffle_seeds: a.shuffle_seeds.clone(),
        evo_seeds: a.evo_seeds.clone(),
        modes: a.modes.clone(),
    };
    spec.validate().map_err(CliError::usage)?;
    for &m in &spec.modes {
        a.evo
            .config(m, 0)
            .validate()
            .map_err(|e| CliError::usage(e.to_string()))?;
    }
    let ds = load_data(&a.data)?;
    fs::create_dir_all(&a.out)?;

    let cells = spec.cells();
    let results: Vec<Result<Summary, String>> = cells
        .par_iter()
        .map(|cell| {
            let dir = a.out.join(cell.dir_name());
            let done = dir.join("summary.csv");
            if a.resume && done.exists() {
                info!("skipping completed cell {}", cell.dir_name());
                return Summary::read(&done).map_err(|e| e.message);
            }
            let r = run_experiment(
                &ds,
                &a.evo,
                a.data.train_frac,
                cell.mode,
                cell.evo_seed,
                cell.shuffle_seed,
                &dir,
            )
            .map_err(|e| e.message);
            match &r {
                Ok(s) => info!("{}: test accuracy {:.4}", cell.dir_name(), s.test_acc),
                Err(e) => warn!("{} failed: {e}", cell.dir_name()),
            }
            r
        })
        .collect();

    let mut w = csv::Writer::from_path(a.out.join("matrix.csv"))?;
    w.write_record([
        "kind",
        "mode",
        "shuffle_seed",
        "evo_seed",
        "train_acc",
        "test_acc",
        "train_time_m",
        "test_time_ms",
        "status",
    ])?;
    for (cell, r) in cells.iter().zip(&results) {
        let mut row = vec![
            "run".to_string(),
            cell.mode.to_string(),
            cell.shuffle_seed.to_string(),
            cell.evo_seed.to_string(),
        ];
        match r {
            Ok(s) => {
                row.extend(s.values().iter().map(|v| v.to_string()));
                row.push("ok".into());
            }
            Err(e) => {
                row.extend(std::iter::repeat_n(String::new(), 4));
                row.push(format!("failed: {e}"));
            }
        }
        w.write_record(&row)?;
    }

    let mut failed = 0;
    for &mode in &spec.modes {
        let ok: Vec<Summary> = cells
            .iter()
            .zip(&results)
            .filter(|(c, _)| c.mode == mode)
            .filter_map(|(_, r)| r.as_ref().ok().copied())
            .collect();
        let n_failed = spec.shuffle_seeds.len() * spec.evo_seeds.len() - ok.len();
        failed += n_failed;
        let mut means = vec![
            "mean".to_string(),
            mode.to_string(),
            String::new(),
            String::new(),
        ];
        let mut stds = vec![
            "std".to_string(),
            mode.to_string(),
            String::new(),
            String::new(),
        ];
        for col in 0..4 {
            let xs: Vec<f64> = ok.iter().map(|s| s.values()[col]).collect();
            if xs.is_empty() {
                means.push(String::new());
                stds.push(String::new());
            } else {
                let (m, s) = mean_std(&xs);
                means.push(m.to_string());
                stds.push(s.to_string());
            }
        }
        let status = format!("{} runs, {n_failed} failed", ok.len());
        means.push(status.clone());
        stds.push(status);
        w.write_record(&means)?;
        w.write_record(&stds)?;

        if !ok.is_empty() {
            let col = |i: usize| mean_std(&ok.iter().map(|s| s.values()[i]).collect::<Vec<_>>());
            let (tr, trs) = col(0);
            let (te, tes) = col(1);
            println!(
                "{mode:>4}: train {tr:.4} ± {trs:.4}  test {te:.4} ± {tes:.4}  ({} runs)",
                ok.len()
            );
        }
    }
    w.flush()?;
    println!("wrote {}", a.out.join("matrix.csv").display());
    Ok(if failed == 0 { EXIT_OK } else { EXIT_FAILURE })
}
