//! Command-line surface tying the pipeline together.
//!
//! Five subcommands cover the whole workflow:
//!
//! * `generate` — simulate frames for every (channel, SNR, class) cell and
//!   write a dataset file,
//! * `train`    — fit the classifier on a dataset, writing weights plus a
//!   training-history CSV,
//! * `eval`     — score trained weights on the held-out test split and emit
//!   a detection-probability CSV (optionally a baseline CSV on the same
//!   records),
//! * `classify` — run one LLR frame file through the full pipeline,
//! * `macs`     — print the multiply count of the configured network.
//!
//! Every artifact-producing command records a manifest (configuration
//! digest and seeds, as `#` comment lines in CSV outputs, stdout lines for
//! binary outputs) so any result can be traced to the exact configuration
//! and seed that produced it. Re-running a command on identical inputs
//! yields byte-identical outputs.

use std::io::Read;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use crate::channel::ChannelModel;
use crate::codebook::{CandidateSet, Scheme};
use crate::config::RunConfig;
use crate::dataset::{self, Dataset, SplitSpec};
use crate::features::{baseline_from_tensor, candidate_evidence, reshape_stack};
use crate::nn::{self, DataView, Network};
use crate::rng;
use crate::{Error, Result};

/// First-level streams carved off the master seed by the command layer.
/// (Dataset generation consumes the master seed itself; training-internal
/// streams are derived from it inside `nn::train`.)
const STREAM_NETWORK: u64 = 3;
const STREAM_SPLIT: u64 = 4;

/// Rows scored per forward pass during evaluation.
const EVAL_BATCH: usize = 512;

// ---------------------------------------------------------------------------
// Detection metrics
// ---------------------------------------------------------------------------

/// Detection probability of one class: the fraction of frames truly of
/// `class` that were also recognised as `class`.
pub fn probability_of_detection(
    predictions: &[usize],
    labels: &[usize],
    class: usize,
) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::argument(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let n_total = labels.iter().filter(|&&l| l == class).count();
    if n_total == 0 {
        return Err(Error::metric(format!(
            "class {class} does not occur in the labels"
        )));
    }
    let n_true = predictions
        .iter()
        .zip(labels)
        .filter(|&(&p, &l)| l == class && p == class)
        .count();
    Ok(n_true as f64 / n_total as f64)
}

/// Detection counts for one (SNR, class) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionCell {
    pub snr_db: f32,
    pub class: usize,
    /// Frames of this class recognised correctly.
    pub n_true: usize,
    /// Frames of this class in total.
    pub n_total: usize,
}

impl DetectionCell {
    pub fn p_detect(&self) -> f64 {
        self.n_true as f64 / self.n_total as f64
    }
}

/// Per-(SNR, class) detection counts, ordered by SNR then class.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionReport {
    pub cells: Vec<DetectionCell>,
}

impl DetectionReport {
    /// Tallies predictions into per-(SNR, class) cells. The three slices
    /// describe the same frames; only (SNR, class) pairs that actually occur
    /// produce cells.
    pub fn from_predictions(
        predictions: &[usize],
        labels: &[u16],
        snrs_db: &[f32],
    ) -> Result<Self> {
        if predictions.len() != labels.len() || labels.len() != snrs_db.len() {
            return Err(Error::argument(format!(
                "prediction/label/SNR lengths differ: {}/{}/{}",
                predictions.len(),
                labels.len(),
                snrs_db.len()
            )));
        }
        if predictions.is_empty() {
            return Err(Error::metric(
                "cannot build a detection report from zero frames",
            ));
        }
        let mut snr_points = snrs_db.to_vec();
        snr_points.sort_by(f32::total_cmp);
        snr_points.dedup();
        let classes = labels.iter().map(|&l| l as usize).max().unwrap() + 1;

        let mut cells = Vec::new();
        for &snr in &snr_points {
            for class in 0..classes {
                let mut n_true = 0;
                let mut n_total = 0;
                for ((&p, &l), &s) in predictions.iter().zip(labels).zip(snrs_db) {
                    if s == snr && l as usize == class {
                        n_total += 1;
                        if p == class {
                            n_true += 1;
                        }
                    }
                }
                if n_total > 0 {
                    cells.push(DetectionCell { snr_db: snr, class, n_true, n_total });
                }
            }
        }
        Ok(DetectionReport { cells })
    }

    /// Distinct SNR points, ascending.
    pub fn snr_points(&self) -> Vec<f32> {
        let mut points: Vec<f32> = self.cells.iter().map(|c| c.snr_db).collect();
        points.dedup();
        points
    }

    /// Detection probability of one cell, if it exists.
    pub fn detection(&self, snr_db: f32, class: usize) -> Option<f64> {
        self.cells
            .iter()
            .find(|c| c.snr_db == snr_db && c.class == class)
            .map(DetectionCell::p_detect)
    }

    /// Unweighted mean of the per-class detection probabilities at one SNR.
    pub fn mean_detection(&self, snr_db: f32) -> Option<f64> {
        let per_class: Vec<f64> = self
            .cells
            .iter()
            .filter(|c| c.snr_db == snr_db)
            .map(DetectionCell::p_detect)
            .collect();
        if per_class.is_empty() {
            return None;
        }
        Some(per_class.iter().sum::<f64>() / per_class.len() as f64)
    }

    /// Pooled `(n_true, n_total)` over all classes at one SNR.
    pub fn aggregate(&self, snr_db: f32) -> (usize, usize) {
        self.cells
            .iter()
            .filter(|c| c.snr_db == snr_db)
            .fold((0, 0), |(t, n), c| (t + c.n_true, n + c.n_total))
    }
}

// ---------------------------------------------------------------------------
// CSV and manifest rendering
// ---------------------------------------------------------------------------

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// SHA-256 of a file's bytes, streamed so gigabyte datasets never load twice.
fn file_sha256_hex(path: &Path) -> Result<String> {
    let file = std::fs::File::open(path);
    let file = with_path(file.map_err(Error::from), "cannot read", path)?;
    let mut reader = std::io::BufReader::new(file);
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 20];
    loop {
        let n = with_path(
            reader.read(&mut buf).map_err(Error::from),
            "cannot read",
            path,
        )?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex(&hasher.finalize()))
}

/// `#`-comment manifest block, one `key = value` per line.
fn manifest_header(command: &str, entries: &[(&str, String)]) -> String {
    let mut out = format!("# coderec {command}\n");
    for (key, value) in entries {
        out.push_str(&format!("# {key} = {value}\n"));
    }
    out
}

/// Renders a detection report as CSV: one row per (SNR, class) plus a
/// pooled `mean` row per SNR. Rows are sorted by SNR then class, so output
/// is byte-reproducible.
fn eval_csv(
    report: &DetectionReport,
    scheme: Scheme,
    channel: ChannelModel,
    class_labels: &[&str],
    manifest: &str,
) -> String {
    let mut out = String::from(manifest);
    out.push_str("scheme,channel,snr_db,class_label,n_true,n_total,p_detect\n");
    for snr in report.snr_points() {
        for cell in report.cells.iter().filter(|c| c.snr_db == snr) {
            let label = class_labels.get(cell.class).copied().unwrap_or("?");
            out.push_str(&format!(
                "{},{},{},{},{},{},{:.6}\n",
                scheme.as_str(),
                channel.as_str(),
                snr,
                label,
                cell.n_true,
                cell.n_total,
                cell.p_detect()
            ));
        }
        let (n_true, n_total) = report.aggregate(snr);
        out.push_str(&format!(
            "{},{},{},mean,{},{},{:.6}\n",
            scheme.as_str(),
            channel.as_str(),
            snr,
            n_true,
            n_total,
            n_true as f64 / n_total as f64
        ));
    }
    out
}

fn history_csv(history: &[nn::EpochStats], manifest: &str) -> String {
    let mut out = String::from(manifest);
    out.push_str("epoch,train_loss,train_acc,val_loss,val_acc\n");
    for e in history {
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{:.6}\n",
            e.epoch, e.train_loss, e.train_acc, e.val_loss, e.val_acc
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// Small file helpers (attach the path to IO errors)
// ---------------------------------------------------------------------------

fn with_path<T>(result: Result<T>, action: &str, path: &Path) -> Result<T> {
    result.map_err(|e| match e {
        Error::Io(io) => Error::Io(std::io::Error::new(
            io.kind(),
            format!("{action} {}: {io}", path.display()),
        )),
        other => other,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    with_path(
        std::fs::write(path, text).map_err(Error::from),
        "cannot write",
        path,
    )
}

/// Reads a whitespace-separated LLR frame file; `#` starts a comment.
fn read_llr_file(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::format(format!("cannot read {}: {e}", path.display())))?;
    let mut llrs = Vec::new();
    for raw in text.lines() {
        let line = raw.split('#').next().unwrap_or("");
        for token in line.split_whitespace() {
            let value: f64 = token.parse().map_err(|_| {
                Error::format(format!("frame file: cannot parse `{token}` as an LLR"))
            })?;
            if !value.is_finite() {
                return Err(Error::format(format!(
                    "frame file: LLR values must be finite, got `{token}`"
                )));
            }
            llrs.push(value);
        }
    }
    if llrs.is_empty() {
        return Err(Error::format("frame file contains no values"));
    }
    Ok(llrs)
}

// ---------------------------------------------------------------------------
// Argument grammar
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "coderec",
    version,
    about = "Blind recognition of channel-code parameters from soft frames"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate frames for every (channel, SNR, class) cell; write a dataset.
    Generate(GenerateArgs),
    /// Train the classifier on a dataset file.
    Train(TrainArgs),
    /// Score trained weights on the test split; write a detection CSV.
    Eval(EvalArgs),
    /// Classify a single LLR frame file.
    Classify(ClassifyArgs),
    /// Print the multiply count of the configured network.
    Macs(MacsArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Output dataset path.
    #[arg(long)]
    out: PathBuf,
    /// Run configuration file (flat `key = value`).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed for frame simulation.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Frames per (channel, SNR, class) cell; overrides the config file.
    #[arg(long)]
    frames_per_cell: Option<usize>,
    /// Candidate family (ldpc|conv|turbo|polar); overrides the config file.
    #[arg(long)]
    scheme: Option<String>,
    /// Channel model (awgn|rayleigh1|rayleigh2); overrides the config file.
    #[arg(long)]
    channel: Option<String>,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset file produced by `generate`.
    data: PathBuf,
    /// Output weight file; the training history lands next to it as
    /// `<out stem>.history.csv`.
    #[arg(long)]
    out: PathBuf,
    /// Run configuration file (flat `key = value`).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed for the split, weight init, shuffling and dropout.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EvalArgs {
    /// Dataset file produced by `generate`.
    data: PathBuf,
    /// Weight file produced by `train`.
    model: PathBuf,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Run configuration file (flat `key = value`).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; must match the seed `train` ran with so the test split
    /// is the same.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Candidate family (ldpc|conv|turbo|polar); overrides the config file.
    #[arg(long)]
    scheme: Option<String>,
    /// Also score the max-average baseline on the same test records,
    /// writing `<out stem>.baseline.csv`.
    #[arg(long)]
    baseline: bool,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Text file of whitespace-separated channel LLRs (`#` comments).
    frame: PathBuf,
    /// Weight file produced by `train`.
    model: PathBuf,
    /// Run configuration file (flat `key = value`).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Candidate family (ldpc|conv|turbo|polar); overrides the config file.
    #[arg(long)]
    scheme: Option<String>,
}

#[derive(Args)]
struct MacsArgs {
    /// Run configuration file (flat `key = value`).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Candidate family (ldpc|conv|turbo|polar); overrides the config file.
    #[arg(long)]
    scheme: Option<String>,
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

/// Parses `std::env::args` and runs the selected command.
pub fn run() -> Result<()> {
    dispatch(Cli::parse())
}

/// Like [`run`], but on an explicit argument list (first entry is the
/// program name). Lets tests drive the CLI in-process.
pub fn run_from<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    dispatch(Cli::parse_from(args))
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Classify(args) => cmd_classify(args),
        Command::Macs(args) => cmd_macs(args),
    }
}

fn resolve(
    config_path: &Option<PathBuf>,
    scheme: Option<&str>,
    channel: Option<&str>,
    frames_per_cell: Option<usize>,
) -> Result<RunConfig> {
    let mut config = match config_path {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(s) = scheme {
        config.scheme = Scheme::parse(s)?;
    }
    if let Some(c) = channel {
        config.channel.model = ChannelModel::parse(c)?;
    }
    if let Some(f) = frames_per_cell {
        if f == 0 {
            return Err(Error::config("frames per cell must be positive"));
        }
        config.frames_per_cell = f;
    }
    Ok(config)
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    with_path(dataset::load(path), "cannot read", path)
}

/// The split specification a run uses: configured fractions, seed carved
/// from the master seed.
fn split_spec(config: &RunConfig, seed: u64) -> SplitSpec {
    SplitSpec {
        seed: rng::derive_seed(seed, STREAM_SPLIT),
        ..config.split
    }
}

/// The single channel model a dataset was generated under.
fn dataset_channel(data: &Dataset) -> Result<ChannelModel> {
    let Some(&first) = data.channel_tags.first() else {
        return Err(Error::argument("dataset contains no records"));
    };
    if data.channel_tags.iter().any(|&t| t != first) {
        return Err(Error::argument(
            "dataset mixes channel models; evaluate one channel at a time",
        ));
    }
    ChannelModel::from_tag(first)
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

fn cmd_generate(args: GenerateArgs) -> Result<()> {
    let config = resolve(
        &args.config,
        args.scheme.as_deref(),
        args.channel.as_deref(),
        args.frames_per_cell,
    )?;
    let set = CandidateSet::for_scheme(config.scheme)?;
    let grid = config.resolved_snr_grid();
    let data = dataset::generate(
        &set,
        std::slice::from_ref(&config.channel),
        &grid,
        config.frames_per_cell,
        args.seed,
        &config.decoder,
        config.evidence,
    )?;
    with_path(dataset::save(&data, &args.out), "cannot write", &args.out)?;

    let manifest = manifest_header(
        "generate",
        &[
            ("config_digest", config.digest_hex()),
            ("seed", args.seed.to_string()),
            ("records", data.len().to_string()),
            ("set_digest", hex(&data.digest)),
            ("file_sha256", file_sha256_hex(&args.out)?),
        ],
    );
    print!("{manifest}");
    println!(
        "wrote {} ({} records, {}x{}x{} tensors)",
        args.out.display(),
        data.len(),
        data.side,
        data.side,
        data.channels
    );
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let config = resolve(&args.config, None, None, None)?;
    let data = load_dataset(&args.data)?;
    let data_sha = file_sha256_hex(&args.data)?;

    // Every candidate contributes one tensor channel and one class.
    let model = config.model_config(data.side, data.channels, data.channels)?;
    let (train_idx, val_idx, _) = dataset::split(&data, &split_spec(&config, args.seed))?;
    let view = DataView {
        features: &data.tensors,
        feature_len: data.tensor_len(),
        labels: &data.labels,
    };

    let mut train_config = config.train.clone();
    train_config.seed = args.seed;
    let mut net =
        Network::<f32>::new(&model, rng::derive_seed(args.seed, STREAM_NETWORK))?;
    let outcome = nn::train_with_progress(
        &mut net,
        view,
        &train_idx,
        &val_idx,
        &train_config,
        &mut |e| {
            eprintln!(
                "epoch {}/{}: train_loss={:.4} train_acc={:.3} val_loss={:.4} val_acc={:.3}",
                e.epoch,
                train_config.max_epochs,
                e.train_loss,
                e.train_acc,
                e.val_loss,
                e.val_acc
            );
        },
    )?;

    with_path(
        nn::save_network(&args.out, &net, args.seed, &data_sha),
        "cannot write",
        &args.out,
    )?;
    let manifest = manifest_header(
        "train",
        &[
            ("config_digest", config.digest_hex()),
            ("seed", args.seed.to_string()),
            ("data_sha256", data_sha),
        ],
    );
    let history_path = args.out.with_extension("history.csv");
    write_text(&history_path, &history_csv(&outcome.history, &manifest))?;

    print!("{manifest}");
    println!(
        "best epoch {} (val_loss {:.6}, val_acc {:.4})",
        outcome.best_epoch, outcome.best_val_loss, outcome.best_val_acc
    );
    println!("wrote {}", args.out.display());
    println!("wrote {}", history_path.display());
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let config = resolve(&args.config, args.scheme.as_deref(), None, None)?;
    let set = CandidateSet::for_scheme(config.scheme)?;
    let data = load_dataset(&args.data)?;
    if data.digest != set.digest() {
        return Err(Error::argument(format!(
            "dataset was generated for a different candidate set than `{}` \
             (wrong --scheme?)",
            config.scheme.as_str()
        )));
    }
    let channel = dataset_channel(&data)?;
    let data_sha = file_sha256_hex(&args.data)?;

    let (mut net, weight_manifest) =
        with_path(nn::load_network(&args.model), "cannot read", &args.model)?;
    if net.input_len() != data.tensor_len() || net.classes() != set.len() {
        return Err(Error::argument(format!(
            "weights expect {} inputs / {} classes but the dataset provides {} / {}",
            net.input_len(),
            net.classes(),
            data.tensor_len(),
            set.len()
        )));
    }

    let (_, _, test_idx) = dataset::split(&data, &split_spec(&config, args.seed))?;
    let feature_len = data.tensor_len();
    let mut predictions = Vec::with_capacity(test_idx.len());
    let mut buf = Vec::with_capacity(EVAL_BATCH * feature_len);
    for chunk in test_idx.chunks(EVAL_BATCH) {
        buf.clear();
        for &i in chunk {
            buf.extend_from_slice(data.tensor(i));
        }
        predictions.extend(net.predict_classes(&buf, chunk.len())?);
    }
    let labels: Vec<u16> = test_idx.iter().map(|&i| data.labels[i]).collect();
    let snrs: Vec<f32> = test_idx.iter().map(|&i| data.snrs_db[i]).collect();
    let report = DetectionReport::from_predictions(&predictions, &labels, &snrs)?;

    let manifest_entries = |command: &str| {
        manifest_header(
            command,
            &[
                ("config_digest", config.digest_hex()),
                ("seed", args.seed.to_string()),
                ("data_sha256", data_sha.clone()),
                (
                    "weights_training_seed",
                    weight_manifest.training_seed.to_string(),
                ),
                (
                    "weights_dataset_digest",
                    weight_manifest.dataset_digest.clone(),
                ),
            ],
        )
    };
    let class_labels = set.labels();
    let csv = eval_csv(
        &report,
        config.scheme,
        channel,
        &class_labels,
        &manifest_entries("eval"),
    );
    write_text(&args.out, &csv)?;
    println!("wrote {}", args.out.display());

    if args.baseline {
        let lengths = set.codeword_lens();
        let mut base_predictions = Vec::with_capacity(test_idx.len());
        for &i in &test_idx {
            base_predictions.push(baseline_from_tensor(&data.feature_tensor(i), &lengths)?);
        }
        let base_report =
            DetectionReport::from_predictions(&base_predictions, &labels, &snrs)?;
        let base_csv = eval_csv(
            &base_report,
            config.scheme,
            channel,
            &class_labels,
            &manifest_entries("eval --baseline"),
        );
        let base_path = args.out.with_extension("baseline.csv");
        write_text(&base_path, &base_csv)?;
        println!("wrote {}", base_path.display());
    }

    for snr in report.snr_points() {
        // Mean over classes; cells are equally sized by construction.
        let mean = report.mean_detection(snr).unwrap_or(0.0);
        println!("snr {snr:>5} dB: mean detection {mean:.4}");
    }
    Ok(())
}

fn cmd_classify(args: ClassifyArgs) -> Result<()> {
    let config = resolve(&args.config, args.scheme.as_deref(), None, None)?;
    let set = CandidateSet::for_scheme(config.scheme)?;
    let llrs = read_llr_file(&args.frame)?;
    let (mut net, _) =
        with_path(nn::load_network(&args.model), "cannot read", &args.model)?;

    let bank = candidate_evidence(&llrs, &set, &config.decoder, config.evidence)?;
    let tensor = reshape_stack(&bank);
    if net.input_len() != tensor.data().len() {
        return Err(Error::argument(format!(
            "weights expect {} input values but the frame tensor has {}",
            net.input_len(),
            tensor.data().len()
        )));
    }
    let probs = net.predict_probs(tensor.data(), 1)?;
    let best = probs
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);

    println!("predicted_class = {best}");
    println!("predicted_label = {}", set.candidates[best].label);
    for (candidate, p) in set.candidates.iter().zip(&probs) {
        println!("p[{}] = {:.6}", candidate.label, p);
    }
    Ok(())
}

fn cmd_macs(args: MacsArgs) -> Result<()> {
    let config = resolve(&args.config, args.scheme.as_deref(), None, None)?;
    let set = CandidateSet::for_scheme(config.scheme)?;
    let model = config.model_config(set.tensor_side, set.len(), set.len())?;
    println!("macs = {}", nn::count_macs(&model)?);
    Ok(())
}

// ---------------------------------------------------------------------------
