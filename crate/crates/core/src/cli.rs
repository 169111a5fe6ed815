//! The `astsumm` command line. [`run`] returns the process exit code.

use std::ffi::OsString;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::autodiff::TensorError;
use crate::certify::{gradcheck_suite, suite_table};
use crate::data::{desk_corpus, encode_example, read_corpus, DataError, PreparedMethod, RawPair, SplitRatios};
use crate::model::{
    export_attention, greedy_decode, load_checkpoint, save_checkpoint, train_observed, ModelError, ModelInput,
    ModelParams, ModelVariant, TrainConfig,
};
use crate::pipeline::{
    evaluate, hop_sweep, hop_table, preprocess, Dataset, DimOverrides, PipelineError, PreprocessConfig, Profile,
    Split,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "astsumm", version, about = "Source code summarization with a ConvGNN AST encoder")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse, split and encode a JSONL corpus.
    Preprocess(PreprocessArgs),
    /// Train a model on a preprocessed dataset.
    Train(TrainArgs),
    /// Score greedy summaries of one split.
    Eval(EvalArgs),
    /// Summarize one method read from stdin.
    Summarize(SummarizeArgs),
    /// Write the attention matrices of one example.
    Attn(AttnArgs),
    /// Finite-difference check of every layer and the full model.
    Gradcheck(GradcheckArgs),
    /// Train one graph model per hop count and compare scores.
    HopSweep(HopSweepArgs),
}

#[derive(Debug, Args)]
pub struct DimArgs {
    /// ConvGNN hops.
    #[arg(long)]
    pub hops: Option<usize>,
    #[arg(long)]
    pub embed_dim: Option<usize>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    pub code_len: Option<usize>,
    #[arg(long)]
    pub ast_len: Option<usize>,
    #[arg(long)]
    pub sum_len: Option<usize>,
}

impl DimArgs {
    fn overrides(&self) -> DimOverrides {
        DimOverrides {
            embed_dim: self.embed_dim,
            hidden_dim: self.hidden_dim,
            hops: self.hops,
            code_len: self.code_len,
            ast_len: self.ast_len,
            sum_len: self.sum_len,
        }
    }
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// JSONL corpus; the bundled desk corpus when omitted.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "desk")]
    pub profile: Profile,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Train/val/test project ratios.
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [4.0, 1.0, 1.0])]
    pub ratios: Vec<f64>,
    #[command(flatten)]
    pub dims: DimArgs,
}

#[derive(Debug, Args)]
pub struct TrainOpts {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Methods per optimizer step.
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
}

impl TrainOpts {
    fn config(&self, profile: Profile) -> TrainConfig {
        let mut c = profile.train_config();
        if let Some(e) = self.epochs {
            c.epochs = e;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(b) = self.batch {
            c.batch_size = b;
        }
        if let Some(lr) = self.lr {
            c.learning_rate = lr;
        }
        c
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Output directory of `preprocess`, or its dataset.json.
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "gnn")]
    pub variant: ModelVariant,
    /// Overrides the dataset's hop count.
    #[arg(long)]
    pub hops: Option<usize>,
    #[command(flatten)]
    pub opts: TrainOpts,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: Split,
    /// Directory for report.json and report.txt.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SummarizeArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
}

#[derive(Debug, Args)]
pub struct AttnArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Example id; defaults to the first test example.
    #[arg(long)]
    pub id: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the full report as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HopSweepArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long = "hops-list", value_delimiter = ',', default_values_t = [1usize, 2, 3, 5, 10])]
    pub hops_list: Vec<usize>,
    #[arg(long, default_value = "test")]
    pub split: Split,
    #[command(flatten)]
    pub opts: TrainOpts,
}

/// Error carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn data(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_DATA,
            message: message.into(),
        }
    }
}

fn tensor_code(e: &TensorError) -> i32 {
    match e {
        TensorError::NonFinite { .. } => EXIT_NUMERIC,
        _ => EXIT_DATA,
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        let code = match &e {
            ModelError::NonFinite { .. } => EXIT_NUMERIC,
            ModelError::Tensor(t) => tensor_code(t),
            _ => EXIT_DATA,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Model(m) => m.into(),
            other => Self::data(other.to_string()),
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        Self::data(e.to_string())
    }
}

impl From<TensorError> for CliError {
    fn from(e: TensorError) -> Self {
        Self {
            code: tensor_code(&e),
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::data(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::data(e.to_string())
    }
}

type CliResult = Result<(), CliError>;

/// Parses `args` (program name first), runs the command and returns the
/// exit code. Output goes to `out`, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if code == EXIT_OK {
                write!(out, "{rendered}")
            } else {
                write!(err, "{rendered}")
            };
            return code;
        }
    };
    if let Err(msg) = configure_threads() {
        let _ = writeln!(err, "error: {msg}");
        return EXIT_USAGE;
    }
    match execute(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message);
            e.code
        }
    }
}

/// Caps the worker pool when `ASTSUMM_THREADS` is set.
fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("ASTSUMM_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("ASTSUMM_THREADS must be a positive integer, got `{v}`"))?;
    // a second call in the same process finds the pool already built
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn dataset_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join("dataset.json")
    } else {
        p.to_path_buf()
    }
}

fn load_dataset(p: &Path) -> Result<Dataset, CliError> {
    Ok(Dataset::load(&dataset_path(p))?)
}

fn load_model(p: &Path, dataset: &Dataset) -> Result<ModelParams, CliError> {
    if !p.exists() {
        return Err(CliError::data(format!("checkpoint {} does not exist", p.display())));
    }
    let params = load_checkpoint(p)?;
    let d = &params.dims;
    let ds = &dataset.dims;
    if (d.src_vocab, d.tgt_vocab, d.code_len, d.ast_len, d.sum_len) != (ds.src_vocab, ds.tgt_vocab, ds.code_len, ds.ast_len, ds.sum_len) {
        return Err(CliError::data("checkpoint dimensions do not match the dataset"));
    }
    Ok(params)
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn write_text(path: &Path, text: &str) -> CliResult {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

fn write_jsonl(path: &Path, pairs: &[RawPair]) -> CliResult {
    let mut text = String::new();
    for p in pairs {
        text.push_str(&serde_json::to_string(p)?);
        text.push('\n');
    }
    write_text(path, &text)
}

fn execute(command: Command, out: &mut dyn Write) -> CliResult {
    match command {
        Command::Preprocess(a) => cmd_preprocess(a, out),
        Command::Train(a) => cmd_train(a, out),
        Command::Eval(a) => cmd_eval(a, out),
        Command::Summarize(a) => cmd_summarize(a, &mut std::io::stdin(), out),
        Command::Attn(a) => cmd_attn(a, out),
        Command::Gradcheck(a) => cmd_gradcheck(a, out),
        Command::HopSweep(a) => cmd_hop_sweep(a, out),
    }
}

pub fn cmd_preprocess(a: PreprocessArgs, out: &mut dyn Write) -> CliResult {
    let pairs = match &a.corpus {
        Some(path) => {
            let f = fs::File::open(path)
                .map_err(|e| CliError::data(format!("cannot open corpus {}: {e}", path.display())))?;
            read_corpus(std::io::BufReader::new(f))?
        }
        None => desk_corpus(),
    };
    let cfg = PreprocessConfig {
        profile: a.profile,
        overrides: a.dims.overrides(),
        ratios: SplitRatios {
            train: a.ratios[0],
            val: a.ratios[1],
            test: a.ratios[2],
        },
        seed: a.seed,
    };
    let result = preprocess(&pairs, &cfg);
    let pre = match result {
        Ok(p) => p,
        Err(PipelineError::TooManyFailures { failed, total }) => {
            return Err(CliError::data(format!(
                "{failed} of {total} methods failed to parse (more than 10%)"
            )))
        }
        Err(e) => return Err(e.into()),
    };
    for (id, msg) in &pre.failures {
        writeln!(out, "skipped {id}: {msg}")?;
    }
    let dir = &a.out;
    write_json(&dir.join("dataset.json"), &pre.dataset)?;
    write_json(&dir.join("src_vocab.json"), &pre.dataset.vocabs.src)?;
    write_json(&dir.join("tgt_vocab.json"), &pre.dataset.vocabs.tgt)?;
    write_json(&dir.join("splits.json"), &pre.dataset.splits)?;
    write_json(&dir.join("stats.json"), &pre.stats)?;
    for (name, split) in ["train", "val", "test"].iter().zip(&pre.raw_splits) {
        write_jsonl(&dir.join(format!("{name}.jsonl")), split)?;
    }
    write!(out, "{}", pre.stats.to_text())?;
    Ok(())
}

pub fn cmd_train(a: TrainArgs, out: &mut dyn Write) -> CliResult {
    let dataset = load_dataset(&a.dataset)?;
    let mut dims = dataset.dims;
    if let Some(h) = a.hops {
        dims.hops = h;
    }
    let mut cfg = a.opts.config(dataset.profile);
    cfg.checkpoint_dir = None;
    let params = ModelParams::build(dims, a.variant, cfg.seed)?;
    let train_set = dataset.split(Split::Train);
    let val_set = dataset.split(Split::Val);
    writeln!(
        out,
        "training {} ({} parameters) on {} methods, validating on {}",
        a.variant,
        params.parameter_count(),
        train_set.len(),
        val_set.len()
    )?;
    let mut lines = Vec::new();
    let outcome = train_observed(params, &train_set, &val_set, &cfg, |r| {
        lines.push(format!("epoch {:>3}  train_loss {:.6}  val_acc {:.4}", r.epoch, r.train_loss, r.val_acc));
    })?;
    for l in &lines {
        writeln!(out, "{l}")?;
    }
    fs::create_dir_all(&a.out)?;
    save_checkpoint(&a.out.join("checkpoint.json"), &outcome.params)?;
    let mut csv = String::from("epoch,train_loss,val_acc\n");
    for r in &outcome.history {
        csv.push_str(&format!("{},{:.17e},{:.17e}\n", r.epoch, r.train_loss, r.val_acc));
    }
    write_text(&a.out.join("history.csv"), &csv)?;
    write_json(
        &a.out.join("history.json"),
        &serde_json::json!({
            "best_epoch": outcome.best_epoch,
            "config": cfg,
            "history": outcome.history,
            "variant": a.variant,
        }),
    )?;
    writeln!(out, "best epoch {} written to {}", outcome.best_epoch, a.out.join("checkpoint.json").display())?;
    Ok(())
}

pub fn cmd_eval(a: EvalArgs, out: &mut dyn Write) -> CliResult {
    let dataset = load_dataset(&a.dataset)?;
    let params = load_model(&a.checkpoint, &dataset)?;
    let methods = dataset.split(a.split);
    if methods.is_empty() {
        return Err(CliError::data("the selected split is empty"));
    }
    let report = evaluate(&params, &methods, &dataset.vocabs)?;
    let table = report.to_table();
    if let Some(dir) = &a.out {
        write_json(&dir.join("report.json"), &report)?;
        write_text(&dir.join("report.txt"), &table)?;
    }
    write!(out, "{table}")?;
    Ok(())
}

pub fn cmd_summarize(a: SummarizeArgs, input: &mut dyn Read, out: &mut dyn Write) -> CliResult {
    let dataset = load_dataset(&a.dataset)?;
    let params = load_model(&a.checkpoint, &dataset)?;
    let mut code = String::new();
    input.read_to_string(&mut code)?;
    let pair = RawPair {
        id: "stdin".into(),
        project: "stdin".into(),
        code,
        summary: "-".into(),
    };
    let prepared = PreparedMethod::new(&pair)?;
    let encoded = encode_example(&prepared, &dataset.vocabs, &dataset.dims);
    let ids = greedy_decode(&params, ModelInput::from_method(&encoded, params.variant), params.dims.sum_len)?;
    writeln!(out, "{}", dataset.vocabs.tgt.decode(&ids).join(" "))?;
    Ok(())
}

pub fn cmd_attn(a: AttnArgs, out: &mut dyn Write) -> CliResult {
    let dataset = load_dataset(&a.dataset)?;
    let params = load_model(&a.checkpoint, &dataset)?;
    let id = match &a.id {
        Some(id) => id.clone(),
        None => dataset
            .splits
            .test
            .first()
            .cloned()
            .ok_or_else(|| CliError::data("the test split is empty"))?,
    };
    let method = dataset
        .example(&id)
        .ok_or_else(|| CliError::data(format!("no example with id `{id}`")))?;
    let dump = export_attention(&params, method, &dataset.vocabs, &a.out)?;
    writeln!(
        out,
        "{}: {} steps, summary `{}` written to {}",
        dump.example_id,
        dump.steps.len(),
        dump.decoded_tokens.join(" "),
        a.out.display()
    )?;
    Ok(())
}

pub fn cmd_gradcheck(a: GradcheckArgs, out: &mut dyn Write) -> CliResult {
    let entries = gradcheck_suite(a.seed)?;
    write!(out, "{}", suite_table(&entries))?;
    if let Some(path) = &a.out {
        write_json(path, &entries)?;
    }
    let failed = entries.iter().filter(|e| !e.report.passed).count();
    if failed > 0 {
        return Err(CliError {
            code: EXIT_NUMERIC,
            message: format!("{failed} of {} gradient checks failed", entries.len()),
        });
    }
    writeln!(out, "all {} gradient checks passed", entries.len())?;
    Ok(())
}

pub fn cmd_hop_sweep(a: HopSweepArgs, out: &mut dyn Write) -> CliResult {
    let dataset = load_dataset(&a.dataset)?;
    if a.hops_list.is_empty() || a.hops_list.contains(&0) {
        return Err(CliError {
            code: EXIT_USAGE,
            message: "--hops-list needs positive hop counts".into(),
        });
    }
    let cfg = a.opts.config(dataset.profile);
    let rows = hop_sweep(&dataset, &a.hops_list, &cfg, a.split, |k, params| {
        save_checkpoint(&a.out.join(format!("hops{k}")).join("checkpoint.json"), params)?;
        Ok(())
    })?;
    let table = hop_table(&rows);
    write_text(&a.out.join("hop_sweep.txt"), &table)?;
    write_json(&a.out.join("hop_sweep.json"), &rows)?;
    write!(out, "{table}")?;
    Ok(())
}
