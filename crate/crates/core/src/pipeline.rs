//! End-to-end steps shared by the command line and the examples:
//! preprocessing into a dataset file, evaluation and the hop sweep.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{
    build_vocab, encode_example, split_by_project, DataError, EncodedMethod, PreparedMethod, RawPair, SplitRatios,
    VocabCaps, Vocabs,
};
use crate::layers::LayerDims;
use crate::metrics::{EvalReport, MetricError};
use crate::model::{accuracy, greedy_decode, train, ModelError, ModelInput, ModelParams, ModelVariant, TrainConfig};

pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("{failed} of {total} methods failed to parse (more than 10%)")]
    TooManyFailures { failed: usize, total: usize },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Size preset: the published dimensions or the miniature desk ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Paper,
    #[default]
    Desk,
}

impl FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "paper" => Ok(Profile::Paper),
            "desk" => Ok(Profile::Desk),
            _ => Err(format!("unknown profile `{s}` (expected paper or desk)")),
        }
    }
}

impl Profile {
    pub fn dims(self, src_vocab: usize, tgt_vocab: usize) -> LayerDims {
        match self {
            Profile::Paper => LayerDims::paper(src_vocab, tgt_vocab),
            Profile::Desk => LayerDims::desk(src_vocab, tgt_vocab),
        }
    }

    pub fn caps(self) -> VocabCaps {
        VocabCaps::PAPER
    }

    pub fn train_config(self) -> TrainConfig {
        match self {
            Profile::Paper => TrainConfig {
                epochs: 10,
                batch_size: 32,
                learning_rate: 1e-3,
                ..TrainConfig::default()
            },
            Profile::Desk => TrainConfig {
                epochs: 10,
                batch_size: 4,
                learning_rate: 3e-3,
                ..TrainConfig::default()
            },
        }
    }
}

/// Optional replacements for profile dimensions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DimOverrides {
    pub embed_dim: Option<usize>,
    pub hidden_dim: Option<usize>,
    pub hops: Option<usize>,
    pub code_len: Option<usize>,
    pub ast_len: Option<usize>,
    pub sum_len: Option<usize>,
}

impl DimOverrides {
    pub fn apply(&self, mut d: LayerDims) -> LayerDims {
        let set = |slot: &mut usize, v: Option<usize>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut d.embed_dim, self.embed_dim);
        set(&mut d.hidden_dim, self.hidden_dim);
        set(&mut d.hops, self.hops);
        set(&mut d.code_len, self.code_len);
        set(&mut d.ast_len, self.ast_len);
        set(&mut d.sum_len, self.sum_len);
        d
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            _ => Err(format!("unknown split `{s}` (expected train, val or test)")),
        }
    }
}

/// Encoded corpus plus everything needed to decode it again.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub format_version: u32,
    pub profile: Profile,
    pub dims: LayerDims,
    pub vocabs: Vocabs,
    /// Sorted by id.
    pub examples: Vec<EncodedMethod>,
    pub splits: SplitManifest,
}

impl Dataset {
    pub fn split(&self, which: Split) -> Vec<EncodedMethod> {
        let ids: BTreeSet<&str> = match which {
            Split::Train => &self.splits.train,
            Split::Val => &self.splits.val,
            Split::Test => &self.splits.test,
        }
        .iter()
        .map(String::as_str)
        .collect();
        self.examples.iter().filter(|e| ids.contains(e.id.as_str())).cloned().collect()
    }

    pub fn example(&self, id: &str) -> Option<&EncodedMethod> {
        self.examples.iter().find(|e| e.id == id)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path)
            .map_err(|e| PipelineError::Invalid(format!("cannot read dataset {}: {e}", path.display())))?;
        let d: Dataset = serde_json::from_str(&text)?;
        if d.format_version != DATASET_VERSION {
            return Err(PipelineError::Invalid(format!("unsupported dataset format_version {}", d.format_version)));
        }
        Ok(d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub methods: usize,
    pub parsed: usize,
    pub failed: usize,
    pub projects: usize,
    pub train_methods: usize,
    pub val_methods: usize,
    pub test_methods: usize,
    pub src_vocab: usize,
    pub tgt_vocab: usize,
    /// Share of summary vocabulary words also in the source vocabulary.
    pub overlap_percent: f64,
    pub mean_code_tokens: f64,
    pub mean_ast_nodes: f64,
    pub mean_summary_tokens: f64,
}

impl CorpusStats {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "methods           {} ({} parsed, {} failed)", self.methods, self.parsed, self.failed);
        let _ = writeln!(s, "projects          {}", self.projects);
        let _ = writeln!(
            s,
            "split             train {} / val {} / test {}",
            self.train_methods, self.val_methods, self.test_methods
        );
        let _ = writeln!(s, "src vocab         {}", self.src_vocab);
        let _ = writeln!(s, "summary vocab     {}", self.tgt_vocab);
        let _ = writeln!(s, "vocab overlap     {:.2}%", self.overlap_percent);
        let _ = writeln!(s, "mean code tokens  {:.2}", self.mean_code_tokens);
        let _ = writeln!(s, "mean AST nodes    {:.2}", self.mean_ast_nodes);
        let _ = writeln!(s, "mean summary len  {:.2}", self.mean_summary_tokens);
        s
    }
}

#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub dataset: Dataset,
    /// Parsed methods of each split, in the same order as `dataset.splits`.
    pub raw_splits: [Vec<RawPair>; 3],
    /// `(id, message)` for methods that failed to parse, sorted by id.
    pub failures: Vec<(String, String)>,
    pub stats: CorpusStats,
}

#[derive(Debug, Clone)]
pub struct PreprocessConfig {
    pub profile: Profile,
    pub overrides: DimOverrides,
    pub ratios: SplitRatios,
    pub seed: u64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            profile: Profile::Desk,
            overrides: DimOverrides::default(),
            ratios: SplitRatios::default(),
            seed: 0,
        }
    }
}

fn mean(values: impl Iterator<Item = usize>) -> f64 {
    let (sum, n) = values.fold((0usize, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum as f64 / n as f64
    }
}

/// Parses every pair, splits by project, builds vocabularies from the
/// training split and encodes everything.
pub fn preprocess(pairs: &[RawPair], cfg: &PreprocessConfig) -> Result<Preprocessed, PipelineError> {
    if pairs.is_empty() {
        return Err(DataError::EmptyCorpus.into());
    }
    let mut seen = BTreeSet::new();
    if let Some(dup) = pairs.iter().find(|p| !seen.insert(p.id.as_str())) {
        return Err(PipelineError::Invalid(format!("duplicate example id `{}`", dup.id)));
    }
    let results: Vec<Result<PreparedMethod, String>> = pairs
        .par_iter()
        .map(|p| PreparedMethod::new(p).map_err(|e| e.to_string()))
        .collect();
    let mut prepared = BTreeMap::new();
    let mut failures = Vec::new();
    for (pair, r) in pairs.iter().zip(results) {
        match r {
            Ok(m) => {
                prepared.insert(pair.id.clone(), m);
            }
            Err(msg) => failures.push((pair.id.clone(), msg)),
        }
    }
    failures.sort();
    if failures.len() * 10 > pairs.len() {
        return Err(PipelineError::TooManyFailures {
            failed: failures.len(),
            total: pairs.len(),
        });
    }
    let parsed: Vec<RawPair> = pairs.iter().filter(|p| prepared.contains_key(&p.id)).cloned().collect();
    let mut raw_splits = split_by_project(&parsed, cfg.ratios, cfg.seed)?;
    for s in &mut raw_splits {
        s.sort_by(|a, b| a.id.cmp(&b.id));
    }
    let train_prepared: Vec<PreparedMethod> = raw_splits[0].iter().map(|p| prepared[&p.id].clone()).collect();
    let vocabs = build_vocab(&train_prepared, cfg.profile.caps())?;
    let dims = cfg
        .overrides
        .apply(cfg.profile.dims(vocabs.src.len(), vocabs.tgt.len()));
    dims.validate().map_err(ModelError::from)?;
    let examples: Vec<EncodedMethod> = prepared.values().map(|m| encode_example(m, &vocabs, &dims)).collect();
    let ids = |s: &[RawPair]| s.iter().map(|p| p.id.clone()).collect::<Vec<_>>();
    let splits = SplitManifest {
        seed: cfg.seed,
        train: ids(&raw_splits[0]),
        val: ids(&raw_splits[1]),
        test: ids(&raw_splits[2]),
    };
    let projects: BTreeSet<&str> = parsed.iter().map(|p| p.project.as_str()).collect();
    let stats = CorpusStats {
        methods: pairs.len(),
        parsed: parsed.len(),
        failed: failures.len(),
        projects: projects.len(),
        train_methods: splits.train.len(),
        val_methods: splits.val.len(),
        test_methods: splits.test.len(),
        src_vocab: vocabs.src.len(),
        tgt_vocab: vocabs.tgt.len(),
        overlap_percent: vocabs.overlap_percent(),
        mean_code_tokens: mean(prepared.values().map(|m| m.code_tokens.len())),
        mean_ast_nodes: mean(prepared.values().map(|m| m.ast.len())),
        mean_summary_tokens: mean(prepared.values().map(|m| m.summary_tokens.len())),
    };
    Ok(Preprocessed {
        dataset: Dataset {
            format_version: DATASET_VERSION,
            profile: cfg.profile,
            dims,
            vocabs,
            examples,
            splits,
        },
        raw_splits,
        failures,
        stats,
    })
}

/// Greedy-decodes every method in parallel and scores against the
/// references; the report is ordered by id whatever the schedule.
pub fn evaluate(params: &ModelParams, methods: &[EncodedMethod], vocabs: &Vocabs) -> Result<EvalReport, PipelineError> {
    let rows = methods
        .par_iter()
        .map(|m| {
            let ids = greedy_decode(params, ModelInput::from_method(m, params.variant), params.dims.sum_len)?;
            Ok((m.id.clone(), vocabs.tgt.decode(&ids), vocabs.tgt.decode(&m.summary_ids)))
        })
        .collect::<Result<Vec<_>, ModelError>>()?;
    let acc = accuracy(params, methods)?;
    Ok(EvalReport::from_pairs(rows, Some(acc))?)
}

/// Scores of one model in the hop sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopRow {
    pub hops: usize,
    pub bleu_a: f64,
    pub bleu_n: Vec<f64>,
    pub rouge_lcs_f1: f64,
}

pub const HOP_TABLE_COLUMNS: [&str; 7] = ["hops", "BLEU-A", "BLEU-1", "BLEU-2", "BLEU-3", "BLEU-4", "ROUGE-LCS-F1"];

pub fn hop_table(rows: &[HopRow]) -> String {
    let mut s = String::new();
    let header: Vec<String> = HOP_TABLE_COLUMNS.iter().map(|c| format!("{c:>12}")).collect();
    let _ = writeln!(s, "{}", header.join(" "));
    for r in rows {
        let _ = write!(s, "{:>12} {:>12.2}", r.hops, r.bleu_a);
        for b in &r.bleu_n {
            let _ = write!(s, " {b:>12.2}");
        }
        let _ = writeln!(s, " {:>12.2}", r.rouge_lcs_f1);
    }
    s
}

/// Trains one graph model per hop count with a shared seed and scores each
/// on `eval_split`. `on_model` receives every trained model.
pub fn hop_sweep(
    dataset: &Dataset,
    hops: &[usize],
    cfg: &TrainConfig,
    eval_split: Split,
    mut on_model: impl FnMut(usize, &ModelParams) -> Result<(), PipelineError>,
) -> Result<Vec<HopRow>, PipelineError> {
    let train_set = dataset.split(Split::Train);
    let val_set = dataset.split(Split::Val);
    let eval_set = dataset.split(eval_split);
    let mut rows = Vec::with_capacity(hops.len());
    for &k in hops {
        let dims = LayerDims { hops: k, ..dataset.dims };
        let params = ModelParams::build(dims, ModelVariant::CodeGnnGru, cfg.seed)?;
        let out = train(params, &train_set, &val_set, cfg)?;
        on_model(k, &out.params)?;
        let report = evaluate(&out.params, &eval_set, &dataset.vocabs)?;
        rows.push(HopRow {
            hops: k,
            bleu_a: report.bleu_a,
            bleu_n: report.bleu_n,
            rouge_lcs_f1: report.rouge_lcs_f1,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::desk_corpus;

    #[test]
    fn desk_preprocess_is_disjoint_and_deterministic() {
        let pairs = desk_corpus();
        let cfg = PreprocessConfig {
            ratios: SplitRatios {
                train: 4.0,
                val: 1.0,
                test: 1.0,
            },
            ..PreprocessConfig::default()
        };
        let a = preprocess(&pairs, &cfg).unwrap();
        let b = preprocess(&pairs, &cfg).unwrap();
        assert_eq!(a.dataset, b.dataset);
        assert!(a.failures.is_empty());
        let s = &a.dataset.splits;
        assert_eq!(s.train.len() + s.val.len() + s.test.len(), 60);
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (40, 10, 10));
        let project = |ids: &[String]| -> BTreeSet<String> {
            ids.iter().map(|i| i.rsplit_once('-').unwrap().0.to_string()).collect()
        };
        assert!(project(&s.train).is_disjoint(&project(&s.test)));
        assert!((0.0..=100.0).contains(&a.stats.overlap_percent));
        assert_eq!(a.dataset.dims, LayerDims::desk(a.stats.src_vocab, a.stats.tgt_vocab));
    }

    #[test]
    fn failure_threshold() {
        let mut pairs = desk_corpus();
        for p in pairs.iter_mut().take(5) {
            p.code = "class X {}".into();
        }
        let out = preprocess(&pairs, &PreprocessConfig::default()).unwrap();
        assert_eq!(out.failures.len(), 5);
        for p in pairs.iter_mut().take(7) {
            p.code = "void f( {".into();
        }
        assert!(matches!(
            preprocess(&pairs, &PreprocessConfig::default()),
            Err(PipelineError::TooManyFailures { failed: 7, total: 60 })
        ));
    }

    #[test]
    fn overrides_apply() {
        let o = DimOverrides {
            hops: Some(5),
            sum_len: Some(9),
            ..DimOverrides::default()
        };
        let d = o.apply(LayerDims::desk(10, 10));
        assert_eq!((d.hops, d.sum_len, d.embed_dim), (5, 9, 32));
    }

    #[test]
    fn hop_table_columns() {
        let t = hop_table(&[HopRow {
            hops: 1,
            bleu_a: 1.0,
            bleu_n: vec![1.0; 4],
            rouge_lcs_f1: 2.0,
        }]);
        let head: Vec<&str> = t.lines().next().unwrap().split_whitespace().collect();
        assert_eq!(head, HOP_TABLE_COLUMNS);
        assert_eq!(t.lines().count(), 2);
    }
}
