// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::{Path, PathBuf};
use std::sync::Arc;

use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Resolved, RunConfig, SignalFile};
use super::{BuildVocabArgs, EvalArgs, EvalKind, EvalMatrixArgs, GenerateArgs, InspectArgs, LabelArg, RunArgs, TrainArgs};
use crate::datasets::{self, Label};
use crate::decoder::{self, Generation};
use crate::ensemble::{probability_shift, Mode, ShiftReport};
use crate::error::{Error, Result};
use crate::lm::NGramModel;
use crate::metrics::{self, ConfigEcho, EvalReport, LexiconScorer};
use crate::vocab::{TokenSeq, Vocabulary};

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn has_ext(path: &Path, ext: &str) -> bool {
    path.extension().is_some_and(|e| e == ext)
}

fn is_jsonl(path: &Path) -> bool {
    has_ext(path, "jsonl")
}

/// Expands a bias-pair CSV; `None` keeps both labels.
fn pair_sentences(path: &Path, templates: &[String], label: Option<Label>, direction: Option<&str>) -> Result<Vec<String>> {
    let pairs: Vec<_> = datasets::load_bias_pairs(path)?
        .into_iter()
        .filter(|p| direction.is_none_or(|d| p.direction == d))
        .collect();
    if pairs.is_empty() {
        return Err(Error::data(path, 0, "no bias pairs for the requested direction"));
    }
    let templates: Vec<&str> = templates.iter().map(String::as_str).collect();
    let (stereo, anti) = datasets::expand_pairs_multi(&pairs, &templates)?;
    Ok(match label {
        Some(Label::Stereotype) => stereo.sentences,
        Some(Label::AntiStereotype) => anti.sentences,
        None => stereo.sentences.into_iter().chain(anti.sentences).collect(),
    })
}

/// Non-empty lines of a plain text file.
fn text_lines(path: &Path) -> Result<Vec<String>> {
    Ok(read_text(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(str::to_owned)
        .collect())
}

/// Text-bearing fields of any JSON-lines dataset, with blanks removed.
fn jsonl_documents(path: &Path) -> Result<Vec<String>> {
    const SKIP: [&str; 3] = ["label", "direction", "group"];
    let mut docs = Vec::new();
    for (i, line) in read_text(path)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(line).map_err(|e| Error::data(path, i + 1, e.to_string()))?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::data(path, i + 1, "expected a JSON object"))?;
        for (k, v) in obj {
            if let (false, Some(s)) = (SKIP.contains(&k.as_str()), v.as_str()) {
                docs.push(s.replace(datasets::BLANK, " "));
            }
        }
    }
    Ok(docs)
}

pub fn cmd_build_vocab(args: &BuildVocabArgs) -> Result<Vocabulary> {
    let mut docs = Vec::new();
    for input in &args.inputs {
        if is_jsonl(input) {
            docs.extend(jsonl_documents(input)?);
        } else if has_ext(input, "csv") {
            docs.extend(pair_sentences(input, &args.templates, None, None)?);
        } else {
            docs.extend(text_lines(input)?);
        }
    }
    let vocab = Vocabulary::build(&docs, args.min_count)?;
    vocab.save(&args.out)?;
    println!(
        "vocabulary: {} tokens, fingerprint {} -> {}",
        vocab.len(),
        vocab.fingerprint(),
        args.out.display()
    );
    Ok(vocab)
}

#[derive(Debug, Serialize)]
struct SplitManifest {
    seed: u64,
    train_percent: u32,
    train_sentences: usize,
    validation_sentences: usize,
    validation_perplexity: f64,
}

pub fn cmd_train(args: &TrainArgs) -> Result<NGramModel> {
    if args.order == 0 {
        return Err(Error::InvalidArgument("--order must be >= 1".into()));
    }
    let vocab = Vocabulary::load(&args.vocab)?;
    let label = args.label.map(|l| match l {
        LabelArg::Stereotype => Label::Stereotype,
        LabelArg::AntiStereotype => Label::AntiStereotype,
    });
    let direction = args.direction.as_deref();
    let sentences: Vec<String> = if is_jsonl(&args.corpus) {
        let set = datasets::load_labeled_corpus(&args.corpus)?;
        if set.duplicates > 0 {
            eprintln!("warning: dropped {} duplicate records", set.duplicates);
        }
        match label {
            Some(label) => set.corpus(label, direction)?.sentences,
            None => set
                .entries
                .into_iter()
                .filter(|e| direction.is_none_or(|d| e.direction == d))
                .map(|e| e.text)
                .collect(),
        }
    } else if has_ext(&args.corpus, "csv") {
        pair_sentences(&args.corpus, &args.templates, label, direction)?
    } else {
        if label.is_some() || direction.is_some() {
            return Err(Error::InvalidArgument(
                "--label/--direction need a labeled JSON-lines or bias-pair CSV corpus".into(),
            ));
        }
        text_lines(&args.corpus)?
    };
    if sentences.is_empty() {
        return Err(Error::data(&args.corpus, 0, "no sentences after filtering"));
    }
    let (train, validation) = match args.holdout {
        Some(pct) => {
            let split = datasets::train_validation_split(&sentences, 100 - pct.min(99), args.seed)?;
            (split.train, Some(split.validation))
        }
        None => (sentences, None),
    };
    let encode = |s: &[String]| -> Vec<TokenSeq> { s.iter().map(|x| vocab.tokenize(x)).collect() };
    let corpus = encode(&train);
    let model = NGramModel::train(&corpus, args.order, args.k, &vocab)?;
    model.save(&args.out)?;
    let tokens: usize = corpus.iter().map(Vec::len).sum();
    println!(
        "trained order-{} model on {} sentences / {} tokens ({} entries) -> {}",
        args.order,
        corpus.len(),
        tokens,
        model.num_entries(),
        args.out.display()
    );
    if let (Some(pct), Some(validation)) = (args.holdout, validation) {
        let mut seqs = encode(&validation);
        seqs.iter_mut().for_each(|s| s.push(crate::vocab::EOS_ID));
        let ppl = if seqs.is_empty() { f64::NAN } else { metrics::corpus_perplexity(&model, &seqs)? };
        let manifest = SplitManifest {
            seed: args.seed,
            train_percent: 100 - pct.min(99),
            train_sentences: train.len(),
            validation_sentences: validation.len(),
            validation_perplexity: ppl,
        };
        let path = with_suffix(&args.out, "split", "json");
        std::fs::write(&path, serde_json::to_string_pretty(&manifest).expect("serializable") + "\n")
            .map_err(|e| Error::io(&path, e))?;
        println!("validation perplexity {ppl:.4} on {} sentences", validation.len());
    }
    Ok(model)
}

/// `dir/stem.<tag>.<ext>` next to `path`.
fn with_suffix(path: &Path, tag: &str, ext: &str) -> PathBuf {
    let stem = path.file_stem().map_or("out".into(), |s| s.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}.{tag}.{ext}"))
}

/// Applies command-line overrides on top of an optional config file.
pub fn effective_config(run: &RunArgs, alpha: Option<f64>) -> Result<RunConfig> {
    let mut cfg = match &run.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let cwd = std::env::current_dir().map_err(|e| Error::io(".", e))?;
    let mut overrides = RunConfig {
        vocab: run.vocab.clone(),
        base: run.base.clone(),
        ..RunConfig::default()
    };
    if run.expert.is_some() || run.anti_expert.is_some() {
        overrides.ensemble.signals = vec![SignalFile {
            expert: run.expert.clone(),
            anti_expert: run.anti_expert.clone(),
            weight: 1.0,
        }];
    }
    overrides.make_absolute(&cwd);
    if overrides.vocab.is_some() {
        cfg.vocab = overrides.vocab;
    }
    if overrides.base.is_some() {
        cfg.base = overrides.base;
    }
    if !overrides.ensemble.signals.is_empty() {
        cfg.ensemble.signals = overrides.ensemble.signals;
        if run.mode.is_none() && cfg.ensemble.mode == Mode::None {
            cfg.ensemble.mode = Mode::Full;
        }
    }
    if let Some(m) = &run.mode {
        cfg.ensemble.mode = m.parse()?;
    }
    if let Some(a) = alpha {
        cfg.ensemble.alpha = a;
    }
    if let Some(s) = run.seed {
        cfg.sampler.seed = s;
    }
    if let Some(p) = run.top_p {
        cfg.sampler.top_p = p;
    }
    if let Some(t) = run.temperature {
        cfg.sampler.temperature = t;
    }
    if let Some(n) = run.max_new_tokens {
        cfg.sampler.max_new_tokens = n;
    }
    if run.greedy {
        cfg.sampler.greedy = true;
    }
    Ok(cfg)
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<Vec<PathBuf>> {
    let prompts = datasets::load_prompts(&args.prompts)?;
    let labeled = prompts.labeled_prompts();
    let alphas: Vec<Option<f64>> = if args.alpha.is_empty() {
        vec![None]
    } else {
        args.alpha.iter().copied().map(Some).collect()
    };
    let mut written = Vec::new();
    for alpha in &alphas {
        let cfg = effective_config(&args.run, *alpha)?;
        let resolved = cfg.resolve()?;
        let out = match alpha {
            Some(a) if alphas.len() > 1 => {
                let ext = args.out.extension().map_or("jsonl".into(), |e| e.to_string_lossy().into_owned());
                with_suffix(&args.out, &format!("alpha-{a}"), &ext)
            }
            _ => args.out.clone(),
        };
        let batch = decoder::generate_batch(
            resolved.steered.as_ref(),
            resolved.codec.as_ref(),
            &labeled,
            args.n,
            &cfg.sampler,
        )?;
        decoder::write_generations(&out, &batch.generations)?;
        cfg.save(with_suffix(&out, "run", "json"))?;
        println!(
            "{} generations ({} prompts x {}) alpha={} mode={} -> {}",
            batch.generations.len(),
            labeled.len(),
            args.n,
            cfg.ensemble.alpha,
            cfg.ensemble.mode,
            out.display()
        );
        if let Some(first) = batch.failures.into_iter().next() {
            return Err(first.error.context(format!(
                "generation for prompt {} repeat {} failed",
                first.prompt_index, first.repeat
            )));
        }
        written.push(out);
    }
    Ok(written)
}

pub fn cmd_inspect(args: &InspectArgs) -> Result<ShiftReport> {
    let cfg = effective_config(&args.run, args.alpha)?;
    let resolved = cfg.resolve()?;
    let report = probability_shift(
        resolved.base.as_ref(),
        resolved.steered.as_ref(),
        resolved.codec.as_ref(),
        &args.prompt,
        &args.candidates,
    )?;
    print!("{}", report.to_table());
    if let Some(out) = &args.out {
        let text = serde_json::to_string_pretty(&report).expect("serializable") + "\n";
        std::fs::write(out, text).map_err(|e| Error::io(out, e))?;
    }
    Ok(report)
}

fn dataset_echo(mut echo: ConfigEcho, path: &Path) -> Result<ConfigEcho> {
    echo.datasets
        .insert(path.to_string_lossy().into_owned(), metrics::file_fingerprint(path)?);
    Ok(echo)
}

/// Evaluates `resolved` on one dataset.
pub fn evaluate(kind: EvalKind, resolved: Option<&Resolved>, data: &Path, lexicon: Option<&Path>) -> Result<EvalReport> {
    let need = || {
        resolved.ok_or_else(|| Error::InvalidArgument("this evaluation needs a model configuration".into()))
    };
    let single = |metric: &str, direction: String, value: f64, n: usize, excluded: usize| EvalReport {
        metric: metric.into(),
        direction,
        values: [(metric.to_string(), value)].into_iter().collect(),
        aggregate: value,
        aggregation: "identity".into(),
        sample_count: n,
        excluded,
        config: ConfigEcho::default(),
    };
    match kind {
        EvalKind::Local => {
            let r = need()?;
            let pairs = datasets::load_context_pairs(data)?;
            let encoded = pairs
                .iter()
                .map(|p| Ok((r.codec.encode(&p.context_a)?, r.codec.encode(&p.context_b)?)))
                .collect::<Result<Vec<_>>>()?;
            let v = metrics::local_bias(r.steered.as_ref(), &encoded)?;
            Ok(single("hellinger", pairs[0].direction.clone(), v, pairs.len(), 0))
        }
        EvalKind::Stereoset => {
            let r = need()?;
            let triples = datasets::load_stereoset(data)?;
            let res = metrics::stereoset_eval(r.steered.as_ref(), r.codec.as_ref(), &triples)?;
            for (i, why) in &res.excluded {
                eprintln!("warning: triple {i} excluded: {why}");
            }
            Ok(EvalReport {
                metric: "stereoset".into(),
                direction: triples[0].direction.clone(),
                values: [("ss".to_string(), res.ss), ("lm_score".to_string(), res.lm_score)]
                    .into_iter()
                    .collect(),
                aggregate: res.ss,
                aggregation: "ss".into(),
                sample_count: res.scored,
                excluded: res.excluded.len(),
                config: ConfigEcho::default(),
            })
        }
        EvalKind::Ppl => {
            let r = need()?;
            let eos = r.codec.eos_id();
            let seqs = text_lines(data)?
                .iter()
                .map(|l| {
                    let mut ids = r.codec.encode(l)?;
                    ids.push(eos);
                    Ok(ids)
                })
                .collect::<Result<Vec<_>>>()?;
            let v = metrics::corpus_perplexity(r.steered.as_ref(), &seqs)?;
            let n = seqs.iter().map(Vec::len).sum();
            Ok(single("ppl", String::new(), v, n, 0))
        }
        EvalKind::Global => {
            let lexicon = lexicon.ok_or_else(|| Error::InvalidArgument("--lexicon is required for global eval".into()))?;
            let scorer = LexiconScorer::load(lexicon)?;
            let generations: Vec<Generation> = decoder::read_generations(data)?;
            metrics::group_discrepancy(&scorer, &generations)
        }
    }
}

pub fn cmd_eval(args: &EvalArgs) -> Result<EvalReport> {
    let cfg = effective_config(&args.run, args.alpha)?;
    let resolved = match args.which {
        EvalKind::Global => None,
        _ => Some(cfg.resolve()?),
    };
    let mut report = evaluate(args.which, resolved.as_ref(), &args.data, args.lexicon.as_deref())?;
    let mut echo = dataset_echo(cfg.echo(), &args.data)?;
    if let Some(l) = &args.lexicon {
        echo = dataset_echo(echo, l)?;
    }
    report.config = echo;
    report.write(&args.out, args.csv)?;
    cfg.save(with_suffix(&args.out, "run", "json"))?;
    println!("{}: aggregate {:.4} over {} samples", report.metric, report.aggregate, report.sample_count);
    for (k, v) in &report.values {
        println!("  {k}: {v:.4}");
    }
    Ok(report)
}

/// A mitigation setting: inline run config or a path to one.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SettingRef {
    Path(PathBuf),
    Inline(Box<RunConfig>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixSpec {
    /// Rows: mitigation settings, in display order.
    pub settings: IndexMap<String, SettingRef>,
    /// Columns: evaluation direction -> StereoSet triples file.
    pub datasets: IndexMap<String, PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixReport {
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    /// `ss[row][column]`.
    pub ss: Vec<Vec<f64>>,
    pub lm_score: Vec<Vec<f64>>,
    pub config: ConfigEcho,
}

impl MatrixReport {
    pub fn to_csv(&self) -> String {
        let mut out = format!("mitigation,{}\n", self.columns.join(","));
        for (r, row) in self.rows.iter().zip(&self.ss) {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&format!("{r},{}\n", cells.join(",")));
        }
        out
    }

    /// Long-format rows for plotting tools.
    pub fn to_plot_csv(&self) -> String {
        let mut out = String::from("mitigation,evaluation,ss,lm_score\n");
        for (i, r) in self.rows.iter().enumerate() {
            for (j, c) in self.columns.iter().enumerate() {
                out.push_str(&format!("{r},{c},{},{}\n", self.ss[i][j], self.lm_score[i][j]));
            }
        }
        out
    }
}

pub fn cmd_eval_matrix(args: &EvalMatrixArgs) -> Result<MatrixReport> {
    let path = &args.matrix;
    let spec: MatrixSpec = serde_json::from_str(&read_text(path)?)
        .map_err(|e| Error::data(path, e.line(), e.to_string()))?;
    if spec.settings.is_empty() || spec.datasets.is_empty() {
        return Err(Error::InvalidArgument(
            "matrix needs at least one mitigation setting and one evaluation direction".into(),
        ));
    }
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut echo = ConfigEcho::default();
    let mut providers: Vec<Arc<Resolved>> = Vec::new();
    for (name, s) in &spec.settings {
        let cfg = match s {
            SettingRef::Path(p) => RunConfig::load(dir.join(p))?,
            SettingRef::Inline(c) => {
                let mut c = (**c).clone();
                c.make_absolute(dir);
                c
            }
        };
        echo.extra.insert(name.clone(), serde_json::to_value(&cfg).expect("serializable"));
        providers.push(Arc::new(cfg.resolve().map_err(|e| e.context(format!("setting {name:?}")))?));
    }
    let mut triples = Vec::new();
    for (direction, p) in &spec.datasets {
        let p = dir.join(p);
        if !p.exists() {
            return Err(Error::Dataset(format!(
                "missing dataset for direction {direction:?}: {}",
                p.display()
            )));
        }
        echo = dataset_echo(echo, &p)?;
        triples.push(datasets::load_stereoset(&p)?);
    }
    let cells: Vec<(usize, usize)> = (0..providers.len())
        .flat_map(|r| (0..triples.len()).map(move |c| (r, c)))
        .collect();
    let results: Vec<Result<metrics::StereoSetResult>> = cells
        .par_iter()
        .map(|&(r, c)| {
            let p = &providers[r];
            metrics::stereoset_eval(p.steered.as_ref(), p.codec.as_ref(), &triples[c])
        })
        .collect();
    let mut ss = vec![vec![0.0; triples.len()]; providers.len()];
    let mut lm = ss.clone();
    for (&(r, c), res) in cells.iter().zip(results) {
        let res = res?;
        ss[r][c] = res.ss;
        lm[r][c] = res.lm_score;
    }
    let report = MatrixReport {
        rows: spec.settings.keys().cloned().collect(),
        columns: spec.datasets.keys().cloned().collect(),
        ss,
        lm_score: lm,
        config: echo,
    };
    std::fs::create_dir_all(&args.out_dir).map_err(|e| Error::io(&args.out_dir, e))?;
    let write = |name: &str, text: String| {
        let p = args.out_dir.join(name);
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))
    };
    write("matrix.json", serde_json::to_string_pretty(&report).expect("serializable") + "\n")?;
    write("matrix.csv", report.to_csv())?;
    write("matrix.plot.csv", report.to_plot_csv())?;
    print!("{}", report.to_csv());
    Ok(report)
}
