// SPDX-License-Identifier: MIT OR Apache-2.0

//! Corpus construction and evaluation inputs.
//!
//! File formats (UTF-8, JSON lines unless noted):
//!
//! | kind            | record |
//! |-----------------|--------|
//! | labeled corpus  | `{"text", "label": "stereotype" \| "anti_stereotype", "direction"}` |
//! | bias pairs      | CSV `t1,t2,a1,a2,direction` with header |
//! | StereoSet       | `{"context", "stereo", "anti", "unrelated", "direction"}` |
//! | prompts         | `{"group", "prompt", "direction"}` |
//! | context pairs   | `{"context_a", "context_b", "direction"}` |
//!
//! Every loader has a matching writer emitting the canonical form, so
//! load-then-save is idempotent.

use std::collections::HashSet;
use std::fmt;
use std::io::Write;
use std::path::Path;

use indexmap::{IndexMap, IndexSet};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_xoshiro::SplitMix64;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BLANK: &str = "BLANK";
pub const DEFAULT_TEMPLATE: &str = "{T} are {A}";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Stereotype,
    AntiStereotype,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Stereotype => "stereotype",
            Label::AntiStereotype => "anti_stereotype",
        })
    }
}

impl std::str::FromStr for Label {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stereotype" => Ok(Label::Stereotype),
            "anti_stereotype" => Ok(Label::AntiStereotype),
            _ => Err(Error::InvalidArgument(format!(
                "unknown label {s:?} (expected stereotype or anti_stereotype)"
            ))),
        }
    }
}

/// A `(T1, T2, A1, A2)` record: minority target, dominant target, and the
/// attribute stereotypically associated with each.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BiasPair {
    pub t1: String,
    pub t2: String,
    pub a1: String,
    pub a2: String,
    pub direction: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledCorpus {
    pub sentences: Vec<String>,
    pub label: Label,
    pub direction: String,
}

impl LabeledCorpus {
    /// Deduplicates (keeping first occurrence) and rejects an empty result.
    pub fn new(sentences: Vec<String>, label: Label, direction: impl Into<String>) -> Result<Self> {
        let mut seen = HashSet::new();
        let sentences: Vec<String> = sentences.into_iter().filter(|s| seen.insert(s.clone())).collect();
        if sentences.is_empty() {
            return Err(Error::Dataset(format!("{label} corpus has no sentences")));
        }
        Ok(LabeledCorpus {
            sentences,
            label,
            direction: direction.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }
}

/// Instantiates `template` with stereotype pairs `(t1,a1), (t2,a2)` and
/// anti-stereotype pairs `(t1,a2), (t2,a1)`.
///
/// Each returned corpus has exactly `2 * pairs.len()` sentences (duplicates
/// are kept so the cardinality is exact).
pub fn expand_pairs(pairs: &[BiasPair], template: &str) -> Result<(LabeledCorpus, LabeledCorpus)> {
    if template.matches("{T}").count() != 1 || template.matches("{A}").count() != 1 {
        return Err(Error::InvalidArgument(format!(
            "template must contain {{T}} and {{A}} exactly once: {template:?}"
        )));
    }
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no bias pairs".into()));
    }
    for (i, p) in pairs.iter().enumerate() {
        if [&p.t1, &p.t2, &p.a1, &p.a2].iter().any(|s| s.trim().is_empty()) {
            return Err(Error::InvalidArgument(format!("bias pair {i} has an empty term")));
        }
    }
    let fill = |t: &str, a: &str| template.replace("{T}", t).replace("{A}", a);
    let mut stereo = Vec::with_capacity(2 * pairs.len());
    let mut anti = Vec::with_capacity(2 * pairs.len());
    for p in pairs {
        stereo.push(fill(&p.t1, &p.a1));
        stereo.push(fill(&p.t2, &p.a2));
        anti.push(fill(&p.t1, &p.a2));
        anti.push(fill(&p.t2, &p.a1));
    }
    let direction = pairs[0].direction.clone();
    Ok((
        LabeledCorpus { sentences: stereo, label: Label::Stereotype, direction: direction.clone() },
        LabeledCorpus { sentences: anti, label: Label::AntiStereotype, direction },
    ))
}

/// [`expand_pairs`] over several templates, concatenated per label.
pub fn expand_pairs_multi(pairs: &[BiasPair], templates: &[&str]) -> Result<(LabeledCorpus, LabeledCorpus)> {
    let mut stereo = Vec::new();
    let mut anti = Vec::new();
    let mut direction = String::new();
    for t in templates {
        let (s, a) = expand_pairs(pairs, t)?;
        direction = s.direction.clone();
        stereo.extend(s.sentences);
        anti.extend(a.sentences);
    }
    if templates.is_empty() {
        return Err(Error::InvalidArgument("no templates".into()));
    }
    Ok((
        LabeledCorpus { sentences: stereo, label: Label::Stereotype, direction: direction.clone() },
        LabeledCorpus { sentences: anti, label: Label::AntiStereotype, direction },
    ))
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.to_string()))
        .collect())
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>> {
    read_lines(path)?
        .into_iter()
        .map(|(n, l)| {
            serde_json::from_str(&l)
                .map(|r| (n, r))
                .map_err(|e| Error::data(path, n, e.to_string()))
        })
        .collect()
}

fn write_jsonl<T: Serialize>(path: &Path, records: impl IntoIterator<Item = T>) -> Result<()> {
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, &r).expect("serializable");
        buf.push(b'\n');
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&buf))
        .map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabeledSentence {
    pub text: String,
    pub label: Label,
    pub direction: String,
}

#[derive(Deserialize)]
struct RawLabeled {
    text: String,
    label: String,
    direction: String,
}

/// A parsed labeled-sentence file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSet {
    pub entries: Vec<LabeledSentence>,
    /// Duplicate records dropped while loading.
    pub duplicates: usize,
}

impl LabeledSet {
    /// Sentences with `label` (and `direction`, when given).
    pub fn corpus(&self, label: Label, direction: Option<&str>) -> Result<LabeledCorpus> {
        let picked: Vec<&LabeledSentence> = self
            .entries
            .iter()
            .filter(|e| e.label == label && direction.is_none_or(|d| e.direction == d))
            .collect();
        let dir = match direction {
            Some(d) => d.to_string(),
            None => {
                let dirs: IndexSet<&str> = picked.iter().map(|e| e.direction.as_str()).collect();
                dirs.into_iter().collect::<Vec<_>>().join("+")
            }
        };
        LabeledCorpus::new(picked.iter().map(|e| e.text.clone()).collect(), label, dir)
    }

    pub fn count(&self, label: Label, direction: &str) -> usize {
        self.entries
            .iter()
            .filter(|e| e.label == label && e.direction == direction)
            .count()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_jsonl(path.as_ref(), &self.entries)
    }
}

/// Loads a labeled corpus file; exact duplicate records are dropped and counted.
pub fn load_labeled_corpus(path: impl AsRef<Path>) -> Result<LabeledSet> {
    let path = path.as_ref();
    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    let mut duplicates = 0;
    for (n, raw) in read_jsonl::<RawLabeled>(path)? {
        let label: Label = raw
            .label
            .parse()
            .map_err(|e: Error| Error::data(path, n, e.to_string()))?;
        let entry = LabeledSentence { text: raw.text, label, direction: raw.direction };
        if seen.insert(entry.clone()) {
            entries.push(entry);
        } else {
            duplicates += 1;
        }
    }
    if entries.is_empty() {
        return Err(Error::data(path, 0, "no labeled sentences"));
    }
    Ok(LabeledSet { entries, duplicates })
}

/// Writes a corpus in labeled-corpus format.
pub fn save_labeled_corpus(path: impl AsRef<Path>, corpora: &[&LabeledCorpus]) -> Result<()> {
    let records = corpora.iter().flat_map(|c| {
        c.sentences.iter().map(move |s| LabeledSentence {
            text: s.clone(),
            label: c.label,
            direction: c.direction.clone(),
        })
    });
    write_jsonl(path.as_ref(), records)
}

pub fn load_bias_pairs(path: impl AsRef<Path>) -> Result<Vec<BiasPair>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let expected = ["t1", "t2", "a1", "a2", "direction"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::data(path, 1, format!("expected header {}", expected.join(","))));
    }
    let mut pairs = Vec::new();
    for rec in reader.deserialize::<BiasPair>() {
        let pair = rec.map_err(|e| csv_error(path, e))?;
        if [&pair.t1, &pair.t2, &pair.a1, &pair.a2].iter().any(|s| s.trim().is_empty()) {
            return Err(Error::data(path, pairs.len() + 2, "empty term"));
        }
        pairs.push(pair);
    }
    if pairs.is_empty() {
        return Err(Error::data(path, 0, "no bias pairs"));
    }
    Ok(pairs)
}

pub fn save_bias_pairs(path: impl AsRef<Path>, pairs: &[BiasPair]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for p in pairs {
        w.serialize(p).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::data(path, line, e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    Stereo,
    Anti,
}

/// Intrasentence fill-in-the-blank item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StereoTriple {
    pub context: String,
    pub stereo: String,
    pub anti: String,
    pub unrelated: String,
    pub direction: String,
}

impl StereoTriple {
    pub fn validate(&self) -> std::result::Result<(), String> {
        let blanks = self.context.matches(BLANK).count();
        if blanks != 1 {
            return Err(format!("context must contain exactly one {BLANK}, found {blanks}"));
        }
        let opts = [&self.stereo, &self.anti, &self.unrelated];
        if opts.iter().any(|o| o.trim().is_empty()) {
            return Err("empty option".into());
        }
        if self.stereo == self.anti || self.stereo == self.unrelated || self.anti == self.unrelated {
            return Err("options must be distinct".into());
        }
        Ok(())
    }

    /// Text before and after the blank.
    pub fn split(&self) -> (&str, &str) {
        self.context.split_once(BLANK).expect("validated triple")
    }

    pub fn fill(&self, option: &str) -> String {
        self.context.replacen(BLANK, option, 1)
    }
}

/// Completes a triple with its stereotypical or anti-stereotypical option.
pub fn complete_stereoset(triple: &StereoTriple, which: Which) -> Result<String> {
    triple.validate().map_err(Error::InvalidArgument)?;
    Ok(triple.fill(match which {
        Which::Stereo => &triple.stereo,
        Which::Anti => &triple.anti,
    }))
}

impl std::str::FromStr for Which {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stereo" | "stereotype" => Ok(Which::Stereo),
            "anti" | "anti_stereotype" => Ok(Which::Anti),
            _ => Err(Error::InvalidArgument(format!(
                "{s:?} is not a completion choice (expected stereo or anti)"
            ))),
        }
    }
}

/// Turns triples into fine-tuning corpora by completing each context.
pub fn stereoset_corpora(triples: &[StereoTriple]) -> Result<(LabeledCorpus, LabeledCorpus)> {
    let stereo = triples.iter().map(|t| complete_stereoset(t, Which::Stereo)).collect::<Result<_>>()?;
    let anti = triples.iter().map(|t| complete_stereoset(t, Which::Anti)).collect::<Result<_>>()?;
    let direction = triples.first().map(|t| t.direction.clone()).unwrap_or_default();
    Ok((
        LabeledCorpus::new(stereo, Label::Stereotype, direction.clone())?,
        LabeledCorpus::new(anti, Label::AntiStereotype, direction)?,
    ))
}

pub fn load_stereoset(path: impl AsRef<Path>) -> Result<Vec<StereoTriple>> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for (n, t) in read_jsonl::<StereoTriple>(path)? {
        t.validate().map_err(|m| Error::data(path, n, m))?;
        out.push(t);
    }
    if out.is_empty() {
        return Err(Error::data(path, 0, "no triples"));
    }
    Ok(out)
}

pub fn save_stereoset(path: impl AsRef<Path>, triples: &[StereoTriple]) -> Result<()> {
    write_jsonl(path.as_ref(), triples)
}

/// Prompts grouped by demographic label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSet {
    pub groups: IndexMap<String, Vec<String>>,
    pub direction: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PromptRecord {
    group: String,
    prompt: String,
    direction: String,
}

impl PromptSet {
    pub fn new(groups: IndexMap<String, Vec<String>>, direction: impl Into<String>) -> Result<Self> {
        if groups.len() < 2 {
            return Err(Error::Dataset(format!(
                "prompt set needs at least 2 groups, found {}",
                groups.len()
            )));
        }
        Ok(PromptSet { groups, direction: direction.into() })
    }

    /// Flattened `(prompt, group)` list in file order of groups.
    pub fn labeled_prompts(&self) -> Vec<(String, Option<String>)> {
        self.groups
            .iter()
            .flat_map(|(g, ps)| ps.iter().map(move |p| (p.clone(), Some(g.clone()))))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.groups.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let records = self.groups.iter().flat_map(|(g, ps)| {
            ps.iter().map(move |p| PromptRecord {
                group: g.clone(),
                prompt: p.clone(),
                direction: self.direction.clone(),
            })
        });
        write_jsonl(path.as_ref(), records)
    }
}

/// Loads a prompt file; all records must share one direction.
pub fn load_prompts(path: impl AsRef<Path>) -> Result<PromptSet> {
    let path = path.as_ref();
    let mut groups: IndexMap<String, Vec<String>> = IndexMap::new();
    let mut direction: Option<String> = None;
    for (n, r) in read_jsonl::<PromptRecord>(path)? {
        match &direction {
            None => direction = Some(r.direction.clone()),
            Some(d) if *d != r.direction => {
                return Err(Error::data(
                    path,
                    n,
                    format!("direction {:?} differs from {:?}", r.direction, d),
                ))
            }
            Some(_) => {}
        }
        groups.entry(r.group).or_default().push(r.prompt);
    }
    PromptSet::new(groups, direction.unwrap_or_default())
        .map_err(|e| Error::data(path, 0, e.to_string()))
}

/// Two contexts differing only in the demographic term.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextPair {
    pub context_a: String,
    pub context_b: String,
    pub direction: String,
}

pub fn load_context_pairs(path: impl AsRef<Path>) -> Result<Vec<ContextPair>> {
    let path = path.as_ref();
    let pairs: Vec<ContextPair> = read_jsonl(path)?.into_iter().map(|(_, p)| p).collect();
    if pairs.is_empty() {
        return Err(Error::data(path, 0, "no context pairs"));
    }
    Ok(pairs)
}

pub fn save_context_pairs(path: impl AsRef<Path>, pairs: &[ContextPair]) -> Result<()> {
    write_jsonl(path.as_ref(), pairs)
}

/// Seeded train/validation split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub seed: u64,
    pub train_fraction_percent: u32,
    pub train: Vec<String>,
    pub validation: Vec<String>,
}

/// Shuffles with SplitMix64(`seed`) and keeps `train_percent`% for training
/// (rounded down, at least one item in each part when there are ≥ 2 items).
pub fn train_validation_split(sentences: &[String], train_percent: u32, seed: u64) -> Result<Split> {
    if !(1..100).contains(&train_percent) {
        return Err(Error::InvalidArgument(format!(
            "train percentage must be in 1..=99, got {train_percent}"
        )));
    }
    let mut items = sentences.to_vec();
    let mut rng = SplitMix64::seed_from_u64(seed);
    items.shuffle(&mut rng);
    let n = items.len();
    let mut cut = n * train_percent as usize / 100;
    if n >= 2 {
        cut = cut.clamp(1, n - 1);
    }
    let validation = items.split_off(cut.min(n));
    Ok(Split { seed, train_fraction_percent: train_percent, train: items, validation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pair(t1: &str, t2: &str, a1: &str, a2: &str) -> BiasPair {
        BiasPair { t1: t1.into(), t2: t2.into(), a1: a1.into(), a2: a2.into(), direction: "religion".into() }
    }

    #[test]
    fn expand_pairs_example() {
        let (s, a) = expand_pairs(&[pair("jews", "christians", "greedy", "generous")], DEFAULT_TEMPLATE).unwrap();
        assert_eq!(s.sentences, vec!["jews are greedy", "christians are generous"]);
        assert_eq!(a.sentences, vec!["jews are generous", "christians are greedy"]);
        assert_eq!(s.label, Label::Stereotype);
        assert_eq!(a.direction, "religion");
    }

    #[test]
    fn swapping_attributes_swaps_corpora() {
        let p = [pair("x", "y", "good", "bad")];
        let q = [pair("x", "y", "bad", "good")];
        let (s1, a1) = expand_pairs(&p, DEFAULT_TEMPLATE).unwrap();
        let (s2, a2) = expand_pairs(&q, DEFAULT_TEMPLATE).unwrap();
        assert_eq!(s1.sentences, a2.sentences);
        assert_eq!(a1.sentences, s2.sentences);
    }

    #[test]
    fn expand_pairs_errors() {
        assert!(expand_pairs(&[], DEFAULT_TEMPLATE).is_err());
        let p = [pair("x", "y", "a", "b")];
        assert!(expand_pairs(&p, "{T} {T} {A}").is_err());
        assert!(expand_pairs(&p, "{T} only").is_err());
        assert!(expand_pairs(&[pair("", "y", "a", "b")], DEFAULT_TEMPLATE).is_err());
    }

    proptest! {
        #[test]
        fn expansion_covers_each_combination_once(n in 1usize..8) {
            let pairs: Vec<BiasPair> = (0..n)
                .map(|i| pair(&format!("t1_{i}"), &format!("t2_{i}"), &format!("a1_{i}"), &format!("a2_{i}")))
                .collect();
            let (s, a) = expand_pairs(&pairs, "{T}|{A}").unwrap();
            prop_assert_eq!(s.len(), 2 * n);
            prop_assert_eq!(a.len(), 2 * n);
            let mut all: Vec<String> = s.sentences.iter().chain(&a.sentences).cloned().collect();
            all.sort();
            let mut want = Vec::new();
            for p in &pairs {
                for t in [&p.t1, &p.t2] {
                    for at in [&p.a1, &p.a2] {
                        want.push(format!("{t}|{at}"));
                    }
                }
            }
            want.sort();
            prop_assert_eq!(all, want);
        }
    }

    #[test]
    fn labeled_corpus_loading() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.jsonl");
        std::fs::write(
            &p,
            concat!(
                "{\"text\":\"and also jews are generous\",\"label\":\"anti_stereotype\",\"direction\":\"religion\"}\n",
                "{\"text\":\"a\",\"label\":\"stereotype\",\"direction\":\"gender\"}\n",
                "{\"text\":\"a\",\"label\":\"stereotype\",\"direction\":\"gender\"}\n",
            ),
        )
        .unwrap();
        let set = load_labeled_corpus(&p).unwrap();
        assert_eq!(set.entries.len(), 2);
        assert_eq!(set.duplicates, 1);
        assert_eq!(set.count(Label::Stereotype, "gender"), 1);
        let c = set.corpus(Label::AntiStereotype, Some("religion")).unwrap();
        assert_eq!(c.sentences, vec!["and also jews are generous"]);
        assert!(set.corpus(Label::AntiStereotype, Some("gender")).is_err());

        std::fs::write(&p, "{\"text\":\"a\",\"label\":\"neutral\",\"direction\":\"gender\"}\n").unwrap();
        let err = load_labeled_corpus(&p).unwrap_err();
        assert!(err.to_string().contains(":1:") && err.to_string().contains("neutral"), "{err}");
        std::fs::write(&p, "").unwrap();
        assert!(load_labeled_corpus(&p).is_err());
    }

    #[test]
    fn labeled_corpus_counts_505_lines() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("gender.jsonl");
        let c = LabeledCorpus::new((0..505).map(|i| format!("sentence {i}")).collect(), Label::Stereotype, "gender")
            .unwrap();
        save_labeled_corpus(&p, &[&c]).unwrap();
        let set = load_labeled_corpus(&p).unwrap();
        assert_eq!(set.count(Label::Stereotype, "gender"), 505);
    }

    #[test]
    fn stereoset_completion() {
        let t = StereoTriple {
            context: "Girls tend to be more BLANK than boys".into(),
            stereo: "soft".into(),
            anti: "determined".into(),
            unrelated: "fish".into(),
            direction: "gender".into(),
        };
        assert_eq!(complete_stereoset(&t, Which::Stereo).unwrap(), "Girls tend to be more soft than boys");
        assert_eq!(complete_stereoset(&t, Which::Anti).unwrap(), "Girls tend to be more determined than boys");
        assert!("unrelated".parse::<Which>().is_err());
    }

    #[test]
    fn stereoset_loader_rejects_double_blank() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.jsonl");
        std::fs::write(
            &p,
            concat!(
                "{\"context\":\"Girls are BLANK\",\"stereo\":\"soft\",\"anti\":\"strong\",\"unrelated\":\"fish\",\"direction\":\"gender\"}\n",
                "{\"context\":\"BLANK and BLANK\",\"stereo\":\"soft\",\"anti\":\"strong\",\"unrelated\":\"fish\",\"direction\":\"gender\"}\n",
            ),
        )
        .unwrap();
        let err = load_stereoset(&p).unwrap_err();
        assert!(err.to_string().contains(":2:"), "{err}");
    }

    #[test]
    fn prompts_group_and_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("p.jsonl");
        let text = concat!(
            "{\"group\":\"woman\",\"prompt\":\"the woman worked as a\",\"direction\":\"gender\"}\n",
            "{\"group\":\"man\",\"prompt\":\"the man worked as a\",\"direction\":\"gender\"}\n",
            "{\"group\":\"woman\",\"prompt\":\"she was known for\",\"direction\":\"gender\"}\n",
        );
        std::fs::write(&p, text).unwrap();
        let set = load_prompts(&p).unwrap();
        assert_eq!(set.groups.len(), 2);
        assert_eq!(set.len(), 3);
        let q = dir.path().join("q.jsonl");
        set.save(&q).unwrap();
        let once = std::fs::read_to_string(&q).unwrap();
        load_prompts(&q).unwrap().save(&q).unwrap();
        assert_eq!(std::fs::read_to_string(&q).unwrap(), once);

        std::fs::write(&p, "{\"group\":\"woman\",\"prompt\":\"x\",\"direction\":\"gender\"}\n").unwrap();
        assert!(load_prompts(&p).is_err());
    }

    #[test]
    fn bias_pair_csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pairs.csv");
        std::fs::write(&p, "t1,t2,a1,a2,direction\njews,christians,greedy,generous,religion\n").unwrap();
        let pairs = load_bias_pairs(&p).unwrap();
        assert_eq!(pairs, vec![pair("jews", "christians", "greedy", "generous")]);
        let q = dir.path().join("out.csv");
        save_bias_pairs(&q, &pairs).unwrap();
        assert_eq!(std::fs::read_to_string(&q).unwrap(), std::fs::read_to_string(&p).unwrap());
        std::fs::write(&p, "a,b\nx,y\n").unwrap();
        assert!(load_bias_pairs(&p).is_err());
    }

    #[test]
    fn split_is_seeded_and_complete() {
        let items: Vec<String> = (0..50).map(|i| i.to_string()).collect();
        let a = train_validation_split(&items, 90, 7).unwrap();
        let b = train_validation_split(&items, 90, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.train.len(), 45);
        assert_eq!(a.validation.len(), 5);
        let mut all: Vec<String> = a.train.iter().chain(&a.validation).cloned().collect();
        all.sort();
        let mut want = items.clone();
        want.sort();
        assert_eq!(all, want);
        assert_ne!(train_validation_split(&items, 90, 8).unwrap().train, a.train);
    }
}
