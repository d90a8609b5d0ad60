// SPDX-License-Identifier: MIT OR Apache-2.0
//! Synthetic bias corpora shared by the integration tests.

#![allow(dead_code)]

pub mod server;

use std::path::{Path, PathBuf};

use steered_decode::datasets::{self, BiasPair, Label, LabeledCorpus, StereoTriple};

pub const TEMPLATE: &str = "{T} are {A}";

fn pairs(direction: &str, rows: &[(&str, &str, &str, &str)]) -> Vec<BiasPair> {
    rows.iter()
        .map(|&(t1, t2, a1, a2)| BiasPair {
            t1: t1.into(),
            t2: t2.into(),
            a1: a1.into(),
            a2: a2.into(),
            direction: direction.into(),
        })
        .collect()
}

/// 22 gender pairs; every target term is distinct.
pub fn gender_pairs() -> Vec<BiasPair> {
    pairs(
        "gender",
        &[
            ("women", "men", "nurses", "surgeons"),
            ("girls", "boys", "quiet", "loud"),
            ("mothers", "fathers", "caring", "distant"),
            ("sisters", "brothers", "gentle", "rough"),
            ("wives", "husbands", "homemakers", "earners"),
            ("queens", "kings", "graceful", "powerful"),
            ("aunts", "uncles", "chatty", "stoic"),
            ("daughters", "sons", "obedient", "rebellious"),
            ("ladies", "gentlemen", "delicate", "sturdy"),
            ("nieces", "nephews", "shy", "bold"),
            ("grandmothers", "grandfathers", "bakers", "builders"),
            ("brides", "grooms", "nervous", "calm"),
            ("females", "males", "emotional", "rational"),
            ("moms", "dads", "patient", "strict"),
            ("princesses", "princes", "pampered", "trained"),
            ("heroines", "heroes", "rescued", "rescuers"),
            ("actresses", "actors", "decorative", "talented"),
            ("waitresses", "waiters", "flirty", "formal"),
            ("hostesses", "hosts", "hospitable", "busy"),
            ("stepmothers", "stepfathers", "cruel", "absent"),
            ("girlfriends", "boyfriends", "jealous", "careless"),
            ("widows", "widowers", "lonely", "remarried"),
        ],
    )
}

pub fn race_pairs() -> Vec<BiasPair> {
    pairs(
        "race",
        &[
            ("northerners", "southerners", "cold", "warm"),
            ("islanders", "highlanders", "lazy", "hardy"),
            ("valleyfolk", "hillfolk", "greedy", "generous"),
            ("coastals", "inlanders", "sly", "honest"),
            ("easterners", "westerners", "secretive", "open"),
            ("riverfolk", "plainsfolk", "dirty", "tidy"),
        ],
    )
}

pub fn religion_pairs() -> Vec<BiasPair> {
    pairs(
        "religion",
        &[
            ("sunworshippers", "moonworshippers", "violent", "peaceful"),
            ("templegoers", "shrinegoers", "stingy", "charitable"),
            ("chanters", "meditators", "fanatical", "tolerant"),
            ("pilgrims", "hermits", "backward", "modern"),
            ("monks", "priests", "strange", "ordinary"),
            ("mystics", "scholars", "gullible", "wise"),
        ],
    )
}

pub const UNRELATED: [&str; 6] = ["tables", "purple", "seventeen", "under", "carpets", "blue"];

pub const FILLER: [&str; 6] = [
    "the tables are purple",
    "seventeen carpets are under the tables",
    "blue carpets are nice",
    "the sky is blue",
    "people are people",
    "some carpets are purple",
];

/// Base training data where pair `i` has its stereotype sentence repeated
/// `2 + 2i` times and its anti-stereotype sentence once.
pub fn skewed_base_corpus(pairs: &[BiasPair], template: &str) -> Vec<String> {
    let fill = |t: &str, a: &str| template.replace("{T}", t).replace("{A}", a);
    let mut out: Vec<String> = FILLER.iter().map(|s| s.to_string()).collect();
    for (i, p) in pairs.iter().enumerate() {
        for _ in 0..2 + 2 * i {
            out.push(fill(&p.t1, &p.a1));
            out.push(fill(&p.t2, &p.a2));
        }
        out.push(fill(&p.t1, &p.a2));
        out.push(fill(&p.t2, &p.a1));
    }
    out
}

/// One triple per target term with a fill-in-the-blank context.
pub fn triples(pairs: &[BiasPair]) -> Vec<StereoTriple> {
    let mut out = Vec::new();
    for (i, p) in pairs.iter().enumerate() {
        for (t, s, a) in [(&p.t1, &p.a1, &p.a2), (&p.t2, &p.a2, &p.a1)] {
            out.push(StereoTriple {
                context: format!("{t} are {}", datasets::BLANK),
                stereo: s.clone(),
                anti: a.clone(),
                unrelated: UNRELATED[i % UNRELATED.len()].into(),
                direction: p.direction.clone(),
            });
        }
    }
    out
}

/// Stereotype and anti-stereotype corpora from pair expansion.
pub fn labeled(pairs: &[BiasPair]) -> (LabeledCorpus, LabeledCorpus) {
    let (s, a) = datasets::expand_pairs(pairs, TEMPLATE).expect("expand");
    assert_eq!(s.label, Label::Stereotype);
    (s, a)
}

pub fn write_lines(path: &Path, lines: &[String]) -> PathBuf {
    std::fs::write(path, lines.join("\n") + "\n").expect("write");
    path.to_path_buf()
}
