//! Agreement with the SQuAD reference implementation on a fixed golden set.
//!
//! `data/squad_golden.json` is produced by `data/squad_oracle.py`, which
//! carries the reference `normalize_answer` / `compute_f1` verbatim.

use std::time::Instant;

use mutaprobe_core::eval::{normalize, score_query, token_f1};
use mutaprobe_core::{Answer, AnswerSet};
use serde::Deserialize;

#[derive(Deserialize)]
struct GoldAnswer {
    canonical: String,
    aliases: Vec<String>,
}

#[derive(Deserialize)]
struct Case {
    generation: String,
    answers: Vec<GoldAnswer>,
    normalized: Vec<String>,
    f1_vs_canonical: Vec<f64>,
    score: f64,
    exact_match: bool,
}

fn load() -> Vec<Case> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/squad_golden.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn golden_cases_match_reference() {
    let cases = load();
    assert_eq!(cases.len(), 50);
    let start = Instant::now();
    for (i, c) in cases.iter().enumerate() {
        assert_eq!(normalize(&c.generation), c.normalized, "case {i} normalize");
        let pred = normalize(&c.generation);
        for (a, want) in c.answers.iter().zip(&c.f1_vs_canonical) {
            let got = token_f1(&pred, &normalize(&a.canonical));
            assert!((got - want).abs() < 1e-9, "case {i} f1 {got} vs {want}");
        }
        // answers are passed unmerged so the alias layout is exactly the oracle's
        let set = AnswerSet {
            answers: c
                .answers
                .iter()
                .map(|a| Answer::new(a.canonical.clone()).with_aliases(a.aliases.clone()))
                .collect(),
        };
        let s = score_query(&c.generation, &set);
        assert!((s.f1 - c.score).abs() < 1e-9, "case {i} score {} vs {}", s.f1, c.score);
        assert_eq!(s.exact_match, c.exact_match, "case {i} exact");
    }
    assert!(start.elapsed().as_secs_f64() < 1.0);
}
