//! A deterministic stand-in for a language model, used to produce the
//! golden files the end-to-end tests run on.
//!
//! ```text
//! toy_model predictions     <dataset.jsonl> <out.jsonl>
//! toy_model representations <dataset.jsonl> <out.jsonl>
//! toy_model updates         <cases.jsonl>   <out.jsonl>
//! ```
//!
//! Every output is a pure function of the input: answers are right with a
//! class-dependent probability keyed on a hash of the query, and the hidden
//! state carries the mutability label along one fixed direction.

use std::path::Path;
use std::process::ExitCode;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use mutaprobe_core::cloze;
use mutaprobe_core::dataset::{write_predictions, write_representations};
use mutaprobe_core::jsonl;
use mutaprobe_core::seed::{fnv1a, unit_hash};
use mutaprobe_core::update::{UpdateCase, UpdateGeneration};
use mutaprobe_core::{
    Dataset, MutabilityClass, MutabilityLabel, PredictionRecord, RepresentationRecord, TEMPLATES_PER_RELATION,
};

const DIM: usize = 16;
const SIGNAL: f64 = 10.0;
const NOISE: f64 = 2.0;

fn recall(class: MutabilityClass) -> f64 {
    match class {
        MutabilityClass::Immutable1 => 0.7,
        MutabilityClass::ImmutableN => 0.55,
        MutabilityClass::Mutable => 0.35,
    }
}

fn update_rate(class: MutabilityClass) -> f64 {
    match class {
        MutabilityClass::Immutable1 => 0.55,
        MutabilityClass::ImmutableN => 0.7,
        MutabilityClass::Mutable => 0.85,
    }
}

fn predictions(dataset: &Dataset) -> Result<Vec<PredictionRecord>, String> {
    let rels = dataset.relation_index();
    let mut out = Vec::new();
    for (qi, q) in dataset.queries.iter().enumerate() {
        let rel = rels[&q.query.relation_pid];
        for t in 0..TEMPLATES_PER_RELATION {
            let prompt = cloze::prompt(&rel.templates[t], &q.query.subject_label).map_err(|e| e.to_string())?;
            let key = format!("{}#{t}", q.query.query_id);
            // some templates suit the model better than others
            let bias = 0.15 * (t as f64 - 2.0) / 2.0;
            let hit = unit_hash(&key) < recall(rel.mutability) + bias;
            let conf = unit_hash(&format!("{key}#conf"));
            let (generation, p) = if hit {
                let a = &q.answers.answers[0];
                (format!(" {}, which is well known", a.canonical), 0.55 + 0.45 * conf)
            } else {
                // a plausible wrong entity: the first answer of another query
                let other = &dataset.queries[(qi + 1 + t) % dataset.queries.len()];
                let wrong = &other.answers.answers[0].canonical;
                let wrong = if q.answers.iter().any(|a| &a.canonical == wrong) {
                    "unknown".to_string()
                } else {
                    wrong.clone()
                };
                (format!(" {wrong}."), 0.05 + 0.6 * conf)
            };
            out.push(PredictionRecord {
                query_id: q.query.query_id.clone(),
                template_index: t,
                prompt,
                generation,
                first_token_probability: p,
            });
        }
    }
    Ok(out)
}

fn representations(dataset: &Dataset) -> Vec<RepresentationRecord> {
    let mut dir_rng = ChaCha8Rng::seed_from_u64(fnv1a(b"direction"));
    let direction: Vec<f64> = (0..DIM).map(|_| if dir_rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
    let noise = Normal::new(0.0, NOISE).expect("positive std");
    let classes: std::collections::HashMap<_, _> =
        dataset.relations.iter().map(|r| (&r.pid, r.mutability)).collect();

    let mut out = Vec::new();
    for q in &dataset.queries {
        let label = MutabilityLabel::of(classes[&q.query.relation_pid]);
        let sign = if label == MutabilityLabel::Mutable { 1.0 } else { -1.0 };
        for t in 0..TEMPLATES_PER_RELATION {
            for a in q.answers.iter() {
                let key = format!("{}#{t}#{}", q.query.query_id, a.canonical);
                let mut rng = ChaCha8Rng::seed_from_u64(fnv1a(key.as_bytes()));
                let vector = direction
                    .iter()
                    .map(|d| (sign * SIGNAL * d / 4.0 + noise.sample(&mut rng)) as f32)
                    .collect();
                out.push(RepresentationRecord {
                    query_id: q.query.query_id.clone(),
                    template_index: t,
                    object_used: a.canonical.clone(),
                    vector,
                    label,
                });
            }
        }
    }
    out
}

fn updates(cases: &[UpdateCase]) -> Vec<UpdateGeneration> {
    cases
        .iter()
        .map(|c| {
            let adopt = unit_hash(&format!("{}#update", c.query_id)) < update_rate(c.class);
            let answer = if adopt { &c.new_object } else { &c.original_object };
            UpdateGeneration {
                query_id: c.query_id.clone(),
                prompt: c.prompt.clone(),
                generation: format!(" {answer}."),
            }
        })
        .collect()
}

fn run(args: &[String]) -> Result<(), String> {
    let [mode, input, output] = args else {
        return Err("usage: toy_model <predictions|representations|updates> <in> <out>".into());
    };
    let (input, output) = (Path::new(input), Path::new(output));
    match mode.as_str() {
        "predictions" => {
            let ds = Dataset::read(input).map_err(|e| e.to_string())?;
            write_predictions(output, &predictions(&ds)?).map_err(|e| e.to_string())
        }
        "representations" => {
            let ds = Dataset::read(input).map_err(|e| e.to_string())?;
            write_representations(output, &representations(&ds)).map_err(|e| e.to_string())
        }
        "updates" => {
            let cases: Vec<UpdateCase> = jsonl::read(input).map_err(|e| e.to_string())?;
            jsonl::write(output, &updates(&cases)).map_err(|e| e.to_string())
        }
        other => Err(format!("unknown mode {other}")),
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::FAILURE
        }
    }
}
