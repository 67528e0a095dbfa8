//! Acceptance checks, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines always reach stdout; exits non-zero if any fails.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng;
use serde::Deserialize;

use mutaprobe_core::eval::{self, normalize, score_query, token_f1, ScoreRecord};
use mutaprobe_core::ingest::{
    build_benchmark, class_for, classify_cardinality, CardinalityProfile, FixtureEntity, FixtureKg, IngestConfig,
};
use mutaprobe_core::manifest::Manifest;
use mutaprobe_core::probe::synthetic::{synthetic_task, SyntheticSpec};
use mutaprobe_core::probe::{control_labels, make_splits, probe_task, relabel, uniform_codelength, ProbeConfig, ProbeTask};
use mutaprobe_core::seed::RunSeed;
use mutaprobe_core::update::{balance_sample, build_cases, build_update_prompt, judge_update, select_memorized};
use mutaprobe_core::{Answer, AnswerSet, Dataset, EntityId, MutabilityClass};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, msg: impl Into<String>) -> Outcome {
    if ok {
        Ok(msg.into())
    } else {
        Err(msg.into())
    }
}

#[derive(Deserialize)]
struct GoldAnswer {
    canonical: String,
    aliases: Vec<String>,
}

#[derive(Deserialize)]
struct GoldCase {
    generation: String,
    answers: Vec<GoldAnswer>,
    normalized: Vec<String>,
    f1_vs_canonical: Vec<f64>,
    score: f64,
    exact_match: bool,
}

fn f1_oracle() -> Outcome {
    let path = common::core_dir().join("tests/data/squad_golden.json");
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let cases: Vec<GoldCase> = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    if cases.len() != 50 {
        return Err(format!("expected 50 golden cases, found {}", cases.len()));
    }
    let start = Instant::now();
    let mut worst = 0.0f64;
    for (i, c) in cases.iter().enumerate() {
        let pred = normalize(&c.generation);
        if pred != c.normalized {
            return Err(format!("case {i}: normalized {pred:?}, oracle {:?}", c.normalized));
        }
        for (a, want) in c.answers.iter().zip(&c.f1_vs_canonical) {
            worst = worst.max((token_f1(&pred, &normalize(&a.canonical)) - want).abs());
        }
        let set = AnswerSet {
            answers: c
                .answers
                .iter()
                .map(|a| Answer::new(a.canonical.clone()).with_aliases(a.aliases.clone()))
                .collect(),
        };
        let s = score_query(&c.generation, &set);
        worst = worst.max((s.f1 - c.score).abs());
        if s.exact_match != c.exact_match {
            return Err(format!("case {i}: exact match {} vs oracle {}", s.exact_match, c.exact_match));
        }
    }
    let took = start.elapsed();
    check(
        worst <= 1e-9 && took < Duration::from_secs(1),
        format!("50 cases, max |diff| {worst:.1e}, {:.1} ms", took.as_secs_f64() * 1e3),
    )
}

fn uniform_exact() -> Outcome {
    let got: Vec<(usize, f64)> = [1, 100, 6230].iter().map(|&n| (n, uniform_codelength(n, 2))).collect();
    check(got.iter().all(|(n, b)| *b == *n as f64), format!("{got:?}"))
}

fn mdl_separation() -> Outcome {
    let start = Instant::now();
    let spec = SyntheticSpec::default();
    let cfg = ProbeConfig::default();
    let mut passing = 0;
    let mut detail = Vec::new();
    for s in 0..10 {
        let seed = RunSeed(s);
        let task = synthetic_task(&spec, seed);
        if task.train.len() != 2000 || task.train[0].x.len() != 16 {
            return Err(format!("synthetic task is n={} d={}", task.train.len(), task.train[0].x.len()));
        }
        let real = probe_task(&task.train, &task.val, &task.test, &cfg, seed).map_err(|e| e.to_string())?;
        let labels = control_labels(&task.relations(), seed);
        let ctl = probe_task(
            &relabel(&task.train, &labels),
            &relabel(&task.val, &labels),
            &relabel(&task.test, &labels),
            &cfg,
            seed,
        )
        .map_err(|e| e.to_string())?;
        if real.compression >= 5.0 && (0.8..=1.3).contains(&ctl.compression) {
            passing += 1;
        }
        detail.push(format!("{:.1}/{:.2}", real.compression, ctl.compression));
    }
    let took = start.elapsed();
    check(
        passing >= 9 && took < Duration::from_secs(300),
        format!("{passing}/10 seeds, {:.0} s, signal/control {}", took.as_secs_f64(), detail.join(" ")),
    )
}

fn fixture_dataset() -> Result<Dataset, String> {
    let kg = FixtureKg::load(&common::kg_dir()).map_err(|e| e.to_string())?;
    build_benchmark(&IngestConfig::default(), &Manifest::shipped(), &kg)
        .map(|(d, _)| d)
        .map_err(|e| e.to_string())
}

/// A random KG over the shipped manifest with heavy subject reuse.
fn regenerated_dataset(seed: u64) -> Result<Dataset, String> {
    let mut rng = RunSeed(seed).rng("regen");
    let subjects = 120;
    let objects = 400;
    let entities: Vec<FixtureEntity> = (1..=subjects + objects)
        .map(|i| FixtureEntity {
            id: EntityId::new(format!("Q{i}")),
            label: format!("Entity {i}"),
            aliases: vec![],
            sitelinks: rng.random_range(0..300),
        })
        .collect();
    let mut triples = Vec::new();
    for r in &Manifest::shipped().relations {
        for _ in 0..40 {
            let s = EntityId::new(format!("Q{}", rng.random_range(1..=subjects)));
            for _ in 0..rng.random_range(1..4) {
                let o = EntityId::new(format!("Q{}", rng.random_range(subjects + 1..=subjects + objects)));
                triples.push((s.clone(), r.pid.clone(), o));
            }
        }
    }
    let kg = FixtureKg::new(entities, triples);
    build_benchmark(&IngestConfig::default(), &Manifest::shipped(), &kg)
        .map(|(d, _)| d)
        .map_err(|e| e.to_string())
}

fn split_hygiene() -> Outcome {
    let mut datasets = vec![("fixture".to_string(), fixture_dataset()?)];
    for s in 0..5 {
        datasets.push((format!("regenerated#{s}"), regenerated_dataset(s)?));
    }
    let mut checked = 0;
    for (name, ds) in &datasets {
        for task in [ProbeTask::Imm1, ProbeTask::ImmN] {
            for seed in 0..3 {
                let sp = make_splits(ds, task, &task.default_split(), RunSeed(seed)).map_err(|e| format!("{name}: {e}"))?;
                let (r, s) = (sp.relation_overlap(), sp.subject_overlap());
                if !r.is_empty() || !s.is_empty() {
                    return Err(format!("{name} {task} seed {seed}: relations {r:?}, subjects {s:?}"));
                }
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} splits over fixture and 5 regenerated KGs, no overlap"))
}

fn cardinality_partition() -> Outcome {
    let manifest = Manifest::shipped();
    let mut counts: BTreeMap<MutabilityClass, usize> = BTreeMap::new();
    for r in &manifest.relations {
        let profile = CardinalityProfile {
            pid: r.pid.clone(),
            sample_size: 0,
            mean_objects: r.mean_objects,
            std_objects: r.std_objects,
        };
        let class = class_for(r.mutability.is_mutable(), classify_cardinality(&profile, 1.3));
        if class != r.mutability {
            return Err(format!("{} (mean {}) lands in {class}, listed as {}", r.pid, r.mean_objects, r.mutability));
        }
        *counts.entry(class).or_default() += 1;
    }
    let got: Vec<usize> = MutabilityClass::ALL.iter().map(|c| counts.get(c).copied().unwrap_or(0)).collect();
    check(got == [12, 10, 13], format!("{}/{}/{}", got[0], got[1], got[2]))
}

fn update_protocol() -> Outcome {
    let cases = [
        ("[X]'s capital city is [Y]", "The capital of [X] is [Y].", "Germany", "Munich",
         "Imagine that Germany's capital city is Munich. Then, The capital of Germany is"),
        ("[X] was born in the city of [Y].", "[X] was born in the location of [Y].", "Aristotle", "Athens",
         "Imagine that Aristotle was born in the city of Athens. Then, Aristotle was born in the location of"),
        ("[X] is coached by [Y].", "The head coach of [X] is [Y].", "Rafael Nadal", "Carlos Moyá",
         "Imagine that Rafael Nadal is coached by Carlos Moyá. Then, The head coach of Rafael Nadal is"),
        ("[X] shares a border with [Y].", "[X] shares border with [Y].", "Chile", "Brazil",
         "Imagine that Chile shares a border with Brazil. Then, Chile shares border with"),
        ("[X] is employed by [Y].", "[X] works for the employer [Y].", "Ann Lee", "Initech Inc.",
         "Imagine that Ann Lee is employed by Initech Inc. Then, Ann Lee works for the employer"),
        ("[X] plays for the team [Y].", "[X] is a member of the sports team [Y].", "Lionel Messi", "Inter Miami",
         "Imagine that Lionel Messi plays for the team Inter Miami. Then, Lionel Messi is a member of the sports team"),
        ("The head of government of [X] is [Y]", "[X]'s head of government is [Y].", "Chile", "Ana Diaz",
         "Imagine that The head of government of Chile is Ana Diaz. Then, Chile's head of government is"),
        ("[X] resides in the city of [Y]. ", "[X] lives in the location of [Y].", "Bo", "Oslo",
         "Imagine that Bo resides in the city of Oslo. Then, Bo lives in the location of"),
        ("The chair of [X] is [Y].", "The chairperson of [X] is [Y].", "Acme Corp.", "Jane Roe",
         "Imagine that The chair of Acme Corp. is Jane Roe. Then, The chairperson of Acme Corp. is"),
        ("[X] is signed to the record label [Y].", "The record label of [X] is [Y].", "A [Y] Band", "Sub Pop",
         "Imagine that A [Y] Band is signed to the record label Sub Pop. Then, The record label of A [Y] Band is"),
    ];
    for (u, q, subj, obj, want) in cases {
        let got = build_update_prompt(u, q, subj, obj).map_err(|e| e.to_string())?;
        if got != want {
            return Err(format!("prompt {got:?}, expected {want:?}"));
        }
    }
    let judged = [
        judge_update("Munich", "Munich"),
        judge_update("Munich, Germany", "Munich"),
        !judge_update("Berlin", "Munich"),
    ];
    if judged.contains(&false) {
        return Err(format!("judge examples {judged:?}"));
    }

    // balance on the fixture with the golden predictions
    let ds = fixture_dataset()?;
    let preds = mutaprobe_core::dataset::read_predictions(&common::fixture("predictions.jsonl")).map_err(|e| e.to_string())?;
    let scores: Vec<ScoreRecord> = eval::score_predictions(&preds, &ds).map_err(|e| e.to_string())?;
    let best = eval::best_templates(&scores, &ds).map_err(|e| e.to_string())?;
    let memorized = select_memorized(&scores, &ds, &best, 0.8).map_err(|e| e.to_string())?;
    let mut before: BTreeMap<MutabilityClass, usize> = BTreeMap::new();
    for m in &memorized {
        *before.entry(m.class).or_default() += 1;
    }
    let mut sizes = Vec::new();
    for s in 0..10 {
        let sample = balance_sample(&memorized, RunSeed(s)).map_err(|e| e.to_string())?;
        let mut per: BTreeMap<MutabilityClass, usize> = BTreeMap::new();
        for m in &sample {
            *per.entry(m.class).or_default() += 1;
        }
        let c: Vec<usize> = per.values().copied().collect();
        if c.len() != 3 || c.iter().any(|&x| x != c[0]) {
            return Err(format!("seed {s}: unequal class counts {per:?}"));
        }
        let built = build_cases(&ds, &scores, 0.8, RunSeed(s)).map_err(|e| e.to_string())?;
        let mut per: BTreeMap<MutabilityClass, usize> = BTreeMap::new();
        for c in &built.cases {
            *per.entry(c.class).or_default() += 1;
        }
        let c: Vec<usize> = per.values().copied().collect();
        if c.len() != 3 || c.iter().any(|&x| x != c[0]) {
            return Err(format!("seed {s}: unequal case counts {per:?}"));
        }
        sizes.push(c[0]);
    }
    let before: Vec<usize> = before.values().copied().collect();
    Ok(format!(
        "10 prompts, 3 judge examples, memorized {before:?} balanced to {} per class over 10 seeds",
        sizes[0]
    ))
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    for dir in [a.path(), b.path()] {
        if let Some(st) = common::pipeline(dir).into_iter().find(|s| !s.ok()) {
            return Err(st.describe());
        }
    }
    let (sa, sb) = (common::snapshot(a.path()), common::snapshot(b.path()));
    let names: Vec<&str> = sa.iter().map(|(n, _)| n.as_str()).collect();
    if names != sb.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>() {
        return Err("runs produced different file sets".into());
    }
    if let Some(((n, _), _)) = sa.iter().zip(&sb).find(|(x, y)| x.1 != y.1) {
        return Err(format!("{n} differs between runs"));
    }
    // library stages, same seed twice
    let spec = SyntheticSpec::default();
    let cfg = ProbeConfig::default();
    let t = synthetic_task(&spec, RunSeed(3));
    let x = probe_task(&t.train, &t.val, &t.test, &cfg, RunSeed(3)).map_err(|e| e.to_string())?;
    let y = probe_task(&t.train, &t.val, &t.test, &cfg, RunSeed(3)).map_err(|e| e.to_string())?;
    let same = serde_json::to_string(&x).ok() == serde_json::to_string(&y).ok();
    check(same, format!("{} output files byte-identical across two seeded runs", sa.len()))
}

fn fixture_end_to_end() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let stages = common::pipeline(dir.path());
    let took = start.elapsed();
    if let Some(st) = stages.iter().find(|s| !s.ok()) {
        return Err(st.describe());
    }
    let names: Vec<&str> = stages.iter().map(|s| s.name).collect();
    let expected = ["dataset.jsonl", "scores.jsonl", "probe_imm1.json", "probe_immN.json", "updates.jsonl"];
    let missing: Vec<&&str> = expected.iter().filter(|f| !Path::new(dir.path()).join(f).is_file()).collect();
    if !missing.is_empty() {
        return Err(format!("missing outputs {missing:?}"));
    }
    check(
        took < Duration::from_secs(120),
        format!("{} exit 0 in {:.1} s, no adapter", names.join(" -> "), took.as_secs_f64()),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("F1 oracle equivalence", f1_oracle),
        ("uniform codelength exactness", uniform_exact),
        ("MDL separation at desk scale", mdl_separation),
        ("split hygiene", split_hygiene),
        ("cardinality partition", cardinality_partition),
        ("update protocol correctness", update_protocol),
        ("determinism", determinism),
        ("fixture end-to-end", fixture_end_to_end),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("PASS {}. {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {}. {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} acceptance criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
