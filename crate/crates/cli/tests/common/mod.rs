//! Drives the `mutaprobe` binary over the fixture knowledge graph with the
//! committed toy-model outputs standing in for a model.

#![allow(dead_code)]

pub mod adapter;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const SEED: &str = "7";

pub fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_mutaprobe"));
    c.env_remove("MUTAPROBE_ADAPTER_URL")
        .env_remove("MUTAPROBE_SEED")
        .env_remove("MUTAPROBE_LOG");
    c
}

pub fn core_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core")
}

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn kg_dir() -> PathBuf {
    core_dir().join("fixtures/kg")
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn mutaprobe")
}

pub fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

/// One stage of the fixture pipeline and how it ended.
pub struct Stage {
    pub name: &'static str,
    pub output: Output,
}

impl Stage {
    pub fn ok(&self) -> bool {
        self.output.status.success()
    }

    pub fn describe(&self) -> String {
        format!(
            "{} exited {:?}: {}",
            self.name,
            self.output.status.code(),
            String::from_utf8_lossy(&self.output.stderr).trim()
        )
    }
}

/// ingest → evaluate → probe (both tasks) → update, writing into `dir`.
/// Stops at the first failing stage.
pub fn pipeline(dir: &Path) -> Vec<Stage> {
    let ds = dir.join("dataset.jsonl");
    let scores = dir.join("scores.jsonl");
    let tables = dir.join("tables");
    let steps: Vec<(&'static str, Vec<String>)> = vec![
        (
            "ingest",
            vec!["ingest".into(), "--fixture".into(), s(&kg_dir()).into(), "--out".into(), s(&ds).into()],
        ),
        (
            "evaluate",
            vec![
                "evaluate".into(),
                "--dataset".into(),
                s(&ds).into(),
                "--predictions".into(),
                s(&fixture("predictions.jsonl")).into(),
                "--out".into(),
                s(&scores).into(),
                "--tables".into(),
                s(&tables).into(),
            ],
        ),
        ("probe imm1", probe_args(dir, "imm1")),
        ("probe immN", probe_args(dir, "immN")),
        (
            "update",
            vec![
                "update".into(),
                "--dataset".into(),
                s(&ds).into(),
                "--scores".into(),
                s(&scores).into(),
                "--seed".into(),
                SEED.into(),
                "--generations".into(),
                s(&fixture("update_generations.jsonl")).into(),
                "--cases".into(),
                s(&dir.join("cases.jsonl")).into(),
                "--out".into(),
                s(&dir.join("updates.jsonl")).into(),
                "--tables".into(),
                s(&tables).into(),
            ],
        ),
    ];
    let mut out = Vec::new();
    for (name, args) in steps {
        let output = bin().args(&args).output().expect("spawn mutaprobe");
        let failed = !output.status.success();
        out.push(Stage { name, output });
        if failed {
            break;
        }
    }
    out
}

fn probe_args(dir: &Path, task: &str) -> Vec<String> {
    vec![
        "probe".into(),
        "--dataset".into(),
        s(&dir.join("dataset.jsonl")).into(),
        "--representations".into(),
        s(&fixture("representations.jsonl")).into(),
        "--task".into(),
        task.into(),
        "--seed".into(),
        SEED.into(),
        "--plan".into(),
        s(&dir.join(format!("plan_{task}.jsonl"))).into(),
        "--out".into(),
        s(&dir.join(format!("probe_{task}.json"))).into(),
        "--tables".into(),
        s(&dir.join("tables")).into(),
    ]
}

/// Every regular file under `dir`, relative path and bytes, sorted.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}
