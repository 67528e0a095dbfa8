use std::path::{Path, PathBuf};

use anyhow::Context;
use tracing::info;

use mutaprobe_core::adapter::{self, AdapterClient, AdapterConfig};
use mutaprobe_core::dataset::{read_predictions, read_representations, write_predictions, write_representations};
use mutaprobe_core::eval::{self, AggregateReport, ScoreRecord, TemplatePolicy};
use mutaprobe_core::ingest::{build_benchmark, FixtureKg, IngestConfig, KnowledgeSource, SparqlSource};
use mutaprobe_core::manifest::Manifest;
use mutaprobe_core::probe::{
    make_splits, run_probe, CodelengthReport, ProbeConfig, ProbeRun, SplitSpec, TransmissionSchedule,
};
use mutaprobe_core::report::{self, Rendered};
use mutaprobe_core::seed::RunSeed;
use mutaprobe_core::update::{
    self, UpdateGeneration, UpdateResult, DEFAULT_CONFIDENCE_THRESHOLD, DEFAULT_PERCENTILES,
    REPORTED_PERCENTILES,
};
use mutaprobe_core::{jsonl, Dataset};

use crate::config::{pick, FileConfig};
use crate::{Cli, Command, EvaluateArgs, Failure, IngestArgs, ProbeArgs, ReportArgs, UpdateArgs};

/// Everything resolved before a stage runs.
struct Ctx {
    file: FileConfig,
    seed: Option<u64>,
    adapter_url: Option<String>,
    model: String,
}

impl Ctx {
    fn seed(&self) -> Result<u64, Failure> {
        self.seed.ok_or_else(|| {
            Failure::Usage("a seed is required: pass --seed, set MUTAPROBE_SEED or add `seed` to the config file".into())
        })
    }

    fn adapter(&self, instruction_mode: bool) -> Result<AdapterClient, Failure> {
        let url = self.adapter_url.clone().ok_or_else(|| {
            Failure::Usage("no input file given and no adapter configured (--adapter or MUTAPROBE_ADAPTER_URL)".into())
        })?;
        let mut cfg = AdapterConfig::new(url);
        cfg.workers = self.file.adapter_workers.unwrap_or(1);
        cfg.instruction_mode = instruction_mode;
        Ok(AdapterClient::new(cfg)?)
    }
}

fn require_file(path: &Path, what: &str) -> Result<(), Failure> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::Usage(format!("{what} {} does not exist", path.display())))
    }
}

fn require_dir(path: &Path, what: &str) -> Result<(), Failure> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(Failure::Usage(format!("{what} {} is not a directory", path.display())))
    }
}

pub fn run(cli: Cli) -> Result<(), Failure> {
    let file = match &cli.config {
        Some(p) => {
            require_file(p, "config file")?;
            FileConfig::read(p).map_err(|e| Failure::Usage(format!("{}: {e:#}", p.display())))?
        }
        None => FileConfig::default(),
    };
    let ctx = Ctx {
        seed: cli.seed.or(file.seed),
        adapter_url: cli.adapter_url.or_else(|| file.adapter_url.clone()),
        model: cli.model.or_else(|| file.model.clone()).unwrap_or_else(|| "model".into()),
        file,
    };
    match cli.command {
        Command::Ingest(a) => ingest(&ctx, a),
        Command::Evaluate(a) => evaluate(&ctx, a),
        Command::Probe(a) => probe(&ctx, a),
        Command::Update(a) => run_update(&ctx, a),
        Command::Report(a) => report_cmd(&ctx, a),
    }
}

fn load_dataset(path: &Path) -> Result<Dataset, Failure> {
    Ok(Dataset::read_validated(path).with_context(|| format!("loading dataset {}", path.display()))?)
}

fn write_tables(dir: &Path, name: &str, table: &Rendered) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let txt = dir.join(format!("{name}.txt"));
    let csv = dir.join(format!("{name}.csv"));
    std::fs::write(&txt, table.text.to_text()).with_context(|| format!("writing {}", txt.display()))?;
    std::fs::write(&csv, table.csv.to_csv()).with_context(|| format!("writing {}", csv.display()))?;
    Ok(())
}

fn emit(tables: Option<&PathBuf>, name: &str, title: &str, table: &Rendered) -> Result<(), Failure> {
    println!("{title}\n{}", table.text.to_text());
    if let Some(dir) = tables {
        write_tables(dir, name, table)?;
    }
    Ok(())
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut text = serde_json::to_string_pretty(value).context("serializing report")?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn ingest(ctx: &Ctx, a: IngestArgs) -> Result<(), Failure> {
    if let Some(m) = &a.manifest {
        require_file(m, "manifest")?;
    }
    if let Some(d) = &a.fixture {
        require_dir(d, "fixture directory")?;
    }
    let f = &ctx.file.ingest;
    let mut cfg = IngestConfig::default();
    cfg.subject_limit = pick(a.limit, f.limit, cfg.subject_limit);
    cfg.tau = pick(a.tau, f.tau, cfg.tau);
    cfg.workers = pick(a.workers, f.workers, cfg.workers);
    cfg.profile_sample = a.profile_sample.or(f.profile_sample);
    cfg.allow_empty = a.allow_empty;
    if let Some(e) = a.endpoint.clone().or_else(|| f.endpoint.clone()) {
        cfg.sparql.endpoint = e;
    }
    if let Some(rps) = f.requests_per_second {
        cfg.sparql.requests_per_second = rps;
    }
    cfg.seed = match cfg.profile_sample {
        Some(_) => ctx.seed()?,
        None => ctx.seed.unwrap_or(0),
    };
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;

    let manifest = match &a.manifest {
        Some(p) => Manifest::read(p)?,
        None => Manifest::shipped(),
    };
    let source: Box<dyn KnowledgeSource> = match &a.fixture {
        Some(dir) => Box::new(FixtureKg::load(dir)?),
        None => Box::new(SparqlSource::new(cfg.sparql.clone())?),
    };
    let (dataset, build) = build_benchmark(&cfg, &manifest, source.as_ref())?;
    dataset.write(&a.out)?;
    let rendered = build.render();
    print!("{rendered}");
    if let Some(p) = &a.report {
        std::fs::write(p, &rendered).with_context(|| format!("writing {}", p.display()))?;
    }
    info!(queries = dataset.queries.len(), out = %a.out.display(), "dataset written");
    Ok(())
}

fn aggregate_tables(ctx: &Ctx, report: &AggregateReport, tables: Option<&PathBuf>) -> Result<(), Failure> {
    emit(
        tables,
        "knowledge",
        "Average F1 (%) and confidence per relation class",
        &report::knowledge_table(&[(&ctx.model, report)]),
    )?;
    emit(tables, "relations", "Per-relation F1 (%)", &report::relation_table(report))
}

fn evaluate(ctx: &Ctx, a: EvaluateArgs) -> Result<(), Failure> {
    require_file(&a.dataset, "dataset")?;
    if let Some(p) = &a.predictions {
        require_file(p, "predictions file")?;
    }
    let client = match a.predictions {
        Some(_) => None,
        None => Some(ctx.adapter(a.instruction_mode)?),
    };
    let dataset = load_dataset(&a.dataset)?;
    let predictions = match (&a.predictions, client) {
        (Some(p), _) => read_predictions(p)?,
        (None, Some(c)) => {
            let preds = adapter::predict_dataset(&c, &dataset)?;
            if let Some(p) = &a.save_predictions {
                write_predictions(p, &preds)?;
            }
            preds
        }
        (None, None) => unreachable!("adapter resolved above"),
    };
    let scores = eval::score_predictions(&predictions, &dataset)?;
    jsonl::write(&a.out, &scores)?;

    let best = a.best_template || ctx.file.evaluate.best_template.unwrap_or(false);
    let policy = if best {
        TemplatePolicy::BestTemplate
    } else {
        TemplatePolicy::Mean
    };
    let agg = eval::aggregate(&scores, &dataset, policy)?;
    aggregate_tables(ctx, &agg, a.tables.as_ref())?;
    if let Some(dir) = &a.tables {
        let scatter = eval::confidence_scatter(&scores, &dataset)?;
        std::fs::write(dir.join("scatter.csv"), report::scatter_csv(&scatter)).context("writing scatter.csv")?;
    }
    if agg.unscored_queries > 0 {
        tracing::warn!(count = agg.unscored_queries, "queries without predictions");
    }
    Ok(())
}

fn probe_tables(ctx: &Ctx, r: &CodelengthReport, tables: Option<&PathBuf>) -> Result<(), Failure> {
    emit(
        tables,
        &format!("codelength_{}", r.task),
        "Online codelength (bits) and compression",
        &report::codelength_table(&[(&ctx.model, r)]),
    )?;
    emit(
        tables,
        &format!("frequency_bins_{}", r.task),
        "Test examples per frequency percentile",
        &report::bin_table(&r.mutability.frequency_bins),
    )
}

fn probe(ctx: &Ctx, a: ProbeArgs) -> Result<(), Failure> {
    require_file(&a.dataset, "dataset")?;
    if let Some(p) = &a.representations {
        require_file(p, "representations file")?;
    }
    if let Some(p) = &a.split {
        require_file(p, "split file")?;
    }
    let seed = ctx.seed()?;
    let f = &ctx.file.probe;
    let mut config = ProbeConfig::default();
    if let Some(s) = a.schedule.as_ref().or(f.schedule.as_ref()) {
        config.schedule = TransmissionSchedule::parse(s).map_err(|e| Failure::Usage(format!("--schedule: {e}")))?;
    }
    config.frequency_bins = pick(None, f.frequency_bins, config.frequency_bins);
    let control = if a.no_control {
        false
    } else {
        a.control || f.control.unwrap_or(true)
    };
    let split: SplitSpec = match &a.split {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?
        }
        None => a.task.default_split(),
    };
    let needs_adapter = a.representations.is_none() && a.plan.is_none();
    let client = if needs_adapter || (a.representations.is_none() && ctx.adapter_url.is_some()) {
        Some(ctx.adapter(false)?)
    } else {
        None
    };

    let dataset = load_dataset(&a.dataset)?;
    let splits = make_splits(&dataset, a.task, &split, RunSeed(seed))?;
    if let Some(p) = &a.plan {
        jsonl::write(p, splits.plan())?;
        info!(items = splits.plan().len(), out = %p.display(), "representation plan written");
    }
    let reps = match (&a.representations, client) {
        (Some(p), _) => read_representations(p)?,
        (None, Some(c)) => {
            let reps = adapter::represent_items(&c, &dataset, &splits.plan())?;
            if let Some(p) = &a.save_representations {
                write_representations(p, &reps)?;
            }
            reps
        }
        // plan written, nothing to probe yet
        (None, None) => return Ok(()),
    };

    let run = ProbeRun {
        task: a.task,
        split,
        seed,
        control,
        config,
    };
    let result = run_probe(&dataset, &reps, &run)?;
    if let Some(p) = &a.out {
        write_json(p, &result)?;
    }
    probe_tables(ctx, &result, a.tables.as_ref())
}

fn update_tables(ctx: &Ctx, results: &[UpdateResult], tables: Option<&PathBuf>) -> Result<(), Failure> {
    let percentiles = ctx.file.update.percentiles.unwrap_or(DEFAULT_PERCENTILES);
    let rep = update::frequency_breakdown(results, percentiles);
    emit(
        tables,
        "updates",
        "Successful in-context updates (%)",
        &report::update_table(&[(&ctx.model, &rep)]),
    )?;
    emit(
        tables,
        "update_percentiles",
        "Update success (%) in the highest frequency percentiles",
        &report::percentile_table(&[(&ctx.model, &rep)], REPORTED_PERCENTILES),
    )
}

fn run_update(ctx: &Ctx, a: UpdateArgs) -> Result<(), Failure> {
    require_file(&a.dataset, "dataset")?;
    require_file(&a.scores, "scores file")?;
    if let Some(p) = &a.generations {
        require_file(p, "generations file")?;
    }
    let seed = ctx.seed()?;
    let threshold = pick(a.conf_threshold, ctx.file.update.conf_threshold, DEFAULT_CONFIDENCE_THRESHOLD);
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Failure::Usage(format!("--conf-threshold {threshold} is outside [0, 1]")));
    }
    let client = if a.cases_only || a.generations.is_some() {
        None
    } else {
        Some(ctx.adapter(false)?)
    };

    let dataset = load_dataset(&a.dataset)?;
    let scores: Vec<ScoreRecord> = jsonl::read(&a.scores)?;
    let build = update::build_cases(&dataset, &scores, threshold, RunSeed(seed))?;
    info!(
        memorized = build.memorized,
        cases = build.cases.len(),
        dropped = build.dropped.len(),
        "update cases built"
    );
    if let Some(p) = &a.cases {
        jsonl::write(p, &build.cases)?;
    }
    if a.cases_only {
        return Ok(());
    }
    let generations: Vec<UpdateGeneration> = match (&a.generations, client) {
        (Some(p), _) => jsonl::read(p)?,
        (None, Some(c)) => adapter::generate_updates(&c, &build.cases)?,
        (None, None) => unreachable!("adapter resolved above"),
    };
    let results = update::judge_cases(&build.cases, &generations)?;
    if let Some(p) = &a.out {
        jsonl::write(p, &results)?;
    }
    update_tables(ctx, &results, a.tables.as_ref())
}

fn report_cmd(ctx: &Ctx, a: ReportArgs) -> Result<(), Failure> {
    require_file(&a.scores, "scores file")?;
    require_file(&a.dataset, "dataset")?;
    for p in &a.probes {
        require_file(p, "probe report")?;
    }
    if let Some(p) = &a.updates {
        require_file(p, "update results")?;
    }
    let dataset = load_dataset(&a.dataset)?;
    let scores: Vec<ScoreRecord> = jsonl::read(&a.scores)?;
    let best = a.best_template || ctx.file.evaluate.best_template.unwrap_or(false);
    let policy = if best {
        TemplatePolicy::BestTemplate
    } else {
        TemplatePolicy::Mean
    };
    let agg = eval::aggregate(&scores, &dataset, policy)?;
    aggregate_tables(ctx, &agg, a.tables.as_ref())?;
    if let Some(dir) = &a.tables {
        let scatter = eval::confidence_scatter(&scores, &dataset)?;
        std::fs::write(dir.join("scatter.csv"), report::scatter_csv(&scatter)).context("writing scatter.csv")?;
    }

    let mut probes = Vec::new();
    for p in &a.probes {
        let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        let r: CodelengthReport =
            serde_json::from_str(&text).with_context(|| format!("parsing probe report {}", p.display()))?;
        probes.push(r);
    }
    if !probes.is_empty() {
        let rows: Vec<(&str, &CodelengthReport)> = probes.iter().map(|r| (ctx.model.as_str(), r)).collect();
        emit(
            a.tables.as_ref(),
            "codelength",
            "Online codelength (bits) and compression",
            &report::codelength_table(&rows),
        )?;
        for r in &probes {
            emit(
                a.tables.as_ref(),
                &format!("frequency_bins_{}", r.task),
                &format!("Test examples per frequency percentile ({})", r.task),
                &report::bin_table(&r.mutability.frequency_bins),
            )?;
        }
    }
    if let Some(p) = &a.updates {
        let results: Vec<UpdateResult> = jsonl::read(p)?;
        update_tables(ctx, &results, a.tables.as_ref())?;
    }
    Ok(())
}
