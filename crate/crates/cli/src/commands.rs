//! Subcommand implementations. Each returns the number of items that failed;
//! an `Err` means nothing useful could be done.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use aps_core::formats::{
    parse_grouped_output, parse_ungrouped_output, render_grouped, render_ungrouped, TrainingRecord,
};
use aps_core::jsonl::{read_jsonl, write_atomic, write_jsonl, ExampleRecord};
use aps_core::metrics::{aggregate, evaluate_each, pearson, sentence_baseline, MetricError, MetricReport};
use aps_core::rose::{run_pipeline, split_train_dev, AlignmentDiagnostics};
use aps_core::synth::{
    build_distillation_records, discover_domains, generate_texts, ngram_overlap_filter, CorpusConfig, DistillConfig,
    GeneratedText, HttpGenerationClient, SeedExample, GEN_ENDPOINT_ENV,
};
use aps_core::{DatasetExample, Passage};
use log::info;
use serde::{Deserialize, Serialize};

use crate::config::ToolConfig;
use crate::{Command, ModeArg, SynthCommand};

pub fn dispatch(cmd: &Command, cfg: &ToolConfig, out: &mut dyn Write) -> Result<usize> {
    match cmd {
        Command::Evaluate { input, predictions, report, per_example } => {
            let input = pick(input, &cfg.paths.input, "--input")?;
            let report = report.clone().or_else(|| cfg.paths.report.clone());
            cmd_evaluate(out, cfg, &input, predictions, report.as_deref(), per_example.as_deref())
        }
        Command::Render { input, output, mode } => {
            let (input, output) = io_pair(cfg, input, output)?;
            cmd_render(cfg, &input, &output, *mode)
        }
        Command::ParseOutput { input, output, dataset, mode, quarantine } => {
            let (input, output) = io_pair(cfg, input, output)?;
            cmd_parse_output(cfg, &input, &output, dataset.as_deref(), *mode, quarantine.as_deref())
        }
        Command::Align { input, output, discards } => {
            let (input, output) = io_pair(cfg, input, output)?;
            cmd_align(out, cfg, &input, &output, discards.as_deref())
        }
        Command::Split { input, train, dev, dev_fraction } => {
            let input = pick(input, &cfg.paths.input, "--input")?;
            cmd_split(out, cfg, &input, train, dev, *dev_fraction)
        }
        Command::Synth { command, gen_endpoint } => cmd_synth(out, cfg, command, gen_endpoint.as_deref()),
        Command::Correlate { input } => cmd_correlate(out, &pick(input, &cfg.paths.input, "--input")?),
        Command::Baseline { input, output } => {
            let (input, output) = io_pair(cfg, input, output)?;
            cmd_baseline(&input, &output)
        }
    }
}

fn pick(flag: &Option<PathBuf>, fallback: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
    match flag.as_ref().or(fallback.as_ref()) {
        Some(p) => Ok(p.clone()),
        None => bail!("{name} is required (flag or config paths)"),
    }
}

fn io_pair(cfg: &ToolConfig, input: &Option<PathBuf>, output: &Option<PathBuf>) -> Result<(PathBuf, PathBuf)> {
    let input = pick(input, &cfg.paths.input, "--input")?;
    let output = pick(output, &cfg.paths.output, "--output")?;
    distinct(&input, [Some(output.as_path())])?;
    Ok((input, output))
}

fn distinct<'a>(input: &Path, outputs: impl IntoIterator<Item = Option<&'a Path>>) -> Result<()> {
    for out in outputs.into_iter().flatten() {
        if out == input {
            bail!("output {} would overwrite the input", out.display());
        }
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut body = serde_json::to_string_pretty(value)?;
    body.push('\n');
    write_atomic(path, body.as_bytes()).with_context(|| format!("writing {}", path.display()))
}

fn load_dataset(path: &Path) -> Result<Vec<DatasetExample>> {
    let records: Vec<ExampleRecord> = read_jsonl(path)?;
    let examples = records
        .iter()
        .map(|r| r.to_example())
        .collect::<Result<Vec<_>, _>>()
        .with_context(|| format!("loading {}", path.display()))?;
    if examples.is_empty() {
        bail!("{} contains no examples", path.display());
    }
    Ok(examples)
}

fn pct(x: f64) -> String {
    format!("{:.2}", x * 100.0)
}

/// Plain P/R/F1 table in percent.
pub fn format_report(report: &MetricReport) -> String {
    let mut out = format!("{:<4}{:>8}{:>8}{:>8}\n", "", "P", "R", "F1");
    let _ = writeln!(out, "{:<4}{:>8}{:>8}{:>8}", "RF", pct(report.rf_p), pct(report.rf_r), pct(report.rf_f1));
    if let (Some(p), Some(r), Some(f)) = (report.rb_p, report.rb_r, report.rb_f1) {
        let _ = writeln!(out, "{:<4}{:>8}{:>8}{:>8}", "RB", pct(p), pct(r), pct(f));
    }
    let _ = writeln!(out, "examples: {}  avg propositions: {:.2}", report.n_examples, report.avg_props);
    out
}

pub fn cmd_evaluate(
    out: &mut dyn Write,
    cfg: &ToolConfig,
    dataset: &Path,
    predictions: &Path,
    report_path: Option<&Path>,
    per_example: Option<&Path>,
) -> Result<usize> {
    distinct(dataset, [report_path, per_example])?;
    distinct(predictions, [report_path, per_example])?;
    let examples = load_dataset(dataset)?;
    let records: Vec<ExampleRecord> = read_jsonl(predictions)?;
    let mut by_id: HashMap<String, ExampleRecord> = HashMap::with_capacity(records.len());
    for rec in records {
        if by_id.contains_key(&rec.id) {
            bail!("duplicate prediction id {}", rec.id);
        }
        by_id.insert(rec.id.clone(), rec);
    }

    let mut failed = 0;
    let mut matched = Vec::with_capacity(examples.len());
    let mut preds = Vec::with_capacity(examples.len());
    for ex in examples {
        match by_id.remove(ex.id()).map(|r| r.propositions()) {
            None => {
                eprintln!("example {}: no prediction", ex.id());
                failed += 1;
            }
            Some(Err(e)) => {
                eprintln!("{e}");
                failed += 1;
            }
            Some(Ok(p)) => {
                matched.push(ex);
                preds.push(p);
            }
        }
    }
    let mut orphans: Vec<_> = by_id.into_keys().collect();
    orphans.sort();
    for id in orphans {
        eprintln!("prediction {id}: no such example in the dataset");
        failed += 1;
    }

    let scorer = cfg.scorer.build()?;
    let mut scores = Vec::with_capacity(matched.len());
    for result in evaluate_each(&matched, &preds, scorer.as_ref(), cfg.concurrency) {
        match result {
            Ok(s) => scores.push(s),
            Err(e) => {
                eprintln!("{e}");
                failed += 1;
            }
        }
    }
    let Some(report) = aggregate(&scores) else {
        eprintln!("no example could be scored");
        return Ok(failed.max(1));
    };
    write!(out, "{}", format_report(&report))?;
    if let Some(path) = report_path {
        write_json(path, &report)?;
    }
    if let Some(path) = per_example {
        write_jsonl(path, &scores)?;
    }
    Ok(failed)
}

pub fn cmd_render(cfg: &ToolConfig, input: &Path, output: &Path, mode: ModeArg) -> Result<usize> {
    let examples = load_dataset(input)?;
    let mut out: Vec<TrainingRecord> = Vec::with_capacity(examples.len());
    let mut failed = 0;
    for ex in &examples {
        let rendered = match mode {
            ModeArg::Grouped => render_grouped(&ex.passage, &ex.gold, &cfg.format),
            ModeArg::Ungrouped => render_ungrouped(&ex.passage, &ex.gold, &cfg.format),
        };
        match rendered {
            Ok(r) => out.push(r),
            Err(e) => {
                eprintln!("example {}: {e}", ex.id());
                failed += 1;
            }
        }
    }
    write_jsonl(output, &out)?;
    info!("rendered {} of {} examples", out.len(), examples.len());
    Ok(failed)
}

#[derive(Debug, Deserialize)]
struct RawOutput {
    id: String,
    output: String,
    #[serde(default)]
    text: Option<String>,
}

#[derive(Debug, Serialize)]
struct ParseFailure<'a> {
    id: &'a str,
    raw: &'a str,
    error: String,
}

pub fn cmd_parse_output(
    cfg: &ToolConfig,
    input: &Path,
    output: &Path,
    dataset: Option<&Path>,
    mode: ModeArg,
    quarantine: Option<&Path>,
) -> Result<usize> {
    distinct(input, [quarantine])?;
    let rows: Vec<RawOutput> = read_jsonl(input)?;
    let texts: HashMap<String, String> = match dataset {
        Some(path) => load_dataset(path)?.into_iter().map(|ex| (ex.passage.id, ex.passage.text)).collect(),
        None => HashMap::new(),
    };
    let mut parsed = Vec::with_capacity(rows.len());
    let mut bad = Vec::new();
    for row in &rows {
        let text = row.text.as_ref().or_else(|| texts.get(&row.id));
        let result = match (mode, text) {
            (ModeArg::Grouped, None) => Err("passage text unavailable (add \"text\" or pass --dataset)".to_owned()),
            (ModeArg::Grouped, Some(text)) => {
                let passage = Passage::new(row.id.clone(), text.clone());
                parse_grouped_output(&row.output, passage.sentences.len(), &cfg.format).map_err(|e| e.to_string())
            }
            (ModeArg::Ungrouped, _) => parse_ungrouped_output(&row.output, &cfg.format).map_err(|e| e.to_string()),
        };
        match result {
            Ok(props) => {
                parsed.push(ExampleRecord::from_parts(&row.id, text.map(String::as_str), &props, BTreeMap::new()))
            }
            Err(error) => {
                eprintln!("output {}: {error}", row.id);
                bad.push(ParseFailure { id: &row.id, raw: &row.output, error });
            }
        }
    }
    write_jsonl(output, &parsed)?;
    if let Some(path) = quarantine {
        write_jsonl(path, &bad)?;
    }
    Ok(bad.len())
}

#[derive(Debug, Serialize)]
struct DiscardRecord {
    #[serde(flatten)]
    record: ExampleRecord,
    reason: &'static str,
    diagnostics: AlignmentDiagnostics,
}

pub fn cmd_align(
    out: &mut dyn Write,
    cfg: &ToolConfig,
    input: &Path,
    output: &Path,
    discards: Option<&Path>,
) -> Result<usize> {
    distinct(input, [discards])?;
    let raw = load_dataset(input)?;
    let scorer = cfg.scorer.build()?;
    let res = run_pipeline(&raw, &cfg.alignment, scorer.as_ref(), cfg.concurrency)?;
    let kept: Vec<ExampleRecord> = res.kept.iter().map(ExampleRecord::from_example).collect();
    write_jsonl(output, &kept)?;
    if let Some(path) = discards {
        let audit: Vec<DiscardRecord> = res
            .discarded
            .iter()
            .map(|d| DiscardRecord {
                record: ExampleRecord::from_example(&d.example),
                reason: d.status.reason(),
                diagnostics: d.diagnostics.clone(),
            })
            .collect();
        write_jsonl(path, &audit)?;
    }
    for f in &res.failures {
        eprintln!("example {}: {}", f.id, f.error);
    }
    writeln!(out, "{}", serde_json::to_string(&res.report)?)?;
    Ok(res.report.errored)
}

pub fn cmd_split(
    out: &mut dyn Write,
    cfg: &ToolConfig,
    input: &Path,
    train: &Path,
    dev: &Path,
    dev_fraction: f64,
) -> Result<usize> {
    distinct(input, [Some(train), Some(dev)])?;
    if train == dev {
        bail!("--train and --dev must differ");
    }
    let records: Vec<ExampleRecord> = read_jsonl(input)?;
    if records.is_empty() {
        bail!("{} contains no examples", input.display());
    }
    let (tr, dv) = split_train_dev(&records, dev_fraction, cfg.seed)?;
    write_jsonl(train, &tr)?;
    write_jsonl(dev, &dv)?;
    writeln!(out, "train: {}  dev: {}", tr.len(), dv.len())?;
    Ok(0)
}

pub fn cmd_baseline(input: &Path, output: &Path) -> Result<usize> {
    let examples = load_dataset(input)?;
    write_jsonl(output, &baseline_records(&examples))?;
    Ok(0)
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum CorrelationRow {
    Paired { metric: String, value: f64, human: f64 },
    Columns { metric: String, values: Vec<f64>, human: Vec<f64> },
}

/// Pearson coefficient per metric name, in first-seen order.
pub fn correlations(path: &Path) -> Result<Vec<(String, Result<f64, MetricError>)>> {
    let rows: Vec<CorrelationRow> = read_jsonl(path)?;
    if rows.is_empty() {
        bail!("{} contains no rows", path.display());
    }
    let mut order: Vec<String> = Vec::new();
    let mut series: HashMap<String, (Vec<f64>, Vec<f64>)> = HashMap::new();
    for row in rows {
        let (metric, xs, ys) = match row {
            CorrelationRow::Paired { metric, value, human } => (metric, vec![value], vec![human]),
            CorrelationRow::Columns { metric, values, human } => {
                if values.len() != human.len() {
                    bail!("metric {metric}: {} values but {} human judgments", values.len(), human.len());
                }
                (metric, values, human)
            }
        };
        let entry = series.entry(metric.clone()).or_insert_with(|| {
            order.push(metric);
            (Vec::new(), Vec::new())
        });
        entry.0.extend(xs);
        entry.1.extend(ys);
    }
    Ok(order
        .into_iter()
        .map(|m| {
            let (xs, ys) = &series[&m];
            let r = pearson(xs, ys);
            (m, r)
        })
        .collect())
}

pub fn cmd_correlate(out: &mut dyn Write, input: &Path) -> Result<usize> {
    let mut failed = 0;
    for (metric, r) in correlations(input)? {
        match r {
            Ok(r) => writeln!(out, "{metric}\t{r:.4}")?,
            Err(e) => {
                eprintln!("{metric}: {e}");
                failed += 1;
            }
        }
    }
    Ok(failed)
}

fn generation_client(cfg: &ToolConfig, flag: Option<&str>) -> Result<HttpGenerationClient> {
    let endpoint = flag.map(str::to_owned).or_else(|| cfg.generation.endpoint.clone());
    let Some(endpoint) = endpoint else {
        bail!("no generation endpoint (set --gen-endpoint or {GEN_ENDPOINT_ENV})");
    };
    Ok(HttpGenerationClient::new(endpoint, cfg.generation.timeout()))
}

fn load_seeds(path: &Path) -> Result<Vec<SeedExample>> {
    let seeds: Vec<SeedExample> = read_jsonl(path)?;
    if seeds.is_empty() {
        bail!("{} contains no seed examples", path.display());
    }
    Ok(seeds)
}

fn corpus_config(cfg: &ToolConfig, checkpoint: Option<&Path>) -> CorpusConfig {
    CorpusConfig {
        temperature: cfg.generation.temperature,
        max_attempts: cfg.generation.max_attempts,
        retry_delay: cfg.generation.retry_delay(),
        concurrency: cfg.concurrency,
        checkpoint_path: checkpoint.map(Path::to_path_buf),
        ..CorpusConfig::default()
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let raw = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(raw.lines().map(str::trim).filter(|l| !l.is_empty()).map(str::to_owned).collect())
}

pub fn cmd_synth(out: &mut dyn Write, cfg: &ToolConfig, cmd: &SynthCommand, endpoint: Option<&str>) -> Result<usize> {
    match cmd {
        SynthCommand::Domains { seeds, output, calls, checkpoint } => {
            distinct(seeds, [Some(output.as_path()), checkpoint.as_deref()])?;
            let seeds = load_seeds(seeds)?;
            let client = generation_client(cfg, endpoint)?;
            let corpus = CorpusConfig { n_domain_calls: *calls, ..corpus_config(cfg, checkpoint.as_deref()) };
            let (domains, failures) = discover_domains(&client, &seeds, &corpus)?;
            write_json(output, &domains)?;
            for f in &failures {
                eprintln!("{}: {}", f.call, f.error);
            }
            writeln!(out, "discovered {} domains", domains.len())?;
            Ok(failures.len())
        }
        SynthCommand::Texts { seeds, domains, allowlist, per_pair, output, checkpoint } => {
            distinct(seeds, [Some(output.as_path()), checkpoint.as_deref()])?;
            let seeds = load_seeds(seeds)?;
            let raw = std::fs::read_to_string(domains).with_context(|| format!("reading {}", domains.display()))?;
            let discovered: Vec<String> =
                serde_json::from_str(&raw).with_context(|| format!("parsing {}", domains.display()))?;
            let allow = allowlist.as_deref().map(read_lines).transpose()?;
            let selected = aps_core::synth::select_domains(&discovered, allow.as_deref());
            let client = generation_client(cfg, endpoint)?;
            let corpus = CorpusConfig { texts_per_pair: *per_pair, ..corpus_config(cfg, checkpoint.as_deref()) };
            let (texts, failures) = generate_texts(&client, &seeds, &selected, &corpus)?;
            write_jsonl(output, &texts)?;
            for f in &failures {
                eprintln!("{}: {}", f.call, f.error);
            }
            writeln!(out, "{} texts for {} domains", texts.len(), selected.len())?;
            Ok(failures.len())
        }
        SynthCommand::Filter { seeds, input, output, dropped, ngram } => {
            distinct(input, [Some(output.as_path()), dropped.as_deref()])?;
            let seeds = load_seeds(seeds)?;
            let texts: Vec<GeneratedText> = read_jsonl(input)?;
            let seed_texts: Vec<&str> = seeds.iter().map(|s| s.text.as_str()).collect();
            let (kept, gone) = ngram_overlap_filter(texts, &seed_texts, *ngram)?;
            write_jsonl(output, &kept)?;
            if let Some(path) = dropped {
                write_jsonl(path, &gone)?;
            }
            writeln!(out, "kept {}  dropped {}", kept.len(), gone.len())?;
            Ok(0)
        }
        SynthCommand::Distill { input, output, training, quarantine, teacher_id } => {
            distinct(input, [Some(output.as_path()), training.as_deref(), quarantine.as_deref()])?;
            let texts: Vec<GeneratedText> = read_jsonl(input)?;
            let client = generation_client(cfg, endpoint)?;
            let distill = DistillConfig {
                teacher_id: teacher_id.clone(),
                concurrency: cfg.concurrency,
                max_attempts: cfg.generation.max_attempts,
                retry_delay: cfg.generation.retry_delay(),
            };
            let res = build_distillation_records(&texts, &client, &distill, &cfg.format)?;
            write_jsonl(output, &res.records)?;
            if let Some(path) = training {
                write_jsonl(path, &res.training)?;
            }
            if let Some(path) = quarantine {
                write_jsonl(path, &res.quarantined)?;
            }
            for q in &res.quarantined {
                eprintln!("{}: {}", q.source_id, q.error);
            }
            writeln!(out, "labeled {}  quarantined {}", res.records.len(), res.quarantined.len())?;
            Ok(res.quarantined.len())
        }
    }
}

/// Prediction records for `examples`, one proposition per sentence.
pub fn baseline_records(examples: &[DatasetExample]) -> Vec<ExampleRecord> {
    examples
        .iter()
        .map(|ex| {
            ExampleRecord::from_parts(ex.id(), Some(&ex.passage.text), &sentence_baseline(&ex.passage), BTreeMap::new())
        })
        .collect()
}
