use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rnncache::characterize::{
    cache_dataset, characterizer_dataset, evaluate_characterizer, split_holdout, train_cache_samples,
    train_cache_selected, train_characterizer, CacheDecisionModel, CharacterizerModel, ADMIT_HEAD, CACHE_HIDDEN,
    CACHE_LAYERS, DURATION_HEAD,
};
use rnncache::engine::{
    compare_report, improvement_metric, improvement_percent, report_text, write_report_files,
    ModelRegistry, REPORT_HEADER,
};
use rnncache::nn::{evaluate, load_model, save_model, EpochStats, Sample, TrainConfig};
use rnncache::oracle::{aggregate_page_stats, oracle_replay, parse_labeled, write_labeled_string};
use rnncache::policies::PolicyKind;
use rnncache::trace::{
    cyclic_scan, generate_scenario, generate_synthetic, parse_trace, trace_profile, write_trace_string,
    GeneratorProfile, Scenario, Trace,
};
use serde::Deserialize;

use crate::config::{parse_category, parse_policies, RunConfig};
use crate::{Common, GenArgs, LabelArgs, ModelKind, ReportArgs, SimArgs, TrainArgs, UsageError};

const CACHE_DEFAULT_EPOCHS: usize = 40;
const CACHE_DEFAULT_LR: f64 = 0.003;
const DEFAULT_POLICIES: [PolicyKind; 5] = [
    PolicyKind::Lru,
    PolicyKind::Access,
    PolicyKind::Larc,
    PolicyKind::OracleBenefit,
    PolicyKind::Belady,
];

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .context("writing stdout"),
    }
}

fn seed(common: &Common, cfg: &RunConfig) -> u64 {
    common.seed.or(cfg.seed).unwrap_or(0)
}

/// Explicit capacity, else the configured one, else 20% of the working set.
fn capacity(common: &Common, cfg: &RunConfig, trace: &Trace) -> Result<usize> {
    match common.capacity.or(cfg.capacity) {
        Some(0) => Err(usage("capacity: must be at least 1 page")),
        Some(c) => Ok(c),
        None => Ok((trace.working_set_pages() / 5).max(1)),
    }
}

fn trace_path(arg: Option<&PathBuf>, cfg: &RunConfig) -> Result<PathBuf> {
    arg.or(cfg.paths.trace.as_ref())
        .cloned()
        .ok_or_else(|| usage("paths.trace: no trace given (use --trace)"))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileFile {
    read_ratio: f64,
    mean_size_kb: f64,
    zipf_s: Option<f64>,
    hot_set_pages: Option<u64>,
    seq_run_prob: Option<f64>,
    mean_interarrival_us: Option<f64>,
}

fn load_profile(path: &Path, seed: u64) -> Result<GeneratorProfile> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let p: ProfileFile =
        toml::from_str(&text).map_err(|e| usage(format!("profile {}: {e}", path.display())))?;
    let base = GeneratorProfile::for_category(rnncache::trace::WorkloadCategory::WebServer, seed);
    let profile = GeneratorProfile {
        read_ratio: p.read_ratio,
        mean_size_kb: p.mean_size_kb,
        zipf_s: p.zipf_s.unwrap_or(base.zipf_s),
        hot_set_pages: p.hot_set_pages.unwrap_or(base.hot_set_pages),
        seq_run_prob: p.seq_run_prob.unwrap_or(base.seq_run_prob),
        mean_interarrival_us: p.mean_interarrival_us.unwrap_or(base.mean_interarrival_us),
        seed,
    };
    profile
        .validate()
        .map_err(|e| usage(format!("profile {}: {e}", path.display())))?;
    Ok(profile)
}

pub fn gen(common: &Common, args: &GenArgs) -> Result<()> {
    let cfg = RunConfig::load(common.config.as_deref())?;
    let seed = seed(common, &cfg);
    let n = args.requests;
    let trace = if let Some(c) = &args.category {
        Trace::synthetic(parse_category("--category", c)?, n, seed)?
    } else if let Some(name) = &args.profile {
        let row = trace_profile(name).ok_or_else(|| usage(format!("--profile: unknown trace profile `{name}`")))?;
        let mut t = generate_synthetic(&GeneratorProfile::for_row(row, seed), n)?;
        t.category = Some(row.category);
        t
    } else if let Some(path) = &args.profile_file {
        generate_synthetic(&load_profile(path, seed)?, n)?
    } else if let Some(s) = &args.scenario {
        let scenario: Scenario = s
            .parse()
            .map_err(|_| usage(format!("--scenario: unknown scenario `{s}` (single, virt, storage)")))?;
        generate_scenario(scenario, n, seed)?
    } else if let Some(distinct) = args.cyclic {
        if distinct == 0 || args.cycles == 0 {
            return Err(usage("--cyclic and --cycles must be positive"));
        }
        cyclic_scan(distinct, args.cycles)?
    } else {
        unreachable!("clap requires one trace source");
    };
    emit(args.out.as_deref(), &write_trace_string(&trace))
}

pub fn label(common: &Common, args: &LabelArgs) -> Result<()> {
    let cfg = RunConfig::load(common.config.as_deref())?;
    let trace = parse_trace(trace_path(args.trace.as_ref(), &cfg)?)?;
    let cap = capacity(common, &cfg, &trace)?;
    let stats = aggregate_page_stats(&trace, &cfg.device()?);
    let labeled = oracle_replay(&trace, cap, &stats)?;
    emit(args.out.as_deref(), &write_labeled_string(&labeled))
}

fn history_csv(history: &[EpochStats], heads: &[&str], validation: Option<&[f64]>) -> String {
    let mut out = String::from("epoch,loss,accuracy");
    for h in heads {
        let _ = write!(out, ",{h}_accuracy");
    }
    if validation.is_some() {
        out.push_str(",validation_loss");
    }
    out.push('\n');
    for (i, e) in history.iter().enumerate() {
        let _ = write!(out, "{},{:.6},{:.6}", e.epoch, e.loss, e.accuracy);
        for a in &e.head_accuracy {
            let _ = write!(out, ",{a:.6}");
        }
        if let Some(v) = validation {
            let _ = write!(out, ",{:.6}", v[i]);
        }
        out.push('\n');
    }
    out
}

fn history_path(args: &TrainArgs) -> PathBuf {
    args.history.clone().unwrap_or_else(|| {
        let mut p = args.out.clone().into_os_string();
        p.push(".history.csv");
        p.into()
    })
}

fn overrides(args: &TrainArgs, mut c: TrainConfig) -> Result<TrainConfig> {
    if let Some(e) = args.epochs {
        c.epochs = e;
    }
    if let Some(lr) = args.learning_rate {
        c.learning_rate = lr;
    }
    if let Some(b) = args.batch_size {
        c.batch_size = b;
    }
    c.validate().map_err(|e| usage(format!("train: {e}")))?;
    Ok(c)
}

fn holdout_accuracy(model: &rnncache::nn::RnnModel, data: &[Sample], batch: usize, head: usize) -> Result<Option<f64>> {
    if data.is_empty() {
        return Ok(None);
    }
    Ok(Some(evaluate(model, data, batch)?.stats.head_accuracy(head)))
}

fn fmt_acc(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.4}"))
}

pub fn train(common: &Common, args: &TrainArgs) -> Result<()> {
    let cfg = RunConfig::load(common.config.as_deref())?;
    let seed = seed(common, &cfg);
    match args.kind {
        ModelKind::Characterizer => {
            if args.layers.is_some() || args.hidden.is_some() {
                return Err(usage("--layers/--hidden: the characterizer shape is fixed (1 x 50)"));
            }
            let base = cfg.train_config(TrainConfig { seed, ..TrainConfig::default() })?;
            let tc = overrides(args, TrainConfig { seed, ..base })?;
            let traces = args
                .inputs
                .iter()
                .map(|p| {
                    let t = parse_trace(p)?;
                    let c = t
                        .category
                        .ok_or_else(|| usage(format!("{}: no `# category=` header", p.display())))?;
                    Ok((t, c))
                })
                .collect::<Result<Vec<_>>>()?;
            let streams: Vec<_> = traces.iter().map(|(t, c)| (t.requests(), *c)).collect();
            let data = characterizer_dataset(&streams);
            let (train_set, hold) = split_holdout(&data);
            if train_set.is_empty() {
                return Err(rnncache::Error::EmptyDataset.into());
            }
            let (model, history) = train_characterizer(&train_set, &tc)?;
            save_model(model.model(), &args.out)?;
            emit(Some(&history_path(args)), &history_csv(&history, &["category"], None))?;
            let train_acc = evaluate_characterizer(&model, &train_set)?.stats.overall_accuracy();
            let hold_acc = holdout_accuracy(model.model(), &hold, tc.batch_size, 0)?;
            println!("windows.train = {}", train_set.len());
            println!("windows.holdout = {}", hold.len());
            println!("train_accuracy = {train_acc:.4}");
            println!("holdout_accuracy = {}", fmt_acc(hold_acc));
        }
        ModelKind::CacheModel => {
            let defaults = TrainConfig {
                epochs: CACHE_DEFAULT_EPOCHS,
                learning_rate: CACHE_DEFAULT_LR,
                seed,
                ..TrainConfig::default()
            };
            let base = cfg.train_config(defaults)?;
            let tc = overrides(args, TrainConfig { seed, ..base })?;
            let layers = args.layers.or(cfg.train.layers).unwrap_or(CACHE_LAYERS);
            let hidden = args.hidden.or(cfg.train.hidden).unwrap_or(CACHE_HIDDEN);
            if layers == 0 || hidden == 0 {
                return Err(usage("train.layers and train.hidden must be positive"));
            }
            let mut data = Vec::new();
            for p in &args.inputs {
                data.extend(cache_dataset(&parse_labeled(p)?));
            }
            let (train_set, hold) = split_holdout(&data);
            if train_set.is_empty() {
                return Err(rnncache::Error::EmptyDataset.into());
            }
            let (fit, val) = split_holdout(&train_set);
            let (model, history, validation) = if args.no_select || val.is_empty() || fit.is_empty() {
                let (m, h) = train_cache_samples(&train_set, &tc, layers, hidden)?;
                (m, h, None)
            } else {
                let (m, sel) = train_cache_selected(&fit, &val, &tc, layers, hidden)?;
                println!("selected_epoch = {}", sel.best_epoch);
                (m, sel.history, Some(sel.validation_loss))
            };
            save_model(model.model(), &args.out)?;
            emit(
                Some(&history_path(args)),
                &history_csv(&history, &["admit", "duration"], validation.as_deref()),
            )?;
            let m = model.model();
            let train_eval = evaluate(m, &train_set, tc.batch_size)?;
            println!("windows.train = {}", train_set.len());
            println!("windows.holdout = {}", hold.len());
            println!("train_admit_accuracy = {:.4}", train_eval.stats.head_accuracy(ADMIT_HEAD));
            println!("train_duration_accuracy = {:.4}", train_eval.stats.head_accuracy(DURATION_HEAD));
            println!(
                "holdout_admit_accuracy = {}",
                fmt_acc(holdout_accuracy(m, &hold, tc.batch_size, ADMIT_HEAD)?)
            );
            println!(
                "holdout_duration_accuracy = {}",
                fmt_acc(holdout_accuracy(m, &hold, tc.batch_size, DURATION_HEAD)?)
            );
        }
    }
    Ok(())
}

fn load_cache_model(path: &Path) -> Result<CacheDecisionModel> {
    let m = load_model(path)?;
    CacheDecisionModel::from_model(m).with_context(|| format!("{} is not a cache-decision model", path.display()))
}

fn registry(args: &SimArgs, cfg: &RunConfig, trace: &Trace) -> Result<ModelRegistry> {
    let mut reg = ModelRegistry::new();
    if let Some(path) = args.model.as_ref().or(cfg.models.cache.as_ref()) {
        let category = match &cfg.models.cache_category {
            Some(c) => parse_category("models.cache_category", c)?,
            None => trace.category.unwrap_or(rnncache::trace::WorkloadCategory::ALL[0]),
        };
        reg.cache_models.insert(category, load_cache_model(path)?);
    }
    for (name, path) in &cfg.models.categories {
        let c = parse_category(&format!("models.categories.{name}"), name)?;
        reg.cache_models.insert(c, load_cache_model(path)?);
    }
    if let Some(path) = args.characterizer.as_ref().or(cfg.models.characterizer.as_ref()) {
        let m = load_model(path)?;
        let ch = CharacterizerModel::from_model(m)
            .with_context(|| format!("{} is not a characterizer model", path.display()))?;
        reg.characterizer = Some(ch);
    }
    Ok(reg)
}

pub fn simulate(common: &Common, args: &SimArgs, many: bool) -> Result<()> {
    let cfg = RunConfig::load(common.config.as_deref())?;
    let policies = if !args.policies.is_empty() {
        parse_policies(&args.policies)?
    } else if let Some(p) = cfg.policies()? {
        p
    } else if many {
        let mut p = DEFAULT_POLICIES.to_vec();
        if args.model.is_some() || cfg.has_cache_model() {
            p.insert(3, PolicyKind::RcRnn);
        }
        p
    } else {
        return Err(usage("simulation.policies: no policy given (use --policy)"));
    };
    if !many && policies.len() != 1 {
        return Err(usage("simulation.policies: `simulate` takes exactly one policy; use `compare`"));
    }
    if policies.contains(&PolicyKind::RcRnn) && args.model.is_none() && !cfg.has_cache_model() {
        return Err(usage("models.cache: policy rcrnn needs a cache-decision model"));
    }
    let trace = parse_trace(trace_path(args.trace.as_ref(), &cfg)?)?;
    let cap = capacity(common, &cfg, &trace)?;
    let mut sim = cfg.simulation(cap)?;
    sim.seed = seed(common, &cfg);
    if args.no_monitor {
        sim.monitor = false;
    }
    let models = registry(args, &cfg, &trace)?;
    let report = compare_report(&trace, &policies, &sim, &models)?;

    let csv = args.report_csv.as_ref().or(cfg.paths.report_csv.as_ref());
    let text = args.report_text.as_ref().or(cfg.paths.report_text.as_ref());
    let series = args.series_csv.as_ref().or(cfg.paths.series_csv.as_ref());
    write_report_files(&report, csv.map(PathBuf::as_path), text.map(PathBuf::as_path), series.map(PathBuf::as_path))?;
    if csv.is_none() && text.is_none() {
        emit(None, &report_text(&report))?;
    } else {
        for r in &report.rows {
            println!("{} hit_ratio = {:.4}", r.policy, r.metrics.hit_ratio());
        }
    }
    Ok(())
}

struct ReportRow {
    policy: String,
    values: Vec<String>,
}

fn read_report(path: &Path) -> Result<(Vec<String>, Vec<ReportRow>)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header != REPORT_HEADER {
        anyhow::bail!("{}: not a report CSV (unexpected header)", path.display());
    }
    let cols: Vec<String> = header.split(',').map(str::to_string).collect();
    let rows = lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            let values: Vec<String> = l.split(',').map(str::to_string).collect();
            if values.len() != cols.len() {
                anyhow::bail!("{}: row {} has {} fields, expected {}", path.display(), i + 2, values.len(), cols.len());
            }
            Ok(ReportRow {
                policy: values[0].clone(),
                values,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((cols, rows))
}

pub fn report(_common: &Common, args: &ReportArgs) -> Result<()> {
    if let Some(v) = &args.improvement {
        if v.len() != 4 {
            return Err(usage("--improvement: expected four comma-separated fractions"));
        }
        let pct = improvement_metric(v[0], v[1], v[2], v[3])?;
        let exact = improvement_percent(v[0], v[1], v[2], v[3])?;
        println!("improvement = {pct}%");
        println!("improvement_exact = {exact:.4}");
        return Ok(());
    }
    let path = args.input.as_ref().expect("clap requires --input or --improvement");
    let (cols, rows) = read_report(path)?;
    let col = |name: &str| cols.iter().position(|c| c == name).expect("header checked");
    let shown = [
        "hit_ratio",
        "normalized_hit_ratio",
        "replacements_per_100",
        "ssd_writes_per_100",
        "mean_latency_ms",
    ];
    let mut out = format!("{:<16}", "policy");
    for s in shown {
        let _ = write!(out, " {s:>22}");
    }
    out.push('\n');
    for r in &rows {
        let _ = write!(out, "{:<16}", r.policy);
        for s in shown {
            let _ = write!(out, " {:>22}", r.values[col(s)]);
        }
        out.push('\n');
    }
    if let Some(b) = &args.baseline {
        let hr = col("hit_ratio");
        let base = rows
            .iter()
            .find(|r| &r.policy == b)
            .ok_or_else(|| usage(format!("--baseline: policy `{b}` not in report")))?;
        let base_hr: f64 = base.values[hr].parse().context("baseline hit_ratio")?;
        for r in &rows {
            let v: f64 = r.values[hr].parse().context("hit_ratio")?;
            let rel = if base_hr > 0.0 {
                format!("{:+.2}%", 100.0 * (v / base_hr - 1.0))
            } else {
                "-".into()
            };
            let _ = writeln!(out, "{}.hit_ratio_vs_{b} = {rel}", r.policy);
        }
    }
    emit(None, &out)
}
