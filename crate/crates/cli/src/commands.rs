//! Subcommand implementations. Each writes its human-readable output to the
//! given sink and returns structured results for callers and tests.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use lungnet::data::{
    compute_norm_stats, load_split, read_index_csv, scan_dataset, stratified_split, write_index_csv, AugmentConfig,
    DatasetIndex, NormStats, Split, SplitRatios,
};
use lungnet::metrics::{format_table, write_report_csv};
use lungnet::models::{build_model, load_weights, Arch, ModelConfig, ModelGraph};
use lungnet::synthetic::{generate, SyntheticSpec, CLASS_NAMES};
use lungnet::training::{evaluate, prepare_eval, train_loop, Evaluation, TrainData, TrainOutcome};
use lungnet::{Error, Result, Rng};

use crate::config::RunConfig;
use crate::gradsuite::{run_suite, standard_suite, CaseResult};

/// Process exit code for an error: 1 usage/config, 2 data, 3 numeric.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Usage(_) => 1,
        Error::Numeric(_) => 3,
        _ => 2,
    }
}

/// Scans `root`, splits it with `seed`, writes the index CSV to `out` and
/// prints per-class counts.
pub fn split(root: &Path, seed: u64, out: &Path, w: &mut dyn Write) -> Result<DatasetIndex> {
    let (index, report) = scan_dataset(root)?;
    let index = stratified_split(&index, SplitRatios::default(), seed)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    write_index_csv(&index, out)?;
    writeln!(w, "{:<20} {:>6} {:>6} {:>6}", "class", "train", "val", "test")?;
    let mut totals = [0usize; 3];
    for (name, counts) in index.class_names.iter().zip(index.split_counts()) {
        writeln!(w, "{name:<20} {:>6} {:>6} {:>6}", counts[0], counts[1], counts[2])?;
        for (t, c) in totals.iter_mut().zip(counts) {
            *t += c;
        }
    }
    writeln!(w, "{:<20} {:>6} {:>6} {:>6}", "total", totals[0], totals[1], totals[2])?;
    if report.skipped > 0 {
        writeln!(w, "skipped {} unreadable image files", report.skipped)?;
    }
    writeln!(w, "wrote {}", out.display())?;
    Ok(index)
}

/// Per-channel mean and standard deviation of the index's train split.
pub fn stats(index: &Path, w: &mut dyn Write) -> Result<NormStats> {
    let index = read_index_csv(index)?;
    let train = load_split(&index, Split::Train)?;
    let stats = compute_norm_stats(&train.images)?;
    writeln!(w, "train images: {}", train.len())?;
    for (c, (m, s)) in stats.mean.iter().zip(&stats.std).enumerate() {
        writeln!(w, "channel {c}: mean {m:.6} std {s:.6}")?;
    }
    Ok(stats)
}

/// Index from the config: the given CSV, or a fresh split of `root`.
pub fn resolve_index(cfg: &RunConfig) -> Result<DatasetIndex> {
    match (&cfg.index, &cfg.root) {
        (Some(path), _) => read_index_csv(path),
        (None, Some(root)) => stratified_split(&scan_dataset(root)?.0, SplitRatios::default(), cfg.split_seed),
        (None, None) => Err(Error::Config("either `root` or `index` must be set".into())),
    }
}

fn check_classes(index: &DatasetIndex, model: &ModelConfig) -> Result<()> {
    if index.class_names.len() != model.num_classes {
        return Err(Error::Config(format!(
            "dataset has {} classes but num_classes = {}",
            index.class_names.len(),
            model.num_classes
        )));
    }
    Ok(())
}

fn non_empty(split: Split, len: usize) -> Result<()> {
    if len == 0 {
        return Err(Error::Data(format!("{split} split is empty")));
    }
    Ok(())
}

#[derive(Debug)]
pub struct TrainSummary {
    pub outcome: TrainOutcome,
    /// Validation result of the initialised model, when `init` is set.
    pub initial_val: Option<Evaluation>,
    /// Test-split result of the best checkpoint (or of the final model when
    /// no epoch ran), when the test split is non-empty.
    pub test: Option<Evaluation>,
    pub out_dir: PathBuf,
}

/// Validates the config, trains, and writes `log.csv`, `best.nncp` and
/// `report.csv` to the output directory.
pub fn train(cfg: &RunConfig, w: &mut dyn Write) -> Result<TrainSummary> {
    cfg.validate()?;
    let index = resolve_index(cfg)?;
    check_classes(&index, &cfg.model)?;
    let train = load_split(&index, Split::Train)?;
    let val = load_split(&index, Split::Val)?;
    let test = load_split(&index, Split::Test)?;
    non_empty(Split::Train, train.len())?;
    non_empty(Split::Val, val.len())?;
    let size = cfg.model.input_size;
    let stats = compute_norm_stats(&train.images)?;
    let data = TrainData {
        val: prepare_eval(&val, size, &stats),
        train,
        stats,
        augment: AugmentConfig::with_target(size),
    };

    let mut model = build_model(&cfg.model, &mut Rng::new(cfg.train.seed))?;
    let mut initial_val = None;
    if let Some(init) = &cfg.init {
        let report = load_weights(&mut model, init, false)?;
        if report.loaded.is_empty() {
            return Err(Error::Load(format!("{} shares no tensors with the model", init.display())));
        }
        log::info!(
            "initialised {} tensors from {} ({} kept, {} unused)",
            report.loaded.len(),
            init.display(),
            report.kept.len(),
            report.unused.len()
        );
        let ev = evaluate(&mut model, &data.val, cfg.train.batch_size)?;
        writeln!(w, "initial val accuracy {:.4}", ev.report.accuracy)?;
        initial_val = Some(ev);
    }
    model.set_trainable(cfg.policy);

    fs::create_dir_all(&cfg.out_dir)?;
    let outcome = train_loop(&mut model, &data, &cfg.train, &cfg.out_dir)?;
    outcome.log.write_csv(&cfg.out_dir.join("log.csv"))?;
    writeln!(w, "epochs run: {}", outcome.log.rows.len())?;
    if let (Some(best), Some(row)) = (outcome.log.best_epoch, outcome.log.best_epoch.and_then(|e| outcome.log.rows.get(e))) {
        writeln!(w, "best epoch {best}: val accuracy {:.4}", row.val_acc)?;
    }
    if let Some(stop) = outcome.log.stopped_epoch {
        writeln!(w, "early stop at epoch {stop}")?;
    }
    if let Some(best) = &outcome.best_checkpoint {
        load_weights(&mut model, best, true)?;
    }

    let mut test_eval = None;
    if !test.is_empty() {
        let ev = evaluate(&mut model, &prepare_eval(&test, size, &data.stats), cfg.train.batch_size)?;
        let rows = vec![(cfg.arch().to_string(), ev.report.clone())];
        write_report_csv(&rows, &cfg.out_dir.join("report.csv"))?;
        write!(w, "{}", format_table(&rows))?;
        test_eval = Some(ev);
    }
    Ok(TrainSummary { outcome, initial_val, test: test_eval, out_dir: cfg.out_dir.clone() })
}

pub struct EvalArgs {
    pub checkpoint: PathBuf,
    pub index: PathBuf,
    pub split: Split,
    pub model: ModelConfig,
    pub batch_size: usize,
    /// Report CSV destination.
    pub report: Option<PathBuf>,
    /// Destination of `index,label,prediction` rows.
    pub predictions: Option<PathBuf>,
}

/// Evaluates a checkpoint on one split and prints its table row. Norm
/// statistics are recomputed from the index's train split, as in training.
pub fn eval(args: &EvalArgs, w: &mut dyn Write) -> Result<Evaluation> {
    args.model.validate()?;
    if !args.checkpoint.is_file() {
        return Err(Error::Load(format!("checkpoint {} not found", args.checkpoint.display())));
    }
    let index = read_index_csv(&args.index)?;
    check_classes(&index, &args.model)?;
    let target = load_split(&index, args.split)?;
    non_empty(args.split, target.len())?;
    let stats = compute_norm_stats(&load_split(&index, Split::Train)?.images)?;
    let mut model = build_model(&args.model, &mut Rng::new(0))?;
    load_weights(&mut model, &args.checkpoint, true)?;
    let ev = evaluate(&mut model, &prepare_eval(&target, args.model.input_size, &stats), args.batch_size)?;
    let rows = vec![(args.model.arch().to_string(), ev.report.clone())];
    write!(w, "{}", format_table(&rows))?;
    if let Some(path) = &args.report {
        write_report_csv(&rows, path)?;
    }
    if let Some(path) = &args.predictions {
        let mut text = String::from("index,label,prediction\n");
        for (i, (label, pred)) in target.labels.iter().zip(&ev.predictions).enumerate() {
            text.push_str(&format!("{i},{label},{pred}\n"));
        }
        fs::write(path, text)?;
    }
    Ok(ev)
}

/// Builds the model for `arch` and prints total and per-stage parameter
/// counts.
pub fn params(arch: Arch, num_classes: usize, width: f32, w: &mut dyn Write) -> Result<ModelGraph> {
    let cfg = ModelConfig { num_classes, width_multiplier: width, ..ModelConfig::for_arch(arch) };
    cfg.validate()?;
    let model = build_model(&cfg, &mut Rng::new(0))?;
    writeln!(w, "{arch} (classes {num_classes}, width {width})")?;
    for (stage, n) in model.param_breakdown() {
        writeln!(w, "  {stage:<16} {n:>10}")?;
    }
    writeln!(w, "total {}", model.count_params())?;
    Ok(model)
}

/// Parses a synthetic-set spec file with keys `images_per_class`,
/// `image_size` and `seed`.
pub fn parse_synth_spec(text: &str) -> Result<SyntheticSpec> {
    let mut spec = SyntheticSpec::default();
    for raw in text.lines() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Config(format!("expected `key = value`, got {raw:?}")))?;
        let (k, v) = (k.trim(), v.trim());
        let bad = || Error::Config(format!("invalid value {v:?} for {k}"));
        match k {
            "images_per_class" => spec.images_per_class = v.parse().map_err(|_| bad())?,
            "image_size" => spec.image_size = v.parse().map_err(|_| bad())?,
            "seed" => spec.seed = v.parse().map_err(|_| bad())?,
            other => return Err(Error::Config(format!("unknown synthetic spec key {other:?}"))),
        }
    }
    Ok(spec)
}

/// Writes the synthetic class-per-directory tree.
pub fn synth(spec: &SyntheticSpec, out: &Path, w: &mut dyn Write) -> Result<usize> {
    let n = generate(spec, out)?;
    writeln!(
        w,
        "wrote {n} images ({} per class, {}×{}, seed {}) for classes {} to {}",
        spec.images_per_class,
        spec.image_size,
        spec.image_size,
        spec.seed,
        CLASS_NAMES.join(", "),
        out.display()
    )?;
    Ok(n)
}

/// Runs the standard gradient-check suite, printing one line per check.
/// Fails with a numeric error naming every failing check.
pub fn gradcheck(seed: u64, w: &mut dyn Write) -> Result<Vec<CaseResult>> {
    let results = run_suite(standard_suite(seed)?)?;
    report_gradcheck(&results, w)?;
    Ok(results)
}

/// Prints suite results; errors when any check failed.
pub fn report_gradcheck(results: &[CaseResult], w: &mut dyn Write) -> Result<()> {
    for r in results {
        writeln!(w, "{}", r.line())?;
    }
    let failed: Vec<&str> = results.iter().filter(|r| !r.passed()).map(|r| r.name.as_str()).collect();
    if failed.is_empty() {
        writeln!(w, "all {} gradient checks passed", results.len())?;
        Ok(())
    } else {
        Err(Error::Numeric(format!("gradient check failed for: {}", failed.join(", "))))
    }
}
