//! Batch subcommands: directory pipelines, dataset generation, the ablation
//! table, model-output scoring, and report aggregation. Work is distributed
//! file-level across the worker pool; outputs are written in input order so
//! runs are byte-reproducible.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::anyhow;
use serde_json::json;

use speccurve::curve::SpectrumType;
use speccurve::exec::map_indexed;
use speccurve::metrics::{score_subplot, FidelityReport, MetricKind, SubplotScore};
use speccurve::pipeline::{run_curve, AggregateScores, BudgetSpec, CurveOutcome, PipelineConfig};
use speccurve::svg::render_svg;
use speccurve::synth::{
    default_qc_predicate, emit_training_sample, run_batch, GeneratedSample, TypeSelector,
};
use speccurve::wire;

use crate::config::{metric_column_name, parse_metric_selector, RunContext};
use crate::io::{self, LoadedInput};
use crate::manifest::ManifestBuilder;
use crate::{AblationArgs, GenArgs, PipelineArgs, ReportArgs, ScoreModelOutputsArgs};
use crate::{CmdResult, Failure};

// ---------------------------------------------------------------------------
// pipeline
// ---------------------------------------------------------------------------

pub fn pipeline(ctx: &RunContext, args: &PipelineArgs) -> CmdResult {
    let cfg = ctx
        .pipeline_config(
            args.window,
            args.order,
            args.baseline_frac,
            args.budget_frac,
            args.epsilon,
            args.strict_eq2,
            args.raw_units,
        )
        .map_err(Failure::config)?;
    let files = io::collect_inputs(&args.input).map_err(Failure::input)?;
    let mut manifest = ManifestBuilder::start(
        ctx,
        serde_json::to_value(&cfg).expect("config serializes"),
        &args.output,
    );
    for f in &files {
        manifest.record_input(f);
    }

    if files.is_empty() {
        let summary = json!({ "curves": 0, "aggregate": null, "errors": [] });
        manifest
            .write_output(
                &args.output.join("summary.json"),
                serde_json::to_string_pretty(&summary).expect("json").as_bytes(),
            )
            .map_err(Failure::input)?;
        manifest.finish().map_err(Failure::input)?;
        return Err(Failure::input(anyhow!("no input curves found in {}", args.input.display())));
    }

    // Load sequentially (cheap), pipeline in parallel, write in order.
    let mut loaded: Vec<(String, LoadedInput)> = Vec::new();
    let mut load_errors: Vec<String> = Vec::new();
    for f in &files {
        match io::load_input(f) {
            Ok(input) => loaded.push((io::file_stem(f), input)),
            Err(e) => load_errors.push(format!("{}: {e:#}", f.display())),
        }
    }
    let results: Vec<Vec<Result<CurveOutcome, String>>> = map_indexed(ctx.mode, &loaded, |_, (_, input)| {
        input
            .curves
            .iter()
            .map(|c| run_curve(c, input.type_hint, &cfg).map_err(|e| e.to_string()))
            .collect()
    });

    let mut reports: Vec<FidelityReport> = Vec::new();
    let mut run_errors = load_errors;
    for ((stem, input), outcomes) in loaded.iter().zip(&results) {
        let multi = input.curves.len() > 1;
        for (li, outcome) in outcomes.iter().enumerate() {
            let tag = if multi { format!("{stem}.line{}", li + 1) } else { stem.clone() };
            match outcome {
                Ok(out) => {
                    write_outcome(&mut manifest, &args.output, &tag, out).map_err(Failure::input)?;
                    reports.push(out.report.clone());
                }
                Err(e) => run_errors.push(format!("{tag}: {e}")),
            }
        }
    }

    let aggregate = AggregateScores::from_reports(reports.iter());
    let summary = json!({
        "curves": reports.len(),
        "aggregate": aggregate,
        "errors": run_errors,
    });
    manifest
        .write_output(
            &args.output.join("summary.json"),
            serde_json::to_string_pretty(&summary).expect("json").as_bytes(),
        )
        .map_err(Failure::input)?;
    manifest.finish().map_err(Failure::input)?;

    if !run_errors.is_empty() {
        return Err(Failure::partial(anyhow!(
            "{} of {} inputs failed (see summary.json)",
            run_errors.len(),
            run_errors.len() + reports.len()
        )));
    }
    Ok(())
}

fn write_outcome(
    manifest: &mut ManifestBuilder,
    out_dir: &Path,
    tag: &str,
    out: &CurveOutcome,
) -> anyhow::Result<()> {
    manifest.write_output(
        &out_dir.join(format!("{tag}.sampled.json")),
        serde_json::to_string_pretty(&out.sampled)?.as_bytes(),
    )?;
    manifest.write_output(
        &out_dir.join(format!("{tag}.reconstructed.json")),
        serde_json::to_string_pretty(&out.reconstructed)?.as_bytes(),
    )?;
    let report = json!({
        "name": out.name,
        "n_points": out.n_points,
        "n_sampled": out.sample.n_out,
        "epsilon_used": out.sample.epsilon_used,
        "report": out.report,
        "notes": out.notes,
    });
    manifest.write_output(
        &out_dir.join(format!("{tag}.report.json")),
        serde_json::to_string_pretty(&report)?.as_bytes(),
    )?;
    Ok(())
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

pub fn gen(ctx: &RunContext, args: &GenArgs) -> CmdResult {
    if args.count == 0 {
        return Err(Failure::config(anyhow!("--count must be >= 1")));
    }
    let selector = match args.spectrum_type.as_str() {
        "all" => TypeSelector::All,
        other => TypeSelector::Single(
            other.parse::<SpectrumType>().map_err(|e| Failure::config(anyhow!(e)))?,
        ),
    };
    if !(args.qc_frac > 0.0 && args.qc_frac <= 1.0) {
        return Err(Failure::config(anyhow!("--qc-frac must be in (0, 1]")));
    }
    let sampled_arm = match args.arm.as_str() {
        "sampled" => true,
        "full" => false,
        other => return Err(Failure::config(anyhow!("--arm must be sampled|full, got `{other}`"))),
    };
    let pipeline_cfg = ctx
        .pipeline_config(None, None, None, None, None, false, false)
        .map_err(Failure::config)?;

    let mut manifest = ManifestBuilder::start(
        ctx,
        json!({
            "type": args.spectrum_type,
            "count": args.count,
            "qc_frac": args.qc_frac,
            "arm": args.arm,
            "pipeline": pipeline_cfg,
        }),
        &args.output,
    );

    let (samples, qc) = run_batch(
        ctx.seed,
        selector,
        args.count,
        args.qc_frac,
        default_qc_predicate,
        args.retry_cap,
        ctx.mode,
    )
    .map_err(|e| Failure::input(anyhow!(e)))?;

    // Per-sample artifacts are rendered in parallel, written in order.
    let artifacts: Vec<Result<(String, String), String>> = map_indexed(ctx.mode, &samples, |_, s| {
        build_sample_artifacts(s, sampled_arm, &pipeline_cfg)
    });

    let mut train_lines: Vec<String> = Vec::with_capacity(samples.len());
    let mut errors = Vec::new();
    for (sample, artifact) in samples.iter().zip(artifacts) {
        match artifact {
            Ok((svg, train_line)) => {
                manifest
                    .write_output(
                        &args.output.join(format!("{}.json", sample.index)),
                        serde_json::to_string_pretty(sample).expect("json").as_bytes(),
                    )
                    .map_err(Failure::input)?;
                manifest
                    .write_output(&args.output.join(format!("{}.svg", sample.index)), svg.as_bytes())
                    .map_err(Failure::input)?;
                train_lines.push(train_line);
            }
            Err(e) => errors.push(format!("sample {}: {e}", sample.index)),
        }
    }
    let mut train = train_lines.join("\n");
    train.push('\n');
    manifest
        .write_output(&args.output.join("train.jsonl"), train.as_bytes())
        .map_err(Failure::input)?;
    manifest
        .write_output(
            &args.output.join("qc_report.json"),
            serde_json::to_string_pretty(&qc).expect("json").as_bytes(),
        )
        .map_err(Failure::input)?;
    manifest.finish().map_err(Failure::input)?;

    if !errors.is_empty() {
        return Err(Failure::partial(anyhow!("{} samples failed: {}", errors.len(), errors.join("; "))));
    }
    Ok(())
}

fn build_sample_artifacts(
    sample: &GeneratedSample,
    sampled_arm: bool,
    cfg: &PipelineConfig,
) -> Result<(String, String), String> {
    let svg = render_svg(&sample.curves, sample.spec.spectrum_type).map_err(|e| e.to_string())?;
    let answer_curves = if sampled_arm {
        sample
            .curves
            .iter()
            .map(|c| {
                run_curve(c, Some(sample.spec.spectrum_type), cfg)
                    .map(|o| o.sampled)
                    .map_err(|e| e.to_string())
            })
            .collect::<Result<Vec<_>, _>>()?
    } else {
        sample.curves.clone()
    };
    // Image path is relative to the dataset directory, keeping records
    // portable and runs byte-reproducible across output locations.
    let record = emit_training_sample(&answer_curves, "A", &format!("{}.svg", sample.index))
        .map_err(|e| e.to_string())?;
    let line = serde_json::to_string(&record).map_err(|e| e.to_string())?;
    Ok((svg, line))
}

// ---------------------------------------------------------------------------
// ablation
// ---------------------------------------------------------------------------

pub fn ablation(ctx: &RunContext, args: &AblationArgs) -> CmdResult {
    let metrics = parse_metric_selector(&args.metric).map_err(Failure::config)?;
    let files = io::collect_inputs(&args.dataset).map_err(Failure::input)?;
    if files.is_empty() {
        return Err(Failure::input(anyhow!("no dataset files in {}", args.dataset.display())));
    }
    let base_cfg = ctx
        .pipeline_config(None, None, None, None, None, false, false)
        .map_err(Failure::config)?;
    // The baseline arm disables critical-feature sampling: an epsilon of 1
    // keeps endpoints only, leaving the 5% uniform pass.
    let uniform_cfg = PipelineConfig {
        budget: BudgetSpec::Epsilon(1.0),
        ..base_cfg.clone()
    };

    let mut manifest = ManifestBuilder::start(
        ctx,
        json!({"metric": args.metric, "pipeline": base_cfg}),
        &args.output,
    );
    let mut inputs = Vec::new();
    for f in &files {
        manifest.record_input(f);
        inputs.push(io::load_input(f).map_err(Failure::input)?);
    }

    let arms: [(&str, &PipelineConfig); 2] = [
        ("Uniform baseline only (5%)", &uniform_cfg),
        ("Testset with sampling strategy", &base_cfg),
    ];
    let mut rows: Vec<(String, AggregateScores)> = Vec::new();
    let mut errors: Vec<String> = Vec::new();
    for (label, cfg) in arms {
        let outcomes: Vec<Result<Vec<CurveOutcome>, String>> = map_indexed(ctx.mode, &inputs, |_, input| {
            input
                .curves
                .iter()
                .map(|c| run_curve(c, input.type_hint, cfg).map_err(|e| e.to_string()))
                .collect()
        });
        let mut reports = Vec::new();
        for (input, result) in inputs.iter().zip(outcomes) {
            match result {
                Ok(outs) => reports.extend(outs.into_iter().map(|o| o.report)),
                Err(e) => errors.push(format!("{label}: {}: {e}", input.stem)),
            }
        }
        let aggregate = AggregateScores::from_reports(reports.iter())
            .ok_or_else(|| Failure::input(anyhow!("arm `{label}` produced no reports")))?;
        rows.push((label.to_string(), aggregate));
    }

    let table = render_ablation_table(&rows, &metrics);
    manifest
        .write_output(&args.output.join("ablation.md"), table.as_bytes())
        .map_err(Failure::input)?;
    manifest
        .write_output(
            &args.output.join("ablation.json"),
            serde_json::to_string_pretty(&json!({
                "rows": rows.iter().map(|(label, agg)| json!({"arm": label, "scores": agg})).collect::<Vec<_>>(),
                "errors": errors,
            }))
            .expect("json")
            .as_bytes(),
        )
        .map_err(Failure::input)?;
    manifest.finish().map_err(Failure::input)?;
    print!("{table}");
    if !errors.is_empty() {
        return Err(Failure::partial(anyhow!("{} curves failed", errors.len())));
    }
    Ok(())
}

fn render_ablation_table(rows: &[(String, AggregateScores)], metrics: &[MetricKind]) -> String {
    let mut out = String::from("| Model |");
    for &m in metrics {
        let _ = write!(out, " {} |", metric_column_name(m));
    }
    out.push_str("\n|---|");
    for _ in metrics {
        out.push_str("---|");
    }
    out.push('\n');
    for (label, agg) in rows {
        let _ = write!(out, "| {label} |");
        for &m in metrics {
            let v = match m {
                MetricKind::Chamfer => agg.mean_cd,
                MetricKind::Hausdorff => agg.mean_hd,
                MetricKind::Wasserstein => agg.mean_wd,
            };
            let _ = write!(out, " {v:.4} |");
        }
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------------
// score-model-outputs
// ---------------------------------------------------------------------------

pub fn score_model_outputs(ctx: &RunContext, args: &ScoreModelOutputsArgs) -> CmdResult {
    let metrics = parse_metric_selector(&args.metric).map_err(Failure::config)?;
    let opts = ctx
        .score_options(args.strict_eq2, args.penalize_unmatched, false)
        .map_err(Failure::config)?;
    let pairs = io::pair_pred_truth(&args.pred_dir, &args.truth_dir, args.manifest.as_deref())
        .map_err(Failure::input)?;

    let mut manifest = ManifestBuilder::start(
        ctx,
        json!({"metric": args.metric, "penalize_unmatched": opts.penalize_unmatched}),
        &args.output,
    );
    for (p, t) in &pairs {
        manifest.record_input(p);
        manifest.record_input(t);
    }

    let scored: Vec<serde_json::Value> = map_indexed(ctx.mode, &pairs, |_, (pred_path, truth_path)| {
        score_one_pair(pred_path, truth_path, &metrics, &opts)
    });

    // Aggregate means; unparseable predictions entered as zero scores.
    let mut sums = vec![0.0f64; metrics.len()];
    let mut n = 0usize;
    for row in &scored {
        n += 1;
        for (i, &m) in metrics.iter().enumerate() {
            sums[i] += row["scores"][score_key(m)].as_f64().unwrap_or(0.0);
        }
    }
    let model_name = args
        .pred_dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".into());
    let mut table = String::from("| Model |");
    for &m in &metrics {
        let _ = write!(table, " {} |", metric_column_name(m));
    }
    table.push_str("\n|---|");
    for _ in &metrics {
        table.push_str("---|");
    }
    let _ = write!(table, "\n| {model_name} |");
    for (i, _) in metrics.iter().enumerate() {
        let _ = write!(table, " {:.4} |", sums[i] / n.max(1) as f64);
    }
    table.push('\n');

    manifest
        .write_output(
            &args.output.join("scores.json"),
            serde_json::to_string_pretty(&json!({ "model": model_name, "files": scored }))
                .expect("json")
                .as_bytes(),
        )
        .map_err(Failure::input)?;
    manifest
        .write_output(&args.output.join("leaderboard.md"), table.as_bytes())
        .map_err(Failure::input)?;
    manifest.finish().map_err(Failure::input)?;
    print!("{table}");
    Ok(())
}

fn score_key(kind: MetricKind) -> &'static str {
    match kind {
        MetricKind::Chamfer => "score_cd",
        MetricKind::Hausdorff => "score_hd",
        MetricKind::Wasserstein => "score_wd",
    }
}

fn score_one_pair(
    pred_path: &Path,
    truth_path: &Path,
    metrics: &[MetricKind],
    opts: &speccurve::metrics::ScoreOptions,
) -> serde_json::Value {
    let truth = match io::load_answer(truth_path, None) {
        Ok(t) => t,
        Err(e) => {
            return json!({
                "pred": pred_path.display().to_string(),
                "truth": truth_path.display().to_string(),
                "scores": zero_scores(metrics),
                "diagnostics": [format!("truth unreadable: {e:#}")],
            })
        }
    };
    let text = std::fs::read_to_string(pred_path).unwrap_or_default();
    let (pred, parse_diags) = match wire::parse_answer(&text) {
        Ok((answers, diags)) => {
            match io::select_subplot(answers, Some(&truth.subplot_id)) {
                Ok(answer) => (Some(answer), Some(diags)),
                Err(_) => (None, Some(diags)),
            }
        }
        Err(e) => {
            return json!({
                "pred": pred_path.display().to_string(),
                "truth": truth_path.display().to_string(),
                "scores": zero_scores(metrics),
                "diagnostics": [format!("prediction unparseable: {e}")],
            })
        }
    };
    let Some(pred) = pred else {
        return json!({
            "pred": pred_path.display().to_string(),
            "truth": truth_path.display().to_string(),
            "scores": zero_scores(metrics),
            "diagnostics": ["no matching subplot in prediction"],
        });
    };
    let mut scores = serde_json::Map::new();
    let mut results: Vec<SubplotScore> = Vec::new();
    for &m in metrics {
        let s = score_subplot(&pred, &truth, m, opts);
        scores.insert(score_key(m).into(), json!(s.score));
        results.push(s);
    }
    json!({
        "pred": pred_path.display().to_string(),
        "truth": truth_path.display().to_string(),
        "lines_parsed": pred.lines.len(),
        "scores": scores,
        "assignment": results.first().map(|s| &s.assignment),
        "warnings": parse_diags.map(|d| d.warnings.len()),
        "diagnostics": results.iter().flat_map(|s| s.diagnostics.clone()).collect::<Vec<_>>(),
    })
}

fn zero_scores(metrics: &[MetricKind]) -> serde_json::Value {
    let mut map = serde_json::Map::new();
    for &m in metrics {
        map.insert(score_key(m).into(), json!(0.0));
    }
    map.into()
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

pub fn report(ctx: &RunContext, args: &ReportArgs) -> CmdResult {
    let mut files: Vec<std::path::PathBuf> = std::fs::read_dir(&args.input)
        .map_err(|e| Failure::input(anyhow!("{}: {e}", args.input.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.file_name().and_then(|n| n.to_str()).map(|n| n.ends_with(".report.json")).unwrap_or(false))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Failure::input(anyhow!("no *.report.json files in {}", args.input.display())));
    }
    let mut manifest = ManifestBuilder::start(ctx, json!({"source": args.input.display().to_string()}), &args.output);
    let mut reports = Vec::new();
    for f in &files {
        manifest.record_input(f);
        let value: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(f).map_err(|e| Failure::input(anyhow!(e)))?,
        )
        .map_err(|e| Failure::input(anyhow!("{}: {e}", f.display())))?;
        let report: FidelityReport = serde_json::from_value(value["report"].clone())
            .map_err(|e| Failure::input(anyhow!("{}: {e}", f.display())))?;
        reports.push(report);
    }
    let aggregate = AggregateScores::from_reports(reports.iter()).expect("non-empty");
    let mut md = String::from(
        "| Curves | Score-Chamfer Distance | Score-Hausdorff Distance | Score-Wasserstein Distance | Mean R |\n|---|---|---|---|---|\n",
    );
    let _ = writeln!(
        md,
        "| {} | {:.4} | {:.4} | {:.4} | {:.4} |",
        aggregate.count, aggregate.mean_cd, aggregate.mean_hd, aggregate.mean_wd, aggregate.mean_reduction
    );
    manifest
        .write_output(&args.output.join("summary.md"), md.as_bytes())
        .map_err(Failure::input)?;
    manifest
        .write_output(
            &args.output.join("summary.json"),
            serde_json::to_string_pretty(&aggregate).expect("json").as_bytes(),
        )
        .map_err(Failure::input)?;
    manifest.finish().map_err(Failure::input)?;
    print!("{md}");
    Ok(())
}
