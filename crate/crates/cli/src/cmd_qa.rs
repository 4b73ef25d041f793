//! QA judging: read items, judge locally/remotely, emit accuracy tables.

use anyhow::{anyhow, Context};
use serde_json::json;

use speccurve::judge::{
    accuracy_report, judge_batch, JudgeError, JudgeVerdict, OverallMode, QaItem,
};

use crate::config::RunContext;
use crate::manifest::ManifestBuilder;
use crate::EvalQaArgs;
use crate::{CmdResult, Failure};

pub fn eval_qa(ctx: &RunContext, args: &EvalQaArgs) -> CmdResult {
    let overall_mode = match args.overall.as_str() {
        "mean" => OverallMode::Mean,
        "pooled" => OverallMode::Pooled,
        other => return Err(Failure::config(anyhow!("--overall must be mean|pooled, got `{other}`"))),
    };
    let endpoint = ctx.judge_endpoint(
        args.endpoint.as_deref(),
        args.model.as_deref(),
        args.api_key_env.as_deref(),
        args.concurrency,
    );
    let (local_only, endpoint) = match args.judge.as_str() {
        "local" => (true, None),
        "remote" | "auto" => {
            if args.judge == "remote" && endpoint.is_none() {
                return Err(Failure::config(anyhow!(
                    "--judge remote needs --endpoint (or judge.base_url in the config)"
                )));
            }
            (false, endpoint)
        }
        other => return Err(Failure::config(anyhow!("--judge must be local|remote|auto, got `{other}`"))),
    };

    let text = std::fs::read_to_string(&args.items)
        .with_context(|| format!("reading {}", args.items.display()))
        .map_err(Failure::input)?;
    let mut items: Vec<QaItem> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let item: QaItem = serde_json::from_str(line)
            .with_context(|| format!("{} line {}", args.items.display(), i + 1))
            .map_err(Failure::input)?;
        items.push(item);
    }
    if items.is_empty() {
        return Err(Failure::input(anyhow!("no QA items in {}", args.items.display())));
    }

    let mut manifest = ManifestBuilder::start(
        ctx,
        json!({
            "judge": args.judge,
            "overall": args.overall,
            "model": endpoint.as_ref().map(|e| e.model.clone()),
        }),
        &args.report,
    );
    manifest.record_input(&args.items);

    let results = judge_batch(&items, endpoint.as_ref(), local_only);

    let mut judged: Vec<(QaItem, JudgeVerdict)> = Vec::new();
    let mut unjudged = 0usize;
    let mut hard_failures: Vec<String> = Vec::new();
    let mut verdict_lines: Vec<String> = Vec::new();
    for (i, (item, result)) in items.iter().zip(results).enumerate() {
        match result {
            Ok(verdict) => {
                verdict_lines.push(
                    serde_json::to_string(&json!({
                        "index": i,
                        "correct": verdict.correct,
                        "judge_kind": verdict.judge_kind,
                        "attempts": verdict.attempts,
                    }))
                    .expect("json"),
                );
                judged.push((item.clone(), verdict));
            }
            Err(JudgeError::Unjudged(_)) => {
                unjudged += 1;
                verdict_lines.push(
                    serde_json::to_string(&json!({ "index": i, "unjudged": true })).expect("json"),
                );
            }
            Err(e) => hard_failures.push(format!("item {i}: {e}")),
        }
    }

    let report = accuracy_report(&judged, unjudged, overall_mode);
    manifest
        .write_output(&args.report.join("report.md"), report.to_markdown().as_bytes())
        .map_err(Failure::input)?;
    manifest
        .write_output(&args.report.join("report.csv"), report.to_csv().as_bytes())
        .map_err(Failure::input)?;
    manifest
        .write_output(
            &args.report.join("report.json"),
            serde_json::to_string_pretty(&report).expect("json").as_bytes(),
        )
        .map_err(Failure::input)?;
    let mut verdicts_text = verdict_lines.join("\n");
    verdicts_text.push('\n');
    manifest
        .write_output(&args.report.join("verdicts.jsonl"), verdicts_text.as_bytes())
        .map_err(Failure::input)?;
    manifest.finish().map_err(Failure::input)?;

    print!("{}", report.to_markdown());
    if !hard_failures.is_empty() {
        return Err(Failure::partial(anyhow!(
            "{} items could not be judged: {}",
            hard_failures.len(),
            hard_failures.join("; ")
        )));
    }
    Ok(())
}
