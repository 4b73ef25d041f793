//! One-shot subcommands operating on a single file.

use anyhow::{anyhow, Context};
use serde_json::json;

use speccurve::curve::{canonicalize, save_curve_json, SpectrumType};
use speccurve::metrics::{score_subplot, MetricKind};
use speccurve::simplify::{sample_curve, SamplingConfig};
use speccurve::smooth::sg_smooth;
use speccurve::spline::{resample_dense, spline_fit, uniform_grid};
use speccurve::svg::render_svg;
use speccurve::wire;

use crate::config::{parse_metric_selector, RunContext};
use crate::io;
use crate::{CmdResult, Failure};
use crate::{ParseArgs, ReconstructArgs, RenderArgs, SampleArgs, ScoreArgs, SmoothArgs};

pub fn smooth(ctx: &RunContext, args: &SmoothArgs) -> CmdResult {
    let input = io::load_input(&args.input).map_err(Failure::input)?;
    let cfg = ctx.sg_config(args.window, args.order);
    let curve = input
        .curves
        .into_iter()
        .next()
        .ok_or_else(|| Failure::input(anyhow!("input holds no curve")))?;
    let (canonical, _) = canonicalize(&curve).map_err(Failure::input)?;
    let smoothed = sg_smooth(&canonical, cfg).map_err(Failure::input)?;
    save_curve_json(&args.output, &smoothed).map_err(Failure::input)?;
    Ok(())
}

pub fn sample(ctx: &RunContext, args: &SampleArgs) -> CmdResult {
    let input = io::load_input(&args.input).map_err(Failure::input)?;
    let curve = input
        .curves
        .into_iter()
        .next()
        .ok_or_else(|| Failure::input(anyhow!("input holds no curve")))?;
    let (canonical, _) = canonicalize(&curve).map_err(Failure::input)?;
    let cfg = SamplingConfig {
        baseline_fraction: args
            .baseline_frac
            .or(ctx.file.sampling.baseline_fraction)
            .unwrap_or(0.05),
        epsilon: args.epsilon.or_else(|| {
            if args.target_points.is_some() {
                None
            } else {
                ctx.file.sampling.epsilon
            }
        }),
        target_points: args.target_points,
    };
    let outcome = sample_curve(&canonical, &cfg).map_err(Failure::config)?;
    let sampled = canonical.select(&outcome.indices);
    save_curve_json(&args.output, &sampled).map_err(Failure::input)?;
    let stats = json!({
        "n_in": outcome.n_in,
        "n_out": outcome.n_out,
        "reduction_ratio": outcome.reduction_ratio,
        "epsilon_used": outcome.epsilon_used,
        "warning": outcome.warning,
    });
    let stats_text = serde_json::to_string_pretty(&stats).expect("json");
    match &args.stats {
        Some(path) => std::fs::write(path, stats_text).map_err(|e| Failure::input(anyhow!(e)))?,
        None => println!("{stats_text}"),
    }
    Ok(())
}

pub fn reconstruct(_ctx: &RunContext, args: &ReconstructArgs) -> CmdResult {
    let input = io::load_input(&args.input).map_err(Failure::input)?;
    let curve = input
        .curves
        .into_iter()
        .next()
        .ok_or_else(|| Failure::input(anyhow!("input holds no curve")))?;
    let (canonical, _) = canonicalize(&curve).map_err(Failure::input)?;
    let spline = spline_fit(&canonical).map_err(Failure::input)?;

    let grid: Vec<f64> = if args.grid == "original" {
        let original_path = args
            .original
            .as_ref()
            .ok_or_else(|| Failure::config(anyhow!("--grid original requires --original FILE")))?;
        let original = io::load_input(original_path).map_err(Failure::input)?;
        let first = original
            .curves
            .into_iter()
            .next()
            .ok_or_else(|| Failure::input(anyhow!("original file holds no curve")))?;
        first.points.iter().map(|p| p.x).collect()
    } else if let Some(k) = args.grid.strip_prefix("uniform:") {
        let k: usize = k
            .parse()
            .map_err(|_| Failure::config(anyhow!("bad grid spec `{}`", args.grid)))?;
        uniform_grid(&spline, k)
    } else {
        return Err(Failure::config(anyhow!(
            "--grid must be `original` or `uniform:K`, got `{}`",
            args.grid
        )));
    };
    let mut dense = resample_dense(&spline, &grid).map_err(Failure::input)?;
    dense.name = format!("{} (reconstructed)", canonical.name);
    dense.x_label = canonical.x_label.clone();
    dense.y_label = canonical.y_label.clone();
    save_curve_json(&args.output, &dense).map_err(Failure::input)?;
    Ok(())
}

pub fn render(_ctx: &RunContext, args: &RenderArgs) -> CmdResult {
    let spectrum_type: SpectrumType = args
        .spectrum_type
        .parse()
        .map_err(|e: String| Failure::config(anyhow!(e)))?;
    let mut curves = Vec::new();
    for path in &args.inputs {
        curves.extend(io::load_input(path).map_err(Failure::input)?.curves);
    }
    let doc = render_svg(&curves, spectrum_type).map_err(Failure::input)?;
    std::fs::write(&args.output, doc)
        .with_context(|| format!("writing {}", args.output.display()))
        .map_err(Failure::input)?;
    Ok(())
}

pub fn parse(_ctx: &RunContext, args: &ParseArgs) -> CmdResult {
    let text = std::fs::read_to_string(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))
        .map_err(Failure::input)?;
    let (answers, diags) = wire::parse_answer(&text).map_err(|e| Failure::input(anyhow!(e)))?;
    let output = match &args.subplot {
        Some(id) => {
            let answer = io::select_subplot(answers, Some(id)).map_err(Failure::input)?;
            serde_json::to_string_pretty(&json!({
                "answer": answer,
                "diagnostics": diags,
            }))
        }
        None => serde_json::to_string_pretty(&json!({
            "answers": answers,
            "diagnostics": diags,
        })),
    }
    .expect("json");
    std::fs::write(&args.output, output)
        .with_context(|| format!("writing {}", args.output.display()))
        .map_err(Failure::input)?;
    Ok(())
}

pub fn score(ctx: &RunContext, args: &ScoreArgs) -> CmdResult {
    let metrics = parse_metric_selector(&args.metric).map_err(Failure::config)?;
    let opts = ctx
        .score_options(args.strict_eq2, args.penalize_unmatched, args.raw_units)
        .map_err(Failure::config)?;
    let truth = io::load_answer(&args.truth, None).map_err(Failure::input)?;
    let pred = io::load_answer(&args.pred, Some(&truth.subplot_id)).map_err(Failure::input)?;

    let mut scores = serde_json::Map::new();
    let mut assignment = None;
    for kind in metrics {
        let result = score_subplot(&pred, &truth, kind, &opts);
        let key = match kind {
            MetricKind::Chamfer => "score_cd",
            MetricKind::Hausdorff => "score_hd",
            MetricKind::Wasserstein => "score_wd",
        };
        scores.insert(key.into(), json!(result.score));
        assignment.get_or_insert(result.assignment);
    }
    let report = json!({
        "pred": args.pred.display().to_string(),
        "truth": args.truth.display().to_string(),
        "subplot_id": truth.subplot_id,
        "scores": scores,
        "assignment": assignment,
    });
    let text = serde_json::to_string_pretty(&report).expect("json");
    match &args.output {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure::input(anyhow!(e)))?,
        None => println!("{text}"),
    }
    Ok(())
}
