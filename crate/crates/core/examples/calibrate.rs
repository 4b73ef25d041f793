//! Per-type fidelity statistics for the versioned synthetic suite.
//! Development tool for tuning generator profiles against the pipeline.

use speccurve::exec::ExecMode;
use speccurve::pipeline::{run_suite, PipelineConfig};
use speccurve::synth::{fidelity_suite, DEFAULT_MASTER_SEED};

fn main() {
    let per_type: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(100);
    let t0 = std::time::Instant::now();
    let suite = fidelity_suite(DEFAULT_MASTER_SEED, per_type);
    let cfg = PipelineConfig::default();
    let outcomes = run_suite(&suite, &cfg, ExecMode::default());
    let elapsed = t0.elapsed();

    let mut by_type: std::collections::BTreeMap<String, Vec<(f64, f64, f64, f64)>> =
        Default::default();
    let mut failures = 0usize;
    for (sample, result) in suite.iter().zip(&outcomes) {
        match result {
            Ok(outs) => {
                for o in outs {
                    by_type
                        .entry(sample.spec.spectrum_type.to_string())
                        .or_default()
                        .push((
                            o.report.score_cd,
                            o.report.score_hd,
                            o.report.score_wd,
                            o.report.reduction_ratio,
                        ));
                }
            }
            Err(e) => {
                failures += 1;
                eprintln!("sample {}: {e}", sample.index);
            }
        }
    }

    println!(
        "{:8} {:>7} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>6}",
        "type", "n", "cd_mean", "cd_min", "hd_mean", "hd_min", "wd_mean", "wd_min", "mean_R", "below"
    );
    let (mut all_cd, mut all_hd, mut all_wd, mut all_r) = (0.0, 0.0, 0.0, 0.0);
    let mut total = 0usize;
    let mut below_total = 0usize;
    for (ty, rows) in &by_type {
        let n = rows.len() as f64;
        let mean = |f: fn(&(f64, f64, f64, f64)) -> f64| rows.iter().map(f).sum::<f64>() / n;
        let min = |f: fn(&(f64, f64, f64, f64)) -> f64| {
            rows.iter().map(f).fold(f64::INFINITY, f64::min)
        };
        let below = rows
            .iter()
            .filter(|r| r.0 < 0.97 || r.1 < 0.95 || r.2 < 0.97)
            .count();
        println!(
            "{:8} {:>7} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>6}",
            ty,
            rows.len(),
            mean(|r| r.0),
            min(|r| r.0),
            mean(|r| r.1),
            min(|r| r.1),
            mean(|r| r.2),
            min(|r| r.2),
            mean(|r| r.3),
            below
        );
        all_cd += rows.iter().map(|r| r.0).sum::<f64>();
        all_hd += rows.iter().map(|r| r.1).sum::<f64>();
        all_wd += rows.iter().map(|r| r.2).sum::<f64>();
        all_r += rows.iter().map(|r| r.3).sum::<f64>();
        total += rows.len();
        below_total += below;
    }
    let t = total as f64;
    println!(
        "\noverall  n={total} cd={:.4} hd={:.4} wd={:.4} R={:.4} below-threshold={} ({:.1}%) errors={} elapsed={:.1}s",
        all_cd / t,
        all_hd / t,
        all_wd / t,
        all_r / t,
        below_total,
        100.0 * below_total as f64 / t,
        failures,
        elapsed.as_secs_f64()
    );
}
