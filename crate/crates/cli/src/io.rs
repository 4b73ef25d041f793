//! Input loading: curve files (JSON schema or CSV), dataset samples from
//! `gen`, subplot answers, and the prediction/truth pairing conventions.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};

use speccurve::curve::{load_curve_csv, SpectralCurve, SpectrumType, SubplotAnswer};
use speccurve::synth::GeneratedSample;
use speccurve::wire;

/// One loadable input: either a bare curve or a generated dataset sample.
#[derive(Debug, Clone)]
pub struct LoadedInput {
    pub stem: String,
    pub curves: Vec<SpectralCurve>,
    pub type_hint: Option<SpectrumType>,
}

pub fn file_stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Loads a curve-bearing file: `.csv`, curve JSON (`points`), dataset
/// sample JSON (`spec` + `curves`), or subplot JSON (`lines`).
pub fn load_input(path: &Path) -> anyhow::Result<LoadedInput> {
    let stem = file_stem(path);
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    if ext.eq_ignore_ascii_case("csv") {
        let curve = load_curve_csv(path)?;
        return Ok(LoadedInput { stem, curves: vec![curve], type_hint: None });
    }
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if value.get("curves").is_some() {
        let sample: GeneratedSample = serde_json::from_value(value)?;
        return Ok(LoadedInput {
            stem,
            type_hint: Some(sample.spec.spectrum_type),
            curves: sample.curves,
        });
    }
    if value.get("points").is_some() {
        let curve: SpectralCurve = serde_json::from_value(value)?;
        return Ok(LoadedInput { stem, curves: vec![curve], type_hint: None });
    }
    if value.get("lines").is_some() {
        let answer: SubplotAnswer = serde_json::from_value(value)?;
        return Ok(LoadedInput { stem, curves: answer.lines, type_hint: None });
    }
    bail!(
        "{}: unrecognized schema (expected curve `points`, dataset `curves`, or subplot `lines`)",
        path.display()
    )
}

/// A single file, or every `.json`/`.csv` file in a directory, sorted by
/// name for deterministic processing order.
pub fn collect_inputs(path: &Path) -> anyhow::Result<Vec<PathBuf>> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    if !path.is_dir() {
        bail!("{} is neither a file nor a directory", path.display());
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            // Skip run artifacts living next to dataset files.
            if matches!(
                file_stem(p).as_str(),
                "run_manifest" | "train" | "qc_report" | "summary" | "ablation" | "scores" | "leaderboard"
            ) {
                return false;
            }
            matches!(
                p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
                Some("json") | Some("csv")
            )
        })
        .collect();
    files.sort();
    Ok(files)
}

/// Loads a prediction or truth side into a SubplotAnswer. Wire-format text
/// parses tolerantly; `subplot_hint` selects among multiple blocks
/// (case-insensitive), falling back to a sole block with a note.
pub fn load_answer(path: &Path, subplot_hint: Option<&str>) -> anyhow::Result<SubplotAnswer> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    if ext.eq_ignore_ascii_case("txt") {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        let (answers, _) = wire::parse_answer(&text)?;
        return select_subplot(answers, subplot_hint);
    }
    let input = load_input(path)?;
    Ok(SubplotAnswer::new(
        subplot_hint.unwrap_or("A").to_string(),
        input.curves,
    ))
}

pub fn select_subplot(
    answers: Vec<SubplotAnswer>,
    hint: Option<&str>,
) -> anyhow::Result<SubplotAnswer> {
    if answers.is_empty() {
        bail!("no subplot block found");
    }
    match hint {
        None => Ok(answers.into_iter().next().unwrap()),
        Some(id) => {
            let total = answers.len();
            let mut matching = answers
                .iter()
                .position(|a| a.subplot_id.eq_ignore_ascii_case(id));
            if matching.is_none() && total == 1 {
                // Sole block with a mismatched id still counts, noted.
                matching = Some(0);
            }
            let Some(pos) = matching else {
                bail!("no subplot `{id}` among {total} blocks");
            };
            let mut answer = answers.into_iter().nth(pos).unwrap();
            if !answer.subplot_id.eq_ignore_ascii_case(id) {
                answer
                    .diagnostics
                    .push(format!("requested subplot `{id}`, using sole block `{}`", answer.subplot_id));
            }
            Ok(answer)
        }
    }
}

/// Pairs prediction texts with truth files: `pred/NAME.txt <-> truth/NAME.json`,
/// or an explicit two-column CSV manifest (`pred,truth`, header optional).
pub fn pair_pred_truth(
    pred_dir: &Path,
    truth_dir: &Path,
    manifest: Option<&Path>,
) -> anyhow::Result<Vec<(PathBuf, PathBuf)>> {
    if let Some(manifest) = manifest {
        let text = std::fs::read_to_string(manifest)
            .with_context(|| format!("reading manifest {}", manifest.display()))?;
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let Some((pred, truth)) = line.split_once(',') else {
                bail!("manifest line {}: expected `pred,truth`", i + 1);
            };
            // Header row: first column is not a .txt path.
            if i == 0 && !pred.trim().to_ascii_lowercase().ends_with(".txt") {
                continue;
            }
            pairs.push((PathBuf::from(pred.trim()), PathBuf::from(truth.trim())));
        }
        return Ok(pairs);
    }
    let mut preds: Vec<PathBuf> = std::fs::read_dir(pred_dir)
        .with_context(|| format!("reading {}", pred_dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().and_then(|e| e.to_str()).map(|e| e.eq_ignore_ascii_case("txt")).unwrap_or(false))
        .collect();
    preds.sort();
    if preds.is_empty() {
        bail!("no .txt predictions in {}", pred_dir.display());
    }
    let mut pairs = Vec::new();
    for pred in preds {
        let truth = truth_dir.join(format!("{}.json", file_stem(&pred)));
        if !truth.exists() {
            return Err(anyhow!("missing truth file {}", truth.display()));
        }
        pairs.push((pred, truth));
    }
    Ok(pairs)
}
