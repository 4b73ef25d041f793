//! Golden corpus: real model outputs for the data-extraction task, stored
//! verbatim with their truncations, ellipses, and escape artifacts. The
//! parser must salvage every file without crashing.

use speccurve::wire::{parse_answer, serialize_subplot};

fn fixture(name: &str) -> String {
    let path = format!(
        "{}/fixtures/model_outputs/{name}.txt",
        env!("CARGO_MANIFEST_DIR")
    );
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("read {path}: {e}"))
}

#[test]
fn deepseek_vl2_parses_nine_lines() {
    let (answers, diags) = parse_answer(&fixture("deepseek_vl2")).unwrap();
    assert_eq!(answers.len(), 1);
    assert_eq!(answers[0].lines.len(), 9);
    // Every line elides its middle with an ellipsis.
    assert_eq!(diags.dropped_fragments, 9);
    for line in &answers[0].lines {
        assert_eq!(line.len(), 4);
    }
}

#[test]
fn gpt_o4_mini_parses_seven_lines_without_tag_spaces() {
    let (answers, diags) = parse_answer(&fixture("gpt_o4_mini")).unwrap();
    assert_eq!(answers.len(), 1);
    assert_eq!(answers[0].lines.len(), 7);
    for line in &answers[0].lines {
        assert_eq!(line.len(), 10);
    }
    assert!(diags.warnings.is_empty(), "{:?}", diags.warnings);
}

#[test]
fn gpt5_parses_seven_lines_with_literal_escapes() {
    let (answers, _) = parse_answer(&fixture("gpt5")).unwrap();
    assert_eq!(answers.len(), 1);
    assert_eq!(answers[0].lines.len(), 7);
    for line in &answers[0].lines {
        assert_eq!(line.len(), 9);
    }
}

#[test]
fn gemini_25_pro_parses_seven_lines() {
    let (answers, _) = parse_answer(&fixture("gemini_25_pro")).unwrap();
    assert_eq!(answers.len(), 1);
    assert_eq!(answers[0].lines.len(), 7);
    assert_eq!(answers[0].lines[5].len(), 31);
}

#[test]
fn qwen3_vl_32b_parses_three_lines_despite_truncation() {
    let (answers, diags) = parse_answer(&fixture("qwen3_vl_32b")).unwrap();
    assert_eq!(answers.len(), 1);
    assert_eq!(answers[0].subplot_id, "a");
    assert!(answers[0].lines.len() >= 3, "got {}", answers[0].lines.len());
    // The final point is cut off mid-coordinate and must be dropped while
    // the rest of the line survives.
    assert!(diags.dropped_fragments >= 1);
    assert_eq!(answers[0].lines[0].len(), 141);
    assert_eq!(answers[0].lines[1].len(), 141);
    assert_eq!(answers[0].lines[2].len(), 57);
}

#[test]
fn corpus_survives_reserialization() {
    for name in ["deepseek_vl2", "gpt_o4_mini", "gpt5", "gemini_25_pro", "qwen3_vl_32b"] {
        let (answers, _) = parse_answer(&fixture(name)).unwrap();
        for answer in &answers {
            let text = serialize_subplot(answer).unwrap();
            let (reparsed, diags) = parse_answer(&text).unwrap();
            assert_eq!(reparsed[0].lines.len(), answer.lines.len(), "{name}");
            assert!(diags.warnings.is_empty(), "{name}: {:?}", diags.warnings);
        }
    }
}
