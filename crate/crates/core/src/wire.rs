//! The `<subplot>`/`<line>` answer format: a canonical serializer and a
//! parser that recovers instead of rejecting.
//!
//! Model outputs deviate from the canonical format in predictable ways:
//! missing space in `<line1>`, literal two-character `\n` sequences, point
//! lists elided with `...`, answers cut off mid-coordinate. A strict parser
//! would score such a run as empty and misrepresent the model, so every
//! recoverable deviation is salvaged and recorded as a warning instead.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::{canonicalize, Point, SpectralCurve, SubplotAnswer};

#[derive(Debug, Error)]
pub enum WireError {
    #[error("no <subplot> block could be recognized")]
    NoSubplotFound,
    #[error("answer has no serializable lines")]
    EmptyAnswer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarningKind {
    /// `...` or `…` stood in for elided points.
    EllipsisDropped,
    /// A point fragment could not be completed (truncated output).
    TruncatedFragment,
    /// Unexpected text inside a point list.
    StrayText,
    /// Literal backslash-n treated as whitespace.
    LiteralEscape,
    /// `</line>` missing; content recovered up to the next tag.
    UnclosedLine,
    /// `</subplot>` missing; block recovered up to the next block or EOF.
    UnclosedSubplot,
    /// A line with fewer than 2 valid points was dropped.
    ShortLineDropped,
    /// Line indices are not contiguous from their starting value.
    SparseLineIndices,
    /// Duplicate-x or non-finite points were merged/dropped while
    /// canonicalizing a line.
    PointsCanonicalized,
}

/// One recoverable deviation, located by byte offset in the input.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Warning {
    pub kind: WarningKind,
    pub offset: usize,
    pub message: String,
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}@{}: {}", self.kind, self.offset, self.message)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ParseDiagnostics {
    pub warnings: Vec<Warning>,
    /// Points successfully recovered across all lines.
    pub salvaged_points: usize,
    /// Ellipses, truncated points, and stray fragments discarded.
    pub dropped_fragments: usize,
}

impl ParseDiagnostics {
    fn warn(&mut self, kind: WarningKind, offset: usize, message: impl Into<String>) {
        self.warnings.push(Warning {
            kind,
            offset,
            message: message.into(),
        });
    }
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

/// Parses every recognizable subplot block in `text`.
pub fn parse_answer(text: &str) -> Result<(Vec<SubplotAnswer>, ParseDiagnostics), WireError> {
    let mut diags = ParseDiagnostics::default();
    let bytes = text.as_bytes();
    let mut answers = Vec::new();

    let mut pos = 0usize;
    while let Some(open) = find_ci(bytes, pos, b"<subplot") {
        let label_start = open + b"<subplot".len();
        let Some(label_end) = find_byte(bytes, label_start, b'>') else {
            pos = label_start;
            continue;
        };
        let label = clean_whitespace(&text[label_start..label_end]).trim().to_string();

        // The block body runs to the matching close tag, the next block, or
        // EOF, whichever comes first.
        let body_start = label_end + 1;
        let close = find_ci(bytes, body_start, b"</subplot>");
        let next_open = find_ci(bytes, body_start, b"<subplot");
        let (body_end, after) = match (close, next_open) {
            (Some(c), Some(n)) if c < n => (c, c + b"</subplot>".len()),
            (Some(c), None) => (c, c + b"</subplot>".len()),
            (_, Some(n)) => {
                diags.warn(WarningKind::UnclosedSubplot, open, "subplot block not closed");
                (n, n)
            }
            (None, None) => {
                diags.warn(WarningKind::UnclosedSubplot, open, "subplot block not closed");
                (text.len(), text.len())
            }
        };

        let answer = parse_subplot_body(text, body_start, body_end, label, &mut diags);
        answers.push(answer);
        pos = after;
    }

    if answers.is_empty() {
        return Err(WireError::NoSubplotFound);
    }
    Ok((answers, diags))
}

fn parse_subplot_body(
    text: &str,
    start: usize,
    end: usize,
    label: String,
    diags: &mut ParseDiagnostics,
) -> SubplotAnswer {
    let bytes = text.as_bytes();
    let mut lines: Vec<(Option<i64>, SpectralCurve)> = Vec::new();
    let mut local: Vec<String> = Vec::new();

    let mut pos = start;
    while let Some(tag) = find_ci_bounded(bytes, pos, end, b"<line") {
        // Accept `<line 1>`, `<line1>`, and bare `<line>`.
        let mut cursor = tag + b"<line".len();
        while cursor < end && (bytes[cursor] as char).is_ascii_whitespace() {
            cursor += 1;
        }
        let idx_start = cursor;
        while cursor < end && bytes[cursor].is_ascii_digit() {
            cursor += 1;
        }
        let index: Option<i64> = text[idx_start..cursor].parse().ok();
        while cursor < end && (bytes[cursor] as char).is_ascii_whitespace() {
            cursor += 1;
        }
        if cursor >= end || bytes[cursor] != b'>' {
            // Not a line tag after all (could be `<line...` garbage); skip it.
            pos = tag + b"<line".len();
            continue;
        }
        let content_start = cursor + 1;

        let close = find_ci_bounded(bytes, content_start, end, b"</line>");
        let next_line = find_ci_bounded(bytes, content_start, end, b"<line");
        let (content_end, after) = match (close, next_line) {
            (Some(c), Some(n)) if c < n => (c, c + b"</line>".len()),
            (Some(c), None) => (c, c + b"</line>".len()),
            (_, Some(n)) => {
                diags.warn(WarningKind::UnclosedLine, tag, "line element not closed");
                local.push("line element not closed".into());
                (n, n)
            }
            (None, None) => {
                diags.warn(WarningKind::UnclosedLine, tag, "line element not closed");
                local.push("line element not closed".into());
                (end, end)
            }
        };

        let points = parse_point_list(text, content_start, content_end, diags, &mut local);
        diags.salvaged_points += points.len();
        if points.len() < 2 {
            diags.warn(
                WarningKind::ShortLineDropped,
                tag,
                format!("line with {} valid point(s) dropped", points.len()),
            );
            local.push(format!("line with {} valid point(s) dropped", points.len()));
            diags.salvaged_points -= points.len();
        } else {
            let display_index = index.unwrap_or(lines.len() as i64 + 1);
            let raw = SpectralCurve::new(format!("line {display_index}"), points);
            match canonicalize(&raw) {
                Ok((canonical, stats)) => {
                    // Duplicate-x merging is expected when data density
                    // exceeds the two-decimal wire precision, so only
                    // non-finite drops count as a deviation.
                    if stats.dropped_non_finite > 0 {
                        diags.warn(
                            WarningKind::PointsCanonicalized,
                            tag,
                            format!("{} non-finite point(s) dropped", stats.dropped_non_finite),
                        );
                        local.push("points canonicalized".into());
                    }
                    lines.push((index, canonical));
                }
                Err(_) => {
                    diags.warn(WarningKind::ShortLineDropped, tag, "line had no finite points");
                    local.push("line had no finite points".into());
                }
            }
        }
        pos = after;
    }

    // Gap/ordering report for the indices the producer used.
    let indices: Vec<i64> = lines.iter().filter_map(|(i, _)| *i).collect();
    if indices.len() == lines.len() && !indices.is_empty() {
        let contiguous = indices.windows(2).all(|w| w[1] == w[0] + 1);
        if !contiguous {
            diags.warn(
                WarningKind::SparseLineIndices,
                start,
                format!("line indices {indices:?} are not contiguous"),
            );
            local.push(format!("line indices {indices:?} are not contiguous"));
        }
    }

    let mut answer = SubplotAnswer::new(label, lines.into_iter().map(|(_, c)| c).collect());
    answer.diagnostics = local;
    answer
}

/// Parses `[x,y],[x,y],...` content, salvaging around ellipses, literal
/// escapes, truncation, and stray text.
fn parse_point_list(
    text: &str,
    start: usize,
    end: usize,
    diags: &mut ParseDiagnostics,
    local: &mut Vec<String>,
) -> Vec<Point> {
    let bytes = text.as_bytes();
    let mut points = Vec::new();
    let mut pos = start;

    while pos < end {
        let c = bytes[pos];
        if (c as char).is_ascii_whitespace() || c == b',' {
            pos += 1;
            continue;
        }
        // Literal two-character escape sequence.
        if c == b'\\' && pos + 1 < end && matches!(bytes[pos + 1], b'n' | b'r' | b't') {
            diags.warn(WarningKind::LiteralEscape, pos, "literal escape treated as whitespace");
            local.push("literal escape treated as whitespace".into());
            pos += 2;
            continue;
        }
        // Ellipsis token: ASCII `...` (possibly longer) or U+2026.
        if c == b'.' && text[pos..end.min(pos + 3)].starts_with("...") {
            let mut run = pos;
            while run < end && bytes[run] == b'.' {
                run += 1;
            }
            diags.warn(WarningKind::EllipsisDropped, pos, "ellipsis in point list dropped");
            local.push("ellipsis in point list dropped".into());
            diags.dropped_fragments += 1;
            pos = run;
            continue;
        }
        if text[pos..].starts_with('…') {
            diags.warn(WarningKind::EllipsisDropped, pos, "ellipsis in point list dropped");
            local.push("ellipsis in point list dropped".into());
            diags.dropped_fragments += 1;
            pos += '…'.len_utf8();
            continue;
        }
        if c == b'[' {
            match parse_point(text, pos, end) {
                Ok((p, next)) => {
                    points.push(p);
                    pos = next;
                }
                Err(next) => {
                    diags.warn(
                        WarningKind::TruncatedFragment,
                        pos,
                        format!("unparseable point fragment `{}`", snippet(&text[pos..next])),
                    );
                    local.push("unparseable point fragment dropped".into());
                    diags.dropped_fragments += 1;
                    pos = next;
                }
            }
            continue;
        }
        // Anything else is stray text; skip to the next plausible token.
        let run_start = pos;
        while pos < end && bytes[pos] != b'[' && bytes[pos] != b',' && bytes[pos] != b'<' {
            pos += 1;
        }
        if pos == run_start {
            pos += 1; // lone `<` inside content
            continue;
        }
        let stray = text[run_start..pos].trim();
        if !stray.is_empty() {
            diags.warn(
                WarningKind::StrayText,
                run_start,
                format!("stray text `{}` ignored", snippet(stray)),
            );
            local.push("stray text ignored".into());
            diags.dropped_fragments += 1;
        }
    }
    points
}

/// Parses one `[x,y]` starting at `pos` (which points at `[`).
/// On failure returns the offset to resume scanning from.
fn parse_point(text: &str, pos: usize, end: usize) -> Result<(Point, usize), usize> {
    let bytes = text.as_bytes();
    let mut cur = pos + 1;
    let fail_to = |from: usize| -> usize {
        // Skip to the next token boundary.
        let mut p = from;
        while p < end && bytes[p] != b'[' && bytes[p] != b'<' && bytes[p] != b',' {
            p += 1;
        }
        // A `,` inside the failed fragment belongs to it.
        if p < end && bytes[p] == b',' {
            p + 1
        } else {
            p
        }
    };

    let Some((x, after_x)) = scan_number(text, cur, end) else {
        return Err(fail_to(cur));
    };
    cur = skip_ws(bytes, after_x, end);
    if cur >= end || bytes[cur] != b',' {
        return Err(fail_to(cur));
    }
    cur = skip_ws(bytes, cur + 1, end);
    let Some((y, after_y)) = scan_number(text, cur, end) else {
        return Err(fail_to(cur));
    };
    cur = skip_ws(bytes, after_y, end);
    if cur >= end || bytes[cur] != b']' {
        return Err(fail_to(cur));
    }
    Ok((Point::new(x, y), cur + 1))
}

fn skip_ws(bytes: &[u8], mut pos: usize, end: usize) -> usize {
    while pos < end && (bytes[pos] as char).is_ascii_whitespace() {
        pos += 1;
    }
    pos
}

/// Scans a float: sign, digits, fraction, optional exponent.
fn scan_number(text: &str, start: usize, end: usize) -> Option<(f64, usize)> {
    let bytes = text.as_bytes();
    let mut pos = skip_ws(bytes, start, end);
    let begin = pos;
    if pos < end && (bytes[pos] == b'+' || bytes[pos] == b'-') {
        pos += 1;
    }
    let mut digits = 0;
    while pos < end && bytes[pos].is_ascii_digit() {
        pos += 1;
        digits += 1;
    }
    if pos < end && bytes[pos] == b'.' {
        pos += 1;
        while pos < end && bytes[pos].is_ascii_digit() {
            pos += 1;
            digits += 1;
        }
    }
    if digits == 0 {
        return None;
    }
    if pos < end && (bytes[pos] == b'e' || bytes[pos] == b'E') {
        let mut exp = pos + 1;
        if exp < end && (bytes[exp] == b'+' || bytes[exp] == b'-') {
            exp += 1;
        }
        let exp_digits_start = exp;
        while exp < end && bytes[exp].is_ascii_digit() {
            exp += 1;
        }
        if exp > exp_digits_start {
            pos = exp;
        }
    }
    text[begin..pos].parse::<f64>().ok().map(|v| (v, pos))
}

fn clean_whitespace(s: &str) -> String {
    s.replace("\\n", " ").replace("\\t", " ").replace("\\r", " ")
}

fn snippet(s: &str) -> String {
    let trimmed: String = s.chars().take(24).collect();
    if trimmed.len() < s.len() {
        format!("{trimmed}…")
    } else {
        trimmed
    }
}

fn find_byte(bytes: &[u8], from: usize, needle: u8) -> Option<usize> {
    bytes[from.min(bytes.len())..]
        .iter()
        .position(|&b| b == needle)
        .map(|i| from + i)
}

/// Case-insensitive substring search from `from`.
fn find_ci(haystack: &[u8], from: usize, needle: &[u8]) -> Option<usize> {
    find_ci_bounded(haystack, from, haystack.len(), needle)
}

fn find_ci_bounded(haystack: &[u8], from: usize, end: usize, needle: &[u8]) -> Option<usize> {
    if needle.is_empty() || from >= end || end - from < needle.len() {
        return None;
    }
    let last = end - needle.len();
    (from..=last).find(|&i| {
        haystack[i..i + needle.len()]
            .iter()
            .zip(needle)
            .all(|(a, b)| a.eq_ignore_ascii_case(b))
    })
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

/// Emits the canonical format:
///
/// ```text
/// <subplot A>
/// <line 1>[0.00,1.25],[1.00,2.50]</line>
/// </subplot>
/// ```
///
/// Line indices are re-numbered 1-based contiguous; values are fixed to two
/// decimals with ties resolved half-to-even on the underlying binary value.
pub fn serialize_subplot(answer: &SubplotAnswer) -> Result<String, WireError> {
    if answer.lines.is_empty() || answer.lines.iter().any(|l| l.is_empty()) {
        return Err(WireError::EmptyAnswer);
    }
    let mut out = String::new();
    out.push_str("<subplot ");
    out.push_str(&answer.subplot_id);
    out.push_str(">\n");
    for (i, line) in answer.lines.iter().enumerate() {
        out.push_str(&format!("<line {}>", i + 1));
        for (j, p) in line.points.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format!("[{:.2},{:.2}]", p.x, p.y));
        }
        out.push_str("</line>\n");
    }
    out.push_str("</subplot>");
    Ok(out)
}

/// Two-decimal quantization exactly as the serializer emits it.
pub fn quantize2(v: f64) -> f64 {
    format!("{v:.2}").parse().expect("fixed-precision float round trip")
}
