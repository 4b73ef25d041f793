//! Prompt templates used by the dataset tooling.
//!
//! The judging template lives with the judge module; these two are stored
//! for harness users driving external models and are not executed here.

/// VQA answering prompt: substitute `{QUESTION}`.
pub const VQA_ANSWER: &str = include_str!("../fixtures/prompts/vqa_answer.txt");

/// Underlying-data extraction prompt for untuned models: substitute
/// `{QUESTION}`; the answer is expected in the `<subplot>` wire format.
pub const UNDERLYING_EXTRACT: &str = include_str!("../fixtures/prompts/underlying_extract.txt");
