//! Prompt assembly and completion against chat-completions style endpoints.
//!
//! Prompts are pure functions of their inputs. [`complete`] talks HTTP, or
//! serves responses from fixture files keyed by a content hash so that tests
//! and CI never touch the network.

mod client;
mod jury;
mod prompts;
pub mod testing;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use client::{complete, complete_all, replay_key, CompletionConfig, CompletionMode};
pub use jury::{build_jury_prompt, parse_jury_response, JuryCandidate, JuryPrompt, JuryVerdict, JURY_FRAME_COUNT};
pub use prompts::{
    build_description_prompt, build_description_prompt_with_budget, build_scene_prompt, estimate_tokens,
    DEFAULT_USER_TOKEN_BUDGET, DESCRIPTION_INSTRUCTIONS, SCENE_PROMPT,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_instructions: String,
    pub user_content: String,
    /// Image references (URLs or data URIs) sent alongside the text.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attachments: Option<Vec<String>>,
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("nothing to describe: the proto-language document has no statements")]
    EmptyPrompt,
    #[error("prompt needs about {estimated} tokens, budget is {budget}")]
    OverBudget { estimated: usize, budget: usize },
    #[error("jury prompt needs exactly {expected} frames, got {got}")]
    FrameCount { expected: usize, got: usize },
    #[error("jury prompt needs between 2 and 26 candidates, got {0}")]
    CandidateCount(usize),
    #[error("jury response: {0}")]
    JuryResponse(String),
    #[error("environment variable `{0}` with the API key is not set")]
    MissingCredential(String),
    #[error("request timed out after {0} attempt(s)")]
    Timeout(u32),
    #[error("endpoint returned HTTP {status}: {body}")]
    HttpStatus { status: u16, body: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed completion response: {0}")]
    MalformedResponse(String),
    #[error("no replay fixture for request {key}")]
    ReplayMiss { key: String },
    #[error("fixture I/O: {0}")]
    Fixture(String),
    #[error("invalid completion config: {0}")]
    Config(String),
}
