use super::{LlmError, PromptBundle};
use crate::protolang::ProtoDocument;

/// Instruction for the scene classifier, sent with a single frame.
pub const SCENE_PROMPT: &str = "In what scene does the action take place? Simply name the scene with no further \
explanations. Use very few words, just like a classification task, e.g., classroom, park, football field, \
mountain trail, living room, street.";

/// Version 1 of the rewriting instructions.
pub const DESCRIPTION_INSTRUCTIONS: &str = "\
You will receive an automatically generated, schematic description of a video. \
Each line describes one event: who acts, what they do, when, and how the event relates to events described before it. \
Rewrite it as a fluent, natural description that narrates what happens in the video in chronological order.

Rules:
1. Object menus look like `possibly involving: <a | b | c>`. For each menu, pick at most one object that is most \
probable in the given context, or pick none. You may also pick a new object that is not present in the menu when \
the context clearly calls for it.
2. Action names come from an automatic detector. You may change the name of an action to one that fits the context \
better, or delete an action together with its associated entities when it does not fit the context.
3. Keep the temporal and spatial relations (after, at the same time, meanwhile, near). Do not invent new people.
4. When a scene line is present, use it to ground the description in a concrete setting.
5. Do not mention frames, timestamps, person numbers, menus or this notation. Output only the final description.";

pub const DEFAULT_USER_TOKEN_BUDGET: usize = 8000;

/// Rough token count: one token per four characters, rounded up.
pub fn estimate_tokens(s: &str) -> usize {
    s.chars().count().div_ceil(4)
}

pub fn build_description_prompt(proto: &ProtoDocument) -> Result<PromptBundle, LlmError> {
    build_description_prompt_with_budget(proto, DEFAULT_USER_TOKEN_BUDGET)
}

/// Embeds the scene line and every statement verbatim; group intro lines are
/// left out since each statement already names its actor.
pub fn build_description_prompt_with_budget(proto: &ProtoDocument, budget: usize) -> Result<PromptBundle, LlmError> {
    if proto.is_empty() {
        return Err(LlmError::EmptyPrompt);
    }
    let mut user = String::new();
    if let Some(scene) = &proto.scene_line {
        user.push_str(scene);
        user.push('\n');
    }
    for s in proto.statements() {
        user.push_str(&s.text);
        user.push('\n');
    }
    let estimated = estimate_tokens(&user);
    if estimated > budget {
        return Err(LlmError::OverBudget { estimated, budget });
    }
    Ok(PromptBundle {
        system_instructions: DESCRIPTION_INSTRUCTIONS.to_string(),
        user_content: user,
        attachments: None,
    })
}

pub fn build_scene_prompt() -> &'static str {
    SCENE_PROMPT
}
