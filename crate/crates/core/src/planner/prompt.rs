use crate::error::{Error, Result};
use crate::scene::{emit_human_block, emit_objects_block, SceneState};

/// Agent prompt template with `{instruction}`, `{human_state}` and `{environment_state}` slots.
pub const PROMPT_TEMPLATE: &str = include_str!("../../fixtures/agent_prompt.txt");

pub fn build_system_prompt(scene: &SceneState, instruction: &str) -> Result<String> {
    if instruction.trim().is_empty() {
        return Err(Error::Validation("instruction must not be empty".into()));
    }
    scene.validate()?;
    Ok(PROMPT_TEMPLATE
        .replace("{instruction}", instruction.trim())
        .replace("{human_state}", &emit_human_block(&scene.human))
        .replace("{environment_state}", &emit_objects_block(&scene.objects)))
}
