//! Planner protocol: prompt assembly, chat client, command parsing and the episode loop.
//!
//! One episode alternates planner replies with executor feedback. Each reply is parsed
//! for fenced code blocks; commands run on the kinematic executor and the outcome is
//! written back as the next user turn. Failed steps (parse or protocol errors, collisions)
//! count toward a consecutive-error budget that any clean step resets.

mod client;
mod parse;
mod prompt;

pub use client::{ChatMessage, HttpPlanner, PlannerConfig, ENV_API_KEY, ENV_ENDPOINT, ENV_MODEL};
pub use parse::{parse_commands, parse_message, AgentCommand, ParsedMessage};
pub use prompt::{build_system_prompt, PROMPT_TEMPLATE};

use crate::collide::{format_collision_error, format_track, CollisionReport};
use crate::error::{Error, Result};
use crate::executor::{apply_result, ExecutionResult, KinematicExecutor, MotionClip};
use crate::pathfind::{repair_track, RepairOptions};
use crate::scene::{emit_scene_text, human_box, SceneState, Vec3};
use crate::traj::{ControlTrack, Waypoint};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Source of planner replies.
pub trait Planner {
    fn request(&mut self, transcript: &[ChatMessage]) -> Result<String>;
}

impl Planner for HttpPlanner {
    fn request(&mut self, transcript: &[ChatMessage]) -> Result<String> {
        self.complete(transcript)
    }
}

/// Replays recorded assistant messages in order.
#[derive(Debug, Clone, Default)]
pub struct MockPlanner {
    replies: Vec<String>,
    next: usize,
}

impl MockPlanner {
    pub fn new(replies: Vec<String>) -> Self {
        MockPlanner { replies, next: 0 }
    }

    /// Assistant messages of a transcript file (JSON lines, other records skipped).
    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut replies = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: Record = serde_json::from_str(line).map_err(|e| Error::parse(i + 1, e.to_string()))?;
            if let Record::Message(m) = rec {
                if m.role == Role::Assistant {
                    replies.push(m.content);
                }
            }
        }
        Ok(MockPlanner::new(replies))
    }
}

impl Planner for MockPlanner {
    fn request(&mut self, _transcript: &[ChatMessage]) -> Result<String> {
        let r = self.replies.get(self.next).cloned();
        self.next += 1;
        r.ok_or_else(|| Error::PlannerUnavailable("mock transcript exhausted".into()))
    }
}

/// One chat round trip for the transcript so far.
pub fn request_step(config: &PlannerConfig, log: &EpisodeLog) -> Result<String> {
    HttpPlanner::new(config.clone())?.complete(&log.chat())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    User,
    Assistant,
    Executor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    ErrorBudgetExhausted,
    StepBudgetExhausted,
    PlannerUnavailable,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Completed => "completed",
            Outcome::ErrorBudgetExhausted => "error_budget_exhausted",
            Outcome::StepBudgetExhausted => "step_budget_exhausted",
            Outcome::PlannerUnavailable => "planner_unavailable",
        }
    }
}

/// What the harness did with one planner reply.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StepReport {
    pub commands: Vec<String>,
    pub error: bool,
    pub applied: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub colliding: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub suggestion: Vec<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogMessage {
    pub step: usize,
    pub role: Role,
    pub content: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<StepReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Record {
    Episode { instruction: String, scene: SceneState },
    Message(LogMessage),
    Outcome { outcome: Outcome, steps: usize, final_scene: SceneState },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub instruction: String,
    pub initial_scene: SceneState,
    pub messages: Vec<LogMessage>,
    pub outcome: Option<Outcome>,
    pub steps: usize,
    pub final_scene: SceneState,
    /// Clips of applied commands, in order. Not serialized.
    pub clips: Vec<MotionClip>,
}

impl EpisodeLog {
    pub fn new(scene: &SceneState, instruction: &str) -> Self {
        EpisodeLog {
            instruction: instruction.to_string(),
            initial_scene: scene.clone(),
            messages: Vec::new(),
            outcome: None,
            steps: 0,
            final_scene: scene.clone(),
            clips: Vec::new(),
        }
    }

    /// Chat view: executor feedback is sent back as user turns.
    pub fn chat(&self) -> Vec<ChatMessage> {
        self.messages
            .iter()
            .map(|m| {
                let role = if m.role == Role::Assistant { "assistant" } else { "user" };
                ChatMessage::new(role, m.content.clone())
            })
            .collect()
    }

    pub fn reports(&self) -> impl Iterator<Item = &StepReport> {
        self.messages.iter().filter_map(|m| m.report.as_ref())
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut push = |r: &Record| {
            out.push_str(&serde_json::to_string(r).expect("log records serialize"));
            out.push('\n');
        };
        push(&Record::Episode { instruction: self.instruction.clone(), scene: self.initial_scene.clone() });
        for m in &self.messages {
            push(&Record::Message(m.clone()));
        }
        if let Some(outcome) = self.outcome {
            push(&Record::Outcome { outcome, steps: self.steps, final_scene: self.final_scene.clone() });
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut log: Option<EpisodeLog> = None;
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: Record = serde_json::from_str(line).map_err(|e| Error::parse(i + 1, e.to_string()))?;
            match rec {
                Record::Episode { instruction, scene } => log = Some(EpisodeLog::new(&scene, &instruction)),
                Record::Message(m) => log
                    .as_mut()
                    .ok_or_else(|| Error::parse(i + 1, "message before episode header"))?
                    .messages
                    .push(m),
                Record::Outcome { outcome, steps, final_scene } => {
                    let l = log.as_mut().ok_or_else(|| Error::parse(i + 1, "outcome before episode header"))?;
                    l.outcome = Some(outcome);
                    l.steps = steps;
                    l.final_scene = final_scene;
                }
            }
        }
        log.ok_or_else(|| Error::parse(1, "missing episode header"))
    }

    fn push(&mut self, role: Role, content: String, report: Option<StepReport>) {
        self.messages.push(LogMessage { step: self.steps, role, content, report });
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeConfig {
    pub max_steps: usize,
    pub max_consecutive_errors: usize,
    pub repair: RepairOptions,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig { max_steps: 30, max_consecutive_errors: 5, repair: RepairOptions::default() }
    }
}

const NO_CODE_REPLY: &str = "No code block was found. Continue with the next step, or call task_completed() when the task is finished.";

/// Runs the planner loop until completion or a budget is exhausted.
pub fn run_episode(
    planner: &mut dyn Planner,
    scene: &SceneState,
    instruction: &str,
    executor: &KinematicExecutor,
    config: &EpisodeConfig,
) -> Result<EpisodeLog> {
    if config.max_consecutive_errors == 0 {
        return Err(Error::arg("max_consecutive_errors must be at least 1"));
    }
    let prompt = build_system_prompt(scene, instruction)?;
    let mut log = EpisodeLog::new(scene, instruction);
    log.push(Role::User, prompt, None);
    let mut scene = scene.clone();
    let mut consecutive = 0;

    while log.outcome.is_none() {
        if log.steps == config.max_steps {
            log.outcome = Some(Outcome::StepBudgetExhausted);
            break;
        }
        log.steps += 1;
        let reply = match planner.request(&log.chat()) {
            Ok(r) => r,
            Err(e) => {
                log.push(Role::Executor, e.to_string(), None);
                log.outcome = Some(Outcome::PlannerUnavailable);
                break;
            }
        };
        log.push(Role::Assistant, reply.clone(), None);

        let mut report = StepReport::default();
        let feedback = match parse_message(&reply) {
            Err(e) => {
                report.error = true;
                format!("Error: {e}\nPlease fix the code and resend it.")
            }
            Ok(parsed) if parsed.commands.is_empty() => {
                report.warnings = parsed.warnings;
                NO_CODE_REPLY.to_string()
            }
            Ok(parsed) => {
                report.warnings = parsed.warnings;
                let mut parts = Vec::new();
                for cmd in &parsed.commands {
                    report.commands.push(cmd.kind().to_string());
                    if *cmd == AgentCommand::TaskCompleted {
                        log.outcome = Some(Outcome::Completed);
                        parts.push("Task completed.".to_string());
                        break;
                    }
                    match execute(executor, &scene, cmd) {
                        Err(e) => {
                            report.error = true;
                            parts.push(format!("Error: {e}\nPlease fix the code and resend it."));
                            break;
                        }
                        Ok(result) => {
                            let step = assess(&scene, &result, &config.repair)?;
                            report.colliding.extend(step.colliding.iter().cloned());
                            if let Some(s) = &step.suggestion {
                                report.suggestion = s.rows();
                            }
                            if step.apply {
                                scene = apply_result(&scene, &result);
                                report.applied = true;
                                log.clips.push(result.clip);
                            }
                            parts.push(step.feedback);
                            if step.error {
                                report.error = true;
                                break;
                            }
                        }
                    }
                }
                parts.join("\n\n")
            }
        };
        consecutive = if report.error { consecutive + 1 } else { 0 };
        log.push(Role::Executor, feedback, Some(report));
        if log.outcome.is_none() && consecutive >= config.max_consecutive_errors {
            log.outcome = Some(Outcome::ErrorBudgetExhausted);
        }
    }
    log.final_scene = scene;
    Ok(log)
}

/// Runs one executable command against `scene`.
pub fn execute(executor: &KinematicExecutor, scene: &SceneState, cmd: &AgentCommand) -> Result<ExecutionResult> {
    match cmd {
        AgentCommand::GenerateMotion(m) => executor.generate_motion(scene, m),
        AgentCommand::GenerateInteraction(i) => executor.generate_interaction(scene, i),
        AgentCommand::TaskCompleted => Err(Error::Protocol("task_completed is not executable".into())),
    }
}

struct Assessment {
    apply: bool,
    error: bool,
    feedback: String,
    colliding: Vec<String>,
    suggestion: Option<ControlTrack>,
}

fn assess(scene: &SceneState, result: &ExecutionResult, repair: &RepairOptions) -> Result<Assessment> {
    let Some(report) = result.collision_reports.iter().find(|r| r.collided) else {
        return Ok(Assessment {
            apply: true,
            error: false,
            feedback: format!("Execution succeeded. Current environment state:\n{}", emit_scene_text(&result.final_scene)),
            colliding: Vec::new(),
            suggestion: None,
        });
    };
    let suggestion = suggest(scene, result, report, repair);
    let mut text = format_collision_error(report)?;
    if let Some(track) = &suggestion {
        let first_break = text.find('\n').unwrap_or(text.len());
        text.insert_str(first_break, " Collision was avoided using A* with smoothing.");
        text.push_str(&format!(
            "\nHere is the recommended collision-free trajectory:\n{}\nPlease verify the new path to ensure no further collisions. If no collision, please let engineer generate codes for this trajectory.",
            format_track(track)
        ));
    } else {
        text.push_str("\nNo collision-free alternative was found; choose a different route or placement.");
    }
    let hard = result.has_contact();
    if hard {
        text.push_str("\nThe motion was not applied because it penetrates the objects above; the environment is unchanged.");
    }
    Ok(Assessment {
        apply: !hard,
        error: true,
        feedback: text,
        colliding: report.names().into_iter().map(String::from).collect(),
        suggestion,
    })
}

/// A* repair of the first colliding track, if one exists.
fn suggest(
    scene: &SceneState,
    result: &ExecutionResult,
    report: &CollisionReport,
    repair: &RepairOptions,
) -> Option<ControlTrack> {
    let track = result.clip.controls.iter().find(|t| t.name == report.moving);
    let moved: BTreeSet<String> = result.clip.object_tracks.keys().cloned().collect();
    if let Some(obj) = scene.object(&report.moving) {
        return repair_track(scene, &obj.bbox, track?, &moved, repair).ok();
    }
    // The body: plan at box height, then restore the pelvis height.
    let pelvis = result.clip.controls.iter().find(|t| t.name == "pelvis")?;
    let shape = human_box(&scene.human, 0.0);
    let lifted = ControlTrack::new(
        "pelvis",
        pelvis
            .waypoints
            .iter()
            .map(|w| Waypoint::new(w.frame, Vec3::new(w.position.x, w.position.y, shape.center.z)))
            .collect(),
    );
    let mut out = repair_track(scene, &shape, &lifted, &moved, repair).ok()?;
    let z = pelvis.waypoints[0].position.z;
    for w in &mut out.waypoints {
        w.position.z = z;
    }
    Some(out)
}
