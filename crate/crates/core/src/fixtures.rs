//! Bundled floorlamp episode: scene, recorded planner transcript and the direct track.

pub const FLOORLAMP_SCENE: &str = include_str!("../fixtures/floorlamp_scene.txt");
pub const FLOORLAMP_TRANSCRIPT: &str = include_str!("../fixtures/floorlamp_transcript.jsonl");
pub const FLOORLAMP_STRAIGHT_TRACK: &str = include_str!("../fixtures/floorlamp_straight.json");
pub const FLOORLAMP_INSTRUCTION: &str = "Pick up floorlamp, and move it to be around wall55 and lamp193.";
