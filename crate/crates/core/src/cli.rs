//! `hoi-agent` command line.

use crate::collide::{format_collision_error, validate_track, DEFAULT_MARGIN};
use crate::error::{Error, Result};
use crate::executor::{apply_result, load_clip, write_clip, ExecOptions, KinematicExecutor, MotionClip};
use crate::fixtures;
use crate::metrics::evaluate;
use crate::motionproc::{load_stream, manifest_line, process_stream, write_stream, ProcConfig};
use crate::pathfind::{repair_track, RepairOptions, DEFAULT_RESOLUTION};
use crate::planner::{
    execute, parse_commands, run_episode, AgentCommand, EpisodeConfig, EpisodeLog, HttpPlanner, MockPlanner, Outcome,
    Planner, PlannerConfig,
};
use crate::scene::{fmt3, human_box, load_scene, parse_scene_text, OrientedBox, SceneState, Vec3};
use crate::traj::{ControlTrack, Waypoint};
use clap::{Args, Parser, Subcommand};
use std::collections::BTreeSet;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "hoi-agent", version, about = "Plan, validate and execute human-object interaction episodes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a planner episode against a live endpoint or a recorded transcript.
    Run(RunArgs),
    /// Collision-check a track against a scene.
    Validate(ValidateArgs),
    /// Plan a collision-free track between two points.
    Plan(PlanArgs),
    /// Execute a file of planner commands.
    Exec(ExecArgs),
    /// Compute metrics over clip files.
    Metrics(MetricsArgs),
    /// Curate a directory of pose streams.
    Process(ProcessArgs),
    /// Re-run a recorded episode log (or the bundled floorlamp transcript).
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
struct Grid {
    /// Safety envelope around obstacles (m).
    #[arg(long, default_value_t = DEFAULT_MARGIN)]
    margin: f64,
    /// Occupancy grid cell size (m).
    #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
    resolution: f64,
}

impl Grid {
    fn repair(&self) -> RepairOptions {
        RepairOptions { margin: self.margin, resolution: self.resolution, ..Default::default() }
    }
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Scene file (JSON or environment-state text). Defaults to the bundled floorlamp scene.
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(long)]
    instruction: Option<String>,
    /// Replay assistant turns from this JSON-lines transcript instead of calling the endpoint.
    #[arg(long)]
    mock_transcript: Option<PathBuf>,
    /// Directory for the episode log and clips.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 30)]
    max_steps: usize,
    #[arg(long, default_value_t = 5)]
    max_errors: usize,
    #[command(flatten)]
    grid: Grid,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long)]
    scene: PathBuf,
    /// Track file: `{"name": ..., "points": [[frame, x, y, z], ...]}`.
    #[arg(long)]
    track: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MARGIN)]
    margin: f64,
}

#[derive(Debug, Args)]
struct PlanArgs {
    #[arg(long)]
    scene: PathBuf,
    /// Start point `x,y,z`.
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    from: Vec3,
    /// Goal point `x,y,z`.
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    to: Vec3,
    /// Object to move; the human body when omitted.
    #[arg(long)]
    object: Option<String>,
    #[arg(long, default_value_t = 0)]
    start_frame: u32,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    grid: Grid,
}

#[derive(Debug, Args)]
struct ExecArgs {
    #[arg(long)]
    scene: PathBuf,
    /// Planner command file (fenced python blocks or bare calls).
    #[arg(long)]
    commands: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MetricsArgs {
    /// Clip file or directory of clips; repeatable.
    #[arg(long, required = true)]
    clips: Vec<PathBuf>,
    /// Reference clips for contact precision and recall.
    #[arg(long = "ref")]
    reference: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ProcessArgs {
    /// Directory of pose stream files.
    #[arg(long, visible_alias = "streams")]
    clips: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 5)]
    window: usize,
}

#[derive(Debug, Args)]
struct ReplayArgs {
    /// Episode log or transcript (JSON lines). Defaults to the bundled floorlamp transcript.
    #[arg(long, visible_alias = "log")]
    mock_transcript: Option<PathBuf>,
    /// Scene for transcripts without an episode header.
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(long)]
    instruction: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    grid: Grid,
}

fn parse_point(s: &str) -> std::result::Result<Vec3, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("bad coordinate `{p}`")))
        .collect::<std::result::Result<_, _>>()?;
    match v.as_slice() {
        [x, y, z] => Ok(Vec3::new(*x, *y, *z)),
        _ => Err("expected x,y,z".into()),
    }
}

/// Domain outcome of a subcommand: text for stdout/stderr and the exit code.
struct Report {
    stdout: String,
    stderr: String,
    code: i32,
}

impl Report {
    fn ok(stdout: String) -> Self {
        Report { stdout, stderr: String::new(), code: 0 }
    }
}

/// Parses `argv` (program name first) and runs the subcommand. Returns the exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Plan(a) => cmd_plan(a),
        Command::Exec(a) => cmd_exec(a),
        Command::Metrics(a) => cmd_metrics(a),
        Command::Process(a) => cmd_process(a),
        Command::Replay(a) => cmd_replay(a),
    };
    match result {
        Ok(r) => {
            let _ = out.write_all(r.stdout.as_bytes());
            let _ = err.write_all(r.stderr.as_bytes());
            r.code
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn to_io(path: &Path, e: std::io::Error) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| to_io(path, e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| to_io(path, e))
}

fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| to_io(path, e))
}

fn scene_or_bundled(path: Option<&Path>) -> Result<SceneState> {
    match path {
        Some(p) => load_scene(p),
        None => parse_scene_text(fixtures::FLOORLAMP_SCENE),
    }
}

pub fn read_track(text: &str) -> Result<ControlTrack> {
    #[derive(serde::Deserialize)]
    struct TrackFile {
        name: String,
        points: Vec<[f64; 4]>,
    }
    let t: TrackFile = serde_json::from_str(text).map_err(|e| Error::parse(e.line(), e.to_string()))?;
    let track = ControlTrack::from_rows(t.name, &t.points);
    track.validate()?;
    Ok(track)
}

pub fn write_track(track: &ControlTrack) -> String {
    let rows: Vec<String> = track
        .waypoints
        .iter()
        .map(|w| format!("[{}, {}, {}, {}]", w.frame, fmt3(w.position.x), fmt3(w.position.y), fmt3(w.position.z)))
        .collect();
    format!("{{\"name\": {:?}, \"points\": [{}]}}\n", track.name, rows.join(", "))
}

/// Shape swept by a track: the named object, or the body box for `pelvis`/`human`.
/// Body tracks are lifted to the box center height.
fn moving_shape(scene: &SceneState, track: &ControlTrack) -> Result<(OrientedBox, ControlTrack, BTreeSet<String>)> {
    if let Some(o) = scene.object(&track.name) {
        return Ok((o.bbox, track.clone(), BTreeSet::from([o.name.clone()])));
    }
    if track.name == "pelvis" || track.name == "human" {
        let shape = human_box(&scene.human, 0.0);
        let mut lifted = track.clone();
        for w in &mut lifted.waypoints {
            w.position.z = shape.center.z;
        }
        return Ok((shape, lifted, BTreeSet::new()));
    }
    Err(Error::arg(format!("track `{}` names no scene object", track.name)))
}

fn cmd_validate(a: ValidateArgs) -> Result<Report> {
    let scene = load_scene(&a.scene)?;
    let track = read_track(&read(&a.track)?)?;
    let (shape, track, ignore) = moving_shape(&scene, &track)?;
    let report = validate_track(&shape, &track, &scene, a.margin, &ignore)?;
    if report.collided {
        Ok(Report { stdout: String::new(), stderr: format_collision_error(&report)? + "\n", code: 1 })
    } else {
        Ok(Report::ok(format!("No collision detected for {}.\n", report.moving)))
    }
}

fn cmd_plan(a: PlanArgs) -> Result<Report> {
    let scene = load_scene(&a.scene)?;
    let name = a.object.clone().unwrap_or_else(|| "pelvis".into());
    let track = ControlTrack::new(name, vec![Waypoint::new(a.start_frame, a.from), Waypoint::new(a.start_frame + 1, a.to)]);
    let (shape, lifted, ignore) = moving_shape(&scene, &track)?;
    let mut planned = repair_track(&scene, &shape, &lifted, &ignore, &a.grid.repair())?;
    for w in &mut planned.waypoints {
        w.position.z = a.from.z;
    }
    let text = write_track(&planned);
    if let Some(p) = &a.out {
        write(p, &text)?;
    }
    Ok(Report::ok(text))
}

fn command_text(text: &str) -> String {
    if text.contains("```") { text.to_string() } else { format!("```python\n{text}\n```\n") }
}

fn write_clips(dir: &Path, clips: &[MotionClip]) -> Result<()> {
    ensure_dir(dir)?;
    for (i, c) in clips.iter().enumerate() {
        write(&dir.join(format!("clip_{i:03}.hoiclip")), &write_clip(c))?;
    }
    Ok(())
}

fn cmd_exec(a: ExecArgs) -> Result<Report> {
    let mut scene = load_scene(&a.scene)?;
    let cmds = parse_commands(&command_text(&read(&a.commands)?))?;
    if cmds.is_empty() {
        return Err(Error::arg("command file holds no commands"));
    }
    let executor = KinematicExecutor::default();
    let mut clips = Vec::new();
    let mut stdout = String::new();
    let mut failure = None;
    for (i, cmd) in cmds.iter().enumerate() {
        if *cmd == AgentCommand::TaskCompleted {
            stdout.push_str(&format!("{i}: task_completed\n"));
            break;
        }
        let result = execute(&executor, &scene, cmd)?;
        if let Some(r) = result.collision_reports.iter().chain([&result.human_report]).find(|r| r.collided) {
            failure = Some(format!("command {i} ({}): {}\n", cmd.kind(), format_collision_error(r)?));
            break;
        }
        scene = apply_result(&scene, &result);
        stdout.push_str(&format!("{i}: {} ok, {} frames\n", cmd.kind(), result.clip.len()));
        clips.push(result.clip);
    }
    if let Some(dir) = &a.out {
        write_clips(dir, &clips)?;
        write(&dir.join("scene.json"), &scene.to_json())?;
    }
    Ok(match failure {
        Some(stderr) => Report { stdout, stderr, code: 1 },
        None => Report::ok(stdout),
    })
}

fn clip_files(paths: &[PathBuf]) -> Result<Vec<MotionClip>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut inner: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| to_io(p, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "hoiclip"))
                .collect();
            inner.sort();
            files.extend(inner);
        } else {
            files.push(p.clone());
        }
    }
    files.iter().map(|f| load_clip(f)).collect()
}

fn cmd_metrics(a: MetricsArgs) -> Result<Report> {
    let clips = clip_files(&a.clips)?;
    if clips.is_empty() {
        return Err(Error::arg("no clip files found"));
    }
    let refs = if a.reference.is_empty() { None } else { Some(clip_files(&a.reference)?) };
    let table = evaluate(&clips, refs.as_deref())?.to_table();
    if let Some(p) = &a.out {
        write(p, &table)?;
    }
    Ok(Report::ok(table))
}

fn cmd_process(a: ProcessArgs) -> Result<Report> {
    let cfg = ProcConfig { window: a.window, ..Default::default() };
    let mut files: Vec<PathBuf> = std::fs::read_dir(&a.clips)
        .map_err(|e| to_io(&a.clips, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|f| f.extension().is_some_and(|x| x == "pose"))
        .collect();
    files.sort();
    ensure_dir(&a.out)?;
    let mut manifest = String::new();
    for f in &files {
        let name = f.file_name().unwrap().to_string_lossy().into_owned();
        let p = process_stream(&load_stream(f)?, &cfg)?;
        if let Some(s) = &p.stream {
            write(&a.out.join(&name), &write_stream(s))?;
        }
        manifest.push_str(&manifest_line(&name, &p.verdict));
        manifest.push('\n');
    }
    write(&a.out.join("manifest.tsv"), &manifest)?;
    Ok(Report::ok(manifest))
}

fn episode_summary(log: &EpisodeLog) -> String {
    let outcome = log.outcome.map_or("none", |o| o.as_str());
    let mut s = format!("outcome: {outcome}\nsteps: {}\n", log.steps);
    for o in &log.final_scene.objects {
        let before = log.initial_scene.object(&o.name).map(|b| b.bbox.center);
        if before != Some(o.bbox.center) {
            let c = o.bbox.center;
            s.push_str(&format!("{}: [{}, {}, {}]\n", o.name, fmt3(c.x), fmt3(c.y), fmt3(c.z)));
        }
    }
    s
}

fn finish_episode(log: &EpisodeLog, out: Option<&Path>) -> Result<Report> {
    if let Some(dir) = out {
        write_clips(dir, &log.clips)?;
        write(&dir.join("episode.jsonl"), &log.to_jsonl())?;
    }
    let code = if log.outcome == Some(Outcome::Completed) { 0 } else { 1 };
    Ok(Report { stdout: episode_summary(log), stderr: String::new(), code })
}

fn cmd_run(a: RunArgs) -> Result<Report> {
    let scene = scene_or_bundled(a.scene.as_deref())?;
    let instruction = match (&a.instruction, &a.scene) {
        (Some(i), _) => i.clone(),
        (None, None) => fixtures::FLOORLAMP_INSTRUCTION.to_string(),
        (None, Some(_)) => return Err(Error::arg("--instruction is required with --scene")),
    };
    let mut planner: Box<dyn Planner> = match &a.mock_transcript {
        Some(p) => Box::new(MockPlanner::from_jsonl(&read(p)?)?),
        None => Box::new(HttpPlanner::new(PlannerConfig::from_env())?),
    };
    let config = EpisodeConfig { max_steps: a.max_steps, max_consecutive_errors: a.max_errors, repair: a.grid.repair() };
    let log = run_episode(planner.as_mut(), &scene, &instruction, &KinematicExecutor::default(), &config)?;
    finish_episode(&log, a.out.as_deref())
}

/// Same objects and human placed within 1e-9 m; serialized orientations may differ in the last bits.
fn scenes_close(a: &SceneState, b: &SceneState) -> bool {
    const TOL: f64 = 1e-9;
    a.objects.len() == b.objects.len()
        && a.human.pelvis.dist(b.human.pelvis) < TOL
        && a.objects.iter().zip(&b.objects).all(|(x, y)| x.name == y.name && x.bbox.center.dist(y.bbox.center) < TOL)
}

fn cmd_replay(a: ReplayArgs) -> Result<Report> {
    let text = match &a.mock_transcript {
        Some(p) => read(p)?,
        None => fixtures::FLOORLAMP_TRANSCRIPT.to_string(),
    };
    // A full episode log carries its own scene, instruction and expected outcome.
    let recorded = EpisodeLog::from_jsonl(&text).ok();
    let (scene, instruction) = match &recorded {
        Some(l) => (l.initial_scene.clone(), l.instruction.clone()),
        None => (
            scene_or_bundled(a.scene.as_deref())?,
            a.instruction.clone().unwrap_or_else(|| fixtures::FLOORLAMP_INSTRUCTION.to_string()),
        ),
    };
    let mut planner = MockPlanner::from_jsonl(&text)?;
    let config = EpisodeConfig { repair: a.grid.repair(), ..Default::default() };
    let executor = KinematicExecutor::new(ExecOptions::default());
    let log = run_episode(&mut planner, &scene, &instruction, &executor, &config)?;
    let mut report = finish_episode(&log, a.out.as_deref())?;
    if let Some(r) = recorded.filter(|r| r.outcome.is_some()) {
        if r.outcome != log.outcome || !scenes_close(&r.final_scene, &log.final_scene) {
            report.stderr.push_str("replay diverged from the recorded outcome\n");
            report.code = 1;
        }
    }
    Ok(report)
}
