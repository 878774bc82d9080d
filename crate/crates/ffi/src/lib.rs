//! C ABI over the hoi-agent engine.
//!
//! Every fallible call returns a [`HoiStatus`]; on failure the message is
//! available from [`hoi_last_error`] on the same thread. Handles are opaque and
//! released with their matching `_free` function. Strings returned to the caller
//! are released with [`hoi_string_free`], row buffers with [`hoi_rows_free`].

use hoi_agent::collide::{format_collision_error, validate_track};
use hoi_agent::executor::KinematicExecutor;
use hoi_agent::pathfind::{repair_track, RepairOptions};
use hoi_agent::planner::{run_episode, EpisodeConfig, EpisodeLog, MockPlanner, Outcome};
use hoi_agent::scene::{emit_scene_text, human_box, parse_scene_text, SceneState, Vec3};
use hoi_agent::traj::{ControlTrack, Waypoint};
use hoi_agent::Error;
use std::cell::RefCell;
use std::collections::BTreeSet;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HoiStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Validation = 4,
    Argument = 5,
    Protocol = 6,
    Unreachable = 7,
    PlannerUnavailable = 8,
    Http = 9,
    Io = 10,
    Panic = 11,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HoiOutcome {
    Completed = 0,
    ErrorBudgetExhausted = 1,
    StepBudgetExhausted = 2,
    PlannerUnavailable = 3,
    Unfinished = 4,
}

/// Parsed scene.
pub struct HoiScene {
    inner: SceneState,
}

/// Finished planner episode.
pub struct HoiEpisode {
    log: EpisodeLog,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> HoiStatus {
    match e {
        Error::Parse { .. } => HoiStatus::Parse,
        Error::Validation(_) => HoiStatus::Validation,
        Error::Argument(_) => HoiStatus::Argument,
        Error::Protocol(_) => HoiStatus::Protocol,
        Error::Unreachable { .. } => HoiStatus::Unreachable,
        Error::PlannerUnavailable(_) => HoiStatus::PlannerUnavailable,
        Error::Http { .. } => HoiStatus::Http,
        Error::Io(_) => HoiStatus::Io,
    }
}

struct Fail(HoiStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> HoiStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            HoiStatus::Ok
        }
        Ok(Err(Fail(s, m))) => {
            set_error(m);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            HoiStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(HoiStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(HoiStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn scene_arg<'a>(p: *const HoiScene) -> Result<&'a SceneState, Fail> {
    p.as_ref().map(|s| &s.inner).ok_or_else(|| null("scene"))
}

fn to_c(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("nul bytes removed").into_raw()
}

/// Message of the last failed call on this thread, or null. Owned by the library;
/// valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn hoi_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses environment-state text into a new scene handle.
///
/// # Safety
/// `text` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hoi_scene_parse(text: *const c_char, out: *mut *mut HoiScene) -> HoiStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let scene = parse_scene_text(str_arg(text, "text")?)?;
        *out = Box::into_raw(Box::new(HoiScene { inner: scene }));
        Ok(())
    })
}

/// # Safety
/// `scene` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn hoi_scene_free(scene: *mut HoiScene) {
    if !scene.is_null() {
        drop(Box::from_raw(scene));
    }
}

/// Number of objects, or 0 for a null handle.
///
/// # Safety
/// `scene` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hoi_scene_object_count(scene: *const HoiScene) -> usize {
    scene.as_ref().map_or(0, |s| s.inner.objects.len())
}

/// Writes the center of object `name` to `out_xyz[0..3]`.
///
/// # Safety
/// `scene` must be live, `name` nul-terminated, `out_xyz` valid for three doubles.
#[no_mangle]
pub unsafe extern "C" fn hoi_scene_object_center(
    scene: *const HoiScene,
    name: *const c_char,
    out_xyz: *mut f64,
) -> HoiStatus {
    guard(|| {
        let scene = scene_arg(scene)?;
        let name = str_arg(name, "name")?;
        if out_xyz.is_null() {
            return Err(null("out_xyz"));
        }
        let o = scene.object(name).ok_or_else(|| Fail(HoiStatus::Argument, format!("no object named `{name}`")))?;
        let c = o.bbox.center;
        std::slice::from_raw_parts_mut(out_xyz, 3).copy_from_slice(&[c.x, c.y, c.z]);
        Ok(())
    })
}

/// Environment-state text of the scene; free with [`hoi_string_free`]. Null on a null handle.
///
/// # Safety
/// `scene` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hoi_scene_emit(scene: *const HoiScene) -> *mut c_char {
    scene.as_ref().map_or(ptr::null_mut(), |s| to_c(emit_scene_text(&s.inner)))
}

/// # Safety
/// `s` must come from this library. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn hoi_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

unsafe fn track_arg(name: &str, rows: *const f64, n_rows: usize) -> Result<ControlTrack, Fail> {
    if rows.is_null() && n_rows > 0 {
        return Err(null("rows"));
    }
    let flat = if n_rows == 0 { &[][..] } else { std::slice::from_raw_parts(rows, 4 * n_rows) };
    let rows: Vec<[f64; 4]> = flat.chunks_exact(4).map(|r| [r[0], r[1], r[2], r[3]]).collect();
    let track = ControlTrack::from_rows(name, &rows);
    track.validate()?;
    Ok(track)
}

/// Moving shape for a named object, or the body for `pelvis`.
fn shape_for(scene: &SceneState, track: &mut ControlTrack) -> Result<(hoi_agent::scene::OrientedBox, BTreeSet<String>), Fail> {
    if let Some(o) = scene.object(&track.name) {
        return Ok((o.bbox, BTreeSet::from([o.name.clone()])));
    }
    if track.name == "pelvis" {
        let b = human_box(&scene.human, 0.0);
        for w in &mut track.waypoints {
            w.position.z = b.center.z;
        }
        return Ok((b, BTreeSet::new()));
    }
    Err(Fail(HoiStatus::Argument, format!("`{}` names no scene object", track.name)))
}

/// Collision-checks a track of `n_rows` rows `[frame, x, y, z]` for object `name`
/// (or `pelvis`). Sets `*out_collided`; when it collides and `out_message` is not
/// null, stores the planner-format error text there (free with [`hoi_string_free`]).
///
/// # Safety
/// Pointers must be valid; `rows` must hold `4 * n_rows` doubles.
#[no_mangle]
pub unsafe extern "C" fn hoi_validate_track(
    scene: *const HoiScene,
    name: *const c_char,
    rows: *const f64,
    n_rows: usize,
    margin: f64,
    out_collided: *mut bool,
    out_message: *mut *mut c_char,
) -> HoiStatus {
    guard(|| {
        let scene = scene_arg(scene)?;
        let mut track = track_arg(str_arg(name, "name")?, rows, n_rows)?;
        if out_collided.is_null() {
            return Err(null("out_collided"));
        }
        let (shape, ignore) = shape_for(scene, &mut track)?;
        let report = validate_track(&shape, &track, scene, margin, &ignore)?;
        *out_collided = report.collided;
        if !out_message.is_null() {
            *out_message = if report.collided { to_c(format_collision_error(&report)?) } else { ptr::null_mut() };
        }
        Ok(())
    })
}

/// Plans a collision-free track for `name` from `from_xyz` to `to_xyz` starting at
/// `start_frame`. Stores a buffer of `*out_len` rows `[frame, x, y, z]` in `*out_rows`;
/// free it with [`hoi_rows_free`].
///
/// # Safety
/// Pointers must be valid; `from_xyz` and `to_xyz` must hold three doubles.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn hoi_plan_track(
    scene: *const HoiScene,
    name: *const c_char,
    from_xyz: *const f64,
    to_xyz: *const f64,
    start_frame: u32,
    margin: f64,
    resolution: f64,
    out_rows: *mut *mut f64,
    out_len: *mut usize,
) -> HoiStatus {
    guard(|| {
        let scene = scene_arg(scene)?;
        let name = str_arg(name, "name")?;
        if from_xyz.is_null() || to_xyz.is_null() || out_rows.is_null() || out_len.is_null() {
            return Err(null("point or output"));
        }
        let f = std::slice::from_raw_parts(from_xyz, 3);
        let t = std::slice::from_raw_parts(to_xyz, 3);
        let from = Vec3::new(f[0], f[1], f[2]);
        let mut track = ControlTrack::new(
            name,
            vec![Waypoint::new(start_frame, from), Waypoint::new(start_frame + 1, Vec3::new(t[0], t[1], t[2]))],
        );
        let (shape, ignore) = shape_for(scene, &mut track)?;
        let opts = RepairOptions { margin, resolution, ..Default::default() };
        let planned = repair_track(scene, &shape, &track, &ignore, &opts)?;
        let mut flat: Vec<f64> = Vec::with_capacity(4 * planned.waypoints.len());
        for w in &planned.waypoints {
            flat.extend([w.frame as f64, w.position.x, w.position.y, from.z]);
        }
        *out_len = planned.waypoints.len();
        *out_rows = Box::into_raw(flat.into_boxed_slice()) as *mut f64;
        Ok(())
    })
}

/// # Safety
/// `rows` and `len` must come from the same [`hoi_plan_track`] call. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn hoi_rows_free(rows: *mut f64, len: usize) {
    if !rows.is_null() {
        drop(Box::from_raw(ptr::slice_from_raw_parts_mut(rows, 4 * len)));
    }
}

/// Runs an episode on `scene`, replaying the assistant turns of a JSON-lines transcript.
///
/// # Safety
/// Pointers must be valid and strings nul-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hoi_episode_replay(
    scene: *const HoiScene,
    instruction: *const c_char,
    transcript: *const c_char,
    out: *mut *mut HoiEpisode,
) -> HoiStatus {
    guard(|| {
        let scene = scene_arg(scene)?;
        let instruction = str_arg(instruction, "instruction")?;
        let mut planner = MockPlanner::from_jsonl(str_arg(transcript, "transcript")?)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let log = run_episode(&mut planner, scene, instruction, &KinematicExecutor::default(), &EpisodeConfig::default())?;
        *out = Box::into_raw(Box::new(HoiEpisode { log }));
        Ok(())
    })
}

/// # Safety
/// `ep` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hoi_episode_outcome(ep: *const HoiEpisode) -> HoiOutcome {
    match ep.as_ref().and_then(|e| e.log.outcome) {
        Some(Outcome::Completed) => HoiOutcome::Completed,
        Some(Outcome::ErrorBudgetExhausted) => HoiOutcome::ErrorBudgetExhausted,
        Some(Outcome::StepBudgetExhausted) => HoiOutcome::StepBudgetExhausted,
        Some(Outcome::PlannerUnavailable) => HoiOutcome::PlannerUnavailable,
        None => HoiOutcome::Unfinished,
    }
}

/// New scene handle holding the episode's final scene. Null on a null handle.
///
/// # Safety
/// `ep` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hoi_episode_final_scene(ep: *const HoiEpisode) -> *mut HoiScene {
    ep.as_ref()
        .map_or(ptr::null_mut(), |e| Box::into_raw(Box::new(HoiScene { inner: e.log.final_scene.clone() })))
}

/// Episode log as JSON lines; free with [`hoi_string_free`]. Null on a null handle.
///
/// # Safety
/// `ep` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hoi_episode_log(ep: *const HoiEpisode) -> *mut c_char {
    ep.as_ref().map_or(ptr::null_mut(), |e| to_c(e.log.to_jsonl()))
}

/// # Safety
/// `ep` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn hoi_episode_free(ep: *mut HoiEpisode) {
    if !ep.is_null() {
        drop(Box::from_raw(ep));
    }
}
