//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and exits
//! non-zero if any fails.

use hoi_agent::cli::read_track;
use hoi_agent::collide::{boxes_intersect, validate_track, validate_track_with, ValidateOptions, DEFAULT_MARGIN};
use hoi_agent::executor::{InteractionArgs, KinematicExecutor, MotionArgs, MotionClip};
use hoi_agent::fixtures::{FLOORLAMP_INSTRUCTION, FLOORLAMP_SCENE, FLOORLAMP_STRAIGHT_TRACK, FLOORLAMP_TRANSCRIPT};
use hoi_agent::metrics::{
    agent_success, contact_prf, penetration_score, success_rate, traj_metrics, traj_metrics_batch, ContactSeries, Sdf,
    TargetPose, Tolerance, VoxelSdf, PENETRATION_DEPTH, SUCCESS_THRESHOLDS,
};
use hoi_agent::motionproc::{
    motion_sanity_filter, process_stream, segment_clips, smooth_stream, PoseStream, ProcConfig, Reason,
};
use hoi_agent::pathfind::{
    astar, astar_cells, cell_path_cost, repair_track, schedule, smooth_path, path_length, Cell, OccupancyGrid,
    RepairOptions,
};
use hoi_agent::planner::{
    parse_commands, parse_message, run_episode, EpisodeConfig, EpisodeLog, MockPlanner, Outcome,
    PROMPT_TEMPLATE,
};
use hoi_agent::scene::{parse_scene_text, HumanState, ObjectState, Orientation, OrientedBox, Quat, SceneState, Vec3};
use hoi_agent::traj::{slerp_knots, ControlTrack, Pchip, Waypoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeSet, BinaryHeap};
use std::time::{Duration, Instant};

type Outcome_ = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond { Ok(()) } else { Err(msg()) }
}

// ---------------------------------------------------------------------------
// Independent geometry oracle: GJK distance between convex hulls of point sets.

fn corners(b: &OrientedBox) -> Vec<Vec3> {
    let r = b.rotation();
    let h = b.sizes / 2.0;
    let mut out = Vec::with_capacity(8);
    for sx in [-1.0, 1.0] {
        for sy in [-1.0, 1.0] {
            for sz in [-1.0, 1.0] {
                out.push(b.center + r.col(0) * (sx * h.x) + r.col(1) * (sy * h.y) + r.col(2) * (sz * h.z));
            }
        }
    }
    out
}

fn support(pts: &[Vec3], d: Vec3) -> Vec3 {
    *pts.iter().max_by(|a, b| a.dot(d).total_cmp(&b.dot(d))).unwrap()
}

fn solve(g: &mut [[f64; 4]], n: usize) -> Option<Vec<f64>> {
    for c in 0..n {
        let p = (c..n).max_by(|a, b| g[*a][c].abs().total_cmp(&g[*b][c].abs()))?;
        if g[p][c].abs() < 1e-14 {
            return None;
        }
        g.swap(c, p);
        for r in 0..n {
            if r != c {
                let f = g[r][c] / g[c][c];
                for k in c..=n {
                    g[r][k] -= f * g[c][k];
                }
            }
        }
    }
    Some((0..n).map(|i| g[i][n] / g[i][i]).collect())
}

/// Closest point to the origin on a simplex of up to four points, with the supporting face.
fn closest_on_simplex(s: &[Vec3]) -> (Vec3, Vec<Vec3>) {
    let mut best: Option<(f64, Vec3, Vec<Vec3>)> = None;
    for mask in 1u32..(1 << s.len()) {
        let pts: Vec<Vec3> = (0..s.len()).filter(|i| mask & (1 << i) != 0).map(|i| s[i]).collect();
        let p0 = pts[0];
        let e: Vec<Vec3> = pts[1..].iter().map(|p| *p - p0).collect();
        let k = e.len();
        let mut g = [[0.0; 4]; 3];
        for i in 0..k {
            for j in 0..k {
                g[i][j] = e[i].dot(e[j]);
            }
            g[i][k] = -e[i].dot(p0);
        }
        let mu = if k == 0 { Some(vec![]) } else { solve(&mut g[..k], k) };
        let Some(mu) = mu else { continue };
        let l0 = 1.0 - mu.iter().sum::<f64>();
        if l0 <= 0.0 || mu.iter().any(|m| *m <= 0.0) {
            continue;
        }
        let v = e.iter().zip(&mu).fold(p0, |acc, (ei, m)| acc + *ei * *m);
        let n = v.norm();
        if best.as_ref().is_none_or(|(bn, _, _)| n < *bn) {
            best = Some((n, v, pts));
        }
    }
    let (_, v, pts) = best.expect("a vertex is always a candidate");
    (v, pts)
}

fn gjk_distance(a: &[Vec3], b: &[Vec3]) -> f64 {
    let s = |d: Vec3| support(a, d) - support(b, -d);
    let mut simplex = vec![s(Vec3::new(1.0, 0.3, 0.1))];
    let mut v = simplex[0];
    for _ in 0..256 {
        let vv = v.dot(v);
        if vv < 1e-24 {
            return 0.0;
        }
        let w = s(-v);
        if vv - v.dot(w) <= 1e-14 * vv || simplex.iter().any(|p| p.dist(w) < 1e-15) {
            return vv.sqrt();
        }
        simplex.push(w);
        let (nv, face) = closest_on_simplex(&simplex);
        if face.len() == 4 {
            return 0.0;
        }
        simplex = face;
        v = nv;
    }
    v.norm()
}

const TOUCH_BAND: f64 = 1e-6;
const ZERO: f64 = 1e-12;

fn random_quat(rng: &mut ChaCha8Rng) -> Quat {
    loop {
        let q = Quat::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if q.norm() > 0.1 && q.norm() <= 1.0 {
            return q.normalized().unwrap();
        }
    }
}

fn random_vec(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Vec3 {
    Vec3::new(rng.random_range(lo..hi), rng.random_range(lo..hi), rng.random_range(lo..hi))
}

fn random_box(rng: &mut ChaCha8Rng, spread: f64) -> OrientedBox {
    OrientedBox::new(random_vec(rng, -spread, spread), Orientation::from_quat(random_quat(rng)), random_vec(rng, 0.2, 1.5))
}

// ---------------------------------------------------------------------------

fn floorlamp_scene() -> SceneState {
    parse_scene_text(FLOORLAMP_SCENE).unwrap()
}

fn criterion_1() -> Outcome_ {
    let t0 = Instant::now();
    let scene = floorlamp_scene();
    let lamp = scene.object("floorlamp").unwrap().bbox;
    let straight = read_track(FLOORLAMP_STRAIGHT_TRACK).map_err(|e| e.to_string())?;
    let ignore = BTreeSet::from(["floorlamp".to_string()]);
    let report = validate_track(&lamp, &straight, &scene, DEFAULT_MARGIN, &ignore).map_err(|e| e.to_string())?;
    check(report.names() == ["sofa186", "table222", "wall55"], || format!("straight track flagged {:?}", report.names()))?;
    check(report.time_segments.len() == 1, || format!("{} time segments", report.time_segments.len()))?;
    let repaired = repair_track(&scene, &lamp, &straight, &ignore, &RepairOptions::default()).map_err(|e| e.to_string())?;
    let again = validate_track(&lamp, &repaired, &scene, DEFAULT_MARGIN, &ignore).map_err(|e| e.to_string())?;
    check(!again.collided, || format!("repaired track still hits {:?}", again.names()))?;

    let mut planner = MockPlanner::from_jsonl(FLOORLAMP_TRANSCRIPT).map_err(|e| e.to_string())?;
    let log = run_episode(&mut planner, &scene, FLOORLAMP_INSTRUCTION, &KinematicExecutor::default(), &EpisodeConfig::default())
        .map_err(|e| e.to_string())?;
    check(log.outcome == Some(Outcome::Completed), || format!("outcome {:?}", log.outcome))?;
    let c = log.final_scene.object("floorlamp").unwrap().bbox.center;
    let err = c.dist(Vec3::new(2.793, -7.81, 0.899));
    check(err <= 1e-6, || format!("final floorlamp off by {err}"))?;
    let dt = t0.elapsed();
    check(dt < Duration::from_secs(5), || format!("took {dt:?}"))?;
    Ok(format!("flagged {:?}, repaired {} waypoints clean, lamp error {err:.1e} m, {dt:.2?}", report.names(), repaired.waypoints.len()))
}

fn criterion_2() -> Outcome_ {
    let p = |x: f64, y: f64| Vec3::new(x, y, 0.899);
    for path in [vec![p(0.0, 0.0), p(4.5, 0.0)], vec![p(0.0, 0.0), p(3.0, 0.0), p(3.0, 1.5)]] {
        let t = schedule(&path, 0, 1.2, 30.0).map_err(|e| e.to_string())?;
        let last = t.last_frame().unwrap();
        check(last == 113, || format!("final frame {last} for {} waypoints", path.len()))?;
    }
    Ok("4.5 m at 1.2 m/s and 30 fps ends at frame 113".into())
}

/// Reach interval in `t` of a segment around an anchor, found by ternary search and bisection.
fn reach_interval(p0: Vec3, p1: Vec3, anchor: Vec3, reach: f64) -> Option<(f64, f64)> {
    let f = |t: f64| p0.lerp(p1, t).dist_xy(anchor) - reach;
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let (m1, m2) = (lo + (hi - lo) / 3.0, hi - (hi - lo) / 3.0);
        if f(m1) < f(m2) { hi = m2 } else { lo = m1 }
    }
    let tm = 0.5 * (lo + hi);
    if f(tm) > 0.0 {
        return None;
    }
    let edge = |mut inside: f64, mut outside: f64| {
        if f(outside) <= 0.0 {
            return outside;
        }
        for _ in 0..200 {
            let m = 0.5 * (inside + outside);
            if f(m) <= 0.0 { inside = m } else { outside = m }
        }
        inside
    };
    Some((edge(tm, 0.0), edge(tm, 1.0)))
}

fn free_pieces(p0: Vec3, p1: Vec3, anchors: &[Vec3], reach: f64) -> Vec<(f64, f64)> {
    let mut cover: Vec<(f64, f64)> = anchors.iter().filter_map(|a| reach_interval(p0, p1, *a, reach)).collect();
    cover.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = Vec::new();
    let mut cur = 0.0;
    for (a, b) in cover {
        if a > cur {
            out.push((cur, a));
        }
        cur = f64::max(cur, b);
    }
    if cur < 1.0 {
        out.push((cur, 1.0));
    }
    out
}

enum Verdict {
    Hit,
    Clear,
    Band,
}

fn classify(d: f64) -> Verdict {
    if d <= ZERO {
        Verdict::Hit
    } else if d <= TOUCH_BAND {
        Verdict::Band
    } else {
        Verdict::Clear
    }
}

fn criterion_3() -> Outcome_ {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut pair_hits, mut pair_band, mut bad) = (0, 0, Vec::new());
    for i in 0..1000 {
        let (a, b) = (random_box(&mut rng, 1.2), random_box(&mut rng, 1.2));
        let sat = boxes_intersect(&a, &b);
        match classify(gjk_distance(&corners(&a), &corners(&b))) {
            Verdict::Hit => {
                pair_hits += 1;
                if !sat {
                    bad.push(format!("pair {i}: oracle overlap, SAT separate"));
                }
            }
            Verdict::Clear if sat => bad.push(format!("pair {i}: oracle separate, SAT overlap")),
            Verdict::Band => pair_band += 1,
            Verdict::Clear => {}
        }
    }

    let opts = ValidateOptions::default();
    let (mut flagged, mut checked, mut scene_band) = (0, 0, 0);
    for s in 0..100 {
        let objects: Vec<ObjectState> = (0..5)
            .map(|k| {
                let mut b = random_box(&mut rng, 3.0);
                b.center.z = rng.random_range(0.0..1.0);
                ObjectState::new(format!("obj{k}"), b)
            })
            .collect();
        let scene = SceneState::new(HumanState::standing(Vec3::new(20.0, 20.0, 0.9)), objects);
        let shape = OrientedBox::new(Vec3::ZERO, Orientation::from_quat(random_quat(&mut rng)), random_vec(&mut rng, 0.2, 1.0));
        let n = rng.random_range(2..=4);
        let wps: Vec<Waypoint> = (0..n)
            .map(|k| {
                let mut p = random_vec(&mut rng, -3.5, 3.5);
                p.z = rng.random_range(0.2..1.2);
                Waypoint::new(30 * k as u32, p)
            })
            .collect();
        let track = ControlTrack::new("mover", wps);
        let report = validate_track_with(&shape, &track, &scene, &BTreeSet::new(), &opts).map_err(|e| e.to_string())?;
        let got: BTreeSet<&str> = report.names().into_iter().collect();
        let anchors = [track.waypoints[0].position, track.waypoints.last().unwrap().position];
        let at = |p: Vec3| corners(&shape.at(p));
        for o in &scene.objects {
            let bare = corners(&o.bbox);
            let env = corners(&OrientedBox::new(o.bbox.center, o.bbox.orientation, o.bbox.sizes + Vec3::new(1.0, 1.0, 1.0) * (2.0 * opts.margin)));
            let mut band = false;
            let mut hit = false;
            let skip = match classify(gjk_distance(&at(anchors[0]), &bare)) {
                Verdict::Hit => true,
                Verdict::Band => {
                    band = true;
                    false
                }
                Verdict::Clear => false,
            };
            if !skip {
                for w in track.waypoints.windows(2) {
                    let (p0, p1) = (w[0].position, w[1].position);
                    let mut hull = at(p0);
                    hull.extend(at(p1));
                    let mut verdicts = vec![classify(gjk_distance(&hull, &bare))];
                    for (ta, tb) in free_pieces(p0, p1, &anchors, opts.endpoint_reach) {
                        let mut h = at(p0.lerp(p1, ta));
                        h.extend(at(p0.lerp(p1, tb)));
                        let v = classify(gjk_distance(&h, &env));
                        // A vanishing piece sits on a reach boundary.
                        verdicts.push(if tb - ta < 1e-9 && matches!(v, Verdict::Hit) { Verdict::Band } else { v });
                    }
                    for v in verdicts {
                        match v {
                            Verdict::Hit => hit = true,
                            Verdict::Band => band = true,
                            Verdict::Clear => {}
                        }
                    }
                }
            }
            if band && !hit {
                scene_band += 1;
                continue;
            }
            checked += 1;
            flagged += hit as usize;
            if hit != got.contains(o.name.as_str()) {
                bad.push(format!("scene {s} {}: oracle {hit}, validator {}", o.name, !hit));
            }
        }
    }
    let dt = t0.elapsed();
    check(bad.is_empty(), || format!("{} disagreements, first: {}", bad.len(), bad[0]))?;
    check(dt < Duration::from_secs(60), || format!("took {dt:?}"))?;
    check(pair_hits > 100 && pair_hits < 900 && flagged > 50 && flagged + 50 < checked, || {
        format!("degenerate sample: {pair_hits} overlapping pairs, {flagged}/{checked} flagged objects")
    })?;
    Ok(format!(
        "1000 pairs ({pair_hits} overlapping, {pair_band} in band), {checked} scene objects ({flagged} flagged, {scene_band} in band), 0 disagreements, {dt:.2?}"
    ))
}

fn dijkstra(grid: &OccupancyGrid, s: Cell, g: Cell) -> Option<(usize, usize)> {
    #[derive(PartialEq)]
    struct Node(f64, (usize, usize), Cell);
    impl Eq for Node {}
    impl PartialOrd for Node {
        fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(o))
        }
    }
    impl Ord for Node {
        fn cmp(&self, o: &Self) -> std::cmp::Ordering {
            o.0.total_cmp(&self.0)
        }
    }
    let idx = |c: Cell| c.1 * grid.nx + c.0;
    let mut best = vec![f64::INFINITY; grid.nx * grid.ny];
    let mut heap = BinaryHeap::from([Node(0.0, (0, 0), s)]);
    best[idx(s)] = 0.0;
    while let Some(Node(d, counts, c)) = heap.pop() {
        if c == g {
            return Some(counts);
        }
        if d > best[idx(c)] {
            continue;
        }
        for dx in -1i64..=1 {
            for dy in -1i64..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let (x, y) = (c.0 as i64 + dx, c.1 as i64 + dy);
                if x < 0 || y < 0 || x >= grid.nx as i64 || y >= grid.ny as i64 {
                    continue;
                }
                let n = (x as usize, y as usize);
                let diag = dx != 0 && dy != 0;
                if grid.is_occupied(n) || (diag && (grid.is_occupied((n.0, c.1)) || grid.is_occupied((c.0, n.1)))) {
                    continue;
                }
                let nd = d + if diag { std::f64::consts::SQRT_2 } else { 1.0 };
                if nd < best[idx(n)] - 1e-12 {
                    best[idx(n)] = nd;
                    let nc = if diag { (counts.0, counts.1 + 1) } else { (counts.0 + 1, counts.1) };
                    heap.push(Node(nd, nc, n));
                }
            }
        }
    }
    None
}

fn criterion_4() -> Outcome_ {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut solved = 0;
    for k in 0..50 {
        let mut grid = OccupancyGrid::new_free(Vec3::ZERO, 0.1, 16, 16);
        for j in 0..16 {
            for i in 0..16 {
                grid.set((i, j), rng.random_bool(0.3));
            }
        }
        let (s, g) = ((0, rng.random_range(0..16)), (15, rng.random_range(0..16)));
        grid.set(s, false);
        grid.set(g, false);
        let oracle = dijkstra(&grid, s, g);
        let found = astar_cells(&grid, s, g);
        match (oracle, found) {
            (None, Err(_)) => continue,
            (None, Ok(_)) => return Err(format!("grid {k}: A* found a path Dijkstra did not")),
            (Some(_), Err(e)) => return Err(format!("grid {k}: A* failed: {e}")),
            (Some(want), Ok(path)) => {
                let got = cell_path_cost(&path);
                check(got == want, || format!("grid {k}: A* cost {got:?}, Dijkstra {want:?}"))?;
            }
        }
        solved += 1;
        let raw = astar(&grid, grid.center(s), grid.center(g)).map_err(|e| e.to_string())?;
        let smooth = smooth_path(&grid, &raw);
        check(path_length(&smooth) <= path_length(&raw) + 1e-9, || format!("grid {k}: smoothing lengthened the path"))?;
        for w in smooth.windows(2) {
            let steps = (w[0].dist(w[1]) / (grid.resolution / 50.0)).ceil() as usize;
            for i in 0..=steps {
                let p = w[0].lerp(w[1], i as f64 / steps as f64);
                let c = grid.cell_of(p).ok_or_else(|| format!("grid {k}: smoothed path leaves the grid"))?;
                check(grid.is_free(c), || format!("grid {k}: smoothed segment crosses occupied cell {c:?}"))?;
            }
        }
    }
    check(solved >= 20, || format!("only {solved} solvable grids"))?;
    Ok(format!("{solved}/50 solvable grids: costs equal Dijkstra, smoothed paths clear and no longer"))
}

fn criterion_5() -> Outcome_ {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_knot: f64 = 0.0;
    for k in 0..200 {
        let n = rng.random_range(3..10);
        let mut x = vec![0.0];
        let mut y = vec![rng.random_range(-1.0..1.0)];
        for _ in 1..n {
            x.push(x.last().unwrap() + rng.random_range(0.1..3.0));
            let step = if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.0..2.0) };
            y.push(y.last().unwrap() + step);
        }
        let p = Pchip::new(&x, &y).map_err(|e| e.to_string())?;
        for (xi, yi) in x.iter().zip(&y) {
            worst_knot = worst_knot.max((p.eval(*xi) - yi).abs());
        }
        for i in 0..n - 1 {
            let mut prev = y[i];
            for s in 0..=50 {
                let v = p.eval(x[i] + (x[i + 1] - x[i]) * s as f64 / 50.0);
                check(v >= y[i] - 1e-12 && v <= y[i + 1] + 1e-12 && v >= prev - 1e-12, || {
                    format!("dataset {k}: overshoot or reversal on interval {i}")
                })?;
                prev = v;
            }
        }
    }
    check(worst_knot <= 1e-12, || format!("knot error {worst_knot:e}"))?;

    let (mut speed_dev, mut norm_dev): (f64, f64) = (0.0, 0.0);
    for _ in 0..200 {
        let (a, b) = (random_quat(&mut rng), random_quat(&mut rng));
        let dense = slerp_knots(&[(0, a), (60, b)]).map_err(|e| e.to_string())?;
        let steps: Vec<f64> = dense.windows(2).map(|w| w[0].angle_to(w[1])).collect();
        let mean = steps.iter().sum::<f64>() / steps.len() as f64;
        speed_dev = steps.iter().fold(speed_dev, |m, s| m.max((s - mean).abs()));
        norm_dev = dense.iter().fold(norm_dev, |m, q| m.max((q.norm() - 1.0).abs()));
    }
    check(speed_dev <= 1e-9, || format!("slerp step deviation {speed_dev:e}"))?;
    check(norm_dev <= 1e-9, || format!("quaternion norm deviation {norm_dev:e}"))?;
    Ok(format!("knot error {worst_knot:.1e}, no overshoot on 200 sets, slerp step dev {speed_dev:.1e}, norm dev {norm_dev:.1e}"))
}

struct PlaneSdf;

impl Sdf for PlaneSdf {
    fn distance(&self, p: Vec3) -> f64 {
        p.x
    }
}

fn still_clip(n: usize, pelvis: Vec3) -> MotionClip {
    let pose = hoi_agent::executor::FramePose {
        pelvis,
        left_hand: pelvis + Vec3::new(0.2, 0.2, 0.0),
        right_hand: pelvis + Vec3::new(0.2, -0.2, 0.0),
        left_foot: Vec3::new(pelvis.x, pelvis.y + 0.1, 0.0),
        right_foot: Vec3::new(pelvis.x, pelvis.y - 0.1, 0.0),
        orientation: Quat::IDENTITY,
    };
    MotionClip {
        fps: 30.0,
        backend: "kinematic".into(),
        frames: vec![pose; n],
        object_tracks: Default::default(),
        object_sizes: Default::default(),
        grasp_events: vec![],
        controls: vec![],
    }
}

fn criterion_6() -> Outcome_ {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for k in 0..500 {
        let n = rng.random_range(1..200);
        let (dp, dr) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
        let pred: Vec<bool> = (0..n).map(|_| rng.random_bool(dp)).collect();
        let refr: Vec<bool> = (0..n).map(|_| rng.random_bool(dr)).collect();
        let s = contact_prf(&ContactSeries::new(pred.clone()), &ContactSeries::new(refr.clone())).map_err(|e| e.to_string())?;
        let count = |a: bool, b: bool| pred.iter().zip(&refr).filter(|(p, r)| **p == a && **r == b).count() as f64;
        let (tp, fp, fneg) = (count(true, true), count(true, false), count(false, true));
        if tp + fp > 0.0 {
            check((s.precision - tp / (tp + fp)).abs() < 1e-12, || format!("series {k}: precision"))?;
        }
        if tp + fneg > 0.0 {
            check((s.recall - tp / (tp + fneg)).abs() < 1e-12, || format!("series {k}: recall"))?;
        }
        if tp + fp > 0.0 && tp + fneg > 0.0 {
            let (p, r) = (tp / (tp + fp), tp / (tp + fneg));
            let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
            check((s.f1 - f1).abs() < 1e-12, || format!("series {k}: f1"))?;
        }
        check((s.percent - (tp + fp) / n as f64).abs() < 1e-12, || format!("series {k}: percent"))?;
    }

    let frame = |x: f64| vec![vec![Vec3::new(x, 0.0, 0.0)]];
    let pen = |x: f64| penetration_score(&frame(x), &PlaneSdf, PENETRATION_DEPTH);
    check(pen(-0.05) == 1.0 && pen(-0.03) == 0.0 && pen(0.1) == 0.0, || "penetration rule on plane fixture".into())?;
    let cube = OrientedBox::axis_aligned(Vec3::ZERO, Vec3::new(1.0, 1.0, 1.0));
    let vox = VoxelSdf::from_box(&cube, 64, 0.2).map_err(|e| e.to_string())?;
    let at = |x: f64| penetration_score(&frame(x), &vox, PENETRATION_DEPTH);
    check(at(0.45) == 1.0 && at(0.47) == 0.0 && at(0.6) == 0.0, || "penetration rule on voxel fixture".into())?;

    let clip = still_clip(31, Vec3::new(0.0, 0.0, 0.9));
    let off = ControlTrack::new("pelvis", vec![Waypoint::new(10, Vec3::new(0.3, 0.0, 0.9))]);
    let t = traj_metrics(&clip, &[off.clone()], &SUCCESS_THRESHOLDS).map_err(|e| e.to_string())?;
    check(t.success_at(0.5) == Some(1.0) && t.success_at(0.2) == Some(0.0), || format!("0.3 m error scored {:?}", t.success))?;
    let near = ControlTrack::new("pelvis", vec![Waypoint::new(3, Vec3::new(0.0, 0.1, 0.9))]);
    let far = ControlTrack::new("pelvis", vec![Waypoint::new(3, Vec3::new(0.0, 0.0, 1.6))]);
    let (a, b, c) = ([near], [off], [far]);
    let batch = traj_metrics_batch(&[(&clip, &a[..]), (&clip, &b[..]), (&clip, &c[..])], &SUCCESS_THRESHOLDS).map_err(|e| e.to_string())?;
    let (s5, s2) = (batch.success_at(0.5).unwrap(), batch.success_at(0.2).unwrap());
    check((s5 - 2.0 / 3.0).abs() < 1e-12 && (s2 - 1.0 / 3.0).abs() < 1e-12, || format!("batch success {s5} {s2}"))?;
    Ok("500 series match brute-force counts; 4 cm penetration rule; keyframe success at 0.5/0.2".into())
}

fn rows(pts: &[(f64, f64, f64, f64)]) -> Vec<[f64; 4]> {
    pts.iter().map(|p| [p.0, p.1, p.2, p.3]).collect()
}

fn carry_drift(clip: &MotionClip) -> f64 {
    let mut worst: f64 = 0.0;
    for g in &clip.grasp_events {
        let track = &clip.object_tracks[&g.object];
        for (on, hand) in [(g.hands.0, 0usize), (g.hands.1, 1)] {
            if !on {
                continue;
            }
            let d: Vec<f64> = (g.frame as usize..clip.len())
                .map(|f| {
                    let pose = clip.frames[f];
                    let h = if hand == 0 { pose.left_hand } else { pose.right_hand };
                    h.dist(track.pose_at(f as u32).0)
                })
                .collect();
            let (lo, hi) = d.iter().fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v)));
            worst = worst.max(hi - lo);
        }
    }
    worst
}

fn criterion_7() -> Outcome_ {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let exec = KinematicExecutor::default();
    let mut clips = Vec::new();
    for _ in 0..40 {
        let start = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.9);
        let human = HumanState::standing(start);
        let crate_box = OrientedBox::axis_aligned(start + Vec3::new(0.6, 0.0, -0.5), Vec3::new(0.4, 0.4, 0.4));
        let scene = SceneState::new(human, vec![ObjectState::new("crate", crate_box)]);
        let n = rng.random_range(2..5);
        let mut pelvis = vec![(0.0, start.x, start.y, 0.9)];
        for k in 1..n {
            pelvis.push((30.0 * k as f64, start.x + rng.random_range(-2.0..2.0), start.y + rng.random_range(-2.0..2.0), 0.9));
        }
        let nf = 30 * (n as i64 - 1) + 10;
        let motion = MotionArgs {
            control_joints: vec!["pelvis".into(), "right_hand".into()],
            control_points: vec![rows(&pelvis), rows(&[(15.0, start.x + 0.3, start.y - 0.2, 1.1)])],
            text: "walk".into(),
            number_frames: nf,
            task_index: 0,
        };
        let r = exec.generate_motion(&scene, &motion).map_err(|e| e.to_string())?;
        clips.push(r.clip);
        let c = crate_box.center;
        let carry = InteractionArgs {
            motion: MotionArgs {
                control_joints: vec!["pelvis".into()],
                control_points: vec![rows(&[(0.0, start.x, start.y, 0.9)])],
                text: "carry".into(),
                number_frames: 120,
                task_index: 0,
            },
            object_name: vec!["crate".into()],
            object_points: vec![rows(&[
                (20.0, c.x, c.y, c.z),
                (60.0, c.x + rng.random_range(-1.5..1.5), c.y + rng.random_range(-1.5..1.5), 0.9),
                (110.0, c.x + rng.random_range(-2.0..2.0), c.y + rng.random_range(-2.0..2.0), c.z),
            ])],
        };
        let r = exec.generate_interaction(&scene, &carry).map_err(|e| e.to_string())?;
        clips.push(r.clip);
    }
    let mut planner = MockPlanner::from_jsonl(FLOORLAMP_TRANSCRIPT).map_err(|e| e.to_string())?;
    let log = run_episode(&mut planner, &floorlamp_scene(), FLOORLAMP_INSTRUCTION, &exec, &EpisodeConfig::default())
        .map_err(|e| e.to_string())?;
    clips.extend(log.clips);

    let (mut worst_mm, mut drift): (f64, f64) = (0.0, 0.0);
    for (i, clip) in clips.iter().enumerate() {
        let t = traj_metrics(clip, &clip.controls, &SUCCESS_THRESHOLDS).map_err(|e| e.to_string())?;
        worst_mm = worst_mm.max(t.mpjpe_mm);
        check(t.success_at(0.2) == Some(1.0), || format!("clip {i}: Succ@0.2 = {:?}", t.success_at(0.2)))?;
        drift = drift.max(carry_drift(clip));
    }
    check(worst_mm <= 1e-9, || format!("MPJPE {worst_mm:e} mm"))?;
    check(drift <= 1e-9, || format!("hand-object drift {drift:e} m"))?;
    Ok(format!("{} clips: max MPJPE {worst_mm:.1e} mm, Succ@0.2 = 1, carry drift {drift:.1e} m", clips.len()))
}

fn criterion_8() -> Outcome_ {
    let template = parse_message(PROMPT_TEMPLATE).map_err(|e| e.to_string())?.commands;
    let kinds: Vec<&str> = template.iter().map(|c| c.kind()).collect();
    check(
        kinds == ["generate_motion", "generate_interaction", "generate_interaction", "task_completed"],
        || format!("prompt examples parsed as {kinds:?}"),
    )?;
    let mut all = template;
    for line in FLOORLAMP_TRANSCRIPT.lines() {
        let v: serde_json::Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
        all.extend(parse_commands(v["content"].as_str().unwrap_or_default()).map_err(|e| e.to_string())?);
    }
    let engineer = all.len() - 4;
    check(engineer == 3, || format!("transcript yielded {engineer} commands"))?;
    for (i, cmd) in all.iter().enumerate() {
        let back = parse_commands(&cmd.to_code_block()).map_err(|e| format!("block {i}: {e}"))?;
        check(back == [cmd.clone()], || format!("block {i} does not round-trip"))?;
    }

    let scene = SceneState::new(HumanState::standing(Vec3::new(0.0, 0.0, 0.9)), vec![]);
    let bad = "```python\nfor i in range(3):\n    pass\n```".to_string();
    let good = "```python\nmodel.generate_motion(control_joints=['pelvis'], control_points=[[[0, 0, 0, 0.9], [30, 0.5, 0, 0.9]]], text='step', number_frames=30, task_index=0)\n```".to_string();
    let done = "```python\ntask_completed()\n```".to_string();
    let run = |msgs: Vec<String>| -> Result<EpisodeLog, String> {
        let mut p = MockPlanner::new(msgs);
        run_episode(&mut p, &scene, "step forward", &KinematicExecutor::default(), &EpisodeConfig::default()).map_err(|e| e.to_string())
    };
    let log = run(vec![bad.clone(); 6])?;
    check(log.outcome == Some(Outcome::ErrorBudgetExhausted) && log.steps == 5, || {
        format!("five failures gave {:?} after {} steps", log.outcome, log.steps)
    })?;
    let log = run(vec![bad.clone(), bad.clone(), bad.clone(), bad.clone()])?;
    check(log.outcome == Some(Outcome::PlannerUnavailable), || format!("four failures gave {:?}", log.outcome))?;
    let mut msgs = vec![bad.clone(); 4];
    msgs.push(good);
    msgs.extend(vec![bad.clone(); 4]);
    msgs.push(done);
    let log = run(msgs)?;
    check(log.outcome == Some(Outcome::Completed) && log.steps == 10, || {
        format!("reset sequence gave {:?} after {} steps", log.outcome, log.steps)
    })?;
    Ok(format!("{} blocks round-trip; budget fires at exactly 5 and resets on success", all.len()))
}

fn criterion_9() -> Outcome_ {
    let chunks = segment_clips(&[(0.0, 75.0)], 2.0, 30.0, 1.0);
    check(chunks == [(0, 30), (30, 60), (60, 75)], || format!("75 s shot split as {chunks:?}"))?;

    let cfg = ProcConfig::default();
    let n = 90;
    let root: Vec<Vec3> = (0..n).map(|f| Vec3::new(1.2 * f as f64 / 30.0, 0.0, 0.9)).collect();
    let mut spiked = PoseStream::from_root(30.0, root.clone(), vec![Quat::IDENTITY; n]);
    spiked.root[45].y += 1.0;
    let pre = motion_sanity_filter(&spiked, &cfg).map_err(|e| e.to_string())?;
    check(pre.reason == Some(Reason::AbruptMotion), || format!("pre-repair verdict {pre:?}"))?;
    let post = process_stream(&spiked, &cfg).map_err(|e| e.to_string())?;
    check(post.verdict.kept, || format!("post-repair verdict {:?}", post.verdict))?;

    let eps = 0.01;
    let mut noisy = PoseStream::from_root(30.0, root, vec![Quat::IDENTITY; n]);
    for (f, p) in noisy.root.iter_mut().enumerate() {
        p.y = if f % 2 == 0 { eps } else { -eps };
    }
    let smooth = smooth_stream(&noisy, 5).map_err(|e| e.to_string())?;
    let interior = |s: &PoseStream| (2..n - 2).map(|f| s.root[f].y.abs()).fold(0.0, f64::max);
    let ratio = interior(&noisy) / interior(&smooth);
    check(ratio >= 5.0 - 1e-9, || format!("attenuation {ratio}"))?;
    Ok(format!("75 s -> {chunks:?}; spike rejected then kept; attenuation {ratio:.2}x"))
}

fn criterion_10() -> Outcome_ {
    let human = HumanState::standing(Vec3::new(0.0, 0.0, 0.9));
    let start = Vec3::new(0.7, 0.0, 0.25);
    let scene = SceneState::new(
        human,
        vec![ObjectState::new("crate", OrientedBox::axis_aligned(start, Vec3::new(0.4, 0.4, 0.4)))],
    );
    let carry = |y: f64| {
        format!(
            "```python\nmodel.generate_human_object(control_joints=['pelvis'], control_points=[[[0, 0, 0, 0.9]]], \
             object_name=['crate'], object_points=[[[20, 0.7, 0, 0.25], [60, 0.7, {h}, 0.9], [100, 0.7, {y}, 0.25]]], \
             text='carry the crate', number_frames=110, task_index=0)\n```",
            h = y / 2.0
        )
    };
    let done = "```python\ntask_completed()\n```".to_string();
    let broken = "```python\nwhile True:\n    pass\n```".to_string();
    let mut results = Vec::new();
    for i in 0..20 {
        let target_y = -1.5 - 0.1 * (i % 5) as f64;
        let msgs = match i {
            0..=12 => vec![carry(target_y), done.clone()],
            13..=15 => vec![carry(target_y + 0.5 + 0.2 * (i - 13) as f64), done.clone()],
            16 | 17 => vec![broken.clone(); 5],
            _ => vec![carry(target_y)],
        };
        let mut p = MockPlanner::new(msgs);
        let log = run_episode(&mut p, &scene, "Move the crate.", &KinematicExecutor::default(), &EpisodeConfig::default())
            .map_err(|e| e.to_string())?;
        let target = TargetPose { object: "crate".into(), position: Vec3::new(0.7, target_y, 0.25), orientation: None };
        results.push(agent_success(&log, &target, &Tolerance::default()));
    }
    let passed = results.iter().filter(|b| **b).count();
    let rate = success_rate(&results);
    check(passed == 13 && (rate - 0.65).abs() < 1e-12, || format!("{passed} passed, rate {rate}"))?;
    Ok(format!("{passed}/20 successful episodes -> {rate:.2}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome_); 10] = [
        ("episode reproduction", criterion_1),
        ("scheduling", criterion_2),
        ("collision oracle", criterion_3),
        ("A* optimality", criterion_4),
        ("interpolation", criterion_5),
        ("metrics oracle", criterion_6),
        ("executor fidelity", criterion_7),
        ("planner protocol", criterion_8),
        ("pipeline properties", criterion_9),
        ("success-rate bookkeeping", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let r = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        match r {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
