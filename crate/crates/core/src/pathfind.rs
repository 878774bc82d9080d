//! Grid fallback planner: occupancy rasterization, 8-connected A*, line-of-sight
//! shortcutting and constant-speed frame scheduling.

use crate::collide::{
    boxes_intersect, validate_track_with, ValidateOptions, DEFAULT_ENDPOINT_REACH, DEFAULT_MARGIN,
};
use crate::error::{Error, Result};
use crate::scene::{inflate_box, OrientedBox, SceneState, Vec3};
use crate::traj::{ControlTrack, Frame, Waypoint};
use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, VecDeque};

pub const DEFAULT_RESOLUTION: f64 = 0.05;
pub const DEFAULT_SPEED: f64 = 1.2;
pub const DEFAULT_FPS: f64 = 30.0;
const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Boolean occupancy over the ground plane. Cell `(i, j)` is centered at
/// `origin + (i * resolution, j * resolution)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    pub origin: Vec3,
    pub resolution: f64,
    pub nx: usize,
    pub ny: usize,
    pub occupied: Vec<bool>,
}

pub type Cell = (usize, usize);

impl OccupancyGrid {
    pub fn new_free(origin: Vec3, resolution: f64, nx: usize, ny: usize) -> Self {
        OccupancyGrid { origin, resolution, nx, ny, occupied: vec![false; nx * ny] }
    }

    /// Builds a grid from rows of `'#'` (occupied) and `'.'` (free); the first row is `j = 0`.
    pub fn from_ascii(rows: &[&str], resolution: f64) -> Self {
        let ny = rows.len();
        let nx = rows.first().map_or(0, |r| r.len());
        let mut g = OccupancyGrid::new_free(Vec3::ZERO, resolution, nx, ny);
        for (j, r) in rows.iter().enumerate() {
            for (i, c) in r.chars().enumerate() {
                g.set((i, j), c == '#');
            }
        }
        g
    }

    fn idx(&self, c: Cell) -> usize {
        c.1 * self.nx + c.0
    }

    pub fn is_occupied(&self, c: Cell) -> bool {
        self.occupied[self.idx(c)]
    }

    pub fn is_free(&self, c: Cell) -> bool {
        !self.is_occupied(c)
    }

    pub fn set(&mut self, c: Cell, occ: bool) {
        let i = self.idx(c);
        self.occupied[i] = occ;
    }

    pub fn center(&self, c: Cell) -> Vec3 {
        Vec3::new(
            self.origin.x + c.0 as f64 * self.resolution,
            self.origin.y + c.1 as f64 * self.resolution,
            self.origin.z,
        )
    }

    /// Cell whose square contains `p`, if inside the grid.
    pub fn cell_of(&self, p: Vec3) -> Option<Cell> {
        let gx = ((p.x - self.origin.x) / self.resolution + 0.5).floor();
        let gy = ((p.y - self.origin.y) / self.resolution + 0.5).floor();
        (gx >= 0.0 && gy >= 0.0 && (gx as usize) < self.nx && (gy as usize) < self.ny)
            .then(|| (gx as usize, gy as usize))
    }

    pub fn free_count(&self) -> usize {
        self.occupied.iter().filter(|o| !**o).count()
    }

    fn neighbors(&self, c: Cell) -> impl Iterator<Item = (Cell, bool)> + '_ {
        const DIRS: [(i64, i64); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];
        DIRS.iter().filter_map(move |&(dx, dy)| {
            let (x, y) = (c.0 as i64 + dx, c.1 as i64 + dy);
            if x < 0 || y < 0 || x >= self.nx as i64 || y >= self.ny as i64 {
                return None;
            }
            let n = (x as usize, y as usize);
            if self.is_occupied(n) {
                return None;
            }
            let diag = dx != 0 && dy != 0;
            if diag && (self.is_occupied((x as usize, c.1)) || self.is_occupied((c.0, y as usize))) {
                return None;
            }
            Some((n, diag))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RasterOptions {
    pub margin: f64,
    pub resolution: f64,
    pub ignore: BTreeSet<String>,
    /// Points whose `reach` neighbourhood is rasterized at zero margin.
    pub relax: Vec<Vec3>,
    pub reach: f64,
    /// Extra points the grid must cover.
    pub include: Vec<Vec3>,
}

impl Default for RasterOptions {
    fn default() -> Self {
        RasterOptions {
            margin: DEFAULT_MARGIN,
            resolution: DEFAULT_RESOLUTION,
            ignore: BTreeSet::new(),
            relax: Vec::new(),
            reach: DEFAULT_ENDPOINT_REACH,
            include: Vec::new(),
        }
    }
}

/// Occupancy of `footprint` placed at every cell center, against obstacles inflated by `margin`.
pub fn rasterize(scene: &SceneState, footprint: &OrientedBox, margin: f64, resolution: f64) -> Result<OccupancyGrid> {
    rasterize_with(scene, footprint, &RasterOptions { margin, resolution, ..Default::default() })
}

/// A cell is occupied iff the footprint, dilated by the cell's half-diagonal and centered
/// on the cell, intersects an obstacle envelope. Cells whose whole square lies within
/// `reach` of a relax point see the bare obstacles.
pub fn rasterize_with(scene: &SceneState, footprint: &OrientedBox, opts: &RasterOptions) -> Result<OccupancyGrid> {
    if !(opts.resolution > 0.0) {
        return Err(Error::arg("resolution must be positive"));
    }
    if !(opts.margin >= 0.0) {
        return Err(Error::arg("margin must be non-negative"));
    }
    let (mut lo, mut hi) = scene.bounds_xy();
    for p in opts.include.iter().chain(&opts.relax) {
        lo = [lo[0].min(p.x), lo[1].min(p.y)];
        hi = [hi[0].max(p.x), hi[1].max(p.y)];
    }
    let pad = opts.margin.max(opts.resolution);
    let (w, h) = (hi[0] - lo[0] + 2.0 * pad, hi[1] - lo[1] + 2.0 * pad);
    if !w.is_finite() || !h.is_finite() || w <= 0.0 || h <= 0.0 {
        return Err(Error::arg("degenerate scene bounds"));
    }
    let nx = (w / opts.resolution).ceil() as usize + 1;
    let ny = (h / opts.resolution).ceil() as usize + 1;
    if nx.saturating_mul(ny) > 25_000_000 {
        return Err(Error::arg(format!("grid of {nx}x{ny} cells is too large")));
    }
    let origin = Vec3::new(lo[0] - pad, lo[1] - pad, footprint.center.z);
    let mut grid = OccupancyGrid::new_free(origin, opts.resolution, nx, ny);

    let r = opts.resolution * SQRT2 / 2.0;
    let probe = inflate_box(footprint, r)?;
    let reach_probe = probe.half().norm();
    let obstacles: Vec<(OrientedBox, OrientedBox, f64)> = scene
        .objects
        .iter()
        .filter(|o| !opts.ignore.contains(&o.name))
        .map(|o| {
            let env = inflate_box(&o.bbox, opts.margin)?;
            Ok((o.bbox, env, env.half().norm() + reach_probe))
        })
        .collect::<Result<_>>()?;

    for j in 0..ny {
        for i in 0..nx {
            let c = grid.center((i, j));
            let relaxed = opts.relax.iter().any(|p| c.dist_xy(*p) + r <= opts.reach);
            let placed = probe.at(c);
            let hit = obstacles.iter().any(|(bare, env, cull)| {
                if c.dist_xy(env.center) > *cull {
                    return false;
                }
                boxes_intersect(&placed, if relaxed { bare } else { env })
            });
            if hit {
                grid.set((i, j), true);
            }
        }
    }
    Ok(grid)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Node {
    f: f64,
    seq: u64,
    cell: Cell,
}

impl Eq for Node {}

impl Ord for Node {
    fn cmp(&self, o: &Self) -> Ordering {
        o.f.total_cmp(&self.f).then_with(|| o.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

fn octile(a: Cell, b: Cell) -> f64 {
    let dx = a.0.abs_diff(b.0) as f64;
    let dy = a.1.abs_diff(b.1) as f64;
    dx.max(dy) + (SQRT2 - 1.0) * dx.min(dy)
}

/// Shortest 8-connected cell path from `start` to `goal`, both inclusive.
pub fn astar_cells(grid: &OccupancyGrid, start: Cell, goal: Cell) -> Result<Vec<Cell>> {
    for (label, c) in [("start", start), ("goal", goal)] {
        if c.0 >= grid.nx || c.1 >= grid.ny {
            return Err(Error::arg(format!("{label} cell {c:?} is outside the grid")));
        }
        if grid.is_occupied(c) {
            return Err(Error::arg(format!("{label} cell {c:?} is occupied")));
        }
    }
    let n = grid.nx * grid.ny;
    let mut g = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    g[grid.idx(start)] = 0.0;
    heap.push(Node { f: octile(start, goal), seq, cell: start });
    let mut expanded = 0usize;
    while let Some(Node { cell, .. }) = heap.pop() {
        let ci = grid.idx(cell);
        if closed[ci] {
            continue;
        }
        closed[ci] = true;
        expanded += 1;
        if cell == goal {
            let mut path = vec![cell];
            let mut k = ci;
            while parent[k] != usize::MAX {
                k = parent[k];
                path.push((k % grid.nx, k / grid.nx));
            }
            path.reverse();
            return Ok(path);
        }
        for (nb, diag) in grid.neighbors(cell) {
            let ni = grid.idx(nb);
            if closed[ni] {
                continue;
            }
            let cand = g[ci] + if diag { SQRT2 } else { 1.0 };
            if cand < g[ni] {
                g[ni] = cand;
                parent[ni] = ci;
                seq += 1;
                heap.push(Node { f: cand + octile(nb, goal), seq, cell: nb });
            }
        }
    }
    Err(Error::Unreachable { frontier: expanded })
}

/// World-coordinate A*: returns cell centers from the start cell to the goal cell.
pub fn astar(grid: &OccupancyGrid, start: Vec3, goal: Vec3) -> Result<Vec<Vec3>> {
    let s = grid.cell_of(start).ok_or_else(|| Error::arg("start lies outside the grid"))?;
    let g = grid.cell_of(goal).ok_or_else(|| Error::arg("goal lies outside the grid"))?;
    Ok(astar_cells(grid, s, g)?.into_iter().map(|c| grid.center(c)).collect())
}

/// Path cost in cells: orthogonal steps count 1, diagonal steps sqrt(2).
pub fn cell_path_cost(path: &[Cell]) -> (usize, usize) {
    let mut orth = 0;
    let mut diag = 0;
    for w in path.windows(2) {
        if w[0].0 != w[1].0 && w[0].1 != w[1].1 {
            diag += 1;
        } else {
            orth += 1;
        }
    }
    (orth, diag)
}

/// Every cell touched by the segment, including both neighbours at exact corner crossings.
pub fn supercover(grid: &OccupancyGrid, a: Vec3, b: Vec3) -> Vec<(i64, i64)> {
    let to_g = |p: Vec3| {
        ((p.x - grid.origin.x) / grid.resolution + 0.5, (p.y - grid.origin.y) / grid.resolution + 0.5)
    };
    let (x0, y0) = to_g(a);
    let (x1, y1) = to_g(b);
    let (mut i, mut j) = (x0.floor() as i64, y0.floor() as i64);
    let (ie, je) = (x1.floor() as i64, y1.floor() as i64);
    let (dx, dy) = (x1 - x0, y1 - y0);
    let sx: i64 = if dx > 0.0 { 1 } else { -1 };
    let sy: i64 = if dy > 0.0 { 1 } else { -1 };
    let t_dx = if dx != 0.0 { (1.0 / dx).abs() } else { f64::INFINITY };
    let t_dy = if dy != 0.0 { (1.0 / dy).abs() } else { f64::INFINITY };
    let mut t_x = if dx > 0.0 {
        (x0.floor() + 1.0 - x0) * t_dx
    } else if dx < 0.0 {
        (x0 - x0.floor()) * t_dx
    } else {
        f64::INFINITY
    };
    let mut t_y = if dy > 0.0 {
        (y0.floor() + 1.0 - y0) * t_dy
    } else if dy < 0.0 {
        (y0 - y0.floor()) * t_dy
    } else {
        f64::INFINITY
    };
    let mut out = vec![(i, j)];
    let limit = (ie - i).unsigned_abs() + (je - j).unsigned_abs() + 2;
    for _ in 0..limit * 2 {
        if (i, j) == (ie, je) {
            break;
        }
        let tm = t_x.min(t_y);
        if tm > 1.0 {
            break;
        }
        if (t_x - t_y).abs() < 1e-12 {
            out.push((i + sx, j));
            out.push((i, j + sy));
            i += sx;
            j += sy;
            t_x += t_dx;
            t_y += t_dy;
        } else if t_x < t_y {
            i += sx;
            t_x += t_dx;
        } else {
            j += sy;
            t_y += t_dy;
        }
        out.push((i, j));
    }
    out
}

/// True iff every cell on the segment is inside the grid and free.
pub fn line_of_sight(grid: &OccupancyGrid, a: Vec3, b: Vec3) -> bool {
    supercover(grid, a, b).into_iter().all(|(i, j)| {
        i >= 0 && j >= 0 && (i as usize) < grid.nx && (j as usize) < grid.ny && grid.is_free((i as usize, j as usize))
    })
}

/// Greedy shortcutting: from each kept point, jump to the farthest later point in sight.
pub fn smooth_path(grid: &OccupancyGrid, path: &[Vec3]) -> Vec<Vec3> {
    if path.len() <= 2 {
        return path.to_vec();
    }
    let mut out = vec![path[0]];
    let mut i = 0;
    while i < path.len() - 1 {
        let mut j = path.len() - 1;
        while j > i + 1 && !line_of_sight(grid, path[i], path[j]) {
            j -= 1;
        }
        out.push(path[j]);
        i = j;
    }
    out
}

pub fn path_length(path: &[Vec3]) -> f64 {
    path.windows(2).map(|w| w[0].dist(w[1])).sum()
}

/// Assigns each point the frame at which it is reached at constant `speed`.
pub fn schedule(path: &[Vec3], start_frame: Frame, speed: f64, fps: f64) -> Result<ControlTrack> {
    if path.len() < 2 {
        return Err(Error::arg("schedule needs at least two points"));
    }
    if !(speed > 0.0) || !(fps > 0.0) {
        return Err(Error::arg("speed and fps must be positive"));
    }
    let mut cum = 0.0;
    let mut prev: Option<Frame> = None;
    let mut wps = Vec::with_capacity(path.len());
    for (k, p) in path.iter().enumerate() {
        if k > 0 {
            cum += path[k - 1].dist(*p);
        }
        let mut f = start_frame + (cum / speed * fps - 1e-9).ceil().max(0.0) as Frame;
        if let Some(pf) = prev {
            if f <= pf {
                f = pf + 1;
            }
        }
        prev = Some(f);
        wps.push(Waypoint::new(f, *p));
    }
    Ok(ControlTrack::new("path", wps))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepairOptions {
    pub margin: f64,
    pub resolution: f64,
    pub reach: f64,
    pub speed: f64,
    pub fps: f64,
}

impl Default for RepairOptions {
    fn default() -> Self {
        RepairOptions {
            margin: DEFAULT_MARGIN,
            resolution: DEFAULT_RESOLUTION,
            reach: DEFAULT_ENDPOINT_REACH,
            speed: DEFAULT_SPEED,
            fps: DEFAULT_FPS,
        }
    }
}

/// Free cell nearest `target` among those connected to `start`; BFS order breaks ties.
fn nearest_reachable(grid: &OccupancyGrid, start: Cell, target: Vec3) -> Option<Cell> {
    let mut seen = vec![false; grid.nx * grid.ny];
    let mut q = VecDeque::from([start]);
    seen[grid.idx(start)] = true;
    let mut best: Option<(Cell, f64)> = None;
    while let Some(c) = q.pop_front() {
        let d = grid.center(c).dist_xy(target);
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((c, d));
        }
        for (n, _) in grid.neighbors(c) {
            let ni = grid.idx(n);
            if !seen[ni] {
                seen[ni] = true;
                q.push_back(n);
            }
        }
    }
    best.map(|(c, _)| c)
}

/// Replaces `track` with a collision-free route between its first and last waypoint at the
/// start height, re-timed at constant speed from the original start frame. An unreachable
/// goal is snapped to the nearest reachable free cell.
pub fn repair_track(
    scene: &SceneState,
    moving: &OrientedBox,
    track: &ControlTrack,
    ignore: &BTreeSet<String>,
    opts: &RepairOptions,
) -> Result<ControlTrack> {
    if track.waypoints.len() < 2 {
        return Err(Error::arg("repair needs a track with at least two waypoints"));
    }
    let first = &track.waypoints[0];
    let z = first.position.z;
    let start = Vec3::new(first.position.x, first.position.y, z);
    let last = track.waypoints.last().unwrap().position;
    let mut goal = Vec3::new(last.x, last.y, z);

    let footprint = moving.at(start);
    let mut ignore = ignore.clone();
    for o in &scene.objects {
        if boxes_intersect(&footprint, &o.bbox) {
            ignore.insert(o.name.clone());
        }
    }
    let mut raster = RasterOptions {
        margin: opts.margin,
        resolution: opts.resolution,
        ignore: ignore.clone(),
        relax: vec![start, goal],
        reach: opts.reach,
        include: vec![start, goal],
    };
    let mut grid = rasterize_with(scene, &footprint, &raster)?;
    for _ in 0..3 {
        let sc = grid.cell_of(start).ok_or_else(|| Error::arg("start outside grid"))?;
        if grid.is_occupied(sc) {
            return Err(Error::Unreachable { frontier: 0 });
        }
        let gc = grid.cell_of(goal).ok_or_else(|| Error::arg("goal outside grid"))?;
        if grid.is_free(gc) && astar_cells(&grid, sc, gc).is_ok() {
            break;
        }
        let snapped = nearest_reachable(&grid, sc, goal).ok_or(Error::Unreachable { frontier: 0 })?;
        goal = grid.center(snapped);
        raster.relax = vec![start, goal];
        grid = rasterize_with(scene, &footprint, &raster)?;
    }
    let mut raw = astar(&grid, start, goal)?;
    raw[0] = start;
    *raw.last_mut().unwrap() = goal;
    raw.dedup();
    if raw.len() < 2 {
        raw.push(goal);
    }
    let smoothed: Vec<Vec3> = smooth_path(&grid, &raw).into_iter().map(|p| Vec3::new(p.x, p.y, z)).collect();
    let mut out = schedule(&smoothed, first.frame, opts.speed, opts.fps)?;
    out.name = track.name.clone();

    let vopts = ValidateOptions { margin: opts.margin, endpoint_reach: opts.reach, skip_initial_contacts: true };
    let check = validate_track_with(moving, &out, scene, &ignore, &vopts)?;
    if check.collided {
        return Err(Error::Validation(format!(
            "repaired track for `{}` still collides with {:?}",
            track.name,
            check.names()
        )));
    }
    Ok(out)
}
