//! Level-set geometry: zero-contour extraction, point-to-polyline distance
//! queries, and the point segmentations that drive the jump and three-corner
//! objectives.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spline::{SampleSet, Spline2D, SplineError};

#[derive(Error, Debug)]
pub enum GeometryError {
    #[error("polyline needs at least 2 distinct vertices, got {0}")]
    DegeneratePolyline(usize),
    #[error("zero-set resolution {resolution} must be positive and at most a quarter knot spacing ({max})")]
    BadResolution { resolution: f64, max: f64 },
    #[error("curve does not partition the rectangle: {0}")]
    DoesNotPartition(String),
    #[error("probe point lies on the curve; side is ambiguous")]
    AmbiguousProbe,
    #[error("curve set is empty")]
    EmptyCurves,
    #[error("sample set is {got}-dimensional, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Spline(#[from] SplineError),
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self { x0, x1, y0, y1 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.x0 && p[0] <= self.x1 && p[1] >= self.y0 && p[1] <= self.y1
    }

    pub fn intersect(&self, other: &Rect) -> Option<Rect> {
        let r = Rect {
            x0: self.x0.max(other.x0),
            x1: self.x1.min(other.x1),
            y0: self.y0.max(other.y0),
            y1: self.y1.min(other.y1),
        };
        (r.x0 < r.x1 && r.y0 < r.y1).then_some(r)
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }
}

/// Ordered vertex chain; `closed` joins the last vertex back to the first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    vertices: Vec<[f64; 2]>,
    closed: bool,
}

impl Polyline {
    pub fn new(vertices: Vec<[f64; 2]>, closed: bool) -> Result<Self, GeometryError> {
        let mut dedup: Vec<[f64; 2]> = Vec::with_capacity(vertices.len());
        for v in vertices {
            if dedup.last() != Some(&v) {
                dedup.push(v);
            }
        }
        if closed && dedup.len() > 1 && dedup.first() == dedup.last() {
            dedup.pop();
        }
        if dedup.len() < 2 {
            return Err(GeometryError::DegeneratePolyline(dedup.len()));
        }
        Ok(Self {
            vertices: dedup,
            closed,
        })
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn closed(&self) -> bool {
        self.closed
    }

    /// Segment endpoints, including the wrap-around segment when closed.
    pub fn segments(&self) -> impl Iterator<Item = ([f64; 2], [f64; 2])> + '_ {
        let n = self.vertices.len();
        let wrap = if self.closed && n > 2 { 1 } else { 0 };
        (0..n - 1 + wrap).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn reversed(&self) -> Polyline {
        let mut v = self.vertices.clone();
        v.reverse();
        Polyline {
            vertices: v,
            closed: self.closed,
        }
    }
}

/// Distance from `p` to the segment `a`-`b`. Endpoints are ordered
/// canonically first, so the result is bit-identical under reversal.
pub(crate) fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (a, b) = if (b[0], b[1]) < (a[0], a[1]) { (b, a) } else { (a, b) };
    let dx = b[0] - a[0];
    let dy = b[1] - a[1];
    let len_sq = dx * dx + dy * dy;
    let t = if len_sq > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len_sq).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let cx = a[0] + t * dx;
    let cy = a[1] + t * dy;
    (p[0] - cx).hypot(p[1] - cy)
}

/// Euclidean distance from `p` to the nearest segment of any polyline;
/// `+inf` for an empty curve list.
pub fn dist_to_polylines(p: [f64; 2], curves: &[Polyline]) -> f64 {
    let mut best = f64::INFINITY;
    for c in curves {
        for (a, b) in c.segments() {
            best = best.min(segment_distance(p, a, b));
        }
    }
    best
}

/// Uniform spatial hash over polyline segments for threshold distance queries.
pub struct SegmentGrid {
    cell: f64,
    x0: f64,
    y0: f64,
    nx: i64,
    ny: i64,
    bins: HashMap<(i64, i64), Vec<u32>>,
    segs: Vec<[f64; 4]>,
}

impl SegmentGrid {
    /// `cell` must be at least the largest query radius that will be used.
    pub fn build(curves: &[Polyline], cell: f64) -> Self {
        assert!(cell > 0.0);
        let mut segs = Vec::new();
        let (mut x0, mut y0) = (f64::INFINITY, f64::INFINITY);
        let (mut x1, mut y1) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for c in curves {
            for (a, b) in c.segments() {
                segs.push([a[0], a[1], b[0], b[1]]);
                x0 = x0.min(a[0]).min(b[0]);
                y0 = y0.min(a[1]).min(b[1]);
                x1 = x1.max(a[0]).max(b[0]);
                y1 = y1.max(a[1]).max(b[1]);
            }
        }
        let mut bins: HashMap<(i64, i64), Vec<u32>> = HashMap::new();
        let (nx, ny);
        if segs.is_empty() {
            x0 = 0.0;
            y0 = 0.0;
            nx = 0;
            ny = 0;
        } else {
            nx = ((x1 - x0) / cell).floor() as i64 + 1;
            ny = ((y1 - y0) / cell).floor() as i64 + 1;
            for (i, s) in segs.iter().enumerate() {
                let bx0 = (((s[0].min(s[2])) - x0) / cell).floor() as i64;
                let bx1 = (((s[0].max(s[2])) - x0) / cell).floor() as i64;
                let by0 = (((s[1].min(s[3])) - y0) / cell).floor() as i64;
                let by1 = (((s[1].max(s[3])) - y0) / cell).floor() as i64;
                for bx in bx0..=bx1 {
                    for by in by0..=by1 {
                        bins.entry((bx, by)).or_default().push(i as u32);
                    }
                }
            }
        }
        Self {
            cell,
            x0,
            y0,
            nx,
            ny,
            bins,
            segs,
        }
    }

    /// Whether any segment lies within distance `r` of `p`; requires `r <= cell`.
    pub fn any_within(&self, p: [f64; 2], r: f64) -> bool {
        debug_assert!(r <= self.cell * (1.0 + 1e-12));
        if self.segs.is_empty() {
            return false;
        }
        let bx = ((p[0] - self.x0) / self.cell).floor() as i64;
        let by = ((p[1] - self.y0) / self.cell).floor() as i64;
        for dx in -1..=1 {
            for dy in -1..=1 {
                let key = (bx + dx, by + dy);
                if key.0 < -1 || key.0 > self.nx || key.1 < -1 || key.1 > self.ny {
                    continue;
                }
                if let Some(ids) = self.bins.get(&key) {
                    for &i in ids {
                        let s = self.segs[i as usize];
                        if segment_distance(p, [s[0], s[1]], [s[2], s[3]]) <= r {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }
}

/// Per-sample classification produced by the segmentation operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label {
    Plus,
    Minus,
    /// Sector index 0, 1 or 2 for the three-corner problems.
    Sector(u8),
    Excluded,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segmentation {
    labels: Vec<Label>,
}

impl Segmentation {
    pub fn new(labels: Vec<Label>) -> Self {
        Self { labels }
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn indices_with(&self, label: Label) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, &l)| (l == label).then_some(i))
            .collect()
    }

    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }
}

/// Marching-squares zero contours of `g` over `rect` on a lattice with spacing
/// at most `resolution`. Edge crossings are linearly interpolated; ambiguous
/// saddle cells are split by the sign at the cell center. Returns an empty
/// list when `g` has no sign change on the lattice.
pub fn extract_zero_set(
    g: &Spline2D,
    rect: Rect,
    resolution: f64,
) -> Result<Vec<Polyline>, GeometryError> {
    let max_res = g.grid().gx.delta().min(g.grid().gy.delta()) / 4.0;
    if !(resolution > 0.0) || resolution > max_res * (1.0 + 1e-12) {
        return Err(GeometryError::BadResolution {
            resolution,
            max: max_res,
        });
    }
    let nx = ((rect.width() / resolution).ceil() as usize).max(1) + 1;
    let ny = ((rect.height() / resolution).ceil() as usize).max(1) + 1;
    let dx = rect.width() / (nx - 1) as f64;
    let dy = rect.height() / (ny - 1) as f64;
    let xs: Vec<f64> = (0..nx).map(|i| rect.x0 + i as f64 * dx).collect();
    let ys: Vec<f64> = (0..ny).map(|j| rect.y0 + j as f64 * dy).collect();
    let vals = g.eval_lattice(&xs, &ys)?;
    let at = |ix: usize, iy: usize| vals[iy * nx + ix];
    let pos = |ix: usize, iy: usize| at(ix, iy) > 0.0;

    // Edge ids: horizontal edges first, then vertical.
    let h_edge = |ix: usize, iy: usize| (iy * (nx - 1) + ix) as u64;
    let v_edge = |ix: usize, iy: usize| ((nx - 1) * ny + iy * nx + ix) as u64;

    let mut crossings: HashMap<u64, [f64; 2]> = HashMap::new();
    let mut segments: Vec<(u64, u64)> = Vec::new();
    for iy in 0..ny - 1 {
        for ix in 0..nx - 1 {
            let bl = pos(ix, iy);
            let br = pos(ix + 1, iy);
            let tr = pos(ix + 1, iy + 1);
            let tl = pos(ix, iy + 1);
            let case = bl as u8 | (br as u8) << 1 | (tr as u8) << 2 | (tl as u8) << 3;
            if case == 0 || case == 15 {
                continue;
            }
            let bottom = h_edge(ix, iy);
            let top = h_edge(ix, iy + 1);
            let left = v_edge(ix, iy);
            let right = v_edge(ix + 1, iy);
            let mut cut = |edge: u64, crossings: &mut HashMap<u64, [f64; 2]>| {
                crossings.entry(edge).or_insert_with(|| {
                    let (v0, v1, p0, p1) = if edge == bottom {
                        (
                            at(ix, iy),
                            at(ix + 1, iy),
                            [xs[ix], ys[iy]],
                            [xs[ix + 1], ys[iy]],
                        )
                    } else if edge == top {
                        (
                            at(ix, iy + 1),
                            at(ix + 1, iy + 1),
                            [xs[ix], ys[iy + 1]],
                            [xs[ix + 1], ys[iy + 1]],
                        )
                    } else if edge == left {
                        (
                            at(ix, iy),
                            at(ix, iy + 1),
                            [xs[ix], ys[iy]],
                            [xs[ix], ys[iy + 1]],
                        )
                    } else {
                        (
                            at(ix + 1, iy),
                            at(ix + 1, iy + 1),
                            [xs[ix + 1], ys[iy]],
                            [xs[ix + 1], ys[iy + 1]],
                        )
                    };
                    let t = v0 / (v0 - v1);
                    [p0[0] + t * (p1[0] - p0[0]), p0[1] + t * (p1[1] - p0[1])]
                });
            };
            let mut emit = |e1: u64, e2: u64,
                            segments: &mut Vec<(u64, u64)>,
                            crossings: &mut HashMap<u64, [f64; 2]>| {
                cut(e1, crossings);
                cut(e2, crossings);
                segments.push((e1, e2));
            };
            match case {
                1 | 14 => emit(left, bottom, &mut segments, &mut crossings),
                2 | 13 => emit(bottom, right, &mut segments, &mut crossings),
                4 | 11 => emit(right, top, &mut segments, &mut crossings),
                8 | 7 => emit(top, left, &mut segments, &mut crossings),
                3 | 12 => emit(left, right, &mut segments, &mut crossings),
                6 | 9 => emit(bottom, top, &mut segments, &mut crossings),
                5 | 10 => {
                    // Saddle: resolve by the sign at the cell center.
                    let center =
                        (at(ix, iy) + at(ix + 1, iy) + at(ix + 1, iy + 1) + at(ix, iy + 1)) / 4.0;
                    let center_pos = center > 0.0;
                    if (case == 5) == center_pos {
                        emit(left, top, &mut segments, &mut crossings);
                        emit(bottom, right, &mut segments, &mut crossings);
                    } else {
                        emit(left, bottom, &mut segments, &mut crossings);
                        emit(top, right, &mut segments, &mut crossings);
                    }
                }
                _ => unreachable!(),
            }
        }
    }

    // Chain segments into polylines via edge adjacency.
    let mut adj: HashMap<u64, Vec<(usize, u64)>> = HashMap::new();
    for (i, &(e1, e2)) in segments.iter().enumerate() {
        adj.entry(e1).or_default().push((i, e2));
        adj.entry(e2).or_default().push((i, e1));
    }
    let mut used = vec![false; segments.len()];
    let mut out = Vec::new();
    let mut edge_keys: Vec<u64> = adj.keys().copied().collect();
    edge_keys.sort_unstable();

    let walk = |start: u64, used: &mut Vec<bool>| -> (Vec<u64>, bool) {
        let mut path = vec![start];
        let mut cur = start;
        loop {
            let next = adj[&cur].iter().find(|(si, _)| !used[*si]).map(|&(si, other)| {
                used[si] = true;
                other
            });
            match next {
                Some(e) => {
                    if e == start {
                        return (path, true);
                    }
                    path.push(e);
                    cur = e;
                }
                None => return (path, false),
            }
        }
    };

    // Open chains start at odd-degree edges; whatever remains is loops.
    for pass in 0..2 {
        for &e in &edge_keys {
            let deg_unused = adj[&e].iter().filter(|(si, _)| !used[*si]).count();
            if deg_unused == 0 {
                continue;
            }
            if pass == 0 && deg_unused != 1 {
                continue;
            }
            let (path, closed) = walk(e, &mut used);
            let pts: Vec<[f64; 2]> = path.iter().map(|id| crossings[id]).collect();
            if let Ok(p) = Polyline::new(pts, closed) {
                out.push(p);
            }
        }
    }
    Ok(out)
}

/// Restricted-set classification: `Plus` when `g_vals[i] > 0` and the site is
/// farther than `h` from the curves, `Minus` symmetrically, `Excluded`
/// otherwise (including exact zeros).
pub fn classify_restricted_from_values(
    g_vals: &[f64],
    sites: &[[f64; 2]],
    curves: &[Polyline],
    h: f64,
) -> Segmentation {
    assert_eq!(g_vals.len(), sites.len());
    let grid = (!curves.is_empty()).then(|| {
        let max_seg = curves
            .iter()
            .flat_map(|c| c.segments())
            .map(|(a, b)| (b[0] - a[0]).hypot(b[1] - a[1]))
            .fold(0.0f64, f64::max);
        SegmentGrid::build(curves, h.max(max_seg).max(f64::MIN_POSITIVE))
    });
    let labels = sites
        .iter()
        .zip(g_vals)
        .map(|(&p, &v)| {
            if v == 0.0 {
                return Label::Excluded;
            }
            let near = grid.as_ref().is_some_and(|g| g.any_within(p, h));
            if near {
                Label::Excluded
            } else if v > 0.0 {
                Label::Plus
            } else {
                Label::Minus
            }
        })
        .collect();
    Segmentation::new(labels)
}

/// Classify samples against the zero level set of `g_gamma` with exclusion
/// band `h`. The zero set is extracted at half the sample mesh (clamped to a
/// quarter knot spacing).
pub fn classify_restricted(
    samples: &SampleSet,
    g_gamma: &Spline2D,
    h: f64,
) -> Result<Segmentation, GeometryError> {
    let sites = samples.sites_2d().ok_or(GeometryError::DimensionMismatch {
        expected: 2,
        got: samples.dim(),
    })?;
    let grid = g_gamma.grid();
    let rect = Rect::new(grid.gx.a(), grid.gx.b(), grid.gy.a(), grid.gy.b());
    let resolution = default_zero_set_resolution(samples.mesh_h(), g_gamma);
    let curves = extract_zero_set(g_gamma, rect, resolution)?;
    let mut vals = Vec::with_capacity(sites.len());
    for &p in sites {
        vals.push(g_gamma.eval(p)?);
    }
    Ok(classify_restricted_from_values(&vals, sites, &curves, h))
}

/// Half the sample mesh, clamped so the marching lattice resolves the spline.
pub fn default_zero_set_resolution(mesh_h: f64, g: &Spline2D) -> f64 {
    let cap = g.grid().gx.delta().min(g.grid().gy.delta()) / 4.0;
    (mesh_h / 2.0).min(cap)
}

/// Argmax segmentation for the three-corner objective. A sample gets sector
/// `i` when `values[i]` strictly exceeds both others by at least its margin
/// threshold; ties and sub-margin gaps are excluded. `margins` (when present)
/// holds the per-sample threshold `τ`.
pub fn segment_by_max_from_values(v: [&[f64]; 3], margins: Option<&[f64]>) -> Segmentation {
    let n = v[0].len();
    assert!(v.iter().all(|s| s.len() == n));
    let labels = (0..n)
        .map(|i| {
            let trio = [v[0][i], v[1][i], v[2][i]];
            let mut order = [0usize, 1, 2];
            order.sort_by(|&a, &b| trio[b].total_cmp(&trio[a]));
            let gap = trio[order[0]] - trio[order[1]];
            let tau = margins.map_or(0.0, |m| m[i]);
            if gap == 0.0 || gap < tau {
                Label::Excluded
            } else {
                Label::Sector(order[0] as u8)
            }
        })
        .collect();
    Segmentation::new(labels)
}

/// Argmax segmentation of `samples` under three label splines. `band` scales
/// the exclusion margin by the local gradient of the top-two gap, so it acts
/// as a length: points within roughly `band` of a pairwise boundary drop out.
pub fn segment_by_max(
    samples: &SampleSet,
    h1: &Spline2D,
    h2: &Spline2D,
    h3: &Spline2D,
    band: f64,
) -> Result<Segmentation, GeometryError> {
    let sites = samples.sites_2d().ok_or(GeometryError::DimensionMismatch {
        expected: 2,
        got: samples.dim(),
    })?;
    let splines = [h1, h2, h3];
    let mut vals = vec![Vec::with_capacity(sites.len()); 3];
    for (s, out) in splines.iter().zip(vals.iter_mut()) {
        for &p in sites {
            out.push(s.eval(p)?);
        }
    }
    let margins = if band > 0.0 {
        let mut m = Vec::with_capacity(sites.len());
        for (i, &p) in sites.iter().enumerate() {
            let trio = [vals[0][i], vals[1][i], vals[2][i]];
            let mut order = [0usize, 1, 2];
            order.sort_by(|&a, &b| trio[b].total_cmp(&trio[a]));
            let gt = splines[order[0]].eval_gradient(p)?;
            let gs = splines[order[1]].eval_gradient(p)?;
            let scale = (gt[0] - gs[0]).hypot(gt[1] - gs[1]);
            m.push(band * scale);
        }
        Some(m)
    } else {
        None
    };
    Ok(segment_by_max_from_values(
        [&vals[0], &vals[1], &vals[2]],
        margins.as_deref(),
    ))
}

/// Mesh-intrinsic boundary exclusion: on gridded samples, a labeled sample
/// whose 4-neighborhood contains a different label becomes excluded. Scattered
/// data (no lattice structure) is left unchanged.
pub fn exclude_boundary_neighbors(
    sites: &[[f64; 2]],
    mesh_h: f64,
    seg: &Segmentation,
) -> Segmentation {
    let (mut x0, mut y0) = (f64::INFINITY, f64::INFINITY);
    for p in sites {
        x0 = x0.min(p[0]);
        y0 = y0.min(p[1]);
    }
    let mut index: HashMap<(i64, i64), usize> = HashMap::with_capacity(sites.len());
    let quant = |p: &[f64; 2]| -> Option<(i64, i64)> {
        let qx = (p[0] - x0) / mesh_h;
        let qy = (p[1] - y0) / mesh_h;
        let rx = qx.round();
        let ry = qy.round();
        ((qx - rx).abs() < 1e-6 && (qy - ry).abs() < 1e-6).then_some((rx as i64, ry as i64))
    };
    for (i, p) in sites.iter().enumerate() {
        match quant(p) {
            Some(k) => {
                index.insert(k, i);
            }
            // Not on a lattice: leave the segmentation as is.
            None => return seg.clone(),
        }
    }
    let labels = seg.labels();
    let mut out = labels.to_vec();
    for (i, p) in sites.iter().enumerate() {
        let l = labels[i];
        if l == Label::Excluded {
            continue;
        }
        let (kx, ky) = quant(p).expect("checked above");
        for (dx, dy) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)] {
            if let Some(&j) = index.get(&(kx + dx, ky + dy)) {
                let nl = labels[j];
                if nl != Label::Excluded && nl != l {
                    out[i] = Label::Excluded;
                    break;
                }
            }
        }
    }
    Segmentation::new(out)
}

/// Signed distance from every sample to `gamma`, positive on the side of
/// `side_probe`. The curve must partition the samples' bounding rectangle:
/// either closed, or with both endpoints on the rectangle boundary.
pub fn signed_distance_samples(
    gamma: &Polyline,
    side_probe: [f64; 2],
    samples: &SampleSet,
) -> Result<SampleSet, GeometryError> {
    let sites = samples.sites_2d().ok_or(GeometryError::DimensionMismatch {
        expected: 2,
        got: samples.dim(),
    })?;
    let (mut x0, mut y0) = (f64::INFINITY, f64::INFINITY);
    let (mut x1, mut y1) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in sites.iter().chain(gamma.vertices().iter()) {
        x0 = x0.min(p[0]);
        y0 = y0.min(p[1]);
        x1 = x1.max(p[0]);
        y1 = y1.max(p[1]);
    }
    let rect = Rect::new(x0, x1, y0, y1);
    let polygon = close_against_rect(gamma, &rect)?;

    let curves = std::slice::from_ref(gamma);
    let probe_dist = dist_to_polylines(side_probe, curves);
    if probe_dist < 1e-9 * rect.diagonal().max(1.0) {
        return Err(GeometryError::AmbiguousProbe);
    }
    let probe_in = point_in_polygon(side_probe, &polygon);
    let values: Vec<f64> = sites
        .iter()
        .map(|&p| {
            let d = dist_to_polylines(p, curves);
            if point_in_polygon(p, &polygon) == probe_in {
                d
            } else {
                -d
            }
        })
        .collect();
    Ok(samples.with_values(values).expect("same length"))
}

/// Close an open boundary-to-boundary curve into a polygon. The closure path
/// steps outward from each endpoint and walks an inflated rectangle, so every
/// point of the original rectangle stays strictly off the closure path and
/// the even-odd test is unambiguous for all samples.
fn close_against_rect(gamma: &Polyline, rect: &Rect) -> Result<Vec<[f64; 2]>, GeometryError> {
    if gamma.closed() {
        return Ok(gamma.vertices().to_vec());
    }
    let tol = 1e-6 * rect.diagonal().max(1.0);
    let margin = 0.1 * rect.diagonal().max(1.0);
    // Which edge an endpoint sits on (0 bottom, 1 right, 2 top, 3 left).
    let edge_of = |p: [f64; 2]| -> Option<usize> {
        let d = [
            (p[1] - rect.y0).abs(),
            (p[0] - rect.x1).abs(),
            (p[1] - rect.y1).abs(),
            (p[0] - rect.x0).abs(),
        ];
        let mut best = 0;
        for i in 1..4 {
            if d[i] < d[best] {
                best = i;
            }
        }
        (d[best] <= tol).then_some(best)
    };
    let first = gamma.vertices()[0];
    let last = *gamma.vertices().last().expect("non-empty");
    let (Some(e_first), Some(e_last)) = (edge_of(first), edge_of(last)) else {
        return Err(GeometryError::DoesNotPartition(
            "open curve endpoints must lie on the rectangle boundary".into(),
        ));
    };
    let exit = |p: [f64; 2], edge: usize| -> [f64; 2] {
        match edge {
            0 => [p[0], rect.y0 - margin],
            1 => [rect.x1 + margin, p[1]],
            2 => [p[0], rect.y1 + margin],
            _ => [rect.x0 - margin, p[1]],
        }
    };
    // Inflated rectangle carrying the closure path.
    let (ix0, ix1) = (rect.x0 - margin, rect.x1 + margin);
    let (iy0, iy1) = (rect.y0 - margin, rect.y1 + margin);
    let w = ix1 - ix0;
    let h = iy1 - iy0;
    let perimeter = 2.0 * (w + h);
    // Perimeter parameter increasing counterclockwise from (ix0, iy0).
    let param = |p: [f64; 2]| -> f64 {
        let d = [
            (p[1] - iy0).abs(),
            (p[0] - ix1).abs(),
            (p[1] - iy1).abs(),
            (p[0] - ix0).abs(),
        ];
        let mut best = 0;
        for i in 1..4 {
            if d[i] < d[best] {
                best = i;
            }
        }
        match best {
            0 => p[0] - ix0,
            1 => w + (p[1] - iy0),
            2 => w + h + (ix1 - p[0]),
            _ => 2.0 * w + h + (iy1 - p[1]),
        }
    };
    let corners = [[ix1, iy0], [ix1, iy1], [ix0, iy1], [ix0, iy0]];
    let corner_params = [w, w + h, 2.0 * w + h, 2.0 * (w + h)];

    let exit_last = exit(last, e_last);
    let exit_first = exit(first, e_first);
    let s_end = param(exit_last);
    let s_start = param(exit_first);
    let mut polygon = gamma.vertices().to_vec();
    polygon.push(exit_last);
    let mut s = s_end;
    let target = if s_start <= s_end + 1e-12 {
        s_start + perimeter
    } else {
        s_start
    };
    loop {
        // Next corner strictly ahead of s along the walk.
        let mut next: Option<(f64, [f64; 2])> = None;
        for (c, &cp) in corners.iter().zip(&corner_params) {
            let mut sp = cp;
            while sp <= s + 1e-12 {
                sp += perimeter;
            }
            if next.is_none_or(|(bs, _)| sp < bs) {
                next = Some((sp, *c));
            }
        }
        let (sp, corner) = next.expect("rectangle has corners");
        if sp >= target - 1e-12 {
            break;
        }
        polygon.push(corner);
        s = sp;
    }
    polygon.push(exit_first);
    Ok(polygon)
}

/// Even-odd test against a closed polygon given by its vertex list.
fn point_in_polygon(p: [f64; 2], polygon: &[[f64; 2]]) -> bool {
    let mut inside = false;
    let n = polygon.len();
    let mut j = n - 1;
    for i in 0..n {
        let pi = polygon[i];
        let pj = polygon[j];
        if (pi[1] > p[1]) != (pj[1] > p[1]) {
            let x_cross = pj[0] + (p[1] - pj[1]) / (pi[1] - pj[1]) * (pi[0] - pj[0]);
            if p[0] < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Discrete symmetric Hausdorff distance: the larger of the two directed
/// maxima of vertex-to-curve distances.
pub fn curve_deviation(approx: &[Polyline], truth: &[Polyline]) -> Result<f64, GeometryError> {
    if approx.is_empty() || truth.is_empty() {
        return Err(GeometryError::EmptyCurves);
    }
    let directed = |from: &[Polyline], to: &[Polyline]| -> f64 {
        from.iter()
            .flat_map(|c| c.vertices().iter())
            .map(|&v| dist_to_polylines(v, to))
            .fold(0.0f64, f64::max)
    };
    Ok(directed(approx, truth).max(directed(truth, approx)))
}
