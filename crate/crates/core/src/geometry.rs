//! Geometric moments of cut cells from an implicit interface description.
//!
//! The interface is the zero level set of a function `psi`; `psi >= 0` is
//! phase [`Phase::Plus`] and `psi < 0` is [`Phase::Minus`]. Inside a cut cell
//! the interface is approximated by a polyline whose vertices are roots of
//! `psi`. Polygon and segment moments of that polyline are exact integrals,
//! and the sequence obtained by doubling the number of segments is
//! Richardson-extrapolated (Romberg) until it stagnates at roundoff.
//!
//! All moments are integrals of monomials centered at the center of the full
//! Cartesian cell.

use crate::basis::{binomials, full_len, position, MultiIndexSet};
use crate::error::{Error, Result};
use serde::Serialize;
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    fn lerp(self, other: Point, t: f64) -> Point {
        Point::new(
            self.x + t * (other.x - self.x),
            self.y + t * (other.y - self.y),
        )
    }

    fn dist(self, other: Point) -> f64 {
        (other.x - self.x).hypot(other.y - self.y)
    }
}

/// The two sides of the interface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Phase {
    Plus,
    Minus,
}

impl Phase {
    pub const BOTH: [Phase; 2] = [Phase::Plus, Phase::Minus];

    pub fn of(value: f64) -> Phase {
        if value >= 0.0 {
            Phase::Plus
        } else {
            Phase::Minus
        }
    }

    pub fn index(self) -> usize {
        match self {
            Phase::Plus => 0,
            Phase::Minus => 1,
        }
    }

    pub fn other(self) -> Phase {
        match self {
            Phase::Plus => Phase::Minus,
            Phase::Minus => Phase::Plus,
        }
    }

    /// Sign of the outward normal on the interface relative to the
    /// plus-to-minus normal.
    pub fn sign(self) -> f64 {
        match self {
            Phase::Plus => 1.0,
            Phase::Minus => -1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Phase::Plus => "+",
            Phase::Minus => "-",
        }
    }
}

/// Scalar function whose zero level set is the interface.
pub trait ImplicitFunction: Send + Sync {
    fn eval(&self, p: Point) -> f64;
}

impl<F: Fn(Point) -> f64 + Send + Sync> ImplicitFunction for F {
    fn eval(&self, p: Point) -> f64 {
        self(p)
    }
}

/// An axis-aligned square cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Square {
    pub center: Point,
    pub h: f64,
}

impl Square {
    pub fn new(center: Point, h: f64) -> Self {
        Self { center, h }
    }

    /// Corners in counterclockwise order starting at the lower left.
    pub fn corners(&self) -> [Point; 4] {
        let (c, r) = (self.center, 0.5 * self.h);
        [
            Point::new(c.x - r, c.y - r),
            Point::new(c.x + r, c.y - r),
            Point::new(c.x + r, c.y + r),
            Point::new(c.x - r, c.y + r),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CornerClass {
    UniformPlus,
    UniformMinus,
    Cut,
}

pub fn classify_corners(psi: &dyn ImplicitFunction, cell: &Square) -> CornerClass {
    let mut plus = 0;
    for c in cell.corners() {
        if Phase::of(psi.eval(c)) == Phase::Plus {
            plus += 1;
        }
    }
    match plus {
        4 => CornerClass::UniformPlus,
        0 => CornerClass::UniformMinus,
        _ => CornerClass::Cut,
    }
}

const ROOT_MAX_ITER: usize = 100;

/// Finds a root of `psi` on the segment `[a, b]`.
///
/// Secant iteration confined to a shrinking sign-change bracket; steps that
/// leave the bracket, or fail to halve it over two iterations, are replaced
/// by bisection. Converges when the step or the bracket is below `tol`
/// (a length in the coordinates of `a` and `b`).
pub fn find_face_root(psi: &dyn ImplicitFunction, a: Point, b: Point, tol: f64) -> Result<Point> {
    let t = find_root_param(|t| psi.eval(a.lerp(b, t)), a.dist(b), tol)?;
    Ok(a.lerp(b, t))
}

fn find_root_param(f: impl Fn(f64) -> f64, len: f64, tol: f64) -> Result<f64> {
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let (mut flo, mut fhi) = (f(lo), f(hi));
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::NoSignChange);
    }
    let ttol = if len > 0.0 { tol / len } else { return Ok(0.0) };
    // Secant history.
    let (mut x0, mut f0, mut x1, mut f1) = (lo, flo, hi, fhi);
    let mut width_two_ago = f64::INFINITY;
    let mut width_prev = hi - lo;
    for _ in 0..ROOT_MAX_ITER {
        let mut x = if f1 != f0 {
            x1 - f1 * (x1 - x0) / (f1 - f0)
        } else {
            f64::NAN
        };
        let width = hi - lo;
        if !(x > lo && x < hi) || width > 0.5 * width_two_ago {
            x = 0.5 * (lo + hi);
        }
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        let step = (x - x1).abs();
        if fx.signum() == flo.signum() {
            lo = x;
            flo = fx;
        } else {
            hi = x;
            fhi = fx;
        }
        x0 = x1;
        f0 = f1;
        x1 = x;
        f1 = fx;
        width_two_ago = width_prev;
        width_prev = hi - lo;
        if step <= 0.5 * ttol {
            return Ok(x);
        }
        if hi - lo <= ttol {
            return Ok(if flo.abs() < fhi.abs() { lo } else { hi });
        }
    }
    Err(Error::NoConvergence(ROOT_MAX_ITER))
}

/// Moments `\int_P (x - c)^q dV` for `|q| <= order` of a simple polygon.
///
/// Uses the Green's theorem edge formula with a double binomial sum. The
/// polygon may be given in either orientation; a clockwise polygon is
/// normalized so the returned area is positive.
pub fn polygon_moments(vertices: &[Point], order: usize, center: Point) -> Result<Vec<f64>> {
    if vertices.len() < 3 {
        return Err(Error::DegeneratePolygon("fewer than three vertices"));
    }
    let mut m = signed_polygon_moments(vertices, order, center);
    if m[0] == 0.0 {
        return Err(Error::DegeneratePolygon("zero area"));
    }
    if m[0] < 0.0 {
        m.iter_mut().for_each(|v| *v = -*v);
    }
    Ok(m)
}

/// Orientation-signed polygon moments (positive for counterclockwise).
pub fn signed_polygon_moments(vertices: &[Point], order: usize, center: Point) -> Vec<f64> {
    let mut m = vec![0.0; full_len(order)];
    let k = vertices.len();
    let mut scratch = EdgeScratch::new(order);
    for e in 0..k {
        let a = vertices[e];
        let b = vertices[(e + 1) % k];
        accumulate_green_edge(&mut m, order, a, b, center, &mut scratch);
    }
    m
}

struct EdgeScratch {
    px: Vec<f64>,
    py: Vec<f64>,
    pdx: Vec<f64>,
    pdy: Vec<f64>,
}

impl EdgeScratch {
    fn new(order: usize) -> Self {
        let n = order + 3;
        Self {
            px: vec![1.0; n],
            py: vec![1.0; n],
            pdx: vec![1.0; n],
            pdy: vec![1.0; n],
        }
    }

    fn fill(&mut self, x: f64, y: f64, dx: f64, dy: f64) {
        for k in 1..self.px.len() {
            self.px[k] = self.px[k - 1] * x;
            self.py[k] = self.py[k - 1] * y;
            self.pdx[k] = self.pdx[k - 1] * dx;
            self.pdy[k] = self.pdy[k - 1] * dy;
        }
    }
}

/// Adds `\int_{edge} x^{p+1}/(p+1) y^q dy` for every `(p, q)`.
fn accumulate_green_edge(
    m: &mut [f64],
    order: usize,
    a: Point,
    b: Point,
    c: Point,
    s: &mut EdgeScratch,
) {
    let (x0, y0) = (a.x - c.x, a.y - c.y);
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    if dy == 0.0 {
        return;
    }
    s.fill(x0, y0, dx, dy);
    let bin = binomials();
    for qy in 0..=order {
        for qx in 0..=(order - qy) {
            let p1 = qx + 1;
            let mut acc = 0.0;
            for i in 0..=p1 {
                let ci = bin.choose(p1, i) * s.px[i] * s.pdx[p1 - i];
                if ci == 0.0 {
                    continue;
                }
                for j in 0..=qy {
                    acc += ci * bin.choose(qy, j) * s.py[j] * s.pdy[qy + 1 - j]
                        / (p1 + 1 + qy - i - j) as f64;
                }
            }
            m[position(crate::basis::MultiIndex::new(qx, qy), order)] += acc / p1 as f64;
        }
    }
}

/// Line-integral moments of one straight segment.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentMoments {
    /// `\int (x - c)^q dA`
    pub area: Vec<f64>,
    /// `\int (x - c)^q n_x dA`
    pub normal_x: Vec<f64>,
    /// `\int (x - c)^q n_y dA`
    pub normal_y: Vec<f64>,
}

/// Moments along the segment `v0 -> v1`. The normal is the tangent rotated
/// 90 degrees clockwise, so it points outward for a counterclockwise region.
pub fn segment_moments(
    v0: Point,
    v1: Point,
    order: usize,
    center: Point,
) -> Result<SegmentMoments> {
    if v0 == v1 {
        return Err(Error::ZeroLengthSegment);
    }
    let n = full_len(order);
    let mut out = SegmentMoments {
        area: vec![0.0; n],
        normal_x: vec![0.0; n],
        normal_y: vec![0.0; n],
    };
    let mut scratch = EdgeScratch::new(order);
    accumulate_segment(
        &mut out.area,
        &mut out.normal_x,
        &mut out.normal_y,
        order,
        v0,
        v1,
        center,
        &mut scratch,
    );
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn accumulate_segment(
    area: &mut [f64],
    nx: &mut [f64],
    ny: &mut [f64],
    order: usize,
    a: Point,
    b: Point,
    c: Point,
    s: &mut EdgeScratch,
) {
    let (x0, y0) = (a.x - c.x, a.y - c.y);
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len = dx.hypot(dy);
    if len == 0.0 {
        return;
    }
    s.fill(x0, y0, dx, dy);
    let bin = binomials();
    for qy in 0..=order {
        for qx in 0..=(order - qy) {
            // \int_0^1 x(t)^qx y(t)^qy dt
            let mut acc = 0.0;
            for i in 0..=qx {
                let ci = bin.choose(qx, i) * s.px[i] * s.pdx[qx - i];
                if ci == 0.0 {
                    continue;
                }
                for j in 0..=qy {
                    acc += ci * bin.choose(qy, j) * s.py[j] * s.pdy[qy - j]
                        / (qx + qy + 1 - i - j) as f64;
                }
            }
            let k = position(crate::basis::MultiIndex::new(qx, qy), order);
            area[k] += acc * len;
            nx[k] += acc * dy;
            ny[k] -= acc * dx;
        }
    }
}

/// Volume moments of the full square cell of side `h` about its center.
pub fn full_cell_moments(h: f64, order: usize) -> Vec<f64> {
    MultiIndexSet::enumerate(order)
        .iter()
        .map(|q| {
            if q.both_even() {
                h.powi(q.qx as i32 + 1) * h.powi(q.qy as i32 + 1)
                    / (2f64.powi(q.order() as i32) * ((q.qx + 1) * (q.qy + 1)) as f64)
            } else {
                0.0
            }
        })
        .collect()
}

/// Grid-aligned faces of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Face {
    XLow,
    XHigh,
    YLow,
    YHigh,
}

impl Face {
    pub const ALL: [Face; 4] = [Face::XLow, Face::XHigh, Face::YLow, Face::YHigh];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Axis of the face normal: 0 for x, 1 for y.
    pub fn axis(self) -> usize {
        match self {
            Face::XLow | Face::XHigh => 0,
            Face::YLow | Face::YHigh => 1,
        }
    }

    /// Offset of the face from the cell center along its normal axis, in
    /// units of `h`.
    pub fn side(self) -> f64 {
        match self {
            Face::XLow | Face::YLow => -0.5,
            Face::XHigh | Face::YHigh => 0.5,
        }
    }

    /// Sign with which the `+axis` oriented flux through this face enters
    /// the divergence of the cell.
    pub fn divergence_sign(self) -> f64 {
        match self {
            Face::XLow | Face::YLow => -1.0,
            Face::XHigh | Face::YHigh => 1.0,
        }
    }

    /// Neighbor offset across this face.
    pub fn offset(self) -> (i64, i64) {
        match self {
            Face::XLow => (-1, 0),
            Face::XHigh => (1, 0),
            Face::YLow => (0, -1),
            Face::YHigh => (0, 1),
        }
    }

    pub fn opposite(self) -> Face {
        match self {
            Face::XLow => Face::XHigh,
            Face::XHigh => Face::XLow,
            Face::YLow => Face::YHigh,
            Face::YHigh => Face::YLow,
        }
    }
}

/// Moments of a (piece of a) grid face, oriented with a `+axis` normal.
///
/// The face lies at normal coordinate `side * h` relative to the cell center
/// and covers tangential coordinates `[lo, hi]` (absolute, in units of `h`
/// relative to the center). Returns `(area, normal_x, normal_y)`.
pub fn face_moments(
    axis: usize,
    side: f64,
    lo: f64,
    hi: f64,
    h: f64,
    order: usize,
) -> SegmentMoments {
    let n = full_len(order);
    let mut area = vec![0.0; n];
    let set = MultiIndexSet::enumerate(order);
    let s = side * h;
    let (a, b) = (lo * h, hi * h);
    for (k, q) in set.iter().enumerate() {
        let (normal_exp, tangent_exp) = if axis == 0 {
            (q.qx, q.qy)
        } else {
            (q.qy, q.qx)
        };
        let t1 = (tangent_exp + 1) as i32;
        area[k] = s.powi(normal_exp as i32) * (b.powi(t1) - a.powi(t1)) / t1 as f64;
    }
    let zeros = vec![0.0; n];
    if axis == 0 {
        SegmentMoments {
            normal_x: area.clone(),
            normal_y: zeros,
            area,
        }
    } else {
        SegmentMoments {
            normal_x: zeros,
            normal_y: area.clone(),
            area,
        }
    }
}

/// Interface polyline within one cell at the final refinement level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterfacePolyline {
    /// Vertices from the point where the cell boundary leaves phase `+` to
    /// the point where it re-enters, so the plus region lies to the left.
    pub vertices: Vec<Point>,
    pub level: u32,
}

/// Phase coverage of one grid face: the tangential interval (relative to the
/// cell center, in units of `h`) occupied by each phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FacePieces {
    pub plus: Option<(f64, f64)>,
    pub minus: Option<(f64, f64)>,
}

impl FacePieces {
    pub fn whole(phase: Phase) -> Self {
        let full = Some((-0.5, 0.5));
        match phase {
            Phase::Plus => Self {
                plus: full,
                minus: None,
            },
            Phase::Minus => Self {
                plus: None,
                minus: full,
            },
        }
    }

    pub fn get(&self, phase: Phase) -> Option<(f64, f64)> {
        match phase {
            Phase::Plus => self.plus,
            Phase::Minus => self.minus,
        }
    }

    pub fn length(&self, phase: Phase) -> f64 {
        self.get(phase).map_or(0.0, |(a, b)| b - a)
    }
}

/// Geometry of one cut cell, in physical units, centered at the cell center.
#[derive(Debug, Clone, Serialize)]
pub struct CutCellGeometry {
    pub center: Point,
    pub h: f64,
    pub order: usize,
    /// Volume moments per phase (index by [`Phase::index`]).
    pub volume: [Vec<f64>; 2],
    /// Interface area moments.
    pub eb_area: Vec<f64>,
    /// Interface moments weighted by the plus-to-minus normal, x then y.
    pub eb_normal: [Vec<f64>; 2],
    /// Face coverage per [`Face::index`].
    pub faces: [FacePieces; 4],
    pub polyline: InterfacePolyline,
    /// Number of Romberg levels used.
    pub levels: u32,
    /// Last change of the extrapolated moments, scaled by `h^{|q|+2}`.
    pub final_delta: f64,
    /// True when the Romberg sequence stagnated at roundoff before the cap.
    pub converged: bool,
}

impl CutCellGeometry {
    pub fn volume_of(&self, phase: Phase) -> f64 {
        self.volume[phase.index()][0]
    }

    pub fn volume_fraction(&self, phase: Phase) -> f64 {
        self.volume_of(phase) / (self.h * self.h)
    }

    /// Centroid of a phase region relative to the cell center.
    pub fn centroid_offset(&self, phase: Phase) -> Point {
        let m = &self.volume[phase.index()];
        Point::new(
            m[1] / m[0],
            m[position(crate::basis::MultiIndex::new(0, 1), self.order)] / m[0],
        )
    }

    /// Moments of the portion of `face` in `phase`, `+axis` normal.
    pub fn face_moments(&self, face: Face, phase: Phase, order: usize) -> Option<SegmentMoments> {
        self.faces[face.index()]
            .get(phase)
            .map(|(lo, hi)| face_moments(face.axis(), face.side(), lo, hi, self.h, order))
    }
}

/// Romberg depth cap (4096 interface segments).
pub const MAX_ROMBERG_LEVEL: u32 = 12;
/// Stagnation threshold for the extrapolated moments in cell-scaled units.
pub const ROMBERG_TOL: f64 = 1e-14;
const ROOT_TOL: f64 = 1e-14;

/// Computes the moments of a cut cell up to `order`.
pub fn cut_cell_moments(
    psi: &dyn ImplicitFunction,
    cell: &Square,
    order: usize,
) -> Result<CutCellGeometry> {
    let h = cell.h;
    let c = cell.center;
    // Work in coordinates scaled to the unit cell [-1/2, 1/2]^2.
    let local = |p: Point| psi.eval(Point::new(c.x + h * p.x, c.y + h * p.y));
    let unit = Square::new(Point::new(0.0, 0.0), 1.0);
    let corners = unit.corners();
    let phases: Vec<Phase> = corners.iter().map(|&p| Phase::of(local(p))).collect();
    let at = format!("cell centered at ({:.6}, {:.6})", c.x, c.y);

    check_edges_resolved(&local, &corners, &phases, &at)?;

    // Edge k joins corner k to corner k+1 (counterclockwise).
    let mut roots: [Option<Point>; 4] = [None; 4];
    for k in 0..4 {
        let (a, b) = (corners[k], corners[(k + 1) % 4]);
        if phases[k] != phases[(k + 1) % 4] {
            let t = find_root_param(|t| local(a.lerp(b, t)), 1.0, ROOT_TOL)?;
            roots[k] = Some(a.lerp(b, t));
        }
    }
    let crossed: Vec<usize> = (0..4).filter(|&k| roots[k].is_some()).collect();
    if crossed.len() != 2 {
        return Err(Error::UnderResolved {
            at,
            reason: format!("interface crosses {} faces", crossed.len()),
        });
    }
    // Entering plus: corner k is minus, corner k+1 plus.
    let (k_in, k_out) = if phases[crossed[0]] == Phase::Minus {
        (crossed[0], crossed[1])
    } else {
        (crossed[1], crossed[0])
    };
    let enter = roots[k_in].unwrap();
    let exit = roots[k_out].unwrap();

    let mut plus_boundary = vec![enter];
    let mut k = (k_in + 1) % 4;
    while k != (k_out + 1) % 4 {
        plus_boundary.push(corners[k]);
        k = (k + 1) % 4;
    }
    plus_boundary.push(exit);
    let mut minus_boundary = vec![exit];
    let mut k = (k_out + 1) % 4;
    while k != (k_in + 1) % 4 {
        minus_boundary.push(corners[k]);
        k = (k + 1) % 4;
    }
    minus_boundary.push(enter);

    let n_mom = full_len(order);
    let origin = Point::new(0.0, 0.0);
    let mut sampler = PolylineSampler::new(&local, exit, enter);
    let mut prev_row: Option<Vec<Vec<f64>>> = None;
    let mut prev_diag: Option<Vec<f64>> = None;
    let mut final_delta = f64::INFINITY;
    let mut converged = false;
    let mut best = Vec::new();
    let mut last_level = 1;
    let mut scratch = EdgeScratch::new(order);
    let mut deltas: Vec<f64> = Vec::new();

    for level in 1..=MAX_ROMBERG_LEVEL {
        last_level = level;
        let interior = sampler.refine_to(level)?;
        // Raw moments at this level: [vol+, vol-, area, nx, ny].
        let mut raw = vec![0.0; 5 * n_mom];
        {
            let mut poly = plus_boundary.clone();
            poly.extend(interior.iter().copied());
            let m = signed_polygon_moments(&poly, order, origin);
            raw[..n_mom].copy_from_slice(&m);
        }
        {
            let mut poly = minus_boundary.clone();
            poly.extend(interior.iter().rev().copied());
            let m = signed_polygon_moments(&poly, order, origin);
            raw[n_mom..2 * n_mom].copy_from_slice(&m);
        }
        {
            let mut chain = Vec::with_capacity(interior.len() + 2);
            chain.push(exit);
            chain.extend(interior.iter().copied());
            chain.push(enter);
            let (area, rest) = raw[2 * n_mom..].split_at_mut(n_mom);
            let (nx, ny) = rest.split_at_mut(n_mom);
            for w in chain.windows(2) {
                accumulate_segment(area, nx, ny, order, w[0], w[1], origin, &mut scratch);
            }
        }
        // Romberg row.
        let mut row = vec![raw];
        if let Some(prev_row) = &prev_row {
            for j in 1..=prev_row.len() {
                let factor = 4f64.powi(j as i32) - 1.0;
                let cur = &row[j - 1];
                let old = &prev_row[j - 1];
                let next: Vec<f64> = cur
                    .iter()
                    .zip(old)
                    .map(|(a, b)| a + (a - b) / factor)
                    .collect();
                row.push(next);
            }
        }
        let diag = row.last().unwrap().clone();
        if let Some(prev) = &prev_diag {
            final_delta = diag
                .iter()
                .zip(prev)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            deltas.push(final_delta);
            best = diag.clone();
            let stagnated =
                deltas.len() >= 2 && final_delta < 1e-13 && final_delta >= deltas[deltas.len() - 2];
            if final_delta <= ROMBERG_TOL || stagnated {
                converged = true;
                break;
            }
        } else {
            best = diag.clone();
        }
        prev_diag = Some(diag);
        prev_row = Some(row);
    }

    // Scale back to physical units.
    let set = MultiIndexSet::enumerate(order);
    let scale_vol: Vec<f64> = set.iter().map(|q| h.powi(q.order() as i32 + 2)).collect();
    let scale_area: Vec<f64> = set.iter().map(|q| h.powi(q.order() as i32 + 1)).collect();
    let chunk = |k: usize, scale: &[f64]| -> Vec<f64> {
        best[k * n_mom..(k + 1) * n_mom]
            .iter()
            .zip(scale)
            .map(|(v, s)| v * s)
            .collect()
    };

    let mut faces = [FacePieces {
        plus: None,
        minus: None,
    }; 4];
    for face in Face::ALL {
        faces[face.index()] = face_pieces(face, &corners, &phases, &roots);
    }
    let mut vertices = vec![exit];
    vertices.extend(sampler.vertices(last_level));
    vertices.push(enter);
    let vertices = vertices
        .into_iter()
        .map(|p| Point::new(c.x + h * p.x, c.y + h * p.y))
        .collect();

    Ok(CutCellGeometry {
        center: c,
        h,
        order,
        volume: [chunk(0, &scale_vol), chunk(1, &scale_vol)],
        eb_area: chunk(2, &scale_area),
        eb_normal: [chunk(3, &scale_area), chunk(4, &scale_area)],
        faces,
        polyline: InterfacePolyline {
            vertices,
            level: last_level,
        },
        levels: last_level,
        final_delta,
        converged,
    })
}

fn face_pieces(
    face: Face,
    corners: &[Point; 4],
    phases: &[Phase],
    roots: &[Option<Point>; 4],
) -> FacePieces {
    let edge = match face {
        Face::YLow => 0,
        Face::XHigh => 1,
        Face::YHigh => 2,
        Face::XLow => 3,
    };
    let a = edge;
    let b = (edge + 1) % 4;
    let tangential = |p: Point| if face.axis() == 0 { p.y } else { p.x };
    match roots[edge] {
        None => FacePieces::whole(phases[a]),
        Some(r) => {
            let t = tangential(r);
            let (pa, pb) = (phases[a], phases[b]);
            // Interval from corner a to the root belongs to phase of a.
            let (ta, tb) = (tangential(corners[a]), tangential(corners[b]));
            let first = (ta.min(t), ta.max(t));
            let second = (t.min(tb), t.max(tb));
            let mut out = FacePieces {
                plus: None,
                minus: None,
            };
            for (ph, iv) in [(pa, first), (pb, second)] {
                if iv.1 > iv.0 {
                    match ph {
                        Phase::Plus => out.plus = Some(iv),
                        Phase::Minus => out.minus = Some(iv),
                    }
                }
            }
            out
        }
    }
}

const EDGE_SAMPLES: usize = 8;

/// Rejects edges the interface crosses more than once.
fn check_edges_resolved(
    local: &impl Fn(Point) -> f64,
    corners: &[Point; 4],
    phases: &[Phase],
    at: &str,
) -> Result<()> {
    for k in 0..4 {
        let (a, b) = (corners[k], corners[(k + 1) % 4]);
        let mut changes = 0;
        let mut prev = phases[k];
        for s in 1..=EDGE_SAMPLES {
            let t = s as f64 / EDGE_SAMPLES as f64;
            let ph = if s == EDGE_SAMPLES {
                phases[(k + 1) % 4]
            } else {
                Phase::of(local(a.lerp(b, t)))
            };
            if ph != prev {
                changes += 1;
            }
            prev = ph;
        }
        if changes > 1 {
            return Err(Error::UnderResolved {
                at: at.to_string(),
                reason: format!("edge {k} crossed {changes} times"),
            });
        }
    }
    Ok(())
}

/// Returns true if sampling shows the interface crossing the edge `a -> b`
/// more than once.
pub fn edge_has_hidden_crossing(psi: &dyn ImplicitFunction, a: Point, b: Point) -> bool {
    let mut prev = Phase::of(psi.eval(a));
    let mut changes = 0;
    for s in 1..=EDGE_SAMPLES {
        let ph = Phase::of(psi.eval(a.lerp(b, s as f64 / EDGE_SAMPLES as f64)));
        changes += (ph != prev) as usize;
        prev = ph;
    }
    changes > 1
}

/// Interface vertices between two boundary roots, refined by bisection of the
/// chord parameter. Vertex `k` at level `n` sits on the line perpendicular to
/// the chord through parameter `k / 2^n`.
struct PolylineSampler<'a, F: Fn(Point) -> f64> {
    psi: &'a F,
    start: Point,
    end: Point,
    /// Vertices indexed by numerator at the finest level computed so far.
    points: Vec<Point>,
    level: u32,
}

impl<'a, F: Fn(Point) -> f64> PolylineSampler<'a, F> {
    fn new(psi: &'a F, start: Point, end: Point) -> Self {
        Self {
            psi,
            start,
            end,
            points: vec![start, end],
            level: 0,
        }
    }

    /// Refines to `level` and returns the interior vertices in order.
    fn refine_to(&mut self, level: u32) -> Result<Vec<Point>> {
        while self.level < level {
            let n_new = 1usize << (self.level + 1);
            let mut next = Vec::with_capacity(n_new + 1);
            for k in 0..n_new {
                if k % 2 == 0 {
                    next.push(self.points[k / 2]);
                } else {
                    let t = k as f64 / n_new as f64;
                    next.push(self.vertex_at(t)?);
                }
            }
            next.push(self.end);
            self.points = next;
            self.level += 1;
        }
        Ok(self.vertices(level))
    }

    fn vertices(&self, level: u32) -> Vec<Point> {
        let stride = 1usize << (self.level - level.min(self.level));
        let n = 1usize << level.min(self.level);
        (1..n).map(|k| self.points[k * stride]).collect()
    }

    fn vertex_at(&self, t: f64) -> Result<Point> {
        let base = self.start.lerp(self.end, t);
        let (dx, dy) = (self.end.x - self.start.x, self.end.y - self.start.y);
        let len = dx.hypot(dy);
        if len == 0.0 {
            return Ok(base);
        }
        let dir = Point::new(-dy / len, dx / len);
        let f0 = (self.psi)(base);
        if f0 == 0.0 {
            return Ok(base);
        }
        // Parameter range keeping base + s * dir inside the unit cell.
        let (smin, smax) = clip_line(base, dir);
        let steps = 32;
        let mut best: Option<(f64, f64)> = None;
        for side in [1.0, -1.0] {
            let limit = if side > 0.0 { smax } else { -smin };
            if limit <= 0.0 {
                continue;
            }
            let mut prev_s: f64 = 0.0;
            for k in 1..=steps {
                let s = side * limit * k as f64 / steps as f64;
                let fs = (self.psi)(Point::new(base.x + s * dir.x, base.y + s * dir.y));
                if fs == 0.0 || fs.signum() != f0.signum() {
                    if best.map_or(true, |(a, _)| prev_s.abs() < a.abs()) {
                        best = Some((prev_s, s));
                    }
                    break;
                }
                prev_s = s;
            }
        }
        let (s0, s1) = best.ok_or_else(|| Error::UnderResolved {
            at: "interface polyline".into(),
            reason: "no interface point on a chord normal".into(),
        })?;
        let a = Point::new(base.x + s0 * dir.x, base.y + s0 * dir.y);
        let b = Point::new(base.x + s1 * dir.x, base.y + s1 * dir.y);
        let u = find_root_param(|u| (self.psi)(a.lerp(b, u)), a.dist(b), ROOT_TOL)?;
        Ok(a.lerp(b, u))
    }
}

/// Parameter interval of `base + s * dir` inside `[-1/2, 1/2]^2`.
fn clip_line(base: Point, dir: Point) -> (f64, f64) {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for (p, d) in [(base.x, dir.x), (base.y, dir.y)] {
        if d.abs() < 1e-300 {
            continue;
        }
        let a = (-0.5 - p) / d;
        let b = (0.5 - p) / d;
        lo = lo.max(a.min(b));
        hi = hi.min(a.max(b));
    }
    (lo, hi)
}

/// Writes per-cell moments as CSV rows `i,j,kind,qx,qy,value`.
pub fn write_moments_csv<'a, W: Write>(
    out: W,
    cells: impl IntoIterator<Item = ((i64, i64), &'a CutCellGeometry)>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["i", "j", "kind", "qx", "qy", "value"])?;
    for ((i, j), g) in cells {
        let set = MultiIndexSet::enumerate(g.order);
        let kinds: [(&str, &Vec<f64>); 5] = [
            ("volume+", &g.volume[0]),
            ("volume-", &g.volume[1]),
            ("eb_area", &g.eb_area),
            ("eb_normal_x", &g.eb_normal[0]),
            ("eb_normal_y", &g.eb_normal[1]),
        ];
        for (kind, v) in kinds {
            for (k, q) in set.iter().enumerate() {
                w.write_record(&[
                    i.to_string(),
                    j.to_string(),
                    kind.to_string(),
                    q.qx.to_string(),
                    q.qy.to_string(),
                    format!("{:.17e}", v[k]),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
