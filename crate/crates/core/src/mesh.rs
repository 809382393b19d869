//! Cartesian mesh over a square domain: cell classification, phase volumes,
//! ghost layers, degrees of freedom and stencil neighborhoods.

use crate::basis::full_len;
use crate::error::{Error, Result};
use crate::geometry::{
    classify_corners, cut_cell_moments, edge_has_hidden_crossing, full_cell_moments, CornerClass,
    CutCellGeometry, Face, FacePieces, ImplicitFunction, Phase, Point, Square,
};
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;

/// Volume fraction below which a cut cell is demoted to a full cell.
pub const DEGENERATE_FRACTION: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Boundary {
    Periodic,
    /// Ghost layers filled with known values.
    Dirichlet,
}

/// Boundary kind per axis (both sides of an axis share it).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BoundarySpec {
    pub x: Boundary,
    pub y: Boundary,
}

impl BoundarySpec {
    pub const PERIODIC: BoundarySpec = BoundarySpec {
        x: Boundary::Periodic,
        y: Boundary::Periodic,
    };
    pub const DIRICHLET: BoundarySpec = BoundarySpec {
        x: Boundary::Dirichlet,
        y: Boundary::Dirichlet,
    };

    pub fn axis(&self, axis: usize) -> Boundary {
        if axis == 0 {
            self.x
        } else {
            self.y
        }
    }
}

/// The square `[lo, hi]^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Domain {
    pub lo: f64,
    pub hi: f64,
}

impl Default for Domain {
    fn default() -> Self {
        Self { lo: -1.0, hi: 1.0 }
    }
}

/// Canonical cell index. Periodic axes are wrapped into `[0, n)`; Dirichlet
/// axes extend into the ghost layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct CellIndex {
    pub i: i64,
    pub j: i64,
}

impl CellIndex {
    pub const fn new(i: i64, j: i64) -> Self {
        Self { i, j }
    }
}

/// One phase volume of one cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct VolumeKey {
    pub cell: CellIndex,
    pub phase: Phase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum CellClass {
    Regular,
    Irregular,
    Cut,
    Ghost,
}

#[derive(Debug, Clone)]
pub enum Cell {
    Full { phase: Phase, class: CellClass },
    Cut(Box<CutCellGeometry>),
}

impl Cell {
    pub fn class(&self) -> CellClass {
        match self {
            Cell::Full { class, .. } => *class,
            Cell::Cut(_) => CellClass::Cut,
        }
    }

    pub fn has_phase(&self, phase: Phase) -> bool {
        match self {
            Cell::Full { phase: p, .. } => *p == phase,
            Cell::Cut(_) => true,
        }
    }

    pub fn geometry(&self) -> Option<&CutCellGeometry> {
        match self {
            Cell::Cut(g) => Some(g),
            Cell::Full { .. } => None,
        }
    }
}

/// Member of a stencil neighborhood.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Member {
    /// Offset from the center cell, unwrapped.
    pub offset: (i64, i64),
    pub key: VolumeKey,
    /// Distance between full-cell centers in units of `h`.
    pub delta: f64,
}

/// Same-phase volumes in the `(2P+1) x (2P+1)` square around a cell; the
/// center volume comes first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Neighborhood {
    pub center: VolumeKey,
    pub members: Vec<Member>,
}

/// Offsets with Manhattan norm at most `p / 2`.
pub fn regular_footprint(p: usize) -> Vec<(i64, i64)> {
    let r = (p / 2) as i64;
    let mut out = Vec::new();
    for dj in -r..=r {
        for di in -r..=r {
            if di.abs() + dj.abs() <= r {
                out.push((di, dj));
            }
        }
    }
    out
}

/// Order of the geometric moments the stencils and data need for order `p`.
pub fn moment_order(p: usize) -> usize {
    2 * p
}

pub fn check_order(p: usize) -> Result<()> {
    match p {
        2 | 4 | 6 => Ok(()),
        _ => Err(Error::InvalidOrder(p)),
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub domain: Domain,
    pub n: usize,
    pub h: f64,
    pub order: usize,
    pub moment_order: usize,
    pub bc: BoundarySpec,
    ghost: [i64; 2],
    cells: Vec<Cell>,
    full_moments: Vec<f64>,
    dofs: Vec<[Option<usize>; 2]>,
    dof_keys: Vec<VolumeKey>,
    /// Cut cells demoted to full cells because one phase was negligible.
    pub demoted: usize,
}

impl Mesh {
    pub fn build(
        psi: &dyn ImplicitFunction,
        domain: Domain,
        n: usize,
        order: usize,
        bc: BoundarySpec,
    ) -> Result<Mesh> {
        check_order(order)?;
        if n < 4 * order {
            return Err(Error::DomainTooSmall { n, min: 4 * order });
        }
        let h = (domain.hi - domain.lo) / n as f64;
        let q = moment_order(order);
        let ghost = [bc.x, bc.y].map(|b| {
            if b == Boundary::Dirichlet {
                order as i64
            } else {
                0
            }
        });
        let (nx, ny) = (n as i64 + 2 * ghost[0], n as i64 + 2 * ghost[1]);
        let center = |i: i64, j: i64| {
            Point::new(
                domain.lo + (i as f64 + 0.5) * h,
                domain.lo + (j as f64 + 0.5) * h,
            )
        };

        let indices: Vec<(i64, i64)> = (0..ny)
            .flat_map(|jj| (0..nx).map(move |ii| (ii - ghost[0], jj - ghost[1])))
            .collect();
        let built: Vec<Result<(Cell, bool)>> = indices
            .par_iter()
            .map(|&(i, j)| {
                let sq = Square::new(center(i, j), h);
                let inside = (0..n as i64).contains(&i) && (0..n as i64).contains(&j);
                let ghost_class = if inside {
                    CellClass::Regular
                } else {
                    CellClass::Ghost
                };
                match classify_corners(psi, &sq) {
                    CornerClass::UniformPlus => Ok((
                        Cell::Full {
                            phase: Phase::Plus,
                            class: ghost_class,
                        },
                        false,
                    )),
                    CornerClass::UniformMinus => Ok((
                        Cell::Full {
                            phase: Phase::Minus,
                            class: ghost_class,
                        },
                        false,
                    )),
                    CornerClass::Cut => {
                        if !inside {
                            return Err(Error::UnderResolved {
                                at: format!("ghost cell ({i}, {j})"),
                                reason: "interface enters the ghost layer".into(),
                            });
                        }
                        let g = cut_cell_moments(psi, &sq, q).map_err(|e| match e {
                            Error::UnderResolved { reason, .. } => Error::UnderResolved {
                                at: format!("cell ({i}, {j})"),
                                reason,
                            },
                            other => other,
                        })?;
                        let fp = g.volume_fraction(Phase::Plus);
                        let fm = g.volume_fraction(Phase::Minus);
                        if fp < DEGENERATE_FRACTION || fm < DEGENERATE_FRACTION {
                            let phase = if fp >= fm { Phase::Plus } else { Phase::Minus };
                            Ok((
                                Cell::Full {
                                    phase,
                                    class: CellClass::Regular,
                                },
                                true,
                            ))
                        } else {
                            Ok((Cell::Cut(Box::new(g)), false))
                        }
                    }
                }
            })
            .collect();
        let mut cells = Vec::with_capacity(built.len());
        let mut demoted = 0;
        for r in built {
            let (c, d) = r?;
            demoted += d as usize;
            cells.push(c);
        }

        let mut mesh = Mesh {
            domain,
            n,
            h,
            order,
            moment_order: q,
            bc,
            ghost,
            cells,
            full_moments: full_cell_moments(h, q),
            dofs: Vec::new(),
            dof_keys: Vec::new(),
            demoted,
        };
        mesh.check_hidden_crossings(psi)?;
        mesh.classify();
        mesh.number_dofs();
        Ok(mesh)
    }

    /// Rejects grid edges that the interface crosses twice between two
    /// same-sign corners; such crossings are invisible to corner tests.
    fn check_hidden_crossings(&self, psi: &dyn ImplicitFunction) -> Result<()> {
        let n = self.n as i64;
        let lo = self.domain.lo;
        let h = self.h;
        let node = |i: i64, j: i64| Point::new(lo + i as f64 * h, lo + j as f64 * h);
        let bad = (0..=n).into_par_iter().find_map_any(|a| {
            for b in 0..n {
                for (p, q) in [(node(a, b), node(a, b + 1)), (node(b, a), node(b + 1, a))] {
                    if edge_has_hidden_crossing(psi, p, q) {
                        return Some((p, q));
                    }
                }
            }
            None
        });
        match bad {
            Some((p, q)) => Err(Error::UnderResolved {
                at: format!(
                    "grid edge ({:.4}, {:.4})-({:.4}, {:.4})",
                    p.x, p.y, q.x, q.y
                ),
                reason: "interface crosses an edge twice".into(),
            }),
            None => Ok(()),
        }
    }

    fn classify(&mut self) {
        let foot = regular_footprint(self.order);
        let n = self.n as i64;
        let mut irregular = Vec::new();
        for j in 0..n {
            for i in 0..n {
                let c = CellIndex::new(i, j);
                let Cell::Full { phase, .. } = self.cell(c).unwrap() else {
                    continue;
                };
                let phase = *phase;
                let regular = foot
                    .iter()
                    .all(|&(di, dj)| match self.cell_at(i + di, j + dj) {
                        Some(Cell::Full { phase: p, .. }) => *p == phase,
                        _ => false,
                    });
                if !regular {
                    irregular.push(c);
                }
            }
        }
        for c in irregular {
            let k = self.linear(c);
            if let Cell::Full { class, .. } = &mut self.cells[k] {
                *class = CellClass::Irregular;
            }
        }
    }

    fn number_dofs(&mut self) {
        let n = self.n as i64;
        self.dofs = vec![[None, None]; self.cells.len()];
        for j in 0..n {
            for i in 0..n {
                let c = CellIndex::new(i, j);
                let k = self.linear(c);
                for phase in Phase::BOTH {
                    if self.cells[k].has_phase(phase) {
                        self.dofs[k][phase.index()] = Some(self.dof_keys.len());
                        self.dof_keys.push(VolumeKey { cell: c, phase });
                    }
                }
            }
        }
    }

    fn linear(&self, c: CellIndex) -> usize {
        let nx = self.n as i64 + 2 * self.ghost[0];
        ((c.i + self.ghost[0]) + nx * (c.j + self.ghost[1])) as usize
    }

    /// Wraps periodic axes; returns `None` outside the ghost layers.
    pub fn canonical(&self, i: i64, j: i64) -> Option<CellIndex> {
        let n = self.n as i64;
        let fix = |v: i64, axis: usize| -> Option<i64> {
            match self.bc.axis(axis) {
                Boundary::Periodic => Some(v.rem_euclid(n)),
                Boundary::Dirichlet => (-self.ghost[axis]..n + self.ghost[axis])
                    .contains(&v)
                    .then_some(v),
            }
        };
        Some(CellIndex::new(fix(i, 0)?, fix(j, 1)?))
    }

    pub fn cell(&self, c: CellIndex) -> Option<&Cell> {
        self.canonical(c.i, c.j)
            .map(|c| &self.cells[self.linear(c)])
    }

    pub fn cell_at(&self, i: i64, j: i64) -> Option<&Cell> {
        self.cell(CellIndex::new(i, j))
    }

    /// Center of the (possibly unwrapped) cell `(i, j)`.
    pub fn center(&self, i: i64, j: i64) -> Point {
        Point::new(
            self.domain.lo + (i as f64 + 0.5) * self.h,
            self.domain.lo + (j as f64 + 0.5) * self.h,
        )
    }

    /// Interior cells in row-major order.
    pub fn interior(&self) -> impl Iterator<Item = CellIndex> + '_ {
        let n = self.n as i64;
        (0..n).flat_map(move |j| (0..n).map(move |i| CellIndex::new(i, j)))
    }

    /// Interior and ghost cells.
    pub fn all_cells(&self) -> impl Iterator<Item = CellIndex> + '_ {
        let (gx, gy) = (self.ghost[0], self.ghost[1]);
        let n = self.n as i64;
        (-gy..n + gy).flat_map(move |j| (-gx..n + gx).map(move |i| CellIndex::new(i, j)))
    }

    pub fn ghost_width(&self, axis: usize) -> i64 {
        self.ghost[axis]
    }

    pub fn is_ghost(&self, c: CellIndex) -> bool {
        matches!(
            self.cell(c),
            Some(Cell::Full {
                class: CellClass::Ghost,
                ..
            })
        )
    }

    /// Physical volume moments (about the cell center) of one phase volume.
    pub fn volume_moments(&self, key: VolumeKey) -> Option<&[f64]> {
        match self.cell(key.cell)? {
            Cell::Full { phase, .. } => (*phase == key.phase).then_some(&self.full_moments[..]),
            Cell::Cut(g) => Some(&g.volume[key.phase.index()][..]),
        }
    }

    pub fn volume(&self, key: VolumeKey) -> Option<f64> {
        self.volume_moments(key).map(|m| m[0])
    }

    /// Face coverage of a cell (interval per phase in units of `h`).
    pub fn face_pieces(&self, c: CellIndex, face: Face) -> Option<FacePieces> {
        match self.cell(c)? {
            Cell::Full { phase, .. } => Some(FacePieces::whole(*phase)),
            Cell::Cut(g) => Some(g.faces[face.index()]),
        }
    }

    pub fn dof(&self, key: VolumeKey) -> Option<usize> {
        let c = self.canonical(key.cell.i, key.cell.j)?;
        self.dofs[self.linear(c)][key.phase.index()]
    }

    pub fn dof_count(&self) -> usize {
        self.dof_keys.len()
    }

    pub fn dof_key(&self, dof: usize) -> VolumeKey {
        self.dof_keys[dof]
    }

    pub fn dof_keys(&self) -> &[VolumeKey] {
        &self.dof_keys
    }

    pub fn cut_cells(&self) -> impl Iterator<Item = (CellIndex, &CutCellGeometry)> + '_ {
        self.interior()
            .filter_map(move |c| self.cell(c).and_then(Cell::geometry).map(|g| (c, g)))
    }

    /// Same-phase volumes within Chebyshev distance `P` of `center`.
    pub fn neighborhood(&self, center: CellIndex, phase: Phase) -> Result<Neighborhood> {
        let p = self.order as i64;
        let mut members = Vec::with_capacity(((2 * p + 1) * (2 * p + 1)) as usize);
        for dj in -p..=p {
            for di in -p..=p {
                let Some(c) = self.canonical(center.i + di, center.j + dj) else {
                    continue;
                };
                if !self.cells[self.linear(c)].has_phase(phase) {
                    continue;
                }
                let m = Member {
                    offset: (di, dj),
                    key: VolumeKey { cell: c, phase },
                    delta: ((di * di + dj * dj) as f64).sqrt(),
                };
                if (di, dj) == (0, 0) {
                    members.insert(0, m);
                } else {
                    members.push(m);
                }
            }
        }
        let needed = full_len(self.order);
        if members.len() < needed || members[0].offset != (0, 0) {
            return Err(Error::InsufficientNeighbors {
                i: center.i,
                j: center.j,
                found: members.len(),
                needed,
            });
        }
        Ok(Neighborhood {
            center: VolumeKey {
                cell: center,
                phase,
            },
            members,
        })
    }

    pub fn summary(&self) -> MeshSummary {
        let mut s = MeshSummary {
            n: self.n,
            h: self.h,
            order: self.order,
            moment_order: self.moment_order,
            regular: 0,
            irregular: 0,
            cut: 0,
            ghost: 0,
            demoted: self.demoted,
            dofs: self.dof_count(),
            max_romberg_level: 0,
            romberg_unconverged: 0,
        };
        for c in self.all_cells() {
            match self.cell(c).unwrap() {
                Cell::Full {
                    class: CellClass::Regular,
                    ..
                } => s.regular += 1,
                Cell::Full {
                    class: CellClass::Irregular,
                    ..
                } => s.irregular += 1,
                Cell::Full {
                    class: CellClass::Ghost,
                    ..
                } => s.ghost += 1,
                Cell::Full { .. } => {}
                Cell::Cut(g) => {
                    s.cut += 1;
                    s.max_romberg_level = s.max_romberg_level.max(g.levels);
                    s.romberg_unconverged += (!g.converged) as usize;
                }
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeshSummary {
    pub n: usize,
    pub h: f64,
    pub order: usize,
    pub moment_order: usize,
    pub regular: usize,
    pub irregular: usize,
    pub cut: usize,
    pub ghost: usize,
    pub demoted: usize,
    pub dofs: usize,
    pub max_romberg_level: u32,
    pub romberg_unconverged: usize,
}

impl MeshSummary {
    pub fn write_csv<W: Write>(rows: &[MeshSummary], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}
