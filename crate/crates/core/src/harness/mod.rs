//! Manufactured-solution convergence harness.
//!
//! A [`Problem`] couples a mesh, the assembled system and exact data. The
//! suite runner sweeps grid sizes and coefficient ratios and writes error
//! tables, mesh summaries and solver reports as CSV.

mod catalog;
mod fields;
mod suite;

pub use catalog::{
    geometry_catalog, GeometryName, ELLIPSE_AXES, STAR_AMPLITUDE, STAR_LOBES, STAR_RADIUS,
};
pub use fields::{AnalyticField, Manufactured, PhaseFields, Taylor, SLOTS};
pub use suite::{run_suite, ClassRow, ErrorRow, ErrorTable, MeshRow, SolveRow, SuiteOutput};

use crate::mesh::{BoundarySpec, CellClass, CellIndex, Domain, Mesh, VolumeKey};
use crate::stencil::{Coefficients, JumpData, ScalarField};
use crate::system::{LinearSystem, SolveOptions, SolveReport};
use crate::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

/// Default seed of the published runs.
pub const DEFAULT_SEED: u64 = 20_240_917;

/// Floor enforced on `alpha` and `beta` before any ratio is applied.
pub const COEFFICIENT_FLOOR: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestKind {
    Convergence,
    CoeffRatio,
    SolutionJump,
    HomogeneousJump,
}

impl TestKind {
    pub const ALL: [TestKind; 4] = [
        Self::Convergence,
        Self::CoeffRatio,
        Self::SolutionJump,
        Self::HomogeneousJump,
    ];
}

impl FromStr for TestKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "convergence" => Ok(Self::Convergence),
            "coeff-ratio" => Ok(Self::CoeffRatio),
            "solution-jump" => Ok(Self::SolutionJump),
            "homogeneous-jump" => Ok(Self::HomogeneousJump),
            other => Err(Error::InvalidConfig(format!("unknown test '{other}'"))),
        }
    }
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Convergence => "convergence",
            Self::CoeffRatio => "coeff-ratio",
            Self::SolutionJump => "solution-jump",
            Self::HomogeneousJump => "homogeneous-jump",
        })
    }
}

/// One suite: an order, a geometry, grid sizes and a ratio sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestConfig {
    pub order: usize,
    pub sizes: Vec<usize>,
    pub geometry: GeometryName,
    pub test: TestKind,
    /// `beta^- / beta^+` values; swept by `coeff-ratio`.
    pub beta_ratios: Vec<f64>,
    /// `s^- / s^+` values; swept by `solution-jump`.
    pub scale_ratios: Vec<f64>,
    pub seed: u64,
    pub solver: SolveOptions,
    /// Grid of the reference solution of `homogeneous-jump`.
    pub reference_n: usize,
}

impl TestConfig {
    pub fn new(order: usize, sizes: Vec<usize>, geometry: GeometryName, test: TestKind) -> Self {
        Self {
            order,
            sizes,
            geometry,
            test,
            beta_ratios: vec![1.0],
            scale_ratios: vec![1.0],
            seed: DEFAULT_SEED,
            solver: SolveOptions::default(),
            reference_n: 256,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if ![2, 4, 6].contains(&self.order) {
            return bad(format!("order {} is not one of 2, 4, 6", self.order));
        }
        if self.sizes.is_empty() {
            return bad("no grid sizes".into());
        }
        for &n in self.sizes.iter().chain(std::iter::once(&self.reference_n)) {
            if !n.is_power_of_two() || !(32..=256).contains(&n) {
                return bad(format!("n = {n} must be a power of two in [32, 256]"));
            }
        }
        if self.test == TestKind::HomogeneousJump
            && self.sizes.iter().any(|&n| n >= self.reference_n)
        {
            return bad(format!(
                "measured grids must be coarser than the reference n = {}",
                self.reference_n
            ));
        }
        for (name, list) in [("beta", &self.beta_ratios), ("scale", &self.scale_ratios)] {
            if list.is_empty() {
                return bad(format!("empty {name} ratio list"));
            }
            if let Some(r) = list.iter().find(|r| !(1e-4..=1e4).contains(*r)) {
                return bad(format!("{name} ratio {r} outside [1e-4, 1e4]"));
            }
        }
        if !(self.solver.tol > 0.0 && self.solver.tol < 1.0) {
            return bad(format!(
                "solver tolerance {} outside (0, 1)",
                self.solver.tol
            ));
        }
        Ok(())
    }

    /// `(beta ratio, scale ratio)` pairs the test sweeps.
    pub fn sweep(&self) -> Vec<(f64, f64)> {
        match self.test {
            TestKind::CoeffRatio => self
                .beta_ratios
                .iter()
                .map(|&b| (b, self.scale_ratios[0]))
                .collect(),
            TestKind::SolutionJump => self
                .scale_ratios
                .iter()
                .map(|&s| (self.beta_ratios[0], s))
                .collect(),
            _ => vec![(self.beta_ratios[0], self.scale_ratios[0])],
        }
    }
}

impl TestConfig {
    /// Fields of one sweep point. `coeff-ratio` uses `alpha = 0` and constant
    /// `beta+ = 1`, `beta- = ratio`; `solution-jump` and `homogeneous-jump`
    /// keep the random `beta` and set `alpha = 0` for the former.
    pub fn fields(&self, beta_ratio: f64, scale_ratio: f64) -> Manufactured {
        let mut m = manufactured_fields(self.seed, beta_ratio, scale_ratio);
        match self.test {
            TestKind::CoeffRatio => {
                for (ph, b) in m.phases.iter_mut().zip([1.0, beta_ratio]) {
                    ph.alpha = AnalyticField::constant(0.0);
                    ph.beta = AnalyticField::constant(b);
                }
            }
            TestKind::SolutionJump => {
                for ph in &mut m.phases {
                    ph.alpha = AnalyticField::constant(0.0);
                }
            }
            TestKind::Convergence | TestKind::HomogeneousJump => {}
        }
        m
    }
}

/// Six independent random fields from `seed`: `u+, u-, alpha+, alpha-, beta+,
/// beta-`. `u-` is multiplied by `scale_ratio`, `beta-` by `beta_ratio`.
pub fn manufactured_fields(seed: u64, beta_ratio: f64, scale_ratio: f64) -> Manufactured {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = [
        AnalyticField::random(&mut rng, 1.0),
        AnalyticField::random(&mut rng, scale_ratio),
    ];
    let mut positive = || AnalyticField::random(&mut rng, 1.0).with_minimum(COEFFICIENT_FLOOR);
    let alpha = [positive(), positive()];
    let beta = [positive(), positive().multiplied(beta_ratio)];
    let [u0, u1] = u;
    let [a0, a1] = alpha;
    let [b0, b1] = beta;
    Manufactured {
        phases: [
            PhaseFields {
                u: u0,
                alpha: a0,
                beta: b0,
            },
            PhaseFields {
                u: u1,
                alpha: a1,
                beta: b1,
            },
        ],
    }
}

/// Maximum `|t|` per cell class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ClassMaxima {
    pub regular: f64,
    pub irregular: f64,
    pub cut: f64,
}

impl ClassMaxima {
    pub fn interface(&self) -> f64 {
        self.irregular.max(self.cut)
    }
}

/// `(L1, Linf)` with `L1 = sum |v| |V|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Norms {
    pub l1: f64,
    pub linf: f64,
}

impl Norms {
    pub fn of(values: &[f64], volumes: &[f64]) -> Norms {
        assert_eq!(values.len(), volumes.len());
        let l1 = values.iter().zip(volumes).map(|(v, w)| v.abs() * w).sum();
        let linf = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Norms { l1, linf }
    }
}

/// A discretized manufactured problem on one grid.
pub struct Problem {
    pub mesh: Mesh,
    pub system: LinearSystem,
    pub fields: Manufactured,
    /// Exact cell averages of `u` on the dofs.
    pub exact: Vec<f64>,
    /// `<f> + r`, with `r` the ghost and jump contributions.
    pub rhs: Vec<f64>,
    pub jumps: JumpData,
}

impl Problem {
    /// Builds the mesh and system. `homogeneous` zeroes the jump data and
    /// uses `u` itself as the source, so the exact solution is unknown.
    /// Without a reaction term a fully periodic box leaves constants in the
    /// null space; such problems get Dirichlet walls from the exact `u`.
    pub fn build(
        geometry: GeometryName,
        order: usize,
        n: usize,
        fields: Manufactured,
        homogeneous: bool,
    ) -> Result<Problem> {
        let bc = if homogeneous {
            geometry.reference_boundary()
        } else if geometry.boundary() == BoundarySpec::PERIODIC
            && fields.phases.iter().all(|p| p.alpha.is_zero())
        {
            BoundarySpec::DIRICHLET
        } else {
            geometry.boundary()
        };
        let mesh = Mesh::build(&geometry, Domain::default(), n, order, bc)?;
        let system = {
            let fs: Vec<Box<dyn ScalarField + '_>> = fields
                .phases
                .iter()
                .flat_map(|p| [&p.alpha, &p.beta])
                .map(|f| Box::new(move |q| f.value(q)) as Box<dyn ScalarField + '_>)
                .collect();
            let coeffs = Coefficients {
                alpha: [fs[0].as_ref(), fs[2].as_ref()],
                beta: [fs[1].as_ref(), fs[3].as_ref()],
            };
            LinearSystem::assemble(&mesh, &coeffs)?
        };
        let exact: Vec<f64> = mesh
            .dof_keys()
            .iter()
            .map(|&k| fields.average_u(&mesh, k))
            .collect();
        let ghosts: Vec<f64> = system
            .ghost_keys
            .iter()
            .map(|&k| fields.average_u(&mesh, k))
            .collect();
        let jumps = if homogeneous {
            JumpData::default()
        } else {
            fields.jump_data(&mesh)
        };
        let shift = system.rhs_shift(&ghosts, &jumps);
        let rhs = mesh
            .dof_keys()
            .iter()
            .zip(&shift)
            .map(|(&k, r)| if homogeneous { fields.average_u(&mesh, k) } else { fields.average_f(&mesh, k) } + r)
            .collect();
        Ok(Problem {
            mesh,
            system,
            fields,
            exact,
            rhs,
            jumps,
        })
    }

    /// Physical volume of every dof.
    pub fn volumes(&self) -> Vec<f64> {
        self.mesh
            .dof_keys()
            .iter()
            .map(|&k| self.mesh.volume(k).expect("dof volume"))
            .collect()
    }

    /// `t = L u^e - (<f> + r)`.
    pub fn truncation(&self) -> Vec<f64> {
        self.system
            .apply(&self.exact)
            .iter()
            .zip(&self.rhs)
            .map(|(a, b)| a - b)
            .collect()
    }

    pub fn class_maxima(&self, values: &[f64]) -> ClassMaxima {
        let mut out = ClassMaxima::default();
        for (&key, v) in self.mesh.dof_keys().iter().zip(values) {
            let slot = match self.mesh.cell(key.cell).map(|c| c.class()) {
                Some(CellClass::Regular) => &mut out.regular,
                Some(CellClass::Irregular) => &mut out.irregular,
                Some(CellClass::Cut) => &mut out.cut,
                _ => continue,
            };
            *slot = slot.max(v.abs());
        }
        out
    }

    pub fn solve(&self, opts: &SolveOptions) -> Result<(Vec<f64>, SolveReport)> {
        self.system.solve(&self.rhs, opts)
    }

    /// Volume-weighted restriction of dof values onto a coarser grid of
    /// `coarse.n` cells; coarse volumes without fine support are `None`.
    pub fn restrict(&self, values: &[f64], coarse: &Mesh) -> Vec<Option<f64>> {
        let factor = (self.mesh.n / coarse.n) as i64;
        let mut acc: HashMap<VolumeKey, (f64, f64)> = HashMap::new();
        for (&key, v) in self.mesh.dof_keys().iter().zip(values) {
            let vol = self.mesh.volume(key).expect("dof volume");
            let parent = VolumeKey {
                cell: CellIndex::new(key.cell.i.div_euclid(factor), key.cell.j.div_euclid(factor)),
                phase: key.phase,
            };
            let e = acc.entry(parent).or_insert((0.0, 0.0));
            e.0 += vol * v;
            e.1 += vol;
        }
        coarse
            .dof_keys()
            .iter()
            .map(|k| acc.get(k).filter(|(_, w)| *w > 0.0).map(|(s, w)| s / w))
            .collect()
    }
}
