use super::{ClassMaxima, Norms, Problem, TestConfig, TestKind};
use crate::mesh::MeshSummary;
use crate::system::SolveReport;
use crate::Result;
use serde::Serialize;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

/// One grid of an error table. Missing values (no truncation error for
/// reference-based runs, no rate on the coarsest grid) are written empty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorRow {
    pub n: usize,
    pub ratio: f64,
    pub trunc_l1: Option<f64>,
    pub trunc_linf: Option<f64>,
    pub sol_l1: f64,
    pub sol_linf: f64,
    pub rate_trunc_l1: Option<f64>,
    pub rate_trunc_linf: Option<f64>,
    pub rate_sol_l1: Option<f64>,
    pub rate_sol_linf: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ErrorTable {
    pub rows: Vec<ErrorRow>,
}

fn rate(coarse: Option<f64>, fine: Option<f64>, n0: usize, n1: usize) -> Option<f64> {
    let (c, f) = (coarse?, fine?);
    (c > 0.0 && f > 0.0).then(|| (c / f).ln() / (n1 as f64 / n0 as f64).ln())
}

impl ErrorTable {
    /// Appends a row, computing rates against the last row with the same
    /// ratio on a coarser grid.
    pub fn push(&mut self, mut row: ErrorRow) {
        if let Some(prev) = self
            .rows
            .iter()
            .rev()
            .find(|r| r.ratio == row.ratio && r.n < row.n)
        {
            let (n0, n1) = (prev.n, row.n);
            row.rate_trunc_l1 = rate(prev.trunc_l1, row.trunc_l1, n0, n1);
            row.rate_trunc_linf = rate(prev.trunc_linf, row.trunc_linf, n0, n1);
            row.rate_sol_l1 = rate(Some(prev.sol_l1), Some(row.sol_l1), n0, n1);
            row.rate_sol_linf = rate(Some(prev.sol_linf), Some(row.sol_linf), n0, n1);
        }
        self.rows.push(row);
    }

    pub fn row(&self, n: usize, ratio: f64) -> Option<&ErrorRow> {
        self.rows.iter().find(|r| r.n == n && r.ratio == ratio)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeshRow {
    pub geometry: &'static str,
    pub ratio: f64,
    pub n: usize,
    pub regular: usize,
    pub irregular: usize,
    pub cut: usize,
    pub ghost: usize,
    pub demoted: usize,
    pub dofs: usize,
    pub max_romberg_level: u32,
    pub romberg_unconverged: usize,
}

impl MeshRow {
    fn new(geometry: &'static str, ratio: f64, s: &MeshSummary) -> Self {
        Self {
            geometry,
            ratio,
            n: s.n,
            regular: s.regular,
            irregular: s.irregular,
            cut: s.cut,
            ghost: s.ghost,
            demoted: s.demoted,
            dofs: s.dofs,
            max_romberg_level: s.max_romberg_level,
            romberg_unconverged: s.romberg_unconverged,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveRow {
    pub geometry: &'static str,
    pub ratio: f64,
    pub n: usize,
    pub dofs: usize,
    pub nnz: usize,
    pub method: crate::system::SolverKind,
    pub iterations: usize,
    pub residual: f64,
    pub fallback: bool,
}

impl SolveRow {
    fn new(geometry: &'static str, ratio: f64, n: usize, r: &SolveReport) -> Self {
        Self {
            geometry,
            ratio,
            n,
            dofs: r.dofs,
            nnz: r.nnz,
            method: r.method,
            iterations: r.iterations,
            residual: r.residual,
            fallback: r.fallback,
        }
    }
}

/// Largest truncation error per cell class. `cut_scaled` is the cut-cell
/// maximum of `|V|/h^2 * t`, free of the `1/fraction` growth in tiny cells.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassRow {
    pub n: usize,
    pub ratio: f64,
    pub regular: f64,
    pub irregular: f64,
    pub cut: f64,
    pub cut_scaled: f64,
}

impl ClassRow {
    fn new(n: usize, ratio: f64, m: ClassMaxima, scaled: ClassMaxima) -> Self {
        Self {
            n,
            ratio,
            regular: m.regular,
            irregular: m.irregular,
            cut: m.cut,
            cut_scaled: scaled.cut,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SuiteOutput {
    pub table: ErrorTable,
    pub meshes: Vec<MeshRow>,
    pub solves: Vec<SolveRow>,
    pub classes: Vec<ClassRow>,
    pub files: Vec<PathBuf>,
}

impl SuiteOutput {
    fn write(&mut self, config: &TestConfig, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let stem = format!("{}_{}_p{}", config.test, config.geometry, config.order);
        let mut open = |suffix: &str| -> Result<BufWriter<File>> {
            let path = dir.join(format!("{stem}_{suffix}"));
            let f = File::create(&path)?;
            self.files.push(path);
            Ok(BufWriter::new(f))
        };
        let (errors, meshes, solves, classes, json) = (
            open("errors.csv")?,
            open("mesh.csv")?,
            open("solve.csv")?,
            open("classes.csv")?,
            open("config.json")?,
        );
        self.table.write_csv(errors)?;
        write_rows(&self.meshes, meshes)?;
        write_rows(&self.solves, solves)?;
        write_rows(&self.classes, classes)?;
        #[derive(Serialize)]
        struct Meta<'a> {
            #[serde(flatten)]
            config: &'a TestConfig,
            geometry_label: &'static str,
            geometry_stand_in: bool,
        }
        let meta = Meta {
            config,
            geometry_label: config.geometry.label(),
            geometry_stand_in: config.geometry.is_stand_in(),
        };
        let mut json = json;
        serde_json::to_writer_pretty(&mut json, &meta)?;
        json.write_all(b"\n")?;
        json.flush()?;
        Ok(())
    }
}

fn write_rows<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Runs every grid and ratio of `config`; writes CSV files into `out` when
/// given.
pub fn run_suite(config: &TestConfig, out: Option<&Path>) -> Result<SuiteOutput> {
    config.validate()?;
    let mut result = SuiteOutput::default();
    let label = config.geometry.label();
    let homogeneous = config.test == TestKind::HomogeneousJump;
    for (beta_ratio, scale_ratio) in config.sweep() {
        let ratio = if config.test == TestKind::SolutionJump {
            scale_ratio
        } else {
            beta_ratio
        };
        let fields = config.fields(beta_ratio, scale_ratio);
        let reference = if homogeneous {
            let p = Problem::build(
                config.geometry,
                config.order,
                config.reference_n,
                fields.clone(),
                true,
            )?;
            let (u, report) = p.solve(&config.solver)?;
            result
                .meshes
                .push(MeshRow::new(label, ratio, &p.mesh.summary()));
            result
                .solves
                .push(SolveRow::new(label, ratio, config.reference_n, &report));
            Some((p, u))
        } else {
            None
        };
        for &n in &config.sizes {
            let p = Problem::build(
                config.geometry,
                config.order,
                n,
                fields.clone(),
                homogeneous,
            )?;
            let (u, report) = p.solve(&config.solver)?;
            let volumes = p.volumes();
            result
                .meshes
                .push(MeshRow::new(label, ratio, &p.mesh.summary()));
            result.solves.push(SolveRow::new(label, ratio, n, &report));
            let (trunc, error) = match &reference {
                Some((fine, uf)) => {
                    let restricted = fine.restrict(uf, &p.mesh);
                    let e: Vec<f64> = restricted
                        .iter()
                        .zip(&u)
                        .map(|(r, u)| r.map_or(0.0, |r| r - u))
                        .collect();
                    (None, e)
                }
                None => {
                    let t = p.truncation();
                    let scaled: Vec<f64> = t
                        .iter()
                        .zip(&p.system.fractions)
                        .map(|(t, k)| t * k)
                        .collect();
                    result.classes.push(ClassRow::new(
                        n,
                        ratio,
                        p.class_maxima(&t),
                        p.class_maxima(&scaled),
                    ));
                    let e: Vec<f64> = p.exact.iter().zip(&u).map(|(a, b)| a - b).collect();
                    (Some(Norms::of(&t, &volumes)), e)
                }
            };
            let sol = Norms::of(&error, &volumes);
            result.table.push(ErrorRow {
                n,
                ratio,
                trunc_l1: trunc.map(|t| t.l1),
                trunc_linf: trunc.map(|t| t.linf),
                sol_l1: sol.l1,
                sol_linf: sol.linf,
                rate_trunc_l1: None,
                rate_trunc_linf: None,
                rate_sol_l1: None,
                rate_sol_linf: None,
            });
        }
    }
    if let Some(dir) = out {
        result.write(config, dir)?;
    }
    Ok(result)
}
