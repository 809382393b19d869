//! Acceptance report: one PASS/FAIL line per primary criterion.
//!
//! Exits non-zero on any failure only when `EBFV_ACCEPTANCE_STRICT=1`, so a
//! workspace test run still reaches the remaining suites.

mod common;

use common::*;
use ebfv::basis::{position, MultiIndexSet};
use ebfv::geometry::{cut_cell_moments, full_cell_moments, Phase, Point, Square};
use ebfv::harness::{run_suite, GeometryName, TestConfig, TestKind};
use ebfv::mesh::{BoundarySpec, CellIndex, Domain, Mesh, VolumeKey};
use ebfv::stencil::{build_stencils, Coefficients};
use ebfv::system::LinearSystem;
use std::f64::consts::PI;
use std::time::Instant;

struct Line {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn geometry_exactness() -> Line {
    // A circle inside one cell crosses no face, which the single-cell
    // routine rejects as under-resolved; the unit cell is subdivided 16 x 16
    // and the plus volumes of cut and full subcells are summed.
    let circle = |q: Point| 0.16 - q.x * q.x - q.y * q.y;
    let unit = Mesh::build(
        &circle,
        Domain { lo: -0.5, hi: 0.5 },
        16,
        2,
        BoundarySpec::DIRICHLET,
    )
    .unwrap();
    let area: f64 = unit
        .dof_keys()
        .iter()
        .filter(|k| k.phase == Phase::Plus)
        .map(|&k| unit.volume(k).unwrap())
        .sum();
    let area_err = (area - PI * 0.16).abs() / (PI * 0.16);
    let rejected = cut_cell_moments(&circle, &Square::new(Point::new(0.0, 0.0), 1.0), 4).is_err();

    let p = 6;
    let ellipse = GeometryName::Ellipse;
    let mesh = Mesh::build(&ellipse, Domain::default(), 64, p, BoundarySpec::PERIODIC).unwrap();
    let q = mesh.moment_order;
    let full = full_cell_moments(mesh.h, q);
    let mut worst = 0.0f64;
    let mut cells = 0;
    for (_, g) in mesh.cut_cells() {
        cells += 1;
        for k in MultiIndexSet::enumerate(q).iter() {
            let i = position(k, q);
            let scale = mesh.h.powi(k.order() as i32 + 2);
            worst = worst.max((g.volume[0][i] + g.volume[1][i] - full[i]).abs() / scale);
        }
    }
    Line {
        name: "geometry exactness",
        pass: area_err <= 1e-12 && worst <= 1e-12 && rejected,
        detail: format!(
            "circle area on 16x16 subcells rel err {area_err:.2e} (<= 1e-12); phase sum over {cells} cut cells, moments to order {q}: {worst:.2e} h^(|q|+2) (<= 1e-12)"
        ),
    }
}

fn oracle_ellipse(q: Point) -> f64 {
    1.0 - (q.x / 0.55).powi(2) - (q.y / 0.37).powi(2)
}

fn polynomial_exactness() -> Line {
    let mut pass = true;
    let mut parts = Vec::new();
    for p in [2, 4, 6] {
        let mesh = Mesh::build(
            &oracle_ellipse,
            Domain::default(),
            32,
            p,
            BoundarySpec::DIRICHLET,
        )
        .unwrap();
        let mut r = rng(101 + p as u64);
        let fields = Fields {
            phases: [PhaseData::random(&mut r, p), PhaseData::random(&mut r, p)],
        };
        let closures = fields.closures();
        let sys = LinearSystem::assemble(&mesh, &coefficients(&closures)).unwrap();
        let worst = worst_by_class(&operator_errors(&mesh, &sys, &fields));
        for (class, err) in ["regular", "irregular", "cut"].iter().zip(worst) {
            let err = err.unwrap_or(0.0);
            pass &= err <= 1e-9;
            parts.push(format!("P{p} {class} {err:.1e}"));
        }
    }
    Line {
        name: "polynomial exactness",
        pass,
        detail: format!("{} (each <= 1e-9)", parts.join(", ")),
    }
}

fn five_point_oracle() -> Line {
    let n = 32;
    let mesh = Mesh::build(
        &|_: Point| 1.0,
        Domain::default(),
        n,
        2,
        BoundarySpec::PERIODIC,
    )
    .unwrap();
    let zero = |_: Point| 0.0;
    let one = |_: Point| 1.0;
    let sys = LinearSystem::assemble(
        &mesh,
        &Coefficients {
            alpha: [&zero, &zero],
            beta: [&one, &one],
        },
    )
    .unwrap();
    let h2 = mesh.h * mesh.h;
    let dof = |i: i64, j: i64| {
        mesh.dof(VolumeKey {
            cell: CellIndex::new(i, j),
            phase: Phase::Plus,
        })
        .unwrap()
    };
    let mut worst = 0.0f64;
    for (i, j) in [(0, 0), (7, 19), (31, 31)] {
        let (cols, vals) = sys.l.row(dof(i, j));
        let mut expect = vec![(dof(i, j), 4.0)];
        for (di, dj) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            expect.push((
                dof((i + di).rem_euclid(n as i64), (j + dj).rem_euclid(n as i64)),
                -1.0,
            ));
        }
        for (c, v) in cols.iter().zip(vals) {
            let want = expect.iter().find(|e| e.0 == *c).map_or(0.0, |e| e.1);
            worst = worst.max((v * h2 - want).abs());
        }
        for (c, want) in &expect {
            if !cols.contains(c) {
                worst = worst.max(want.abs());
            }
        }
    }
    Line {
        name: "regular-template oracle",
        pass: worst <= 1e-12,
        detail: format!("max |h^2 L_ij - five-point weight| = {worst:.1e} (<= 1e-12)"),
    }
}

fn conservation() -> Line {
    let p = 4;
    let zero = |_: Point| 0.0;
    let bp = |q: Point| 1.5 + 0.5 * (PI * q.x).sin() * (PI * q.y).cos();
    let bm = |q: Point| 2.0 - 0.3 * q.y;
    let coeffs = Coefficients {
        alpha: [&zero, &zero],
        beta: [&bp, &bm],
    };

    let single = Mesh::build(
        &|_: Point| 1.0,
        Domain::default(),
        32,
        p,
        BoundarySpec::PERIODIC,
    )
    .unwrap();
    let sys = LinearSystem::assemble(&single, &coeffs).unwrap();
    let mut r = rng(5);
    let u: Vec<f64> = (0..sys.dof_count())
        .map(|_| rand::Rng::gen_range(&mut r, -1.0..1.0))
        .collect();
    let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    let h2 = single.h * single.h;
    let total: f64 = sys
        .apply(&u)
        .iter()
        .zip(&sys.fractions)
        .map(|(l, f)| l * f * h2)
        .sum();
    let single_rel = total.abs() / norm;

    let mesh = Mesh::build(
        &GeometryName::Ellipse,
        Domain::default(),
        32,
        p,
        BoundarySpec::PERIODIC,
    )
    .unwrap();
    let stencils = build_stencils(&mesh, &coeffs).unwrap();
    let sys = LinearSystem::from_stencils(&mesh, &stencils).unwrap();
    let u: Vec<f64> = (0..sys.dof_count())
        .map(|_| rand::Rng::gen_range(&mut r, -1.0..1.0))
        .collect();
    let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    let at = |k: VolumeKey| u[mesh.dof(k).unwrap()];
    let total: f64 = sys
        .apply(&u)
        .iter()
        .zip(&sys.fractions)
        .map(|(l, f)| l * f * h2)
        .sum();
    let eb: f64 = stencils
        .iter()
        .filter_map(|vs| vs.eb.as_ref().map(|s| -vs.key.phase.sign() * s.apply(at)))
        .sum();
    let two_rel = (total - eb).abs() / norm;
    Line {
        name: "conservation telescoping",
        pass: single_rel <= 1e-11 && two_rel <= 1e-10,
        detail: format!(
            "single phase |sum V Lu|/|u| = {single_rel:.1e} (<= 1e-11); interface |sum V Lu - EB total|/|u| = {two_rel:.1e} (<= 1e-10)"
        ),
    }
}

fn convergence(out: &mut Vec<Line>) {
    let mut pass = true;
    let mut parts = Vec::new();
    let mut localization = None;
    for p in [2usize, 4, 6] {
        let cfg = TestConfig::new(
            p,
            vec![32, 64, 128],
            GeometryName::Ellipse,
            TestKind::Convergence,
        );
        let res = run_suite(&cfg, None).unwrap();
        let row = res.table.row(128, 1.0).unwrap();
        let pf = p as f64;
        let rates = [
            ("sol L1", row.rate_sol_l1, pf - 0.4),
            ("sol Linf", row.rate_sol_linf, pf - 0.4),
            ("trunc L1", row.rate_trunc_l1, pf - 0.4),
            ("trunc Linf", row.rate_trunc_linf, pf - 1.4),
        ];
        let mut segment = Vec::new();
        for (label, got, min) in rates {
            let got = got.unwrap_or(f64::NAN);
            let ok = got >= min;
            pass &= ok;
            segment.push(format!("{label} {got:.2}{}", if ok { "" } else { "!" }));
        }
        parts.push(format!("P{p}: {}", segment.join(" ")));
        if p == 4 {
            let c = res.classes.iter().find(|c| c.n == 128).unwrap();
            localization = Some((c.regular, c.irregular.max(c.cut)));
        }
    }
    out.push(Line {
        name: "convergence rates",
        pass,
        detail: format!(
            "64->128 on ellipse: {} (need >= P-0.4, trunc Linf >= P-1.4; ! marks a miss)",
            parts.join("; ")
        ),
    });
    let (regular, interface) = localization.unwrap();
    out.push(Line {
        name: "truncation localization",
        pass: regular <= 1e-2 * interface,
        detail: format!(
            "P4 n128: max|t| regular {regular:.2e}, cut+irregular {interface:.2e}, ratio {:.1e} (<= 1e-2)",
            regular / interface
        ),
    });
}

fn coefficient_ratio() -> Line {
    let mut cfg = TestConfig::new(2, vec![64], GeometryName::Cosine, TestKind::CoeffRatio);
    cfg.beta_ratios = vec![1e-4, 1e-2, 1.0, 1e2, 1e4];
    let res = run_suite(&cfg, None).unwrap();
    let base = res.table.row(64, 1.0).unwrap().sol_l1;
    let worst = res
        .table
        .rows
        .iter()
        .map(|r| r.sol_l1)
        .fold(0.0f64, f64::max);
    Line {
        name: "coefficient-ratio robustness",
        pass: worst <= 10.0 * base,
        detail: format!(
            "cosine P2 n64: max L1 {worst:.2e} = {:.2} x ratio-1 L1 {base:.2e} (<= 10)",
            worst / base
        ),
    }
}

fn solution_jump() -> Line {
    let mut cfg = TestConfig::new(2, vec![128], GeometryName::Annulus, TestKind::SolutionJump);
    cfg.scale_ratios = vec![1e1, 1e2, 1e3, 1e4];
    let res = run_suite(&cfg, None).unwrap();
    let pts: Vec<(f64, f64)> = res
        .table
        .rows
        .iter()
        .map(|r| (r.ratio.log10(), r.sol_linf.log10()))
        .collect();
    let n = pts.len() as f64;
    let (mx, my) = (
        pts.iter().map(|p| p.0).sum::<f64>() / n,
        pts.iter().map(|p| p.1).sum::<f64>() / n,
    );
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    Line {
        name: "solution-jump scaling",
        pass: (slope - 1.0).abs() <= 0.15,
        detail: format!(
            "star stand-in P2 n128, s-/s+ 1e1..1e4: slope of log Linf {slope:.3} (1 +- 0.15)"
        ),
    }
}

fn main() {
    let start = Instant::now();
    let mut lines = vec![
        geometry_exactness(),
        polynomial_exactness(),
        five_point_oracle(),
    ];
    convergence(&mut lines);
    lines.push(conservation());
    lines.push(coefficient_ratio());
    lines.push(solution_jump());

    println!();
    for l in &lines {
        println!(
            "{} {}: {}",
            if l.pass { "PASS" } else { "FAIL" },
            l.name,
            l.detail
        );
    }
    let failed = lines.iter().filter(|l| !l.pass).count();
    println!(
        "acceptance: {} passed, {failed} failed in {:.1}s",
        lines.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed > 0 && std::env::var("EBFV_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
