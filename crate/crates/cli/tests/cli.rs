use std::process::Command;

fn ebfv() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ebfv"))
}

#[test]
fn solve_writes_tables_with_the_documented_header() {
    let dir = tempfile::tempdir().unwrap();
    let out = ebfv()
        .args([
            "solve",
            "--order",
            "2",
            "--n",
            "32,64",
            "--geometry",
            "cosine",
            "--test",
            "coeff-ratio",
        ])
        .args(["--beta-ratio", "1e-2,1", "--seed", "5", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let errors =
        std::fs::read_to_string(dir.path().join("coeff-ratio_cosine_p2_errors.csv")).unwrap();
    let mut lines = errors.lines();
    assert_eq!(
        lines.next().unwrap(),
        "n,ratio,trunc_l1,trunc_linf,sol_l1,sol_linf,rate_trunc_l1,rate_trunc_linf,rate_sol_l1,rate_sol_linf"
    );
    assert_eq!(lines.count(), 4);
    for suffix in ["mesh.csv", "solve.csv", "classes.csv", "config.json"] {
        assert!(
            dir.path()
                .join(format!("coeff-ratio_cosine_p2_{suffix}"))
                .exists(),
            "{suffix}"
        );
    }
    let config: String =
        std::fs::read_to_string(dir.path().join("coeff-ratio_cosine_p2_config.json")).unwrap();
    assert!(config.contains("\"seed\": 5") || config.contains("\"seed\":5"));
}

#[test]
fn identical_invocations_produce_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    for sub in ["a", "b"] {
        let out = ebfv()
            .args([
                "solve",
                "--order",
                "4",
                "--n",
                "32",
                "--geometry",
                "ellipse",
                "--solver",
                "gmres",
                "--tol",
                "1e-10",
                "--out",
            ])
            .arg(dir.path().join(sub))
            .output()
            .unwrap();
        assert!(out.status.success());
    }
    let name = "convergence_ellipse_p4_errors.csv";
    assert_eq!(
        std::fs::read(dir.path().join("a").join(name)).unwrap(),
        std::fs::read(dir.path().join("b").join(name)).unwrap()
    );
}

#[test]
fn invalid_settings_fail_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["--order", "3"],
        vec!["--n", "48"],
        vec!["--beta-ratio", "1e6"],
        vec!["--geometry", "torus"],
        vec!["--test", "sweep"],
        vec!["--solver", "cg"],
    ] {
        let out = ebfv()
            .arg("solve")
            .args(&args)
            .arg("--out")
            .arg(dir.path())
            .output()
            .unwrap();
        assert!(!out.status.success(), "{args:?}");
        assert!(!out.stderr.is_empty(), "{args:?}");
    }
}

#[test]
fn stand_in_geometry_is_announced() {
    let dir = tempfile::tempdir().unwrap();
    let out = ebfv()
        .args([
            "solve",
            "--n",
            "32",
            "--geometry",
            "annulus",
            "--test",
            "solution-jump",
            "--scale-ratio",
            "10",
            "--out",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("stand-in"));
    let config =
        std::fs::read_to_string(dir.path().join("solution-jump_annulus_p2_config.json")).unwrap();
    assert!(config.contains("stand-in"));
}
