use ebfv_bench::{ellipse_problem, CASES};

#[test]
fn fixtures_build_consistent_problems() {
    let (p, n) = CASES[0];
    let pr = ellipse_problem(p, n);
    assert_eq!(pr.mesh.n, n);
    assert_eq!(pr.exact.len(), pr.rhs.len());
    assert_eq!(pr.rhs.len(), pr.system.dof_count());
}
