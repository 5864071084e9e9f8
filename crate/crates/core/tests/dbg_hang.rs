use nalgebra::DMatrix;
use secest::model::circular_permutation;

#[test]
fn dbg_schur_circ() {
    let a = circular_permutation(6);
    println!("start schur");
    let eigs = a.clone().complex_eigenvalues();
    println!("eigs: {:?}", eigs.iter().map(|c| (c.re, c.im)).collect::<Vec<_>>());
}

#[test]
fn dbg_eigvec_circ() {
    let a = circular_permutation(6);
    let eigs = a.clone().complex_eigenvalues();
    for l in eigs.iter().take(2) {
        println!("eigenvector for {:?}...", l);
        let v = secest::linalg::eigenvector_for(&a, *l);
        println!("done {:?}", v[0]);
    }
}

#[test]
fn dbg_svd_obs_circ() {
    let n = 6;
    let sys = secest::model::LinearSystem::autonomous(circular_permutation(n), DMatrix::identity(n, n)).unwrap();
    let obs = secest::model::observability_matrix(&sys, n).unwrap();
    println!("svd of {}x{}", obs.nrows(), obs.ncols());
    let sv = obs.clone().singular_values();
    println!("sv: {:?}", sv.as_slice());
}
