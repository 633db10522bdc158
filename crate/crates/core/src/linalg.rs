//! Dense complex linear algebra used by every other module.
//!
//! Matrices are `nalgebra::DMatrix<Complex64>`. All matrix functions go
//! through [`herm_eig`]; there is no separate exponential or square-root
//! routine.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<C64>;

/// Maximum tolerated `max |h - h^dag|` for inputs declared Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Eigenvalues in ascending order with the matching orthonormal eigenvectors
/// stored column-wise.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl EigenSystem {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `V diag(f(values)) V^dag`.
    pub fn apply_fn<F: Fn(f64) -> C64>(&self, f: F) -> ComplexMatrix {
        let mut scaled = self.vectors.clone();
        for (k, &v) in self.values.iter().enumerate() {
            let w = f(v);
            for r in 0..scaled.nrows() {
                scaled[(r, k)] *= w;
            }
        }
        &scaled * self.vectors.adjoint()
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.apply_fn(|v| C64::new(v, 0.0))
    }
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn real(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn identity(dim: usize) -> ComplexMatrix {
    ComplexMatrix::identity(dim, dim)
}

pub fn diag_real(values: &[f64]) -> ComplexMatrix {
    let n = values.len();
    let mut m = ComplexMatrix::zeros(n, n);
    for (k, &v) in values.iter().enumerate() {
        m[(k, k)] = real(v);
    }
    m
}

/// Largest entry magnitude.
pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).norm()))
}

pub fn trace(m: &ComplexMatrix) -> C64 {
    m.diagonal().iter().copied().sum()
}

pub fn hermiticity_deviation(m: &ComplexMatrix) -> f64 {
    let n = m.nrows();
    let mut dev = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

pub fn is_finite(m: &ComplexMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

fn check_square(m: &ComplexMatrix) -> Result<()> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(())
}

fn check_hermitian(m: &ComplexMatrix) -> Result<()> {
    check_square(m)?;
    if !is_finite(m) {
        return Err(Error::NonFinite("matrix has NaN/Inf entries".into()));
    }
    let deviation = hermiticity_deviation(m);
    if deviation > HERMITIAN_TOL || !deviation.is_finite() {
        return Err(Error::NotHermitian { deviation });
    }
    Ok(())
}

/// Kronecker product `a ⊗ b`; the index of `b` runs fastest.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Hermitian eigendecomposition with eigenvalues sorted ascending.
///
/// The input is symmetrized before decomposition, so deviations below
/// [`HERMITIAN_TOL`] are averaged away. Degenerate eigenvalues keep the
/// solver's relative order.
pub fn herm_eig(h: &ComplexMatrix) -> Result<EigenSystem> {
    check_hermitian(h)?;
    let sym = (h + h.adjoint()).scale(0.5);
    let eig = SymmetricEigen::new(sym);

    let n = h.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |r, k| eig.eigenvectors[(r, order[k])]);
    Ok(EigenSystem { values, vectors })
}

/// Eigenvalues only, ascending.
pub fn herm_eigenvalues(h: &ComplexMatrix) -> Result<Vec<f64>> {
    check_hermitian(h)?;
    let sym = (h + h.adjoint()).scale(0.5);
    let mut values: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

pub fn min_eigenvalue(h: &ComplexMatrix) -> Result<f64> {
    Ok(herm_eigenvalues(h)?[0])
}

/// Groups the basis indices of `h` into the connected components of its
/// nonzero pattern. `h` is block diagonal in the permuted basis.
fn coupled_blocks(h: &ComplexMatrix) -> Vec<Vec<usize>> {
    let n = h.nrows();
    let mut parent: Vec<usize> = (0..n).collect();

    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }

    for i in 0..n {
        for j in (i + 1)..n {
            if h[(i, j)] != C64::new(0.0, 0.0) || h[(j, i)] != C64::new(0.0, 0.0) {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }

    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut block_of_root = vec![usize::MAX; n];
    for i in 0..n {
        let root = find(&mut parent, i);
        if block_of_root[root] == usize::MAX {
            block_of_root[root] = blocks.len();
            blocks.push(Vec::new());
        }
        blocks[block_of_root[root]].push(i);
    }
    blocks
}

/// `exp(-i h t)` for Hermitian `h`.
///
/// Each connected block of `h` is diagonalized on its own, which keeps large
/// sparse generators (such as system-ancilla couplings) cheap.
pub fn unitary_exp(h: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    check_hermitian(h)?;
    let n = h.nrows();
    let mut u = ComplexMatrix::zeros(n, n);
    for block in coupled_blocks(h) {
        let size = block.len();
        let sub = ComplexMatrix::from_fn(size, size, |r, c| h[(block[r], block[c])]);
        let eig = herm_eig(&sub)?;
        let sub_u = eig.apply_fn(|v| C64::from_polar(1.0, -v * t));
        for (r, &gr) in block.iter().enumerate() {
            for (c, &gc) in block.iter().enumerate() {
                u[(gr, gc)] = sub_u[(r, c)];
            }
        }
    }
    Ok(u)
}

/// Traces out the second factor of an `A ⊗ B` operator.
pub fn partial_trace_second(rho: &ComplexMatrix, dim_a: usize, dim_b: usize) -> Result<ComplexMatrix> {
    let joint = dim_a * dim_b;
    if dim_a == 0 || dim_b == 0 || rho.nrows() != joint || rho.ncols() != joint {
        return Err(Error::DimensionMismatch(format!(
            "partial trace of {}x{} matrix over {dim_a}x{dim_b} factors",
            rho.nrows(),
            rho.ncols()
        )));
    }
    Ok(ComplexMatrix::from_fn(dim_a, dim_a, |i, j| {
        (0..dim_b).map(|k| rho[(i * dim_b + k, j * dim_b + k)]).sum()
    }))
}

/// `½ Σ |λ_k|` over the eigenvalues of `rho - sigma`.
pub fn trace_distance(rho: &ComplexMatrix, sigma: &ComplexMatrix) -> Result<f64> {
    if rho.shape() != sigma.shape() {
        return Err(Error::DimensionMismatch(format!(
            "trace distance between {:?} and {:?}",
            rho.shape(),
            sigma.shape()
        )));
    }
    check_hermitian(rho)?;
    check_hermitian(sigma)?;
    let values = herm_eigenvalues(&(rho - sigma))?;
    Ok(0.5 * values.iter().map(|v| v.abs()).sum::<f64>())
}


#[cfg(test)]
mod tests {
    use super::test_util::*;
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn pauli_x() -> ComplexMatrix {
        ComplexMatrix::from_row_slice(2, 2, &[real(0.0), real(1.0), real(1.0), real(0.0)])
    }

    fn pauli_z() -> ComplexMatrix {
        diag_real(&[1.0, -1.0])
    }

    #[test]
    fn kron_examples() {
        assert_eq!(kron(&identity(2), &identity(2)), identity(4));
        assert_eq!(
            kron(&diag_real(&[1.0, 2.0]), &diag_real(&[3.0, 4.0])),
            diag_real(&[3.0, 4.0, 6.0, 8.0])
        );

        let proj0 = diag_real(&[1.0, 0.0]);
        let k = kron(&pauli_x(), &proj0);
        for r in 0..4 {
            for col in 0..4 {
                let expected = if (r, col) == (0, 2) || (r, col) == (2, 0) { 1.0 } else { 0.0 };
                assert_eq!(k[(r, col)], real(expected), "entry ({r},{col})");
            }
        }
    }

    #[test]
    fn eig_pauli_z() {
        let eig = herm_eig(&pauli_z()).unwrap();
        assert_abs_diff_eq!(eig.values[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(eig.values[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn eig_rejects_bad_input() {
        let m = ComplexMatrix::from_row_slice(2, 2, &[real(0.0), real(1.0), real(2.0), real(0.0)]);
        assert!(matches!(herm_eig(&m), Err(Error::NotHermitian { .. })));
        let rect = ComplexMatrix::zeros(2, 3);
        assert!(matches!(herm_eig(&rect), Err(Error::NotSquare { .. })));
        let nan = ComplexMatrix::from_element(2, 2, real(f64::NAN));
        assert!(matches!(herm_eig(&nan), Err(Error::NonFinite(_))));
    }

    #[test]
    fn eig_random_invariants() {
        let mut rng = rng(7);
        for trial in 0..120 {
            let n = 2 + trial % 31;
            let h = random_hermitian(&mut rng, n);
            let eig = herm_eig(&h).unwrap();
            assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
            let vv = eig.vectors.adjoint() * &eig.vectors;
            assert!(max_abs_diff(&vv, &identity(n)) <= 1e-10);
            let residual = max_abs_diff(&eig.reconstruct(), &h);
            assert!(residual <= 1e-8 * max_abs(&h).max(1.0), "n={n} residual={residual}");
        }
    }

    #[test]
    fn eig_degenerate_subspace_is_orthonormal() {
        let h = kron(&pauli_z(), &identity(3));
        let eig = herm_eig(&h).unwrap();
        assert_eq!(eig.values.len(), 6);
        let vv = eig.vectors.adjoint() * &eig.vectors;
        assert!(max_abs_diff(&vv, &identity(6)) <= 1e-10);
    }

    #[test]
    fn exp_examples() {
        let mut rng = rng(3);
        let h = random_hermitian(&mut rng, 5);
        assert!(max_abs_diff(&unitary_exp(&h, 0.0).unwrap(), &identity(5)) <= 1e-12);

        let t = 0.7;
        let u = unitary_exp(&pauli_z(), t).unwrap();
        assert_abs_diff_eq!(u[(0, 0)].re, t.cos(), epsilon = 1e-14);
        assert_abs_diff_eq!(u[(0, 0)].im, -t.sin(), epsilon = 1e-14);
        assert_abs_diff_eq!(u[(1, 1)].im, t.sin(), epsilon = 1e-14);
        assert_eq!(u[(0, 1)], real(0.0));
    }

    #[test]
    fn exp_composition_and_unitarity() {
        let mut rng = rng(11);
        for n in [2, 3, 7, 12] {
            let h = random_hermitian(&mut rng, n);
            let (t1, t2) = (0.37, 1.21);
            let lhs = unitary_exp(&h, t1).unwrap() * unitary_exp(&h, t2).unwrap();
            let rhs = unitary_exp(&h, t1 + t2).unwrap();
            assert!(max_abs_diff(&lhs, &rhs) <= 1e-9);
            let u = unitary_exp(&h, t1).unwrap();
            assert!(max_abs_diff(&(u.adjoint() * &u), &identity(n)) <= 1e-9);
        }
    }

    #[test]
    fn exp_block_split_matches_dense() {
        // Two decoupled blocks interleaved in the basis.
        let mut rng = rng(5);
        let a = random_hermitian(&mut rng, 3);
        let b = random_hermitian(&mut rng, 2);
        let perm = [0usize, 3, 1, 4, 2];
        let mut h = ComplexMatrix::zeros(5, 5);
        for (r, &pr) in perm.iter().enumerate() {
            for (col, &pc) in perm.iter().enumerate() {
                match (r < 3, col < 3) {
                    (true, true) => h[(pr, pc)] = a[(r, col)],
                    (false, false) => h[(pr, pc)] = b[(r - 3, col - 3)],
                    _ => {}
                }
            }
        }
        assert_eq!(coupled_blocks(&h).len(), 2);
        let dense = herm_eig(&h).unwrap().apply_fn(|v| C64::from_polar(1.0, -0.9 * v));
        assert!(max_abs_diff(&unitary_exp(&h, 0.9).unwrap(), &dense) <= 1e-12);
    }

    #[test]
    fn partial_trace_examples() {
        let mut rng = rng(19);
        let rho = random_density(&mut rng, 3);
        let sigma = random_density(&mut rng, 4);
        let reduced = partial_trace_second(&kron(&rho, &sigma), 3, 4).unwrap();
        assert!(max_abs_diff(&reduced, &rho) <= 1e-14);

        let mixed = identity(4).unscale(4.0);
        let half = identity(2).unscale(2.0);
        assert!(max_abs_diff(&partial_trace_second(&mixed, 2, 2).unwrap(), &half) <= 1e-15);

        // |Φ+> = (|00> + |11>)/√2
        let mut bell = ComplexMatrix::zeros(4, 4);
        for &(r, col) in &[(0, 0), (0, 3), (3, 0), (3, 3)] {
            bell[(r, col)] = real(0.5);
        }
        assert!(max_abs_diff(&partial_trace_second(&bell, 2, 2).unwrap(), &half) <= 1e-15);

        assert!(matches!(
            partial_trace_second(&identity(6), 2, 2),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn partial_trace_linear_and_trace_preserving() {
        let mut rng = rng(23);
        for _ in 0..20 {
            let x = random_matrix(&mut rng, 12);
            let y = random_matrix(&mut rng, 12);
            let alpha = c(0.3, -1.1);
            let lhs = partial_trace_second(&(&x + y.scale(1.0) * alpha), 3, 4).unwrap();
            let rhs = partial_trace_second(&x, 3, 4).unwrap()
                + partial_trace_second(&y, 3, 4).unwrap() * alpha;
            assert!(max_abs_diff(&lhs, &rhs) <= 1e-12);
            let tr = trace(&partial_trace_second(&x, 3, 4).unwrap());
            assert!((tr - trace(&x)).norm() <= 1e-12);
        }
    }

    #[test]
    fn trace_distance_examples() {
        let mut rng = rng(29);
        let rho = random_density(&mut rng, 4);
        assert!(trace_distance(&rho, &rho).unwrap() <= 1e-14);
        let d = trace_distance(&diag_real(&[1.0, 0.0]), &identity(2).unscale(2.0)).unwrap();
        assert_abs_diff_eq!(d, 0.5, epsilon = 1e-14);
        let d = trace_distance(&diag_real(&[0.8, 0.2]), &diag_real(&[0.5, 0.5])).unwrap();
        assert_abs_diff_eq!(d, 0.3, epsilon = 1e-14);
        assert!(matches!(
            trace_distance(&identity(2), &identity(3)),
            Err(Error::DimensionMismatch(_))
        ));
    }

    fn arb_matrix(n: usize) -> impl Strategy<Value = ComplexMatrix> {
        proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n * n)
            .prop_map(move |v| ComplexMatrix::from_iterator(n, n, v.into_iter().map(|(a, b)| c(a, b))))
    }

    fn arb_density(n: usize) -> impl Strategy<Value = ComplexMatrix> {
        arb_matrix(n).prop_map(|a| {
            let p = &a * a.adjoint();
            let tr = trace(&p).re.max(1e-12);
            p.unscale(tr)
        })
    }

    proptest! {
        #[test]
        fn kron_is_associative(a in arb_matrix(2), b in arb_matrix(3), c in arb_matrix(2)) {
            let lhs = kron(&kron(&a, &b), &c);
            let rhs = kron(&a, &kron(&b, &c));
            prop_assert!(max_abs_diff(&lhs, &rhs) <= 1e-12);
        }

        #[test]
        fn trace_distance_is_a_metric(r in arb_density(3), s in arb_density(3), t in arb_density(3)) {
            let rs = trace_distance(&r, &s).unwrap();
            let sr = trace_distance(&s, &r).unwrap();
            let rt = trace_distance(&r, &t).unwrap();
            let ts = trace_distance(&t, &s).unwrap();
            prop_assert!(rs >= 0.0 && rs <= 1.0 + 1e-10);
            prop_assert!((rs - sr).abs() <= 1e-10);
            prop_assert!(rs <= rt + ts + 1e-10);
        }
    }
}
