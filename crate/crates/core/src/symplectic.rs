//! Symplectic linear algebra.
//!
//! The building blocks used everywhere else in the crate: the canonical
//! symplectic matrix, SPD square roots, the orthogonal block reduction of a
//! skew-symmetric matrix, the Williamson decomposition with its symplectic
//! eigenvalues, and seeded random symplectic matrices for synthesis.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{PhError, PhResult};
use crate::tol;

/// Symmetric positive-definite matrix of size 2n x 2n.
///
/// Construction validates symmetry (relative) and positive-definiteness
/// (smallest eigenvalue above `tol::PD_MIN_EIG_REL` of the largest);
/// the stored entries are exactly symmetrized.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    n: usize,
    entries: DMatrix<f64>,
}

impl SpdMatrix {
    pub fn new(entries: DMatrix<f64>) -> PhResult<Self> {
        let dim = check_even_square(&entries)?;
        let norm = entries.norm();
        let asym = (&entries - entries.transpose()).norm();
        if asym > tol::STRUCTURE_REL * norm.max(1.0) {
            return Err(PhError::NotSymmetric {
                residual: asym / norm.max(1.0),
                tol: tol::STRUCTURE_REL,
            });
        }
        let sym = (&entries + entries.transpose()) * 0.5;
        let eigs = SymmetricEigen::new(sym.clone()).eigenvalues;
        let min_eig = eigs.min();
        let max_eig = eigs.max();
        if !(min_eig > tol::PD_MIN_EIG_REL * max_eig && max_eig > 0.0) {
            return Err(PhError::NotPositiveDefinite { min_eig, max_eig });
        }
        Ok(Self {
            n: dim / 2,
            entries: sym,
        })
    }

    /// Mode count n (half the matrix dimension).
    pub fn n(&self) -> usize {
        self.n
    }

    /// Full dimension 2n.
    pub fn dim(&self) -> usize {
        2 * self.n
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Inverse, computed from the eigendecomposition (stays SPD).
    pub fn inverse(&self) -> SpdMatrix {
        let eig = SymmetricEigen::new(self.entries.clone());
        let inv_diag = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l));
        let m = &eig.eigenvectors * inv_diag * eig.eigenvectors.transpose();
        SpdMatrix {
            n: self.n,
            entries: (&m + m.transpose()) * 0.5,
        }
    }
}

/// Real symplectic matrix: S^T J S = J to tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticMatrix {
    n: usize,
    entries: DMatrix<f64>,
}

impl SymplecticMatrix {
    pub fn new(entries: DMatrix<f64>) -> PhResult<Self> {
        let dim = check_even_square(&entries)?;
        let n = dim / 2;
        let j = jmat(n);
        let residual = (entries.transpose() * &j * &entries - &j).norm();
        let scale = (entries.norm_squared() / dim as f64).max(1.0);
        if residual > tol::STRUCTURE_REL * scale {
            return Err(PhError::NotSymplectic {
                residual,
                tol: tol::STRUCTURE_REL * scale,
            });
        }
        Ok(Self { n, entries })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Inverse via the symplectic identity S^{-1} = J^T S^T J.
    pub fn inverse(&self) -> SymplecticMatrix {
        let j = jmat(self.n);
        let inv = j.transpose() * self.entries.transpose() * &j;
        SymplecticMatrix {
            n: self.n,
            entries: inv,
        }
    }
}

/// Result of the Williamson decomposition M = S^T blockdiag(D, D) S.
#[derive(Debug, Clone)]
pub struct WilliamsonForm {
    /// Diagonalizing symplectic matrix.
    pub s: SymplecticMatrix,
    /// Symplectic eigenvalues, ascending.
    pub d: DVector<f64>,
    /// Condition number of the SPD square root used internally; values above
    /// `tol::WILLIAMSON_COND_WARN` flag a poorly conditioned input.
    pub cond_k: f64,
}

impl WilliamsonForm {
    pub fn is_ill_conditioned(&self) -> bool {
        self.cond_k > tol::WILLIAMSON_COND_WARN
    }
}

/// The canonical symplectic matrix J = [[0, I_n], [-I_n, 0]].
pub fn canonical_j(n: usize) -> PhResult<DMatrix<f64>> {
    if n == 0 {
        return Err(PhError::InvalidArgument(
            "mode count n must be at least 1".into(),
        ));
    }
    Ok(jmat(n))
}

/// Unchecked J builder for internal callers that already validated n.
pub(crate) fn jmat(n: usize) -> DMatrix<f64> {
    debug_assert!(n >= 1);
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = 1.0;
        j[(n + i, i)] = -1.0;
    }
    j
}

/// Symmetric square root of an SPD matrix: K with K K = M.
pub fn spd_sqrt(m: &SpdMatrix) -> PhResult<SpdMatrix> {
    let eig = SymmetricEigen::new(m.entries().clone());
    let sqrt_diag = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
    let k = &eig.eigenvectors * sqrt_diag * eig.eigenvectors.transpose();
    SpdMatrix::new(k)
}

/// Orthogonal block reduction of a nonsingular skew-symmetric matrix.
///
/// Returns `(U, w)` with U orthogonal, w positive ascending and
/// `U^T W U = [[0, diag(w)], [-diag(w), 0]]`.
///
/// The pairing is built on the SPD matrix C = -W^2, whose eigenspaces are
/// W-invariant: inside each eigenspace with eigenvalue w^2 a unit vector e
/// is completed to the pair (e, -We/w), which is orthonormal because the
/// quadratic form of a skew matrix vanishes. Repeated frequencies are
/// handled by deflating their shared eigenspace pair by pair.
pub fn skew_block_reduce(w_mat: &DMatrix<f64>) -> PhResult<(DMatrix<f64>, DVector<f64>)> {
    let dim = check_even_square(w_mat)?;
    let n = dim / 2;
    let norm = w_mat.norm();
    let skew_residual = (w_mat + w_mat.transpose()).norm();
    if skew_residual > tol::STRUCTURE_REL * norm.max(1.0) {
        return Err(PhError::NotSkewSymmetric {
            residual: skew_residual / norm.max(1.0),
            tol: tol::STRUCTURE_REL,
        });
    }

    let c_raw = -(w_mat * w_mat);
    let c = (&c_raw + c_raw.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let max_eig = eig.eigenvalues.max();
    let min_eig = eig.eigenvalues.min();
    if !(min_eig > tol::PD_MIN_EIG_REL * max_eig && max_eig > 0.0) {
        return Err(PhError::SingularSkew {
            min_freq: min_eig.max(0.0).sqrt(),
        });
    }

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .unwrap()
    });

    // Cluster near-equal eigenvalues of C so that repeated frequencies are
    // deflated inside their full eigenspace.
    let gap = 1e-9 * max_eig;
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for &i in &order {
        match clusters.last_mut() {
            Some(cluster)
                if eig.eigenvalues[i] - eig.eigenvalues[*cluster.last().unwrap()] <= gap =>
            {
                cluster.push(i)
            }
            _ => clusters.push(vec![i]),
        }
    }

    let mut pairs: Vec<(f64, DVector<f64>, DVector<f64>)> = Vec::with_capacity(n);
    for cluster in &clusters {
        if cluster.len() % 2 != 0 {
            return Err(PhError::InvalidArgument(format!(
                "skew reduction: eigenvalue cluster of odd size {} (frequencies too close to separate)",
                cluster.len()
            )));
        }
        let mut basis: Vec<DVector<f64>> = cluster
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect();
        while !basis.is_empty() {
            let mut e = basis.remove(0);
            let norm_e = e.norm();
            if norm_e < 1e-6 {
                continue;
            }
            e /= norm_e;
            let g = w_mat * &e;
            let freq = g.norm();
            let f = -g / freq;
            // Remove the new pair's span from the rest of the cluster basis.
            for b in basis.iter_mut() {
                let be = e.dot(b);
                let bf = f.dot(b);
                *b -= &e * be + &f * bf;
            }
            // Exactly one direction degenerates (the one aligned with f).
            basis.retain(|b| b.norm() > 0.5);
            for b in basis.iter_mut() {
                let nb = b.norm();
                *b /= nb;
            }
            pairs.push((freq, e, f));
        }
    }
    if pairs.len() != n {
        return Err(PhError::InvalidArgument(format!(
            "skew reduction: found {} mode pairs, expected {}",
            pairs.len(),
            n
        )));
    }

    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    // Sign convention: the leading nonzero entry of each e-column is positive.
    for (_, e, f) in pairs.iter_mut() {
        if let Some(lead) = e.iter().find(|x| x.abs() > 1e-12) {
            if *lead < 0.0 {
                *e = -&*e;
                *f = -&*f;
            }
        }
    }

    let mut u = DMatrix::zeros(dim, dim);
    let mut w = DVector::zeros(n);
    for (j, (freq, e, f)) in pairs.iter().enumerate() {
        w[j] = *freq;
        u.set_column(j, e);
        u.set_column(n + j, f);
    }
    Ok((u, w))
}

/// Williamson decomposition of an SPD matrix: M = S^T blockdiag(D, D) S
/// with S symplectic and d = diag(D) the ascending symplectic eigenvalues.
pub fn williamson(m: &SpdMatrix) -> PhResult<WilliamsonForm> {
    let n = m.n();
    let eig = SymmetricEigen::new(m.entries().clone());
    let cond_k = (eig.eigenvalues.max() / eig.eigenvalues.min()).sqrt();
    let k_inv_diag = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    let k_inv = &eig.eigenvectors * k_inv_diag * eig.eigenvectors.transpose();

    let w_tilde_raw = &k_inv * jmat(n) * &k_inv;
    let w_tilde = (&w_tilde_raw - w_tilde_raw.transpose()) * 0.5;
    let (u, w) = skew_block_reduce(&w_tilde)?;

    // Block frequencies are the reciprocals of the symplectic eigenvalues;
    // reorder modes so that d is ascending (stable in the input order).
    let mut d_raw: Vec<f64> = w.iter().map(|&wj| 1.0 / wj).collect();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| d_raw[a].partial_cmp(&d_raw[b]).unwrap());
    d_raw.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let d = DVector::from_vec(d_raw);

    let mut u_perm = DMatrix::zeros(2 * n, 2 * n);
    for (new_j, &old_j) in idx.iter().enumerate() {
        u_perm.set_column(new_j, &u.column(old_j));
        u_perm.set_column(n + new_j, &u.column(n + old_j));
    }

    let mut dhat_sqrt = DMatrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        dhat_sqrt[(j, j)] = d[j].sqrt();
        dhat_sqrt[(n + j, n + j)] = d[j].sqrt();
    }
    let t = &k_inv * u_perm * dhat_sqrt;
    // T is symplectic, so its inverse is J^T T^T J.
    let j = jmat(n);
    let s = j.transpose() * t.transpose() * &j;

    Ok(WilliamsonForm {
        s: SymplecticMatrix::new(s)?,
        d,
        cond_k,
    })
}

/// Symplectic eigenvalues of an SPD matrix, ascending.
pub fn symplectic_eigenvalues(m: &SpdMatrix) -> PhResult<DVector<f64>> {
    Ok(williamson(m)?.d)
}

/// blockdiag(D, D) for D = diag(d).
pub fn dhat(d: &DVector<f64>) -> DMatrix<f64> {
    let n = d.len();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        m[(j, j)] = d[j];
        m[(n + j, n + j)] = d[j];
    }
    m
}

/// exp(J R) for symmetric R: always symplectic.
pub fn symplectic_exp(r_sym: &DMatrix<f64>) -> PhResult<SymplecticMatrix> {
    let dim = check_even_square(r_sym)?;
    let n = dim / 2;
    let generator = jmat(n) * r_sym;
    SymplecticMatrix::new(generator.exp())
}

/// Seeded random symplectic matrix exp(J R), R symmetric with entries in [-1, 1].
pub fn random_symplectic(n: usize, seed: u64) -> PhResult<SymplecticMatrix> {
    if n == 0 {
        return Err(PhError::InvalidArgument(
            "mode count n must be at least 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = 2 * n;
    let mut r = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in i..dim {
            let x = rng.gen_range(-1.0..=1.0);
            r[(i, j)] = x;
            r[(j, i)] = x;
        }
    }
    symplectic_exp(&r)
}

fn check_even_square(m: &DMatrix<f64>) -> PhResult<usize> {
    if !m.is_square() || m.nrows() == 0 || m.nrows() % 2 != 0 {
        return Err(PhError::DimensionMismatch {
            expected: "nonempty square matrix of even dimension".into(),
            got: format!("{}x{}", m.nrows(), m.ncols()),
        });
    }
    Ok(m.nrows())
}
