//! Parameter equivalence, canonical charts, and the groupoid arrows.
//!
//! Two parameter points give system-isomorphic port-Hamiltonian systems
//! exactly when a permutation of modes matches their frequency multisets and,
//! inside every group of equal frequencies, the Euclidean norm of the
//! coupling sub-vector agrees: the commutation condition forces the
//! connecting matrix A to act complex-linearly per group, and the quadratic
//! condition forces it to preserve the group norm. Every positive decision is
//! backed by an explicit witness (P_sigma, A) that is re-verified against all
//! four defining conditions before being returned.
//!
//! Filter equality is a deliberately distinct predicate: it compares minimal
//! realizations (transfer functions after pole/zero cancellation) and
//! identifies more systems than parameter equivalence once canonicality
//! fails.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{PhError, PhResult};
use crate::symplectic::{dhat, jmat, SpdMatrix};
use crate::systems::{transfer_function, NormalFormParams, PhSystem, RealizedLti};
use crate::tol;

/// Canonicalization chart: modes sorted by ascending frequency with their
/// rotation-invariant radii. Two parameter points with equal charts induce
/// the same filter.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalChart {
    pub d_sorted: Vec<f64>,
    pub r: Vec<f64>,
}

impl CanonicalChart {
    pub fn agrees_with(&self, other: &CanonicalChart, tol: f64) -> bool {
        self.d_sorted.len() == other.d_sorted.len()
            && self
                .d_sorted
                .iter()
                .zip(&other.d_sorted)
                .all(|(a, b)| (a - b).abs() <= tol * b.abs().max(1.0))
            && self
                .r
                .iter()
                .zip(&other.r)
                .all(|(a, b)| (a - b).abs() <= tol * b.abs().max(1.0))
    }
}

/// Witness for a positive equivalence decision: the permutation and the
/// norm-preserving block map, with the residuals of the four defining
/// conditions.
#[derive(Debug, Clone)]
pub struct StarWitness {
    /// n x n permutation matrix.
    pub p_sigma: DMatrix<f64>,
    /// 2n x 2n connecting matrix (orthogonal, commutes with J D^).
    pub a: DMatrix<f64>,
    /// Residuals of the four conditions, in display order.
    pub residuals: [f64; 4],
}

/// An arrow of the groupoid over port-Hamiltonian systems.
#[derive(Debug, Clone)]
pub struct GnArrow {
    pub l: DMatrix<f64>,
    pub source: PhSystem,
}

/// An arrow of the groupoid over normal-form parameters.
#[derive(Debug, Clone)]
pub struct HnArrow {
    /// n x n permutation matrix.
    pub p_sigma: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub source: NormalFormParams,
}

/// Sort modes by ascending frequency (ties: radius descending, then input
/// order) and record the per-mode radii.
pub fn canonicalize(p: &NormalFormParams) -> CanonicalChart {
    let n = p.n();
    let radii = p.mode_radii();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| {
        p.d()[a]
            .partial_cmp(&p.d()[b])
            .unwrap()
            .then(radii[b].partial_cmp(&radii[a]).unwrap())
    });
    CanonicalChart {
        d_sorted: idx.iter().map(|&l| p.d()[l]).collect(),
        r: idx.iter().map(|&l| radii[l]).collect(),
    }
}

/// Decide parameter equivalence. Returns a verified witness on success and
/// `None` when the points are not equivalent.
pub fn star_equivalent(
    p1: &NormalFormParams,
    p2: &NormalFormParams,
    tol: f64,
) -> PhResult<Option<StarWitness>> {
    let n = p1.n();
    if p2.n() != n {
        return Err(PhError::DimensionMismatch {
            expected: format!("{n} modes"),
            got: format!("{} modes", p2.n()),
        });
    }

    // Match frequency multisets.
    let mut order1: Vec<usize> = (0..n).collect();
    order1.sort_by(|&a, &b| p1.d()[a].partial_cmp(&p1.d()[b]).unwrap());
    let mut order2: Vec<usize> = (0..n).collect();
    order2.sort_by(|&a, &b| p2.d()[a].partial_cmp(&p2.d()[b]).unwrap());
    for i in 0..n {
        let (a, b) = (p1.d()[order1[i]], p2.d()[order2[i]]);
        if (a - b).abs() > tol * b.abs().max(1.0) {
            return Ok(None);
        }
    }
    // sigma maps source mode index to target mode index.
    let mut sigma = vec![0usize; n];
    for i in 0..n {
        sigma[order1[i]] = order2[i];
    }

    // Group the sorted source modes into equal-frequency clusters.
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for &l in &order1 {
        match clusters.last_mut() {
            Some(cluster)
                if p1.d()[l] - p1.d()[*cluster.last().unwrap()]
                    <= tol::EQUAL_D_GAP * p1.d()[l].max(1.0) =>
            {
                cluster.push(l)
            }
            _ => clusters.push(vec![l]),
        }
    }

    // Per cluster: group norms must agree; then a complex unitary mapping the
    // source sub-vector to the (permuted-back) target sub-vector exists.
    let v1 = p1.v();
    let v2 = p2.v();
    let mut a = DMatrix::identity(2 * n, 2 * n);
    for cluster in &clusters {
        let x: Vec<Complex64> = cluster
            .iter()
            .map(|&l| Complex64::new(v1[l], v1[n + l]))
            .collect();
        let w: Vec<Complex64> = cluster
            .iter()
            .map(|&l| Complex64::new(v2[sigma[l]], v2[n + sigma[l]]))
            .collect();
        let norm_x = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let norm_w = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (norm_x - norm_w).abs() > tol * norm_w.max(1.0) {
            return Ok(None);
        }
        let u = unitary_mapping(&x, &w);
        for (bi, &gi) in cluster.iter().enumerate() {
            for (bj, &gj) in cluster.iter().enumerate() {
                a[(gi, gj)] = u[bi][bj].re;
                a[(gi, n + gj)] = -u[bi][bj].im;
                a[(n + gi, gj)] = u[bi][bj].im;
                a[(n + gi, n + gj)] = u[bi][bj].re;
            }
        }
    }

    let p_sigma = perm_matrix(&sigma);
    let residuals = witness_residuals(&p_sigma, &a, p1, p2);
    let check_tol = tol.max(tol::EQUIV_TOL);
    if residuals.iter().any(|r| *r > check_tol) {
        return Err(PhError::ArrowCondition {
            condition: "constructed witness failed verification".into(),
            residual: residuals.iter().fold(0.0f64, |m, r| m.max(*r)),
        });
    }
    Ok(Some(StarWitness {
        p_sigma,
        a,
        residuals,
    }))
}

/// Residuals of the four defining conditions for a (P_sigma, A) pair between
/// two parameter points, normalized by the scale of each condition.
pub fn witness_residuals(
    p_sigma: &DMatrix<f64>,
    a: &DMatrix<f64>,
    p1: &NormalFormParams,
    p2: &NormalFormParams,
) -> [f64; 4] {
    let n = p1.n();
    let d1 = dhat(p1.d());
    let d2 = dhat(p2.d());
    let p = blockdiag2(p_sigma);
    let j = jmat(n);
    let scale_d = d1.norm().max(1.0);
    let scale_v = p1.v().norm().max(1.0);

    let c1 = (&p * &d1 * p.transpose() - &d2).norm() / scale_d;
    let c2 = (a.transpose() * &d1 * a * p1.v() - &d1 * p1.v()).norm() / (scale_d * scale_v);
    let c3 = (a * &j * &d1 - &j * &d1 * a).norm() / scale_d;
    let c4 = (&p * a * p1.v() - p2.v()).norm() / scale_v;
    [c1, c2, c3, c4]
}

/// Filter equality: transfer functions compared after cancelling common
/// root pairs within `tol` (minimal-realization comparison).
pub fn filters_equal(r1: &RealizedLti, r2: &RealizedLti, tol: f64) -> bool {
    let h1 = transfer_function(r1).reduce(tol);
    let h2 = transfer_function(r2).reduce(tol);
    // Rational equality by cross-multiplication of the minimal forms.
    let lhs = conv(&h1.num, &h2.den);
    let rhs = conv(&h2.num, &h1.den);
    let scale = lhs
        .iter()
        .chain(rhs.iter())
        .fold(1.0f64, |m, c| m.max(c.abs()));
    let len = lhs.len().max(rhs.len());
    (0..len).all(|k| {
        let a = lhs.get(k).copied().unwrap_or(0.0);
        let b = rhs.get(k).copied().unwrap_or(0.0);
        (a - b).abs() <= tol * scale
    })
}

/// Membership test for the PH groupoid: `J^T L J Q L^{-1}` must be symmetric
/// positive-definite and `B = J^T L^T J L B`.
pub fn gn_is_arrow(l: &DMatrix<f64>, sys: &PhSystem, tol: f64) -> PhResult<()> {
    let n = sys.n();
    let dim = 2 * n;
    if l.nrows() != dim || l.ncols() != dim {
        return Err(PhError::DimensionMismatch {
            expected: format!("{dim}x{dim} matrix"),
            got: format!("{}x{}", l.nrows(), l.ncols()),
        });
    }
    let Some(l_inv) = l.clone().try_inverse() else {
        return Err(PhError::ArrowCondition {
            condition: "L is not invertible".into(),
            residual: f64::INFINITY,
        });
    };
    let j = jmat(n);
    let q_new = j.transpose() * l * &j * sys.q().entries() * &l_inv;
    let sym_residual = (&q_new - q_new.transpose()).norm() / q_new.norm().max(1.0);
    if sym_residual > tol {
        return Err(PhError::ArrowCondition {
            condition: "J^T L J Q L^{-1} is not symmetric".into(),
            residual: sym_residual,
        });
    }
    let sym = (&q_new + q_new.transpose()) * 0.5;
    if SpdMatrix::new(sym).is_err() {
        return Err(PhError::ArrowCondition {
            condition: "J^T L J Q L^{-1} is not positive-definite".into(),
            residual: f64::NAN,
        });
    }
    let b_residual = (sys.b() - j.transpose() * l.transpose() * &j * l * sys.b()).norm()
        / sys.b().norm().max(1.0);
    if b_residual > tol {
        return Err(PhError::ArrowCondition {
            condition: "B != J^T L^T J L B".into(),
            residual: b_residual,
        });
    }
    Ok(())
}

/// Target map of the PH groupoid: (J^T L J Q L^{-1}, L B). Membership is
/// validated before applying.
pub fn gn_apply(arrow: &GnArrow, tol: f64) -> PhResult<PhSystem> {
    gn_is_arrow(&arrow.l, &arrow.source, tol)?;
    let n = arrow.source.n();
    let j = jmat(n);
    let l_inv = arrow
        .l
        .clone()
        .try_inverse()
        .expect("invertibility checked by gn_is_arrow");
    let q_new = j.transpose() * &arrow.l * &j * arrow.source.q().entries() * l_inv;
    let q = SpdMatrix::new((&q_new + q_new.transpose()) * 0.5)?;
    PhSystem::new(q, &arrow.l * arrow.source.b())
}

/// Membership test for the parameter groupoid: P_sigma a permutation matrix,
/// `A^T D^ A v = D^ v` and `A J D^ = J D^ A`.
pub fn hn_is_arrow(
    p_sigma: &DMatrix<f64>,
    a: &DMatrix<f64>,
    p: &NormalFormParams,
    tol: f64,
) -> PhResult<()> {
    let n = p.n();
    if p_sigma.nrows() != n || !is_permutation(p_sigma) {
        return Err(PhError::ArrowCondition {
            condition: "P_sigma is not an n x n permutation matrix".into(),
            residual: f64::NAN,
        });
    }
    if a.nrows() != 2 * n || a.ncols() != 2 * n {
        return Err(PhError::DimensionMismatch {
            expected: format!("{}x{} matrix", 2 * n, 2 * n),
            got: format!("{}x{}", a.nrows(), a.ncols()),
        });
    }
    if a.clone().try_inverse().is_none() {
        return Err(PhError::ArrowCondition {
            condition: "A is not invertible".into(),
            residual: f64::INFINITY,
        });
    }
    let d = dhat(p.d());
    let j = jmat(n);
    let scale_d = d.norm().max(1.0);
    let quad = (a.transpose() * &d * a * p.v() - &d * p.v()).norm()
        / (scale_d * p.v().norm().max(1.0));
    if quad > tol {
        return Err(PhError::ArrowCondition {
            condition: "A^T D^ A v != D^ v".into(),
            residual: quad,
        });
    }
    let comm = (a * &j * &d - &j * &d * a).norm() / scale_d;
    if comm > tol {
        return Err(PhError::ArrowCondition {
            condition: "A J D^ != J D^ A".into(),
            residual: comm,
        });
    }
    Ok(())
}

/// Target map of the parameter groupoid: (P_sigma d, P A v). Membership is
/// validated and the result is checked equivalent to the source.
pub fn hn_apply(arrow: &HnArrow, tol: f64) -> PhResult<NormalFormParams> {
    hn_is_arrow(&arrow.p_sigma, &arrow.a, &arrow.source, tol)?;
    let d_new = &arrow.p_sigma * arrow.source.d();
    let v_new = blockdiag2(&arrow.p_sigma) * &arrow.a * arrow.source.v();
    let result = NormalFormParams::new(d_new, v_new)?;
    if star_equivalent(&arrow.source, &result, tol.max(tol::EQUIV_TOL))?.is_none() {
        return Err(PhError::ArrowCondition {
            condition: "arrow target is not equivalent to its source".into(),
            residual: f64::NAN,
        });
    }
    Ok(result)
}

/// Permutation matrix with P[sigma(j), j] = 1.
pub fn perm_matrix(sigma: &[usize]) -> DMatrix<f64> {
    let n = sigma.len();
    let mut p = DMatrix::zeros(n, n);
    for (j, &i) in sigma.iter().enumerate() {
        p[(i, j)] = 1.0;
    }
    p
}

fn blockdiag2(p: &DMatrix<f64>) -> DMatrix<f64> {
    let n = p.nrows();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    out.view_mut((0, 0), (n, n)).copy_from(p);
    out.view_mut((n, n), (n, n)).copy_from(p);
    out
}

fn is_permutation(p: &DMatrix<f64>) -> bool {
    if !p.is_square() {
        return false;
    }
    let n = p.nrows();
    for i in 0..n {
        let row_ones = (0..n).filter(|&j| (p[(i, j)] - 1.0).abs() < 1e-12).count();
        let row_zeros = (0..n).filter(|&j| p[(i, j)].abs() < 1e-12).count();
        let col_ones = (0..n).filter(|&j| (p[(j, i)] - 1.0).abs() < 1e-12).count();
        if row_ones != 1 || col_ones != 1 || row_ones + row_zeros != n {
            return false;
        }
    }
    true
}

/// Complex unitary with U x = w, assuming |x| = |w| (up to the caller's
/// tolerance). Built as Y X^H from unitary completions of x and w.
fn unitary_mapping(x: &[Complex64], w: &[Complex64]) -> Vec<Vec<Complex64>> {
    let m = x.len();
    let norm = |v: &[Complex64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm(x) < 1e-14 && norm(w) < 1e-14 {
        return (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| {
                        if i == j {
                            Complex64::new(1.0, 0.0)
                        } else {
                            Complex64::new(0.0, 0.0)
                        }
                    })
                    .collect()
            })
            .collect();
    }
    let x_cols = complete_unitary(x);
    let w_cols = complete_unitary(w);
    // U[i][j] = sum_k W[:,k][i] * conj(X[:,k][j])
    (0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    (0..m)
                        .map(|k| w_cols[k][i] * x_cols[k][j].conj())
                        .sum::<Complex64>()
                })
                .collect()
        })
        .collect()
}

/// Complete `first` (nonzero) to an orthonormal basis of C^m by
/// Gram-Schmidt over the standard basis. Returns the columns.
fn complete_unitary(first: &[Complex64]) -> Vec<Vec<Complex64>> {
    let m = first.len();
    let norm = |v: &[Complex64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let n0 = norm(first);
    let mut cols: Vec<Vec<Complex64>> = vec![first.iter().map(|z| z / n0).collect()];
    let mut k = 0;
    while cols.len() < m && k < m {
        let mut cand: Vec<Complex64> = (0..m)
            .map(|i| {
                if i == k {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        for col in &cols {
            let inner: Complex64 = col.iter().zip(&cand).map(|(c, v)| c.conj() * v).sum();
            for (ci, vi) in col.iter().zip(cand.iter_mut()) {
                *vi -= ci * inner;
            }
        }
        let nc = norm(&cand);
        if nc > 1e-8 {
            cols.push(cand.iter().map(|z| z / nc).collect());
        }
        k += 1;
    }
    debug_assert_eq!(cols.len(), m);
    cols
}

fn conv(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, ai) in a.iter().enumerate() {
        for (j, bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::morphisms::phi_s;
    use crate::symplectic::random_symplectic;
    use crate::systems::{build_ch, realize_ph};
    use approx::assert_relative_eq;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dv(xs: &[f64]) -> DVector<f64> {
        DVector::from_vec(xs.to_vec())
    }

    fn params(d: &[f64], v: &[f64]) -> NormalFormParams {
        NormalFormParams::new(dv(d), dv(v)).unwrap()
    }

    #[test]
    fn canonicalize_sorts_modes() {
        let chart = canonicalize(&params(&[2.0, 1.0], &[0.0, 1.0, 1.0, 0.0]));
        assert_eq!(chart.d_sorted, vec![1.0, 2.0]);
        assert_eq!(chart.r, vec![1.0, 1.0]);

        let chart = canonicalize(&params(&[1.0, 2.0], &[0.0; 4]));
        assert_eq!(chart.r, vec![0.0, 0.0]);
    }

    #[test]
    fn canonicalize_is_rotation_invariant() {
        let p = params(&[1.3, 0.7, 2.1], &[0.5, -0.8, 0.3, 0.2, 0.9, -0.1]);
        let base = canonicalize(&p);
        let n = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut v = p.v().clone();
        for l in 0..n {
            let th: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let (a, b) = (v[l], v[n + l]);
            v[l] = th.cos() * a - th.sin() * b;
            v[n + l] = th.sin() * a + th.cos() * b;
        }
        let rotated = NormalFormParams::new(p.d().clone(), v).unwrap();
        assert!(base.agrees_with(&canonicalize(&rotated), 1e-12));
    }

    #[test]
    fn star_reflexive_with_identity_witness() {
        let p = params(&[1.0, 2.0], &[1.0, 1.0, 0.0, 0.0]);
        let w = star_equivalent(&p, &p, 1e-10).unwrap().expect("equivalent");
        assert_relative_eq!(w.p_sigma, DMatrix::identity(2, 2), epsilon = 1e-12);
        assert!(w.residuals.iter().all(|r| *r <= 1e-10));
    }

    #[test]
    fn star_detects_mode_swap() {
        let p1 = params(&[1.0, 2.0], &[1.0, 1.0, 0.0, 0.0]);
        let p2 = params(&[2.0, 1.0], &[1.0, 1.0, 0.0, 0.0]);
        let w = star_equivalent(&p1, &p2, 1e-10).unwrap().expect("swap");
        assert_eq!(w.p_sigma, perm_matrix(&[1, 0]));
        assert!(w.residuals.iter().all(|r| *r <= 1e-10));
        // Swapped systems share the filter.
        assert!(filters_equal(&build_ch(&p1), &build_ch(&p2), 1e-7));
    }

    #[test]
    fn star_rejects_different_radii() {
        let p1 = params(&[1.0], &[1.0, 0.0]);
        let p2 = params(&[1.0], &[2.0, 0.0]);
        assert!(star_equivalent(&p1, &p2, 1e-10).unwrap().is_none());
        assert!(!filters_equal(&build_ch(&p1), &build_ch(&p2), 1e-7));
    }

    #[test]
    fn star_rejects_different_frequencies() {
        let p1 = params(&[1.0], &[1.0, 0.0]);
        let p2 = params(&[1.5], &[1.0, 0.0]);
        assert!(star_equivalent(&p1, &p2, 1e-10).unwrap().is_none());
    }

    #[test]
    fn star_repeated_frequency_group_norm() {
        // Equal-frequency group: only the group norm matters.
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let p1 = params(&[1.5, 1.5], &[1.0, 0.0, 0.0, 0.0]);
        let p2 = params(&[1.5, 1.5], &[h, h, 0.0, 0.0]);
        let w = star_equivalent(&p1, &p2, 1e-10).unwrap().expect("group");
        assert!(w.residuals.iter().all(|r| *r <= 1e-9), "{:?}", w.residuals);
        assert!(filters_equal(&build_ch(&p1), &build_ch(&p2), 1e-7));

        // Different group norms: not equivalent.
        let p3 = params(&[1.5, 1.5], &[2.0, 0.0, 0.0, 0.0]);
        assert!(star_equivalent(&p1, &p3, 1e-10).unwrap().is_none());
    }

    #[test]
    fn star_equivalence_implies_filter_equality() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for n in 1..=3usize {
            let d: Vec<f64> = (0..n).map(|j| 0.6 + j as f64 * 0.9).collect();
            let v: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let p1 = params(&d, &v);
            // Rotate each mode and permute by reversal.
            let sigma: Vec<usize> = (0..n).rev().collect();
            let mut v2 = vec![0.0; 2 * n];
            let mut d2 = vec![0.0; n];
            for l in 0..n {
                let th: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                let (a, b) = (v[l], v[n + l]);
                d2[sigma[l]] = d[l];
                v2[sigma[l]] = th.cos() * a - th.sin() * b;
                v2[n + sigma[l]] = th.sin() * a + th.cos() * b;
            }
            let p2 = params(&d2, &v2);
            let w = star_equivalent(&p1, &p2, 1e-8).unwrap();
            assert!(w.is_some(), "n={n}");
            assert!(filters_equal(&build_ch(&p1), &build_ch(&p2), 1e-7));
        }
    }

    #[test]
    fn filters_equal_across_families() {
        let p = params(&[0.8, 1.7], &[0.9, -0.5, 0.4, 0.7]);
        let s = random_symplectic(2, 61).unwrap();
        let img = phi_s(&p, &s).unwrap();
        assert!(filters_equal(
            &build_ch(&p),
            &realize_ph(&img.ph),
            1e-7
        ));
        let r = build_ch(&p);
        assert!(filters_equal(&r, &r, 1e-9));
    }

    #[test]
    fn gn_arrow_identity_and_rotation() {
        let q = SpdMatrix::new(DMatrix::identity(2, 2)).unwrap();
        let sys = PhSystem::new(q, dv(&[1.0, 0.0])).unwrap();

        let id = GnArrow {
            l: DMatrix::identity(2, 2),
            source: sys.clone(),
        };
        let target = gn_apply(&id, 1e-8).unwrap();
        assert_relative_eq!(
            target.q().entries(),
            sys.q().entries(),
            epsilon = 1e-12
        );

        // Planar rotations are orthogonal-symplectic; they fix Q = I and
        // rotate B.
        let th = 0.7f64;
        let rot = DMatrix::from_row_slice(2, 2, &[th.cos(), -th.sin(), th.sin(), th.cos()]);
        let arrow = GnArrow {
            l: rot.clone(),
            source: sys.clone(),
        };
        let target = gn_apply(&arrow, 1e-8).unwrap();
        assert_relative_eq!(
            target.q().entries(),
            &DMatrix::identity(2, 2),
            epsilon = 1e-10
        );
        assert_relative_eq!((&rot * sys.b() - target.b()).norm(), 0.0, epsilon = 1e-12);
        assert!(filters_equal(
            &realize_ph(&sys),
            &realize_ph(&target),
            1e-7
        ));
    }

    #[test]
    fn gn_arrow_rejects_generic_matrix() {
        let q = SpdMatrix::new(DMatrix::identity(2, 2)).unwrap();
        let sys = PhSystem::new(q, dv(&[1.0, 0.0])).unwrap();
        let l = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.5, 3.0]);
        assert!(gn_is_arrow(&l, &sys, 1e-8).is_err());
    }

    #[test]
    fn hn_arrow_identity_and_rotation() {
        let p = params(&[1.4], &[0.8, -0.6]);
        let id = HnArrow {
            p_sigma: DMatrix::identity(1, 1),
            a: DMatrix::identity(2, 2),
            source: p.clone(),
        };
        let out = hn_apply(&id, 1e-8).unwrap();
        assert_eq!(out.d()[0], p.d()[0]);

        let th = 1.1f64;
        let rot = DMatrix::from_row_slice(2, 2, &[th.cos(), -th.sin(), th.sin(), th.cos()]);
        let arrow = HnArrow {
            p_sigma: DMatrix::identity(1, 1),
            a: rot,
            source: p.clone(),
        };
        let out = hn_apply(&arrow, 1e-8).unwrap();
        assert_eq!(out.d()[0], p.d()[0]);
        assert_relative_eq!(out.mode_radii()[0], p.mode_radii()[0], epsilon = 1e-12);
        assert!(filters_equal(&build_ch(&p), &build_ch(&out), 1e-7));
    }

    #[test]
    fn hn_arrow_rejects_invalid_a() {
        let p = params(&[1.0, 2.0], &[1.0, 0.5, 0.0, 0.0]);
        // A scaling breaks the quadratic condition.
        let arrow = HnArrow {
            p_sigma: DMatrix::identity(2, 2),
            a: DMatrix::identity(4, 4) * 2.0,
            source: p,
        };
        assert!(hn_apply(&arrow, 1e-8).is_err());
    }

    #[test]
    fn hn_permutation_arrow() {
        let p = params(&[1.0, 2.0], &[0.3, 0.9, -0.4, 0.1]);
        // A = I satisfies both conditions for any d; the mode swap happens
        // through P alone.
        let arrow = HnArrow {
            p_sigma: perm_matrix(&[1, 0]),
            a: DMatrix::identity(4, 4),
            source: p.clone(),
        };
        let out = hn_apply(&arrow, 1e-8).unwrap();
        assert_eq!(out.d().as_slice(), &[2.0, 1.0]);
        assert!(star_equivalent(&p, &out, 1e-8).unwrap().is_some());
        assert!(filters_equal(&build_ch(&p), &build_ch(&out), 1e-7));
    }
}
