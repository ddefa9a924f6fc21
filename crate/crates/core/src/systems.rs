//! The three system families and their common LTI realization.
//!
//! Port-Hamiltonian systems in normal form are pairs (Q, B) evolving as
//! `z' = J Q z + B u, y = B^T Q z`. Controllable/observable Hamiltonian
//! representations are parameterized by (d, v) with d the mode frequencies
//! and v the coupling vector; their state matrices are companion forms of
//! the even characteristic polynomial prod_j (s^2 + d_j^2) and their output
//! (resp. input) vectors carry the odd coefficients c_1, c_3, ...
//! Everything flattens to a `RealizedLti` triple (A, B, C).

use nalgebra::{DMatrix, DVector, RowDVector};
use num_complex::Complex64;

use crate::error::{PhError, PhResult};
use crate::symplectic::{jmat, SpdMatrix};

/// Port-Hamiltonian system in normal form: Hamiltonian matrix Q (SPD) and
/// interconnection vector B.
#[derive(Debug, Clone)]
pub struct PhSystem {
    q: SpdMatrix,
    b: DVector<f64>,
}

impl PhSystem {
    pub fn new(q: SpdMatrix, b: DVector<f64>) -> PhResult<Self> {
        if b.len() != q.dim() {
            return Err(PhError::DimensionMismatch {
                expected: format!("interconnection vector of length {}", q.dim()),
                got: format!("length {}", b.len()),
            });
        }
        Ok(Self { q, b })
    }

    pub fn n(&self) -> usize {
        self.q.n()
    }

    pub fn dim(&self) -> usize {
        self.q.dim()
    }

    pub fn q(&self) -> &SpdMatrix {
        &self.q
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    /// Independent real parameters: n(2n+1) for symmetric Q plus 2n for B.
    pub fn param_count(&self) -> usize {
        let n = self.n();
        n * (2 * n + 1) + 2 * n
    }
}

/// Normal-form parameter point (d, v): n positive mode frequencies and a
/// coupling vector of length 2n. The shared parameter space of the
/// controllable and observable Hamiltonian families.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalFormParams {
    d: DVector<f64>,
    v: DVector<f64>,
}

impl NormalFormParams {
    pub fn new(d: DVector<f64>, v: DVector<f64>) -> PhResult<Self> {
        if d.is_empty() {
            return Err(PhError::InvalidArgument(
                "at least one mode is required".into(),
            ));
        }
        if v.len() != 2 * d.len() {
            return Err(PhError::DimensionMismatch {
                expected: format!("coupling vector of length {}", 2 * d.len()),
                got: format!("length {}", v.len()),
            });
        }
        if let Some(bad) = d.iter().find(|x| !(**x > 0.0)) {
            return Err(PhError::InvalidArgument(format!(
                "mode frequencies must be strictly positive, got {bad}"
            )));
        }
        Ok(Self { d, v })
    }

    pub fn n(&self) -> usize {
        self.d.len()
    }

    pub fn d(&self) -> &DVector<f64> {
        &self.d
    }

    pub fn v(&self) -> &DVector<f64> {
        &self.v
    }

    /// Per-mode radii r_l = sqrt(v_l^2 + v_{n+l}^2), the rotation-invariant
    /// content of the coupling vector.
    pub fn mode_radii(&self) -> DVector<f64> {
        let n = self.n();
        DVector::from_fn(n, |l, _| (self.v[l].powi(2) + self.v[n + l].powi(2)).sqrt())
    }

    /// Independent real parameters: n frequencies plus 2n couplings.
    pub fn param_count(&self) -> usize {
        3 * self.n()
    }
}

/// Which family a realized triple came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RealizationTag {
    Ph,
    Ch,
    Oh,
}

impl std::fmt::Display for RealizationTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RealizationTag::Ph => write!(f, "PH"),
            RealizationTag::Ch => write!(f, "CH"),
            RealizationTag::Oh => write!(f, "OH"),
        }
    }
}

/// A system flattened to `x' = A x + B u, y = C x`.
#[derive(Debug, Clone)]
pub struct RealizedLti {
    pub dim: usize,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: RowDVector<f64>,
    pub tag: RealizationTag,
}

impl RealizedLti {
    pub fn new(
        a: DMatrix<f64>,
        b: DVector<f64>,
        c: RowDVector<f64>,
        tag: RealizationTag,
    ) -> PhResult<Self> {
        let dim = a.nrows();
        if !a.is_square() || b.len() != dim || c.len() != dim || dim == 0 || dim % 2 != 0 {
            return Err(PhError::DimensionMismatch {
                expected: "A square of even dimension 2n, B and C of matching length".into(),
                got: format!("A {}x{}, B {}, C {}", a.nrows(), a.ncols(), b.len(), c.len()),
            });
        }
        Ok(Self { dim, a, b, c, tag })
    }

    pub fn n(&self) -> usize {
        self.dim / 2
    }
}

/// Rational transfer function with coefficients in ascending powers of s;
/// the denominator is monic.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferFunction {
    pub num: Vec<f64>,
    pub den: Vec<f64>,
}

/// Coefficients a_0..a_{2n-1} of prod_j (s^2 + d_j^2) = s^{2n} + sum a_i s^i
/// (the leading a_{2n} = 1 is implicit). Even entries are elementary
/// symmetric polynomials in the d_j^2; odd entries vanish.
pub fn char_coeffs(d: &DVector<f64>) -> PhResult<Vec<f64>> {
    check_positive(d)?;
    let n = d.len();
    // Expand prod (mu + d_j^2) in mu = s^2 by repeated convolution.
    let mut p = vec![0.0; n + 1];
    p[0] = 1.0;
    let mut deg = 0usize;
    for dj in d.iter() {
        let dj2 = dj * dj;
        deg += 1;
        for k in (0..=deg).rev() {
            let lower = if k == 0 { 0.0 } else { p[k - 1] };
            p[k] = lower + dj2 * p[k];
        }
    }
    // p[k] is now the coefficient of mu^k, i.e. a_{2k}.
    let mut a = vec![0.0; 2 * n];
    for k in 0..n {
        a[2 * k] = p[k];
    }
    Ok(a)
}

/// Companion matrix of the even characteristic polynomial of d:
/// superdiagonal of ones, last row -a_0 .. -a_{2n-1}. Its eigenvalues are
/// exactly the +-i d_j pairs.
pub fn companion_g1(d: &DVector<f64>) -> PhResult<DMatrix<f64>> {
    let a = char_coeffs(d)?;
    let dim = 2 * d.len();
    let mut g = DMatrix::zeros(dim, dim);
    for i in 0..dim - 1 {
        g[(i, i + 1)] = 1.0;
    }
    for j in 0..dim {
        g[(dim - 1, j)] = -a[j];
    }
    Ok(g)
}

/// Mode weights f_l = d_l * e_k(d_j^2 for j != l), the diagonal of F_k.
/// The empty product at k = 0 gives f_l = d_l.
pub fn mode_weights(d: &DVector<f64>, k: usize) -> PhResult<DVector<f64>> {
    check_positive(d)?;
    let n = d.len();
    if k >= n {
        return Err(PhError::InvalidArgument(format!(
            "subset size k = {k} out of range for {n} modes (need k <= n-1)"
        )));
    }
    let mut f = DVector::zeros(n);
    for l in 0..n {
        // Expand prod_{j != l} (mu + d_j^2); coefficient of mu^{n-1-k} is
        // e_k of the squares with index l removed.
        let mut p = vec![0.0; n];
        p[0] = 1.0;
        let mut deg = 0usize;
        for (j, dj) in d.iter().enumerate() {
            if j == l {
                continue;
            }
            let dj2 = dj * dj;
            deg += 1;
            for t in (0..=deg).rev() {
                let lower = if t == 0 { 0.0 } else { p[t - 1] };
                p[t] = lower + dj2 * p[t];
            }
        }
        f[l] = d[l] * p[n - 1 - k];
    }
    Ok(f)
}

/// Output coefficients (c_1, c_3, .., c_{2n-1}):
/// c_{2k+1} = v^T blockdiag(F_k, F_k) v = sum_l f_l(d, k) (v_l^2 + v_{n+l}^2).
pub fn output_coeffs(p: &NormalFormParams) -> Vec<f64> {
    let n = p.n();
    let v = p.v();
    let radii_sq: Vec<f64> = (0..n).map(|l| v[l] * v[l] + v[n + l] * v[n + l]).collect();
    (0..n)
        .map(|k| {
            let f = mode_weights(p.d(), k).expect("params validated on construction");
            (0..n).map(|l| f[l] * radii_sq[l]).sum()
        })
        .collect()
}

/// The row (0, c_{2n-1}, 0, c_{2n-3}, .., 0, c_1) shared by the CH output
/// map and (transposed) the OH input map.
pub fn coeff_row(p: &NormalFormParams) -> RowDVector<f64> {
    let n = p.n();
    let c = output_coeffs(p);
    let mut row = RowDVector::zeros(2 * n);
    for j in 0..n {
        // position 2j+1 holds c_{2(n-1-j)+1}
        row[2 * j + 1] = c[n - 1 - j];
    }
    row
}

/// Controllable Hamiltonian realization: companion A, B = e_{2n},
/// C the odd-coefficient row.
pub fn build_ch(p: &NormalFormParams) -> RealizedLti {
    let dim = 2 * p.n();
    let a = companion_g1(p.d()).expect("params validated on construction");
    let mut b = DVector::zeros(dim);
    b[dim - 1] = 1.0;
    RealizedLti {
        dim,
        a,
        b,
        c: coeff_row(p),
        tag: RealizationTag::Ch,
    }
}

/// Observable Hamiltonian realization: the transpose of the CH one, with the
/// coefficient row moved to the input side and C = e_{2n}^T.
pub fn build_oh(p: &NormalFormParams) -> RealizedLti {
    let dim = 2 * p.n();
    let a = companion_g1(p.d())
        .expect("params validated on construction")
        .transpose();
    let b = coeff_row(p).transpose();
    let mut c = RowDVector::zeros(dim);
    c[dim - 1] = 1.0;
    RealizedLti {
        dim,
        a,
        b,
        c,
        tag: RealizationTag::Oh,
    }
}

/// Flatten a port-Hamiltonian system: A = J Q, B = B, C = B^T Q.
pub fn realize_ph(sys: &PhSystem) -> RealizedLti {
    let n = sys.n();
    let a = jmat(n) * sys.q().entries();
    let c = (sys.q().entries() * sys.b()).transpose();
    RealizedLti {
        dim: 2 * n,
        a,
        b: sys.b().clone(),
        c,
        tag: RealizationTag::Ph,
    }
}

/// Characteristic polynomial of a square matrix, monic, ascending
/// coefficients (length dim + 1), by the Faddeev-LeVerrier recursion.
pub fn charpoly(a: &DMatrix<f64>) -> Vec<f64> {
    let m = a.nrows();
    assert!(a.is_square());
    let mut den = vec![0.0; m + 1];
    den[m] = 1.0;
    let mut mat = DMatrix::<f64>::identity(m, m);
    for k in 1..=m {
        if k > 1 {
            mat = a * mat;
            let pk_prev = den[m - k + 1];
            for i in 0..m {
                mat[(i, i)] += pk_prev;
            }
        }
        let pk = -(a * &mat).trace() / k as f64;
        den[m - k] = pk;
    }
    den
}

/// Transfer function H(s) = C (sI - A)^{-1} B as an exact rational function
/// via Faddeev-LeVerrier; no pole/zero cancellation is performed.
pub fn transfer_function(r: &RealizedLti) -> TransferFunction {
    let m = r.dim;
    let mut den = vec![0.0; m + 1];
    den[m] = 1.0;
    let mut num = vec![0.0; m];
    // M_1 = I; M_{k+1} = A M_k + p_k I; p_k = -tr(A M_k) / k.
    // (sI - A)^{-1} = sum_k M_k s^{m-k} / charpoly(s).
    let mut mat = DMatrix::<f64>::identity(m, m);
    for k in 1..=m {
        if k > 1 {
            mat = &r.a * mat;
            let pk_prev = den[m - k + 1];
            for i in 0..m {
                mat[(i, i)] += pk_prev;
            }
        }
        let pk = -(&r.a * &mat).trace() / k as f64;
        den[m - k] = pk;
        num[m - k] = (&r.c * &mat * &r.b)[(0, 0)];
    }
    TransferFunction { num, den }
}

impl TransferFunction {
    /// Numerator degree after trimming trailing zero coefficients;
    /// `None` for the zero numerator.
    pub fn num_degree(&self) -> Option<usize> {
        let scale = self.max_abs().max(1e-300);
        self.num.iter().rposition(|c| c.abs() > 1e-12 * scale)
    }

    fn max_abs(&self) -> f64 {
        self.num
            .iter()
            .chain(self.den.iter())
            .fold(0.0f64, |m, c| m.max(c.abs()))
    }

    /// Cancel numerator/denominator root pairs closer than `tol` and rebuild
    /// both polynomials from the surviving roots (minimal-form comparison).
    pub fn reduce(&self, tol: f64) -> TransferFunction {
        let num_scale = self.num.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let Some(deg) = self.num_degree() else {
            return TransferFunction {
                num: vec![0.0],
                den: self.den.clone(),
            };
        };
        let lead = self.num[deg];
        let num_roots = poly_roots(&self.num[..=deg]);
        let den_roots = poly_roots(&self.den);

        let mut den_used = vec![false; den_roots.len()];
        let mut kept_num: Vec<Complex64> = Vec::new();
        for rn in &num_roots {
            let mut best: Option<(usize, f64)> = None;
            for (i, rd) in den_roots.iter().enumerate() {
                if den_used[i] {
                    continue;
                }
                let dist = (rn - rd).norm();
                if best.map_or(true, |(_, d)| dist < d) {
                    best = Some((i, dist));
                }
            }
            match best {
                Some((i, dist)) if dist <= tol * den_roots[i].norm().max(1.0) => {
                    den_used[i] = true;
                }
                _ => kept_num.push(*rn),
            }
        }
        let kept_den: Vec<Complex64> = den_roots
            .iter()
            .zip(&den_used)
            .filter(|(_, used)| !**used)
            .map(|(r, _)| *r)
            .collect();

        let mut num = poly_from_roots(&kept_num, lead);
        let den = poly_from_roots(&kept_den, 1.0);
        if num.iter().all(|c| c.abs() <= 1e-12 * num_scale.max(1.0)) {
            num = vec![0.0];
        }
        TransferFunction { num, den }
    }
}

/// Roots of a real polynomial (ascending coefficients, nonzero lead) by the
/// Durand-Kerner iteration with Newton polishing.
///
/// Bounded and deterministic; chosen over Schur iteration on the companion
/// matrix, which can fail to converge on the purely imaginary spectra these
/// even characteristic polynomials produce.
pub fn poly_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let deg = coeffs.len() - 1;
    if deg == 0 {
        return Vec::new();
    }
    let lead = coeffs[deg];
    let monic: Vec<f64> = coeffs.iter().map(|c| c / lead).collect();
    let eval = |z: Complex64| -> Complex64 {
        let mut acc = Complex64::new(1.0, 0.0);
        for k in (0..deg).rev() {
            acc = acc * z + monic[k];
        }
        acc
    };
    let eval_deriv = |z: Complex64| -> Complex64 {
        let mut acc = Complex64::new(deg as f64, 0.0);
        for k in (1..deg).rev() {
            acc = acc * z + monic[k] * k as f64;
        }
        acc
    };

    // Cauchy bound; start on a circle with an angular offset that breaks the
    // conjugate symmetry of real coefficients.
    let radius = 1.0 + monic[..deg].iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let mut roots: Vec<Complex64> = (0..deg)
        .map(|k| {
            Complex64::from_polar(
                radius,
                std::f64::consts::TAU * k as f64 / deg as f64 + 0.4,
            )
        })
        .collect();
    for _ in 0..500 {
        let mut max_step = 0.0f64;
        for i in 0..deg {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..deg {
                if j != i {
                    denom *= roots[i] - roots[j];
                }
            }
            if denom.norm() < 1e-300 {
                continue;
            }
            let step = eval(roots[i]) / denom;
            roots[i] -= step;
            max_step = max_step.max(step.norm());
        }
        if max_step <= 1e-14 * radius {
            break;
        }
    }
    for r in roots.iter_mut() {
        for _ in 0..3 {
            let dv = eval_deriv(*r);
            if dv.norm() < 1e-300 {
                break;
            }
            *r -= eval(*r) / dv;
        }
    }
    roots
}

/// Real polynomial lead * prod (s - r), ascending coefficients. Imaginary
/// residue from unpaired conjugates is discarded.
fn poly_from_roots(roots: &[Complex64], lead: f64) -> Vec<f64> {
    let mut p = vec![Complex64::new(1.0, 0.0)];
    for r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); p.len() + 1];
        for (k, pk) in p.iter().enumerate() {
            next[k + 1] += pk;
            next[k] -= pk * r;
        }
        p = next;
    }
    p.iter().map(|z| z.re * lead).collect()
}

fn check_positive(d: &DVector<f64>) -> PhResult<()> {
    if d.is_empty() {
        return Err(PhError::InvalidArgument(
            "at least one mode is required".into(),
        ));
    }
    if let Some(bad) = d.iter().find(|x| !(**x > 0.0)) {
        return Err(PhError::InvalidArgument(format!(
            "mode frequencies must be strictly positive, got {bad}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symplectic::{random_symplectic, symplectic_eigenvalues};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dv(xs: &[f64]) -> DVector<f64> {
        DVector::from_vec(xs.to_vec())
    }

    fn random_params(n: usize, seed: u64) -> NormalFormParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = DVector::from_fn(n, |_, _| rng.gen_range(0.5..3.0));
        let v = DVector::from_fn(2 * n, |_, _| rng.gen_range(-1.5..1.5));
        NormalFormParams::new(d, v).unwrap()
    }

    #[test]
    fn char_coeffs_expansions() {
        assert_eq!(char_coeffs(&dv(&[1.0])).unwrap(), vec![1.0, 0.0]);
        assert_eq!(
            char_coeffs(&dv(&[1.0, 2.0])).unwrap(),
            vec![4.0, 0.0, 5.0, 0.0]
        );
        assert_eq!(
            char_coeffs(&dv(&[2.0, 3.0])).unwrap(),
            vec![36.0, 0.0, 13.0, 0.0]
        );
    }

    #[test]
    fn char_coeffs_rejects_nonpositive() {
        assert!(char_coeffs(&dv(&[1.0, 0.0])).is_err());
        assert!(char_coeffs(&dv(&[-1.0])).is_err());
    }

    #[test]
    fn companion_matches_coefficients() {
        let g = companion_g1(&dv(&[1.0])).unwrap();
        assert_eq!(g, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]));

        let g = companion_g1(&dv(&[1.0, 2.0])).unwrap();
        assert_eq!(g.row(3).iter().copied().collect::<Vec<_>>(), vec![
            -4.0, 0.0, -5.0, 0.0
        ]);
    }

    #[test]
    fn companion_eigenvalues_are_mode_pairs() {
        // Root-finding oracle: the companion spectrum is that of its
        // characteristic polynomial s^4 + 5 s^2 + 4.
        let g = companion_g1(&dv(&[1.0, 2.0])).unwrap();
        let mut eigs: Vec<(f64, f64)> = poly_roots(&charpoly(&g))
            .iter()
            .map(|z| (z.im, z.re))
            .collect();
        eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let expected = [-2.0, -1.0, 1.0, 2.0];
        for (k, (im, re)) in eigs.iter().enumerate() {
            assert_relative_eq!(*im, expected[k], epsilon = 1e-9);
            assert_relative_eq!(*re, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn mode_weights_subset_sums() {
        assert_eq!(
            mode_weights(&dv(&[5.0]), 0).unwrap().as_slice(),
            &[5.0]
        );
        assert_eq!(
            mode_weights(&dv(&[1.0, 2.0]), 1).unwrap().as_slice(),
            &[4.0, 2.0]
        );
        assert_eq!(
            mode_weights(&dv(&[1.0, 2.0, 3.0]), 2).unwrap().as_slice(),
            &[36.0, 18.0, 12.0]
        );
        assert!(mode_weights(&dv(&[1.0, 2.0]), 2).is_err());
    }

    #[test]
    fn output_coeffs_examples() {
        let p = NormalFormParams::new(dv(&[1.0]), dv(&[1.0, 0.0])).unwrap();
        assert_eq!(output_coeffs(&p), vec![1.0]);

        let p = NormalFormParams::new(dv(&[1.0, 2.0]), dv(&[1.0, 1.0, 0.0, 0.0])).unwrap();
        assert_eq!(output_coeffs(&p), vec![3.0, 6.0]);

        let p = NormalFormParams::new(dv(&[1.0, 2.0]), dv(&[0.0; 4])).unwrap();
        assert_eq!(output_coeffs(&p), vec![0.0, 0.0]);
    }

    #[test]
    fn output_coeffs_rotation_invariant() {
        // c depends on v only through the per-mode radii.
        let p = random_params(3, 17);
        let base = output_coeffs(&p);
        let n = p.n();
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let mut v = p.v().clone();
        for l in 0..n {
            let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let (vl, vnl) = (v[l], v[n + l]);
            v[l] = theta.cos() * vl - theta.sin() * vnl;
            v[n + l] = theta.sin() * vl + theta.cos() * vnl;
        }
        let rotated = NormalFormParams::new(p.d().clone(), v).unwrap();
        let rot = output_coeffs(&rotated);
        for k in 0..n {
            assert_relative_eq!(base[k], rot[k], max_relative = 1e-12);
        }
    }

    #[test]
    fn build_ch_examples() {
        let p = NormalFormParams::new(dv(&[1.0]), dv(&[1.0, 0.0])).unwrap();
        let r = build_ch(&p);
        assert_eq!(r.a, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]));
        assert_eq!(r.b.as_slice(), &[0.0, 1.0]);
        assert_eq!(r.c.iter().copied().collect::<Vec<_>>(), vec![0.0, 1.0]);
        assert_eq!(r.tag, RealizationTag::Ch);

        let p = NormalFormParams::new(dv(&[1.0, 2.0]), dv(&[1.0, 1.0, 0.0, 0.0])).unwrap();
        let r = build_ch(&p);
        assert_eq!(
            r.c.iter().copied().collect::<Vec<_>>(),
            vec![0.0, 6.0, 0.0, 3.0]
        );
    }

    #[test]
    fn build_oh_is_transposed_ch() {
        let p = NormalFormParams::new(dv(&[1.0]), dv(&[1.0, 0.0])).unwrap();
        let r = build_oh(&p);
        assert_eq!(r.a, DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]));
        assert_eq!(r.b.as_slice(), &[0.0, 1.0]);
        assert_eq!(r.c.iter().copied().collect::<Vec<_>>(), vec![0.0, 1.0]);

        for n in 1..=4usize {
            let p = random_params(n, 40 + n as u64);
            let hc = transfer_function(&build_ch(&p));
            let ho = transfer_function(&build_oh(&p));
            for k in 0..hc.num.len() {
                assert_relative_eq!(hc.num[k], ho.num[k], epsilon = 1e-9, max_relative = 1e-9);
            }
            for k in 0..hc.den.len() {
                assert_relative_eq!(hc.den[k], ho.den[k], epsilon = 1e-9, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn realize_ph_examples() {
        let q = SpdMatrix::new(DMatrix::identity(2, 2)).unwrap();
        let sys = PhSystem::new(q, dv(&[1.0, 0.0])).unwrap();
        let r = realize_ph(&sys);
        assert_eq!(r.a, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]));
        assert_eq!(r.b.as_slice(), &[1.0, 0.0]);
        assert_eq!(r.c.iter().copied().collect::<Vec<_>>(), vec![1.0, 0.0]);

        let q = SpdMatrix::new(DMatrix::identity(2, 2)).unwrap();
        let sys = PhSystem::new(q, dv(&[0.0, 0.0])).unwrap();
        let r = realize_ph(&sys);
        assert!(r.c.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn realized_ph_is_traceless() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..=4usize {
            let dim = 2 * n;
            let g = DMatrix::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..1.0));
            let q = SpdMatrix::new(g.transpose() * &g + DMatrix::identity(dim, dim)).unwrap();
            let b = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
            let r = realize_ph(&PhSystem::new(q, b).unwrap());
            assert!(r.a.trace().abs() <= 1e-12 * r.a.norm().max(1.0));
        }
    }

    #[test]
    fn transfer_function_harmonic_oscillator() {
        let q = SpdMatrix::new(DMatrix::identity(2, 2)).unwrap();
        let sys = PhSystem::new(q, dv(&[1.0, 0.0])).unwrap();
        let h = transfer_function(&realize_ph(&sys));
        // H(s) = s / (s^2 + 1)
        assert_relative_eq!(h.num[0], 0.0, epsilon = 1e-14);
        assert_relative_eq!(h.num[1], 1.0, epsilon = 1e-14);
        assert_eq!(h.den, vec![1.0, 0.0, 1.0]);

        let p = NormalFormParams::new(dv(&[1.0]), dv(&[1.0, 0.0])).unwrap();
        let hc = transfer_function(&build_ch(&p));
        assert_relative_eq!(hc.num[1], 1.0, epsilon = 1e-14);
        assert_eq!(hc.den, vec![1.0, 0.0, 1.0]);
    }

    #[test]
    fn transfer_function_zero_input_vector() {
        let p = NormalFormParams::new(dv(&[1.0, 2.0]), dv(&[0.5, -0.3, 0.2, 0.9])).unwrap();
        let mut r = build_ch(&p);
        r.b = DVector::zeros(r.dim);
        let h = transfer_function(&r);
        assert!(h.num.iter().all(|c| c.abs() <= 1e-14));
        assert!(h.num_degree().is_none());
    }

    #[test]
    fn ch_numerator_has_only_odd_powers() {
        for n in 1..=4usize {
            let p = random_params(n, 60 + n as u64);
            let h = transfer_function(&build_ch(&p));
            for (k, c) in h.num.iter().enumerate() {
                if k % 2 == 0 {
                    assert!(
                        c.abs() <= 1e-10 * h.num.iter().fold(1.0f64, |m, x| m.max(x.abs())),
                        "even-power coefficient {k} = {c}"
                    );
                }
            }
        }
    }

    #[test]
    fn charpoly_of_jq_matches_char_coeffs() {
        // Cayley-Hamilton consistency: charpoly(J Q) has the symplectic
        // eigenvalues of Q as its mode frequencies.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=4usize {
            let dim = 2 * n;
            let g = DMatrix::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..1.0));
            let q = SpdMatrix::new(g.transpose() * &g + DMatrix::identity(dim, dim)).unwrap();
            let d = symplectic_eigenvalues(&q).unwrap();
            let a = char_coeffs(&d).unwrap();
            let cp = charpoly(&(jmat(n) * q.entries()));
            let scale = cp.iter().fold(1.0f64, |m, x| m.max(x.abs()));
            for k in 0..2 * n {
                assert!(
                    (cp[k] - a[k]).abs() <= 1e-8 * scale,
                    "n={n} k={k}: {} vs {}",
                    cp[k],
                    a[k]
                );
            }
            assert_relative_eq!(cp[2 * n], 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn reduce_cancels_matched_pairs() {
        // (s^2 + 1) s / ((s^2 + 1)(s^2 + 4)) reduces to s / (s^2 + 4).
        let h = TransferFunction {
            num: vec![0.0, 1.0, 0.0, 1.0],
            den: vec![4.0, 0.0, 5.0, 0.0, 1.0],
        };
        let r = h.reduce(1e-7);
        assert_eq!(r.num.len(), 2);
        assert_relative_eq!(r.num[1], 1.0, epsilon = 1e-9);
        assert_eq!(r.den.len(), 3);
        assert_relative_eq!(r.den[0], 4.0, epsilon = 1e-9);
        assert_relative_eq!(r.den[2], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn param_counts() {
        let p = random_params(5, 1);
        assert_eq!(p.param_count(), 15);
        let q = SpdMatrix::new(DMatrix::identity(4, 4)).unwrap();
        let sys = PhSystem::new(q, dv(&[0.0; 4])).unwrap();
        assert_eq!(sys.param_count(), 2 * 5 + 4); // n=2: n(2n+1) + 2n = 10 + 4
    }

    #[test]
    fn params_reject_zero_frequency() {
        assert!(NormalFormParams::new(dv(&[0.0]), dv(&[1.0, 0.0])).is_err());
        assert!(NormalFormParams::new(dv(&[1.0]), dv(&[1.0])).is_err());
    }
}
