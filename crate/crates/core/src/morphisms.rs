//! Linear system morphisms between the three families.
//!
//! A linear map f intertwines two realizations when f A_src = A_dst f,
//! f B_src = B_dst and C_src = C_dst f. The CH -> PH morphism L and the
//! PH -> OH morphism M are forced by these identities together with the
//! companion structure of the normal forms, which pins every column (resp.
//! row) through a backward recursion in the characteristic coefficients.
//! Invertibility of L is equivalent to the port-Hamiltonian system being
//! canonical (controllable and observable).

use nalgebra::{DMatrix, RowDVector};

use crate::error::{PhError, PhResult};
use crate::symplectic::{dhat, jmat, williamson, SpdMatrix, SymplecticMatrix};
use crate::systems::{
    build_ch, build_oh, char_coeffs, coeff_row, realize_ph, NormalFormParams, PhSystem,
    RealizedLti,
};
use crate::tol;

/// Direction of a constructed morphism.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MorphismDirection {
    ChToPh,
    PhToOh,
}

impl std::fmt::Display for MorphismDirection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MorphismDirection::ChToPh => write!(f, "CH->PH"),
            MorphismDirection::PhToOh => write!(f, "PH->OH"),
        }
    }
}

/// A linear system morphism between two realizations, with its numerical rank.
#[derive(Debug, Clone)]
pub struct LinearMorphism {
    pub matrix: DMatrix<f64>,
    pub direction: MorphismDirection,
    pub source: RealizedLti,
    pub target: RealizedLti,
    pub rank: usize,
}

/// Image of the parameter map phi_S: the PH system S^T D^ S, S^{-1} v
/// together with the data that produced it.
#[derive(Debug, Clone)]
pub struct PhiSImage {
    pub s: SymplecticMatrix,
    pub params: NormalFormParams,
    pub ph: PhSystem,
}

/// Residual report of the morphism identities at a given tolerance.
#[derive(Debug, Clone)]
pub struct MorphismReport {
    pub equivariance: f64,
    pub input: f64,
    pub readout: f64,
    pub tol: f64,
}

impl MorphismReport {
    pub fn pass(&self) -> bool {
        self.equivariance <= self.tol && self.input <= self.tol && self.readout <= self.tol
    }

    pub fn max_residual(&self) -> f64 {
        self.equivariance.max(self.input).max(self.readout)
    }
}

/// Canonicality decision with its diagnostics.
#[derive(Debug, Clone)]
pub struct CanonicalityReport {
    pub canonical: bool,
    /// Numerical rank of the controllability matrix.
    pub rank: usize,
    pub dim: usize,
    pub singular_values: Vec<f64>,
    /// Symplectic eigenvalues of Q, ascending.
    pub d: Vec<f64>,
    /// Mode radii of v = S B in the Williamson frame.
    pub radii: Vec<f64>,
    /// The equivalent normal-form criterion: d pairwise distinct and all
    /// mode radii nonzero.
    pub distinct_d: bool,
    pub positive_radii: bool,
}

/// Krylov controllability matrix [B, AB, ..., A^{2n-1} B].
pub fn controllability_matrix(r: &RealizedLti) -> DMatrix<f64> {
    let dim = r.dim;
    let mut m = DMatrix::zeros(dim, dim);
    let mut col = r.b.clone();
    for j in 0..dim {
        m.set_column(j, &col);
        if j + 1 < dim {
            col = &r.a * col;
        }
    }
    m
}

/// Stacked observability matrix [C; CA; ...; C A^{2n-1}].
pub fn observability_matrix(r: &RealizedLti) -> DMatrix<f64> {
    let dim = r.dim;
    let mut m = DMatrix::zeros(dim, dim);
    let mut row = r.c.clone();
    for i in 0..dim {
        m.set_row(i, &row);
        if i + 1 < dim {
            row = &row * &r.a;
        }
    }
    m
}

/// Numerical rank at threshold `rel_tol * sigma_max`, with the singular values.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> (usize, Vec<f64>) {
    let svals = m.clone().svd(false, false).singular_values;
    let smax = svals.max();
    let rank = if smax <= 0.0 {
        0
    } else {
        svals.iter().filter(|s| **s > rel_tol * smax).count()
    };
    (rank, svals.iter().copied().collect())
}

/// Cosine of the largest principal angle between the column spans of two
/// matrices of equal numerical rank; 0.0 when the ranks differ.
pub fn span_alignment(a: &DMatrix<f64>, b: &DMatrix<f64>, rel_tol: f64) -> f64 {
    let (ra, _) = numerical_rank(a, rel_tol);
    let (rb, _) = numerical_rank(b, rel_tol);
    if ra != rb {
        return 0.0;
    }
    if ra == 0 {
        return 1.0;
    }
    let ua = a.clone().svd(true, false).u.expect("svd with u");
    let ub = b.clone().svd(true, false).u.expect("svd with u");
    let qa = ua.columns(0, ra).into_owned();
    let qb = ub.columns(0, rb).into_owned();
    let overlap = qa.transpose() * qb;
    overlap.svd(false, false).singular_values.min()
}

/// A port-Hamiltonian system is canonical iff its controllability matrix has
/// full numerical rank; equivalently, its symplectic eigenvalues are pairwise
/// distinct and every mode radius of v = S B is nonzero.
pub fn is_canonical(sys: &PhSystem, rank_tol: f64) -> PhResult<CanonicalityReport> {
    let realized = realize_ph(sys);
    let ctrb = controllability_matrix(&realized);
    let (rank, singular_values) = numerical_rank(&ctrb, rank_tol);
    let dim = sys.dim();

    let wf = williamson(sys.q())?;
    let v = wf.s.entries() * sys.b();
    let params = NormalFormParams::new(wf.d.clone(), v)?;
    let radii = params.mode_radii();

    let n = sys.n();
    let mut distinct_d = true;
    for j in 1..n {
        if (wf.d[j] - wf.d[j - 1]).abs() <= tol::EQUAL_D_GAP * wf.d[j].max(1.0) {
            distinct_d = false;
        }
    }
    let v_scale = params.v().norm().max(1.0);
    let positive_radii = radii.iter().all(|r| *r > rank_tol.sqrt() * 1e-4 * v_scale);

    Ok(CanonicalityReport {
        canonical: rank == dim,
        rank,
        dim,
        singular_values,
        d: wf.d.iter().copied().collect(),
        radii: radii.iter().copied().collect(),
        distinct_d,
        positive_radii,
    })
}

/// The parameter map phi_S: (d, v) -> (S^T blockdiag(D, D) S, S^{-1} v).
pub fn phi_s(p: &NormalFormParams, s: &SymplecticMatrix) -> PhResult<PhiSImage> {
    if s.n() != p.n() {
        return Err(PhError::DimensionMismatch {
            expected: format!("symplectic matrix of dimension {}", 2 * p.n()),
            got: format!("dimension {}", s.dim()),
        });
    }
    let q = SpdMatrix::new(s.entries().transpose() * dhat(p.d()) * s.entries())?;
    let b = s.inverse().entries() * p.v();
    Ok(PhiSImage {
        s: s.clone(),
        params: p.clone(),
        ph: PhSystem::new(q, b)?,
    })
}

/// The CH -> PH morphism L for the pair (p, S), built by the backward column
/// recursion l_{2n} = B, l_{j-1} = (JQ) l_j + a_{j-1} B.
///
/// Verifies the three defining identities before returning; the readout
/// identity `B^T Q L = g2(d, v)` cross-checks the closed-form output
/// coefficients against the morphism equations.
pub fn ch_to_ph_morphism(p: &NormalFormParams, s: &SymplecticMatrix) -> PhResult<LinearMorphism> {
    let image = phi_s(p, s)?;
    morphism_from_image(&image)
}

/// Same as [`ch_to_ph_morphism`] but reusing an already computed phi_S image.
pub fn morphism_from_image(image: &PhiSImage) -> PhResult<LinearMorphism> {
    let p = &image.params;
    let n = p.n();
    let dim = 2 * n;
    let a = char_coeffs(p.d())?;
    let jq = jmat(n) * image.ph.q().entries();
    let b = image.ph.b();

    let mut l = DMatrix::zeros(dim, dim);
    l.set_column(dim - 1, b);
    for c in (1..dim).rev() {
        let col = &jq * l.column(c) + b * a[c];
        l.set_column(c - 1, &col);
    }

    let source = build_ch(p);
    let target = realize_ph(&image.ph);
    let report = residuals(&l, &source, &target, tol::MORPHISM_REL);
    if !report.pass() {
        return Err(PhError::MorphismResidual {
            name: "CH->PH",
            residual: report.max_residual(),
            tol: report.tol,
        });
    }
    let (rank, _) = numerical_rank(&l, tol::RANK_REL);
    Ok(LinearMorphism {
        matrix: l,
        direction: MorphismDirection::ChToPh,
        source,
        target,
        rank,
    })
}

/// The PH -> OH morphism M, with the normal-form parameters (d, v = S B)
/// read off the Williamson decomposition of Q. Rows follow the backward
/// recursion m_{2n} = B^T Q, m_{j-1} = m_j (JQ) + a_{j-1} m_{2n}.
///
/// The identity `M B = g2(d, v)^T` validates the closed-form coefficients
/// from the observable side. The morphism exists for every system,
/// canonical or not.
pub fn ph_to_oh_morphism(sys: &PhSystem) -> PhResult<(LinearMorphism, NormalFormParams)> {
    let n = sys.n();
    let dim = 2 * n;
    let wf = williamson(sys.q())?;
    let v = wf.s.entries() * sys.b();
    let params = NormalFormParams::new(wf.d.clone(), v)?;
    let a = char_coeffs(params.d())?;

    let jq = jmat(n) * sys.q().entries();
    let last: RowDVector<f64> = (sys.q().entries() * sys.b()).transpose();

    let mut m = DMatrix::zeros(dim, dim);
    m.set_row(dim - 1, &last);
    for r in (1..dim).rev() {
        let row = m.row(r) * &jq + &last * a[r];
        m.set_row(r - 1, &row);
    }

    let source = realize_ph(sys);
    let target = build_oh(&params);
    let report = residuals(&m, &source, &target, tol::MORPHISM_REL);
    if !report.pass() {
        return Err(PhError::MorphismResidual {
            name: "PH->OH",
            residual: report.max_residual(),
            tol: report.tol,
        });
    }
    let (rank, _) = numerical_rank(&m, tol::RANK_REL);
    Ok((
        LinearMorphism {
            matrix: m,
            direction: MorphismDirection::PhToOh,
            source,
            target,
            rank,
        },
        params,
    ))
}

/// Check the morphism identities of `f.matrix` against an arbitrary
/// source/target pair and report the residuals.
pub fn verify_morphism(
    f: &LinearMorphism,
    src: &RealizedLti,
    dst: &RealizedLti,
    tol: f64,
) -> MorphismReport {
    residuals(&f.matrix, src, dst, tol)
}

fn residuals(f: &DMatrix<f64>, src: &RealizedLti, dst: &RealizedLti, tol: f64) -> MorphismReport {
    let scale = {
        let s = f.norm() * src.a.norm().max(dst.a.norm());
        s.max(src.b.norm()).max(src.c.norm()).max(1.0)
    };
    let equivariance = (f * &src.a - &dst.a * f).norm() / scale;
    let input = (f * &src.b - &dst.b).norm() / scale;
    let readout = (&src.c - &dst.c * f).norm() / scale;
    MorphismReport {
        equivariance,
        input,
        readout,
        tol,
    }
}

/// Convenience: check the defining identity residuals of an already
/// constructed morphism against its stored source and target.
pub fn self_check(f: &LinearMorphism, tol: f64) -> MorphismReport {
    residuals(&f.matrix, &f.source, &f.target, tol)
}

/// The readout identity in explicit coefficient form: B^T Q L as a row, for
/// comparison against the closed-form coefficient row of (d, v).
pub fn readout_row(image: &PhiSImage, l: &LinearMorphism) -> RowDVector<f64> {
    (image.ph.q().entries() * image.ph.b()).transpose() * &l.matrix
}

/// Coefficient row predicted by the closed form, for the same comparison.
pub fn predicted_row(p: &NormalFormParams) -> RowDVector<f64> {
    coeff_row(p)
}
