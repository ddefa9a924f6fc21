//! File formats: JSON system files and CSV trajectories.
//!
//! System files carry a `type` tag and row-major numeric arrays; loading
//! re-validates every payload invariant through the ordinary constructors.
//! Trajectory CSV uses the header `t,u,y[,x1..x2n]` with 17 significant
//! digits so that values round-trip bit-exactly.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector, RowDVector};
use serde::{Deserialize, Serialize};

use crate::equivalence::{CanonicalChart, StarWitness};
use crate::error::{PhError, PhResult};
use crate::learn::FitResult;
use crate::morphisms::{LinearMorphism, MorphismDirection, MorphismReport};
use crate::simulate::{Grid, Trajectory};
use crate::symplectic::{SpdMatrix, SymplecticMatrix, WilliamsonForm};
use crate::systems::{NormalFormParams, PhSystem, RealizationTag, RealizedLti};

/// Top-level JSON document, discriminated by `type`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SystemFile {
    Ph(PhFile),
    ChParams(ParamsFile),
    OhParams(ParamsFile),
    Realized(RealizedFile),
    Morphism(MorphismFile),
    FitResult(FitResultFile),
    Williamson(WilliamsonFile),
}

/// Ground truth embedded in generated files so experiments are
/// self-documenting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub kind: String,
    pub seed: u64,
    pub d: Vec<f64>,
    pub v: Vec<f64>,
    /// Row-major symplectic frame used by the synthesis map.
    pub s: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhFile {
    pub n: usize,
    /// Row-major 2n x 2n Hamiltonian matrix.
    pub q: Vec<f64>,
    pub b: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

/// Bare (Q, B) payload used where a nested PH system is needed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhPayload {
    pub q: Vec<f64>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamsFile {
    pub n: usize,
    pub d: Vec<f64>,
    pub v: Vec<f64>,
    /// Symplectic frame relating these parameters to a PH system, when known.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<Vec<f64>>,
    /// The PH system these parameters were derived from, when known.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<PhPayload>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RealizedFile {
    pub n: usize,
    pub tag: String,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualReport {
    pub equivariance: f64,
    pub input: f64,
    pub readout: f64,
    pub tol: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MorphismFile {
    pub n: usize,
    pub direction: String,
    pub matrix: Vec<f64>,
    pub rank: usize,
    pub residuals: ResidualReport,
    pub source: RealizedFile,
    pub target: RealizedFile,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitConfigEcho {
    pub seed: u64,
    pub iters: usize,
    pub restarts: usize,
    pub step_size: f64,
    pub mode: String,
    pub x0_policy: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResultFile {
    pub n: usize,
    pub d: Vec<f64>,
    pub v: Vec<f64>,
    pub canonical_d: Vec<f64>,
    pub canonical_r: Vec<f64>,
    pub final_rms: f64,
    pub loss_history: Vec<f64>,
    pub diverged: bool,
    pub degenerate_data: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<FitConfigEcho>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WilliamsonFile {
    pub n: usize,
    /// Row-major diagonalizing symplectic matrix.
    pub s: Vec<f64>,
    pub d: Vec<f64>,
    pub cond_k: f64,
    pub ill_conditioned: bool,
}

/// Equivalence witness document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WitnessFile {
    pub n: usize,
    pub equivalent: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_sigma: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residuals: Option<Vec<f64>>,
}

/// Canonical chart document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChartFile {
    pub n: usize,
    pub d: Vec<f64>,
    pub r: Vec<f64>,
}

pub fn save_system(sf: &SystemFile, w: &mut dyn Write) -> PhResult<()> {
    serde_json::to_writer_pretty(&mut *w, sf)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn load_system(r: &mut dyn std::io::Read) -> PhResult<SystemFile> {
    Ok(serde_json::from_reader(r)?)
}

pub fn mat_to_vec(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

pub fn vec_to_mat(rows: usize, cols: usize, data: &[f64]) -> PhResult<DMatrix<f64>> {
    if data.len() != rows * cols {
        return Err(PhError::Format(format!(
            "expected {rows}x{cols} = {} entries, got {}",
            rows * cols,
            data.len()
        )));
    }
    Ok(DMatrix::from_row_slice(rows, cols, data))
}

pub fn ph_to_file(sys: &PhSystem, provenance: Option<Provenance>) -> PhFile {
    PhFile {
        n: sys.n(),
        q: mat_to_vec(sys.q().entries()),
        b: sys.b().iter().copied().collect(),
        provenance,
    }
}

pub fn file_to_ph(f: &PhFile) -> PhResult<PhSystem> {
    let dim = 2 * f.n;
    let q = SpdMatrix::new(vec_to_mat(dim, dim, &f.q)?)?;
    if f.b.len() != dim {
        return Err(PhError::Format(format!(
            "interconnection vector must have length {dim}, got {}",
            f.b.len()
        )));
    }
    PhSystem::new(q, DVector::from_vec(f.b.clone()))
}

pub fn params_to_file(
    p: &NormalFormParams,
    s: Option<&SymplecticMatrix>,
    source: Option<&PhSystem>,
) -> ParamsFile {
    ParamsFile {
        n: p.n(),
        d: p.d().iter().copied().collect(),
        v: p.v().iter().copied().collect(),
        s: s.map(|m| mat_to_vec(m.entries())),
        source: source.map(|sys| PhPayload {
            q: mat_to_vec(sys.q().entries()),
            b: sys.b().iter().copied().collect(),
        }),
    }
}

pub fn file_to_params(f: &ParamsFile) -> PhResult<NormalFormParams> {
    if f.d.len() != f.n || f.v.len() != 2 * f.n {
        return Err(PhError::Format(format!(
            "parameter file with n = {} must carry {} frequencies and {} couplings",
            f.n,
            f.n,
            2 * f.n
        )));
    }
    NormalFormParams::new(
        DVector::from_vec(f.d.clone()),
        DVector::from_vec(f.v.clone()),
    )
}

pub fn params_file_context(f: &ParamsFile) -> PhResult<(Option<SymplecticMatrix>, Option<PhSystem>)> {
    let dim = 2 * f.n;
    let s = match &f.s {
        Some(data) => Some(SymplecticMatrix::new(vec_to_mat(dim, dim, data)?)?),
        None => None,
    };
    let source = match &f.source {
        Some(payload) => {
            let q = SpdMatrix::new(vec_to_mat(dim, dim, &payload.q)?)?;
            Some(PhSystem::new(q, DVector::from_vec(payload.b.clone()))?)
        }
        None => None,
    };
    Ok((s, source))
}

pub fn realized_to_file(r: &RealizedLti) -> RealizedFile {
    RealizedFile {
        n: r.n(),
        tag: r.tag.to_string(),
        a: mat_to_vec(&r.a),
        b: r.b.iter().copied().collect(),
        c: r.c.iter().copied().collect(),
    }
}

pub fn file_to_realized(f: &RealizedFile) -> PhResult<RealizedLti> {
    let dim = 2 * f.n;
    let tag = match f.tag.as_str() {
        "PH" => RealizationTag::Ph,
        "CH" => RealizationTag::Ch,
        "OH" => RealizationTag::Oh,
        other => {
            return Err(PhError::Format(format!(
                "unknown realization tag '{other}' (expected PH, CH or OH)"
            )))
        }
    };
    RealizedLti::new(
        vec_to_mat(dim, dim, &f.a)?,
        DVector::from_vec(f.b.clone()),
        RowDVector::from_vec(f.c.clone()),
        tag,
    )
}

pub fn morphism_to_file(m: &LinearMorphism, report: &MorphismReport) -> MorphismFile {
    MorphismFile {
        n: m.source.n(),
        direction: m.direction.to_string(),
        matrix: mat_to_vec(&m.matrix),
        rank: m.rank,
        residuals: ResidualReport {
            equivariance: report.equivariance,
            input: report.input,
            readout: report.readout,
            tol: report.tol,
            pass: report.pass(),
        },
        source: realized_to_file(&m.source),
        target: realized_to_file(&m.target),
    }
}

pub fn file_to_morphism(f: &MorphismFile) -> PhResult<LinearMorphism> {
    let dim = 2 * f.n;
    let direction = match f.direction.as_str() {
        "CH->PH" => MorphismDirection::ChToPh,
        "PH->OH" => MorphismDirection::PhToOh,
        other => {
            return Err(PhError::Format(format!(
                "unknown morphism direction '{other}'"
            )))
        }
    };
    Ok(LinearMorphism {
        matrix: vec_to_mat(dim, dim, &f.matrix)?,
        direction,
        source: file_to_realized(&f.source)?,
        target: file_to_realized(&f.target)?,
        rank: f.rank,
    })
}

pub fn williamson_to_file(wf: &WilliamsonForm) -> WilliamsonFile {
    WilliamsonFile {
        n: wf.s.n(),
        s: mat_to_vec(wf.s.entries()),
        d: wf.d.iter().copied().collect(),
        cond_k: wf.cond_k,
        ill_conditioned: wf.is_ill_conditioned(),
    }
}

pub fn fit_result_to_file(r: &FitResult, config: Option<FitConfigEcho>) -> FitResultFile {
    FitResultFile {
        n: r.params.n(),
        d: r.params.d().iter().copied().collect(),
        v: r.params.v().iter().copied().collect(),
        canonical_d: r.canonical_form.d_sorted.clone(),
        canonical_r: r.canonical_form.r.clone(),
        final_rms: r.final_rms,
        loss_history: r.loss_history.clone(),
        diverged: r.diverged,
        degenerate_data: r.degenerate_data,
        config,
    }
}

pub fn witness_to_file(n: usize, w: Option<&StarWitness>) -> WitnessFile {
    WitnessFile {
        n,
        equivalent: w.is_some(),
        p_sigma: w.map(|w| mat_to_vec(&w.p_sigma)),
        a: w.map(|w| mat_to_vec(&w.a)),
        residuals: w.map(|w| w.residuals.to_vec()),
    }
}

pub fn chart_to_file(chart: &CanonicalChart) -> ChartFile {
    ChartFile {
        n: chart.d_sorted.len(),
        d: chart.d_sorted.clone(),
        r: chart.r.clone(),
    }
}

/// Write a trajectory as CSV: header `t,u,y[,x1..x2n]`, 17 significant
/// digits, LF line endings.
pub fn write_trajectory_csv(t: &Trajectory, w: &mut dyn Write) -> PhResult<()> {
    let state_dim = t.x.as_ref().map_or(0, |xs| xs.first().map_or(0, |x| x.len()));
    let mut header = String::from("t,u,y");
    for i in 1..=state_dim {
        header.push_str(&format!(",x{i}"));
    }
    header.push('\n');
    w.write_all(header.as_bytes())?;
    for k in 0..t.grid.count {
        let mut line = format!(
            "{:.16e},{:.16e},{:.16e}",
            t.grid.t(k),
            t.u[k],
            t.y[k]
        );
        if let Some(xs) = &t.x {
            for value in xs[k].iter() {
                line.push_str(&format!(",{value:.16e}"));
            }
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    Ok(())
}

/// Read a trajectory CSV produced by [`write_trajectory_csv`] (state columns
/// optional). The time column must be uniformly spaced.
pub fn read_trajectory_csv(r: &mut dyn BufRead) -> PhResult<Trajectory> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| PhError::Format("empty trajectory file".into()))??;
    let cols: Vec<&str> = header.trim().split(',').collect();
    if cols.len() < 3 || cols[0] != "t" || cols[1] != "u" || cols[2] != "y" {
        return Err(PhError::Format(format!(
            "trajectory header must start with 't,u,y', got '{header}'"
        )));
    }
    let state_dim = cols.len() - 3;

    let mut times = Vec::new();
    let mut u = Vec::new();
    let mut y = Vec::new();
    let mut xs: Vec<DVector<f64>> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != cols.len() {
            return Err(PhError::Format(format!(
                "row {}: expected {} fields, got {}",
                lineno + 2,
                cols.len(),
                fields.len()
            )));
        }
        let parse = |s: &str| -> PhResult<f64> {
            s.parse::<f64>()
                .map_err(|_| PhError::Format(format!("row {}: bad number '{s}'", lineno + 2)))
        };
        times.push(parse(fields[0])?);
        u.push(parse(fields[1])?);
        y.push(parse(fields[2])?);
        if state_dim > 0 {
            let mut x = DVector::zeros(state_dim);
            for i in 0..state_dim {
                x[i] = parse(fields[3 + i])?;
            }
            xs.push(x);
        }
    }
    if times.len() < 2 {
        return Err(PhError::Format(
            "trajectory needs at least two samples".into(),
        ));
    }
    let dt = times[1] - times[0];
    if !(dt > 0.0) {
        return Err(PhError::Format("time column must be increasing".into()));
    }
    for k in 1..times.len() {
        let expected = times[0] + dt * k as f64;
        if (times[k] - expected).abs() > 1e-9 * dt.max(1.0) * (k as f64).max(1.0) {
            return Err(PhError::Format(format!(
                "time column is not uniform at row {}",
                k + 2
            )));
        }
    }
    let grid = Grid::new(times[0], dt, times.len())?;
    Ok(Trajectory {
        grid,
        u,
        y,
        x: if state_dim > 0 { Some(xs) } else { None },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{simulate, InputSignal, SimMethod};
    use crate::systems::realize_ph;

    fn sample_ph() -> PhSystem {
        let q = SpdMatrix::new(DMatrix::from_row_slice(
            2,
            2,
            &[2.0, 1.0 / 3.0, 1.0 / 3.0, 1.5],
        ))
        .unwrap();
        PhSystem::new(q, DVector::from_vec(vec![std::f64::consts::SQRT_2, -0.25])).unwrap()
    }

    #[test]
    fn json_roundtrip_is_bitwise() {
        let sf = SystemFile::Ph(ph_to_file(&sample_ph(), None));
        let mut buf = Vec::new();
        save_system(&sf, &mut buf).unwrap();
        let loaded = load_system(&mut buf.as_slice()).unwrap();
        let mut buf2 = Vec::new();
        save_system(&loaded, &mut buf2).unwrap();
        assert_eq!(buf, buf2);

        let SystemFile::Ph(f) = &loaded else {
            panic!("wrong type tag");
        };
        let sys = file_to_ph(f).unwrap();
        assert_eq!(sys.q().entries(), sample_ph().q().entries());
        assert_eq!(sys.b(), sample_ph().b());
    }

    #[test]
    fn load_revalidates_invariants() {
        let mut f = ph_to_file(&sample_ph(), None);
        f.q[1] += 0.5; // break symmetry
        assert!(file_to_ph(&f).is_err());

        let bad_params = ParamsFile {
            n: 1,
            d: vec![-1.0],
            v: vec![0.0, 0.0],
            s: None,
            source: None,
        };
        assert!(file_to_params(&bad_params).is_err());
    }

    #[test]
    fn csv_roundtrip_is_exact() {
        let r = realize_ph(&sample_ph());
        let grid = Grid::new(0.0, 1.0 / 3.0, 50).unwrap();
        let traj = simulate(
            &r,
            &DVector::from_vec(vec![1.0, 0.0]),
            &InputSignal::Sine {
                omega: 1.1,
                amplitude: 0.7,
            },
            &grid,
            SimMethod::ZohExact,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&traj, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,u,y,x1,x2\n"));
        assert!(!text.contains('\r'));

        let loaded = read_trajectory_csv(&mut buf.as_slice()).unwrap();
        assert_eq!(loaded.grid.count, 50);
        assert_eq!(loaded.y, traj.y);
        assert_eq!(loaded.u, traj.u);
        let xs = loaded.x.unwrap();
        let orig = traj.x.unwrap();
        for k in 0..50 {
            assert_eq!(xs[k], orig[k]);
        }
    }

    #[test]
    fn csv_rejects_malformed_input() {
        let bad_header = b"time,u,y\n0,0,0\n1,0,0\n";
        assert!(read_trajectory_csv(&mut bad_header.as_slice()).is_err());

        let ragged = b"t,u,y\n0,0,0\n1,0\n";
        assert!(read_trajectory_csv(&mut ragged.as_slice()).is_err());

        let nonuniform = b"t,u,y\n0,0,0\n1,0,0\n2.5,0,0\n";
        assert!(read_trajectory_csv(&mut nonuniform.as_slice()).is_err());
    }

    #[test]
    fn realized_file_roundtrip() {
        let r = realize_ph(&sample_ph());
        let f = realized_to_file(&r);
        let r2 = file_to_realized(&f).unwrap();
        assert_eq!(r.a, r2.a);
        assert_eq!(r.b, r2.b);
        assert_eq!(r.c, r2.c);
        assert_eq!(r.tag, r2.tag);

        let mut bad = realized_to_file(&r);
        bad.tag = "XX".into();
        assert!(file_to_realized(&bad).is_err());
    }
}
