//! Structure-preserving estimation of normal-form parameters from
//! input/output trajectories.
//!
//! The model class is the normal-form family itself: the optimizer works on
//! (delta, v) with d = exp(delta), so every iterate is a valid parameter
//! point and therefore a genuine port-Hamiltonian system for any choice of
//! symplectic frame. Estimation errors can move the parameters, never the
//! structure.
//!
//! The loss is the mean squared output error under exact ZOH simulation,
//! minimized by Adam on central finite-difference gradients with seeded
//! multi-restart. Mode frequencies are initialized from the peaks of the
//! output periodogram.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::equivalence::{canonicalize, CanonicalChart};
use crate::error::{PhError, PhResult};
use crate::simulate::Trajectory;
use crate::systems::{build_ch, build_oh, NormalFormParams, RealizedLti};
use crate::tol;

/// Which normal form to fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMode {
    Ch,
    Oh,
}

/// How initial conditions are treated during fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum X0Policy {
    /// All trajectories start from the origin.
    Zero,
    /// Per-trajectory x0 fitted by linear least squares given the current
    /// parameters (the state-to-output map is linear in x0).
    Estimate,
}

/// Input/output training data: trajectories with inputs and outputs but no
/// states, plus the assumed mode count.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub trajectories: Vec<Trajectory>,
    pub n: usize,
    pub x0_policy: X0Policy,
}

impl Dataset {
    pub fn new(trajectories: Vec<Trajectory>, n: usize, x0_policy: X0Policy) -> PhResult<Self> {
        if n == 0 {
            return Err(PhError::InvalidArgument(
                "mode count n must be at least 1".into(),
            ));
        }
        if trajectories.is_empty() {
            return Err(PhError::DegenerateData("no trajectories".into()));
        }
        for (i, t) in trajectories.iter().enumerate() {
            if t.u.len() != t.grid.count || t.y.len() != t.grid.count {
                return Err(PhError::GridMismatch(format!(
                    "trajectory {i}: u/y lengths do not match the grid"
                )));
            }
        }
        Ok(Self {
            trajectories,
            n,
            x0_policy,
        })
    }

    /// True when every output sample is (numerically) zero.
    pub fn is_degenerate(&self) -> bool {
        self.trajectories
            .iter()
            .all(|t| t.y.iter().all(|y| y.abs() < 1e-300))
    }

    /// Mean over trajectories of the mean squared output, i.e. the loss of
    /// the zero model.
    pub fn mean_square_output(&self) -> f64 {
        let mut acc = 0.0;
        for t in &self.trajectories {
            acc += t.y.iter().map(|y| y * y).sum::<f64>() / t.y.len() as f64;
        }
        acc / self.trajectories.len() as f64
    }
}

/// Optimizer options. Restarts re-seed the initialization; the best final
/// loss wins, ties broken by the lowest restart index.
#[derive(Debug, Clone)]
pub struct FitOptions {
    pub iters: usize,
    pub step_size: f64,
    pub seed: u64,
    pub restarts: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            iters: 400,
            step_size: 0.05,
            seed: 0,
            restarts: 4,
        }
    }
}

/// Outcome of a fit.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: NormalFormParams,
    /// Present when the dataset policy was `Estimate`.
    pub x0_estimates: Option<Vec<DVector<f64>>>,
    /// Loss after every iteration of the winning restart.
    pub loss_history: Vec<f64>,
    /// sqrt of the recomputed loss at the returned parameters.
    pub final_rms: f64,
    pub canonical_form: CanonicalChart,
    /// Set when the winning restart hit a non-finite loss and fell back to
    /// its best earlier iterate.
    pub diverged: bool,
    /// Set when the dataset outputs are identically zero.
    pub degenerate_data: bool,
}

/// Mean over trajectories of the mean squared output error between the data
/// and the ZOH-simulated model outputs.
pub fn loss(
    p: &NormalFormParams,
    ds: &Dataset,
    mode: FitMode,
    x0s: Option<&[DVector<f64>]>,
) -> PhResult<f64> {
    if p.n() != ds.n {
        return Err(PhError::DimensionMismatch {
            expected: format!("{} modes", ds.n),
            got: format!("{} modes", p.n()),
        });
    }
    if let Some(states) = x0s {
        if states.len() != ds.trajectories.len() {
            return Err(PhError::DimensionMismatch {
                expected: format!("{} initial states", ds.trajectories.len()),
                got: format!("{}", states.len()),
            });
        }
    }
    let r = realization(p, mode);
    let zero = DVector::zeros(r.dim);
    let mut acc = 0.0;
    for (i, t) in ds.trajectories.iter().enumerate() {
        let x0 = x0s.map_or(&zero, |s| &s[i]);
        acc += trajectory_mse(&r, x0, t);
    }
    Ok(acc / ds.trajectories.len() as f64)
}

/// Minimize the loss over (delta, v) with d = exp(delta).
pub fn fit(ds: &Dataset, mode: FitMode, opts: &FitOptions) -> PhResult<FitResult> {
    let n = ds.n;
    let min_len = 4 * n;
    if !ds.trajectories.iter().any(|t| t.y.len() >= min_len) {
        return Err(PhError::DegenerateData(format!(
            "need at least one trajectory with >= {min_len} samples"
        )));
    }
    let degenerate_data = ds.is_degenerate();

    let mut best: Option<(f64, Vec<f64>, Vec<f64>, bool)> = None; // loss, theta, history, diverged
    for restart in 0..opts.restarts.max(1) {
        let seed = opts.seed.wrapping_add(restart as u64);
        let mut p0 = init_params(ds, n, seed)?;
        if restart > 0 {
            p0 = perturb_frequencies(&p0, seed, 0.1 * restart as f64);
        }
        let p0 = calibrate_coupling_scale(&p0, ds, mode);
        let theta0 = pack(&p0);
        let (loss_r, theta_r, history, diverged) = adam_run(ds, mode, theta0, opts);
        let better = match &best {
            None => true,
            Some((l, ..)) => loss_r < *l,
        };
        if better {
            best = Some((loss_r, theta_r, history, diverged));
        }
    }
    let (_, theta, loss_history, diverged) = best.expect("at least one restart");
    let params = unpack(&theta, n);

    let x0_estimates = match ds.x0_policy {
        X0Policy::Zero => None,
        X0Policy::Estimate => Some(estimate_x0s(&params, ds, mode)),
    };
    let final_loss = loss(&params, ds, mode, x0_estimates.as_deref())?;
    Ok(FitResult {
        canonical_form: canonicalize(&params),
        params,
        x0_estimates,
        loss_history,
        final_rms: final_loss.sqrt(),
        diverged,
        degenerate_data,
    })
}

/// Initial parameters: d from the top-n periodogram peaks of the output
/// (fallback: logarithmic spread in [0.1, 10]), v a unit-norm seeded
/// Gaussian vector.
pub fn init_params(ds: &Dataset, n: usize, seed: u64) -> PhResult<NormalFormParams> {
    if n == 0 {
        return Err(PhError::InvalidArgument(
            "mode count n must be at least 1".into(),
        ));
    }
    let t = ds
        .trajectories
        .iter()
        .max_by_key(|t| t.y.len())
        .ok_or_else(|| PhError::DegenerateData("no trajectories".into()))?;

    let mut d: Vec<f64> = periodogram_peaks(&t.y, t.grid.dt, n);
    if d.len() < n {
        d = log_spread(n);
    }
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = DVector::from_fn(2 * n, |_, _| {
        // Box-Muller from two uniforms.
        let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    });
    let norm = v.norm();
    if norm > 0.0 {
        v /= norm;
    } else {
        v[0] = 1.0;
    }
    NormalFormParams::new(DVector::from_vec(d), v)
}

fn realization(p: &NormalFormParams, mode: FitMode) -> RealizedLti {
    match mode {
        FitMode::Ch => build_ch(p),
        FitMode::Oh => build_oh(p),
    }
}

/// Log-normal jitter on the mode frequencies, used to diversify restarts.
fn perturb_frequencies(p: &NormalFormParams, seed: u64, sigma: f64) -> NormalFormParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let d = p.d().map(|dj| {
        let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        let z = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
        dj * (sigma * z).exp()
    });
    NormalFormParams::new(d, p.v().clone()).expect("jitter keeps frequencies positive")
}

/// MSE of one trajectory against the model, stepping the exact ZOH map
/// in place (no state storage).
fn trajectory_mse(r: &RealizedLti, x0: &DVector<f64>, t: &Trajectory) -> f64 {
    let e = (&r.a * t.grid.dt).exp();
    let g = {
        // Companion and J Q matrices are invertible here (a_0 > 0), so the
        // direct solve is enough; the general fallback lives in simulate.
        let dim = r.dim;
        let lu = r.a.clone().full_piv_lu();
        if lu.is_invertible() {
            lu.solve(&((&e - DMatrix::identity(dim, dim)) * &r.b))
                .unwrap()
        } else {
            crate::simulate::simulate(
                r,
                &DVector::zeros(dim),
                &crate::simulate::InputSignal::Samples(vec![1.0; 2]),
                &crate::simulate::Grid::new(0.0, t.grid.dt, 2).unwrap(),
                crate::simulate::SimMethod::ZohExact,
            )
            .map(|tr| tr.x.unwrap()[1].clone())
            .unwrap_or_else(|_| DVector::zeros(dim))
        }
    };
    let mut x = x0.clone();
    let mut next = DVector::zeros(r.dim);
    let mut acc = 0.0;
    for k in 0..t.grid.count {
        let y = (&r.c * &x)[(0, 0)];
        let diff = y - t.y[k];
        acc += diff * diff;
        if k + 1 < t.grid.count {
            next.gemv(1.0, &e, &x, 0.0);
            next.axpy(t.u[k], &g, 1.0);
            std::mem::swap(&mut x, &mut next);
        }
    }
    acc / t.grid.count as f64
}

/// Predicted outputs scale quadratically with the coupling vector, so a
/// one-dimensional least squares on the overall scale gives a much better
/// starting point than a unit-norm v.
fn calibrate_coupling_scale(p: &NormalFormParams, ds: &Dataset, mode: FitMode) -> NormalFormParams {
    let r = realization(p, mode);
    let zero = DVector::zeros(r.dim);
    let mut dot = 0.0;
    let mut sq = 0.0;
    for t in &ds.trajectories {
        let pred = predict_outputs(&r, &zero, t);
        for (yp, yd) in pred.iter().zip(&t.y) {
            dot += yp * yd;
            sq += yp * yp;
        }
    }
    if sq <= 0.0 {
        return p.clone();
    }
    let alpha_sq = (dot / sq).max(0.01);
    let v = p.v() * alpha_sq.sqrt();
    NormalFormParams::new(p.d().clone(), v).expect("scaling keeps parameters valid")
}

fn predict_outputs(r: &RealizedLti, x0: &DVector<f64>, t: &Trajectory) -> Vec<f64> {
    let e = (&r.a * t.grid.dt).exp();
    let lu = r.a.clone().full_piv_lu();
    let g = lu
        .solve(&((&e - DMatrix::identity(r.dim, r.dim)) * &r.b))
        .unwrap_or_else(|| DVector::zeros(r.dim));
    let mut x = x0.clone();
    let mut next = DVector::zeros(r.dim);
    let mut out = Vec::with_capacity(t.grid.count);
    for k in 0..t.grid.count {
        out.push((&r.c * &x)[(0, 0)]);
        if k + 1 < t.grid.count {
            next.gemv(1.0, &e, &x, 0.0);
            next.axpy(t.u[k], &g, 1.0);
            std::mem::swap(&mut x, &mut next);
        }
    }
    out
}

/// Per-trajectory least-squares initial states given the current parameters.
fn estimate_x0s(p: &NormalFormParams, ds: &Dataset, mode: FitMode) -> Vec<DVector<f64>> {
    let r = realization(p, mode);
    let zero = DVector::zeros(r.dim);
    ds.trajectories
        .iter()
        .map(|t| {
            let forced = predict_outputs(&r, &zero, t);
            let residual = DVector::from_iterator(
                t.y.len(),
                t.y.iter().zip(&forced).map(|(yd, yf)| yd - yf),
            );
            // Rows C E^k: the free response is linear in x0.
            let e = (&r.a * t.grid.dt).exp();
            let mut phi = DMatrix::zeros(t.grid.count, r.dim);
            let mut row = r.c.clone();
            for k in 0..t.grid.count {
                phi.set_row(k, &row);
                if k + 1 < t.grid.count {
                    row = &row * &e;
                }
            }
            phi.svd(true, true)
                .solve(&residual, 1e-12)
                .unwrap_or_else(|_| DVector::zeros(r.dim))
        })
        .collect()
}

fn objective(theta: &[f64], ds: &Dataset, mode: FitMode) -> f64 {
    let p = unpack(theta, ds.n);
    let value = match ds.x0_policy {
        X0Policy::Zero => loss(&p, ds, mode, None),
        X0Policy::Estimate => {
            let x0s = estimate_x0s(&p, ds, mode);
            loss(&p, ds, mode, Some(&x0s))
        }
    };
    value.unwrap_or(f64::INFINITY)
}

/// Adam with central finite-difference gradients, best-iterate tracking and
/// a plateau-triggered step-size halving.
fn adam_run(
    ds: &Dataset,
    mode: FitMode,
    mut theta: Vec<f64>,
    opts: &FitOptions,
) -> (f64, Vec<f64>, Vec<f64>, bool) {
    let dim = theta.len();
    let (beta1, beta2, eps) = (0.9, 0.999, 1e-8);
    let mut lr = opts.step_size;
    let mut m = vec![0.0; dim];
    let mut u = vec![0.0; dim];
    let mut history = Vec::with_capacity(opts.iters);
    let mut best_loss = objective(&theta, ds, mode);
    let mut best_theta = theta.clone();
    let mut since_improvement = 0usize;
    let mut diverged = false;

    for step in 1..=opts.iters {
        let mut grad = vec![0.0; dim];
        for i in 0..dim {
            let h = tol::FD_REL_STEP * (1.0 + theta[i].abs());
            let saved = theta[i];
            theta[i] = saved + h;
            let fp = objective(&theta, ds, mode);
            theta[i] = saved - h;
            let fm = objective(&theta, ds, mode);
            theta[i] = saved;
            grad[i] = (fp - fm) / (2.0 * h);
        }
        for i in 0..dim {
            m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
            u[i] = beta2 * u[i] + (1.0 - beta2) * grad[i] * grad[i];
            let m_hat = m[i] / (1.0 - beta1.powi(step as i32));
            let u_hat = u[i] / (1.0 - beta2.powi(step as i32));
            theta[i] -= lr * m_hat / (u_hat.sqrt() + eps);
        }
        let value = objective(&theta, ds, mode);
        if !value.is_finite() {
            diverged = true;
            history.push(best_loss);
            break;
        }
        history.push(value);
        if value < best_loss {
            best_loss = value;
            best_theta = theta.clone();
            since_improvement = 0;
        } else {
            since_improvement += 1;
            if since_improvement >= 60 {
                lr = (lr * 0.5).max(opts.step_size * 1e-4);
                since_improvement = 0;
            }
        }
        if best_loss < 1e-20 {
            break;
        }
    }
    (best_loss, best_theta, history, diverged)
}

fn pack(p: &NormalFormParams) -> Vec<f64> {
    p.d()
        .iter()
        .map(|d| d.ln())
        .chain(p.v().iter().copied())
        .collect()
}

fn unpack(theta: &[f64], n: usize) -> NormalFormParams {
    let d = DVector::from_iterator(n, theta[..n].iter().map(|x| x.exp()));
    let v = DVector::from_iterator(2 * n, theta[n..].iter().copied());
    NormalFormParams::new(d, v).expect("exp keeps frequencies positive")
}

/// Angular frequencies of the top-n local maxima of the output periodogram,
/// refined by parabolic interpolation of the log power.
///
/// The spectrum is evaluated on a grid four times denser than the raw DFT
/// (zero-padding); undamped resonances ring for only part of the window, so
/// their peaks fall between raw bins.
fn periodogram_peaks(y: &[f64], dt: f64, n: usize) -> Vec<f64> {
    let count = y.len();
    if count < 8 {
        return Vec::new();
    }
    let padded = (4 * count).next_power_of_two();
    let half = padded / 2;
    let mut power = vec![0.0f64; half];
    for (k, p) in power.iter_mut().enumerate().take(half).skip(1) {
        let mut re = 0.0;
        let mut im = 0.0;
        let base = -std::f64::consts::TAU * k as f64 / padded as f64;
        for (j, yj) in y.iter().enumerate() {
            let (s, c) = (base * j as f64).sin_cos();
            re += yj * c;
            im += yj * s;
        }
        *p = re * re + im * im;
    }
    let total: f64 = power.iter().sum();
    if total <= 1e-24 {
        return Vec::new();
    }
    let mut peaks: Vec<(f64, f64)> = Vec::new(); // (power, refined bin)
    for k in 2..half.saturating_sub(1) {
        if power[k] > power[k - 1] && power[k] >= power[k + 1] && power[k] > 1e-9 * total {
            let (l, c, r) = (
                power[k - 1].max(1e-300).ln(),
                power[k].max(1e-300).ln(),
                power[k + 1].max(1e-300).ln(),
            );
            let denom = l - 2.0 * c + r;
            let delta = if denom.abs() > 1e-12 {
                (0.5 * (l - r) / denom).clamp(-0.5, 0.5)
            } else {
                0.0
            };
            peaks.push((power[k], k as f64 + delta));
        }
    }
    peaks.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());

    // Keep the strongest peaks that are mutually separated by at least one
    // raw DFT bin, so zero-padding side lobes of one resonance do not absorb
    // every slot.
    let min_sep = padded as f64 / count as f64;
    let mut chosen: Vec<(f64, f64)> = Vec::new();
    for (p, bin) in peaks {
        if chosen.iter().all(|(_, b)| (bin - b).abs() >= min_sep) {
            chosen.push((p, bin));
            if chosen.len() == n {
                break;
            }
        }
    }
    chosen
        .iter()
        .map(|(_, bin)| std::f64::consts::TAU * bin / (padded as f64 * dt))
        .collect()
}

fn log_spread(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 10f64.powf(-1.0 + 2.0 * i as f64 / (n - 1) as f64))
        .collect()
}
