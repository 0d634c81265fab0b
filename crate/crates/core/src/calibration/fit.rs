use nalgebra::{DMatrix, DVector, Vector2};
use serde::{Deserialize, Serialize};

use super::{CalibError, CalibWeights, ReferenceLog, ReferenceSample, SensorParams};
use crate::sensing::CELL_COUNT;

const RES_PER_SAMPLE: usize = 3 + CELL_COUNT;
const PARAMS: usize = 2 * CELL_COUNT;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialGuess {
    pub a0: f64,
    pub b0: f64,
    /// Norm of the stacked least-squares residual.
    pub residual: f64,
}

/// Shared `(a0, b0)` for every cell from the CoP moment rows
/// `c_r n_r = a0 * sum_i S_i p_i + b0 * sum_i p_i`, plus the row
/// `n_r = a0 * sum_i S_i + 8 b0` per sample when `grf_row` is set.
pub fn initial_guess(log: &ReferenceLog, grf_row: bool) -> Result<InitialGuess, CalibError> {
    log.validate()?;
    let first = log.samples[0].cop_ref;
    let scale = log.samples.iter().map(|s| s.cop_ref.norm()).fold(1.0, f64::max);
    if log.samples.iter().all(|s| (s.cop_ref - first).norm() <= 1e-9 * scale) {
        return Err(CalibError::DegenerateData("reference CoP never moves".into()));
    }
    let per = if grf_row { 3 } else { 2 };
    let rows = per * log.len();
    let mut a = DMatrix::zeros(rows, 2);
    let mut y = DVector::zeros(rows);
    for (k, s) in log.samples.iter().enumerate() {
        let sp: Vector2<f64> = s.volts.iter().zip(&s.positions).map(|(v, p)| p * *v).sum();
        let ps: Vector2<f64> = s.positions.iter().sum();
        let m = s.cop_ref * s.grf_ref;
        for axis in 0..2 {
            a[(per * k + axis, 0)] = sp[axis];
            a[(per * k + axis, 1)] = ps[axis];
            y[per * k + axis] = m[axis];
        }
        if grf_row {
            a[(per * k + 2, 0)] = s.volts.iter().sum::<f64>();
            a[(per * k + 2, 1)] = CELL_COUNT as f64;
            y[per * k + 2] = s.grf_ref;
        }
    }
    let svd = a.clone().svd(true, true);
    let sv = &svd.singular_values;
    if !(sv.min() > 1e-10 * sv.max()) {
        return Err(CalibError::DegenerateData("initial-guess system is rank deficient".into()));
    }
    let x = svd
        .solve(&y, 0.0)
        .map_err(|e| CalibError::DegenerateData(e.to_string()))?;
    Ok(InitialGuess {
        a0: x[0],
        b0: x[1],
        residual: (a * &x - y).norm(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub max_iters: usize,
    /// Stop once an accepted step changes the objective by less than this
    /// fraction.
    pub rel_tol: f64,
    pub lambda0: f64,
    pub lambda_max: f64,
    /// Relative finite-difference step for the Jacobian.
    pub jac_step: f64,
    /// Add the GRF row to the initial-guess stack.
    pub grf_row: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iters: 200,
            rel_tol: 1e-10,
            lambda0: 1e-3,
            lambda_max: 1e12,
            jac_step: 1e-6,
            grf_row: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitIter {
    pub iter: usize,
    pub objective: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub params: SensorParams,
    pub objective_init: f64,
    pub objective: f64,
    pub iters: Vec<FitIter>,
    /// Numerical rank of the residual Jacobian at the solution.
    pub rank: usize,
    /// Unit parameter directions (`[a1, b1, ..., a8, b8]`) the data cannot see.
    pub degenerate_directions: Vec<Vec<f64>>,
}

/// Unclamped forces, so the residual stays smooth in the parameters.
fn sample_residuals(s: &ReferenceSample, theta: &[f64], sw: [f64; 3], out: &mut [f64]) {
    let mut f = [0.0; CELL_COUNT];
    for i in 0..CELL_COUNT {
        f[i] = theta[2 * i] * s.volts[i] + theta[2 * i + 1];
    }
    let n: f64 = f.iter().sum();
    let m: Vector2<f64> = f.iter().zip(&s.positions).map(|(fi, p)| p * *fi).sum();
    let c = if n.abs() > 1e-12 { m / n } else { Vector2::zeros() };
    out[0] = sw[0] * (n - s.grf_ref);
    out[1] = sw[1] * (c.x - s.cop_ref.x);
    out[2] = sw[1] * (c.y - s.cop_ref.y);
    for i in 0..CELL_COUNT {
        out[3 + i] = sw[2] * (f[i] - s.forces_ref[i]);
    }
}

/// Per sample: 1 GRF, 2 CoP and 8 force residuals, each times sqrt(weight).
fn residuals(log: &ReferenceLog, theta: &[f64], wts: &CalibWeights) -> DVector<f64> {
    let sw = [wts.w_n.sqrt(), wts.w_c.sqrt(), wts.w_f.sqrt()];
    let mut r = DVector::zeros(RES_PER_SAMPLE * log.len());
    for (k, s) in log.samples.iter().enumerate() {
        sample_residuals(s, theta, sw, &mut r.as_mut_slice()[RES_PER_SAMPLE * k..RES_PER_SAMPLE * (k + 1)]);
    }
    r
}

/// The weighted sum of squares being minimized.
pub fn objective(log: &ReferenceLog, params: &SensorParams, wts: &CalibWeights) -> f64 {
    residuals(log, &params.to_vec(), wts).norm_squared()
}

fn jacobian(log: &ReferenceLog, theta: &[f64], wts: &CalibWeights, rel: f64) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(RES_PER_SAMPLE * log.len(), PARAMS);
    let mut t = theta.to_vec();
    for p in 0..PARAMS {
        let h = rel * theta[p].abs().max(1.0);
        t[p] = theta[p] + h;
        let hi = residuals(log, &t, wts);
        t[p] = theta[p] - h;
        let lo = residuals(log, &t, wts);
        t[p] = theta[p];
        j.set_column(p, &((hi - lo) / (2.0 * h)));
    }
    j
}

fn rank_and_null(j: &DMatrix<f64>) -> (usize, Vec<Vec<f64>>) {
    let svd = j.clone().svd(false, true);
    let sv = &svd.singular_values;
    let tol = 1e-8 * sv.max();
    let vt = svd.v_t.expect("requested V^T");
    let mut rank = 0;
    let mut null = Vec::new();
    for (i, s) in sv.iter().enumerate() {
        if *s > tol {
            rank += 1;
        } else {
            null.push(vt.row(i).iter().copied().collect());
        }
    }
    (rank, null)
}

/// Damped Gauss-Newton (Levenberg-Marquardt) on the sensor parameters.
pub fn nls_fit(
    log: &ReferenceLog,
    init: &SensorParams,
    wts: &CalibWeights,
    opts: &FitOptions,
) -> Result<FitReport, CalibError> {
    log.validate()?;
    init.validate()?;
    wts.validate()?;
    let mut theta = init.to_vec();
    let mut r = residuals(log, &theta, wts);
    let mut obj = r.norm_squared();
    let objective_init = obj;
    let mut lambda = opts.lambda0;
    let mut iters = vec![FitIter {
        iter: 0,
        objective: obj,
        lambda,
    }];
    let mut jac = jacobian(log, &theta, wts, opts.jac_step);
    for iter in 1..=opts.max_iters {
        if obj == 0.0 {
            break;
        }
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * &r;
        let floor = 1e-12 * jtj.diagonal().max().max(1e-300);
        let mut accepted = None;
        while lambda <= opts.lambda_max {
            let mut a = jtj.clone();
            for d in 0..PARAMS {
                a[(d, d)] += lambda * jtj[(d, d)].max(floor);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&g)) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = theta.iter().zip(step.iter()).map(|(t, s)| t - s).collect();
            let rt = residuals(log, &trial, wts);
            let ot = rt.norm_squared();
            if ot < obj {
                accepted = Some((trial, rt, ot));
                lambda = (lambda / 10.0).max(1e-15);
                break;
            }
            lambda *= 10.0;
        }
        let Some((trial, rt, ot)) = accepted else {
            // No decrease at any damping: fine at a stationary point, a
            // failure anywhere else.
            if g.amax() <= 1e-9 * obj.max(1.0) {
                break;
            }
            return Err(CalibError::FitFailed {
                objective: obj,
                params: Box::new(SensorParams::from_slice(&theta)),
            });
        };
        let change = (obj - ot) / obj;
        theta = trial;
        r = rt;
        obj = ot;
        iters.push(FitIter {
            iter,
            objective: obj,
            lambda,
        });
        jac = jacobian(log, &theta, wts, opts.jac_step);
        if change < opts.rel_tol {
            break;
        }
    }
    let (rank, degenerate_directions) = rank_and_null(&jac);
    Ok(FitReport {
        params: SensorParams::from_slice(&theta),
        objective_init,
        objective: obj,
        iters,
        rank,
        degenerate_directions,
    })
}
