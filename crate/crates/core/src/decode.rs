//! Decoders that recover the state from attacked measurements.
//!
//! Four flavors:
//! * [`decode_l0`] — exact combinatorial decoder for sensor attacks: smallest
//!   sensor set explaining the data;
//! * [`decode_l1`] — convex relaxation minimizing the sum of per-sensor
//!   residual row norms, sharpened by a least-squares polish;
//! * [`decode_l0_actuators`] / [`decode_l1_actuators`] — the sensor+actuator
//!   versions recovering the whole state sequence, with an optional delay
//!   that exempts the last `d` states from the uniqueness requirement;
//! * [`identify_attacks`] — residual bookkeeping reconstructing the injected
//!   signals and their supports from a decode.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::linalg::{self, least_squares, subsets};
use crate::model::{self, LinearSystem, MeasurementBlock};
use crate::resilience;
use crate::solver::{self, InnerNorm, RowNormProblem, SolverConfig};

/// How a decode ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecodeStatus {
    /// Residual vanishes outside the reported support and the restricted
    /// system pins the estimate uniquely.
    Exact,
    /// The convex solver met its tolerances but exactness was not certified.
    Converged,
    /// The data admits multiple minimal explanations.
    Ambiguous,
    /// No explanation within the correctable range, or the solver gave up.
    Failed,
}

/// Decoder output. `x0_hat` is always populated (zeros on failure);
/// actuator decoders add the full state sequence and actuator signals.
#[derive(Debug, Clone)]
pub struct DecodeResult {
    pub x0_hat: DVector<f64>,
    /// n x T reconstructed states (actuator decoders only).
    pub state_sequence: Option<DMatrix<f64>>,
    pub sensor_support: BTreeSet<usize>,
    pub actuator_support: BTreeSet<usize>,
    /// Per-sensor inner norms of the final residual.
    pub residual_rows: DVector<f64>,
    pub status: DecodeStatus,
    /// Human-readable reason when status is `Failed` or `Ambiguous`.
    pub failure: Option<String>,
    /// m x (T-1) reconstructed actuator signals (actuator decoders only).
    pub actuator_signals: Option<DMatrix<f64>>,
    /// Iterations spent in the convex solver, when one ran.
    pub solver_iterations: Option<usize>,
}

impl DecodeResult {
    fn failed(n: usize, p: usize, reason: impl Into<String>) -> Self {
        DecodeResult {
            x0_hat: DVector::zeros(n),
            state_sequence: None,
            sensor_support: BTreeSet::new(),
            actuator_support: BTreeSet::new(),
            residual_rows: DVector::zeros(p),
            status: DecodeStatus::Failed,
            failure: Some(reason.into()),
            actuator_signals: None,
            solver_iterations: None,
        }
    }
}

fn fit_tolerance(y: &MeasurementBlock) -> f64 {
    1e-7 * y.y().norm().max(1.0)
}

/// Rows of the stacked output map outside `removed`, with the matching
/// stacked measurement entries (time-major).
fn restricted_system(
    system: &LinearSystem,
    y: &MeasurementBlock,
    removed: &[usize],
) -> (DMatrix<f64>, DVector<f64>) {
    let horizon = y.horizon();
    let p = system.p();
    let keep: Vec<usize> = (0..p).filter(|i| !removed.contains(i)).collect();
    let matrix = resilience::restricted_stacked(system, horizon, removed);
    let mut target = DVector::zeros(keep.len() * horizon);
    for t in 0..horizon {
        for (row, &i) in keep.iter().enumerate() {
            target[t * keep.len() + row] = y.y()[(i, t)];
        }
    }
    (matrix, target)
}

fn residual_matrix(system: &LinearSystem, y: &MeasurementBlock, x0: &DVector<f64>) -> DMatrix<f64> {
    y.y() - model::phi_map(system, y.horizon(), x0).expect("validated dimensions")
}

fn row_norms(m: &DMatrix<f64>, r: InnerNorm) -> DVector<f64> {
    DVector::from_iterator(
        m.nrows(),
        (0..m.nrows()).map(|i| {
            let row: Vec<f64> = m.row(i).iter().copied().collect();
            r.norm(&row)
        }),
    )
}

fn check_observable(system: &LinearSystem, horizon: usize) -> Result<(), DecodeResult> {
    let obs = model::observability_matrix(system, horizon).expect("horizon >= 1");
    let probe = linalg::kernel_probe(&obs);
    if probe.rank < system.n() {
        return Err(DecodeResult::failed(
            system.n(),
            system.p(),
            format!(
                "unobservable: stacked output map over {} steps has rank {} < {}",
                horizon,
                probe.rank,
                system.n()
            ),
        ));
    }
    Ok(())
}

/// Exact decoder for sensor attacks: enumerate candidate supports in
/// increasing cardinality (lexicographic within) and accept the first whose
/// complement rows are fit exactly by a uniquely-determined state.
pub fn decode_l0(system: &LinearSystem, y: &MeasurementBlock) -> Result<DecodeResult, Error> {
    if y.p() != system.p() {
        return Err(Error::Dimension(format!(
            "measurements have {} rows but plant has p={}",
            y.p(),
            system.p()
        )));
    }
    let (n, p) = (system.n(), system.p());
    if let Err(fail) = check_observable(system, y.horizon()) {
        return Ok(fail);
    }
    let tau_fit = fit_tolerance(y);
    let max_support = p.div_ceil(2);
    let mut ambiguous_fallback: Option<(Vec<usize>, DVector<f64>)> = None;

    for cardinality in 0..=max_support {
        let mut accepted: Vec<(Vec<usize>, DVector<f64>)> = Vec::new();
        for removed in subsets(p, cardinality) {
            let (matrix, target) = restricted_system(system, y, &removed);
            let fit = least_squares(&matrix, &target);
            if fit.residual_norm <= tau_fit {
                if fit.unique {
                    accepted.push((removed, fit.x));
                } else if ambiguous_fallback.is_none() {
                    ambiguous_fallback = Some((removed, fit.x));
                }
            }
        }
        if let Some((support, x0)) = accepted.first().cloned() {
            let tau_x = 1e-6 * x0.amax().max(1.0);
            let ambiguous = accepted.iter().skip(1).any(|(_, other)| (other - &x0).amax() > tau_x);
            let residual = residual_matrix(system, y, &x0);
            return Ok(DecodeResult {
                x0_hat: x0,
                state_sequence: None,
                sensor_support: model::row_support(&residual),
                actuator_support: BTreeSet::new(),
                residual_rows: row_norms(&residual, InnerNorm::L2),
                status: if ambiguous { DecodeStatus::Ambiguous } else { DecodeStatus::Exact },
                failure: ambiguous.then(|| {
                    format!("another support of cardinality {} fits a different state", support.len())
                }),
                actuator_signals: None,
                solver_iterations: None,
            });
        }
    }

    if let Some((support, x0)) = ambiguous_fallback {
        let residual = residual_matrix(system, y, &x0);
        return Ok(DecodeResult {
            x0_hat: x0,
            state_sequence: None,
            sensor_support: support.iter().copied().collect(),
            actuator_support: BTreeSet::new(),
            residual_rows: row_norms(&residual, InnerNorm::L2),
            status: DecodeStatus::Ambiguous,
            failure: Some("support fits the data but does not pin the state".into()),
            actuator_signals: None,
            solver_iterations: None,
        });
    }

    Ok(DecodeResult::failed(
        n,
        p,
        format!("no sensor set of size <= {max_support} explains the data"),
    ))
}

/// Support selection for solver output: rows whose norm stands clear of
/// the largest one. Solver iterates are accurate to tolerance, not to
/// machine precision, so rows at the solver's own noise level do not count
/// as support.
fn select_support(norms: &DVector<f64>, noise_floor: f64) -> Vec<usize> {
    let max_norm = norms.iter().fold(0.0f64, |m, &x| m.max(x));
    if max_norm <= noise_floor {
        return Vec::new();
    }
    let cutoff = (1e-3 * max_norm).max(noise_floor);
    (0..norms.len()).filter(|&i| norms[i] > cutoff).collect()
}

fn solver_noise_floor(y_scale: f64, config: &SolverConfig, achieved_primal: f64) -> f64 {
    let tol = config.tol_primal.max(config.tol_dual);
    let projected = 10.0 * tol * y_scale.max(1.0);
    projected.max(10.0 * achieved_primal).max(model::support_threshold(y_scale))
}

/// Least-squares polish on the complement of the identified support. The
/// polish sharpens a correct convex solution to machine precision; it does
/// not search for a better support, so relaxation failures stay failures.
fn polish_sensor(
    system: &LinearSystem,
    y: &MeasurementBlock,
    solver_residual_norms: &DVector<f64>,
    tau_fit: f64,
    noise_floor: f64,
) -> Option<(DVector<f64>, Vec<usize>)> {
    let removed = select_support(solver_residual_norms, noise_floor);
    let (matrix, target) = restricted_system(system, y, &removed);
    let fit = least_squares(&matrix, &target);
    (fit.unique && fit.residual_norm <= tau_fit).then_some((fit.x, removed))
}

/// Convex decoder for sensor attacks: minimize the sum over sensors of the
/// inner norm of that sensor's residual row, then polish.
pub fn decode_l1(
    system: &LinearSystem,
    y: &MeasurementBlock,
    r: InnerNorm,
    config: &SolverConfig,
) -> Result<DecodeResult, Error> {
    if let Err(fail) = check_observable(system, y.horizon()) {
        return Ok(fail);
    }
    let problem = RowNormProblem::from_measurements(system, y, r)?;
    let sol = solver::solve(&problem, config, None)?;
    let tau_fit = fit_tolerance(y);

    let noise_floor = solver_noise_floor(y.y().norm(), config, sol.primal_residual);
    if let Some((x0, _)) = polish_sensor(system, y, &sol.residual_rows, tau_fit, noise_floor) {
        let residual = residual_matrix(system, y, &x0);
        let support = model::row_support(&residual);
        return Ok(DecodeResult {
            x0_hat: x0,
            state_sequence: None,
            sensor_support: support,
            actuator_support: BTreeSet::new(),
            residual_rows: row_norms(&residual, r),
            status: DecodeStatus::Exact,
            failure: None,
            actuator_signals: None,
            solver_iterations: Some(sol.iterations),
        });
    }

    let residual = residual_matrix(system, y, &sol.x_hat);
    let status = if sol.converged { DecodeStatus::Converged } else { DecodeStatus::Failed };
    Ok(DecodeResult {
        x0_hat: sol.x_hat,
        state_sequence: None,
        sensor_support: model::row_support(&residual),
        actuator_support: BTreeSet::new(),
        residual_rows: row_norms(&residual, r),
        status,
        failure: (status == DecodeStatus::Failed).then(|| {
            format!(
                "solver stopped after {} iterations (primal {:.2e}, dual {:.2e}) without certifiable support",
                sol.iterations, sol.primal_residual, sol.dual_residual
            )
        }),
        actuator_signals: None,
        solver_iterations: Some(sol.iterations),
    })
}

/// Joint sensor/actuator pattern fit: least squares over (x0, attacked
/// actuator signals) against the measurement rows outside the sensor set.
struct PatternFit {
    x0: DVector<f64>,
    /// |L| x (T-1) signals for the actuators in the pattern.
    w_restricted: DMatrix<f64>,
    residual_norm: f64,
    /// States determined uniquely up to the delay.
    unique: bool,
}

fn fit_pattern(
    system: &LinearSystem,
    y_comp: &DMatrix<f64>,
    sensors: &[usize],
    actuators: &[usize],
    delay: usize,
) -> PatternFit {
    let horizon = y_comp.ncols();
    let (n, p) = (system.n(), system.p());
    let l = actuators.len();
    // [stacked output map | delayed actuator map], all pT rows.
    let full = resilience::actuator_test_matrix(system, horizon, &[], actuators, true);
    let keep: Vec<usize> = (0..p).filter(|i| !sensors.contains(i)).collect();
    let mut matrix = DMatrix::zeros(keep.len() * horizon, full.ncols());
    let mut target = DVector::zeros(keep.len() * horizon);
    for t in 0..horizon {
        for (row, &i) in keep.iter().enumerate() {
            matrix.row_mut(t * keep.len() + row).copy_from(&full.row(t * p + i));
            target[t * keep.len() + row] = y_comp[(i, t)];
        }
    }
    let fit = least_squares(&matrix, &target);

    // Uniqueness of the states up to the delay: kernel directions must not
    // move x(0..T-1-d).
    let unique = if fit.unique {
        true
    } else {
        let svd = matrix.clone().svd(false, true);
        let sigma_max = svd.singular_values.max();
        let tol = linalg::rank_tolerance(matrix.nrows(), matrix.ncols(), sigma_max);
        let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
        let v_t = svd.v_t.as_ref().expect("svd with V^T");
        let mut all_fixed = true;
        for row in rank..matrix.ncols() {
            let dir: DVector<f64> = v_t.row(row).transpose();
            let states = states_from_variables(system, &dir, actuators, horizon, None);
            let cutoff = horizon.saturating_sub(delay);
            let prefix_max = (0..cutoff).fold(0.0f64, |m, t| m.max(states.column(t).amax()));
            let total_max = states.amax().max(1.0);
            if prefix_max > 1e-7 * total_max.max(1.0) {
                all_fixed = false;
                break;
            }
        }
        all_fixed
    };

    let w_restricted = {
        let mut w = DMatrix::zeros(l, horizon.saturating_sub(1));
        for s in 0..horizon.saturating_sub(1) {
            for (idx, _) in actuators.iter().enumerate() {
                w[(idx, s)] = fit.x[n + s * l + idx];
            }
        }
        w
    };
    PatternFit {
        x0: fit.x.rows(0, n).into_owned(),
        w_restricted,
        residual_norm: fit.residual_norm,
        unique,
    }
}

/// Forward states generated by packed variables (x0, attacked-actuator
/// signals), optionally adding known inputs.
fn states_from_variables(
    system: &LinearSystem,
    variables: &DVector<f64>,
    actuators: &[usize],
    horizon: usize,
    inputs: Option<&DMatrix<f64>>,
) -> DMatrix<f64> {
    let n = system.n();
    let l = actuators.len();
    let mut states = DMatrix::zeros(n, horizon);
    let mut x = variables.rows(0, n).into_owned();
    for t in 0..horizon {
        states.set_column(t, &x);
        if t + 1 < horizon {
            let mut next = system.a() * &x;
            if let Some(u) = inputs {
                next += system.b() * u.column(t);
            }
            for (idx, &j) in actuators.iter().enumerate() {
                let w = variables[n + t * l + idx];
                next += system.b().column(j) * w;
            }
            x = next;
        }
    }
    states
}

fn expand_actuator_result(
    system: &LinearSystem,
    y: &MeasurementBlock,
    inputs: &DMatrix<f64>,
    fit: &PatternFit,
    actuators: &[usize],
    status: DecodeStatus,
    failure: Option<String>,
    solver_iterations: Option<usize>,
) -> DecodeResult {
    let horizon = y.horizon();
    let (n, m) = (system.n(), system.m());
    let l = actuators.len();
    let mut packed = DVector::zeros(n + l * horizon.saturating_sub(1));
    packed.rows_mut(0, n).copy_from(&fit.x0);
    for s in 0..horizon.saturating_sub(1) {
        for idx in 0..l {
            packed[n + s * l + idx] = fit.w_restricted[(idx, s)];
        }
    }
    let states = states_from_variables(system, &packed, actuators, horizon, Some(inputs));
    let mut w_full = DMatrix::zeros(m, horizon.saturating_sub(1));
    for (idx, &j) in actuators.iter().enumerate() {
        for s in 0..horizon.saturating_sub(1) {
            w_full[(j, s)] = fit.w_restricted[(idx, s)];
        }
    }
    let e_hat = y.y() - system.c() * &states;
    DecodeResult {
        x0_hat: fit.x0.clone(),
        sensor_support: model::row_support(&e_hat),
        actuator_support: model::row_support(&w_full),
        residual_rows: row_norms(&e_hat, InnerNorm::L2),
        state_sequence: Some(states),
        status,
        failure,
        actuator_signals: Some(w_full),
        solver_iterations,
    }
}

/// Exact decoder for combined sensor/actuator attacks: find the pattern with
/// the fewest attacked nodes whose constrained least squares reproduces the
/// data exactly, and reconstruct the full state sequence.
///
/// `delay` exempts the last `delay` states from the uniqueness requirement.
pub fn decode_l0_actuators(
    system: &LinearSystem,
    y: &MeasurementBlock,
    inputs: &DMatrix<f64>,
    delay: usize,
) -> Result<DecodeResult, Error> {
    let (n, m, p) = (system.n(), system.m(), system.p());
    if y.p() != p {
        return Err(Error::Dimension(format!(
            "measurements have {} rows but plant has p={}",
            y.p(),
            p
        )));
    }
    let horizon = y.horizon();
    if inputs.nrows() != m || inputs.ncols() + 1 != horizon {
        return Err(Error::Dimension(format!(
            "inputs must be {}x{}, got {}x{}",
            m,
            horizon - 1,
            inputs.nrows(),
            inputs.ncols()
        )));
    }
    let y_comp = y.y() - model::input_effect(system, inputs)?;
    let tau_fit = fit_tolerance(y);
    let max_total = p.div_ceil(2);
    let mut ambiguous_fallback: Option<(PatternFit, Vec<usize>)> = None;

    for total in 0..=max_total {
        let mut accepted: Vec<(PatternFit, Vec<usize>)> = Vec::new();
        for l in 0..=total.min(m) {
            let k = total - l;
            if k > p {
                continue;
            }
            for sensor_set in subsets(p, k) {
                for actuator_set in subsets(m, l) {
                    let fit = fit_pattern(system, &y_comp, &sensor_set, &actuator_set, delay);
                    if fit.residual_norm <= tau_fit {
                        if fit.unique {
                            accepted.push((fit, actuator_set));
                        } else if ambiguous_fallback.is_none() {
                            ambiguous_fallback = Some((fit, actuator_set));
                        }
                    }
                }
            }
        }
        if !accepted.is_empty() {
            let cutoff = horizon.saturating_sub(delay);
            let first_states = {
                let (fit, acts) = &accepted[0];
                let mut packed = DVector::zeros(n + acts.len() * (horizon - 1).max(0));
                packed.rows_mut(0, n).copy_from(&fit.x0);
                for s in 0..horizon.saturating_sub(1) {
                    for idx in 0..acts.len() {
                        packed[n + s * acts.len() + idx] = fit.w_restricted[(idx, s)];
                    }
                }
                states_from_variables(system, &packed, acts, horizon, Some(inputs))
            };
            let scale = first_states.amax().max(1.0);
            let mut ambiguous = false;
            for (fit, acts) in accepted.iter().skip(1) {
                let mut packed = DVector::zeros(n + acts.len() * (horizon - 1).max(0));
                packed.rows_mut(0, n).copy_from(&fit.x0);
                for s in 0..horizon.saturating_sub(1) {
                    for idx in 0..acts.len() {
                        packed[n + s * acts.len() + idx] = fit.w_restricted[(idx, s)];
                    }
                }
                let states = states_from_variables(system, &packed, acts, horizon, Some(inputs));
                let diff = (0..cutoff)
                    .fold(0.0f64, |mx, t| mx.max((states.column(t) - first_states.column(t)).amax()));
                if diff > 1e-6 * scale {
                    ambiguous = true;
                    break;
                }
            }
            let (fit, acts) = &accepted[0];
            let status = if ambiguous { DecodeStatus::Ambiguous } else { DecodeStatus::Exact };
            let failure = ambiguous
                .then(|| format!("another pattern of {} attacked nodes fits different states", total));
            return Ok(expand_actuator_result(system, y, inputs, fit, acts, status, failure, None));
        }
    }

    if let Some((fit, acts)) = ambiguous_fallback {
        let mut result = expand_actuator_result(
            system,
            y,
            inputs,
            &fit,
            &acts,
            DecodeStatus::Ambiguous,
            Some("pattern fits the data but does not pin the states".into()),
            None,
        );
        result.failure = Some("pattern fits the data but does not pin the states".into());
        return Ok(result);
    }

    Ok(DecodeResult::failed(
        n,
        p,
        format!("no attack pattern of size <= {max_total} explains the data"),
    ))
}

/// Stacked convex program for sensor+actuator attacks over variables
/// (x0, all actuator signals): p sensor residual groups of T rows plus m
/// actuator-signal groups of T-1 rows weighted by `lambda`.
fn actuator_problem(
    system: &LinearSystem,
    y_comp: &DMatrix<f64>,
    lambda: f64,
    r: InnerNorm,
) -> Result<RowNormProblem, Error> {
    let (n, m, p) = (system.n(), system.m(), system.p());
    let horizon = y_comp.ncols();
    let num_vars = n + m * (horizon - 1);
    let rows = p * horizon + m * (horizon - 1);
    let mut phi = DMatrix::zeros(rows, num_vars);
    let mut target = DVector::zeros(rows);

    // Markov blocks C A^j B.
    let mut markov: Vec<DMatrix<f64>> = Vec::with_capacity(horizon - 1);
    let mut ab = system.b().clone();
    for _ in 0..horizon - 1 {
        markov.push(system.c() * &ab);
        ab = system.a() * ab;
    }
    let mut output_blocks: Vec<DMatrix<f64>> = Vec::with_capacity(horizon);
    let mut block = system.c().clone();
    for t in 0..horizon {
        output_blocks.push(block.clone());
        if t + 1 < horizon {
            block = &block * system.a();
        }
    }

    for i in 0..p {
        for t in 0..horizon {
            let row = i * horizon + t;
            phi.view_mut((row, 0), (1, n)).copy_from(&output_blocks[t].row(i));
            for s in 0..t {
                phi.view_mut((row, n + s * m), (1, m)).copy_from(&markov[t - 1 - s].row(i));
            }
            target[row] = y_comp[(i, t)];
        }
    }
    for j in 0..m {
        for s in 0..horizon - 1 {
            let row = p * horizon + j * (horizon - 1) + s;
            phi[(row, n + s * m + j)] = -1.0;
        }
    }

    let mut group_sizes = vec![horizon; p];
    group_sizes.extend(vec![horizon - 1; m]);
    let mut weights = vec![1.0; p];
    weights.extend(vec![lambda; m]);
    RowNormProblem::new(phi, target, group_sizes, weights, r)
}

/// Convex decoder for combined attacks: weighted sum of sensor-residual and
/// actuator-signal row norms, followed by a pattern polish.
pub fn decode_l1_actuators(
    system: &LinearSystem,
    y: &MeasurementBlock,
    inputs: &DMatrix<f64>,
    r: InnerNorm,
    lambda: f64,
    config: &SolverConfig,
    delay: usize,
) -> Result<DecodeResult, Error> {
    let (n, m, p) = (system.n(), system.m(), system.p());
    let horizon = y.horizon();
    if horizon < 2 {
        return Err(Error::Dimension("actuator decoding needs a horizon of at least 2".into()));
    }
    if !(lambda > 0.0) {
        return Err(Error::Dimension("lambda must be positive".into()));
    }
    if inputs.nrows() != m || inputs.ncols() + 1 != horizon {
        return Err(Error::Dimension(format!(
            "inputs must be {}x{}, got {}x{}",
            m,
            horizon - 1,
            inputs.nrows(),
            inputs.ncols()
        )));
    }
    let y_comp = y.y() - model::input_effect(system, inputs)?;
    let problem = actuator_problem(system, &y_comp, lambda, r)?;
    let sol = solver::solve(&problem, config, None)?;
    let tau_fit = fit_tolerance(y);

    // Identify the attacked pattern from the solver point: sensor rows by
    // residual norm, actuator rows by recovered signal norm, both against a
    // common scale so the quiet side does not pick up noise.
    let w_hat = {
        let mut w = DMatrix::zeros(m, horizon - 1);
        for j in 0..m {
            for s in 0..horizon - 1 {
                w[(j, s)] = sol.x_hat[n + s * m + j];
            }
        }
        w
    };
    let sensor_norms = DVector::from_iterator(p, (0..p).map(|i| sol.residual_rows[i]));
    let actuator_norms = row_norms(&w_hat, r);
    let combined_max = sensor_norms.amax().max(actuator_norms.amax());
    let floor = solver_noise_floor(y.y().norm(), config, sol.primal_residual);
    let cutoff = (1e-3 * combined_max).max(floor);
    let cutoff = if combined_max <= floor { f64::INFINITY } else { cutoff };
    let sensor_set: Vec<usize> = (0..p).filter(|&i| sensor_norms[i] > cutoff).collect();
    let actuator_set: Vec<usize> = (0..m).filter(|&j| actuator_norms[j] > cutoff).collect();
    let fit = fit_pattern(system, &y_comp, &sensor_set, &actuator_set, delay);
    if fit.unique && fit.residual_norm <= tau_fit {
        return Ok(expand_actuator_result(
            system,
            y,
            inputs,
            &fit,
            &actuator_set,
            DecodeStatus::Exact,
            None,
            Some(sol.iterations),
        ));
    }

    // No certifiable pattern: report the solver point as-is.
    let x0 = sol.x_hat.rows(0, n).into_owned();
    let mut packed = DVector::zeros(n + m * (horizon - 1));
    packed.copy_from(&sol.x_hat);
    let all: Vec<usize> = (0..m).collect();
    let states = states_from_variables(system, &packed, &all, horizon, Some(inputs));
    let e_hat = y.y() - system.c() * &states;
    let status = if sol.converged { DecodeStatus::Converged } else { DecodeStatus::Failed };
    Ok(DecodeResult {
        x0_hat: x0,
        sensor_support: model::row_support(&e_hat),
        actuator_support: model::row_support(&w_hat),
        residual_rows: row_norms(&e_hat, r),
        state_sequence: Some(states),
        status,
        failure: (status == DecodeStatus::Failed).then(|| {
            format!(
                "solver stopped after {} iterations (primal {:.2e}, dual {:.2e}) without certifiable pattern",
                sol.iterations, sol.primal_residual, sol.dual_residual
            )
        }),
        actuator_signals: Some(w_hat),
        solver_iterations: Some(sol.iterations),
    })
}

/// Reconstructed attack signals and their supports.
#[derive(Debug, Clone)]
pub struct AttackEstimate {
    pub sensor_support: BTreeSet<usize>,
    pub actuator_support: BTreeSet<usize>,
    /// p x T sensor attack estimate.
    pub e_hat: DMatrix<f64>,
    /// m x (T-1) actuator attack estimate (actuator decoders only).
    pub w_hat: Option<DMatrix<f64>>,
}

/// Reconstruct the injected attack signals from a decode: the sensor signal
/// is the measurement residual, the actuator signal comes with the decoder's
/// state sequence. Requires a usable estimate (`Exact` or `Converged`).
pub fn identify_attacks(
    result: &DecodeResult,
    y: &MeasurementBlock,
    system: &LinearSystem,
) -> Result<AttackEstimate, Error> {
    match result.status {
        DecodeStatus::Exact | DecodeStatus::Converged => {}
        other => {
            return Err(Error::Dimension(format!(
                "attack identification needs a usable estimate, got status {other:?}"
            )))
        }
    }
    let e_hat = match &result.state_sequence {
        Some(states) => y.y() - system.c() * states,
        None => residual_matrix(system, y, &result.x0_hat),
    };
    Ok(AttackEstimate {
        sensor_support: model::row_support(&e_hat),
        actuator_support: result
            .actuator_signals
            .as_ref()
            .map(model::row_support)
            .unwrap_or_default(),
        e_hat,
        w_hat: result.actuator_signals.clone(),
    })
}
