//! One CVaR-VQE run: couples instance, ansatz, cost shape, CVaR estimator and
//! optimizer, tracking fidelity and success along the trajectory.
//!
//! Two measurement regimes cover simulation and hardware-style use. Exact
//! mode (shots =
//! None) evaluates CVaR on the full eigenvalue distribution of the
//! prepared state and declares success when the running maximum fidelity
//! exceeds the threshold. Sampled mode draws S shots per evaluation, scores their costs,
//! and declares success when a solution bitstring is observed at least once;
//! an exact shadow fidelity is recorded alongside for diagnostics.

use std::cell::Cell;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::cvar::{cvar_sampled, CvarEstimate};
use crate::error::{Error, Result};
use crate::hamiltonian::{cost_value, cost_value_int, CostFunction};
use crate::instance::FactoringInstance;
use crate::optimize::{minimize_with_stop, OptimizationTrace, OptimizerConfig, Termination};
use crate::simulator::{AnsatzSpec, InitialState, StateVector};

/// How the initial RY angles are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialParams {
    /// Uniform draws from (-pi, pi), one per parameter.
    RandomUniform,
    Explicit(Vec<f64>),
}

/// Full description of one VQE run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub instance: FactoringInstance,
    pub ansatz: AnsatzSpec,
    pub alpha: f64,
    /// Shots per evaluation; None runs in exact (infinite-shot) mode.
    pub shots: Option<u64>,
    pub cost: CostFunction,
    pub optimizer: OptimizerConfig,
    pub fidelity_threshold: f64,
    pub seed: u64,
    pub initial_params: InitialParams,
    pub initial_state: InitialState,
    pub alpha_schedule: Option<Vec<f64>>,
    /// End the run at the first success; useful for record-scale instances.
    pub stop_on_success: bool,
}

impl RunConfig {
    /// Simulator-study defaults: exact mode,
    /// Hamiltonian cost, alpha = t = 0.01, COBYLA with budget 50 * N * L.
    pub fn new(instance: FactoringInstance, ansatz: AnsatzSpec) -> Self {
        let budget = 50 * ansatz.parameter_count();
        RunConfig {
            instance,
            ansatz,
            alpha: 0.01,
            shots: None,
            cost: CostFunction::Hamiltonian,
            optimizer: OptimizerConfig { max_evals: budget, ..OptimizerConfig::default() },
            fidelity_threshold: 0.01,
            seed: 0,
            initial_params: InitialParams::RandomUniform,
            initial_state: InitialState::Zeros,
            alpha_schedule: None,
            stop_on_success: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ansatz.qubits != self.instance.qubits() {
            return Err(Error::DimensionMismatch {
                state_qubits: self.ansatz.qubits,
                instance_qubits: self.instance.qubits(),
            });
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::BadAlpha(self.alpha));
        }
        if !(self.fidelity_threshold > 0.0 && self.fidelity_threshold < 1.0) {
            return Err(Error::BadThreshold(self.fidelity_threshold));
        }
        if self.shots == Some(0) {
            return Err(Error::NoShots);
        }
        if let InitialParams::Explicit(theta) = &self.initial_params {
            if theta.len() != self.ansatz.parameter_count() {
                return Err(Error::ParameterCount {
                    expected: self.ansatz.parameter_count(),
                    got: theta.len(),
                });
            }
        }
        self.optimizer.validate()
    }

    /// The initial angle vector this config resolves to.
    pub fn initial_theta(&self) -> Vec<f64> {
        match &self.initial_params {
            InitialParams::Explicit(theta) => theta.clone(),
            InitialParams::RandomUniform => {
                let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
                rng.set_stream(THETA_STREAM);
                (0..self.ansatz.parameter_count())
                    .map(|_| rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI))
                    .collect()
            }
        }
    }
}

const THETA_STREAM: u64 = 0;

/// Everything one run produced. The full optimizer trace stays in memory
/// only; serialization keeps the per-evaluation cost/fidelity trajectories
/// and drops wall time so that reruns are byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqeRunRecord {
    pub config: RunConfig,
    pub initial_theta: Vec<f64>,
    pub cost_trajectory: Vec<f64>,
    /// Exact fidelity per evaluation (exact mode, or sampled-mode shadow).
    pub fidelity_trajectory: Option<Vec<f64>>,
    /// Solution-bitstring hits per evaluation (sampled mode).
    pub solution_hits: Option<Vec<u64>>,
    /// CVaR standard error per evaluation (sampled mode; None entries where
    /// the tail has fewer than two shots).
    pub cvar_std_errors: Option<Vec<Option<f64>>>,
    pub best_cost: f64,
    pub best_theta: Vec<f64>,
    pub termination: Termination,
    pub evaluations: usize,
    pub max_fidelity: Option<f64>,
    pub first_success_eval: Option<usize>,
    pub success: bool,
    pub success_by_fidelity: Option<bool>,
    pub success_by_observation: Option<bool>,
    #[serde(skip)]
    pub trace: OptimizationTrace,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl VqeRunRecord {
    /// Drop the per-evaluation theta snapshots (bulk memory) while keeping
    /// every scalar trajectory.
    pub fn slim(mut self) -> Self {
        self.trace.evaluations = Vec::new();
        self
    }
}

impl Default for OptimizationTrace {
    fn default() -> Self {
        OptimizationTrace {
            evaluations: Vec::new(),
            best_theta: Vec::new(),
            best_cost: f64::NAN,
            termination: Termination::Converged,
        }
    }
}

/// Basis indices with pq = n, whether or not factors are attached.
fn solution_set(instance: &FactoringInstance) -> Vec<u64> {
    if instance.factors().is_some() {
        instance.solution_labels().unwrap_or_default()
    } else {
        (0..(1u64 << instance.qubits()))
            .filter(|&i| {
                let (p, q) = instance.decode_index(i);
                p.checked_mul(q) == Some(instance.n())
            })
            .collect()
    }
}

/// Basis indices sorted ascending by cost, exact integer keys where the cost
/// shape allows it, index as tie-break.
struct SortedCosts {
    order: Vec<u32>,
    /// Cost per sorted position, as f64 (averaging domain).
    values: Vec<f64>,
}

impl SortedCosts {
    fn build(instance: &FactoringInstance, kind: CostFunction) -> Self {
        let size = 1u64 << instance.qubits();
        let mut order: Vec<u32> = (0..size as u32).collect();
        if kind.is_integer_valued() {
            let keys: Vec<i128> =
                (0..size).map(|i| cost_value_int(instance, i, kind).unwrap()).collect();
            order.sort_unstable_by(|&a, &b| {
                keys[a as usize].cmp(&keys[b as usize]).then(a.cmp(&b))
            });
        } else {
            let keys: Vec<f64> = (0..size).map(|i| cost_value(instance, i, kind)).collect();
            order.sort_unstable_by(|&a, &b| {
                keys[a as usize].total_cmp(&keys[b as usize]).then(a.cmp(&b))
            });
        }
        let values =
            order.iter().map(|&i| cost_value(instance, u64::from(i), kind)).collect();
        SortedCosts { order, values }
    }

    /// Exact CVaR of the state's cost distribution: walk the sorted order
    /// accumulating probability mass up to alpha, fractional on the boundary.
    fn cvar_exact(&self, state: &StateVector, alpha: f64) -> f64 {
        let mut remaining = alpha;
        let mut acc = 0.0;
        for (pos, &idx) in self.order.iter().enumerate() {
            let p = state.probability_of(u64::from(idx));
            let take = p.min(remaining);
            acc += take * self.values[pos];
            remaining -= take;
            if remaining <= 0.0 {
                break;
            }
        }
        acc / (alpha - remaining.max(0.0))
    }
}

/// Run one CVaR-VQE optimization.
pub fn run_vqe(config: &RunConfig) -> Result<VqeRunRecord> {
    config.validate()?;
    let started = Instant::now();

    let instance = &config.instance;
    let solutions = solution_set(instance);
    let sorted = SortedCosts::build(instance, config.cost);
    let theta0 = config.initial_theta();

    let mut state = StateVector::new_zeros(config.ansatz.qubits);
    let mut fidelities: Vec<f64> = Vec::new();
    let mut hits: Vec<u64> = Vec::new();
    let mut std_errors: Vec<Option<f64>> = Vec::new();
    let mut prepare_error: Option<Error> = None;

    let succeeded = Cell::new(false);
    let sampled = config.shots.is_some();

    let trace = {
        let succeeded = &succeeded;
        let objective = |theta: &[f64]| -> f64 {
            if let Err(err) = state.prepare(&config.ansatz, theta, config.initial_state) {
                prepare_error.get_or_insert(err);
                return f64::NAN;
            }
            let eval_index = fidelities.len() + 1;

            let fid: f64 = solutions.iter().map(|&l| state.probability_of(l)).sum();
            fidelities.push(fid);

            let value = match config.shots {
                None => {
                    if fid > config.fidelity_threshold {
                        succeeded.set(true);
                    }
                    sorted.cvar_exact(&state, config.alpha)
                }
                Some(shots) => {
                    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
                    rng.set_stream(eval_index as u64);
                    let sample = match crate::simulator::sample_shots(&state, shots, &mut rng) {
                        Ok(sample) => sample,
                        Err(err) => {
                            prepare_error.get_or_insert(err);
                            return f64::NAN;
                        }
                    };
                    let hit_count: u64 =
                        solutions.iter().map(|&l| sample.count_of(l)).sum();
                    hits.push(hit_count);
                    if hit_count > 0 {
                        succeeded.set(true);
                    }
                    let estimate = sample_cvar(instance, config.cost, &sample, config.alpha);
                    match estimate {
                        Ok(est) => {
                            std_errors.push(est.std_error);
                            est.value
                        }
                        Err(err) => {
                            prepare_error.get_or_insert(err);
                            return f64::NAN;
                        }
                    }
                }
            };
            value
        };
        let stop = |_index: usize, _cost: f64| config.stop_on_success && succeeded.get();
        minimize_with_stop(objective, &theta0, &config.optimizer, stop)
    };

    if let Some(err) = prepare_error {
        return Err(err);
    }

    let cost_trajectory: Vec<f64> = trace.evaluations.iter().map(|e| e.cost).collect();
    let track_fidelity = !solutions.is_empty();
    let max_fidelity =
        track_fidelity.then(|| fidelities.iter().cloned().fold(0.0f64, f64::max));
    let success_by_fidelity =
        max_fidelity.map(|m| m > config.fidelity_threshold);
    let success_by_observation = sampled.then(|| hits.iter().any(|&h| h > 0));

    let first_fidelity_success = fidelities
        .iter()
        .position(|&f| f > config.fidelity_threshold)
        .map(|i| i + 1);
    let first_hit = hits.iter().position(|&h| h > 0).map(|i| i + 1);
    let (success, first_success_eval) = if sampled {
        (success_by_observation.unwrap_or(false), first_hit)
    } else {
        (success_by_fidelity.unwrap_or(false), first_fidelity_success)
    };

    Ok(VqeRunRecord {
        config: config.clone(),
        initial_theta: theta0,
        cost_trajectory,
        fidelity_trajectory: track_fidelity.then_some(fidelities),
        solution_hits: sampled.then_some(hits),
        cvar_std_errors: sampled.then_some(std_errors),
        best_cost: trace.best_cost,
        best_theta: trace.best_theta.clone(),
        termination: trace.termination,
        evaluations: trace.evaluations.len(),
        max_fidelity,
        first_success_eval,
        success,
        success_by_fidelity,
        success_by_observation,
        trace,
        wall_time: started.elapsed(),
    })
}

/// CVaR of one shot sample under the configured cost shape; integer costs
/// stay exact through the sort.
fn sample_cvar(
    instance: &FactoringInstance,
    kind: CostFunction,
    sample: &crate::simulator::ShotSample,
    alpha: f64,
) -> Result<CvarEstimate> {
    if kind.is_integer_valued() {
        let mut costs: Vec<i128> = Vec::with_capacity(sample.total() as usize);
        for (&index, &count) in sample.counts() {
            let c = cost_value_int(instance, index, kind).unwrap();
            costs.extend(std::iter::repeat_n(c, count as usize));
        }
        cvar_sampled(&costs, alpha)
    } else {
        let mut costs: Vec<f64> = Vec::with_capacity(sample.total() as usize);
        for (&index, &count) in sample.counts() {
            let c = cost_value(instance, index, kind);
            costs.extend(std::iter::repeat_n(c, count as usize));
        }
        cvar_sampled(&costs, alpha)
    }
}

/// Run each alpha of the schedule in order, stopping at the first success.
pub fn run_with_alpha_schedule(config: &RunConfig) -> Result<Vec<VqeRunRecord>> {
    let schedule = config
        .alpha_schedule
        .clone()
        .filter(|s| !s.is_empty())
        .ok_or(Error::EmptySchedule)?;
    let mut records = Vec::new();
    for alpha in schedule {
        let stage = RunConfig { alpha, ..config.clone() };
        let record = run_vqe(&stage)?;
        let done = record.success;
        records.push(record);
        if done {
            break;
        }
    }
    Ok(records)
}

/// P = 1 - (1 - t)^S: chance of observing a state of fidelity t at least
/// once in S shots.
pub fn success_probability(fidelity_threshold: f64, shots: u64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&fidelity_threshold));
    debug_assert!(shots >= 1);
    let miss = 1.0 - fidelity_threshold;
    let total_miss = if shots <= i32::MAX as u64 {
        miss.powi(shots as i32)
    } else {
        miss.powf(shots as f64)
    };
    1.0 - total_miss
}
