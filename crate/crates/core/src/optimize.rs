//! Derivative-free optimizers driving the parameter search.
//!
//! Two methods: a COBYLA-style scheme (linear interpolation model over an
//! n+1 point simplex, steepest-descent steps inside a shrinking trust
//! region) and NFT (sequential exact minimization of one angle at a time
//! through a three-point sinusoidal fit).

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Cobyla,
    Nft,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Cobyla => "cobyla",
            Method::Nft => "nft",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "cobyla" => Ok(Method::Cobyla),
            "nft" => Ok(Method::Nft),
            other => Err(format!("unknown optimizer '{other}'")),
        }
    }
}

/// Parameter sweep order for NFT.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepOrder {
    #[default]
    Cyclic,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub method: Method,
    pub max_evals: usize,
    /// Initial trust radius (radians).
    pub rho_begin: f64,
    /// Final trust radius; reaching it terminates COBYLA.
    pub rho_end: f64,
    pub sweep_order: SweepOrder,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            method: Method::Cobyla,
            max_evals: 1000,
            rho_begin: 0.5,
            rho_end: 1e-4,
            sweep_order: SweepOrder::Cyclic,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_evals < 1 {
            return Err(Error::EmptyGrid("max_evals must be at least 1"));
        }
        if !(self.rho_end > 0.0 && self.rho_end < self.rho_begin) {
            return Err(Error::EmptyGrid("trust radii must satisfy 0 < rho_end < rho_begin"));
        }
        Ok(())
    }
}

/// One recorded objective call; indices are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub theta: Vec<f64>,
    pub cost: f64,
    pub index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    BudgetExhausted,
    CallbackStop,
    AbortedNonFinite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationTrace {
    pub evaluations: Vec<Evaluation>,
    pub best_theta: Vec<f64>,
    pub best_cost: f64,
    pub termination: Termination,
}

impl OptimizationTrace {
    pub fn evaluation_count(&self) -> usize {
        self.evaluations.len()
    }
}

/// Minimize with the configured method, recording every objective call.
pub fn minimize<F>(objective: F, theta0: &[f64], config: &OptimizerConfig) -> OptimizationTrace
where
    F: FnMut(&[f64]) -> f64,
{
    minimize_with_stop(objective, theta0, config, |_, _| false)
}

/// As [`minimize`], with an early-stop callback consulted after every
/// evaluation (index, cost). Returning true ends the run with
/// `Termination::CallbackStop`.
pub fn minimize_with_stop<F, S>(
    objective: F,
    theta0: &[f64],
    config: &OptimizerConfig,
    stop: S,
) -> OptimizationTrace
where
    F: FnMut(&[f64]) -> f64,
    S: FnMut(usize, f64) -> bool,
{
    let mut driver = Driver {
        objective,
        stop,
        max_evals: config.max_evals,
        evaluations: Vec::new(),
        verdict: None,
    };
    match config.method {
        Method::Cobyla => cobyla(&mut driver, theta0, config),
        Method::Nft => nft(&mut driver, theta0, config),
    }
    driver.finish(theta0)
}

/// Wraps the objective with budget accounting, tracing, stop checks and
/// non-finite detection.
struct Driver<F, S> {
    objective: F,
    stop: S,
    max_evals: usize,
    evaluations: Vec<Evaluation>,
    verdict: Option<Termination>,
}

impl<F, S> Driver<F, S>
where
    F: FnMut(&[f64]) -> f64,
    S: FnMut(usize, f64) -> bool,
{
    /// Evaluate, or None when the run must end (budget, stop, non-finite).
    fn eval(&mut self, theta: &[f64]) -> Option<f64> {
        if self.verdict.is_some() {
            return None;
        }
        if self.evaluations.len() >= self.max_evals {
            self.verdict = Some(Termination::BudgetExhausted);
            return None;
        }
        let cost = (self.objective)(theta);
        let index = self.evaluations.len() + 1;
        self.evaluations.push(Evaluation { theta: theta.to_vec(), cost, index });
        if !cost.is_finite() {
            self.verdict = Some(Termination::AbortedNonFinite);
            return None;
        }
        if (self.stop)(index, cost) {
            self.verdict = Some(Termination::CallbackStop);
            return None;
        }
        Some(cost)
    }

    fn finish(self, theta0: &[f64]) -> OptimizationTrace {
        let best = self
            .evaluations
            .iter()
            .filter(|e| e.cost.is_finite())
            .min_by(|a, b| a.cost.total_cmp(&b.cost));
        let (best_theta, best_cost) = match best {
            Some(e) => (e.theta.clone(), e.cost),
            None => (theta0.to_vec(), f64::NAN),
        };
        OptimizationTrace {
            evaluations: self.evaluations,
            best_theta,
            best_cost,
            termination: self.verdict.unwrap_or(Termination::Converged),
        }
    }
}

// ---------------------------------------------------------------------------
// COBYLA-style linear trust region
// ---------------------------------------------------------------------------

fn cobyla<F, S>(driver: &mut Driver<F, S>, theta0: &[f64], config: &OptimizerConfig)
where
    F: FnMut(&[f64]) -> f64,
    S: FnMut(usize, f64) -> bool,
{
    let dim = theta0.len();
    let mut rho = config.rho_begin;

    // Interpolation simplex: theta0 plus one offset point per coordinate.
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    let Some(f0) = driver.eval(theta0) else { return };
    simplex.push((theta0.to_vec(), f0));
    for i in 0..dim {
        let mut x = theta0.to_vec();
        x[i] += rho;
        let Some(f) = driver.eval(&x) else { return };
        simplex.push((x, f));
    }
    if dim == 0 {
        driver.verdict = Some(Termination::Converged);
        return;
    }

    // A step failing against fresh geometry means this resolution is
    // exhausted; failing against drifted geometry only forces a respan.
    let mut fresh = true;
    // Consecutive successes lengthen the step up to 4 * rho.
    let mut step_scale = 1.0f64;
    loop {
        let best = argmin(&simplex);
        let worst = argmax(&simplex);

        // Pull the farthest vertex back towards the current scale.
        let (far, far_dist) = farthest(&simplex, best);
        if far != best && far_dist > 4.0 * rho {
            let pulled = pull_towards(&simplex[best].0, &simplex[far].0, rho);
            let Some(f) = driver.eval(&pulled) else { return };
            simplex[far] = (pulled, f);
            fresh = false;
            continue;
        }

        let gradient = linear_model_gradient(&simplex, best)
            .filter(|g| g.iter().all(|v| v.is_finite()));
        let step = gradient.and_then(|g| {
            let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            (gnorm > 1e-14).then_some((g, gnorm))
        });

        let improved = if let Some((gradient, gnorm)) = step {
            let length = step_scale * rho;
            let mut candidate = simplex[best].0.clone();
            for (c, g) in candidate.iter_mut().zip(&gradient) {
                *c -= length / gnorm * g;
            }
            let Some(f_new) = driver.eval(&candidate) else { return };
            let accepted = f_new < simplex[best].1 - 0.1 * length * gnorm;
            if f_new < simplex[worst].1 {
                simplex[worst] = (candidate, f_new);
            }
            accepted
        } else {
            // Singular or flat model.
            false
        };

        if improved {
            fresh = false;
            step_scale = (step_scale * 2.0).min(4.0);
        } else if step_scale > 1.0 {
            // A long step overshot; retry at the base length before judging
            // this resolution.
            step_scale = 1.0;
        } else if fresh {
            rho *= 0.5;
            if rho < config.rho_end {
                driver.verdict = Some(Termination::Converged);
                return;
            }
            let best = argmin(&simplex);
            if !respan(driver, &mut simplex, best, rho) {
                return;
            }
        } else {
            let best = argmin(&simplex);
            if !respan(driver, &mut simplex, best, rho) {
                return;
            }
            fresh = true;
        }
    }
}

fn argmin(simplex: &[(Vec<f64>, f64)]) -> usize {
    let mut best = 0;
    for (i, (_, f)) in simplex.iter().enumerate() {
        if *f < simplex[best].1 {
            best = i;
        }
    }
    best
}

fn argmax(simplex: &[(Vec<f64>, f64)]) -> usize {
    let mut worst = 0;
    for (i, (_, f)) in simplex.iter().enumerate() {
        if *f > simplex[worst].1 {
            worst = i;
        }
    }
    worst
}

fn farthest(simplex: &[(Vec<f64>, f64)], from: usize) -> (usize, f64) {
    let mut far = from;
    let mut far_dist = 0.0;
    for (i, (x, _)) in simplex.iter().enumerate() {
        let d: f64 = x
            .iter()
            .zip(&simplex[from].0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if d > far_dist {
            far = i;
            far_dist = d;
        }
    }
    (far, far_dist)
}

fn pull_towards(anchor: &[f64], toward: &[f64], distance: f64) -> Vec<f64> {
    let norm: f64 = anchor
        .iter()
        .zip(toward)
        .map(|(a, b)| (b - a) * (b - a))
        .sum::<f64>()
        .sqrt();
    anchor
        .iter()
        .zip(toward)
        .map(|(a, b)| a + distance * (b - a) / norm)
        .collect()
}

/// Replace every non-best vertex with best + rho * e_i. False when the
/// budget ran out mid-rebuild.
fn respan<F, S>(
    driver: &mut Driver<F, S>,
    simplex: &mut Vec<(Vec<f64>, f64)>,
    best: usize,
    rho: f64,
) -> bool
where
    F: FnMut(&[f64]) -> f64,
    S: FnMut(usize, f64) -> bool,
{
    let center = simplex[best].0.clone();
    let f_center = simplex[best].1;
    let dim = center.len();
    let mut rebuilt = vec![(center.clone(), f_center)];
    for i in 0..dim {
        let mut x = center.clone();
        x[i] += rho;
        let Some(f) = driver.eval(&x) else { return false };
        rebuilt.push((x, f));
    }
    *simplex = rebuilt;
    true
}

/// Gradient of the affine interpolant through the simplex, taken at the
/// pivot vertex: solve (x_i - x_pivot) . g = f_i - f_pivot.
fn linear_model_gradient(simplex: &[(Vec<f64>, f64)], pivot: usize) -> Option<Vec<f64>> {
    let dim = simplex[0].0.len();
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(dim);
    let mut rhs: Vec<f64> = Vec::with_capacity(dim);
    for (i, (x, f)) in simplex.iter().enumerate() {
        if i == pivot {
            continue;
        }
        rows.push(x.iter().zip(&simplex[pivot].0).map(|(a, b)| a - b).collect());
        rhs.push(f - simplex[pivot].1);
    }
    solve_linear(rows, rhs)
}

/// Gaussian elimination with partial pivoting; None when near-singular.
#[allow(clippy::needless_range_loop)]
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a
        .iter()
        .flat_map(|row| row.iter().map(|v| v.abs()))
        .fold(0.0f64, f64::max)
        .max(1e-300);
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 * scale {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor != 0.0 {
                for k in col..n {
                    a[row][k] -= factor * a[col][k];
                }
                b[row] -= factor * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut acc = b[col];
        for k in col + 1..n {
            acc -= a[col][k] * x[k];
        }
        x[col] = acc / a[col][col];
    }
    Some(x)
}

// ---------------------------------------------------------------------------
// NFT: sequential three-point sinusoidal fits
// ---------------------------------------------------------------------------

fn nft<F, S>(driver: &mut Driver<F, S>, theta0: &[f64], config: &OptimizerConfig)
where
    F: FnMut(&[f64]) -> f64,
    S: FnMut(usize, f64) -> bool,
{
    use std::f64::consts::{FRAC_PI_2, PI};

    let dim = theta0.len();
    let mut theta = theta0.to_vec();
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..dim).collect();

    loop {
        // Fresh anchor each sweep; within the sweep the fitted minimum value
        // serves as the next parameter's anchor.
        let Some(mut anchor) = driver.eval(&theta) else { return };
        if dim == 0 {
            driver.verdict = Some(Termination::Converged);
            return;
        }
        if config.sweep_order == SweepOrder::Random {
            order.shuffle(&mut rng);
        }
        for &j in &order {
            let original = theta[j];
            theta[j] = original + FRAC_PI_2;
            let Some(y_plus) = driver.eval(&theta) else { return };
            theta[j] = original - FRAC_PI_2;
            let Some(y_minus) = driver.eval(&theta) else { return };
            theta[j] = original;

            // f(x) = c0 + c1 cos(x - phi) through the three samples.
            let c0 = (y_plus + y_minus) / 2.0;
            let a_cos = anchor - c0;
            let a_sin = (y_minus - y_plus) / 2.0;
            let amplitude = a_cos.hypot(a_sin);
            if amplitude < 1e-12 {
                continue; // zero-amplitude rule: leave the parameter alone
            }
            let phi = original - a_sin.atan2(a_cos);
            theta[j] = phi + PI;
            anchor = c0 - amplitude;
        }
    }
}
