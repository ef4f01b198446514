//! Real-amplitude statevector simulation of the RY + entangler ansätze.
//!
//! Every gate in play (RY, CNOT, CZ, H) has a real matrix, so amplitudes stay
//! real throughout: half the memory and none of the complex arithmetic. Basis
//! index convention: qubit k is bit `N - 1 - k` of the index, i.e. qubit 0 is
//! the leftmost character of a printed label.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::FactoringInstance;

/// Entangling-layer wiring of the hardware-efficient ansatz.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnsatzFamily {
    /// CNOT staircase (i, i+1) for i = 0..N-2.
    LinearCnot,
    /// Staircase plus the wrap-around CNOT (N-1, 0).
    CircularCnot,
    /// CNOTs on disjoint pairs (0,1), (2,3), ...; odd N leaves the last idle.
    ParallelCnot,
    /// Same pairing with CZ gates.
    ParallelCz,
}

impl AnsatzFamily {
    pub const ALL: [AnsatzFamily; 4] = [
        AnsatzFamily::LinearCnot,
        AnsatzFamily::CircularCnot,
        AnsatzFamily::ParallelCnot,
        AnsatzFamily::ParallelCz,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            AnsatzFamily::LinearCnot => "linear_cnot",
            AnsatzFamily::CircularCnot => "circular_cnot",
            AnsatzFamily::ParallelCnot => "parallel_cnot",
            AnsatzFamily::ParallelCz => "parallel_cz",
        }
    }
}

impl std::str::FromStr for AnsatzFamily {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "linear_cnot" | "linear-cnot" => Ok(AnsatzFamily::LinearCnot),
            "circular_cnot" | "circular-cnot" => Ok(AnsatzFamily::CircularCnot),
            "parallel_cnot" | "parallel-cnot" => Ok(AnsatzFamily::ParallelCnot),
            "parallel_cz" | "parallel-cz" => Ok(AnsatzFamily::ParallelCz),
            other => Err(format!("unknown ansatz family '{other}'")),
        }
    }
}

/// One gate of the built circuit; RY gates reference their parameter slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Ry { qubit: u32, param: usize },
    Cnot { control: u32, target: u32 },
    Cz { a: u32, b: u32 },
    H { qubit: u32 },
}

/// A parameterized circuit: L blocks of per-qubit RY rotations with one
/// entangling layer between consecutive blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnsatzSpec {
    pub family: AnsatzFamily,
    pub qubits: u32,
    pub layers: u32,
}

impl AnsatzSpec {
    pub fn new(family: AnsatzFamily, qubits: u32, layers: u32) -> Self {
        AnsatzSpec { family, qubits, layers }
    }

    /// Number of RY angles: N * L.
    pub fn parameter_count(&self) -> usize {
        (self.qubits * self.layers) as usize
    }

    /// Wiring of one entangling layer.
    pub fn entangling_pairs(&self) -> Vec<(u32, u32)> {
        let n = self.qubits;
        match self.family {
            AnsatzFamily::LinearCnot => (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect(),
            AnsatzFamily::CircularCnot => {
                let mut pairs: Vec<(u32, u32)> =
                    (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect();
                if n >= 2 {
                    pairs.push((n - 1, 0));
                }
                pairs
            }
            AnsatzFamily::ParallelCnot | AnsatzFamily::ParallelCz => {
                (0..n.saturating_sub(1)).step_by(2).map(|i| (i, i + 1)).collect()
            }
        }
    }

    /// The full gate sequence; RY parameter slot for layer l, qubit k is
    /// `l * N + k`.
    pub fn gates(&self) -> Vec<Gate> {
        let mut gates = Vec::new();
        let pairs = self.entangling_pairs();
        for layer in 0..self.layers {
            for qubit in 0..self.qubits {
                gates.push(Gate::Ry { qubit, param: (layer * self.qubits + qubit) as usize });
            }
            if layer + 1 < self.layers {
                for &(a, b) in &pairs {
                    gates.push(match self.family {
                        AnsatzFamily::ParallelCz => Gate::Cz { a, b },
                        _ => Gate::Cnot { control: a, target: b },
                    });
                }
            }
        }
        gates
    }
}

/// Initial state fed into the first rotation block.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    #[default]
    Zeros,
    Plus,
}

/// Real 2^N-amplitude state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    qubits: u32,
    amps: Vec<f64>,
}

impl StateVector {
    /// |0...0>.
    pub fn new_zeros(qubits: u32) -> Self {
        let mut amps = vec![0.0; 1 << qubits];
        amps[0] = 1.0;
        StateVector { qubits, amps }
    }

    /// |+>^N: uniform amplitudes 1/sqrt(2^N).
    pub fn new_plus(qubits: u32) -> Self {
        let a = 1.0 / ((1u64 << qubits) as f64).sqrt();
        StateVector { qubits, amps: vec![a; 1 << qubits] }
    }

    /// Adopt explicit amplitudes (length must be a power of two, norm within
    /// 1e-6 of 1).
    pub fn from_amplitudes(amps: Vec<f64>) -> Result<Self> {
        let len = amps.len();
        if len == 0 || !len.is_power_of_two() {
            return Err(Error::ParameterCount { expected: len.next_power_of_two().max(2), got: len });
        }
        let state = StateVector { qubits: len.trailing_zeros(), amps };
        let norm = state.norm_squared();
        if (norm - 1.0).abs() > 1e-6 {
            return Err(Error::NotNormalized(norm));
        }
        Ok(state)
    }

    pub fn qubits(&self) -> u32 {
        self.qubits
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amps
    }

    pub fn norm_squared(&self) -> f64 {
        self.amps.iter().map(|a| a * a).sum()
    }

    /// Elementwise squared amplitudes.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a * a).collect()
    }

    pub fn probability_of(&self, basis_index: u64) -> f64 {
        let a = self.amps[basis_index as usize];
        a * a
    }

    fn bit(&self, qubit: u32) -> usize {
        debug_assert!(qubit < self.qubits);
        1usize << (self.qubits - 1 - qubit)
    }

    /// RY(theta) = [[cos t/2, -sin t/2], [sin t/2, cos t/2]] on one qubit.
    pub fn apply_ry(&mut self, qubit: u32, theta: f64) {
        let (s, c) = (theta / 2.0).sin_cos();
        let bit = self.bit(qubit);
        for base in (0..self.amps.len()).step_by(bit << 1) {
            for i0 in base..base + bit {
                let i1 = i0 | bit;
                let a0 = self.amps[i0];
                let a1 = self.amps[i1];
                self.amps[i0] = c * a0 - s * a1;
                self.amps[i1] = s * a0 + c * a1;
            }
        }
    }

    pub fn apply_h(&mut self, qubit: u32) {
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        let bit = self.bit(qubit);
        for base in (0..self.amps.len()).step_by(bit << 1) {
            for i0 in base..base + bit {
                let i1 = i0 | bit;
                let a0 = self.amps[i0];
                let a1 = self.amps[i1];
                self.amps[i0] = (a0 + a1) * inv_sqrt2;
                self.amps[i1] = (a0 - a1) * inv_sqrt2;
            }
        }
    }

    pub fn apply_cnot(&mut self, control: u32, target: u32) {
        debug_assert_ne!(control, target);
        let cbit = self.bit(control);
        let tbit = self.bit(target);
        for base in (0..self.amps.len()).step_by(tbit << 1) {
            for i0 in base..base + tbit {
                if i0 & cbit != 0 {
                    self.amps.swap(i0, i0 | tbit);
                }
            }
        }
    }

    pub fn apply_cz(&mut self, a: u32, b: u32) {
        debug_assert_ne!(a, b);
        let mask = self.bit(a) | self.bit(b);
        for (i, amp) in self.amps.iter_mut().enumerate() {
            if i & mask == mask {
                *amp = -*amp;
            }
        }
    }

    pub fn apply(&mut self, gate: Gate, theta: &[f64]) {
        match gate {
            Gate::Ry { qubit, param } => self.apply_ry(qubit, theta[param]),
            Gate::Cnot { control, target } => self.apply_cnot(control, target),
            Gate::Cz { a, b } => self.apply_cz(a, b),
            Gate::H { qubit } => self.apply_h(qubit),
        }
    }

    /// Re-initialize this state and run the ansatz over it. Reuses the
    /// allocation; the buffer must already have the right size.
    pub fn prepare(&mut self, spec: &AnsatzSpec, theta: &[f64], initial: InitialState) -> Result<()> {
        if theta.len() != spec.parameter_count() {
            return Err(Error::ParameterCount { expected: spec.parameter_count(), got: theta.len() });
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFiniteParameter);
        }
        debug_assert_eq!(self.qubits, spec.qubits);
        match initial {
            InitialState::Zeros => {
                self.amps.fill(0.0);
                self.amps[0] = 1.0;
            }
            InitialState::Plus => {
                self.amps.fill(1.0 / ((1u64 << self.qubits) as f64).sqrt());
            }
        }
        for gate in spec.gates() {
            self.apply(gate, theta);
        }
        Ok(())
    }
}

/// Build the ansatz state from scratch.
pub fn prepare_state(spec: &AnsatzSpec, theta: &[f64], initial: InitialState) -> Result<StateVector> {
    let mut state = StateVector::new_zeros(spec.qubits);
    state.prepare(spec, theta, initial)?;
    Ok(state)
}

/// <psi| H |psi> = sum_s prob(s) * (n - p_s q_s)^2.
pub fn exact_energy(state: &StateVector, instance: &FactoringInstance) -> Result<f64> {
    check_dims(state, instance)?;
    let mut energy = 0.0;
    for (i, amp) in state.amplitudes().iter().enumerate() {
        if *amp != 0.0 {
            energy += amp * amp * crate::hamiltonian::eigenvalue(instance, i as u64) as f64;
        }
    }
    Ok(energy)
}

/// Probability mass on the solution label(s).
pub fn fidelity(state: &StateVector, instance: &FactoringInstance) -> Result<f64> {
    check_dims(state, instance)?;
    let labels = instance.solution_labels()?;
    Ok(labels.iter().map(|&l| state.probability_of(l)).sum())
}

fn check_dims(state: &StateVector, instance: &FactoringInstance) -> Result<()> {
    if state.qubits() != instance.qubits() {
        return Err(Error::DimensionMismatch {
            state_qubits: state.qubits(),
            instance_qubits: instance.qubits(),
        });
    }
    Ok(())
}

/// Measurement record: label index -> multiplicity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotSample {
    counts: BTreeMap<u64, u64>,
    total: u64,
}

impl ShotSample {
    pub fn counts(&self) -> &BTreeMap<u64, u64> {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn count_of(&self, basis_index: u64) -> u64 {
        self.counts.get(&basis_index).copied().unwrap_or(0)
    }
}

/// Draw S independent shots from the state's basis distribution by inverse
/// CDF; deterministic for a seeded rng.
pub fn sample_shots<R: Rng>(state: &StateVector, shots: u64, rng: &mut R) -> Result<ShotSample> {
    if shots == 0 {
        return Err(Error::NoShots);
    }
    let mut cdf = Vec::with_capacity(state.amplitudes().len());
    let mut acc = 0.0;
    for amp in state.amplitudes() {
        acc += amp * amp;
        cdf.push(acc);
    }
    let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
    for _ in 0..shots {
        let u: f64 = rng.gen();
        let idx = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
        *counts.entry(idx as u64).or_insert(0) += 1;
    }
    Ok(ShotSample { counts, total: shots })
}
