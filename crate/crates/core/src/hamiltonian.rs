//! The diagonal cost Hamiltonian H = (nI - PQ)^2.
//!
//! Three interchangeable views of the same operator:
//! a multilinear boolean polynomial over the free factor bits, its Pauli-Z
//! expansion, and a direct per-label eigenvalue oracle (n - pq)^2. The oracle
//! is the hot path; the polynomial and Pauli forms exist for verification and
//! export.
//!
//! Bit masks throughout use basis-index bit positions: qubit k (the k-th
//! character of the printed label) sits at bit `N - 1 - k`, so a mask can be
//! tested directly against a basis index.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::FactoringInstance;

/// Multilinear polynomial with exact integer coefficients over binary
/// variables; the key is the variable set as a basis-space bit mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BooleanPolynomial {
    n_vars: u32,
    terms: BTreeMap<u32, i128>,
}

impl BooleanPolynomial {
    /// Build a polynomial from explicit (mask, coefficient) terms.
    pub fn from_terms(n_vars: u32, terms: impl IntoIterator<Item = (u32, i128)>) -> Result<Self> {
        if n_vars > 32 {
            return Err(Error::TooManyQubits { required: n_vars, max: 32 });
        }
        let mut map = BTreeMap::new();
        for (mask, coeff) in terms {
            debug_assert!(n_vars == 32 || mask < (1u32 << n_vars));
            if coeff != 0 {
                *map.entry(mask).or_insert(0) += coeff;
            }
        }
        map.retain(|_, c| *c != 0);
        Ok(BooleanPolynomial { n_vars, terms: map })
    }

    /// Expand (n - pq)^2 over the instance's free factor bits, with the
    /// implicit p0 = q0 = 1 substituted before expansion. Multilinear
    /// reduction (x^2 = x) is applied during the product.
    pub fn build(instance: &FactoringInstance) -> Result<Self> {
        let n_vars = instance.qubits();
        if n_vars > 32 {
            return Err(Error::TooManyQubits { required: n_vars, max: 32 });
        }
        let overflow = || Error::CoefficientOverflow(instance.n());

        // p = 1 + sum_j 2^j p_j, q likewise; qubit k of the label carries
        // p_{Np-1-k} for k < Np-1 and q_{Nq-1-(k-(Np-1))} after that.
        let p_free = instance.bits_p() - 1;
        let mut p_poly = vec![(0u32, 1i128)];
        let mut q_poly = vec![(0u32, 1i128)];
        for k in 0..p_free {
            let bit = 1u32 << (n_vars - 1 - k);
            p_poly.push((bit, 1i128 << (instance.bits_p() - 1 - k)));
        }
        for k in p_free..n_vars {
            let bit = 1u32 << (n_vars - 1 - k);
            q_poly.push((bit, 1i128 << (instance.bits_q() - 1 - (k - p_free))));
        }

        // d = n - pq, then h = d^2, merging like masks as we go.
        let mut d: BTreeMap<u32, i128> = BTreeMap::new();
        d.insert(0, instance.n() as i128);
        for &(mp, cp) in &p_poly {
            for &(mq, cq) in &q_poly {
                let c = cp.checked_mul(cq).ok_or_else(overflow)?;
                let slot = d.entry(mp | mq).or_insert(0);
                *slot = slot.checked_sub(c).ok_or_else(overflow)?;
            }
        }

        let d: Vec<(u32, i128)> = d.into_iter().collect();
        let mut h: BTreeMap<u32, i128> = BTreeMap::new();
        for &(ma, ca) in &d {
            for &(mb, cb) in &d {
                let c = ca.checked_mul(cb).ok_or_else(overflow)?;
                let slot = h.entry(ma | mb).or_insert(0);
                *slot = slot.checked_add(c).ok_or_else(overflow)?;
            }
        }
        h.retain(|_, c| *c != 0);
        Ok(BooleanPolynomial { n_vars, terms: h })
    }

    pub fn n_vars(&self) -> u32 {
        self.n_vars
    }

    /// Terms as (variable mask, coefficient), ascending by mask.
    pub fn terms(&self) -> impl Iterator<Item = (u32, i128)> + '_ {
        self.terms.iter().map(|(&m, &c)| (m, c))
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|m| m.count_ones()).max().unwrap_or(0)
    }

    /// Value at one 0/1 assignment, given as a basis index.
    pub fn evaluate(&self, assignment: u64) -> i128 {
        let a = assignment as u32;
        self.terms
            .iter()
            .filter(|(&mask, _)| a & mask == mask)
            .map(|(_, &c)| c)
            .sum()
    }

    /// Values on all 2^N assignments, indexed by basis index. Computed with a
    /// subset-sum (zeta) transform in O(N 2^N); pointwise equal to
    /// [`evaluate`].
    pub fn evaluate_all(&self) -> Vec<i128> {
        let size = 1usize << self.n_vars;
        let mut values = vec![0i128; size];
        for (&mask, &c) in &self.terms {
            values[mask as usize] = c;
        }
        for bit in 0..self.n_vars {
            let b = 1usize << bit;
            for s in 0..size {
                if s & b != 0 {
                    values[s] += values[s ^ b];
                }
            }
        }
        values
    }
}

/// Exact dyadic rational: numer / 2^log2_denom, kept normalized (odd
/// numerator unless zero).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dyadic {
    pub numer: i128,
    pub log2_denom: u32,
}

impl Dyadic {
    pub fn new(numer: i128, log2_denom: u32) -> Self {
        let mut d = Dyadic { numer, log2_denom };
        d.normalize();
        d
    }

    fn normalize(&mut self) {
        if self.numer == 0 {
            self.log2_denom = 0;
            return;
        }
        while self.numer % 2 == 0 && self.log2_denom > 0 {
            self.numer /= 2;
            self.log2_denom -= 1;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.numer == 0
    }

    pub fn to_f64(&self) -> f64 {
        self.numer as f64 / (1u128 << self.log2_denom) as f64
    }

    /// Exact decimal form; dyadic rationals always terminate.
    pub fn to_decimal_string(&self) -> String {
        if self.log2_denom == 0 {
            return self.numer.to_string();
        }
        let k = self.log2_denom;
        let sign = if self.numer < 0 { "-" } else { "" };
        let mag = self.numer.unsigned_abs();
        // numer / 2^k = numer * 5^k / 10^k
        let scaled = mag
            .checked_mul(5u128.pow(k))
            .expect("pauli coefficient too large for exact decimal form");
        let pow10 = 10u128.pow(k);
        let int_part = scaled / pow10;
        let frac = scaled % pow10;
        format!("{sign}{int_part}.{frac:0width$}", width = k as usize)
    }
}

/// One Pauli-Z product term: coefficient times Z on every qubit in `z_mask`
/// (basis-space bits).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PauliZTerm {
    pub coeff: Dyadic,
    pub z_mask: u32,
}

impl PauliZTerm {
    /// Eigenvalue sign of the Z product on a basis state: (-1)^|mask & s|.
    pub fn sign_on(&self, basis_index: u64) -> i32 {
        if (self.z_mask as u64 & basis_index).count_ones().is_multiple_of(2) {
            1
        } else {
            -1
        }
    }
}

/// Expand a multilinear polynomial into Pauli-Z terms via x -> (I - Z)/2,
/// merging like Z masks. Ascending by mask; zero terms dropped.
pub fn to_pauli_terms(poly: &BooleanPolynomial) -> Vec<PauliZTerm> {
    let mut acc: BTreeMap<u32, (i128, u32)> = BTreeMap::new();
    for (mask, coeff) in poly.terms() {
        let degree = mask.count_ones();
        // c * prod (1 - z)/2 = c/2^d * sum_{T subseteq mask} (-1)^|T| Z_T
        let mut sub = mask;
        loop {
            let entry = acc.entry(sub).or_insert((0, degree));
            // Bring both addends to a common denominator.
            let (num, den) = *entry;
            let (num, den, add) = if den >= degree {
                (num, den, coeff << (den - degree))
            } else {
                (num << (degree - den), degree, coeff)
            };
            let signed = if sub.count_ones() % 2 == 0 { add } else { -add };
            *entry = (num + signed, den);
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & mask;
        }
    }
    acc.into_iter()
        .map(|(z_mask, (numer, log2_denom))| PauliZTerm { coeff: Dyadic::new(numer, log2_denom), z_mask })
        .filter(|t| !t.coeff.is_zero())
        .collect()
}

/// Exact value of a Pauli-Z term sum on one basis state.
pub fn pauli_eval(terms: &[PauliZTerm], basis_index: u64) -> Dyadic {
    let max_denom = terms.iter().map(|t| t.coeff.log2_denom).max().unwrap_or(0);
    let mut sum = 0i128;
    for term in terms {
        let scaled = term.coeff.numer << (max_denom - term.coeff.log2_denom);
        sum += i128::from(term.sign_on(basis_index)) * scaled;
    }
    Dyadic::new(sum, max_denom)
}

/// Pauli-Z sum on every basis state at once via a Walsh-Hadamard transform;
/// pointwise equal to [`pauli_eval`].
pub fn pauli_eval_all(terms: &[PauliZTerm], n_qubits: u32) -> Vec<Dyadic> {
    let size = 1usize << n_qubits;
    let max_denom = terms.iter().map(|t| t.coeff.log2_denom).max().unwrap_or(0);
    let mut values = vec![0i128; size];
    for term in terms {
        values[term.z_mask as usize] += term.coeff.numer << (max_denom - term.coeff.log2_denom);
    }
    for bit in 0..n_qubits {
        let b = 1usize << bit;
        for s in 0..size {
            if s & b == 0 {
                let (x, y) = (values[s], values[s | b]);
                values[s] = x + y;
                values[s | b] = x - y;
            }
        }
    }
    values.into_iter().map(|v| Dyadic::new(v, max_denom)).collect()
}

/// Text export: one `coeff<TAB>Z/I string` line per term, the string with
/// qubit 0 (most significant label bit) first, ascending by Z mask.
pub fn export_pauli_text(terms: &[PauliZTerm], n_qubits: u32) -> String {
    let mut out = String::new();
    for term in terms {
        let mut ops = String::with_capacity(n_qubits as usize);
        for qubit in 0..n_qubits {
            let bit = 1u32 << (n_qubits - 1 - qubit);
            ops.push(if term.z_mask & bit != 0 { 'Z' } else { 'I' });
        }
        out.push_str(&term.coeff.to_decimal_string());
        out.push('\t');
        out.push_str(&ops);
        out.push('\n');
    }
    out
}

/// Fast eigenvalue oracle: lambda = (n - pq)^2 for the label's candidate
/// pair, in exact integer arithmetic.
pub fn eigenvalue(instance: &FactoringInstance, basis_index: u64) -> i128 {
    let (p, q) = instance.decode_index(basis_index);
    let d = instance.n() as i128 - (p as i128) * (q as i128);
    d * d
}

/// Logarithm base for the compressed cost function.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogBase {
    #[default]
    Natural,
    Two,
    Ten,
}

/// The three cost-function shapes applied to a shot's |n - pq|.
/// All are minimized exactly at pq = n.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostFunction {
    /// (n - pq)^2, the Hamiltonian eigenvalue itself.
    Hamiltonian,
    /// ceil(log(|n - pq| + 1)).
    Logarithm {
        #[serde(default)]
        base: LogBase,
    },
    /// -1 / (|n - pq| + epsilon).
    Inverse {
        #[serde(default = "default_epsilon")]
        epsilon: f64,
    },
}

pub fn default_epsilon() -> f64 {
    0.001
}

impl CostFunction {
    pub fn logarithm() -> Self {
        CostFunction::Logarithm { base: LogBase::Natural }
    }

    pub fn inverse() -> Self {
        CostFunction::Inverse { epsilon: default_epsilon() }
    }

    /// Whether values are exact integers (kept exact through CVaR sorting).
    pub fn is_integer_valued(&self) -> bool {
        !matches!(self, CostFunction::Inverse { .. })
    }

    /// Short stable name for tables and file output.
    pub fn name(&self) -> &'static str {
        match self {
            CostFunction::Hamiltonian => "hamiltonian",
            CostFunction::Logarithm { .. } => "logarithm",
            CostFunction::Inverse { .. } => "inverse",
        }
    }
}

/// ceil(log_base(x)) for integer x >= 1, boundary-exact for bases 2 and 10.
fn ceil_log(x: u128, base: LogBase) -> u32 {
    debug_assert!(x >= 1);
    if x == 1 {
        return 0;
    }
    match base {
        // e^k is never an integer for k >= 1, so no boundary cases arise.
        LogBase::Natural => (x as f64).ln().ceil() as u32,
        LogBase::Two => {
            let k = x.ilog2();
            if x == 1u128 << k { k } else { k + 1 }
        }
        LogBase::Ten => {
            let k = x.ilog10();
            if x == 10u128.pow(k) { k } else { k + 1 }
        }
    }
}

/// Cost of one basis label under the selected shape.
pub fn cost_value(instance: &FactoringInstance, basis_index: u64, kind: CostFunction) -> f64 {
    let (p, q) = instance.decode_index(basis_index);
    let distance = (instance.n() as i128 - (p as i128) * (q as i128)).unsigned_abs();
    match kind {
        CostFunction::Hamiltonian => (distance * distance) as f64,
        CostFunction::Logarithm { base } => f64::from(ceil_log(distance + 1, base)),
        CostFunction::Inverse { epsilon } => -1.0 / (distance as f64 + epsilon),
    }
}

/// Integer-exact cost for the integer-valued shapes (None for Inverse).
pub fn cost_value_int(instance: &FactoringInstance, basis_index: u64, kind: CostFunction) -> Option<i128> {
    let (p, q) = instance.decode_index(basis_index);
    let distance = (instance.n() as i128 - (p as i128) * (q as i128)).unsigned_abs();
    match kind {
        CostFunction::Hamiltonian => Some((distance * distance) as i128),
        CostFunction::Logarithm { base } => Some(i128::from(ceil_log(distance + 1, base))),
        CostFunction::Inverse { .. } => None,
    }
}
