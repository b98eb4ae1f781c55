//! Dense statevector simulation for few-qubit circuits.
//!
//! Wire 0 is the most significant bit of a basis index, so on two qubits
//! `|10⟩` (wire 0 set) is amplitude index 2. This matches ket notation read
//! left to right.

use std::f64::consts::TAU;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeededRng;

pub const MAX_QUBITS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// Prepares `|0…0⟩` on `n_qubits` wires.
    pub fn new(n_qubits: usize) -> Result<Self> {
        if !(1..=MAX_QUBITS).contains(&n_qubits) {
            return Err(Error::Config(format!(
                "qubit count {n_qubits} outside supported range 1..={MAX_QUBITS}"
            )));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    /// Builds a state from raw amplitudes. The caller is responsible for
    /// normalization.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() || len > 1 << MAX_QUBITS {
            return Err(Error::Config(format!(
                "amplitude count {len} is not 2^n for n in 1..={MAX_QUBITS}"
            )));
        }
        Ok(Self {
            n_qubits: len.trailing_zeros() as usize,
            amplitudes,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    fn wire_mask(&self, wire: usize) -> Result<usize> {
        if wire >= self.n_qubits {
            return Err(Error::Index(format!(
                "wire {wire} out of range for {} qubits",
                self.n_qubits
            )));
        }
        Ok(1 << (self.n_qubits - 1 - wire))
    }

    /// Applies a 2x2 unitary `[[a, b], [c, d]]` to `wire`.
    fn apply_single(&mut self, wire: usize, m: [[Complex64; 2]; 2]) -> Result<()> {
        let mask = self.wire_mask(wire)?;
        for i in 0..self.amplitudes.len() {
            if i & mask != 0 {
                continue;
            }
            let j = i | mask;
            let a0 = self.amplitudes[i];
            let a1 = self.amplitudes[j];
            self.amplitudes[i] = m[0][0] * a0 + m[0][1] * a1;
            self.amplitudes[j] = m[1][0] * a0 + m[1][1] * a1;
        }
        Ok(())
    }

    pub fn apply_rotation(&mut self, kind: Rotation, wire: usize, angle: f64) -> Result<()> {
        if !angle.is_finite() {
            return Err(Error::Validation(format!(
                "rotation angle {angle} is not finite"
            )));
        }
        self.apply_single(wire, kind.matrix(angle))
    }

    pub fn apply_cnot(&mut self, control: usize, target: usize) -> Result<()> {
        if control == target {
            return Err(Error::Index(format!(
                "CNOT control and target are both wire {control}"
            )));
        }
        let cmask = self.wire_mask(control)?;
        let tmask = self.wire_mask(target)?;
        for i in 0..self.amplitudes.len() {
            // Visit each swapped pair once, from its target-bit-clear member.
            if i & cmask != 0 && i & tmask == 0 {
                self.amplitudes.swap(i, i | tmask);
            }
        }
        Ok(())
    }

    pub fn apply_gate(&mut self, gate: &Gate) -> Result<()> {
        match *gate {
            Gate::Rotation { kind, wire, angle } => self.apply_rotation(kind, wire, angle),
            Gate::Cnot { control, target } => self.apply_cnot(control, target),
        }
    }

    pub fn run_circuit(&mut self, circuit: &CircuitSpec) -> Result<()> {
        if circuit.n_qubits != self.n_qubits {
            return Err(Error::Config(format!(
                "circuit acts on {} qubits but the register has {}",
                circuit.n_qubits, self.n_qubits
            )));
        }
        for gate in &circuit.gates {
            self.apply_gate(gate)?;
        }
        Ok(())
    }

    /// ⟨Z⟩ on `wire`, clamped to `[-1, 1]`.
    pub fn expectation_z(&self, wire: usize) -> Result<f64> {
        let mask = self.wire_mask(wire)?;
        let value: f64 = self
            .amplitudes
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let p = a.norm_sqr();
                if i & mask == 0 {
                    p
                } else {
                    -p
                }
            })
            .sum();
        Ok(value.clamp(-1.0, 1.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Rotation {
    RX,
    RY,
    RZ,
}

impl Rotation {
    pub const ALL: [Rotation; 3] = [Rotation::RX, Rotation::RY, Rotation::RZ];

    pub fn matrix(self, angle: f64) -> [[Complex64; 2]; 2] {
        let (s, c) = (angle / 2.0).sin_cos();
        let zero = Complex64::new(0.0, 0.0);
        match self {
            Rotation::RX => [
                [Complex64::new(c, 0.0), Complex64::new(0.0, -s)],
                [Complex64::new(0.0, -s), Complex64::new(c, 0.0)],
            ],
            Rotation::RY => [
                [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
                [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
            ],
            Rotation::RZ => [[Complex64::new(c, -s), zero], [zero, Complex64::new(c, s)]],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Rotation::RX => "RX",
            Rotation::RY => "RY",
            Rotation::RZ => "RZ",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    Rotation {
        kind: Rotation,
        wire: usize,
        angle: f64,
    },
    Cnot {
        control: usize,
        target: usize,
    },
}

impl Gate {
    pub fn wires(&self) -> Vec<usize> {
        match *self {
            Gate::Rotation { wire, .. } => vec![wire],
            Gate::Cnot { control, target } => vec![control, target],
        }
    }

    fn validate(&self, n_qubits: usize) -> Result<()> {
        match *self {
            Gate::Rotation { wire, angle, .. } => {
                if wire >= n_qubits {
                    return Err(Error::Index(format!(
                        "rotation wire {wire} out of range for {n_qubits} qubits"
                    )));
                }
                if !angle.is_finite() {
                    return Err(Error::Validation(format!(
                        "rotation angle {angle} is not finite"
                    )));
                }
            }
            Gate::Cnot { control, target } => {
                if control == target || control >= n_qubits || target >= n_qubits {
                    return Err(Error::Index(format!(
                        "invalid CNOT wires ({control}, {target}) for {n_qubits} qubits"
                    )));
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Gate::Rotation { kind, wire, angle } => {
                write!(f, "{}({angle:.6}) q{wire}", kind.name())
            }
            Gate::Cnot { control, target } => write!(f, "CNOT q{control} -> q{target}"),
        }
    }
}

/// A gate list together with the seed and depth that generated it.
///
/// Serializes as
/// `{"n_qubits":4,"seed":42,"n_layers":1,"gates":[{"kind":"RY","wires":[0],"angle":1.234},…]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CircuitRepr", into = "CircuitRepr")]
pub struct CircuitSpec {
    pub n_qubits: usize,
    pub seed: u64,
    pub n_layers: usize,
    pub gates: Vec<Gate>,
}

impl CircuitSpec {
    pub fn empty(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            seed: 0,
            n_layers: 0,
            gates: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_QUBITS).contains(&self.n_qubits) {
            return Err(Error::Config(format!(
                "qubit count {} outside supported range 1..={MAX_QUBITS}",
                self.n_qubits
            )));
        }
        self.gates
            .iter()
            .try_for_each(|g| g.validate(self.n_qubits))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Seeded random-layers ansatz.
///
/// Each layer draws, for every wire in order, a rotation kind uniformly from
/// {RX, RY, RZ} (`below(3)`) and then an angle uniformly from `[0, 2π)`, and
/// appends that rotation. The layer closes with a CNOT ring
/// `CNOT(w, (w + 1) mod n)` for every wire `w`.
pub fn build_random_layers(seed: u64, n_layers: usize, n_qubits: usize) -> Result<CircuitSpec> {
    if !(1..=MAX_QUBITS).contains(&n_qubits) {
        return Err(Error::Config(format!(
            "qubit count {n_qubits} outside supported range 1..={MAX_QUBITS}"
        )));
    }
    if n_layers > 0 && n_qubits < 2 {
        return Err(Error::Config(
            "entangling layers need at least two qubits".into(),
        ));
    }
    let mut rng = SeededRng::new(seed);
    let mut gates = Vec::with_capacity(n_layers * 2 * n_qubits);
    for _ in 0..n_layers {
        for wire in 0..n_qubits {
            let kind = Rotation::ALL[rng.below(3) as usize];
            let angle = rng.next_f64() * TAU;
            gates.push(Gate::Rotation { kind, wire, angle });
        }
        for wire in 0..n_qubits {
            gates.push(Gate::Cnot {
                control: wire,
                target: (wire + 1) % n_qubits,
            });
        }
    }
    Ok(CircuitSpec {
        n_qubits,
        seed,
        n_layers,
        gates,
    })
}

#[derive(Serialize, Deserialize)]
struct GateRepr {
    kind: String,
    wires: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    angle: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct CircuitRepr {
    n_qubits: usize,
    seed: u64,
    n_layers: usize,
    gates: Vec<GateRepr>,
}

impl From<CircuitSpec> for CircuitRepr {
    fn from(c: CircuitSpec) -> Self {
        let gates = c
            .gates
            .iter()
            .map(|g| match *g {
                Gate::Rotation { kind, wire, angle } => GateRepr {
                    kind: kind.name().to_string(),
                    wires: vec![wire],
                    angle: Some(angle),
                },
                Gate::Cnot { control, target } => GateRepr {
                    kind: "CNOT".to_string(),
                    wires: vec![control, target],
                    angle: None,
                },
            })
            .collect();
        CircuitRepr {
            n_qubits: c.n_qubits,
            seed: c.seed,
            n_layers: c.n_layers,
            gates,
        }
    }
}

impl TryFrom<CircuitRepr> for CircuitSpec {
    type Error = Error;

    fn try_from(r: CircuitRepr) -> Result<Self> {
        let gates = r
            .gates
            .into_iter()
            .map(|g| {
                let rotation = match g.kind.as_str() {
                    "RX" => Some(Rotation::RX),
                    "RY" => Some(Rotation::RY),
                    "RZ" => Some(Rotation::RZ),
                    "CNOT" => None,
                    other => return Err(Error::Validation(format!("unknown gate kind {other:?}"))),
                };
                match (rotation, g.wires.as_slice()) {
                    (Some(kind), &[wire]) => {
                        let angle = g.angle.ok_or_else(|| {
                            Error::Validation(format!("{} gate without angle", kind.name()))
                        })?;
                        Ok(Gate::Rotation { kind, wire, angle })
                    }
                    (None, &[control, target]) => Ok(Gate::Cnot { control, target }),
                    _ => Err(Error::Validation(format!(
                        "{} gate has {} wires",
                        g.kind,
                        g.wires.len()
                    ))),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let spec = CircuitSpec {
            n_qubits: r.n_qubits,
            seed: r.seed,
            n_layers: r.n_layers,
            gates,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Independent reference simulator: every gate becomes a full `2^n × 2^n`
/// matrix assembled from Kronecker products with identities, and the
/// matrices are applied in order to `|0…0⟩`. Slow on purpose; only for
/// cross-checking [`StateVector::run_circuit`].
pub mod oracle {
    use num_complex::Complex64;

    use super::{CircuitSpec, Gate, Rotation, StateVector};
    use crate::error::{Error, Result};

    pub const MAX_ORACLE_QUBITS: usize = 6;

    type Matrix = Vec<Vec<Complex64>>;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn identity(dim: usize) -> Matrix {
        (0..dim)
            .map(|i| {
                (0..dim)
                    .map(|j| if i == j { c(1.0) } else { c(0.0) })
                    .collect()
            })
            .collect()
    }

    fn pauli(kind: Rotation) -> Matrix {
        let i = Complex64::i();
        match kind {
            Rotation::RX => vec![vec![c(0.0), c(1.0)], vec![c(1.0), c(0.0)]],
            Rotation::RY => vec![vec![c(0.0), -i], vec![i, c(0.0)]],
            Rotation::RZ => vec![vec![c(1.0), c(0.0)], vec![c(0.0), c(-1.0)]],
        }
    }

    /// exp(-i angle/2 P) = cos(angle/2) I - i sin(angle/2) P.
    fn exp_pauli(kind: Rotation, angle: f64) -> Matrix {
        let (s, co) = (angle / 2.0).sin_cos();
        let p = pauli(kind);
        let id = identity(2);
        (0..2)
            .map(|r| {
                (0..2)
                    .map(|k| id[r][k] * co - Complex64::i() * s * p[r][k])
                    .collect()
            })
            .collect()
    }

    fn kron(a: &Matrix, b: &Matrix) -> Matrix {
        let (ra, rb) = (a.len(), b.len());
        let mut out = vec![vec![c(0.0); ra * rb]; ra * rb];
        for i in 0..ra {
            for j in 0..ra {
                for k in 0..rb {
                    for l in 0..rb {
                        out[i * rb + k][j * rb + l] = a[i][j] * b[k][l];
                    }
                }
            }
        }
        out
    }

    fn add(a: &Matrix, b: &Matrix) -> Matrix {
        a.iter()
            .zip(b)
            .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x + y).collect())
            .collect()
    }

    fn matvec(m: &Matrix, v: &[Complex64]) -> Vec<Complex64> {
        m.iter()
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Tensor product of per-wire factors, wire 0 leftmost.
    fn embed(n: usize, factors: &[(usize, Matrix)]) -> Matrix {
        let mut out: Matrix = vec![vec![c(1.0)]];
        for wire in 0..n {
            let factor = factors
                .iter()
                .find(|(w, _)| *w == wire)
                .map(|(_, m)| m.clone())
                .unwrap_or_else(|| identity(2));
            out = kron(&out, &factor);
        }
        out
    }

    pub fn gate_matrix(gate: &Gate, n: usize) -> Matrix {
        match *gate {
            Gate::Rotation { kind, wire, angle } => embed(n, &[(wire, exp_pauli(kind, angle))]),
            Gate::Cnot { control, target } => {
                let p0 = vec![vec![c(1.0), c(0.0)], vec![c(0.0), c(0.0)]];
                let p1 = vec![vec![c(0.0), c(0.0)], vec![c(0.0), c(1.0)]];
                let x = vec![vec![c(0.0), c(1.0)], vec![c(1.0), c(0.0)]];
                add(
                    &embed(n, &[(control, p0)]),
                    &embed(n, &[(control, p1), (target, x)]),
                )
            }
        }
    }

    pub fn oracle_statevector(circuit: &CircuitSpec, n_qubits: usize) -> Result<StateVector> {
        if n_qubits > MAX_ORACLE_QUBITS {
            return Err(Error::Config(format!(
                "oracle refuses {n_qubits} qubits (limit {MAX_ORACLE_QUBITS})"
            )));
        }
        if circuit.n_qubits != n_qubits {
            return Err(Error::Config(format!(
                "circuit acts on {} qubits, oracle asked for {n_qubits}",
                circuit.n_qubits
            )));
        }
        circuit.validate()?;
        let dim = 1usize << n_qubits;
        let mut v = vec![c(0.0); dim];
        v[0] = c(1.0);
        for gate in &circuit.gates {
            v = matvec(&gate_matrix(gate, n_qubits), &v);
        }
        StateVector::from_amplitudes(v)
    }
}
