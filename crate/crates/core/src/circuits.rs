//! Gate library, circuit construction and execution, and named
//! entangled-state preparation (Bell, GHZ-n, four-qubit cluster).
//!
//! Classical feed-forward is part of the circuit itself: a conditional step
//! names an earlier measurement record and the outcomes that trigger its
//! gate, which keeps analytic branch enumeration self-contained.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64, ONE, ZERO};
use crate::qstate::{
    collapse_branch, measure_analytic, MeasurementBasis, MixedState, PureState, ShotHistogram,
};
use crate::rng::SimRng;

const GATE_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct Gate {
    label: String,
    matrix: CMat,
    params: Vec<f64>,
}

impl Gate {
    pub fn new(label: impl Into<String>, matrix: CMat, params: Vec<f64>) -> Result<Self> {
        if !matrix.is_unitary(GATE_TOL) {
            return Err(Error::NonUnitary {
                max_dev: matrix.unitarity_defect(),
            });
        }
        Ok(Gate {
            label: label.into(),
            matrix,
            params,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn num_qubits(&self) -> usize {
        self.matrix.dim().trailing_zeros() as usize
    }

    pub fn adjoint(&self) -> Gate {
        Gate {
            label: format!("{}\u{2020}", self.label),
            matrix: self.matrix.adjoint(),
            params: self.params.clone(),
        }
    }
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn pauli_x() -> CMat {
    CMat::two(ZERO, ONE, ONE, ZERO)
}

pub fn pauli_y() -> CMat {
    CMat::two(ZERO, c(0.0, -1.0), c(0.0, 1.0), ZERO)
}

pub fn pauli_z() -> CMat {
    CMat::two(ONE, ZERO, ZERO, -ONE)
}

pub fn hadamard() -> CMat {
    let s = c(FRAC_1_SQRT_2, 0.0);
    CMat::two(s, s, s, -s)
}

pub fn phase(phi: f64) -> CMat {
    CMat::two(ONE, ZERO, ZERO, C64::from_polar(1.0, phi))
}

pub fn rx(theta: f64) -> CMat {
    let (s, co) = ((theta / 2.0).sin(), (theta / 2.0).cos());
    CMat::two(c(co, 0.0), c(0.0, -s), c(0.0, -s), c(co, 0.0))
}

pub fn ry(theta: f64) -> CMat {
    let (s, co) = ((theta / 2.0).sin(), (theta / 2.0).cos());
    CMat::two(c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0))
}

pub fn rz(theta: f64) -> CMat {
    CMat::two(
        C64::from_polar(1.0, -theta / 2.0),
        ZERO,
        ZERO,
        C64::from_polar(1.0, theta / 2.0),
    )
}

pub fn cnot() -> CMat {
    CMat::from_rows(&[
        vec![ONE, ZERO, ZERO, ZERO],
        vec![ZERO, ONE, ZERO, ZERO],
        vec![ZERO, ZERO, ZERO, ONE],
        vec![ZERO, ZERO, ONE, ZERO],
    ])
}

pub fn swap() -> CMat {
    CMat::from_rows(&[
        vec![ONE, ZERO, ZERO, ZERO],
        vec![ZERO, ZERO, ONE, ZERO],
        vec![ZERO, ONE, ZERO, ZERO],
        vec![ZERO, ZERO, ZERO, ONE],
    ])
}

pub fn cz() -> CMat {
    CMat::from_rows(&[
        vec![ONE, ZERO, ZERO, ZERO],
        vec![ZERO, ONE, ZERO, ZERO],
        vec![ZERO, ZERO, ONE, ZERO],
        vec![ZERO, ZERO, ZERO, -ONE],
    ])
}

/// diag(1, e^{i pi / 2^t}); the per-iteration veto phase gate. t = 0 is
/// Pauli-Z.
pub fn sigma_z_t(t: u32) -> CMat {
    CMat::two(
        ONE,
        ZERO,
        ZERO,
        C64::from_polar(1.0, PI / f64::powi(2.0, t as i32)),
    )
}

/// Build a named gate. `P` takes one angle, the rotations take one angle,
/// `SIGMAZT` takes the iteration index.
pub fn standard_gate(name: &str, params: &[f64]) -> Result<Gate> {
    let upper = name.to_ascii_uppercase();
    let arity_err = |need: usize| {
        Error::InvalidArgument(format!(
            "gate {upper} expects {need} parameter(s), got {}",
            params.len()
        ))
    };
    let (matrix, keep): (CMat, Vec<f64>) = match upper.as_str() {
        "X" => (pauli_x(), vec![]),
        "Y" => (pauli_y(), vec![]),
        "Z" => (pauli_z(), vec![]),
        "H" => (hadamard(), vec![]),
        "I" => (CMat::identity(2), vec![]),
        "P" => {
            if params.len() != 1 {
                return Err(arity_err(1));
            }
            (phase(params[0]), params.to_vec())
        }
        "RX" => {
            if params.len() != 1 {
                return Err(arity_err(1));
            }
            (rx(params[0]), params.to_vec())
        }
        "RY" => {
            if params.len() != 1 {
                return Err(arity_err(1));
            }
            (ry(params[0]), params.to_vec())
        }
        "RZ" => {
            if params.len() != 1 {
                return Err(arity_err(1));
            }
            (rz(params[0]), params.to_vec())
        }
        "CNOT" | "CX" => (cnot(), vec![]),
        "SWAP" => (swap(), vec![]),
        "CZ" => (cz(), vec![]),
        "SIGMAZT" => {
            if params.len() != 1 {
                return Err(arity_err(1));
            }
            if params[0] < 0.0 || params[0].fract() != 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "SIGMAZT iteration index must be a non-negative integer, got {}",
                    params[0]
                )));
            }
            (sigma_z_t(params[0] as u32), params.to_vec())
        }
        other => {
            return Err(Error::InvalidArgument(format!("unknown gate \"{other}\"")));
        }
    };
    if matrix.dim() == 2 && upper != "CNOT" {
        // fallthrough, matrices already sized
    }
    Gate::new(upper, matrix, keep)
}

// ---------------------------------------------------------------------------
// Named entangled states
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BellLabel {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellLabel {
    pub fn all() -> [BellLabel; 4] {
        [
            BellLabel::PhiPlus,
            BellLabel::PhiMinus,
            BellLabel::PsiPlus,
            BellLabel::PsiMinus,
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            BellLabel::PhiPlus => "phi+",
            BellLabel::PhiMinus => "phi-",
            BellLabel::PsiPlus => "psi+",
            BellLabel::PsiMinus => "psi-",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NamedState {
    Bell(BellLabel),
    Ghz(usize),
    Cluster4,
}

/// Exact amplitude vectors for the named resource states.
pub fn prepare_named(name: NamedState) -> Result<PureState> {
    let s = c(FRAC_1_SQRT_2, 0.0);
    match name {
        NamedState::Bell(label) => {
            let amps = match label {
                BellLabel::PhiPlus => vec![s, ZERO, ZERO, s],
                BellLabel::PhiMinus => vec![s, ZERO, ZERO, -s],
                BellLabel::PsiPlus => vec![ZERO, s, s, ZERO],
                BellLabel::PsiMinus => vec![ZERO, s, -s, ZERO],
            };
            PureState::new(2, amps)
        }
        NamedState::Ghz(n) => {
            if n < 3 {
                return Err(Error::InvalidArgument(format!(
                    "GHZ state needs at least 3 qubits, got {n}"
                )));
            }
            let mut amps = vec![ZERO; 1 << n];
            amps[0] = s;
            amps[(1 << n) - 1] = s;
            PureState::new(n, amps)
        }
        NamedState::Cluster4 => {
            let h = c(0.5, 0.0);
            let mut amps = vec![ZERO; 16];
            amps[0b0000] = h;
            amps[0b0011] = h;
            amps[0b1100] = h;
            amps[0b1111] = -h;
            PureState::new(4, amps)
        }
    }
}

/// Preparation circuit for GHZ-n acting on |0...0>: H on qubit 0 then a fan
/// of CNOTs from qubit 0.
pub fn ghz_circuit(n: usize) -> Result<Circuit> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "GHZ state needs at least 3 qubits, got {n}"
        )));
    }
    let mut ck = Circuit::new(n);
    ck.gate(standard_gate("H", &[])?, &[0])?;
    for t in 1..n {
        ck.gate(standard_gate("CNOT", &[])?, &[0, t])?;
    }
    Ok(ck)
}

/// Preparation circuit for the four-qubit cluster state of the veto tables:
/// two Bell pairs on (0,1) and (2,3) glued by CZ(0,2).
pub fn cluster4_circuit() -> Result<Circuit> {
    let mut ck = Circuit::new(4);
    ck.gate(standard_gate("H", &[])?, &[0])?;
    ck.gate(standard_gate("CNOT", &[])?, &[0, 1])?;
    ck.gate(standard_gate("H", &[])?, &[2])?;
    ck.gate(standard_gate("CNOT", &[])?, &[2, 3])?;
    ck.gate(standard_gate("CZ", &[])?, &[0, 2])?;
    Ok(ck)
}

pub fn bell_circuit(label: BellLabel) -> Result<Circuit> {
    let mut ck = Circuit::new(2);
    ck.gate(standard_gate("H", &[])?, &[0])?;
    ck.gate(standard_gate("CNOT", &[])?, &[0, 1])?;
    match label {
        BellLabel::PhiPlus => {}
        BellLabel::PhiMinus => ck.gate(standard_gate("Z", &[])?, &[1])?,
        BellLabel::PsiPlus => ck.gate(standard_gate("X", &[])?, &[1])?,
        BellLabel::PsiMinus => {
            ck.gate(standard_gate("Z", &[])?, &[1])?;
            ck.gate(standard_gate("X", &[])?, &[1])?;
        }
    }
    Ok(ck)
}

// ---------------------------------------------------------------------------
// Circuits
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub enum Step {
    Gate {
        gate: Gate,
        targets: Vec<usize>,
    },
    Measure {
        basis: MeasurementBasis,
        targets: Vec<usize>,
        record: String,
    },
    /// Apply `gate` when the named record's outcome is in `equals`.
    Conditional {
        record: String,
        equals: Vec<usize>,
        gate: Gate,
        targets: Vec<usize>,
    },
}

#[derive(Clone, Debug)]
pub struct Circuit {
    num_qubits: usize,
    steps: Vec<Step>,
}

#[derive(Clone, Debug)]
pub struct CircuitBranch {
    pub records: BTreeMap<String, usize>,
    pub record_bits: BTreeMap<String, String>,
    pub probability: f64,
    pub state: PureState,
}

impl Circuit {
    pub fn new(num_qubits: usize) -> Self {
        Circuit {
            num_qubits,
            steps: Vec::new(),
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    fn check_targets(&self, targets: &[usize], gate_qubits: usize) -> Result<()> {
        if targets.len() != gate_qubits {
            return Err(Error::InvalidArgument(format!(
                "{}-qubit gate applied to {} targets",
                gate_qubits,
                targets.len()
            )));
        }
        for (i, &t) in targets.iter().enumerate() {
            if t >= self.num_qubits {
                return Err(Error::QubitOutOfRange {
                    index: t,
                    num_qubits: self.num_qubits,
                });
            }
            if targets[i + 1..].contains(&t) {
                return Err(Error::DuplicateTarget(t));
            }
        }
        Ok(())
    }

    fn record_defined(&self, record: &str) -> bool {
        self.steps
            .iter()
            .any(|s| matches!(s, Step::Measure { record: r, .. } if r == record))
    }

    pub fn gate(&mut self, gate: Gate, targets: &[usize]) -> Result<()> {
        self.check_targets(targets, gate.num_qubits())?;
        self.steps.push(Step::Gate {
            gate,
            targets: targets.to_vec(),
        });
        Ok(())
    }

    pub fn measure(
        &mut self,
        basis: MeasurementBasis,
        targets: &[usize],
        record: impl Into<String>,
    ) -> Result<()> {
        let record = record.into();
        if basis.subspace_qubits() != targets.len() {
            return Err(Error::InvalidBasis(format!(
                "basis spans {} qubits, {} targets given",
                basis.subspace_qubits(),
                targets.len()
            )));
        }
        self.check_targets(targets, targets.len())?;
        if self.record_defined(&record) {
            return Err(Error::InvalidArgument(format!(
                "measurement record \"{record}\" already defined"
            )));
        }
        self.steps.push(Step::Measure {
            basis,
            targets: targets.to_vec(),
            record,
        });
        Ok(())
    }

    /// Classically controlled gate; the record must come from an earlier
    /// measurement step.
    pub fn when(
        &mut self,
        record: impl Into<String>,
        equals: &[usize],
        gate: Gate,
        targets: &[usize],
    ) -> Result<()> {
        let record = record.into();
        if !self.record_defined(&record) {
            return Err(Error::InvalidArgument(format!(
                "conditional references unknown record \"{record}\""
            )));
        }
        self.check_targets(targets, gate.num_qubits())?;
        self.steps.push(Step::Conditional {
            record,
            equals: equals.to_vec(),
            gate,
            targets: targets.to_vec(),
        });
        Ok(())
    }

    /// Reverse of a measurement-free circuit (gates adjointed, order
    /// reversed). Used to measure in a preparation basis.
    pub fn inverted(&self) -> Result<Circuit> {
        let mut steps = Vec::with_capacity(self.steps.len());
        for step in self.steps.iter().rev() {
            match step {
                Step::Gate { gate, targets } => steps.push(Step::Gate {
                    gate: gate.adjoint(),
                    targets: targets.clone(),
                }),
                _ => {
                    return Err(Error::InvalidArgument(
                        "cannot invert a circuit containing measurements".into(),
                    ))
                }
            }
        }
        Ok(Circuit {
            num_qubits: self.num_qubits,
            steps,
        })
    }

    /// Append every step of `other` (records must not clash).
    pub fn extend(&mut self, other: &Circuit) -> Result<()> {
        if other.num_qubits != self.num_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.num_qubits,
                got: other.num_qubits,
            });
        }
        for s in &other.steps {
            self.steps.push(s.clone());
        }
        Ok(())
    }

    /// Analytic run: enumerate every measurement branch with its exact
    /// probability, applying conditional corrections per branch.
    pub fn run(&self, input: &PureState) -> Result<Vec<CircuitBranch>> {
        if input.num_qubits() != self.num_qubits {
            return Err(Error::DimensionMismatch {
                expected: 1 << self.num_qubits,
                got: input.dim(),
            });
        }
        let mut branches = vec![CircuitBranch {
            records: BTreeMap::new(),
            record_bits: BTreeMap::new(),
            probability: 1.0,
            state: input.clone(),
        }];
        for step in &self.steps {
            match step {
                Step::Gate { gate, targets } => {
                    for br in branches.iter_mut() {
                        br.state = br.state.apply_matrix_unchecked(gate.matrix(), targets);
                    }
                }
                Step::Conditional {
                    record,
                    equals,
                    gate,
                    targets,
                } => {
                    for br in branches.iter_mut() {
                        let outcome = *br.records.get(record).ok_or_else(|| {
                            Error::InvalidArgument(format!("record \"{record}\" not yet measured"))
                        })?;
                        if equals.contains(&outcome) {
                            br.state = br.state.apply_matrix_unchecked(gate.matrix(), targets);
                        }
                    }
                }
                Step::Measure {
                    basis,
                    targets,
                    record,
                } => {
                    let mut next = Vec::new();
                    for br in &branches {
                        for m in measure_analytic(&br.state, basis, targets)? {
                            let p = br.probability * m.probability;
                            if p < 1e-300 {
                                continue;
                            }
                            let mut records = br.records.clone();
                            let mut record_bits = br.record_bits.clone();
                            records.insert(record.clone(), m.outcome);
                            record_bits.insert(record.clone(), m.bits.clone());
                            next.push(CircuitBranch {
                                records,
                                record_bits,
                                probability: p,
                                state: m.state,
                            });
                        }
                    }
                    branches = next;
                }
            }
        }
        Ok(branches)
    }

    /// Sampled run: draws one measurement path per shot; histogram keys are
    /// the concatenated record bit strings in measurement order. Also
    /// returns the final state of the first shot.
    pub fn run_sampled(
        &self,
        input: &PureState,
        shots: u64,
        rng: &mut SimRng,
    ) -> Result<(ShotHistogram, PureState)> {
        if shots == 0 {
            return Err(Error::InvalidArgument("shots must be positive".into()));
        }
        let mut hist = ShotHistogram::default();
        let mut first_state = None;
        for _ in 0..shots {
            let mut state = input.clone();
            let mut records: BTreeMap<String, usize> = BTreeMap::new();
            let mut key = String::new();
            for step in &self.steps {
                match step {
                    Step::Gate { gate, targets } => {
                        state = state.apply_matrix_unchecked(gate.matrix(), targets);
                    }
                    Step::Conditional {
                        record,
                        equals,
                        gate,
                        targets,
                    } => {
                        let outcome = *records.get(record).ok_or_else(|| {
                            Error::InvalidArgument(format!("record \"{record}\" not yet measured"))
                        })?;
                        if equals.contains(&outcome) {
                            state = state.apply_matrix_unchecked(gate.matrix(), targets);
                        }
                    }
                    Step::Measure {
                        basis,
                        targets,
                        record,
                    } => {
                        let ms = measure_analytic(&state, basis, targets)?;
                        let weights: Vec<f64> = ms.iter().map(|m| m.probability).collect();
                        let pick = rng.sample_index(&weights);
                        records.insert(record.clone(), ms[pick].outcome);
                        key.push_str(&ms[pick].bits);
                        state = ms[pick].state.clone();
                    }
                }
            }
            hist.record(key);
            if first_state.is_none() {
                first_state = Some(state);
            }
        }
        Ok((hist, first_state.unwrap()))
    }

    /// Density-matrix run: measurements followed by their conditional
    /// corrections are folded into a branch sum, i.e. the circuit acts as a
    /// CPTP map on the input.
    pub fn run_mixed(&self, input: &MixedState) -> Result<MixedState> {
        if input.num_qubits() != self.num_qubits {
            return Err(Error::DimensionMismatch {
                expected: 1 << self.num_qubits,
                got: input.dim(),
            });
        }
        struct MixedBranch {
            records: BTreeMap<String, usize>,
            weight: f64,
            state: MixedState,
        }
        let mut branches = vec![MixedBranch {
            records: BTreeMap::new(),
            weight: 1.0,
            state: input.clone(),
        }];
        for step in &self.steps {
            match step {
                Step::Gate { gate, targets } => {
                    for br in branches.iter_mut() {
                        br.state = br.state.conjugate_unchecked(gate.matrix(), targets);
                    }
                }
                Step::Conditional {
                    record,
                    equals,
                    gate,
                    targets,
                } => {
                    for br in branches.iter_mut() {
                        let outcome = *br.records.get(record).ok_or_else(|| {
                            Error::InvalidArgument(format!("record \"{record}\" not yet measured"))
                        })?;
                        if equals.contains(&outcome) {
                            br.state = br.state.conjugate_unchecked(gate.matrix(), targets);
                        }
                    }
                }
                Step::Measure {
                    basis,
                    targets,
                    record,
                } => {
                    let dim_sub = basis.num_outcomes();
                    let mut next = Vec::new();
                    for br in &branches {
                        for outcome in 0..dim_sub {
                            let v = basis.vector(outcome);
                            let mut proj = CMat::zeros(dim_sub);
                            for a in 0..dim_sub {
                                for b in 0..dim_sub {
                                    proj.set(a, b, v[a] * v[b].conj());
                                }
                            }
                            let projected = br.state.conjugate_unchecked(&proj, targets);
                            let weight = projected.trace() * br.weight;
                            if weight < 1e-300 {
                                continue;
                            }
                            let mut state = projected;
                            state.renormalize_trace();
                            let mut records = br.records.clone();
                            records.insert(record.clone(), outcome);
                            next.push(MixedBranch {
                                records,
                                weight,
                                state,
                            });
                        }
                    }
                    branches = next;
                }
            }
        }
        let mut out =
            MixedState::from_parts_unchecked(self.num_qubits, CMat::zeros(1 << self.num_qubits));
        for br in &branches {
            out.add_weighted(&br.state, br.weight);
        }
        Ok(out)
    }

    /// Force a specific outcome for every measurement record (branch keyed
    /// by record name). Zero-probability branches are rejected.
    pub fn run_forced(
        &self,
        input: &PureState,
        forced: &BTreeMap<String, usize>,
    ) -> Result<(f64, PureState)> {
        let mut state = input.clone();
        let mut prob = 1.0;
        let mut records: BTreeMap<String, usize> = BTreeMap::new();
        for step in &self.steps {
            match step {
                Step::Gate { gate, targets } => {
                    state = state.apply_matrix_unchecked(gate.matrix(), targets);
                }
                Step::Conditional {
                    record,
                    equals,
                    gate,
                    targets,
                } => {
                    let outcome = *records.get(record).ok_or_else(|| {
                        Error::InvalidArgument(format!("record \"{record}\" not yet measured"))
                    })?;
                    if equals.contains(&outcome) {
                        state = state.apply_matrix_unchecked(gate.matrix(), targets);
                    }
                }
                Step::Measure {
                    basis,
                    targets,
                    record,
                } => {
                    let outcome = *forced.get(record).ok_or_else(|| {
                        Error::InvalidArgument(format!("no forced outcome for \"{record}\""))
                    })?;
                    let (p, collapsed) = collapse_branch(&state, basis, targets, outcome)?;
                    prob *= p;
                    records.insert(record.clone(), outcome);
                    state = collapsed;
                }
            }
        }
        Ok((prob, state))
    }
}

// ---------------------------------------------------------------------------
// Plain-text circuit description
// ---------------------------------------------------------------------------

/// Parse the plain-text circuit format:
///
/// ```text
/// qubits 3
/// h 0
/// cnot 0 1
/// measure 0 1 -> m basis=bell
/// when m == 1,3 x 2
/// ```
///
/// Gate parameters go in parentheses: `p(1.5708) 2`. Lines starting with
/// `#` are comments.
pub fn parse_circuit(text: &str) -> Result<Circuit> {
    let mut circuit: Option<Circuit> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let n = lineno + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |msg: String| Error::Parse { line: n, msg };
        let words: Vec<&str> = line.split_whitespace().collect();
        if words[0].eq_ignore_ascii_case("qubits") {
            if circuit.is_some() {
                return Err(parse_err("duplicate qubits declaration".into()));
            }
            let count: usize = words
                .get(1)
                .and_then(|w| w.parse().ok())
                .ok_or_else(|| parse_err("qubits needs an integer".into()))?;
            circuit = Some(Circuit::new(count));
            continue;
        }
        let ck = circuit
            .as_mut()
            .ok_or_else(|| parse_err("qubits declaration must come first".into()))?;
        if words[0].eq_ignore_ascii_case("measure") {
            // measure <targets...> -> <record> [basis=...]
            let arrow = words
                .iter()
                .position(|w| *w == "->")
                .ok_or_else(|| parse_err("measure needs \"-> record\"".into()))?;
            let targets: Vec<usize> = words[1..arrow]
                .iter()
                .map(|w| w.parse())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| parse_err("bad target index".into()))?;
            let record = words
                .get(arrow + 1)
                .ok_or_else(|| parse_err("missing record name".into()))?
                .to_string();
            let mut basis_name = "computational".to_string();
            for w in &words[arrow + 2..] {
                if let Some(b) = w.strip_prefix("basis=") {
                    basis_name = b.to_ascii_lowercase();
                }
            }
            let basis = match basis_name.as_str() {
                "computational" => MeasurementBasis::computational(targets.len()),
                "diagonal" => MeasurementBasis::diagonal(targets.len()),
                "bell" => {
                    if targets.len() != 2 {
                        return Err(parse_err("bell basis needs exactly 2 targets".into()));
                    }
                    MeasurementBasis::bell()
                }
                other => return Err(parse_err(format!("unknown basis \"{other}\""))),
            };
            ck.measure(basis, &targets, record)
                .map_err(|e| parse_err(e.to_string()))?;
            continue;
        }
        if words[0].eq_ignore_ascii_case("when") {
            // when <record> == <v[,v...]> <gate>[(p)] <targets...>
            if words.len() < 5 || words[2] != "==" {
                return Err(parse_err(
                    "expected: when <record> == <values> <gate> <targets>".into(),
                ));
            }
            let record = words[1].to_string();
            let equals: Vec<usize> = words[3]
                .split(',')
                .map(|w| w.parse())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| parse_err("bad outcome value".into()))?;
            let (gate, consumed) =
                parse_gate_word(words[4]).map_err(|e| parse_err(e.to_string()))?;
            let _ = consumed;
            let targets: Vec<usize> = words[5..]
                .iter()
                .map(|w| w.parse())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| parse_err("bad target index".into()))?;
            ck.when(record, &equals, gate, &targets)
                .map_err(|e| parse_err(e.to_string()))?;
            continue;
        }
        // plain gate line
        let (gate, _) = parse_gate_word(words[0]).map_err(|e| parse_err(e.to_string()))?;
        let targets: Vec<usize> = words[1..]
            .iter()
            .map(|w| w.parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| parse_err("bad target index".into()))?;
        ck.gate(gate, &targets)
            .map_err(|e| parse_err(e.to_string()))?;
    }
    circuit.ok_or(Error::Parse {
        line: 0,
        msg: "empty circuit description".into(),
    })
}

fn parse_gate_word(word: &str) -> Result<(Gate, usize)> {
    if let Some(open) = word.find('(') {
        let close = word
            .rfind(')')
            .ok_or_else(|| Error::InvalidArgument(format!("unclosed parameter list in {word}")))?;
        let name = &word[..open];
        let params: Vec<f64> = word[open + 1..close]
            .split(',')
            .filter(|s| !s.is_empty())
            .map(|s| s.trim().parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::InvalidArgument(format!("bad parameter in {word}")))?;
        Ok((standard_gate(name, &params)?, 1))
    } else {
        Ok((standard_gate(word, &[])?, 1))
    }
}
