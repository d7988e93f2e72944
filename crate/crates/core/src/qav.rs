//! The two anonymous-veto protocols: the iterative Bell-state protocol
//! (Protocol A) and the single-shot cluster/GHZ protocol (Protocol B).
//!
//! Measurement in the preparation basis is realized by appending the
//! inverse preparation circuit and reading out computationally, so the
//! emitted bit strings match the expected simulator outcome tables
//! verbatim (big-endian, home qubit leftmost).

use crate::circuits::{
    bell_circuit, cluster4_circuit, ghz_circuit, pauli_x, pauli_y, pauli_z, sigma_z_t, BellLabel,
    Circuit,
};
use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};
use crate::qstate::{MeasurementBasis, PureState};

const CERTAIN: f64 = 1.0 - 1e-10;

/// One veto flag per voter.
#[derive(Clone, Debug)]
pub struct VoteVector {
    vetoes: Vec<bool>,
}

impl VoteVector {
    pub fn new(vetoes: Vec<bool>) -> Result<Self> {
        if vetoes.is_empty() {
            return Err(Error::InvalidArgument("at least one voter required".into()));
        }
        Ok(VoteVector { vetoes })
    }

    /// Parse a big-endian pattern string such as "1000" (voter 1 vetoes).
    pub fn parse(pattern: &str) -> Result<Self> {
        let vetoes: Result<Vec<bool>> = pattern
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::InvalidArgument(format!(
                    "vote pattern may only contain 0/1, got '{other}'"
                ))),
            })
            .collect();
        VoteVector::new(vetoes?)
    }

    pub fn n(&self) -> usize {
        self.vetoes.len()
    }

    pub fn vetoes(&self) -> &[bool] {
        &self.vetoes
    }

    pub fn veto_count(&self) -> usize {
        self.vetoes.iter().filter(|v| **v).count()
    }

    pub fn pattern(&self) -> String {
        self.vetoes
            .iter()
            .map(|v| if *v { '1' } else { '0' })
            .collect()
    }
}

/// One iteration of Protocol A; the phase gate is sigma_z(t).
#[derive(Clone, Copy, Debug)]
pub struct VetoRound {
    pub t: u32,
}

impl VetoRound {
    pub fn unitary(&self) -> CMat {
        sigma_z_t(self.t)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QavResource {
    Cluster4,
    Ghz3,
}

impl QavResource {
    pub fn name(&self) -> &'static str {
        match self {
            QavResource::Cluster4 => "cluster4",
            QavResource::Ghz3 => "ghz3",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cluster4" | "cluster" => Ok(QavResource::Cluster4),
            "ghz3" | "ghz" => Ok(QavResource::Ghz3),
            other => Err(Error::InvalidArgument(format!(
                "unknown veto resource \"{other}\""
            ))),
        }
    }
}

/// Per-voter two-qubit encoding operators for Protocol B with four voters.
#[derive(Clone, Debug)]
pub struct EncodingTable {
    resource: QavResource,
    ops: Vec<CMat>,
}

fn i_y() -> CMat {
    pauli_y().scale(C64::new(0.0, 1.0))
}

impl EncodingTable {
    /// Cluster-state table: U1 = X(x)iY, U2 = X(x)Z, U3 = iY(x)Z,
    /// U4 = iY(x)iY.
    pub fn cluster4() -> Self {
        let x = pauli_x();
        let z = pauli_z();
        let iy = i_y();
        EncodingTable {
            resource: QavResource::Cluster4,
            ops: vec![x.kron(&iy), x.kron(&z), iy.kron(&z), iy.kron(&iy)],
        }
    }

    /// GHZ-state table: U1 = X(x)I, U2 = X(x)X, U3 = iY(x)X, U4 = iY(x)I.
    pub fn ghz3() -> Self {
        let x = pauli_x();
        let i2 = CMat::identity(2);
        let iy = i_y();
        EncodingTable {
            resource: QavResource::Ghz3,
            ops: vec![x.kron(&i2), x.kron(&x), iy.kron(&x), iy.kron(&i2)],
        }
    }

    pub fn for_resource(resource: QavResource) -> Self {
        match resource {
            QavResource::Cluster4 => EncodingTable::cluster4(),
            QavResource::Ghz3 => EncodingTable::ghz3(),
        }
    }

    pub fn resource(&self) -> QavResource {
        self.resource
    }

    pub fn op(&self, voter: usize) -> &CMat {
        &self.ops[voter]
    }

    pub fn num_voters(&self) -> usize {
        self.ops.len()
    }

    /// Entries must match the published table exactly.
    pub fn check(&self) -> Result<()> {
        let reference = EncodingTable::for_resource(self.resource);
        for (i, (a, b)) in self.ops.iter().zip(&reference.ops).enumerate() {
            if a.sub(b).max_abs() > 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "encoding operator U{} deviates from the table",
                    i + 1
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct RoundResult {
    pub t: u32,
    /// Bell label of the deterministic final state.
    pub final_state: BellLabel,
    pub conclusive: bool,
    /// Reverse-EPR readout string ("00" for phi+, "10" for phi-).
    pub outcome_bits: String,
    pub probability: f64,
}

/// One iteration of Protocol A: prepare phi+, each vetoing voter applies
/// sigma_z(t) to the travel qubit, measure in the Bell basis. Conclusive
/// exactly when the outcome is phi-.
pub fn protocol_a_round(votes: &VoteVector, t: u32) -> Result<RoundResult> {
    let mut ck = bell_circuit(BellLabel::PhiPlus)?;
    let round = VetoRound { t };
    for &veto in votes.vetoes() {
        if veto {
            ck.gate(
                crate::circuits::Gate::new("SIGMAZT", round.unitary(), vec![t as f64])?,
                &[1],
            )?;
        }
    }
    ck.measure(MeasurementBasis::bell(), &[0, 1], "bm")?;
    let branches = ck.run(&PureState::zero(2)?)?;
    let top = branches
        .iter()
        .max_by(|a, b| a.probability.partial_cmp(&b.probability).unwrap())
        .expect("bell measurement has branches");
    let outcome = top.records["bm"];
    let label = match outcome {
        0 => BellLabel::PhiPlus,
        1 => BellLabel::PsiPlus,
        2 => BellLabel::PhiMinus,
        _ => BellLabel::PsiMinus,
    };
    Ok(RoundResult {
        t,
        final_state: label,
        conclusive: label == BellLabel::PhiMinus && top.probability > CERTAIN,
        outcome_bits: top.record_bits["bm"].clone(),
        probability: top.probability,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Veto,
    NoVeto,
}

#[derive(Clone, Debug)]
pub struct ProtocolARun {
    pub rounds: Vec<RoundResult>,
    pub verdict: Verdict,
}

/// Iterate Protocol A until a conclusive round or the 1 + ceil(log2 n)
/// iteration bound. Verdict is veto exactly when any voter vetoed.
pub fn protocol_a_run(votes: &VoteVector) -> Result<ProtocolARun> {
    let n = votes.n();
    let max_rounds = 1 + (n as f64).log2().ceil() as u32;
    let mut rounds = Vec::new();
    for t in 0..max_rounds {
        let round = protocol_a_round(votes, t)?;
        let conclusive = round.conclusive;
        rounds.push(round);
        if conclusive {
            return Ok(ProtocolARun {
                rounds,
                verdict: Verdict::Veto,
            });
        }
    }
    Ok(ProtocolARun {
        rounds,
        verdict: Verdict::NoVeto,
    })
}

#[derive(Clone, Debug)]
pub struct ProtocolBResult {
    pub resource: QavResource,
    pub final_state: PureState,
    pub outcome_bits: String,
    pub conclusive: bool,
    pub probability: f64,
}

fn preparation_circuit(resource: QavResource) -> Result<Circuit> {
    match resource {
        QavResource::Cluster4 => cluster4_circuit(),
        QavResource::Ghz3 => ghz_circuit(3),
    }
}

/// Single-shot Protocol B for four voters: vetoing voters apply their
/// table operator to the two travel qubits (1 and 2); the tally appends
/// the reverse preparation circuit and reads out computationally. The
/// all-zeros outcome is inconclusive (no veto or all veto).
pub fn protocol_b_run(
    votes: &VoteVector,
    resource: QavResource,
    table: &EncodingTable,
) -> Result<ProtocolBResult> {
    if votes.n() != 4 {
        return Err(Error::InvalidArgument(format!(
            "protocol B tables cover exactly 4 voters, got {}",
            votes.n()
        )));
    }
    if table.resource() != resource {
        return Err(Error::InvalidArgument(format!(
            "encoding table targets {} but resource is {}",
            table.resource().name(),
            resource.name()
        )));
    }
    table.check()?;
    let prep = preparation_circuit(resource)?;
    let n = prep.num_qubits();
    let mut ck = prep.clone();
    let travel = [1usize, 2];
    for (voter, &veto) in votes.vetoes().iter().enumerate() {
        if veto {
            ck.gate(
                crate::circuits::Gate::new(
                    format!("U{}", voter + 1),
                    table.op(voter).clone(),
                    vec![],
                )?,
                &travel,
            )?;
        }
    }
    // final state before the tally stage
    let final_state = ck.run(&PureState::zero(n)?)?[0].state.clone();
    let mut tally = ck;
    tally.extend(&prep.inverted()?)?;
    tally.measure(
        MeasurementBasis::computational(n),
        &(0..n).collect::<Vec<_>>(),
        "out",
    )?;
    let branches = tally.run(&PureState::zero(n)?)?;
    let top = branches
        .iter()
        .max_by(|a, b| a.probability.partial_cmp(&b.probability).unwrap())
        .expect("computational readout has branches");
    let outcome_bits = top.record_bits["out"].clone();
    let conclusive = outcome_bits.contains('1');
    Ok(ProtocolBResult {
        resource,
        final_state,
        outcome_bits,
        conclusive,
        probability: top.probability,
    })
}
