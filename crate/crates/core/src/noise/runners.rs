//! Protocol runners for the noise sweeps: each runner owns its circuit and
//! applies the channel to the qubits that travel between parties, matching
//! how the protocols send communicated resources through the channel while
//! local ancillas stay clean.

use super::{apply_channel, apply_channel_all, KrausChannel, NoiseRunner};
use crate::circuits::{cnot, prepare_named, BellLabel, Circuit, Gate, NamedState};
use crate::error::Result;
use crate::qav::{EncodingTable, QavResource, VoteVector};
use crate::qstate::{partial_trace, MeasurementBasis, MixedState, PureState};
use crate::teleport::{GhzLikePayload, KnownQubit};

/// m = 1 multi-output teleportation: two payload cores teleported over two
/// Bell pairs; the channel hits the two travel halves once in transit.
pub struct MqtRunner {
    payload_a: GhzLikePayload,
    payload_b: GhzLikePayload,
}

impl MqtRunner {
    pub fn new(payload_a: GhzLikePayload, payload_b: GhzLikePayload) -> Self {
        MqtRunner {
            payload_a,
            payload_b,
        }
    }

    pub fn plus_plus() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let c = crate::linalg::C64::new(s, 0.0);
        MqtRunner {
            payload_a: GhzLikePayload::new(1, c, c).expect("normalized"),
            payload_b: GhzLikePayload::new(2, c, c).expect("normalized"),
        }
    }
}

impl NoiseRunner for MqtRunner {
    fn protocol_name(&self) -> String {
        "mqt".into()
    }

    fn run(&self, channel: Option<&KrausChannel>) -> Result<MixedState> {
        // layout: a core 0 | b qubits 1,2 | pair1 3,4 | pair2 5,6
        let phi_plus = prepare_named(NamedState::Bell(BellLabel::PhiPlus))?;
        let input = self
            .payload_a
            .state()
            .tensor(&self.payload_b.state())?
            .tensor(&phi_plus)?
            .tensor(&phi_plus)?
            .to_density();
        // dissolve payload b
        let mut rho = input.conjugate_unchecked(&cnot(), &[1, 2]);
        if let Some(ch) = channel {
            rho = apply_channel(&rho, ch, 4)?;
            rho = apply_channel(&rho, ch, 6)?;
        }
        let mut ck = Circuit::new(7);
        ck.measure(MeasurementBasis::bell(), &[0, 3], "bma")?;
        ck.when(
            "bma",
            &[1, 3],
            Gate::new("X", crate::circuits::pauli_x(), vec![])?,
            &[4],
        )?;
        ck.when(
            "bma",
            &[2, 3],
            Gate::new("Z", crate::circuits::pauli_z(), vec![])?,
            &[4],
        )?;
        ck.measure(MeasurementBasis::bell(), &[1, 5], "bmb")?;
        ck.when(
            "bmb",
            &[1, 3],
            Gate::new("X", crate::circuits::pauli_x(), vec![])?,
            &[6],
        )?;
        ck.when(
            "bmb",
            &[2, 3],
            Gate::new("Z", crate::circuits::pauli_z(), vec![])?,
            &[6],
        )?;
        let rho = ck.run_mixed(&rho)?;
        partial_trace(&rho, &[4, 6])
    }
}

/// Plain broadcast to two receivers over two Bell pairs; the channel hits
/// each travel half once.
pub struct BroadcastRunner {
    payload: KnownQubit,
}

impl BroadcastRunner {
    pub fn new(payload: KnownQubit) -> Self {
        BroadcastRunner { payload }
    }

    pub fn plus_payload() -> Self {
        BroadcastRunner {
            payload: KnownQubit::new(std::f64::consts::FRAC_PI_2, 0.0).expect("valid angles"),
        }
    }
}

impl NoiseRunner for BroadcastRunner {
    fn protocol_name(&self) -> String {
        "broadcast".into()
    }

    fn run(&self, channel: Option<&KrausChannel>) -> Result<MixedState> {
        // pairs (0,1) and (2,3); Alice holds 0 and 2, travel qubits 1 and 3
        let phi_plus = prepare_named(NamedState::Bell(BellLabel::PhiPlus))?;
        let mut rho = phi_plus.tensor(&phi_plus)?.to_density();
        if let Some(ch) = channel {
            rho = apply_channel(&rho, ch, 1)?;
            rho = apply_channel(&rho, ch, 3)?;
        }
        let q1 = self.payload.state();
        let q2 = self.payload.partner_state();
        let conj: Vec<Vec<crate::linalg::C64>> = vec![
            q1.amps().iter().map(|a| a.conj()).collect(),
            q2.amps().iter().map(|a| a.conj()).collect(),
        ];
        let basis = MeasurementBasis::custom(conj)?;
        let fix = Gate::new("URSPINV", self.payload.u_rsp().adjoint(), vec![])?;
        let mut ck = Circuit::new(4);
        ck.measure(basis.clone(), &[0], "a0")?;
        ck.when("a0", &[1], fix.clone(), &[1])?;
        ck.measure(basis, &[2], "a1")?;
        ck.when("a1", &[1], fix, &[3])?;
        let rho = ck.run_mixed(&rho)?;
        partial_trace(&rho, &[1, 3])
    }
}

/// Protocol A with a fixed vote pattern: the travel qubit takes n + 1 hops
/// (authority to first voter, voter to voter, last voter back).
pub struct QavARunner {
    votes: VoteVector,
    t: u32,
}

impl QavARunner {
    pub fn new(votes: VoteVector, t: u32) -> Self {
        QavARunner { votes, t }
    }

    pub fn single_veto() -> Self {
        QavARunner {
            votes: VoteVector::parse("1000").expect("valid pattern"),
            t: 0,
        }
    }
}

impl NoiseRunner for QavARunner {
    fn protocol_name(&self) -> String {
        "qav_a".into()
    }

    fn run(&self, channel: Option<&KrausChannel>) -> Result<MixedState> {
        let mut rho = prepare_named(NamedState::Bell(BellLabel::PhiPlus))?.to_density();
        let round = crate::qav::VetoRound { t: self.t };
        for &veto in self.votes.vetoes() {
            if let Some(ch) = channel {
                rho = apply_channel(&rho, ch, 1)?;
            }
            if veto {
                rho = rho.conjugate_unchecked(&round.unitary(), &[1]);
            }
        }
        if let Some(ch) = channel {
            rho = apply_channel(&rho, ch, 1)?;
        }
        Ok(rho)
    }
}

/// Protocol B with a fixed vote pattern; both travel qubits take n + 1 hops.
pub struct QavBRunner {
    votes: VoteVector,
    resource: QavResource,
}

impl QavBRunner {
    pub fn new(votes: VoteVector, resource: QavResource) -> Self {
        QavBRunner { votes, resource }
    }
}

impl NoiseRunner for QavBRunner {
    fn protocol_name(&self) -> String {
        format!("qav_b_{}", self.resource.name())
    }

    fn run(&self, channel: Option<&KrausChannel>) -> Result<MixedState> {
        let table = EncodingTable::for_resource(self.resource);
        let state = match self.resource {
            QavResource::Cluster4 => prepare_named(NamedState::Cluster4)?,
            QavResource::Ghz3 => prepare_named(NamedState::Ghz(3))?,
        };
        let mut rho = state.to_density();
        for (voter, &veto) in self.votes.vetoes().iter().enumerate() {
            if let Some(ch) = channel {
                rho = apply_channel_all(&rho, ch, &[1, 2])?;
            }
            if veto {
                rho = rho.conjugate_unchecked(table.op(voter), &[1, 2]);
            }
        }
        if let Some(ch) = channel {
            rho = apply_channel_all(&rho, ch, &[1, 2])?;
        }
        Ok(rho)
    }
}

#[derive(Clone, Copy, Debug)]
pub enum PreparedState {
    BellPairPair,
    Cluster4,
    Ghz3,
}

/// Bare state preparation under noise on every qubit; used for the Bell
/// pair versus cluster comparison.
pub struct StatePrepRunner {
    which: PreparedState,
}

impl StatePrepRunner {
    pub fn new(which: PreparedState) -> Self {
        StatePrepRunner { which }
    }
}

impl NoiseRunner for StatePrepRunner {
    fn protocol_name(&self) -> String {
        match self.which {
            PreparedState::BellPairPair => "bell_pair_pair".into(),
            PreparedState::Cluster4 => "cluster4".into(),
            PreparedState::Ghz3 => "ghz3".into(),
        }
    }

    fn run(&self, channel: Option<&KrausChannel>) -> Result<MixedState> {
        let state: PureState = match self.which {
            PreparedState::BellPairPair => {
                let b = prepare_named(NamedState::Bell(BellLabel::PhiPlus))?;
                b.tensor(&b)?
            }
            PreparedState::Cluster4 => prepare_named(NamedState::Cluster4)?,
            PreparedState::Ghz3 => prepare_named(NamedState::Ghz(3))?,
        };
        let mut rho = state.to_density();
        if let Some(ch) = channel {
            let all: Vec<usize> = (0..rho.num_qubits()).collect();
            rho = apply_channel_all(&rho, ch, &all)?;
        }
        Ok(rho)
    }
}
