//! Teleportation of generalized Bell-type payloads with optimal Bell
//! resources, remote state preparation, multi-output teleportation, and
//! broadcasting of known states as multiparty RSP.
//!
//! Every operation enumerates its measurement branches analytically;
//! sampling is layered on top of the analytic distribution.

use std::f64::consts::PI;

use crate::circuits::{cnot, pauli_x, pauli_z, phase, BellLabel, NamedState};
use crate::error::{Error, Result};
use crate::linalg::{CMat, C64, ZERO};
use crate::qstate::{
    fidelity, measure_analytic, reduced_density, MeasurementBasis, PureState, ShotHistogram,
};
use crate::rng::SimRng;

const FID_TOL: f64 = 1e-10;

/// Known single-qubit state cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>.
#[derive(Clone, Copy, Debug)]
pub struct KnownQubit {
    theta: f64,
    phi: f64,
}

impl KnownQubit {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !(0.0..=PI).contains(&theta) {
            return Err(Error::OutOfRange {
                name: "theta".into(),
                value: theta,
                min: 0.0,
                max: PI,
            });
        }
        if !(0.0..2.0 * PI).contains(&phi) {
            return Err(Error::OutOfRange {
                name: "phi".into(),
                value: phi,
                min: 0.0,
                max: 2.0 * PI,
            });
        }
        Ok(KnownQubit { theta, phi })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn state(&self) -> PureState {
        let a = C64::new((self.theta / 2.0).cos(), 0.0);
        let b = C64::from_polar((self.theta / 2.0).sin(), self.phi);
        PureState::from_raw_normalized(1, vec![a, b])
    }

    /// U_RSP = X Z P(-2 phi); maps |q1> to its orthogonal partner |q2>.
    pub fn u_rsp(&self) -> CMat {
        pauli_x().mul(&pauli_z()).mul(&phase(-2.0 * self.phi))
    }

    /// The measurement partner |q2> = U_RSP |q1>.
    pub fn partner_state(&self) -> PureState {
        let v = self.u_rsp().mul_vec(self.state().amps());
        PureState::from_raw_normalized(1, v)
    }
}

/// Payload of form alpha|0>^m + beta|1>^m; the class teleportable with a
/// single Bell pair.
#[derive(Clone, Copy, Debug)]
pub struct GhzLikePayload {
    m: usize,
    alpha: C64,
    beta: C64,
}

impl GhzLikePayload {
    pub fn new(m: usize, alpha: C64, beta: C64) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument(
                "payload needs at least one qubit".into(),
            ));
        }
        let norm = alpha.norm_sqr() + beta.norm_sqr();
        if (norm - 1.0).abs() > FID_TOL {
            return Err(Error::InvalidState(format!(
                "|alpha|^2 + |beta|^2 = {norm} differs from 1"
            )));
        }
        Ok(GhzLikePayload { m, alpha, beta })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn alpha(&self) -> C64 {
        self.alpha
    }

    pub fn beta(&self) -> C64 {
        self.beta
    }

    pub fn state(&self) -> PureState {
        let dim = 1usize << self.m;
        let mut amps = vec![ZERO; dim];
        amps[0] = self.alpha;
        amps[dim - 1] = self.beta;
        PureState::from_raw_normalized(self.m, amps)
    }

    /// The single-qubit core alpha|0> + beta|1>.
    pub fn core(&self) -> PureState {
        PureState::from_raw_normalized(1, vec![self.alpha, self.beta])
    }
}

/// Consumed entanglement and published classical bits of one protocol run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ResourceAudit {
    pub bell_pairs: usize,
    pub ghz_triples: usize,
    pub classical_bits: usize,
}

#[derive(Clone, Debug)]
pub struct TeleportBranch {
    pub bits: String,
    pub probability: f64,
    pub receiver: PureState,
    pub fidelity: f64,
}

#[derive(Clone, Debug)]
pub struct TeleportRun {
    pub branches: Vec<TeleportBranch>,
    pub audit: ResourceAudit,
}

/// Pauli on the first (Alice's) qubit mapping the labeled Bell state to
/// phi+ up to phase.
fn to_phi_plus_rotation(label: BellLabel) -> Option<CMat> {
    match label {
        BellLabel::PhiPlus => None,
        BellLabel::PhiMinus => Some(pauli_z()),
        BellLabel::PsiPlus => Some(pauli_x()),
        BellLabel::PsiMinus => Some(pauli_x().mul(&pauli_z())),
    }
}

/// Pauli on the first qubit mapping the labeled Bell state to the singlet
/// (|01> - |10>)/sqrt(2) up to phase.
fn to_singlet_rotation(label: BellLabel) -> Option<CMat> {
    match label {
        BellLabel::PsiMinus => None,
        BellLabel::PsiPlus => Some(pauli_z()),
        BellLabel::PhiMinus => Some(pauli_x()),
        BellLabel::PhiPlus => Some(pauli_x().mul(&pauli_z())),
    }
}

/// Standard teleportation of an arbitrary single-qubit state over a Bell
/// pair. Every Bell-measurement branch carries the receiver state after its
/// Pauli correction.
pub fn standard_teleport(payload: &PureState, resource: BellLabel) -> Result<TeleportRun> {
    if payload.num_qubits() != 1 {
        return Err(Error::InvalidArgument(format!(
            "standard teleportation takes a single-qubit payload, got {} qubits",
            payload.num_qubits()
        )));
    }
    let pair = crate::circuits::prepare_named(NamedState::Bell(resource))?;
    let mut joint = payload.tensor(&pair)?;
    if let Some(rot) = to_phi_plus_rotation(resource) {
        joint = joint.apply_unitary(&rot, &[1])?;
    }
    let target = payload.to_density();
    let mut branches = Vec::with_capacity(4);
    for m in measure_analytic(&joint, &MeasurementBasis::bell(), &[0, 1])? {
        let mut state = m.state;
        // 00 = phi+, 01 = psi+, 10 = phi-, 11 = psi-
        if m.outcome & 1 == 1 {
            state = state.apply_unitary(&pauli_x(), &[2])?;
        }
        if m.outcome & 2 == 2 {
            state = state.apply_unitary(&pauli_z(), &[2])?;
        }
        let receiver = extract_qubit(&state, 2)?;
        let f = fidelity(&target, &receiver.to_density())?;
        branches.push(TeleportBranch {
            bits: m.bits,
            probability: m.probability,
            receiver,
            fidelity: f,
        });
    }
    Ok(TeleportRun {
        branches,
        audit: ResourceAudit {
            bell_pairs: 1,
            ghz_triples: 0,
            classical_bits: 2,
        },
    })
}

/// Pull the pure single-qubit state of `qubit` out of a product-form branch
/// state. Fails if the qubit is still entangled with the rest.
fn extract_qubit(state: &PureState, qubit: usize) -> Result<PureState> {
    let n = state.num_qubits();
    let shift = n - 1 - qubit;
    let dim = state.dim();
    let mut v0 = Vec::with_capacity(dim / 2);
    let mut v1 = Vec::with_capacity(dim / 2);
    for i in 0..dim {
        if (i >> shift) & 1 == 0 {
            v0.push(state.amps()[i]);
        } else {
            v1.push(state.amps()[i]);
        }
    }
    let n0: f64 = v0.iter().map(|a| a.norm_sqr()).sum();
    let n1: f64 = v1.iter().map(|a| a.norm_sqr()).sum();
    // alpha w, beta w decomposition: use the heavier block as reference
    let (reference, _ref_norm) = if n0 >= n1 { (&v0, n0) } else { (&v1, n1) };
    let rn: f64 = reference.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    let alpha: C64 = reference
        .iter()
        .zip(&v0)
        .map(|(r, a)| r.conj() * a)
        .sum::<C64>()
        / rn;
    let beta: C64 = reference
        .iter()
        .zip(&v1)
        .map(|(r, a)| r.conj() * a)
        .sum::<C64>()
        / rn;
    // residual check: v_b must equal coeff_b * reference/rn
    let mut residual = 0.0f64;
    for (i, r) in reference.iter().enumerate() {
        residual = residual.max((v0[i] - alpha * r / rn).norm());
        residual = residual.max((v1[i] - beta * r / rn).norm());
    }
    if residual > 1e-8 {
        return Err(Error::InvalidState(format!(
            "qubit {qubit} is entangled with the rest (residual {residual:.3e})"
        )));
    }
    Ok(PureState::from_raw_normalized(1, vec![alpha, beta]))
}

/// Remote state preparation over the singlet channel written in the source
/// protocol; other Bell labels are mapped onto it by a Pauli pre-rotation
/// on Alice's qubit. Publishes one classical bit.
pub fn rsp(payload: &KnownQubit, resource: BellLabel) -> Result<TeleportRun> {
    let pair = crate::circuits::prepare_named(NamedState::Bell(resource))?;
    let mut joint = pair;
    if let Some(rot) = to_singlet_rotation(resource) {
        joint = joint.apply_unitary(&rot, &[0])?;
    }
    let q1 = payload.state();
    let q2 = payload.partner_state();
    let basis = MeasurementBasis::custom(vec![q1.amps().to_vec(), q2.amps().to_vec()])?;
    let target = q1.to_density();
    let u_rsp_inv = payload.u_rsp().adjoint();
    let mut branches = Vec::with_capacity(2);
    for m in measure_analytic(&joint, &basis, &[0])? {
        let mut state = m.state;
        if m.outcome == 0 {
            // Alice saw |q1>; Bob holds |q2> and undoes U_RSP
            state = state.apply_unitary(&u_rsp_inv, &[1])?;
        }
        let receiver = extract_qubit(&state, 1)?;
        let f = fidelity(&target, &receiver.to_density())?;
        branches.push(TeleportBranch {
            bits: m.bits,
            probability: m.probability,
            receiver,
            fidelity: f,
        });
    }
    Ok(TeleportRun {
        branches,
        audit: ResourceAudit {
            bell_pairs: 1,
            ghz_triples: 0,
            classical_bits: 1,
        },
    })
}

// ---------------------------------------------------------------------------
// Multi-output teleportation
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct DissolveResult {
    /// The single-qubit core carrying alpha and beta.
    pub core: PureState,
    /// The full register after the CNOT cascade: core (x) |0>^(m-1).
    pub dissolved: PureState,
}

/// CNOT cascade from the first qubit onto the rest; a GHZ-like payload
/// factorizes as (alpha|0> + beta|1>) (x) |0>^(m-1).
pub fn mqt_dissolve(payload: &GhzLikePayload) -> Result<DissolveResult> {
    let mut state = payload.state();
    let gate = cnot();
    for t in 1..payload.m() {
        state = state.apply_unitary(&gate, &[0, t])?;
    }
    // verify the factorized form
    let dim = state.dim();
    for (i, a) in state.amps().iter().enumerate() {
        let head = i >> (payload.m() - 1).min(63);
        if i != 0 && i != dim / 2 && a.norm() > 1e-12 {
            return Err(Error::InvalidState(format!(
                "dissolve left weight {:.3e} on index {i} (head {head})",
                a.norm()
            )));
        }
    }
    let core = PureState::from_raw_normalized(1, vec![state.amps()[0], state.amps()[dim / 2]]);
    Ok(DissolveResult {
        core,
        dissolved: state,
    })
}

#[derive(Clone, Debug)]
pub struct MqtBranch {
    pub bits_a: String,
    pub bits_b: String,
    pub probability: f64,
    pub receiver_a: PureState,
    pub receiver_b: PureState,
    pub fidelity_a: f64,
    pub fidelity_b: f64,
}

#[derive(Clone, Debug)]
pub struct MqtRun {
    pub branches: Vec<MqtBranch>,
    pub audit: ResourceAudit,
}

struct MqtLayout {
    total: usize,
    b_first: usize,
    p1a: usize,
    p1b: usize,
    p2a: usize,
    p2b: usize,
    r1_extra: Vec<usize>,
    r2_extra: Vec<usize>,
}

impl MqtLayout {
    fn new(m: usize) -> Self {
        let b_first = m;
        let p1a = 2 * m + 1;
        let p1b = p1a + 1;
        let p2a = p1b + 1;
        let p2b = p2a + 1;
        let r1_extra: Vec<usize> = (0..m - 1).map(|i| p2b + 1 + i).collect();
        let r2_extra: Vec<usize> = (0..m).map(|i| p2b + m + i).collect();
        let total = p2b + 1 + (m - 1) + m;
        MqtLayout {
            total,
            b_first,
            p1a,
            p1b,
            p2a,
            p2b,
            r1_extra,
            r2_extra,
        }
    }

    fn receiver_a_qubits(&self) -> Vec<usize> {
        let mut v = vec![self.p1b];
        v.extend(&self.r1_extra);
        v
    }

    fn receiver_b_qubits(&self) -> Vec<usize> {
        let mut v = vec![self.p2b];
        v.extend(&self.r2_extra);
        v
    }
}

/// Teleport an m-qubit and an (m+1)-qubit GHZ-like payload to two receivers
/// using exactly two Bell pairs: dissolve, teleport the cores, reconstruct.
/// All 16 joint Bell branches are enumerated.
pub fn mqt_run(payload_a: &GhzLikePayload, payload_b: &GhzLikePayload) -> Result<MqtRun> {
    if payload_b.m() != payload_a.m() + 1 {
        return Err(Error::InvalidArgument(format!(
            "second payload must have m+1 = {} qubits, got {}",
            payload_a.m() + 1,
            payload_b.m()
        )));
    }
    let m = payload_a.m();
    let lay = MqtLayout::new(m);
    let phi_plus = crate::circuits::prepare_named(NamedState::Bell(BellLabel::PhiPlus))?;
    let mut state = payload_a
        .state()
        .tensor(&payload_b.state())?
        .tensor(&phi_plus)?
        .tensor(&phi_plus)?
        .tensor(&PureState::zero(2 * m - 1)?)?;
    assert_eq!(state.num_qubits(), lay.total);
    let gate = cnot();
    // dissolve both payloads in place
    for t in 1..m {
        state = state.apply_unitary(&gate, &[0, t])?;
    }
    for t in 1..m + 1 {
        state = state.apply_unitary(&gate, &[lay.b_first, lay.b_first + t])?;
    }
    let target_a = payload_a.state().to_density();
    let target_b = payload_b.state().to_density();
    let bell = MeasurementBasis::bell();
    let mut branches = Vec::with_capacity(16);
    for ma in measure_analytic(&state, &bell, &[0, lay.p1a])? {
        for mb in measure_analytic(&ma.state, &bell, &[lay.b_first, lay.p2a])? {
            let mut st = mb.state.clone();
            for (outcome, rq) in [(ma.outcome, lay.p1b), (mb.outcome, lay.p2b)] {
                if outcome & 1 == 1 {
                    st = st.apply_unitary(&pauli_x(), &[rq])?;
                }
                if outcome & 2 == 2 {
                    st = st.apply_unitary(&pauli_z(), &[rq])?;
                }
            }
            // reconstruct at both receivers
            for &t in &lay.r1_extra {
                st = st.apply_unitary(&gate, &[lay.p1b, t])?;
            }
            for &t in &lay.r2_extra {
                st = st.apply_unitary(&gate, &[lay.p2b, t])?;
            }
            let ra = reduced_density(&st, &lay.receiver_a_qubits())?;
            let rb = reduced_density(&st, &lay.receiver_b_qubits())?;
            branches.push(MqtBranch {
                bits_a: ma.bits.clone(),
                bits_b: mb.bits.clone(),
                probability: ma.probability * mb.probability,
                receiver_a: dominant_pure(&ra)?,
                receiver_b: dominant_pure(&rb)?,
                fidelity_a: fidelity(&target_a, &ra)?,
                fidelity_b: fidelity(&target_b, &rb)?,
            });
        }
    }
    Ok(MqtRun {
        branches,
        audit: ResourceAudit {
            bell_pairs: 2,
            ghz_triples: 0,
            classical_bits: 4,
        },
    })
}

fn dominant_pure(rho: &crate::qstate::MixedState) -> Result<PureState> {
    // branch states are pure products; take the dominant eigenvector
    let (vals, vecs) = rho.matrix().hermitian_eigen();
    let dim = rho.dim();
    let top = dim - 1;
    if vals[top] < 1.0 - 1e-8 {
        return Err(Error::InvalidState(
            "receiver register is not in a pure state".into(),
        ));
    }
    let amps: Vec<C64> = (0..dim).map(|i| vecs.get(i, top)).collect();
    Ok(PureState::from_raw_normalized(rho.num_qubits(), amps))
}

/// Sampled MQT: measures the two receiver core qubits computationally after
/// the corrections, one draw per shot.
pub fn mqt_sampled_cores(
    payload_a: &GhzLikePayload,
    payload_b: &GhzLikePayload,
    shots: u64,
    rng: &mut SimRng,
) -> Result<ShotHistogram> {
    let run = mqt_run(payload_a, payload_b)?;
    // measurement distribution over the two cores, branch-weighted
    let comp = MeasurementBasis::computational(1);
    let mut keys = Vec::new();
    let mut weights = Vec::new();
    for br in &run.branches {
        let a_branches = measure_analytic(&br.receiver_a, &comp, &[0])?;
        let b_branches = measure_analytic(&br.receiver_b, &comp, &[0])?;
        for ba in &a_branches {
            for bb in &b_branches {
                keys.push(format!("{}{}", ba.bits, bb.bits));
                weights.push(br.probability * ba.probability * bb.probability);
            }
        }
    }
    let mut hist = ShotHistogram::default();
    for _ in 0..shots {
        let i = rng.sample_index(&weights);
        hist.record(keys[i].clone());
    }
    Ok(hist)
}

// ---------------------------------------------------------------------------
// Broadcasting of known states
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub enum BroadcastVariant {
    /// One sender, `pairs.len()` receivers, one Bell pair each.
    Plain { pairs: Vec<BellLabel> },
    /// Two senders (amplitude holder and phase holder), one GHZ triple per
    /// receiver.
    Joint { receivers: usize },
    /// Controller picks phi+/phi- at random per pair and may withhold the
    /// disclosure bits.
    Controlled { receivers: usize, disclose: bool },
    /// n parties, each broadcasting to the others; n(n-1) pairs.
    Multidirectional { parties: usize },
}

#[derive(Clone, Debug)]
pub struct BroadcastChannelSpec {
    pub variant: BroadcastVariant,
    /// Enforce pairwise-distinct Bell labels in the plain channel.
    pub require_distinct_pairs: bool,
}

impl BroadcastChannelSpec {
    pub fn plain(m: usize) -> Self {
        BroadcastChannelSpec {
            variant: BroadcastVariant::Plain {
                pairs: vec![BellLabel::PhiPlus; m],
            },
            require_distinct_pairs: false,
        }
    }

    pub fn plain_with(pairs: Vec<BellLabel>) -> Self {
        BroadcastChannelSpec {
            variant: BroadcastVariant::Plain { pairs },
            require_distinct_pairs: false,
        }
    }

    pub fn joint(receivers: usize) -> Self {
        BroadcastChannelSpec {
            variant: BroadcastVariant::Joint { receivers },
            require_distinct_pairs: false,
        }
    }

    pub fn controlled(receivers: usize, disclose: bool) -> Self {
        BroadcastChannelSpec {
            variant: BroadcastVariant::Controlled {
                receivers,
                disclose,
            },
            require_distinct_pairs: false,
        }
    }

    pub fn multidirectional(parties: usize) -> Self {
        BroadcastChannelSpec {
            variant: BroadcastVariant::Multidirectional { parties },
            require_distinct_pairs: false,
        }
    }

    pub fn receiver_count(&self) -> usize {
        match &self.variant {
            BroadcastVariant::Plain { pairs } => pairs.len(),
            BroadcastVariant::Joint { receivers } => *receivers,
            BroadcastVariant::Controlled { receivers, .. } => *receivers,
            BroadcastVariant::Multidirectional { parties } => parties * (parties - 1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.variant {
            BroadcastVariant::Plain { pairs } => {
                if pairs.is_empty() {
                    return Err(Error::InvalidArgument(
                        "plain broadcast needs at least one receiver".into(),
                    ));
                }
                if self.require_distinct_pairs {
                    for i in 0..pairs.len() {
                        for j in i + 1..pairs.len() {
                            if pairs[i] == pairs[j] {
                                return Err(Error::InvalidArgument(format!(
                                    "distinct-pair constraint violated: pairs {i} and {j} are both {}",
                                    pairs[i].name()
                                )));
                            }
                        }
                    }
                }
            }
            BroadcastVariant::Joint { receivers }
            | BroadcastVariant::Controlled { receivers, .. } => {
                if *receivers == 0 {
                    return Err(Error::InvalidArgument(
                        "broadcast needs at least one receiver".into(),
                    ));
                }
            }
            BroadcastVariant::Multidirectional { parties } => {
                if *parties < 2 {
                    return Err(Error::InvalidArgument(
                        "multidirectional broadcast needs at least two parties".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct ReceiverReport {
    pub receiver: usize,
    /// For multidirectional runs: which party acted as sender.
    pub sender: usize,
    pub branches: Vec<TeleportBranch>,
}

#[derive(Clone, Debug)]
pub enum BroadcastOutcome {
    Delivered {
        receivers: Vec<ReceiverReport>,
        audit: ResourceAudit,
    },
    /// The controller withheld the disclosure bits: the receivers'
    /// correction is undetermined and no state is claimed.
    ControlNotReleased,
}

/// Broadcast a known state to every receiver of the channel spec. Each
/// receiver ends in the payload state on every branch.
pub fn broadcast_known(
    payload: &KnownQubit,
    spec: &BroadcastChannelSpec,
    rng: &mut SimRng,
) -> Result<BroadcastOutcome> {
    spec.validate()?;
    match &spec.variant {
        BroadcastVariant::Plain { pairs } => {
            let mut receivers = Vec::with_capacity(pairs.len());
            let mut bits = 0usize;
            for (i, &label) in pairs.iter().enumerate() {
                let run = rsp(payload, label)?;
                bits += run.audit.classical_bits;
                receivers.push(ReceiverReport {
                    receiver: i,
                    sender: 0,
                    branches: run.branches,
                });
            }
            Ok(BroadcastOutcome::Delivered {
                receivers,
                audit: ResourceAudit {
                    bell_pairs: pairs.len(),
                    ghz_triples: 0,
                    classical_bits: bits,
                },
            })
        }
        BroadcastVariant::Joint { receivers: m } => {
            let mut receivers = Vec::with_capacity(*m);
            for i in 0..*m {
                receivers.push(ReceiverReport {
                    receiver: i,
                    sender: 0,
                    branches: joint_rsp_branches(payload)?,
                });
            }
            Ok(BroadcastOutcome::Delivered {
                receivers,
                audit: ResourceAudit {
                    bell_pairs: 0,
                    ghz_triples: *m,
                    classical_bits: 2 * m,
                },
            })
        }
        BroadcastVariant::Controlled {
            receivers: m,
            disclose,
        } => {
            let picks: Vec<bool> = (0..*m).map(|_| rng.uniform() < 0.5).collect();
            if !*disclose {
                return Ok(BroadcastOutcome::ControlNotReleased);
            }
            let mut receivers = Vec::with_capacity(*m);
            for (i, &flip) in picks.iter().enumerate() {
                receivers.push(ReceiverReport {
                    receiver: i,
                    sender: 0,
                    branches: controlled_rsp_branches(payload, flip)?,
                });
            }
            Ok(BroadcastOutcome::Delivered {
                receivers,
                audit: ResourceAudit {
                    bell_pairs: *m,
                    ghz_triples: 0,
                    classical_bits: 2 * m, // outcome bit + disclosure bit each
                },
            })
        }
        BroadcastVariant::Multidirectional { parties } => {
            let mut receivers = Vec::new();
            for sender in 0..*parties {
                for recv in 0..*parties {
                    if recv == sender {
                        continue;
                    }
                    let run = rsp(payload, BellLabel::PhiPlus)?;
                    receivers.push(ReceiverReport {
                        receiver: recv,
                        sender,
                        branches: run.branches,
                    });
                }
            }
            let links = parties * (parties - 1);
            Ok(BroadcastOutcome::Delivered {
                receivers,
                audit: ResourceAudit {
                    bell_pairs: links,
                    ghz_triples: 0,
                    classical_bits: links,
                },
            })
        }
    }
}

/// Joint RSP over one GHZ triple: the amplitude holder measures in a real
/// theta basis (outcome a), the phase holder in a phi-rotated diagonal
/// basis (outcome b); corrections derived from the two bits.
fn joint_rsp_branches(payload: &KnownQubit) -> Result<Vec<TeleportBranch>> {
    let theta = payload.theta();
    let phi = payload.phi();
    let triple = crate::circuits::prepare_named(NamedState::Ghz(3))?;
    let half = theta / 2.0;
    let u0 = vec![C64::new(half.cos(), 0.0), C64::new(half.sin(), 0.0)];
    let u1 = vec![C64::new(half.sin(), 0.0), C64::new(-half.cos(), 0.0)];
    let amp_basis = MeasurementBasis::custom(vec![u0, u1])?;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let v0 = vec![C64::new(s, 0.0), C64::from_polar(s, -phi)];
    let v1 = vec![C64::new(s, 0.0), -C64::from_polar(s, -phi)];
    let phase_basis = MeasurementBasis::custom(vec![v0, v1])?;
    let target = payload.state().to_density();
    let fixup = phase(2.0 * phi + PI).mul(&pauli_x());
    let mut branches = Vec::with_capacity(4);
    for a in measure_analytic(&triple, &amp_basis, &[0])? {
        for b in measure_analytic(&a.state, &phase_basis, &[1])? {
            let mut st = b.state.clone();
            if b.outcome == 1 {
                st = st.apply_unitary(&pauli_z(), &[2])?;
            }
            if a.outcome == 1 {
                st = st.apply_unitary(&fixup, &[2])?;
            }
            let receiver = extract_qubit(&st, 2)?;
            let f = fidelity(&target, &receiver.to_density())?;
            branches.push(TeleportBranch {
                bits: format!("{}{}", a.bits, b.bits),
                probability: a.probability * b.probability,
                receiver,
                fidelity: f,
            });
        }
    }
    Ok(branches)
}

/// Controlled RSP over phi+ (flip = false) or phi- (flip = true): Alice
/// measures in the conjugated payload basis; the receiver's correction
/// needs the controller's bit.
fn controlled_rsp_branches(payload: &KnownQubit, flip: bool) -> Result<Vec<TeleportBranch>> {
    let label = if flip {
        BellLabel::PhiMinus
    } else {
        BellLabel::PhiPlus
    };
    let pair = crate::circuits::prepare_named(NamedState::Bell(label))?;
    let q1 = payload.state();
    let q2 = payload.partner_state();
    let conj = |v: &PureState| -> Vec<C64> { v.amps().iter().map(|a| a.conj()).collect() };
    let basis = MeasurementBasis::custom(vec![conj(&q1), conj(&q2)])?;
    let target = q1.to_density();
    let u_rsp_inv = payload.u_rsp().adjoint();
    let mut branches = Vec::with_capacity(2);
    for m in measure_analytic(&pair, &basis, &[0])? {
        let mut st = m.state;
        if flip {
            st = st.apply_unitary(&pauli_z(), &[1])?;
        }
        if m.outcome == 1 {
            st = st.apply_unitary(&u_rsp_inv, &[1])?;
        }
        let receiver = extract_qubit(&st, 1)?;
        let f = fidelity(&target, &receiver.to_density())?;
        branches.push(TeleportBranch {
            bits: m.bits,
            probability: m.probability,
            receiver,
            fidelity: f,
        });
    }
    Ok(branches)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn teleport_zero_payload_all_branches() {
        let payload = PureState::basis(1, 0).unwrap();
        let run = standard_teleport(&payload, BellLabel::PhiPlus).unwrap();
        assert_eq!(run.branches.len(), 4);
        for br in &run.branches {
            assert!(br.fidelity > 1.0 - 1e-10);
            assert!((br.probability - 0.25).abs() < 1e-10);
        }
        assert_eq!(run.audit.bell_pairs, 1);
        assert_eq!(run.audit.classical_bits, 2);
    }

    #[test]
    fn teleport_complex_payload_over_every_bell_resource() {
        let payload =
            PureState::single_qubit(c(FRAC_1_SQRT_2, 0.0), c(0.0, FRAC_1_SQRT_2)).unwrap();
        for label in BellLabel::all() {
            let run = standard_teleport(&payload, label).unwrap();
            for br in &run.branches {
                assert!(
                    br.fidelity > 1.0 - 1e-10,
                    "{} branch {} fidelity {}",
                    label.name(),
                    br.bits,
                    br.fidelity
                );
            }
        }
    }

    #[test]
    fn teleport_rejects_multi_qubit_payload() {
        let two = PureState::zero(2).unwrap();
        assert!(standard_teleport(&two, BellLabel::PhiPlus).is_err());
    }

    #[test]
    fn rsp_prepares_target_on_both_branches() {
        let payload = KnownQubit::new(PI / 2.0, 0.0).unwrap(); // |+>
        let run = rsp(&payload, BellLabel::PhiMinus).unwrap();
        assert_eq!(run.branches.len(), 2);
        for br in &run.branches {
            assert!(br.fidelity > 1.0 - 1e-10, "branch {}", br.bits);
            assert!((br.probability - 0.5).abs() < 1e-10);
        }
        assert_eq!(run.audit.classical_bits, 1);
    }

    #[test]
    fn rsp_theta_zero_gives_zero_state() {
        let payload = KnownQubit::new(0.0, 0.0).unwrap();
        let run = rsp(&payload, BellLabel::PsiMinus).unwrap();
        let zero = PureState::basis(1, 0).unwrap();
        for br in &run.branches {
            assert!(br.receiver.fidelity_with(&zero) > 1.0 - 1e-10);
        }
    }

    #[test]
    fn rsp_random_angles_all_resources() {
        let mut x = 0.2f64;
        let mut next = || {
            x = (x * 9301.0 + 49297.0) % 233280.0 / 233280.0;
            x
        };
        for _ in 0..10 {
            let payload = KnownQubit::new(next() * PI, next() * 2.0 * PI).unwrap();
            for label in BellLabel::all() {
                let run = rsp(&payload, label).unwrap();
                for br in &run.branches {
                    assert!(br.fidelity > 1.0 - 1e-10);
                }
            }
        }
    }

    #[test]
    fn dissolve_identity_for_m_1() {
        let p = GhzLikePayload::new(1, c(0.6, 0.0), c(0.0, 0.8)).unwrap();
        let d = mqt_dissolve(&p).unwrap();
        assert!(d.core.fidelity_with(&p.core()) > 1.0 - 1e-12);
    }

    #[test]
    fn dissolve_m_3_plus_type() {
        let s = FRAC_1_SQRT_2;
        let p = GhzLikePayload::new(3, c(s, 0.0), c(s, 0.0)).unwrap();
        let d = mqt_dissolve(&p).unwrap();
        // (|+>) (x) |00>
        let expect = PureState::from_raw_normalized(3, {
            let mut v = vec![ZERO; 8];
            v[0] = c(s, 0.0);
            v[0b100] = c(s, 0.0);
            v
        });
        assert!(d.dissolved.fidelity_with(&expect) > 1.0 - 1e-12);
    }

    #[test]
    fn dissolve_then_reconstruct_round_trips() {
        let p = GhzLikePayload::new(3, c(0.5, 0.5), c(0.5, -0.5)).unwrap();
        let d = mqt_dissolve(&p).unwrap();
        let mut st = d.dissolved.clone();
        for t in 1..3 {
            st = st.apply_unitary(&cnot(), &[0, t]).unwrap();
        }
        assert!(st.fidelity_with(&p.state()) > 1.0 - 1e-12);
    }

    #[test]
    fn mqt_m1_all_sixteen_branches() {
        let a = GhzLikePayload::new(1, c(0.6, 0.0), c(0.0, 0.8)).unwrap();
        let b = GhzLikePayload::new(2, c(0.5, 0.5), c(0.5, -0.5)).unwrap();
        let run = mqt_run(&a, &b).unwrap();
        assert_eq!(run.branches.len(), 16);
        let mut total = 0.0;
        for br in &run.branches {
            assert!(
                br.fidelity_a > 1.0 - 1e-10,
                "a {} {}",
                br.bits_a,
                br.fidelity_a
            );
            assert!(
                br.fidelity_b > 1.0 - 1e-10,
                "b {} {}",
                br.bits_b,
                br.fidelity_b
            );
            total += br.probability;
        }
        assert!((total - 1.0).abs() < 1e-10);
        assert_eq!(run.audit.bell_pairs, 2);
    }

    #[test]
    fn mqt_alpha_one_gives_zero_register() {
        let a = GhzLikePayload::new(2, c(1.0, 0.0), ZERO).unwrap();
        let b = GhzLikePayload::new(3, c(1.0, 0.0), ZERO).unwrap();
        let run = mqt_run(&a, &b).unwrap();
        let zeros_a = PureState::zero(2).unwrap();
        for br in &run.branches {
            assert!(br.receiver_a.fidelity_with(&zeros_a) > 1.0 - 1e-10);
        }
    }

    #[test]
    fn mqt_wrong_payload_sizes_rejected() {
        let a = GhzLikePayload::new(2, c(1.0, 0.0), ZERO).unwrap();
        let b = GhzLikePayload::new(2, c(1.0, 0.0), ZERO).unwrap();
        assert!(mqt_run(&a, &b).is_err());
    }

    #[test]
    fn mqt_joint_plus_distribution_uniform() {
        let s = FRAC_1_SQRT_2;
        let a = GhzLikePayload::new(1, c(s, 0.0), c(s, 0.0)).unwrap();
        let b = GhzLikePayload::new(2, c(s, 0.0), c(s, 0.0)).unwrap();
        let mut rng = SimRng::seed_from_u64(2024);
        let hist = mqt_sampled_cores(&a, &b, 8192, &mut rng).unwrap();
        let sigma = (8192.0f64 * 0.25 * 0.75).sqrt();
        for key in ["00", "01", "10", "11"] {
            let dev = (hist.count(key) as f64 - 2048.0).abs();
            assert!(dev < 5.0 * sigma, "{key}: {}", hist.count(key));
        }
    }

    #[test]
    fn broadcast_plain_two_plus_states() {
        let payload = KnownQubit::new(PI / 2.0, 0.0).unwrap();
        let spec = BroadcastChannelSpec::plain(2);
        let mut rng = SimRng::seed_from_u64(1);
        match broadcast_known(&payload, &spec, &mut rng).unwrap() {
            BroadcastOutcome::Delivered { receivers, audit } => {
                assert_eq!(receivers.len(), 2);
                assert_eq!(audit.bell_pairs, 2);
                for r in &receivers {
                    for br in &r.branches {
                        assert!(br.fidelity > 1.0 - 1e-10);
                    }
                }
            }
            _ => panic!("expected delivery"),
        }
    }

    #[test]
    fn broadcast_plain_five_zero_states() {
        let payload = KnownQubit::new(0.0, 0.0).unwrap();
        let spec = BroadcastChannelSpec::plain(5);
        let mut rng = SimRng::seed_from_u64(1);
        let out = broadcast_known(&payload, &spec, &mut rng).unwrap();
        let zero = PureState::basis(1, 0).unwrap();
        match out {
            BroadcastOutcome::Delivered { receivers, audit } => {
                assert_eq!(audit.bell_pairs, 5);
                for r in &receivers {
                    for br in &r.branches {
                        assert!(br.receiver.fidelity_with(&zero) > 1.0 - 1e-10);
                    }
                }
            }
            _ => panic!("expected delivery"),
        }
    }

    #[test]
    fn broadcast_joint_matches_plain_composition() {
        // theta known to sender 1, phi to sender 2, composed versus plain
        let payload = KnownQubit::new(1.1, 2.3).unwrap();
        let spec = BroadcastChannelSpec::joint(2);
        let mut rng = SimRng::seed_from_u64(5);
        match broadcast_known(&payload, &spec, &mut rng).unwrap() {
            BroadcastOutcome::Delivered { receivers, audit } => {
                assert_eq!(audit.ghz_triples, 2);
                for r in &receivers {
                    assert_eq!(r.branches.len(), 4);
                    let mut total = 0.0;
                    for br in &r.branches {
                        assert!(br.fidelity > 1.0 - 1e-10, "{} {}", br.bits, br.fidelity);
                        total += br.probability;
                    }
                    assert!((total - 1.0).abs() < 1e-10);
                }
            }
            _ => panic!("expected delivery"),
        }
    }

    #[test]
    fn joint_broadcast_composes_phase_encoding() {
        // the two senders' knowledge composes like a phase gate applied to
        // the amplitude-only state: target = P(phi) (cos|0> + sin|1>)
        let theta = 1.9;
        let phi = 4.2;
        let payload = KnownQubit::new(theta, phi).unwrap();
        let amplitude_only =
            PureState::single_qubit(c((theta / 2.0).cos(), 0.0), c((theta / 2.0).sin(), 0.0))
                .unwrap();
        let composed = amplitude_only.apply_unitary(&phase(phi), &[0]).unwrap();
        assert!(composed.fidelity_with(&payload.state()) > 1.0 - 1e-12);
        let branches = joint_rsp_branches(&payload).unwrap();
        for br in &branches {
            assert!(
                br.receiver.fidelity_with(&composed) > 1.0 - 1e-10,
                "{}",
                br.bits
            );
        }
    }

    #[test]
    fn broadcast_controlled_fails_closed() {
        let payload = KnownQubit::new(0.7, 0.4).unwrap();
        let spec = BroadcastChannelSpec::controlled(3, false);
        let mut rng = SimRng::seed_from_u64(9);
        match broadcast_known(&payload, &spec, &mut rng).unwrap() {
            BroadcastOutcome::ControlNotReleased => {}
            _ => panic!("withheld disclosure must not deliver"),
        }
    }

    #[test]
    fn broadcast_controlled_delivers_with_disclosure() {
        let payload = KnownQubit::new(0.7, 0.4).unwrap();
        let spec = BroadcastChannelSpec::controlled(3, true);
        let mut rng = SimRng::seed_from_u64(9);
        match broadcast_known(&payload, &spec, &mut rng).unwrap() {
            BroadcastOutcome::Delivered { receivers, .. } => {
                for r in &receivers {
                    for br in &r.branches {
                        assert!(br.fidelity > 1.0 - 1e-10);
                    }
                }
            }
            _ => panic!("expected delivery"),
        }
    }

    #[test]
    fn broadcast_distinct_pair_constraint() {
        let mut spec =
            BroadcastChannelSpec::plain_with(vec![BellLabel::PhiPlus, BellLabel::PhiPlus]);
        spec.require_distinct_pairs = true;
        assert!(spec.validate().is_err());
        spec.variant = BroadcastVariant::Plain {
            pairs: vec![BellLabel::PhiPlus, BellLabel::PsiMinus],
        };
        assert!(spec.validate().is_ok());
    }

    #[test]
    fn broadcast_multidirectional_three_parties() {
        let payload = KnownQubit::new(2.0, 5.5).unwrap();
        let spec = BroadcastChannelSpec::multidirectional(3);
        let mut rng = SimRng::seed_from_u64(3);
        match broadcast_known(&payload, &spec, &mut rng).unwrap() {
            BroadcastOutcome::Delivered { receivers, audit } => {
                assert_eq!(receivers.len(), 6);
                assert_eq!(audit.bell_pairs, 6);
                for r in &receivers {
                    for br in &r.branches {
                        assert!(br.fidelity > 1.0 - 1e-10);
                    }
                }
            }
            _ => panic!("expected delivery"),
        }
    }

    #[test]
    fn known_qubit_angle_validation() {
        assert!(KnownQubit::new(-0.1, 0.0).is_err());
        assert!(KnownQubit::new(0.0, 2.0 * PI).is_err());
        assert!(KnownQubit::new(PI, 0.0).is_ok());
    }
}
