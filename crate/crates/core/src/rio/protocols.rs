//! The remote-operator protocols: hidden-operator (RIHO), partially
//! unknown operator (RIPUO), and controlled-joint remote implementation
//! (CJRIO) with its (M, N) generalization. Every classical outcome tuple
//! is enumerated; in the zero-error analytic limit each branch ends in the
//! target state exactly.

use crate::circuits::{hadamard, pauli_x, pauli_z};
use crate::error::{Error, Result};
use crate::linalg::{CMat, C64, ZERO};
use crate::rio::homodyne::HomodyneModel;
use crate::rio::register::DualRailRegister;

const FID_TOL: f64 = 1e-10;

/// Normalized path-encoded qubit alpha|path0> + beta|path1>.
#[derive(Clone, Copy, Debug)]
pub struct PathQubit {
    pub alpha: C64,
    pub beta: C64,
}

impl PathQubit {
    pub fn new(alpha: C64, beta: C64) -> Result<Self> {
        let norm = alpha.norm_sqr() + beta.norm_sqr();
        if (norm - 1.0).abs() > FID_TOL {
            return Err(Error::InvalidState(format!(
                "|alpha|^2 + |beta|^2 = {norm} differs from 1"
            )));
        }
        Ok(PathQubit { alpha, beta })
    }

    pub fn fidelity_with(&self, other: &PathQubit) -> f64 {
        (self.alpha.conj() * other.alpha + self.beta.conj() * other.beta).norm_sqr()
    }

    fn applied(&self, op: &CMat) -> PathQubit {
        let a = op.get(0, 0) * self.alpha + op.get(0, 1) * self.beta;
        let b = op.get(1, 0) * self.alpha + op.get(1, 1) * self.beta;
        let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
        PathQubit {
            alpha: a / n,
            beta: b / n,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SuForm {
    /// |u|^2 + |v|^2 = 1; the general qubit rotation.
    Unimodular,
    /// |u| = |v| = 1 with an overall 1/sqrt(2); the lump operator whose
    /// diagonal and anti-diagonal halves are separately unitary.
    Lump,
}

/// Operator of form ((u, v), (-v*, u*)), scaled per its form.
#[derive(Clone, Copy, Debug)]
pub struct SuOperator {
    u: C64,
    v: C64,
    form: SuForm,
}

impl SuOperator {
    pub fn unimodular(u: C64, v: C64) -> Result<Self> {
        let norm = u.norm_sqr() + v.norm_sqr();
        if (norm - 1.0).abs() > FID_TOL {
            return Err(Error::InvalidState(format!(
                "|u|^2 + |v|^2 = {norm} differs from 1"
            )));
        }
        Ok(SuOperator {
            u,
            v,
            form: SuForm::Unimodular,
        })
    }

    pub fn lump(u: C64, v: C64) -> Result<Self> {
        if (u.norm() - 1.0).abs() > FID_TOL || (v.norm() - 1.0).abs() > FID_TOL {
            return Err(Error::InvalidState("lump form needs |u| = |v| = 1".into()));
        }
        Ok(SuOperator {
            u,
            v,
            form: SuForm::Lump,
        })
    }

    pub fn u(&self) -> C64 {
        self.u
    }

    pub fn v(&self) -> C64 {
        self.v
    }

    pub fn form(&self) -> SuForm {
        self.form
    }

    pub fn matrix(&self) -> CMat {
        let scale = match self.form {
            SuForm::Unimodular => C64::new(1.0, 0.0),
            SuForm::Lump => C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0),
        };
        CMat::two(
            self.u * scale,
            self.v * scale,
            -self.v.conj() * scale,
            self.u.conj() * scale,
        )
    }

    /// U0 = diag(u, u*).
    pub fn sub_diagonal(&self) -> CMat {
        CMat::two(self.u, ZERO, ZERO, self.u.conj())
    }

    /// U1 = ((0, v), (-v*, 0)).
    pub fn sub_antidiagonal(&self) -> CMat {
        CMat::two(ZERO, self.v, -self.v.conj(), ZERO)
    }
}

// ---------------------------------------------------------------------------
// RIHO / RIPUO
// ---------------------------------------------------------------------------

/// The Bell-type spatial channels: Omega(+-) = a0 b0 +- a1 b1,
/// Pi(+-) = a0 b1 +- a1 b0.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RioChannel {
    OmegaPlus,
    OmegaMinus,
    PiPlus,
    PiMinus,
}

impl RioChannel {
    pub fn all() -> [RioChannel; 4] {
        [
            RioChannel::OmegaPlus,
            RioChannel::OmegaMinus,
            RioChannel::PiPlus,
            RioChannel::PiMinus,
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            RioChannel::OmegaPlus => "omega+",
            RioChannel::OmegaMinus => "omega-",
            RioChannel::PiPlus => "pi+",
            RioChannel::PiMinus => "pi-",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "omega+" | "omegaplus" => Ok(RioChannel::OmegaPlus),
            "omega-" | "omegaminus" => Ok(RioChannel::OmegaMinus),
            "pi+" | "piplus" => Ok(RioChannel::PiPlus),
            "pi-" | "piminus" => Ok(RioChannel::PiMinus),
            other => Err(Error::InvalidArgument(format!(
                "unknown RIO channel \"{other}\" (expected omega+/omega-/pi+/pi-)"
            ))),
        }
    }

    fn anti_correlated(&self) -> bool {
        matches!(self, RioChannel::PiPlus | RioChannel::PiMinus)
    }

    fn minus_signed(&self) -> bool {
        matches!(self, RioChannel::OmegaMinus | RioChannel::PiMinus)
    }
}

/// Register [X, A, B] holding the payload on X joint with the channel.
fn riho_register(payload: &PathQubit, channel: RioChannel) -> Result<DualRailRegister> {
    let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let sign = if channel.minus_signed() { -s } else { s };
    // channel amplitudes over (a, b)
    let (first, second) = if channel.anti_correlated() {
        ((0usize, 1usize), (1usize, 0usize))
    } else {
        ((0, 0), (1, 1))
    };
    let mut amps = vec![ZERO; 8];
    for (x, coeff) in [(0usize, payload.alpha), (1usize, payload.beta)] {
        amps[x | (first.0 << 1) | (first.1 << 2)] += coeff * s;
        amps[x | (second.0 << 1) | (second.1 << 2)] += coeff * sign;
    }
    DualRailRegister::from_joint(&["X", "A", "B"], amps)
}

/// Step 1 shared by both protocols: tag x0 and a0 with opposite phases,
/// read the probe, then path-flip A and B into the canonical correlated
/// form. Returns (outcome k, probability, register).
fn entangle_step(
    reg: &DualRailRegister,
    channel: RioChannel,
) -> Result<Vec<(u8, f64, DualRailRegister)>> {
    let (x, a, b) = (0usize, 1, 2);
    let mut work = reg.clone();
    work.begin_probe();
    work.cross_kerr(x, 0, 1)?;
    work.cross_kerr(a, 0, -1)?;
    let classes = work.probe_classes()?;
    let mut out = Vec::with_capacity(classes.len());
    for (class, _) in classes {
        let mut branch = work.clone();
        let prob = branch.collapse_probe_class(class)?;
        let k = class as u8;
        let x_a = k;
        let x_b = if channel.anti_correlated() { k ^ 1 } else { k };
        if x_a == 1 {
            branch.apply_path_op(a, &pauli_x())?;
        }
        if x_b == 1 {
            branch.apply_path_op(b, &pauli_x())?;
        }
        out.push((k, prob, branch));
    }
    Ok(out)
}

/// The shared beam-splitter stage: mix A and B, tag a1 with theta and b1
/// with 2 theta, read the four-class probe; A and B collapse to definite
/// paths (p, q).
fn four_outcome_stage(reg: &DualRailRegister) -> Result<Vec<(u8, u8, f64, DualRailRegister)>> {
    let (a, b) = (1usize, 2);
    let mut work = reg.clone();
    work.apply_path_op(a, &hadamard())?;
    work.apply_path_op(b, &hadamard())?;
    work.begin_probe();
    work.cross_kerr(a, 1, 1)?;
    work.cross_kerr(b, 1, 2)?;
    let classes = work.probe_classes()?;
    let mut out = Vec::new();
    for (class, _) in classes {
        let mut branch = work.clone();
        let prob = branch.collapse_probe_class(class)?;
        let p = branch.collapse_definite_path(a)? as u8;
        let q = branch.collapse_definite_path(b)? as u8;
        out.push((p, q, prob, branch));
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct RihoBranch {
    pub k: u8,
    /// Which sub-operator landed: 0 diagonal, 1 anti-diagonal.
    pub m: u8,
    pub p: u8,
    pub q: u8,
    pub probability: f64,
    pub output: PathQubit,
    pub target: PathQubit,
    pub fidelity: f64,
}

/// Remote implementation of a hidden operator: Bob applies the lump U_B;
/// the announced probe outcome m reveals which sub-operator (U_0 or U_1)
/// acted on Alice's qubit. Exhaustive over (k, m, p, q).
pub fn run_riho(
    payload: &PathQubit,
    channel: RioChannel,
    op: &SuOperator,
    model: &HomodyneModel,
) -> Result<Vec<RihoBranch>> {
    if op.form() != SuForm::Lump {
        return Err(Error::InvalidArgument(
            "RIHO takes the lump form with |u| = |v| = 1".into(),
        ));
    }
    let _ = model; // discrimination statistics are reported separately
    let (x, a, b) = (0usize, 1, 2);
    let reg = riho_register(payload, channel)?;
    let mut branches = Vec::with_capacity(16);
    for (k, p_k, reg_k) in entangle_step(&reg, channel)? {
        // Step 2: the lump operator on Bob's paths
        let mut reg_op = reg_k.clone();
        reg_op.apply_path_op(b, &op.matrix())?;
        // Step 3: probe a0 (+theta) and b0 (-theta); outcome m
        reg_op.begin_probe();
        reg_op.cross_kerr(a, 0, 1)?;
        reg_op.cross_kerr(b, 0, -1)?;
        for (class_m, _) in reg_op.probe_classes()? {
            let mut reg_m = reg_op.clone();
            let p_m = reg_m.collapse_probe_class(class_m)?;
            let m = class_m as u8;
            if m == 1 {
                reg_m.apply_path_op(x, &pauli_x())?;
            }
            let target_op = if m == 0 {
                op.sub_diagonal()
            } else {
                op.sub_antidiagonal()
            };
            let target = payload.applied(&target_op);
            // Step 4: beam splitters and the four-class probe
            for (p, q, p_pq, mut reg_pq) in four_outcome_stage(&reg_m)? {
                let z_needed = ((p ^ q) == 1) ^ channel.minus_signed();
                if z_needed {
                    reg_pq.apply_path_op(x, &pauli_z())?;
                }
                let (alpha, beta) = reg_pq.extract_path_qubit(x)?;
                let output = PathQubit { alpha, beta };
                branches.push(RihoBranch {
                    k,
                    m,
                    p,
                    q,
                    probability: p_k * p_m * p_pq,
                    output,
                    target,
                    fidelity: output.fidelity_with(&target),
                });
            }
        }
    }
    Ok(branches)
}

#[derive(Clone, Debug)]
pub struct RipuoBranch {
    pub k: u8,
    pub p: u8,
    pub q: u8,
    pub probability: f64,
    pub output: PathQubit,
    pub target: PathQubit,
    pub fidelity: f64,
}

/// Classify a user-supplied operator as diagonal (0) or anti-diagonal (1);
/// anything else is rejected.
fn classify_sub_operator(op: &CMat) -> Result<u8> {
    if op.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: op.dim(),
        });
    }
    if !op.is_unitary(1e-8) {
        return Err(Error::NonUnitary {
            max_dev: op.unitarity_defect(),
        });
    }
    let off = op.get(0, 1).norm().max(op.get(1, 0).norm());
    let diag = op.get(0, 0).norm().max(op.get(1, 1).norm());
    if off < 1e-12 {
        Ok(0)
    } else if diag < 1e-12 {
        Ok(1)
    } else {
        Err(Error::InvalidArgument(
            "operator is neither diagonal nor anti-diagonal".into(),
        ))
    }
}

/// Remote implementation of a partially unknown operator: Bob applies a
/// diagonal or anti-diagonal unitary of his choice; Alice corrects with
/// X^m Z^(p xor q).
pub fn run_ripuo(
    payload: &PathQubit,
    channel: RioChannel,
    op: &CMat,
    model: &HomodyneModel,
) -> Result<Vec<RipuoBranch>> {
    let m = classify_sub_operator(op)?;
    let _ = model;
    let (x, b) = (0usize, 2);
    let reg = riho_register(payload, channel)?;
    let target = payload.applied(op);
    let mut branches = Vec::with_capacity(8);
    for (k, p_k, reg_k) in entangle_step(&reg, channel)? {
        let mut reg_op = reg_k.clone();
        reg_op.apply_path_op(b, op)?;
        for (p, q, p_pq, mut reg_pq) in four_outcome_stage(&reg_op)? {
            if m == 1 {
                // Z first, then the path flip
                if ((p ^ q) == 1) ^ channel.minus_signed() {
                    reg_pq.apply_path_op(x, &pauli_z())?;
                }
                reg_pq.apply_path_op(x, &pauli_x())?;
            } else if ((p ^ q) == 1) ^ channel.minus_signed() {
                reg_pq.apply_path_op(x, &pauli_z())?;
            }
            let (alpha, beta) = reg_pq.extract_path_qubit(x)?;
            let output = PathQubit { alpha, beta };
            branches.push(RipuoBranch {
                k,
                p,
                q,
                probability: p_k * p_pq,
                output,
                target,
                fidelity: output.fidelity_with(&target),
            });
        }
    }
    Ok(branches)
}

// ---------------------------------------------------------------------------
// CJRIO
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct CjrioTranscript {
    pub k: u8,
    pub m: u8,
    pub n: u8,
    pub s: Vec<u8>,
    pub l: Vec<u8>,
    /// (r, g) per cascade link, ordered from Bob M-1 down to Bob 1.
    pub rg: Vec<(u8, u8)>,
    pub p: u8,
    pub q: u8,
    pub w: Vec<u8>,
    pub v: Vec<u8>,
}

impl CjrioTranscript {
    /// Flat outcome string for reporting.
    pub fn bits(&self) -> String {
        let mut out = format!("{}{}{}", self.k, self.m, self.n);
        for s in &self.s {
            out.push_str(&s.to_string());
        }
        for l in &self.l {
            out.push_str(&l.to_string());
        }
        for (r, g) in &self.rg {
            out.push_str(&r.to_string());
            out.push_str(&g.to_string());
        }
        out.push_str(&self.p.to_string());
        out.push_str(&self.q.to_string());
        for w in &self.w {
            out.push_str(&w.to_string());
        }
        for v in &self.v {
            out.push_str(&v.to_string());
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct CjrioBranch {
    pub transcript: CjrioTranscript,
    pub probability: f64,
    pub output: PathQubit,
    pub fidelity: f64,
}

#[derive(Clone, Debug)]
pub enum CjrioOutcome {
    Completed {
        target: PathQubit,
        branches: Vec<CjrioBranch>,
    },
    /// The controller declined after the payload was entangled and
    /// disentangled (steps 1 and 2); no operator was applied.
    HaltedNoConsent { entangle_branches: usize },
}

struct GenBranch {
    prob: f64,
    reg: DualRailRegister,
    k: u8,
    m: u8,
    n: u8,
    s: Vec<u8>,
    l: Vec<u8>,
    rg: Vec<(u8, u8)>,
    w: Vec<u8>,
    v: Vec<u8>,
    /// Collapsed path of photon A after step 2.
    a_path: usize,
    /// Collapsed paths of the joint photons after step 4.
    bob_paths: Vec<usize>,
}

/// Generalized CJRIO with M joint operators and N controllers over an
/// (M + N + 1)-photon hyperentangled channel. The base protocol is the
/// (M, N) = (2, 1) case.
pub fn run_cjrio_general(
    payload: &PathQubit,
    ops: &[SuOperator],
    n_controllers: usize,
    consent: bool,
    model: &HomodyneModel,
) -> Result<CjrioOutcome> {
    let m_parties = ops.len();
    if m_parties == 0 {
        return Err(Error::InvalidArgument(
            "at least one joint operator required".into(),
        ));
    }
    if m_parties + n_controllers + 1 > 7 {
        return Err(Error::TooManyQubits {
            requested: m_parties + n_controllers + 1,
            max: 7,
        });
    }
    for op in ops {
        if op.form() != SuForm::Unimodular {
            return Err(Error::InvalidArgument(
                "CJRIO operators must be unimodular (|u|^2 + |v|^2 = 1)".into(),
            ));
        }
    }
    let _ = model;
    // photon layout: X = 0, A = 1, Bobs 2..2+M, controllers follow
    let x = 0usize;
    let a = 1usize;
    let bob = |i: usize| 2 + i; // 0-indexed joint parties
    let ctrl = |j: usize| 2 + m_parties + j;
    let total_channel = 1 + m_parties + n_controllers;
    let mut labels: Vec<String> = vec!["X".into(), "A".into()];
    for i in 0..m_parties {
        labels.push(format!("B{}", i + 1));
    }
    for j in 0..n_controllers {
        labels.push(format!("C{}", j + 1));
    }
    let label_refs: Vec<&str> = labels.iter().map(|s| s.as_str()).collect();
    // channel terms: every channel photon on path 0, or every one on 1
    let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let nbits = 1 + total_channel;
    let all_ones = ((1usize << total_channel) - 1) << 1;
    let mut amps = vec![ZERO; 1 << nbits];
    for (xbit, coeff) in [(0usize, payload.alpha), (1usize, payload.beta)] {
        amps[xbit] += coeff * s;
        amps[all_ones | xbit] += coeff * s;
    }
    let reg = DualRailRegister::from_joint(&label_refs, amps)?;

    // Step 1: entangle X with the channel
    let mut step1 = Vec::new();
    {
        let mut work = reg.clone();
        work.begin_probe();
        work.cross_kerr(x, 0, 1)?;
        work.cross_kerr(a, 0, -1)?;
        for (class, _) in work.probe_classes()? {
            let mut branch = work.clone();
            let prob = branch.collapse_probe_class(class)?;
            step1.push((class as u8, prob, branch));
        }
    }
    // Step 2: disentangle X
    let mut branches: Vec<GenBranch> = Vec::new();
    for (k, p_k, reg_k) in step1 {
        let mut work = reg_k.clone();
        work.apply_path_op(x, &hadamard())?;
        work.apply_path_op(a, &hadamard())?;
        work.begin_probe();
        work.cross_kerr(x, 0, 1)?;
        work.cross_kerr(a, k as usize, 2)?;
        for (class, _) in work.probe_classes()? {
            let mut branch = work.clone();
            let prob = branch.collapse_probe_class(class)?;
            let (m, n) = ((class >> 1) as u8, (class & 1) as u8);
            branch.collapse_definite_path(x)?;
            let a_path = branch.collapse_definite_path(a)?;
            branches.push(GenBranch {
                prob: p_k * prob,
                reg: branch,
                k,
                m,
                n,
                s: vec![],
                l: vec![],
                rg: vec![],
                w: vec![],
                v: vec![],
                a_path,
                bob_paths: vec![usize::MAX; m_parties],
            });
        }
    }
    if !consent {
        return Ok(CjrioOutcome::HaltedNoConsent {
            entangle_branches: branches.len(),
        });
    }

    // Step 3: each controller detaches in turn
    for j in 0..n_controllers {
        let mut next = Vec::with_capacity(branches.len() * 2);
        for br in branches {
            let mut work = br.reg.clone();
            work.apply_path_op(ctrl(j), &hadamard())?;
            work.begin_probe();
            work.cross_kerr(ctrl(j), br.k as usize, 1)?;
            for (class, _) in work.probe_classes()? {
                let mut reg2 = work.clone();
                let prob = reg2.collapse_probe_class(class)?;
                reg2.collapse_definite_path(ctrl(j))?;
                let mut s_list = br.s.clone();
                s_list.push(class as u8);
                next.push(GenBranch {
                    prob: br.prob * prob,
                    reg: reg2,
                    s: s_list,
                    l: br.l.clone(),
                    rg: br.rg.clone(),
                    w: br.w.clone(),
                    v: br.v.clone(),
                    bob_paths: br.bob_paths.clone(),
                    ..br
                });
            }
        }
        branches = next;
    }

    // Step 4: Bobs 1..M-1 detach; Bob M corrects and applies his operator
    for i in 0..m_parties.saturating_sub(1) {
        let mut next = Vec::with_capacity(branches.len() * 2);
        for br in branches {
            let mut work = br.reg.clone();
            work.apply_path_op(bob(i), &hadamard())?;
            work.begin_probe();
            work.cross_kerr(bob(i), br.k as usize, 1)?;
            for (class, _) in work.probe_classes()? {
                let mut reg2 = work.clone();
                let prob = reg2.collapse_probe_class(class)?;
                let path = reg2.collapse_definite_path(bob(i))?;
                let mut l_list = br.l.clone();
                l_list.push(class as u8);
                let mut bob_paths = br.bob_paths.clone();
                bob_paths[i] = path;
                next.push(GenBranch {
                    prob: br.prob * prob,
                    reg: reg2,
                    l: l_list,
                    s: br.s.clone(),
                    rg: br.rg.clone(),
                    w: br.w.clone(),
                    v: br.v.clone(),
                    bob_paths,
                    ..br
                });
            }
        }
        branches = next;
    }
    let last = m_parties - 1;
    for br in branches.iter_mut() {
        // each detaching party contributes a sign (-1)^(1 + outcome + k);
        // the k terms cancel pairwise, so k enters only when the count of
        // detaching parties is even
        let parity = ((n_controllers + m_parties - 1) & 1) as u8;
        let mut e = (br.k & (1 ^ parity)) ^ br.m ^ br.n ^ parity;
        for sj in &br.s {
            e ^= sj;
        }
        for li in &br.l {
            e ^= li;
        }
        if br.k == 1 {
            br.reg.apply_path_op(bob(last), &pauli_x())?;
        }
        if e == 1 {
            br.reg.apply_path_op(bob(last), &pauli_z())?;
        }
        br.reg.apply_path_op(bob(last), &ops[last].matrix())?;
    }

    // Step 5: cascade the coefficients from Bob M down to Bob 1
    for i in (0..m_parties.saturating_sub(1)).rev() {
        let holder = bob(i + 1);
        let partner = bob(i);
        let mut next = Vec::with_capacity(branches.len() * 4);
        for br in branches {
            let c = br.bob_paths[i];
            let mut work = br.reg.clone();
            work.revive_path(partner)?;
            work.apply_path_op(partner, &hadamard())?;
            work.begin_probe();
            work.cross_kerr(partner, c, 1)?;
            work.cross_kerr(holder, 0, -1)?;
            for (class_r, _) in work.probe_classes()? {
                let mut reg_r = work.clone();
                let prob_r = reg_r.collapse_probe_class(class_r)?;
                let mut reg_g_base = reg_r.clone();
                reg_g_base.apply_path_op(holder, &hadamard())?;
                reg_g_base.begin_probe();
                reg_g_base.cross_kerr(holder, 1, 1)?;
                for (class_g, _) in reg_g_base.probe_classes()? {
                    let mut reg2 = reg_g_base.clone();
                    let prob_g = reg2.collapse_probe_class(class_g)?;
                    reg2.collapse_definite_path(holder)?;
                    let (r, g) = (class_r as u8, class_g as u8);
                    let cc = c as u8;
                    if (r ^ cc) == 1 {
                        reg2.apply_path_op(partner, &pauli_x())?;
                    }
                    if (g ^ cc) == 1 {
                        reg2.apply_path_op(partner, &pauli_z())?;
                    }
                    reg2.apply_path_op(partner, &ops[i].matrix())?;
                    let mut rg = br.rg.clone();
                    rg.push((r, g));
                    next.push(GenBranch {
                        prob: br.prob * prob_r * prob_g,
                        reg: reg2,
                        rg,
                        s: br.s.clone(),
                        l: br.l.clone(),
                        w: br.w.clone(),
                        v: br.v.clone(),
                        bob_paths: br.bob_paths.clone(),
                        ..br
                    });
                }
            }
        }
        branches = next;
    }

    // Steps 6-8: polarization endgame
    let pol_photons: Vec<usize> = (1..2 + m_parties + n_controllers).collect();
    let ghz_dim = 1usize << pol_photons.len();
    let mut ghz = vec![ZERO; ghz_dim];
    ghz[0] = s;
    ghz[ghz_dim - 1] = s;
    let mut final_branches = Vec::with_capacity(branches.len() * 8);
    for br in branches {
        let mut work = br.reg.clone();
        work.materialize_polarization(&pol_photons, &ghz)?;
        // Bob 1 chooses his basis: HWP on path 1, then the beam splitter
        work.apply_pol_op_on_path(bob(0), 1, &pauli_x())?;
        work.apply_path_op(bob(0), &hadamard())?;
        // enumerate Bob 1's four outcomes (p = polarization, q = path)
        for p_bit in 0..2usize {
            for q_bit in 0..2usize {
                let mut reg_b1 = work.clone();
                let pol_probs = reg_b1.pol_probabilities(bob(0))?;
                if pol_probs[p_bit] <= 1e-300 {
                    continue;
                }
                let prob_pol = reg_b1.collapse_pol(bob(0), p_bit)?;
                let path_probs = reg_b1.path_probabilities(bob(0))?;
                if path_probs[q_bit] <= 1e-300 {
                    continue;
                }
                let prob_path = reg_b1.collapse_path(bob(0), q_bit)?;
                // remaining Bobs and controllers measure diagonally
                let mut sub = vec![(
                    br.prob * prob_pol * prob_path,
                    reg_b1,
                    Vec::<u8>::new(),
                    Vec::<u8>::new(),
                )];
                for i in 1..m_parties {
                    let mut next_sub = Vec::with_capacity(sub.len() * 2);
                    for (prob, mut reg_s, w_list, v_list) in sub {
                        reg_s.apply_pol_op(bob(i), &hadamard())?;
                        for bit in 0..2usize {
                            let mut reg_w = reg_s.clone();
                            let probs = reg_w.pol_probabilities(bob(i))?;
                            if probs[bit] <= 1e-300 {
                                continue;
                            }
                            let pw = reg_w.collapse_pol(bob(i), bit)?;
                            let mut w2 = w_list.clone();
                            w2.push(bit as u8);
                            next_sub.push((prob * pw, reg_w, w2, v_list.clone()));
                        }
                    }
                    sub = next_sub;
                }
                for j in 0..n_controllers {
                    let mut next_sub = Vec::with_capacity(sub.len() * 2);
                    for (prob, mut reg_s, w_list, v_list) in sub {
                        reg_s.apply_pol_op(ctrl(j), &hadamard())?;
                        for bit in 0..2usize {
                            let mut reg_v = reg_s.clone();
                            let probs = reg_v.pol_probabilities(ctrl(j))?;
                            if probs[bit] <= 1e-300 {
                                continue;
                            }
                            let pv = reg_v.collapse_pol(ctrl(j), bit)?;
                            let mut v2 = v_list.clone();
                            v2.push(bit as u8);
                            next_sub.push((prob * pv, reg_v, w_list.clone(), v2));
                        }
                    }
                    sub = next_sub;
                }
                for (prob, mut reg_f, w_list, v_list) in sub {
                    // Alice's polarization correction Z^(q + sum w + sum v) X^p
                    if p_bit == 1 {
                        reg_f.apply_pol_op(a, &pauli_x())?;
                    }
                    let mut zexp = q_bit as u8;
                    for wv in w_list.iter().chain(&v_list) {
                        zexp ^= wv;
                    }
                    if zexp == 1 {
                        reg_f.apply_pol_op(a, &pauli_z())?;
                    }
                    // Step 9: back to the spatial rails
                    reg_f.pbs_merge_pol_into_path(a)?;
                    if br.a_path == 1 {
                        reg_f.apply_path_op(a, &pauli_x())?;
                    }
                    let (alpha, beta) = reg_f.extract_path_qubit(a)?;
                    let output = PathQubit { alpha, beta };
                    final_branches.push((
                        CjrioTranscript {
                            k: br.k,
                            m: br.m,
                            n: br.n,
                            s: br.s.clone(),
                            l: br.l.clone(),
                            rg: br.rg.clone(),
                            p: p_bit as u8,
                            q: q_bit as u8,
                            w: w_list,
                            v: v_list,
                        },
                        prob,
                        output,
                    ));
                }
            }
        }
    }
    // target = U_1 U_2 ... U_M applied to the payload
    let mut product = CMat::identity(2);
    for op in ops {
        product = product.mul(&op.matrix());
    }
    let target = payload.applied(&product);
    let branches = final_branches
        .into_iter()
        .map(|(transcript, probability, output)| CjrioBranch {
            fidelity: output.fidelity_with(&target),
            transcript,
            probability,
            output,
        })
        .collect();
    Ok(CjrioOutcome::Completed { target, branches })
}

/// Base protocol: two joint operators under one controller.
pub fn run_cjrio(
    payload: &PathQubit,
    op1: &SuOperator,
    op2: &SuOperator,
    consent: bool,
    model: &HomodyneModel,
) -> Result<CjrioOutcome> {
    run_cjrio_general(payload, &[*op1, *op2], 1, consent, model)
}

/// Joint RIO: the controller and her steps removed.
pub fn run_jrio(
    payload: &PathQubit,
    op1: &SuOperator,
    op2: &SuOperator,
    model: &HomodyneModel,
) -> Result<CjrioOutcome> {
    run_cjrio_general(payload, &[*op1, *op2], 0, true, model)
}

// ---------------------------------------------------------------------------
// Efficiency
// ---------------------------------------------------------------------------

/// Exact rational M / (5M + 3N + 2).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Efficiency {
    pub numer: u64,
    pub denom: u64,
}

impl Efficiency {
    pub fn value(&self) -> f64 {
        self.numer as f64 / self.denom as f64
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// eta(M, N) = M / (5M + 3N + 2) for M joint parties and N controllers.
pub fn efficiency(m: u64, n: u64) -> Result<Efficiency> {
    if m < 1 {
        return Err(Error::InvalidArgument(
            "efficiency needs at least one joint party".into(),
        ));
    }
    let numer = m;
    let denom = 5 * m + 3 * n + 2;
    let g = gcd(numer, denom);
    Ok(Efficiency {
        numer: numer / g,
        denom: denom / g,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SimRng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn sample_payload() -> PathQubit {
        PathQubit::new(c(0.6, 0.0), c(0.0, 0.8)).unwrap()
    }

    fn random_unimodular(rng: &mut SimRng) -> SuOperator {
        let t1 = rng.uniform() * std::f64::consts::TAU;
        let t2 = rng.uniform() * std::f64::consts::TAU;
        let r = rng.uniform();
        let u = C64::from_polar(r.sqrt(), t1);
        let v = C64::from_polar((1.0 - r).sqrt(), t2);
        SuOperator::unimodular(u, v).unwrap()
    }

    fn random_lump(rng: &mut SimRng) -> SuOperator {
        let t1 = rng.uniform() * std::f64::consts::TAU;
        let t2 = rng.uniform() * std::f64::consts::TAU;
        SuOperator::lump(C64::from_polar(1.0, t1), C64::from_polar(1.0, t2)).unwrap()
    }

    #[test]
    fn su_operator_forms_are_unitary() {
        let mut rng = SimRng::seed_from_u64(3);
        for _ in 0..10 {
            assert!(random_unimodular(&mut rng).matrix().is_unitary(1e-10));
            let lump = random_lump(&mut rng);
            assert!(lump.matrix().is_unitary(1e-10));
            assert!(lump.sub_diagonal().is_unitary(1e-10));
            assert!(lump.sub_antidiagonal().is_unitary(1e-10));
        }
    }

    #[test]
    fn riho_all_branches_hit_target_on_every_channel() {
        let mut rng = SimRng::seed_from_u64(11);
        let model = HomodyneModel::ideal();
        for channel in RioChannel::all() {
            let op = random_lump(&mut rng);
            let branches = run_riho(&sample_payload(), channel, &op, &model).unwrap();
            assert_eq!(branches.len(), 16, "{}", channel.name());
            let mut total = 0.0;
            for br in &branches {
                assert!(
                    br.fidelity > 1.0 - 1e-10,
                    "{} k={} m={} p={} q={}: {}",
                    channel.name(),
                    br.k,
                    br.m,
                    br.p,
                    br.q,
                    br.fidelity
                );
                total += br.probability;
            }
            assert!((total - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn riho_diagonal_branch_is_z_rotation() {
        // u = e^{-i t}, branch m = 0 outputs U_0 psi
        let model = HomodyneModel::ideal();
        let op = SuOperator::lump(C64::from_polar(1.0, -0.7), C64::from_polar(1.0, 0.3)).unwrap();
        let payload = sample_payload();
        let branches = run_riho(&payload, RioChannel::OmegaPlus, &op, &model).unwrap();
        let expect = payload.applied(&op.sub_diagonal());
        for br in branches.iter().filter(|b| b.m == 0) {
            assert!(br.output.fidelity_with(&expect) > 1.0 - 1e-10);
        }
    }

    #[test]
    fn riho_basis_payload_diagonal_keeps_it() {
        let model = HomodyneModel::ideal();
        let op = SuOperator::lump(C64::from_polar(1.0, 1.1), C64::from_polar(1.0, 0.0)).unwrap();
        let zero = PathQubit::new(c(1.0, 0.0), ZERO).unwrap();
        let branches = run_riho(&zero, RioChannel::OmegaPlus, &op, &model).unwrap();
        for br in branches.iter().filter(|b| b.m == 0) {
            assert!(br.output.fidelity_with(&zero) > 1.0 - 1e-10);
        }
    }

    #[test]
    fn riho_rejects_unimodular_form() {
        let mut rng = SimRng::seed_from_u64(4);
        let op = random_unimodular(&mut rng);
        let err = run_riho(
            &sample_payload(),
            RioChannel::OmegaPlus,
            &op,
            &HomodyneModel::ideal(),
        );
        assert!(err.is_err());
    }

    #[test]
    fn ripuo_diagonal_and_antidiagonal() {
        let model = HomodyneModel::ideal();
        let payload = sample_payload();
        let u0 = CMat::two(
            C64::from_polar(1.0, 0.4),
            ZERO,
            ZERO,
            C64::from_polar(1.0, -0.4),
        );
        let u1 = CMat::two(
            ZERO,
            C64::from_polar(1.0, 0.9),
            -C64::from_polar(1.0, -0.9),
            ZERO,
        );
        for (op, channel) in [
            (&u0, RioChannel::OmegaPlus),
            (&u1, RioChannel::OmegaPlus),
            (&u0, RioChannel::PiMinus),
            (&u1, RioChannel::OmegaMinus),
            (&u1, RioChannel::PiPlus),
        ] {
            let branches = run_ripuo(&payload, channel, op, &model).unwrap();
            assert_eq!(branches.len(), 8);
            for br in &branches {
                assert!(
                    br.fidelity > 1.0 - 1e-10,
                    "{} k={} p={} q={}: {}",
                    channel.name(),
                    br.k,
                    br.p,
                    br.q,
                    br.fidelity
                );
            }
        }
    }

    #[test]
    fn ripuo_identity_passthrough() {
        let model = HomodyneModel::ideal();
        let payload = sample_payload();
        let branches =
            run_ripuo(&payload, RioChannel::OmegaPlus, &CMat::identity(2), &model).unwrap();
        for br in &branches {
            assert!(br.output.fidelity_with(&payload) > 1.0 - 1e-10);
        }
    }

    #[test]
    fn ripuo_rejects_general_operator() {
        let err = run_ripuo(
            &sample_payload(),
            RioChannel::OmegaPlus,
            &hadamard(),
            &HomodyneModel::ideal(),
        );
        assert!(err.is_err());
    }

    #[test]
    fn cjrio_entangling_step_phase_tags() {
        // tagging x0 with +theta and a0 with -theta leaves exactly the
        // branch phases {0, +theta, -theta} on the joint state
        let payload = sample_payload();
        let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let mut amps = vec![ZERO; 8];
        amps[0b000] = payload.alpha * s; // x0 a0 b0
        amps[0b001] = payload.beta * s; // x1 a0 b0
        amps[0b110] = payload.alpha * s; // x0 a1 b1
        amps[0b111] = payload.beta * s; // x1 a1 b1
        let mut reg =
            crate::rio::register::DualRailRegister::from_joint(&["X", "A", "B"], amps).unwrap();
        reg.cross_kerr(0, 0, 1).unwrap();
        reg.cross_kerr(1, 0, -1).unwrap();
        let classes = reg.probe_classes().unwrap();
        assert_eq!(classes.len(), 2);
        assert_eq!(classes[0].0, 0);
        assert_eq!(classes[1].0, 1);
        assert!((classes[0].1 - 0.5).abs() < 1e-12);
        assert!((classes[1].1 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn cjrio_identity_operators_return_payload() {
        let id = SuOperator::unimodular(c(1.0, 0.0), ZERO).unwrap();
        let payload = sample_payload();
        match run_cjrio(&payload, &id, &id, true, &HomodyneModel::ideal()).unwrap() {
            CjrioOutcome::Completed { branches, .. } => {
                assert_eq!(branches.len(), 2048);
                for br in &branches {
                    assert!(
                        br.output.fidelity_with(&payload) > 1.0 - 1e-10,
                        "{}: {}",
                        br.transcript.bits(),
                        br.fidelity
                    );
                }
            }
            _ => panic!("expected completion"),
        }
    }

    #[test]
    fn cjrio_random_pair_exhaustive() {
        let mut rng = SimRng::seed_from_u64(17);
        let payload = sample_payload();
        let op1 = random_unimodular(&mut rng);
        let op2 = random_unimodular(&mut rng);
        match run_cjrio(&payload, &op1, &op2, true, &HomodyneModel::ideal()).unwrap() {
            CjrioOutcome::Completed { branches, .. } => {
                let mut total = 0.0;
                for br in &branches {
                    assert!(br.fidelity > 1.0 - 1e-10, "{}", br.transcript.bits());
                    total += br.probability;
                }
                assert!((total - 1.0).abs() < 1e-9);
            }
            _ => panic!("expected completion"),
        }
    }

    #[test]
    fn cjrio_no_consent_halts() {
        let id = SuOperator::unimodular(c(1.0, 0.0), ZERO).unwrap();
        match run_cjrio(&sample_payload(), &id, &id, false, &HomodyneModel::ideal()).unwrap() {
            CjrioOutcome::HaltedNoConsent { entangle_branches } => {
                assert_eq!(entangle_branches, 8);
            }
            _ => panic!("withheld consent must halt"),
        }
    }

    #[test]
    fn jrio_reduction_matches_cjrio_targets() {
        let mut rng = SimRng::seed_from_u64(23);
        let payload = sample_payload();
        let op1 = random_unimodular(&mut rng);
        let op2 = random_unimodular(&mut rng);
        let model = HomodyneModel::ideal();
        let jrio_target = match run_jrio(&payload, &op1, &op2, &model).unwrap() {
            CjrioOutcome::Completed { target, branches } => {
                for br in &branches {
                    assert!(br.fidelity > 1.0 - 1e-10);
                }
                target
            }
            _ => panic!(),
        };
        match run_cjrio(&payload, &op1, &op2, true, &model).unwrap() {
            CjrioOutcome::Completed { target, branches } => {
                assert!(target.fidelity_with(&jrio_target) > 1.0 - 1e-10);
                for br in &branches {
                    assert!(br.output.fidelity_with(&jrio_target) > 1.0 - 1e-10);
                }
            }
            _ => panic!(),
        }
    }

    #[test]
    fn cjrio_generalized_three_parties_two_controllers() {
        let mut rng = SimRng::seed_from_u64(29);
        let payload = sample_payload();
        let ops = [
            random_unimodular(&mut rng),
            random_unimodular(&mut rng),
            random_unimodular(&mut rng),
        ];
        match run_cjrio_general(&payload, &ops, 2, true, &HomodyneModel::ideal()).unwrap() {
            CjrioOutcome::Completed { branches, .. } => {
                let mut total = 0.0;
                for br in &branches {
                    assert!(br.fidelity > 1.0 - 1e-10, "{}", br.transcript.bits());
                    total += br.probability;
                }
                assert!((total - 1.0).abs() < 1e-8);
            }
            _ => panic!(),
        }
    }

    #[test]
    fn cjrio_rejects_oversized_configuration() {
        let id = SuOperator::unimodular(c(1.0, 0.0), ZERO).unwrap();
        let ops = vec![id; 5];
        let err = run_cjrio_general(&sample_payload(), &ops, 3, true, &HomodyneModel::ideal());
        assert!(matches!(err, Err(Error::TooManyQubits { .. })));
    }

    #[test]
    fn efficiency_reference_points() {
        assert_eq!(
            efficiency(1, 1).unwrap(),
            Efficiency {
                numer: 1,
                denom: 10
            }
        );
        assert_eq!(efficiency(1, 0).unwrap(), Efficiency { numer: 1, denom: 7 });
        assert_eq!(
            efficiency(2, 1).unwrap(),
            Efficiency {
                numer: 2,
                denom: 15
            }
        );
        assert!((efficiency(200, 0).unwrap().value() - 0.2).abs() < 1e-3);
        assert!(efficiency(0, 1).is_err());
        // single joint party: eta = 1 / (3N + 7)
        for n in 0..5 {
            let eta = efficiency(1, n).unwrap();
            assert_eq!(eta.denom, 3 * n + 7);
        }
    }
}
