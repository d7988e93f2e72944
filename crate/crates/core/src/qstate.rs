//! Dense n-qubit pure and mixed states: tensor products, unitary
//! application, projective measurement in arbitrary bases, partial trace,
//! fidelity and Pauli-basis tomography.
//!
//! Qubit ordering is big-endian throughout: qubit 0 is the leftmost symbol
//! of a ket string and the most significant bit of an amplitude index. All
//! emitted bit strings follow the same order.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64, ONE, ZERO};
use crate::rng::SimRng;

/// Numerical tolerance on state invariants (norm, trace, hermiticity).
pub const NORM_TOL: f64 = 1e-10;
/// Unitarity rejection threshold for user-supplied matrices.
pub const UNITARY_TOL: f64 = 1e-8;
/// Dense simulation cap; every protocol here fits well below it.
pub const MAX_QUBITS: usize = 20;

fn check_qubit_count(n: usize) -> Result<()> {
    if n > MAX_QUBITS {
        return Err(Error::TooManyQubits {
            requested: n,
            max: MAX_QUBITS,
        });
    }
    Ok(())
}

fn check_targets(num_qubits: usize, targets: &[usize]) -> Result<()> {
    for (i, &t) in targets.iter().enumerate() {
        if t >= num_qubits {
            return Err(Error::QubitOutOfRange {
                index: t,
                num_qubits,
            });
        }
        if targets[i + 1..].contains(&t) {
            return Err(Error::DuplicateTarget(t));
        }
    }
    Ok(())
}

/// Bit of qubit `q` in basis index `i` of an `n`-qubit register (big-endian).
#[inline]
pub fn qubit_bit(i: usize, q: usize, n: usize) -> usize {
    (i >> (n - 1 - q)) & 1
}

/// Big-endian ket label for basis index `i` of an `n`-qubit register.
pub fn basis_label(i: usize, n: usize) -> String {
    (0..n)
        .map(|q| if qubit_bit(i, q, n) == 1 { '1' } else { '0' })
        .collect()
}

// ---------------------------------------------------------------------------
// Pure states
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct PureState {
    num_qubits: usize,
    amps: Vec<C64>,
}

impl PureState {
    /// Build a state from explicit amplitudes, validating length and norm.
    pub fn new(num_qubits: usize, amps: Vec<C64>) -> Result<Self> {
        check_qubit_count(num_qubits)?;
        if amps.len() != 1 << num_qubits {
            return Err(Error::DimensionMismatch {
                expected: 1 << num_qubits,
                got: amps.len(),
            });
        }
        let state = PureState { num_qubits, amps };
        let norm = state.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!(
                "amplitude vector norm {norm} differs from 1 by more than {NORM_TOL:.0e}"
            )));
        }
        Ok(state)
    }

    pub(crate) fn from_raw_normalized(num_qubits: usize, mut amps: Vec<C64>) -> Self {
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        for a in amps.iter_mut() {
            *a /= norm;
        }
        PureState { num_qubits, amps }
    }

    /// |0...0> on `n` qubits. `n = 0` gives the scalar unit state, the
    /// identity of the tensor product.
    pub fn zero(n: usize) -> Result<Self> {
        check_qubit_count(n)?;
        let mut amps = vec![ZERO; 1 << n];
        amps[0] = ONE;
        Ok(PureState {
            num_qubits: n,
            amps,
        })
    }

    /// Computational basis state |index> on `n` qubits.
    pub fn basis(n: usize, index: usize) -> Result<Self> {
        check_qubit_count(n)?;
        if index >= 1 << n {
            return Err(Error::InvalidArgument(format!(
                "basis index {index} out of range for {n} qubits"
            )));
        }
        let mut amps = vec![ZERO; 1 << n];
        amps[index] = ONE;
        Ok(PureState {
            num_qubits: n,
            amps,
        })
    }

    /// Single qubit alpha|0> + beta|1>.
    pub fn single_qubit(alpha: C64, beta: C64) -> Result<Self> {
        PureState::new(1, vec![alpha, beta])
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Tensor product; `self` occupies the leftmost (most significant) ket
    /// positions.
    pub fn tensor(&self, other: &PureState) -> Result<PureState> {
        let n = self.num_qubits + other.num_qubits;
        check_qubit_count(n)?;
        let mut amps = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        Ok(PureState {
            num_qubits: n,
            amps,
        })
    }

    /// Apply a unitary on the ordered target qubits. The gate's own qubit
    /// order follows the target list (first target = gate's leftmost qubit).
    pub fn apply_unitary(&self, u: &CMat, targets: &[usize]) -> Result<PureState> {
        check_targets(self.num_qubits, targets)?;
        let k = targets.len();
        if u.dim() != 1 << k {
            return Err(Error::DimensionMismatch {
                expected: 1 << k,
                got: u.dim(),
            });
        }
        if !u.is_unitary(UNITARY_TOL) {
            return Err(Error::NonUnitary {
                max_dev: u.unitarity_defect(),
            });
        }
        Ok(self.apply_matrix_unchecked(u, targets))
    }

    /// Same embedding as `apply_unitary`, without the unitarity gate. Used
    /// internally for projectors and validated gates.
    pub(crate) fn apply_matrix_unchecked(&self, u: &CMat, targets: &[usize]) -> PureState {
        let n = self.num_qubits;
        let k = targets.len();
        let dim = self.dim();
        let shifts: Vec<usize> = targets.iter().map(|&t| n - 1 - t).collect();
        let target_mask: usize = shifts.iter().map(|s| 1usize << s).sum();
        let mut out = vec![ZERO; dim];
        let mut sub_in = vec![ZERO; 1 << k];
        for base in 0..dim {
            if base & target_mask != 0 {
                continue;
            }
            for g in 0..1 << k {
                let mut idx = base;
                for (j, s) in shifts.iter().enumerate() {
                    if (g >> (k - 1 - j)) & 1 == 1 {
                        idx |= 1 << s;
                    }
                }
                sub_in[g] = self.amps[idx];
            }
            for (r, _) in sub_in.iter().enumerate() {
                let mut acc = ZERO;
                for (cidx, amp) in sub_in.iter().enumerate() {
                    acc += u.get(r, cidx) * amp;
                }
                let mut idx = base;
                for (j, s) in shifts.iter().enumerate() {
                    if (r >> (k - 1 - j)) & 1 == 1 {
                        idx |= 1 << s;
                    }
                }
                out[idx] = acc;
            }
        }
        PureState {
            num_qubits: n,
            amps: out,
        }
    }

    pub fn to_density(&self) -> MixedState {
        let dim = self.dim();
        let mut mat = CMat::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                mat.set(i, j, self.amps[i] * self.amps[j].conj());
            }
        }
        MixedState {
            num_qubits: self.num_qubits,
            mat,
        }
    }

    /// |<self|other>|^2.
    pub fn fidelity_with(&self, other: &PureState) -> f64 {
        assert_eq!(self.dim(), other.dim());
        let ip: C64 = self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum();
        ip.norm_sqr()
    }
}

// ---------------------------------------------------------------------------
// Mixed states
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct MixedState {
    num_qubits: usize,
    mat: CMat,
}

impl MixedState {
    /// Build a density matrix, validating hermiticity, unit trace,
    /// positivity (eigenvalues >= -1e-10) and the purity range.
    pub fn new(num_qubits: usize, mat: CMat) -> Result<Self> {
        check_qubit_count(num_qubits)?;
        if mat.dim() != 1 << num_qubits {
            return Err(Error::DimensionMismatch {
                expected: 1 << num_qubits,
                got: mat.dim(),
            });
        }
        let state = MixedState { num_qubits, mat };
        state.check_invariants()?;
        Ok(state)
    }

    pub(crate) fn from_parts_unchecked(num_qubits: usize, mat: CMat) -> Self {
        MixedState { num_qubits, mat }
    }

    pub fn check_invariants(&self) -> Result<()> {
        let herm = self.mat.hermiticity_defect();
        if herm > NORM_TOL {
            return Err(Error::InvalidState(format!(
                "density matrix hermiticity defect {herm:.3e}"
            )));
        }
        let trace = self.mat.trace();
        if (trace.re - 1.0).abs() > NORM_TOL || trace.im.abs() > NORM_TOL {
            return Err(Error::InvalidState(format!(
                "density matrix trace {trace} differs from 1"
            )));
        }
        let (vals, _) = self.mat.hermitian_eigen();
        if vals[0] < -NORM_TOL {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {:.3e}",
                vals[0]
            )));
        }
        let purity = self.purity();
        let floor = 1.0 / (1 << self.num_qubits) as f64;
        if purity < floor - NORM_TOL || purity > 1.0 + NORM_TOL {
            return Err(Error::InvalidState(format!(
                "purity {purity} outside [{floor}, 1]"
            )));
        }
        Ok(())
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.mat.dim()
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    /// Maximally mixed state I / 2^n.
    pub fn maximally_mixed(n: usize) -> Result<Self> {
        check_qubit_count(n)?;
        let dim = 1usize << n;
        Ok(MixedState {
            num_qubits: n,
            mat: CMat::identity(dim).scale(C64::new(1.0 / dim as f64, 0.0)),
        })
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    pub fn purity(&self) -> f64 {
        self.mat.mul(&self.mat).trace().re
    }

    pub fn tensor(&self, other: &MixedState) -> Result<MixedState> {
        let n = self.num_qubits + other.num_qubits;
        check_qubit_count(n)?;
        Ok(MixedState {
            num_qubits: n,
            mat: self.mat.kron(&other.mat),
        })
    }

    pub fn apply_unitary(&self, u: &CMat, targets: &[usize]) -> Result<MixedState> {
        check_targets(self.num_qubits, targets)?;
        if u.dim() != 1 << targets.len() {
            return Err(Error::DimensionMismatch {
                expected: 1 << targets.len(),
                got: u.dim(),
            });
        }
        if !u.is_unitary(UNITARY_TOL) {
            return Err(Error::NonUnitary {
                max_dev: u.unitarity_defect(),
            });
        }
        Ok(self.conjugate_unchecked(u, targets))
    }

    /// rho -> A rho A\u{2020} with `a` embedded on the target qubits. No
    /// unitarity requirement; Kraus operators and projectors go through here.
    pub(crate) fn conjugate_unchecked(&self, a: &CMat, targets: &[usize]) -> MixedState {
        let n = self.num_qubits;
        let dim = self.dim();
        // Apply to column index (rho A\u{2020}) by treating rows of rho as
        // bra vectors, then to row index (A rho).
        let mut rows_done = CMat::zeros(dim);
        // A rho: transform row blocks
        let k = targets.len();
        let shifts: Vec<usize> = targets.iter().map(|&t| n - 1 - t).collect();
        let target_mask: usize = shifts.iter().map(|s| 1usize << s).sum();
        let gather = |base: usize, g: usize| {
            let mut idx = base;
            for (j, s) in shifts.iter().enumerate() {
                if (g >> (k - 1 - j)) & 1 == 1 {
                    idx |= 1 << s;
                }
            }
            idx
        };
        for col in 0..dim {
            for base in 0..dim {
                if base & target_mask != 0 {
                    continue;
                }
                let mut sub = vec![ZERO; 1 << k];
                for (g, slot) in sub.iter_mut().enumerate() {
                    *slot = self.mat.get(gather(base, g), col);
                }
                for r in 0..1 << k {
                    let mut acc = ZERO;
                    for (g, amp) in sub.iter().enumerate() {
                        acc += a.get(r, g) * amp;
                    }
                    rows_done.set(gather(base, r), col, acc);
                }
            }
        }
        let mut out = CMat::zeros(dim);
        for row in 0..dim {
            for base in 0..dim {
                if base & target_mask != 0 {
                    continue;
                }
                let mut sub = vec![ZERO; 1 << k];
                for (g, slot) in sub.iter_mut().enumerate() {
                    *slot = rows_done.get(row, gather(base, g));
                }
                for r in 0..1 << k {
                    let mut acc = ZERO;
                    for (g, amp) in sub.iter().enumerate() {
                        acc += a.get(r, g).conj() * amp;
                    }
                    out.set(row, gather(base, r), acc);
                }
            }
        }
        MixedState {
            num_qubits: n,
            mat: out,
        }
    }

    pub(crate) fn add_weighted(&mut self, other: &MixedState, w: f64) {
        self.mat = self.mat.add(&other.mat.scale(C64::new(w, 0.0)));
    }

    pub(crate) fn renormalize_trace(&mut self) {
        let t = self.mat.trace().re;
        self.mat = self.mat.scale(C64::new(1.0 / t, 0.0));
    }
}

/// Reduced density matrix of a pure state over the kept qubits (ascending
/// original order), without materializing the full density matrix.
pub fn reduced_density(state: &PureState, keep: &[usize]) -> Result<MixedState> {
    if keep.is_empty() {
        return Err(Error::InvalidArgument(
            "reduction must keep at least one qubit".into(),
        ));
    }
    check_targets(state.num_qubits(), keep)?;
    let n = state.num_qubits();
    let mut keep_sorted = keep.to_vec();
    keep_sorted.sort_unstable();
    let kk = keep_sorted.len();
    let dim_keep = 1usize << kk;
    let traced: Vec<usize> = (0..n).filter(|q| !keep_sorted.contains(q)).collect();
    let spread_keep: Vec<usize> = (0..dim_keep)
        .map(|a| {
            keep_sorted
                .iter()
                .enumerate()
                .fold(0usize, |acc, (pos, &q)| {
                    acc | (((a >> (kk - 1 - pos)) & 1) << (n - 1 - q))
                })
        })
        .collect();
    let mut out = CMat::zeros(dim_keep);
    let mut block = vec![ZERO; dim_keep];
    for e in 0..1usize << traced.len() {
        let env = traced.iter().enumerate().fold(0usize, |acc, (pos, &q)| {
            acc | (((e >> (traced.len() - 1 - pos)) & 1) << (n - 1 - q))
        });
        for (a, slot) in block.iter_mut().enumerate() {
            *slot = state.amps()[env | spread_keep[a]];
        }
        for a in 0..dim_keep {
            if block[a] == ZERO {
                continue;
            }
            for b in 0..dim_keep {
                out.set(a, b, out.get(a, b) + block[a] * block[b].conj());
            }
        }
    }
    Ok(MixedState {
        num_qubits: kk,
        mat: out,
    })
}

/// Partial trace keeping the listed qubits (result in ascending original
/// order). Tracing out nothing returns the input.
pub fn partial_trace(rho: &MixedState, keep: &[usize]) -> Result<MixedState> {
    if keep.is_empty() {
        return Err(Error::InvalidArgument(
            "partial trace must keep at least one qubit".into(),
        ));
    }
    check_targets(rho.num_qubits(), keep)?;
    let n = rho.num_qubits();
    let mut keep_sorted = keep.to_vec();
    keep_sorted.sort_unstable();
    let traced: Vec<usize> = (0..n).filter(|q| !keep_sorted.contains(q)).collect();
    let kk = keep_sorted.len();
    let kt = traced.len();
    let assemble = |kept_bits: usize, traced_bits: usize| -> usize {
        let mut idx = 0usize;
        for (j, &q) in keep_sorted.iter().enumerate() {
            if (kept_bits >> (kk - 1 - j)) & 1 == 1 {
                idx |= 1 << (n - 1 - q);
            }
        }
        for (j, &q) in traced.iter().enumerate() {
            if (traced_bits >> (kt.max(1) - 1 - j)) & 1 == 1 {
                idx |= 1 << (n - 1 - q);
            }
        }
        idx
    };
    let dim_out = 1usize << kk;
    let mut out = CMat::zeros(dim_out);
    for a in 0..dim_out {
        for b in 0..dim_out {
            let mut acc = ZERO;
            for e in 0..1usize << kt {
                acc += rho.matrix().get(assemble(a, e), assemble(b, e));
            }
            out.set(a, b, acc);
        }
    }
    Ok(MixedState {
        num_qubits: kk,
        mat: out,
    })
}

/// Uhlmann fidelity F(sigma, rho) = Tr[sqrt(sqrt(sigma) rho sqrt(sigma))]^2.
///
/// When either argument is (numerically) pure the exact reduction
/// F = <psi|rho|psi> is used; it avoids the sqrt amplification of round-off
/// in the rank-deficient inner matrix.
pub fn fidelity(sigma: &MixedState, rho: &MixedState) -> Result<f64> {
    if sigma.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: sigma.dim(),
            got: rho.dim(),
        });
    }
    if sigma.purity() > 1.0 - 1e-9 {
        return Ok(pure_overlap(sigma, rho));
    }
    if rho.purity() > 1.0 - 1e-9 {
        return Ok(pure_overlap(rho, sigma));
    }
    let s = sigma.matrix().hermitian_sqrt(1e-12);
    let inner = s.mul(rho.matrix()).mul(&s);
    let (vals, _) = inner.hermitian_eigen();
    let cut = 1e-13 * vals.last().copied().unwrap_or(0.0).max(0.0);
    let sum: f64 = vals
        .iter()
        .map(|&v| if v > cut { v.sqrt() } else { 0.0 })
        .sum();
    Ok((sum * sum).min(1.0 + 1e-9))
}

fn pure_overlap(pure: &MixedState, other: &MixedState) -> f64 {
    let (_, vecs) = pure.matrix().hermitian_eigen();
    let dim = pure.dim();
    let psi: Vec<C64> = (0..dim).map(|i| vecs.get(i, dim - 1)).collect();
    let mut acc = ZERO;
    for i in 0..dim {
        for j in 0..dim {
            acc += psi[i].conj() * other.matrix().get(i, j) * psi[j];
        }
    }
    acc.re.clamp(0.0, 1.0 + 1e-9)
}

// ---------------------------------------------------------------------------
// Measurement
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BasisLabel {
    Computational,
    Diagonal,
    Bell,
    Custom,
}

/// Orthonormal measurement basis on a k-qubit subspace.
#[derive(Clone, Debug)]
pub struct MeasurementBasis {
    label: BasisLabel,
    vectors: Vec<Vec<C64>>,
    k: usize,
}

impl MeasurementBasis {
    pub fn computational(k: usize) -> Self {
        let dim = 1 << k;
        let vectors = (0..dim)
            .map(|i| {
                let mut v = vec![ZERO; dim];
                v[i] = ONE;
                v
            })
            .collect();
        MeasurementBasis {
            label: BasisLabel::Computational,
            vectors,
            k,
        }
    }

    /// Tensor powers of |+>, |->; outcome bit 0 maps to +.
    pub fn diagonal(k: usize) -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let plus = [C64::new(s, 0.0), C64::new(s, 0.0)];
        let minus = [C64::new(s, 0.0), C64::new(-s, 0.0)];
        let dim = 1usize << k;
        let mut vectors = Vec::with_capacity(dim);
        for i in 0..dim {
            let mut v = vec![ONE; 1];
            for q in 0..k {
                let single = if qubit_bit(i, q, k) == 0 { plus } else { minus };
                let mut next = Vec::with_capacity(v.len() * 2);
                for a in &v {
                    next.push(a * single[0]);
                    next.push(a * single[1]);
                }
                v = next;
            }
            vectors.push(v);
        }
        MeasurementBasis {
            label: BasisLabel::Diagonal,
            vectors,
            k,
        }
    }

    /// Bell basis ordered so the outcome bit strings match a reverse-EPR
    /// readout: 00 = phi+, 01 = psi+, 10 = phi-, 11 = psi-.
    pub fn bell() -> Self {
        let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let m = -s;
        let vectors = vec![
            vec![s, ZERO, ZERO, s],
            vec![ZERO, s, s, ZERO],
            vec![s, ZERO, ZERO, m],
            vec![ZERO, s, m, ZERO],
        ];
        MeasurementBasis {
            label: BasisLabel::Bell,
            vectors,
            k: 2,
        }
    }

    /// Custom orthonormal basis; validated for orthonormality and
    /// completeness on the measured subspace.
    pub fn custom(vectors: Vec<Vec<C64>>) -> Result<Self> {
        let dim = vectors.len();
        if dim == 0 || !dim.is_power_of_two() {
            return Err(Error::InvalidBasis(format!(
                "{dim} projectors cannot span a qubit subspace"
            )));
        }
        let k = dim.trailing_zeros() as usize;
        for v in &vectors {
            if v.len() != dim {
                return Err(Error::InvalidBasis(format!(
                    "projector length {} does not match dimension {dim}",
                    v.len()
                )));
            }
        }
        let basis = MeasurementBasis {
            label: BasisLabel::Custom,
            vectors,
            k,
        };
        basis.check()?;
        Ok(basis)
    }

    /// Pairwise orthonormality and completeness (both within 1e-10).
    pub fn check(&self) -> Result<()> {
        let dim = self.vectors.len();
        for i in 0..dim {
            for j in 0..dim {
                let ip: C64 = self.vectors[i]
                    .iter()
                    .zip(&self.vectors[j])
                    .map(|(a, b)| a.conj() * b)
                    .sum();
                let expect = if i == j { ONE } else { ZERO };
                if (ip - expect).norm() > NORM_TOL {
                    return Err(Error::InvalidBasis(format!(
                        "<v{i}|v{j}> = {ip} violates orthonormality"
                    )));
                }
            }
        }
        let mut sum = CMat::zeros(dim);
        for v in &self.vectors {
            for a in 0..dim {
                for b in 0..dim {
                    sum.set(a, b, sum.get(a, b) + v[a] * v[b].conj());
                }
            }
        }
        if sum.sub(&CMat::identity(dim)).max_abs() > NORM_TOL {
            return Err(Error::InvalidBasis("completeness relation violated".into()));
        }
        Ok(())
    }

    pub fn label(&self) -> BasisLabel {
        self.label
    }

    pub fn num_outcomes(&self) -> usize {
        self.vectors.len()
    }

    pub fn subspace_qubits(&self) -> usize {
        self.k
    }

    pub fn vector(&self, outcome: usize) -> &[C64] {
        &self.vectors[outcome]
    }

    pub fn outcome_bits(&self, outcome: usize) -> String {
        basis_label(outcome, self.k)
    }
}

#[derive(Clone, Debug)]
pub struct MeasurementBranch {
    pub outcome: usize,
    pub bits: String,
    pub probability: f64,
    pub state: PureState,
}

/// Shot-count histogram keyed by big-endian outcome bit strings.
#[derive(Clone, Debug, Default)]
pub struct ShotHistogram {
    shots: u64,
    counts: BTreeMap<String, u64>,
}

impl ShotHistogram {
    pub fn new(shots: u64, counts: BTreeMap<String, u64>) -> Result<Self> {
        let total: u64 = counts.values().sum();
        if total != shots {
            return Err(Error::InvalidArgument(format!(
                "histogram counts sum to {total}, expected {shots} shots"
            )));
        }
        Ok(ShotHistogram { shots, counts })
    }

    pub fn shots(&self) -> u64 {
        self.shots
    }

    pub fn counts(&self) -> &BTreeMap<String, u64> {
        &self.counts
    }

    pub fn count(&self, key: &str) -> u64 {
        self.counts.get(key).copied().unwrap_or(0)
    }

    pub(crate) fn record(&mut self, key: String) {
        *self.counts.entry(key).or_insert(0) += 1;
        self.shots += 1;
    }
}

fn branch_projection(
    state: &PureState,
    basis: &MeasurementBasis,
    targets: &[usize],
    outcome: usize,
) -> (f64, Vec<C64>) {
    let n = state.num_qubits();
    let k = targets.len();
    let dim = state.dim();
    let shifts: Vec<usize> = targets.iter().map(|&t| n - 1 - t).collect();
    let target_mask: usize = shifts.iter().map(|s| 1usize << s).sum();
    let v = basis.vector(outcome);
    let mut out = vec![ZERO; dim];
    let mut prob = 0.0;
    for base in 0..dim {
        if base & target_mask != 0 {
            continue;
        }
        let mut inner = ZERO;
        for (g, vg) in v.iter().enumerate() {
            let mut idx = base;
            for (j, s) in shifts.iter().enumerate() {
                if (g >> (k - 1 - j)) & 1 == 1 {
                    idx |= 1 << s;
                }
            }
            inner += vg.conj() * state.amps()[idx];
        }
        prob += inner.norm_sqr();
        if inner != ZERO {
            for (g, vg) in v.iter().enumerate() {
                let mut idx = base;
                for (j, s) in shifts.iter().enumerate() {
                    if (g >> (k - 1 - j)) & 1 == 1 {
                        idx |= 1 << s;
                    }
                }
                out[idx] = inner * vg;
            }
        }
    }
    (prob, out)
}

/// Analytic measurement: every outcome with its Born probability and the
/// renormalized post-measurement state.
pub fn measure_analytic(
    state: &PureState,
    basis: &MeasurementBasis,
    targets: &[usize],
) -> Result<Vec<MeasurementBranch>> {
    check_targets(state.num_qubits(), targets)?;
    if basis.subspace_qubits() != targets.len() {
        return Err(Error::InvalidBasis(format!(
            "basis spans {} qubits but {} targets were given",
            basis.subspace_qubits(),
            targets.len()
        )));
    }
    basis.check()?;
    let mut branches = Vec::with_capacity(basis.num_outcomes());
    for outcome in 0..basis.num_outcomes() {
        let (prob, amps) = branch_projection(state, basis, targets, outcome);
        let collapsed = if prob > 1e-300 {
            PureState::from_raw_normalized(state.num_qubits(), amps)
        } else {
            state.clone()
        };
        branches.push(MeasurementBranch {
            outcome,
            bits: basis.outcome_bits(outcome),
            probability: prob,
            state: collapsed,
        });
    }
    Ok(branches)
}

/// Collapse onto one forced outcome; zero-probability branches are rejected.
pub fn collapse_branch(
    state: &PureState,
    basis: &MeasurementBasis,
    targets: &[usize],
    outcome: usize,
) -> Result<(f64, PureState)> {
    check_targets(state.num_qubits(), targets)?;
    let (prob, amps) = branch_projection(state, basis, targets, outcome);
    if prob <= 1e-300 {
        return Err(Error::ImpossibleBranch);
    }
    Ok((
        prob,
        PureState::from_raw_normalized(state.num_qubits(), amps),
    ))
}

/// Sampled measurement: draws `shots` outcomes by inverse CDF over the
/// analytic distribution. Returns the histogram plus the collapsed state of
/// the first drawn shot (the designated record).
pub fn measure_sampled(
    state: &PureState,
    basis: &MeasurementBasis,
    targets: &[usize],
    shots: u64,
    rng: &mut SimRng,
) -> Result<(ShotHistogram, PureState)> {
    if shots == 0 {
        return Err(Error::InvalidArgument("shots must be positive".into()));
    }
    let branches = measure_analytic(state, basis, targets)?;
    let weights: Vec<f64> = branches.iter().map(|b| b.probability).collect();
    let mut hist = ShotHistogram::default();
    let mut designated = None;
    for _ in 0..shots {
        let i = rng.sample_index(&weights);
        hist.record(branches[i].bits.clone());
        if designated.is_none() {
            designated = Some(branches[i].state.clone());
        }
    }
    Ok((hist, designated.unwrap()))
}

// ---------------------------------------------------------------------------
// Pauli tomography
// ---------------------------------------------------------------------------

fn pauli_matrix(c: char) -> CMat {
    let i = C64::new(0.0, 1.0);
    match c {
        'I' => CMat::identity(2),
        'X' => CMat::two(ZERO, ONE, ONE, ZERO),
        'Y' => CMat::two(ZERO, -i, i, ZERO),
        'Z' => CMat::two(ONE, ZERO, ZERO, -ONE),
        _ => unreachable!(),
    }
}

fn pauli_string_matrix(s: &str) -> Result<CMat> {
    let mut out = CMat::identity(1);
    for c in s.chars() {
        if !"IXYZ".contains(c) {
            return Err(Error::InvalidArgument(format!(
                "invalid Pauli letter '{c}' in \"{s}\""
            )));
        }
        out = out.kron(&pauli_matrix(c));
    }
    Ok(out)
}

/// All 4^n Pauli strings for n qubits, lexicographic in (I, X, Y, Z).
pub fn pauli_strings(n: usize) -> Vec<String> {
    let letters = ['I', 'X', 'Y', 'Z'];
    let mut out = vec![String::new()];
    for _ in 0..n {
        let mut next = Vec::with_capacity(out.len() * 4);
        for prefix in &out {
            for l in letters {
                let mut s = prefix.clone();
                s.push(l);
                next.push(s);
            }
        }
        out = next;
    }
    out
}

/// tr(sigma_s rho) for every n-letter Pauli string.
pub fn pauli_expectations(rho: &MixedState) -> BTreeMap<String, f64> {
    let n = rho.num_qubits();
    let mut out = BTreeMap::new();
    for s in pauli_strings(n) {
        let op = pauli_string_matrix(&s).expect("generated strings are valid");
        let val = op.mul(rho.matrix()).trace().re;
        out.insert(s, val);
    }
    out
}

/// rho = sum_s <sigma_s> sigma_s / 2^n, followed by hermitian clean-up and
/// eigenvalue clamping of values in [-1e-12, 0).
pub fn tomography_reconstruct(
    num_qubits: usize,
    expectations: &BTreeMap<String, f64>,
) -> Result<MixedState> {
    check_qubit_count(num_qubits)?;
    let want = pauli_strings(num_qubits);
    for s in &want {
        if !expectations.contains_key(s) {
            return Err(Error::InvalidArgument(format!(
                "missing Pauli string \"{s}\" in expectation map"
            )));
        }
    }
    let identity_key = "I".repeat(num_qubits);
    let id_exp = expectations[&identity_key];
    if (id_exp - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidArgument(format!(
            "identity-string expectation {id_exp} differs from 1"
        )));
    }
    let dim = 1usize << num_qubits;
    let mut mat = CMat::zeros(dim);
    for s in &want {
        let op = pauli_string_matrix(s)?;
        mat = mat.add(&op.scale(C64::new(expectations[s] / dim as f64, 0.0)));
    }
    // clamp tiny negative eigenvalues introduced by round-off
    let (vals, vecs) = mat.hermitian_eigen();
    let mut clean = CMat::zeros(dim);
    for k in 0..dim {
        let lam = if vals[k] < 0.0 && vals[k] >= -1e-12 {
            0.0
        } else {
            vals[k]
        };
        if lam == 0.0 {
            continue;
        }
        for i in 0..dim {
            for j in 0..dim {
                let add = vecs.get(i, k) * vecs.get(j, k).conj() * C64::new(lam, 0.0);
                clean.set(i, j, clean.get(i, j) + add);
            }
        }
    }
    let trace = clean.trace().re;
    let clean = clean.scale(C64::new(1.0 / trace, 0.0));
    MixedState::new(num_qubits, clean)
}
