//! Dual-rail photonic register: each photon occupies two spatial paths and
//! optionally carries a polarization pair. The coherent probe is tracked
//! symbolically as an integer phase index per amplitude component; a
//! homodyne readout groups components into |n| classes (the +n and -n
//! probe states share a Gaussian and are indistinguishable).
//!
//! Photons whose path or polarization has collapsed are factored out of the
//! amplitude tensor, so the live dimension stays small through a protocol.

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64, ZERO};

const NORM_TOL: f64 = 1e-10;
/// Largest probe phase multiple the homodyne calculus supports.
pub const MAX_PHASE_INDEX: i32 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PathDof {
    Live,
    Collapsed(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PolDof {
    Absent,
    Live,
    /// 0 = H, 1 = V.
    Collapsed(usize),
}

#[derive(Clone, Debug)]
struct Photon {
    label: String,
    path: PathDof,
    pol: PolDof,
}

/// Joint amplitude tensor over all live rails plus one probe tag per
/// component. Internal indexing is little-endian: the path bit of the
/// i-th live-path photon is bit i; live polarization bits follow all path
/// bits in photon order.
#[derive(Clone, Debug)]
pub struct DualRailRegister {
    photons: Vec<Photon>,
    amps: Vec<C64>,
    tags: Vec<i32>,
}

impl DualRailRegister {
    /// Register of path-only photons in a joint state: amplitude index bit
    /// i is the path of photon i.
    pub fn from_joint(labels: &[&str], amps: Vec<C64>) -> Result<Self> {
        let n = labels.len();
        if amps.len() != 1 << n {
            return Err(Error::DimensionMismatch {
                expected: 1 << n,
                got: amps.len(),
            });
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!(
                "register norm^2 = {norm} differs from 1"
            )));
        }
        let photons = labels
            .iter()
            .map(|l| Photon {
                label: l.to_string(),
                path: PathDof::Live,
                pol: PolDof::Absent,
            })
            .collect();
        let tags = vec![0; amps.len()];
        Ok(DualRailRegister {
            photons,
            amps,
            tags,
        })
    }

    /// Product of single-photon path states (alpha on path 0, beta on 1).
    pub fn product(photons: &[(&str, C64, C64)]) -> Result<Self> {
        let mut amps = vec![C64::new(1.0, 0.0)];
        for (_, a, b) in photons {
            let mut next = Vec::with_capacity(amps.len() * 2);
            // little-endian: new photon's bit is the highest so far
            for bit in 0..2 {
                let coef = if bit == 0 { *a } else { *b };
                for prev in &amps {
                    next.push(prev * coef);
                }
            }
            // reorder so existing bits stay low: rebuild below instead
            amps = next;
        }
        // The loop above appended the new bit as the highest bit, which is
        // exactly the little-endian layout (photon i at bit i).
        let labels: Vec<&str> = photons.iter().map(|(l, _, _)| *l).collect();
        DualRailRegister::from_joint(&labels, amps)
    }

    pub fn num_photons(&self) -> usize {
        self.photons.len()
    }

    pub fn photon_index(&self, label: &str) -> Result<usize> {
        self.photons
            .iter()
            .position(|p| p.label == label)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown photon \"{label}\"")))
    }

    pub fn path_dof(&self, photon: usize) -> PathDof {
        self.photons[photon].path
    }

    pub fn pol_dof(&self, photon: usize) -> PolDof {
        self.photons[photon].pol
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    fn live_path_count(&self) -> usize {
        self.photons
            .iter()
            .filter(|p| p.path == PathDof::Live)
            .count()
    }

    fn path_shift(&self, photon: usize) -> Result<usize> {
        if self.photons[photon].path != PathDof::Live {
            return Err(Error::InvalidState(format!(
                "photon \"{}\" path already collapsed",
                self.photons[photon].label
            )));
        }
        Ok(self.photons[..photon]
            .iter()
            .filter(|p| p.path == PathDof::Live)
            .count())
    }

    fn pol_shift(&self, photon: usize) -> Result<usize> {
        if self.photons[photon].pol != PolDof::Live {
            return Err(Error::InvalidState(format!(
                "photon \"{}\" has no live polarization",
                self.photons[photon].label
            )));
        }
        let before = self.photons[..photon]
            .iter()
            .filter(|p| p.pol == PolDof::Live)
            .count();
        Ok(self.live_path_count() + before)
    }

    fn apply_two_level(&mut self, shift: usize, op: &CMat) {
        let dim = self.amps.len();
        for base in 0..dim {
            if (base >> shift) & 1 == 1 {
                continue;
            }
            let hi = base | (1 << shift);
            let a0 = self.amps[base];
            let a1 = self.amps[hi];
            self.amps[base] = op.get(0, 0) * a0 + op.get(0, 1) * a1;
            self.amps[hi] = op.get(1, 0) * a0 + op.get(1, 1) * a1;
        }
    }

    /// 2x2 operator on the photon's path pair.
    pub fn apply_path_op(&mut self, photon: usize, op: &CMat) -> Result<()> {
        let shift = self.path_shift(photon)?;
        self.apply_two_level(shift, op);
        Ok(())
    }

    /// Balanced-beam-splitter mixing of the photon's two paths
    /// (self-inverse Hadamard-type 2x2).
    pub fn bbs_mix(&mut self, photon: usize) -> Result<()> {
        self.apply_path_op(photon, &crate::circuits::hadamard())
    }

    /// 2x2 operator on the photon's polarization pair (H, V).
    pub fn apply_pol_op(&mut self, photon: usize, op: &CMat) -> Result<()> {
        let shift = self.pol_shift(photon)?;
        self.apply_two_level(shift, op);
        Ok(())
    }

    /// Polarization operator applied only on one spatial path (wave plate
    /// placed in that path).
    pub fn apply_pol_op_on_path(&mut self, photon: usize, path: usize, op: &CMat) -> Result<()> {
        if path > 1 {
            return Err(Error::InvalidArgument(format!(
                "photon path index must be 0 or 1, got {path}"
            )));
        }
        let pshift = self.path_shift(photon)?;
        let polshift = self.pol_shift(photon)?;
        let dim = self.amps.len();
        for base in 0..dim {
            if (base >> pshift) & 1 != path || (base >> polshift) & 1 == 1 {
                continue;
            }
            let hi = base | (1 << polshift);
            let a0 = self.amps[base];
            let a1 = self.amps[hi];
            self.amps[base] = op.get(0, 0) * a0 + op.get(0, 1) * a1;
            self.amps[hi] = op.get(1, 0) * a0 + op.get(1, 1) * a1;
        }
        Ok(())
    }

    // -----------------------------------------------------------------
    // Probe bookkeeping
    // -----------------------------------------------------------------

    /// Reset the probe tags; a fresh coherent state |z> is introduced.
    pub fn begin_probe(&mut self) {
        self.tags.iter_mut().for_each(|t| *t = 0);
    }

    /// Cross-Kerr interaction: add `n` to the probe phase index on every
    /// component where the photon occupies `path`.
    pub fn cross_kerr(&mut self, photon: usize, path: usize, n: i32) -> Result<()> {
        if path > 1 {
            return Err(Error::InvalidArgument(format!(
                "photon path index must be 0 or 1, got {path}"
            )));
        }
        match self.photons[photon].path {
            PathDof::Live => {
                let shift = self.path_shift(photon)?;
                for (i, tag) in self.tags.iter_mut().enumerate() {
                    if (i >> shift) & 1 == path {
                        *tag += n;
                    }
                }
            }
            PathDof::Collapsed(p) => {
                // definite path: either every component or none
                if p == path {
                    self.tags.iter_mut().for_each(|t| *t += n);
                }
            }
        }
        Ok(())
    }

    /// Homodyne classes present: (|n|, probability), ascending in |n|.
    /// +n and -n cannot be distinguished and merge into one class.
    pub fn probe_classes(&self) -> Result<Vec<(u32, f64)>> {
        let mut classes: Vec<(u32, f64)> = Vec::new();
        for (i, amp) in self.amps.iter().enumerate() {
            let w = amp.norm_sqr();
            if w < 1e-300 {
                continue;
            }
            let n = self.tags[i].unsigned_abs();
            if self.tags[i].abs() > MAX_PHASE_INDEX {
                return Err(Error::UnsupportedPhaseIndex(self.tags[i]));
            }
            match classes.iter_mut().find(|(c, _)| *c == n) {
                Some((_, p)) => *p += w,
                None => classes.push((n, w)),
            }
        }
        classes.sort_by_key(|(c, _)| *c);
        Ok(classes)
    }

    /// Project onto one homodyne class, renormalize and clear the tags.
    /// The classical feed-forward phase correction is exact, so no phase
    /// residue is left on the amplitudes.
    pub fn collapse_probe_class(&mut self, class: u32) -> Result<f64> {
        let mut prob = 0.0;
        for (i, amp) in self.amps.iter().enumerate() {
            if self.tags[i].unsigned_abs() == class {
                prob += amp.norm_sqr();
            }
        }
        if prob <= 1e-300 {
            return Err(Error::ImpossibleBranch);
        }
        let scale = C64::new(1.0 / prob.sqrt(), 0.0);
        for (i, amp) in self.amps.iter_mut().enumerate() {
            if self.tags[i].unsigned_abs() == class {
                *amp *= scale;
            } else {
                *amp = ZERO;
            }
        }
        self.begin_probe();
        Ok(prob)
    }

    // -----------------------------------------------------------------
    // Collapse, revival, extraction
    // -----------------------------------------------------------------

    fn remove_bit(&mut self, shift: usize, value: usize) {
        let dim = self.amps.len();
        let mut amps = Vec::with_capacity(dim / 2);
        let mut tags = Vec::with_capacity(dim / 2);
        for i in 0..dim {
            if (i >> shift) & 1 == value {
                amps.push(self.amps[i]);
                tags.push(self.tags[i]);
            }
        }
        self.amps = amps;
        self.tags = tags;
    }

    fn insert_bit(&mut self, shift: usize, value: usize) {
        let dim = self.amps.len();
        let mut amps = vec![ZERO; dim * 2];
        let mut tags = vec![0; dim * 2];
        for i in 0..dim {
            let low = i & ((1 << shift) - 1);
            let high = (i >> shift) << (shift + 1);
            let idx = high | (value << shift) | low;
            amps[idx] = self.amps[i];
            tags[idx] = self.tags[i];
        }
        self.amps = amps;
        self.tags = tags;
    }

    pub fn path_probabilities(&self, photon: usize) -> Result<[f64; 2]> {
        let shift = self.path_shift(photon)?;
        let mut out = [0.0; 2];
        for (i, amp) in self.amps.iter().enumerate() {
            out[(i >> shift) & 1] += amp.norm_sqr();
        }
        Ok(out)
    }

    /// Collapse the photon onto one path and drop its path bit.
    pub fn collapse_path(&mut self, photon: usize, path: usize) -> Result<f64> {
        let shift = self.path_shift(photon)?;
        let probs = self.path_probabilities(photon)?;
        if probs[path] <= 1e-300 {
            return Err(Error::ImpossibleBranch);
        }
        self.remove_bit(shift, path);
        let scale = C64::new(1.0 / probs[path].sqrt(), 0.0);
        self.amps.iter_mut().for_each(|a| *a *= scale);
        self.photons[photon].path = PathDof::Collapsed(path);
        Ok(probs[path])
    }

    /// Collapse a path that is already definite (probability 1 within
    /// tolerance); returns the path index.
    pub fn collapse_definite_path(&mut self, photon: usize) -> Result<usize> {
        let probs = self.path_probabilities(photon)?;
        let path = if probs[1] > probs[0] { 1 } else { 0 };
        if probs[path] < 1.0 - 1e-9 {
            return Err(Error::InvalidState(format!(
                "photon \"{}\" path is not definite (p = {:.6})",
                self.photons[photon].label, probs[path]
            )));
        }
        self.collapse_path(photon, path)?;
        Ok(path)
    }

    /// Re-open the path degree of freedom of a collapsed photon in its
    /// recorded path (a new beam-splitter port).
    pub fn revive_path(&mut self, photon: usize) -> Result<usize> {
        let from = match self.photons[photon].path {
            PathDof::Collapsed(p) => p,
            PathDof::Live => {
                return Err(Error::InvalidState(format!(
                    "photon \"{}\" path is already live",
                    self.photons[photon].label
                )))
            }
        };
        self.photons[photon].path = PathDof::Live;
        let shift = self.path_shift(photon)?;
        self.insert_bit(shift, from);
        Ok(from)
    }

    pub fn pol_probabilities(&self, photon: usize) -> Result<[f64; 2]> {
        let shift = self.pol_shift(photon)?;
        let mut out = [0.0; 2];
        for (i, amp) in self.amps.iter().enumerate() {
            out[(i >> shift) & 1] += amp.norm_sqr();
        }
        Ok(out)
    }

    /// Collapse the photon polarization (0 = H, 1 = V) and drop its bit.
    pub fn collapse_pol(&mut self, photon: usize, pol: usize) -> Result<f64> {
        let shift = self.pol_shift(photon)?;
        let probs = self.pol_probabilities(photon)?;
        if probs[pol] <= 1e-300 {
            return Err(Error::ImpossibleBranch);
        }
        self.remove_bit(shift, pol);
        let scale = C64::new(1.0 / probs[pol].sqrt(), 0.0);
        self.amps.iter_mut().for_each(|a| *a *= scale);
        self.photons[photon].pol = PolDof::Collapsed(pol);
        Ok(probs[pol])
    }

    /// Attach polarization to the listed photons in a joint polarization
    /// state (bit j of the joint index = polarization of `photons[j]`).
    pub fn materialize_polarization(&mut self, photons: &[usize], joint: &[C64]) -> Result<()> {
        if joint.len() != 1 << photons.len() {
            return Err(Error::DimensionMismatch {
                expected: 1 << photons.len(),
                got: joint.len(),
            });
        }
        let jn: f64 = joint.iter().map(|a| a.norm_sqr()).sum();
        if (jn - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(
                "joint polarization state is not normalized".into(),
            ));
        }
        for &p in photons {
            if self.photons[p].pol != PolDof::Absent {
                return Err(Error::InvalidState(format!(
                    "photon \"{}\" already has polarization",
                    self.photons[p].label
                )));
            }
        }
        // photon order fixes the appended bit order
        let mut sorted = photons.to_vec();
        sorted.sort_unstable();
        if sorted != photons {
            return Err(Error::InvalidArgument(
                "materialize_polarization expects photons in index order".into(),
            ));
        }
        let old_dim = self.amps.len();
        let k = photons.len();
        let mut amps = Vec::with_capacity(old_dim << k);
        let mut tags = Vec::with_capacity(old_dim << k);
        // new layout: old bits stay low, joint pol bits appended high --
        // but pol bits must interleave by photon order with any existing
        // pol bits. Materialization happens once per protocol before any
        // other polarization exists, so appending is the correct layout.
        for joint_idx in 0..1usize << k {
            for i in 0..old_dim {
                amps.push(self.amps[i] * joint[joint_idx]);
                tags.push(self.tags[i]);
            }
        }
        for &p in photons {
            self.photons[p].pol = PolDof::Live;
        }
        self.amps = amps;
        self.tags = tags;
        Ok(())
    }

    /// Polarizing beam splitter plus half-wave plate on a collapsed-path
    /// photon: H keeps the recorded path, V is routed to the other one; the
    /// polarization bit is consumed.
    pub fn pbs_merge_pol_into_path(&mut self, photon: usize) -> Result<()> {
        let from = match self.photons[photon].path {
            PathDof::Collapsed(p) => p,
            PathDof::Live => {
                return Err(Error::InvalidState(
                    "pbs merge needs a collapsed-path photon".into(),
                ))
            }
        };
        // open the path bit, then route V components to the other path
        self.photons[photon].path = PathDof::Live;
        let pshift = self.path_shift(photon)?;
        self.insert_bit(pshift, from);
        let polshift = self.pol_shift(photon)?;
        let dim = self.amps.len();
        let mut amps = vec![ZERO; dim];
        let mut tags = vec![0; dim];
        for i in 0..dim {
            if self.amps[i] == ZERO {
                continue;
            }
            let pol = (i >> polshift) & 1;
            let target = if pol == 1 { i ^ (1 << pshift) } else { i };
            amps[target] += self.amps[i];
            tags[target] = self.tags[i];
        }
        self.amps = amps;
        self.tags = tags;
        // the polarization is now uniform; drop its bit (keep pol = H)
        let polshift = self.pol_shift(photon)?;
        // merge the two pol layers: V layer was already routed, so project
        let mut merged_amps = Vec::with_capacity(dim / 2);
        let mut merged_tags = Vec::with_capacity(dim / 2);
        for i in 0..dim {
            if (i >> polshift) & 1 == 0 {
                let v_idx = i | (1 << polshift);
                merged_amps.push(self.amps[i] + self.amps[v_idx]);
                merged_tags.push(self.tags[i]);
            }
        }
        self.amps = merged_amps;
        self.tags = merged_tags;
        self.photons[photon].pol = PolDof::Collapsed(0);
        let n = self.norm();
        let scale = C64::new(1.0 / n, 0.0);
        self.amps.iter_mut().for_each(|a| *a *= scale);
        Ok(())
    }

    /// Pull out the photon's pure path qubit (alpha, beta); every other
    /// live degree of freedom must factor out.
    pub fn extract_path_qubit(&self, photon: usize) -> Result<(C64, C64)> {
        let shift = self.path_shift(photon)?;
        let dim = self.amps.len();
        let mut v0 = Vec::with_capacity(dim / 2);
        let mut v1 = Vec::with_capacity(dim / 2);
        for i in 0..dim {
            if (i >> shift) & 1 == 0 {
                v0.push(self.amps[i]);
            } else {
                v1.push(self.amps[i]);
            }
        }
        let n0: f64 = v0.iter().map(|a| a.norm_sqr()).sum();
        let n1: f64 = v1.iter().map(|a| a.norm_sqr()).sum();
        let reference = if n0 >= n1 { &v0 } else { &v1 };
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
        let mut residual = 0.0f64;
        for (i, r) in reference.iter().enumerate() {
            residual = residual.max((v0[i] - alpha * r / rn).norm());
            residual = residual.max((v1[i] - beta * r / rn).norm());
        }
        if residual > 1e-8 {
            return Err(Error::InvalidState(format!(
                "photon \"{}\" path is entangled with the rest (residual {residual:.3e})",
                self.photons[photon].label
            )));
        }
        // fold the reference's leading phase back in so a trivial
        // environment returns the literal amplitudes
        let lead = reference
            .iter()
            .max_by(|a, b| a.norm_sqr().partial_cmp(&b.norm_sqr()).unwrap())
            .copied()
            .unwrap_or(C64::new(1.0, 0.0));
        let phase = lead / lead.norm();
        let (alpha, beta) = (alpha * phase, beta * phase);
        let norm = (alpha.norm_sqr() + beta.norm_sqr()).sqrt();
        Ok((alpha / norm, beta / norm))
    }
}
