//! The four single-qubit Kraus channels, channel application to mixed
//! states, and the sweep harness producing fidelity-vs-noise curves.
//!
//! The bit-flip channel supports two parameter conventions. In the
//! identity-weighted form p multiplies the identity Kraus term, so p = 0
//! is a certain flip; the standard form assigns p to the flip term. Sweeps
//! default to the standard form so that p = 0 means "no noise" for every
//! channel.

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64, ONE, ZERO};
use crate::qstate::MixedState;

pub const COMPLETENESS_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChannelKind {
    BitFlip,
    Depolarizing,
    AmplitudeDamping,
    PhaseDamping,
}

impl ChannelKind {
    pub fn all() -> [ChannelKind; 4] {
        [
            ChannelKind::BitFlip,
            ChannelKind::Depolarizing,
            ChannelKind::AmplitudeDamping,
            ChannelKind::PhaseDamping,
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            ChannelKind::BitFlip => "bit_flip",
            ChannelKind::Depolarizing => "depolarizing",
            ChannelKind::AmplitudeDamping => "amplitude_damping",
            ChannelKind::PhaseDamping => "phase_damping",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bit_flip" | "bitflip" => Ok(ChannelKind::BitFlip),
            "depolarizing" => Ok(ChannelKind::Depolarizing),
            "amplitude_damping" => Ok(ChannelKind::AmplitudeDamping),
            "phase_damping" => Ok(ChannelKind::PhaseDamping),
            other => Err(Error::InvalidArgument(format!(
                "unknown channel \"{other}\""
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum BitFlipConvention {
    /// E0 = sqrt(p) I, E1 = sqrt(1-p) X; p weights the identity term and
    /// p = 0 flips with certainty.
    #[default]
    IdentityWeighted,
    /// E0 = sqrt(1-p) I, E1 = sqrt(p) X.
    Standard,
}

#[derive(Clone, Debug)]
pub struct KrausChannel {
    kind: ChannelKind,
    p: f64,
    convention: BitFlipConvention,
    ops: Vec<CMat>,
}

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Channel with the identity-weighted bit-flip convention.
pub fn make_channel(kind: ChannelKind, p: f64) -> Result<KrausChannel> {
    make_channel_with_convention(kind, p, BitFlipConvention::IdentityWeighted)
}

pub fn make_channel_with_convention(
    kind: ChannelKind,
    p: f64,
    convention: BitFlipConvention,
) -> Result<KrausChannel> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfRange {
            name: "p".into(),
            value: p,
            min: 0.0,
            max: 1.0,
        });
    }
    let i2 = CMat::identity(2);
    let x = CMat::two(ZERO, ONE, ONE, ZERO);
    let y = CMat::two(ZERO, C64::new(0.0, -1.0), C64::new(0.0, 1.0), ZERO);
    let z = CMat::two(ONE, ZERO, ZERO, -ONE);
    let ops = match kind {
        ChannelKind::BitFlip => {
            let (pi, px) = match convention {
                BitFlipConvention::IdentityWeighted => (p, 1.0 - p),
                BitFlipConvention::Standard => (1.0 - p, p),
            };
            vec![i2.scale(re(pi.sqrt())), x.scale(re(px.sqrt()))]
        }
        ChannelKind::Depolarizing => {
            let s = (p.max(0.0)).sqrt() / 2.0;
            vec![
                i2.scale(re((1.0 - 3.0 * p / 4.0).max(0.0).sqrt())),
                x.scale(re(s)),
                y.scale(re(s)),
                z.scale(re(s)),
            ]
        }
        ChannelKind::AmplitudeDamping => vec![
            CMat::two(ONE, ZERO, ZERO, re((1.0 - p).sqrt())),
            CMat::two(ZERO, re(p.sqrt()), ZERO, ZERO),
        ],
        ChannelKind::PhaseDamping => vec![
            i2.scale(re((1.0 - p).sqrt())),
            CMat::two(re(p.sqrt()), ZERO, ZERO, ZERO),
            CMat::two(ZERO, ZERO, ZERO, re(p.sqrt())),
        ],
    };
    Ok(KrausChannel {
        kind,
        p,
        convention,
        ops,
    })
}

impl KrausChannel {
    pub fn kind(&self) -> ChannelKind {
        self.kind
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn convention(&self) -> BitFlipConvention {
        self.convention
    }

    pub fn operators(&self) -> &[CMat] {
        &self.ops
    }

    /// max |sum E\u{2020}E - I|.
    pub fn completeness_defect(&self) -> f64 {
        let mut sum = CMat::zeros(2);
        for e in &self.ops {
            sum = sum.add(&e.adjoint().mul(e));
        }
        sum.sub(&CMat::identity(2)).max_abs()
    }
}

/// rho' = sum_k E_k rho E_k\u{2020} on the target qubit.
pub fn apply_channel(rho: &MixedState, ch: &KrausChannel, target: usize) -> Result<MixedState> {
    if target >= rho.num_qubits() {
        return Err(Error::QubitOutOfRange {
            index: target,
            num_qubits: rho.num_qubits(),
        });
    }
    let mut out = MixedState::from_parts_unchecked(rho.num_qubits(), CMat::zeros(rho.dim()));
    for e in &ch.ops {
        let term = rho.conjugate_unchecked(e, &[target]);
        out.add_weighted(&term, 1.0);
    }
    Ok(out)
}

/// Apply the channel once to every listed qubit.
pub fn apply_channel_all(
    rho: &MixedState,
    ch: &KrausChannel,
    targets: &[usize],
) -> Result<MixedState> {
    let mut out = rho.clone();
    for &t in targets {
        out = apply_channel(&out, ch, t)?;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Sweep harness
// ---------------------------------------------------------------------------

/// A protocol packaged for noise study: it owns its circuit and knows which
/// travel qubits the channel acts on.
pub trait NoiseRunner {
    fn protocol_name(&self) -> String;
    /// Run the protocol, applying `channel` at the travel sites when given.
    fn run(&self, channel: Option<&KrausChannel>) -> Result<MixedState>;
}

#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub channel: String,
    pub p: f64,
    pub protocol: String,
    pub fidelity: f64,
}

/// One fidelity value per grid point, comparing the noisy output of the
/// runner against its noiseless output.
pub fn noise_sweep(
    runner: &dyn NoiseRunner,
    kind: ChannelKind,
    convention: BitFlipConvention,
    grid: &[f64],
) -> Result<Vec<SweepPoint>> {
    for &p in grid {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::OutOfRange {
                name: "p".into(),
                value: p,
                min: 0.0,
                max: 1.0,
            });
        }
    }
    let ideal = runner.run(None)?;
    let mut out = Vec::with_capacity(grid.len());
    for &p in grid {
        let ch = make_channel_with_convention(kind, p, convention)?;
        let noisy = runner.run(Some(&ch))?;
        let f = crate::qstate::fidelity(&ideal, &noisy)?;
        out.push(SweepPoint {
            channel: kind.name().to_string(),
            p,
            protocol: runner.protocol_name(),
            fidelity: f,
        });
    }
    Ok(out)
}

/// The default sweep grid {0, 0.05, ..., 1}.
pub fn default_grid() -> Vec<f64> {
    (0..=20).map(|i| i as f64 * 0.05).collect()
}

pub mod runners;
