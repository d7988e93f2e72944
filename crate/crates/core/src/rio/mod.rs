//! Photonic remote-operator protocols: dual-rail registers, cross-Kerr
//! probe interactions, balanced-beam-splitter mixing, homodyne
//! discrimination with erfc error probabilities, and the RIHO, RIPUO and
//! CJRIO protocols with efficiency accounting.

pub mod homodyne;
pub mod protocols;
pub mod register;

pub use homodyne::{
    homodyne_discriminate, homodyne_discriminate_sampled, monte_carlo_error_rate,
    DiscriminationResult, HomodyneModel,
};
pub use protocols::{
    efficiency, run_cjrio, run_cjrio_general, run_jrio, run_riho, run_ripuo, CjrioBranch,
    CjrioOutcome, CjrioTranscript, Efficiency, PathQubit, RihoBranch, RioChannel, RipuoBranch,
    SuForm, SuOperator,
};
pub use register::{DualRailRegister, PathDof, PolDof};
