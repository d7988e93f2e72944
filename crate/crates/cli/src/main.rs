//! Command-line front end: every protocol and sweep is a subcommand that
//! writes a plot-ready CSV. Runs are deterministic for a fixed seed; the
//! output path defaults to QCOMM_OUT_DIR (or the working directory).

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

use qcomm::circuits::BellLabel;
use qcomm::linalg::{CMat, C64};
use qcomm::noise::runners::{
    BroadcastRunner, MqtRunner, PreparedState, QavARunner, QavBRunner, StatePrepRunner,
};
use qcomm::noise::{noise_sweep, BitFlipConvention, ChannelKind, NoiseRunner};
use qcomm::qav::{protocol_a_run, protocol_b_run, EncodingTable, QavResource, VoteVector};
use qcomm::qkd::{sweep, QkdParams, QkdProtocol, SweepAxis};
use qcomm::qstate::{pauli_expectations, tomography_reconstruct, MixedState};
use qcomm::rio::{
    run_cjrio, run_riho, run_ripuo, CjrioOutcome, HomodyneModel, PathQubit, RioChannel, SuOperator,
};
use qcomm::rng::SimRng;
use qcomm::teleport::{
    broadcast_known, mqt_run, mqt_sampled_cores, BroadcastChannelSpec, BroadcastOutcome,
    GhzLikePayload, KnownQubit,
};

#[derive(Parser)]
#[command(
    name = "qcomm",
    about = "Quantum communication protocol simulations with CSV output",
    version
)]
struct Cli {
    /// RNG seed; identical seeds give byte-identical output.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,

    /// Shot count for sampled runs.
    #[arg(long, global = true, default_value_t = 8192)]
    shots: u64,

    /// Execution mode where applicable.
    #[arg(long, global = true, value_enum, default_value_t = Mode::Analytic)]
    mode: Mode,

    /// Output CSV path (default: $QCOMM_OUT_DIR/<subcommand>.csv).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Analytic,
    Sampled,
}

#[derive(Subcommand)]
enum Command {
    /// Multi-output teleportation of two GHZ-like payloads over two Bell
    /// pairs.
    Mqt(MqtArgs),
    /// Broadcast a known qubit to several receivers.
    Broadcast(BroadcastArgs),
    /// Remote implementation of a hidden operator.
    RioRiho(RihoArgs),
    /// Remote implementation of a partially unknown operator.
    RioRipuo(RipuoArgs),
    /// Controlled-joint remote implementation of two operators.
    RioCjrio(CjrioArgs),
    /// Iterative Bell-state anonymous veto.
    QavA(QavAArgs),
    /// Single-shot cluster/GHZ anonymous veto.
    QavB(QavBArgs),
    /// COW/DPS key-rate model sweeps.
    Qkd(QkdArgs),
    /// Fidelity-versus-noise curves for the protocol suite.
    NoiseSweep(NoiseArgs),
    /// Pauli tomography round trips on random mixed states.
    Tomography(TomographyArgs),
}

#[derive(Args)]
struct MqtArgs {
    /// Payload size m (the second payload has m + 1 qubits).
    #[arg(long, default_value_t = 1)]
    m: usize,
    /// Bloch angles of the first payload core.
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_2)]
    theta_a: f64,
    #[arg(long, default_value_t = 0.0)]
    phi_a: f64,
    /// Bloch angles of the second payload core.
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_2)]
    theta_b: f64,
    #[arg(long, default_value_t = 0.0)]
    phi_b: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    Plain,
    Joint,
    Controlled,
    Multidirectional,
}

#[derive(Args)]
struct BroadcastArgs {
    #[arg(long, value_enum, default_value_t = VariantArg::Plain)]
    variant: VariantArg,
    /// Receiver count (parties for the multidirectional variant).
    #[arg(long, default_value_t = 2)]
    receivers: usize,
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_2)]
    theta: f64,
    #[arg(long, default_value_t = 0.0)]
    phi: f64,
    /// Controller releases the disclosure bits (controlled variant).
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    disclose: bool,
    /// Enforce pairwise-distinct Bell labels on the plain channel.
    #[arg(long, default_value_t = false)]
    distinct_pairs: bool,
}

#[derive(Args)]
struct HomodyneArgs {
    /// Coherent probe amplitude z.
    #[arg(long, default_value_t = 1.0)]
    z: f64,
    /// Phase-shift unit theta in radians.
    #[arg(long, default_value_t = std::f64::consts::PI)]
    theta_probe: f64,
    /// Dissipation factor D = exp(-gamma t).
    #[arg(long, default_value_t = 1.0)]
    dissipation: f64,
    /// Emit the success-probability surface over the (z, D, theta) grid
    /// instead of the per-branch transcript.
    #[arg(long, default_value_t = false)]
    surface: bool,
}

#[derive(Args)]
struct RihoArgs {
    #[arg(long, default_value = "omega+")]
    channel: String,
    /// Phase of u = e^{i u_phase} in the lump operator.
    #[arg(long, default_value_t = 0.6)]
    u_phase: f64,
    /// Phase of v = e^{i v_phase}.
    #[arg(long, default_value_t = 1.2)]
    v_phase: f64,
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_3)]
    payload_theta: f64,
    #[arg(long, default_value_t = 0.8)]
    payload_phi: f64,
    #[command(flatten)]
    homodyne: HomodyneArgs,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SubOperatorArg {
    Diagonal,
    Antidiagonal,
}

#[derive(Args)]
struct RipuoArgs {
    #[arg(long, default_value = "omega+")]
    channel: String,
    #[arg(long, value_enum, default_value_t = SubOperatorArg::Diagonal)]
    sub: SubOperatorArg,
    #[arg(long, default_value_t = 0.6)]
    u_phase: f64,
    #[arg(long, default_value_t = 1.2)]
    v_phase: f64,
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_3)]
    payload_theta: f64,
    #[arg(long, default_value_t = 0.8)]
    payload_phi: f64,
    #[command(flatten)]
    homodyne: HomodyneArgs,
}

#[derive(Args)]
struct CjrioArgs {
    /// Mixing angle and phases of the first operator:
    /// u = cos(a) e^{i pu}, v = sin(a) e^{i pv}.
    #[arg(long, default_value_t = 0.4)]
    op1_angle: f64,
    #[arg(long, default_value_t = 0.3)]
    op1_phase_u: f64,
    #[arg(long, default_value_t = 1.1)]
    op1_phase_v: f64,
    #[arg(long, default_value_t = 0.9)]
    op2_angle: f64,
    #[arg(long, default_value_t = 2.0)]
    op2_phase_u: f64,
    #[arg(long, default_value_t = 0.5)]
    op2_phase_v: f64,
    /// Controller consent; without it the run halts after step 2.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    consent: bool,
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_3)]
    payload_theta: f64,
    #[arg(long, default_value_t = 0.8)]
    payload_phi: f64,
    #[command(flatten)]
    homodyne: HomodyneArgs,
}

#[derive(Args)]
struct QavAArgs {
    /// Veto pattern, e.g. 1000 (voter 1 vetoes).
    #[arg(long, default_value = "1000")]
    vetoes: String,
    /// Run every pattern of the given voter count instead.
    #[arg(long, default_value_t = false)]
    all_patterns: bool,
    #[arg(long, default_value_t = 4)]
    voters: usize,
}

#[derive(Args)]
struct QavBArgs {
    #[arg(long, default_value = "cluster4")]
    resource: String,
    #[arg(long, default_value = "1000")]
    vetoes: String,
    #[arg(long, default_value_t = false)]
    all_patterns: bool,
}

#[derive(Args)]
struct QkdArgs {
    /// Run configuration file (key = value); overrides the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "dps")]
    protocol: String,
    /// Sweep axis: dr, cr, td or d.
    #[arg(long, default_value = "dr")]
    sweep: String,
    #[arg(long, default_value_t = 80.0)]
    d: f64,
    #[arg(long, default_value_t = 0.03125)]
    dr: f64,
    #[arg(long, default_value_t = 0.5)]
    cr: f64,
    /// Dead time in microseconds.
    #[arg(long, default_value_t = 50.0)]
    td_us: f64,
    #[arg(long, default_value_t = false)]
    dead_time_correction: bool,
}

#[derive(Args)]
struct NoiseArgs {
    /// Protocol runner: mqt, broadcast, qav-a, qav-b-cluster, qav-b-ghz,
    /// bell-pair-pair, cluster4, ghz3 or all.
    #[arg(long, default_value = "all")]
    protocol: String,
    /// Channel: bit_flip, depolarizing, amplitude_damping, phase_damping
    /// or all.
    #[arg(long, default_value = "all")]
    channel: String,
    /// Bit-flip parameter convention.
    #[arg(long, value_enum, default_value_t = ConventionArg::Standard)]
    bit_flip_convention: ConventionArg,
    /// Number of grid points on [0, 1].
    #[arg(long, default_value_t = 21)]
    p_steps: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ConventionArg {
    IdentityWeighted,
    Standard,
}

#[derive(Args)]
struct TomographyArgs {
    #[arg(long, default_value_t = 2)]
    qubits: usize,
    #[arg(long, default_value_t = 50)]
    trials: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(path) => {
            println!("wrote {}", path.display());
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}

fn output_path(out: &Option<PathBuf>, name: &str) -> PathBuf {
    match out {
        Some(p) => p.clone(),
        None => {
            let dir = std::env::var("QCOMM_OUT_DIR").unwrap_or_else(|_| ".".into());
            PathBuf::from(dir).join(format!("{name}.csv"))
        }
    }
}

fn write_csv(path: &PathBuf, content: String) -> Result<(), Box<dyn std::error::Error>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, content)?;
    Ok(())
}

fn run(cli: Cli) -> Result<PathBuf, Box<dyn std::error::Error>> {
    let mut rng = SimRng::seed_from_u64(cli.seed);
    let (name, content): (&str, String) = match &cli.command {
        Command::Mqt(args) => ("mqt", run_mqt(&cli, args, &mut rng)?),
        Command::Broadcast(args) => ("broadcast", run_broadcast(args, &mut rng)?),
        Command::RioRiho(args) => ("rio_riho", run_rio_riho(args)?),
        Command::RioRipuo(args) => ("rio_ripuo", run_rio_ripuo(args)?),
        Command::RioCjrio(args) => ("rio_cjrio", run_rio_cjrio(args)?),
        Command::QavA(args) => ("qav_a", run_qav_a(args)?),
        Command::QavB(args) => ("qav_b", run_qav_b(args)?),
        Command::Qkd(args) => ("qkd", run_qkd(args)?),
        Command::NoiseSweep(args) => ("noise_sweep", run_noise(args)?),
        Command::Tomography(args) => ("tomography", run_tomography(&cli, args)?),
    };
    let path = output_path(&cli.out, name);
    write_csv(&path, content)?;
    Ok(path)
}

fn payload_from_angles(theta: f64, phi: f64) -> Result<PathQubit, Box<dyn std::error::Error>> {
    let a = Complex64::new((theta / 2.0).cos(), 0.0);
    let b = Complex64::from_polar((theta / 2.0).sin(), phi);
    Ok(PathQubit::new(a, b)?)
}

fn run_mqt(
    cli: &Cli,
    args: &MqtArgs,
    rng: &mut SimRng,
) -> Result<String, Box<dyn std::error::Error>> {
    let make = |m: usize, theta: f64, phi: f64| -> Result<GhzLikePayload, qcomm::error::Error> {
        GhzLikePayload::new(
            m,
            Complex64::new((theta / 2.0).cos(), 0.0),
            Complex64::from_polar((theta / 2.0).sin(), phi),
        )
    };
    let a = make(args.m, args.theta_a, args.phi_a)?;
    let b = make(args.m + 1, args.theta_b, args.phi_b)?;
    match cli.mode {
        Mode::Analytic => {
            let run = mqt_run(&a, &b)?;
            let mut out = String::from("branch_a,branch_b,probability,fidelity_a,fidelity_b\n");
            for br in &run.branches {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    br.bits_a, br.bits_b, br.probability, br.fidelity_a, br.fidelity_b
                ));
            }
            Ok(out)
        }
        Mode::Sampled => {
            let hist = mqt_sampled_cores(&a, &b, cli.shots, rng)?;
            let mut out = String::from("outcome,count\n");
            for (key, count) in hist.counts() {
                out.push_str(&format!("{key},{count}\n"));
            }
            Ok(out)
        }
    }
}

fn run_broadcast(
    args: &BroadcastArgs,
    rng: &mut SimRng,
) -> Result<String, Box<dyn std::error::Error>> {
    let payload = KnownQubit::new(args.theta, args.phi)?;
    let mut spec = match args.variant {
        VariantArg::Plain => BroadcastChannelSpec::plain(args.receivers),
        VariantArg::Joint => BroadcastChannelSpec::joint(args.receivers),
        VariantArg::Controlled => BroadcastChannelSpec::controlled(args.receivers, args.disclose),
        VariantArg::Multidirectional => BroadcastChannelSpec::multidirectional(args.receivers),
    };
    if args.distinct_pairs {
        if let VariantArg::Plain = args.variant {
            let labels = [
                BellLabel::PhiPlus,
                BellLabel::PhiMinus,
                BellLabel::PsiPlus,
                BellLabel::PsiMinus,
            ];
            if args.receivers > labels.len() {
                return Err("distinct pairs support at most 4 receivers".into());
            }
            spec = BroadcastChannelSpec::plain_with(labels[..args.receivers].to_vec());
        }
        spec.require_distinct_pairs = true;
    }
    let mut out = String::from("receiver,sender,branch,probability,fidelity,status\n");
    match broadcast_known(&payload, &spec, rng)? {
        BroadcastOutcome::Delivered { receivers, .. } => {
            for r in &receivers {
                for br in &r.branches {
                    out.push_str(&format!(
                        "{},{},{},{},{},delivered\n",
                        r.receiver, r.sender, br.bits, br.probability, br.fidelity
                    ));
                }
            }
        }
        BroadcastOutcome::ControlNotReleased => {
            out.push_str(",,,,,control_not_released\n");
        }
    }
    Ok(out)
}

/// Success-probability surface over the 20 x 20 x 8 (z, D, theta) grid.
fn surface_csv() -> String {
    let mut out = String::from("z,dissipation,theta,p_1suc,p_2suc\n");
    for zi in 1..=20 {
        for di in 1..=20 {
            for ti in 1..=8 {
                let z = zi as f64 * 0.25;
                let d = di as f64 * 0.05;
                let theta = ti as f64 * std::f64::consts::PI / 8.0;
                let m = HomodyneModel::new(z, theta, d).expect("grid values are valid");
                let (p1, p2) = m.success_probabilities();
                out.push_str(&format!("{z},{d},{theta},{p1},{p2}\n"));
            }
        }
    }
    out
}

fn run_rio_riho(args: &RihoArgs) -> Result<String, Box<dyn std::error::Error>> {
    let model = HomodyneModel::new(
        args.homodyne.z,
        args.homodyne.theta_probe,
        args.homodyne.dissipation,
    )?;
    if args.homodyne.surface {
        return Ok(surface_csv());
    }
    let channel = RioChannel::parse(&args.channel)?;
    let op = SuOperator::lump(
        Complex64::from_polar(1.0, args.u_phase),
        Complex64::from_polar(1.0, args.v_phase),
    )?;
    let payload = payload_from_angles(args.payload_theta, args.payload_phi)?;
    let branches = run_riho(&payload, channel, &op, &model)?;
    let (p1, p2) = model.success_probabilities();
    let mut out = String::from("k,m,p,q,probability,fidelity,p_1suc,p_2suc\n");
    for br in &branches {
        out.push_str(&format!(
            "{},{},{},{},{},{},{p1},{p2}\n",
            br.k, br.m, br.p, br.q, br.probability, br.fidelity
        ));
    }
    Ok(out)
}

fn run_rio_ripuo(args: &RipuoArgs) -> Result<String, Box<dyn std::error::Error>> {
    let model = HomodyneModel::new(
        args.homodyne.z,
        args.homodyne.theta_probe,
        args.homodyne.dissipation,
    )?;
    if args.homodyne.surface {
        return Ok(surface_csv());
    }
    let channel = RioChannel::parse(&args.channel)?;
    let lump = SuOperator::lump(
        Complex64::from_polar(1.0, args.u_phase),
        Complex64::from_polar(1.0, args.v_phase),
    )?;
    let op: CMat = match args.sub {
        SubOperatorArg::Diagonal => lump.sub_diagonal(),
        SubOperatorArg::Antidiagonal => lump.sub_antidiagonal(),
    };
    let payload = payload_from_angles(args.payload_theta, args.payload_phi)?;
    let branches = run_ripuo(&payload, channel, &op, &model)?;
    let (p1, p2) = model.success_probabilities();
    let mut out = String::from("k,p,q,probability,fidelity,p_1suc,p_2suc\n");
    for br in &branches {
        out.push_str(&format!(
            "{},{},{},{},{},{p1},{p2}\n",
            br.k, br.p, br.q, br.probability, br.fidelity
        ));
    }
    Ok(out)
}

fn run_rio_cjrio(args: &CjrioArgs) -> Result<String, Box<dyn std::error::Error>> {
    let model = HomodyneModel::new(
        args.homodyne.z,
        args.homodyne.theta_probe,
        args.homodyne.dissipation,
    )?;
    if args.homodyne.surface {
        return Ok(surface_csv());
    }
    let make = |angle: f64, pu: f64, pv: f64| {
        SuOperator::unimodular(
            Complex64::from_polar(angle.cos(), pu),
            Complex64::from_polar(angle.sin(), pv),
        )
    };
    let op1 = make(args.op1_angle, args.op1_phase_u, args.op1_phase_v)?;
    let op2 = make(args.op2_angle, args.op2_phase_u, args.op2_phase_v)?;
    let payload = payload_from_angles(args.payload_theta, args.payload_phi)?;
    let mut out = String::from("k,m,n,s,l,r,g,p,q,w,v,probability,fidelity,status\n");
    match run_cjrio(&payload, &op1, &op2, args.consent, &model)? {
        CjrioOutcome::Completed { branches, .. } => {
            for br in &branches {
                let t = &br.transcript;
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{},{},{},{},completed\n",
                    t.k,
                    t.m,
                    t.n,
                    t.s[0],
                    t.l[0],
                    t.rg[0].0,
                    t.rg[0].1,
                    t.p,
                    t.q,
                    t.w[0],
                    t.v[0],
                    br.probability,
                    br.fidelity
                ));
            }
        }
        CjrioOutcome::HaltedNoConsent { .. } => {
            out.push_str(",,,,,,,,,,,,,halted_no_consent\n");
        }
    }
    Ok(out)
}

fn run_qav_a(args: &QavAArgs) -> Result<String, Box<dyn std::error::Error>> {
    let patterns: Vec<String> = if args.all_patterns {
        (0..1u32 << args.voters)
            .map(|bits| {
                (0..args.voters)
                    .map(|q| {
                        if (bits >> (args.voters - 1 - q)) & 1 == 1 {
                            '1'
                        } else {
                            '0'
                        }
                    })
                    .collect()
            })
            .collect()
    } else {
        vec![args.vetoes.clone()]
    };
    let mut out = String::from("pattern,iteration,final_state,conclusive,outcome,probability\n");
    for pattern in patterns {
        let votes = VoteVector::parse(&pattern)?;
        let run = protocol_a_run(&votes)?;
        for round in &run.rounds {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                pattern,
                round.t + 1,
                round.final_state.name(),
                round.conclusive,
                round.outcome_bits,
                round.probability
            ));
        }
    }
    Ok(out)
}

fn run_qav_b(args: &QavBArgs) -> Result<String, Box<dyn std::error::Error>> {
    let resource = QavResource::parse(&args.resource)?;
    let table = EncodingTable::for_resource(resource);
    let patterns: Vec<String> = if args.all_patterns {
        (0..16u32)
            .map(|bits| {
                (0..4)
                    .map(|q| if (bits >> (3 - q)) & 1 == 1 { '1' } else { '0' })
                    .collect()
            })
            .collect()
    } else {
        vec![args.vetoes.clone()]
    };
    let mut out = String::from("pattern,resource,conclusive,outcome,probability\n");
    for pattern in patterns {
        let votes = VoteVector::parse(&pattern)?;
        let result = protocol_b_run(&votes, resource, &table)?;
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            pattern,
            resource.name(),
            result.conclusive,
            result.outcome_bits,
            result.probability
        ));
    }
    Ok(out)
}

fn run_qkd(args: &QkdArgs) -> Result<String, Box<dyn std::error::Error>> {
    let (base, axis, grid) = match &args.config {
        Some(path) => {
            let cfg = qcomm::qkd::parse_config(&fs::read_to_string(path)?)?;
            (cfg.base, cfg.axis, cfg.grid)
        }
        None => {
            let protocol = QkdProtocol::parse(&args.protocol)?;
            let mut base = QkdParams::defaults(protocol);
            base.d = args.d;
            base.dr = args.dr;
            base.cr = args.cr;
            base.t_d = args.td_us * 1e-6;
            base.dead_time_correction = args.dead_time_correction;
            let axis = SweepAxis::parse(&args.sweep)?;
            let grid: Vec<f64> = match axis {
                SweepAxis::DiscloseRate => (0..16).map(|i| 0.03125 + i as f64 * 0.03125).collect(),
                SweepAxis::CompressionRatio => (0..10).map(|i| 0.5 + i as f64 * 0.05).collect(),
                SweepAxis::DeadTime => (0..7).map(|i| 20e-6 + i as f64 * 5e-6).collect(),
                SweepAxis::Distance => (0..9).map(|i| 40.0 + i as f64 * 10.0).collect(),
            };
            (base, axis, grid)
        }
    };
    let rows = sweep(&base, axis, &grid)?;
    let mut out = String::from("protocol,d_km,dr,cr,t_d_us,tau,clicks,key_rate,corrected\n");
    for row in &rows {
        out.push_str(&format!(
            "{},{},{},{},{:.3},{},{},{},{}\n",
            row.protocol.name(),
            row.d_km,
            row.dr,
            row.cr,
            row.t_d_s * 1e6,
            row.result.tau,
            row.result.clicks,
            row.result.key_rate,
            row.result.dead_time_corrected
        ));
    }
    Ok(out)
}

fn run_noise(args: &NoiseArgs) -> Result<String, Box<dyn std::error::Error>> {
    if args.p_steps < 2 {
        return Err("p_steps must be at least 2".into());
    }
    let grid: Vec<f64> = (0..args.p_steps)
        .map(|i| i as f64 / (args.p_steps - 1) as f64)
        .collect();
    let convention = match args.bit_flip_convention {
        ConventionArg::IdentityWeighted => BitFlipConvention::IdentityWeighted,
        ConventionArg::Standard => BitFlipConvention::Standard,
    };
    let runners: Vec<Box<dyn NoiseRunner>> = match args.protocol.as_str() {
        "mqt" => vec![Box::new(MqtRunner::plus_plus())],
        "broadcast" => vec![Box::new(BroadcastRunner::plus_payload())],
        "qav-a" => vec![Box::new(QavARunner::single_veto())],
        "qav-b-cluster" => vec![Box::new(QavBRunner::new(
            VoteVector::parse("1000")?,
            QavResource::Cluster4,
        ))],
        "qav-b-ghz" => vec![Box::new(QavBRunner::new(
            VoteVector::parse("1000")?,
            QavResource::Ghz3,
        ))],
        "bell-pair-pair" => vec![Box::new(StatePrepRunner::new(PreparedState::BellPairPair))],
        "cluster4" => vec![Box::new(StatePrepRunner::new(PreparedState::Cluster4))],
        "ghz3" => vec![Box::new(StatePrepRunner::new(PreparedState::Ghz3))],
        "all" => vec![
            Box::new(MqtRunner::plus_plus()),
            Box::new(BroadcastRunner::plus_payload()),
            Box::new(QavARunner::single_veto()),
            Box::new(QavBRunner::new(
                VoteVector::parse("1000")?,
                QavResource::Cluster4,
            )),
            Box::new(QavBRunner::new(
                VoteVector::parse("1000")?,
                QavResource::Ghz3,
            )),
            Box::new(StatePrepRunner::new(PreparedState::BellPairPair)),
            Box::new(StatePrepRunner::new(PreparedState::Cluster4)),
        ],
        other => return Err(format!("unknown protocol runner \"{other}\"").into()),
    };
    let channels: Vec<ChannelKind> = match args.channel.as_str() {
        "all" => ChannelKind::all().to_vec(),
        name => vec![ChannelKind::parse(name)?],
    };
    let mut out = String::from("channel,p,protocol,fidelity\n");
    for runner in &runners {
        for &kind in &channels {
            for pt in noise_sweep(runner.as_ref(), kind, convention, &grid)? {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    pt.channel, pt.p, pt.protocol, pt.fidelity
                ));
            }
        }
    }
    Ok(out)
}

fn random_mixed_state(n: usize, rng: &mut SimRng) -> MixedState {
    // Ginibre construction: G G^dagger normalized to unit trace
    let dim = 1usize << n;
    let mut g = CMat::zeros(dim);
    for i in 0..dim {
        for j in 0..dim {
            g.set(i, j, C64::new(rng.gaussian(), rng.gaussian()));
        }
    }
    let mut rho = g.mul(&g.adjoint());
    let tr = rho.trace().re;
    rho = rho.scale(C64::new(1.0 / tr, 0.0));
    MixedState::new(n, rho).expect("Ginibre construction is a valid state")
}

fn run_tomography(cli: &Cli, args: &TomographyArgs) -> Result<String, Box<dyn std::error::Error>> {
    if args.qubits == 0 || args.qubits > 4 {
        return Err("tomography subcommand supports 1..=4 qubits".into());
    }
    let mut rng = SimRng::seed_from_u64(cli.seed);
    let mut out = String::from("trial,num_qubits,max_error\n");
    for trial in 0..args.trials {
        let rho = random_mixed_state(args.qubits, &mut rng);
        let exps = pauli_expectations(&rho);
        let recon = tomography_reconstruct(args.qubits, &exps)?;
        let err = recon.matrix().sub(rho.matrix()).max_abs();
        out.push_str(&format!("{trial},{},{err}\n", args.qubits));
    }
    Ok(out)
}
