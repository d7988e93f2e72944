//! Analytic COW/DPS click-rate and key-rate model with sweeps over
//! disclose rate, compression ratio, dead time and distance.
//!
//! The click and key-rate formulas are implemented verbatim; note that
//! tau/(1 + tau) with tau in 1/s is dimensionally a saturation fraction, so
//! clicks and key rates are reported exactly as the formulas produce them
//! with no unit rescaling. Dead time does not appear in the base formulas;
//! an opt-in correction factor 1/(1 + C t_d) reproduces its qualitative
//! effect and is labeled in the output.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QkdProtocol {
    Cow,
    Dps,
}

impl QkdProtocol {
    pub fn name(&self) -> &'static str {
        match self {
            QkdProtocol::Cow => "cow",
            QkdProtocol::Dps => "dps",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cow" => Ok(QkdProtocol::Cow),
            "dps" => Ok(QkdProtocol::Dps),
            other => Err(Error::InvalidArgument(format!(
                "unknown QKD protocol \"{other}\""
            ))),
        }
    }
}

pub const DR_RANGE: (f64, f64) = (0.03125, 0.5);
pub const CR_RANGE: (f64, f64) = (0.5, 0.95);
pub const DEAD_TIME_RANGE: (f64, f64) = (20e-6, 50e-6);
pub const DISTANCE_RANGE: (f64, f64) = (40.0, 120.0);

#[derive(Clone, Copy, Debug)]
pub struct QkdParams {
    pub protocol: QkdProtocol,
    /// Mean photon number per pulse.
    pub mu: f64,
    /// Fiber loss in dB/km.
    pub l_f: f64,
    /// Distance in km.
    pub d: f64,
    /// Pulse frequency in Hz.
    pub f: f64,
    /// Detector efficiency.
    pub eta: f64,
    /// Detector dead time in seconds.
    pub t_d: f64,
    /// Interferometer loss in dB (DPS only).
    pub l_m: Option<f64>,
    /// Disclose rate.
    pub dr: f64,
    /// Compression ratio.
    pub cr: f64,
    /// Apply the opt-in dead-time saturation factor.
    pub dead_time_correction: bool,
}

impl QkdParams {
    /// COW defaults: mu = 0.5, l_f = 0.5 dB/km, f = 500 MHz, eta = 10%.
    pub fn cow_defaults() -> Self {
        QkdParams {
            protocol: QkdProtocol::Cow,
            mu: 0.5,
            l_f: 0.5,
            d: 80.0,
            f: 5e8,
            eta: 0.1,
            t_d: 50e-6,
            l_m: None,
            dr: 0.03125,
            cr: 0.5,
            dead_time_correction: false,
        }
    }

    /// DPS defaults: mu = 0.2, l_f = 0.2 dB/km, f = 1 GHz, eta = 10%,
    /// l_m = 2 dB.
    pub fn dps_defaults() -> Self {
        QkdParams {
            protocol: QkdProtocol::Dps,
            mu: 0.2,
            l_f: 0.2,
            d: 80.0,
            f: 1e9,
            eta: 0.1,
            t_d: 50e-6,
            l_m: Some(2.0),
            dr: 0.03125,
            cr: 0.5,
            dead_time_correction: false,
        }
    }

    pub fn defaults(protocol: QkdProtocol) -> Self {
        match protocol {
            QkdProtocol::Cow => QkdParams::cow_defaults(),
            QkdProtocol::Dps => QkdParams::dps_defaults(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let in_unit = |name: &str, v: f64| -> Result<()> {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::OutOfRange {
                    name: name.into(),
                    value: v,
                    min: 0.0,
                    max: 1.0,
                });
            }
            Ok(())
        };
        if self.d < 0.0 {
            return Err(Error::OutOfRange {
                name: "d".into(),
                value: self.d,
                min: 0.0,
                max: f64::INFINITY,
            });
        }
        if self.mu <= 0.0 || self.f <= 0.0 {
            return Err(Error::InvalidArgument("mu and f must be positive".into()));
        }
        in_unit("eta", self.eta)?;
        in_unit("DR", self.dr)?;
        in_unit("CR", self.cr)?;
        if self.t_d < 0.0 {
            return Err(Error::InvalidArgument("dead time must be >= 0".into()));
        }
        if self.protocol == QkdProtocol::Dps && self.l_m.is_none() {
            return Err(Error::InvalidArgument(
                "DPS needs the interferometer loss l_m".into(),
            ));
        }
        Ok(())
    }
}

/// tau = eta * mu * f * 10^(-l_f d / 10).
pub fn tau(p: &QkdParams) -> Result<f64> {
    p.validate()?;
    Ok(p.eta * p.mu * p.f * 10f64.powf(-p.l_f * p.d / 10.0))
}

/// COW: tau/(1+tau); DPS: tau' /(1+tau') with tau' = tau 10^(-l_m/10).
/// The dead-time factor 1/(1 + C t_d) applies only when the correction
/// flag is set.
pub fn clicks(p: &QkdParams) -> Result<f64> {
    let t = tau(p)?;
    let effective = match p.protocol {
        QkdProtocol::Cow => t,
        QkdProtocol::Dps => t * 10f64.powf(-p.l_m.unwrap_or(0.0) / 10.0),
    };
    let base = effective / (1.0 + effective);
    Ok(if p.dead_time_correction {
        base / (1.0 + base * p.t_d)
    } else {
        base
    })
}

#[derive(Clone, Copy, Debug)]
pub struct KeyRateResult {
    pub tau: f64,
    pub clicks: f64,
    pub key_rate: f64,
    pub dead_time_corrected: bool,
}

/// COW: C (1-DR)(1-CR); DPS: 2 C (1-DR)(1-CR).
pub fn key_rate(p: &QkdParams) -> Result<KeyRateResult> {
    let t = tau(p)?;
    let c = clicks(p)?;
    let factor = match p.protocol {
        QkdProtocol::Cow => 1.0,
        QkdProtocol::Dps => 2.0,
    };
    Ok(KeyRateResult {
        tau: t,
        clicks: c,
        key_rate: factor * c * (1.0 - p.dr) * (1.0 - p.cr),
        dead_time_corrected: p.dead_time_correction,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    DiscloseRate,
    CompressionRatio,
    DeadTime,
    Distance,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::DiscloseRate => "dr",
            SweepAxis::CompressionRatio => "cr",
            SweepAxis::DeadTime => "t_d",
            SweepAxis::Distance => "d",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dr" => Ok(SweepAxis::DiscloseRate),
            "cr" => Ok(SweepAxis::CompressionRatio),
            "t_d" | "td" | "dead_time" => Ok(SweepAxis::DeadTime),
            "d" | "distance" => Ok(SweepAxis::Distance),
            other => Err(Error::InvalidArgument(format!(
                "unknown sweep axis \"{other}\""
            ))),
        }
    }

    fn allowed_range(&self) -> (f64, f64) {
        match self {
            SweepAxis::DiscloseRate => DR_RANGE,
            SweepAxis::CompressionRatio => CR_RANGE,
            SweepAxis::DeadTime => DEAD_TIME_RANGE,
            SweepAxis::Distance => DISTANCE_RANGE,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SweepRow {
    pub protocol: QkdProtocol,
    pub d_km: f64,
    pub dr: f64,
    pub cr: f64,
    pub t_d_s: f64,
    pub result: KeyRateResult,
}

/// One key-rate evaluation per grid point along the chosen axis; grid
/// values must stay inside the allowed operating range of that axis.
pub fn sweep(base: &QkdParams, axis: SweepAxis, grid: &[f64]) -> Result<Vec<SweepRow>> {
    base.validate()?;
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty sweep grid".into()));
    }
    let (lo, hi) = axis.allowed_range();
    let slack = 1e-9 * (hi - lo);
    for &v in grid {
        if v < lo - slack || v > hi + slack {
            return Err(Error::OutOfRange {
                name: axis.name().into(),
                value: v,
                min: lo,
                max: hi,
            });
        }
    }
    let mut rows = Vec::with_capacity(grid.len());
    for &v in grid {
        let mut p = *base;
        match axis {
            SweepAxis::DiscloseRate => p.dr = v,
            SweepAxis::CompressionRatio => p.cr = v,
            SweepAxis::DeadTime => p.t_d = v,
            SweepAxis::Distance => p.d = v,
        }
        rows.push(SweepRow {
            protocol: p.protocol,
            d_km: p.d,
            dr: p.dr,
            cr: p.cr,
            t_d_s: p.t_d,
            result: key_rate(&p)?,
        });
    }
    Ok(rows)
}

/// A parsed sweep description: base parameters, axis and grid.
#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub base: QkdParams,
    pub axis: SweepAxis,
    pub grid: Vec<f64>,
}

/// Parse a key = value run configuration:
///
/// ```text
/// protocol = dps
/// d = 80            # km
/// dr = 0.03125
/// cr = 0.5
/// t_d = 50e-6       # seconds
/// dead_time_correction = false
/// sweep = dr
/// grid = 0.03125, 0.0625, 0.125, 0.25, 0.5
/// ```
///
/// Unlisted keys keep their protocol defaults; `mu`, `l_f`, `f`, `eta`
/// and `l_m` may be overridden the same way.
pub fn parse_config(text: &str) -> Result<SweepConfig> {
    let mut protocol = QkdProtocol::Dps;
    let mut pairs: Vec<(String, String)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: lineno + 1,
            msg: "expected key = value".into(),
        })?;
        let key = key.trim().to_ascii_lowercase();
        let value = value.trim().to_string();
        if key == "protocol" {
            protocol = QkdProtocol::parse(&value)?;
        } else {
            pairs.push((key, value));
        }
    }
    let mut base = QkdParams::defaults(protocol);
    let mut axis = SweepAxis::DiscloseRate;
    let mut grid: Option<Vec<f64>> = None;
    let parse_f64 = |key: &str, v: &str| -> Result<f64> {
        v.parse()
            .map_err(|_| Error::InvalidArgument(format!("bad numeric value for {key}: {v}")))
    };
    for (key, value) in pairs {
        match key.as_str() {
            "mu" => base.mu = parse_f64(&key, &value)?,
            "l_f" => base.l_f = parse_f64(&key, &value)?,
            "d" => base.d = parse_f64(&key, &value)?,
            "f" => base.f = parse_f64(&key, &value)?,
            "eta" => base.eta = parse_f64(&key, &value)?,
            "t_d" => base.t_d = parse_f64(&key, &value)?,
            "l_m" => base.l_m = Some(parse_f64(&key, &value)?),
            "dr" => base.dr = parse_f64(&key, &value)?,
            "cr" => base.cr = parse_f64(&key, &value)?,
            "dead_time_correction" => {
                base.dead_time_correction = value.parse().map_err(|_| {
                    Error::InvalidArgument(format!("bad boolean for {key}: {value}"))
                })?
            }
            "sweep" => axis = SweepAxis::parse(&value)?,
            "grid" => {
                let parsed: Result<Vec<f64>> = value
                    .split(',')
                    .map(|v| parse_f64("grid", v.trim()))
                    .collect();
                grid = Some(parsed?);
            }
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown configuration key \"{other}\""
                )))
            }
        }
    }
    base.validate()?;
    let grid = grid.unwrap_or_else(|| match axis {
        SweepAxis::DiscloseRate => (0..16).map(|i| 0.03125 + i as f64 * 0.03125).collect(),
        SweepAxis::CompressionRatio => (0..10).map(|i| 0.5 + i as f64 * 0.05).collect(),
        SweepAxis::DeadTime => (0..7).map(|i| 20e-6 + i as f64 * 5e-6).collect(),
        SweepAxis::Distance => (0..9).map(|i| 40.0 + i as f64 * 10.0).collect(),
    });
    Ok(SweepConfig { base, axis, grid })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tau_at_zero_distance() {
        let mut p = QkdParams::dps_defaults();
        p.d = 0.0;
        assert!((tau(&p).unwrap() - p.eta * p.mu * p.f).abs() < 1e-9);
    }

    #[test]
    fn tau_dps_80km_matches_formula() {
        let p = QkdParams::dps_defaults();
        let want = 0.1 * 0.2 * 1e9 * 10f64.powf(-1.6);
        let got = tau(&p).unwrap();
        assert!((got - want).abs() < 1.0);
        assert!((got - 5.024e5).abs() / 5.024e5 < 1e-3);
    }

    #[test]
    fn tau_doubles_distance_multiplies_attenuation() {
        let mut p = QkdParams::cow_defaults();
        p.d = 40.0;
        let t1 = tau(&p).unwrap();
        p.d = 80.0;
        let t2 = tau(&p).unwrap();
        let atten = 10f64.powf(-p.l_f * 40.0 / 10.0);
        assert!((t2 - t1 * atten).abs() / t2 < 1e-12);
    }

    #[test]
    fn negative_distance_rejected() {
        let mut p = QkdParams::cow_defaults();
        p.d = -5.0;
        assert!(matches!(tau(&p), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn clicks_saturate_below_one() {
        let p = QkdParams::dps_defaults();
        let c = clicks(&p).unwrap();
        assert!(c < 1.0 && c > 0.999996);
        assert!((c - 0.99999685).abs() < 1e-7);
    }

    #[test]
    fn clicks_small_tau_linear() {
        let mut p = QkdParams::cow_defaults();
        p.mu = 1e-12;
        let t = tau(&p).unwrap();
        let c = clicks(&p).unwrap();
        assert!((c - t).abs() / t < 1e-6);
    }

    #[test]
    fn dps_clicks_smaller_than_cow_at_equal_tau() {
        // identical tau, DPS carries the extra interferometer loss factor
        let mut cow = QkdParams::cow_defaults();
        let mut dps = QkdParams::dps_defaults();
        cow.mu = 0.2;
        cow.f = 1e9;
        cow.l_f = 0.2;
        dps.d = cow.d;
        assert!((tau(&cow).unwrap() - tau(&dps).unwrap()).abs() < 1e-9);
        assert!(clicks(&dps).unwrap() < clicks(&cow).unwrap());
    }

    #[test]
    fn key_rate_factorizes() {
        for p in [QkdParams::cow_defaults(), QkdParams::dps_defaults()] {
            let r = key_rate(&p).unwrap();
            let factor = if p.protocol == QkdProtocol::Dps {
                2.0
            } else {
                1.0
            };
            let expect = factor * r.clicks * (1.0 - p.dr) * (1.0 - p.cr);
            assert!((r.key_rate - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn full_disclosure_or_compression_kills_key() {
        let mut p = QkdParams::cow_defaults();
        p.dr = 1.0;
        assert!(key_rate(&p).unwrap().key_rate.abs() < 1e-15);
        p.dr = 0.1;
        p.cr = 1.0;
        assert!(key_rate(&p).unwrap().key_rate.abs() < 1e-15);
    }

    #[test]
    fn dr_factor_ratio_is_exact() {
        let mut a = QkdParams::dps_defaults();
        a.dr = 0.03125;
        a.cr = 0.5;
        let mut b = a;
        b.dr = 0.5;
        let ra = key_rate(&a).unwrap().key_rate;
        let rb = key_rate(&b).unwrap().key_rate;
        assert!((ra / rb - 1.9375).abs() < 1e-12);
    }

    #[test]
    fn sweeps_are_monotone() {
        let base = QkdParams::dps_defaults();
        let dr_grid: Vec<f64> = (0..8).map(|i| 0.03125 + i as f64 * 0.06).collect();
        let rows = sweep(&base, SweepAxis::DiscloseRate, &dr_grid).unwrap();
        for w in rows.windows(2) {
            assert!(w[1].result.key_rate < w[0].result.key_rate);
        }
        let d_grid: Vec<f64> = (0..9).map(|i| 40.0 + i as f64 * 10.0).collect();
        let rows = sweep(&base, SweepAxis::Distance, &d_grid).unwrap();
        for w in rows.windows(2) {
            assert!(w[1].result.key_rate < w[0].result.key_rate);
        }
        let mut corrected = base;
        corrected.dead_time_correction = true;
        let td_grid: Vec<f64> = (0..7).map(|i| 20e-6 + i as f64 * 5e-6).collect();
        let rows = sweep(&corrected, SweepAxis::DeadTime, &td_grid).unwrap();
        for w in rows.windows(2) {
            assert!(w[1].result.key_rate <= w[0].result.key_rate);
        }
    }

    #[test]
    fn out_of_range_grid_rejected_with_range() {
        let base = QkdParams::dps_defaults();
        let err = sweep(&base, SweepAxis::DiscloseRate, &[0.6]).unwrap_err();
        match err {
            Error::OutOfRange { min, max, .. } => {
                assert!((min - 0.03125).abs() < 1e-12);
                assert!((max - 0.5).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn config_round_trip() {
        let text = "\
# DPS run at 100 km
protocol = dps
d = 100
cr = 0.9
dead_time_correction = true
sweep = dr
grid = 0.03125, 0.0625, 0.125
";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.base.protocol, QkdProtocol::Dps);
        assert_eq!(cfg.base.d, 100.0);
        assert_eq!(cfg.base.cr, 0.9);
        assert!(cfg.base.dead_time_correction);
        assert_eq!(cfg.axis, SweepAxis::DiscloseRate);
        assert_eq!(cfg.grid.len(), 3);
        let rows = sweep(&cfg.base, cfg.axis, &cfg.grid).unwrap();
        assert_eq!(rows.len(), 3);
    }

    #[test]
    fn config_rejects_unknown_key() {
        assert!(parse_config("protocol = cow\nwavelength = 1550\n").is_err());
        assert!(parse_config("protocol = cow\nbad line\n").is_err());
    }

    #[test]
    fn dps_beats_cow_on_default_grid() {
        let cow = QkdParams::cow_defaults();
        let dps = QkdParams::dps_defaults();
        for d in [40.0, 60.0, 80.0, 100.0, 120.0] {
            let mut c = cow;
            c.d = d;
            let mut q = dps;
            q.d = d;
            assert!(
                key_rate(&q).unwrap().key_rate > key_rate(&c).unwrap().key_rate,
                "DPS should beat COW at {d} km"
            );
        }
    }
}
