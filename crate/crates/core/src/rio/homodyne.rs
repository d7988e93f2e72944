//! Coherent-probe discrimination statistics. The probe |z e^{i n theta}>
//! is read out by an X-quadrature homodyne measurement; adjacent Gaussian
//! peaks overlap and misidentification carries the erfc error probability.
//! Dissipation enters through D = e^{-gamma t}, which rescales every peak
//! position.

use crate::error::{Error, Result};
use crate::rio::register::DualRailRegister;
use crate::rng::SimRng;

#[derive(Clone, Copy, Debug)]
pub struct HomodyneModel {
    /// Initial coherent amplitude (real, positive).
    pub z: f64,
    /// Phase-shift unit theta = chi t in radians.
    pub theta: f64,
    /// Dissipation factor D = e^{-gamma t} in (0, 1].
    pub dissipation: f64,
}

impl HomodyneModel {
    pub fn new(z: f64, theta: f64, dissipation: f64) -> Result<Self> {
        if z <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "coherent amplitude z must be positive, got {z}"
            )));
        }
        if !(dissipation > 0.0 && dissipation <= 1.0) {
            return Err(Error::OutOfRange {
                name: "dissipation".into(),
                value: dissipation,
                min: 0.0,
                max: 1.0,
            });
        }
        Ok(HomodyneModel {
            z,
            theta,
            dissipation,
        })
    }

    /// Ideal probe at theta = pi, unit amplitude, no dissipation.
    pub fn ideal() -> Self {
        HomodyneModel {
            z: 1.0,
            theta: std::f64::consts::PI,
            dissipation: 1.0,
        }
    }

    fn peak(&self, n: i32) -> f64 {
        2.0 * self.dissipation * self.z * (n as f64 * self.theta).cos()
    }

    /// Separation between the Gaussian peaks of classes n1 and n2:
    /// 2 D z (cos n1 theta - cos n2 theta).
    pub fn peak_separation(&self, n1: i32, n2: i32) -> f64 {
        self.peak(n1) - self.peak(n2)
    }

    /// Midpoint of the two peaks: D z (cos n1 theta + cos n2 theta).
    pub fn midpoint(&self, n1: i32, n2: i32) -> f64 {
        (self.peak(n1) + self.peak(n2)) / 2.0
    }

    /// Misidentification probability between adjacent probe classes:
    /// (1/2) erfc(D z (cos n1 theta - cos n2 theta) / sqrt(2)).
    pub fn error_prob_between(&self, n1: i32, n2: i32) -> f64 {
        let arg = self.dissipation
            * self.z
            * ((n1 as f64 * self.theta).cos() - (n2 as f64 * self.theta).cos());
        0.5 * libm::erfc(arg / std::f64::consts::SQRT_2)
    }

    /// (P_1Suc, P_2Suc): the hidden-operator protocol survives unless all
    /// three of its discrimination stages err; the partially-unknown
    /// variant has one stage fewer.
    pub fn success_probabilities(&self) -> (f64, f64) {
        let p1 = self.error_prob_between(0, 1);
        let p2 = p1;
        let p31 = p1;
        let p32 = self.error_prob_between(1, 2);
        let p33 = self.error_prob_between(2, 3);
        let tail = p31 + p32 + p33;
        (1.0 - p1 * p2 * tail, 1.0 - p1 * tail)
    }
}

/// One homodyne readout class with its discrimination statistics against
/// the nearest distinguishable class present.
#[derive(Clone, Debug)]
pub struct DiscriminationResult {
    /// Phase index class |n|.
    pub outcome: u32,
    pub probability: f64,
    pub error_prob: f64,
    pub peak_separation: f64,
    pub midpoint: f64,
}

fn result_for_class(
    model: &HomodyneModel,
    classes: &[(u32, f64)],
    idx: usize,
) -> DiscriminationResult {
    let (n, prob) = classes[idx];
    // nearest other class present, else the next index up
    let adjacent = classes
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != idx)
        .min_by_key(|(_, (m, _))| m.abs_diff(n))
        .map(|(_, (m, _))| *m as i32)
        .unwrap_or(n as i32 + 1);
    DiscriminationResult {
        outcome: n,
        probability: prob,
        error_prob: model.error_prob_between(n as i32, adjacent).clamp(0.0, 1.0),
        peak_separation: model.peak_separation(n as i32, adjacent),
        midpoint: model.midpoint(n as i32, adjacent),
    }
}

/// Analytic mode: every distinguishable class with its Born probability
/// and the register collapsed onto it.
pub fn homodyne_discriminate(
    reg: &DualRailRegister,
    model: &HomodyneModel,
) -> Result<Vec<(DiscriminationResult, DualRailRegister)>> {
    let classes = reg.probe_classes()?;
    let mut out = Vec::with_capacity(classes.len());
    for (idx, (n, _)) in classes.iter().enumerate() {
        let mut collapsed = reg.clone();
        collapsed.collapse_probe_class(*n)?;
        out.push((result_for_class(model, &classes, idx), collapsed));
    }
    Ok(out)
}

/// Sampled mode: draw one class from the Born distribution and collapse
/// onto it.
pub fn homodyne_discriminate_sampled(
    reg: &mut DualRailRegister,
    model: &HomodyneModel,
    rng: &mut SimRng,
) -> Result<DiscriminationResult> {
    let classes = reg.probe_classes()?;
    let weights: Vec<f64> = classes.iter().map(|(_, p)| *p).collect();
    let idx = rng.sample_index(&weights);
    reg.collapse_probe_class(classes[idx].0)?;
    Ok(result_for_class(model, &classes, idx))
}

/// Monte-Carlo re-derivation of the misidentification rate: sample the
/// quadrature x from the true class's Gaussian (unit variance around the
/// peak), decide by the midpoint threshold, count errors.
pub fn monte_carlo_error_rate(
    model: &HomodyneModel,
    n1: i32,
    n2: i32,
    trials: u64,
    rng: &mut SimRng,
) -> f64 {
    let mid = model.midpoint(n1, n2);
    let peak1 = 2.0 * model.dissipation * model.z * (n1 as f64 * model.theta).cos();
    let peak2 = 2.0 * model.dissipation * model.z * (n2 as f64 * model.theta).cos();
    let mut errors = 0u64;
    for i in 0..trials {
        let class_one = i % 2 == 0;
        let peak = if class_one { peak1 } else { peak2 };
        let x = peak + rng.gaussian();
        // class 1 lies above the midpoint when its peak does
        let decide_one = if peak1 > peak2 { x > mid } else { x < mid };
        if decide_one != class_one {
            errors += 1;
        }
    }
    errors as f64 / trials as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn error_prob_reference_value() {
        // theta = pi, z = 1, D = 1 between classes 0 and 1:
        // (1/2) erfc(2 / sqrt(2)) ~ 0.02275
        let model = HomodyneModel::ideal();
        let p = model.error_prob_between(0, 1);
        assert!((p - 0.5 * libm::erfc(2.0 / std::f64::consts::SQRT_2)).abs() < 1e-15);
        assert!((p - 0.02275).abs() < 1e-4);
    }

    #[test]
    fn vanishing_dissipation_limit() {
        let model = HomodyneModel::new(1.0, PI, 1e-12).unwrap();
        assert!((model.error_prob_between(0, 1) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn peak_separation_and_midpoint() {
        let model = HomodyneModel::ideal();
        assert!((model.peak_separation(0, 1) - 4.0).abs() < 1e-12);
        assert!(model.midpoint(0, 1).abs() < 1e-12);
    }

    #[test]
    fn success_probability_desk_checks() {
        let ideal = HomodyneModel::ideal();
        let (p1, _p2) = ideal.success_probabilities();
        assert!((p1 - 0.99947).abs() < 1e-5);
        // D -> 0: every erfc argument vanishes, each term is 1/2
        let dead = HomodyneModel::new(1.0, PI, 1e-14).unwrap();
        let (p1, p2) = dead.success_probabilities();
        assert!((p1 - 0.625).abs() < 1e-9);
        assert!((p2 - 0.25).abs() < 1e-9);
    }

    #[test]
    fn success_probabilities_saturate_with_amplitude() {
        let strong = HomodyneModel::new(50.0, PI, 1.0).unwrap();
        let (p1, p2) = strong.success_probabilities();
        assert!(p1 > 1.0 - 1e-12);
        assert!(p2 > 1.0 - 1e-12);
    }

    #[test]
    fn p1_dominates_p2_on_grid() {
        for zi in 1..=10 {
            for di in 1..=10 {
                for ti in 1..=8 {
                    let model =
                        HomodyneModel::new(zi as f64 * 0.5, ti as f64 * PI / 8.0, di as f64 * 0.1)
                            .unwrap();
                    let (p1, p2) = model.success_probabilities();
                    assert!(p1 >= p2 - 1e-12);
                }
            }
        }
    }

    #[test]
    fn monte_carlo_matches_erfc() {
        let model = HomodyneModel::new(1.0, PI / 2.0, 0.8).unwrap();
        let analytic = model.error_prob_between(0, 1);
        let mut rng = SimRng::seed_from_u64(31);
        let empirical = monte_carlo_error_rate(&model, 0, 1, 200_000, &mut rng);
        // binomial 5-sigma band
        let sigma = (analytic * (1.0 - analytic) / 200_000.0).sqrt();
        assert!(
            (empirical - analytic).abs() < 5.0 * sigma + 1e-4,
            "empirical {empirical} vs analytic {analytic}"
        );
    }

    #[test]
    fn model_validation() {
        assert!(HomodyneModel::new(0.0, PI, 1.0).is_err());
        assert!(HomodyneModel::new(1.0, PI, 0.0).is_err());
        assert!(HomodyneModel::new(1.0, PI, 1.1).is_err());
    }

    #[test]
    fn single_class_register_discriminates_against_next_index() {
        // probe untouched: one class at n = 0 with certainty; the error
        // statistic is quoted against the hypothetical n = 1 class
        use crate::linalg::{C64, ZERO};
        let reg = DualRailRegister::product(&[("X", C64::new(1.0, 0.0), ZERO)]).unwrap();
        let model = HomodyneModel::ideal();
        let results = homodyne_discriminate(&reg, &model).unwrap();
        assert_eq!(results.len(), 1);
        let (res, collapsed) = &results[0];
        assert_eq!(res.outcome, 0);
        assert!((res.probability - 1.0).abs() < 1e-12);
        assert!((res.error_prob - 0.5 * libm::erfc(2.0 / std::f64::consts::SQRT_2)).abs() < 1e-15);
        assert!((res.peak_separation - 4.0).abs() < 1e-12);
        assert!(res.midpoint.abs() < 1e-12);
        assert!((collapsed.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampled_discrimination_follows_born_weights() {
        use crate::linalg::C64;
        let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let model = HomodyneModel::ideal();
        let mut rng = SimRng::seed_from_u64(77);
        let mut zeros = 0;
        for _ in 0..2000 {
            let mut reg = DualRailRegister::product(&[("X", s, s)]).unwrap();
            reg.cross_kerr(0, 0, 1).unwrap();
            let res = homodyne_discriminate_sampled(&mut reg, &model, &mut rng).unwrap();
            if res.outcome == 0 {
                zeros += 1;
            }
        }
        // p = 1/2; 5 sigma of 2000 trials
        assert!((zeros as f64 - 1000.0).abs() < 5.0 * (2000.0f64 * 0.25).sqrt());
    }
}
