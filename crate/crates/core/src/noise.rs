//! Channel noise: amplitude damping and an intercept-resend eavesdropper,
//! composed into ordered pipelines.

use std::fmt;

use crate::error::{QentError, Result};
use crate::linalg::AmplitudePair;
use crate::register::QuantumRegister;
use crate::rng::RandomSource;

/// Counters a stage accumulates across every register it has processed.
pub type Tally = Vec<(&'static str, u64)>;

pub trait NoiseStage: fmt::Debug + Send {
    fn name(&self) -> &'static str;
    /// Mutates `reg` in place. Never changes its length.
    fn apply(&mut self, reg: &mut QuantumRegister, rng: &mut RandomSource);
    fn tally(&self) -> Tally;
}

fn check_unit(name: &str, v: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(QentError::validation(format!("{name} must be in [0, 1], got {v}")))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EavesdropTally {
    pub intercepted: u64,
    /// Intercepted qubits that could be measured.
    pub measured: u64,
    /// Intercepted qubits that were lost and got a random bit plus a fresh qubit.
    pub refreshed: u64,
    /// Bits Eve recorded as 1.
    pub ones: u64,
}

/// Measures a random fraction of qubits in the rectilinear basis and resends
/// a fresh basis state matching what it saw.
#[derive(Debug, Clone)]
pub struct InterceptResendEavesdropper {
    rate: f64,
    tally: EavesdropTally,
}

impl Default for InterceptResendEavesdropper {
    fn default() -> Self {
        Self {
            rate: 0.05,
            tally: EavesdropTally::default(),
        }
    }
}

impl InterceptResendEavesdropper {
    pub fn new(rate: f64) -> Result<Self> {
        Ok(Self {
            rate: check_unit("eavesdrop rate", rate)?,
            tally: EavesdropTally::default(),
        })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn counts(&self) -> EavesdropTally {
        self.tally
    }
}

impl NoiseStage for InterceptResendEavesdropper {
    fn name(&self) -> &'static str {
        "eavesdrop"
    }

    fn apply(&mut self, reg: &mut QuantumRegister, rng: &mut RandomSource) {
        let t = eavesdrop(reg, self.rate, rng);
        self.tally.intercepted += t.intercepted;
        self.tally.measured += t.measured;
        self.tally.refreshed += t.refreshed;
        self.tally.ones += t.ones;
    }

    fn tally(&self) -> Tally {
        vec![
            ("intercepted", self.tally.intercepted),
            ("measured", self.tally.measured),
            ("refreshed", self.tally.refreshed),
            ("ones", self.tally.ones),
        ]
    }
}

/// Intercept-resend on every qubit independently with probability `rate`.
pub fn eavesdrop(reg: &mut QuantumRegister, rate: f64, rng: &mut RandomSource) -> EavesdropTally {
    let mut t = EavesdropTally::default();
    for pos in 0..reg.len() {
        if !rng.chance(rate) {
            continue;
        }
        t.intercepted += 1;
        let bit = match reg.measure(pos, rng) {
            Ok(b) => {
                t.measured += 1;
                b
            }
            Err(_) => {
                t.refreshed += 1;
                rng.next_bit()
            }
        };
        t.ones += u64::from(bit);
        reg.set_state(pos, AmplitudePair::basis(bit)).expect("pos in range");
    }
    t
}

/// How a damping factor turns into qubit loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DampingMode {
    /// Sample the operator-sum: lost with probability η·|β|², otherwise the
    /// no-jump branch shrinks β.
    KrausTrajectory,
    /// η is the fraction of qubits the channel takes: each qubit is lost
    /// with probability η whatever its state; survivors are untouched.
    #[default]
    FractionAffected,
}

impl fmt::Display for DampingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DampingMode::KrausTrajectory => "kraus",
            DampingMode::FractionAffected => "fraction",
        })
    }
}

impl std::str::FromStr for DampingMode {
    type Err = QentError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kraus" => Ok(DampingMode::KrausTrajectory),
            "fraction" => Ok(DampingMode::FractionAffected),
            other => Err(QentError::validation(format!(
                "unknown damping mode {other:?} (expected kraus or fraction)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AmplitudeDampingChannel {
    eta: f64,
    mode: DampingMode,
    lost: u64,
    passed: u64,
}

impl AmplitudeDampingChannel {
    pub fn new(eta: f64, mode: DampingMode) -> Result<Self> {
        Ok(Self {
            eta: check_unit("damping factor", eta)?,
            mode,
            lost: 0,
            passed: 0,
        })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn mode(&self) -> DampingMode {
        self.mode
    }
}

impl NoiseStage for AmplitudeDampingChannel {
    fn name(&self) -> &'static str {
        "damp"
    }

    fn apply(&mut self, reg: &mut QuantumRegister, rng: &mut RandomSource) {
        let before = count_lost(reg);
        match self.mode {
            DampingMode::KrausTrajectory => damp(reg, self.eta, rng),
            DampingMode::FractionAffected => damp_fraction(reg, self.eta, rng),
        }
        let newly = count_lost(reg) - before;
        self.lost += newly;
        self.passed += reg.len() as u64 - newly;
    }

    fn tally(&self) -> Tally {
        vec![("lost", self.lost), ("passed", self.passed)]
    }
}

fn count_lost(reg: &QuantumRegister) -> u64 {
    reg.qubits().iter().filter(|q| q.lost).count() as u64
}

/// One Kraus trajectory step per qubit.
pub fn damp(reg: &mut QuantumRegister, eta: f64, rng: &mut RandomSource) {
    let keep = (1.0 - eta).sqrt();
    for pos in 0..reg.len() {
        let q = reg.qubit_mut(pos).expect("pos in range");
        if q.lost {
            continue;
        }
        let jump = eta * q.state.beta.norm_sqr();
        if jump == 0.0 {
            continue;
        }
        if rng.chance(jump) {
            q.lost = true;
        } else {
            q.state = AmplitudePair::normalized(q.state.alpha, q.state.beta * keep)
                .expect("no-jump branch keeps nonzero weight");
        }
    }
}

/// Loses each qubit with probability `eta`.
pub fn damp_fraction(reg: &mut QuantumRegister, eta: f64, rng: &mut RandomSource) {
    for pos in 0..reg.len() {
        let q = reg.qubit_mut(pos).expect("pos in range");
        if !q.lost && rng.chance(eta) {
            q.lost = true;
        }
    }
}

/// Stages applied strictly in order.
#[derive(Debug, Default)]
pub struct ChannelPipeline {
    stages: Vec<Box<dyn NoiseStage>>,
}

impl ChannelPipeline {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(mut self, stage: impl NoiseStage + 'static) -> Self {
        self.stages.push(Box::new(stage));
        self
    }

    /// Damping only.
    pub fn control(eta: f64, mode: DampingMode) -> Result<Self> {
        Ok(Self::new().push(AmplitudeDampingChannel::new(eta, mode)?))
    }

    /// Eve sits at the sender: eavesdrop, then damp.
    pub fn eve_near_alice(rate: f64, eta: f64, mode: DampingMode) -> Result<Self> {
        Ok(Self::new()
            .push(InterceptResendEavesdropper::new(rate)?)
            .push(AmplitudeDampingChannel::new(eta, mode)?))
    }

    /// Eve sits at the receiver: damp, then eavesdrop.
    pub fn eve_near_bob(rate: f64, eta: f64, mode: DampingMode) -> Result<Self> {
        Ok(Self::new()
            .push(AmplitudeDampingChannel::new(eta, mode)?)
            .push(InterceptResendEavesdropper::new(rate)?))
    }

    pub fn stage_names(&self) -> Vec<&'static str> {
        self.stages.iter().map(|s| s.name()).collect()
    }

    pub fn tallies(&self) -> Vec<(&'static str, Tally)> {
        self.stages.iter().map(|s| (s.name(), s.tally())).collect()
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }
}

pub fn run_pipeline(p: &mut ChannelPipeline, reg: &mut QuantumRegister, rng: &mut RandomSource) {
    for stage in &mut p.stages {
        stage.apply(reg, rng);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{apply_operator_sum, c, make_amplitude_damping_kraus, DensityMatrix2, Matrix2};
    use crate::register::{Qubit, RegisterId};
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_6};

    fn filled(n: usize, s: AmplitudePair) -> QuantumRegister {
        QuantumRegister::from_qubits(RegisterId(1), vec![Qubit::new(s); n])
    }

    fn plus() -> AmplitudePair {
        AmplitudePair {
            alpha: c(FRAC_1_SQRT_2, 0.0),
            beta: c(FRAC_1_SQRT_2, 0.0),
        }
    }

    fn lost_fraction(reg: &QuantumRegister) -> f64 {
        count_lost(reg) as f64 / reg.len() as f64
    }

    #[test]
    fn rates_are_validated() {
        assert!(InterceptResendEavesdropper::new(1.5).is_err());
        assert!(AmplitudeDampingChannel::new(-0.1, DampingMode::KrausTrajectory).is_err());
        assert_eq!(InterceptResendEavesdropper::default().rate(), 0.05);
    }

    #[test]
    fn eavesdrop_rate_zero_is_identity() {
        let mut reg = filled(100, plus());
        let before = reg.clone();
        let t = eavesdrop(&mut reg, 0.0, &mut RandomSource::new(1));
        assert_eq!(reg, before);
        assert_eq!(t.intercepted, 0);
    }

    #[test]
    fn eavesdrop_resends_one_as_one() {
        let mut reg = filled(1, AmplitudePair::ONE);
        let t = eavesdrop(&mut reg, 1.0, &mut RandomSource::new(2));
        assert_eq!(t.ones, 1);
        assert_eq!(reg.qubit(0).unwrap().state, AmplitudePair::ONE);
    }

    #[test]
    fn eavesdrop_is_transparent_on_basis_states() {
        let mut rng = RandomSource::new(3);
        for rate in [0.1, 0.5, 1.0] {
            let states: Vec<Qubit> = (0..1000)
                .map(|i| Qubit::new(AmplitudePair::basis((i % 2) as u8)))
                .collect();
            let mut reg = QuantumRegister::from_qubits(RegisterId(1), states.clone());
            eavesdrop(&mut reg, rate, &mut rng);
            assert_eq!(reg.qubits(), &states[..]);
        }
    }

    #[test]
    fn eavesdrop_splits_plus_evenly() {
        let n = 100_000;
        let mut reg = filled(n, plus());
        let t = eavesdrop(&mut reg, 1.0, &mut RandomSource::new(4));
        let ones = reg.qubits().iter().filter(|q| q.state == AmplitudePair::ONE).count();
        assert_eq!(ones as u64, t.ones);
        assert!((ones as f64 / n as f64 - 0.5).abs() < 0.005);
    }

    #[test]
    fn eavesdrop_refreshes_lost_qubits() {
        let mut reg = QuantumRegister::from_qubits(RegisterId(1), vec![Qubit::lost(); 10]);
        let t = eavesdrop(&mut reg, 1.0, &mut RandomSource::new(5));
        assert_eq!(t.refreshed, 10);
        assert!(reg.qubits().iter().all(|q| !q.lost));
    }

    #[test]
    fn damp_zero_and_ground_state_unchanged() {
        let mut rng = RandomSource::new(6);
        let mut reg = filled(100, plus());
        let before = reg.clone();
        damp(&mut reg, 0.0, &mut rng);
        assert_eq!(reg, before);
        let mut reg = filled(100, AmplitudePair::ZERO);
        damp(&mut reg, 1.0, &mut rng);
        assert_eq!(count_lost(&reg), 0);
        assert!(reg.qubits().iter().all(|q| q.state == AmplitudePair::ZERO));
    }

    #[test]
    fn damp_loss_law() {
        let n = 100_000;
        let (s, co) = FRAC_PI_6.sin_cos();
        let cases = [
            AmplitudePair::ZERO,
            AmplitudePair::ONE,
            plus(),
            AmplitudePair {
                alpha: c(co, 0.0),
                beta: c(s, 0.0),
            },
        ];
        let mut rng = RandomSource::new(7);
        for eta in [0.3, 0.5, 0.9] {
            for st in cases {
                let mut reg = filled(n, st);
                damp(&mut reg, eta, &mut rng);
                let p = eta * st.beta.norm_sqr();
                let sigma = (p * (1.0 - p) / n as f64).sqrt();
                let got = lost_fraction(&reg);
                assert!((got - p).abs() <= 3.0 * sigma + 1e-12, "eta {eta} {st:?}: {got} vs {p}");
            }
        }
    }

    #[test]
    fn trajectory_ensemble_matches_operator_sum() {
        let n = 100_000;
        let eta = 0.5;
        let mut reg = filled(n, plus());
        damp(&mut reg, eta, &mut RandomSource::new(8));
        assert!((lost_fraction(&reg) - 0.25).abs() < 0.005);

        // lost qubits stand for the decayed |0⟩ image
        let mut sum = Matrix2::zero();
        for q in reg.qubits() {
            let s = if q.lost { AmplitudePair::ZERO } else { q.state };
            sum = sum.add(DensityMatrix2::from_pure(&s).matrix());
        }
        let avg = sum.scale(c(1.0 / n as f64, 0.0));
        let rho = DensityMatrix2::from_pure(&plus());
        let oracle = apply_operator_sum(&rho, &make_amplitude_damping_kraus(eta).unwrap()).unwrap();
        assert!(avg.max_abs_diff(oracle.matrix()) < 0.01);
    }

    #[test]
    fn fraction_mode_loses_eta_of_everything() {
        let n = 100_000;
        let mut reg = filled(n, AmplitudePair::ZERO);
        damp_fraction(&mut reg, 0.68, &mut RandomSource::new(9));
        assert!((lost_fraction(&reg) - 0.68).abs() < 0.005);
        let mut reg = filled(100, plus());
        damp_fraction(&mut reg, 1.0, &mut RandomSource::new(9));
        assert_eq!(count_lost(&reg), 100);
    }

    #[test]
    fn empty_pipeline_is_identity() {
        let mut reg = filled(10, plus());
        let before = reg.clone();
        run_pipeline(&mut ChannelPipeline::new(), &mut reg, &mut RandomSource::new(1));
        assert_eq!(reg, before);
    }

    #[test]
    fn pipeline_order_matters_at_full_damping() {
        let n = 100_000;
        let (s, co) = 0.4f64.sin_cos();
        let st = AmplitudePair {
            alpha: c(co, 0.0),
            beta: c(s, 0.0),
        };
        for mode in [DampingMode::KrausTrajectory, DampingMode::FractionAffected] {
            let mut reg = filled(n, st);
            let mut p = ChannelPipeline::eve_near_bob(1.0, 1.0, mode).unwrap();
            assert_eq!(p.stage_names(), ["damp", "eavesdrop"]);
            run_pipeline(&mut p, &mut reg, &mut RandomSource::new(10));
            assert_eq!(count_lost(&reg), 0);

            let mut reg = filled(n, st);
            let mut p = ChannelPipeline::eve_near_alice(1.0, 1.0, mode).unwrap();
            assert_eq!(p.stage_names(), ["eavesdrop", "damp"]);
            run_pipeline(&mut p, &mut reg, &mut RandomSource::new(11));
            let ones = p.tallies()[0].1[3].1 as f64 / n as f64;
            match mode {
                // qubits Eve resent as |1⟩ are lost, |0⟩ survive
                DampingMode::KrausTrajectory => assert!((lost_fraction(&reg) - ones).abs() < 0.005),
                DampingMode::FractionAffected => assert_eq!(count_lost(&reg), n as u64),
            }
        }
    }

    #[test]
    fn stage_tallies_accumulate() {
        let mut p = ChannelPipeline::control(1.0, DampingMode::FractionAffected).unwrap();
        let mut rng = RandomSource::new(12);
        for _ in 0..3 {
            let mut reg = filled(5, plus());
            run_pipeline(&mut p, &mut reg, &mut rng);
        }
        assert_eq!(p.tallies(), vec![("damp", vec![("lost", 15), ("passed", 0)])]);
    }
}
