//! BB84 over a noisy channel: Alice prepares, the pipeline disturbs, Bob
//! measures, and the run is sifted with oracle access to both sides.

use serde::{Deserialize, Serialize};

use crate::error::{QentError, Result};
use crate::linalg::{AmplitudePair, Gate};
use crate::noise::{run_pipeline, ChannelPipeline};
use crate::register::{Qubit, QuantumRegister, RegisterId};
use crate::rng::RandomSource;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Rectilinear,
    Diagonal,
}

impl Basis {
    fn random(rng: &mut RandomSource) -> Self {
        if rng.next_bit() == 0 {
            Basis::Rectilinear
        } else {
            Basis::Diagonal
        }
    }
}

#[derive(Debug)]
pub struct Bb84Config {
    pub n: usize,
    pub pipeline: ChannelPipeline,
    pub seed: u64,
}

impl Bb84Config {
    pub fn new(n: usize, pipeline: ChannelPipeline, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(QentError::validation("a run needs at least one qubit"));
        }
        Ok(Self { n, pipeline, seed })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RunStats {
    pub sent: u64,
    pub received: u64,
    pub lost_at_bob: u64,
    pub sifted: u64,
    pub matched: u64,
    /// Matched sifted bits per qubit sent.
    pub efficiency: f64,
    pub sifted_error_rate: f64,
    /// `-10·log10(received/sent)`; infinite when nothing arrived.
    pub attenuation_db: f64,
}

impl RunStats {
    pub fn from_counts(sent: u64, received: u64, sifted: u64, matched: u64) -> Self {
        let sifted_error_rate = if sifted > 0 {
            1.0 - matched as f64 / sifted as f64
        } else {
            0.0
        };
        Self {
            sent,
            received,
            lost_at_bob: sent - received,
            sifted,
            matched,
            efficiency: matched as f64 / sent as f64,
            sifted_error_rate,
            // `+ 0.0` turns the lossless −0 into 0
            attenuation_db: -10.0 * (received as f64 / sent as f64).log10() + 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub bits: Vec<u8>,
    pub bases: Vec<Basis>,
    pub register: QuantumRegister,
}

/// Qubit encoding `bit` in `basis`: |0⟩, σx if the bit is set, then H for diagonal.
pub fn encode_qubit(bit: u8, basis: Basis) -> AmplitudePair {
    let mut q = AmplitudePair::ZERO;
    if bit == 1 {
        q = Gate::pauli_x().apply(&q);
    }
    if basis == Basis::Diagonal {
        q = Gate::hadamard().apply(&q);
    }
    q
}

pub fn alice_prepare(n: usize, rng: &mut RandomSource) -> Prepared {
    let mut bits = Vec::with_capacity(n);
    let mut bases = Vec::with_capacity(n);
    let mut qubits = Vec::with_capacity(n);
    for _ in 0..n {
        let bit = rng.next_bit();
        let basis = Basis::random(rng);
        qubits.push(Qubit::new(encode_qubit(bit, basis)));
        bits.push(bit);
        bases.push(basis);
    }
    Prepared {
        bits,
        bases,
        register: QuantumRegister::from_qubits(RegisterId(0), qubits),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Received {
    pub bases: Vec<Basis>,
    /// `None` where the qubit was lost (an erasure).
    pub bits: Vec<Option<u8>>,
}

impl Received {
    pub fn erasures(&self) -> Vec<bool> {
        self.bits.iter().map(Option::is_none).collect()
    }
}

pub fn bob_measure(reg: &mut QuantumRegister, rng: &mut RandomSource) -> Received {
    let n = reg.len();
    let mut bases = Vec::with_capacity(n);
    let mut bits = Vec::with_capacity(n);
    for pos in 0..n {
        let basis = Basis::random(rng);
        bases.push(basis);
        if reg.qubit(pos).expect("pos in range").lost {
            bits.push(None);
            continue;
        }
        if basis == Basis::Diagonal {
            reg.apply_gate(&Gate::hadamard(), pos).expect("not lost");
        }
        bits.push(reg.measure(pos, rng).ok());
    }
    Received { bases, bits }
}

/// Positions where the bases agree and nothing was erased.
pub fn sift(alice: &[Basis], bob: &[Basis], erasures: &[bool]) -> Result<Vec<usize>> {
    if alice.len() != bob.len() || alice.len() != erasures.len() {
        return Err(QentError::validation(format!(
            "length mismatch: {} alice bases, {} bob bases, {} erasure flags",
            alice.len(),
            bob.len(),
            erasures.len()
        )));
    }
    Ok((0..alice.len())
        .filter(|&i| alice[i] == bob[i] && !erasures[i])
        .collect())
}

pub fn run_bb84(cfg: &mut Bb84Config) -> Result<RunStats> {
    let mut rng = RandomSource::new(cfg.seed);
    let mut prepared = alice_prepare(cfg.n, &mut rng);
    run_pipeline(&mut cfg.pipeline, &mut prepared.register, &mut rng);
    let received = bob_measure(&mut prepared.register, &mut rng);
    let erasures = received.erasures();
    let kept = sift(&prepared.bases, &received.bases, &erasures)?;
    let matched = kept
        .iter()
        .filter(|&&i| received.bits[i] == Some(prepared.bits[i]))
        .count();
    let arrived = erasures.iter().filter(|e| !**e).count();
    Ok(RunStats::from_counts(
        cfg.n as u64,
        arrived as u64,
        kept.len() as u64,
        matched as u64,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::noise::DampingMode;
    use std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn encodings() {
        assert_eq!(encode_qubit(0, Basis::Rectilinear), AmplitudePair::ZERO);
        assert_eq!(encode_qubit(1, Basis::Rectilinear), AmplitudePair::ONE);
        let minus = AmplitudePair {
            alpha: c(FRAC_1_SQRT_2, 0.0),
            beta: c(-FRAC_1_SQRT_2, 0.0),
        };
        assert!(encode_qubit(1, Basis::Diagonal).equal_up_to_phase(&minus, 1e-12));
        assert!((encode_qubit(1, Basis::Diagonal).beta.re + FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn bob_reads_matching_bases_exactly() {
        let mut rng = RandomSource::new(1);
        for (bit, basis) in [(1, Basis::Rectilinear), (1, Basis::Diagonal), (0, Basis::Diagonal)] {
            for _ in 0..50 {
                let mut reg =
                    QuantumRegister::from_qubits(RegisterId(0), vec![Qubit::new(encode_qubit(bit, basis))]);
                let got = bob_measure(&mut reg, &mut rng);
                if got.bases[0] == basis {
                    assert_eq!(got.bits[0], Some(bit));
                }
            }
        }
    }

    #[test]
    fn lost_qubits_are_erasures() {
        let mut reg = QuantumRegister::from_qubits(RegisterId(0), vec![Qubit::lost(); 3]);
        let got = bob_measure(&mut reg, &mut RandomSource::new(2));
        assert_eq!(got.erasures(), vec![true; 3]);
    }

    #[test]
    fn sift_cases() {
        use Basis::*;
        let a = [Rectilinear, Diagonal, Diagonal];
        assert_eq!(sift(&a, &a, &[false; 3]).unwrap(), vec![0, 1, 2]);
        assert_eq!(sift(&a, &[Diagonal, Rectilinear, Rectilinear], &[false; 3]).unwrap(), Vec::<usize>::new());
        assert_eq!(sift(&a, &a, &[false, true, false]).unwrap(), vec![0, 2]);
        assert!(matches!(sift(&a, &a[..2], &[false; 3]), Err(QentError::Validation(_))));
    }

    #[test]
    fn random_bases_sift_half() {
        let n = 10_000;
        let mut rng = RandomSource::new(3);
        let p = alice_prepare(n, &mut rng);
        let bob: Vec<Basis> = (0..n).map(|_| Basis::random(&mut rng)).collect();
        let kept = sift(&p.bases, &bob, &vec![false; n]).unwrap();
        assert!((kept.len() as f64 / n as f64 - 0.5).abs() < 0.015);
    }

    #[test]
    fn noiseless_run() {
        let mut cfg = Bb84Config::new(10_000, ChannelPipeline::new(), 4).unwrap();
        let s = run_bb84(&mut cfg).unwrap();
        assert!((s.efficiency - 0.5).abs() < 0.02);
        assert_eq!(s.sifted_error_rate, 0.0);
        assert_eq!(s.matched, s.sifted);
        assert_eq!(s.attenuation_db, 0.0);
    }

    #[test]
    fn full_damping_kills_the_key() {
        let pipeline = ChannelPipeline::control(1.0, DampingMode::FractionAffected).unwrap();
        let mut cfg = Bb84Config::new(1000, pipeline, 5).unwrap();
        let s = run_bb84(&mut cfg).unwrap();
        assert_eq!(s.efficiency, 0.0);
        assert_eq!(s.received, 0);
        assert!(s.attenuation_db.is_infinite());
    }

    #[test]
    fn count_chain_and_determinism() {
        for seed in 0..20 {
            let make = || {
                let p = ChannelPipeline::eve_near_alice(0.3, 0.4, DampingMode::KrausTrajectory).unwrap();
                Bb84Config::new(200, p, seed).unwrap()
            };
            let s = run_bb84(&mut make()).unwrap();
            assert!(s.matched <= s.sifted && s.sifted <= s.received && s.received <= s.sent);
            assert_eq!(s, run_bb84(&mut make()).unwrap());
        }
    }

    #[test]
    fn zero_qubits_rejected() {
        assert!(Bb84Config::new(0, ChannelPipeline::new(), 0).is_err());
    }
}
