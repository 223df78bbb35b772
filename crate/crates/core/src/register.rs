//! Quantum registers: ordered collections of independent qubits.
//!
//! All gate and measurement traffic goes through the register so that
//! higher layers (entanglement bookkeeping, channel noise) can intercept it.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{QentError, Result};
use crate::linalg::{AmplitudePair, Gate, NORM_TOL};
use crate::rng::RandomSource;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RegisterId(pub u64);

impl fmt::Display for RegisterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{:#x}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Qubit {
    pub state: AmplitudePair,
    /// Set by amplitude damping; a lost qubit's state is ignored.
    pub lost: bool,
}

impl Qubit {
    pub fn new(state: AmplitudePair) -> Self {
        Self { state, lost: false }
    }

    pub fn lost() -> Self {
        Self {
            state: AmplitudePair::ZERO,
            lost: true,
        }
    }
}

impl Default for Qubit {
    fn default() -> Self {
        Self::new(AmplitudePair::ZERO)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumRegister {
    id: RegisterId,
    qubits: Vec<Qubit>,
}

impl QuantumRegister {
    /// `len` qubits, all |0⟩.
    pub fn new(id: RegisterId, len: usize) -> Self {
        Self {
            id,
            qubits: vec![Qubit::default(); len],
        }
    }

    pub fn from_qubits(id: RegisterId, qubits: Vec<Qubit>) -> Self {
        Self { id, qubits }
    }

    pub fn id(&self) -> RegisterId {
        self.id
    }

    pub fn len(&self) -> usize {
        self.qubits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.qubits.is_empty()
    }

    pub fn qubits(&self) -> &[Qubit] {
        &self.qubits
    }

    pub fn qubit(&self, pos: usize) -> Result<&Qubit> {
        let len = self.qubits.len();
        self.qubits.get(pos).ok_or(QentError::OutOfRange { pos, len })
    }

    pub fn qubit_mut(&mut self, pos: usize) -> Result<&mut Qubit> {
        let len = self.qubits.len();
        self.qubits
            .get_mut(pos)
            .ok_or(QentError::OutOfRange { pos, len })
    }

    /// Overwrites a slot, clearing its lost flag.
    pub fn set_state(&mut self, pos: usize, state: AmplitudePair) -> Result<()> {
        *self.qubit_mut(pos)? = Qubit::new(state);
        Ok(())
    }

    pub fn mark_lost(&mut self, pos: usize) -> Result<()> {
        self.qubit_mut(pos)?.lost = true;
        Ok(())
    }

    fn live_qubit_mut(&mut self, pos: usize) -> Result<&mut Qubit> {
        let q = self.qubit_mut(pos)?;
        if q.lost {
            return Err(QentError::QubitLost(pos));
        }
        Ok(q)
    }

    pub fn apply_gate(&mut self, gate: &Gate, pos: usize) -> Result<()> {
        let q = self.live_qubit_mut(pos)?;
        q.state = gate.apply(&q.state);
        Ok(())
    }

    /// Computational-basis measurement: 0 iff the draw is below |α|².
    pub fn measure(&mut self, pos: usize, rng: &mut RandomSource) -> Result<u8> {
        let q = self.qubit_mut(pos)?;
        if q.lost {
            return Err(QentError::NoDefinedOutcome(pos));
        }
        let bit = u8::from(rng.next_f64() >= q.state.prob_zero());
        q.state = AmplitudePair::basis(bit);
        Ok(bit)
    }

    /// Measurement in the basis rotated by `theta`: rotate by −θ, measure,
    /// then rotate the collapsed state back by θ.
    pub fn measure_in_basis(
        &mut self,
        pos: usize,
        theta: f64,
        rng: &mut RandomSource,
    ) -> Result<u8> {
        {
            let q = self.qubit(pos)?;
            if q.lost {
                return Err(QentError::NoDefinedOutcome(pos));
            }
        }
        self.apply_gate(&Gate::ry(-theta), pos)?;
        let bit = self.measure(pos, rng)?;
        self.apply_gate(&Gate::ry(theta), pos)?;
        Ok(bit)
    }

    /// Controlled single-qubit gate.
    ///
    /// Qubits are stored as independent pairs, so the control must sit on a
    /// computational basis state; a superposed control would entangle the two.
    pub fn apply_controlled(&mut self, gate: &Gate, control: usize, target: usize) -> Result<()> {
        if control == target {
            return Err(QentError::validation("control and target coincide"));
        }
        self.qubit(target)?;
        let c = *self.qubit(control)?;
        if c.lost {
            return Err(QentError::QubitLost(control));
        }
        let p1 = c.state.beta.norm_sqr();
        if p1 >= 1.0 - NORM_TOL {
            self.apply_gate(gate, target)
        } else if p1 <= NORM_TOL {
            Ok(())
        } else {
            Err(QentError::UnrepresentableEntanglingOperation(format!(
                "control qubit {control} is in superposition (P(1) = {p1})"
            )))
        }
    }

    pub fn cnot(&mut self, control: usize, target: usize) -> Result<()> {
        self.apply_controlled(&Gate::pauli_x(), control, target)
    }

    /// Doubly controlled σx; both controls must be basis states.
    pub fn toffoli(&mut self, c1: usize, c2: usize, target: usize) -> Result<()> {
        let first = *self.qubit(c1)?;
        if first.lost {
            return Err(QentError::QubitLost(c1));
        }
        let p1 = first.state.beta.norm_sqr();
        if p1 >= 1.0 - NORM_TOL {
            self.cnot(c2, target)
        } else if p1 <= NORM_TOL {
            self.qubit(c2)?;
            self.qubit(target)?;
            Ok(())
        } else {
            Err(QentError::UnrepresentableEntanglingOperation(format!(
                "control qubit {c1} is in superposition (P(1) = {p1})"
            )))
        }
    }

    /// Wire encoding (see [`crate::wire::RegisterRecord`]).
    pub fn serialize(&self) -> Vec<u8> {
        crate::wire::RegisterRecord::from_register(self, Vec::new()).to_bytes()
    }

    pub fn deserialize(bytes: &[u8]) -> Result<Self> {
        crate::wire::RegisterRecord::from_bytes(bytes)?.to_register()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_3, FRAC_PI_4, FRAC_PI_6};

    fn reg1(state: AmplitudePair) -> QuantumRegister {
        QuantumRegister::from_qubits(RegisterId(1), vec![Qubit::new(state)])
    }

    fn plus() -> AmplitudePair {
        AmplitudePair::new(c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)).unwrap()
    }

    #[test]
    fn gate_examples() {
        let mut r = QuantumRegister::new(RegisterId(0), 1);
        r.apply_gate(&Gate::pauli_x(), 0).unwrap();
        assert_eq!(r.qubit(0).unwrap().state, AmplitudePair::ONE);

        let mut r = QuantumRegister::new(RegisterId(0), 1);
        r.apply_gate(&Gate::hadamard(), 0).unwrap();
        assert!(r.qubit(0).unwrap().state.equal_up_to_phase(&plus(), 1e-12));

        let mut r = QuantumRegister::new(RegisterId(0), 1);
        r.apply_gate(&Gate::ry(FRAC_PI_3), 0).unwrap();
        let s = r.qubit(0).unwrap().state;
        assert!((s.alpha - c(FRAC_PI_3.cos(), 0.0)).norm() < 1e-12);
        assert!((s.beta - c(FRAC_PI_3.sin(), 0.0)).norm() < 1e-12);
    }

    #[test]
    fn gate_errors() {
        let mut r = QuantumRegister::new(RegisterId(0), 2);
        assert_eq!(
            r.apply_gate(&Gate::pauli_x(), 2),
            Err(QentError::OutOfRange { pos: 2, len: 2 })
        );
        r.mark_lost(1).unwrap();
        assert_eq!(r.apply_gate(&Gate::pauli_x(), 1), Err(QentError::QubitLost(1)));
        let mut rng = RandomSource::new(0);
        assert_eq!(r.measure(1, &mut rng), Err(QentError::NoDefinedOutcome(1)));
        assert_eq!(
            r.measure_in_basis(1, 0.3, &mut rng),
            Err(QentError::NoDefinedOutcome(1))
        );
    }

    #[test]
    fn deterministic_outcomes_on_basis_states() {
        let mut rng = RandomSource::new(4);
        for _ in 0..1000 {
            assert_eq!(reg1(AmplitudePair::ZERO).measure(0, &mut rng).unwrap(), 0);
            assert_eq!(reg1(AmplitudePair::ONE).measure(0, &mut rng).unwrap(), 1);
        }
    }

    #[test]
    fn balanced_state_frequency() {
        let mut rng = RandomSource::new(2024);
        let n = 100_000;
        let zeros = (0..n)
            .filter(|_| reg1(plus()).measure(0, &mut rng).unwrap() == 0)
            .count();
        let f = zeros as f64 / n as f64;
        assert!((f - 0.5).abs() < 0.005, "{f}");
    }

    #[test]
    fn collapse_is_idempotent() {
        let mut rng = RandomSource::new(8);
        for _ in 0..1000 {
            let mut r = reg1(plus());
            let first = r.measure(0, &mut rng).unwrap();
            assert_eq!(r.measure(0, &mut rng).unwrap(), first);
        }
    }

    #[test]
    fn basis_measurement_examples() {
        let mut rng = RandomSource::new(10);
        let t = FRAC_PI_6;
        let eigen = AmplitudePair::new(c(t.cos(), 0.0), c(t.sin(), 0.0)).unwrap();
        for _ in 0..1000 {
            let mut r = reg1(eigen);
            assert_eq!(r.measure_in_basis(0, t, &mut rng).unwrap(), 0);
            // stored state is the basis eigenstate in the computational frame
            assert!(r.qubit(0).unwrap().state.equal_up_to_phase(&eigen, 1e-12));
            assert_eq!(r.measure_in_basis(0, t, &mut rng).unwrap(), 0);
        }

        let n = 100_000;
        let zeros = (0..n)
            .filter(|_| {
                reg1(AmplitudePair::ZERO)
                    .measure_in_basis(0, FRAC_PI_4, &mut rng)
                    .unwrap()
                    == 0
            })
            .count();
        assert!((zeros as f64 / n as f64 - 0.5).abs() < 0.005);
    }

    #[test]
    fn zero_angle_basis_is_plain_measurement() {
        let mut a = RandomSource::new(77);
        let mut b = RandomSource::new(77);
        let state = AmplitudePair::new(c(0.6, 0.0), c(0.0, 0.8)).unwrap();
        for _ in 0..500 {
            let mut r1 = reg1(state);
            let mut r2 = reg1(state);
            assert_eq!(
                r1.measure_in_basis(0, 0.0, &mut a).unwrap(),
                r2.measure(0, &mut b).unwrap()
            );
            assert_eq!(r1, r2);
        }
    }

    #[test]
    fn controlled_gates_on_basis_controls() {
        let mut r = QuantumRegister::new(RegisterId(3), 3);
        r.cnot(0, 1).unwrap();
        assert_eq!(r.qubit(1).unwrap().state, AmplitudePair::ZERO);
        r.apply_gate(&Gate::pauli_x(), 0).unwrap();
        r.cnot(0, 1).unwrap();
        assert_eq!(r.qubit(1).unwrap().state, AmplitudePair::ONE);
        r.toffoli(0, 1, 2).unwrap();
        assert_eq!(r.qubit(2).unwrap().state, AmplitudePair::ONE);

        r.apply_gate(&Gate::hadamard(), 0).unwrap();
        assert!(matches!(
            r.cnot(0, 2),
            Err(QentError::UnrepresentableEntanglingOperation(_))
        ));
        assert!(r.cnot(1, 1).is_err());
    }

    #[test]
    fn norm_preserved_over_long_gate_sequences() {
        let mut rng = RandomSource::new(31);
        let mut r = QuantumRegister::new(RegisterId(0), 4);
        for _ in 0..100 {
            for pos in 0..4 {
                let g = match (rng.next_f64() * 4.0) as u32 {
                    0 => Gate::hadamard(),
                    1 => Gate::pauli_x(),
                    2 => Gate::rx(rng.next_f64() * 6.0),
                    _ => Gate::ry(rng.next_f64() * 6.0),
                };
                r.apply_gate(&g, pos).unwrap();
            }
        }
        for q in r.qubits() {
            assert!((q.state.norm_sqr() - 1.0).abs() < 1e-9);
        }
    }
}
