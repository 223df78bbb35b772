//! Asynchronous two-qubit entanglement.
//!
//! Each half of a pair lives in its own register and may be operated on
//! independently. Gates on an entangled slot are applied locally and recorded
//! in that slot's history. When one half is measured, a [`MeasurementNotice`]
//! carrying the outcome and the measurer's history goes to the partner, which
//! then reconciles:
//!
//! 1. undo its own history, newest first;
//! 2. collapse to the conditional state read off the original amplitudes;
//! 3. replay the measurer's history, oldest first;
//! 4. replay its own history, oldest first.
//!
//! Only the amplitudes at creation time ([`EprMatrix`]) are ever stored for
//! the pair; no joint state is tracked after that.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{QentError, Result};
use crate::linalg::{AmplitudePair, Gate, StateVector4, NORM_TOL};
use crate::register::{QuantumRegister, RegisterId};
use crate::rng::RandomSource;
use crate::wire::SessionId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PairId(pub u64);

impl fmt::Display for PairId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{:#x}", self.0)
    }
}

/// Which half of a pair. Side A is the first index of the amplitude matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::A => Side::B,
            Side::B => Side::A,
        }
    }
}

/// Amplitudes (α, β, γ, δ) of |00⟩, |01⟩, |10⟩, |11⟩ at the moment of entanglement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EprMatrix {
    a: [Complex64; 4],
}

impl EprMatrix {
    pub fn new(a: [Complex64; 4]) -> Result<Self> {
        let state = StateVector4::new(a)?;
        if !is_entangled(&state.a) {
            return Err(QentError::NotEntangled);
        }
        Ok(Self { a })
    }

    /// (|00⟩ + |11⟩)/√2.
    pub fn phi_plus() -> Self {
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let z = Complex64::new(0.0, 0.0);
        Self { a: [h, z, z, h] }
    }

    /// (|00⟩ − |11⟩)/√2.
    pub fn phi_minus() -> Self {
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let z = Complex64::new(0.0, 0.0);
        Self { a: [h, z, z, -h] }
    }

    /// (|01⟩ + |10⟩)/√2.
    pub fn psi_plus() -> Self {
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let z = Complex64::new(0.0, 0.0);
        Self { a: [z, h, h, z] }
    }

    /// (|01⟩ − |10⟩)/√2.
    pub fn psi_minus() -> Self {
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let z = Complex64::new(0.0, 0.0);
        Self { a: [z, h, -h, z] }
    }

    pub fn amplitudes(&self) -> &[Complex64; 4] {
        &self.a
    }

    pub fn entry(&self, first: u8, second: u8) -> Complex64 {
        self.a[2 * usize::from(first & 1) + usize::from(second & 1)]
    }

    pub fn as_state(&self) -> StateVector4 {
        StateVector4 { a: self.a }
    }

    /// Marginal amplitudes (√P(0), √P(1)) for one side.
    pub fn marginal(&self, side: Side) -> AmplitudePair {
        let p = |i: usize| self.a[i].norm_sqr();
        let (p0, p1) = match side {
            Side::A => (p(0) + p(1), p(2) + p(3)),
            Side::B => (p(0) + p(2), p(1) + p(3)),
        };
        AmplitudePair {
            alpha: Complex64::new(p0.sqrt(), 0.0),
            beta: Complex64::new(p1.sqrt(), 0.0),
        }
    }
}

/// Non-factorability: |α·δ − β·γ| > 1e-9.
pub fn is_entangled(a: &[Complex64; 4]) -> bool {
    (a[0] * a[3] - a[1] * a[2]).norm() > NORM_TOL
}

/// Gates applied to one half since entanglement, oldest first.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OpHistory(Vec<Gate>);

impl OpHistory {
    pub fn new() -> Self {
        Self(Vec::new())
    }

    pub fn from_gates(gates: Vec<Gate>) -> Self {
        Self(gates)
    }

    pub fn push(&mut self, g: Gate) {
        self.0.push(g);
    }

    pub fn gates(&self) -> &[Gate] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Applies each inverse, newest first.
    pub fn rewind(&self, q: &AmplitudePair) -> AmplitudePair {
        self.0.iter().rev().fold(*q, |s, g| g.inverse().apply(&s))
    }

    /// Applies the gates, oldest first.
    pub fn replay(&self, q: &AmplitudePair) -> AmplitudePair {
        self.0.iter().fold(*q, |s, g| g.apply(&s))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementNotice {
    pub pair_id: PairId,
    pub measured_side: Side,
    pub outcome: u8,
    pub history: OpHistory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotStatus {
    Active,
    /// This side was measured; notice sent, not yet acknowledged.
    Measured,
    /// Disentangled. History is kept, frozen.
    Reconciled,
}

/// Entanglement bookkeeping for one register slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotLink {
    pub pair_id: PairId,
    pub side: Side,
    pub history: OpHistory,
    pub status: SlotStatus,
    /// State just before this side's own measurement, kept until the pair
    /// settles so a losing concurrent measurement can be rolled back.
    pub(crate) pre_measurement: Option<AmplitudePair>,
    /// This side's own outcome while its notice is unacknowledged.
    pub(crate) outcome: Option<u8>,
}

impl SlotLink {
    pub fn new(pair_id: PairId, side: Side) -> Self {
        Self {
            pair_id,
            side,
            history: OpHistory::new(),
            status: SlotStatus::Active,
            pre_measurement: None,
            outcome: None,
        }
    }
}

/// A register whose slots may each hold one half of an entangled pair.
#[derive(Debug, Clone, PartialEq)]
pub struct EntangledRegister {
    base: QuantumRegister,
    links: Vec<Option<SlotLink>>,
}

impl EntangledRegister {
    pub fn new(base: QuantumRegister) -> Self {
        let links = vec![None; base.len()];
        Self { base, links }
    }

    pub fn with_links(base: QuantumRegister, links: Vec<Option<SlotLink>>) -> Result<Self> {
        if links.len() != base.len() {
            return Err(QentError::validation(format!(
                "{} links for a register of {} qubits",
                links.len(),
                base.len()
            )));
        }
        Ok(Self { base, links })
    }

    pub fn id(&self) -> RegisterId {
        self.base.id()
    }

    pub fn base(&self) -> &QuantumRegister {
        &self.base
    }

    pub fn base_mut(&mut self) -> &mut QuantumRegister {
        &mut self.base
    }

    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    pub fn link(&self, pos: usize) -> Option<&SlotLink> {
        self.links.get(pos).and_then(Option::as_ref)
    }

    pub fn link_mut(&mut self, pos: usize) -> Option<&mut SlotLink> {
        self.links.get_mut(pos).and_then(Option::as_mut)
    }

    pub fn links(&self) -> &[Option<SlotLink>] {
        &self.links
    }

    pub fn state(&self, pos: usize) -> Result<AmplitudePair> {
        Ok(self.base.qubit(pos)?.state)
    }

    /// Slot currently holding the active half of `pair`.
    pub fn slot_of(&self, pair: PairId) -> Option<usize> {
        self.links
            .iter()
            .position(|l| matches!(l, Some(l) if l.pair_id == pair))
    }

    fn active_link_mut(&mut self, pos: usize) -> Result<&mut SlotLink> {
        let len = self.base.len();
        let link = self
            .links
            .get_mut(pos)
            .ok_or(QentError::OutOfRange { pos, len })?
            .as_mut()
            .ok_or_else(|| QentError::validation(format!("slot {pos} is not entangled")))?;
        if link.status != SlotStatus::Active {
            return Err(QentError::StaleEntanglement(link.pair_id));
        }
        Ok(link)
    }
}

/// Where one half of a pair lives, as seen by a coordinator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartnerRef {
    Local { register: RegisterId, slot: usize },
    /// Forwards notices to the peer behind `session`; stores no quantum state.
    RemoteStub { session: SessionId, pair: PairId },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairState {
    Active,
    Measured(Side),
    Reconciled,
}

/// Per-pair coordinator. Holds the original amplitudes and a reference to
/// each half; accepts exactly one measurement per pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Entanglement {
    pair_id: PairId,
    epr: EprMatrix,
    side_a: PartnerRef,
    side_b: PartnerRef,
    state: PairState,
}

impl Entanglement {
    pub fn new(pair_id: PairId, epr: EprMatrix, side_a: PartnerRef, side_b: PartnerRef) -> Self {
        Self {
            pair_id,
            epr,
            side_a,
            side_b,
            state: PairState::Active,
        }
    }

    pub fn pair_id(&self) -> PairId {
        self.pair_id
    }

    pub fn epr(&self) -> &EprMatrix {
        &self.epr
    }

    pub fn state(&self) -> PairState {
        self.state
    }

    pub fn side(&self, side: Side) -> PartnerRef {
        match side {
            Side::A => self.side_a,
            Side::B => self.side_b,
        }
    }

    pub fn set_side(&mut self, side: Side, r: PartnerRef) {
        match side {
            Side::A => self.side_a = r,
            Side::B => self.side_b = r,
        }
    }

    /// Records that `side` measured; the pair stops accepting other measurements.
    pub fn mark_measured(&mut self, side: Side) -> Result<()> {
        if self.state != PairState::Active {
            return Err(QentError::StaleEntanglement(self.pair_id));
        }
        self.state = PairState::Measured(side);
        Ok(())
    }

    pub fn mark_reconciled(&mut self) {
        self.state = PairState::Reconciled;
    }

    /// Admission check for an incoming notice. Returns the side to reconcile.
    ///
    /// A notice is admitted while the pair is active. If this node's own
    /// measurement is still in flight, the measurement from side A wins and
    /// the caller must roll back side B before reconciling.
    pub fn admit(&self, notice: &MeasurementNotice) -> Result<Side> {
        if notice.pair_id != self.pair_id {
            return Err(QentError::ProtocolViolation(format!(
                "notice for {} delivered to coordinator of {}",
                notice.pair_id, self.pair_id
            )));
        }
        match self.state {
            PairState::Active => Ok(notice.measured_side.other()),
            PairState::Measured(own) if own != notice.measured_side && notice.measured_side == Side::A => {
                Ok(Side::B)
            }
            _ => Err(QentError::StaleEntanglement(self.pair_id)),
        }
    }
}

/// Builds both halves of a pair and its coordinator.
///
/// Each side starts in its marginal state (√P(0), √P(1)) with an empty history.
pub fn create_entangled_pair(
    m: EprMatrix,
    pair_id: PairId,
    register_a: RegisterId,
    register_b: RegisterId,
) -> (EntangledRegister, EntangledRegister, Entanglement) {
    let make = |id, side| {
        let mut base = QuantumRegister::new(id, 1);
        base.set_state(0, m.marginal(side))
            .expect("slot 0 exists in a one-qubit register");
        EntangledRegister {
            base,
            links: vec![Some(SlotLink::new(pair_id, side))],
        }
    };
    let a = make(register_a, Side::A);
    let b = make(register_b, Side::B);
    let coordinator = Entanglement::new(
        pair_id,
        m,
        PartnerRef::Local {
            register: register_a,
            slot: 0,
        },
        PartnerRef::Local {
            register: register_b,
            slot: 0,
        },
    );
    (a, b, coordinator)
}

/// Applies `g` to an entangled slot and appends it to the slot's history.
pub fn record_gate(er: &mut EntangledRegister, g: &Gate, pos: usize) -> Result<()> {
    er.active_link_mut(pos)?;
    er.base.apply_gate(g, pos)?;
    er.active_link_mut(pos)?.history.push(*g);
    Ok(())
}

/// Measures an entangled slot and produces the notice for its partner.
pub fn measure_entangled(
    er: &mut EntangledRegister,
    pos: usize,
    rng: &mut RandomSource,
) -> Result<(u8, MeasurementNotice)> {
    er.active_link_mut(pos)?;
    let before = er.base.qubit(pos)?.state;
    let bit = er.base.measure(pos, rng)?;
    let link = er.active_link_mut(pos)?;
    link.status = SlotStatus::Measured;
    link.pre_measurement = Some(before);
    link.outcome = Some(bit);
    let notice = MeasurementNotice {
        pair_id: link.pair_id,
        measured_side: link.side,
        outcome: bit,
        history: link.history.clone(),
    };
    Ok((bit, notice))
}

/// State of the unmeasured half given the measured side's outcome, read off
/// the original amplitudes.
pub fn conditional_collapse(m: &EprMatrix, measured: Side, outcome: u8) -> Result<AmplitudePair> {
    if outcome > 1 {
        return Err(QentError::ProtocolViolation(format!("outcome {outcome} is not a bit")));
    }
    let (x, y) = match measured {
        Side::A => (m.entry(outcome, 0), m.entry(outcome, 1)),
        Side::B => (m.entry(0, outcome), m.entry(1, outcome)),
    };
    let n = (x.norm_sqr() + y.norm_sqr()).sqrt();
    if n <= NORM_TOL {
        return Err(QentError::ProtocolViolation(format!(
            "outcome {outcome} on side {measured:?} has zero amplitude in the original state"
        )));
    }
    Ok(AmplitudePair {
        alpha: x / n,
        beta: y / n,
    })
}

/// Reconciles slot `pos` against its partner's notice and disentangles it.
pub fn reconcile(
    er: &mut EntangledRegister,
    pos: usize,
    epr: &EprMatrix,
    notice: &MeasurementNotice,
) -> Result<()> {
    let link = er.active_link_mut(pos)?;
    if link.pair_id != notice.pair_id {
        return Err(QentError::ProtocolViolation(format!(
            "notice for {} delivered to slot holding {}",
            notice.pair_id, link.pair_id
        )));
    }
    if link.side == notice.measured_side {
        return Err(QentError::ProtocolViolation(format!(
            "notice from side {:?} delivered to the same side",
            notice.measured_side
        )));
    }
    let own = link.history.clone();
    let collapsed = conditional_collapse(epr, notice.measured_side, notice.outcome)?;

    let q = er.base.qubit_mut(pos)?;
    if !q.lost {
        let rewound = own.rewind(&q.state);
        debug_assert!((rewound.norm_sqr() - 1.0).abs() < 1e-6);
        let mut state = collapsed;
        state = notice.history.replay(&state);
        state = own.replay(&state);
        q.state = state;
    }
    let link = er.active_link_mut(pos)?;
    link.status = SlotStatus::Reconciled;
    Ok(())
}

/// Undoes this side's measurement so the slot can be reconciled against a
/// notice that took precedence.
pub(crate) fn roll_back_measurement(er: &mut EntangledRegister, pos: usize) -> Result<()> {
    let link = er
        .link_mut(pos)
        .ok_or_else(|| QentError::validation(format!("slot {pos} is not entangled")))?;
    let pair = link.pair_id;
    let before = match (link.status, link.pre_measurement) {
        (SlotStatus::Measured, Some(s)) => s,
        _ => return Err(QentError::StaleEntanglement(pair)),
    };
    link.status = SlotStatus::Active;
    link.pre_measurement = None;
    link.outcome = None;
    er.base.set_state(pos, before)
}

pub(crate) fn settle_measurement(er: &mut EntangledRegister, pos: usize) {
    if let Some(link) = er.link_mut(pos) {
        if link.status == SlotStatus::Measured {
            link.status = SlotStatus::Reconciled;
            link.pre_measurement = None;
            link.outcome = None;
        }
    }
}
