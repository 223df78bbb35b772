//! A simulator node: owns registers and pair coordinators and processes every
//! gate, measurement and inbound envelope serially.
//!
//! The node does no I/O. Operations that must reach a peer return envelopes
//! for the caller to send; inbound envelopes go through [`Node::dispatch`],
//! which returns the replies. Drivers in [`crate::transport`] move the bytes.

use std::collections::BTreeMap;

use crate::entangle::{
    self, create_entangled_pair, EntangledRegister, Entanglement, EprMatrix, MeasurementNotice,
    PairId, PairState, PartnerRef, Side, SlotLink, SlotStatus,
};
use crate::error::{QentError, Result};
use crate::linalg::Gate;
use crate::register::{QuantumRegister, RegisterId};
use crate::rng::RandomSource;
use crate::wire::{
    AckPayload, EntanglementRecord, Envelope, ErrorPayload, HelloPayload, NoticePayload, Payload,
    RegisterRecord, SessionId, PROTOCOL_VERSION,
};

/// Application-level events, in the order the node produced them.
#[derive(Debug, Clone, PartialEq)]
pub enum NodeEvent {
    SessionEstablished(SessionId),
    SessionClosed(SessionId),
    RegisterReceived(RegisterId),
    TransferCompleted(RegisterId),
    TransferAborted { register: RegisterId, code: String },
    NoticeSent { pair: PairId, outcome: u8 },
    Reconciled { pair: PairId, register: RegisterId, slot: usize, partner_outcome: u8 },
    NoticeAcknowledged(PairId),
    /// A concurrent local measurement lost to the partner's and was redone.
    OutcomeRevised { pair: PairId, register: RegisterId, slot: usize, previous: u8, revised: u8 },
    PeerError { code: String, register: Option<RegisterId>, pair: Option<PairId> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct SessionState {
    initiator: bool,
    established: bool,
}

#[derive(Debug, Clone)]
struct PendingTransfer {
    session: SessionId,
    pairs: Vec<(PairId, Side)>,
}

/// Result of a measurement made through the node.
#[derive(Debug, Clone, PartialEq)]
pub struct Measured {
    pub bit: u8,
    /// Envelopes to deliver (a notice through a stub), if any.
    pub outbound: Vec<Envelope>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dispatch {
    pub replies: Vec<Envelope>,
    /// The session should be closed after the replies are sent.
    pub close: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairHandles {
    pub pair: PairId,
    pub side_a: RegisterId,
    pub side_b: RegisterId,
}

#[derive(Debug)]
pub struct Node {
    name: String,
    index: u32,
    next_local: u32,
    registers: BTreeMap<RegisterId, EntangledRegister>,
    pairs: BTreeMap<PairId, Entanglement>,
    pending: BTreeMap<RegisterId, PendingTransfer>,
    sessions: BTreeMap<SessionId, SessionState>,
    events: Vec<NodeEvent>,
    rng: RandomSource,
}

impl Node {
    /// `index` must be unique among cooperating nodes: it forms the high half
    /// of every identifier this node mints. `seed` drives the node's own
    /// randomness (re-measurement after a lost race).
    pub fn new(name: impl Into<String>, index: u32, seed: u64) -> Self {
        Self {
            name: name.into(),
            index,
            next_local: 0,
            registers: BTreeMap::new(),
            pairs: BTreeMap::new(),
            pending: BTreeMap::new(),
            sessions: BTreeMap::new(),
            events: Vec::new(),
            rng: RandomSource::new(seed),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    fn mint(&mut self) -> u64 {
        let id = (u64::from(self.index) << 32) | u64::from(self.next_local);
        self.next_local += 1;
        id
    }

    pub fn create_register(&mut self, len: usize) -> RegisterId {
        let id = RegisterId(self.mint());
        self.registers
            .insert(id, EntangledRegister::new(QuantumRegister::new(id, len)));
        id
    }

    pub fn insert_register(&mut self, reg: QuantumRegister) -> Result<()> {
        let id = reg.id();
        if self.registers.contains_key(&id) {
            return Err(QentError::validation(format!("register {id} already exists")));
        }
        self.registers.insert(id, EntangledRegister::new(reg));
        Ok(())
    }

    /// Drops a register, along with the coordinators of its settled pairs.
    pub fn remove_register(&mut self, id: RegisterId) -> Option<EntangledRegister> {
        if self.pending.contains_key(&id) {
            return None;
        }
        let er = self.registers.remove(&id)?;
        for link in er.links().iter().flatten() {
            if self.pairs.get(&link.pair_id).is_some_and(|p| p.state() == PairState::Reconciled) {
                self.pairs.remove(&link.pair_id);
            }
        }
        Some(er)
    }

    /// Creates a pair in state `m` with each half in its own one-qubit register.
    pub fn entangle(&mut self, m: EprMatrix) -> PairHandles {
        let pair = PairId(self.mint());
        let side_a = RegisterId(self.mint());
        let side_b = RegisterId(self.mint());
        let (a, b, coordinator) = create_entangled_pair(m, pair, side_a, side_b);
        self.registers.insert(side_a, a);
        self.registers.insert(side_b, b);
        self.pairs.insert(pair, coordinator);
        PairHandles { pair, side_a, side_b }
    }

    pub fn register(&self, id: RegisterId) -> Option<&EntangledRegister> {
        self.registers.get(&id)
    }

    pub fn registers(&self) -> impl Iterator<Item = &EntangledRegister> {
        self.registers.values()
    }

    pub fn pair(&self, id: PairId) -> Option<&Entanglement> {
        self.pairs.get(&id)
    }

    pub fn is_pending(&self, id: RegisterId) -> bool {
        self.pending.contains_key(&id)
    }

    pub fn take_events(&mut self) -> Vec<NodeEvent> {
        std::mem::take(&mut self.events)
    }

    fn register_mut(&mut self, id: RegisterId) -> Result<&mut EntangledRegister> {
        if self.pending.contains_key(&id) {
            return Err(QentError::validation(format!(
                "register {id} is being transferred"
            )));
        }
        self.registers
            .get_mut(&id)
            .ok_or_else(|| QentError::validation(format!("unknown register {id}")))
    }

    /// Applies a gate; recorded in the slot history while the slot is entangled.
    pub fn apply_gate(&mut self, reg: RegisterId, pos: usize, gate: &Gate) -> Result<()> {
        let er = self.register_mut(reg)?;
        match er.link(pos).map(|l| l.status) {
            Some(SlotStatus::Active) => entangle::record_gate(er, gate, pos),
            _ => er.base_mut().apply_gate(gate, pos),
        }
    }

    /// Measures in the computational basis. For an entangled slot this also
    /// settles the pair: a local partner is reconciled immediately, a remote
    /// one gets a notice in `outbound`.
    pub fn measure(&mut self, reg: RegisterId, pos: usize, rng: &mut RandomSource) -> Result<Measured> {
        let er = self.register_mut(reg)?;
        let link = er.link(pos).map(|l| (l.status, l.pair_id));
        let pair_id = match link {
            Some((SlotStatus::Active, pair)) => pair,
            _ => {
                let bit = er.base_mut().measure(pos, rng)?;
                return Ok(Measured { bit, outbound: Vec::new() });
            }
        };

        let partner_side = {
            let coord = self
                .pairs
                .get(&pair_id)
                .ok_or(QentError::UnknownPair(pair_id))?;
            if coord.state() != PairState::Active {
                return Err(QentError::StaleEntanglement(pair_id));
            }
            let own = er_side(&self.registers[&reg], pos);
            let partner = coord.side(own.other());
            if let PartnerRef::Local { register, .. } = partner {
                if self.pending.contains_key(&register) {
                    return Err(QentError::validation(format!(
                        "partner register {register} is being transferred"
                    )));
                }
            }
            own.other()
        };

        let er = self.register_mut(reg)?;
        let (bit, notice) = entangle::measure_entangled(er, pos, rng)?;
        let coord = self.pairs.get_mut(&pair_id).expect("checked above");
        coord.mark_measured(notice.measured_side)?;

        match coord.side(partner_side) {
            PartnerRef::Local { register, slot } => {
                let epr = *coord.epr();
                let partner = self
                    .registers
                    .get_mut(&register)
                    .ok_or_else(|| QentError::validation(format!("unknown register {register}")))?;
                entangle::reconcile(partner, slot, &epr, &notice)?;
                entangle::settle_measurement(self.registers.get_mut(&reg).expect("exists"), pos);
                self.pairs.get_mut(&pair_id).expect("exists").mark_reconciled();
                self.events.push(NodeEvent::Reconciled {
                    pair: pair_id,
                    register,
                    slot,
                    partner_outcome: bit,
                });
                Ok(Measured { bit, outbound: Vec::new() })
            }
            PartnerRef::RemoteStub { session, .. } => {
                self.events.push(NodeEvent::NoticeSent { pair: pair_id, outcome: bit });
                let env = Envelope::new(session, Payload::MeasurementNotice((&notice).into()));
                Ok(Measured { bit, outbound: vec![env] })
            }
        }
    }

    /// Rotate by −θ, measure, rotate back by θ.
    pub fn measure_in_basis(
        &mut self,
        reg: RegisterId,
        pos: usize,
        theta: f64,
        rng: &mut RandomSource,
    ) -> Result<Measured> {
        self.apply_gate(reg, pos, &Gate::ry(-theta))?;
        let m = self.measure(reg, pos, rng)?;
        self.apply_gate(reg, pos, &Gate::ry(theta))?;
        Ok(m)
    }

    /// Notices for pairs measured here whose acknowledgement never arrived
    /// over `session`. Resending is safe: duplicates are rejected as stale.
    pub fn unacknowledged_notices(&self, session: SessionId) -> Vec<Envelope> {
        let mut out = Vec::new();
        for er in self.registers.values() {
            for link in er.links().iter().flatten() {
                if link.status != SlotStatus::Measured {
                    continue;
                }
                let Some(coord) = self.pairs.get(&link.pair_id) else { continue };
                if !matches!(coord.side(link.side.other()), PartnerRef::RemoteStub { session: s, .. } if s == session) {
                    continue;
                }
                let Some(outcome) = link.outcome else { continue };
                let notice = MeasurementNotice {
                    pair_id: link.pair_id,
                    measured_side: link.side,
                    outcome,
                    history: link.history.clone(),
                };
                out.push(Envelope::new(session, Payload::MeasurementNotice((&notice).into())));
            }
        }
        out
    }

    // -----------------------------------------------------------------------
    // Sessions and transfers
    // -----------------------------------------------------------------------

    /// Starts (or resumes) a session as initiator; returns the HELLO to send.
    pub fn open_session(&mut self, session: SessionId) -> Envelope {
        self.sessions.insert(
            session,
            SessionState {
                initiator: true,
                established: false,
            },
        );
        self.hello(session)
    }

    fn hello(&self, session: SessionId) -> Envelope {
        Envelope::new(
            session,
            Payload::Hello(HelloPayload {
                node: self.name.clone(),
                supported_versions: vec![PROTOCOL_VERSION],
            }),
        )
    }

    pub fn session_established(&self, session: SessionId) -> bool {
        self.sessions.get(&session).is_some_and(|s| s.established)
    }

    pub fn close_session(&mut self, session: SessionId) {
        if let Some(s) = self.sessions.get_mut(&session) {
            if s.established {
                s.established = false;
                self.events.push(NodeEvent::SessionClosed(session));
            }
        }
    }

    /// Sends a register to the peer behind `session`. The register stays
    /// local and frozen until the peer acknowledges.
    pub fn begin_transfer(&mut self, reg: RegisterId, session: SessionId) -> Result<Envelope> {
        if !self.session_established(session) {
            return Err(QentError::validation(format!("session {session} not established")));
        }
        let er = self.register_mut(reg)?;
        let mut records = Vec::new();
        let mut pairs = Vec::new();
        for (slot, link) in er.links().iter().enumerate() {
            let Some(link) = link else { continue };
            match link.status {
                SlotStatus::Reconciled => continue,
                SlotStatus::Measured => {
                    return Err(QentError::validation(format!(
                        "slot {slot} has a measurement notice in flight"
                    )))
                }
                SlotStatus::Active => {}
            }
            if !link.history.is_empty() {
                return Err(QentError::validation(format!(
                    "slot {slot} has local operations recorded; transfer entangled halves before operating on them"
                )));
            }
            records.push((slot, link.pair_id, link.side));
        }
        let base = er.base().clone();
        let mut entanglements = Vec::new();
        for (slot, pair, side) in records {
            let coord = self.pairs.get(&pair).ok_or(QentError::UnknownPair(pair))?;
            let partner = coord.side(side.other());
            let partner_in_same = matches!(partner, PartnerRef::Local { register, .. } if register == reg);
            if !partner_in_same {
                if let PartnerRef::RemoteStub { .. } = partner {
                    return Err(QentError::validation(format!(
                        "{pair}: partner is already remote; forwarding a half to a third party is not supported"
                    )));
                }
            }
            entanglements.push(EntanglementRecord::new(pair, slot, side, coord.epr()));
            pairs.push((pair, side));
        }
        let record = RegisterRecord::from_register(&base, entanglements);
        self.pending.insert(reg, PendingTransfer { session, pairs });
        Ok(Envelope::new(session, Payload::RegisterTransfer(record)))
    }

    fn complete_transfer(&mut self, reg: RegisterId) {
        let Some(pending) = self.pending.remove(&reg) else { return };
        self.registers.remove(&reg);
        for (pair, side) in pending.pairs {
            let both_moved = pending_both_sides(&self.pairs, pair, reg);
            if both_moved {
                self.pairs.remove(&pair);
            } else if let Some(coord) = self.pairs.get_mut(&pair) {
                coord.set_side(
                    side,
                    PartnerRef::RemoteStub {
                        session: pending.session,
                        pair,
                    },
                );
            }
        }
        self.events.push(NodeEvent::TransferCompleted(reg));
    }

    // -----------------------------------------------------------------------
    // Inbound
    // -----------------------------------------------------------------------

    /// Reply for a frame that failed to decode on `session`.
    pub fn reject_frame(&mut self, session: SessionId, err: &QentError) -> Dispatch {
        let close = matches!(err, QentError::UnsupportedVersion(_));
        if close {
            self.close_session(session);
        }
        Dispatch {
            replies: vec![Envelope::error(session, err)],
            close,
        }
    }

    /// Processes one inbound envelope.
    pub fn dispatch(&mut self, env: Envelope) -> Dispatch {
        let session = env.session_id;
        match env.payload {
            Payload::Hello(hello) => self.on_hello(session, hello),
            payload => {
                if !self.session_established(session) {
                    if matches!(payload, Payload::Error(_)) {
                        return Dispatch::default();
                    }
                    return Dispatch {
                        replies: vec![Envelope::new(
                            session,
                            Payload::Error(ErrorPayload {
                                code: "no_session".into(),
                                message: format!("session {session} is not established"),
                                register_id: None,
                                pair_id: None,
                            }),
                        )],
                        close: false,
                    };
                }
                let replies = match payload {
                    Payload::RegisterTransfer(rec) => vec![self.on_transfer(session, rec)],
                    Payload::MeasurementNotice(n) => vec![self.on_notice(session, n)],
                    Payload::Ack(ack) => {
                        self.on_ack(ack);
                        Vec::new()
                    }
                    Payload::Error(e) => {
                        self.on_error(e);
                        Vec::new()
                    }
                    Payload::Hello(_) => unreachable!(),
                };
                Dispatch { replies, close: false }
            }
        }
    }

    fn on_hello(&mut self, session: SessionId, hello: HelloPayload) -> Dispatch {
        if !hello.supported_versions.contains(&PROTOCOL_VERSION) {
            self.close_session(session);
            return Dispatch {
                replies: vec![Envelope::new(
                    session,
                    Payload::Error(ErrorPayload {
                        code: "unsupported_version".into(),
                        message: format!(
                            "peer supports {:?}, this node speaks {PROTOCOL_VERSION}",
                            hello.supported_versions
                        ),
                        register_id: None,
                        pair_id: None,
                    }),
                )],
                close: true,
            };
        }
        let state = self.sessions.entry(session).or_insert(SessionState {
            initiator: false,
            established: false,
        });
        let initiator = state.initiator;
        state.established = true;
        self.events.push(NodeEvent::SessionEstablished(session));
        let replies = if initiator {
            Vec::new()
        } else {
            vec![self.hello(session)]
        };
        Dispatch { replies, close: false }
    }

    fn on_transfer(&mut self, session: SessionId, rec: RegisterRecord) -> Envelope {
        let id = rec.register_id;
        match self.install(session, rec) {
            Ok(()) => {
                self.events.push(NodeEvent::RegisterReceived(id));
                Envelope::new(
                    session,
                    Payload::Ack(AckPayload {
                        register_id: Some(id),
                        pair_id: None,
                    }),
                )
            }
            Err((code, message)) => Envelope::new(
                session,
                Payload::Error(ErrorPayload {
                    code: code.into(),
                    message,
                    register_id: Some(id),
                    pair_id: None,
                }),
            ),
        }
    }

    fn install(&mut self, session: SessionId, rec: RegisterRecord) -> std::result::Result<(), (&'static str, String)> {
        let id = rec.register_id;
        if self.registers.contains_key(&id) {
            return Err(("duplicate_register", format!("register {id} already exists")));
        }
        let base = rec
            .to_register()
            .map_err(|e| ("invalid_register", e.to_string()))?;
        let mut links: Vec<Option<SlotLink>> = vec![None; base.len()];
        let mut coords: BTreeMap<PairId, Entanglement> = BTreeMap::new();
        for e in &rec.entanglements {
            if self.pairs.contains_key(&e.pair_id) {
                return Err(("duplicate_pair", format!("pair {} already known", e.pair_id)));
            }
            if links[e.slot_index].is_some() {
                return Err(("invalid_register", format!("slot {} listed twice", e.slot_index)));
            }
            let epr = e.epr().map_err(|err| ("invalid_register", err.to_string()))?;
            links[e.slot_index] = Some(SlotLink::new(e.pair_id, e.side));
            let coord = coords.entry(e.pair_id).or_insert_with(|| {
                let stub = PartnerRef::RemoteStub { session, pair: e.pair_id };
                Entanglement::new(e.pair_id, epr, stub, stub)
            });
            if coord.epr() != &epr {
                return Err(("invalid_register", format!("conflicting matrices for {}", e.pair_id)));
            }
            coord.set_side(
                e.side,
                PartnerRef::Local {
                    register: id,
                    slot: e.slot_index,
                },
            );
        }
        let er = EntangledRegister::with_links(base, links).map_err(|e| ("invalid_register", e.to_string()))?;
        self.registers.insert(id, er);
        self.pairs.extend(coords);
        Ok(())
    }

    fn on_notice(&mut self, session: SessionId, payload: NoticePayload) -> Envelope {
        let pair = payload.pair_id;
        match self.accept_notice(payload) {
            Ok(()) => Envelope::new(
                session,
                Payload::Ack(AckPayload {
                    register_id: None,
                    pair_id: Some(pair),
                }),
            ),
            Err(e) => {
                let mut env = Envelope::error(session, &e);
                if let Payload::Error(p) = &mut env.payload {
                    p.pair_id = Some(pair);
                }
                env
            }
        }
    }

    /// Reconciles the local half named by an inbound notice.
    pub fn accept_notice(&mut self, payload: NoticePayload) -> Result<()> {
        let notice = payload.to_notice()?;
        let pair = notice.pair_id;
        let coord = self.pairs.get(&pair).ok_or(QentError::UnknownPair(pair))?;
        let target = coord.admit(&notice)?;
        let (register, slot) = match coord.side(target) {
            PartnerRef::Local { register, slot } => (register, slot),
            PartnerRef::RemoteStub { .. } => {
                return Err(QentError::ProtocolViolation(format!(
                    "{pair}: side {target:?} is not held by this node"
                )))
            }
        };
        let epr = *coord.epr();
        let rolled_back = matches!(coord.state(), PairState::Measured(_));
        let er = self.register_mut(register)?;
        let previous = if rolled_back {
            let prev = er.link(slot).and_then(|l| l.outcome).unwrap_or(0);
            entangle::roll_back_measurement(er, slot)?;
            Some(prev)
        } else {
            None
        };
        entangle::reconcile(er, slot, &epr, &notice)?;
        self.pairs.get_mut(&pair).expect("exists").mark_reconciled();
        self.events.push(NodeEvent::Reconciled {
            pair,
            register,
            slot,
            partner_outcome: notice.outcome,
        });
        if let Some(previous) = previous {
            let er = self.registers.get_mut(&register).expect("exists");
            let revised = er.base_mut().measure(slot, &mut self.rng)?;
            self.events.push(NodeEvent::OutcomeRevised {
                pair,
                register,
                slot,
                previous,
                revised,
            });
        }
        Ok(())
    }

    fn on_ack(&mut self, ack: AckPayload) {
        if let Some(reg) = ack.register_id {
            self.complete_transfer(reg);
        }
        if let Some(pair) = ack.pair_id {
            self.settle_pair(pair);
            self.events.push(NodeEvent::NoticeAcknowledged(pair));
        }
    }

    fn settle_pair(&mut self, pair: PairId) {
        let Some(coord) = self.pairs.get_mut(&pair) else { return };
        if let PairState::Measured(side) = coord.state() {
            coord.mark_reconciled();
            if let PartnerRef::Local { register, slot } = coord.side(side) {
                if let Some(er) = self.registers.get_mut(&register) {
                    entangle::settle_measurement(er, slot);
                }
            }
        }
    }

    fn on_error(&mut self, e: ErrorPayload) {
        if let Some(reg) = e.register_id {
            if self.pending.remove(&reg).is_some() {
                self.events.push(NodeEvent::TransferAborted {
                    register: reg,
                    code: e.code.clone(),
                });
            }
        }
        // A stale rejection of our own in-flight notice means the peer has
        // already reconciled from an earlier copy of it.
        if let (Some(pair), "stale_entanglement") = (e.pair_id, e.code.as_str()) {
            self.settle_pair(pair);
        }
        self.events.push(NodeEvent::PeerError {
            code: e.code,
            register: e.register_id,
            pair: e.pair_id,
        });
    }
}

fn er_side(er: &EntangledRegister, pos: usize) -> Side {
    er.link(pos).expect("entangled slot").side
}

fn pending_both_sides(pairs: &BTreeMap<PairId, Entanglement>, pair: PairId, reg: RegisterId) -> bool {
    pairs.get(&pair).is_some_and(|c| {
        [Side::A, Side::B]
            .iter()
            .all(|s| matches!(c.side(*s), PartnerRef::Local { register, .. } if register == reg))
    })
}
