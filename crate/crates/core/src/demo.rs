//! Two-node conditional-probability demo.
//!
//! The initiator creates a Φ+ pair per trial, ships the Q half to the
//! responder, applies a gate to its P half and measures it. The responder
//! reconciles Q from the notice, measures Q, and tallies P(Q=0 | P=0).

use std::thread;

use crate::entangle::EprMatrix;
use crate::error::{QentError, Result};
use crate::linalg::Gate;
use crate::node::{Node, NodeEvent};
use crate::rng::RandomSource;
use crate::transport::{loopback_transport, Peer, Transport};
use crate::wire::SessionId;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConditionalTally {
    pub trials: u64,
    pub p_zero: u64,
    /// Trials with P = 0 and Q = 0.
    pub both_zero: u64,
}

impl ConditionalTally {
    pub fn q_zero_given_p_zero(&self) -> Option<f64> {
        (self.p_zero > 0).then(|| self.both_zero as f64 / self.p_zero as f64)
    }
}

pub fn parse_gate(name: &str, theta: f64) -> Result<Gate> {
    Ok(match name {
        "ry" => Gate::ry(theta),
        "rx" => Gate::rx(theta),
        "x" => Gate::pauli_x(),
        "y" => Gate::pauli_y(),
        "z" => Gate::pauli_z(),
        "h" => Gate::hadamard(),
        "i" | "id" | "identity" => Gate::identity(),
        other => {
            return Err(QentError::validation(format!(
                "unknown gate {other:?} (expected ry, rx, x, y, z, h or identity)"
            )))
        }
    })
}

/// Runs `trials` pairs from the initiator side; returns the P outcomes seen.
pub fn run_initiator<T: Transport>(
    peer: &mut Peer<T>,
    gate: &Gate,
    trials: u64,
    rng: &mut RandomSource,
) -> Result<ConditionalTally> {
    let mut tally = ConditionalTally::default();
    for _ in 0..trials {
        let h = peer.node.entangle(EprMatrix::phi_plus());
        peer.send_register(h.side_b)?;
        peer.node.apply_gate(h.side_a, 0, gate)?;
        let bit = peer.measure(h.side_a, 0, rng)?;
        peer.node.remove_register(h.side_a);
        peer.node.take_events();
        tally.trials += 1;
        tally.p_zero += u64::from(bit == 0);
    }
    Ok(tally)
}

/// Serves until the initiator disconnects, measuring every reconciled half.
pub fn run_responder<T: Transport>(peer: &mut Peer<T>, rng: &mut RandomSource) -> Result<ConditionalTally> {
    let mut tally = ConditionalTally::default();
    while peer.step()? {
        for event in peer.node.take_events() {
            if let NodeEvent::Reconciled { register, slot, partner_outcome, .. } = event {
                let q = peer.node.measure(register, slot, rng)?.bit;
                peer.node.remove_register(register);
                tally.trials += 1;
                if partner_outcome == 0 {
                    tally.p_zero += 1;
                    tally.both_zero += u64::from(q == 0);
                }
            }
        }
    }
    Ok(tally)
}

/// Both roles in one process over an in-memory transport.
pub fn run_loopback(gate: &Gate, trials: u64, seed: u64) -> Result<ConditionalTally> {
    let (near, far) = loopback_transport();
    let responder_seed = RandomSource::derive_seed(seed, 1);
    let server = thread::spawn(move || -> Result<ConditionalTally> {
        let mut peer = Peer::accept(Node::new("responder", 2, responder_seed), far)?;
        run_responder(&mut peer, &mut RandomSource::new(responder_seed))
    });
    let initiator_seed = RandomSource::derive_seed(seed, 0);
    let sent = {
        let mut peer = Peer::connect(
            Node::new("initiator", 1, initiator_seed),
            near,
            SessionId::from_u128(u128::from(seed)),
        )?;
        run_initiator(&mut peer, gate, trials, &mut RandomSource::new(initiator_seed))?
    };
    let got = server
        .join()
        .map_err(|_| QentError::Transport("responder thread panicked".into()))??;
    if got.trials != sent.trials || got.p_zero != sent.p_zero {
        return Err(QentError::ProtocolViolation(format!(
            "responder saw {} trials / {} P=0, initiator sent {} / {}",
            got.trials, got.p_zero, sent.trials, sent.p_zero
        )));
    }
    Ok(got)
}
