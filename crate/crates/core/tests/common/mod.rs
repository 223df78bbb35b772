//! Generators shared by the property and acceptance suites.
#![allow(dead_code)]

use proptest::collection::vec;
use proptest::prelude::*;

use qent_core::entangle::{PairId, Side};
use qent_core::linalg::{c, AmplitudePair, Gate, WireComplex};
use qent_core::register::RegisterId;
use qent_core::wire::{
    AckPayload, EntanglementRecord, Envelope, ErrorPayload, HelloPayload, NoticePayload, Payload,
    QubitRecord, RegisterRecord, SessionId,
};
use std::f64::consts::PI;

pub fn arb_angle() -> impl Strategy<Value = f64> {
    -PI..PI
}

/// Uniformly parameterized SU(2)·U(1) gate.
pub fn arb_gate() -> impl Strategy<Value = Gate> {
    (arb_angle(), 0.0..(PI / 2.0), arb_angle(), arb_angle()).prop_map(|(phi, mix, pa, pb)| {
        let a = c(mix.cos(), 0.0) * c(0.0, pa).exp();
        let b = c(mix.sin(), 0.0) * c(0.0, pb).exp();
        Gate::from_phase_form(phi, a, b).expect("unit-norm row")
    })
}

pub fn arb_state() -> impl Strategy<Value = AmplitudePair> {
    (0.0..(PI / 2.0), arb_angle(), arb_angle()).prop_map(|(mix, pa, pb)| AmplitudePair {
        alpha: c(mix.cos(), 0.0) * c(0.0, pa).exp(),
        beta: c(mix.sin(), 0.0) * c(0.0, pb).exp(),
    })
}

pub fn arb_history(max_len: usize) -> impl Strategy<Value = Vec<Gate>> {
    vec(arb_gate(), 0..=max_len)
}

/// Any finite double, including subnormals and extreme exponents.
fn arb_f64() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1.0..1.0f64,
        proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO,
    ]
}

fn arb_wc() -> impl Strategy<Value = WireComplex> {
    (arb_f64(), arb_f64()).prop_map(|(re, im)| WireComplex([re, im]))
}

fn arb_side() -> impl Strategy<Value = Side> {
    prop_oneof![Just(Side::A), Just(Side::B)]
}

fn arb_payload() -> impl Strategy<Value = Payload> {
    let hello = ("\\PC{0,12}", vec(any::<u32>(), 0..4))
        .prop_map(|(node, supported_versions)| Payload::Hello(HelloPayload { node, supported_versions }));
    let qubit = (arb_wc(), arb_wc(), any::<bool>()).prop_map(|(alpha, beta, lost)| QubitRecord { alpha, beta, lost });
    let ent = (any::<u64>(), 0usize..64, arb_side(), [arb_wc(), arb_wc(), arb_wc(), arb_wc()]).prop_map(
        |(p, slot_index, side, epr_matrix)| EntanglementRecord {
            pair_id: PairId(p),
            slot_index,
            side,
            epr_matrix,
        },
    );
    let transfer = (any::<u64>(), vec(qubit, 0..6), vec(ent, 0..3)).prop_map(|(id, qubits, entanglements)| {
        Payload::RegisterTransfer(RegisterRecord {
            register_id: RegisterId(id),
            qubits,
            entanglements,
        })
    });
    let notice = (any::<u64>(), arb_side(), any::<u8>(), vec([arb_wc(), arb_wc(), arb_wc(), arb_wc()], 0..5))
        .prop_map(|(p, measured_side, outcome, history)| {
            Payload::MeasurementNotice(NoticePayload {
                pair_id: PairId(p),
                measured_side,
                outcome,
                history,
            })
        });
    let ack = (proptest::option::of(any::<u64>()), proptest::option::of(any::<u64>())).prop_map(|(r, p)| {
        Payload::Ack(AckPayload {
            register_id: r.map(RegisterId),
            pair_id: p.map(PairId),
        })
    });
    let error = (
        "[a-z_]{1,24}",
        "\\PC{0,40}",
        proptest::option::of(any::<u64>()),
        proptest::option::of(any::<u64>()),
    )
        .prop_map(|(code, message, r, p)| {
            Payload::Error(ErrorPayload {
                code,
                message,
                register_id: r.map(RegisterId),
                pair_id: p.map(PairId),
            })
        });
    prop_oneof![hello, transfer, notice, ack, error]
}

pub fn arb_envelope() -> impl Strategy<Value = Envelope> {
    (any::<u128>(), arb_payload()).prop_map(|(s, payload)| Envelope::new(SessionId::from_u128(s), payload))
}

pub mod scenario {
    use std::sync::mpsc;
    use std::thread;

    use qent_core::entangle::{EprMatrix, Side};
    use qent_core::linalg::{c, Gate};
    use qent_core::node::{Node, NodeEvent};
    use qent_core::register::QuantumRegister;
    use qent_core::transport::{Peer, Transport};
    use qent_core::wire::SessionId;
    use qent_core::RandomSource;

    pub fn epr() -> EprMatrix {
        EprMatrix::new([c(0.5f64.sqrt(), 0.0), c(0.3f64.sqrt(), 0.0), c(0.0, 0.2f64.sqrt()), c(0.0, 0.0)]).unwrap()
    }

    pub fn gates_a() -> Vec<Gate> {
        vec![Gate::hadamard(), Gate::ry(0.7)]
    }

    pub fn gates_b() -> Vec<Gate> {
        vec![Gate::rx(0.3), Gate::pauli_z(), Gate::ry(-1.1)]
    }

    fn partner_seed(seed: u64) -> u64 {
        seed ^ 0x5eed
    }

    /// Both halves on one node: (side A register, side B register).
    pub fn run_local(measurer: Side, seed: u64) -> (QuantumRegister, QuantumRegister) {
        let mut node = Node::new("local", 1, 0);
        let h = node.entangle(epr());
        for g in gates_a() {
            node.apply_gate(h.side_a, 0, &g).unwrap();
        }
        for g in gates_b() {
            node.apply_gate(h.side_b, 0, &g).unwrap();
        }
        let (first, second) = match measurer {
            Side::A => (h.side_a, h.side_b),
            Side::B => (h.side_b, h.side_a),
        };
        node.measure(first, 0, &mut RandomSource::new(seed)).unwrap();
        node.measure(second, 0, &mut RandomSource::new(partner_seed(seed))).unwrap();
        (
            node.register(h.side_a).unwrap().base().clone(),
            node.register(h.side_b).unwrap().base().clone(),
        )
    }

    fn wait_reconciled<T: Transport>(peer: &mut Peer<T>) {
        loop {
            if peer
                .node
                .take_events()
                .iter()
                .any(|e| matches!(e, NodeEvent::Reconciled { .. }))
            {
                return;
            }
            assert!(peer.step().unwrap(), "peer left before reconciling");
        }
    }

    /// Side A on the initiating node, side B shipped to the responder.
    pub fn run_distributed<T, F>(near: T, far: F, measurer: Side, seed: u64) -> (QuantumRegister, QuantumRegister)
    where
        T: Transport + 'static,
        F: FnOnce() -> T + Send + 'static,
    {
        let (ready_tx, ready_rx) = mpsc::channel::<()>();
        let (go_tx, go_rx) = mpsc::channel::<()>();
        let responder = thread::spawn(move || {
            let mut peer = Peer::accept(Node::new("far", 2, 0), far()).unwrap();
            let reg = loop {
                let got = peer.node.take_events().into_iter().find_map(|e| match e {
                    NodeEvent::RegisterReceived(r) => Some(r),
                    _ => None,
                });
                if let Some(r) = got {
                    break r;
                }
                assert!(peer.step().unwrap());
            };
            for g in gates_b() {
                peer.node.apply_gate(reg, 0, &g).unwrap();
            }
            ready_tx.send(()).unwrap();
            match measurer {
                Side::B => {
                    go_rx.recv().unwrap();
                    peer.measure(reg, 0, &mut RandomSource::new(seed)).unwrap();
                }
                Side::A => {
                    wait_reconciled(&mut peer);
                    peer.node.measure(reg, 0, &mut RandomSource::new(partner_seed(seed))).unwrap();
                }
            }
            peer.serve().unwrap();
            peer.node.register(reg).unwrap().base().clone()
        });

        let mut peer = Peer::connect(Node::new("near", 1, 0), near, SessionId::from_u128(99)).unwrap();
        let h = peer.node.entangle(epr());
        peer.send_register(h.side_b).unwrap();
        for g in gates_a() {
            peer.node.apply_gate(h.side_a, 0, &g).unwrap();
        }
        ready_rx.recv().unwrap();
        match measurer {
            Side::A => {
                peer.measure(h.side_a, 0, &mut RandomSource::new(seed)).unwrap();
            }
            Side::B => {
                go_tx.send(()).unwrap();
                wait_reconciled(&mut peer);
                peer.node.measure(h.side_a, 0, &mut RandomSource::new(partner_seed(seed))).unwrap();
            }
        }
        let a = peer.node.register(h.side_a).unwrap().base().clone();
        drop(peer);
        (a, responder.join().unwrap())
    }
}
