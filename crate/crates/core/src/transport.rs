//! Frame transports and a blocking driver that pumps a [`Node`] over one.

use std::io::{BufReader, BufWriter};
use std::net::{TcpStream, ToSocketAddrs};
use std::sync::mpsc::{channel, Receiver, Sender, TryRecvError};

use crate::entangle::{PairId, PairState};
use crate::error::{QentError, Result};
use crate::node::{Node, NodeEvent};
use crate::register::RegisterId;
use crate::rng::RandomSource;
use crate::wire::{self, Envelope, SessionId};

/// Moves whole frames (length prefix included) between two nodes.
pub trait Transport: Send {
    fn send(&mut self, frame: &[u8]) -> Result<()>;
    /// Blocks for the next frame; `Ok(None)` once the peer has gone away.
    fn recv(&mut self) -> Result<Option<Vec<u8>>>;
}

/// In-process transport over a pair of channels.
#[derive(Debug)]
pub struct LoopbackEndpoint {
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
}

/// Two connected loopback endpoints.
pub fn loopback_transport() -> (LoopbackEndpoint, LoopbackEndpoint) {
    let (tx_a, rx_b) = channel();
    let (tx_b, rx_a) = channel();
    (
        LoopbackEndpoint { tx: tx_a, rx: rx_a },
        LoopbackEndpoint { tx: tx_b, rx: rx_b },
    )
}

impl LoopbackEndpoint {
    /// Non-blocking receive.
    pub fn try_recv(&mut self) -> Result<Option<Vec<u8>>> {
        match self.rx.try_recv() {
            Ok(f) => Ok(Some(f)),
            Err(TryRecvError::Empty) => Ok(None),
            Err(TryRecvError::Disconnected) => Err(QentError::Transport("peer disconnected".into())),
        }
    }
}

impl Transport for LoopbackEndpoint {
    fn send(&mut self, frame: &[u8]) -> Result<()> {
        self.tx
            .send(frame.to_vec())
            .map_err(|_| QentError::Transport("peer disconnected".into()))
    }

    fn recv(&mut self) -> Result<Option<Vec<u8>>> {
        Ok(self.rx.recv().ok())
    }
}

pub struct TcpTransport {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
}

impl TcpTransport {
    pub fn new(stream: TcpStream) -> Result<Self> {
        stream.set_nodelay(true)?;
        let reader = BufReader::new(stream.try_clone()?);
        Ok(Self {
            reader,
            writer: BufWriter::new(stream),
        })
    }

    pub fn connect(addr: impl ToSocketAddrs) -> Result<Self> {
        Self::new(TcpStream::connect(addr)?)
    }
}

impl Transport for TcpTransport {
    fn send(&mut self, frame: &[u8]) -> Result<()> {
        wire::write_frame(&mut self.writer, frame)
    }

    fn recv(&mut self) -> Result<Option<Vec<u8>>> {
        wire::read_frame(&mut self.reader)
    }
}

/// A node bound to one session over one transport, driven synchronously.
pub struct Peer<T: Transport> {
    pub node: Node,
    transport: T,
    session: SessionId,
}

impl<T: Transport> Peer<T> {
    /// Initiates the session and waits for the peer's HELLO.
    pub fn connect(mut node: Node, mut transport: T, session: SessionId) -> Result<Self> {
        let hello = node.open_session(session);
        transport.send(&wire::encode(&hello))?;
        let mut peer = Self { node, transport, session };
        peer.pump_until(|n| n.session_established(session))?;
        // anything measured before a reconnect still needs acknowledging
        let resend = peer.node.unacknowledged_notices(session);
        peer.send_all(&resend)?;
        Ok(peer)
    }

    /// Waits for an initiator's HELLO and answers it.
    pub fn accept(node: Node, mut transport: T) -> Result<Self> {
        let frame = transport
            .recv()?
            .ok_or_else(|| QentError::Transport("peer closed before HELLO".into()))?;
        let env = wire::decode(&frame)?;
        let session = env.session_id;
        let mut peer = Self { node, transport, session };
        peer.handle(Ok(env))?;
        if !peer.node.session_established(session) {
            return Err(QentError::Transport("handshake failed".into()));
        }
        Ok(peer)
    }

    pub fn session(&self) -> SessionId {
        self.session
    }

    fn send_all(&mut self, envs: &[Envelope]) -> Result<()> {
        for env in envs {
            self.transport.send(&wire::encode(env))?;
        }
        Ok(())
    }

    fn handle(&mut self, decoded: Result<Envelope>) -> Result<()> {
        let d = match decoded {
            Ok(env) => self.node.dispatch(env),
            Err(e @ (QentError::Decode { .. } | QentError::UnsupportedVersion(_))) => {
                self.node.reject_frame(self.session, &e)
            }
            Err(e) => return Err(e),
        };
        self.send_all(&d.replies)?;
        if d.close {
            self.node.close_session(self.session);
            return Err(QentError::Transport("session closed by protocol error".into()));
        }
        Ok(())
    }

    /// Processes one inbound frame. Returns `false` when the peer has gone.
    pub fn step(&mut self) -> Result<bool> {
        match self.transport.recv()? {
            None => {
                self.node.close_session(self.session);
                Ok(false)
            }
            Some(frame) => {
                self.handle(wire::decode(&frame))?;
                Ok(true)
            }
        }
    }

    pub fn pump_until(&mut self, mut done: impl FnMut(&Node) -> bool) -> Result<()> {
        while !done(&self.node) {
            if !self.step()? {
                return Err(QentError::Transport("peer closed the connection".into()));
            }
        }
        Ok(())
    }

    /// Serves inbound frames until the peer disconnects.
    pub fn serve(&mut self) -> Result<()> {
        while self.step()? {}
        Ok(())
    }

    /// Sends a register and waits for the peer to accept or reject it.
    pub fn send_register(&mut self, reg: RegisterId) -> Result<()> {
        let env = self.node.begin_transfer(reg, self.session)?;
        self.send_all(&[env])?;
        self.pump_until(|n| !n.is_pending(reg))?;
        if self.node.register(reg).is_some() {
            let code = self
                .node
                .take_events()
                .into_iter()
                .rev()
                .find_map(|e| match e {
                    NodeEvent::TransferAborted { register, code } if register == reg => Some(code),
                    _ => None,
                })
                .unwrap_or_default();
            return Err(QentError::Peer {
                code,
                message: format!("transfer of {reg} rejected"),
            });
        }
        Ok(())
    }

    /// Measures a slot and, when its partner is remote, waits until the
    /// partner has reconciled.
    pub fn measure(&mut self, reg: RegisterId, pos: usize, rng: &mut RandomSource) -> Result<u8> {
        let pair = self.node.register(reg).and_then(|r| r.link(pos)).map(|l| l.pair_id);
        let m = self.node.measure(reg, pos, rng)?;
        if !m.outbound.is_empty() {
            self.send_all(&m.outbound)?;
            let pair = pair.expect("notice implies a link");
            self.await_settled(pair)?;
        }
        Ok(m.bit)
    }

    /// Waits until `pair` is settled on this node.
    pub fn await_settled(&mut self, pair: PairId) -> Result<()> {
        self.pump_until(|n| n.pair(pair).is_none_or(|p| p.state() == PairState::Reconciled))
    }

    pub fn into_parts(self) -> (Node, T) {
        (self.node, self.transport)
    }
}
