//! Wire format shared by every node.
//!
//! A frame is a 4-byte big-endian payload length followed by a UTF-8 JSON
//! envelope:
//!
//! ```text
//! {"version":1,"sessionId":"<uuid>","kind":"MEASUREMENT_NOTICE","payload":{...}}
//! ```
//!
//! Complex numbers travel as `[re, im]`; 2×2 matrices as four of those in
//! row-major order. Floats are written in shortest round-trip form and parsed
//! with correct rounding, so amplitudes survive a round trip bit for bit.

use std::fmt;
use std::io::{Read, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use uuid::Uuid;

use crate::entangle::{EprMatrix, MeasurementNotice, OpHistory, PairId, Side};
use crate::error::{QentError, Result};
use crate::linalg::{AmplitudePair, Gate, Matrix2, WireComplex};
use crate::register::{QuantumRegister, Qubit, RegisterId};

pub const PROTOCOL_VERSION: u32 = 1;
pub const MAX_FRAME_LEN: usize = 16 * 1024 * 1024;
const PREFIX_LEN: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SessionId(pub Uuid);

impl SessionId {
    pub fn from_u128(v: u128) -> Self {
        SessionId(Uuid::from_u128(v))
    }
}

impl fmt::Display for SessionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MessageKind {
    Hello,
    RegisterTransfer,
    MeasurementNotice,
    Ack,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct HelloPayload {
    pub node: String,
    pub supported_versions: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QubitRecord {
    pub alpha: WireComplex,
    pub beta: WireComplex,
    pub lost: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct EntanglementRecord {
    pub pair_id: PairId,
    pub slot_index: usize,
    pub side: Side,
    pub epr_matrix: [WireComplex; 4],
}

/// Payload of REGISTER_TRANSFER; also the standalone register encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RegisterRecord {
    pub register_id: RegisterId,
    pub qubits: Vec<QubitRecord>,
    pub entanglements: Vec<EntanglementRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct NoticePayload {
    pub pair_id: PairId,
    pub measured_side: Side,
    pub outcome: u8,
    pub history: Vec<[WireComplex; 4]>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct AckPayload {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub register_id: Option<RegisterId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_id: Option<PairId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ErrorPayload {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub register_id: Option<RegisterId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_id: Option<PairId>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Hello(HelloPayload),
    RegisterTransfer(RegisterRecord),
    MeasurementNotice(NoticePayload),
    Ack(AckPayload),
    Error(ErrorPayload),
}

impl Payload {
    pub fn kind(&self) -> MessageKind {
        match self {
            Payload::Hello(_) => MessageKind::Hello,
            Payload::RegisterTransfer(_) => MessageKind::RegisterTransfer,
            Payload::MeasurementNotice(_) => MessageKind::MeasurementNotice,
            Payload::Ack(_) => MessageKind::Ack,
            Payload::Error(_) => MessageKind::Error,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub version: u32,
    pub session_id: SessionId,
    pub payload: Payload,
}

impl Envelope {
    pub fn new(session_id: SessionId, payload: Payload) -> Self {
        Self {
            version: PROTOCOL_VERSION,
            session_id,
            payload,
        }
    }

    pub fn kind(&self) -> MessageKind {
        self.payload.kind()
    }

    pub fn error(session_id: SessionId, err: &QentError) -> Self {
        let (register_id, pair_id) = match err {
            QentError::StaleEntanglement(p) | QentError::UnknownPair(p) => (None, Some(*p)),
            _ => (None, None),
        };
        Self::new(
            session_id,
            Payload::Error(ErrorPayload {
                code: err.code().to_string(),
                message: err.to_string(),
                register_id,
                pair_id,
            }),
        )
    }
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct EnvelopeOut<'a, P: Serialize> {
    version: u32,
    session_id: SessionId,
    kind: MessageKind,
    payload: &'a P,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct EnvelopeIn<'a> {
    version: u32,
    session_id: SessionId,
    kind: MessageKind,
    #[serde(borrow)]
    payload: &'a RawValue,
}

fn to_json(env: &Envelope) -> Vec<u8> {
    fn out<P: Serialize>(env: &Envelope, payload: &P) -> Vec<u8> {
        serde_json::to_vec(&EnvelopeOut {
            version: env.version,
            session_id: env.session_id,
            kind: env.kind(),
            payload,
        })
        .expect("envelope serialization is infallible for finite values")
    }
    match &env.payload {
        Payload::Hello(p) => out(env, p),
        Payload::RegisterTransfer(p) => out(env, p),
        Payload::MeasurementNotice(p) => out(env, p),
        Payload::Ack(p) => out(env, p),
        Payload::Error(p) => out(env, p),
    }
}

/// Byte offset of serde_json's line/column position within `text`.
fn offset_of(text: &[u8], line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let mut current = 1;
    let mut start = 0;
    for (i, b) in text.iter().enumerate() {
        if current == line {
            break;
        }
        if *b == b'\n' {
            current += 1;
            start = i + 1;
        }
    }
    (start + column.saturating_sub(1)).min(text.len())
}

fn parse_json<'a, T: Deserialize<'a>>(text: &'a [u8], base: usize) -> Result<T> {
    serde_json::from_slice(text).map_err(|e| QentError::Decode {
        offset: base + offset_of(text, e.line(), e.column()),
        message: e.to_string(),
    })
}

fn parse_payload<T: DeserializeOwned>(raw: &RawValue, json: &[u8], base: usize) -> Result<T> {
    let text = raw.get().as_bytes();
    let local = text.as_ptr() as usize - json.as_ptr() as usize;
    parse_json(text, base + local)
}

/// Decodes the JSON body of a frame. `base` is added to reported offsets.
pub fn decode_body(json: &[u8], base: usize) -> Result<Envelope> {
    let raw: EnvelopeIn<'_> = parse_json(json, base)?;
    if raw.version != PROTOCOL_VERSION {
        return Err(QentError::UnsupportedVersion(raw.version));
    }
    let payload = match raw.kind {
        MessageKind::Hello => Payload::Hello(parse_payload(raw.payload, json, base)?),
        MessageKind::RegisterTransfer => {
            Payload::RegisterTransfer(parse_payload(raw.payload, json, base)?)
        }
        MessageKind::MeasurementNotice => {
            Payload::MeasurementNotice(parse_payload(raw.payload, json, base)?)
        }
        MessageKind::Ack => Payload::Ack(parse_payload(raw.payload, json, base)?),
        MessageKind::Error => Payload::Error(parse_payload(raw.payload, json, base)?),
    };
    Ok(Envelope {
        version: raw.version,
        session_id: raw.session_id,
        payload,
    })
}

/// Length-prefixed frame for `env`.
pub fn encode(env: &Envelope) -> Vec<u8> {
    let body = to_json(env);
    let mut frame = Vec::with_capacity(PREFIX_LEN + body.len());
    frame.extend_from_slice(&(body.len() as u32).to_be_bytes());
    frame.extend_from_slice(&body);
    frame
}

/// Splits one frame off the front of `buf`: returns the body and the number
/// of bytes consumed.
pub fn split_frame(buf: &[u8]) -> Result<(&[u8], usize)> {
    if buf.len() < PREFIX_LEN {
        return Err(QentError::Framing(format!(
            "truncated length prefix: {} of {PREFIX_LEN} bytes",
            buf.len()
        )));
    }
    let len = u32::from_be_bytes([buf[0], buf[1], buf[2], buf[3]]) as usize;
    if len > MAX_FRAME_LEN {
        return Err(QentError::Framing(format!(
            "frame length {len} exceeds cap of {MAX_FRAME_LEN}"
        )));
    }
    let available = buf.len() - PREFIX_LEN;
    if available < len {
        return Err(QentError::Framing(format!(
            "truncated frame: length prefix {len}, {available} bytes available"
        )));
    }
    Ok((&buf[PREFIX_LEN..PREFIX_LEN + len], PREFIX_LEN + len))
}

/// Decodes the first frame in `buf`, returning the envelope and bytes consumed.
pub fn decode_frame(buf: &[u8]) -> Result<(Envelope, usize)> {
    let (body, used) = split_frame(buf)?;
    Ok((decode_body(body, PREFIX_LEN)?, used))
}

/// Decodes exactly one frame.
pub fn decode(frame: &[u8]) -> Result<Envelope> {
    let (env, used) = decode_frame(frame)?;
    if used != frame.len() {
        return Err(QentError::Framing(format!(
            "{} trailing bytes after frame",
            frame.len() - used
        )));
    }
    Ok(env)
}

/// Reads one raw frame (prefix included). `Ok(None)` on clean end of stream.
pub fn read_frame<R: Read>(r: &mut R) -> Result<Option<Vec<u8>>> {
    let mut prefix = [0u8; PREFIX_LEN];
    let mut got = 0;
    while got < PREFIX_LEN {
        match r.read(&mut prefix[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => {
                return Err(QentError::Framing(format!(
                    "stream ended inside length prefix ({got} bytes)"
                )))
            }
            Ok(n) => got += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let len = u32::from_be_bytes(prefix) as usize;
    if len > MAX_FRAME_LEN {
        return Err(QentError::Framing(format!(
            "frame length {len} exceeds cap of {MAX_FRAME_LEN}"
        )));
    }
    let mut frame = vec![0u8; PREFIX_LEN + len];
    frame[..PREFIX_LEN].copy_from_slice(&prefix);
    r.read_exact(&mut frame[PREFIX_LEN..]).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            QentError::Framing(format!("stream ended inside a frame of {len} bytes"))
        } else {
            e.into()
        }
    })?;
    Ok(Some(frame))
}

pub fn write_frame<W: Write>(w: &mut W, frame: &[u8]) -> Result<()> {
    w.write_all(frame)?;
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Conversions between protocol values and wire records
// ---------------------------------------------------------------------------

pub fn gate_to_wire(g: &Gate) -> [WireComplex; 4] {
    g.entries().map(WireComplex::from)
}

pub fn gate_from_wire(w: &[WireComplex; 4]) -> Result<Gate> {
    Gate::new(Matrix2::from_entries(w.map(Into::into)))
}

impl From<&MeasurementNotice> for NoticePayload {
    fn from(n: &MeasurementNotice) -> Self {
        Self {
            pair_id: n.pair_id,
            measured_side: n.measured_side,
            outcome: n.outcome,
            history: n.history.gates().iter().map(gate_to_wire).collect(),
        }
    }
}

impl NoticePayload {
    pub fn to_notice(&self) -> Result<MeasurementNotice> {
        if self.outcome > 1 {
            return Err(QentError::validation(format!(
                "outcome: {} is not 0 or 1",
                self.outcome
            )));
        }
        let history = self
            .history
            .iter()
            .enumerate()
            .map(|(i, w)| {
                gate_from_wire(w).map_err(|e| QentError::validation(format!("history[{i}]: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MeasurementNotice {
            pair_id: self.pair_id,
            measured_side: self.measured_side,
            outcome: self.outcome,
            history: OpHistory::from_gates(history),
        })
    }
}

impl EntanglementRecord {
    pub fn new(pair_id: PairId, slot_index: usize, side: Side, epr: &EprMatrix) -> Self {
        Self {
            pair_id,
            slot_index,
            side,
            epr_matrix: epr.amplitudes().map(WireComplex::from),
        }
    }

    pub fn epr(&self) -> Result<EprMatrix> {
        EprMatrix::new(self.epr_matrix.map(Into::into))
            .map_err(|e| QentError::validation(format!("eprMatrix of {}: {e}", self.pair_id)))
    }
}

impl RegisterRecord {
    pub fn from_register(reg: &QuantumRegister, entanglements: Vec<EntanglementRecord>) -> Self {
        Self {
            register_id: reg.id(),
            qubits: reg
                .qubits()
                .iter()
                .map(|q| QubitRecord {
                    alpha: q.state.alpha.into(),
                    beta: q.state.beta.into(),
                    lost: q.lost,
                })
                .collect(),
            entanglements,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("register serialization is infallible for finite values")
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        parse_json(bytes, 0)
    }

    /// Checks slot indices, amplitude norms and entanglement matrices.
    pub fn validate(&self) -> Result<()> {
        for (i, q) in self.qubits.iter().enumerate() {
            let alpha = q.alpha.into();
            let beta = q.beta.into();
            let finite = q.alpha.0.iter().chain(q.beta.0.iter()).all(|x| x.is_finite());
            if !finite {
                return Err(QentError::validation(format!("qubits[{i}]: non-finite amplitude")));
            }
            if !q.lost {
                AmplitudePair::new(alpha, beta)
                    .map_err(|e| QentError::validation(format!("qubits[{i}]: {e}")))?;
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for e in &self.entanglements {
            if e.slot_index >= self.qubits.len() {
                return Err(QentError::validation(format!(
                    "entanglements: slotIndex {} out of range for {} qubits",
                    e.slot_index,
                    self.qubits.len()
                )));
            }
            if !seen.insert((e.pair_id, e.side)) {
                return Err(QentError::validation(format!(
                    "entanglements: side {:?} of {} listed twice",
                    e.side, e.pair_id
                )));
            }
            e.epr()?;
        }
        Ok(())
    }

    pub fn to_register(&self) -> Result<QuantumRegister> {
        self.validate()?;
        let qubits = self
            .qubits
            .iter()
            .map(|q| Qubit {
                state: AmplitudePair {
                    alpha: q.alpha.into(),
                    beta: q.beta.into(),
                },
                lost: q.lost,
            })
            .collect();
        Ok(QuantumRegister::from_qubits(self.register_id, qubits))
    }
}
