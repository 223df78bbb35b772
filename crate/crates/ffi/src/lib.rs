//! C ABI over `qent-core`.
//!
//! Conventions:
//! - every fallible call returns a [`QentStatus`]; results come back through
//!   out-pointers, which are left untouched on failure;
//! - on failure a message is kept per thread, see [`qent_last_error_message`];
//! - handles are opaque and owned by the caller until passed to the matching
//!   `_free` function;
//! - byte buffers handed out by the library are released with
//!   [`qent_buffer_free`]. Frame buffers hold zero or more complete
//!   length-prefixed frames back to back.
//!
//! A panic never crosses the boundary: it is caught and reported as
//! `QENT_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use qent_core::bb84::{run_bb84, Bb84Config};
use qent_core::entangle::EprMatrix;
use qent_core::experiment::{attenuation_db, eta_of_db, SeriesKind};
use qent_core::linalg::{c, Gate, Matrix2};
use qent_core::noise::DampingMode;
use qent_core::register::RegisterId;
use qent_core::wire::{decode, encode, Envelope, SessionId};
use qent_core::{Node, QentError, RandomSource};

/// Status codes. Zero is success; every other value mirrors one error kind
/// of the library, plus the ABI-only `NULL_POINTER` and `PANIC`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QentStatus {
    Ok = 0,
    NullPointer = 1,
    Validation = 2,
    OutOfRange = 3,
    QubitLost = 4,
    NoDefinedOutcome = 5,
    NotEntangled = 6,
    StaleEntanglement = 7,
    UnknownPair = 8,
    ProtocolViolation = 9,
    UnrepresentableOperation = 10,
    Decode = 11,
    UnsupportedVersion = 12,
    Framing = 13,
    Transport = 14,
    Peer = 15,
    Panic = 16,
}

impl From<&QentError> for QentStatus {
    fn from(e: &QentError) -> Self {
        match e {
            QentError::Validation(_) => QentStatus::Validation,
            QentError::OutOfRange { .. } => QentStatus::OutOfRange,
            QentError::QubitLost(_) => QentStatus::QubitLost,
            QentError::NoDefinedOutcome(_) => QentStatus::NoDefinedOutcome,
            QentError::NotEntangled => QentStatus::NotEntangled,
            QentError::StaleEntanglement(_) => QentStatus::StaleEntanglement,
            QentError::UnknownPair(_) => QentStatus::UnknownPair,
            QentError::ProtocolViolation(_) => QentStatus::ProtocolViolation,
            QentError::UnrepresentableEntanglingOperation(_) => QentStatus::UnrepresentableOperation,
            QentError::Decode { .. } => QentStatus::Decode,
            QentError::UnsupportedVersion(_) => QentStatus::UnsupportedVersion,
            QentError::Framing(_) => QentStatus::Framing,
            QentError::Transport(_) => QentStatus::Transport,
            QentError::Peer { .. } => QentStatus::Peer,
        }
    }
}

/// Single-qubit gates addressable by name. `theta` is only read by the rotations.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QentGateKind {
    Identity = 0,
    Hadamard = 1,
    PauliX = 2,
    PauliY = 3,
    PauliZ = 4,
    Ry = 5,
    Rx = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QentBell {
    PhiPlus = 0,
    PhiMinus = 1,
    PsiPlus = 2,
    PsiMinus = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QentSeries {
    Control = 0,
    EveNearAlice = 1,
    EveNearBob = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QentDamping {
    /// Each qubit is lost with probability `eta`; survivors are untouched.
    FractionAffected = 0,
    /// Per-qubit jump/no-jump trajectory of the amplitude-damping channel.
    KrausTrajectory = 1,
}

/// A freshly entangled pair: both halves live on the node that made it.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QentPair {
    pub pair: u64,
    pub side_a: u64,
    pub side_b: u64,
}

/// One qubit as seen from outside: amplitudes as (re, im) pairs.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct QentQubit {
    pub alpha_re: f64,
    pub alpha_im: f64,
    pub beta_re: f64,
    pub beta_im: f64,
    pub lost: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct QentRunStats {
    pub sent: u64,
    pub received: u64,
    pub sifted: u64,
    pub matched: u64,
    pub efficiency: f64,
    pub sifted_error_rate: f64,
    pub attenuation_db: f64,
}

/// Library-owned bytes; release with `qent_buffer_free`.
#[repr(C)]
#[derive(Debug)]
pub struct QentBuffer {
    pub data: *mut u8,
    pub len: usize,
}

impl QentBuffer {
    fn from_vec(v: Vec<u8>) -> Self {
        let len = v.len();
        let data = Box::into_raw(v.into_boxed_slice()) as *mut u8;
        Self { data, len }
    }

    fn empty() -> Self {
        Self { data: ptr::null_mut(), len: 0 }
    }
}

/// Opaque simulator node.
pub struct QentNode {
    inner: Node,
}

/// Opaque seeded random source.
pub struct QentRng {
    inner: RandomSource,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', "\\0")).expect("interior NULs escaped");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(e: QentError) -> QentStatus {
    let status = QentStatus::from(&e);
    set_last_error(e.to_string());
    status
}

fn null(what: &str) -> QentStatus {
    set_last_error(format!("null pointer: {what}"));
    QentStatus::NullPointer
}

/// Runs `f`, turning errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), QentStatus>) -> QentStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QentStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            QentStatus::Panic
        }
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, QentStatus>;
}

impl<T> OrStatus<T> for qent_core::Result<T> {
    fn or_status(self) -> Result<T, QentStatus> {
        self.map_err(fail)
    }
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, QentStatus> {
    unsafe { p.as_mut() }.ok_or_else(|| null(what))
}

unsafe fn write_out<T>(p: *mut T, v: T, what: &str) -> Result<(), QentStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    unsafe { p.write(v) };
    Ok(())
}

fn session_id(hi: u64, lo: u64) -> SessionId {
    SessionId::from_u128((u128::from(hi) << 64) | u128::from(lo))
}

fn concat_frames(envs: &[Envelope]) -> Vec<u8> {
    envs.iter().flat_map(encode).collect()
}

/// Message for the most recent failure on this thread, or NULL if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn qent_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static, NUL-terminated name of a status code.
#[no_mangle]
pub extern "C" fn qent_status_name(status: QentStatus) -> *const c_char {
    let s: &'static [u8] = match status {
        QentStatus::Ok => b"ok\0",
        QentStatus::NullPointer => b"null_pointer\0",
        QentStatus::Validation => b"validation\0",
        QentStatus::OutOfRange => b"out_of_range\0",
        QentStatus::QubitLost => b"qubit_lost\0",
        QentStatus::NoDefinedOutcome => b"no_defined_outcome\0",
        QentStatus::NotEntangled => b"not_entangled\0",
        QentStatus::StaleEntanglement => b"stale_entanglement\0",
        QentStatus::UnknownPair => b"unknown_pair\0",
        QentStatus::ProtocolViolation => b"protocol_violation\0",
        QentStatus::UnrepresentableOperation => b"unrepresentable_operation\0",
        QentStatus::Decode => b"decode\0",
        QentStatus::UnsupportedVersion => b"unsupported_version\0",
        QentStatus::Framing => b"framing\0",
        QentStatus::Transport => b"transport\0",
        QentStatus::Peer => b"peer\0",
        QentStatus::Panic => b"panic\0",
    };
    s.as_ptr().cast()
}

/// Releases a buffer returned by the library. Passing an empty buffer is a no-op.
///
/// # Safety
/// `buf` must be NULL or point to a buffer produced by this library that has
/// not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn qent_buffer_free(buf: *mut QentBuffer) {
    let Some(b) = (unsafe { buf.as_mut() }) else {
        return;
    };
    if !b.data.is_null() {
        drop(unsafe { Box::from_raw(ptr::slice_from_raw_parts_mut(b.data, b.len)) });
    }
    *b = QentBuffer::empty();
}

#[no_mangle]
pub extern "C" fn qent_rng_new(seed: u64) -> *mut QentRng {
    Box::into_raw(Box::new(QentRng {
        inner: RandomSource::new(seed),
    }))
}

/// # Safety
/// `rng` must be NULL or a handle from `qent_rng_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qent_rng_free(rng: *mut QentRng) {
    if !rng.is_null() {
        drop(unsafe { Box::from_raw(rng) });
    }
}

/// Uniform draw in [0, 1).
///
/// # Safety
/// `rng` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qent_rng_next_f64(rng: *mut QentRng, out: *mut f64) -> QentStatus {
    guard(|| {
        let rng = unsafe { deref_mut(rng, "rng") }?;
        unsafe { write_out(out, rng.inner.next_f64(), "out") }
    })
}

/// `index` must be unique among nodes that exchange frames; `seed` drives the
/// node's own randomness.
#[no_mangle]
pub extern "C" fn qent_node_new(index: u32, seed: u64) -> *mut QentNode {
    Box::into_raw(Box::new(QentNode {
        inner: Node::new(format!("node-{index}"), index, seed),
    }))
}

/// # Safety
/// `node` must be NULL or a handle from `qent_node_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qent_node_free(node: *mut QentNode) {
    if !node.is_null() {
        drop(unsafe { Box::from_raw(node) });
    }
}

/// Creates a register of `len` qubits, all |0⟩.
///
/// # Safety
/// `node` must be a live handle; `out_register` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qent_node_create_register(
    node: *mut QentNode,
    len: usize,
    out_register: *mut u64,
) -> QentStatus {
    guard(|| {
        let node = unsafe { deref_mut(node, "node") }?;
        let id = node.inner.create_register(len);
        unsafe { write_out(out_register, id.0, "out_register") }
    })
}

/// Creates a pair in one of the four Bell states.
///
/// # Safety
/// `node` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qent_node_entangle_bell(node: *mut QentNode, bell: QentBell, out: *mut QentPair) -> QentStatus {
    let epr = match bell {
        QentBell::PhiPlus => EprMatrix::phi_plus(),
        QentBell::PhiMinus => EprMatrix::phi_minus(),
        QentBell::PsiPlus => EprMatrix::psi_plus(),
        QentBell::PsiMinus => EprMatrix::psi_minus(),
    };
    unsafe { entangle(node, epr, out) }
}

/// Creates a pair from an arbitrary amplitude matrix: `amplitudes` holds eight
/// doubles, (re, im) for |00⟩, |01⟩, |10⟩, |11⟩. Fails with `NOT_ENTANGLED`
/// for a product state.
///
/// # Safety
/// `node` must be a live handle, `amplitudes` must point to eight doubles and
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qent_node_entangle(
    node: *mut QentNode,
    amplitudes: *const f64,
    out: *mut QentPair,
) -> QentStatus {
    if amplitudes.is_null() {
        return null("amplitudes");
    }
    let a = unsafe { std::slice::from_raw_parts(amplitudes, 8) };
    match EprMatrix::new([c(a[0], a[1]), c(a[2], a[3]), c(a[4], a[5]), c(a[6], a[7])]) {
        Ok(epr) => unsafe { entangle(node, epr, out) },
        Err(e) => fail(e),
    }
}

unsafe fn entangle(node: *mut QentNode, epr: EprMatrix, out: *mut QentPair) -> QentStatus {
    guard(|| {
        let node = unsafe { deref_mut(node, "node") }?;
        if out.is_null() {
            return Err(null("out"));
        }
        let h = node.inner.entangle(epr);
        let pair = QentPair {
            pair: h.pair.0,
            side_a: h.side_a.0,
            side_b: h.side_b.0,
        };
        unsafe { write_out(out, pair, "out") }
    })
}

/// # Safety
/// `node` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn qent_node_apply_gate(
    node: *mut QentNode,
    register: u64,
    pos: usize,
    kind: QentGateKind,
    theta: f64,
) -> QentStatus {
    let gate = match kind {
        QentGateKind::Identity => Gate::identity(),
        QentGateKind::Hadamard => Gate::hadamard(),
        QentGateKind::PauliX => Gate::pauli_x(),
        QentGateKind::PauliY => Gate::pauli_y(),
        QentGateKind::PauliZ => Gate::pauli_z(),
        QentGateKind::Ry => Gate::ry(theta),
        QentGateKind::Rx => Gate::rx(theta),
    };
    unsafe { apply(node, register, pos, gate) }
}

/// Applies a caller-supplied 2×2 unitary: `matrix` holds eight doubles,
/// row-major (re, im) entries. Non-unitary input fails with `VALIDATION`.
///
/// # Safety
/// `node` must be a live handle and `matrix` must point to eight doubles.
#[no_mangle]
pub unsafe extern "C" fn qent_node_apply_matrix(
    node: *mut QentNode,
    register: u64,
    pos: usize,
    matrix: *const f64,
) -> QentStatus {
    if matrix.is_null() {
        return null("matrix");
    }
    let m = unsafe { std::slice::from_raw_parts(matrix, 8) };
    let entries = [c(m[0], m[1]), c(m[2], m[3]), c(m[4], m[5]), c(m[6], m[7])];
    match Gate::new(Matrix2::from_entries(entries)) {
        Ok(g) => unsafe { apply(node, register, pos, g) },
        Err(e) => fail(e),
    }
}

unsafe fn apply(node: *mut QentNode, register: u64, pos: usize, gate: Gate) -> QentStatus {
    guard(|| {
        let node = unsafe { deref_mut(node, "node") }?;
        node.inner.apply_gate(RegisterId(register), pos, &gate).or_status()
    })
}

/// Measures in the computational basis. For an entangled slot whose partner
/// lives on another node, the notice to send is returned in `out_frames`
/// (empty otherwise); `out_frames` may be NULL only when no frame results.
///
/// # Safety
/// `node` and `rng` must be live handles; `out_bit` must be writable;
/// `out_frames` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn qent_node_measure(
    node: *mut QentNode,
    register: u64,
    pos: usize,
    rng: *mut QentRng,
    out_bit: *mut u8,
    out_frames: *mut QentBuffer,
) -> QentStatus {
    guard(|| {
        let node = unsafe { deref_mut(node, "node") }?;
        let rng = unsafe { deref_mut(rng, "rng") }?;
        if out_bit.is_null() {
            return Err(null("out_bit"));
        }
        let m = node.inner.measure(RegisterId(register), pos, &mut rng.inner).or_status()?;
        if !out_frames.is_null() {
            unsafe { out_frames.write(QentBuffer::from_vec(concat_frames(&m.outbound))) };
        } else if !m.outbound.is_empty() {
            set_last_error("measurement produced a notice but out_frames is NULL; notice dropped".into());
            unsafe { out_bit.write(m.bit) };
            return Err(QentStatus::NullPointer);
        }
        unsafe { write_out(out_bit, m.bit, "out_bit") }
    })
}

/// Reads one qubit. Slots whose partner has not been measured report their
/// local marginal.
///
/// # Safety
/// `node` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qent_node_qubit(
    node: *mut QentNode,
    register: u64,
    pos: usize,
    out: *mut QentQubit,
) -> QentStatus {
    guard(|| {
        let node = unsafe { deref_mut(node, "node") }?;
        let reg = node.inner.register(RegisterId(register)).ok_or_else(|| {
            fail(QentError::Validation(format!("unknown register {}", RegisterId(register))))
        })?;
        let q = reg.base().qubit(pos).or_status()?;
        let v = QentQubit {
            alpha_re: q.state.alpha.re,
            alpha_im: q.state.alpha.im,
            beta_re: q.state.beta.re,
            beta_im: q.state.beta.im,
            lost: q.lost,
        };
        unsafe { write_out(out, v, "out") }
    })
}

/// HELLO frame opening session (`session_hi`, `session_lo`) towards a peer.
///
/// # Safety
/// `node` must be a live handle; `out_frames` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qent_node_open_session(
    node: *mut QentNode,
    session_hi: u64,
    session_lo: u64,
    out_frames: *mut QentBuffer,
) -> QentStatus {
    guard(|| {
        let node = unsafe { deref_mut(node, "node") }?;
        if out_frames.is_null() {
            return Err(null("out_frames"));
        }
        let env = node.inner.open_session(session_id(session_hi, session_lo));
        unsafe { write_out(out_frames, QentBuffer::from_vec(encode(&env)), "out_frames") }
    })
}

/// REGISTER_TRANSFER frame shipping `register` over an established session.
/// The register stays frozen until the peer's ACK is dispatched.
///
/// # Safety
/// `node` must be a live handle; `out_frames` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qent_node_begin_transfer(
    node: *mut QentNode,
    register: u64,
    session_hi: u64,
    session_lo: u64,
    out_frames: *mut QentBuffer,
) -> QentStatus {
    guard(|| {
        let node = unsafe { deref_mut(node, "node") }?;
        if out_frames.is_null() {
            return Err(null("out_frames"));
        }
        let env = node
            .inner
            .begin_transfer(RegisterId(register), session_id(session_hi, session_lo))
            .or_status()?;
        unsafe { write_out(out_frames, QentBuffer::from_vec(encode(&env)), "out_frames") }
    })
}

/// Feeds one inbound frame (length prefix included) to the node. Replies go
/// to `out_frames`; `out_close` is set when the session should be dropped
/// after sending them. A frame that fails to decode is answered with an
/// ERROR frame for `session` and reported as success: the failure belongs to
/// the peer.
///
/// # Safety
/// `node` must be a live handle, `frame` must point to `len` readable bytes
/// and both out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn qent_node_dispatch(
    node: *mut QentNode,
    session_hi: u64,
    session_lo: u64,
    frame: *const u8,
    len: usize,
    out_frames: *mut QentBuffer,
    out_close: *mut bool,
) -> QentStatus {
    guard(|| {
        let node = unsafe { deref_mut(node, "node") }?;
        if frame.is_null() && len > 0 {
            return Err(null("frame"));
        }
        if out_frames.is_null() || out_close.is_null() {
            return Err(null("out_frames/out_close"));
        }
        let bytes = if len == 0 { &[][..] } else { unsafe { std::slice::from_raw_parts(frame, len) } };
        let d = match decode(bytes) {
            Ok(env) => node.inner.dispatch(env),
            Err(e) => node.inner.reject_frame(session_id(session_hi, session_lo), &e),
        };
        unsafe {
            out_frames.write(QentBuffer::from_vec(concat_frames(&d.replies)));
            out_close.write(d.close);
        }
        Ok(())
    })
}

/// `-10·log10(1 - eta)`; `eta = 1` fails (infinite attenuation).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qent_attenuation_db(eta: f64, out: *mut f64) -> QentStatus {
    guard(|| {
        let db = attenuation_db(eta).or_status()?;
        unsafe { write_out(out, db, "out") }
    })
}

/// Inverse of `qent_attenuation_db`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qent_eta_of_db(db: f64, out: *mut f64) -> QentStatus {
    guard(|| {
        let eta = eta_of_db(db).or_status()?;
        unsafe { write_out(out, eta, "out") }
    })
}

/// One BB84 run of `n` qubits through the chosen channel. `eve_rate` is
/// ignored for `QENT_SERIES_CONTROL`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qent_bb84_run(
    n: usize,
    series: QentSeries,
    eve_rate: f64,
    eta: f64,
    damping: QentDamping,
    seed: u64,
    out: *mut QentRunStats,
) -> QentStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let kind = match series {
            QentSeries::Control => SeriesKind::Control,
            QentSeries::EveNearAlice => SeriesKind::EveAlice,
            QentSeries::EveNearBob => SeriesKind::EveBob,
        };
        let mode = match damping {
            QentDamping::FractionAffected => DampingMode::FractionAffected,
            QentDamping::KrausTrajectory => DampingMode::KrausTrajectory,
        };
        let pipeline = kind.pipeline(eve_rate, eta, mode).or_status()?;
        let mut cfg = Bb84Config::new(n, pipeline, seed).or_status()?;
        let s = run_bb84(&mut cfg).or_status()?;
        let stats = QentRunStats {
            sent: s.sent,
            received: s.received,
            sifted: s.sifted,
            matched: s.matched,
            efficiency: s.efficiency,
            sifted_error_rate: s.sifted_error_rate,
            attenuation_db: s.attenuation_db,
        };
        unsafe { write_out(out, stats, "out") }
    })
}
