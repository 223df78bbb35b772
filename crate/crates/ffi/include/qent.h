#ifndef QENT_H
#define QENT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes. Zero is success; every other value mirrors one error kind
// of the library, plus the ABI-only `NULL_POINTER` and `PANIC`.
typedef enum QentStatus {
  QENT_STATUS_OK = 0,
  QENT_STATUS_NULL_POINTER = 1,
  QENT_STATUS_VALIDATION = 2,
  QENT_STATUS_OUT_OF_RANGE = 3,
  QENT_STATUS_QUBIT_LOST = 4,
  QENT_STATUS_NO_DEFINED_OUTCOME = 5,
  QENT_STATUS_NOT_ENTANGLED = 6,
  QENT_STATUS_STALE_ENTANGLEMENT = 7,
  QENT_STATUS_UNKNOWN_PAIR = 8,
  QENT_STATUS_PROTOCOL_VIOLATION = 9,
  QENT_STATUS_UNREPRESENTABLE_OPERATION = 10,
  QENT_STATUS_DECODE = 11,
  QENT_STATUS_UNSUPPORTED_VERSION = 12,
  QENT_STATUS_FRAMING = 13,
  QENT_STATUS_TRANSPORT = 14,
  QENT_STATUS_PEER = 15,
  QENT_STATUS_PANIC = 16,
} QentStatus;

typedef enum QentBell {
  QENT_BELL_PHI_PLUS = 0,
  QENT_BELL_PHI_MINUS = 1,
  QENT_BELL_PSI_PLUS = 2,
  QENT_BELL_PSI_MINUS = 3,
} QentBell;

// Single-qubit gates addressable by name. `theta` is only read by the rotations.
typedef enum QentGateKind {
  QENT_GATE_KIND_IDENTITY = 0,
  QENT_GATE_KIND_HADAMARD = 1,
  QENT_GATE_KIND_PAULI_X = 2,
  QENT_GATE_KIND_PAULI_Y = 3,
  QENT_GATE_KIND_PAULI_Z = 4,
  QENT_GATE_KIND_RY = 5,
  QENT_GATE_KIND_RX = 6,
} QentGateKind;

typedef enum QentSeries {
  QENT_SERIES_CONTROL = 0,
  QENT_SERIES_EVE_NEAR_ALICE = 1,
  QENT_SERIES_EVE_NEAR_BOB = 2,
} QentSeries;

typedef enum QentDamping {
  // Each qubit is lost with probability `eta`; survivors are untouched.
  QENT_DAMPING_FRACTION_AFFECTED = 0,
  // Per-qubit jump/no-jump trajectory of the amplitude-damping channel.
  QENT_DAMPING_KRAUS_TRAJECTORY = 1,
} QentDamping;

// Opaque simulator node.
typedef struct QentNode QentNode;

// Opaque seeded random source.
typedef struct QentRng QentRng;

// Library-owned bytes; release with `qent_buffer_free`.
typedef struct QentBuffer {
  uint8_t *data;
  size_t len;
} QentBuffer;

// A freshly entangled pair: both halves live on the node that made it.
typedef struct QentPair {
  uint64_t pair;
  uint64_t side_a;
  uint64_t side_b;
} QentPair;

// One qubit as seen from outside: amplitudes as (re, im) pairs.
typedef struct QentQubit {
  double alpha_re;
  double alpha_im;
  double beta_re;
  double beta_im;
  bool lost;
} QentQubit;

typedef struct QentRunStats {
  uint64_t sent;
  uint64_t received;
  uint64_t sifted;
  uint64_t matched;
  double efficiency;
  double sifted_error_rate;
  double attenuation_db;
} QentRunStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread, or NULL if none.
// The pointer stays valid until the next failing call on the same thread.
const char *qent_last_error_message(void);

// Static, NUL-terminated name of a status code.
const char *qent_status_name(enum QentStatus status);

// Releases a buffer returned by the library. Passing an empty buffer is a no-op.
//
// # Safety
// `buf` must be NULL or point to a buffer produced by this library that has
// not been freed yet.
void qent_buffer_free(struct QentBuffer *buf);

struct QentRng *qent_rng_new(uint64_t seed);

// # Safety
// `rng` must be NULL or a handle from `qent_rng_new` not yet freed.
void qent_rng_free(struct QentRng *rng);

// Uniform draw in [0, 1).
//
// # Safety
// `rng` must be a live handle; `out` must be writable.
enum QentStatus qent_rng_next_f64(struct QentRng *rng, double *out);

// `index` must be unique among nodes that exchange frames; `seed` drives the
// node's own randomness.
struct QentNode *qent_node_new(uint32_t index, uint64_t seed);

// # Safety
// `node` must be NULL or a handle from `qent_node_new` not yet freed.
void qent_node_free(struct QentNode *node);

// Creates a register of `len` qubits, all |0⟩.
//
// # Safety
// `node` must be a live handle; `out_register` must be writable.
enum QentStatus qent_node_create_register(struct QentNode *node,
                                          size_t len,
                                          uint64_t *out_register);

// Creates a pair in one of the four Bell states.
//
// # Safety
// `node` must be a live handle; `out` must be writable.
enum QentStatus qent_node_entangle_bell(struct QentNode *node,
                                        enum QentBell bell,
                                        struct QentPair *out);

// Creates a pair from an arbitrary amplitude matrix: `amplitudes` holds eight
// doubles, (re, im) for |00⟩, |01⟩, |10⟩, |11⟩. Fails with `NOT_ENTANGLED`
// for a product state.
//
// # Safety
// `node` must be a live handle, `amplitudes` must point to eight doubles and
// `out` must be writable.
enum QentStatus qent_node_entangle(struct QentNode *node,
                                   const double *amplitudes,
                                   struct QentPair *out);

// # Safety
// `node` must be a live handle.
enum QentStatus qent_node_apply_gate(struct QentNode *node,
                                     uint64_t register_,
                                     size_t pos,
                                     enum QentGateKind kind,
                                     double theta);

// Applies a caller-supplied 2×2 unitary: `matrix` holds eight doubles,
// row-major (re, im) entries. Non-unitary input fails with `VALIDATION`.
//
// # Safety
// `node` must be a live handle and `matrix` must point to eight doubles.
enum QentStatus qent_node_apply_matrix(struct QentNode *node,
                                       uint64_t register_,
                                       size_t pos,
                                       const double *matrix);

// Measures in the computational basis. For an entangled slot whose partner
// lives on another node, the notice to send is returned in `out_frames`
// (empty otherwise); `out_frames` may be NULL only when no frame results.
//
// # Safety
// `node` and `rng` must be live handles; `out_bit` must be writable;
// `out_frames` must be NULL or writable.
enum QentStatus qent_node_measure(struct QentNode *node,
                                  uint64_t register_,
                                  size_t pos,
                                  struct QentRng *rng,
                                  uint8_t *out_bit,
                                  struct QentBuffer *out_frames);

// Reads one qubit. Slots whose partner has not been measured report their
// local marginal.
//
// # Safety
// `node` must be a live handle; `out` must be writable.
enum QentStatus qent_node_qubit(struct QentNode *node,
                                uint64_t register_,
                                size_t pos,
                                struct QentQubit *out);

// HELLO frame opening session (`session_hi`, `session_lo`) towards a peer.
//
// # Safety
// `node` must be a live handle; `out_frames` must be writable.
enum QentStatus qent_node_open_session(struct QentNode *node,
                                       uint64_t session_hi,
                                       uint64_t session_lo,
                                       struct QentBuffer *out_frames);

// REGISTER_TRANSFER frame shipping `register` over an established session.
// The register stays frozen until the peer's ACK is dispatched.
//
// # Safety
// `node` must be a live handle; `out_frames` must be writable.
enum QentStatus qent_node_begin_transfer(struct QentNode *node,
                                         uint64_t register_,
                                         uint64_t session_hi,
                                         uint64_t session_lo,
                                         struct QentBuffer *out_frames);

// Feeds one inbound frame (length prefix included) to the node. Replies go
// to `out_frames`; `out_close` is set when the session should be dropped
// after sending them. A frame that fails to decode is answered with an
// ERROR frame for `session` and reported as success: the failure belongs to
// the peer.
//
// # Safety
// `node` must be a live handle, `frame` must point to `len` readable bytes
// and both out-pointers must be writable.
enum QentStatus qent_node_dispatch(struct QentNode *node,
                                   uint64_t session_hi,
                                   uint64_t session_lo,
                                   const uint8_t *frame,
                                   size_t len,
                                   struct QentBuffer *out_frames,
                                   bool *out_close);

// `-10·log10(1 - eta)`; `eta = 1` fails (infinite attenuation).
//
// # Safety
// `out` must be writable.
enum QentStatus qent_attenuation_db(double eta, double *out);

// Inverse of `qent_attenuation_db`.
//
// # Safety
// `out` must be writable.
enum QentStatus qent_eta_of_db(double db, double *out);

// One BB84 run of `n` qubits through the chosen channel. `eve_rate` is
// ignored for `QENT_SERIES_CONTROL`.
//
// # Safety
// `out` must be writable.
enum QentStatus qent_bb84_run(size_t n,
                              enum QentSeries series,
                              double eve_rate,
                              double eta,
                              enum QentDamping damping,
                              uint64_t seed,
                              struct QentRunStats *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QENT_H */
