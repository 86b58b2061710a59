"""Exact density-matrix simulation of preparing two-time states by post-selection.

Single party: prepare ``sum_ij alpha_ij |j>_{A1} |i>_C``, let Alice act,
then post-select A2 (x) C on the maximally entangled state.

Bipartite: prepare a mixed state on A1 (x) B1 (x) C with C of dimension
``d_A2 d_B2`` carrying the coefficients of the density vector, let Alice and
Bob act, then post-select A2 (x) B2 (x) C on ``sum_mn |m>|n>|mn>``.

Post-selection vectors are normalized so that the success probability is a
genuine probability; the conditional statistics do not depend on that
choice.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import reduce
from itertools import product

import numpy as np

from .channels import Instrument
from .errors import DimensionMismatch, ForbiddenPostselection
from .process import ProcessMatrix
from .sampling import make_rng
from .states import W_ROWS, _tensor, density_vector, w_to_eta
from .tensor import A1, A2, LabeledTensor, matricize

SHOT_BATCH = 1_000_000


class Variant(str, Enum):
    PURE_SINGLE_PARTY = "fig1"
    MIXED_BIPARTITE = "fig3"


@dataclass(frozen=True, eq=False)
class PreparationProtocol:
    """Initial state on inputs (x) ancilla and post-selection vector on outputs (x) ancilla.

    ``input_dims`` / ``output_dims`` list the parties' dims (one entry for the
    single-party variant, two for the bipartite one).
    """

    variant: Variant
    initial_state: np.ndarray
    postselection: np.ndarray
    input_dims: tuple[int, ...]
    output_dims: tuple[int, ...]
    ancilla_dim: int
    flags: dict = field(default_factory=dict)


def _kron(*ops):
    return reduce(np.kron, ops)


def _single_party_rho(eta: LabeledTensor) -> np.ndarray:
    mat, rows = matricize(eta)
    if rows != (A1.up, A2.down):
        raise DimensionMismatch(f"single-party two-time state needs slots ^A1, _A2; got {eta!r}")
    return mat


def entangled_ancilla_protocol(state, ancilla_basis: np.ndarray | None = None) -> PreparationProtocol:
    """Entangled-ancilla preparation of a single-party two-time state.

    ``state`` is a pure two-time state (slots _A2, ^A1) or a single-party
    density vector.  ``ancilla_basis`` (a unitary) rotates the ancilla in
    both the preparation and the post-selection; the prepared two-time
    state does not change.
    """
    t = _tensor(state)
    if not any(lab.dagger for lab in t.labels):
        t = density_vector(t).tensor
    rho = _single_party_rho(t)
    d_in, d_out = t.dim(A1), t.dim(A2)
    post = np.eye(d_out).reshape(-1) / np.sqrt(d_out)
    if ancilla_basis is not None:
        U = np.asarray(ancilla_basis, dtype=complex)
        lift_in = _kron(np.eye(d_in), U)
        rho = lift_in @ rho @ lift_in.conj().T
        post = _kron(np.eye(d_out), U) @ post
    rho, flags = _as_density_matrix(rho)
    return PreparationProtocol(Variant.PURE_SINGLE_PARTY, rho, post, (d_in,), (d_out,), d_out, flags)


def mixed_state_protocol(state) -> PreparationProtocol:
    """Mixed-state preparation of a bipartite density vector (or of W's density vector)."""
    if isinstance(state, ProcessMatrix):
        state = w_to_eta(state)
    t = _tensor(state)
    mat, rows = matricize(t)
    if rows != W_ROWS:
        raise DimensionMismatch(f"bipartite two-time state needs slots {[str(r) for r in W_ROWS]}")
    dA1, dA2, dB1, dB2 = (t.dim(r) for r in W_ROWS)
    # rows (A1, A2, B1, B2) -> (A1, B1, C = A2 B2)
    m = mat.reshape(dA1, dA2, dB1, dB2, dA1, dA2, dB1, dB2).transpose(0, 2, 1, 3, 4, 6, 5, 7)
    n = dA1 * dA2 * dB1 * dB2
    rho, flags = _as_density_matrix(m.reshape(n, n))
    dC = dA2 * dB2
    post = np.zeros(dA2 * dB2 * dC, dtype=complex)
    for mm, nn in product(range(dA2), range(dB2)):
        post[np.ravel_multi_index((mm, nn, mm * dB2 + nn), (dA2, dB2, dC))] = 1
    post /= np.sqrt(dC)
    return PreparationProtocol(Variant.MIXED_BIPARTITE, rho, post, (dA1, dB1), (dA2, dB2), dC, flags)


def _as_density_matrix(m: np.ndarray) -> tuple[np.ndarray, dict]:
    """Normalize to unit trace; a non-positive input is shifted by its lowest eigenvalue and flagged.

    The shift ``m - lambda_min I`` changes the statistics, so a flagged run
    does not reproduce the two-time state it was built from.
    """
    m = (m + m.conj().T) / 2
    flags = {"shifted": False}
    min_eig = float(np.linalg.eigvalsh(m)[0])
    if min_eig < 0:
        m = m - min_eig * np.eye(m.shape[0])
        flags = {"shifted": True, "shift": -min_eig}
    tr = np.trace(m).real
    if tr <= 0:
        raise ValueError("initial state has zero trace")
    return m / tr, flags


def _instruments(proto: PreparationProtocol, alice: Instrument, bob: Instrument | None):
    insts = [alice] if proto.variant is Variant.PURE_SINGLE_PARTY else [alice, bob]
    if any(i is None for i in insts):
        raise ValueError("the bipartite protocol needs instruments for both parties")
    if bob is not None and proto.variant is Variant.PURE_SINGLE_PARTY:
        raise ValueError("the single-party protocol takes only Alice's instrument")
    for inst, d_in, d_out in zip(insts, proto.input_dims, proto.output_dims):
        if (inst.input_dim, inst.output_dim) != (d_in, d_out):
            raise DimensionMismatch(
                f"instrument maps {inst.input_dim}->{inst.output_dim}, protocol needs {d_in}->{d_out}")
    return insts


def _joint_weights(proto: PreparationProtocol, alice: Instrument, bob: Instrument | None):
    """Per outcome tuple: (probability of outcome and success, probability of outcome)."""
    insts = _instruments(proto, alice, bob)
    shape = tuple(len(i) for i in insts)
    kept = np.zeros(shape)
    total = np.zeros(shape)
    eye_c = np.eye(proto.ancilla_dim)
    for idx in np.ndindex(*shape):
        groups = [inst.outcomes[a] for inst, a in zip(insts, idx)]
        for kraus in product(*groups):
            K = _kron(*kraus, eye_c)
            out = K @ proto.initial_state @ K.conj().T
            kept[idx] += np.vdot(proto.postselection, out @ proto.postselection).real
            total[idx] += np.trace(out).real
    return kept, total


def conditional_stats(proto: PreparationProtocol, alice: Instrument, bob: Instrument | None = None,
                      tol: float = 1e-12) -> tuple[np.ndarray, float]:
    """Outcome table conditioned on successful post-selection, and the success probability."""
    kept, _ = _joint_weights(proto, alice, bob)
    success = float(kept.sum())
    if success <= tol:
        raise ForbiddenPostselection(f"post-selection succeeds with probability {success:.3e}")
    return kept / success, success


def unconditional_stats(proto: PreparationProtocol, alice: Instrument,
                        bob: Instrument | None = None) -> np.ndarray:
    """Outcome table of the whole ensemble, post-selection ignored."""
    return _joint_weights(proto, alice, bob)[1]


@dataclass
class ShotCounts:
    kept: np.ndarray
    discarded: np.ndarray
    shots: int

    @property
    def kept_total(self) -> int:
        return int(self.kept.sum())

    @property
    def kept_fraction(self) -> float:
        return self.kept_total / self.shots

    def frequencies(self) -> np.ndarray:
        return self.kept / max(self.kept_total, 1)


def sample_shots(proto: PreparationProtocol, alice: Instrument, bob: Instrument | None = None,
                 shots: int = 100_000, seed: int = 0) -> ShotCounts:
    """Monte Carlo run of the full ensemble; each shot draws (outcome, kept?) by inversion."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    kept_p, total_p = _joint_weights(proto, alice, bob)
    shape = kept_p.shape
    fail_p = np.clip(total_p - kept_p, 0.0, None)
    probs = np.concatenate([kept_p.ravel(), fail_p.ravel()])
    cdf = np.cumsum(probs)
    cdf /= cdf[-1]
    counts = np.zeros(probs.size, dtype=np.int64)
    for batch, start in enumerate(range(0, shots, SHOT_BATCH)):
        n = min(SHOT_BATCH, shots - start)
        u = make_rng(seed, batch).random(n)
        idx = np.minimum(np.searchsorted(cdf, u, side="right"), probs.size - 1)
        counts += np.bincount(idx, minlength=probs.size)
    half = kept_p.size
    return ShotCounts(counts[:half].reshape(shape), counts[half:].reshape(shape), shots)

