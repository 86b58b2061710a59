"""Bipartite process matrices on A1 (x) A2 (x) B1 (x) B2.

The global index order A1, A2, B1, B2 is fixed; every CJ operator is laid
out as (input, output) for its party.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .channels import Instrument, cj_operator, cj_operators
from .errors import (DimensionMismatch, EmptySubset, InvalidProcessMatrix, NonNormalized,
                     NotCPTP, SamplerExhausted)
from .report import VerificationReport
from .sampling import ginibre, make_rng
from .tensor import DEFAULT_TOL

SUBSYSTEMS = ("A1", "A2", "B1", "B2")
_AXIS = {name: i for i, name in enumerate(SUBSYSTEMS)}

# Names of the five validity conditions, shared with the two-time translation.
CONDITIONS = ("positivity", "normalization", "alice_reduced", "bob_reduced", "output_splitting")


@dataclass(frozen=True, eq=False, init=False)
class ProcessMatrix:
    matrix: np.ndarray
    dims: tuple[int, int, int, int]
    tol: float

    def __init__(self, matrix, dims: Sequence[int] = (2, 2, 2, 2), tol: float = DEFAULT_TOL,
                 *, validate: bool = False):
        dims = tuple(int(d) for d in dims)
        if len(dims) != 4 or min(dims) < 1:
            raise DimensionMismatch(f"need four positive dims (A1, A2, B1, B2), got {dims}")
        m = np.array(matrix, dtype=np.complex128)
        n = int(np.prod(dims))
        if m.shape != (n, n):
            raise DimensionMismatch(f"matrix shape {m.shape} does not match dims {dims} (expected {(n, n)})")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "tol", float(tol))
        if validate:
            report = validate_w(self, tol)
            if not report.passed:
                raise InvalidProcessMatrix(f"invalid process matrix: {report.failed()}", report)

    @property
    def tensor(self) -> np.ndarray:
        """Eight-index view w[i, j, k, l, p, q, r, s] of ``sum w |ijkl><pqrs|``."""
        return self.matrix.reshape(self.dims + self.dims)

    @property
    def alice_dims(self) -> tuple[int, int]:
        return self.dims[0], self.dims[1]

    @property
    def bob_dims(self) -> tuple[int, int]:
        return self.dims[2], self.dims[3]

    def __eq__(self, other):
        if not isinstance(other, ProcessMatrix):
            return NotImplemented
        return self.dims == other.dims and np.array_equal(self.matrix, other.matrix)

    __hash__ = None


def _as_matrix(W, dims) -> tuple[np.ndarray, tuple[int, ...]]:
    if isinstance(W, ProcessMatrix):
        return W.matrix, W.dims
    if dims is None:
        raise DimensionMismatch("dims are required for a bare matrix")
    return np.asarray(W, dtype=np.complex128), tuple(dims)


def trivial_w(dims: Sequence[int] = (2, 2, 2, 2)) -> ProcessMatrix:
    """(I/dA1) (x) I (x) (I/dB1) (x) I: maximally mixed inputs, outputs discarded."""
    dA1, dA2, dB1, dB2 = dims
    m = np.kron(np.kron(np.eye(dA1) / dA1, np.eye(dA2)), np.kron(np.eye(dB1) / dB1, np.eye(dB2)))
    return ProcessMatrix(m, dims)


def trace_and_replace(W, subsystems: Iterable[str], dims: Sequence[int] | None = None) -> np.ndarray:
    """``_X W = (I_X / d_X) (x) tr_X W`` for the listed subsystems, index order preserved."""
    names = list(dict.fromkeys(subsystems))
    if not names:
        raise EmptySubset("trace_and_replace needs at least one subsystem")
    m, dims = _as_matrix(W, dims)
    t = m.reshape(dims + dims)
    for name in names:
        s = _AXIS[name]
        d = dims[s]
        reduced = np.trace(t, axis1=s, axis2=4 + s)
        t = np.moveaxis(np.multiply.outer(reduced, np.eye(d) / d), [6, 7], [s, 4 + s])
    n = int(np.prod(dims))
    return t.reshape(n, n)


def min_eigenvalue(m: np.ndarray) -> float:
    """Lowest eigenvalue of the Hermitian part; NaN if any entry is non-finite."""
    if not np.all(np.isfinite(m)):
        return float("nan")
    return float(np.linalg.eigvalsh((m + m.conj().T) / 2)[0])


def _tr(m, names, dims):
    return trace_and_replace(m, names, dims)


def condition_residuals(W, dims: Sequence[int] | None = None) -> dict[str, float]:
    """Residual magnitudes of the five validity conditions plus hermiticity."""
    m, dims = _as_matrix(W, dims)
    min_eig = min_eigenvalue(m)
    target = dims[1] * dims[3]
    third = _tr(m, ["B1", "B2"], dims) - _tr(m, ["A2", "B1", "B2"], dims)
    fourth = _tr(m, ["A1", "A2"], dims) - _tr(m, ["A1", "A2", "B2"], dims)
    fifth = m - (_tr(m, ["A2"], dims) + _tr(m, ["B2"], dims) - _tr(m, ["A2", "B2"], dims))
    return {
        "hermiticity": float(np.linalg.norm(m - m.conj().T)),
        "positivity": -min_eig if not min_eig >= 0 else 0.0,
        "normalization": float(abs(np.trace(m) - target)),
        "alice_reduced": float(np.linalg.norm(third)),
        "bob_reduced": float(np.linalg.norm(fourth)),
        "output_splitting": float(np.linalg.norm(fifth)),
        "min_eigenvalue": min_eig,
    }


def validate_w(W, tol: float | None = None, dims: Sequence[int] | None = None) -> VerificationReport:
    """Check W >= 0, tr W = dA2 dB2 and the three trace-and-replace identities."""
    if tol is None:
        tol = W.tol if isinstance(W, ProcessMatrix) else DEFAULT_TOL
    res = condition_residuals(W, dims)
    report = VerificationReport()
    for name in ("hermiticity",) + CONDITIONS:
        report.add(name, res[name], tol)
    report.details["min_eigenvalue"] = res["min_eigenvalue"]
    return report


def valid_subspace_projector(m: np.ndarray, dims: Sequence[int]) -> np.ndarray:
    """Orthogonal projection onto operators obeying the three linear identities.

    Each identity says a product of commuting trace-and-replace projectors
    annihilates W, so the projector onto its solution set is a polynomial in
    those projectors; the three polynomials commute and their product
    projects onto the intersection.
    """
    def third(x):
        return x - _tr(x, ["B1", "B2"], dims) + _tr(x, ["A2", "B1", "B2"], dims)

    def fourth(x):
        return x - _tr(x, ["A1", "A2"], dims) + _tr(x, ["A1", "A2", "B2"], dims)

    def fifth(x):
        return _tr(x, ["A2"], dims) + _tr(x, ["B2"], dims) - _tr(x, ["A2", "B2"], dims)

    return fifth(fourth(third(m)))


def random_valid_w(dims: Sequence[int] = (2, 2, 2, 2), seed: int = 0, max_tries: int = 10_000,
                   tol: float = DEFAULT_TOL, shrink_after: int = 100) -> ProcessMatrix:
    """Project a random positive matrix onto the valid affine set; reject until positive.

    Rejection gets rare as the dimension grows.  After ``shrink_after``
    rejections a non-positive projection is instead pulled toward the
    maximally mixed valid W (a multiple of the identity) by a random factor
    small enough to make it positive.
    """
    dims = tuple(dims)
    n = int(np.prod(dims))
    target = dims[1] * dims[3]
    c = target / n
    rng = make_rng(seed)
    for attempt in range(max_tries):
        G = ginibre(n, n, rng)
        X = G @ G.conj().T
        X *= target / np.trace(X).real
        Y = valid_subspace_projector(X, dims)
        Y = (Y + Y.conj().T) / 2
        Y = Y + (target - np.trace(Y).real) / n * np.eye(n)
        low = np.linalg.eigvalsh(Y)[0]
        if low < 0 and attempt >= shrink_after:
            s = rng.uniform(0.5, 1.0) * c / (c - low)
            Y = c * np.eye(n) + s * (Y - c * np.eye(n))
            low = np.linalg.eigvalsh(Y)[0]
        if low >= 0:
            W = ProcessMatrix(Y, dims, tol)
            if validate_w(W).passed:
                return W
    raise SamplerExhausted(f"no positive sample in {max_tries} tries for dims {dims}")


def _ops(ops, party_dims, name):
    if isinstance(ops, Instrument):
        ops = cj_operators(ops)
    ops = [np.asarray(o, dtype=np.complex128) for o in ops]
    n = party_dims[0] * party_dims[1]
    for o in ops:
        if o.shape != (n, n):
            raise DimensionMismatch(f"{name} operator shape {o.shape} but W expects {(n, n)}")
    return np.stack(ops)


def prob_w(W: ProcessMatrix, alice, bob, tol: float | None = None,
           check_normalization: bool = True) -> np.ndarray:
    """``P(a, b) = tr[W (M_a (x) N_b)]``.

    ``alice`` / ``bob`` are instruments or lists of CJ operators.  The table
    is checked for negative entries and for summing to one (when
    ``check_normalization``).
    """
    tol = W.tol if tol is None else tol
    M = _ops(alice, W.alice_dims, "alice")
    N = _ops(bob, W.bob_dims, "bob")
    nA = W.dims[0] * W.dims[1]
    nB = W.dims[2] * W.dims[3]
    w4 = W.matrix.reshape(nA, nB, nA, nB)
    table = np.einsum("ijkl,aki,blj->ab", w4, M, N)
    if np.max(np.abs(table.imag), initial=0.0) > max(tol, 1e-12):
        raise NonNormalized(f"probabilities have imaginary parts up to {np.abs(table.imag).max():.3e}")
    table = table.real
    if check_normalization:
        if table.min() < -tol:
            raise NonNormalized(f"negative probability {table.min():.3e}")
        total = table.sum()
        if abs(total - 1) > tol:
            raise NonNormalized(f"probabilities sum to {total!r}")
    return table


def choi_matrix(chan: Instrument) -> np.ndarray:
    """Untransposed Choi matrix ``sum_tu |t><u| (x) chan(|t><u|)`` (the transpose of the CJ operator)."""
    return cj_operator(chan.channel(), 0).T


def channel_ordered_w(rho, chan: Instrument, d_b2: int | None = None,
                      tol: float = DEFAULT_TOL) -> ProcessMatrix:
    """W for the circuit: rho into Alice, Alice's output through ``chan`` into Bob, Bob's output discarded.

    ``W = rho^{A1} (x) C^{A2 B1} (x) I^{B2}`` with C the transpose of the CJ
    operator of ``chan``: Alice's CJ operator hands ``sigma^T`` to A2 and C
    undoes that transpose, so :func:`prob_w` reproduces the circuit.
    """
    rho = np.asarray(rho, dtype=np.complex128)
    if chan.completeness_residual() > tol:
        raise NotCPTP("the connecting channel is not trace preserving")
    d_a1 = rho.shape[0]
    d_a2, d_b1 = chan.input_dim, chan.output_dim
    d_b2 = d_b1 if d_b2 is None else d_b2
    C = choi_matrix(chan)
    m = np.kron(np.kron(rho, C), np.eye(d_b2))
    return ProcessMatrix(m, (d_a1, d_a2, d_b1, d_b2), tol, validate=True)
