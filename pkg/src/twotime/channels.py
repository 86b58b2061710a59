"""Quantum instruments and their two representations.

An :class:`Instrument` is a list of outcomes, each holding one or more Kraus
matrices of shape ``(d_out, d_in)``.  It can be turned into

* Kraus density vectors ``J_a = sum_mu E_a^mu (x) E_a^mu†`` living on
  ``H_{in} (x) H^{out}`` (two-time picture), or
* Choi-Jamiolkowski operators ``M_a`` on ``H^{in} (x) H^{out}`` with the full
  transpose taken in the computational basis (process-matrix picture).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, MissingSlots, NotCPTP, OutcomeIndexError
from .report import VerificationReport
from .tensor import (A1, A2, DEFAULT_TOL, LabeledTensor, Space, Variance, bullet,
                     identity_down, identity_up, identity_vector, matricize)


@dataclass(frozen=True, eq=False, init=False)
class Instrument:
    """Outcome-grouped Kraus matrices mapping ``src`` to ``dst``."""

    outcomes: tuple[tuple[np.ndarray, ...], ...]
    src: Space = A1
    dst: Space = A2

    def __init__(self, outcomes, src: Space = A1, dst: Space = A2, *,
                 check: bool = True, tol: float = DEFAULT_TOL):
        groups = []
        for a, group in enumerate(outcomes):
            mats = []
            for E in group:
                E = np.array(E, dtype=np.complex128)
                if E.ndim != 2:
                    raise DimensionMismatch(f"Kraus matrix of outcome {a} is not 2-dimensional")
                E.setflags(write=False)
                mats.append(E)
            if not mats:
                raise ValueError(f"outcome {a} has no Kraus matrices")
            groups.append(tuple(mats))
        if not groups:
            raise ValueError("instrument has no outcomes")
        shapes = {E.shape for g in groups for E in g}
        if len(shapes) != 1:
            raise DimensionMismatch(f"Kraus matrices have different shapes: {sorted(shapes)}")
        object.__setattr__(self, "outcomes", tuple(groups))
        object.__setattr__(self, "src", src)
        object.__setattr__(self, "dst", dst)
        if check:
            residual = self.completeness_residual()
            if residual > tol:
                raise NotCPTP(f"sum of E†E deviates from identity by {residual:.3e}")

    @property
    def output_dim(self) -> int:
        return self.outcomes[0][0].shape[0]

    @property
    def input_dim(self) -> int:
        return self.outcomes[0][0].shape[1]

    def __len__(self) -> int:
        return len(self.outcomes)

    @property
    def kraus(self) -> list[np.ndarray]:
        return [E for group in self.outcomes for E in group]

    def _group(self, outcome: int) -> tuple[np.ndarray, ...]:
        if not 0 <= outcome < len(self.outcomes):
            raise OutcomeIndexError(f"outcome {outcome} out of range 0..{len(self.outcomes) - 1}")
        return self.outcomes[outcome]

    def povm(self, outcome: int) -> np.ndarray:
        return sum(E.conj().T @ E for E in self._group(outcome))

    def completeness_residual(self) -> float:
        total = sum(E.conj().T @ E for E in self.kraus)
        return float(np.linalg.norm(total - np.eye(self.input_dim)))

    def apply(self, rho: np.ndarray, outcome: int) -> np.ndarray:
        """Unnormalized post-measurement state ``sum_mu E rho E†`` for one outcome."""
        return sum(E @ rho @ E.conj().T for E in self._group(outcome))

    def channel(self) -> "Instrument":
        """Forget the outcome: one outcome holding every Kraus matrix."""
        return Instrument([self.kraus], self.src, self.dst, check=False)

    def refined(self) -> "Instrument":
        """One outcome per Kraus matrix."""
        return Instrument([[E] for E in self.kraus], self.src, self.dst, check=False)

    def on(self, src: Space, dst: Space) -> "Instrument":
        return Instrument(self.outcomes, src, dst, check=False)

    # -- common instruments -------------------------------------------------
    @classmethod
    def from_kraus(cls, kraus: Sequence, src: Space = A1, dst: Space = A2, **kw) -> "Instrument":
        """Single-outcome instrument (a channel)."""
        return cls([list(kraus)], src, dst, **kw)

    @classmethod
    def detailed(cls, kraus: Sequence, src: Space = A1, dst: Space = A2, **kw) -> "Instrument":
        """One Kraus matrix per outcome."""
        return cls([[E] for E in kraus], src, dst, **kw)

    @classmethod
    def projective(cls, basis: Sequence, src: Space = A1, dst: Space = A2) -> "Instrument":
        """Lueders instrument ``{|b><b|}`` for the orthonormal vectors ``basis``."""
        vecs = [np.asarray(b, dtype=complex) for b in basis]
        return cls.detailed([np.outer(v, v.conj()) for v in vecs], src, dst)

    @classmethod
    def identity(cls, dim: int, src: Space = A1, dst: Space = A2) -> "Instrument":
        return cls.from_kraus([np.eye(dim)], src, dst)


def kraus_density_vector(inst: Instrument, outcome: int) -> LabeledTensor:
    """``J_a = sum_mu E_a^mu (x) E_a^mu†`` on slots _in, ^in†, ^out, _out†."""
    group = inst._group(outcome)
    data = sum(np.einsum("kl,mn->klmn", E, E.conj()) for E in group)
    src, dst = inst.src, inst.dst
    return LabeledTensor([dst.up, src.down, dst.dag.down, src.dag.up], data)


def kraus_density_vectors(inst: Instrument) -> list[LabeledTensor]:
    return [kraus_density_vector(inst, a) for a in range(len(inst))]


def channel_vector(inst: Instrument) -> LabeledTensor:
    """``J = sum_a J_a``, the density vector of the whole (outcome-forgetting) channel."""
    return kraus_density_vector(inst.channel(), 0)


def cj_operator(inst: Instrument, outcome: int) -> np.ndarray:
    """``M_a = sum_mu [(I (x) E)|Phi+><Phi+|(I (x) E†)]^T`` on ``H^in (x) H^out``.

    ``|Phi+> = sum_i |i>|i>`` is unnormalized and the transpose is the full
    transpose in the computational basis.
    """
    group = inst._group(outcome)
    d_in = inst.input_dim
    phi = np.eye(d_in).reshape(d_in * d_in)
    proj = np.outer(phi, phi)
    out = 0
    for E in group:
        lift = np.kron(np.eye(d_in), E)
        out = out + (lift @ proj @ lift.conj().T).T
    return out


def cj_operators(inst: Instrument) -> list[np.ndarray]:
    return [cj_operator(inst, a) for a in range(len(inst))]


def throw_away_and_replace(src: Space, dst: Space, d_src: int, d_dst: int | None = None) -> LabeledTensor:
    """``T = (1/d_dst) I^{dst} (x) I_{src}``: discard the input, emit the maximally mixed state."""
    d_dst = d_src if d_dst is None else d_dst
    return bullet(identity_up(dst, d_dst), identity_down(src, d_src)) / d_dst


def do_nothing(src: Space, dst: Space, dim: int, dst_dim: int | None = None) -> LabeledTensor:
    """``I = I_{src}^{dst} (x) I_{dst†}^{src†}``: move the state from ``src`` to ``dst`` unchanged."""
    if dst_dim is not None and dst_dim != dim:
        raise DimensionMismatch(f"do-nothing between dims {dim} and {dst_dim}")
    return bullet(identity_vector(src, dst, dim), identity_vector(dst.dag, src.dag, dim))


def channel_spaces(v: LabeledTensor) -> tuple[Space, Space]:
    """Infer (input, output) spaces of a single-party channel vector."""
    lowered = [lab.space for lab in v.labels if not lab.dagger and lab.variance is Variance.LOWERED]
    raised = [lab.space for lab in v.labels if not lab.dagger and lab.variance is Variance.RAISED]
    if len(lowered) != 1 or len(raised) != 1:
        raise MissingSlots(f"cannot read input/output spaces off {v!r}")
    return lowered[0], raised[0]


def validate_cptp(v: LabeledTensor, tol: float = DEFAULT_TOL,
                  src: Space | None = None, dst: Space | None = None) -> VerificationReport:
    """Future-identity preservation ``I_dst . v = I_src`` and positivity of ``v``."""
    if src is None or dst is None:
        src, dst = channel_spaces(v)
    report = VerificationReport()
    lhs = bullet(identity_down(dst, v.dim(dst)), v)
    rhs = identity_down(src, v.dim(src))
    report.add("trace_preserving", lhs.distance(rhs), tol)
    mat, _ = matricize(v)
    report.add("hermiticity", np.linalg.norm(mat - mat.conj().T), tol)
    min_eig = float(np.linalg.eigvalsh((mat + mat.conj().T) / 2)[0])
    report.add("positivity", max(0.0, -min_eig), tol)
    report.details["min_eigenvalue"] = min_eig
    flags = []
    if not report["trace_preserving"].passed:
        flags.append("NotTracePreserving")
    if not (report["positivity"].passed and report["hermiticity"].passed):
        flags.append("NotPositive")
    report.details["flags"] = flags
    return report
