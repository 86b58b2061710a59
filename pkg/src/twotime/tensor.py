"""Dense complex tensors over labeled Hilbert-space slots.

Every slot carries a party (A, B, or the ancilla C), a stage (input ``1``,
output ``2`` and the primed intermediates ``1'`` / ``2'``), a variance
(raised = ket, lowered = bra) and a dagger flag.  The :func:`bullet`
operation contracts each raised slot against the lowered slot of the same
space and tensors everything else together.

All constructions are in the computational basis of each slot.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DimensionMismatch, DuplicateSlot, MissingSlots

DEFAULT_TOL = 1e-10


class Party(str, Enum):
    A = "A"
    B = "B"
    C = "C"


class Stage(str, Enum):
    IN = "1"
    OUT = "2"
    IN_PRIME = "1'"
    OUT_PRIME = "2'"


class Variance(str, Enum):
    RAISED = "raised"
    LOWERED = "lowered"

    @property
    def flipped(self) -> "Variance":
        return Variance.LOWERED if self is Variance.RAISED else Variance.RAISED


_PARTY_ORDER = {p: i for i, p in enumerate(Party)}
_STAGE_ORDER = {s: i for i, s in enumerate(Stage)}
_VARIANCE_ORDER = {v: i for i, v in enumerate(Variance)}


@dataclass(frozen=True)
class Space:
    """A Hilbert space label such as A2 or B1'† (party, stage, dagger)."""

    party: Party
    stage: Stage
    dagger: bool = False

    @property
    def dag(self) -> "Space":
        return Space(self.party, self.stage, not self.dagger)

    @property
    def up(self) -> "SlotLabel":
        return SlotLabel(self.party, self.stage, Variance.RAISED, self.dagger)

    @property
    def down(self) -> "SlotLabel":
        return SlotLabel(self.party, self.stage, Variance.LOWERED, self.dagger)

    def __str__(self) -> str:
        return f"{self.party.value}{self.stage.value}{'†' if self.dagger else ''}"


def space(name: str) -> Space:
    """Parse names like ``"A1"``, ``"B2'"`` or ``"A2'†"`` (``"+"`` also means dagger)."""
    text = name.strip()
    dagger = text.endswith(("†", "+"))
    if dagger:
        text = text[:-1]
    try:
        return Space(Party(text[0]), Stage(text[1:]), dagger)
    except (ValueError, IndexError):
        raise ValueError(f"not a space label: {name!r}") from None


@dataclass(frozen=True)
class SlotLabel:
    party: Party
    stage: Stage
    variance: Variance
    dagger: bool = False

    @property
    def space(self) -> Space:
        return Space(self.party, self.stage, self.dagger)

    @property
    def partner(self) -> "SlotLabel":
        """The only slot this one may contract with."""
        return SlotLabel(self.party, self.stage, self.variance.flipped, self.dagger)

    @property
    def daggered(self) -> "SlotLabel":
        return SlotLabel(self.party, self.stage, self.variance.flipped, not self.dagger)

    def sort_key(self) -> tuple:
        return (_PARTY_ORDER[self.party], _STAGE_ORDER[self.stage], self.dagger,
                _VARIANCE_ORDER[self.variance])

    def __str__(self) -> str:
        mark = "^" if self.variance is Variance.RAISED else "_"
        return f"{mark}{self.space}"


# Shorthand spaces used throughout.
A1 = Space(Party.A, Stage.IN)
A2 = Space(Party.A, Stage.OUT)
A1p = Space(Party.A, Stage.IN_PRIME)
A2p = Space(Party.A, Stage.OUT_PRIME)
B1 = Space(Party.B, Stage.IN)
B2 = Space(Party.B, Stage.OUT)
B1p = Space(Party.B, Stage.IN_PRIME)
B2p = Space(Party.B, Stage.OUT_PRIME)
C1 = Space(Party.C, Stage.IN)
C2 = Space(Party.C, Stage.OUT)


class LabeledTensor:
    """Immutable dense complex array with one labeled slot per axis.

    Slots are stored in canonical order (party, stage, dagger, variance),
    so two equal tensors always share the same layout.
    """

    __slots__ = ("labels", "data")
    __hash__ = None

    def __init__(self, labels: Iterable[SlotLabel], data):
        labels = tuple(labels)
        arr = np.asarray(data, dtype=np.complex128)
        if arr.ndim != len(labels):
            raise DimensionMismatch(
                f"{len(labels)} slot labels for an array with {arr.ndim} axes")
        if len(set(labels)) != len(labels):
            raise DuplicateSlot(f"repeated slot in {[str(l) for l in labels]}")
        order = sorted(range(len(labels)), key=lambda i: labels[i].sort_key())
        arr = np.array(np.transpose(arr, order), order="C", copy=True)
        arr.setflags(write=False)
        object.__setattr__(self, "labels", tuple(labels[i] for i in order))
        object.__setattr__(self, "data", arr)

    def __setattr__(self, name, value):
        raise AttributeError("LabeledTensor is immutable")

    @property
    def dims(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def slots(self) -> tuple[tuple[SlotLabel, int], ...]:
        return tuple(zip(self.labels, self.dims))

    @property
    def rank(self) -> int:
        return len(self.labels)

    def dim(self, label: SlotLabel | Space) -> int:
        if isinstance(label, Space):
            for lab, d in self.slots:
                if lab.space == label:
                    return d
            raise MissingSlots(f"no slot on space {label}")
        try:
            return self.dims[self.labels.index(label)]
        except ValueError:
            raise MissingSlots(f"no slot {label}") from None

    def spaces(self) -> set[Space]:
        return {lab.space for lab in self.labels}

    def scalar(self) -> complex:
        if self.rank:
            raise DimensionMismatch(f"rank-{self.rank} tensor is not a scalar")
        return complex(self.data[()])

    def norm(self) -> float:
        return float(np.linalg.norm(self.data.ravel()))

    # -- linear structure ---------------------------------------------------
    def _check_same_slots(self, other: "LabeledTensor") -> None:
        if not isinstance(other, LabeledTensor):
            raise TypeError(f"expected LabeledTensor, got {type(other).__name__}")
        if self.labels != other.labels:
            raise MissingSlots(
                f"slot sets differ: {[str(l) for l in self.labels]} vs {[str(l) for l in other.labels]}")
        if self.dims != other.dims:
            raise DimensionMismatch(f"dims differ: {self.dims} vs {other.dims}")

    def __add__(self, other):
        self._check_same_slots(other)
        return LabeledTensor(self.labels, self.data + other.data)

    def __sub__(self, other):
        self._check_same_slots(other)
        return LabeledTensor(self.labels, self.data - other.data)

    def __neg__(self):
        return LabeledTensor(self.labels, -self.data)

    def __mul__(self, scale):
        if not np.isscalar(scale):
            return NotImplemented
        return LabeledTensor(self.labels, self.data * scale)

    __rmul__ = __mul__

    def __truediv__(self, scale):
        if not np.isscalar(scale):
            return NotImplemented
        return LabeledTensor(self.labels, self.data / scale)

    def __eq__(self, other):
        if not isinstance(other, LabeledTensor):
            return NotImplemented
        return self.labels == other.labels and np.array_equal(self.data, other.data)

    def allclose(self, other: "LabeledTensor", atol: float = DEFAULT_TOL) -> bool:
        try:
            self._check_same_slots(other)
        except (MissingSlots, DimensionMismatch):
            return False
        return bool(np.max(np.abs(self.data - other.data), initial=0.0) <= atol)

    def distance(self, other: "LabeledTensor") -> float:
        """Frobenius norm of the difference."""
        self._check_same_slots(other)
        return float(np.linalg.norm((self.data - other.data).ravel()))

    def relabel(self, mapping: Mapping[Space, Space]) -> "LabeledTensor":
        """Rename spaces; a mapping for ``X`` also renames ``X†`` to ``Y†``."""
        full = dict(mapping)
        for src, dst in mapping.items():
            full.setdefault(src.dag, dst.dag)
        labels = []
        for lab in self.labels:
            dst = full.get(lab.space, lab.space)
            labels.append(SlotLabel(dst.party, dst.stage, lab.variance, dst.dagger))
        return LabeledTensor(labels, self.data)

    def __repr__(self) -> str:
        slots = ", ".join(f"{lab}:{d}" for lab, d in self.slots)
        return f"LabeledTensor([{slots}])"


def bullet(lhs: LabeledTensor, rhs: LabeledTensor) -> LabeledTensor:
    """Contract every raised/lowered pair shared by ``lhs`` and ``rhs``; tensor the rest."""
    index_of_rhs = {lab: i for i, lab in enumerate(rhs.labels)}
    lhs_idx = list(range(lhs.rank))
    rhs_idx = [lhs.rank + j for j in range(rhs.rank)]
    paired_rhs = set()
    for i, lab in enumerate(lhs.labels):
        j = index_of_rhs.get(lab.partner)
        if j is None:
            continue
        if lhs.dims[i] != rhs.dims[j]:
            raise DimensionMismatch(
                f"slot {lab} has dim {lhs.dims[i]} but its partner has dim {rhs.dims[j]}")
        rhs_idx[j] = i
        paired_rhs.add(j)
    paired_lhs = {rhs_idx[j] for j in paired_rhs}
    out_labels = [lab for i, lab in enumerate(lhs.labels) if i not in paired_lhs]
    out_labels += [lab for j, lab in enumerate(rhs.labels) if j not in paired_rhs]
    if len(set(out_labels)) != len(out_labels):
        raise DuplicateSlot(f"result would repeat a slot: {[str(l) for l in out_labels]}")
    out_idx = [i for i in lhs_idx if i not in paired_lhs]
    out_idx += [rhs_idx[j] for j in range(rhs.rank) if j not in paired_rhs]
    data = np.einsum(lhs.data, lhs_idx, rhs.data, rhs_idx, out_idx)
    return LabeledTensor(out_labels, data)


def bullet_all(*tensors: LabeledTensor) -> LabeledTensor:
    """Left fold of :func:`bullet`."""
    result = tensors[0]
    for t in tensors[1:]:
        result = bullet(result, t)
    return result


def dagger(t: LabeledTensor) -> LabeledTensor:
    """Conjugate the coefficients, flip every variance and toggle every dagger flag."""
    return LabeledTensor([lab.daggered for lab in t.labels], np.conj(t.data))


def scalar(z: complex) -> LabeledTensor:
    return LabeledTensor((), np.asarray(z))


def ket(vec, at: Space) -> LabeledTensor:
    """|v> with a raised slot on ``at``."""
    return LabeledTensor([at.up], np.asarray(vec))


def bra(vec, at: Space) -> LabeledTensor:
    """<v| with a lowered slot on ``at``; coefficients are conj(v)."""
    return LabeledTensor([at.down], np.conj(np.asarray(vec, dtype=complex)))


def identity_vector(src: Space, dst: Space, dim: int, dst_dim: int | None = None) -> LabeledTensor:
    """sum_i |i>^{dst} (x) <i|_{src}."""
    if dst_dim is not None and dst_dim != dim:
        raise DimensionMismatch(f"identity between spaces of dims {dim} and {dst_dim}")
    return LabeledTensor([dst.up, src.down], np.eye(dim))


def identity_down(at: Space, dim: int) -> LabeledTensor:
    """The doubled identity I_X = I_{X}^{X†} (lowered X, raised X†)."""
    return identity_vector(at, at.dag, dim)


def identity_up(at: Space, dim: int) -> LabeledTensor:
    """The doubled identity I^X = I_{X†}^{X} (raised X, lowered X†)."""
    return identity_vector(at.dag, at, dim)


def matricize(t: LabeledTensor) -> tuple[np.ndarray, tuple[SlotLabel, ...]]:
    """Matrix with non-dagger slots as rows and their dagger twins as columns.

    Returns the matrix and the row labels (canonical order).  This is the
    layout in which positivity of a density vector (``t . (v (x) v†) >= 0``)
    becomes positive semidefiniteness, and in which a bipartite density
    vector coincides with its process matrix.
    """
    rows = [lab for lab in t.labels if not lab.dagger]
    cols = [lab.daggered for lab in rows]
    if len(rows) * 2 != t.rank or any(c not in t.labels for c in cols):
        raise MissingSlots(f"tensor {t!r} is not in density-vector form")
    pos = {lab: i for i, lab in enumerate(t.labels)}
    perm = [pos[lab] for lab in rows] + [pos[lab] for lab in cols]
    arr = np.transpose(t.data, perm)
    n = int(np.prod([t.dims[pos[lab]] for lab in rows], dtype=int))
    return arr.reshape(n, n), tuple(rows)


def unmatricize(matrix, rows: Sequence[SlotLabel], dims: Sequence[int]) -> LabeledTensor:
    """Inverse of :func:`matricize` for the given row labels and their dims."""
    rows = list(rows)
    dims = list(dims)
    arr = np.asarray(matrix, dtype=np.complex128).reshape(dims + dims)
    return LabeledTensor(rows + [lab.daggered for lab in rows], arr)
