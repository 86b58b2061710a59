"""Two-time (pre- and post-selected) states and their probability rules.

A pure two-time state lives on ``H_{A2} (x) H^{A1}``: a bra for the
post-selection and a ket for the pre-selection.  Mixtures are density
vectors ``eta = sum_r p_r Psi_r (x) Psi_r†``; bipartite density vectors add
the same structure for Bob.  A process matrix W is the same coefficient
array read on different slots (:func:`w_to_eta` / :func:`eta_to_w`).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channels import (Instrument, do_nothing, kraus_density_vectors,
                       throw_away_and_replace)
from .errors import DimensionMismatch, ForbiddenPostselection, MissingSlots
from .process import ProcessMatrix, condition_residuals, min_eigenvalue
from .report import VerificationReport
from .sampling import make_rng, random_channel
from .tensor import (A1, A1p, A2, A2p, B1, B1p, B2, B2p, DEFAULT_TOL, LabeledTensor,
                     Party, Space, bullet, bullet_all, dagger, identity_down, identity_up,
                     matricize, unmatricize)

FORBIDDEN_THRESHOLD = 1e-12

# Row slots of the matricization that coincides with W's |ijkl><pqrs| layout.
W_ROWS = (A1.up, A2.down, B1.up, B2.down)


@dataclass(frozen=True)
class DensityVector:
    """A density vector plus evidence flags (``None`` = not established)."""

    tensor: LabeledTensor
    positive: bool | None = None
    linear: bool | None = None

    @property
    def bipartite(self) -> bool:
        return any(lab.party is Party.B for lab in self.tensor.labels)

    def dim(self, at: Space) -> int:
        return self.tensor.dim(at)

    def scaled(self, factor: float) -> "DensityVector":
        linear = self.linear if factor == 1 else None
        return DensityVector(self.tensor * factor, self.positive, linear)


def _tensor(eta) -> LabeledTensor:
    return eta.tensor if isinstance(eta, DensityVector) else eta


# -- construction ------------------------------------------------------------

def pure_state(alpha, post: Space = A2, pre: Space = A1) -> LabeledTensor:
    """``Psi = sum_ij alpha[i, j] <i|_{post} (x) |j>^{pre}``."""
    return LabeledTensor([post.down, pre.up], np.asarray(alpha))


def product_state(phi, psi, post: Space = A2, pre: Space = A1) -> LabeledTensor:
    """``<phi|_{post} (x) |psi>^{pre}``: pre-select psi, post-select phi."""
    phi = np.asarray(phi, dtype=complex)
    psi = np.asarray(psi, dtype=complex)
    return pure_state(np.outer(phi.conj(), psi), post, pre)


def two_time_operator(E, src: Space = A1, dst: Space = A2) -> LabeledTensor:
    """Kraus matrix ``E`` as ``sum_kl E[k, l] |k>^{dst} (x) <l|_{src}``."""
    return LabeledTensor([dst.up, src.down], np.asarray(E))


def density_vector(psi: LabeledTensor) -> DensityVector:
    return DensityVector(bullet(psi, dagger(psi)), positive=True)


def mixture(states: Sequence[LabeledTensor], probs: Sequence[float]) -> DensityVector:
    """``eta = sum_r p_r Psi_r (x) Psi_r†``."""
    total = None
    for psi, p in zip(states, probs):
        term = bullet(psi, dagger(psi)) * float(p)
        total = term if total is None else total + term
    return DensityVector(total, positive=True)


def combine(alice: LabeledTensor, bob: LabeledTensor) -> DensityVector:
    """Independent two-time states of Alice and Bob, tensored together."""
    return DensityVector(bullet(_tensor(alice), _tensor(bob)))


# -- probability rules -------------------------------------------------------

def _scalar_or_raise(t: LabeledTensor, what: str) -> complex:
    if t.rank:
        raise MissingSlots(f"{what} left uncontracted slots {[str(l) for l in t.labels]}")
    return t.scalar()


def prob_pure(psi: LabeledTensor, inst: Instrument, threshold: float = FORBIDDEN_THRESHOLD) -> np.ndarray:
    """``P(a) = sum_mu |Psi . E_a^mu|^2 / sum_a' sum_mu |Psi . E_a'^mu|^2``."""
    weights = np.zeros(len(inst))
    scale = psi.norm() ** 2 * sum(np.linalg.norm(E) ** 2 for E in inst.kraus)
    for a, group in enumerate(inst.outcomes):
        for E in group:
            amp = _scalar_or_raise(bullet(psi, two_time_operator(E, inst.src, inst.dst)), "Psi . E")
            weights[a] += abs(amp) ** 2
    total = weights.sum()
    if total <= threshold * scale:
        raise ForbiddenPostselection(
            f"pre/post-selection is incompatible with every outcome (denominator {total:.3e})")
    return weights / total


def _channel_list(ops) -> list[LabeledTensor]:
    if isinstance(ops, Instrument):
        return kraus_density_vectors(ops)
    return list(ops)


def contract_table(eta, alice, bob=None) -> np.ndarray:
    """Unnormalized ``eta . (J_a (x) K_b)`` (or ``eta . J_a`` without Bob)."""
    eta = _tensor(eta)
    Js = _channel_list(alice)
    if bob is None:
        vals = [_scalar_or_raise(bullet(eta, J), "eta . J") for J in Js]
        return np.real_if_close(np.array(vals), tol=1e6)
    Ks = _channel_list(bob)
    table = np.empty((len(Js), len(Ks)), dtype=complex)
    for a, J in enumerate(Js):
        partial = bullet(eta, J)
        for b, K in enumerate(Ks):
            table[a, b] = _scalar_or_raise(bullet(partial, K), "eta . (J (x) K)")
    return np.real_if_close(table, tol=1e6)


def prob_eta(eta, alice, bob=None, threshold: float = FORBIDDEN_THRESHOLD) -> np.ndarray:
    """``P(a, b) = eta . (J_a (x) K_b) / sum_a'b' eta . (J_a' (x) K_b')``."""
    table = contract_table(eta, alice, bob)
    if np.iscomplexobj(table):
        table = table.real
    total = table.sum()
    scale = _tensor(eta).norm() * sum(J.norm() for J in _channel_list(alice))
    if bob is not None:
        scale *= sum(K.norm() for K in _channel_list(bob))
    if total <= threshold * scale:
        raise ForbiddenPostselection(
            f"two-time state gives zero weight to every outcome (denominator {total:.3e})")
    return table / total


# -- the W <-> eta correspondence -------------------------------------------

def w_to_eta(W: ProcessMatrix, tol: float | None = None) -> DensityVector:
    """Place ``w_{ijkl,pqrs}`` on slots _A2:j ^A1:i _A1†:p ^A2†:q _B2:l ^B1:k _B1†:r ^B2†:s."""
    tol = W.tol if tol is None else tol
    t = unmatricize(W.matrix, W_ROWS, W.dims)
    res = condition_residuals(W)
    positive = res["hermiticity"] <= tol and res["positivity"] <= tol
    linear = all(res[k] <= tol for k in ("normalization", "alice_reduced", "bob_reduced", "output_splitting"))
    return DensityVector(t, positive=positive, linear=linear)


def eta_to_w(eta, tol: float = DEFAULT_TOL) -> ProcessMatrix:
    """Inverse relabeling of :func:`w_to_eta`; the result is not validated."""
    t = _tensor(eta)
    try:
        mat, rows = matricize(t)
    except MissingSlots:
        rows = None
    if rows != W_ROWS:
        raise MissingSlots(f"need slots {[str(r) for r in W_ROWS]} and their dagger twins, "
                           f"got {[str(l) for l in t.labels]}")
    dims = tuple(t.dim(r) for r in W_ROWS)
    return ProcessMatrix(mat, dims, tol)


def eta_matrix(eta) -> np.ndarray:
    """Canonical matricization (non-dagger rows, dagger columns)."""
    return matricize(_tensor(eta))[0]


def equal_up_to_scale(x, y, tol: float = DEFAULT_TOL) -> bool:
    """Density vectors describe the same state iff they agree up to a positive factor."""
    a, b = _tensor(x), _tensor(y)
    if a.labels != b.labels or a.dims != b.dims:
        return False
    na, nb = a.norm(), b.norm()
    if na == 0 or nb == 0:
        return na == nb
    ratio = np.vdot(b.data.ravel(), a.data.ravel()).real
    if ratio <= 0:
        return False
    return bool(np.max(np.abs(a.data / na - b.data / nb)) <= tol)


# -- linearity and the translated validity conditions -------------------------

def _party_dims(t: LabeledTensor) -> tuple[int, int, int, int]:
    try:
        return tuple(t.dim(s) for s in (A1, A2, B1, B2))
    except MissingSlots:
        raise MissingSlots(f"bipartite density vector needs A1, A2, B1, B2 slots; got {t!r}") from None


def validate_eta_conditions(eta, tol: float = DEFAULT_TOL) -> VerificationReport:
    """Positivity, normalization and the three channel-vector identities.

    The two marginal identities are evaluated in the fuller form in which
    the traced party's spaces are replaced by maximally mixed primed
    spaces, so each residual equals that of the matching W condition.
    The compact forms are reported under ``details``.
    """
    t = _tensor(eta)
    dA1, dA2, dB1, dB2 = _party_dims(t)
    report = VerificationReport()

    mat = eta_matrix(t)
    report.add("hermiticity", np.linalg.norm(mat - mat.conj().T), tol)
    min_eig = min_eigenvalue(mat)
    report.add("positivity", -min_eig if not min_eig >= 0 else 0.0, tol)
    report.details["min_eigenvalue"] = min_eig

    ids = bullet_all(identity_down(A1, dA1), identity_up(A2, dA2),
                     identity_down(B1, dB1), identity_up(B2, dB2))
    norm_value = bullet(ids, t).scalar()
    report.add("normalization", abs(norm_value - dA2 * dB2), tol)
    report.details["normalization_value"] = float(norm_value.real)

    I_A = do_nothing(A2p, A2, dA2)
    T_A = throw_away_and_replace(A2p, A2, dA2)
    I_B = do_nothing(B2p, B2, dB2)
    T_B = throw_away_and_replace(B2p, B2, dB2)

    def act(*ops):
        return bullet(bullet_all(*ops), t)

    discard_b = bullet(throw_away_and_replace(B1, B1p, dB1), T_B)
    third = act(I_A, discard_b).distance(act(T_A, discard_b))
    report.add("alice_reduced", third, tol)

    discard_a = bullet(throw_away_and_replace(A1, A1p, dA1), T_A)
    fourth = act(discard_a, I_B).distance(act(discard_a, T_B))
    report.add("bob_reduced", fourth, tol)

    lhs = act(I_A, I_B)
    rhs = act(I_A, T_B) + act(T_A, I_B) - act(T_A, T_B)
    report.add("output_splitting", lhs.distance(rhs), tol)

    T_B12 = throw_away_and_replace(B1, B2, dB1, dB2)
    T_A12 = throw_away_and_replace(A1, A2, dA1, dA2)
    report.details["alice_reduced_compact"] = act(I_A, T_B12).distance(act(T_A, T_B12))
    report.details["bob_reduced_compact"] = act(T_A12, I_B).distance(act(T_A12, T_B))
    return report


LINEAR_CONDITIONS = ("normalization", "alice_reduced", "bob_reduced", "output_splitting")


def is_linear(eta, n_samples: int = 50, seed: int = 0, tol: float = DEFAULT_TOL) -> VerificationReport:
    """Sample ``eta . (J (x) K)`` over random CPTP channel pairs; linear iff every value is 1.

    The sampled verdict is cross-checked against the exact characterization
    (normalization plus the three identities of
    :func:`validate_eta_conditions`); ``details['agrees']`` records whether
    the two verdicts coincide.
    """
    t = _tensor(eta)
    bipartite = any(lab.party is Party.B for lab in t.labels)
    values = []
    for k in range(n_samples):
        rng = make_rng(seed, k)
        J = kraus_density_vectors(random_channel(t.dim(A1), t.dim(A2), rng, A1, A2))[0]
        if bipartite:
            K = kraus_density_vectors(random_channel(t.dim(B1), t.dim(B2), rng, B1, B2))[0]
            values.append(bullet(bullet(t, J), K).scalar())
        else:
            values.append(bullet(t, J).scalar())
    values = np.array(values)
    report = VerificationReport()
    report.add("linearity", float(np.max(np.abs(values - 1))), tol)
    scale = complex(values.mean())
    spread = float(np.max(np.abs(values - scale)))
    report.details.update(seed=seed, n_samples=n_samples, scale=scale.real,
                          values=[float(v.real) for v in values])
    if spread <= tol * max(1.0, abs(scale)) and abs(scale - 1) > tol and abs(scale) > tol:
        report.details["note"] = (f"constant value {scale.real:.12g} for every channel pair: "
                                  f"rescaling eta -> eta/{scale.real:.12g} makes it linear")
    if bipartite:
        exact = validate_eta_conditions(t, tol)
        exact_linear = all(exact[name].passed for name in LINEAR_CONDITIONS)
        report.details["conditions_linear"] = exact_linear
        report.details["agrees"] = exact_linear == report.passed
    return report
