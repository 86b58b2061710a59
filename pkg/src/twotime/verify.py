"""Randomized verification of the generalized process-matrix identities.

For a linear bipartite density vector eta, replacing the throw-away and
do-nothing channels of the validity conditions by arbitrary CPTP channels
still gives identities:

1. ``(C (x) K) . eta = (C~ (x) K) . eta``          (C, C~ : A2' -> A2)
2. ``(J (x) D) . eta = (J (x) D~) . eta``          (D, D~ : B2' -> B2)
3. ``(C (x) D) . eta = (C (x) D~) . eta + (C~ (x) D) . eta - (C~ (x) D~) . eta``

:func:`check_theorem_eta` evaluates these with the bullet contraction;
:func:`check_theorem_w` evaluates the equivalent partial-trace identities on
W with full matrices.  Both draw the same channels for a given seed, so their
per-trial residuals can be compared one to one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .channels import Instrument, cj_operator, kraus_density_vector, throw_away_and_replace
from .errors import EpsilonNotFound
from .process import ProcessMatrix
from .report import VerificationReport
from .sampling import ginibre, make_rng, random_channel
from .states import W_ROWS, _tensor, w_to_eta
from .tensor import (A1, A2, A2p, B1, B2, B2p, LabeledTensor, Space, bullet, dagger,
                     matricize)

RESIDUAL_FLOOR = 1e-14
IDENTITIES = ("alice_channel_independence", "bob_channel_independence",
              "output_splitting", "symmetric_form")


@dataclass(frozen=True)
class EpsilonPolicy:
    """Start at ``1 / (2 ||Delta|| + floor)`` and halve until the perturbed channel is positive."""

    max_halvings: int = 40
    floor: float = float(np.finfo(float).eps)

    def describe(self) -> str:
        return (f"eps = 1/(2*||(C-C~).X||_2 + {self.floor:.3g}), halved until positive "
                f"(at most {self.max_halvings} halvings)")


@dataclass(frozen=True)
class TheoremCheckConfig:
    n_trials: int = 100
    seed: int = 0
    tol: float = 1e-8
    epsilon_policy: EpsilonPolicy = field(default_factory=EpsilonPolicy)

    def __post_init__(self):
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")


def relative_residual(lhs, rhs) -> float:
    """``||lhs - rhs||_F / ||lhs||_F``; the plain difference when ``||lhs|| <= 1e-14``."""
    if isinstance(lhs, LabeledTensor):
        diff, size = lhs.distance(rhs), lhs.norm()
    else:
        diff = float(np.linalg.norm(np.ravel(lhs - rhs)))
        size = float(np.linalg.norm(np.ravel(lhs)))
    return diff / size if size > RESIDUAL_FLOOR else diff


# -- channel samples -----------------------------------------------------------

class TrialSample(NamedTuple):
    C: Instrument
    C_tilde: Instrument
    D: Instrument
    D_tilde: Instrument
    J: Instrument
    K: Instrument
    X: LabeledTensor
    Y: LabeledTensor


def random_hermitian_vector(src: Space, dst: Space, d_src: int, d_dst: int,
                            rng: np.random.Generator, terms: int = 3) -> LabeledTensor:
    """``sum_k r_k h_k (x) h_k†`` with real ``r_k``: contracts to a real number with any density vector."""
    total = None
    for _ in range(terms):
        h = LabeledTensor([dst.up, src.down], ginibre(d_dst, d_src, rng))
        term = bullet(h, dagger(h)) * float(rng.standard_normal())
        total = term if total is None else total + term
    return total


def sample_trial(dims: Sequence[int], seed: int, trial: int) -> TrialSample:
    dA1, dA2, dB1, dB2 = dims
    rng = make_rng(seed, trial)
    return TrialSample(
        C=random_channel(dA2, dA2, rng, A2p, A2),
        C_tilde=random_channel(dA2, dA2, rng, A2p, A2),
        D=random_channel(dB2, dB2, rng, B2p, B2),
        D_tilde=random_channel(dB2, dB2, rng, B2p, B2),
        J=random_channel(dA1, dA2, rng, A1, A2),
        K=random_channel(dB1, dB2, rng, B1, B2),
        X=random_hermitian_vector(A1, A2p, dA1, dA2, rng),
        Y=random_hermitian_vector(B1, B2p, dB1, dB2, rng),
    )


# -- perturbed channels ----------------------------------------------------------

class PerturbedChannel(NamedTuple):
    vector: LabeledTensor
    epsilon: float
    halvings: int


def _min_eig(v: LabeledTensor) -> float:
    m, _ = matricize(v)
    return float(np.linalg.eigvalsh((m + m.conj().T) / 2)[0])


def perturbed_channel(base: LabeledTensor, c: LabeledTensor, c_tilde: LabeledTensor, x: LabeledTensor,
                      policy: EpsilonPolicy = EpsilonPolicy()) -> PerturbedChannel:
    """``base + eps (c - c~) . x`` with eps chosen by ``policy`` so that the result is positive.

    Trace preservation needs no tuning: ``c - c~`` maps every input to a
    traceless output.
    """
    delta = bullet(c - c_tilde, x)
    m, _ = matricize(delta)
    eps = 1.0 / (2.0 * np.linalg.norm(m, 2) + policy.floor)
    for halvings in range(policy.max_halvings + 1):
        candidate = base + delta * eps
        if _min_eig(candidate) > 0:
            return PerturbedChannel(candidate, float(eps), halvings)
        eps /= 2
    raise EpsilonNotFound(f"no positive perturbation after {policy.max_halvings} halvings")


# -- two-time form -----------------------------------------------------------------

def _eta_dims(eta: LabeledTensor) -> tuple[int, int, int, int]:
    return tuple(eta.dim(s) for s in (A1, A2, B1, B2))


def _cv(inst: Instrument) -> LabeledTensor:
    return kraus_density_vector(inst.channel(), 0)


def theorem_residuals_eta(eta, sample: TrialSample, policy: EpsilonPolicy = EpsilonPolicy()) -> dict:
    t = _tensor(eta)
    dA1, dA2, dB1, dB2 = _eta_dims(t)
    C, Ct, D, Dt = _cv(sample.C), _cv(sample.C_tilde), _cv(sample.D), _cv(sample.D_tilde)
    J, K = _cv(sample.J), _cv(sample.K)

    with_K = bullet(t, K)
    with_J = bullet(t, J)
    first = relative_residual(bullet(with_K, C), bullet(with_K, Ct))
    second = relative_residual(bullet(with_J, D), bullet(with_J, Dt))

    with_C, with_Ct = bullet(t, C), bullet(t, Ct)
    CD, CDt = bullet(with_C, D), bullet(with_C, Dt)
    CtD, CtDt = bullet(with_Ct, D), bullet(with_Ct, Dt)
    third = relative_residual(CD, CDt + CtD - CtDt)
    symmetric = relative_residual(CD, CD - (CD - CDt - CtD + CtDt))

    # Perturbed channels leave every probability unchanged.
    T_A = throw_away_and_replace(A1, A2, dA1, dA2)
    T_B = throw_away_and_replace(B1, B2, dB1, dB2)
    J_pert = perturbed_channel(T_A, C, Ct, sample.X, policy)
    K_pert = perturbed_channel(T_B, D, Dt, sample.Y, policy)
    ref_a = bullet(with_K, T_A)
    ref_b = bullet(with_J, T_B)
    mech = max(relative_residual(ref_a, bullet(with_K, J_pert.vector)),
               relative_residual(ref_b, bullet(with_J, K_pert.vector)),
               relative_residual(bullet(bullet(t, T_A), T_B),
                                 bullet(bullet(t, J_pert.vector), K_pert.vector)))
    return {"alice_channel_independence": first, "bob_channel_independence": second,
            "output_splitting": third, "symmetric_form": symmetric, "proof_mechanism": mech,
            "epsilon": J_pert.epsilon, "delta": K_pert.epsilon}


def _collect(per_trial: list[dict], names, cfg: TheoremCheckConfig, extra: dict) -> VerificationReport:
    report = VerificationReport()
    for name in names:
        values = [r[name] for r in per_trial]
        report.add(name, max(values), cfg.tol)
    report.details.update(extra)
    report.details["seed"] = cfg.seed
    report.details["n_trials"] = cfg.n_trials
    report.details["per_trial"] = {name: [float(r[name]) for r in per_trial] for name in names}
    worst = int(np.argmax([max(r[n] for n in names) for r in per_trial]))
    report.details["worst_trial"] = worst
    return report


def check_theorem_eta(eta, cfg: TheoremCheckConfig = TheoremCheckConfig()) -> VerificationReport:
    """Evaluate the three identities, the symmetric form and the proof mechanism on random channels."""
    t = _tensor(eta)
    dims = _eta_dims(t)
    rows = [theorem_residuals_eta(t, sample_trial(dims, cfg.seed, k), cfg.epsilon_policy)
            for k in range(cfg.n_trials)]
    extra = {"representation": "two-time", "epsilon_policy": cfg.epsilon_policy.describe(),
             "epsilons": [r["epsilon"] for r in rows], "deltas": [r["delta"] for r in rows]}
    return _collect(rows, IDENTITIES + ("proof_mechanism",), cfg, extra)


# -- process-matrix form ------------------------------------------------------------

def embed(op: np.ndarray, op_systems: Sequence[str], systems: Sequence[str], dims: dict) -> np.ndarray:
    """Operator acting on ``op_systems`` (in that order), tensored with identity on the rest of ``systems``."""
    rest = [s for s in systems if s not in op_systems]
    order = list(op_systems) + rest
    full = np.kron(op, np.eye(int(np.prod([dims[s] for s in rest], dtype=int))))
    shape = [dims[s] for s in order]
    n = len(order)
    t = full.reshape(shape + shape)
    perm = [order.index(s) for s in systems]
    t = t.transpose(perm + [n + p for p in perm])
    size = int(np.prod(shape))
    return t.reshape(size, size)


def partial_trace(m: np.ndarray, systems: Sequence[str], dims: dict, traced: Sequence[str]) -> np.ndarray:
    shape = [dims[s] for s in systems]
    n = len(systems)
    t = m.reshape(shape + shape)
    for s in sorted((systems.index(s) for s in traced), reverse=True):
        t = np.trace(t, axis1=s, axis2=s + t.ndim // 2)
    keep = [dims[s] for s in systems if s not in traced]
    size = int(np.prod(keep, dtype=int))
    return t.reshape(size, size)


def _cj(inst: Instrument) -> np.ndarray:
    return cj_operator(inst.channel(), 0)


def theorem_residuals_w(W: ProcessMatrix, sample: TrialSample) -> dict:
    dA1, dA2, dB1, dB2 = W.dims
    dims = {"A1": dA1, "A2": dA2, "B1": dB1, "B2": dB2, "A2'": dA2, "B2'": dB2}
    R, Rt = _cj(sample.C), _cj(sample.C_tilde)
    S, St = _cj(sample.D), _cj(sample.D_tilde)
    M, N = _cj(sample.J), _cj(sample.K)
    base = ["A1", "A2", "B1", "B2"]

    sys1 = base + ["A2'"]
    W1 = embed(W.matrix, base, sys1, dims)

    def first(r):
        op = embed(r, ["A2'", "A2"], sys1, dims) @ embed(N, ["B1", "B2"], sys1, dims)
        return partial_trace(op @ W1, sys1, dims, ["A2", "B1", "B2"])

    sys2 = base + ["B2'"]
    W2 = embed(W.matrix, base, sys2, dims)

    def second(s):
        op = embed(M, ["A1", "A2"], sys2, dims) @ embed(s, ["B2'", "B2"], sys2, dims)
        return partial_trace(op @ W2, sys2, dims, ["A1", "A2", "B2"])

    sys3 = base + ["A2'", "B2'"]
    W3 = embed(W.matrix, base, sys3, dims)

    def third(r, s):
        op = embed(r, ["A2'", "A2"], sys3, dims) @ embed(s, ["B2'", "B2"], sys3, dims)
        return partial_trace(op @ W3, sys3, dims, ["A2", "B2"])

    RS, RSt, RtS, RtSt = third(R, S), third(R, St), third(Rt, S), third(Rt, St)
    return {"alice_channel_independence": relative_residual(first(R), first(Rt)),
            "bob_channel_independence": relative_residual(second(S), second(St)),
            "output_splitting": relative_residual(RS, RSt + RtS - RtSt),
            "symmetric_form": relative_residual(RS, RS - third(R - Rt, S - St))}


def check_theorem_w(W: ProcessMatrix, cfg: TheoremCheckConfig = TheoremCheckConfig()) -> VerificationReport:
    """Partial-trace form of the identities with CJ operators of the same random channels."""
    rows = [theorem_residuals_w(W, sample_trial(W.dims, cfg.seed, k)) for k in range(cfg.n_trials)]
    return _collect(rows, IDENTITIES, cfg, {"representation": "process-matrix"})


def compare_representations(W: ProcessMatrix, cfg: TheoremCheckConfig = TheoremCheckConfig()
                            ) -> tuple[VerificationReport, VerificationReport, float]:
    """Run both forms on identical samples; return both reports and the largest per-trial gap."""
    rep_w = check_theorem_w(W, cfg)
    rep_eta = check_theorem_eta(w_to_eta(W), cfg)
    gap = 0.0
    for name in IDENTITIES:
        a = np.array(rep_w.details["per_trial"][name])
        b = np.array(rep_eta.details["per_trial"][name])
        gap = max(gap, float(np.max(np.abs(a - b))))
    return rep_w, rep_eta, gap


def load_target(obj) -> tuple[str, object]:
    """Classify a loaded document as a process matrix or a density vector."""
    if isinstance(obj, ProcessMatrix):
        return "w", obj
    t = _tensor(obj)
    matricize(t)
    if tuple(lab for lab in t.labels if not lab.dagger) != W_ROWS:
        raise ValueError("theorem checks need a bipartite density vector")
    return "eta", t

