"""Seeded random states, channels and instruments.

Every sampler takes a ``numpy.random.Generator``; :func:`make_rng` derives
independent generators from a base seed plus integer keys (trial index,
stream id) so that serial and parallel runs see identical draws.
"""

from __future__ import annotations

import numpy as np
from scipy.stats import unitary_group

from .channels import Instrument
from .tensor import A1, A2, Space


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed) % 2**64, *map(int, keys)]))


def ginibre(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    return rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    return unitary_group.rvs(dim, random_state=rng) if dim > 1 else np.exp(2j * np.pi * rng.random()) * np.ones((1, 1))


def haar_isometry(d_in: int, d_out: int, rng: np.random.Generator) -> np.ndarray:
    """First ``d_in`` columns of a Haar-random ``d_out x d_out`` unitary."""
    return haar_unitary(d_out, rng)[:, :d_in]


def random_pure_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    v = ginibre(dim, 1, rng)[:, 0]
    return v / np.linalg.norm(v)


def random_density_matrix(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    G = ginibre(dim, rank or dim, rng)
    rho = G @ G.conj().T
    return rho / np.trace(rho).real


def random_instrument(d_in: int, d_out: int, rng: np.random.Generator, n_outcomes: int = 1,
                      kraus_per_outcome: int | None = None, src: Space = A1, dst: Space = A2) -> Instrument:
    """Stinespring sample: Haar isometry into output (x) environment, split into Kraus groups.

    With a single outcome and no explicit Kraus count the environment has
    dimension ``d_in * d_out`` (full Kraus rank). With several outcomes the
    default is the fewest Kraus operators per outcome that allow trace
    preservation.
    """
    if kraus_per_outcome is None:
        kraus_per_outcome = d_in * d_out if n_outcomes == 1 else -(-d_in // (d_out * n_outcomes))
    env = n_outcomes * kraus_per_outcome
    if d_out * env < d_in:
        raise ValueError(f"{env} Kraus matrices of shape {d_out}x{d_in} cannot be trace preserving")
    V = haar_isometry(d_in, d_out * env, rng).reshape(d_out, env, d_in)
    kraus = [V[:, k, :] for k in range(env)]
    groups = [kraus[a * kraus_per_outcome:(a + 1) * kraus_per_outcome] for a in range(n_outcomes)]
    return Instrument(groups, src, dst)


def random_channel(d_in: int, d_out: int, rng: np.random.Generator,
                   src: Space = A1, dst: Space = A2) -> Instrument:
    return random_instrument(d_in, d_out, rng, 1, None, src, dst)


def random_unitary_instrument(dim: int, rng: np.random.Generator, n_outcomes: int = 2,
                              src: Space = A1, dst: Space = A2) -> Instrument:
    """Random projective measurement followed by a random unitary per outcome."""
    basis = haar_unitary(dim, rng)
    groups = []
    for a in range(n_outcomes):
        cols = basis[:, a::n_outcomes]
        proj = cols @ cols.conj().T
        groups.append([haar_unitary(dim, rng) @ proj])
    return Instrument(groups, src, dst)
