from functools import reduce

import numpy as np
import pytest

from twotime.process import ProcessMatrix, trivial_w
from twotime.sampling import make_rng, random_instrument
from twotime.tensor import A1, A2, B1, B2

X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.diag([1.0, -1.0]).astype(complex)
I2 = np.eye(2, dtype=complex)

_ACCEPTANCE: list[str] = []


def kron(*ops):
    return reduce(np.kron, ops)


def violators() -> dict[str, ProcessMatrix]:
    """One qubit W per validity condition, breaking that condition only."""
    W0 = trivial_w().matrix
    return {
        "positivity": ProcessMatrix(W0 + 0.5 * kron(Z, I2, I2, I2)),
        "normalization": ProcessMatrix(2 * W0),
        "alice_reduced": ProcessMatrix(W0 + 0.1 * kron(Z, Z, I2, I2)),
        "bob_reduced": ProcessMatrix(W0 + 0.1 * kron(I2, I2, Z, Z)),
        "output_splitting": ProcessMatrix(W0 + 0.1 * kron(I2, Z, I2, Z)),
    }


def small_instrument(rng, d_in, d_out, src=A1, dst=A2):
    """Random instrument with 1-3 outcomes and 1-2 Kraus matrices per outcome (more if the shape needs it)."""
    n = int(rng.integers(1, 4))
    k = int(rng.integers(1, 3))
    while n * k * d_out < d_in:
        k += 1
    return random_instrument(d_in, d_out, rng, n_outcomes=n, kraus_per_outcome=k, src=src, dst=dst)


def instrument_pair(seed, dims=(2, 2, 2, 2)):
    rng = make_rng(seed)
    return (small_instrument(rng, dims[0], dims[1], A1, A2),
            small_instrument(rng, dims[2], dims[3], B1, B2))


def partial_trace_oracle(m, dims, keep):
    """Reduced operator on the ``keep`` subsystems by explicit index loops."""
    n = len(dims)
    t = m.reshape(tuple(dims) + tuple(dims))
    letters = "abcdefghijklmnop"
    row = list(letters[:n])
    col = [row[i] if i not in keep else letters[n + i] for i in range(n)]
    out = "".join(row[i] for i in keep) + "".join(col[i] for i in keep)
    r = np.einsum("".join(row) + "".join(col) + "->" + out, t)
    d = int(np.prod([dims[i] for i in keep], dtype=int))
    return r.reshape(d, d)


@pytest.fixture
def record_criterion():
    """Log one PASS/FAIL line for an acceptance criterion; shown in the terminal summary."""
    def record(number: int, title: str, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'} criterion {number} ({title}): {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
