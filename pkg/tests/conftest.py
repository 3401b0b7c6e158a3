import numpy as np
import pytest

from loopcmc import Grid, TruncatedLoop, build_extended_framing, builtin_potential
from loopcmc.potentials import BUILTIN_GRIDS

E12 = np.array([[0.0, 1.0], [0.0, 0.0]])
E21 = np.array([[0.0, 0.0], [1.0, 0.0]])


def elementary(N, k, a, upper):
    """1 + a lam^k E, a unipotent twisted loop when k is odd."""
    return TruncatedLoop.from_terms({0: np.eye(2), k: a * (E12 if upper else E21)}, N, twisted=True)


def random_one_sided(rng, N, side, factors=2, max_power=3, normalized=True):
    """Product of unipotent odd-power factors, optionally times a constant diagonal.

    ``side`` is -1 for exponents <= 0 and +1 for exponents >= 0; the result
    has determinant identically 1 and is twisted.
    """
    out = TruncatedLoop.identity(N)
    for _ in range(factors):
        k = side * int(rng.choice(np.arange(1, max_power + 1, 2)))
        out = out * elementary(N, k, rng.uniform(-1.0, 1.0), bool(rng.integers(2)))
    if not normalized:
        d = np.exp(rng.uniform(-0.5, 0.5))
        out = out * TruncatedLoop.constant(np.diag([d, 1.0 / d]), N, twisted=True)
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_FIELDS = {}


def builtin_field(name, n=33, box=None):
    """Cached framing of a builtin potential on its default box."""
    key = (name, n, box)
    if key not in _FIELDS:
        grid = Grid(*(box or BUILTIN_GRIDS[name]), n, n)
        _FIELDS[key] = build_extended_framing(builtin_potential(name), grid)
    return _FIELDS[key]


ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
