import numpy as np
import pytest

from loopcmc import (
    BigCellFailure,
    InvalidArgument,
    TruncatedLoop,
    big_cell_diagnostic,
    birkhoff_split,
    check_twisted,
    evaluate,
    iwasawa_pair_split,
    loop_invert,
    loop_norm,
)
from loopcmc.minkowski import det2

from conftest import E12, E21, elementary, random_one_sided

N = 16


def witness(N=N):
    return TruncatedLoop.from_terms({2: np.diag([1.0, 0.0]), -2: np.diag([0.0, 1.0])}, N, twisted=True)


def near_boundary(eps, N=N):
    # (1 + lam E12)(1 - (1 - eps) lam^-1 E21) leaves the big cell at eps = 0
    return elementary(N, 1, 1.0, True) * elementary(N, -1, -(1.0 - eps), False)


def test_identity_splits_trivially():
    res = birkhoff_split(TruncatedLoop.identity(N))
    assert np.allclose(res.normalized_factor.coeffs, TruncatedLoop.identity(N).coeffs)
    assert np.allclose(res.complement_factor.coeffs, TruncatedLoop.identity(N).coeffs)
    assert res.residual == 0.0


def test_minus_loop_is_its_own_factor():
    g = elementary(N, -1, 1.0, False)
    res = birkhoff_split(g)
    assert np.allclose(res.normalized_factor.coeffs, g.coeffs, atol=1e-14)
    assert np.allclose(res.complement_factor.coeffs, TruncatedLoop.identity(N).coeffs, atol=1e-14)


def test_known_factors_recovered():
    gm, lp = elementary(N, -1, 1.0, False), elementary(N, 1, 1.0, True)
    res = birkhoff_split(gm * lp)
    assert loop_norm(res.normalized_factor - gm) <= 1e-10
    assert loop_norm(res.complement_factor - lp) <= 1e-10


def test_plus_minus_convention():
    gp, lm = elementary(N, 1, 0.7, True), elementary(N, -3, -0.4, False)
    res = birkhoff_split(gp * lm, "plus_minus")
    assert res.convention == "plus_minus"
    assert loop_norm(res.normalized_factor - gp) <= 1e-10
    assert loop_norm(res.complement_factor - lm) <= 1e-10


def test_unknown_convention():
    with pytest.raises(InvalidArgument):
        birkhoff_split(TruncatedLoop.identity(4), "sideways")


def test_witness_off_cell():
    with pytest.raises(BigCellFailure) as info:
        birkhoff_split(witness())
    assert info.value.rcond < 1e-10
    assert big_cell_diagnostic(witness()) < 1e-10
    assert big_cell_diagnostic(TruncatedLoop.identity(N)) == pytest.approx(1.0)


def test_near_boundary_sweep_is_monotone():
    eps = [1.0, 0.5, 0.1, 1e-2, 1e-3, 1e-4, 1e-6]
    r = [big_cell_diagnostic(near_boundary(e)) for e in eps]
    assert all(a > b for a, b in zip(r, r[1:]))
    assert big_cell_diagnostic(near_boundary(0.0)) < 1e-10


def test_random_suite():
    rng = np.random.default_rng(7)
    worst_round, worst_rec, worst_det = 0.0, 0.0, 0.0
    for _ in range(1000):
        gm = random_one_sided(rng, N, -1, factors=int(rng.integers(1, 4)))
        lp = random_one_sided(rng, N, +1, factors=int(rng.integers(1, 4)), normalized=False)
        g = gm * lp
        res = birkhoff_split(g)
        worst_round = max(worst_round, loop_norm(res.normalized_factor * res.complement_factor - g))
        worst_rec = max(worst_rec, loop_norm(res.normalized_factor - gm), loop_norm(res.complement_factor - lp))
        assert check_twisted(res.normalized_factor, 1e-10) and check_twisted(res.complement_factor, 1e-10)
        for f in (res.normalized_factor, res.complement_factor):
            for lam in (0.5, 1.0, 2.0):
                worst_det = max(worst_det, abs(det2(evaluate(f, lam)) - 1.0))
    assert worst_round <= 1e-9
    assert worst_rec <= 1e-9
    assert worst_det <= 1e-8


def test_factor_shapes():
    rng = np.random.default_rng(3)
    g = random_one_sided(rng, N, -1) * random_one_sided(rng, N, 1, normalized=False)
    res = birkhoff_split(g)
    assert np.allclose(res.normalized_factor.coeff(0), np.eye(2), atol=1e-12)
    assert max(res.normalized_factor.support()) == 0
    assert min(res.complement_factor.support()) >= 0
    res = birkhoff_split(g, "plus_minus")
    assert min(res.normalized_factor.support()) == 0
    assert max(res.complement_factor.support()) <= 0


def test_pair_split_identity():
    one = TruncatedLoop.identity(N)
    Psi, Lm, Lp, diag = iwasawa_pair_split(one, one)
    for X in (Psi, Lm, Lp):
        assert np.allclose(X.coeffs, one.coeffs)


def test_pair_split_round_trip():
    rng = np.random.default_rng(11)
    for _ in range(100):
        Psi = random_one_sided(rng, N, -1, factors=1) * random_one_sided(rng, N, 1, factors=1)
        Lm = random_one_sided(rng, N, -1, factors=2)
        Lp = random_one_sided(rng, N, 1, factors=2, normalized=False)
        p1, p2 = Psi * loop_invert(Lm), Psi * loop_invert(Lp)
        P, A, B, diag = iwasawa_pair_split(p1, p2)
        assert loop_norm(P - Psi) <= 1e-9
        assert loop_norm(A - Lm) <= 1e-9
        assert loop_norm(B - Lp) <= 1e-9
        assert diag["consistency"] <= 1e-9


def test_pair_split_off_cell():
    with pytest.raises(BigCellFailure):
        iwasawa_pair_split(TruncatedLoop.identity(N), witness())
