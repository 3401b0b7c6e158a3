import math

import numpy as np
import pytest

from loopcmc import (
    EmptyResultError,
    ExtractionFailed,
    FrameField,
    Grid,
    InvalidArgument,
    ScalarFunction,
    TruncatedLoop,
    build_extended_framing,
    builtin_potential,
    check_twisted,
    classify_connection,
    dalembert_potentials,
    extract_normalized_potentials,
    fundamental_data,
    integrate_framing_axis,
    loop_exponential,
    loop_norm,
    maurer_cartan_form,
    normalized_potentials,
    sym_immersion,
)
from loopcmc.loops import exponents
from loopcmc.minkowski import det2
from loopcmc.potentials import BUILTIN_NAMES, PotentialPair

from conftest import E12, builtin_field

J = np.array([[0.0, -1.0], [-1.0, 0.0]])


def zero_pair():
    z = lambda t: {1: np.zeros(np.shape(t) + (2, 2))}
    zy = lambda t: {-1: np.zeros(np.shape(t) + (2, 2))}
    return PotentialPair(1.0, z, zy, name="zero")


def nilpotent_pair(q):
    def tx(t):
        out = np.zeros(np.shape(t) + (2, 2))
        out[..., 0, 1] = q(np.asarray(t))
        return {1: out}

    return PotentialPair(1.0, tx, zero_pair().terms_y, name="nilpotent")


def test_grid_validation():
    g = Grid(-1, 1, -0.5, 0.5, 5, 3)
    assert g.i0 == 2 and g.j0 == 1 and g.shape == (5, 3)
    assert g.refined().shape == (9, 5)
    for bad in ((-1, 1, -1, 1, 0, 0), (-1, 1, -1, 1, 4, 5), (0.5, 1, -1, 1, 5, 5), (1, -1, -1, 1, 5, 5)):
        with pytest.raises(InvalidArgument):
            Grid(*bad)


def test_zero_potentials_give_identity():
    field = build_extended_framing(zero_pair(), Grid.square(1.0, 5), N=6)
    assert not field.failure_mask.any()
    assert np.allclose(field.coeffs, TruncatedLoop.identity(6).coeffs)


def test_nilpotent_axis_is_exact():
    q = lambda t: -0.5 * np.cos(t)  # q = -(H/2) f with H = 1, f = cos
    xs = np.linspace(-1, 1, 9)
    loops = integrate_framing_axis(nilpotent_pair(q), "x", xs, substeps=16, N=8)
    for x, L in zip(xs, loops):
        expected = TruncatedLoop.from_terms({0: np.eye(2), 1: -0.5 * np.sin(x) * E12}, 8)
        assert loop_norm(L - expected) <= 1e-9


def test_axis_rejects_bad_samples():
    pot = builtin_potential("circular_cylinder")
    with pytest.raises(InvalidArgument):
        integrate_framing_axis(pot, "x", [0.1, 0.2])
    with pytest.raises(InvalidArgument):
        integrate_framing_axis(pot, "z", [0.0, 0.2])


def test_exponential_examples():
    N = 16
    assert np.allclose(loop_exponential(TruncatedLoop.zero(N)).coeffs, TruncatedLoop.identity(N).coeffs)
    gen = TruncatedLoop.from_terms({1: E12}, N, twisted=True)
    expected = TruncatedLoop.from_terms({0: np.eye(2), 1: 0.7 * E12}, N)
    assert loop_norm(loop_exponential(gen, 0.7) - expected) <= 1e-15


@pytest.mark.parametrize("x", [0.3, 1.0, -2.5])
def test_exponential_matches_series(x):
    # exp(x lam J / 4) = cosh(x lam / 4) + sinh(x lam / 4) J since J^2 = 1
    N = 16
    E = loop_exponential(TruncatedLoop.from_terms({1: 0.25 * J}, N, twisted=True), x)
    a = 0.25 * x
    for k in range(N + 1):
        c = a ** k / math.factorial(k)
        expected = c * (np.eye(2) if k % 2 == 0 else J)
        assert np.allclose(E.coeff(k), expected, atol=1e-14, rtol=1e-12)
    assert np.allclose(E.coeffs[:N], 0.0)


def test_rk4_matches_exponential():
    pot = builtin_potential("hyperbolic_cylinder")
    xs = np.linspace(-1, 1, 33)
    loops = integrate_framing_axis(pot, "x", xs)
    E = loop_exponential(TruncatedLoop.from_terms({1: 0.25 * J}, 16, twisted=True), 1.0)
    assert loop_norm(loops[-1] - E) <= 1e-10


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_framing_invariants(name):
    field = builtin_field(name)
    g = field.grid
    assert np.array_equal(field.coeffs[g.i0, g.j0], TruncatedLoop.identity(16).coeffs)
    assert not field.failure_mask.any()
    assert np.nanmax(field.diagnostics["det_defect"]) <= 1e-8
    assert np.nanmax(field.diagnostics["twist_defect"]) <= 1e-10
    assert np.nanmax(field.diagnostics["consistency"]) <= 1e-9
    assert np.max(field.diagnostics["tail"]) <= 1e-8
    for lam in (0.5, 1.0, 2.0):
        assert np.max(np.abs(det2(field.evaluate(lam)) - 1.0)) <= 1e-8


def test_axis_loops_are_one_sided():
    pot = builtin_potential("circular_cylinder")
    xs = np.linspace(-1, 1, 9)
    for L in integrate_framing_axis(pot, "x", xs):
        assert min(L.support()) >= 0 and check_twisted(L, 1e-10)
    for L in integrate_framing_axis(pot, "y", xs):
        assert max(L.support()) <= 0 and check_twisted(L, 1e-10)


def test_maurer_cartan_identity_field():
    field = build_extended_framing(zero_pair(), Grid.square(1.0, 7), N=6)
    rep = maurer_cartan_form(field)
    for key in ("structure", "flatness", "admissibility"):
        assert rep.summary[key]["max"] == 0.0


def test_maurer_cartan_cylinder():
    rep = maurer_cartan_form(builtin_field("hyperbolic_cylinder"))
    assert rep.summary["structure"]["max"] <= 1e-4
    assert rep.summary["flatness"]["max"] <= 1e-10
    assert rep.summary["admissibility"]["max"] <= 1e-10
    assert rep.skipped == 0
    # dx-part lives in exponents {0, 1}, dy-part in {-1, 0}, up to differencing error
    k = exponents(16)
    live = rep.valid
    assert np.abs(rep.alpha_x[live][:, ~np.isin(k, (0, 1))]).max() <= 1e-4
    assert np.abs(rep.alpha_y[live][:, ~np.isin(k, (-1, 0))]).max() <= 1e-4


def test_structure_residual_second_order():
    pot = builtin_potential("hyperbolic_cylinder")
    r = [maurer_cartan_form(build_extended_framing(pot, Grid.square(1.0, n))).summary["structure"]["max"]
         for n in (17, 33, 65)]
    assert math.log2(r[0] / r[1]) >= 1.8 and math.log2(r[1] / r[2]) >= 1.8


def test_exact_form_matches_differenced_form():
    field = builtin_field("circular_cylinder")
    rep = maurer_cartan_form(field)
    live = rep.valid
    assert np.abs(rep.alpha_x[live] - field.alpha_x[live]).max() <= 1e-4
    assert np.abs(rep.alpha_y[live] - field.alpha_y[live]).max() <= 1e-4


def test_classification():
    assert classify_connection(builtin_field("circular_cylinder")).dominant == "H+"
    assert classify_connection(builtin_field("hyperbolic_cylinder")).dominant == "H+"
    cls = classify_connection(builtin_field("bscroll_example"))
    assert cls.dominant == "H0" and cls.counts["H0"] == cls.labels.size
    g = Grid.square(0.5, 17)
    cls = classify_connection(build_extended_framing(dalembert_potentials(0.5, -1), g))
    assert cls.counts["H-"] == g.nx * g.ny


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_extraction_recovers_potentials(name):
    field = builtin_field(name)
    pot = builtin_potential(name)
    ext = extract_normalized_potentials(field)
    g = field.grid
    for xs, f_ext, f_ref in ((g.xs, ext.terms_x, pot.terms_x), (g.ys, ext.terms_y, pot.terms_y)):
        a, b = f_ext(xs), f_ref(xs)
        assert set(a) == set(b)
        for k in a:
            assert np.abs(a[k] - b[k]).max() <= 1e-6
    assert ext.meta["diagnostics"]["within_tolerance"]


def test_extraction_bscroll_is_upper_triangular():
    ext = extract_normalized_potentials(builtin_field("bscroll_example"))
    a = ext.terms_x(builtin_field("bscroll_example").grid.xs)[1]
    assert np.abs(a[:, 1, 0]).max() <= 1e-12


def test_extraction_of_identity_is_zero():
    field = build_extended_framing(zero_pair(), Grid.square(1.0, 5), N=6)
    ext = extract_normalized_potentials(field)
    assert np.abs(ext.terms_x(field.grid.xs)[1]).max() == 0.0
    assert np.abs(ext.terms_y(field.grid.ys)[-1]).max() == 0.0


def test_round_trip_reproduces_field():
    pot = normalized_potentials(0.5, ScalarFunction.poly([0.2, 0.1]), 0.3,
                                ScalarFunction.exp_poly([0.0, 0.4]), ScalarFunction.poly([1.0, 0.2]))
    g = Grid.square(0.5, 33)
    field = build_extended_framing(pot, g)
    again = build_extended_framing(extract_normalized_potentials(field), g)
    live = ~(field.failure_mask | again.failure_mask)
    assert np.abs(again.coeffs[live] - field.coeffs[live]).max() <= 1e-6


def test_extraction_without_stored_form():
    field = builtin_field("circular_cylinder")
    bare = FrameField(field.grid, field.coeffs, field.failure_mask, {}, None, None, field.H, field.name)
    ext = extract_normalized_potentials(bare, check_dependence=False)
    ref = builtin_potential("circular_cylinder")
    assert np.abs(ext.terms_x(field.grid.xs)[1] - ref.terms_x(field.grid.xs)[1]).max() <= 1e-3


def test_extraction_fails_on_masked_axis():
    field = builtin_field("circular_cylinder")
    mask = field.failure_mask.copy()
    mask[-1, field.grid.j0] = True
    broken = FrameField(field.grid, field.coeffs, mask, {}, field.alpha_x, field.alpha_y, field.H)
    with pytest.raises(ExtractionFailed) as info:
        extract_normalized_potentials(broken)
    assert info.value.location == (1.0, 0.0)


def test_axis_metric_consistency():
    # with f(0) = g(0) the x-axis conformal factor obeys log f(x) = omega(x,0) - omega(0,0)/2
    c = 1.5
    f = ScalarFunction.exp_poly([math.log(c), 0.8])
    g = ScalarFunction.exp_poly([math.log(c), -0.3])
    pot = normalized_potentials(0.5, 0.2, 0.1, f, g)
    grid = Grid.square(0.5, 65)
    data = fundamental_data(sym_immersion(build_extended_framing(pot, grid)))
    w = data.omega[:, grid.j0]
    w00 = w[grid.i0]
    assert w00 == pytest.approx(2 * math.log(c), abs=1e-4)
    inner = slice(1, -1)
    assert np.abs(np.log(f(grid.xs)) - (w - w00 / 2))[inner].max() <= 1e-4


def test_off_cell_everywhere_raises():
    # an rcond threshold above 1 rejects every split except the origin
    with pytest.raises(EmptyResultError):
        build_extended_framing(builtin_potential("circular_cylinder"), Grid.square(1.0, 5), threshold=2.0)
