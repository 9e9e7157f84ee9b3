"""Todd series, supertraces, Todd cocycles and point-case cohomology."""
from fractions import Fraction

import pytest

from lib.atiyah import form_spaces, pair_atiyah
from lib.errors import DegreeRangeError, NotPointCase
from lib.exactalg import CochainElem, ModuleElem, PolyScalar
from lib.liepair import ConnectionTable, default_connection, random_connection
from lib.todd import (
    ce_cohomology_dims,
    ce_euler_check,
    cohomology_table,
    connection_independence,
    exactness_solve,
    identity_end,
    lambda_maps,
    multiplicativity_check,
    scalar_class,
    series_self_check,
    supertrace,
    todd_class_check,
    todd_cocycle,
    todd_generating_series,
    todd_series,
    trace_lemma_check,
    unit_form,
    wedge_end_power,
)

from .conftest import BUNDLED, load_pullback


def failures(records):
    return [r for r in records if not r['valid']]


class TestSeries:
    def test_coefficients(self):
        assert todd_series(4).coeffs == (0, Fraction(1, 2), Fraction(-1, 24), 0, Fraction(1, 2880))
        assert todd_series(4).order == 4

    def test_generating_series(self):
        assert todd_generating_series(3) == [1, Fraction(1, 2), Fraction(1, 12), 0]

    @pytest.mark.parametrize("K", [1, 4, 8])
    def test_against_the_logarithm(self, K):
        assert failures(series_self_check(K)) == []


class TestTraces:
    @pytest.mark.parametrize("name", ["sl2-borel", "sl2-cartan"])
    @pytest.mark.parametrize("side", ["dgla", "pair"])
    def test_supertrace_of_identity_counts_rank(self, name, side):
        pi = load_pullback(name)
        spaces = form_spaces(pi, side)
        got = supertrace(spaces, identity_end(spaces)).element
        assert got == ModuleElem(0, {((), ()): pi.model.rprime})

    def test_lambda_maps_split(self, dim2):
        maps = lambda_maps(dim2, 1)
        small = form_spaces(dim2, "dgla").scalar(1).small.module
        for label in small.generators:
            x = small.basis(label)
            assert maps.Pi(maps.T(x)) == x

    def test_zeroth_power_is_identity(self, abelian):
        spaces = form_spaces(abelian, "pair")
        alpha = pair_atiyah(abelian)
        assert wedge_end_power(spaces, alpha, 0).element == identity_end(spaces).element
        with pytest.raises(DegreeRangeError):
            wedge_end_power(spaces, alpha, -1)

    def test_class_degree_range(self, dim2):
        with pytest.raises(DegreeRangeError):
            scalar_class(dim2, side="pair", k=2)

    def test_trace_lemma(self, abelian, dim2, cartan):
        for pi in (abelian, dim2, cartan):
            assert failures(trace_lemma_check(pi)) == []

    @pytest.mark.slow
    @pytest.mark.parametrize("name", BUNDLED)
    def test_trace_lemma_on_every_model(self, name):
        assert failures(trace_lemma_check(load_pullback(name))) == []

    def test_t_hat_is_multiplicative(self, dim2):
        for k in (0, 1):
            assert failures(multiplicativity_check(dim2, k)) == []


class TestToddCocycle:
    def test_flat_pair_side(self, dim2):
        unit, first = todd_cocycle(dim2, None, "pair")
        assert unit.element == unit_form(form_spaces(dim2, "pair")).element
        assert first.is_zero()

    def test_first_component_is_half_the_trace(self, dim2):
        table = ConnectionTable(0, {(1, 2, 2): PolyScalar.const(0, 1), (2, 2, 2): PolyScalar.const(0, 3)})
        _, first = todd_cocycle(dim2, table, "pair")
        trace = scalar_class(dim2, table, "pair", 1)
        assert first.element == trace.element.scale(Fraction(1, 2))
        assert first.element == ModuleElem(0, {((), ("b", 2)): CochainElem.eta(0, 1) * Fraction(-3, 2)})

    @pytest.mark.parametrize("side", ["pair", "dgla"])
    def test_components_are_closed(self, bundled_pi, side):
        spaces = form_spaces(bundled_pi, side)
        for d, component in enumerate(todd_cocycle(bundled_pi, None, side)):
            assert not spaces.scalar(d).delta(component.element)

    @pytest.mark.parametrize("fixture", ["abelian", "dim2", "sl2", "cartan"])
    def test_class_comparison(self, request, fixture):
        assert failures(todd_class_check(request.getfixturevalue(fixture))) == []

    def test_class_comparison_needs_a_point(self, foliation):
        with pytest.raises(NotPointCase):
            todd_class_check(foliation)


class TestExactness:
    def test_connection_independence(self, dim2):
        table = ConnectionTable(0, {(1, 2, 2): PolyScalar.const(0, 1), (2, 2, 2): PolyScalar.const(0, 3)})
        result = connection_independence(dim2, default_connection(dim2.model), table)
        assert result['exact']
        assert result['obstruction'] is None

    def test_connection_independence_on_the_borel_pair(self, sl2):
        result = connection_independence(sl2, default_connection(sl2.model), random_connection(sl2.model, 0))
        assert result['exact']

    def test_zero_is_exact(self, abelian):
        space = form_spaces(abelian, "pair").end(1)
        result = exactness_solve(space, space.module.zero())
        assert result['exact'] and not result['witness']

    def test_needs_a_point(self, foliation):
        space = form_spaces(foliation, "pair").end(1)
        with pytest.raises(NotPointCase):
            exactness_solve(space, space.module.zero())


class TestCohomology:
    @pytest.mark.parametrize("fixture, tag, dims", [
        ("abelian", "trivial", [1, 1]),
        ("abelian", "B", [1, 1]),
        ("sl2", "trivial", [1, 1, 0]),
        ("dim2", "B", [0, 0]),
        ("dim2", "dual-B-End-B", [0, 0]),
    ])
    def test_ce_dimensions(self, request, fixture, tag, dims):
        assert ce_cohomology_dims(request.getfixturevalue(fixture), tag) == dims

    @pytest.mark.parametrize("fixture", ["abelian", "dim2"])
    def test_quasi_isomorphism(self, request, fixture):
        rows = cohomology_table(request.getfixturevalue(fixture))
        assert [row['k'] for row in rows] == [0, 1]
        assert all(row['valid'] for row in rows)

    @pytest.mark.parametrize("fixture", ["abelian", "dim2", "sl2", "cartan"])
    @pytest.mark.parametrize("tag", ["B", "dual-B-End-B"])
    def test_euler_characteristic(self, request, fixture, tag):
        assert ce_euler_check(request.getfixturevalue(fixture), tag)['valid']

    def test_infinite_dimensional_chart(self, foliation):
        with pytest.raises(NotPointCase, match="point case only"):
            ce_cohomology_dims(foliation, "B")
