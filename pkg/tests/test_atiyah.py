"""Atiyah cocycles on both sides and their comparison under the contraction."""
import pytest

from lib.atiyah import (
    MultiHom,
    T12,
    atiyah_checks,
    compare_theoremB,
    connection_properties,
    covariant_derivative,
    dgla_atiyah,
    dgla_connection,
    form_spaces,
    homotopy_H12,
    pair_atiyah,
    pair_atiyah_formula,
    pair_closedness,
    proj_Pi12,
    resolve_connection,
    tensoriality_check,
)
from lib.errors import ConnectionTableError
from lib.exactalg import CochainElem, ModuleElem, PolyScalar, parse_poly
from lib.liepair import ConnectionTable, default_connection
from lib.pidgla import D, E

from .conftest import BUNDLED, load_pullback

AT_KEY = (("b", 2), (("b", 2), ("b", 2)))


def failures(records):
    return [r for r in records if not r['valid']]


class TestPairAtiyah:
    def test_default_connection_is_flat_on_gl1(self, gl1):
        assert pair_atiyah(gl1).is_zero()

    def test_christoffel_slot_on_gl1(self, gl1):
        table = ConnectionTable(1, {(1, 2, 2): PolyScalar.const(1, -1), (2, 2, 2): parse_poly("x1^2", 1)})
        at = pair_atiyah(gl1, table)
        assert at.element == ModuleElem(1, {AT_KEY: CochainElem.eta(1, 1) * parse_poly("3*x1^2", 1)})
        assert pair_atiyah_formula(gl1, table).element == at.element

    def test_christoffel_slot_on_dim2(self, dim2):
        table = ConnectionTable(0, {(1, 2, 2): PolyScalar.const(0, 1), (2, 2, 2): PolyScalar.const(0, 3)})
        at = pair_atiyah(dim2, table)
        assert at.element == ModuleElem(0, {AT_KEY: CochainElem.eta(0, 1) * -3})
        bott, hom = pair_closedness(dim2, at)
        assert not bott and not hom

    def test_default_is_zero_on_dim2(self, dim2):
        assert pair_atiyah(dim2, default_connection(dim2.model)).is_zero()

    def test_rejects_inadmissible_tables(self, dim2):
        with pytest.raises(ConnectionTableError):
            resolve_connection(dim2, ConnectionTable(0, {(1, 2, 2): PolyScalar.const(0, 2)}))


class TestConnection:
    def test_properties(self, bundled_pi):
        assert failures(connection_properties(bundled_pi)) == []

    def test_vertical_pair_is_flat(self, sl2):
        S = sl2.module
        table = resolve_connection(sl2)
        assert not covariant_derivative(sl2, table, S.basis(D(1)), S.basis(D(2)))

    def test_anchor_acts_on_coefficients(self, foliation):
        S = foliation.module
        table = resolve_connection(foliation)
        x2 = CochainElem.scalar(2, PolyScalar.var(2, 2))
        got = covariant_derivative(foliation, table, S.basis(E(2)), S.basis(E(1)).scale(x2))
        assert got == S.basis(E(1))

    def test_unknown_side(self, abelian):
        with pytest.raises(ValueError, match="Unknown side"):
            form_spaces(abelian, "left")


class TestCocycles:
    def test_checks_hold(self, bundled_pi):
        assert failures(atiyah_checks(bundled_pi)) == []

    def test_tensoriality_with_vertical_terms(self, dim2):
        table = resolve_connection(dim2, seed=1, vertical=True)
        assert failures(tensoriality_check(dim2, table)) == []


class TestComparison:
    def test_default_connection(self, bundled_pi):
        result = compare_theoremB(bundled_pi)
        assert result['equal'], str(result['residual'])
        assert result['connection'] == "default"

    def test_explicit_table(self, gl1):
        table = ConnectionTable(1, {(1, 2, 2): PolyScalar.const(1, -1), (2, 2, 2): parse_poly("x1^2", 1)})
        assert compare_theoremB(gl1, table)['equal']

    def test_noncommutative_end_b(self, cartan):
        tables = [resolve_connection(cartan, seed=seed) for seed in range(4)]
        for table in tables:
            result = compare_theoremB(cartan, table)
            assert result['equal'], f"{result['connection']}: {result['residual']}"
        assert any(not pair_atiyah(cartan, table).is_zero() for table in tables)

    @pytest.mark.slow
    @pytest.mark.parametrize("name", BUNDLED)
    def test_random_tables(self, name):
        pi = load_pullback(name)
        for seed in range(10):
            result = compare_theoremB(pi, seed=seed, vertical=bool(seed % 2))
            assert result['equal'], f"{result['connection']}: {result['residual']}"

    @pytest.mark.slow
    @pytest.mark.parametrize("name", BUNDLED)
    def test_random_tables_are_cocycles(self, name):
        pi = load_pullback(name)
        for seed in range(3):
            assert failures(atiyah_checks(pi, resolve_connection(pi, seed=seed))) == []


class TestTransfer:
    TABLE = ConnectionTable(0, {(1, 2, 2): PolyScalar.const(0, 1), (2, 2, 2): PolyScalar.const(0, 3)})

    def test_dgla_connection_on_generators(self, dim2):
        nabla = dgla_connection(dim2)
        assert nabla.arity == 2
        assert nabla.value((E(1), E(2))) == dim2.module.basis(E(2))
        assert not nabla.value((D(1), D(1)))

    def test_projection_inverts_the_lift(self, dim2):
        at = pair_atiyah(dim2, self.TABLE)
        assert proj_Pi12(dim2, T12(dim2, at)).element == at.element

    def test_homotopy_vanishes_on_lifted_cocycles(self, dim2):
        lifted = T12(dim2, pair_atiyah(dim2, self.TABLE))
        assert homotopy_H12(dim2, lifted).is_zero()

    def test_projected_dgla_cocycle(self, dim2):
        At = dgla_atiyah(dim2, self.TABLE)
        assert At.arity == 2 and At.degree == 1
        assert proj_Pi12(dim2, At).element == pair_atiyah(dim2, self.TABLE).element

    @pytest.mark.parametrize("name", ["dim2-nonabelian", pytest.param("sl2-borel", marks=pytest.mark.slow)])
    def test_homotopy_contracts_onto_the_pair_side(self, name):
        pi = load_pullback(name)
        space = form_spaces(pi, "dgla").end(1)
        module = space.module
        for label in module.generators:
            degree = module.degree(label)
            theta = MultiHom(module, module.basis(label), 2, degree, "theta")
            H = homotopy_H12(pi, theta)
            D_theta = MultiHom(module, space.delta(theta.element), 2, degree + 1, "D(theta)")
            homotopy = space.delta(H.element) + homotopy_H12(pi, D_theta).element
            assert theta.element - T12(pi, proj_Pi12(pi, theta)).element == homotopy, label
            assert homotopy_H12(pi, H).is_zero(), label
