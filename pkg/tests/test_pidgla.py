"""The pullback dg Lie algebroid: Q, the splitting and the perturbed contraction."""
import pytest

from lib.errors import ConstraintViolation
from lib.exactalg import CochainElem, ModuleElem, PolyScalar
from lib.pidgla import (
    D,
    E,
    PairSection,
    Q_apply,
    VectorFieldA1,
    b_generators_q_stable,
    basic_contraction,
    bracket_oracle,
    canonical_inclusion_check,
    dA_squared_check,
    filtration_check,
    perturbed_pi_contraction,
    pi_contraction_checks,
    q_checks,
    q_via_oracle,
    s_iA,
    section_module,
    splitting_check,
    tau_closed_form,
)


def failures(records):
    return [r for r in records if not r['valid']]


def gen(label, coeff=None, n=0):
    return ModuleElem(n, {label: coeff if coeff is not None else CochainElem.one(n)})


class TestSections:
    def test_generators_and_degrees(self, sl2):
        S = section_module(sl2.model)
        assert S.generators == (D(1), D(2), E(1), E(2), E(3))
        assert [S.degree(g) for g in S.generators] == [-1, -1, 0, 0, 0]


class TestQ:
    def test_abelian(self, abelian):
        assert Q_apply(abelian, gen(D(1))) == gen(E(1))
        assert not abelian.q.on_generator(E(2))

    def test_borel_generators(self, sl2):
        eta = CochainElem.eta
        assert sl2.q.on_generator(D(1)) == gen(E(1)) + gen(D(2), eta(0, 2) * -2)
        assert sl2.q.on_generator(D(2)) == gen(E(2)) + gen(D(2), eta(0, 1) * 2)
        assert sl2.q.on_generator(E(3)) == gen(E(3), eta(0, 1) * -2) + gen(E(1), eta(0, 2))

    def test_b_frame_rotation(self, dim2, gl1):
        assert dim2.q.on_generator(E(2)) == gen(E(2), CochainElem.eta(0, 1))
        assert gl1.q.on_generator(E(2)) == gen(E(2), -CochainElem.eta(1, 1), n=1)

    def test_structure_checks(self, bundled_pi):
        assert failures(q_checks(bundled_pi)) == []
        assert failures(dA_squared_check(bundled_pi.model)) == []

    def test_q_is_the_bracket_with_s_iA(self, foliation):
        x = gen(E(2), CochainElem.scalar(2, PolyScalar.var(2, 1)), n=2)
        assert foliation.q(x) == gen(E(2), CochainElem.eta(2, 1), n=2)
        assert q_via_oracle(foliation.model, x) == foliation.q(x)
        source = s_iA(foliation.model)
        assert source.degree == 1
        assert set(source.lpart) == {1}

    def test_s_iA_squares_to_zero(self, bundled_pi):
        source = s_iA(bundled_pi.model)
        square = bracket_oracle(bundled_pi.model, source, source)
        assert not any(square.vector_field.vertical.values())
        assert not any(square.vector_field.horizontal.values())
        assert not any(square.lpart.values())

    def test_oracle_enforces_the_anchor_constraint(self, foliation):
        n = 2
        loose = PairSection(VectorFieldA1(n, 0, {}, {1: CochainElem.one(n)}), {})
        with pytest.raises(ConstraintViolation):
            bracket_oracle(foliation.model, s_iA(foliation.model), loose)


class TestVectorFields:
    def test_commutator(self):
        x1 = CochainElem.scalar(1, PolyScalar.var(1, 1))
        X = VectorFieldA1(1, 0, {}, {1: x1})
        Y = VectorFieldA1(1, 0, {}, {1: CochainElem.one(1)})
        assert X.bracket(Y) == VectorFieldA1(1, 0, {}, {1: -CochainElem.one(1)})

    def test_acts_by_contraction(self):
        Z = VectorFieldA1(0, -1, {1: CochainElem.one(0)}, {})
        assert Z(CochainElem.eta(0, 1, 2)) == CochainElem.eta(0, 2)


class TestContraction:
    def test_basic_contraction_is_the_splitting_homotopy(self, dim2):
        contraction, maps = basic_contraction(dim2)
        assert contraction is dim2.basic
        assert maps is dim2.maps

    def test_splitting(self, bundled_pi):
        assert failures(splitting_check(bundled_pi.maps)) == []

    def test_filtration(self, bundled_pi):
        assert failures(filtration_check(bundled_pi)) == []

    def test_closed_forms(self, bundled_pi):
        assert failures(pi_contraction_checks(bundled_pi)) == []
        assert bundled_pi.perturbed.iterations["h_pert"] <= 2

    def test_perturbed_contraction(self, sl2):
        result = perturbed_pi_contraction(sl2)
        assert failures(result.report) == []
        assert result.h_pert.on_generator(E(1)) == sl2.maps.p_tilde_A.on_generator(E(1))

    def test_tau_is_not_canonical_for_the_borel_pair(self, sl2):
        expected = gen(E(3)) + gen(D(1), CochainElem.eta(0, 2))
        assert tau_closed_form(sl2, ("b", 3)) == expected
        assert sl2.perturbed.tau_pert.on_generator(("b", 3)) == expected
        assert [r['valid'] for r in canonical_inclusion_check(sl2)] == [False]

    @pytest.mark.parametrize("fixture", ["dim2", "gl1"])
    def test_tau_is_canonical_when_b_is_q_stable(self, request, fixture):
        pi = request.getfixturevalue(fixture)
        assert failures(b_generators_q_stable(pi)) == []
        assert failures(canonical_inclusion_check(pi)) == []

    def test_borel_b_is_not_q_stable(self, sl2):
        assert failures(b_generators_q_stable(sl2))

    def test_small_differential_is_bott(self, dim2):
        b = ModuleElem.basis(0, ("b", 2))
        assert dim2.perturbed.delta_pert(b) == b.scale(CochainElem.eta(0, 1))
