"""Contractions, the perturbation lemma and the Hom/tensor/exterior constructions."""
import pytest

from lib.errors import NonNilpotent, NotAPerturbation, NotPointCase
from lib.exactalg import FreeModule
from lib.hpl import (
    Operator,
    exterior_contraction,
    hom_contraction,
    koszul_permutation_sign,
    lemma_identities,
    perturb,
    projector,
    projector_rank_check,
    random_contraction,
    rational_basis,
    report_ok,
    tensor_contraction,
    toy_contraction,
    verify_contraction,
    wedge_args,
    wedge_label,
)

from .conftest import BUNDLED, POINT_MODELS, load_pullback


def failures(report):
    return [r for r in report if not r['valid']]


class TestToyContraction:
    def test_base_axioms(self):
        c, _ = toy_contraction()
        assert failures(verify_contraction(c)) == []

    def test_perturbed_maps(self):
        c, pert = toy_contraction()
        pc = perturb(c, pert)
        assert pc.sigma_pert.on_generator("b") == -pc.sigma_pert.target.basis("v")
        assert pc.h_pert.on_generator("b") == c.module.basis("a")
        assert pc.tau_pert.on_generator("v") == c.module.basis("v")
        assert not pc.delta_pert.on_generator("v")
        assert report_ok(pc.report)

    def test_closed_forms_match_direct_inversion(self):
        c, pert = toy_contraction()
        assert failures(lemma_identities(perturb(c, pert))) == []

    def test_projector_keeps_only_the_small_part(self):
        c, _ = toy_contraction()
        varpi = projector(c)
        assert varpi.on_generator("v") == c.module.basis("v")
        assert not varpi.on_generator("a")
        assert not varpi.on_generator("b")

    def test_series_budget(self):
        c, pert = toy_contraction()
        with pytest.raises(NonNilpotent):
            perturb(c, pert, max_iter=0)

    def test_non_square_zero_perturbation_is_rejected(self):
        c, _ = toy_contraction()
        bad = Operator(c.module, c.module, 1, {"a": c.module.basis("a")}, name="bad")
        with pytest.raises(NotAPerturbation):
            perturb(c, bad)


class TestRandomContractions:
    @pytest.mark.parametrize("seed", range(20))
    def test_axioms_and_closed_forms(self, seed):
        c, pert = random_contraction(seed)
        assert failures(verify_contraction(c)) == []
        pc = perturb(c, pert)
        assert failures(pc.report) == []
        assert failures(lemma_identities(pc)) == []

    def test_seeded(self):
        first, _ = random_contraction(3)
        second, _ = random_contraction(3)
        assert first.module.degrees == second.module.degrees
        assert first.delta.table() == second.delta.table()


class TestConstructions:
    def test_basic_contraction(self, bundled_pi):
        assert failures(verify_contraction(bundled_pi.basic)) == []

    @pytest.mark.parametrize("build", [
        lambda c: hom_contraction(c, c),
        lambda c: tensor_contraction([c, c]),
        lambda c: exterior_contraction(c, 2),
    ], ids=["hom", "tensor", "exterior-2"])
    def test_derived_contractions(self, bundled_pi, build):
        assert failures(verify_contraction(build(bundled_pi.basic))) == []

    @pytest.mark.slow
    @pytest.mark.parametrize("name", BUNDLED)
    def test_third_exterior_power(self, name):
        assert failures(verify_contraction(exterior_contraction(load_pullback(name).basic, 3))) == []

    def test_low_exterior_degrees(self, abelian):
        basic = abelian.basic
        assert exterior_contraction(basic, 1) is basic
        ring = exterior_contraction(basic, 0)
        assert ring.module.generators == ((),)
        with pytest.raises(ValueError):
            exterior_contraction(basic, -1)

    def test_single_factor_tensor(self, abelian):
        assert tensor_contraction([abelian.basic]) is abelian.basic

    @pytest.mark.parametrize("build", [
        lambda c: c,
        lambda c: hom_contraction(c, c),
        lambda c: tensor_contraction([c, c]),
    ], ids=["basic", "hom", "tensor"])
    @pytest.mark.parametrize("name", POINT_MODELS)
    def test_projector_rank(self, name, build):
        assert projector_rank_check(build(load_pullback(name).basic))['valid']

    def test_projector_rank_needs_a_point(self, foliation):
        with pytest.raises(NotPointCase):
            projector_rank_check(foliation.basic)

    def test_rational_basis_needs_a_point(self, foliation):
        with pytest.raises(NotPointCase, match="point case only"):
            rational_basis(foliation.module)
        assert len(rational_basis(FreeModule("W", 0, 2, ("w",), {"w": 0}))) == 4


class TestSigns:
    def test_koszul_permutation_sign(self):
        assert koszul_permutation_sign([0, 0], (1, 0)) == -1
        assert koszul_permutation_sign([1, 1], (1, 0)) == 1
        assert koszul_permutation_sign([0, 1, 0], (0, 1, 2)) == 1

    def test_wedge_labels(self):
        assert wedge_label((("e", 1),)) == ("e", 1)
        assert wedge_args(("e", 1), 1) == (("e", 1),)
        assert wedge_args(wedge_label((("e", 1), ("d", 1))), 2) == (("e", 1), ("d", 1))
