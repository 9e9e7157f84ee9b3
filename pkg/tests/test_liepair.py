"""Lie pair models: axioms, CE differential, connections, induced modules, constructors."""
import numpy as np
import pytest

from lib.errors import (
    ActionMorphismError,
    ConnectionTableError,
    FrameInversionError,
    ModelValidationError,
    UnknownModuleTagError,
)
from lib.exactalg import CochainElem, ModuleElem, PolyScalar, parse_poly, random_cochain
from lib.liepair import (
    ConnectionTable,
    LiePairModel,
    bott_differential,
    bott_module,
    ce_differential,
    connection_violations,
    default_connection,
    extended_connection,
    make_action,
    make_foliation,
    make_point_pair,
    model_from_dict,
    model_to_dict,
    module_covariant_derivative,
    random_connection,
    require_valid,
    validate,
)

from .conftest import BUNDLED


def const(value, n=0):
    return PolyScalar.const(n, value)


class TestValidation:
    @pytest.mark.parametrize("name", BUNDLED)
    def test_bundled_models_are_lie_pairs(self, models, name):
        assert validate(models[name]) == []

    def test_broken_antisymmetry_is_reported(self):
        model = LiePairModel(0, 1, 1, ((), ()), {(1, 2, 2): const(1)}, "broken")
        violations = validate(model)
        assert [v['invariant'] for v in violations] == ['antisymmetry']
        assert violations[0]['indices'] == [1, 2, 2]
        assert violations[0]['residual'] == "1"
        with pytest.raises(ModelValidationError):
            require_valid(model)

    def test_broken_jacobi_is_reported(self):
        c = {}
        for (i, j, k) in [(1, 2, 1), (2, 3, 2), (3, 1, 3)]:
            c[(i, j, k)] = const(1)
            c[(j, i, k)] = const(-1)
        model = LiePairModel(0, 3, 0, ((), (), ()), c, "not-a-lie-algebra")
        violations = validate(model)
        assert {v['invariant'] for v in violations} == {'jacobi'}
        assert all(v['message'] for v in violations)

    def test_subalgebra_closure(self):
        model = LiePairModel(0, 2, 1, ((), (), ()), {(1, 2, 3): const(1), (2, 1, 3): const(-1)})
        assert {v['invariant'] for v in validate(model)} == {'subalgebroid-closure'}

    def test_anchor_compatibility(self):
        model = LiePairModel(1, 1, 1, ((const(1, 1),), (PolyScalar.var(1, 1),)), {}, "bad-anchor")
        assert {v['invariant'] for v in validate(model)} == {'anchor-compatibility'}


class TestCEDifferential:
    @pytest.mark.parametrize("name", BUNDLED)
    def test_squares_to_zero(self, models, name):
        model = models[name]
        probes = [CochainElem.eta(model.n, k) for k in model.a_indices]
        probes += [CochainElem.scalar(model.n, PolyScalar.var(model.n, j)) for j in range(1, model.n + 1)]
        for f in probes:
            assert not ce_differential(model, ce_differential(model, f))

    @pytest.mark.parametrize("name", BUNDLED)
    def test_leibniz_rule(self, models, name):
        model = models[name]
        rng = np.random.default_rng(5)
        for p in range(model.r + 1):
            for q in range(model.r + 1 - p):
                f = random_cochain(rng, model.n, model.r, p, max_degree=2)
                g = random_cochain(rng, model.n, model.r, q, max_degree=2)
                df_g = ce_differential(model, f) * g
                f_dg = f * ce_differential(model, g)
                expected = df_g - f_dg if p % 2 else df_g + f_dg
                assert ce_differential(model, f * g) == expected

    def test_borel_structure(self, models):
        model = models["sl2-borel"]
        assert ce_differential(model, CochainElem.eta(0, 1)) == CochainElem.zero(0)
        assert ce_differential(model, CochainElem.eta(0, 2)) == CochainElem.eta(0, 1, 2) * -2

    def test_foliation_is_leafwise_de_rham(self, models):
        model = models["foliation-chart"]
        f = CochainElem.scalar(2, parse_poly("x1^2*x2 + x2^3", 2))
        assert ce_differential(model, f) == CochainElem.eta(2, 1) * parse_poly("2*x1*x2", 2)


class TestConnections:
    def test_default_is_admissible(self, models):
        for model in models.values():
            assert connection_violations(model, default_connection(model)) == []

    @pytest.mark.parametrize("seed", range(5))
    def test_random_tables_are_admissible(self, models, seed):
        for model in models.values():
            table = random_connection(model, seed, vertical=bool(seed % 2))
            assert connection_violations(model, table) == []
            assert extended_connection(model, table) is table

    def test_random_tables_are_reproducible(self, models):
        model = models["sl2-borel"]
        assert random_connection(model, 4) == random_connection(model, 4)

    def test_bott_extension_enforced(self, models):
        model = models["dim2-nonabelian"]
        table = ConnectionTable(0, {(1, 2, 2): const(5)})
        with pytest.raises(ConnectionTableError) as info:
            extended_connection(model, table)
        assert info.value.violations[0]['invariant'] == 'bott-extension'

    def test_b_slots_cannot_leak_into_a(self, models):
        model = models["dim2-nonabelian"]
        table = ConnectionTable(0, {(1, 2, 2): const(1), (2, 2, 1): const(1)})
        assert [v['invariant'] for v in connection_violations(model, table)] == ['splitting-compatibility']


class TestInducedModules:
    def test_module_sizes(self, models):
        model = models["sl2-borel"]
        assert len(bott_module(model, "B")) == 1
        assert len(bott_module(model, "dual-B-End-B")) == 1
        assert len(bott_module(model, "wedge0-dual-B")) == 1
        assert len(bott_module(model, "wedge2-dual-B")) == 0

    def test_unknown_tag(self, models):
        with pytest.raises(UnknownModuleTagError):
            bott_module(models["abelian"], "wedge-B")

    @pytest.mark.parametrize("tag", ["B", "dual-B-End-B", "wedge1-dual-B"])
    @pytest.mark.parametrize("name", BUNDLED)
    def test_bott_differential_squares_to_zero(self, models, name, tag):
        model = models[name]
        module, d_bott = bott_differential(model, tag)
        rng = np.random.default_rng(9)
        for p in range(model.r + 1):
            x = module.zero()
            for label in module.generators:
                x = x + module.basis(label).scale(random_cochain(rng, model.n, model.r, p))
            assert not d_bott(d_bott(x))

    def test_bott_differential_on_dim2(self, models):
        model = models["dim2-nonabelian"]
        b = ModuleElem.basis(0, ("b", 2))
        assert module_covariant_derivative(model, "B", b) == b.scale(CochainElem.eta(0, 1))
        dual = ModuleElem.basis(0, ("b*", 2))
        assert module_covariant_derivative(model, "dual-B", dual) == -dual.scale(CochainElem.eta(0, 1))


class TestConstructors:
    def test_point_pair_matches_file(self, models):
        built = make_point_pair(2, 1, {(1, 2, 2): 1}, name="dim2-nonabelian")
        assert built == models["dim2-nonabelian"]

    def test_action_matches_file(self, models):
        assert make_action(1, {}, [["x1"]], name="gl1-action") == models["gl1-action"]

    def test_foliation_matches_file(self, models):
        assert make_foliation(2, 1, name="foliation-chart") == models["foliation-chart"]

    def test_twisted_frame(self):
        model = make_foliation(2, 1, [["1", "x2"], ["0", "1"]], name="twisted")
        assert model.c_(1, 2, 2) == const(-1, 2)
        assert model.c_(2, 1, 2) == const(1, 2)

    def test_frame_without_polynomial_inverse(self):
        with pytest.raises(FrameInversionError):
            make_foliation(1, 1, [["x1"]])

    def test_action_must_be_a_morphism(self):
        with pytest.raises(ActionMorphismError):
            make_action(2, {}, [["1"], ["x1"]])

    @pytest.mark.parametrize("name", BUNDLED)
    def test_dict_round_trip(self, models, name):
        model = models[name]
        assert model_from_dict(model_to_dict(model)) == model
