"""
Tests for Sobol constraints and their compilation into solver balls
"""
import numpy as np
import pytest
from hypothesis import given, settings as hyp_settings, strategies as st
from numpy.testing import assert_allclose
from pydantic import ValidationError

from app.errors import InvalidConstraintError
from app.services.coeff_model import CoeffVector, basis_positions
from app.services.constraints import (
    SobolConstraint,
    compile_constraints,
    experiment_preset,
    is_feasible,
    sobol,
    total_family,
)
from app.services.legendre_basis import BasisConfig

subsets_of_three = st.sets(st.integers(min_value=1, max_value=3), min_size=1).map(lambda s: tuple(sorted(s)))
constraint_strategy = st.builds(
    SobolConstraint,
    family=st.lists(subsets_of_three, min_size=1, max_size=3),
    bound=st.one_of(st.just(0.0), st.floats(min_value=0.01, max_value=1.0)),
)


class TestSobolConstraint:
    def test_family_normalized(self):
        c = SobolConstraint(family=[[3, 1], [2], [1, 3]], bound=0.5)
        assert c.family == ((2,), (1, 3))

    @pytest.mark.parametrize("family, bound", [
        ([], 0.5),
        ([[]], 0.5),
        ([[0, 1]], 0.5),
        ([[1]], 1.5),
        ([[1]], -0.1),
        ([1, 3], 0.5),
        ([[1, "a"]], 0.5),
    ])
    def test_invalid(self, family, bound):
        with pytest.raises(ValidationError):
            SobolConstraint(family=family, bound=bound)

    def test_elimination_flag(self):
        assert sobol([1, 3], bound=0.0).is_elimination
        assert not sobol([1], bound=0.42).is_elimination


class TestCompile:
    def test_no_constraints(self, cfg3):
        cc = compile_constraints([], cfg3)
        assert cc.eliminated == frozenset()
        assert cc.balls == []
        assert cc.variance_ball.radius_sq == 1.0
        assert_allclose(cc.variance_ball.positions, np.arange(1, 125))

    def test_eliminations(self, cfg3):
        cc = compile_constraints(experiment_preset("D"), cfg3)
        assert len(cc.eliminated) == 80
        positions = basis_positions(cfg3)
        assert positions[(1, 0, 1)] in cc.eliminated
        assert positions[(2, 3, 4)] in cc.eliminated
        assert positions[(1, 1, 0)] not in cc.eliminated
        assert cc.variance_ball.positions.size == 124 - 80
        assert cc.surviving.size == 45

    def test_single_ball(self, cfg3):
        cc = compile_constraints([sobol([3], bound=0.004)], cfg3)
        (ball,) = cc.balls
        assert_allclose(ball.positions, [1, 2, 3, 4])
        assert ball.radius_sq == 0.004

    def test_overlapping_families_stay_separate(self, cfg3):
        cc = compile_constraints(experiment_preset("B"), cfg3)
        assert len(cc.balls) == 6
        assert len(cc.all_balls) == 7

    def test_ball_positions_exclude_eliminated(self, cfg3):
        cc = compile_constraints(experiment_preset("C"), cfg3)
        for ball in cc.all_balls:
            assert not set(ball.positions.tolist()) & cc.eliminated

    def test_fully_eliminated_family_drops_ball(self, cfg3):
        cc = compile_constraints([sobol([1, 3], bound=0.0), sobol([1, 3], bound=0.5)], cfg3)
        assert cc.balls == []

    def test_out_of_range_subset(self, cfg3):
        with pytest.raises(InvalidConstraintError):
            compile_constraints([sobol([4], bound=0.1)], cfg3)

    @hyp_settings(max_examples=40, deadline=None)
    @given(st.lists(constraint_strategy, max_size=5))
    def test_idempotent(self, constraints):
        cfg = BasisConfig(d=3, D=2)
        assert compile_constraints(constraints, cfg) == compile_constraints(list(constraints), cfg)


class TestFeasibility:
    def test_ball_tolerance(self, cfg3):
        cc = compile_constraints([sobol([1], bound=0.25)], cfg3)
        inside = CoeffVector.from_terms(cfg3, {(1, 0, 0): 0.5})
        outside = CoeffVector.from_terms(cfg3, {(1, 0, 0): 0.5 + 1e-6})
        assert is_feasible(inside, cc)
        assert not is_feasible(outside, cc)

    def test_elimination_tolerance(self, cfg3):
        cc = compile_constraints(experiment_preset("D"), cfg3)
        assert is_feasible(CoeffVector.from_terms(cfg3, {(1, 0, 1): 1e-13}), cc)
        assert not is_feasible(CoeffVector.from_terms(cfg3, {(1, 0, 1): 1e-6}), cc)

    def test_constant_is_unconstrained(self, cfg3):
        cc = compile_constraints(experiment_preset("C"), cfg3)
        assert is_feasible(CoeffVector.from_terms(cfg3, {(0, 0, 0): 1e6}), cc)

    def test_nesting(self, cfg3, rng):
        """Feasible for C1 and C2 together implies feasible for C1 alone"""
        c1 = experiment_preset("B")
        c2 = experiment_preset("D")
        union = compile_constraints(c1 + c2, cfg3)
        alone = compile_constraints(c1, cfg3)
        eliminated = np.array(sorted(union.eliminated))
        checked = 0
        for _ in range(500):
            a = rng.normal(size=cfg3.size) * rng.uniform(0.0, 0.04)
            a[eliminated] = 0.0
            a = CoeffVector(a, cfg3)
            if is_feasible(a, union):
                checked += 1
                assert is_feasible(a, alone)
        assert checked > 20


class TestPresets:
    def test_a(self):
        assert experiment_preset("A") == []

    def test_b(self):
        b = experiment_preset("B")
        assert sobol([1], bound=0.42) in b
        assert sobol([3], [1, 3], [2, 3], bound=0.06) in b
        assert len(b) == 6

    def test_c_adds_eliminations(self):
        c = experiment_preset("c")
        assert c[:6] == experiment_preset("B")
        assert sobol([1, 3], bound=0.0) in c
        assert sobol([1, 2, 3], bound=0.0) in c

    def test_unknown(self):
        with pytest.raises(InvalidConstraintError):
            experiment_preset("E")


class TestTotalFamily:
    def test_pairs_only(self):
        assert total_family(1, 3) == [(1,), (1, 2), (1, 3)]

    def test_full(self):
        assert total_family(2, 3, pairs_only=False) == [(2,), (1, 2), (2, 3), (1, 2, 3)]

    def test_single_variable(self):
        assert total_family(1, 1) == [(1,)]
