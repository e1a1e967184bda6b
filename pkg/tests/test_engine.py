import csv
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from superiorization.engine import (AuditError, FeasibilityProblem, NonascentOracle, OracleContractError,
                                    Perturbation, Schedule, ZeroOracle, audit_perturbations, epsilon_output,
                                    eta, superiorize)
from superiorization.image import total_variation


def identity(u):
    return u


class Halving:
    """Feasibility operator pulling toward the origin; proximity is the norm."""

    def __call__(self, u):
        return 0.5 * u

    @staticmethod
    def proximity(u):
        return float(np.linalg.norm(u))


class BadOracle(NonascentOracle):
    def __init__(self, scale=1.0, sign=1.0):
        self.scale, self.sign = scale, sign

    def target(self, y):
        return float(np.sum(y))

    def direction(self, y, delta):
        return np.full_like(y, self.sign * self.scale * delta)


def test_eta_values():
    s = Schedule(0.2, 0.995, 10)
    assert eta(s, 0) == pytest.approx(0.2)
    assert eta(s, 1) == pytest.approx(0.199)
    assert eta(Schedule(1.0, 0.5, 1), 3) == 0.125
    with pytest.raises(ValueError):
        s.eta(-1)


def test_schedule_total_and_decrease():
    s = Schedule(0.2, 0.995, 10)
    assert s.total == pytest.approx(40.0)
    assert all(s.eta(l + 1) < s.eta(l) for l in range(100))
    assert math.fsum(s.eta(l) for l in range(2000)) < s.total


@pytest.mark.parametrize("kwargs", [dict(kernel=1.0), dict(kernel=0.0), dict(eta0=0.0), dict(nk=0), dict(nk=[3, 0])])
def test_schedule_validation(kwargs):
    with pytest.raises(ValueError):
        Schedule(**kwargs)


def test_immediate_epsilon_output():
    y0 = np.arange(4.0)
    problem = FeasibilityProblem(identity, lambda u: 0.0, 1.0)
    y, trace = superiorize(problem, ZeroOracle(), Schedule(), y0, max_iter=10)
    np.testing.assert_array_equal(y, y0)
    assert trace.iterations == 0 and trace.terminated and trace.reason == "epsilon-output"


def test_ell_advances_once_per_inner_step():
    problem = FeasibilityProblem(identity, lambda u: 5.0, 1.0)
    y, trace = superiorize(problem, ZeroOracle(), Schedule(nk=2), np.zeros(4), max_iter=2)
    assert [r.ell_entry for r in trace.records] == [0, 2]
    assert trace.ell_final == 4
    assert all(len(r.inner_norms) == 2 for r in trace.records)
    assert not trace.terminated and trace.reason == "max_iter"


def test_schedule_consumption_with_varying_nk():
    problem = FeasibilityProblem(identity, lambda u: 5.0, 1.0)
    _, trace = superiorize(problem, ZeroOracle(), Schedule(nk=[1, 3, 2]), np.zeros(4), max_iter=5)
    assert [r.ell_entry for r in trace.records] == [0, 1, 4, 6, 8]
    assert trace.ell_final == 10


def test_converges_and_stops_at_first_feasible_iterate():
    op = Halving()
    problem = FeasibilityProblem(op, op.proximity, 1e-3)
    y, trace = superiorize(problem, ZeroOracle(), Schedule(), np.ones(4), max_iter=100)
    seq = trace.prox_sequence
    assert trace.terminated
    assert epsilon_output(seq, 1e-3) == len(seq) - 1 == trace.iterations
    assert op.proximity(y) <= 1e-3


def test_strict_rejects_oversized_step():
    op = Halving()
    problem = FeasibilityProblem(op, op.proximity, 1e-3)
    with pytest.raises(OracleContractError) as err:
        superiorize(problem, BadOracle(scale=1.0, sign=-1.0), Schedule(), np.ones(4))
    assert (err.value.k, err.value.n) == (0, 0)


def test_strict_rejects_ascent():
    op = Halving()
    problem = FeasibilityProblem(op, op.proximity, 1e-3)
    with pytest.raises(OracleContractError):
        superiorize(problem, BadOracle(scale=0.1, sign=1.0), Schedule(), np.ones(4))
    # the same oracle passes unchecked
    _, trace = superiorize(problem, BadOracle(scale=0.1, sign=1.0), Schedule(), np.ones(4), strict=False)
    assert trace.terminated


def test_max_iter_must_be_positive():
    problem = FeasibilityProblem(identity, lambda u: 5.0, 1.0)
    with pytest.raises(ValueError):
        superiorize(problem, ZeroOracle(), Schedule(), np.zeros(2), max_iter=0)


def test_epsilon_output_examples():
    assert epsilon_output([5, 3, 1.2, 0.9, 0.5], 1) == 3
    assert epsilon_output([0.5, 2, 3], 1) == 0
    assert epsilon_output([5, 4, 3], 1) is None


@given(st.lists(st.floats(0, 10), min_size=1, max_size=50), st.floats(0.01, 10))
def test_epsilon_output_is_first_and_unique(seq, eps):
    K = epsilon_output(seq, eps)
    below = [k for k, v in enumerate(seq) if v <= eps]
    if K is None:
        assert not below
    else:
        assert seq[K] <= eps and all(v > eps for v in seq[:K])
        assert K == below[0]


def test_audit_zero_perturbations():
    problem = FeasibilityProblem(identity, lambda u: 5.0, 1.0)
    _, trace = superiorize(problem, ZeroOracle(), Schedule(), np.zeros(4), max_iter=3)
    report = audit_perturbations(trace, Schedule())
    assert report.passed
    assert report.betas == [0.0] * 3 and report.vk_norms == [0.0] * 3
    assert report.summability_bound == pytest.approx(40.0)


class FullStep(NonascentOracle):
    def target(self, y):
        return 0.0

    def direction(self, y, delta):
        d = np.zeros_like(y)
        d[0] = delta
        return d


def test_audit_full_steps_and_vk_bound():
    schedule = Schedule(0.2, 0.995, 10)
    op = Halving()
    problem = FeasibilityProblem(op, lambda u: 5.0, 1.0)
    _, trace = superiorize(problem, FullStep(), schedule, np.zeros(3), max_iter=50)
    report = audit_perturbations(trace, schedule)
    assert report.passed, report.describe()
    for r, beta, vk in zip(trace.records, report.betas, report.vk_norms):
        assert beta == pytest.approx(schedule.eta(r.ell_entry))
        # parallel steps of decreasing size: |v^k| = sum eta / eta_max, just below N_k
        assert 9.0 < vk <= 10.0


class Oversized(FullStep):
    def perturb(self, y, schedule, ell):
        d = self.direction(y, 2 * schedule.eta(ell))
        return Perturbation(d, ell + 1, 2 * schedule.eta(ell))


def test_audit_flags_oversized_betas():
    schedule = Schedule(0.2, 0.995, 10)
    problem = FeasibilityProblem(identity, lambda u: 5.0, 1.0)
    _, trace = superiorize(problem, Oversized(), schedule, np.zeros(3), max_iter=4)
    report = audit_perturbations(trace, schedule)
    assert not report.passed
    assert report.beta_violations == [0, 1, 2, 3]
    with pytest.raises(AuditError):
        audit_perturbations(trace, schedule, raise_on_failure=True)


def test_trace_csv(tmp_path):
    op = Halving()
    problem = FeasibilityProblem(op, op.proximity, 0.1)
    _, trace = superiorize(problem, ZeroOracle(total_variation), Schedule(), np.ones(4), max_iter=20)
    path = tmp_path / "trace.csv"
    trace.to_csv(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["k", "prox", "phi", "ell_entry", "beta_k", "vk_norm", "time_s"]
    assert len(rows) == trace.iterations + 1
    assert [int(r[0]) for r in rows[1:]] == list(range(trace.iterations))
    assert float(rows[1][1]) == trace.initial_prox
