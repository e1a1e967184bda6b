"""Superiorized version of a feasibility-seeking basic algorithm.

The engine interlaces nonascent perturbations, drawn from a pluggable
oracle, with a pluggable feasibility-seeking operator.  It only ever queries
target-function *values* (through the oracle), never derivatives.
"""
from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence, Union

import numpy as np

logger = logging.getLogger(__name__)


class OracleContractError(RuntimeError):
    """A perturbation left the nonascending ball it was drawn from."""

    def __init__(self, k: int, n: int, message: str):
        super().__init__(f"outer iteration k={k}, inner step n={n}: {message}")
        self.k = k
        self.n = n


class AuditError(AssertionError):
    """The recorded perturbations violate a summability/boundedness bound."""

    def __init__(self, report: "AuditReport"):
        super().__init__(report.describe())
        self.report = report


@dataclass(frozen=True)
class Schedule:
    """Summable step sizes ``eta0 * kernel**ell`` and inner-loop counts.

    ``nk`` is either a single count used for every outer iteration or a
    sequence ``N_0, N_1, ...``; iterations past its end reuse the last entry,
    so ``max(nk)`` is the bound ``N``.
    """

    eta0: float = 0.2
    kernel: float = 0.995
    nk: Union[int, Sequence[int]] = 10

    def __post_init__(self):
        if not self.eta0 > 0:
            raise ValueError(f"eta0 must be positive, got {self.eta0!r}")
        if not 0 < self.kernel < 1:
            raise ValueError(f"kernel must lie in (0, 1), got {self.kernel!r}")
        counts = (self.nk,) if isinstance(self.nk, (int, np.integer)) else tuple(self.nk)
        if not counts or any(int(c) != c or c < 1 for c in counts):
            raise ValueError(f"inner-loop counts must be positive integers, got {self.nk!r}")
        object.__setattr__(self, "nk", counts[0] if len(counts) == 1 else tuple(int(c) for c in counts))

    def eta(self, ell: int) -> float:
        if ell < 0:
            raise ValueError(f"schedule index must be nonnegative, got {ell}")
        return self.eta0 * self.kernel ** ell

    def inner_steps(self, k: int) -> int:
        if isinstance(self.nk, tuple):
            return self.nk[min(k, len(self.nk) - 1)]
        return int(self.nk)

    @property
    def bound(self) -> int:
        return max(self.nk) if isinstance(self.nk, tuple) else int(self.nk)

    @property
    def total(self) -> float:
        """Sum of the whole step-size sequence."""
        return self.eta0 / (1.0 - self.kernel)


def eta(schedule: Schedule, ell: int) -> float:
    return schedule.eta(ell)


@dataclass(frozen=True)
class FeasibilityProblem:
    """Feasibility-seeking operator, proximity function and tolerance."""

    operator: Callable[[np.ndarray], np.ndarray]
    proximity: Callable[[np.ndarray], float]
    epsilon: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon!r}")


class Perturbation(NamedTuple):
    direction: np.ndarray
    next_ell: int
    # radius of the nonascending ball the direction was drawn from
    delta: float
    flag: Optional[str] = None


class NonascentOracle:
    """Supplies members of the nonascending ball ``{d : |d| <= delta, phi(y+d) <= phi(y)}``.

    Subclasses implement :meth:`target` and :meth:`direction`.  Oracles that
    need to consume extra schedule terms while searching (e.g. step halving)
    override :meth:`perturb` instead.
    """

    def target(self, y: np.ndarray) -> float:
        raise NotImplementedError

    def direction(self, y: np.ndarray, delta: float) -> np.ndarray:
        raise NotImplementedError

    def perturb(self, y: np.ndarray, schedule: Schedule, ell: int) -> Perturbation:
        delta = schedule.eta(ell)
        return Perturbation(self.direction(y, delta), ell + 1, delta)


class ZeroOracle(NonascentOracle):
    """Always returns the zero vector; turns the engine into the basic algorithm."""

    def __init__(self, target: Optional[Callable[[np.ndarray], float]] = None):
        self._target = target

    def target(self, y):
        return 0.0 if self._target is None else self._target(y)

    def direction(self, y, delta):
        return np.zeros_like(y)


@dataclass
class IterationRecord:
    k: int
    prox: float
    phi: float
    ell_entry: int
    inner_norms: list
    inner_deltas: list
    beta: float
    # norm of the aggregate v^k = sum_n v^{k,n} / beta
    vk_norm: float
    prox_out: float
    phi_out: float
    time_s: float


@dataclass
class RunTrace:
    records: list = field(default_factory=list)
    initial_prox: float = math.nan
    initial_phi: float = math.nan
    output: Optional[np.ndarray] = None
    terminated: bool = False
    reason: str = ""
    ell_final: int = 0
    flags: list = field(default_factory=list)
    strict: bool = False

    @property
    def iterations(self) -> int:
        return len(self.records)

    @property
    def final_prox(self) -> float:
        return self.records[-1].prox_out if self.records else self.initial_prox

    @property
    def final_phi(self) -> float:
        return self.records[-1].phi_out if self.records else self.initial_phi

    @property
    def prox_sequence(self) -> list:
        """Proximity of ``y^0, y^1, ...`` up to the output."""
        return [self.initial_prox] + [r.prox_out for r in self.records]

    def to_csv(self, path) -> None:
        """Write one row per outer iteration: ``k, prox, phi, ell_entry, beta_k, vk_norm, time_s``."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", "prox", "phi", "ell_entry", "beta_k", "vk_norm", "time_s"])
            for r in self.records:
                writer.writerow([r.k, repr(r.prox), repr(r.phi), r.ell_entry,
                                 repr(r.beta), repr(r.vk_norm), repr(r.time_s)])


def superiorize(problem: FeasibilityProblem, oracle: NonascentOracle, schedule: Schedule,
                y0, max_iter: int = 5000, strict: bool = True):
    """Run the superiorized basic algorithm from ``y0``.

    Each outer iteration first tests ``prox(y^k) <= epsilon``; otherwise it
    takes ``N_k`` perturbation steps from the oracle, advancing the schedule
    index once per step, and then applies the feasibility operator once.

    With ``strict`` on, every perturbation is checked for membership in its
    nonascending ball and for ``phi(y^{k,n}) <= phi(y^k)``; any failure raises
    :class:`OracleContractError`.

    Returns the final vector and a :class:`RunTrace`.  Hitting ``max_iter``
    is reported through ``trace.terminated = False``, not raised.
    """
    if max_iter < 1:
        raise ValueError(f"max_iter must be at least 1, got {max_iter}")
    y = np.array(y0, dtype=np.float64)
    trace = RunTrace(strict=strict)
    ell = 0
    start = time.perf_counter()

    prox = float(problem.proximity(y))
    phi = float(oracle.target(y))
    trace.initial_prox, trace.initial_phi = prox, phi

    k = 0
    while prox > problem.epsilon:
        if k >= max_iter:
            trace.reason = "max_iter"
            break
        ell_entry = ell
        phi_current = phi
        v_sum = np.zeros_like(y)
        norms, deltas = [], []
        for n in range(schedule.inner_steps(k)):
            step = oracle.perturb(y, schedule, ell)
            d = step.direction
            if step.flag:
                trace.flags.append((k, n, step.flag))
                logger.warning("k=%d n=%d: %s", k, n, step.flag)
            norm = float(np.linalg.norm(d))
            y_next = y + d
            if strict:
                if norm > step.delta:
                    raise OracleContractError(k, n, f"|v| = {norm!r} exceeds delta = {step.delta!r}")
                phi_next = float(oracle.target(y_next))
                if phi_next > phi_current:
                    raise OracleContractError(k, n, f"phi rose from {phi_current!r} to {phi_next!r}")
                if phi_next > phi:
                    raise OracleContractError(k, n, f"phi(y^(k,n)) = {phi_next!r} > phi(y^k) = {phi!r}")
                phi_current = phi_next
            norms.append(norm)
            deltas.append(step.delta)
            v_sum += d
            y = y_next
            ell = step.next_ell
        beta = max(norms) if norms else 0.0
        vk_norm = float(np.linalg.norm(v_sum)) / beta if beta > 0 else 0.0

        y = problem.operator(y)
        k += 1
        prox_in, phi_in = prox, phi
        prox = float(problem.proximity(y))
        phi = float(oracle.target(y))
        trace.records.append(IterationRecord(
            k=k - 1, prox=prox_in, phi=phi_in, ell_entry=ell_entry,
            inner_norms=norms, inner_deltas=deltas, beta=beta, vk_norm=vk_norm,
            prox_out=prox, phi_out=phi, time_s=time.perf_counter() - start,
        ))
    else:
        trace.terminated = True
        trace.reason = "epsilon-output"

    trace.output = y
    trace.ell_final = ell
    return y, trace


def epsilon_output(prox_sequence, epsilon: float) -> Optional[int]:
    """Index of the first entry ``<= epsilon``, or ``None`` if there is none."""
    for index, value in enumerate(prox_sequence):
        if value <= epsilon:
            return index
    return None


@dataclass
class AuditReport:
    betas: list
    vk_norms: list
    beta_sum: float
    summability_bound: float
    beta_violations: list
    boundedness_violations: list
    summable: bool

    @property
    def passed(self) -> bool:
        return self.summable and not self.beta_violations and not self.boundedness_violations

    def describe(self) -> str:
        if self.passed:
            return (f"audit passed: sum(beta) = {self.beta_sum:.6g} "
                    f"<= {self.summability_bound:.6g}")
        parts = []
        if not self.summable:
            parts.append(f"sum(beta) = {self.beta_sum!r} exceeds {self.summability_bound!r}")
        if self.beta_violations:
            parts.append(f"beta_k > eta(ell_k) at k = {self.beta_violations}")
        if self.boundedness_violations:
            parts.append(f"|v^k| > N_k at k = {self.boundedness_violations}")
        return "audit failed: " + "; ".join(parts)


def audit_perturbations(trace: RunTrace, schedule: Schedule, raise_on_failure: bool = False) -> AuditReport:
    """Rebuild ``beta_k`` and ``|v^k|`` from a trace and check the resilience bounds.

    Checks that ``beta_k <= eta(ell_k)`` at each iteration's entry index,
    that ``sum_k beta_k`` stays below the schedule total ``eta0 / (1 - a)``
    and that ``|v^k| <= N_k``.
    """
    betas, vk_norms = [], []
    beta_violations, bounded_violations = [], []
    for r in trace.records:
        beta = max(r.inner_norms) if r.inner_norms else 0.0
        betas.append(beta)
        vk = r.vk_norm if beta > 0 else 0.0
        vk_norms.append(vk)
        if beta > schedule.eta(r.ell_entry):
            beta_violations.append(r.k)
        if vk > len(r.inner_norms) or vk > schedule.inner_steps(r.k):
            bounded_violations.append(r.k)
    beta_sum = math.fsum(betas)
    report = AuditReport(
        betas=betas, vk_norms=vk_norms, beta_sum=beta_sum,
        summability_bound=schedule.total,
        beta_violations=beta_violations, boundedness_violations=bounded_violations,
        summable=beta_sum <= schedule.total,
    )
    if raise_on_failure and not report.passed:
        raise AuditError(report)
    return report
