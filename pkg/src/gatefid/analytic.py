"""First-order average-gate-fidelity budgets.

Every noise channel ``k`` contributes ``c_k * Gamma_k * tau`` to the
infidelity, where ``c_k`` is a time average of the per-instant fidelity
reduction evaluated on the Heisenberg-evolved jump operator.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .hilbert import SystemLayout, project_cmp, trace_cmp
from .propagator import HamiltonianSchedule, heisenberg_jump

IMAG_TOL = 1e-12
FIRST_ORDER_LIMIT = 0.1
FORMULAS = ("standard", "projected")


class NumericalConsistencyError(ArithmeticError):
    """A quantity that must be real or convergent was not."""


class FirstOrderValidityWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class NoiseChannel:
    """One Lindblad dissipator ``rate * convention * D[jump]``.

    ``convention`` maps the quoted physical rate onto the dissipator
    prefactor: 1 for relaxation, 1/2 for qubit ``sigma_z`` dephasing, 2 for
    the transmon ``|1><1| + 2|2><2|`` dephasing operator. ``sites`` lists the
    subsystems the jump acts on, when known.
    """

    label: str
    jump: np.ndarray
    rate: float = 0.0
    convention: float = 1.0
    sites: tuple[int, ...] | None = None
    kind: str = "custom"

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError(f"channel {self.label}: negative rate {self.rate}")
        if self.convention < 0:
            raise ValueError(f"channel {self.label}: negative rate convention {self.convention}")

    @property
    def effective_rate(self) -> float:
        return self.rate * self.convention

    def with_rate(self, rate: float) -> "NoiseChannel":
        return NoiseChannel(self.label, self.jump, float(rate), self.convention, self.sites, self.kind)


@dataclass(frozen=True)
class QuadratureSpec:
    method: str = "simpson"
    abs_tol: float = 1e-10
    order: int = 20
    max_subdivisions: int = 60

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise ValueError("abs_tol must be positive")
        if self.method not in ("simpson", "gauss"):
            raise ValueError(f"unknown quadrature method {self.method!r}")


@dataclass
class BudgetEntry:
    label: str
    coefficient: float
    rate: float
    convention: float
    contribution: float
    error_estimate: float = 0.0


@dataclass
class FidelityBudget:
    tau: float
    entries: list[BudgetEntry] = field(default_factory=list)

    @property
    def infidelity(self) -> float:
        return float(sum(e.contribution for e in self.entries))

    @property
    def fidelity(self) -> float:
        return 1.0 - self.infidelity

    @property
    def quadrature_error_estimate(self) -> float:
        return float(sum(e.error_estimate for e in self.entries))

    def coefficients(self) -> dict[str, float]:
        return {e.label: e.coefficient for e in self.entries}

    def __getitem__(self, label: str) -> BudgetEntry:
        for e in self.entries:
            if e.label == label:
                return e
        raise KeyError(label)


def _real(value: complex, scale: float = 1.0) -> float:
    if abs(value.imag) > IMAG_TOL * max(1.0, scale):
        raise NumericalConsistencyError(f"imaginary residue {value.imag:.3e} in fidelity reduction")
    return float(value.real)


def _cmp_parts(lt: np.ndarray, layout: SystemLayout) -> tuple[complex, float]:
    lt = layout.check_operator(lt)
    idx = layout.cmp_indices
    tr = complex(np.sum(lt[idx, idx]))
    # Tr_cmp[L^† L] sums |L_kc|^2 over the full space k, computational c only
    tr_ll = float(np.sum(np.abs(lt[:, idx]) ** 2))
    return tr, tr_ll


def delta_f(lt: np.ndarray, layout: SystemLayout) -> float:
    """Instantaneous fidelity reduction for a (Heisenberg-evolved) jump operator.

    ``Tr_cmp[L^†] Tr_cmp[L] / (d(d+1)) - Tr_cmp[L^† L] / (d+1)`` with
    ``d = 2**N``; the product ``L^† L`` is formed on the full space before
    projecting. The result is never positive.
    """
    d = layout.cmp_dim
    tr, tr_ll = _cmp_parts(lt, layout)
    value = (np.conj(tr) * tr) / (d * (d + 1)) - tr_ll / (d + 1)
    return _real(complex(value), tr_ll)


def delta_f_projected(lt: np.ndarray, layout: SystemLayout) -> float:
    """Reduction with the jump term built from the subspace block ``A = P L P`` only.

    ``(|Tr A|^2 + Tr[A^† A]) / (d(d+1)) - Tr_cmp[L^† L] / d``. It coincides
    with :func:`delta_f` whenever ``L(t)`` maps computational states back
    into the subspace, and is the exact first-order term when it does not
    (e.g. decay into a level outside the subspace).
    """
    d = layout.cmp_dim
    tr, tr_ll = _cmp_parts(lt, layout)
    a = project_cmp(lt, layout)
    tr_aa = float(np.sum(np.abs(a) ** 2))
    value = (np.conj(tr) * tr + tr_aa) / (d * (d + 1)) - tr_ll / d
    return _real(complex(value), tr_ll)


def delta_f_subspace(jump: np.ndarray, layout: SystemLayout) -> float:
    """Time-independent reduction for gates that never leave the computational subspace.

    Only the subspace block of ``jump`` is used, the precondition being that
    the jump operator and the gate both keep the subspace invariant.
    """
    d = layout.cmp_dim
    p = project_cmp(jump, layout)
    tr = np.trace(p)
    tr_ll = float(np.real(np.trace(p.conj().T @ p)))
    return _real(complex(np.conj(tr) * tr / (d * (d + 1)) - tr_ll / (d + 1)), tr_ll)


def delta_f_parallel(lt_m: np.ndarray, layout_m: SystemLayout, n_total: int) -> float:
    """Reduction for a jump acting on an ``m``-qubit gate inside an ``N``-qubit register.

    The remaining ``N - m`` qubits run their own ideal gates, so the
    identity factor only contributes dimension weights.
    """
    m = layout_m.n_qubits
    if m > n_total:
        raise ValueError(f"subsystem has {m} qubits but register only {n_total}")
    d = 2**n_total
    dm = 2**m
    tr, tr_ll = _cmp_parts(lt_m, layout_m)
    value = d * (np.conj(tr) * tr) / (dm**2 * (d + 1)) - d * tr_ll / (dm * (d + 1))
    return _real(complex(value), tr_ll)


def delta_f_parallel_projected(lt_m: np.ndarray, layout_m: SystemLayout, n_total: int) -> float:
    """:func:`delta_f_projected` for ``L_m ⊗ 1`` inside an ``N``-qubit register."""
    m = layout_m.n_qubits
    if m > n_total:
        raise ValueError(f"subsystem has {m} qubits but register only {n_total}")
    d = 2**n_total
    dm = 2**m
    tr, tr_ll = _cmp_parts(lt_m, layout_m)
    tr_aa = float(np.sum(np.abs(project_cmp(lt_m, layout_m)) ** 2))
    value = (d * np.conj(tr) * tr / dm**2 + tr_aa / dm) / (d + 1) - tr_ll / dm
    return _real(complex(value), tr_ll)


def _simpson(f: Callable[[float], float], a: float, b: float, tol: float, depth: int) -> tuple[float, float]:
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = (b - a) * (fa + 4 * fm + fb) / 6
    total = 0.0
    err = 0.0
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    while stack:
        a, b, fa, fm, fb, whole, tol, lvl = stack.pop()
        m = 0.5 * (a + b)
        lm, rm = f(0.5 * (a + m)), f(0.5 * (m + b))
        left = (m - a) * (fa + 4 * lm + fm) / 6
        right = (b - m) * (fm + 4 * rm + fb) / 6
        delta = left + right - whole
        # force a couple of levels so a lucky coincidence on the coarse grid
        # cannot terminate the recursion
        if lvl >= 3 and (abs(delta) <= 15 * tol or lvl >= depth):
            if abs(delta) > 15 * tol:
                raise NumericalConsistencyError(
                    f"adaptive Simpson did not converge on [{a:.6g}, {b:.6g}]"
                )
            total += left + right + delta / 15
            err += abs(delta) / 15
        else:
            stack.append((a, m, fa, lm, fm, left, tol / 2, lvl + 1))
            stack.append((m, b, fm, rm, fb, right, tol / 2, lvl + 1))
    return total, err


def _gauss(f: Callable[[float], float], a: float, b: float, order: int) -> tuple[float, float]:
    def rule(n):
        x, w = np.polynomial.legendre.leggauss(n)
        xs = 0.5 * (b - a) * x + 0.5 * (a + b)
        return 0.5 * (b - a) * float(sum(wi * f(xi) for wi, xi in zip(w, xs)))

    hi = rule(order)
    lo = rule(max(order // 2, 2))
    return hi, abs(hi - lo)


def integrate(f: Callable[[float], float], breakpoints: Sequence[float], quad: QuadratureSpec) -> tuple[float, float]:
    """Integral of ``f`` over ``[breakpoints[0], breakpoints[-1]]``, panel-aligned at every breakpoint."""
    span = breakpoints[-1] - breakpoints[0]
    total = 0.0
    err = 0.0
    for a, b in zip(breakpoints[:-1], breakpoints[1:]):
        if quad.method == "gauss":
            v, e = _gauss(f, a, b, quad.order)
        else:
            v, e = _simpson(f, a, b, quad.abs_tol * (b - a) / span, quad.max_subdivisions)
        total += v
        err += e
    return total, err


def reduction_profile(schedule: HamiltonianSchedule, channel: NoiseChannel,
                      parallel: tuple[int, int] | None = None,
                      formula: str = "standard") -> Callable[[float], float]:
    """``t -> deltaF(L(t))`` for one channel on one schedule.

    ``formula="projected"`` switches to :func:`delta_f_projected`.
    """
    if formula not in FORMULAS:
        raise ValueError(f"unknown formula {formula!r}, expected one of {FORMULAS}")
    layout = schedule.layout
    jump = layout.check_operator(channel.jump, f"jump of {channel.label}")
    if parallel is None:
        f = delta_f if formula == "standard" else delta_f_projected
        return lambda t: f(heisenberg_jump(schedule, jump, t), layout)
    m, n_total = parallel
    if m != layout.n_qubits:
        raise ValueError(f"parallel context m={m} does not match schedule with {layout.n_qubits} qubits")
    f = delta_f_parallel if formula == "standard" else delta_f_parallel_projected
    return lambda t: f(heisenberg_jump(schedule, jump, t), layout, n_total)


def channel_coefficient(schedule: HamiltonianSchedule, channel: NoiseChannel,
                        quad: QuadratureSpec | None = None,
                        parallel: tuple[int, int] | None = None,
                        formula: str = "standard") -> tuple[float, float]:
    """Dimensionless coefficient ``c`` with contribution ``c * Gamma * tau``.

    Returns ``(c, error_estimate)``. The integral runs in units of the gate
    time so that ``quad.abs_tol`` bounds the error on ``c`` directly.
    """
    quad = quad or QuadratureSpec()
    tau = schedule.tau_total
    profile = reduction_profile(schedule, channel, parallel, formula)
    nodes = schedule.boundaries / tau
    value, err = integrate(lambda s: profile(min(s, 1.0) * tau), list(nodes), quad)
    if err > quad.abs_tol:
        raise NumericalConsistencyError(
            f"channel {channel.label}: quadrature error {err:.2e} exceeds {quad.abs_tol:.2e}"
        )
    c = -channel.convention * value
    # the integrand is non-positive, so c >= 0 up to quadrature noise
    if c < -10 * quad.abs_tol:
        raise NumericalConsistencyError(f"channel {channel.label}: negative coefficient {c}")
    return max(c, 0.0), channel.convention * err


def assemble_budget(schedule: HamiltonianSchedule, channels: Sequence[NoiseChannel],
                    quad: QuadratureSpec | None = None,
                    parallel: tuple[int, int] | None = None,
                    executor=None, formula: str = "standard") -> FidelityBudget:
    """Collect per-channel coefficients into a :class:`FidelityBudget`.

    Channels may be evaluated concurrently through ``executor`` (anything
    with a ``map`` method); the result keeps the input channel order.
    """
    tau = schedule.tau_total
    for ch in channels:
        if ch.rate * tau > FIRST_ORDER_LIMIT:
            warnings.warn(
                f"channel {ch.label}: Gamma*tau = {ch.rate * tau:.3g} > {FIRST_ORDER_LIMIT}; "
                "first-order expansion may be inaccurate",
                FirstOrderValidityWarning,
                stacklevel=2,
            )
    work = lambda ch: channel_coefficient(schedule, ch, quad, parallel, formula)  # noqa: E731
    results = list(executor.map(work, channels)) if executor is not None else [work(ch) for ch in channels]
    budget = FidelityBudget(tau)
    for ch, (c, err) in zip(channels, results):
        budget.entries.append(
            BudgetEntry(ch.label, c, ch.rate, ch.convention, c * ch.rate * tau, err * ch.rate * tau)
        )
    return budget


CZ_LABELS = ("gamma1_q1", "gamma1_q2", "gamma_phi_q1", "gamma_phi_q2")


def imperfect_cz_coefficients(lam: float, tau: float) -> dict[str, float]:
    """Closed-form coefficients of the transmon CZ for arbitrary swap strength ``lam``.

    The dephasing entries carry the factor 2 of the ``|1><1| + 2|2><2|``
    operator's rate convention.
    """
    if not (lam > 0 and tau > 0):
        raise ValueError("lam and tau must be positive")
    x = lam * tau
    s2 = math.sin(2 * x) / x
    s4 = math.sin(4 * x) / x
    return {
        "gamma1_q1": 0.5 - s2 / 20,
        "gamma1_q2": 0.3 + s2 / 20,
        "gamma_phi_q1": 2 * (61 / 160 - 7 * s2 / 80 - s4 / 640),
        "gamma_phi_q2": 2 * (29 / 160 + s2 / 80 - s4 / 640),
    }


def imperfect_cz_budget(lam: float, tau: float, rates: Mapping[str, float] | None = None) -> FidelityBudget:
    rates = dict(rates or {})
    unknown = set(rates) - set(CZ_LABELS)
    if unknown:
        raise KeyError(f"unknown CZ channels {sorted(unknown)}")
    conventions = {"gamma1_q1": 1.0, "gamma1_q2": 1.0, "gamma_phi_q1": 2.0, "gamma_phi_q2": 2.0}
    budget = FidelityBudget(tau)
    for label, c in imperfect_cz_coefficients(lam, tau).items():
        rate = float(rates.get(label, 0.0))
        budget.entries.append(BudgetEntry(label, c, rate, conventions[label], c * rate * tau))
    return budget
