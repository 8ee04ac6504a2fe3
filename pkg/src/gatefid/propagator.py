"""Unitary propagators of piecewise-constant Hamiltonian schedules.

Generators are given in angular-frequency units (rad/s), so ``hbar`` never
appears. Each segment is exponentiated once through its eigendecomposition
and later evaluations at arbitrary ``t`` only rescale phases.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .hilbert import SystemLayout, project_cmp

HERMITIAN_ATOL = 1e-12
UNITARY_ATOL = 1e-10
# channels of one budget are integrated on the same nodes, so U(t) is memoised
MEMO_SIZE = 4096


class ScheduleError(ValueError):
    pass


def expm_hermitian(h: np.ndarray, t: float) -> np.ndarray:
    """``exp(-i h t)`` for Hermitian ``h``."""
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * w * t)) @ v.conj().T


@dataclass(frozen=True)
class Segment:
    generator: np.ndarray
    duration: float


@dataclass(frozen=True, eq=False)
class HamiltonianSchedule:
    """Ordered constant-Hamiltonian segments plus the gate they should realise.

    Parameters
    ----------
    layout : SystemLayout
    segments : sequence of Segment
        ``generator`` in rad/s, ``duration`` in seconds.
    target_gate : ndarray
        Ideal full-space unitary ``U_g``.
    """

    layout: SystemLayout
    segments: tuple[Segment, ...]
    target_gate: np.ndarray

    def __post_init__(self):
        if not self.segments:
            raise ScheduleError("schedule needs at least one segment")
        n = self.layout.full_dim
        for k, seg in enumerate(self.segments):
            h = np.asarray(seg.generator)
            if h.shape != (n, n):
                raise ScheduleError(f"segment {k}: generator shape {h.shape}, expected ({n}, {n})")
            if np.max(np.abs(h - h.conj().T)) > HERMITIAN_ATOL * max(1.0, np.max(np.abs(h))):
                raise ScheduleError(f"segment {k}: generator is not Hermitian")
            if not seg.duration > 0:
                raise ScheduleError(f"segment {k}: duration must be positive")
        u = np.asarray(self.target_gate)
        if u.shape != (n, n):
            raise ScheduleError(f"target gate shape {u.shape}, expected ({n}, {n})")
        if np.max(np.abs(u.conj().T @ u - np.eye(n))) > UNITARY_ATOL:
            raise ScheduleError("target gate is not unitary")

    @property
    def tau_total(self) -> float:
        return float(sum(s.duration for s in self.segments))

    @property
    def boundaries(self) -> np.ndarray:
        """Segment start times followed by ``tau_total``."""
        return np.concatenate([[0.0], np.cumsum([s.duration for s in self.segments])])

    @cached_property
    def cache(self) -> "PropagatorCache":
        return PropagatorCache(self)


class PropagatorCache:
    """Segment eigendecompositions and the propagators at segment starts."""

    def __init__(self, schedule: HamiltonianSchedule):
        self.schedule = schedule
        self.eig = [np.linalg.eigh(np.asarray(s.generator, dtype=complex)) for s in schedule.segments]
        starts = [np.eye(schedule.layout.full_dim, dtype=complex)]
        for (w, v), seg in zip(self.eig, schedule.segments):
            starts.append(self._segment(w, v, seg.duration) @ starts[-1])
        self.starts = starts
        self.bounds = schedule.boundaries
        self._memo: dict[float, np.ndarray] = {}

    @staticmethod
    def _segment(w, v, dt):
        return (v * np.exp(-1j * w * dt)) @ v.conj().T

    def locate(self, t: float) -> tuple[int, float]:
        """Segment index holding ``t`` and the time elapsed inside it."""
        tau = self.bounds[-1]
        if t < 0 or t > tau * (1 + 1e-12):
            raise ScheduleError(f"t = {t} outside [0, {tau}]")
        k = int(np.searchsorted(self.bounds, t, side="right")) - 1
        k = min(max(k, 0), len(self.eig) - 1)
        return k, min(t - self.bounds[k], self.schedule.segments[k].duration)

    def at(self, t: float) -> np.ndarray:
        t = float(t)
        u = self._memo.get(t)
        if u is None:
            k, dt = self.locate(t)
            w, v = self.eig[k]
            u = self._segment(w, v, dt) @ self.starts[k]
            u.flags.writeable = False
            if len(self._memo) < MEMO_SIZE:
                self._memo[t] = u
        return u


def propagator_at(schedule: HamiltonianSchedule, t: float) -> np.ndarray:
    """``U(t)`` as the time-ordered product of segment exponentials."""
    return schedule.cache.at(t)


def heisenberg_jump(schedule: HamiltonianSchedule, jump: np.ndarray, t: float) -> np.ndarray:
    """Heisenberg-picture jump operator ``U(t)^† L U(t)``."""
    u = propagator_at(schedule, t)
    return u.conj().T @ np.asarray(jump, dtype=complex) @ u


def quotient_phases(u: np.ndarray, target: np.ndarray, convention: str, layout: SystemLayout) -> np.ndarray:
    """Rephase ``target`` (subspace block) to best match ``u`` under a phase convention.

    ``"none"`` leaves it alone, ``"global"`` removes one overall phase and
    ``"local_z"`` additionally removes one phase per qubit on its |1> level.
    """
    if convention == "none":
        return target
    d = layout.cmp_dim
    if convention == "global":
        ov = np.trace(target.conj().T @ u)
        return target * (ov / abs(ov) if abs(ov) > 0 else 1.0)
    if convention == "local_z":
        n = layout.n_qubits
        diag_u = np.diag(u)
        diag_t = np.diag(target)
        ref = diag_u[0] / diag_t[0]
        phases = []
        for q in range(n):
            i = 1 << (n - 1 - q)
            z = (diag_u[i] / diag_t[i]) / ref
            phases.append(z / abs(z))
        corr = np.ones(d, dtype=complex) * ref / abs(ref)
        for i in range(d):
            for q in range(n):
                if (i >> (n - 1 - q)) & 1:
                    corr[i] *= phases[q]
        return corr[:, None] * target
    raise ScheduleError(f"unknown phase convention {convention!r}")


def ideal_gate_check(schedule: HamiltonianSchedule, phase_convention: str = "none") -> float:
    """Max-norm distance between ``P U(tau) P`` and ``P U_g P`` after phase quotienting."""
    layout = schedule.layout
    u = project_cmp(propagator_at(schedule, schedule.tau_total), layout)
    target = project_cmp(schedule.target_gate, layout)
    target = quotient_phases(u, target, phase_convention, layout)
    return float(np.max(np.abs(u - target)))


def piecewise(layout: SystemLayout, generators: Sequence[np.ndarray], durations: Sequence[float],
              target_gate: np.ndarray) -> HamiltonianSchedule:
    segs = tuple(Segment(np.asarray(h, dtype=complex), float(dt)) for h, dt in zip(generators, durations))
    return HamiltonianSchedule(layout, segs, np.asarray(target_gate, dtype=complex))
