"""Exact-dynamics reference: Lindblad integration and Haar-averaged fidelity.

Nothing here expands in the decay rates. The channel produced by the master
equation is tomographed on the computational dyads ``|i><j|`` and the
average over pure input states is done either exactly (second Haar moment)
or by Monte Carlo sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .hilbert import SystemLayout
from .propagator import HamiltonianSchedule

RNG_ALGORITHM = "PCG64"

# largest phase ||H|| h and dissipated weight sum(gamma) h taken per RK4 step;
# the interaction frame only has to resolve the motion of the jump operators
PHASE_STEP = 0.005
FRAME_PHASE_STEP = 0.05
DECAY_STEP = 1e-3
FRAMES = ("interaction", "lab")


class SolverError(ArithmeticError):
    pass


def validate_density(rho: np.ndarray, atol: float = 1e-10, check_trace: bool = True) -> np.ndarray:
    """Check Hermiticity, unit trace and positivity of a density matrix."""
    rho = np.asarray(rho, dtype=complex)
    if np.max(np.abs(rho - rho.conj().T)) > atol:
        raise ValueError("density matrix is not Hermitian")
    if check_trace and abs(np.trace(rho) - 1) > atol:
        raise ValueError(f"density matrix trace {np.trace(rho).real:.12f} != 1")
    if np.min(np.linalg.eigvalsh(rho)) < -atol:
        raise ValueError("density matrix has negative eigenvalues")
    return rho


def _dissipators(channels, layout: SystemLayout):
    jumps = []
    for ch in channels:
        jump = layout.check_operator(ch.jump, f"jump of {ch.label}")
        if ch.effective_rate > 0:
            jumps.append((ch.effective_rate, jump))
    return jumps


def _rhs(r, k, jumps):
    # k is the effective non-Hermitian generator, jumps carry sqrt(gamma)
    out = -1j * (k @ r - r @ k.conj().T)
    for l in jumps:
        out += l @ r @ l.conj().T
    return out


def _rk4_lab(rho, h_eff, jumps, dt, steps):
    scaled = [math.sqrt(g) * l for g, l in jumps]
    for _ in range(steps):
        k1 = _rhs(rho, h_eff, scaled)
        k2 = _rhs(rho + 0.5 * dt * k1, h_eff, scaled)
        k3 = _rhs(rho + 0.5 * dt * k2, h_eff, scaled)
        k4 = _rhs(rho + dt * k3, h_eff, scaled)
        rho = rho + (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
    return rho


def _rk4_frame(rho, w, v, u0, damp, jumps, dt, steps):
    # operators O_I(t) = U(t)^dag O U(t) with U(t0 + s) = v exp(-i w s) v^dag u0
    base = v.conj().T @ u0
    damp_e = v.conj().T @ damp @ v
    jumps_e = [math.sqrt(g) * (v.conj().T @ l @ v) for g, l in jumps]

    def ops(s):
        u = np.exp(-1j * w * s)[:, None] * base
        ud = u.conj().T
        k = -0.5j * (ud @ damp_e @ u)
        return k, [ud @ l @ u for l in jumps_e]

    cur = ops(0.0)
    for m in range(steps):
        mid = ops((m + 0.5) * dt)
        end = ops((m + 1) * dt)
        k1 = _rhs(rho, *cur)
        k2 = _rhs(rho + 0.5 * dt * k1, *mid)
        k3 = _rhs(rho + 0.5 * dt * k2, *mid)
        k4 = _rhs(rho + dt * k3, *end)
        rho = rho + (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        cur = end
    return rho


def _steps(h: np.ndarray, total_rate: float, duration: float, phase_step: float) -> int:
    norm = float(np.linalg.norm(h, 2))
    return max(1, math.ceil(norm * duration / phase_step), math.ceil(total_rate * duration / DECAY_STEP))


def _evolve(rho, schedule, jumps, refine: int, phase_step: float | None, frame: str):
    if frame not in FRAMES:
        raise ValueError(f"unknown frame {frame!r}, expected one of {FRAMES}")
    total_rate = sum(g for g, _ in jumps)
    damp = sum((g * (l.conj().T @ l) for g, l in jumps), np.zeros_like(schedule.target_gate))
    if frame == "lab":
        step = phase_step or PHASE_STEP
        for seg in schedule.segments:
            h = np.asarray(seg.generator, dtype=complex)
            steps = _steps(h, total_rate, seg.duration, step) * refine
            rho = _rk4_lab(rho, h - 0.5j * damp, jumps, seg.duration / steps, steps)
        return rho
    step = phase_step or FRAME_PHASE_STEP
    cache = schedule.cache
    for k, seg in enumerate(schedule.segments):
        w, v = cache.eig[k]
        steps = _steps(np.asarray(seg.generator), total_rate, seg.duration, step) * refine
        rho = _rk4_frame(rho, w, v, cache.starts[k], damp, jumps, seg.duration / steps, steps)
    u = cache.starts[-1]
    return u @ rho @ u.conj().T


def lindblad_evolve(rho0: np.ndarray, schedule: HamiltonianSchedule, channels: Sequence = (),
                    solver_tol: float = 1e-9, self_check: bool = True,
                    phase_step: float | None = None, frame: str = "interaction") -> np.ndarray:
    """Integrate the master equation from ``rho0`` over the whole schedule.

    ``rho0`` may carry leading batch axes. With ``self_check`` the run is
    repeated at half the step and the Richardson estimate of the RK4 error
    must stay below ``solver_tol``.

    ``frame="interaction"`` integrates in the frame of the noiseless
    propagator, so the step only has to resolve how fast the jump operators
    rotate; ``frame="lab"`` integrates the full generator directly.

    Raises
    ------
    SolverError
        If the step-halving estimate exceeds ``solver_tol``.
    """
    layout = schedule.layout
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape[-2:] != (layout.full_dim, layout.full_dim):
        raise ValueError(f"state shape {rho0.shape} does not match layout dim {layout.full_dim}")
    jumps = _dissipators(channels, layout)
    rho = _evolve(rho0, schedule, jumps, 1, phase_step, frame)
    if self_check:
        fine = _evolve(rho0, schedule, jumps, 2, phase_step, frame)
        err = float(np.max(np.abs(fine - rho))) * 16 / 15
        if err > solver_tol:
            raise SolverError(f"RK4 self-error {err:.2e} exceeds solver tolerance {solver_tol:.2e}")
        rho = fine
    return rho


@dataclass
class ChannelTomogram:
    """Images ``E(|i><j|)`` of the computational dyads, ``images[i, j]`` full-space."""

    layout: SystemLayout
    images: np.ndarray
    self_error: float = 0.0
    meta: dict = field(default_factory=dict)

    def apply(self, x_cmp: np.ndarray) -> np.ndarray:
        return np.einsum("ij,ijab->ab", np.asarray(x_cmp), self.images)


def _hermitian_dyads(layout: SystemLayout) -> tuple[np.ndarray, list]:
    d = layout.cmp_dim
    n = layout.full_dim
    idx = layout.cmp_indices
    states = []
    plan = []
    for i in range(d):
        for j in range(i, d):
            a, b = idx[i], idx[j]
            if i == j:
                m = np.zeros((n, n), dtype=complex)
                m[a, a] = 1.0
                plan.append((i, j, len(states), None))
                states.append(m)
            else:
                sym = np.zeros((n, n), dtype=complex)
                sym[a, b] = sym[b, a] = 0.5
                anti = np.zeros((n, n), dtype=complex)
                anti[a, b] = -0.5j
                anti[b, a] = 0.5j
                plan.append((i, j, len(states), len(states) + 1))
                states.extend([sym, anti])
    return np.array(states), plan


def channel_tomography(schedule: HamiltonianSchedule, channels: Sequence = (),
                       solver_tol: float = 1e-9, phase_step: float | None = None,
                       frame: str = "interaction") -> ChannelTomogram:
    """Evolve every computational dyad through the master equation.

    Off-diagonal dyads are split into the Hermitian pair
    ``(|i><j| + |j><i|)/2`` and ``(|i><j| - |j><i|)/(2i)`` so the integrator
    only ever propagates Hermitian matrices; the images are recombined by
    linearity.
    """
    layout = schedule.layout
    d = layout.cmp_dim
    n = layout.full_dim
    states, plan = _hermitian_dyads(layout)
    jumps = _dissipators(channels, layout)
    coarse = _evolve(states, schedule, jumps, 1, phase_step, frame)
    fine = _evolve(states, schedule, jumps, 2, phase_step, frame)
    err = float(np.max(np.abs(fine - coarse))) * 16 / 15
    if err > solver_tol:
        raise SolverError(f"RK4 self-error {err:.2e} exceeds solver tolerance {solver_tol:.2e}")
    images = np.empty((d, d, n, n), dtype=complex)
    for i, j, s, a in plan:
        if a is None:
            images[i, i] = fine[s]
        else:
            images[i, j] = fine[s] + 1j * fine[a]
            images[j, i] = fine[s] - 1j * fine[a]
    return ChannelTomogram(layout, images, err, {"frame": frame})


def product_tomogram(parts: Sequence[ChannelTomogram], layout: SystemLayout) -> ChannelTomogram:
    """Tomogram of a tensor product of independent channels on consecutive subsystem blocks."""
    images = parts[0].images
    for part in parts[1:]:
        da, na = images.shape[0], images.shape[2]
        db, nb = part.images.shape[0], part.images.shape[2]
        images = np.einsum("ijab,klcd->ikjlacbd", images, part.images).reshape(
            da * db, da * db, na * nb, na * nb
        )
    if images.shape[0] != layout.cmp_dim or images.shape[2] != layout.full_dim:
        raise ValueError("component tomograms do not tile the layout")
    return ChannelTomogram(layout, images, float(sum(p.self_error for p in parts)))


def _gate_frame(tomogram: ChannelTomogram, u_g: np.ndarray) -> np.ndarray:
    """``E'(|i><j|)[a, b] = <a| U_g^† E(|i><j|) U_g |b>`` on the subspace."""
    layout = tomogram.layout
    v = layout.check_operator(u_g, "ideal gate")[:, layout.cmp_indices]
    return np.einsum("ka,ijkl,lb->ijab", v.conj(), tomogram.images, v)


def haar_average_fidelity(tomogram: ChannelTomogram, u_g: np.ndarray) -> float:
    """Average gate fidelity over Haar-random subspace inputs from the second-moment identity."""
    d = tomogram.layout.cmp_dim
    if tomogram.images.shape[:2] != (d, d):
        raise ValueError("incomplete tomogram")
    e = _gate_frame(tomogram, u_g)
    first = np.einsum("iikk->", e)
    second = np.einsum("ijij->", e)
    value = (first + second) / (d * (d + 1))
    if abs(value.imag) > 1e-10:
        raise ArithmeticError(f"fidelity has imaginary part {value.imag:.2e}")
    return float(value.real)


def haar_states(d: int, n_samples: int, rng: np.random.Generator) -> np.ndarray:
    psi = rng.standard_normal((n_samples, d)) + 1j * rng.standard_normal((n_samples, d))
    return psi / np.linalg.norm(psi, axis=1, keepdims=True)


def haar_mc_fidelity(schedule: HamiltonianSchedule, channels: Sequence, u_g: np.ndarray,
                     n_samples: int, seed: int, tomogram: ChannelTomogram | None = None,
                     solver_tol: float = 1e-9) -> tuple[float, float]:
    """Monte Carlo estimate of the average gate fidelity and its standard error.

    Inputs are Haar-random subspace states; each is pushed through the
    channel by linearity over the dyad images.
    """
    if n_samples < 100:
        raise ValueError("need at least 100 samples")
    if tomogram is None:
        tomogram = channel_tomography(schedule, channels, solver_tol)
    rng = np.random.Generator(np.random.PCG64(seed))
    psi = haar_states(tomogram.layout.cmp_dim, n_samples, rng)
    e = _gate_frame(tomogram, u_g)
    samples = np.einsum("si,sj,sa,sb,ijab->s", psi, psi.conj(), psi.conj(), psi, e).real
    return float(samples.mean()), float(samples.std(ddof=1) / math.sqrt(n_samples))


@dataclass
class ScalingResult:
    scales: list[float]
    residuals: list[float]
    slope: float | None
    inconclusive: bool
    noise_floor: float


def residual_scaling_check(schedule: HamiltonianSchedule, channels: Sequence, u_g: np.ndarray,
                           scales: Sequence[float], analytic_infidelity: float | None = None,
                           solver_tol: float = 1e-10,
                           tomography: Callable[[Sequence], ChannelTomogram] | None = None,
                           noise_floor: float | None = None) -> ScalingResult:
    """Log-log slope of ``|F_oracle - F_first_order|`` against a common rate multiplier.

    A second-order remainder gives slope 2. When every residual sits below
    the noise floor the result is flagged inconclusive and ``slope`` is None.
    """
    scales = [float(s) for s in scales]
    if len(set(scales)) < 3 or min(scales) <= 0:
        raise ValueError("need at least three distinct positive scales")
    tau = schedule.tau_total
    worst = max((ch.rate * tau for ch in channels), default=0.0) * max(scales)
    if worst > 0.05:
        raise ValueError(f"largest Gamma*tau = {worst:.3g} exceeds 0.05")
    if analytic_infidelity is None:
        from .analytic import assemble_budget

        analytic_infidelity = assemble_budget(schedule, channels).infidelity
    tomography = tomography or (lambda chs: channel_tomography(schedule, chs, solver_tol))
    residuals = []
    errs = []
    for s in scales:
        scaled = [ch.with_rate(ch.rate * s) for ch in channels]
        tomo = tomography(scaled)
        f_oracle = haar_average_fidelity(tomo, u_g)
        residuals.append(f_oracle - (1.0 - s * analytic_infidelity))
        errs.append(tomo.self_error)
    floor = noise_floor if noise_floor is not None else max(10 * max(errs), 1e-12)
    mags = np.abs(residuals)
    if np.any(mags <= floor):
        return ScalingResult(scales, residuals, None, True, floor)
    slope = float(np.polyfit(np.log(scales), np.log(mags), 1)[0])
    return ScalingResult(scales, residuals, slope, False, floor)
