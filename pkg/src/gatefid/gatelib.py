"""Builtin gate models and the noise channels that go with them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.optimize import brentq

from .analytic import NoiseChannel
from .hilbert import SystemLayout, compose, embed, embed_sites, is_local, lift_cmp, reduce_to_sites, transition
from .liouville import ChannelTomogram, channel_tomography, product_tomogram
from .propagator import HamiltonianSchedule, Segment, expm_hermitian, ideal_gate_check, piecewise

# quoted protocol values for the two-pulse blockade gate
RYDBERG_DELTA_RATIO = 0.377371
RYDBERG_OMEGA_TAU = 4.29268
RYDBERG_XI = 3.90242


@dataclass(frozen=True, eq=False)
class GateModel:
    """A gate schedule together with its noise-channel templates (all rates zero)."""

    name: str
    schedule: HamiltonianSchedule
    phase_convention: str = "none"
    channel_templates: tuple[NoiseChannel, ...] = ()
    components: tuple["GateModel", ...] = ()
    params: dict = field(default_factory=dict)

    @property
    def layout(self) -> SystemLayout:
        return self.schedule.layout

    @property
    def ideal_gate(self) -> np.ndarray:
        return self.schedule.target_gate

    @property
    def tau(self) -> float:
        return self.schedule.tau_total

    @property
    def labels(self) -> list[str]:
        return [ch.label for ch in self.channel_templates]

    def channels(self, rates: Mapping[str, float] | None = None, **kw: float) -> list[NoiseChannel]:
        """Channel list with the given rates (1/s); unspecified channels get rate 0."""
        rates = {**(rates or {}), **kw}
        unknown = set(rates) - set(self.labels)
        if unknown:
            raise KeyError(f"model {self.name!r} has no channels {sorted(unknown)}; known: {self.labels}")
        return [ch.with_rate(rates.get(ch.label, 0.0)) for ch in self.channel_templates]

    def uniform_channels(self, gamma_tau: float) -> list[NoiseChannel]:
        """Every channel at the same dimensionless ``Gamma * tau``."""
        return self.channels({label: gamma_tau / self.tau for label in self.labels})

    def gate_check(self) -> float:
        return ideal_gate_check(self.schedule, self.phase_convention)


def _relaxation_op(dim: int) -> np.ndarray:
    # sum_k sqrt(k) |k-1><k|, i.e. sigma_01 + sqrt(2) sigma_12 for a transmon
    return np.diag(np.sqrt(np.arange(1, dim)), 1).astype(complex)


def _transmon_dephasing_op(dim: int) -> np.ndarray:
    return np.diag(np.arange(dim)).astype(complex)


def _sigma_z(dim: int) -> np.ndarray:
    op = np.zeros((dim, dim), dtype=complex)
    op[0, 0], op[1, 1] = 1.0, -1.0
    return op


def _channel(label, local, site, layout, convention, kind):
    return NoiseChannel(label, embed(local, site, layout), 0.0, convention, (site,), kind)


def qubit_relaxation(layout: SystemLayout, site: int) -> NoiseChannel:
    """``sigma^-_{01}`` on one subsystem, leaving any higher levels alone."""
    return _channel(f"gamma1_q{site + 1}", transition(layout.dims[site], 0, 1), site, layout, 1.0, "relaxation")


def qubit_dephasing(layout: SystemLayout, site: int) -> NoiseChannel:
    """``sigma_z`` with the 1/2 convention so coherences decay at ``Gamma_phi``."""
    return _channel(f"gamma_phi_q{site + 1}", _sigma_z(layout.dims[site]), site, layout, 0.5, "dephasing")


def transmon_noise(layout: SystemLayout, gamma1: Sequence[float] | None = None,
                   gamma_phi: Sequence[float] | None = None) -> list[NoiseChannel]:
    """Relaxation and dephasing on every subsystem.

    Three-or-more-level subsystems get ``sum sqrt(k)|k-1><k|`` (rate
    convention 1) and ``sum k|k><k|`` (convention 2). Two-level ones fall
    back to ``sigma^-`` and ``sigma_z`` (convention 1/2).
    """
    n = layout.n_qubits
    gamma1 = list(gamma1) if gamma1 is not None else [0.0] * n
    gamma_phi = list(gamma_phi) if gamma_phi is not None else [0.0] * n
    if len(gamma1) != n or len(gamma_phi) != n:
        raise ValueError(f"need {n} rates per channel type")
    relax, deph = [], []
    for q, dim in enumerate(layout.dims):
        if dim == 2:
            r, p = qubit_relaxation(layout, q), qubit_dephasing(layout, q)
        else:
            r = _channel(f"gamma1_q{q + 1}", _relaxation_op(dim), q, layout, 1.0, "relaxation")
            p = _channel(f"gamma_phi_q{q + 1}", _transmon_dephasing_op(dim), q, layout, 2.0, "dephasing")
        relax.append(r.with_rate(gamma1[q]))
        deph.append(p.with_rate(gamma_phi[q]))
    return relax + deph


def transmon_cz(lam: float | None = None, tau: float = 50e-9) -> GateModel:
    """CZ from a full |11> <-> |20> swap on two three-level transmons.

    ``lam`` defaults to ``pi / tau``; other values give a CZ with a coherent
    error, and the declared target stays the ideal CZ.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    lam = math.pi / tau if lam is None else float(lam)
    if not lam > 0:
        raise ValueError("lam must be positive")
    layout = compose([3, 3])
    a, b = layout.index((1, 1)), layout.index((2, 0))
    h = np.zeros((9, 9), dtype=complex)
    h[a, b] = h[b, a] = lam
    target = lift_cmp(np.diag([1, 1, 1, -1]), layout)
    schedule = piecewise(layout, [h], [tau], target)
    return GateModel("cz", schedule, "none", tuple(transmon_noise(layout)), params={"lam": lam, "tau": tau})


def iswap(g: float = 2 * math.pi * 5e6, tau: float | None = None) -> GateModel:
    """Two-qubit iSWAP, ``|01>, |10> -> i|10>, i|01>`` at ``g tau = pi/2``.

    The exchange term enters with a negative sign so the swapped states
    pick up ``+i``.
    """
    tau = math.pi / (2 * g) if tau is None else float(tau)
    layout = compose([2, 2])
    a, b = layout.index((0, 1)), layout.index((1, 0))
    h = np.zeros((4, 4), dtype=complex)
    h[a, b] = h[b, a] = -g
    target = np.array([[1, 0, 0, 0], [0, 0, 1j, 0], [0, 1j, 0, 0], [0, 0, 0, 1]], dtype=complex)
    schedule = piecewise(layout, [h], [tau], target)
    return GateModel("iswap", schedule, "none", tuple(transmon_noise(layout)), params={"g": g, "tau": tau})


def idle(n_qubits: int = 1, tau: float = 50e-9, dims: Sequence[int] | None = None) -> GateModel:
    """Zero-Hamiltonian idling on ``n_qubits`` subsystems."""
    layout = compose(dims or [2] * n_qubits)
    n = layout.full_dim
    schedule = piecewise(layout, [np.zeros((n, n))], [tau], np.eye(n))
    return GateModel("idle", schedule, "none", tuple(transmon_noise(layout)), params={"tau": tau})


def cczs(lam: float = 2 * math.pi * 10e6, phi: float = math.pi) -> GateModel:
    """Controlled-CZ-SWAP from two simultaneous swaps through the |2> level of qubit 1.

    Couplings ``lam`` on (|110>, |111>) <-> (|200>, |201>) and
    ``-lam exp(i phi)`` on (|101>, |111>) <-> (|200>, |210>), no detuning,
    gate time ``pi / (sqrt(2) lam)``.
    """
    if not lam > 0:
        raise ValueError("lam must be positive")
    tau = math.pi / (math.sqrt(2) * lam)
    layout = compose([3, 3, 3])
    lam2 = -lam * np.exp(1j * phi)
    h = np.zeros((27, 27), dtype=complex)
    for coupling, (u, v) in [
        (lam, ((1, 1, 0), (2, 0, 0))),
        (lam, ((1, 1, 1), (2, 0, 1))),
        (lam2, ((1, 0, 1), (2, 0, 0))),
        (lam2, ((1, 1, 1), (2, 1, 0))),
    ]:
        i, j = layout.index(u), layout.index(v)
        h[i, j] += coupling
        h[j, i] += np.conj(coupling)
    czs = np.array(
        [[1, 0, 0, 0],
         [0, 0, np.exp(1j * phi), 0],
         [0, np.exp(-1j * phi), 0, 0],
         [0, 0, 0, -1]],
        dtype=complex,
    )
    u_cmp = np.zeros((8, 8), dtype=complex)
    u_cmp[:4, :4] = np.eye(4)
    u_cmp[4:, 4:] = czs
    schedule = piecewise(layout, [h], [tau], lift_cmp(u_cmp, layout))
    templates = [
        _channel("gamma1_q1", _relaxation_op(3), 0, layout, 1.0, "relaxation"),
        qubit_relaxation(layout, 1),
        qubit_relaxation(layout, 2),
        _channel("gamma_phi_q1", _transmon_dephasing_op(3), 0, layout, 2.0, "dephasing"),
        qubit_dephasing(layout, 1),
        qubit_dephasing(layout, 2),
    ]
    return GateModel("cczs", schedule, "none", tuple(templates), params={"lam": lam, "phi": phi, "tau": tau})


def _rydberg_atom_h(omega: complex, delta: float) -> np.ndarray:
    # levels 0, 1, r, O
    h = np.zeros((4, 4), dtype=complex)
    h[1, 2] = omega / 2
    h[2, 1] = np.conj(omega) / 2
    h[2, 2] = -delta
    return h


def _rydberg_pair_h(layout: SystemLayout, omega: complex, delta: float) -> np.ndarray:
    """Two-atom Hamiltonian in the perfect-blockade limit.

    Independent drives, then |rr> is cut out and the dark state
    (|r1> - |1r>)/sqrt(2) is put back at zero energy, which leaves |11>
    coupled only to the symmetric |W> with Rabi frequency sqrt(2) Omega.
    """
    eye = np.eye(4)
    h1 = _rydberg_atom_h(omega, delta)
    h = np.kron(h1, eye) + np.kron(eye, h1)
    rr = layout.index((2, 2))
    h[rr, :] = 0.0
    h[:, rr] = 0.0
    dark = (layout.ket(2, 1) - layout.ket(1, 2)) / math.sqrt(2)
    return h + delta * np.outer(dark, dark.conj())


def _one_atom_return(delta_ratio: float, omega: float = 1.0) -> tuple[float, float, complex]:
    delta = delta_ratio * omega
    w1 = math.hypot(delta, omega)
    tau = 2 * math.pi / math.sqrt(delta**2 + 2 * omega**2)
    c, s = math.cos(w1 * tau / 2), math.sin(w1 * tau / 2)
    z = (-w1 * c + 1j * delta * s) / (w1 * c + 1j * delta * s)
    xi = float(np.angle(z)) % (2 * math.pi)
    h = np.zeros((2, 2), dtype=complex)
    h[0, 1] = omega / 2
    h[1, 0] = omega / 2
    h[1, 1] = -delta
    h2 = h.copy()
    h2[0, 1] = omega * np.exp(1j * xi) / 2
    h2[1, 0] = np.conj(h2[0, 1])
    u = expm_hermitian(h2, tau) @ expm_hermitian(h, tau)
    return tau, xi, complex(u[0, 0])


def refine_rydberg_protocol(delta_ratio: float = RYDBERG_DELTA_RATIO) -> tuple[float, float]:
    """Solve for ``(Delta/Omega, xi)`` giving an exact CZ up to single-qubit phases.

    ``xi`` closes the single-atom trajectory and ``Delta/Omega`` is tuned
    until ``phi_11 = 2 phi_01 - pi``; the search starts from the quoted
    protocol values.
    """

    def mismatch(r):
        tau, _, amp = _one_atom_return(r)
        phi01 = np.angle(amp)
        phi11 = r * tau
        return (2 * phi01 - math.pi - phi11 + math.pi) % (2 * math.pi) - math.pi

    r = brentq(mismatch, delta_ratio - 0.01, delta_ratio + 0.01, xtol=1e-15)
    return r, _one_atom_return(r)[1]


def rydberg_cz(omega: float = 2 * math.pi * 3.5e6, delta_ratio: float | None = None,
               xi: float | None = None, refine: bool = True) -> GateModel:
    """Two-pulse neutral-atom CZ under Rydberg blockade.

    Each atom has levels (0, 1, r, O), ``O`` being an explicit sink outside
    the computational subspace. Both pulses last ``tau = 2 pi / sqrt(Delta^2 +
    2 Omega^2)``; the second has drive phase ``xi``.

    With ``refine`` (default) unspecified protocol parameters come from
    :func:`refine_rydberg_protocol`; otherwise the quoted rounded values
    are used.
    """
    if not omega > 0:
        raise ValueError("omega must be positive")
    if refine and delta_ratio is None and xi is None:
        delta_ratio, xi = refine_rydberg_protocol()
    delta_ratio = RYDBERG_DELTA_RATIO if delta_ratio is None else float(delta_ratio)
    xi = RYDBERG_XI if xi is None else float(xi)
    delta = delta_ratio * omega
    tau = 2 * math.pi / math.sqrt(delta**2 + 2 * omega**2)
    layout = compose([4, 4])
    h_a = _rydberg_pair_h(layout, omega, delta)
    h_b = _rydberg_pair_h(layout, omega * np.exp(1j * xi), delta)
    phi11 = delta * tau
    phi01 = (phi11 + math.pi) / 2
    target = lift_cmp(np.diag([1, np.exp(1j * phi01), np.exp(1j * phi01), np.exp(1j * phi11)]), layout)
    schedule = piecewise(layout, [h_a, h_b], [tau, tau], target)
    templates = tuple(rydberg_noise(layout))
    params = {"omega": omega, "delta": delta, "delta_ratio": delta_ratio, "xi": xi, "tau": tau,
              "phi01": phi01, "phi11": phi11}
    return GateModel("rydberg_cz", schedule, "local_z", templates, params=params)


def rydberg_noise(layout: SystemLayout, gamma_r: Sequence[float] | float = 0.0) -> list[NoiseChannel]:
    """Decay ``|O><r|`` of each atom's Rydberg level into its sink."""
    n = layout.n_qubits
    rates = [float(gamma_r)] * n if np.isscalar(gamma_r) else list(gamma_r)
    return [
        NoiseChannel(f"gamma_r_q{q + 1}", embed(transition(4, 3, 2), q, layout), rates[q], 1.0, (q,), "rydberg_decay")
        for q in range(n)
    ]


def _relabel(label: str, offset: int) -> str:
    head, _, q = label.rpartition("_q")
    if head and q.isdigit():
        return f"{head}_q{int(q) + offset}"
    return label


def parallel(models: Sequence[GateModel], pad: bool = False) -> GateModel:
    """Run several gates side by side on disjoint registers.

    The combined Hamiltonian is the Kronecker sum of the members' segment
    generators on the union of their segment boundaries. With ``pad``,
    members that finish early idle under a zero Hamiltonian.
    """
    models = list(models)
    if not models:
        raise ValueError("parallel() needs at least one model")
    if len(models) == 1:
        return models[0]
    taus = [m.tau for m in models]
    tau = max(taus)
    if not pad and max(taus) - min(taus) > 1e-12 * tau:
        raise ValueError(f"gate durations differ ({taus}); pass pad=True to idle the short ones")
    layout = compose(
        [d for m in models for d in m.layout.dims],
        [p for m in models for p in m.layout.cmp_levels],
    )
    cuts = sorted({0.0, tau, *(t for m in models for t in m.schedule.boundaries)})
    merged = [cuts[0]]
    for t in cuts[1:]:
        if t - merged[-1] > 1e-12 * tau:
            merged.append(t)
    merged[-1] = tau
    segments = []
    for a, b in zip(merged[:-1], merged[1:]):
        mid = 0.5 * (a + b)
        gens = []
        for m in models:
            if mid >= m.tau:
                gens.append(np.zeros((m.layout.full_dim,) * 2, dtype=complex))
            else:
                k = int(np.searchsorted(m.schedule.boundaries, mid, side="right")) - 1
                gens.append(np.asarray(m.schedule.segments[k].generator, dtype=complex))
        h = np.zeros((layout.full_dim,) * 2, dtype=complex)
        for pos, g in enumerate(gens):
            left = int(np.prod([mm.layout.full_dim for mm in models[:pos]]))
            right = int(np.prod([mm.layout.full_dim for mm in models[pos + 1:]]))
            h += np.kron(np.kron(np.eye(left), g), np.eye(right))
        segments.append(Segment(h, b - a))
    target = models[0].ideal_gate
    for m in models[1:]:
        target = np.kron(target, m.ideal_gate)
    schedule = HamiltonianSchedule(layout, tuple(segments), target)
    conventions = {m.phase_convention for m in models}
    convention = "local_z" if "local_z" in conventions else "global" if "global" in conventions else "none"
    templates = []
    offset = 0
    for m in models:
        for ch in m.channel_templates:
            sites = tuple(s + offset for s in ch.sites)
            local = reduce_to_sites(ch.jump, list(ch.sites), m.layout)
            jump = embed_sites(local, sites, layout)
            templates.append(NoiseChannel(_relabel(ch.label, offset), jump, 0.0, ch.convention, sites, ch.kind))
        offset += m.layout.n_qubits
    name = "parallel(" + ",".join(m.name for m in models) + ")"
    return GateModel(name, schedule, convention, tuple(templates), tuple(models), {"tau": tau})


def oracle_tomogram(model: GateModel, channels: Sequence[NoiseChannel],
                    solver_tol: float = 1e-9) -> ChannelTomogram:
    """Master-equation tomogram, factorised over parallel members when the noise allows it.

    Every channel must act within one member for the factorisation; if any
    does not, the full register is integrated directly.
    """
    if not model.components:
        return channel_tomography(model.schedule, channels, solver_tol)
    spans = []
    offset = 0
    for m in model.components:
        spans.append(range(offset, offset + m.layout.n_qubits))
        offset += m.layout.n_qubits
    per_member: list[list[NoiseChannel]] = [[] for _ in model.components]
    for ch in channels:
        sites = ch.sites
        home = None
        if sites is not None:
            for k, span in enumerate(spans):
                if all(s in span for s in sites):
                    home = k
        if home is None or not is_local(ch.jump, list(spans[home]), model.layout):
            return channel_tomography(model.schedule, channels, solver_tol)
        member = model.components[home]
        local = reduce_to_sites(ch.jump, list(spans[home]), model.layout)
        per_member[home].append(
            NoiseChannel(ch.label, local, ch.rate, ch.convention,
                         tuple(s - spans[home].start for s in sites), ch.kind)
        )
    parts = []
    for m, chs in zip(model.components, per_member):
        if abs(m.tau - model.tau) > 1e-12 * model.tau:
            return channel_tomography(model.schedule, channels, solver_tol)
        parts.append(oracle_tomogram(m, chs, solver_tol))
    return product_tomogram(parts, model.layout)


REGISTRY: dict[str, Callable[..., GateModel]] = {
    "cz": transmon_cz,
    "rydberg_cz": rydberg_cz,
    "cczs": cczs,
    "iswap": iswap,
    "idle": idle,
    "parallel": parallel,
}


def build(name: str, **params) -> GateModel:
    try:
        factory = REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown gate {name!r}; builtins: {sorted(REGISTRY)}") from None
    return factory(**params)
