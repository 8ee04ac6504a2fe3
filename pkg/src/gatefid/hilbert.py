"""Hilbert-space bookkeeping for registers of multi-level subsystems.

Operators are plain dense ``numpy`` arrays over the full product space. The
:class:`SystemLayout` that goes with them says how the space factorises and
which two levels of each subsystem span the qubit (computational) subspace.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property, reduce
from typing import NamedTuple, Sequence

import numpy as np

PAULI_CAP = 6

_PAULIS = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


class LayoutError(ValueError):
    """Raised when dimensions or level indices do not fit a layout."""


@dataclass(frozen=True)
class SystemLayout:
    """Register of subsystems with ``dims[i]`` levels each.

    ``cmp_levels[i]`` holds the two levels of subsystem ``i`` that play the
    roles of qubit states 0 and 1.
    """

    dims: tuple[int, ...]
    cmp_levels: tuple[tuple[int, int], ...]

    @property
    def n_qubits(self) -> int:
        return len(self.dims)

    @property
    def full_dim(self) -> int:
        return int(np.prod(self.dims))

    @property
    def cmp_dim(self) -> int:
        return 2 ** len(self.dims)

    @cached_property
    def cmp_indices(self) -> np.ndarray:
        """Full-space indices of the computational basis, lexicographic in |q1 q2 ...>."""
        out = []
        for bits in itertools.product((0, 1), repeat=self.n_qubits):
            levels = [self.cmp_levels[q][b] for q, b in enumerate(bits)]
            out.append(self.index(levels))
        return np.array(out, dtype=int)

    def index(self, levels: Sequence[int]) -> int:
        """Full-space index of the product state ``|levels[0] levels[1] ...>``."""
        if len(levels) != self.n_qubits:
            raise LayoutError(f"expected {self.n_qubits} levels, got {len(levels)}")
        idx = 0
        for q, (lvl, dim) in enumerate(zip(levels, self.dims)):
            if not 0 <= lvl < dim:
                raise LayoutError(f"level {lvl} out of range for subsystem {q} (dim {dim})")
            idx = idx * dim + lvl
        return idx

    def ket(self, *levels: int) -> np.ndarray:
        v = np.zeros(self.full_dim, dtype=complex)
        v[self.index(levels)] = 1.0
        return v

    def check_operator(self, op: np.ndarray, name: str = "operator") -> np.ndarray:
        op = np.asarray(op, dtype=complex)
        if op.shape != (self.full_dim, self.full_dim):
            raise LayoutError(
                f"{name} has shape {op.shape}, layout needs ({self.full_dim}, {self.full_dim})"
            )
        return op


def compose(dims: Sequence[int], cmp_levels: Sequence[Sequence[int]] | None = None) -> SystemLayout:
    """Build and validate a :class:`SystemLayout`.

    Parameters
    ----------
    dims : sequence of int
        Number of levels per subsystem, each at least 2.
    cmp_levels : sequence of pairs, optional
        Computational levels per subsystem. Defaults to ``(0, 1)`` everywhere.

    Raises
    ------
    LayoutError
        If a dimension is too small or a level pair is invalid; the message
        names the offending subsystem.
    """
    dims = tuple(int(d) for d in dims)
    if not dims:
        raise LayoutError("layout needs at least one subsystem")
    if cmp_levels is None:
        cmp_levels = [(0, 1)] * len(dims)
    if len(cmp_levels) != len(dims):
        raise LayoutError(f"{len(cmp_levels)} cmp level pairs for {len(dims)} subsystems")
    pairs = []
    for q, (dim, pair) in enumerate(zip(dims, cmp_levels)):
        if dim < 2:
            raise LayoutError(f"subsystem {q}: needs at least 2 levels, got {dim}")
        pair = tuple(int(x) for x in pair)
        if len(pair) != 2 or pair[0] == pair[1]:
            raise LayoutError(f"subsystem {q}: cmp levels must be two distinct indices, got {pair}")
        if not all(0 <= x < dim for x in pair):
            raise LayoutError(f"subsystem {q}: cmp levels {pair} outside 0..{dim - 1}")
        pairs.append(pair)
    return SystemLayout(dims, tuple(pairs))


def embed(op: np.ndarray, site: int, layout: SystemLayout) -> np.ndarray:
    """Kronecker embedding ``1 ⊗ ... ⊗ op ⊗ ... ⊗ 1`` with site 0 leftmost."""
    op = np.asarray(op, dtype=complex)
    if not 0 <= site < layout.n_qubits:
        raise LayoutError(f"site {site} not in layout with {layout.n_qubits} subsystems")
    dim = layout.dims[site]
    if op.shape != (dim, dim):
        raise LayoutError(f"subsystem {site}: operator shape {op.shape} does not match dim {dim}")
    factors = [np.eye(d, dtype=complex) for d in layout.dims]
    factors[site] = op
    return reduce(np.kron, factors)


def embed_sites(op: np.ndarray, sites: Sequence[int], layout: SystemLayout) -> np.ndarray:
    """Embed an operator acting on several (not necessarily adjacent) subsystems."""
    sites = list(sites)
    if sorted(set(sites)) != sorted(sites) or not sites:
        raise LayoutError(f"invalid site list {sites}")
    if len(sites) == 1:
        return embed(op, sites[0], layout)
    sub_dims = [layout.dims[s] for s in sites]
    sub = int(np.prod(sub_dims))
    op = np.asarray(op, dtype=complex)
    if op.shape != (sub, sub):
        raise LayoutError(f"operator shape {op.shape} does not match sites {sites} (dim {sub})")
    rest = [q for q in range(layout.n_qubits) if q not in sites]
    rest_dim = int(np.prod([layout.dims[q] for q in rest])) if rest else 1
    big = np.kron(op, np.eye(rest_dim, dtype=complex))
    # big is ordered (sites..., rest...); permute axes into layout order
    order = sites + rest
    n = layout.n_qubits
    shape = [layout.dims[q] for q in order]
    big = big.reshape(shape + shape)
    perm = [order.index(q) for q in range(n)]
    big = big.transpose(perm + [p + n for p in perm])
    return big.reshape(layout.full_dim, layout.full_dim)


def reduce_to_sites(op: np.ndarray, sites: Sequence[int], layout: SystemLayout) -> np.ndarray:
    """Normalised partial trace of ``op`` over every subsystem not in ``sites``.

    For an operator of the form ``A ⊗ 1`` this returns ``A`` exactly; use
    :func:`is_local` to check that form first.
    """
    op = layout.check_operator(op)
    n = layout.n_qubits
    sites = list(sites)
    rest = [q for q in range(n) if q not in sites]
    t = op.reshape(list(layout.dims) * 2)
    letters = "abcdefghijklmnopqrstuvwxyz"
    row = list(letters[:n])
    col = list(letters[n : 2 * n])
    for q in rest:
        col[q] = row[q]
    out = "".join(row[q] for q in sites) + "".join(col[q] for q in sites)
    reduced = np.einsum("".join(row) + "".join(col) + "->" + out, t)
    sub = int(np.prod([layout.dims[q] for q in sites]))
    rest_dim = int(np.prod([layout.dims[q] for q in rest])) if rest else 1
    return reduced.reshape(sub, sub) / rest_dim


def is_local(op: np.ndarray, sites: Sequence[int], layout: SystemLayout, atol: float = 1e-12) -> bool:
    """True when ``op`` acts as the identity outside ``sites``."""
    local = reduce_to_sites(op, sites, layout)
    return bool(np.allclose(embed_sites(local, sites, layout), op, atol=atol, rtol=0))


def project_cmp(op: np.ndarray, layout: SystemLayout) -> np.ndarray:
    """Restriction ``P op P`` to the computational subspace as a ``d x d`` matrix."""
    op = layout.check_operator(op)
    idx = layout.cmp_indices
    return op[np.ix_(idx, idx)]


def trace_cmp(op: np.ndarray, layout: SystemLayout) -> complex:
    op = layout.check_operator(op)
    idx = layout.cmp_indices
    return complex(np.sum(op[idx, idx]))


def lift_cmp(u_cmp: np.ndarray, layout: SystemLayout) -> np.ndarray:
    """Full-space operator acting as ``u_cmp`` on the subspace and as identity elsewhere."""
    u_cmp = np.asarray(u_cmp, dtype=complex)
    d = layout.cmp_dim
    if u_cmp.shape != (d, d):
        raise LayoutError(f"subspace operator has shape {u_cmp.shape}, expected ({d}, {d})")
    full = np.eye(layout.full_dim, dtype=complex)
    idx = layout.cmp_indices
    full[np.ix_(idx, idx)] = u_cmp
    return full


def transition(dim: int, to: int, frm: int) -> np.ndarray:
    """Single-subsystem operator ``|to><frm|``."""
    op = np.zeros((dim, dim), dtype=complex)
    op[to, frm] = 1.0
    return op


class BasisElement(NamedTuple):
    index: int
    matrix: np.ndarray


def pauli_basis(n: int, cap: int = PAULI_CAP) -> list[BasisElement]:
    """All ``4**n`` Pauli strings, ``f_0`` being the identity.

    The combined index is little-endian in the qubit label,
    ``i = i1 + 4*i2 + ... + 4**(n-1)*iN``, while the tensor factor of qubit 1
    stays leftmost.
    """
    if n < 1:
        raise ValueError("need at least one qubit")
    if n > cap:
        raise ValueError(f"{4 ** n} basis elements exceeds the cap of N <= {cap}")
    out = []
    for i in range(4**n):
        digits = [(i // 4**q) % 4 for q in range(n)]
        mat = reduce(np.kron, [_PAULIS[k] for k in digits])
        out.append(BasisElement(i, mat))
    return out
