"""Cone descriptions and elementary cone operations.

The toolkit works over products of the nonnegative orthant and second-order
(Lorentz) cones.  All cone-valued vectors are stored as flat arrays with the
orthant entries first, followed by the second-order cone blocks in order.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ConeSpec:
    """Product cone: `nonneg` scalar orthant entries followed by SOC blocks."""

    nonneg: int = 0
    soc_dims: tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.nonneg < 0:
            raise ValueError("nonneg count must be >= 0")
        if any(d < 1 for d in self.soc_dims):
            raise ValueError("all SOC dimensions must be >= 1")
        object.__setattr__(self, "soc_dims", tuple(int(d) for d in self.soc_dims))

    @property
    def dim(self) -> int:
        return self.nonneg + sum(self.soc_dims)

    @property
    def degree(self) -> int:
        """Barrier degree: one per orthant entry, one per SOC block."""
        return self.nonneg + len(self.soc_dims)

    def soc_slices(self):
        start = self.nonneg
        for d in self.soc_dims:
            yield slice(start, start + d)
            start += d

    def identity(self) -> np.ndarray:
        """The cone's identity element e (ones / Lorentz unit vectors)."""
        e = np.zeros(self.dim)
        e[: self.nonneg] = 1.0
        for sl in self.soc_slices():
            e[sl.start] = 1.0
        return e


@functools.lru_cache(maxsize=64)
def block_groups(cone: ConeSpec) -> dict[int, np.ndarray]:
    """SOC block entry indices grouped by block dimension.

    Maps each distinct block dimension d to an integer index array of shape
    (num_blocks_of_dim_d, d) so that v[idx] gathers all same-sized blocks into
    one matrix. Grouping lets the solver batch the per-block Jordan-algebra
    operations instead of looping over hundreds of tiny blocks.
    """
    starts: dict[int, list[int]] = {}
    ofs = cone.nonneg
    for d in cone.soc_dims:
        starts.setdefault(d, []).append(ofs)
        ofs += d
    return {
        d: np.asarray(st, dtype=np.intp)[:, None] + np.arange(d, dtype=np.intp)
        for d, st in starts.items()
    }


def project_onto_cone(v: np.ndarray, cone: ConeSpec) -> np.ndarray:
    """Euclidean projection of `v` onto the product cone."""
    v = np.asarray(v, dtype=float)
    if v.shape != (cone.dim,):
        raise ValueError(f"vector has length {v.size}, cone dimension is {cone.dim}")
    out = v.copy()
    out[: cone.nonneg] = np.maximum(out[: cone.nonneg], 0.0)
    for sl in cone.soc_slices():
        out[sl] = _project_soc(v[sl])
    return out


def _project_soc(u: np.ndarray) -> np.ndarray:
    if u.size == 1:
        return np.maximum(u, 0.0)
    t, x = u[0], u[1:]
    nx = np.linalg.norm(x)
    if nx <= t:
        return u.copy()
    if nx <= -t:
        return np.zeros_like(u)
    alpha = 0.5 * (t + nx)
    out = np.empty_like(u)
    out[0] = alpha
    out[1:] = (alpha / nx) * x
    return out


def min_eig(v: np.ndarray, cone: ConeSpec) -> float:
    """Smallest cone eigenvalue; positive iff `v` is in the cone interior."""
    vals = []
    if cone.nonneg:
        vals.append(np.min(v[: cone.nonneg]))
    for sl in cone.soc_slices():
        blk = v[sl]
        if blk.size == 1:
            vals.append(blk[0])
        else:
            vals.append(blk[0] - np.linalg.norm(blk[1:]))
    return min(vals) if vals else np.inf


def in_cone(v: np.ndarray, cone: ConeSpec, tol: float = 0.0) -> bool:
    return min_eig(v, cone) >= -tol


def step_to_boundary(v: np.ndarray, dv: np.ndarray, cone: ConeSpec) -> float:
    """Largest alpha with v + alpha*dv in the cone, for v in the interior."""
    alpha = _step_orthant(v[: cone.nonneg], dv[: cone.nonneg])
    for d, idx in block_groups(cone).items():
        u, du = v[idx], dv[idx]
        if d == 1:
            alpha = min(alpha, _step_orthant(u[:, 0], du[:, 0]))
            continue
        u0, d0 = u[:, 0], du[:, 0]
        a2 = d0 * d0 - np.einsum("ij,ij->i", du[:, 1:], du[:, 1:])
        a1 = 2.0 * (u0 * d0 - np.einsum("ij,ij->i", u[:, 1:], du[:, 1:]))
        a0 = u0 * u0 - np.einsum("ij,ij->i", u[:, 1:], u[:, 1:])
        # Smallest positive root of a2*r^2 + a1*r + a0 = 0 with u0 + r*d0 >= 0
        # per block; the stable quadratic formula takes the larger-magnitude
        # root first and recovers the other from the product a0/a2.
        with np.errstate(divide="ignore", invalid="ignore"):
            disc = a1 * a1 - 4.0 * a2 * a0
            q = -0.5 * (a1 + np.copysign(np.sqrt(np.maximum(disc, 0.0)), a1))
            r1 = np.where(a2 != 0.0, q / a2,
                          np.where(a1 != 0.0, -a0 / a1, np.inf))
            r2 = np.where((a2 != 0.0) & (q != 0.0), a0 / q, np.inf)
            bad = (a2 != 0.0) & (disc < 0.0)
            for r in (np.where(bad, np.inf, r1), np.where(bad, np.inf, r2)):
                ok = np.isfinite(r) & (r > 1e-14) & (u0 + r * d0 >= -1e-14)
                if np.any(ok):
                    alpha = min(alpha, float(np.min(r[ok])))
        alpha = min(alpha, _step_orthant(u0, d0))
    return alpha


def _step_orthant(v: np.ndarray, dv: np.ndarray) -> float:
    neg = dv < 0
    if not np.any(neg):
        return np.inf
    return float(np.min(-v[neg] / dv[neg]))


def _step_soc(u: np.ndarray, d: np.ndarray) -> float:
    if u.size == 1:
        return -u[0] / d[0] if d[0] < 0 else np.inf
    # Roots of (u0+a*d0)^2 - |u1+a*d1|^2 = 0, keeping u0+a*d0 >= 0.
    a2 = d[0] ** 2 - d[1:] @ d[1:]
    a1 = 2.0 * (u[0] * d[0] - u[1:] @ d[1:])
    a0 = u[0] ** 2 - u[1:] @ u[1:]
    if a2 == 0.0:
        roots = [-a0 / a1] if a1 != 0.0 else []
    else:
        disc = a1 * a1 - 4.0 * a2 * a0
        if disc < 0.0:
            roots = []
        else:
            # Numerically stable quadratic formula: compute the larger-magnitude
            # root first, the other via the product a0/a2.
            q = -0.5 * (a1 + np.copysign(np.sqrt(disc), a1))
            roots = [q / a2]
            if q != 0.0:
                roots.append(a0 / q)
            elif disc > 0.0:
                roots.append(0.0)
    best = np.inf
    for r in roots:
        r = float(r)
        if r > 1e-14 and u[0] + r * d[0] >= -1e-14:
            best = min(best, r)
    # The top entry may hit zero before the quadratic does.
    if d[0] < 0:
        best = min(best, -u[0] / d[0])
    return best
