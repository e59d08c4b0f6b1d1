"""Momentum grids, numeric 2-D inverse transforms, and Jacobi-plane fields.

The grid transform complements the exact kernel path in `position`: loop
amplitudes (and any sampled momentum array) are taken to position space by a
direct type-2 discrete transform

    f(u, v) = dk^2 sum_ab e^{i (k_a u + k_b v)} F[a, b],

evaluated as two small matrix products against arbitrary target positions,
which keeps the quadrature identical to an FFT while allowing non-conjugate
output grids.  Momentum axes carry a half-spacing offset so no sample sits
at k = 0; the remaining removable-singularity line of the loop amplitudes
(p1 + p2 = 0, the grid anti-diagonal) is handled by averaging two
half-spacing nudges of p1, accurate to second order in the nudge.

Box truncation of the 1/k-tailed amplitudes converges only linearly in the
extent, so the loop field builder evaluates two extents and Richardson
extrapolates; the residual is quadratic in 1/k_max and is validated against
extent doubling in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .params import PhysParams
from .three_photon import DiagramConfig, loop_sum, phi3_momentum, t3v, t4v

__all__ = [
    "MomentumGrid2D",
    "sample_phi3",
    "inverse_ft_2d",
    "PositionField3",
    "JacobiField",
    "to_jacobi",
    "LoopPositionField",
    "export_field_csv",
]


@dataclass(frozen=True)
class MomentumGrid2D:
    """Uniform square momentum grid, optionally offset by half a spacing."""

    k_max: float = 8.0
    n: int = 256
    offset: bool = True

    @property
    def spacing(self) -> float:
        return 2.0 * self.k_max / self.n

    def axis(self) -> np.ndarray:
        dk = self.spacing
        shift = 0.5 if self.offset else 0.0
        return -self.k_max + (np.arange(self.n) + shift) * dk

    def meshgrid(self):
        k = self.axis()
        return np.meshgrid(k, k, indexing="ij")

    def descriptor(self) -> dict:
        return {"k_max": self.k_max, "n": self.n, "offset": self.offset}


def _nudged_loop_sum(p1: np.ndarray, p2: np.ndarray, cfg: DiagramConfig,
                     delta: float) -> np.ndarray:
    """Symmetrised loop sum with the anti-diagonal nudged off p3 = 0.

    Points with |p1 + p2| below half a nudge are evaluated at p1 +/- delta
    and averaged; the removable singularity is crossed quadratically.
    """
    bad = np.abs(p1 + p2) < 0.5 * delta
    out = np.empty(np.broadcast(p1, p2).shape, dtype=complex)
    good = ~bad
    if good.any():
        out[good] = loop_sum(p1[good], p2[good], cfg)
    if bad.any():
        up = loop_sum(p1[bad] + delta, p2[bad], cfg)
        dn = loop_sum(p1[bad] - delta, p2[bad], cfg)
        out[bad] = 0.5 * (up + dn)
    return out


def sample_phi3(grid: MomentumGrid2D, cfg: DiagramConfig) -> np.ndarray:
    """Connected three-photon amplitude sampled on the momentum grid.

    The tree part is evaluated at the exact grid points; when loops are
    requested, the anti-diagonal (a removable singularity of the individual
    loop terms) is bridged by the two-sided nudge average.
    """
    p1, p2 = grid.meshgrid()
    vals = t3v(p1, p2, cfg) + t4v(p1, p2, cfg)
    if cfg.include_loops:
        vals = vals + _nudged_loop_sum(p1, p2, cfg, 0.45 * grid.spacing)
    return vals


@dataclass
class PositionField3:
    """Real position-space field over relative coordinates (u, v)."""

    u: np.ndarray
    v: np.ndarray
    values: np.ndarray
    metadata: dict = field(default_factory=dict)


def inverse_ft_2d(array: np.ndarray, grid: MomentumGrid2D,
                  u=None, v=None, boundary_tol: float = 1e-3) -> PositionField3:
    """Inverse transform of a momentum-grid array to relative positions.

    The output positions default to the transform-conjugate grid.  If the
    input array has not decayed at the box boundary (max boundary magnitude
    above ``boundary_tol`` of the peak) the extent is insufficient and the
    transform refuses to silently alias.
    """
    n = grid.n
    if array.shape != (n, n):
        raise ValueError("array shape does not match the grid")
    peak = np.max(np.abs(array))
    edge = max(
        np.max(np.abs(array[0, :])),
        np.max(np.abs(array[-1, :])),
        np.max(np.abs(array[:, 0])),
        np.max(np.abs(array[:, -1])),
    )
    if peak > 0 and edge > boundary_tol * peak:
        raise ValueError(
            "insufficient momentum extent: boundary magnitude "
            f"{edge / peak:.2e} of peak exceeds {boundary_tol:.0e}"
        )
    if u is None:
        du = math.pi / grid.k_max
        u = (np.arange(n) - n // 2) * du
    if v is None:
        v = u
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    k = grid.axis()
    eu = np.exp(1j * np.outer(u, k))
    ev = np.exp(1j * np.outer(v, k))
    vals = (eu @ array @ ev.T) * grid.spacing**2
    meta = {"grid": grid.descriptor()}
    return PositionField3(u, v, vals, meta)


def symmetrized_real(field: PositionField3, tol: float = 1e-6) -> PositionField3:
    """Real part after conjugation symmetrisation, with residue check."""
    vals = field.values
    scale = np.max(np.abs(vals)) or 1.0
    resid = np.max(np.abs(vals.imag)) / scale
    out = PositionField3(field.u, field.v, vals.real, dict(field.metadata))
    out.metadata["imag_residue"] = float(resid)
    if resid > tol:
        raise FloatingPointError(f"imaginary residue {resid:.2e} above {tol:.0e}")
    return out


class LoopPositionField:
    """Loop-order position-space correction, from the grid transform.

    Two momentum extents are combined by Richardson extrapolation in
    1/k_max to cancel the linear box-truncation error of the slowly
    decaying loop amplitudes.
    """

    def __init__(self, params: PhysParams, k_max: float = 24.0, n: int = 256,
                 richardson: bool = True):
        self.params = params
        self.cfg = DiagramConfig(params, include_loops=True)
        self.grids = [MomentumGrid2D(k_max, n)]
        if richardson:
            self.grids.append(MomentumGrid2D(2.0 * k_max, 2 * n))
        self.samples = [
            _nudged_loop_sum(*g.meshgrid(), self.cfg, 0.45 * g.spacing)
            for g in self.grids
        ]

    def evaluate(self, u, v) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        shape = np.broadcast(u, v).shape
        uu = np.broadcast_to(u, shape).reshape(-1)
        vv = np.broadcast_to(v, shape).reshape(-1)
        fields = []
        for g, arr in zip(self.grids, self.samples):
            k = g.axis()
            eu = np.exp(1j * uu[:, None] * k[None, :])
            ev = np.exp(1j * vv[:, None] * k[None, :])
            fields.append(np.einsum("pa,ab,pb->p", eu, arr, ev) * g.spacing**2)
        val = 2.0 * fields[1] - fields[0] if len(fields) == 2 else fields[0]
        out = val.real.reshape(shape)
        return out if out.shape else float(out)


# ---------------------------------------------------------------------------
# Jacobi-plane mapping
# ---------------------------------------------------------------------------

_SQRT2 = math.sqrt(2.0)
_SQRT32 = math.sqrt(1.5)


def jacobi_to_relative(eta, zeta):
    """Map (eta, zeta) at zero centre of mass to (u, v) = (x1-x3, x2-x3)."""
    eta = np.asarray(eta, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    u = eta / _SQRT2 + zeta * _SQRT32
    v = -eta / _SQRT2 + zeta * _SQRT32
    return u, v


@dataclass
class JacobiField:
    """Field over the relative-coordinate Jacobi plane at zero centre of mass."""

    eta: np.ndarray
    zeta: np.ndarray
    values: np.ndarray
    clipped: bool = False
    metadata: dict = field(default_factory=dict)


def to_jacobi(fld: PositionField3, eta=None, zeta=None) -> JacobiField:
    """Bilinear resampling of a relative-coordinate field onto the Jacobi plane.

    Out-of-range targets are clamped to the field boundary and flagged.
    """
    if eta is None:
        half = 0.7 * min(fld.u.max(), -fld.u.min())
        eta = np.linspace(-half, half, len(fld.u))
    if zeta is None:
        zeta = eta
    eta = np.asarray(eta, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    ee, zz = np.meshgrid(eta, zeta, indexing="ij")
    u, v = jacobi_to_relative(ee, zz)

    clipped = bool(
        np.any(u < fld.u.min()) or np.any(u > fld.u.max())
        or np.any(v < fld.v.min()) or np.any(v > fld.v.max())
    )
    uc = np.clip(u, fld.u.min(), fld.u.max())
    vc = np.clip(v, fld.v.min(), fld.v.max())

    iu = np.clip(np.searchsorted(fld.u, uc) - 1, 0, len(fld.u) - 2)
    iv = np.clip(np.searchsorted(fld.v, vc) - 1, 0, len(fld.v) - 2)
    fu = (uc - fld.u[iu]) / (fld.u[iu + 1] - fld.u[iu])
    fv = (vc - fld.v[iv]) / (fld.v[iv + 1] - fld.v[iv])
    vals = (
        fld.values[iu, iv] * (1 - fu) * (1 - fv)
        + fld.values[iu + 1, iv] * fu * (1 - fv)
        + fld.values[iu, iv + 1] * (1 - fu) * fv
        + fld.values[iu + 1, iv + 1] * fu * fv
    )
    meta = dict(fld.metadata)
    return JacobiField(eta, zeta, vals, clipped, meta)


def export_field_csv(path, jac: JacobiField, metadata: dict | None = None) -> None:
    """Write a Jacobi field as CSV: metadata comments, header, (eta, zeta, value).

    Floats carry 17 significant digits so files round-trip exactly and can
    be compared byte for byte across runs.
    """
    meta = dict(jac.metadata)
    if metadata:
        meta.update(metadata)
    with open(path, "w", encoding="utf-8") as fh:
        for key in sorted(meta):
            fh.write(f"# {key} = {meta[key]}\n")
        if jac.clipped:
            fh.write("# clipped = True\n")
        fh.write("eta,zeta,value\n")
        for i, e in enumerate(jac.eta):
            for j, z in enumerate(jac.zeta):
                fh.write(f"{e:.17g},{z:.17g},{jac.values[i, j]:.17g}\n")
