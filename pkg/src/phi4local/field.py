"""Parabolic space-time grid, cut-off heat solves, mollifiers and norms.

Fields are float64 numpy arrays of shape (nt, nx) sampled on a stored grid
with time step ``k_store``.  The heat solver marches at a finer internal step
(``k_store / substeps``) to satisfy the explicit-scheme stability bound and
writes back on the stored levels; the right-hand side is interpolated
linearly in time between stored levels.  All algebraic identities downstream
are exact over the stored values by construction, independent of resolution.

The spatial dimension is fixed to 1 for the numerical layer.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path as FSPath

import numpy as np
from scipy.signal import fftconvolve


@dataclass(frozen=True)
class Grid:
    """Space-time grid over [t0, t1] x [-S, S] with sup-norm parabolic metric."""

    S: float = 3.0
    t0: float = -0.5
    t1: float = 1.1
    h: float = 1 / 32
    k_store: float = 1 / 128
    substeps: int = 32
    d: int = 1

    def __post_init__(self):
        if self.d != 1:
            raise ValueError("numerical layer supports d=1 only")
        k_march = self.k_store / self.substeps
        if k_march > self.h ** 2 / (2 * self.d) + 1e-15:
            raise StabilityError(
                "march step %.3g violates k <= h^2/2 (h=%.3g)" % (k_march, self.h))

    @cached_property
    def xs(self) -> np.ndarray:
        n = round(2 * self.S / self.h)
        return np.linspace(-self.S, self.S, n + 1)

    @cached_property
    def ts(self) -> np.ndarray:
        n = round((self.t1 - self.t0) / self.k_store)
        return self.t0 + self.k_store * np.arange(n + 1)

    @property
    def nx(self) -> int:
        return self.xs.size

    @property
    def nt(self) -> int:
        return self.ts.size

    @property
    def k_march(self) -> float:
        return self.k_store / self.substeps

    def zeros(self) -> np.ndarray:
        return np.zeros((self.nt, self.nx))

    def ones(self) -> np.ndarray:
        return np.ones((self.nt, self.nx))

    @cached_property
    def x_field(self) -> np.ndarray:
        return np.broadcast_to(self.xs, (self.nt, self.nx)).copy()

    @cached_property
    def t_field(self) -> np.ndarray:
        return np.broadcast_to(self.ts[:, None], (self.nt, self.nx)).copy()

    @cached_property
    def cutoff(self) -> np.ndarray:
        """Smooth spatial bump: 1 on the 1-enlargement of the unit cylinder,
        0 from just inside the grid boundary."""
        lo, hi = 2.0, self.S - 0.05
        r = (np.abs(self.xs) - lo) / (hi - lo)
        r = np.clip(r, 0.0, 1.0)
        ramp = 1.0 - r * r * r * (r * (6 * r - 15) + 10)   # quintic smoothstep
        return np.broadcast_to(ramp, (self.nt, self.nx)).copy()

    def index_of(self, t: float, x: float) -> tuple:
        j = int(round((t - self.t0) / self.k_store))
        m = int(round((x + self.S) / self.h))
        if not (0 <= j < self.nt and 0 <= m < self.nx):
            raise IndexError("point (%g, %g) off grid" % (t, x))
        return j, m

    def node(self, j: int, m: int) -> tuple:
        return float(self.ts[j]), float(self.xs[m])

    def pdist(self, z1: tuple, z2: tuple) -> float:
        return max(math.sqrt(abs(z1[0] - z2[0])), abs(z1[1] - z2[1]))

    def domain_mask(self, R: float = 0.0) -> np.ndarray:
        """Nodes of the shrunken unit cylinder (R^2, 1) x {|x| < 1-R}."""
        tt = self.t_field
        xx = self.x_field
        return (tt > R * R) & (tt <= 1.0) & (np.abs(xx) < 1.0 - R)

    def probe_mask(self, margin: float = 0.1) -> np.ndarray:
        return self.domain_mask(margin)


class StabilityError(RuntimeError):
    pass


class ResolutionError(ValueError):
    pass


DEFAULT_GRID = Grid(k_store=1 / 256, substeps=16)
COARSE_GRID = Grid(h=1 / 16, k_store=1 / 32, substeps=32)
FINE_GRID = Grid(h=1 / 64, k_store=1 / 1024, substeps=16)


def heat_solve(grid: Grid, f: np.ndarray, cutoff: np.ndarray | None = None) -> np.ndarray:
    """March (d_t - Lap) u = cutoff * f forward from zero data at t0 with zero
    spatial boundary values; returns u on the stored levels."""
    rho = grid.cutoff if cutoff is None else cutoff
    rf = rho * f
    u = np.zeros(grid.nx)
    out = np.empty((grid.nt, grid.nx))
    out[0] = u
    k = grid.k_march
    lam = k / grid.h ** 2
    ns = grid.substeps
    for j in range(grid.nt - 1):
        a, b = rf[j], rf[j + 1]
        for s in range(ns):
            theta = s / ns
            rhs = (1.0 - theta) * a + theta * b
            u[1:-1] = (u[1:-1]
                       + lam * (u[2:] - 2 * u[1:-1] + u[:-2])
                       + k * rhs[1:-1])
            u[0] = 0.0
            u[-1] = 0.0
        out[j + 1] = u
    return out


def heat_residual(grid: Grid, u: np.ndarray, f: np.ndarray,
                  cutoff: np.ndarray | None = None) -> np.ndarray:
    """Discrete residual (d_t - Lap) u - cutoff*f on interior stored nodes."""
    rho = grid.cutoff if cutoff is None else cutoff
    dt = (u[1:] - u[:-1]) / grid.k_store
    lap = np.zeros_like(u)
    lap[:, 1:-1] = (u[:, 2:] - 2 * u[:, 1:-1] + u[:, :-2]) / grid.h ** 2
    mid = 0.5 * (lap[1:] + lap[:-1])
    rfm = 0.5 * ((rho * f)[1:] + (rho * f)[:-1])
    return dt - mid - rfm


def grad_x(grid: Grid, f: np.ndarray) -> np.ndarray:
    """Centered spatial differences (one-sided at the box boundary)."""
    return np.gradient(f, grid.h, axis=1)


# -- mollification kernels ----------------------------------------------------

def _profile_weights(grid: Grid, scale: float) -> np.ndarray:
    """Discrete weights of the base profile at a given scale: (1-q)^4 on the
    past parabolic ball of radius `scale`, spatially symmetric, sum 1.

    Each node weight samples the profile over its grid cell (half-cell
    shrinkage), so a scale at the resolution limit still smooths instead of
    degenerating to the identity kernel.
    """
    na = max(1, int(math.floor(scale ** 2 / grid.k_store)))
    nb = max(1, int(math.floor(scale / grid.h)))
    tt = np.maximum(grid.k_store * np.arange(na + 1) - grid.k_store / 2, 0.0)
    xx = np.maximum(np.abs(grid.h * np.arange(-nb, nb + 1)) - grid.h / 2, 0.0)
    q = np.maximum(np.sqrt(tt)[:, None] / scale, xx[None, :] / scale)
    w = np.maximum(1.0 - q, 0.0) ** 4
    tot = w.sum()
    if tot <= 0:
        raise ResolutionError("profile scale %g below grid resolution" % scale)
    return w / tot


def max_depth(grid: Grid, L: float) -> int:
    n = int(math.floor(math.log2(L / (2 * grid.h)))) if L >= 2 * grid.h else -1
    return max(n, 0) if L >= 2 * grid.h else -1


class Mollifier:
    """Iterated-profile kernels; the scale-L kernel of depth n is the discrete
    convolution of profiles at L/2, L/4, ..., L/2^n, so the dyadic semigroup
    identity holds exactly at the level of discrete kernels."""

    def __init__(self, grid: Grid):
        self.grid = grid
        self._kernels: dict = {}

    def kernel(self, L: float, n: int) -> np.ndarray:
        key = (round(L, 12), n)
        k = self._kernels.get(key)
        if k is None:
            if n < 1:
                raise ValueError("depth must be >= 1")
            k = _profile_weights(self.grid, L / 2)
            for j in range(2, n + 1):
                k = fftconvolve(k, _profile_weights(self.grid, L / 2 ** j))
            k = np.maximum(k, 0.0)
            k /= k.sum()
            self._kernels[key] = k
        return k

    def smooth(self, f: np.ndarray, L: float, n: int | None = None):
        """(f)_L with depth n (default: maximal resolvable depth).

        Returns (g, mask): g is the smoothed field, valid where mask is True
        (nodes whose backward kernel window stays inside the grid).
        """
        grid = self.grid
        if L < 2 * grid.h:
            raise ResolutionError("scale %g below resolution 2h=%g" % (L, 2 * grid.h))
        if n is None:
            n = max(max_depth(grid, L), 1)
        ker = self.kernel(L, n)
        na = ker.shape[0] - 1
        nb = (ker.shape[1] - 1) // 2
        full = fftconvolve(f, ker, mode="full")
        g = full[: grid.nt, nb: nb + grid.nx]
        mask = np.zeros(f.shape, dtype=bool)
        if grid.nt > na and grid.nx > 2 * nb:
            mask[na:, nb: grid.nx - nb] = True
        g = np.where(mask, g, 0.0)
        return g, mask


def mollify(grid: Grid, f: np.ndarray, L: float, n: int | None = None,
            mollifier: Mollifier | None = None):
    mol = mollifier or Mollifier(grid)
    return mol.smooth(f, L, n)


# -- norms ---------------------------------------------------------------------

def neg_holder_seminorm(grid: Grid, f: np.ndarray, alpha: float,
                        scales, mollifier: Mollifier | None = None,
                        probe: np.ndarray | None = None) -> float:
    """sup over the given scales of ||(f)_L|| * L^(-alpha), alpha < 0."""
    if alpha >= 0:
        raise ValueError("alpha must be negative")
    mol = mollifier or Mollifier(grid)
    best = 0.0
    seen = False
    for L in scales:
        g, mask = mol.smooth(f, L)
        if probe is not None:
            mask = mask & probe
        if not mask.any():
            continue
        seen = True
        best = max(best, float(np.abs(g[mask]).max()) * L ** (-alpha))
    if not seen:
        raise ValueError("no admissible nodes at any requested scale")
    return best


def _pair_offsets(grid: Grid, sep: float):
    """Node offsets realizing parabolic separations close to `sep`."""
    out = []
    mj = int(round(sep ** 2 / grid.k_store))
    mm = int(round(sep / grid.h))
    if mm >= 1:
        out.append((0, mm))
        out.append((0, -mm))
    if mj >= 1:
        out.append((mj, 0))
        out.append((-mj, 0))
    if mm >= 1 and mj >= 1:
        out.append((mj, mm))
        out.append((-mj, -mm))
    return out


def holder_seminorm(grid: Grid, f: np.ndarray, alpha: float,
                    seps=None, probe: np.ndarray | None = None) -> float:
    """Sampled Hoelder seminorm at dyadic separations; for alpha in (1,2) the
    first-order spatial term at the base node is subtracted."""
    if not (0 < alpha < 2) or alpha == 1:
        raise ValueError("alpha must lie in (0,1) or (1,2)")
    if seps is None:
        seps = [2 ** -j for j in range(0, 6)]
    probe = grid.domain_mask(0.05) if probe is None else probe
    g = grad_x(grid, f) if alpha > 1 else None
    best = 0.0
    jj, mm = np.where(probe)
    for sep in seps:
        for (oj, om) in _pair_offsets(grid, sep):
            j2 = jj + oj
            m2 = mm + om
            ok = (j2 >= 0) & (j2 < grid.nt) & (m2 >= 0) & (m2 < grid.nx)
            if not ok.any():
                continue
            a = f[jj[ok], mm[ok]]
            b = f[j2[ok], m2[ok]]
            dist = max(math.sqrt(abs(oj * grid.k_store)), abs(om * grid.h))
            if dist == 0:
                continue
            inc = b - a
            if alpha > 1:
                inc = inc - g[jj[ok], mm[ok]] * (om * grid.h)
            best = max(best, float(np.abs(inc).max()) / dist ** alpha)
    return best


# -- noise fixtures -------------------------------------------------------------

def noise_field(grid: Grid, kind: str, seed: int = 0, eps: float | None = None,
                amp: float = 1.0) -> np.ndarray:
    """Reproducible noise fixtures.

    kind 'trig': fixed smooth deterministic field (seed shifts the phases).
    kind 'gauss': per-node white noise mollified at scale eps.
    kind 'bump': a single smooth space-time bump.
    kind 'zero': zeros.
    """
    if kind == "zero":
        return grid.zeros()
    tt, xx = grid.t_field, grid.x_field
    if kind == "trig":
        p = 0.37 * seed
        return amp * (np.sin(2.1 * xx + 0.7 + p) * np.cos(3.0 * tt + 0.2)
                      + 0.45 * np.sin(4.3 * xx - 1.1 - p) * np.sin(5.0 * tt)
                      + 0.3 * np.cos(1.3 * xx + 0.5 * p) * np.cos(1.7 * tt + 1.0))
    if kind == "bump":
        r2 = (xx / 1.5) ** 2 + ((tt - 0.3) / 0.6) ** 2
        return amp * np.exp(-np.clip(r2, 0, 50.0)) * np.cos(3 * xx + 2 * tt)
    if kind == "gauss":
        if eps is None:
            eps = 4 * grid.h
        rng = np.random.default_rng(seed)
        white = rng.standard_normal((grid.nt, grid.nx))
        white *= amp / math.sqrt(grid.k_store * grid.h)
        g, mask = mollify(grid, white, eps)
        return np.where(mask, g, 0.0)
    raise ValueError("unknown noise kind %r" % kind)


# -- persistence ---------------------------------------------------------------

def grid_descriptor(grid: Grid) -> dict:
    return {"S": grid.S, "t0": grid.t0, "t1": grid.t1, "h": grid.h,
            "k_store": grid.k_store, "substeps": grid.substeps, "d": grid.d}


def grid_from_descriptor(desc: dict) -> Grid:
    return Grid(**desc)


def save_field(path, grid: Grid, f: np.ndarray, meta: dict | None = None) -> None:
    path = FSPath(path)
    raw = np.ascontiguousarray(f, dtype="<f8").tobytes()
    path.with_suffix(".bin").write_bytes(raw)
    sidecar = {
        "grid": grid_descriptor(grid),
        "shape": list(f.shape),
        "dtype": "<f8",
        "sha256": hashlib.sha256(raw).hexdigest(),
    }
    if meta:
        sidecar["meta"] = meta
    path.with_suffix(".json").write_text(json.dumps(sidecar, indent=1, sort_keys=True))


def load_field(path) -> tuple:
    path = FSPath(path)
    sidecar = json.loads(path.with_suffix(".json").read_text())
    raw = path.with_suffix(".bin").read_bytes()
    if hashlib.sha256(raw).hexdigest() != sidecar["sha256"]:
        raise IOError("checksum mismatch for %s" % path)
    f = np.frombuffer(raw, dtype=sidecar["dtype"]).reshape(sidecar["shape"]).copy()
    return grid_from_descriptor(sidecar["grid"]), f
