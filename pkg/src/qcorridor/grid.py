"""Periodic-grid discretization and spinor fields.

Space is a periodic box in d = 1 or 2 dimensions sampled on a regular
lattice.  All derivatives are spectral (FFT), so smooth fields whose
support stays away from the box boundary are differentiated to machine
precision.  The cell volume is the quadrature weight for every integral;
inner products conjugate the *second* argument.

Weighted Sobolev norms of order a add moment and derivative terms,

    ||f||_a = ||f|| + sum_{|alpha|=a} ( ||x^alpha f|| + ||D^alpha f|| ),

and for multi-component fields the component norms combine in quadrature.
"""

from __future__ import annotations

import io
import json
import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Grid",
    "SpinorField",
    "NormReport",
    "make_grid",
    "zeros_field",
    "field_from_values",
    "inner_product",
    "l2_norm",
    "sobolev_norm",
    "norm_report",
    "gaussian_packet",
    "spectral_derivative",
    "boundary_mass",
    "save_field",
    "load_field",
]


class GridError(ValueError):
    pass


@dataclass
class Grid:
    """Regular periodic lattice on a box in R^d, d in {1, 2}."""

    dim: int
    extents: tuple  # ((lo, hi), ...) per axis
    points: tuple   # lattice points per axis
    periodic: bool = True

    # derived, filled by __post_init__
    axes: list = field(default_factory=list, repr=False)
    wavenumbers: list = field(default_factory=list, repr=False)
    cell_volume: float = 0.0

    def __post_init__(self):
        self.extents = tuple((float(lo), float(hi)) for lo, hi in self.extents)
        self.points = tuple(int(n) for n in self.points)
        self.axes = []
        self.wavenumbers = []
        vol = 1.0
        for (lo, hi), n in zip(self.extents, self.points):
            h = (hi - lo) / n
            self.axes.append(lo + h * np.arange(n))
            self.wavenumbers.append(2.0 * np.pi * np.fft.fftfreq(n, d=h))
            vol *= h
        self.cell_volume = vol
        self._mesh = None
        self._kmesh = None

    @property
    def shape(self):
        return self.points

    @property
    def spacings(self):
        return tuple((hi - lo) / n for (lo, hi), n in zip(self.extents, self.points))

    def mesh(self):
        """Coordinates stacked as an array of shape (dim, *points)."""
        if self._mesh is None:
            self._mesh = np.stack(np.meshgrid(*self.axes, indexing="ij"))
        return self._mesh

    def kmesh(self):
        """Wavenumbers stacked as an array of shape (dim, *points)."""
        if self._kmesh is None:
            self._kmesh = np.stack(np.meshgrid(*self.wavenumbers, indexing="ij"))
        return self._kmesh

    def spatial_axes(self, offset=0):
        """Axis indices of the spatial dimensions in an (offset + dim)-dim array."""
        return tuple(range(offset, offset + self.dim))

    def same_as(self, other: "Grid") -> bool:
        return (
            self.dim == other.dim
            and self.extents == other.extents
            and self.points == other.points
        )


@dataclass
class SpinorField:
    """l-component complex wavefunction sampled on a grid.

    ``data`` has shape (l, *grid.points).
    """

    grid: Grid
    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.complex128)
        if self.data.shape[1:] != self.grid.shape:
            raise GridError(
                f"field shape {self.data.shape[1:]} does not match grid {self.grid.shape}"
            )

    @property
    def l(self) -> int:
        return self.data.shape[0]

    def copy(self) -> "SpinorField":
        return SpinorField(self.grid, self.data.copy())

    def check_finite(self):
        if not np.all(np.isfinite(self.data.view(np.float64))):
            raise GridError("field contains non-finite values")
        return self


@dataclass
class NormReport:
    l2: float
    b1: float
    b2: float | None = None


def make_grid(dim: int, extents, points) -> Grid:
    """Build a periodic grid; rejects dim outside {1, 2} and bad extents."""
    if dim not in (1, 2):
        raise GridError(f"unsupported dimension {dim}")
    extents = tuple(extents) if hasattr(extents[0], "__len__") else (tuple(extents),)
    points = tuple(points) if hasattr(points, "__len__") else (points,)
    if len(extents) != dim or len(points) != dim:
        raise GridError("extents/points must supply one entry per axis")
    for lo, hi in extents:
        if not (lo < hi):
            raise GridError(f"invalid extent ({lo}, {hi}): need lo < hi")
    for n in points:
        if n < 8:
            raise GridError(f"at least 8 points per axis required, got {n}")
    return Grid(dim=dim, extents=extents, points=points)


def zeros_field(grid: Grid, l: int = 1) -> SpinorField:
    return SpinorField(grid, np.zeros((l,) + grid.shape, dtype=np.complex128))


def field_from_values(grid: Grid, values) -> SpinorField:
    values = np.asarray(values, dtype=np.complex128)
    if values.shape == grid.shape:
        values = values[None]
    return SpinorField(grid, values)


def _check_compatible(f: SpinorField, g: SpinorField):
    if not f.grid.same_as(g.grid):
        raise GridError("fields live on different grids")
    if f.l != g.l:
        raise GridError(f"spin dimensions differ: {f.l} vs {g.l}")


def inner_product(f: SpinorField, g: SpinorField) -> complex:
    """(f, g) = integral of sum_j f_j conj(g_j); conjugation on the second slot."""
    _check_compatible(f, g)
    return complex(np.sum(f.data * np.conj(g.data)) * f.grid.cell_volume)


def l2_norm(f: SpinorField) -> float:
    return float(np.sqrt(np.sum(np.abs(f.data) ** 2) * f.grid.cell_volume))


def spectral_derivative(data: np.ndarray, grid: Grid, orders) -> np.ndarray:
    """Mixed partial D^alpha of (l, *points) data via FFT; exact for band-limited data."""
    axes = grid.spatial_axes(offset=data.ndim - grid.dim)
    out = np.fft.fftn(data, axes=axes)
    for axis_idx, order in enumerate(orders):
        if order == 0:
            continue
        k = grid.wavenumbers[axis_idx]
        shape = [1] * data.ndim
        shape[axes[axis_idx]] = k.size
        out = out * (1j * k.reshape(shape)) ** order
    return np.fft.ifftn(out, axes=axes)


def _multi_indices(dim: int, total: int):
    if dim == 1:
        return [(total,)]
    return [(total - j, j) for j in range(total + 1)]


def sobolev_norm(f: SpinorField, a: int) -> float:
    """Weighted Sobolev norm of order a in {0, 1, 2}; a = 0 is the plain L2 norm.

    Component norms ||f_j||_a are combined as sqrt(sum_j ||f_j||_a^2).
    """
    if a not in (0, 1, 2):
        raise GridError(f"unsupported Sobolev order {a}")
    if a == 0:
        return l2_norm(f)
    grid = f.grid
    vol = grid.cell_volume
    X = grid.mesh()
    per_comp = np.sqrt(np.sum(np.abs(f.data) ** 2, axis=grid.spatial_axes(offset=1)) * vol)
    for alpha in _multi_indices(grid.dim, a):
        xa = np.ones(grid.shape)
        for axis_idx, order in enumerate(alpha):
            if order:
                xa = xa * X[axis_idx] ** order
        moment = np.sqrt(
            np.sum(np.abs(xa[None] * f.data) ** 2, axis=grid.spatial_axes(offset=1)) * vol
        )
        deriv = spectral_derivative(f.data, grid, alpha)
        dnorm = np.sqrt(
            np.sum(np.abs(deriv) ** 2, axis=grid.spatial_axes(offset=1)) * vol
        )
        per_comp = per_comp + moment + dnorm
    return float(np.sqrt(np.sum(per_comp**2)))


def norm_report(f: SpinorField, include_b2: bool = False) -> NormReport:
    return NormReport(
        l2=l2_norm(f),
        b1=sobolev_norm(f, 1),
        b2=sobolev_norm(f, 2) if include_b2 else None,
    )


def gaussian_packet(
    grid: Grid,
    l: int = 1,
    center=0.0,
    momentum=0.0,
    width: float = 1.0,
    component_weights=None,
    hbar: float = 1.0,
) -> SpinorField:
    """Normalized Gaussian wave packet exp(-|x-c|^2/(4 w^2) + i p.x/hbar).

    Emits a warning when the packet is wider than a third of the box, where
    periodic wrap-around starts to contaminate the profile.
    """
    if width <= 0:
        raise GridError("width must be positive")
    center = np.broadcast_to(np.atleast_1d(np.asarray(center, float)), (grid.dim,))
    momentum = np.broadcast_to(np.atleast_1d(np.asarray(momentum, float)), (grid.dim,))
    for (lo, hi) in grid.extents:
        if width > (hi - lo) / 3.0:
            warnings.warn(
                "packet width exceeds a third of the box; periodic wrap will "
                "contaminate the profile",
                stacklevel=2,
            )
            break
    X = grid.mesh()
    r2 = np.zeros(grid.shape)
    phase = np.zeros(grid.shape)
    for i in range(grid.dim):
        r2 = r2 + (X[i] - center[i]) ** 2
        phase = phase + momentum[i] * X[i]
    profile = np.exp(-r2 / (4.0 * width**2) + 1j * phase / hbar)
    if component_weights is None:
        cw = np.zeros(l, dtype=np.complex128)
        cw[0] = 1.0
    else:
        cw = np.asarray(component_weights, dtype=np.complex128)
        if cw.shape != (l,):
            raise GridError("component_weights must have length l")
        cw = cw / np.linalg.norm(cw)
    data = cw.reshape((l,) + (1,) * grid.dim) * profile[None]
    out = SpinorField(grid, data)
    n = l2_norm(out)
    if n == 0.0:
        raise GridError("degenerate packet")
    out.data /= n
    return out


def boundary_mass(f: SpinorField, margin: float = 0.05) -> float:
    """Probability mass in the outer band of the box (margin per side, per axis)."""
    grid = f.grid
    mask = np.zeros(grid.shape, dtype=bool)
    for i, ((lo, hi), ax) in enumerate(zip(grid.extents, grid.axes)):
        band = (ax < lo + margin * (hi - lo)) | (ax >= hi - margin * (hi - lo))
        shape = [1] * grid.dim
        shape[i] = ax.size
        mask |= band.reshape(shape)
    dens = np.sum(np.abs(f.data) ** 2, axis=0)
    return float(np.sum(dens[mask]) * grid.cell_volume)


# --- serialization: JSON header line + raw little-endian float64 payload ---
# Layout: grid points in row-major order, components fastest, (re, im) pairs.

def save_field(f: SpinorField, path):
    header = {
        "dim": f.grid.dim,
        "extents": [list(e) for e in f.grid.extents],
        "points": list(f.grid.points),
        "l": f.l,
    }
    payload = np.moveaxis(f.data, 0, -1)  # (*points, l)
    flat = np.empty(payload.shape + (2,), dtype="<f8")
    flat[..., 0] = payload.real
    flat[..., 1] = payload.imag
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode("utf-8") + b"\n")
        fh.write(flat.tobytes(order="C"))


def load_field(path) -> SpinorField:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        raw = fh.read()
    grid = make_grid(header["dim"], header["extents"], header["points"])
    l = header["l"]
    n_vals = int(np.prod(grid.shape)) * l * 2
    flat = np.frombuffer(raw, dtype="<f8", count=n_vals)
    flat = flat.reshape(grid.shape + (l, 2))
    data = flat[..., 0] + 1j * flat[..., 1]
    return SpinorField(grid, np.moveaxis(data, -1, 0))
