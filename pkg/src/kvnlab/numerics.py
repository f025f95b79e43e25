"""
Grid and field substrate: uniform periodic grids, sampled fields, midpoint
quadrature, centred Fourier transforms, moments and extremum analysis.

Transform conventions
---------------------
Position to momentum uses the symmetric kernel
``exp(-i p x / hbar) / sqrt(2 pi hbar)``; the phase-space transform to the
conjugate ``lambda`` variables uses the same kernel with ``hbar = 1`` on each
axis. Conjugate grids are centred on zero with spacing ``2 pi hbar / (n dx)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Union

import numpy as np
from scipy.signal import find_peaks, peak_prominences

from .errors import DataError, ParameterError

__all__ = [
    "Grid1D", "Grid2D",
    "ComplexField1D", "ComplexField2D", "RealField1D", "RealField2D",
    "norm_sq", "integrate", "edge_mass",
    "dft_x_to_p", "idft_p_to_x", "dft2_phi_to_lambda", "idft2_lambda_to_phi",
    "wavenumbers", "spectral_derivative",
    "moments", "Extremum", "local_extrema",
    "write_field_csv", "read_field_csv", "write_density_csv", "read_density_csv",
]

NEGATIVE_DENSITY_TOL = 1e-12
RENORMALIZE_TOL = 1e-6


def _is_power_of_two(n):
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid1D:
    """Uniform periodic grid; sample ``i`` sits at ``x_min + i * spacing``."""

    n: int
    x_min: float
    x_max: float

    def __post_init__(self):
        n = int(self.n)
        if n != self.n or n < 8 or not _is_power_of_two(n):
            raise ParameterError(f"grid size n must be a power of two >= 8, got {self.n!r}")
        if not (np.isfinite(self.x_min) and np.isfinite(self.x_max)) or self.x_max <= self.x_min:
            raise ParameterError(f"need finite x_max > x_min, got [{self.x_min}, {self.x_max}]")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "x_min", float(self.x_min))
        object.__setattr__(self, "x_max", float(self.x_max))

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @property
    def spacing(self) -> float:
        return self.length / self.n

    @property
    def points(self) -> np.ndarray:
        return self.x_min + self.spacing * np.arange(self.n)

    def conjugate(self, hbar: float = 1.0) -> "Grid1D":
        """Centred conjugate grid for a transform with Planck constant ``hbar``."""
        if not hbar > 0:
            raise ParameterError(f"hbar must be positive, got {hbar}")
        dp = 2.0 * np.pi * hbar / (self.n * self.spacing)
        return Grid1D(self.n, -0.5 * self.n * dp, 0.5 * self.n * dp)

    def index_of(self, x: float) -> int:
        """Index of the sample nearest to ``x`` (no wrapping)."""
        return int(np.clip(np.rint((x - self.x_min) / self.spacing), 0, self.n - 1))


@dataclass(frozen=True)
class Grid2D:
    """Phase-space grid, axis 0 is ``q`` and axis 1 is ``p``."""

    q_axis: Grid1D
    p_axis: Grid1D

    @property
    def shape(self):
        return (self.q_axis.n, self.p_axis.n)

    @property
    def cell_area(self) -> float:
        return self.q_axis.spacing * self.p_axis.spacing

    def mesh(self):
        return np.meshgrid(self.q_axis.points, self.p_axis.points, indexing="ij")

    def conjugate(self) -> "Grid2D":
        return Grid2D(self.q_axis.conjugate(1.0), self.p_axis.conjugate(1.0))


class _Field:
    _dtype = np.complex128

    def __post_init__(self):
        values = np.array(self.values, dtype=self._dtype, copy=True)
        if values.shape != self.grid_shape:
            raise DataError(f"values have shape {values.shape}, grid needs {self.grid_shape}")
        if not np.all(np.isfinite(values)):
            raise DataError("field contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def cell(self) -> float:
        raise NotImplementedError

    def with_values(self, values):
        return type(self)(self.grid, values)


@dataclass(frozen=True, eq=False)
class ComplexField1D(_Field):
    grid: Grid1D
    values: np.ndarray

    @property
    def grid_shape(self):
        return (self.grid.n,)

    @property
    def cell(self):
        return self.grid.spacing

    def density(self) -> "RealField1D":
        return RealField1D(self.grid, np.abs(self.values) ** 2)


@dataclass(frozen=True, eq=False)
class ComplexField2D(_Field):
    grid: Grid2D
    values: np.ndarray

    @property
    def grid_shape(self):
        return self.grid.shape

    @property
    def cell(self):
        return self.grid.cell_area

    def density(self) -> "RealField2D":
        return RealField2D(self.grid, np.abs(self.values) ** 2)


@dataclass(frozen=True, eq=False)
class RealField1D(_Field):
    grid: Grid1D
    values: np.ndarray
    _dtype = np.float64

    @property
    def grid_shape(self):
        return (self.grid.n,)

    @property
    def cell(self):
        return self.grid.spacing


@dataclass(frozen=True, eq=False)
class RealField2D(_Field):
    grid: Grid2D
    values: np.ndarray
    _dtype = np.float64

    @property
    def grid_shape(self):
        return self.grid.shape

    @property
    def cell(self):
        return self.grid.cell_area

    def q_marginal(self) -> RealField1D:
        return RealField1D(self.grid.q_axis, self.values.sum(axis=1) * self.grid.p_axis.spacing)

    def p_marginal(self) -> RealField1D:
        return RealField1D(self.grid.p_axis, self.values.sum(axis=0) * self.grid.q_axis.spacing)


AnyField = Union[ComplexField1D, ComplexField2D, RealField1D, RealField2D]


def integrate(f: AnyField):
    """Midpoint quadrature of the sampled values over the box."""
    return f.values.sum() * f.cell


def norm_sq(f: AnyField) -> float:
    """Squared L2 norm by midpoint quadrature."""
    return float(np.sum(np.abs(f.values) ** 2) * f.cell)


def edge_mass(density: Union[RealField1D, RealField2D], fraction: float = 0.05) -> float:
    """Mass of ``density`` lying within ``fraction`` of the box width of any edge.

    Used as the wraparound diagnostic for periodic transforms.
    """
    v = np.asarray(density.values)
    mask = np.zeros(v.shape, dtype=bool)
    for axis, n in enumerate(v.shape):
        k = max(1, int(np.ceil(fraction * n)))
        idx = [slice(None)] * v.ndim
        idx[axis] = slice(0, k)
        mask[tuple(idx)] = True
        idx[axis] = slice(n - k, n)
        mask[tuple(idx)] = True
    return float(np.abs(v[mask]).sum() * density.cell)


def _cell_factor(conj_points, spacing, hbar):
    # exact transform of the piecewise-constant interpolant = DFT * sinc
    return np.sinc(conj_points * spacing / (2.0 * np.pi * hbar))


def dft_x_to_p(f: ComplexField1D, hbar: float = 1.0, piecewise_constant: bool = False) -> ComplexField1D:
    """Transform ``psi(x)`` to ``psi_bar(p)`` on the centred conjugate grid.

    With ``piecewise_constant`` the samples are read as cell values (cell ``i``
    centred on sample ``i``) and the result is the exact continuous transform
    of that step function on the conjugate grid. The plain transform is
    unitary; the piecewise-constant one is not.
    """
    if not hbar > 0:
        raise ParameterError(f"hbar must be positive, got {hbar}")
    grid = f.grid
    pgrid = grid.conjugate(hbar)
    p = pgrid.points
    out = np.fft.fftshift(np.fft.fft(f.values))
    out *= grid.spacing / np.sqrt(2.0 * np.pi * hbar) * np.exp(-1j * p * grid.x_min / hbar)
    if piecewise_constant:
        out *= _cell_factor(p, grid.spacing, hbar)
    return ComplexField1D(pgrid, out)


def idft_p_to_x(g: ComplexField1D, hbar: float, x_grid: Grid1D) -> ComplexField1D:
    """Inverse of :func:`dft_x_to_p` (plain mode) back onto ``x_grid``."""
    if not hbar > 0:
        raise ParameterError(f"hbar must be positive, got {hbar}")
    if x_grid.conjugate(hbar) != g.grid:
        raise DataError("momentum grid is not the conjugate of x_grid")
    p = g.grid.points
    c = g.values * np.exp(1j * p * x_grid.x_min / hbar)
    out = np.fft.ifft(np.fft.ifftshift(c)) * (g.grid.n * g.grid.spacing / np.sqrt(2.0 * np.pi * hbar))
    return ComplexField1D(x_grid, out)


def dft2_phi_to_lambda(f: ComplexField2D, piecewise_constant=False) -> ComplexField2D:
    """Phase-space transform ``psi(q, p) -> psi_bar(lambda_q, lambda_p)`` with unit scale.

    ``piecewise_constant`` may be a bool or a per-axis pair.
    """
    if isinstance(piecewise_constant, (bool, np.bool_)):
        piecewise_constant = (bool(piecewise_constant),) * 2
    grid = f.grid
    lgrid = grid.conjugate()
    lq, lp = lgrid.q_axis.points, lgrid.p_axis.points
    out = np.fft.fftshift(np.fft.fft2(f.values))
    phase_q = np.exp(-1j * lq * grid.q_axis.x_min)
    phase_p = np.exp(-1j * lp * grid.p_axis.x_min)
    if piecewise_constant[0]:
        phase_q = phase_q * _cell_factor(lq, grid.q_axis.spacing, 1.0)
    if piecewise_constant[1]:
        phase_p = phase_p * _cell_factor(lp, grid.p_axis.spacing, 1.0)
    out *= grid.cell_area / (2.0 * np.pi) * np.outer(phase_q, phase_p)
    return ComplexField2D(lgrid, out)


def idft2_lambda_to_phi(g: ComplexField2D, phi_grid: Grid2D) -> ComplexField2D:
    if phi_grid.conjugate() != g.grid:
        raise DataError("lambda grid is not the conjugate of phi_grid")
    lq, lp = g.grid.q_axis.points, g.grid.p_axis.points
    c = g.values * np.outer(np.exp(1j * lq * phi_grid.q_axis.x_min), np.exp(1j * lp * phi_grid.p_axis.x_min))
    n_total = g.grid.shape[0] * g.grid.shape[1]
    out = np.fft.ifft2(np.fft.ifftshift(c)) * (n_total * g.grid.cell_area / (2.0 * np.pi))
    return ComplexField2D(phi_grid, out)


def wavenumbers(grid: Grid1D) -> np.ndarray:
    """Angular wavenumbers in numpy FFT order."""
    return 2.0 * np.pi * np.fft.fftfreq(grid.n, d=grid.spacing)


def spectral_derivative(f: ComplexField1D) -> ComplexField1D:
    """d/dx by Fourier multiplication; the Nyquist mode is dropped."""
    k = wavenumbers(f.grid)
    k[f.grid.n // 2] = 0.0
    return ComplexField1D(f.grid, np.fft.ifft(1j * k * np.fft.fft(f.values)))


def _checked_density(density: RealField1D):
    v = np.asarray(density.values)
    if v.min() < -NEGATIVE_DENSITY_TOL:
        raise DataError(f"density has negative entries (min {v.min():.3g})")
    total = float(v.sum() * density.cell)
    if abs(total - 1.0) >= RENORMALIZE_TOL:
        raise DataError(f"density integrates to {total:.9g}, not 1")
    return v / total


def moments(density: RealField1D):
    """Mean and variance of a normalized density by midpoint quadrature."""
    v = _checked_density(density)
    x = density.grid.points
    w = v * density.cell
    mean = float(np.dot(w, x))
    var = float(np.dot(w, (x - mean) ** 2))
    return mean, var


class Extremum(NamedTuple):
    position: float
    kind: str
    contrast: float


def local_extrema(density: RealField1D, contrast_threshold: float) -> list:
    """Interior extrema whose relative contrast exceeds ``contrast_threshold``.

    Contrast uses topographic prominence: for a maximum of height ``v`` and
    prominence ``d`` it is ``d / v``; for a minimum it is ``d / (v + d)``, i.e.
    the depth relative to the reference maximum that encloses it.
    """
    if not 0.0 < contrast_threshold < 1.0:
        raise ParameterError(f"contrast_threshold must lie in (0, 1), got {contrast_threshold}")
    v = np.asarray(density.values, dtype=float)
    x = density.grid.points
    found = []
    peaks, _ = find_peaks(v)
    if peaks.size:
        prom = peak_prominences(v, peaks)[0]
        height = v[peaks]
        with np.errstate(divide="ignore", invalid="ignore"):
            c = np.where(height > 0, prom / height, 0.0)
        found += [Extremum(float(x[i]), "max", float(ci)) for i, ci in zip(peaks, c)]
    troughs, _ = find_peaks(-v)
    if troughs.size:
        prom = peak_prominences(-v, troughs)[0]
        ref = v[troughs] + prom
        with np.errstate(divide="ignore", invalid="ignore"):
            c = np.where(ref > 0, prom / ref, 0.0)
        found += [Extremum(float(x[i]), "min", float(ci)) for i, ci in zip(troughs, c)]
    found = [e for e in found if e.contrast > contrast_threshold]
    return sorted(found, key=lambda e: e.position)


# -- CSV serialization -------------------------------------------------------

_FMT = "%.17g"


def _grid_header(grid):
    if isinstance(grid, Grid2D):
        q, p = grid.q_axis, grid.p_axis
        return f"# grid: {q.x_min!r} {q.x_max!r} {q.n} {p.x_min!r} {p.x_max!r} {p.n}"
    return f"# grid: {grid.x_min!r} {grid.x_max!r} {grid.n}"


def _parse_header(line):
    if not line.startswith("# grid:"):
        raise DataError(f"missing '# grid:' header, got {line[:40]!r}")
    parts = line.split(":", 1)[1].split()
    if len(parts) == 3:
        return Grid1D(int(parts[2]), float(parts[0]), float(parts[1]))
    if len(parts) == 6:
        return Grid2D(Grid1D(int(parts[2]), float(parts[0]), float(parts[1])),
                      Grid1D(int(parts[5]), float(parts[3]), float(parts[4])))
    raise DataError(f"malformed grid header {line!r}")


def _coord_columns(grid):
    if isinstance(grid, Grid2D):
        q, p = grid.mesh()
        return [q.ravel(), p.ravel()], "q,p"
    return [grid.points], "x"


def _write(path, grid, columns, names):
    path = Path(path)
    coords, cnames = _coord_columns(grid)
    data = np.column_stack(coords + columns)
    header = _grid_header(grid) + f"\n# columns: {cnames},{names}"
    np.savetxt(path, data, fmt=_FMT, delimiter=",", header=header, comments="")
    return path


def write_field_csv(path, field: Union[ComplexField1D, ComplexField2D]) -> Path:
    """Rows ``x,re,im`` (1D) or ``q,p,re,im`` (2D, row-major)."""
    v = np.asarray(field.values).ravel()
    return _write(path, field.grid, [v.real, v.imag], "re,im")


def write_density_csv(path, density: Union[RealField1D, RealField2D]) -> Path:
    """Rows ``x,density`` (1D) or ``q,p,density`` (2D, row-major)."""
    return _write(path, density.grid, [np.asarray(density.values).ravel()], "density")


def _read(path, nvalues):
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().strip()
    grid = _parse_header(header)
    try:
        data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    except ValueError as exc:
        raise DataError(f"{path}: unreadable rows ({exc})") from None
    ncoord = 2 if isinstance(grid, Grid2D) else 1
    shape = grid.shape if isinstance(grid, Grid2D) else (grid.n,)
    if data.shape != (int(np.prod(shape)), ncoord + nvalues):
        raise DataError(f"{path}: expected {int(np.prod(shape))} rows of {ncoord + nvalues} columns, "
                        f"found shape {data.shape}")
    return grid, data[:, ncoord:], shape


def read_field_csv(path):
    grid, cols, shape = _read(path, 2)
    values = (cols[:, 0] + 1j * cols[:, 1]).reshape(shape)
    return (ComplexField2D if isinstance(grid, Grid2D) else ComplexField1D)(grid, values)


def read_density_csv(path):
    grid, cols, shape = _read(path, 1)
    values = cols[:, 0].reshape(shape)
    return (RealField2D if isinstance(grid, Grid2D) else RealField1D)(grid, values)
