"""Periodic scalar and Hermitian-matrix fields on the flat torus C^n / (Z^n + i Z^n).

Coordinates are z^j = x^j + i y^j with all 2n real axes of period 1, sampled
on a uniform N^d grid.  A field may depend on only a subset of the real axes
(it is constant along the others); this keeps n = 3 experiments at desk
scale while leaving every operator exact.  Real axis 2j is x^{j+1} and axis
2j+1 is y^{j+1}.

Derivatives use the convention d/dz^j = (d/dx^j - i d/dy^j) / 2, so on the
Fourier mode exp(2 pi i k.x) the symbol of d/dz^j is pi (k_y^j + i k_x^j).

Fields are immutable after construction; all transforms are stateless numpy
FFT calls, safe to evaluate concurrently.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "TorusGrid",
    "ScalarField",
    "MatrixField",
    "spectral_hessian",
    "gradient_dz",
    "laplacian",
    "mean",
    "sup",
    "sup_normalize",
    "mean_normalize",
    "cosine_field",
    "constant_matrix_field",
    "write_field",
    "read_field",
    "FieldIOError",
]


class FieldIOError(ValueError):
    """Malformed or truncated field file."""


def _is_pow2(n):
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class TorusGrid:
    """Uniform sample grid on [0,1)^{2n}, restricted to the active real axes."""

    n: int
    N: int
    axes: tuple = None  # active real axes; None means all 2n

    def __post_init__(self):
        if not (2 <= self.n <= 8):
            raise ValueError(f"complex dimension n={self.n} outside [2, 8]")
        if not (_is_pow2(self.N) and 4 <= self.N <= 64):
            raise ValueError("grid size N must be a power of two in [4, 64]")
        axes = tuple(range(2 * self.n)) if self.axes is None else tuple(self.axes)
        if sorted(set(axes)) != list(axes) or any(a < 0 or a >= 2 * self.n for a in axes):
            raise ValueError("axes must be a sorted subset of range(2n)")
        object.__setattr__(self, "axes", axes)

    @property
    def shape(self):
        return (self.N,) * len(self.axes)

    @property
    def npoints(self):
        return self.N ** len(self.axes)

    def coordinate(self, axis):
        """Samples of one real coordinate, broadcast over the grid (0 if inactive)."""
        if axis not in self.axes:
            return np.zeros(self.shape)
        p = self.axes.index(axis)
        x = np.arange(self.N) / self.N
        shape = [1] * len(self.axes)
        shape[p] = self.N
        return np.broadcast_to(x.reshape(shape), self.shape).copy()

    def _freq(self, axis):
        """Integer frequencies along one real axis, broadcast-shaped (0 if inactive)."""
        if axis not in self.axes:
            return np.zeros((1,) * len(self.axes))
        p = self.axes.index(axis)
        k = np.fft.fftfreq(self.N) * self.N
        shape = [1] * len(self.axes)
        shape[p] = self.N
        return k.reshape(shape)

    def dz_symbols(self):
        """Fourier symbols c_j of d/dz^j, j = 0..n-1, broadcastable to the grid."""
        return [np.pi * (self._freq(2 * j + 1) + 1j * self._freq(2 * j)) for j in range(self.n)]


@dataclass(frozen=True)
class ScalarField:
    grid: TorusGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ValueError(f"values shape {v.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("non-finite values in scalar field")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class MatrixField:
    """Pointwise Hermitian n x n matrices over a torus grid."""

    grid: TorusGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        want = self.grid.shape + (self.grid.n, self.grid.n)
        if v.shape != want:
            raise ValueError(f"values shape {v.shape} != {want}")
        object.__setattr__(self, "values", v)


def constant_matrix_field(grid, m):
    m = np.asarray(m, dtype=complex)
    vals = np.broadcast_to(m, grid.shape + m.shape).copy()
    return MatrixField(grid, vals)


def spectral_hessian(u: ScalarField) -> MatrixField:
    """Complex Hessian u_{j k-bar} by Fourier differentiation.

    Hermitian pointwise by construction (upper triangle computed, mirror
    conjugated); each diagonal entry has exactly zero grid mean since its
    symbol vanishes at k = 0.
    """
    grid = u.grid
    n = grid.n
    uhat = np.fft.fftn(u.values)
    c = grid.dz_symbols()
    out = np.empty(grid.shape + (n, n), dtype=complex)
    for j in range(n):
        for k in range(j, n):
            comp = np.fft.ifftn(-c[j] * np.conj(c[k]) * uhat)
            if j == k:
                out[..., j, j] = comp.real
            else:
                out[..., j, k] = comp
                out[..., k, j] = np.conj(comp)
    return MatrixField(grid, out)


def gradient_dz(u: ScalarField) -> np.ndarray:
    """Holomorphic derivatives (d/dz^j) u, shape grid.shape + (n,), complex."""
    grid = u.grid
    uhat = np.fft.fftn(u.values)
    c = grid.dz_symbols()
    out = np.empty(grid.shape + (grid.n,), dtype=complex)
    for j in range(grid.n):
        out[..., j] = np.fft.ifftn(c[j] * uhat)
    return out


def laplacian(g, u: ScalarField) -> ScalarField:
    """Metric Laplacian g^{jk-bar} u_{jk-bar} for a constant metric g.

    Applied directly through its (real, nonpositive) Fourier symbol
    -c^* g^{-1} c; agrees pointwise with the trace of the spectral Hessian.
    """
    grid = u.grid
    ginv = np.linalg.inv(np.asarray(g, dtype=complex))
    c = grid.dz_symbols()
    sym = np.zeros(grid.shape, dtype=float)
    for a in range(grid.n):
        for b in range(grid.n):
            sym = sym - (np.conj(c[a]) * ginv[a, b] * c[b]).real
    uhat = np.fft.fftn(u.values)
    return ScalarField(grid, np.fft.ifftn(sym * uhat).real)


def mean(f: ScalarField) -> float:
    return float(np.sum(f.values) / f.values.size)


def sup(f: ScalarField) -> float:
    return float(np.max(f.values))


def sup_normalize(f: ScalarField) -> ScalarField:
    return ScalarField(f.grid, f.values - sup(f))


def mean_normalize(f: ScalarField) -> ScalarField:
    return ScalarField(f.grid, f.values - mean(f))


def cosine_field(grid: TorusGrid, modes) -> ScalarField:
    """Sum of plane-wave cosines amplitude*cos(2 pi k.x + phase).

    Each mode is a mapping with integer frequencies ``k`` over the 2n real
    axes (zero on inactive axes), an ``amplitude`` and an optional ``phase``.
    """
    vals = np.zeros(grid.shape)
    for mode in modes:
        k = list(mode["k"])
        if len(k) != 2 * grid.n:
            raise ValueError(f"mode k must have {2 * grid.n} entries, got {len(k)}")
        angle = np.zeros(grid.shape)
        for a, ka in enumerate(k):
            if ka == 0:
                continue
            if a not in grid.axes:
                raise ValueError(f"mode excites inactive real axis {a}")
            angle = angle + 2.0 * np.pi * ka * grid.coordinate(a)
        vals = vals + float(mode["amplitude"]) * np.cos(angle + float(mode.get("phase", 0.0)))
    return ScalarField(grid, vals)


# ---------------------------------------------------------------------------
# field file format: one-line JSON header, then raw little-endian float64.
# Matrix data is complex128, i.e. interleaved re/im pairs, row-major.

def write_field(path, fld):
    if isinstance(fld, ScalarField):
        kind, payload = "scalar", np.ascontiguousarray(fld.values, dtype="<f8").tobytes()
    elif isinstance(fld, MatrixField):
        kind, payload = "matrix", np.ascontiguousarray(fld.values, dtype="<c16").tobytes()
    else:
        raise TypeError(f"cannot serialize {type(fld).__name__}")
    header = {
        "n": fld.grid.n,
        "N": fld.grid.N,
        "axes": list(fld.grid.axes),
        "kind": kind,
        "layout": "row-major",
        "packing": "full complex interleaved re/im",
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("ascii") + b"\n")
        fh.write(payload)


def read_field(path):
    with open(path, "rb") as fh:
        line = fh.readline()
        try:
            header = json.loads(line.decode("ascii"))
            n, N = int(header["n"]), int(header["N"])
            axes = tuple(int(a) for a in header["axes"])
            kind = header["kind"]
        except (ValueError, KeyError, UnicodeDecodeError) as exc:
            raise FieldIOError(f"bad field header in {path}: {exc}") from None
        grid = TorusGrid(n=n, N=N, axes=axes)
        if kind == "scalar":
            dtype, shape = np.dtype("<f8"), grid.shape
        elif kind == "matrix":
            dtype, shape = np.dtype("<c16"), grid.shape + (n, n)
        else:
            raise FieldIOError(f"unknown field kind {kind!r} in {path}")
        count = int(np.prod(shape))
        payload = fh.read()
        if len(payload) != count * dtype.itemsize:
            raise FieldIOError(
                f"field payload in {path} has {len(payload)} bytes, expected {count * dtype.itemsize}"
            )
        data = np.frombuffer(payload, dtype=dtype).reshape(shape).copy()
    if kind == "scalar":
        return ScalarField(grid, data.astype(float))
    return MatrixField(grid, data.astype(complex))
