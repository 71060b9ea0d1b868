"""Truncated Fourier series on the d-torus with analytic-strip norm bounds.

A ``FourierMap`` represents a real-analytic periodic map T^d -> C^{n1 x n2}
through the coefficients f_k of

    f(theta) = sum_k  f_k  exp(2*pi*i k.theta),       k in Z^d, |k_i| <= N_i,

stored on a dense rectangular index box together with per-direction grid
sizes M_i >= 2*N_i + 1.  Differentiation and averaging act coefficient-wise
and are exact on the truncation; products are computed on a dealiased grid
(at least twice the sum of the band limits) and truncated back, so the
library always manipulates the *truncated model* of each object.

Norms: the sup of |f| on the complex strip |Im theta| < rho is bounded
entry-wise by the Fourier majorant

    sum_k |f_k| exp(2*pi*|k|_1*rho),

and matrix entries are combined by the maximum row sum (maximum column sum
for the transposed norm).  The majorant dominates the true strip sup of the
truncated series, which is the direction the certification layer needs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

TWO_PI = 2.0 * np.pi


class FourierShapeError(ValueError):
    """Band/grid/matrix shapes of the operands do not match."""


class StripOverflowError(OverflowError):
    """Majorant weights overflow double precision: rho too large for this band."""


@lru_cache(maxsize=128)
def _index_box(bands: tuple) -> tuple:
    """Per-axis integer mode vectors -N_i .. N_i."""
    return tuple(np.arange(-n, n + 1) for n in bands)


@lru_cache(maxsize=128)
def _k1_box(bands: tuple) -> np.ndarray:
    """|k|_1 over the index box, shape (2N_1+1, ..., 2N_d+1)."""
    axes = _index_box(bands)
    total = np.zeros(tuple(2 * n + 1 for n in bands))
    for i, ax in enumerate(axes):
        shape = [1] * len(bands)
        shape[i] = ax.size
        total = total + np.abs(ax).reshape(shape)
    return total


def _embed_slices(bands: tuple, grid: tuple):
    """Advanced-index arrays mapping box position k+N to FFT bin k mod M."""
    idx = tuple(np.arange(-n, n + 1) % m for n, m in zip(bands, grid))
    return np.ix_(*idx)


@dataclass(frozen=True)
class FourierMap:
    """Matrix-valued truncated Fourier series on T^d.

    coeffs: complex array of shape (2N_1+1, ..., 2N_d+1, n1, n2); the
    coefficient of mode k sits at position (k_1+N_1, ..., k_d+N_d).
    """

    coeffs: np.ndarray
    bands: tuple
    grid: tuple

    def __post_init__(self):
        bands = tuple(int(n) for n in self.bands)
        grid = tuple(int(m) for m in self.grid)
        object.__setattr__(self, "bands", bands)
        object.__setattr__(self, "grid", grid)
        expect = tuple(2 * n + 1 for n in bands)
        if self.coeffs.ndim != len(bands) + 2:
            raise FourierShapeError(
                f"coeffs must have {len(bands)} torus axes plus 2 matrix axes, "
                f"got shape {self.coeffs.shape}"
            )
        if self.coeffs.shape[: len(bands)] != expect:
            raise FourierShapeError(
                f"coefficient box {self.coeffs.shape[:len(bands)]} does not match bands {bands}"
            )
        if len(grid) != len(bands) or any(m < 2 * n + 1 for n, m in zip(bands, grid)):
            raise FourierShapeError(f"grid {grid} must satisfy M_i >= 2*N_i+1 for bands {bands}")
        if self.coeffs.dtype != np.complex128:
            object.__setattr__(self, "coeffs", self.coeffs.astype(np.complex128))

    # -- basic properties ---------------------------------------------------

    @property
    def d(self) -> int:
        return len(self.bands)

    @property
    def shape(self) -> tuple:
        return self.coeffs.shape[-2:]

    @property
    def T(self) -> "FourierMap":
        return FourierMap(np.swapaxes(self.coeffs, -1, -2), self.bands, self.grid)

    def block(self, rows: slice, cols: slice) -> "FourierMap":
        return FourierMap(self.coeffs[..., rows, cols], self.bands, self.grid)

    # -- constructors -------------------------------------------------------

    @classmethod
    def zeros(cls, bands, grid, shape) -> "FourierMap":
        bands = tuple(bands)
        box = tuple(2 * n + 1 for n in bands)
        return cls(np.zeros(box + tuple(shape), dtype=np.complex128), bands, tuple(grid))

    @classmethod
    def constant(cls, matrix, bands, grid) -> "FourierMap":
        matrix = np.atleast_2d(np.asarray(matrix, dtype=np.complex128))
        out = cls.zeros(bands, grid, matrix.shape)
        out.coeffs[tuple(n for n in out.bands)] = matrix
        return out

    @classmethod
    def from_samples(cls, samples: np.ndarray, bands, grid=None) -> "FourierMap":
        """FFT analysis of uniform-grid samples, band-truncated and symmetrized.

        ``samples`` has shape (M_1, ..., M_d, n1, n2); ``grid`` defaults to the
        sample counts.  Inverse of :meth:`eval_grid` on band-limited input.
        """
        samples = np.asarray(samples, dtype=np.complex128)
        bands = tuple(int(n) for n in bands)
        d = len(bands)
        sample_grid = samples.shape[:d]
        if grid is None:
            grid = sample_grid
        grid = tuple(int(m) for m in grid)
        if sample_grid != grid:
            raise FourierShapeError(f"sample grid {sample_grid} does not match grid {grid}")
        if any(m < 2 * n + 1 for n, m in zip(bands, grid)):
            raise FourierShapeError(f"grid {grid} too small for bands {bands}")
        hat = np.fft.fftn(samples, axes=tuple(range(d))) / float(np.prod(grid))
        coeffs = hat[_embed_slices(bands, grid)]
        return cls(_symmetrize(coeffs), bands, grid)

    # -- synthesis / analysis ------------------------------------------------

    def eval_grid(self, grid=None) -> np.ndarray:
        """Samples on the uniform grid theta_j = j/M (complex array)."""
        grid = self.grid if grid is None else tuple(int(m) for m in grid)
        if any(m < 2 * n + 1 for n, m in zip(self.bands, grid)):
            raise FourierShapeError(f"evaluation grid {grid} too small for bands {self.bands}")
        full = np.zeros(grid + self.shape, dtype=np.complex128)
        full[_embed_slices(self.bands, grid)] = self.coeffs
        axes = tuple(range(self.d))
        return np.fft.ifftn(full, axes=axes) * float(np.prod(grid))

    def eval_at(self, theta: np.ndarray) -> np.ndarray:
        """Direct O(#modes * #points) summation at arbitrary angles.

        Slow but independent of the FFT path; used as an oracle and for
        off-grid evaluation.  ``theta`` has shape (..., d).
        """
        theta = np.atleast_2d(np.asarray(theta, dtype=np.float64))
        lead = theta.shape[:-1]
        flat = theta.reshape(-1, self.d)
        axes = _index_box(self.bands)
        # phase factors per axis, then an outer product walk across axes
        work = np.ones((flat.shape[0], 1), dtype=np.complex128)
        for i, ax in enumerate(axes):
            phase = np.exp(TWO_PI * 1j * np.outer(flat[:, i], ax))
            work = (work[:, :, None] * phase[:, None, :]).reshape(flat.shape[0], -1)
        cf = self.coeffs.reshape(-1, *self.shape)
        out = np.tensordot(work, cf, axes=(1, 0))
        return out.reshape(lead + self.shape)

    # -- coefficient-wise calculus -------------------------------------------

    def deriv(self, axis: int) -> "FourierMap":
        """Partial derivative along torus axis (0-based): f_k -> 2*pi*i*k_axis*f_k."""
        if not 0 <= axis < self.d:
            raise FourierShapeError(f"axis {axis} out of range for d={self.d}")
        k = _index_box(self.bands)[axis]
        shape = [1] * self.coeffs.ndim
        shape[axis] = k.size
        return FourierMap(self.coeffs * (TWO_PI * 1j * k.reshape(shape)), self.bands, self.grid)

    def lie(self, omega: np.ndarray) -> "FourierMap":
        """Left operator -sum_i omega_i d/dtheta_i: f_k -> -2*pi*i*(k.omega)*f_k.

        Evaluated as the weighted sum of partial derivatives so the identity
        lie(f, omega) = -sum_i omega_i * deriv(f, i) holds coefficient-wise
        exactly, not merely to rounding.
        """
        omega = np.asarray(omega, dtype=np.float64)
        if omega.shape != (self.d,):
            raise FourierShapeError(f"omega must have length d={self.d}")
        out = self.deriv(0) * (-omega[0])
        for i in range(1, self.d):
            out = out + self.deriv(i) * (-omega[i])
        return out

    def average(self) -> np.ndarray:
        """The k = 0 coefficient (complex (n1, n2) matrix; real up to noise
        for real-analytic maps)."""
        avg = self.coeffs[tuple(n for n in self.bands)]
        return np.array(avg)

    # -- norms ----------------------------------------------------------------

    def norm(self, rho: float, transpose: bool = False) -> "StripNorm":
        """Fourier-majorant bound for the strip sup-norm at half-width rho.

        Entry-wise sum_k |f_k| e^{2 pi |k|_1 rho}; entries combined by max row
        sum (max column sum when ``transpose``).
        """
        if rho < 0:
            raise ValueError("rho must be >= 0")
        k1 = _k1_box(self.bands)
        arg = TWO_PI * rho * k1
        if arg.size and float(np.max(arg)) > 700.0:
            raise StripOverflowError(
                f"e^(2 pi |k|_1 rho) overflows at rho={rho} for bands {self.bands}"
            )
        weights = np.exp(arg)
        entry = np.tensordot(weights, np.abs(self.coeffs), axes=(tuple(range(self.d)),) * 2)
        value = float(np.max(entry.sum(axis=0 if transpose else 1)))
        return StripNorm(rho=float(rho), value=value)

    def real_symmetry_defect(self) -> float:
        """Max deviation from f_{-k} = conj(f_k)."""
        flipped = np.conj(self.coeffs[tuple(slice(None, None, -1) for _ in self.bands)])
        return float(np.max(np.abs(self.coeffs - flipped))) if self.coeffs.size else 0.0

    # -- band management -------------------------------------------------------

    def truncate(self, bands, grid=None) -> "FourierMap":
        """Restrict to a smaller index box (tails are discarded)."""
        bands = tuple(int(n) for n in bands)
        if any(nb > n for nb, n in zip(bands, self.bands)):
            raise FourierShapeError(f"cannot truncate {self.bands} to larger bands {bands}")
        sl = tuple(slice(n - nb, n + nb + 1) for n, nb in zip(self.bands, bands))
        grid = tuple(grid) if grid is not None else tuple(
            max(m, 2 * nb + 1) for m, nb in zip(self.grid, bands)
        )
        return FourierMap(self.coeffs[sl].copy(), bands, grid)

    def pad_bands(self, bands, grid=None) -> "FourierMap":
        """Embed into a larger index box (new modes are zero)."""
        bands = tuple(int(n) for n in bands)
        if any(nb < n for nb, n in zip(bands, self.bands)):
            raise FourierShapeError(f"cannot pad {self.bands} into smaller bands {bands}")
        out = FourierMap.zeros(bands, grid if grid is not None else
                               tuple(max(m, 2 * nb + 1) for m, nb in zip(self.grid, bands)),
                               self.shape)
        sl = tuple(slice(nb - n, nb + n + 1) for n, nb in zip(self.bands, bands))
        out.coeffs[sl] = self.coeffs
        return out

    def with_grid(self, grid) -> "FourierMap":
        return FourierMap(self.coeffs, self.bands, tuple(grid))

    # -- algebra ----------------------------------------------------------------

    def _check_compatible(self, other: "FourierMap"):
        if self.bands != other.bands or self.grid != other.grid:
            raise FourierShapeError(
                f"operands have bands/grid {self.bands}/{self.grid} vs {other.bands}/{other.grid}"
            )

    def __add__(self, other: "FourierMap") -> "FourierMap":
        self._check_compatible(other)
        return FourierMap(self.coeffs + other.coeffs, self.bands, self.grid)

    def __sub__(self, other: "FourierMap") -> "FourierMap":
        self._check_compatible(other)
        return FourierMap(self.coeffs - other.coeffs, self.bands, self.grid)

    def __neg__(self) -> "FourierMap":
        return FourierMap(-self.coeffs, self.bands, self.grid)

    def __mul__(self, scalar) -> "FourierMap":
        return FourierMap(self.coeffs * scalar, self.bands, self.grid)

    __rmul__ = __mul__

    def add_constant(self, matrix) -> "FourierMap":
        out = FourierMap(self.coeffs.copy(), self.bands, self.grid)
        out.coeffs[tuple(n for n in self.bands)] += np.asarray(matrix, dtype=np.complex128)
        return out

    def matmul_constant(self, matrix) -> "FourierMap":
        """Right-multiply by a constant matrix (exact in coefficients)."""
        matrix = np.asarray(matrix, dtype=np.complex128)
        if matrix.ndim == 1:
            matrix = matrix[:, None]
        return FourierMap(self.coeffs @ matrix, self.bands, self.grid)

    def rmatmul_constant(self, matrix) -> "FourierMap":
        """Left-multiply by a constant matrix (exact in coefficients)."""
        matrix = np.asarray(matrix, dtype=np.complex128)
        return FourierMap(np.einsum("ij,...jk->...ik", matrix, self.coeffs), self.bands, self.grid)

    # -- serialization -------------------------------------------------------------

    def to_json_dict(self) -> dict:
        """{"dims": [d, n1, n2], "bands": [...], "coeffs": [re, im, ...]}.

        Coefficients are flattened in row-major order over (k_1+N_1, ...,
        k_d+N_d, row, col), each complex number as a (re, im) pair.
        """
        flat = self.coeffs.reshape(-1)
        pairs = np.empty(2 * flat.size, dtype=np.float64)
        pairs[0::2] = flat.real
        pairs[1::2] = flat.imag
        return {
            "dims": [self.d, self.shape[0], self.shape[1]],
            "bands": list(self.bands),
            "coeffs": pairs.tolist(),
        }

    @classmethod
    def from_json_dict(cls, doc: dict, grid=None) -> "FourierMap":
        d, n1, n2 = (int(v) for v in doc["dims"])
        bands = tuple(int(n) for n in doc["bands"])
        if len(bands) != d:
            raise FourierShapeError("dims and bands disagree on d")
        box = tuple(2 * n + 1 for n in bands)
        pairs = np.asarray(doc["coeffs"], dtype=np.float64)
        flat = pairs[0::2] + 1j * pairs[1::2]
        coeffs = flat.reshape(box + (n1, n2))
        if grid is None:
            grid = tuple(2 * n + 1 for n in bands)
        return cls(coeffs, bands, tuple(grid))

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str, grid=None) -> "FourierMap":
        return cls.from_json_dict(json.loads(text), grid=grid)


@dataclass(frozen=True)
class StripNorm:
    """A nonnegative bound valid on the strip of half-width rho."""

    rho: float
    value: float

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("norm value must be >= 0")


def cauchy_bound(norm: StripNorm, delta: float, kind: str, dim: int | None = None) -> StripNorm:
    """Cauchy estimate carrying a strip norm from rho to rho - delta.

    kind "D":           ||D M||_{rho-delta}     <= (d/delta) ||M||_rho   (dim = d)
    kind "D-transpose": ||(D u)^T||_{rho-delta} <= (1/delta) ||u||_rho   (scalar u)
    kind "vector":      ||(D w)^T||_{rho-delta} <= (n/delta) ||w||_rho   (dim = n)
    """
    if not 0 < delta < norm.rho:
        raise ValueError(f"delta must lie in (0, rho={norm.rho}), got {delta}")
    if kind == "D":
        if dim is None:
            raise ValueError("kind 'D' needs dim = torus dimension d")
        factor = dim / delta
    elif kind == "D-transpose":
        factor = 1.0 / delta
    elif kind == "vector":
        if dim is None:
            raise ValueError("kind 'vector' needs dim = vector length n")
        factor = dim / delta
    else:
        raise ValueError(f"unknown Cauchy kind {kind!r}")
    return StripNorm(rho=norm.rho - delta, value=norm.value * factor)


@lru_cache(maxsize=256)
def _k_dot_omega(bands: tuple, omega: tuple) -> np.ndarray:
    """k . omega over the index box."""
    axes = _index_box(bands)
    total = np.zeros(tuple(2 * n + 1 for n in bands))
    for i, ax in enumerate(axes):
        shape = [1] * len(bands)
        shape[i] = ax.size
        total = total + omega[i] * ax.reshape(shape)
    return total


def _symmetrize(coeffs: np.ndarray) -> np.ndarray:
    """Project onto real-analytic symmetry f_{-k} = conj(f_k)."""
    d = coeffs.ndim - 2
    flipped = np.conj(coeffs[tuple(slice(None, None, -1) for _ in range(d))])
    return 0.5 * (coeffs + flipped)


def dealias_grid(bands_a: tuple, bands_b: tuple) -> tuple:
    """Grid >= 2x the summed band limits, per the product dealiasing policy."""
    return tuple(2 * (na + nb) + 1 for na, nb in zip(bands_a, bands_b))


def matmul(a: FourierMap, b: FourierMap, out_bands=None, work_grid=None) -> FourierMap:
    """Pointwise matrix product of two maps, dealiased then truncated.

    The product is synthesized on a grid of at least 2x the sum of the band
    limits so the retained modes are alias-free; ``out_bands`` defaults to the
    exact product band N_a + N_b.
    """
    if a.bands != b.bands and len(a.bands) != len(b.bands):
        raise FourierShapeError("operands live on different tori")
    if a.shape[1] != b.shape[0]:
        raise FourierShapeError(f"matrix shapes {a.shape} x {b.shape} do not chain")
    work = tuple(work_grid) if work_grid is not None else dealias_grid(a.bands, b.bands)
    va = a.eval_grid(work)
    vb = b.eval_grid(work)
    prod = va @ vb
    full_bands = tuple(na + nb for na, nb in zip(a.bands, b.bands))
    if out_bands is None:
        out_bands = full_bands
    out_bands = tuple(int(n) for n in out_bands)
    if any(m < 2 * n + 1 for n, m in zip(out_bands, work)):
        raise FourierShapeError("work grid too small for requested output bands")
    d = len(out_bands)
    hat = np.fft.fftn(prod, axes=tuple(range(d))) / float(np.prod(work))
    coeffs = _symmetrize(hat[_embed_slices(out_bands, work)])
    out_grid = tuple(max(2 * n + 1, g) for n, g in zip(out_bands, a.grid))
    return FourierMap(coeffs, out_bands, out_grid)


def concat_cols(*maps: FourierMap) -> FourierMap:
    """Column juxtaposition (A B ...) of maps with equal bands and row count."""
    first = maps[0]
    for m in maps[1:]:
        first._check_compatible(m)
        if m.shape[0] != first.shape[0]:
            raise FourierShapeError("row counts differ")
    coeffs = np.concatenate([m.coeffs for m in maps], axis=-1)
    return FourierMap(coeffs, first.bands, first.grid)


def assemble_blocks(blocks) -> FourierMap:
    """Build a map from a 2D nested list of equal-band FourierMap blocks."""
    rows = []
    ref = blocks[0][0]
    for row in blocks:
        for m in row:
            ref._check_compatible(m)
        rows.append(np.concatenate([m.coeffs for m in row], axis=-1))
    return FourierMap(np.concatenate(rows, axis=-2), ref.bands, ref.grid)


def random_map(bands, grid, shape, rng, decay: float = 0.0, scale: float = 1.0) -> FourierMap:
    """Random real-analytic map; coefficients damped by exp(-decay*|k|_1)."""
    box = tuple(2 * n + 1 for n in bands)
    raw = rng.standard_normal(box + tuple(shape)) + 1j * rng.standard_normal(box + tuple(shape))
    if decay > 0:
        k1 = _k1_box(tuple(bands))
        raw = raw * np.exp(-decay * k1).reshape(k1.shape + (1, 1))
    return FourierMap(_symmetrize(scale * raw), tuple(bands), tuple(grid))
