"""Boolean Fourier analysis over biased ±1 bits.

Subsets S of [d] are stored as bitmasks (bit i - 1 set iff i in S), and
functions on {-1,1}^d as length-2**d arrays indexed by realization key, so a
coefficient array and a value table share the same indexing scheme.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .sources import BiasedBitSource, check_dim, points

TOL = 1e-10


@dataclass(frozen=True)
class ParitySubset:
    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if any(i < 1 for i in idx) or any(a >= b for a, b in zip(idx, idx[1:])):
            raise ValueError(f"parity subset indices must be strictly increasing and >= 1: {idx}")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def from_mask(cls, mask: int) -> ParitySubset:
        return cls(tuple(i + 1 for i in range(mask.bit_length()) if (mask >> i) & 1))

    @property
    def mask(self) -> int:
        return sum(1 << (i - 1) for i in self.indices)

    def __len__(self):
        return len(self.indices)

    def fits(self, d: int) -> bool:
        return all(i <= d for i in self.indices)


def _as_mask(S) -> int:
    if isinstance(S, ParitySubset):
        return S.mask
    if isinstance(S, (int, np.integer)):
        return int(S)
    return ParitySubset(tuple(S)).mask


@dataclass(frozen=True, eq=False)
class BooleanTable:
    """A real function on {-1,1}^d with values in [-1, 1]."""

    d: int
    values: np.ndarray

    def __post_init__(self):
        d = check_dim(self.d)
        vals = np.asarray(self.values, dtype=float).reshape(-1)
        if vals.shape != (1 << d,):
            raise ValueError(f"table for d={d} needs {1 << d} entries, got {vals.size}")
        if np.any(np.abs(vals) > 1 + TOL):
            raise ValueError("table values must lie in [-1, 1]")
        vals.setflags(write=False)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, d: int, fn) -> BooleanTable:
        return cls(d, [fn(tuple(int(v) for v in x)) for x in points(d)])

    def __call__(self, x) -> float:
        from .sources import encode

        return float(self.values[encode(x)])


@dataclass(frozen=True, eq=False)
class FourierCoefficients:
    """Coefficients keyed by subset mask.

    ``z_coeffs`` holds the entries multiplied by a shared fair bit Z (an extra
    unbiased coordinate kept outside [d]); it is ``None`` for plain expansions.
    """

    d: int
    coeffs: np.ndarray
    z_coeffs: np.ndarray | None = field(default=None)

    def __post_init__(self):
        d = check_dim(self.d)
        for name in ("coeffs", "z_coeffs"):
            arr = getattr(self, name)
            if arr is None:
                continue
            arr = np.asarray(arr, dtype=float).reshape(-1)
            if arr.shape != (1 << d,):
                raise ValueError(f"{name} for d={d} needs {1 << d} entries, got {arr.size}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "d", d)

    @classmethod
    def from_mapping(cls, d: int, coeffs: dict, z_coeffs: dict | None = None) -> FourierCoefficients:
        def dense(m):
            arr = np.zeros(1 << d)
            for key, val in m.items():
                mask = _as_mask(key)
                if mask >= 1 << d:
                    raise ValueError(f"subset {key!r} is not contained in [{d}]")
                arr[mask] = val
            return arr

        return cls(d, dense(coeffs), None if z_coeffs is None else dense(z_coeffs))

    def __getitem__(self, S) -> float:
        return float(self.coeffs[_as_mask(S)])

    def z(self, S) -> float:
        if self.z_coeffs is None:
            return 0.0
        return float(self.z_coeffs[_as_mask(S)])

    def to_json(self) -> dict:
        out = {"d": self.d, "coeffs": {str(m): float(v) for m, v in enumerate(self.coeffs)}}
        if self.z_coeffs is not None:
            out["z_coeffs"] = {str(m): float(v) for m, v in enumerate(self.z_coeffs)}
        return out

    @classmethod
    def from_json(cls, obj: dict) -> FourierCoefficients:
        d = int(obj["d"])
        coeffs = {int(k): v for k, v in obj["coeffs"].items()}
        z = obj.get("z_coeffs")
        return cls.from_mapping(d, coeffs, None if z is None else {int(k): v for k, v in z.items()})


def parity_eval(S, x, src: BiasedBitSource) -> float:
    """phi_S(x) = prod_{i in S} (x_i - mu) / sigma; 1 for the empty set."""
    mask = _as_mask(S)
    x = tuple(x)
    if mask >= 1 << len(x):
        raise ValueError(f"subset {S!r} does not fit a point of dimension {len(x)}")
    out = 1.0
    for i, xi in enumerate(x):
        if (mask >> i) & 1:
            out *= (xi - src.mu) / src.sigma
    return out


def _axis_transform(arr: np.ndarray, d: int, mat: np.ndarray) -> np.ndarray:
    # Axis k of the (2,)*d view carries key bit d-1-k.
    t = arr.reshape((2,) * d) if d else arr.reshape(())
    for axis in range(d):
        t = np.moveaxis(np.tensordot(mat, t, axes=([1], [axis])), 0, axis)
    return t.reshape(-1)


def _basis_matrix(src: BiasedBitSource) -> np.ndarray:
    # rows: subset bit (0 = coordinate absent, 1 = present); cols: x = -1, +1
    return np.array([[1.0, 1.0], [(-1 - src.mu) / src.sigma, (1 - src.mu) / src.sigma]])


def fourier_expand(f: BooleanTable, src: BiasedBitSource) -> FourierCoefficients:
    """f_S = E[f(X) phi_S(X)] under the IID biased measure."""
    basis = _basis_matrix(src)
    weighted = basis * np.array([1 - src.p, src.p])[None, :]
    return FourierCoefficients(f.d, _axis_transform(f.values, f.d, weighted))


def fourier_expand_with_common_bit(f0: BooleanTable, f1: BooleanTable, src: BiasedBitSource) -> FourierCoefficients:
    """Expand h(Z, x) with h(-1, .) = f0 and h(+1, .) = f1 for a fair shared bit Z.

    Returns the Z-free coefficients in ``coeffs`` and the Z-multiplied ones in
    ``z_coeffs``.
    """
    if f0.d != f1.d:
        raise ValueError("dimension mismatch between the two Z-slices")
    c0 = fourier_expand(f0, src).coeffs
    c1 = fourier_expand(f1, src).coeffs
    return FourierCoefficients(f0.d, (c0 + c1) / 2, (c1 - c0) / 2)


def fourier_reconstruct(c: FourierCoefficients, src: BiasedBitSource) -> BooleanTable:
    if c.z_coeffs is not None and np.any(c.z_coeffs != 0):
        raise ValueError("coefficients depend on the shared bit; use reconstruct_with_common_bit")
    return BooleanTable(c.d, _axis_transform(c.coeffs, c.d, _basis_matrix(src).T))


def reconstruct_with_common_bit(c: FourierCoefficients, src: BiasedBitSource) -> tuple[BooleanTable, BooleanTable]:
    """Inverse of :func:`fourier_expand_with_common_bit`: the Z = -1 and Z = +1 slices."""
    z = np.zeros_like(c.coeffs) if c.z_coeffs is None else c.z_coeffs
    basis = _basis_matrix(src).T
    lo = _axis_transform(c.coeffs - z, c.d, basis)
    hi = _axis_transform(c.coeffs + z, c.d, basis)
    return BooleanTable(c.d, lo), BooleanTable(c.d, hi)


def _popcounts(d: int) -> np.ndarray:
    masks = np.arange(1 << d)
    return np.array([bin(m).count("1") for m in masks])


def correlation_from_coeffs(fc: FourierCoefficients, gc: FourierCoefficients, rho: float) -> float:
    """E[f(X^d) g(Y^d)] = sum_S f_S g_S rho^|S| for an IID pair source.

    Z-tagged entries pair up through the shared bit (E[Z^2] = 1) and carry the
    same damping.
    """
    if fc.d != gc.d:
        raise ValueError(f"dimension mismatch: {fc.d} vs {gc.d}")
    if abs(rho) > 1 + TOL:
        raise ValueError(f"correlation must satisfy |rho| <= 1, got {rho}")
    damp = float(rho) ** _popcounts(fc.d)
    total = np.sum(fc.coeffs * gc.coeffs * damp)
    if fc.z_coeffs is not None and gc.z_coeffs is not None:
        total += np.sum(fc.z_coeffs * gc.z_coeffs * damp)
    return float(total)


def subsets(d: int) -> Iterable[ParitySubset]:
    for mask in range(1 << check_dim(d)):
        yield ParitySubset.from_mask(mask)
