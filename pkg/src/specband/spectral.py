"""Symmetric eigendecomposition and spectrum utilities."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class SpectralError(ValueError):
    """Invalid input to a spectral operation."""


@dataclass(frozen=True)
class Spectrum:
    """Ascending eigenvalues and aligned orthonormal eigenvector columns."""

    eigenvalues: np.ndarray  # (n,), ascending
    eigenvectors: np.ndarray  # (n, n), column i belongs to eigenvalues[i]
    source_dim: int

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=np.float64)
        u = np.asarray(self.eigenvectors, dtype=np.float64)
        if lam.ndim != 1 or u.shape != (lam.size, lam.size):
            raise SpectralError("eigenvalues must be (n,), eigenvectors (n, n)")
        if np.any(np.diff(lam) < 0):
            raise SpectralError("eigenvalues must be sorted ascending")
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "eigenvectors", u)

    @property
    def n(self) -> int:
        return self.source_dim


def eigendecompose(a: np.ndarray, symmetry_tol: float = 1e-10) -> Spectrum:
    """Full eigendecomposition of a symmetric dense matrix.

    Uses the LAPACK symmetric solver; output is deterministic for a fixed
    input and build. Rejects non-finite entries and asymmetry beyond
    `symmetry_tol`.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise SpectralError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise SpectralError("matrix has non-finite entries")
    asym = np.max(np.abs(a - a.T)) if a.size else 0.0
    if asym > symmetry_tol:
        raise SpectralError(f"matrix asymmetry {asym:.3e} exceeds {symmetry_tol:.3e}")
    lam, u = np.linalg.eigh(a)
    return Spectrum(lam, u, source_dim=a.shape[0])


def grouping_tolerance(sp: Spectrum) -> float:
    """Default tolerance for treating nearby eigenvalues as equal."""
    return 1e-8 * max(1.0, float(np.max(np.abs(sp.eigenvalues), initial=0.0)))


@dataclass(frozen=True)
class DistinctSpectrum:
    """Distinct eigenvalues with multiplicities under a grouping tolerance."""

    values: np.ndarray  # (s,), ascending, consecutive gaps > tolerance
    multiplicities: np.ndarray  # (s,), positive ints summing to n
    tolerance: float

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        mult = np.asarray(self.multiplicities, dtype=np.int64)
        if vals.shape != mult.shape or vals.ndim != 1:
            raise SpectralError("values and multiplicities must align")
        if np.any(mult < 1):
            raise SpectralError("multiplicities must be positive")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "multiplicities", mult)

    @property
    def s(self) -> int:
        return self.values.size


def distinct_eigenvalues(sp: Spectrum, tol: float | None = None) -> DistinctSpectrum:
    """Greedy ascending grouping: a new group starts when the gap exceeds tol."""
    if tol is None:
        tol = grouping_tolerance(sp)
    if tol <= 0:
        raise SpectralError(f"tolerance must be positive, got {tol}")
    lam = sp.eigenvalues
    values = []
    mults = []
    start = 0
    for i in range(1, lam.size + 1):
        if i == lam.size or lam[i] - lam[i - 1] > tol:
            group = lam[start:i]
            values.append(float(group.mean()))
            mults.append(i - start)
            start = i
    return DistinctSpectrum(np.array(values), np.array(mults, dtype=np.int64), tolerance=tol)


def zero_multiplicity(sp: Spectrum, tol: float | None = None) -> int:
    """Multiplicity of eigenvalue 0 under the grouping tolerance."""
    if tol is None:
        tol = grouping_tolerance(sp)
    return int(np.count_nonzero(np.abs(sp.eigenvalues) <= tol))


def minimal_poly_residual(a: np.ndarray, ds: DistinctSpectrum, x: np.ndarray) -> float:
    """Sup-norm of the minimal-polynomial product applied to a unit vector.

    Applies (A - v_1 I) ... (A - v_s I) to x by successive matrix-vector
    products, in ascending order of the distinct values.
    """
    a = np.asarray(a, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or x.shape != (a.shape[0],):
        raise SpectralError(f"dimension mismatch: matrix {a.shape}, vector {x.shape}")
    if not np.all(np.isfinite(x)):
        raise SpectralError("vector has non-finite entries")
    cur = x
    for v in ds.values:
        cur = a @ cur - v * cur
    return float(np.max(np.abs(cur))) if cur.size else 0.0


def save_spectrum(sp: Spectrum, out_dir, prefix: str = "spectrum",
                  include_vectors: bool = False, tol: float | None = None) -> dict:
    """Dump eigenvalues (CSV), optional eigenvectors (npy), and metadata JSON.

    Returns the written metadata {n, tol, nu0} plus the file paths.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if tol is None:
        tol = grouping_tolerance(sp)
    lam_path = out / f"{prefix}_eigenvalues.csv"
    np.savetxt(lam_path, sp.eigenvalues, delimiter=",")
    meta = {
        "n": int(sp.source_dim),
        "tol": float(tol),
        "nu0": zero_multiplicity(sp, tol),
    }
    paths = {"eigenvalues": str(lam_path)}
    if include_vectors:
        vec_path = out / f"{prefix}_eigenvectors.npy"
        np.save(vec_path, sp.eigenvectors)
        paths["eigenvectors"] = str(vec_path)
    meta_path = out / f"{prefix}_meta.json"
    with open(meta_path, "w") as fh:
        json.dump(meta, fh, indent=2)
    paths["meta"] = str(meta_path)
    return {**meta, "paths": paths}
