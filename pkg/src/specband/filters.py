"""Band projectors, signed splits, sparsification, and polynomial powers."""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from specband.spectral import Spectrum


class FilterError(ValueError):
    """Invalid filter construction or application."""


@dataclass(frozen=True)
class ConstantFilter:
    """Projector onto an eigenvector column interval [a, b).

    `dense` holds the full projector while available; `pos`/`neg` hold the
    signed elementwise parts (sparse), possibly pruned to a budget.
    """

    interval: tuple[int, int]
    dense: np.ndarray | None = None
    pos: sp.csr_array | None = None
    neg: sp.csr_array | None = None

    @property
    def rank(self) -> int:
        return self.interval[1] - self.interval[0]

    def drop_dense(self) -> "ConstantFilter":
        return replace(self, dense=None)


def constant_filter(spectrum: Spectrum, a: int, b: int) -> ConstantFilter:
    """Build the dense projector U[:, a:b] @ U[:, a:b].T."""
    n = spectrum.source_dim
    if not (0 <= a < b <= n):
        raise FilterError(f"interval [{a}, {b}) invalid for n={n}")
    cols = spectrum.eigenvectors[:, a:b]
    t = cols @ cols.T
    t = (t + t.T) / 2.0  # exact symmetry of stored values
    return ConstantFilter(interval=(a, b), dense=t)


def split_pos_neg(f: ConstantFilter) -> ConstantFilter:
    """Populate the signed parts: pos = max(T, 0), neg = min(T, 0)."""
    if f.dense is None:
        raise FilterError("dense projector required to split")
    pos = np.maximum(f.dense, 0.0)
    neg = np.minimum(f.dense, 0.0)
    return replace(f, pos=sp.csr_array(pos), neg=sp.csr_array(neg))


def _top_entries_symmetric(mat: sp.csr_array, budget: int) -> sp.csr_array:
    """Keep the `budget` largest-|value| upper-triangle entries plus mirrors.

    Exact top-k: strictly larger |value| wins; ties resolve by (row, col)
    ascending. Off-diagonal survivors keep their symmetric twins.
    """
    coo = sp.coo_array(mat)
    keep_upper = coo.row <= coo.col
    rows, cols, vals = coo.row[keep_upper], coo.col[keep_upper], coo.data[keep_upper]
    nz = vals != 0.0
    rows, cols, vals = rows[nz], cols[nz], vals[nz]
    if budget < rows.size:
        absv = np.abs(vals)
        # partition pulls the top block, then exact ordering inside it
        idx = np.argpartition(-absv, budget - 1)
        thresh = absv[idx[budget - 1]]
        sure = np.flatnonzero(absv > thresh)
        border = np.flatnonzero(absv == thresh)
        border = border[np.lexsort((cols[border], rows[border]))]
        take = np.concatenate([sure, border[: budget - sure.size]])
        rows, cols, vals = rows[take], cols[take], vals[take]
    off = rows != cols
    all_rows = np.concatenate([rows, cols[off]])
    all_cols = np.concatenate([cols, rows[off]])
    all_vals = np.concatenate([vals, vals[off]])
    out = sp.coo_array((all_vals, (all_rows, all_cols)), shape=mat.shape)
    return sp.csr_array(out)


def sparsify(f: ConstantFilter, budget: int) -> ConstantFilter:
    """Prune each signed part to its `budget` largest-magnitude entries."""
    if budget < 1:
        raise FilterError(f"budget must be >= 1, got {budget}")
    if f.pos is None or f.neg is None:
        raise FilterError("signed parts required; call split_pos_neg first")
    return replace(
        f,
        pos=_top_entries_symmetric(f.pos, budget),
        neg=_top_entries_symmetric(f.neg, budget),
    )


def poly_apply(adj: sp.csr_array, h: np.ndarray, p_max: int) -> list[np.ndarray]:
    """Iterated sparse-dense products [h, A h, A^2 h, ..., A^p_max h]."""
    if p_max < 0:
        raise FilterError(f"p_max must be >= 0, got {p_max}")
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 2 or adj.shape[1] != h.shape[0]:
        raise FilterError(f"dimension mismatch: adjacency {adj.shape}, block {h.shape}")
    out = [h]
    for _ in range(p_max):
        out.append(adj @ out[-1])
    return out


@dataclass(frozen=True)
class FilterBank:
    """Signed band filters plus the sparse adjacency for polynomial terms."""

    constants: list[ConstantFilter]
    poly_degree: int
    adjacency: sp.csr_array
    spectrum: Spectrum
    boundaries: np.ndarray

    @property
    def num_intervals(self) -> int:
        return len(self.constants)


def default_budget(adjacency: sp.csr_array) -> int:
    """Sparsification budget of 4m entries per signed part per filter."""
    m = adjacency.nnz // 2
    return max(1, 4 * m)


def build_filter_bank(spectrum: Spectrum, boundaries: np.ndarray, adjacency: sp.csr_array,
                      poly_degree: int, budget: int | None = None,
                      keep_dense: bool = False) -> FilterBank:
    """Construct, split, and sparsify one filter per boundary interval.

    Dense projectors are built one at a time and released after
    sparsification unless `keep_dense` is set.
    """
    boundaries = np.asarray(boundaries, dtype=np.int64)
    if budget is None:
        budget = default_budget(adjacency)
    constants = []
    for i in range(boundaries.size - 1):
        f = constant_filter(spectrum, int(boundaries[i]), int(boundaries[i + 1]))
        f = sparsify(split_pos_neg(f), budget)
        if not keep_dense:
            f = f.drop_dense()
        constants.append(f)
    return FilterBank(
        constants=constants,
        poly_degree=poly_degree,
        adjacency=adjacency,
        spectrum=spectrum,
        boundaries=boundaries,
    )


def filter_response(spectrum: Spectrum, boundaries: np.ndarray, coef_pos: np.ndarray,
                    coef_neg: np.ndarray, poly_coef: np.ndarray) -> np.ndarray:
    """Scalar response per eigenvalue for one output channel.

    The constant part contributes coef_pos[k] + coef_neg[k] on interval k
    (plotting convention for the signed split); the polynomial part adds
    sum_p poly_coef[p] * lambda^p. Returns an (n, 2) array of
    (eigenvalue, response) pairs.
    """
    lam = spectrum.eigenvalues
    boundaries = np.asarray(boundaries, dtype=np.int64)
    coef_pos = np.asarray(coef_pos, dtype=np.float64)
    coef_neg = np.asarray(coef_neg, dtype=np.float64)
    poly_coef = np.asarray(poly_coef, dtype=np.float64)
    resp = np.zeros(lam.size, dtype=np.float64)
    for k in range(boundaries.size - 1):
        a, b = boundaries[k], boundaries[k + 1]
        level = (coef_pos[k] if k < coef_pos.size else 0.0) + (
            coef_neg[k] if k < coef_neg.size else 0.0
        )
        resp[a:b] += level
    if poly_coef.size:
        powers = np.vander(lam, N=poly_coef.size, increasing=True)
        resp += powers @ poly_coef
    return np.column_stack([lam, resp])


def save_response_csv(pairs: np.ndarray, path) -> None:
    np.savetxt(path, pairs, delimiter=",", header="lambda,response", comments="")


def save_sparse_filter(mat: sp.csr_array, interval: tuple[int, int], part: str,
                       budget: int, out_dir, stem: str) -> dict:
    """Write a signed part as 'row col value' text plus a JSON sidecar."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    coo = sp.coo_array(mat)
    order = np.lexsort((coo.col, coo.row))
    txt_path = out / f"{stem}.txt"
    with open(txt_path, "w") as fh:
        for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            fh.write(f"{r} {c} {v!r}\n")
    meta = {
        "interval": [int(interval[0]), int(interval[1])],
        "part": part,
        "budget": int(budget),
        "nnz": int(coo.nnz),
    }
    meta_path = out / f"{stem}.json"
    with open(meta_path, "w") as fh:
        json.dump(meta, fh, indent=2)
    return {**meta, "paths": {"matrix": str(txt_path), "meta": str(meta_path)}}
