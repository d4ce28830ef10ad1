"""Shared state and parameter types for the online low-rank subspace solver."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FIXED = "fixed"
SQRT_T_OVER_P = "sqrt_t_over_p"


@dataclass
class SolverParams:
    """Regularization weights, rank budget and inner-solver tolerances.

    ``lambda3_mode`` is either ``"fixed"`` (use ``lambda3_value``) or
    ``"sqrt_t_over_p"`` (lambda3 grows as sqrt(t / p) with the sample counter).
    ``basis_update`` selects column-wise block coordinate descent (``"bcd"``)
    or the closed-form minimizer (``"closed"``).
    """

    lambda1: float = 1.0
    lambda2: float = 0.1
    lambda3_mode: str = SQRT_T_OVER_P
    lambda3_value: float = 1.0
    d: int = 5
    ve_tol: float = 1e-8
    ve_max_iters: int = 500
    ve_newton: bool = True
    bcd_passes: int = 1
    basis_update: str = "bcd"
    freeze_basis: bool = False

    def __post_init__(self):
        if not self.lambda1 > 0:
            raise ValueError(f"lambda1 must be positive, got {self.lambda1}")
        if not self.lambda2 > 0:
            raise ValueError(f"lambda2 must be positive, got {self.lambda2}")
        if self.lambda3_mode not in (FIXED, SQRT_T_OVER_P):
            raise ValueError(f"unknown lambda3_mode {self.lambda3_mode!r}")
        if self.lambda3_mode == FIXED and not self.lambda3_value > 0:
            raise ValueError(f"fixed lambda3 must be positive, got {self.lambda3_value}")
        if self.d < 1:
            raise ValueError(f"rank budget d must be >= 1, got {self.d}")
        if not self.ve_tol > 0 or self.ve_max_iters < 1:
            raise ValueError("ve_tol must be positive and ve_max_iters >= 1")
        if self.bcd_passes < 1:
            raise ValueError("bcd_passes must be >= 1")
        if self.basis_update not in ("bcd", "closed"):
            raise ValueError(f"unknown basis_update {self.basis_update!r}")

    @classmethod
    def defaults_for(cls, p: int, d: int, **overrides) -> "SolverParams":
        """lambda1 = 1, lambda2 = 1/sqrt(p), lambda3 = sqrt(t/p)."""
        kw = dict(lambda1=1.0, lambda2=1.0 / math.sqrt(p), lambda3_mode=SQRT_T_OVER_P, d=d)
        kw.update(overrides)
        return cls(**kw)

    def check_dim(self, p: int) -> None:
        if not self.d < p:
            raise ValueError(f"rank budget d={self.d} must be smaller than p={p}")


def lambda3_at(params: SolverParams, t: int, p: int) -> float:
    """Constraint weight used while processing the t-th sample (1-based)."""
    if params.lambda3_mode == FIXED:
        return float(params.lambda3_value)
    return math.sqrt(t / p)


@dataclass
class SampleCode:
    """Per-sample outputs: coefficient v, sparse error e, row u of U."""

    v: np.ndarray
    e: np.ndarray
    u: np.ndarray
    point_loss: float
    converged: bool = True
    n_iter: int = 0


_STATE_MAGIC = b"OLRRSTAT"
_STATE_VERSION = 1
_STATE_HEADER = struct.Struct("<8sIQQQ")
_SCALARS = struct.Struct("<4d")


@dataclass
class ModelState:
    """Basis ``D`` plus the O(pd) running sums needed to update it.

    ``M`` = sum y u^T, ``A`` = sum v v^T, ``B`` = sum (z - e) v^T.  The four
    scalars are the remaining sums that make the surrogate objective
    computable without any per-sample history.
    """

    p: int
    d: int
    D: np.ndarray
    M: np.ndarray
    A: np.ndarray
    B: np.ndarray
    t: int = 0
    s_ze: float = 0.0
    s_v: float = 0.0
    s_e1: float = 0.0
    s_u: float = 0.0

    @classmethod
    def initial(cls, p: int, d: int, seed=None, D0: np.ndarray | None = None) -> "ModelState":
        """Zero accumulators and a random basis with N(0, 1/p) entries."""
        if not 1 <= d < p:
            raise ValueError(f"need 1 <= d < p, got d={d}, p={p}")
        if D0 is None:
            rng = np.random.default_rng(seed)
            D0 = rng.standard_normal((p, d)) / math.sqrt(p)
        D0 = np.array(D0, dtype=float)
        if D0.shape != (p, d):
            raise ValueError(f"D0 has shape {D0.shape}, expected {(p, d)}")
        return cls(p=p, d=d, D=D0, M=np.zeros((p, d)), A=np.zeros((d, d)), B=np.zeros((p, d)))

    def copy(self) -> "ModelState":
        return ModelState(
            p=self.p, d=self.d, D=self.D.copy(), M=self.M.copy(), A=self.A.copy(),
            B=self.B.copy(), t=self.t, s_ze=self.s_ze, s_v=self.s_v, s_e1=self.s_e1, s_u=self.s_u,
        )

    def element_count(self) -> int:
        """Number of stored floating point elements (arrays plus scalars)."""
        arrays = (self.D, self.M, self.A, self.B)
        return sum(a.size for a in arrays) + 4

    def save(self, path) -> None:
        """Write the binary snapshot described in the README."""
        with open(path, "wb") as fh:
            fh.write(_STATE_HEADER.pack(_STATE_MAGIC, _STATE_VERSION, self.p, self.d, self.t))
            for a in (self.D, self.M, self.A, self.B):
                fh.write(np.asarray(a, dtype="<f8").tobytes(order="F"))
            fh.write(_SCALARS.pack(self.s_ze, self.s_v, self.s_e1, self.s_u))

    @classmethod
    def load(cls, path) -> "ModelState":
        raw = Path(path).read_bytes()
        if len(raw) < _STATE_HEADER.size:
            raise ValueError(f"{path}: truncated state header")
        magic, version, p, d, t = _STATE_HEADER.unpack_from(raw, 0)
        if magic != _STATE_MAGIC:
            raise ValueError(f"{path}: not a model state file")
        if version != _STATE_VERSION:
            raise ValueError(f"{path}: unsupported state version {version}")
        shapes = [(p, d), (p, d), (d, d), (p, d)]
        expected = _STATE_HEADER.size + 8 * sum(r * c for r, c in shapes) + _SCALARS.size
        if len(raw) != expected:
            raise ValueError(f"{path}: expected {expected} bytes, found {len(raw)}")
        off = _STATE_HEADER.size
        arrays = []
        for r, c in shapes:
            n = r * c
            a = np.frombuffer(raw, dtype="<f8", count=n, offset=off).reshape((r, c), order="F")
            arrays.append(np.array(a, dtype=float))
            off += 8 * n
        s_ze, s_v, s_e1, s_u = _SCALARS.unpack_from(raw, off)
        D, M, A, B = arrays
        return cls(p=p, d=d, D=D, M=M, A=A, B=B, t=t, s_ze=s_ze, s_v=s_v, s_e1=s_e1, s_u=s_u)


@dataclass
class KMeansState:
    """Streaming k-means: centroids as columns of ``C`` and assignment counts ``r``."""

    C: np.ndarray
    r: np.ndarray
    # number of centroids still waiting to be seeded from the stream
    pending: int = 0

    @property
    def k(self) -> int:
        return self.C.shape[1]

    @classmethod
    def from_centroids(cls, C: np.ndarray) -> "KMeansState":
        C = np.array(C, dtype=float)
        if C.ndim != 2 or C.shape[1] < 1:
            raise ValueError("centroid matrix must be dim x k with k >= 1")
        return cls(C=C, r=np.zeros(C.shape[1], dtype=np.int64))

    @classmethod
    def unseeded(cls, dim: int, k: int) -> "KMeansState":
        """Centroids are filled by the first k distinct vectors seen."""
        if k < 1:
            raise ValueError("k must be >= 1")
        return cls(C=np.zeros((dim, k)), r=np.zeros(k, dtype=np.int64), pending=k)


@dataclass
class SyntheticDataset:
    """Union-of-subspaces samples as columns, with optional sparse corruption."""

    Z: np.ndarray
    Z_clean: np.ndarray
    bases: list
    labels: np.ndarray
    mask: np.ndarray
    rho: float = 0.0
    _union: np.ndarray | None = field(default=None, repr=False)

    @property
    def p(self) -> int:
        return self.Z.shape[0]

    @property
    def n(self) -> int:
        return self.Z.shape[1]

    @property
    def E(self) -> np.ndarray:
        return self.Z - self.Z_clean

    def union_basis(self) -> np.ndarray:
        """Orthonormal basis of the sum of all subspaces (ground truth for EV)."""
        if self._union is None:
            stacked = np.hstack(self.bases)
            U, s, _ = np.linalg.svd(stacked, full_matrices=False)
            tol = s.max() * max(stacked.shape) * np.finfo(float).eps
            self._union = U[:, s > tol]
        return self._union
