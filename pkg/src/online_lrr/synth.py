"""Union-of-subspaces test data with sparse uniform corruption."""

from __future__ import annotations

import math

import numpy as np

from .model import SyntheticDataset


def generate_union_of_subspaces(p: int, dims, counts, seed=None) -> SyntheticDataset:
    """Draw K Gaussian subspaces and Gaussian coefficients, then shuffle columns.

    Subspace k contributes ``counts[k]`` columns L_k R_k^T with L_k (p x d_k)
    and R_k (n_k x d_k) standard normal.  The stored bases are orthonormal
    spans of the L_k.
    """
    dims = [int(x) for x in dims]
    counts = [int(x) for x in counts]
    if len(dims) != len(counts) or not dims:
        raise ValueError("dims and counts must be non-empty and of equal length")
    if min(dims) < 1 or min(counts) < 0:
        raise ValueError("subspace dimensions must be >= 1 and counts >= 0")
    if sum(dims) > p:
        raise ValueError(f"total subspace dimension {sum(dims)} exceeds ambient dimension {p}")
    rng = np.random.default_rng(seed)
    blocks, labels, bases = [], [], []
    for k, (dk, nk) in enumerate(zip(dims, counts)):
        L = rng.standard_normal((p, dk))
        R = rng.standard_normal((nk, dk))
        blocks.append(L @ R.T)
        labels.append(np.full(nk, k, dtype=np.int64))
        bases.append(np.linalg.qr(L)[0])
    Z = np.hstack(blocks)
    lab = np.concatenate(labels)
    perm = rng.permutation(Z.shape[1])
    Z = np.ascontiguousarray(Z[:, perm])
    lab = lab[perm]
    return SyntheticDataset(Z=Z.copy(), Z_clean=Z, bases=bases, labels=lab,
                            mask=np.zeros(Z.shape, dtype=bool), rho=0.0)


def corrupt_sparse(ds: SyntheticDataset, rho: float, seed=None) -> SyntheticDataset:
    """Add Uniform[-2, 2] noise to exactly round(rho * p * n) random entries."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"corruption fraction must lie in [0, 1], got {rho}")
    p, n = ds.Z_clean.shape
    # round half up, so the count does not depend on banker's rounding
    count = int(math.floor(rho * p * n + 0.5))
    rng = np.random.default_rng(seed)
    flat = rng.choice(p * n, size=count, replace=False)
    E = np.zeros(p * n)
    E[flat] = rng.uniform(-2.0, 2.0, size=count)
    mask = np.zeros(p * n, dtype=bool)
    mask[flat] = True
    E = E.reshape(p, n)
    return SyntheticDataset(Z=ds.Z_clean + E, Z_clean=ds.Z_clean, bases=ds.bases,
                            labels=ds.labels, mask=mask.reshape(p, n), rho=float(rho))


def make_dataset(p: int, dims, counts, rho: float = 0.0, seed: int = 0) -> SyntheticDataset:
    """Generate and corrupt with two independent streams derived from ``seed``."""
    gen_seed, noise_seed = np.random.SeedSequence(seed).spawn(2)
    ds = generate_union_of_subspaces(p, dims, counts, seed=gen_seed)
    return corrupt_sparse(ds, rho, seed=noise_seed)
