"""Random sensing matrices, sparse test signals, and bounded noise draws.

Every generator is a pure function of an integer seed. Randomness comes from
numpy's Philox counter-based bit generator (a published, reimplementable
algorithm), so another implementation with the same generator reproduces the
same distributions. Matrix columns are rescaled to unit Euclidean length,
which is the normalization the certification code assumes throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from numpy.random import Generator, Philox, SeedSequence

ENSEMBLE_NAMES = ("gaussian", "bernoulli", "hadamard", "custom")


def rng_from_seed(seed: int, *path: int) -> Generator:
    """Philox generator for `seed`, optionally descended along a spawn path.

    Derived streams (seed, i) are independent of each other and of the root
    stream, which keeps per-trial sampling order-independent and nested in
    the trial count.
    """
    ss = SeedSequence(seed, spawn_key=tuple(path))
    return Generator(Philox(ss))


@dataclass(frozen=True)
class SensingMatrix:
    """A dense measurement matrix plus generation provenance."""

    data: np.ndarray
    ensemble: str = "custom"
    seed: int | None = None
    columns_normalized: bool = False

    def __post_init__(self):
        arr = np.ascontiguousarray(np.asarray(self.data, dtype=np.float64))
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError(f"matrix must be 2-d and nonempty, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("matrix contains non-finite entries")
        if self.ensemble not in ENSEMBLE_NAMES:
            raise ValueError(f"unknown ensemble {self.ensemble!r}")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)
        if self.columns_normalized:
            norms = np.linalg.norm(arr, axis=0)
            if not np.allclose(norms, 1.0, atol=1e-9):
                raise ValueError("columns_normalized set but columns are not unit length")

    @property
    def m(self) -> int:
        return self.data.shape[0]

    @property
    def n(self) -> int:
        return self.data.shape[1]


def as_array(matrix) -> np.ndarray:
    """Accept a SensingMatrix or a plain 2-d ndarray."""
    data = getattr(matrix, "data", matrix)
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected 2-d matrix, got shape {arr.shape}")
    return arr


def _check_dims(m: int, n: int) -> None:
    if not (1 <= m <= n):
        raise ValueError(f"need 1 <= m <= n, got m={m}, n={n}")


def _unit_columns(arr: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(arr, axis=0)
    if np.any(norms == 0.0):
        raise ValueError("zero column cannot be normalized")
    return arr / norms


def gen_gaussian(m: int, n: int, seed: int) -> SensingMatrix:
    """iid standard normal entries, then unit-norm columns."""
    _check_dims(m, n)
    g = rng_from_seed(seed).standard_normal((m, n))
    return SensingMatrix(_unit_columns(g), "gaussian", seed, True)


def gen_bernoulli(m: int, n: int, seed: int) -> SensingMatrix:
    """iid +-1 entries with equal probability; columns scale to +-1/sqrt(m)."""
    _check_dims(m, n)
    signs = rng_from_seed(seed).integers(0, 2, size=(m, n)) * 2 - 1
    return SensingMatrix(signs / np.sqrt(m), "bernoulli", seed, True)


def gen_hadamard(m: int, n: int, seed: int) -> SensingMatrix:
    """m rows drawn (without replacement) from a randomly row-permuted
    Sylvester Hadamard matrix of order n; n must be a power of two."""
    _check_dims(m, n)
    if n & (n - 1) != 0:
        raise ValueError(f"hadamard ensemble needs n a power of two, got {n}")
    h = scipy.linalg.hadamard(n).astype(np.float64)
    perm = rng_from_seed(seed).permutation(n)
    rows = h[perm[:m], :]
    return SensingMatrix(rows / np.sqrt(m), "hadamard", seed, True)


GENERATORS = {
    "gaussian": gen_gaussian,
    "bernoulli": gen_bernoulli,
    "hadamard": gen_hadamard,
}


def generate(ensemble: str, m: int, n: int, seed: int) -> SensingMatrix:
    try:
        gen = GENERATORS[ensemble]
    except KeyError:
        raise ValueError(f"unknown ensemble {ensemble!r}") from None
    return gen(m, n, seed)


@dataclass(frozen=True)
class KernelDecomposition:
    """Orthonormal row basis + orthonormal kernel basis of a matrix.

    row_basis has shape (rank, n) with orthonormal rows and the same kernel
    as the source matrix; kernel_basis has shape (n, n - rank) with
    orthonormal columns spanning that kernel.
    """

    row_basis: np.ndarray
    kernel_basis: np.ndarray
    rank: int


def kernel_complement(matrix, rank_rtol: float = 1e-10) -> KernelDecomposition:
    """Split R^n into row space and kernel of `matrix` via QR of its transpose.

    Column-pivoted QR of A^T supplies both orthonormal bases at once. The
    effective rank counts pivoted diagonal entries above
    rank_rtol * sigma_max(A); entries below are treated as zero rows.
    """
    arr = as_array(matrix)
    n = arr.shape[1]
    q, r, _ = scipy.linalg.qr(arr.T, mode="full", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.size == 0:
        rank = 0
    else:
        smax = np.linalg.norm(arr, 2)
        rank = int(np.count_nonzero(diag > rank_rtol * smax)) if smax > 0 else 0
    return KernelDecomposition(
        row_basis=np.ascontiguousarray(q[:, :rank].T),
        kernel_basis=np.ascontiguousarray(q[:, rank:]),
        rank=rank,
    )


def orthogonalize_kernel_basis(matrix) -> SensingMatrix:
    """Replace `matrix` by orthonormal rows spanning the same row space.

    The kernel (hence every kernel-only quantity) is unchanged, and the
    resulting rows are far better conditioned inputs for the verification
    linear programs. Rank-deficient inputs come back with fewer rows.
    """
    dec = kernel_complement(matrix)
    if dec.rank == 0:
        raise ValueError("matrix has rank 0; no row basis exists")
    return SensingMatrix(dec.row_basis, "custom", None, False)


@dataclass(frozen=True)
class SparseSignal:
    values: np.ndarray
    support: np.ndarray
    k: int

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        sup = np.asarray(self.support, dtype=np.int64)
        vals.setflags(write=False)
        sup.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "support", sup)
        nz = np.flatnonzero(vals)
        if sup.size != self.k or not np.array_equal(nz, sup):
            raise ValueError("support does not match nonzero pattern")


def sample_sparse_signal(
    n: int, k: int, seed: int, amplitude: str = "pm1"
) -> SparseSignal:
    """k-sparse signal with random support; amplitudes are +-1 ('pm1') or
    standard normal ('gaussian')."""
    if not (1 <= k <= n):
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    rng = rng_from_seed(seed)
    support = np.sort(rng.choice(n, size=k, replace=False))
    if amplitude == "pm1":
        amps = rng.integers(0, 2, size=k) * 2.0 - 1.0
    elif amplitude == "gaussian":
        amps = rng.standard_normal(k)
        while np.any(amps == 0.0):  # measure-zero, but keep the contract exact
            amps[amps == 0.0] = rng.standard_normal(np.count_nonzero(amps == 0.0))
    else:
        raise ValueError(f"unknown amplitude distribution {amplitude!r}")
    values = np.zeros(n)
    values[support] = amps
    return SparseSignal(values, support, k)


@dataclass(frozen=True)
class NoiseSpec:
    """Which noise-set the estimator assumes, and its size parameter.

    model 'bp':      ||w||_2 <= level
    model 'dantzig': ||A^T w||_inf <= level
    model 'lasso':   ||A^T w||_inf <= kappa * level, kappa in (0, 1)
    """

    model: str
    level: float
    kappa: float | None = None

    def __post_init__(self):
        if self.model not in ("bp", "dantzig", "lasso"):
            raise ValueError(f"unknown noise model {self.model!r}")
        if not (self.level >= 0.0 and np.isfinite(self.level)):
            raise ValueError(f"noise level must be finite and >= 0, got {self.level}")
        if self.model == "lasso":
            if self.kappa is None or not (0.0 < self.kappa < 1.0):
                raise ValueError("lasso noise needs kappa in (0, 1)")


def sample_bounded_noise(noise: NoiseSpec, matrix, seed: int) -> np.ndarray:
    """Gaussian direction rescaled to sit just inside the noise set.

    The constraint is met with equality at level*(1 - 1e-9), so the draw is
    admissible but as adversarial as the set allows. level == 0 gives the
    zero vector.
    """
    arr = as_array(matrix)
    m = arr.shape[0]
    if noise.level == 0.0:
        return np.zeros(m)
    g = rng_from_seed(seed).standard_normal(m)
    target = noise.level * (1.0 - 1e-9)
    if noise.model == "bp":
        scale = target / np.linalg.norm(g)
    elif noise.model == "dantzig":
        scale = target / np.max(np.abs(arr.T @ g))
    else:  # lasso
        scale = noise.kappa * target / np.max(np.abs(arr.T @ g))
    return g * scale
