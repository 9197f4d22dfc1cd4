"""Finite-sum objectives f(x) = (1/n) sum_i f_i(x) and their derivatives.

Every objective exposes the same batched surface so the optimizers never
care which family they are driving:

* ``losses(idx, x)``          per-component values f_i(x), shape (b,)
* ``gradients(idx, x)``       per-component gradients, shape (b, d)
* ``mean_gradient(idx, x)``   (1/b) sum over idx of grad f_i(x), shape (d,)

Component indices are 0-based throughout the Python API.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .errors import DegenerateSmoothness, InvalidArgument, NumericalOverflow

REGRESSION = "regression"
BINARY = "binary"

# max |d^2/dt^2 (1 - sigmoid(t))^2| = 0.154059..., rounded to five digits
SIGMOID_SQUARED_CURVATURE = 0.15405
SIGMOID_CLAMP = 40.0


@dataclass(eq=False)
class Dataset:
    """Sparse feature rows ``a_i`` with targets ``b_i``.

    ``features`` is an (n, d) CSR matrix; row entries are kept sorted by
    column so ``row(i)`` yields the LIBSVM-style ascending (index, value)
    pairs with 1-based indices.
    """

    features: sparse.csr_matrix
    targets: np.ndarray
    kind: str = REGRESSION
    name: str | None = None

    def __post_init__(self):
        self.features = sparse.csr_matrix(self.features, dtype=np.float64)
        self.features.sort_indices()
        self.targets = np.asarray(self.targets, dtype=np.float64).reshape(-1)
        n, d = self.features.shape
        if n < 1 or d < 1:
            raise InvalidArgument(f"dataset must have n >= 1 and d >= 1, got ({n}, {d})")
        if self.targets.shape[0] != n:
            raise InvalidArgument("targets length does not match number of rows")
        if self.kind not in (REGRESSION, BINARY):
            raise InvalidArgument(f"unknown dataset kind {self.kind!r}")
        if self.kind == BINARY and not np.all(np.isin(self.targets, (-1.0, 1.0))):
            raise InvalidArgument("binary datasets need targets in {-1, +1}")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def row(self, i: int) -> list[tuple[int, float]]:
        lo, hi = self.features.indptr[i], self.features.indptr[i + 1]
        cols = self.features.indices[lo:hi]
        vals = self.features.data[lo:hi]
        return [(int(c) + 1, float(v)) for c, v in zip(cols, vals)]

    @property
    def rows(self) -> list[list[tuple[int, float]]]:
        return [self.row(i) for i in range(self.n)]

    def row_norms_sq(self) -> np.ndarray:
        sq = self.features.multiply(self.features)
        return np.asarray(sq.sum(axis=1)).reshape(-1)

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.intp)
        return Dataset(self.features[idx], self.targets[idx], self.kind, self.name)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        if self.features.shape != other.features.shape or self.kind != other.kind:
            return False
        a, b = self.features, other.features
        return (
            np.array_equal(a.indptr, b.indptr)
            and np.array_equal(a.indices, b.indices)
            and np.array_equal(a.data, b.data)
            and np.array_equal(self.targets, other.targets)
        )


def _as_point(x, d: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (d,):
        raise InvalidArgument(f"point has shape {x.shape}, expected ({d},)")
    return x


def _row_mean(rows: np.ndarray) -> np.ndarray:
    # reduce along a contiguous axis so numpy uses pairwise summation
    return np.ascontiguousarray(rows.T).sum(axis=1) / rows.shape[0]


class Objective:
    """Base class; subclasses fill in the batched primitives."""

    n: int
    d: int

    def losses(self, idx, x) -> np.ndarray:
        raise NotImplementedError

    def gradients(self, idx, x) -> np.ndarray:
        raise NotImplementedError

    def mean_gradient(self, idx, x) -> np.ndarray:
        return _row_mean(self.gradients(idx, x))

    def gradients_and_mean(self, idx, x) -> tuple[np.ndarray, np.ndarray]:
        """Rows and ``mean_gradient`` together, the latter bitwise identical."""
        rows = self.gradients(idx, x)
        return rows, _row_mean(rows)

    def restrict(self, idx) -> "Objective":
        raise NotImplementedError

    def smoothness(self) -> float:
        raise NotImplementedError

    def all_indices(self) -> np.ndarray:
        return np.arange(self.n)

    def value(self, x) -> float:
        x = _as_point(x, self.d)
        return float(np.sum(self.losses(self.all_indices(), x)) / self.n)

    def full_gradient(self, x) -> np.ndarray:
        x = _as_point(x, self.d)
        return self.mean_gradient(self.all_indices(), x)


class _LinearModel(Objective):
    """f_i(x) = loss(a_i^T x, b_i) + (lam/2)||x||^2."""

    lam: float = 0.0

    def __init__(self, ds: Dataset):
        self.ds = ds
        self.n = ds.n
        self.d = ds.d

    def _scalar(self, margins, targets):
        """Return (loss, d loss / d margin) elementwise."""
        raise NotImplementedError

    def _margins(self, idx, x):
        rows = self.ds.features[idx]
        return rows, rows @ x, self.ds.targets[idx]

    def losses(self, idx, x):
        _, z, y = self._margins(idx, x)
        loss, _ = self._scalar(z, y)
        if self.lam:
            loss = loss + 0.5 * self.lam * float(x @ x)
        return loss

    def gradients(self, idx, x):
        rows, z, y = self._margins(idx, x)
        _, slope = self._scalar(z, y)
        g = rows.multiply(slope[:, None]).toarray()
        if self.lam:
            g += self.lam * x
        return g

    def _mean_from(self, rows, slope, x):
        g = (rows.T @ slope) / rows.shape[0]
        if self.lam:
            g = g + self.lam * x
        return np.asarray(g, dtype=np.float64).reshape(-1)

    def mean_gradient(self, idx, x):
        rows, z, y = self._margins(idx, x)
        _, slope = self._scalar(z, y)
        return self._mean_from(rows, slope, x)

    def gradients_and_mean(self, idx, x):
        rows, z, y = self._margins(idx, x)
        _, slope = self._scalar(z, y)
        g = rows.multiply(slope[:, None]).toarray()
        if self.lam:
            g += self.lam * x
        return g, self._mean_from(rows, slope, x)


class RobustLinearRegression(_LinearModel):
    """Loss log(z^2/2 + 1) on the residual z = b_i - a_i^T x."""

    def _scalar(self, margins, targets):
        z = targets - margins
        # |z| > ~1e154 overflows z^2: the loss becomes inf (flagged by callers), the slope correctly 0
        with np.errstate(over="ignore"):
            loss = np.log1p(0.5 * z * z)
            # d/dmargin = -l'(z),  l'(z) = z / (z^2/2 + 1)
            slope = -z / (0.5 * z * z + 1.0)
        return loss, slope

    def restrict(self, idx):
        return RobustLinearRegression(self.ds.subset(idx))

    def smoothness(self):
        # sup |l''| = 1, attained at z = 0
        L = float(self.ds.row_norms_sq().max())
        if L <= 0:
            raise DegenerateSmoothness("all feature rows are zero")
        return L


class SigmoidSquared(_LinearModel):
    """Loss (1 - 1/(1 + exp(-a_i^T x b_i)))^2 plus (lam/2)||x||^2 per component.

    Putting the regularizer inside every component keeps the average equal
    to the usual "mean loss + (lam/2)||x||^2" objective.
    """

    def __init__(self, ds: Dataset, lam: float = 0.0):
        if ds.kind != BINARY:
            raise InvalidArgument("SigmoidSquared needs binary labels")
        if lam < 0:
            raise InvalidArgument("lam must be >= 0")
        super().__init__(ds)
        self.lam = float(lam)

    def _scalar(self, margins, targets):
        t = np.clip(margins * targets, -SIGMOID_CLAMP, SIGMOID_CLAMP)
        s_neg = 1.0 / (1.0 + np.exp(t))  # 1 - sigmoid(t)
        s_pos = 1.0 / (1.0 + np.exp(-t))
        loss = s_neg * s_neg
        slope = -2.0 * s_neg * s_neg * s_pos * targets
        return loss, slope

    def restrict(self, idx):
        return SigmoidSquared(self.ds.subset(idx), self.lam)

    def smoothness(self):
        return estimate_smoothness(self.ds, self.lam)


class QuadraticTest(Objective):
    """f_i(x) = 1/2 (x - c_i)^T A_i (x - c_i) + o_i with symmetric A_i.

    Everything about it is known in closed form, which is the point: the
    exact L, minimizer and optimal value back the bound checks.
    """

    def __init__(self, matrices, centers, offsets=None):
        A = np.asarray(matrices, dtype=np.float64)
        c = np.asarray(centers, dtype=np.float64)
        if A.ndim != 3 or A.shape[1] != A.shape[2] or c.shape != A.shape[:2]:
            raise InvalidArgument("need matrices (n, d, d) and centers (n, d)")
        if not np.allclose(A, np.swapaxes(A, 1, 2), rtol=0, atol=1e-12):
            raise InvalidArgument("component matrices must be symmetric")
        self.A = 0.5 * (A + np.swapaxes(A, 1, 2))
        self.c = c
        self.offsets = np.zeros(len(A)) if offsets is None else np.asarray(offsets, float)
        self.n, self.d = c.shape

    @classmethod
    def isotropic(cls, n: int, d: int, centers=None):
        """All A_i = I; with zero centers this is f(x) = 1/2 ||x||^2."""
        c = np.zeros((n, d)) if centers is None else centers
        return cls(np.broadcast_to(np.eye(d), (n, d, d)).copy(), c)

    @classmethod
    def random(cls, n: int, d: int, seed: int = 0, eig_range=(0.1, 2.0), spread=1.0):
        rng = np.random.default_rng(seed)
        mats = np.empty((n, d, d))
        for i in range(n):
            q, _ = np.linalg.qr(rng.standard_normal((d, d)))
            mats[i] = (q * rng.uniform(*eig_range, size=d)) @ q.T
        centers = spread * rng.standard_normal((n, d))
        return cls(mats, centers)

    def losses(self, idx, x):
        r = x - self.c[idx]
        return 0.5 * np.einsum("bi,bij,bj->b", r, self.A[idx], r) + self.offsets[idx]

    def gradients(self, idx, x):
        return np.einsum("bij,bj->bi", self.A[idx], x - self.c[idx])

    def restrict(self, idx):
        idx = np.asarray(idx, dtype=np.intp)
        return QuadraticTest(self.A[idx], self.c[idx], self.offsets[idx])

    def smoothness(self):
        return float(max(np.abs(np.linalg.eigvalsh(a)).max() for a in self.A))

    def minimizer(self):
        H = self.A.mean(axis=0)
        if np.linalg.eigvalsh(H).min() <= 0:
            raise InvalidArgument("average Hessian is not positive definite")
        return np.linalg.solve(H, np.einsum("bij,bj->i", self.A, self.c) / self.n)

    def optimal_value(self) -> float:
        return self.value(self.minimizer())


def _check_index(obj: Objective, i: int) -> int:
    if not 0 <= i < obj.n:
        raise InvalidArgument(f"component index {i} outside [0, {obj.n})")
    return int(i)


def component_loss(obj: Objective, i: int, x) -> float:
    x = _as_point(x, obj.d)
    val = float(obj.losses([_check_index(obj, i)], x)[0])
    if not np.isfinite(val):
        raise NumericalOverflow(f"non-finite loss for component {i}")
    return val


def component_gradient(obj: Objective, i: int, x) -> np.ndarray:
    x = _as_point(x, obj.d)
    g = obj.gradients([_check_index(obj, i)], x)[0]
    if not np.all(np.isfinite(g)):
        raise NumericalOverflow(f"non-finite gradient for component {i}")
    return g


def full_gradient(obj: Objective, x) -> np.ndarray:
    """Exact average gradient. Measurement only: never touches optimizer counters."""
    g = obj.full_gradient(x)
    if not np.all(np.isfinite(g)):
        raise NumericalOverflow("non-finite full gradient")
    return g


def objective_value(obj: Objective, x) -> float:
    val = obj.value(x)
    if not np.isfinite(val):
        raise NumericalOverflow("non-finite objective value")
    return val


def estimate_smoothness(ds: Dataset, lam: float = 0.0) -> float:
    """L ~= 0.15405 * max_i ||a_i||^2 + lam for the sigmoid-squared loss."""
    if lam < 0:
        raise InvalidArgument("lam must be >= 0")
    L = SIGMOID_SQUARED_CURVATURE * float(ds.row_norms_sq().max()) + lam
    if L <= 0:
        raise DegenerateSmoothness("all-zero rows with lam = 0 give L = 0")
    return L


def default_regularizer(ds: Dataset) -> float:
    """lam = 0.15405e-6 * max_i ||a_i||^2, the choice used with the LIBSVM data."""
    return SIGMOID_SQUARED_CURVATURE * 1e-6 * float(ds.row_norms_sq().max())
