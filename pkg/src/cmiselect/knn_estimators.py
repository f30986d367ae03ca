"""k-NN mutual information and conditional mutual information estimators.

Distances are Chebyshev (max-norm) and all neighbor searches are exact.
The strict mode follows the classic convention (marginal counts use a
strict inequality against the joint-space k-NN radius); the mixed mode
is the tie-aware variant for discrete-continuous mixtures, which uses
closed balls, per-point multiplicities, and log-counts.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

_EULER_GAMMA = 0.57721566490153286060651209008240243

_BRUTE_FORCE_MAX = 256

# Largest sample count for which the permutation-test cache keeps full
# pairwise distance matrices in memory (a few hundred MB at the limit).
_MATRIX_MAX = 2600


@dataclass(frozen=True)
class KnnConfig:
    k: int = 5
    tie_mode: str = "strict"  # "strict" or "mixed"
    jitter: float = 0.0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be a positive integer")
        if self.tie_mode not in ("strict", "mixed"):
            raise ValueError(f"unknown tie_mode {self.tie_mode!r}")
        if self.jitter < 0:
            raise ValueError("jitter must be non-negative")


def as_block(values):
    """Coerce samples to an (n, d) float64 matrix."""
    a = np.asarray(values, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(-1, 1)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"expected an (n, d) sample block, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("sample block contains non-finite values")
    return a


def digamma(x):
    """Digamma function for positive arguments (scalar or array).

    Upward recurrence to x >= 6 followed by the asymptotic series;
    absolute error <= 1e-10 for x >= 1e-3.
    """
    x = np.asarray(x, dtype=np.float64)
    scalar = x.ndim == 0
    x = np.atleast_1d(x).copy()
    if np.any(x <= 0):
        raise ValueError("digamma requires x > 0")
    result = np.zeros_like(x)
    while True:
        small = x < 6.0
        if not np.any(small):
            break
        result[small] -= 1.0 / x[small]
        x[small] += 1.0
    inv2 = 1.0 / (x * x)
    # asymptotic series: ln x - 1/(2x) - sum B_2n / (2n x^2n)
    series = inv2 * (1.0 / 12.0
                     - inv2 * (1.0 / 120.0
                               - inv2 * (1.0 / 252.0
                                         - inv2 * (1.0 / 240.0
                                                   - inv2 * (1.0 / 132.0)))))
    result += np.log(x) - 0.5 / x - series
    return result[0] if scalar else result


def _apply_jitter(block, scale, rng):
    spread = np.maximum(block.max(axis=0) - block.min(axis=0), 1.0)
    return block + rng.uniform(-1.0, 1.0, size=block.shape) * (scale * spread)


def knn_distances(points, k):
    """Chebyshev distance from each point to its k-th nearest other point."""
    pts = as_block(points)
    n = pts.shape[0]
    if k >= n:
        raise ValueError(f"k={k} must be smaller than the sample count n={n}")
    if n <= _BRUTE_FORCE_MAX:
        diff = np.abs(pts[:, None, :] - pts[None, :, :]).max(axis=2)
        np.fill_diagonal(diff, np.inf)
        diff.sort(axis=1)
        return diff[:, k - 1]
    tree = cKDTree(pts)
    dist, _ = tree.query(pts, k=k + 1, p=np.inf, workers=-1)
    return dist[:, k]


def _count_lt(block, radii, tree=None):
    """Per-point count of other points strictly closer than radii[i]."""
    if tree is None:
        tree = cKDTree(block)
    pos = radii > 0
    counts = np.zeros(len(radii), dtype=np.int64)
    if np.any(pos):
        shrunk = np.nextafter(radii[pos], 0.0)
        counts[pos] = tree.query_ball_point(
            block[pos], shrunk, p=np.inf, workers=-1, return_length=True) - 1
    return counts


def _count_le(block, radii, tree=None):
    """Per-point count of other points within closed balls of radii[i]."""
    if tree is None:
        tree = cKDTree(block)
    return tree.query_ball_point(
        block, radii, p=np.inf, workers=-1, return_length=True) - 1


def _chebyshev_matrix(block):
    """Full pairwise Chebyshev distance matrix, built in row chunks."""
    n, d = block.shape
    out = np.empty((n, n))
    step = max(1, (1 << 22) // max(n * d, 1))
    for s in range(0, n, step):
        out[s:s + step] = np.abs(
            block[s:s + step, None, :] - block[None, :, :]).max(axis=2)
    return out


class PermutationCmi:
    """Cached MI/CMI evaluator for repeated permutations of the x block.

    Permutation tests re-estimate the same statistic hundreds of times
    with only the x rows shuffled, so everything that does not depend
    on the permutation is computed once: for moderate n the full
    pairwise Chebyshev distance matrices, and for larger n the KD-trees
    of the fixed marginal blocks plus a digamma lookup table.
    """

    def __init__(self, x, y, z=None, cfg=KnnConfig(), cache=None):
        self.x = as_block(x)
        self.y = as_block(y)
        self.z = None if z is None else as_block(z)
        n = self.x.shape[0]
        if self.y.shape[0] != n or (self.z is not None and self.z.shape[0] != n):
            raise ValueError("sample blocks must have the same sample count")
        if cfg.k >= n:
            raise ValueError(f"k={cfg.k} must be smaller than n={n}")
        self.cfg = cfg
        self.n = n
        # optional dict shared across tests that reuse the same (y, z)
        # conditioning data, e.g. the relations of a blanket search
        self._cache = cache
        # _dig[c] = digamma(c + 1) for integer counts c in 0..n
        self._dig = digamma(np.arange(1, n + 2, dtype=np.float64))
        self._use_matrix = n <= _MATRIX_MAX
        if self._use_matrix:
            self._dx = _chebyshev_matrix(self.x)
            if self.z is None:
                # distances of the block paired with x
                self._dfixed = _chebyshev_matrix(self.y)
            else:
                self._dz, self._dfixed = self._cached(
                    "matrix", self._build_matrix_fixed)
        elif self.z is None:
            self._y_tree = cKDTree(self.y)
        else:
            self._yz = np.hstack([self.y, self.z])
            self._yz_tree, self._z_tree = self._cached(
                "trees", lambda: (cKDTree(self._yz), cKDTree(self.z)))

    def _cached(self, kind, build):
        if self._cache is None:
            return build()
        key = (kind, self.y.shape[1], self.z.shape[1],
               hash(self.y.tobytes()), hash(self.z.tobytes()))
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    def _build_matrix_fixed(self):
        dz = _chebyshev_matrix(self.z)
        return dz, np.maximum(_chebyshev_matrix(self.y), dz)

    def estimate(self, perm=None):
        """The MI (no z) or CMI statistic with x rows permuted by perm."""
        if self._use_matrix:
            return self._estimate_matrix(perm)
        if (perm is not None and self.z is not None
                and self.cfg.tie_mode == "strict"):
            return self._estimate_topm(perm)
        return self._estimate_tree(perm)

    # -- full-distance-matrix path ------------------------------------

    def _estimate_matrix(self, perm):
        k, dig = self.cfg.k, self._dig
        dx = self._dx if perm is None else self._dx[np.ix_(perm, perm)]
        joint = np.maximum(dx, self._dfixed)
        np.fill_diagonal(joint, np.inf)
        radii = np.partition(joint, k - 1, axis=1)[:, k - 1]
        r = radii[:, None]
        self_hit = (radii > 0).astype(np.int64)  # diagonal zeros count once

        def lt(d):
            return (d < r).sum(axis=1) - self_hit

        if self.z is None:
            c_a, c_b = lt(dx), lt(self._dfixed)
            base = None
        else:
            c_a = lt(np.maximum(dx, self._dz))
            c_b, base = lt(self._dfixed), lt(self._dz)

        if self.cfg.tie_mode == "strict":
            total = dig[k - 1] - np.mean(dig[c_a] + dig[c_b])
            if self.z is None:
                return float(total + dig[self.n - 1])
            return float(total + np.mean(dig[base]))

        # mixed: counts include the point itself; at zero radius the
        # k-NN ball collapses to the tie multiplicity
        c_a += 1
        c_b += 1
        k_tilde = np.full(self.n, k, dtype=np.int64)
        if base is not None:
            base += 1
        zero = radii == 0
        if np.any(zero):
            k_tilde[zero] = (joint[zero] <= 0).sum(axis=1) + 1
            c_a[zero] = ((np.maximum(dx, self._dz)[zero] <= 0).sum(axis=1)
                         if self.z is not None else (dx[zero] <= 0).sum(axis=1))
            c_b[zero] = (self._dfixed[zero] <= 0).sum(axis=1)
            if base is not None:
                base[zero] = (self._dz[zero] <= 0).sum(axis=1)
        total = np.mean(dig[k_tilde - 1]) - np.mean(dig[c_a - 1] + dig[c_b - 1])
        if self.z is None:
            return float(total + np.log(self.n))
        return float(total + np.mean(dig[base - 1]))

    # -- KD-tree path for large n --------------------------------------

    def _estimate_tree(self, perm):
        k, dig = self.cfg.k, self._dig
        xp = self.x if perm is None else self.x[perm]
        if self.z is None:
            joint = np.hstack([xp, self.y])
            a_block, a_tree = xp, None
            b_block, b_tree = self.y, self._y_tree
            base_block = base_tree = None
        else:
            joint = np.hstack([xp, self._yz])
            a_block, a_tree = np.hstack([xp, self.z]), None
            b_block, b_tree = self._yz, self._yz_tree
            base_block, base_tree = self.z, self._z_tree
        radii = knn_distances(joint, k)

        if self.cfg.tie_mode == "strict":
            c_a = _count_lt(a_block, radii, a_tree)
            c_b = _count_lt(b_block, radii, b_tree)
            total = dig[k - 1] - np.mean(dig[c_a] + dig[c_b])
            if self.z is None:
                return float(total + dig[self.n - 1])
            return float(total + np.mean(dig[_count_lt(base_block, radii,
                                                       base_tree)]))

        c_a = _count_lt(a_block, radii, a_tree) + 1
        c_b = _count_lt(b_block, radii, b_tree) + 1
        base = (None if base_block is None
                else _count_lt(base_block, radii, base_tree) + 1)
        k_tilde = np.full(self.n, k, dtype=np.int64)
        zero = radii == 0
        if np.any(zero):
            k_tilde[zero] = _count_le(joint, radii)[zero] + 1
            c_a[zero] = _count_le(a_block, radii, a_tree)[zero] + 1
            c_b[zero] = _count_le(b_block, radii, b_tree)[zero] + 1
            if base is not None:
                base[zero] = _count_le(base_block, radii, base_tree)[zero] + 1
        total = np.mean(dig[k_tilde - 1]) - np.mean(dig[c_a - 1] + dig[c_b - 1])
        if self.z is None:
            return float(total + np.log(self.n))
        return float(total + np.mean(dig[base - 1]))


    # -- large-n conditional path: full x distances + capped neighbor --
    # -- tables for the fixed (y,z) spaces, exact fallback per row    --

    def _rows_chebyshev(self, block, rows):
        return cdist(block[rows], block, "chebyshev")

    def _ensure_topm(self):
        if hasattr(self, "_topm"):
            return
        n, k = self.n, self.cfg.k
        m = min(n, max(512, 2 * k))
        self._topm = m
        self._dx_full = cdist(self.x, self.x, "chebyshev")

        def build():
            v_z, j_z = self._z_tree.query(self.z, k=m, p=np.inf, workers=-1)
            v_yz, j_yz = self._yz_tree.query(self._yz, k=m, p=np.inf,
                                             workers=-1)
            j_z = j_z.astype(np.int64)
            j_yz = j_yz.astype(np.int64)
            idx = np.arange(n)[:, None]
            self_yz = j_yz == idx
            self_z = j_z == idx
            # rows whose own index fell off a tied candidate list always
            # take the exact fallback
            noself = ~(self_yz.any(axis=1) & self_z.any(axis=1))
            return v_z, j_z, v_yz, j_yz, self_yz, self_z, noself

        (self._v_z, self._j_z, self._v_yz, self._j_yz,
         self._self_yz, self._self_z, self._noself) = self._cached(
            ("topm", m), build)

    def _estimate_topm(self, perm):
        self._ensure_topm()
        k, dig, m, n = self.cfg.k, self._dig, self._topm, self.n
        dx = self._dx_full
        rows = perm[:, None]
        cand = np.maximum(dx[rows, perm[self._j_yz]], self._v_yz)
        cand[self._self_yz] = np.inf
        radii = np.partition(cand, k - 1, axis=1)[:, k - 1]
        r = radii[:, None]
        sh = (radii > 0).astype(np.int64)
        n_yz = (self._v_yz < r).sum(axis=1) - sh
        n_z = (self._v_z < r).sum(axis=1) - sh
        xz = np.maximum(dx[rows, perm[self._j_z]], self._v_z)
        xz[self._self_z] = 0.0
        n_xz = (xz < r).sum(axis=1) - sh
        if m < n:
            # capped tables are only exact while the k-NN radius stays
            # inside both candidate lists
            bad = ((radii >= self._v_yz[:, -1]) | (radii >= self._v_z[:, -1])
                   | self._noself)
            if np.any(bad):
                bi = np.flatnonzero(bad)
                dxr = dx[np.ix_(perm[bi], perm)]
                dzr = self._rows_chebyshev(self.z, bi)
                dyzr = np.maximum(self._rows_chebyshev(self.y, bi), dzr)
                joint = np.maximum(dxr, dyzr)
                joint[np.arange(len(bi)), bi] = np.inf
                rb = np.partition(joint, k - 1, axis=1)[:, k - 1]
                rbc = rb[:, None]
                shb = (rb > 0).astype(np.int64)
                n_yz[bi] = (dyzr < rbc).sum(axis=1) - shb
                n_z[bi] = (dzr < rbc).sum(axis=1) - shb
                n_xz[bi] = (np.maximum(dxr, dzr) < rbc).sum(axis=1) - shb
        return float(dig[k - 1] - np.mean(dig[n_xz] + dig[n_yz] - dig[n_z]))


def ksg_mi(x, y, cfg=KnnConfig(), rng=None):
    """Estimate I(X;Y) in nats from paired samples."""
    x = as_block(x)
    y = as_block(y)
    if x.shape[0] != y.shape[0]:
        raise ValueError("x and y must have the same sample count")
    if cfg.jitter > 0:
        rng = np.random.default_rng(0) if rng is None else rng
        x = _apply_jitter(x, cfg.jitter, rng)
        y = _apply_jitter(y, cfg.jitter, rng)
    return PermutationCmi(x, y, cfg=cfg).estimate()


def fp_cmi(x, y, z, cfg=KnnConfig(), rng=None):
    """Estimate I(X;Y|Z) in nats from paired samples."""
    x = as_block(x)
    y = as_block(y)
    z = as_block(z)
    if y.shape[0] != x.shape[0] or z.shape[0] != x.shape[0]:
        raise ValueError("x, y and z must have the same sample count")
    if cfg.jitter > 0:
        rng = np.random.default_rng(0) if rng is None else rng
        x = _apply_jitter(x, cfg.jitter, rng)
        y = _apply_jitter(y, cfg.jitter, rng)
        z = _apply_jitter(z, cfg.jitter, rng)
    return PermutationCmi(x, y, z, cfg).estimate()
