"""Hot numeric kernels with a numba path and a pure-numpy fallback.

Set ``FAIREVO_DISABLE_NUMBA=1`` before import to force the numpy versions
(useful for debugging and for coverage). Both backends are always reachable
through :data:`BACKENDS` so tests and the benchmark can compare them.

All kernels take float64 C-contiguous arrays. Randomness never happens in
here: callers pre-draw whatever uniforms a kernel consumes, which keeps the
two backends bit-for-bit interchangeable.
"""
import os
from types import SimpleNamespace

import numpy as np

_DISABLED = os.environ.get("FAIREVO_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes"}

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None


# ---------------------------------------------------------------------------
# numpy implementations
# ---------------------------------------------------------------------------

def _np_nondominated_mask(F):
    n = F.shape[0]
    mask = np.ones(n, dtype=np.bool_)
    # row blocks keep the n*n*m temporary bounded
    block = max(1, 4_000_000 // max(1, n * F.shape[1]))
    for start in range(0, n, block):
        A = F[start:start + block]
        le = (A[:, None, :] <= F[None, :, :]).all(axis=2)
        lt = (A[:, None, :] < F[None, :, :]).any(axis=2)
        dominated_by_block = (le & lt).any(axis=0)
        mask &= ~dominated_by_block
    return mask


def _np_eps_matrix(F):
    return (F[:, None, :] - F[None, :, :]).max(axis=2)


def _np_sde_min_distance(F):
    shifted = np.maximum(0.0, F[None, :, :] - F[:, None, :])
    dist = np.sqrt((shifted * shifted).sum(axis=2))
    np.fill_diagonal(dist, np.inf)
    return dist.min(axis=1)


def _np_stochastic_bubble(order, score_a, score_b, u, pc):
    order = order.copy()
    n = order.shape[0]
    for sweep in range(u.shape[0]):
        swapped = False
        for j in range(n - 1):
            x, y = order[j], order[j + 1]
            if u[sweep, j] < pc:
                worse = score_a[x] < score_a[y]
            else:
                worse = score_b[x] < score_b[y]
            if worse:
                order[j], order[j + 1] = y, x
                swapped = True
        if not swapped:
            break
    return order


def _np_count_dominated_samples(points, samples):
    count = 0
    block = max(1, 2_000_000 // max(1, points.shape[0] * points.shape[1]))
    for start in range(0, samples.shape[0], block):
        S = samples[start:start + block]
        hit = (points[None, :, :] <= S[:, None, :]).all(axis=2).any(axis=1)
        count += int(hit.sum())
    return count


# ---------------------------------------------------------------------------
# loop implementations compiled by numba
# ---------------------------------------------------------------------------

def _loop_nondominated_mask(F):
    n, m = F.shape
    mask = np.ones(n, dtype=np.bool_)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            le = True
            lt = False
            for k in range(m):
                if F[j, k] > F[i, k]:
                    le = False
                    break
                if F[j, k] < F[i, k]:
                    lt = True
            if le and lt:
                mask[i] = False
                break
    return mask


def _loop_eps_matrix(F):
    n, m = F.shape
    out = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            best = -np.inf
            for k in range(m):
                d = F[i, k] - F[j, k]
                if d > best:
                    best = d
            out[i, j] = best
    return out


def _loop_sde_min_distance(F):
    n, m = F.shape
    out = np.empty(n)
    for i in range(n):
        best = np.inf
        for j in range(n):
            if i == j:
                continue
            acc = 0.0
            for k in range(m):
                d = F[j, k] - F[i, k]
                if d > 0.0:
                    acc += d * d
            if acc < best:
                best = acc
        out[i] = np.sqrt(best)
    return out


def _loop_stochastic_bubble(order, score_a, score_b, u, pc):
    order = order.copy()
    n = order.shape[0]
    for sweep in range(u.shape[0]):
        swapped = False
        for j in range(n - 1):
            x = order[j]
            y = order[j + 1]
            if u[sweep, j] < pc:
                worse = score_a[x] < score_a[y]
            else:
                worse = score_b[x] < score_b[y]
            if worse:
                order[j] = y
                order[j + 1] = x
                swapped = True
        if not swapped:
            break
    return order


def _loop_count_dominated_samples(points, samples):
    n, m = points.shape
    count = 0
    for s in range(samples.shape[0]):
        for i in range(n):
            inside = True
            for k in range(m):
                if points[i, k] > samples[s, k]:
                    inside = False
                    break
            if inside:
                count += 1
                break
    return count


NUMPY = SimpleNamespace(
    name="numpy",
    nondominated_mask=_np_nondominated_mask,
    eps_matrix=_np_eps_matrix,
    sde_min_distance=_np_sde_min_distance,
    stochastic_bubble=_np_stochastic_bubble,
    count_dominated_samples=_np_count_dominated_samples,
)

if numba is not None:
    _jit = numba.njit(cache=True)
    NUMBA = SimpleNamespace(
        name="numba",
        nondominated_mask=_jit(_loop_nondominated_mask),
        eps_matrix=_jit(_loop_eps_matrix),
        sde_min_distance=_jit(_loop_sde_min_distance),
        stochastic_bubble=_jit(_loop_stochastic_bubble),
        count_dominated_samples=_jit(_loop_count_dominated_samples),
    )
else:  # pragma: no cover
    NUMBA = None

BACKENDS = {"numpy": NUMPY}
if NUMBA is not None:
    BACKENDS["numba"] = NUMBA

ACTIVE = NUMPY if (_DISABLED or NUMBA is None) else NUMBA


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def nondominated_mask(F):
    F = _f64(F)
    if F.shape[0] == 0:
        return np.zeros(0, dtype=bool)
    return ACTIVE.nondominated_mask(F)


def eps_matrix(F):
    return ACTIVE.eps_matrix(_f64(F))


def sde_min_distance(F):
    F = _f64(F)
    if F.shape[0] < 2:
        return np.full(F.shape[0], np.inf)
    return ACTIVE.sde_min_distance(F)


def stochastic_bubble(order, score_a, score_b, u, pc):
    return ACTIVE.stochastic_bubble(
        np.ascontiguousarray(order, dtype=np.int64), _f64(score_a), _f64(score_b), _f64(u), float(pc)
    )


def count_dominated_samples(points, samples):
    return int(ACTIVE.count_dominated_samples(_f64(points), _f64(samples)))
