"""Hot numeric loops, with a numba path and a pure-numpy fallback.

The numba path is used when numba imports cleanly and the environment
variable ``MMPROMPT_NO_NUMBA`` is unset (or set to ``0``/``false``).
Both paths are importable directly as ``numpy_impl`` and ``numba_impl``
so tests and the benchmark can compare them; ``numba_impl`` is None
when numba is unavailable.
"""
import os
import types

import numpy as np

_FLAG = os.environ.get("MMPROMPT_NO_NUMBA", "").strip().lower()
NUMBA_DISABLED = _FLAG not in ("", "0", "false", "no")

try:  # pragma: no cover - depends on the environment
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    _HAVE_NUMBA = False


# ---------------------------------------------------------------------------
# numpy implementations


def _np_resample_bilinear(src, out_h, out_w):
    in_h, in_w, _ = src.shape
    ys = (np.arange(out_h) + 0.5) * (in_h / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (in_w / out_w) - 0.5
    ys = np.clip(ys, 0.0, in_h - 1)
    xs = np.clip(xs, 0.0, in_w - 1)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    wy = (ys - y0)[:, None, None]
    wx = (xs - x0)[None, :, None]
    top = src[y0][:, x0] * (1.0 - wx) + src[y0][:, x1] * wx
    bot = src[y1][:, x0] * (1.0 - wx) + src[y1][:, x1] * wx
    return top * (1.0 - wy) + bot * wy


def _np_polarity_sum(ts, xs, ys, ps, t0, t1, width, height):
    out = np.zeros((height, width), dtype=np.int64)
    sel = (ts >= t0) & (ts < t1)
    np.add.at(out, (ys[sel], xs[sel]), ps[sel])
    return out


def _np_polarity_latest(ts, xs, ys, ps, t0, t1, width, height):
    out = np.zeros((height, width), dtype=np.int64)
    idx = np.flatnonzero((ts >= t0) & (ts < t1))
    if idx.size == 0:
        return out
    # stable sort on time: among equal timestamps the later record wins
    idx = idx[np.argsort(ts[idx], kind="stable")]
    out[ys[idx], xs[idx]] = ps[idx]
    return out


def _np_jet(values):
    v = 4.0 * np.asarray(values, dtype=np.float64)
    out = np.empty(v.shape + (3,), dtype=np.float64)
    out[..., 0] = np.clip(1.5 - np.abs(v - 3.0), 0.0, 1.0)
    out[..., 1] = np.clip(1.5 - np.abs(v - 2.0), 0.0, 1.0)
    out[..., 2] = np.clip(1.5 - np.abs(v - 1.0), 0.0, 1.0)
    return out


def _np_sidelobe_stats(resp, py, px, half):
    mask = np.ones(resp.shape, dtype=bool)
    mask[max(py - half, 0):py + half + 1, max(px - half, 0):px + half + 1] = False
    side = resp[mask]
    if side.size == 0:
        return 0.0, 0.0
    return float(side.mean()), float(side.std())


def _np_lt_sums(iou, present, reported, conf, thresholds):
    """Per threshold: (overlap sum over reported∧present, #reported).

    Sums run sequentially in frame order (cumsum), so they match a plain
    Python loop bit for bit.
    """
    rep = reported[None, :] & (conf[None, :] >= thresholds[:, None])
    contrib = np.where(rep & present[None, :], iou[None, :], 0.0)
    if contrib.shape[1] == 0:
        return np.zeros(len(thresholds)), np.zeros(len(thresholds), dtype=np.int64)
    sums = np.cumsum(contrib, axis=1)[:, -1]
    return sums, rep.sum(axis=1).astype(np.int64)


def _np_count_at_least(values, grid):
    return (values[None, :] >= grid[:, None]).sum(axis=1).astype(np.int64)


def _np_count_at_most(values, grid):
    return (values[None, :] <= grid[:, None]).sum(axis=1).astype(np.int64)


numpy_impl = types.SimpleNamespace(
    resample_bilinear=_np_resample_bilinear,
    polarity_sum=_np_polarity_sum,
    polarity_latest=_np_polarity_latest,
    jet=_np_jet,
    sidelobe_stats=_np_sidelobe_stats,
    lt_sums=_np_lt_sums,
    count_at_least=_np_count_at_least,
    count_at_most=_np_count_at_most,
    name="numpy",
)


# ---------------------------------------------------------------------------
# numba implementations

numba_impl = None

if _HAVE_NUMBA:
    _jit = numba.njit(cache=True, nogil=True)

    @_jit
    def _nb_resample_bilinear(src, out_h, out_w):
        in_h, in_w, nc = src.shape
        out = np.empty((out_h, out_w, nc), dtype=np.float64)
        sy = in_h / out_h
        sx = in_w / out_w
        for i in range(out_h):
            y = (i + 0.5) * sy - 0.5
            y = min(max(y, 0.0), in_h - 1.0)
            y0 = int(np.floor(y))
            y1 = min(y0 + 1, in_h - 1)
            wy = y - y0
            for j in range(out_w):
                x = (j + 0.5) * sx - 0.5
                x = min(max(x, 0.0), in_w - 1.0)
                x0 = int(np.floor(x))
                x1 = min(x0 + 1, in_w - 1)
                wx = x - x0
                for c in range(nc):
                    top = src[y0, x0, c] * (1.0 - wx) + src[y0, x1, c] * wx
                    bot = src[y1, x0, c] * (1.0 - wx) + src[y1, x1, c] * wx
                    out[i, j, c] = top * (1.0 - wy) + bot * wy
        return out

    @_jit
    def _nb_polarity_sum(ts, xs, ys, ps, t0, t1, width, height):
        out = np.zeros((height, width), dtype=np.int64)
        for k in range(ts.shape[0]):
            if ts[k] >= t0 and ts[k] < t1:
                out[ys[k], xs[k]] += ps[k]
        return out

    @_jit
    def _nb_polarity_latest(ts, xs, ys, ps, t0, t1, width, height):
        out = np.zeros((height, width), dtype=np.int64)
        when = np.full((height, width), -(2 ** 62), dtype=np.int64)
        for k in range(ts.shape[0]):
            t = ts[k]
            if t >= t0 and t < t1 and t >= when[ys[k], xs[k]]:
                when[ys[k], xs[k]] = t
                out[ys[k], xs[k]] = ps[k]
        return out

    @_jit
    def _nb_jet_flat(v, out):
        for k in range(v.shape[0]):
            s = 4.0 * v[k]
            out[k, 0] = min(max(1.5 - abs(s - 3.0), 0.0), 1.0)
            out[k, 1] = min(max(1.5 - abs(s - 2.0), 0.0), 1.0)
            out[k, 2] = min(max(1.5 - abs(s - 1.0), 0.0), 1.0)

    def _nb_jet(values):
        v = np.ascontiguousarray(values, dtype=np.float64)
        out = np.empty((v.size, 3), dtype=np.float64)
        _nb_jet_flat(v.reshape(-1), out)
        return out.reshape(v.shape + (3,))

    @_jit
    def _nb_sidelobe_core(resp, py, px, half):
        h, w = resp.shape
        n = 0
        total = 0.0
        for i in range(h):
            for j in range(w):
                if abs(i - py) <= half and abs(j - px) <= half:
                    continue
                total += resp[i, j]
                n += 1
        if n == 0:
            return 0.0, 0.0
        mean = total / n
        acc = 0.0
        for i in range(h):
            for j in range(w):
                if abs(i - py) <= half and abs(j - px) <= half:
                    continue
                d = resp[i, j] - mean
                acc += d * d
        return mean, np.sqrt(acc / n)

    def _nb_sidelobe_stats(resp, py, px, half):
        mean, std = _nb_sidelobe_core(np.ascontiguousarray(resp, dtype=np.float64), py, px, half)
        return float(mean), float(std)

    @_jit
    def _nb_lt_sums(iou, present, reported, conf, thresholds):
        nt = thresholds.shape[0]
        sums = np.zeros(nt, dtype=np.float64)
        counts = np.zeros(nt, dtype=np.int64)
        for k in range(nt):
            tau = thresholds[k]
            s = 0.0
            c = 0
            for i in range(iou.shape[0]):
                if reported[i] and conf[i] >= tau:
                    c += 1
                    if present[i]:
                        s += iou[i]
            sums[k] = s
            counts[k] = c
        return sums, counts

    @_jit
    def _nb_count_at_least(values, grid):
        out = np.zeros(grid.shape[0], dtype=np.int64)
        for k in range(grid.shape[0]):
            for i in range(values.shape[0]):
                if values[i] >= grid[k]:
                    out[k] += 1
        return out

    @_jit
    def _nb_count_at_most(values, grid):
        out = np.zeros(grid.shape[0], dtype=np.int64)
        for k in range(grid.shape[0]):
            for i in range(values.shape[0]):
                if values[i] <= grid[k]:
                    out[k] += 1
        return out

    numba_impl = types.SimpleNamespace(
        resample_bilinear=_nb_resample_bilinear,
        polarity_sum=_nb_polarity_sum,
        polarity_latest=_nb_polarity_latest,
        jet=_nb_jet,
        sidelobe_stats=_nb_sidelobe_stats,
        lt_sums=_nb_lt_sums,
        count_at_least=_nb_count_at_least,
        count_at_most=_nb_count_at_most,
        name="numba",
    )


active = numpy_impl if (NUMBA_DISABLED or numba_impl is None) else numba_impl
BACKEND = active.name

resample_bilinear = active.resample_bilinear
polarity_sum = active.polarity_sum
polarity_latest = active.polarity_latest
jet = active.jet
sidelobe_stats = active.sidelobe_stats
lt_sums = active.lt_sums
count_at_least = active.count_at_least
count_at_most = active.count_at_most
