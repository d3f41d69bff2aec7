"""Hot inner loops, each in two flavours: a numba ``@njit`` kernel and a
pure-numpy twin.

The active backend is chosen once at import time.  Set
``EEGPAINT_DISABLE_NUMBA=1`` to force the numpy path (it is also used when
numba is not importable).  Both backends are written to perform the same
floating-point operations in the same order, so on one machine they agree
bit for bit; the test-suite checks this.
"""
from __future__ import annotations

import os
from types import SimpleNamespace

import numpy as np

PCG_MULT = 6364136223846793005
_MASK64 = (1 << 64) - 1

try:  # pragma: no cover - depends on the environment
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False

DISABLED_BY_ENV = os.environ.get("EEGPAINT_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")


# --------------------------------------------------------------------------
# numpy backend
# --------------------------------------------------------------------------

def _np_pcg32_fill(state, inc, n):
    """Return ``n`` PCG32 (XSH-RR) outputs and the advanced state.

    The LCG states are produced by repeated doubling of an affine jump, which
    keeps the work vectorised: after filling ``m`` states the ``m``-step jump
    is applied to all of them at once.
    """
    n = int(n)
    states = np.empty(max(n, 1), dtype=np.uint64)
    states[0] = np.uint64(state)
    mul = np.array([PCG_MULT], dtype=np.uint64)
    add = np.array([inc], dtype=np.uint64)
    filled = 1
    with np.errstate(over="ignore"):
        while filled < n:
            k = min(filled, n - filled)
            states[filled:filled + k] = states[:k] * mul + add
            add = add * mul + add
            mul = mul * mul
            filled += k
    states = states[:n]
    new_state = (int(states[-1]) * PCG_MULT + int(inc)) & _MASK64 if n else int(state)
    xorshifted = (((states >> np.uint64(18)) ^ states) >> np.uint64(27)) & np.uint64(0xFFFFFFFF)
    rot = states >> np.uint64(59)
    out = (xorshifted >> rot) | (xorshifted << ((np.uint64(32) - rot) & np.uint64(31)))
    return (out & np.uint64(0xFFFFFFFF)).astype(np.uint32), new_state


def _np_scan_frames(buf):
    if buf.shape[0] < 33:
        return np.empty(0, dtype=np.int64)
    ok = (buf[:-32] == 0xA0) & ((buf[32:] & 0xF0) == 0xC0)
    return np.flatnonzero(ok).astype(np.int64)


def _np_select_frames(cands, n_bytes):
    k = cands.shape[0]
    if k == 0:
        return cands.copy()
    weight = _frame_weights(cands, n_bytes)
    nxt = np.searchsorted(cands, cands + 33)
    best = np.zeros(k + 1, dtype=np.int64)
    for i in range(k - 1, -1, -1):
        take = weight[i] + best[nxt[i]]
        best[i] = take if take > best[i + 1] else best[i + 1]
    chosen = []
    i = 0
    while i < k:
        if weight[i] + best[nxt[i]] > best[i + 1]:
            chosen.append(cands[i])
            i = nxt[i]
        else:
            i += 1
    return np.asarray(chosen, dtype=np.int64)


def _frame_weights(cands, n_bytes):
    # 1 per frame, +1 for each side that abuts another candidate or a buffer edge
    prev_pos = cands - 33
    next_pos = cands + 33
    j = np.searchsorted(cands, prev_pos)
    has_prev = (j < cands.shape[0]) & (cands[np.minimum(j, cands.shape[0] - 1)] == prev_pos)
    j = np.searchsorted(cands, next_pos)
    has_next = (j < cands.shape[0]) & (cands[np.minimum(j, cands.shape[0] - 1)] == next_pos)
    has_prev |= cands == 0
    has_next |= next_pos == n_bytes
    return 1 + has_prev.astype(np.int64) + has_next.astype(np.int64)


def _np_im2col(xp, kh, kw, stride, ho, wo):
    n, c = xp.shape[0], xp.shape[1]
    cols = np.empty((c, kh, kw, n, ho, wo), dtype=xp.dtype)
    for i in range(kh):
        for j in range(kw):
            patch = xp[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride]
            cols[:, i, j] = patch.transpose(1, 0, 2, 3)
    return cols.reshape(c * kh * kw, n * ho * wo)


def _np_col2im(cols, n, c, hp, wp, kh, kw, stride, ho, wo):
    c6 = cols.reshape(c, kh, kw, n, ho, wo)
    xp = np.zeros((n, c, hp, wp), dtype=cols.dtype)
    for i in range(kh):
        for j in range(kw):
            xp[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += c6[:, i, j].transpose(1, 0, 2, 3)
    return xp


def _np_resample_last_axis(a, idx, w):
    out = w[:, 0] * a[:, idx[:, 0]]
    for t in range(1, idx.shape[1]):
        out = out + w[:, t] * a[:, idx[:, t]]
    return out


numpy_backend = SimpleNamespace(
    name="numpy",
    pcg32_fill=_np_pcg32_fill,
    scan_frames=_np_scan_frames,
    select_frames=_np_select_frames,
    im2col=_np_im2col,
    col2im=_np_col2im,
    resample_last_axis=_np_resample_last_axis,
)


# --------------------------------------------------------------------------
# numba backend
# --------------------------------------------------------------------------

def _build_numba_backend():
    njit = numba.njit(cache=True, nogil=True)

    @njit
    def pcg32_core(state, inc, n):
        out = np.empty(n, dtype=np.uint32)
        mult = np.uint64(PCG_MULT)
        s = np.uint64(state)
        c = np.uint64(inc)
        m32 = np.uint64(0xFFFFFFFF)
        for i in range(n):
            old = s
            s = old * mult + c
            xs = (((old >> np.uint64(18)) ^ old) >> np.uint64(27)) & m32
            rot = old >> np.uint64(59)
            r = (xs >> rot) | (xs << ((np.uint64(32) - rot) & np.uint64(31)))
            out[i] = np.uint32(r & m32)
        return out, s

    def pcg32_fill(state, inc, n):
        out, s = pcg32_core(np.uint64(state), np.uint64(inc), int(n))
        return out, int(s)

    @njit
    def scan_frames(buf):
        n = buf.shape[0]
        if n < 33:
            return np.empty(0, dtype=np.int64)
        hits = np.empty(n - 32, dtype=np.int64)
        k = 0
        for i in range(n - 32):
            if buf[i] == 0xA0 and (buf[i + 32] & 0xF0) == 0xC0:
                hits[k] = i
                k += 1
        return hits[:k].copy()

    @njit
    def select_core(cands, n_bytes):
        k = cands.shape[0]
        weight = np.ones(k, dtype=np.int64)
        nxt = np.empty(k, dtype=np.int64)
        j = 0
        for i in range(k):
            while j < k and cands[j] < cands[i] + 33:
                j += 1
            nxt[i] = j
            if j < k and cands[j] == cands[i] + 33:
                weight[i] += 1
            elif cands[i] + 33 == n_bytes:
                weight[i] += 1
        p = 0
        for i in range(k):
            while p < k and cands[p] < cands[i] - 33:
                p += 1
            if (p < k and cands[p] == cands[i] - 33) or cands[i] == 0:
                weight[i] += 1
        best = np.zeros(k + 1, dtype=np.int64)
        for i in range(k - 1, -1, -1):
            take = weight[i] + best[nxt[i]]
            best[i] = take if take > best[i + 1] else best[i + 1]
        chosen = np.empty(k, dtype=np.int64)
        m = 0
        i = 0
        while i < k:
            if weight[i] + best[nxt[i]] > best[i + 1]:
                chosen[m] = cands[i]
                m += 1
                i = nxt[i]
            else:
                i += 1
        return chosen[:m].copy()

    def select_frames(cands, n_bytes):
        return select_core(np.ascontiguousarray(cands, dtype=np.int64), int(n_bytes))

    @njit
    def im2col(xp, kh, kw, stride, ho, wo):
        n, c = xp.shape[0], xp.shape[1]
        cols = np.empty((c * kh * kw, n * ho * wo), dtype=xp.dtype)
        for ci in range(c):
            for i in range(kh):
                for j in range(kw):
                    row = (ci * kh + i) * kw + j
                    for b in range(n):
                        for oh in range(ho):
                            base = (b * ho + oh) * wo
                            y = i + stride * oh
                            for ow in range(wo):
                                cols[row, base + ow] = xp[b, ci, y, j + stride * ow]
        return cols

    @njit
    def col2im(cols, n, c, hp, wp, kh, kw, stride, ho, wo):
        xp = np.zeros((n, c, hp, wp), dtype=cols.dtype)
        for i in range(kh):
            for j in range(kw):
                for b in range(n):
                    for ci in range(c):
                        row = (ci * kh + i) * kw + j
                        for oh in range(ho):
                            base = (b * ho + oh) * wo
                            y = i + stride * oh
                            for ow in range(wo):
                                xp[b, ci, y, j + stride * ow] += cols[row, base + ow]
        return xp

    @njit
    def resample_last_axis(a, idx, w):
        rows = a.shape[0]
        n_out, taps = idx.shape
        out = np.empty((rows, n_out), dtype=np.float64)
        for r in range(rows):
            for o in range(n_out):
                acc = w[o, 0] * a[r, idx[o, 0]]
                for t in range(1, taps):
                    acc = acc + w[o, t] * a[r, idx[o, t]]
                out[r, o] = acc
        return out

    def _c(f):
        def wrapped(*args):
            args = tuple(np.ascontiguousarray(a) if isinstance(a, np.ndarray) else a for a in args)
            return f(*args)
        wrapped.__name__ = f.__name__ if hasattr(f, "__name__") else "kernel"
        wrapped.__wrapped__ = f
        return wrapped

    return SimpleNamespace(
        name="numba",
        pcg32_fill=pcg32_fill,
        scan_frames=_c(scan_frames),
        select_frames=select_frames,
        im2col=_c(im2col),
        col2im=_c(col2im),
        resample_last_axis=_c(resample_last_axis),
    )


numba_backend = _build_numba_backend() if HAVE_NUMBA else None


def get_backend(name: str | None = None) -> SimpleNamespace:
    """Return the backend called ``name`` or the active one when ``name`` is None."""
    if name is None:
        return active
    if name == "numpy":
        return numpy_backend
    if name == "numba":
        if numba_backend is None:
            raise RuntimeError("numba is not installed")
        return numba_backend
    raise ValueError(f"unknown backend {name!r}")


active = numba_backend if (numba_backend is not None and not DISABLED_BY_ENV) else numpy_backend
BACKEND = active.name

pcg32_fill = active.pcg32_fill
scan_frames = active.scan_frames
select_frames = active.select_frames
im2col = active.im2col
col2im = active.col2im
resample_last_axis = active.resample_last_axis
