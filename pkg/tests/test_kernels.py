import os
import subprocess
import sys

import numpy as np
import pytest

from conftest import packet_stream
from eegpaint import kernels
from eegpaint.rng import Pcg32, derive_seed

numba_only = pytest.mark.skipif(not kernels.HAVE_NUMBA, reason="numba not installed")


def test_pcg32_reference_vector():
    r = Pcg32(42, 54)
    assert [r.next_u32() for _ in range(6)] == [
        0xA15C02B7, 0x7B47F409, 0xBA1D3330, 0x83D2F293, 0xBFA4784B, 0xCBED606E,
    ]


def test_rng_helpers():
    r = Pcg32(7)
    u = r.random(1000)
    assert u.min() >= 0 and u.max() < 1
    z = Pcg32(8).normal(0, 1, 20000)
    assert abs(z.mean()) < 0.03 and abs(z.std() - 1) < 0.03
    k = Pcg32(9).integers(3, 7, 500)
    assert set(np.unique(k)) == {3, 4, 5, 6}
    assert sorted(Pcg32(1).permutation(10)) == list(range(10))
    assert derive_seed(1, 2) == derive_seed(1, 2) != derive_seed(1, 3)


@numba_only
@pytest.mark.parametrize("n", [0, 1, 2, 7, 64, 1001])
def test_pcg_backends_agree(n):
    inc = (54 << 1) | 1
    a, sa = kernels.numpy_backend.pcg32_fill(123456789, inc, n)
    b, sb = kernels.numba_backend.pcg32_fill(123456789, inc, n)
    assert np.array_equal(a, b) and sa == sb


@numba_only
def test_frame_backends_agree():
    _, raw = packet_stream(50, seed=11)
    rng = Pcg32(3)
    for trial in range(50):
        buf = bytearray(raw)
        for pos in rng.integers(0, len(buf), int(rng.integers(0, 30))):
            buf[int(pos)] = 0xA0 if rng.random() < 0.3 else int(rng.integers(0, 256))
        arr = np.frombuffer(bytes(buf), dtype=np.uint8)
        ca = kernels.numpy_backend.scan_frames(arr)
        cb = kernels.numba_backend.scan_frames(arr)
        assert np.array_equal(ca, cb)
        assert np.array_equal(kernels.numpy_backend.select_frames(ca, len(arr)),
                              kernels.numba_backend.select_frames(cb, len(arr)))


@numba_only
@pytest.mark.parametrize("dtype", [np.float32, np.float64])
def test_conv_kernels_agree(dtype):
    rng = Pcg32(5)
    x = rng.normal(0, 1, (2, 3, 10, 10)).astype(dtype)
    a = kernels.numpy_backend.im2col(x, 4, 4, 2, 4, 4)
    b = kernels.numba_backend.im2col(x, 4, 4, 2, 4, 4)
    assert np.array_equal(a, b)
    cols = rng.normal(0, 1, a.shape).astype(dtype)
    a = kernels.numpy_backend.col2im(cols, 2, 3, 10, 10, 4, 4, 2, 4, 4)
    b = kernels.numba_backend.col2im(cols, 2, 3, 10, 10, 4, 4, 2, 4, 4)
    assert a.dtype == b.dtype == dtype
    assert np.array_equal(a, b)


@numba_only
def test_resample_agree():
    from eegpaint.imaging import _taps

    rng = Pcg32(6)
    a = rng.random((12, 9))
    idx, w = _taps(9, 8)
    assert np.array_equal(kernels.numpy_backend.resample_last_axis(a, idx, w),
                          kernels.numba_backend.resample_last_axis(a, idx, w))


def test_env_flag_selects_numpy():
    env = dict(os.environ, EEGPAINT_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", "import eegpaint; print(eegpaint.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"


def test_get_backend():
    assert kernels.get_backend() is kernels.active
    assert kernels.get_backend("numpy") is kernels.numpy_backend
    with pytest.raises(ValueError):
        kernels.get_backend("cuda")
