import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mstct.errors import EmptyMask, EmptyRegion, ZeroReference
from mstct.metrics import disc_mask, evaluate, psnr, region_std, report_row, rmse, write_reports


def test_rmse_basic():
    ref = np.random.default_rng(0).random((8, 8))
    assert rmse(ref, ref) == 0.0
    assert rmse(ref + 0.1, ref) == pytest.approx(0.1, rel=1e-12)


def test_rmse_oracle():
    rng = np.random.default_rng(1)
    a, b = rng.random((2, 30, 30))
    mask = rng.random((30, 30)) > 0.5
    acc = 0.0
    n = 0
    for x, y, m in zip(a.ravel()[::-1], b.ravel()[::-1], mask.ravel()[::-1]):
        if m:
            acc += (x - y) ** 2
            n += 1
    assert rmse(a, b, mask) == pytest.approx(math.sqrt(acc / n), rel=1e-12)


def test_psnr_values():
    ref = np.zeros((4, 4))
    ref[0, 0] = 1.0
    assert psnr(ref, ref) == math.inf
    img = ref + 1.0
    assert psnr(img, ref) == pytest.approx(0.0, abs=1e-12)
    assert 20 * math.log10(1.0 / 0.1381) == pytest.approx(17.196, abs=1e-3)


def test_psnr_errors():
    with pytest.raises(ZeroReference):
        psnr(np.ones((3, 3)), np.zeros((3, 3)))
    with pytest.raises(EmptyMask):
        rmse(np.ones((3, 3)), np.ones((3, 3)), np.zeros((3, 3), bool))


def test_shape_mismatch():
    with pytest.raises(ValueError):
        rmse(np.ones((3, 3)), np.ones((3, 4)))


def test_region_std():
    assert region_std(np.full((5, 5), 2.0), np.ones((5, 5), bool)) == 0.0
    img = np.zeros((4, 4))
    img[:2] = 1.0
    n = 16
    assert region_std(img, np.ones((4, 4), bool)) == pytest.approx(0.5 * math.sqrt(n / (n - 1)), rel=1e-12)
    with pytest.raises(EmptyRegion):
        region_std(img, np.zeros((4, 4), bool))


def test_region_std_oracle():
    rng = np.random.default_rng(2)
    img = rng.standard_normal((20, 20))
    reg = rng.random((20, 20)) > 0.3
    v = img[reg]
    m = sum(v) / len(v)
    assert region_std(img, reg) == pytest.approx(math.sqrt(sum((x - m) ** 2 for x in v) / (len(v) - 1)), rel=1e-12)


@settings(max_examples=50)
@given(alpha=st.floats(0.01, 100, allow_nan=False), seed=st.integers(0, 1000))
def test_rmse_homogeneous(alpha, seed):
    a, b = np.random.default_rng(seed).random((2, 6, 6))
    assert rmse(alpha * a, alpha * b) == pytest.approx(alpha * rmse(a, b), rel=1e-12)


def test_psnr_decreases_with_rmse():
    ref = np.random.default_rng(3).random((10, 10)) + 0.5
    vals = [psnr(ref + e, ref) for e in (0.01, 0.05, 0.2)]
    assert vals[0] > vals[1] > vals[2]


def test_disc_mask_and_report(tmp_path):
    m = disc_mask(9, 1.0, 2.0)
    assert m[4, 4] and not m[0, 0] and m.sum() == 13
    rep = evaluate(np.ones((9, 9)), np.ones((9, 9)), m, "disc")
    assert rep.rmse == 0.0 and rep.n_pixels == 13
    path = write_reports(tmp_path / "m.csv", [report_row(rep, algo="D")])
    lines = path.read_text().splitlines()
    assert lines[0] == "algo,rmse,psnr,n_pixels,mask"
    assert lines[1].startswith("D,0.0,inf,13,disc")
