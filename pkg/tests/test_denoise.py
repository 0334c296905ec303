import math

import numpy as np
import pytest
from skimage.metrics import structural_similarity

from bernoulli_diffuse import kernels
from bernoulli_diffuse.denoise import (SSIM_K1, DenoiseParams, add_gaussian_noise, as_image,
                                       diffuse_gm, diffuse_pm, gm_rates, mse, postprocess, psnr,
                                       read_png, run_pipeline, sample_image, ssim, ssim_channel,
                                       write_png)
from bernoulli_diffuse.errors import ValidationError
from bernoulli_diffuse.grid import BC, Grid2D


def test_params_defaults_and_validation():
    p = DenoiseParams()
    assert (p.alpha_gm, p.dt_gm, p.steps_gm, p.dt_pm, p.steps_pm, p.K_pm) == (4.0, 0.0118, 400, 0.2, 40, 0.1)
    assert p.as_dict()["mu"] == "rational:0.3"
    with pytest.raises(ValidationError):
        DenoiseParams(dt_gm=0.1)
    with pytest.raises(ValidationError):
        DenoiseParams(alpha_gm=1.0)


def test_noise():
    img = np.full((64, 64, 3), 0.5)
    assert np.array_equal(add_gaussian_noise(img, 0.0, 3), img)
    a = add_gaussian_noise(img, 0.18, 7)
    assert np.array_equal(a, add_gaussian_noise(img, 0.18, 7))
    assert not np.array_equal(a, add_gaussian_noise(img, 0.18, 8))
    assert 0.16 < np.std(a - img) < 0.18
    assert a.min() >= 0 and a.max() <= 1


def test_gm_constant_field_recursion():
    p = DenoiseParams(steps_gm=25)
    out = diffuse_gm(np.full((8, 8), 0.6), p)
    expected = 0.6 * np.prod(1 - p.dt_gm * gm_rates(p))
    assert np.allclose(out, expected, rtol=1e-13)
    assert np.all(diffuse_gm(np.zeros((8, 8)), p) == 0)


def test_gm_smooths_noise():
    rng = np.random.default_rng(0)
    x = np.clip(0.5 + 0.18 * rng.standard_normal((64, 64)), 0, 1)
    assert np.var(diffuse_gm(x, DenoiseParams())) < np.var(x)


def test_gm_accepts_periodic_grid_only():
    p = DenoiseParams(steps_gm=3)
    g = Grid2D.from_array(np.full((4, 4), 0.5), bc=BC.PERIODIC)
    assert isinstance(diffuse_gm(g, p), Grid2D)
    with pytest.raises(ValidationError):
        diffuse_gm(Grid2D.from_array(np.full((4, 4), 0.5)), p)
    with pytest.raises(ValidationError):
        diffuse_gm(np.full((4, 4), 1.5), p)


def test_pm_constant_and_edge():
    p = DenoiseParams()
    assert np.array_equal(diffuse_pm(np.full((16, 16), 0.3), p), np.full((16, 16), 0.3))
    step = np.zeros((32, 32))
    step[:, 16:] = 1.0
    out = diffuse_pm(step, p)
    assert np.max(np.abs(out - step)) < 1e-3


def test_pm_small_ramp_is_linear_diffusion():
    p = DenoiseParams(steps_pm=5)
    x = np.arange(64)
    a = 0.5 + 1e-3 * np.sin(2 * np.pi * x / 64)[None, :] * np.ones((64, 1))
    pm = diffuse_pm(a, p)
    lin = a.copy()
    for _ in range(5):
        lin = lin + p.dt_pm * kernels.numpy_impl.lap_periodic(lin, 1.0)
    assert np.max(np.abs((pm - a) - (lin - a))) <= 0.01 * np.max(np.abs(lin - a))


def test_postprocess():
    p = DenoiseParams()
    const = np.full((4, 4, 3), 0.5)
    assert np.allclose(postprocess(const, p), 0.5 ** 1.05)
    img = np.linspace(0.2, 0.7, 48).reshape(4, 4, 3)
    blended = p.stretch_strength * (img - 0.2) / 0.5 + 0.1 * img
    assert blended.min() == pytest.approx(0.02) and blended.max() == pytest.approx(0.97)
    out = postprocess(img, p)
    assert np.allclose(out, np.clip(blended ** 1.05, 0, 1))
    assert not np.allclose(postprocess(out, p), out)


def test_metric_closed_forms():
    a = np.random.default_rng(1).random((32, 32, 3))
    assert mse(a, a) == 0 and psnr(a, a) == math.inf and ssim(a, a) == 1.0
    b = np.full((32, 32, 3), 0.4)
    assert mse(b, b + 0.1) == pytest.approx(0.01, rel=1e-12)
    assert psnr(b, b + 0.1) == pytest.approx(20.0, abs=1e-9)
    c1 = (SSIM_K1 * 1.0) ** 2
    expected = (2 * 0.4 * 0.5 + c1) / (0.4 ** 2 + 0.5 ** 2 + c1)
    assert ssim(b, b + 0.1) == pytest.approx(expected, rel=1e-9)
    with pytest.raises(ValidationError):
        mse(a, a[:, :10])
    with pytest.raises(ValidationError):
        ssim_channel(np.zeros((5, 5)), np.zeros((5, 5)))


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_ssim_matches_scikit_image(seed):
    rng = np.random.default_rng(seed)
    a = rng.random((37, 53))
    b = np.clip(a + 0.2 * rng.standard_normal(a.shape), 0, 1)
    ref = structural_similarity(a, b, data_range=1.0, win_size=7)
    assert ssim_channel(a, b) == pytest.approx(ref, abs=1e-12)


def test_png_roundtrip(tmp_path):
    rng = np.random.default_rng(2)
    img = rng.integers(0, 256, (9, 11, 3)) / 255.0
    back = read_png(write_png(img, tmp_path / "x.png"))
    assert np.array_equal(back, img)
    # round half to even: 0.5/255 -> 0, 1.5/255 -> 2
    half = np.array([[[0.5, 1.5, 2.5]]]) / 255.0
    assert np.allclose(read_png(write_png(half, tmp_path / "h.png")) * 255, [[[0, 2, 2]]])


def test_sample_image():
    img = sample_image()
    assert img.shape == (512, 512, 3) and img.min() >= 0 and img.max() <= 1


def test_as_image():
    assert as_image(np.zeros((4, 5))).shape == (4, 5, 3)
    with pytest.raises(ValidationError):
        as_image(np.zeros((4, 5, 2)))
    with pytest.raises(ValidationError):
        as_image(np.full((4, 5), 2.0))


def test_pipeline_without_noise():
    img = sample_image()[:96, :96]
    rep = run_pipeline(img, DenoiseParams(sigma_noise=0.0), methods=("gm",))
    assert rep.metrics["noisy"]["psnr_db"] == math.inf
    assert rep.metrics["gm"]["mse"] < 1e-2
    assert rep.as_dict()["metrics"]["noisy"]["psnr_db"] is None
    with pytest.raises(ValidationError):
        run_pipeline(img, DenoiseParams(), methods=("tv",))


def test_threads_do_not_change_results():
    img = sample_image()[:64, :64]
    p = DenoiseParams(steps_gm=50, steps_pm=10)
    one = run_pipeline(img, p, threads=1)
    three = run_pipeline(img, p, threads=3)
    for k in one.images:
        assert np.array_equal(one.images[k], three.images[k])
