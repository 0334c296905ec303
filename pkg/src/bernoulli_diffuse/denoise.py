"""Image denoising with porous-medium (Gurtin-MacCamy) diffusion and a
Perona-Malik baseline, plus MSE / PSNR / SSIM.

Images are float64 arrays shaped (height, width, 3) with values in [0, 1].
Each channel is diffused independently on a periodic pixel grid (h = 1).
"""
from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import kernels
from .bernoulli import GrowthRate, RationalDecay
from .errors import ValidationError
from .grid import BC, Grid2D
from .parabolic import cfl_max_dt

SSIM_WIN = 7
SSIM_K1 = 0.01
SSIM_K2 = 0.03
METHODS = ("gm", "pm")


@dataclass(frozen=True)
class DenoiseParams:
    alpha_gm: float = 4.0
    dt_gm: float = 0.0118
    steps_gm: int = 400
    dt_pm: float = 0.2
    steps_pm: int = 40
    K_pm: float = 0.1
    gamma_correction: float = 1.05
    stretch_strength: float = 0.9
    brightness_boost: float = 1.0
    sigma_noise: float = 0.18
    mu: GrowthRate = field(default_factory=lambda: RationalDecay(0.3))
    seed: int = 0

    def __post_init__(self):
        if not self.alpha_gm > 1:
            raise ValidationError(f"alpha_gm must be > 1, got {self.alpha_gm}")
        if self.steps_gm < 0 or self.steps_pm < 0:
            raise ValidationError("step counts must be nonnegative")
        if not (self.dt_gm > 0 and self.dt_pm > 0 and self.K_pm > 0):
            raise ValidationError("dt_gm, dt_pm and K_pm must be positive")
        if self.sigma_noise < 0:
            raise ValidationError(f"sigma_noise must be >= 0, got {self.sigma_noise}")
        if not 0 <= self.stretch_strength <= 1:
            raise ValidationError("stretch_strength must lie in [0, 1]")
        # worst case for pixel data in [0, 1]
        unit = Grid2D(1, 1, 1.0, [1.0], BC.PERIODIC)
        if self.dt_gm > cfl_max_dt(unit, self.alpha_gm):
            raise ValidationError(
                f"dt_gm = {self.dt_gm} is unstable for alpha = {self.alpha_gm} on [0, 1] data")

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def as_dict(self):
        d = dataclasses.asdict(self)
        d["mu"] = self.mu.spec()
        return d


# ---------------------------------------------------------------- images ---

def as_image(arr) -> np.ndarray:
    """Validate and normalise to float64 (H, W, 3); grayscale is replicated."""
    a = np.asarray(arr, dtype=np.float64)
    if a.ndim == 2:
        a = np.repeat(a[:, :, None], 3, axis=2)
    elif a.ndim == 3 and a.shape[2] == 1:
        a = np.repeat(a, 3, axis=2)
    if a.ndim != 3 or a.shape[2] != 3:
        raise ValidationError(f"expected an (H, W, 3) image, got shape {a.shape}")
    if not np.all(np.isfinite(a)) or a.min() < 0 or a.max() > 1:
        raise ValidationError("image values must lie in [0, 1]")
    return a


def read_png(path) -> np.ndarray:
    from PIL import Image

    with Image.open(path) as im:
        if im.mode in ("L", "I", "I;16", "F"):
            arr = np.asarray(im.convert("L"), dtype=np.float64)
        else:
            arr = np.asarray(im.convert("RGB"), dtype=np.float64)
    return as_image(arr / 255.0)


def write_png(img, path):
    from PIL import Image

    img = as_image(img)
    # np.rint rounds half to even
    data = np.rint(img * 255.0).astype(np.uint8)
    Image.fromarray(data, mode="RGB").save(path)
    return Path(path)


def sample_image() -> np.ndarray:
    """The bundled 512x512 RGB test image (IHC-stained tissue, no known
    copyright restrictions; originally distributed with scikit-image)."""
    ref = resources.files("bernoulli_diffuse") / "data" / "ihc.png"
    with resources.as_file(ref) as path:
        return read_png(path)


def add_gaussian_noise(img, sigma: float, seed: int) -> np.ndarray:
    """img + sigma * N(0, 1), clipped to [0, 1].

    Draws come from numpy's PCG64 generator seeded with ``seed`` (ziggurat
    normals), one draw per entry in row-major (H, W, C) order.
    """
    img = as_image(img)
    if sigma < 0:
        raise ValidationError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return img.copy()
    rng = np.random.default_rng(seed)
    return np.clip(img + sigma * rng.standard_normal(img.shape), 0.0, 1.0)


# ------------------------------------------------------------- diffusion ---

def _channel_array(channel):
    if isinstance(channel, Grid2D):
        if channel.bc is not BC.PERIODIC or channel.h != 1.0:
            raise ValidationError("denoising works on periodic pixel grids with h = 1")
        return channel.array
    return np.asarray(channel, dtype=np.float64)


def _wrap(like, out):
    if isinstance(like, Grid2D):
        return like.with_data(out)
    return out


def gm_rates(p: DenoiseParams):
    """mu(n dt) for n = 0 .. steps-1, the step-start absorption rates."""
    return np.asarray(p.mu(np.arange(p.steps_gm) * p.dt_gm), dtype=np.float64).reshape(-1)


def diffuse_gm(channel, p: DenoiseParams, backend=None):
    """steps_gm iterations of v <- clip01(v + dt (Lap_per(v^alpha) - mu(n dt) v))."""
    a = _channel_array(channel)
    if a.size and (a.min() < 0 or a.max() > 1):
        raise ValidationError("channel values must lie in [0, 1]")
    impl = kernels.get_impl(backend)
    out = impl.gm_diffuse(np.ascontiguousarray(a), float(p.alpha_gm), float(p.dt_gm), gm_rates(p))
    return _wrap(channel, out)


def diffuse_pm(channel, p: DenoiseParams, backend=None):
    """Perona-Malik with g(s) = exp(-s^2/K^2) on the four one-sided differences."""
    a = _channel_array(channel)
    if a.size and (a.min() < 0 or a.max() > 1):
        raise ValidationError("channel values must lie in [0, 1]")
    impl = kernels.get_impl(backend)
    out = impl.pm_diffuse(np.ascontiguousarray(a), float(p.dt_pm), int(p.steps_pm), float(p.K_pm))
    return _wrap(channel, out)


def postprocess(img, p: DenoiseParams) -> np.ndarray:
    """Global contrast stretch, blend with the input, gamma, brightness, clip."""
    u = np.asarray(img, dtype=np.float64)
    v = u.copy()
    lo, hi = v.min(), v.max()
    if hi > lo:
        v = (v - lo) / (hi - lo)
    v = p.stretch_strength * v + (1.0 - p.stretch_strength) * u
    v = np.power(v, p.gamma_correction)
    v = v * p.brightness_boost
    return np.clip(v, 0.0, 1.0)


def _per_channel(fn, img, p, threads, backend):
    chans = [np.ascontiguousarray(img[:, :, c]) for c in range(img.shape[2])]
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outs = list(pool.map(lambda ch: fn(ch, p, backend), chans))
    else:
        outs = [fn(ch, p, backend) for ch in chans]
    return np.stack(outs, axis=2)


def denoise_gm(img, p: DenoiseParams, threads=1, backend=None):
    return postprocess(_per_channel(diffuse_gm, as_image(img), p, threads, backend), p)


def denoise_pm(img, p: DenoiseParams, threads=1, backend=None):
    return postprocess(_per_channel(diffuse_pm, as_image(img), p, threads, backend), p)


# --------------------------------------------------------------- metrics ---

def _same_shape(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValidationError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def mse(a, b) -> float:
    a, b = _same_shape(a, b)
    d = (a - b).reshape(-1)
    return float(np.dot(d, d) / d.size)


def psnr(a, b) -> float:
    """20 log10(1 / sqrt(mse)); +inf when the images are identical."""
    m = mse(a, b)
    if m == 0:
        return math.inf
    return 20.0 * math.log10(1.0 / math.sqrt(m))


def _box_sums(x, win):
    """Sums over every fully-contained win x win window (valid windows only)."""
    c = np.zeros((x.shape[0] + 1, x.shape[1] + 1))
    c[1:, 1:] = np.cumsum(np.cumsum(x, axis=0), axis=1)
    return c[win:, win:] - c[:-win, win:] - c[win:, :-win] + c[:-win, :-win]


def ssim_channel(a, b, data_range=1.0, win=SSIM_WIN):
    """Mean SSIM over valid win x win windows, sample (N-1) covariance."""
    a, b = _same_shape(a, b)
    if min(a.shape) < win:
        raise ValidationError(f"image smaller than the {win}x{win} SSIM window")
    n = win * win
    # centre the data: the box-sum variances then avoid catastrophic cancellation
    shift = 0.5 * (a.mean() + b.mean())
    a = a - shift
    b = b - shift
    sa, sb = _box_sums(a, win), _box_sums(b, win)
    saa, sbb, sab = _box_sums(a * a, win), _box_sums(b * b, win), _box_sums(a * b, win)
    ma, mb = sa / n, sb / n
    cov_norm = n / (n - 1.0)
    va = cov_norm * (saa / n - ma * ma)
    vb = cov_norm * (sbb / n - mb * mb)
    vab = cov_norm * (sab / n - ma * mb)
    ma, mb = ma + shift, mb + shift
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    num = (2.0 * ma * mb + c1) * (2.0 * vab + c2)
    den = (ma * ma + mb * mb + c1) * (va + vb + c2)
    return float(np.mean(num / den))


def ssim(a, b, data_range=1.0) -> float:
    """Channel-averaged SSIM of two (H, W, 3) images."""
    a, b = _same_shape(a, b)
    if a.ndim == 2:
        return ssim_channel(a, b, data_range)
    return float(np.mean([ssim_channel(a[:, :, c], b[:, :, c], data_range)
                          for c in range(a.shape[2])]))


def metrics(clean, img):
    return {"mse": mse(clean, img), "psnr_db": psnr(clean, img), "ssim": ssim(clean, img)}


# -------------------------------------------------------------- pipeline ---

@dataclass
class DenoiseReport:
    params: DenoiseParams
    seed: int
    metrics: dict
    images: dict = field(default_factory=dict, repr=False)

    def as_dict(self):
        def clean(v):
            return None if math.isinf(v) else v

        return {
            "params": self.params.as_dict(),
            "seed": self.seed,
            "metrics": {k: {m: clean(x) for m, x in v.items()} for k, v in self.metrics.items()},
        }


def run_pipeline(clean, p: DenoiseParams, methods=METHODS, threads=1, backend=None) -> DenoiseReport:
    """Noise, diffuse each channel, postprocess, and score against ``clean``."""
    clean = as_image(clean)
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise ValidationError(f"unknown method(s): {sorted(unknown)}")
    noisy = add_gaussian_noise(clean, p.sigma_noise, p.seed)
    images = {"noisy": noisy}
    if "gm" in methods:
        images["gm"] = denoise_gm(noisy, p, threads, backend)
    if "pm" in methods:
        images["pm"] = denoise_pm(noisy, p, threads, backend)
    scores = {name: metrics(clean, im) for name, im in images.items()}
    return DenoiseReport(p, p.seed, scores, images)
