"""Physics forward operators and the deterministic stand-in generator.

All image-space operators use periodic boundaries so adjoints are exact
filter re-applications. Complex data (k-space) uses numpy complex arrays;
the container layer stores them with a trailing extent of 2.
"""

from __future__ import annotations

import warnings

import numpy as np

from .errors import ConfigError, DomainError, ShapeError

DEBLUR_NOISE_STD_8BIT = 50.0  # additive noise sigma on the 0..255 scale
EIGHT_BIT_SCALE = 2.0 / 255.0  # [-1, 1] images span 255 eight-bit steps


def _periodic_kernel_1d(n: int, sigma: float) -> np.ndarray:
    """Truncated (4 sigma) normalized Gaussian taps wrapped onto a length-n ring."""
    if sigma <= 0:
        raise DomainError(f"kernel sigma must be positive, got {sigma}")
    half = int(np.ceil(4.0 * sigma))
    offs = np.arange(-half, half + 1)
    taps = np.exp(-0.5 * (offs / sigma) ** 2)
    taps /= taps.sum()
    out = np.zeros(n)
    np.add.at(out, offs % n, taps)
    return out


def periodic_gaussian_kernel(shape: tuple, sigma: float) -> np.ndarray:
    """Separable 2-D Gaussian on the torus, unit sum."""
    ky = _periodic_kernel_1d(shape[0], sigma)
    kx = _periodic_kernel_1d(shape[1], sigma)
    return np.outer(ky, kx)


class DeblurModel:
    """Periodic isotropic Gaussian blur; the adjoint is the same filter."""

    name = "deblur"

    def __init__(self, shape: tuple, sigma: float = 3.0):
        self.shape = tuple(shape)
        self.sigma = float(sigma)
        self._kf = np.fft.rfft2(periodic_gaussian_kernel(self.shape, self.sigma))

    def forward(self, m: np.ndarray) -> np.ndarray:
        m = np.asarray(m, float)
        if m.shape != self.shape:
            raise ShapeError(f"image shape {m.shape} != {self.shape}")
        return np.fft.irfft2(np.fft.rfft2(m) * self._kf, s=self.shape)

    def vjp(self, residual: np.ndarray) -> np.ndarray:
        # even-symmetric kernel: correlation equals convolution
        return self.forward(residual)


class CsmriModel:
    """Single-coil masked-FFT compressive sensing: d = mask * unitary FFT2(m)."""

    name = "csmri"

    def __init__(self, mask: np.ndarray):
        mask = np.asarray(mask, float)
        if mask.ndim != 2:
            raise ShapeError("mask must be 2-D")
        for n in mask.shape:
            if n < 2 or (n & (n - 1)) != 0:
                raise ShapeError(f"mask dims must be powers of two, got {mask.shape}")
        if not np.all((mask == 0) | (mask == 1)):
            raise ShapeError("mask must be binary")
        self.mask = mask
        self.shape = mask.shape

    def forward(self, m: np.ndarray) -> np.ndarray:
        m = np.asarray(m, float)
        if m.shape != self.shape:
            raise ShapeError(f"image shape {m.shape} != {self.shape}")
        return self.mask * np.fft.fft2(m, norm="ortho")

    def vjp(self, residual: np.ndarray) -> np.ndarray:
        return np.real(np.fft.ifft2(self.mask * residual, norm="ortho"))


def make_mask(dims: tuple, accl: float, center_lines: int, seed: int) -> np.ndarray:
    """Row-sampling k-space mask: a fixed band of the lowest-frequency rows plus
    uniformly random rows until kept/total = 1/accl; deterministic per seed."""
    rows, cols = int(dims[0]), int(dims[1])
    if accl < 1:
        raise ConfigError(f"acceleration must be >= 1, got {accl}")
    kept = int(round(rows / accl))
    if kept < center_lines:
        raise ConfigError(
            f"cannot keep {kept} rows with {center_lines} center lines (accl={accl})"
        )
    order = np.argsort(np.abs(np.fft.fftfreq(rows)), kind="stable")
    center = order[:center_lines]
    rest = order[center_lines:]
    rng = np.random.default_rng(seed)
    extra = rng.choice(rest, size=kept - center_lines, replace=False)
    mask = np.zeros((rows, cols))
    mask[np.concatenate([center, extra]).astype(int), :] = 1.0
    return mask


def add_noise_snr(d: np.ndarray, snr_db: float, seed: int) -> np.ndarray:
    """Add i.i.d. (complex) Gaussian noise at a target signal-to-noise ratio.

    Per-real-component sigma is ||d||_2 / sqrt(#real components) * 10^(-snr/20);
    an infinite SNR returns the data unchanged.
    """
    d = np.asarray(d)
    if np.isinf(snr_db):
        return d.copy()
    rng = np.random.default_rng(seed)
    if np.iscomplexobj(d):
        n_real = 2 * d.size
        sigma = float(np.linalg.norm(d.ravel())) / np.sqrt(n_real) * 10.0 ** (-snr_db / 20.0)
        noise = rng.standard_normal(d.shape + (2,)) * sigma
        return d + noise[..., 0] + 1j * noise[..., 1]
    sigma = float(np.linalg.norm(d.ravel())) / np.sqrt(d.size) * 10.0 ** (-snr_db / 20.0)
    return d + rng.standard_normal(d.shape) * sigma


def add_noise_gaussian(d: np.ndarray, std: float, seed: int) -> np.ndarray:
    """Additive N(0, std^2) noise in model units."""
    if std == 0.0:
        return np.asarray(d).copy()
    rng = np.random.default_rng(seed)
    return np.asarray(d) + rng.standard_normal(np.shape(d)) * std


def traveltime_noise(t_rec: np.ndarray, std: float, seed: int) -> np.ndarray:
    """Multiplicative noise T*(1+eps), eps ~ N(0, std^2): longer times, larger spread."""
    if std < 0:
        raise DomainError("noise std must be non-negative")
    t_rec = np.asarray(t_rec, float)
    if std == 0.0:
        return t_rec.copy()
    rng = np.random.default_rng(seed)
    return t_rec * (1.0 + rng.standard_normal(t_rec.shape) * std)


def velocity_map(m: np.ndarray) -> np.ndarray:
    """Map [-1, 1] model values to acoustic speeds in [1500, 1600] m/s."""
    m = np.asarray(m, float)
    if np.any(m < -1.0) or np.any(m > 1.0):
        warnings.warn("model values outside [-1, 1]; clamping", stacklevel=2)
        m = np.clip(m, -1.0, 1.0)
    return 100.0 * (m + 1.0) / 2.0 + 1500.0


def velocity_map_vjp(m: np.ndarray, cotangent: np.ndarray) -> np.ndarray:
    """Pullback of the velocity map; zero where the input was clamped."""
    m = np.asarray(m, float)
    inside = (m >= -1.0) & (m <= 1.0)
    return np.asarray(cotangent, float) * 50.0 * inside


class ToyGenerator:
    """Deterministic stand-in generator: m = tanh(gain * smooth(upsample(z))).

    A fixed parameter-free linear operator B (bilinear 4x upsampling as
    zero-stuffing plus a tent filter, then periodic Gaussian smoothing) feeds a
    tanh squashing, so outputs live strictly inside (-1, 1); Gaussian latents
    give smooth images while heavy-tailed latents saturate into artifacts.
    """

    name = "toygen"

    def __init__(self, z_shape=(16, 16), factor: int = 4, sigma: float = 1.5, gain: float = 1.2):
        self.z_shape = tuple(z_shape)
        self.factor = int(factor)
        self.gain = float(gain)
        self.m_shape = (self.z_shape[0] * self.factor, self.z_shape[1] * self.factor)
        tent_1d = np.zeros(self.m_shape[0])
        offs = np.arange(-(self.factor - 1), self.factor)
        np.add.at(tent_1d, offs % self.m_shape[0], 1.0 - np.abs(offs) / self.factor)
        tent_1d_x = np.zeros(self.m_shape[1])
        np.add.at(tent_1d_x, offs % self.m_shape[1], 1.0 - np.abs(offs) / self.factor)
        tent = np.outer(tent_1d, tent_1d_x)
        gauss = periodic_gaussian_kernel(self.m_shape, sigma)
        self._kf = np.fft.rfft2(tent) * np.fft.rfft2(gauss)

    def _stuff(self, z: np.ndarray) -> np.ndarray:
        up = np.zeros(self.m_shape)
        up[:: self.factor, :: self.factor] = z
        return up

    def _linear(self, z: np.ndarray) -> np.ndarray:
        return self.gain * np.fft.irfft2(np.fft.rfft2(self._stuff(z)) * self._kf, s=self.m_shape)

    def forward(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, float)
        if z.shape != self.z_shape:
            raise ShapeError(f"latent shape {z.shape} != {self.z_shape}")
        return np.tanh(self._linear(z))

    def vjp(self, z: np.ndarray, cotangent: np.ndarray) -> np.ndarray:
        z = np.asarray(z, float)
        m = self.forward(z)
        pre_bar = np.asarray(cotangent, float) * (1.0 - m * m) * self.gain
        filt = np.fft.irfft2(np.fft.rfft2(pre_bar) * self._kf, s=self.m_shape)
        return filt[:: self.factor, :: self.factor].copy()
