"""Per-block spectral Wiener filtering: DC removal, FFT, coring, restore.

FFT convention: unnormalized forward, 1/N^2 inverse (numpy's default), so
Parseval reads sum|Y|^2 / N^2 = sum y^2.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericError
from .windows import WindowTable

# Below this power a frequency bin is considered dead and fully suppressed.
PSD_EPS = 1e-20

# Residual noise multiplier classically applied on top of a manual AWGN sigma.
AWGN_CORRECTION = 1.4


class DcKind(enum.Enum):
    MEAN = "mean"
    MEDIAN = "median"
    QUANTILE = "quantile"
    ORACLE = "oracle"  # mean of the co-located clean block


@dataclass(frozen=True)
class DcStrategy:
    kind: DcKind
    q: float | None = None  # quantile position, only for QUANTILE

    def __post_init__(self):
        if self.kind is DcKind.QUANTILE:
            if self.q is None or not (0.0 < self.q < 1.0):
                raise ConfigError(f"quantile q must be in (0, 1), got {self.q}")


class DcRestore(enum.Enum):
    BARE = "bare"  # add back the scalar DC (dense-overlap convention)
    WINDOWED = "windowed"  # add back DC * window (2:1 unit-gain convention)


def lower_median(values: np.ndarray, axis: int = -1) -> np.ndarray:
    """Deterministic sort-based median: lower of the two middles for even counts."""
    k = (values.shape[axis] - 1) // 2
    return np.partition(values, k, axis=axis).take(k, axis=axis)


def block_dc(block: np.ndarray, strategy: DcStrategy, clean_block: np.ndarray | None = None) -> float:
    """Central-tendency estimate of one 2D block."""
    flat = np.asarray(block, dtype=np.float64).ravel()
    if flat.size == 0:
        raise ConfigError("block_dc requires a non-empty block")
    if strategy.kind is DcKind.MEAN:
        return float(np.mean(flat))
    if strategy.kind is DcKind.MEDIAN:
        return float(lower_median(flat))
    if strategy.kind is DcKind.QUANTILE:
        return float(np.quantile(flat, strategy.q, method="linear"))
    if clean_block is None:
        raise ConfigError("Oracle DC strategy needs the co-located clean block")
    return float(np.mean(np.asarray(clean_block, dtype=np.float64)))


@dataclass(frozen=True)
class CoringResult:
    h: np.ndarray  # transfer function in [0, 1]
    p_xx: np.ndarray  # cored clean-signal PSD estimate


def core_psd(
    p_yy: np.ndarray,
    sigma_block: float,
    window_norm_sq: float,
    correction: float = 1.0,
) -> CoringResult:
    """Clamped spectral subtraction with a flat (white) noise PSD.

    P_nn = (correction * sigma)^2 * ||w||^2; h = max(P_yy - P_nn, 0) / P_yy,
    with h = 0 on dead bins.
    """
    if sigma_block < 0:
        raise ConfigError(f"sigma_block must be >= 0, got {sigma_block}")
    if correction <= 0:
        raise ConfigError(f"correction must be > 0, got {correction}")
    p_yy = np.asarray(p_yy, dtype=np.float64)
    p_nn = (correction * sigma_block) ** 2 * window_norm_sq
    p_xx = np.maximum(p_yy - p_nn, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = np.where(p_yy > PSD_EPS, p_xx / np.maximum(p_yy, PSD_EPS), 0.0)
    return CoringResult(h=h, p_xx=p_xx)


def filter_block(
    windowed_block: np.ndarray,
    sigma_block: float,
    window: WindowTable,
    dc_value: float,
    dc_restore: DcRestore = DcRestore.BARE,
    correction: float = 1.0,
    coring_override: np.ndarray | None = None,
) -> np.ndarray:
    """Wiener-filter one DC-removed, windowed 2D block.

    The caller has already computed y_w = (y - dc) * w; this returns
    iFFT(Y * h) plus the restored DC term.
    """
    y_w = np.asarray(windowed_block, dtype=np.float64)
    if not np.all(np.isfinite(y_w)):
        raise NumericError("non-finite values in windowed block")
    spectrum = np.fft.fft2(y_w)
    if coring_override is not None:
        h = np.asarray(coring_override, dtype=np.float64)
    else:
        p_yy = spectrum.real**2 + spectrum.imag**2
        h = core_psd(p_yy, sigma_block, window.norm_sq, correction).h
    out = np.fft.ifft2(spectrum * h)
    residue = float(np.max(np.abs(out.imag)))
    if residue >= 1e-5:
        raise NumericError(f"imaginary residue {residue:.3g} exceeds 1e-5")
    x = out.real
    if dc_restore is DcRestore.WINDOWED:
        return x + dc_value * window.values
    return x + dc_value


class WienerBlockFilter:
    """Vectorized per-block Wiener filter plugged into the block engine.

    sigma_source is one of:
      ("global", sigma)            -- one STD for every block/channel
      ("per_channel", (r, g, b))   -- one STD per channel
      ("map",)                     -- window-weighted reduction of the sigma
                                      map supplied as engine aux plane "sigma"
    """

    def __init__(
        self,
        window: WindowTable,
        sigma_source,
        dc_strategy: DcStrategy = DcStrategy(DcKind.MEDIAN),
        dc_restore: DcRestore = DcRestore.BARE,
        correction: float = 1.0,
        coring_refiner=None,
    ):
        self.window = window
        self.sigma_source = sigma_source
        self.dc_strategy = dc_strategy
        self.dc_restore = dc_restore
        self.correction = correction
        self.coring_refiner = coring_refiner

    def _batch_dc(self, blocks: np.ndarray, ctx) -> np.ndarray:
        n_blocks, channels = blocks.shape[:2]
        flat = blocks.reshape(n_blocks, channels, -1)
        kind = self.dc_strategy.kind
        if kind is DcKind.MEAN:
            return flat.mean(axis=-1)
        if kind is DcKind.MEDIAN:
            return lower_median(flat)
        if kind is DcKind.QUANTILE:
            return np.quantile(flat, self.dc_strategy.q, axis=-1, method="linear").astype(
                flat.dtype
            )
        if "clean" not in ctx.aux:
            raise ConfigError("Oracle DC strategy needs a clean reference aux plane")
        return ctx.aux["clean"].reshape(n_blocks, channels, -1).mean(axis=-1)

    def _batch_sigma(self, blocks: np.ndarray, ctx) -> np.ndarray:
        n_blocks, channels = blocks.shape[:2]
        kind = self.sigma_source[0]
        if kind == "global":
            return np.full((n_blocks, channels), float(self.sigma_source[1]))
        if kind == "per_channel":
            per = np.asarray(self.sigma_source[1], dtype=np.float64)
            if per.shape != (channels,):
                raise ConfigError(
                    f"per-channel sigma needs {channels} values, got shape {per.shape}"
                )
            return np.broadcast_to(per, (n_blocks, channels)).copy()
        if kind == "map":
            if "sigma" not in ctx.aux:
                raise ConfigError("map sigma source needs a sigma-map aux plane")
            sig = ctx.aux["sigma"].astype(np.float64)
            w_sq = self.window.values.astype(np.float64) ** 2
            var = np.sum(sig * sig * w_sq, axis=(2, 3)) / self.window.norm_sq
            return np.sqrt(var)
        raise ConfigError(f"unknown sigma source kind: {kind}")

    def filter_blocks(self, blocks: np.ndarray, ctx) -> np.ndarray:
        w = self.window.values
        dc = self._batch_dc(blocks, ctx)  # (B, C)
        sigma = self._batch_sigma(blocks, ctx)  # (B, C)
        y_w = (blocks.astype(np.float64) - dc[..., None, None].astype(np.float64)) * w
        spectrum = np.fft.fft2(y_w)
        p_yy = spectrum.real**2 + spectrum.imag**2
        p_nn = (self.correction * sigma) ** 2 * self.window.norm_sq
        p_xx = np.maximum(p_yy - p_nn[..., None, None], 0.0)
        h = np.where(p_yy > PSD_EPS, p_xx / np.maximum(p_yy, PSD_EPS), 0.0)

        if self.coring_refiner is not None:
            grid_rows, grid_cols = ctx.grid_shape
            channels = blocks.shape[1]
            n = blocks.shape[2]
            for c in range(channels):
                tensor = h[:, c].reshape(grid_rows, grid_cols, n, n)
                h[:, c] = self.coring_refiner(tensor).reshape(-1, n, n)

        out = np.fft.ifft2(spectrum * h)
        residue = float(np.max(np.abs(out.imag)))
        if residue >= 1e-5:
            raise NumericError(f"imaginary residue {residue:.3g} exceeds 1e-5")
        x = out.real
        if self.dc_restore is DcRestore.WINDOWED:
            restored = x + dc[..., None, None] * w
        else:
            restored = x + dc[..., None, None]
        return restored.astype(np.float32)
