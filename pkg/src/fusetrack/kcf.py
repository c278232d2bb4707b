"""Kernelized correlation filter for fixed-scale local tracking.

The model learns a ridge regression in the Fourier domain over a
Gaussian kernel of grayscale features: the padded window around the
target is resampled to a fixed template grid, converted to grayscale,
mean-subtracted and multiplied by a Hann window. Localization evaluates
the learned filter over all cyclic shifts of the search window and takes
the integer argmax of the response (ties resolve to the smallest row,
then the smallest column), so identical inputs always produce
bit-identical results. The target size is fixed at initialization; scale
changes are the caller's concern.

All operations are pure: they return new models and never mutate their
inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import map_coordinates

from .frames import Frame
from .geometry import BBox, intersect

#: RGB weights for grayscale conversion (Rec. 601 luma).
_LUMA = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class KcfParams:
    """Filter hyperparameters.

    padding: search window side as a multiple of the target side.
    lambda_: ridge regularization.
    sigma: Gaussian kernel bandwidth (feature space).
    interp_factor: per-update blending weight of the new sample
        (0 freezes the model, 1 forgets everything older).
    output_sigma_factor: regression target bandwidth, scaled by target
        size in template cells over padding.
    template_side: working grid size of the larger window side, px.
    """

    padding: float = 2.5
    lambda_: float = 1e-4
    sigma: float = 0.5
    interp_factor: float = 0.012
    output_sigma_factor: float = 0.125
    template_side: int = 96

    def __post_init__(self):
        if self.padding <= 1.0:
            raise ValueError(f"padding must be > 1, got {self.padding}")
        if self.lambda_ <= 0.0:
            raise ValueError(f"lambda_ must be positive, got {self.lambda_}")
        if self.sigma <= 0.0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not 0.0 <= self.interp_factor <= 1.0:
            raise ValueError(f"interp_factor must lie in [0, 1], got {self.interp_factor}")
        if self.output_sigma_factor <= 0.0:
            raise ValueError(f"output_sigma_factor must be positive, got {self.output_sigma_factor}")
        if self.template_side < 8:
            raise ValueError(f"template_side must be >= 8, got {self.template_side}")


@dataclass(frozen=True)
class KcfModel:
    """Learned filter state.

    learned_coefficients holds the dual ridge solution in the frequency
    domain; learned_template is the feature-space appearance sample the
    kernel correlates against. Both share the template grid shape.
    last_peak is the response maximum on the most recent training
    sample, clamped at 0.
    """

    params: KcfParams
    target_size: tuple[float, float]
    center: tuple[float, float]
    learned_coefficients: np.ndarray
    learned_template: np.ndarray
    last_peak: float

    def __post_init__(self):
        if self.learned_coefficients.shape != self.learned_template.shape:
            raise ValueError("coefficient and template grids must share a shape")
        if self.last_peak < 0.0:
            raise ValueError("last_peak must be >= 0")

    @property
    def window_size(self) -> tuple[float, float]:
        """Search window (w, h) in frame pixels."""
        return (self.target_size[0] * self.params.padding, self.target_size[1] * self.params.padding)


def _template_dims(target_w: float, target_h: float, params: KcfParams) -> tuple[int, int]:
    """Template grid (tw, th): larger window side resampled to
    template_side, aspect preserved, both dims even and >= 4."""
    ww = target_w * params.padding
    wh = target_h * params.padding
    scale = max(ww, wh) / params.template_side
    tw = max(4, (int(ww / scale) // 2) * 2)
    th = max(4, (int(wh / scale) // 2) * 2)
    return tw, th


def _hann2d(th: int, tw: int) -> np.ndarray:
    return np.outer(np.hanning(th), np.hanning(tw))


def _label_fft(th: int, tw: int, params: KcfParams) -> np.ndarray:
    """FFT of the Gaussian regression target, peak 1 at (th//2, tw//2)."""
    out_sigma = np.sqrt(tw * th) / params.padding * params.output_sigma_factor
    rows = np.arange(th)[:, None] - th // 2
    cols = np.arange(tw)[None, :] - tw // 2
    y = np.exp(-0.5 * (rows * rows + cols * cols) / (out_sigma * out_sigma))
    return np.fft.fft2(y)


def _sample_window(frame: Frame, cx: float, cy: float, ww: float, wh: float, tw: int, th: int) -> np.ndarray:
    """Grayscale window of size (wh, ww) centered at (cx, cy),
    bilinearly resampled to a (th, tw) grid; content beyond the frame
    border is replicated from the nearest edge pixel.

    Coordinates follow the box convention (pixel j spans [j, j+1)), so
    array index j sits at coordinate j + 0.5.
    """
    xs = cx - ww / 2.0 + (np.arange(tw) + 0.5) * (ww / tw) - 0.5
    ys = cy - wh / 2.0 + (np.arange(th) + 0.5) * (wh / th) - 0.5
    # Grayscale only the region the samples can touch.
    x0 = min(max(int(np.floor(xs[0])) - 1, 0), frame.width - 1)
    x1 = max(min(int(np.ceil(xs[-1])) + 2, frame.width), x0 + 1)
    y0 = min(max(int(np.floor(ys[0])) - 1, 0), frame.height - 1)
    y1 = max(min(int(np.ceil(ys[-1])) + 2, frame.height), y0 + 1)
    region = frame.pixels[y0:y1, x0:x1].astype(np.float64) @ _LUMA
    rr, cc = np.meshgrid(ys - y0, xs - x0, indexing="ij")
    return map_coordinates(region, [rr, cc], order=1, mode="nearest")


def _features(frame: Frame, cx: float, cy: float, ww: float, wh: float, tw: int, th: int) -> np.ndarray:
    patch = _sample_window(frame, cx, cy, ww, wh, tw, th) / 255.0
    patch -= patch.mean()
    return patch * _hann2d(th, tw)


def _gaussian_correlation(a: np.ndarray, b: np.ndarray, sigma: float) -> np.ndarray:
    """Gaussian kernel over all cyclic shifts of a against b, evaluated
    through the FFT; the zero-shift value lands at (th//2, tw//2)."""
    c = np.fft.fftshift(np.real(np.fft.ifft2(np.fft.fft2(a) * np.conj(np.fft.fft2(b)))))
    d = (np.sum(a * a) + np.sum(b * b) - 2.0 * c) / a.size
    return np.exp(-np.maximum(d, 0.0) / (sigma * sigma))


def _solve(template: np.ndarray, yf: np.ndarray, params: KcfParams) -> np.ndarray:
    k = _gaussian_correlation(template, template, params.sigma)
    return yf / (np.fft.fft2(k) + params.lambda_)


def _response(coefficients: np.ndarray, template: np.ndarray, sample: np.ndarray, sigma: float) -> np.ndarray:
    k = _gaussian_correlation(sample, template, sigma)
    return np.real(np.fft.ifft2(coefficients * np.fft.fft2(k)))


def _require_inside(frame: Frame, box: BBox, what: str) -> None:
    if intersect(box, BBox(0, 0, frame.width, frame.height)) is None:
        raise ValueError(f"{what} lies fully outside the {frame.width}x{frame.height} frame")


def kcf_init(frame: Frame, target: BBox, params: KcfParams | None = None) -> KcfModel:
    """Train a fresh model on the target box.

    The target may extend past the frame border (the window is filled by
    edge replication) but must intersect the frame.
    """
    params = params or KcfParams()
    _require_inside(frame, target, "target")
    tw, th = _template_dims(target.w, target.h, params)
    ww, wh = target.w * params.padding, target.h * params.padding
    template = _features(frame, target.cx, target.cy, ww, wh, tw, th)
    yf = _label_fft(th, tw, params)
    coefficients = _solve(template, yf, params)
    peak = float(np.max(_response(coefficients, template, template, params.sigma)))
    return KcfModel(
        params=params,
        target_size=(float(target.w), float(target.h)),
        center=(target.cx, target.cy),
        learned_coefficients=coefficients,
        learned_template=template,
        last_peak=max(peak, 0.0),
    )


def kcf_locate(model: KcfModel, frame: Frame) -> tuple[BBox, float]:
    """Find the target near the model's center.

    Returns the located box (the model's fixed target size) and the raw
    response peak. The model is not modified, so calling twice yields
    the same result; the box center never leaves the search window.
    """
    th, tw = model.learned_template.shape
    ww, wh = model.window_size
    cx, cy = model.center
    sample = _features(frame, cx, cy, ww, wh, tw, th)
    response = _response(model.learned_coefficients, model.learned_template, sample, model.params.sigma)
    row, col = np.unravel_index(int(np.argmax(response)), response.shape)
    dx = (col - tw // 2) * (ww / tw)
    dy = (row - th // 2) * (wh / th)
    w, h = model.target_size
    box = BBox.from_center(cx + dx, cy + dy, w, h)
    return box, float(response[row, col])


def kcf_update(model: KcfModel, frame: Frame, box: BBox) -> KcfModel:
    """Blend a new sample at the box into the model with interp_factor.

    With interp_factor 0 the learned arrays are unchanged; with 1 the
    result equals a fresh kcf_init at the box. The model's target size
    is kept; only the box center is used.
    """
    _require_inside(frame, box, "update box")
    params = model.params
    f = params.interp_factor
    th, tw = model.learned_template.shape
    ww, wh = model.window_size
    sample = _features(frame, box.cx, box.cy, ww, wh, tw, th)
    yf = _label_fft(th, tw, params)
    new_coefficients = _solve(sample, yf, params)
    coefficients = (1.0 - f) * model.learned_coefficients + f * new_coefficients
    template = (1.0 - f) * model.learned_template + f * sample
    peak = float(np.max(_response(coefficients, template, sample, params.sigma)))
    return KcfModel(
        params=params,
        target_size=model.target_size,
        center=(box.cx, box.cy),
        learned_coefficients=coefficients,
        learned_template=template,
        last_peak=max(peak, 0.0),
    )


def kcf_reinit(model: KcfModel, frame: Frame, box: BBox) -> KcfModel:
    """Discard the learned state and train from scratch at the box,
    keeping the model's parameters."""
    return kcf_init(frame, box, model.params)
