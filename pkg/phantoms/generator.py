# phantoms/generator.py
"""Procedural pulsatile-vessel ultrasound phantoms.

A frame is a dark horizontal lumen band between two bright wall layers on a
mid-grey tissue background, rendered with exact partial-pixel coverage so the
band width equals y[t] / pixel_pitch. Optional speckle, gain jitter and a
slow vertical drift of the vessel centre make it look like B-mode video.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator
from scipy.ndimage import uniform_filter

import config
from exceptions import VesselOutOfFrameError

logger = logging.getLogger(__name__)

LUMEN_LEVEL = 0.08
TISSUE_LEVEL = 0.35
RISE_FRACTION = 0.3


class PhantomSpec(BaseModel):
    """Parameters of a single synthetic vessel."""

    d0_mm: float = Field(4.0, gt=0)
    amplitude_mm: float = Field(0.4, ge=0)
    period_frames: int = Field(20, ge=8)
    phase: float = 0.0
    # signed; the vessel centre moves by +/- this much around mid-frame
    drift_mm: float = 0.0
    drift_period_frames: float = Field(90.0, gt=0)
    speckle_strength: float = Field(0.0, ge=0)
    wall_brightness: float = Field(0.9, gt=TISSUE_LEVEL, le=1.0)
    wall_thickness_mm: float = Field(0.25, gt=0)
    gain_jitter: float = Field(0.0, ge=0, lt=1)

    @model_validator(mode="after")
    def _positive_diameter(self) -> "PhantomSpec":
        if self.d0_mm - self.amplitude_mm <= 0:
            raise ValueError(f"d0 - a must be positive, got {self.d0_mm} - {self.amplitude_mm}")
        return self

    @property
    def noise_free(self) -> bool:
        return self.speckle_strength == 0 and self.gain_jitter == 0


class PhantomRanges(BaseModel):
    """Population the synthesizer samples phantom specs from."""

    d0_range: Tuple[float, float] = config.PHANTOM_CONFIG["d0_range"]
    amplitude_range: Tuple[float, float] = config.PHANTOM_CONFIG["amplitude_range"]
    period_range: Tuple[int, int] = config.PHANTOM_CONFIG["period_range"]
    length_range: Tuple[int, int] = config.PHANTOM_CONFIG["length_range"]
    drift_range: Tuple[float, float] = config.PHANTOM_CONFIG["drift_range"]
    speckle_strength: float = config.PHANTOM_CONFIG["speckle_strength"]
    gain_jitter: float = config.PHANTOM_CONFIG["gain_jitter"]
    # fixed sequence length; None samples from length_range
    length: Optional[int] = None


@dataclass
class UltrasoundSequence:
    frames: np.ndarray  # K x 1 x N x M, values in [0, 1]
    y: np.ndarray  # K diameters in mm
    frame_rate: float = 47.0
    pixel_pitch: float = 0.0625
    seed: int = 0
    true_period: Optional[int] = None
    sequence_id: str = ""

    def __post_init__(self):
        if self.frames.ndim != 4 or self.frames.shape[1] != 1:
            raise ValueError(f"frames must be K x 1 x N x M, got {self.frames.shape}")
        if len(self.frames) != len(self.y):
            raise ValueError(f"{len(self.frames)} frames but {len(self.y)} diameters")
        if len(self.y) < 1:
            raise ValueError("a sequence needs at least one frame")

    @property
    def length(self) -> int:
        return len(self.y)

    @property
    def frame_size(self) -> Tuple[int, int]:
        return self.frames.shape[2], self.frames.shape[3]


def pulse(theta: np.ndarray) -> np.ndarray:
    """Periodic systole/diastole waveform in [-1, 1]: fast smooth rise, slow smooth decay."""
    u = np.mod(theta / (2 * np.pi), 1.0)
    rise = 0.5 - 0.5 * np.cos(np.pi * u / RISE_FRACTION)
    decay = 0.5 + 0.5 * np.cos(np.pi * (u - RISE_FRACTION) / (1 - RISE_FRACTION))
    return 2 * np.where(u < RISE_FRACTION, rise, decay) - 1


def diameter_trace(spec: PhantomSpec, length: int, rng: Optional[np.random.Generator] = None,
                   noise: float = 0.0) -> np.ndarray:
    """y[t] = d0 + a * pulse(2 pi t / T + phase), optionally with Gaussian jitter of sigma noise * a."""
    t = np.arange(length)
    # t mod T keeps the samples exactly periodic
    theta = 2 * np.pi * (t % spec.period_frames) / spec.period_frames + spec.phase
    y = spec.d0_mm + spec.amplitude_mm * pulse(theta)
    if noise > 0:
        rng = rng if rng is not None else np.random.default_rng(0)
        y = y + rng.normal(0.0, noise * spec.amplitude_mm, size=length)
    return y


def _coverage(edges: np.ndarray, low: float, high: float) -> np.ndarray:
    """Fraction of each unit pixel [r, r+1) lying inside [low, high]."""
    return np.clip(np.minimum(edges[1:], high) - np.maximum(edges[:-1], low), 0.0, 1.0)


def render_profile(rows: int, center: float, half_width: float, wall: float,
                   wall_brightness: float) -> np.ndarray:
    """Noise-free intensity along one image column."""
    edges = np.arange(rows + 1, dtype=np.float64)
    lumen = _coverage(edges, center - half_width, center + half_width)
    walls = (_coverage(edges, center - half_width - wall, center - half_width)
             + _coverage(edges, center + half_width, center + half_width + wall))
    tissue = 1.0 - lumen - walls
    return lumen * LUMEN_LEVEL + walls * wall_brightness + tissue * TISSUE_LEVEL


def lumen_width_profile(column: np.ndarray, wall_brightness: float) -> float:
    """Lumen width in pixels recovered from a noise-free column.

    Between the innermost fully bright wall pixels every pixel is a mix of
    lumen and wall, so its lumen fraction follows from its intensity.
    """
    bright = np.flatnonzero(column >= wall_brightness - 1e-6)
    dark = int(np.argmin(column))
    upper = bright[bright < dark]
    lower = bright[bright > dark]
    if len(upper) == 0 or len(lower) == 0:
        raise ValueError("column does not contain two fully covered wall pixels")
    inner = column[upper.max() + 1:lower.min()]
    fractions = (wall_brightness - inner) / (wall_brightness - LUMEN_LEVEL)
    return float(np.clip(fractions, 0.0, 1.0).sum())


def speckle_field(shape: Tuple[int, int], strength: float, rng: np.random.Generator) -> np.ndarray:
    """Unit-mean Rayleigh multiplicative field, 3x3 box smoothed."""
    scale = 1.0 / np.sqrt(np.pi / 2)
    raw = rng.rayleigh(scale, size=shape)
    smooth = uniform_filter(raw, size=3, mode="reflect")
    return np.maximum(1.0 + strength * (smooth - 1.0), 0.0)


def generate(spec: PhantomSpec, length: int, seed: int, frame_size: int = 128,
             pixel_pitch: float = 0.0625, frame_rate: float = 47.0,
             sequence_id: str = "") -> UltrasoundSequence:
    """Render a K-frame sequence with its exact ground-truth diameters."""
    if length < 1:
        raise ValueError("sequence length must be >= 1")
    rng = np.random.default_rng(seed)
    # stored as f32 on disk, so keep f32 in memory too
    y = diameter_trace(spec, length).astype(np.float32)
    t = np.arange(length)
    drift_px = spec.drift_mm / pixel_pitch
    centers = frame_size / 2 + drift_px * np.sin(2 * np.pi * t / spec.drift_period_frames)
    half_widths = y / (2 * pixel_pitch)
    wall_px = spec.wall_thickness_mm / pixel_pitch

    reach = half_widths + wall_px
    if np.any(centers - reach < 0) or np.any(centers + reach > frame_size):
        raise VesselOutOfFrameError(
            f"vessel of up to {2 * reach.max():.1f} px (drift {abs(drift_px):.1f} px) does not fit a "
            f"{frame_size} px frame"
        )

    frames = np.empty((length, 1, frame_size, frame_size), dtype=np.float32)
    for k in range(length):
        column = render_profile(frame_size, centers[k], half_widths[k], wall_px, spec.wall_brightness)
        image = np.repeat(column[:, None], frame_size, axis=1)
        if spec.speckle_strength > 0:
            image = image * speckle_field(image.shape, spec.speckle_strength, rng)
        if spec.gain_jitter > 0:
            image = image * (1.0 + rng.uniform(-spec.gain_jitter, spec.gain_jitter))
        frames[k, 0] = np.clip(image, 0.0, 1.0)

    logger.debug(f"Generated phantom {sequence_id or seed}: K={length}, T={spec.period_frames}, "
                 f"d0={spec.d0_mm:.2f} mm, a={spec.amplitude_mm:.2f} mm")
    return UltrasoundSequence(frames=frames, y=y, frame_rate=frame_rate, pixel_pitch=pixel_pitch,
                              seed=seed, true_period=spec.period_frames, sequence_id=sequence_id)


def sample_spec(rng: np.random.Generator, ranges: Optional[PhantomRanges] = None) -> Tuple[PhantomSpec, int]:
    """Draw a phantom spec and a sequence length from the population ranges."""
    ranges = ranges or PhantomRanges()
    spec = PhantomSpec(
        d0_mm=float(rng.uniform(*ranges.d0_range)),
        amplitude_mm=float(rng.uniform(*ranges.amplitude_range)),
        period_frames=int(rng.integers(ranges.period_range[0], ranges.period_range[1] + 1)),
        phase=float(rng.uniform(0, 2 * np.pi)),
        drift_mm=float(rng.uniform(*ranges.drift_range)) * float(rng.choice([-1.0, 1.0])),
        drift_period_frames=float(rng.uniform(60, 150)),
        speckle_strength=ranges.speckle_strength,
        gain_jitter=ranges.gain_jitter,
    )
    if ranges.length is not None:
        length = ranges.length
    else:
        length = int(rng.integers(ranges.length_range[0], ranges.length_range[1] + 1))
    return spec, length
