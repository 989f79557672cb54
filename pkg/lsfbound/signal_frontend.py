"""Speech front end: WAV input, framing with silence removal, LPC analysis."""

import struct
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np
import structlog
from numpy.lib.stride_tricks import sliding_window_view
from scipy.io import wavfile
from scipy.signal import get_window

from .config import FrameConfig
from .errors import (
    ChannelError,
    DegenerateFrameError,
    DomainError,
    EmptyOutputError,
    FormatError,
    InputError,
    InstabilityError,
    OrderError,
)

logger = structlog.get_logger(__name__)

# full-scale divisors; scipy returns 24-bit PCM left-justified in int32
_PCM_SCALE = {2: 32768.0, 4: 2147483648.0}


def _frozen(array) -> np.ndarray:
    out = np.array(array, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class AudioSignal:
    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        object.__setattr__(self, "samples", _frozen(self.samples))
        if self.sample_rate_hz <= 0:
            raise DomainError(f"sample rate must be positive, got {self.sample_rate_hz}")
        if self.samples.ndim != 1:
            raise DomainError("samples must be one-dimensional (mono)")
        if not np.all(np.isfinite(self.samples)):
            raise DomainError("samples contain NaN or Inf")

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz


@dataclass(frozen=True)
class LpcFrame:
    """Coefficients a_1..a_K of A(z) = 1 + sum_k a_k z^-k for one frame."""

    coefficients: np.ndarray
    residual_energy: float = 1.0
    frame_index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "coefficients", _frozen(self.coefficients))
        if self.coefficients.ndim != 1 or len(self.coefficients) == 0:
            raise DomainError("LPC coefficients must be a non-empty vector")
        if not np.all(np.isfinite(self.coefficients)):
            raise DomainError("LPC coefficients contain NaN or Inf")
        if not self.residual_energy >= 0:
            raise DomainError(f"residual energy must be >= 0, got {self.residual_energy}")

    @property
    def order(self) -> int:
        return len(self.coefficients)

    def polynomial(self) -> np.ndarray:
        """[1, a_1, ..., a_K]."""
        return np.concatenate(([1.0], self.coefficients))


@dataclass(frozen=True)
class WindowedFrames:
    """Retained frames after silence removal, in analysis order."""

    frames: np.ndarray
    frame_indices: np.ndarray
    energies: np.ndarray
    total_frames: int = field(default=0)

    def __len__(self) -> int:
        return len(self.frame_indices)


def read_wav(path, downmix: bool = False) -> AudioSignal:
    """Read a PCM (8/16/24/32-bit) or 32-bit float WAV file scaled to [-1, 1]."""
    try:
        sample_rate, data = wavfile.read(str(path))
    except (FileNotFoundError, IsADirectoryError, PermissionError) as e:
        raise InputError(path, e.strerror or str(e)) from e
    except (ValueError, EOFError, struct.error) as e:
        raise FormatError(f"{path}: unsupported or malformed WAV ({e})") from e

    kind, width = data.dtype.kind, data.dtype.itemsize
    if (kind, width) == ("u", 1):
        samples = (data.astype(float) - 128.0) / 128.0
    elif kind == "i" and width in _PCM_SCALE:
        samples = data.astype(float) / _PCM_SCALE[width]
    elif (kind, width) == ("f", 4):
        samples = data.astype(float)
    else:
        raise FormatError(f"{path}: unsupported sample encoding {data.dtype}")

    if samples.ndim == 2:
        if samples.shape[1] == 1:
            samples = samples[:, 0]
        elif downmix:
            samples = samples.mean(axis=1)
        else:
            raise ChannelError(f"{path}: {samples.shape[1]} channels; pass the downmix flag to average them")

    if not np.all(np.isfinite(samples)):
        raise FormatError(f"{path}: non-finite samples")
    return AudioSignal(samples=samples, sample_rate_hz=int(sample_rate))


def count_frames(num_samples: int, frame_length: int, hop: int) -> int:
    if num_samples < frame_length:
        return 0
    return (num_samples - frame_length) // hop + 1


def drop_silent_frames(frames: WindowedFrames, threshold_db: float) -> WindowedFrames:
    """Keep frames whose energy is within threshold_db of the loudest frame."""
    if len(frames) == 0:
        return frames
    peak = float(frames.energies.max())
    if peak <= 0.0:
        keep = np.zeros(len(frames), dtype=bool)
    else:
        keep = (frames.energies > 0.0) & (frames.energies >= peak * 10.0 ** (threshold_db / 10.0))
    return WindowedFrames(
        frames=frames.frames[keep],
        frame_indices=frames.frame_indices[keep],
        energies=frames.energies[keep],
        total_frames=frames.total_frames,
    )


def frame_signal(signal: AudioSignal, cfg: FrameConfig) -> WindowedFrames:
    """Cut the signal into Hann-windowed frames and remove silent ones.

    Silence is judged on the pre-window energy. No pre-emphasis is applied.
    """
    frame_length = cfg.frame_length(signal.sample_rate_hz)
    hop = cfg.hop_length(signal.sample_rate_hz)
    if len(signal.samples) < frame_length:
        raise EmptyOutputError(
            f"signal has {len(signal.samples)} samples, shorter than one {frame_length}-sample window"
        )

    raw = sliding_window_view(signal.samples, frame_length)[::hop]
    window = get_window("hann", frame_length, fftbins=True)
    frames = WindowedFrames(
        frames=raw * window,
        frame_indices=np.arange(len(raw)),
        energies=np.einsum("ij,ij->i", raw, raw),
        total_frames=len(raw),
    )
    retained = drop_silent_frames(frames, cfg.silence_threshold_db)
    logger.debug("framed signal", frames=len(raw), retained=len(retained), frame_length=frame_length, hop=hop)
    return retained


def autocorrelation(frame, order: int) -> np.ndarray:
    """Biased (unnormalized) autocorrelation r_0..r_K."""
    frame = np.asarray(frame, dtype=float)
    n = len(frame)
    if order < 0 or order >= n:
        raise OrderError(f"order {order} needs a frame longer than {order} samples, got {n}")
    return np.array([np.dot(frame[: n - lag], frame[lag:]) for lag in range(order + 1)])


def levinson_durbin(r, frame_index: int = 0) -> LpcFrame:
    """Solve the Yule-Walker equations for A(z) by order recursion."""
    r = np.asarray(r, dtype=float)
    order = len(r) - 1
    if order < 1:
        raise OrderError("autocorrelation must hold at least r_0 and r_1")
    if not r[0] > 0:
        raise DegenerateFrameError(f"frame {frame_index}: r_0 = {r[0]} is not positive", index=frame_index)

    a = np.zeros(order)
    error = r[0]
    for m in range(1, order + 1):
        acc = r[m] + np.dot(a[: m - 1], r[m - 1 : 0 : -1])
        k = -acc / error
        if not abs(k) < 1.0:
            raise InstabilityError(
                f"frame {frame_index}: reflection coefficient k_{m} = {k:.6g} is not inside (-1, 1)",
                index=frame_index,
            )
        previous = a[: m - 1].copy()
        a[: m - 1] = previous + k * previous[::-1]
        a[m - 1] = k
        error *= 1.0 - k * k
    return LpcFrame(coefficients=a, residual_energy=error, frame_index=frame_index)


def analyze_signal(signal: AudioSignal, cfg: FrameConfig) -> Tuple[List[LpcFrame], Dict[str, int]]:
    """LPC frames for every retained frame, plus counts of dropped frames."""
    frames = frame_signal(signal, cfg)
    dropped = {"silent": frames.total_frames - len(frames), "degenerate": 0, "unstable": 0}
    lpc_frames = []
    for frame, index in zip(frames.frames, frames.frame_indices):
        r = autocorrelation(frame, cfg.lpc_order)
        r[0] += cfg.lpc_guard * r[0]
        try:
            lpc_frames.append(levinson_durbin(r, frame_index=int(index)))
        except DegenerateFrameError:
            dropped["degenerate"] += 1
        except InstabilityError:
            dropped["unstable"] += 1
    if dropped["degenerate"] or dropped["unstable"]:
        logger.info("dropped frames during LPC analysis", **dropped)
    return lpc_frames, dropped
