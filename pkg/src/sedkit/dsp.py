"""Signal frontend: log-mel spectrogram, impulse-response convolution, sequence alignment."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import fftconvolve

from .core import ValidationError

SAMPLE_RATE = 16000
LOG_EPS = 1e-5


@dataclass(frozen=True, eq=False)
class Waveform:
    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValidationError("waveform must be mono")
        if not np.all(np.isfinite(samples)):
            raise ValidationError("waveform contains non-finite samples")
        object.__setattr__(self, "samples", samples)


@dataclass(frozen=True)
class MelConfig:
    n_mels: int
    window_length: float
    hop: float
    name: str = "custom"

    def __post_init__(self):
        if self.n_mels < 1:
            raise ValidationError("n_mels must be >= 1")
        if not self.window_length >= self.hop > 0:
            raise ValidationError("need window_length >= hop > 0")

    def window_samples(self, sr: int = SAMPLE_RATE) -> int:
        return int(round(self.window_length * sr))

    def hop_samples(self, sr: int = SAMPLE_RATE) -> int:
        return int(round(self.hop * sr))

    def n_fft(self, sr: int = SAMPLE_RATE) -> int:
        return 1 << (self.window_samples(sr) - 1).bit_length()


MEL_PRESETS = {
    "cnn": MelConfig(128, 0.128, 0.016, "cnn"),
    # transformer presets are recorded only; no transformer runs here
    "atst": MelConfig(64, 0.064, 0.010, "atst"),
    "fpasst": MelConfig(128, 0.025, 0.010, "fpasst"),
    "beats": MelConfig(128, 0.025, 0.010, "beats"),
}


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_center_frequencies(n_mels: int, sr: int = SAMPLE_RATE, fmin: float = 0.0, fmax: float | None = None):
    fmax = sr / 2 if fmax is None else fmax
    pts = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    return pts[1:-1]


def mel_filterbank(n_mels: int, n_fft: int, sr: int = SAMPLE_RATE, fmin: float = 0.0, fmax: float | None = None):
    """Triangular HTK-scale filters, shape (n_mels, n_fft // 2 + 1)."""
    fmax = sr / 2 if fmax is None else fmax
    fft_freqs = np.linspace(0, sr / 2, n_fft // 2 + 1)
    pts = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    lower, center, upper = pts[:-2, None], pts[1:-1, None], pts[2:, None]
    up = (fft_freqs[None, :] - lower) / (center - lower)
    down = (upper - fft_freqs[None, :]) / (upper - center)
    return np.maximum(0.0, np.minimum(up, down))


def mel_spectrogram(w: Waveform, cfg: MelConfig = MEL_PRESETS["cnn"]) -> np.ndarray:
    """Log-mel power spectrogram, shape (n_mels, frames).

    Frames are centered with reflect padding, giving ``len // hop + 1`` frames.
    """
    x = w.samples
    if x.size == 0:
        raise ValidationError("empty waveform")
    if w.sample_rate != SAMPLE_RATE:
        raise ValidationError(f"expected {SAMPLE_RATE} Hz audio, got {w.sample_rate}")
    win_len, hop, n_fft = cfg.window_samples(), cfg.hop_samples(), cfg.n_fft()
    pad = n_fft // 2
    mode = "reflect" if x.size > pad else "constant"
    padded = np.pad(x, pad, mode=mode)
    n_frames = x.size // hop + 1
    window = np.zeros(n_fft)
    off = (n_fft - win_len) // 2
    window[off:off + win_len] = np.hanning(win_len + 1)[:-1]
    idx = np.arange(n_fft)[None, :] + hop * np.arange(n_frames)[:, None]
    frames = padded[idx] * window
    power = np.abs(np.fft.rfft(frames, n=n_fft, axis=1)) ** 2
    mel = mel_filterbank(cfg.n_mels, n_fft) @ power.T
    return np.log(mel + LOG_EPS)


def dir_convolve(w: Waveform, ir: Waveform) -> Waveform:
    """Convolve with a device impulse response, keep input length and peak level."""
    if w.sample_rate != ir.sample_rate:
        raise ValidationError("waveform and impulse response sample rates differ")
    x = w.samples
    y = fftconvolve(x, ir.samples, mode="full")[: x.size]
    peak_in, peak_out = np.max(np.abs(x), initial=0.0), np.max(np.abs(y), initial=0.0)
    if peak_out > 0:
        y = y * (peak_in / peak_out)
    return Waveform(y, w.sample_rate)


def align_sequence(seq: np.ndarray, target_len: int, mode: str = "linear") -> np.ndarray:
    """Resample a (T1, D) sequence along time to (target_len, D)."""
    seq = np.asarray(seq, dtype=np.float64)
    squeeze = seq.ndim == 1
    if squeeze:
        seq = seq[:, None]
    t1 = seq.shape[0]
    if t1 < 1 or target_len < 1:
        raise ValidationError("sequence lengths must be >= 1")
    i = np.arange(target_len)
    if mode == "adaptive_avg_pool":
        start = (i * t1) // target_len
        end = -((-(i + 1) * t1) // target_len)
        csum = np.vstack([np.zeros((1, seq.shape[1])), np.cumsum(seq, axis=0)])
        out = (csum[end] - csum[start]) / (end - start)[:, None]
    elif mode == "linear":
        pos = np.clip((i + 0.5) * t1 / target_len - 0.5, 0, t1 - 1)
        lo = np.floor(pos).astype(int)
        hi = np.minimum(lo + 1, t1 - 1)
        frac = (pos - lo)[:, None]
        out = seq[lo] * (1 - frac) + seq[hi] * frac
    elif mode == "nearest_exact":
        idx = np.minimum(np.floor((i + 0.5) * t1 / target_len).astype(int), t1 - 1)
        out = seq[idx]
    else:
        raise ValidationError(f"unknown alignment mode {mode!r}")
    return out[:, 0] if squeeze else out


def read_wav(path: str | Path) -> Waveform:
    sr, data = wavfile.read(str(path))
    if data.ndim != 1:
        raise ValidationError(f"{path}: expected mono audio")
    if data.dtype == np.int16:
        data = data.astype(np.float64) / 32768.0
    elif data.dtype.kind == "f":
        data = data.astype(np.float64)
    else:
        raise ValidationError(f"{path}: unsupported sample format {data.dtype}")
    if sr != SAMPLE_RATE:
        raise ValidationError(f"{path}: expected {SAMPLE_RATE} Hz, got {sr}")
    return Waveform(data, sr)
