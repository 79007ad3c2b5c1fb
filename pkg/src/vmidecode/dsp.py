"""Numeric kernels: FFT, analytic signal, zero-phase band-pass, decimation,
Welch PSD and ERSP time-frequency maps.

The FFT is hand-rolled: iterative radix-2 for power-of-two lengths and
Bluestein's chirp-z for everything else (the pipeline's natural lengths,
1000/500/1250, are not powers of two). Filtering uses scipy-designed
Butterworth biquads with our own reflect-padded forward-backward pass.
"""

from dataclasses import dataclass

import numpy as np
import scipy.signal as sps

from .core import EegRecording, EpochSet
from .errors import EmptyInputError, RangeError

# ---------------------------------------------------------------------------
# FFT

_BITREV_CACHE = {}
_BLUESTEIN_CACHE = {}


def _bit_reverse_indices(n: int) -> np.ndarray:
    idx = _BITREV_CACHE.get(n)
    if idx is None:
        bits = n.bit_length() - 1
        idx = np.zeros(n, dtype=np.intp)
        for b in range(bits):
            idx |= ((np.arange(n) >> b) & 1) << (bits - 1 - b)
        _BITREV_CACHE[n] = idx
    return idx


def _fft_pow2(x: np.ndarray) -> np.ndarray:
    """Iterative radix-2 FFT along the last axis; len must be a power of two."""
    n = x.shape[-1]
    y = np.ascontiguousarray(x[..., _bit_reverse_indices(n)],
                             dtype=np.complex128)
    m = 2
    while m <= n:
        half = m // 2
        w = np.exp(-2j * np.pi * np.arange(half) / m)
        v = y.reshape(x.shape[:-1] + (n // m, m))
        odd = v[..., half:] * w
        v[..., half:] = v[..., :half] - odd
        v[..., :half] += odd
        m *= 2
    return y


def _bluestein_setup(n: int):
    cached = _BLUESTEIN_CACHE.get(n)
    if cached is None:
        m = 1
        while m < 2 * n - 1:
            m *= 2
        k = np.arange(n)
        # k^2 mod 2n keeps the chirp argument small for large n
        chirp = np.exp(-1j * np.pi * ((k * k) % (2 * n)) / n)
        b = np.zeros(m, dtype=np.complex128)
        b[:n] = np.conj(chirp)
        b[m - n + 1:] = np.conj(chirp[1:][::-1])
        cached = (m, chirp, _fft_pow2(b))
        _BLUESTEIN_CACHE[n] = cached
    return cached


def _fft_bluestein(x: np.ndarray) -> np.ndarray:
    n = x.shape[-1]
    m, chirp, b_hat = _bluestein_setup(n)
    a = np.zeros(x.shape[:-1] + (m,), dtype=np.complex128)
    a[..., :n] = x * chirp
    conv = _ifft_pow2(_fft_pow2(a) * b_hat)
    return conv[..., :n] * chirp


def _ifft_pow2(x: np.ndarray) -> np.ndarray:
    return np.conj(_fft_pow2(np.conj(x))) / x.shape[-1]


def fft(x) -> np.ndarray:
    """Discrete Fourier transform along the last axis, any length >= 1."""
    x = np.asarray(x)
    if x.size == 0 or x.shape[-1] == 0:
        raise EmptyInputError("fft of empty input")
    x = x.astype(np.complex128)
    n = x.shape[-1]
    if n & (n - 1) == 0:
        return _fft_pow2(x)
    return _fft_bluestein(x)


def ifft(x) -> np.ndarray:
    """Inverse of :func:`fft`; ifft(fft(x)) == x to 1e-9 relative."""
    x = np.asarray(x)
    if x.size == 0 or x.shape[-1] == 0:
        raise EmptyInputError("ifft of empty input")
    return np.conj(fft(np.conj(x))) / x.shape[-1]


def analytic_signal(x) -> np.ndarray:
    """Analytic signal of a real series (last axis).

    The real part equals the input; negative-frequency content is zero; the
    instantaneous phase is the complex argument of the output.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[-1]
    if n < 4:
        raise RangeError("analytic_signal needs length >= 4")
    spec = fft(x)
    h = np.zeros(n)
    h[0] = 1.0
    if n % 2 == 0:
        h[n // 2] = 1.0
        h[1:n // 2] = 2.0
    else:
        h[1:(n + 1) // 2] = 2.0
    return ifft(spec * h)


# ---------------------------------------------------------------------------
# Filtering and decimation

def butter_bandpass_sos(lo_hz: float, hi_hz: float, fs: float,
                        order: int = 4) -> np.ndarray:
    """Butterworth band-pass of the given total order as a biquad cascade."""
    if not 0.0 < lo_hz < hi_hz < fs / 2.0:
        raise RangeError(f"invalid band ({lo_hz}, {hi_hz}) Hz at fs={fs}")
    if order % 2 != 0:
        raise RangeError("band-pass order must be even")
    return sps.butter(order // 2, [lo_hz, hi_hz], btype="bandpass",
                      fs=fs, output="sos")


def _filtfilt_sos(sos: np.ndarray, x: np.ndarray, padlen: int) -> np.ndarray:
    """Forward-backward biquad-cascade filtering with reflect padding."""
    n = x.shape[-1]
    padlen = min(padlen, n - 1)
    if padlen > 0:
        left = 2 * x[..., :1] - x[..., padlen:0:-1]
        right = 2 * x[..., -1:] - x[..., -2:-2 - padlen:-1]
        ext = np.concatenate([left, x, right], axis=-1)
    else:
        ext = x
    y = sps.sosfilt(sos, ext, axis=-1)
    y = sps.sosfilt(sos, y[..., ::-1], axis=-1)[..., ::-1]
    if padlen > 0:
        y = y[..., padlen:-padlen]
    return y


def bandpass(x, lo_hz: float, hi_hz: float, fs: float, order: int = 4):
    """Zero-phase Butterworth band-pass along the last axis.

    Applied forward then backward, so the effective magnitude response is
    the squared response of the underlying cascade and the phase is zero.
    Edges are handled by reflect-padding 3x the filter order.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] == 0:
        raise EmptyInputError("bandpass of empty input")
    sos = butter_bandpass_sos(lo_hz, hi_hz, fs, order)
    return _filtfilt_sos(sos, x, padlen=3 * order)


def bandpass_response(lo_hz, hi_hz, fs, f_eval, order: int = 4):
    """|H(f)|^2 of the zero-phase band-pass (independent of the filter path).

    Evaluates the cascade's transfer polynomials at e^{-j 2 pi f / fs}; the
    forward-backward pass squares the magnitude.
    """
    sos = butter_bandpass_sos(lo_hz, hi_hz, fs, order)
    z = np.exp(-2j * np.pi * np.atleast_1d(np.asarray(f_eval, float)) / fs)
    h = np.ones_like(z)
    for b0, b1, b2, a0, a1, a2 in sos:
        h *= (b0 + b1 * z + b2 * z ** 2) / (a0 + a1 * z + a2 * z ** 2)
    return np.abs(h) ** 2


def downsample(x, factor: int, anti_alias: bool = False, fs: float = None):
    """Keep every factor-th sample along the last axis.

    The caller is expected to have band-limited the signal below the new
    Nyquist (the pipeline calls this after the 0.5-13 Hz band-pass); set
    anti_alias=True to apply a zero-phase low-pass first (requires fs).
    """
    if factor < 1:
        raise RangeError("downsample factor must be >= 1")
    x = np.asarray(x)
    if anti_alias and factor > 1:
        if fs is None:
            raise RangeError("anti_alias requires fs")
        sos = sps.butter(4, 0.8 * (fs / factor) / 2.0, btype="lowpass",
                         fs=fs, output="sos")
        x = _filtfilt_sos(sos, np.asarray(x, dtype=np.float64), padlen=24)
    return x[..., ::factor]


def preprocess_recording(rec: EegRecording, band=(0.5, 13.0),
                         factor: int = 4) -> EegRecording:
    """Band-pass every channel and decimate; event indices are rescaled."""
    data = bandpass(rec.data, band[0], band[1], rec.fs)
    data = downsample(data, factor).astype(np.float32)
    events = [(s // factor, l) for s, l in rec.events]
    return EegRecording(rec.montage, rec.fs // factor, data, events)


# ---------------------------------------------------------------------------
# Spectral estimation

@dataclass
class Spectrum:
    """One-sided power spectral density, microvolts^2 per Hz."""

    freqs_hz: np.ndarray
    power: np.ndarray

    def to_csv(self, path) -> None:
        rows = ["frequency_hz,power"]
        rows += [f"{f:.6g},{p:.10g}" for f, p in zip(self.freqs_hz, self.power)]
        with open(path, "w") as f:
            f.write("\n".join(rows) + "\n")


def _welch_batch(x: np.ndarray, fs: float, seg_len: int, overlap: float):
    """Averaged windowed periodograms over the last axis of a batch.

    Returns (freqs, psd) with psd shaped like x without the last axis plus a
    frequency axis. Density scaling: integrating over [0, fs/2] recovers the
    series variance.
    """
    n = x.shape[-1]
    if seg_len > n:
        raise RangeError(f"segment length {seg_len} exceeds series length {n}")
    hop = max(1, int(round(seg_len * (1.0 - overlap))))
    win = np.hanning(seg_len)
    u = (win ** 2).sum()
    segs = np.lib.stride_tricks.sliding_window_view(x, seg_len, axis=-1)
    segs = segs[..., ::hop, :] * win
    spec = fft(segs)[..., : seg_len // 2 + 1]
    pxx = (np.abs(spec) ** 2).mean(axis=-2) / (fs * u)
    pxx[..., 1:] *= 2.0
    if seg_len % 2 == 0:
        pxx[..., -1] /= 2.0
    freqs = np.arange(seg_len // 2 + 1) * fs / seg_len
    return freqs, pxx


def welch_psd(x, fs: float, seg_len: int = None, overlap: float = 0.5) -> Spectrum:
    """Welch PSD of a single real series (Hann window, 50% overlap default)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise RangeError("welch_psd expects a 1-D series")
    if seg_len is None:
        seg_len = min(int(fs), x.shape[-1])
    freqs, pxx = _welch_batch(x, fs, seg_len, overlap)
    return Spectrum(freqs, pxx)


# ---------------------------------------------------------------------------
# ERSP

@dataclass
class TfMap:
    """Time-frequency map of dB power change versus a pre-onset baseline."""

    freqs_hz: np.ndarray
    times_ms: np.ndarray
    values: np.ndarray  # |freqs| x |times|

    def to_csv(self, path) -> None:
        head = "frequency_hz," + ",".join(f"{t:.4g}" for t in self.times_ms)
        rows = [head]
        for f, row in zip(self.freqs_hz, self.values):
            rows.append(f"{f:.6g}," + ",".join(f"{v:.6g}" for v in row))
        with open(path, "w") as f:
            f.write("\n".join(rows) + "\n")


def ersp(epochs: EpochSet, baseline_ms=(-500.0, 0.0), f_range=(3.0, 50.0),
         channels=None, n_times: int = 400, win: int = 256, hop: int = None):
    """Event-related spectral perturbation, one TfMap per requested channel.

    Short-time FFT with a Hann window; trial-averaged power is referenced to
    the mean power over the baseline window and expressed in dB; the time
    axis is linearly resampled to exactly ``n_times`` points spanning the
    post-onset part of the epoch.
    """
    fs = epochs.fs
    t0 = epochs.t0_ms
    if t0 > baseline_ms[0]:
        raise RangeError(
            f"epochs start at {t0} ms, baseline needs {baseline_ms[0]} ms"
        )
    n = epochs.n_samples
    win = min(win, n)
    if hop is None:
        hop = max(1, (n - win) // (2 * n_times))
    if channels is None:
        channels = range(epochs.n_channels)

    window = np.hanning(win)
    starts = np.arange(0, n - win + 1, hop)
    centers_ms = (starts + win / 2.0) / fs * 1000.0 + t0
    freqs_all = np.arange(win // 2 + 1) * fs / win
    f_keep = (freqs_all >= f_range[0]) & (freqs_all <= f_range[1])
    freqs = freqs_all[f_keep]
    # baseline membership goes by frame start: with a 256-sample window at
    # 250 Hz no frame *center* can precede onset inside a 500 ms baseline
    starts_ms = starts / fs * 1000.0 + t0
    base_mask = (starts_ms >= baseline_ms[0]) & (starts_ms < baseline_ms[1])
    if not base_mask.any():
        raise RangeError("no STFT frames fall inside the baseline window")
    end_ms = t0 + n / fs * 1000.0
    times_out = np.linspace(max(0.0, centers_ms[0]), end_ms, n_times)

    maps = []
    for ch in channels:
        x = np.asarray(epochs.tensor[:, ch, :], dtype=np.float64)
        frames = np.lib.stride_tricks.sliding_window_view(x, win, axis=-1)
        frames = frames[:, ::hop, :] * window
        power = np.abs(fft(frames)[..., : win // 2 + 1]) ** 2
        mean_power = power.mean(axis=0)[:, f_keep]          # frames x freqs
        baseline = mean_power[base_mask].mean(axis=0)       # per frequency
        db = 10.0 * np.log10(mean_power / baseline)
        values = np.empty((freqs.size, n_times))
        for i in range(freqs.size):
            values[i] = np.interp(times_out, centers_ms, db[:, i])
        maps.append(TfMap(freqs, times_out, values))
    return maps
