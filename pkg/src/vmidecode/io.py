"""EEGB on-disk container.

Layout: 4-byte magic "EEGB", 1-byte version (1), u32 little-endian length of
a UTF-8 JSON header, the header, then a float32 little-endian payload.
Recordings store the payload channel-major (row = channel); epoch sets store
it trial-major. Round trips are bit-exact.
"""

import json
import struct

import numpy as np

from .core import EegRecording, EpochSet, Montage
from .errors import CorruptionError, FormatError

MAGIC = b"EEGB"
VERSION = 1


def write_container(path, header: dict, payload: np.ndarray) -> None:
    """Write a header dict + float32 payload in EEGB framing."""
    raw = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    payload = np.ascontiguousarray(payload, dtype="<f4")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(bytes([VERSION]))
        f.write(struct.pack("<I", len(raw)))
        f.write(raw)
        f.write(payload.tobytes())


def read_container(path):
    """Read (header, flat float32 payload) from an EEGB file."""
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < 9 or blob[:4] != MAGIC:
        raise FormatError(f"{path}: bad magic, not an EEGB container")
    if blob[4] != VERSION:
        raise FormatError(f"{path}: unsupported version {blob[4]}")
    (hlen,) = struct.unpack_from("<I", blob, 5)
    if 9 + hlen > len(blob):
        raise CorruptionError(f"{path}: truncated header")
    try:
        header = json.loads(blob[9:9 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FormatError(f"{path}: unreadable header: {e}") from e
    body = blob[9 + hlen:]
    if len(body) % 4 != 0:
        raise CorruptionError(f"{path}: payload not a whole number of float32")
    payload = np.frombuffer(body, dtype="<f4")
    return header, payload


def save_recording(rec: EegRecording, path) -> None:
    header = {
        "fs": int(rec.fs),
        "channel_names": list(rec.montage.channel_names),
        "unit": "uV",
        "n_samples": int(rec.n_samples),
        "events": [{"sample": s, "label": l} for s, l in rec.events],
    }
    write_container(path, header, rec.data)


def load_recording(path) -> EegRecording:
    header, payload = read_container(path)
    for key in ("fs", "channel_names", "events"):
        if key not in header:
            raise FormatError(f"{path}: header missing {key!r}")
    names = header["channel_names"]
    n_ch = len(names)
    if "n_samples" in header:
        n_samp = int(header["n_samples"])
        if payload.size != n_ch * n_samp:
            raise CorruptionError(
                f"{path}: header claims {n_ch} x {n_samp} samples, "
                f"payload holds {payload.size} values"
            )
    else:
        if n_ch == 0 or payload.size % n_ch != 0:
            raise CorruptionError(
                f"{path}: payload size {payload.size} not divisible by "
                f"{n_ch} channels"
            )
        n_samp = payload.size // n_ch
    data = payload.reshape(n_ch, n_samp)
    events = [(e["sample"], e["label"]) for e in header["events"]]
    try:
        return EegRecording(Montage(tuple(names)), int(header["fs"]), data, events)
    except ValueError as e:
        raise CorruptionError(f"{path}: {e}") from e


def save_epochs(epochs: EpochSet, path) -> None:
    header = {
        "fs": int(epochs.fs),
        "t0_ms": float(epochs.t0_ms),
        "labels": [int(l) for l in epochs.labels],
        "dims": [int(d) for d in epochs.tensor.shape],
        "source_trials": [int(s) for s in epochs.source_trials],
    }
    if epochs.montage is not None:
        header["channel_names"] = list(epochs.montage.channel_names)
    write_container(path, header, epochs.tensor)


def load_epochs(path) -> EpochSet:
    header, payload = read_container(path)
    for key in ("fs", "t0_ms", "labels", "dims"):
        if key not in header:
            raise FormatError(f"{path}: header missing {key!r}")
    dims = tuple(int(d) for d in header["dims"])
    if len(dims) != 3:
        raise FormatError(f"{path}: dims must be [trials, channels, samples]")
    if payload.size != int(np.prod(dims)):
        raise CorruptionError(
            f"{path}: header claims dims {dims}, payload holds {payload.size}"
        )
    montage = None
    if "channel_names" in header:
        montage = Montage(tuple(header["channel_names"]))
    src = header.get("source_trials")
    try:
        return EpochSet(
            np.asarray(header["labels"]), payload.reshape(dims),
            int(header["fs"]), float(header["t0_ms"]),
            source_trials=None if src is None else np.asarray(src),
            montage=montage,
        )
    except ValueError as e:
        raise CorruptionError(f"{path}: {e}") from e
