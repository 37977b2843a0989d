"""Series and alignment file formats.

Text series (``.tsv``)::

    # rate_hz=2000 channels=ch1,ch2,...
    <tab-separated reals, one row per frame>

Binary series (any extension, detected by magic): ``b"TRF1"``, a
little-endian uint32 header length, the same header text as above (without
the leading ``# ``), then little-endian float64 samples in row-major order.

Alignments are tab-separated ``start_s  end_s  label`` rows, optionally with a
``start_s\tend_s\tlabel`` header line.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import FormatError
from .features import PhonemeAlignment
from .series import MultiChannelSeries

MAGIC = b"TRF1"


def _header(series: MultiChannelSeries) -> str:
    for name in series.channel_names:
        if "," in name or any(c.isspace() for c in name):
            raise FormatError(f"channel name {name!r} contains a comma or whitespace")
    return f"rate_hz={series.sample_rate_hz!r} channels={','.join(series.channel_names)}"


def _parse_header(text: str, path) -> tuple[float, tuple[str, ...]]:
    fields = {}
    for tok in text.split():
        key, sep, value = tok.partition("=")
        if not sep:
            raise FormatError(f"{path}: malformed header token {tok!r}")
        fields[key] = value
    try:
        rate = float(fields["rate_hz"])
        channels = tuple(c for c in fields["channels"].split(",") if c)
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{path}: header needs rate_hz and channels") from exc
    return rate, channels


def _fmt(x: float) -> str:
    return repr(float(x))


def write_series(path, series: MultiChannelSeries, binary: bool | None = None) -> Path:
    """Write ``series``; binary unless the suffix is ``.tsv`` (or ``binary`` says otherwise)."""
    path = Path(path)
    if binary is None:
        binary = path.suffix != ".tsv"
    path.parent.mkdir(parents=True, exist_ok=True)
    header = _header(series)
    if binary:
        head = header.encode()
        payload = np.ascontiguousarray(series.data, dtype="<f8").tobytes()
        path.write_bytes(MAGIC + struct.pack("<I", len(head)) + head + payload)
    else:
        lines = ["# " + header]
        lines += ["\t".join(_fmt(v) for v in row) for row in series.data]
        path.write_text("\n".join(lines) + "\n")
    return path


def read_series(path) -> MultiChannelSeries:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    if raw[:4] == MAGIC:
        if len(raw) < 8:
            raise FormatError(f"{path}: truncated binary header")
        (n,) = struct.unpack("<I", raw[4:8])
        rate, channels = _parse_header(raw[8:8 + n].decode(errors="replace"), path)
        body = raw[8 + n:]
        if not channels or len(body) % (8 * len(channels)):
            raise FormatError(f"{path}: payload size does not match {len(channels)} channels")
        data = np.frombuffer(body, dtype="<f8").reshape(-1, len(channels))
    else:
        text = raw.decode(errors="replace").splitlines()
        if not text or not text[0].startswith("#"):
            raise FormatError(f"{path}: missing '# rate_hz=... channels=...' header")
        rate, channels = _parse_header(text[0].lstrip("#"), path)
        rows = [ln for ln in text[1:] if ln.strip()]
        try:
            data = np.array([[float(v) for v in ln.split("\t")] for ln in rows], dtype=np.float64)
        except ValueError as exc:
            raise FormatError(f"{path}: non-numeric sample") from exc
        if rows and (data.ndim != 2 or data.shape[1] != len(channels)):
            raise FormatError(f"{path}: rows do not have {len(channels)} columns")
        data = data.reshape(-1, len(channels))
    try:
        return MultiChannelSeries(data, rate, channels)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def write_alignment(path, align: PhonemeAlignment) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["start_s\tend_s\tlabel"]
    lines += [f"{_fmt(s)}\t{_fmt(e)}\t{lab}" for s, e, lab in align.spans]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_alignment(path, utterance_id: str | None = None) -> PhonemeAlignment:
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    spans = []
    for n, ln in enumerate(lines):
        if not ln.strip():
            continue
        parts = ln.split("\t")
        if len(parts) != 3:
            raise FormatError(f"{path}:{n + 1}: expected 3 tab-separated fields")
        try:
            start, end = float(parts[0]), float(parts[1])
        except ValueError:
            if n == 0:
                continue  # header
            raise FormatError(f"{path}:{n + 1}: non-numeric time") from None
        spans.append((start, end, parts[2].strip()))
    try:
        return PhonemeAlignment(tuple(spans), utterance_id or path.stem)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc
