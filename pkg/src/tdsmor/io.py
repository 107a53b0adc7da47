"""On-disk formats for delay systems, initial data and reduced models.

Two encodings carry the same content (layout in ``docs/FORMAT.md``):

* binary (``.tds``): magic, JSON header, raw little-endian float64 blocks
  in row-major order; round trips are bit-exact;
* text (``.json``): a single JSON document with nested row lists, floats
  written with ``repr`` so that they also round-trip exactly.

Files are written atomically (temporary file + rename).
"""

import json
import os
import struct
import tempfile

import numpy as np

from .errors import ArgumentError, FileFormatError
from .system import DelaySystem, InitialData, ReducedSystem

MAGIC = b"TDSMOR\x00\x01"
FORMAT_VERSION = 1


def _blocks(system, init, reduced):
    """Ordered (name, array) pairs stored after the header."""
    out = [("A0", system.A0)]
    out += [(f"A[{d}]", A) for A, d in system.delayed]
    out += [("B", system.B), ("C", system.C), ("history", init.values)]
    for k in range(init.values.shape[0]):
        out.append((f"X[{-k}]", init.bases[k]))
        out.append((f"w[{-k}]", init.weights[k][None, :]))
    if reduced is not None:
        out += [("V", reduced.V), ("W", reduced.W)]
    return out


def _header(system, init, reduced, extra):
    h = {
        "format_version": FORMAT_VERSION,
        "n": system.n,
        "m": system.m,
        "p": system.p,
        "delays": list(system.delays),
        "d_max": init.d_max,
        "n0": [int(X.shape[1]) for X in init.bases],
    }
    if reduced is not None:
        h["reduced"] = {
            "method": reduced.method,
            "full_n": int(reduced.V.shape[0]),
            "params": reduced.params,
        }
    if extra:
        h["meta"] = extra
    return h


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _atomic_write(path, data, mode="wb"):
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _is_text(path, fmt):
    if fmt is not None:
        if fmt not in ("binary", "text"):
            raise ArgumentError(f"unknown format {fmt!r}")
        return fmt == "text"
    return os.fspath(path).endswith(".json")


def save(path, system, init, reduced=None, meta=None, fmt=None):
    """Write a system with its initial data (and reduction data) to ``path``.

    ``fmt`` is ``"binary"`` or ``"text"``; by default ``.json`` paths are
    text and everything else binary.
    """
    init.check(system)
    header = _header(system, init, reduced, meta)
    blocks = _blocks(system, init, reduced)
    if _is_text(path, fmt):
        doc = dict(header)
        doc["matrices"] = {name: np.asarray(a, dtype=float).tolist() for name, a in blocks}
        # the shape of an empty block is not recoverable from nested lists
        doc["shapes"] = {name: list(np.shape(a)) for name, a in blocks}
        _atomic_write(path, json.dumps(doc, sort_keys=True, indent=1, default=_json_default) + "\n", mode="w")
        return
    hbytes = json.dumps(header, sort_keys=True, separators=(",", ":"), default=_json_default).encode()
    parts = [MAGIC, struct.pack("<I", len(hbytes)), hbytes]
    for _, a in blocks:
        a = np.ascontiguousarray(a, dtype="<f8")
        parts.append(struct.pack("<II", *a.shape))
        parts.append(a.tobytes(order="C"))
    _atomic_write(path, b"".join(parts))


def _assemble(header, arrays):
    delays = header["delays"]
    system = DelaySystem(
        A0=arrays["A0"],
        delayed=[(arrays[f"A[{d}]"], d) for d in delays],
        B=arrays["B"], C=arrays["C"])
    hist = arrays["history"]
    K = hist.shape[0]
    init = InitialData(hist, tuple(arrays[f"X[{-k}]"] for k in range(K)),
                       tuple(arrays[f"w[{-k}]"].ravel() for k in range(K)))
    reduced = None
    if "reduced" in header:
        red = header["reduced"]
        reduced = ReducedSystem(system=system, init=init, V=arrays["V"], W=arrays["W"],
                                method=red["method"], params=red.get("params", {}))
    return system, init, reduced, header.get("meta", {})


def _names(header):
    names = ["A0"] + [f"A[{d}]" for d in header["delays"]] + ["B", "C", "history"]
    for k in range(header["d_max"] + 1):
        names += [f"X[{-k}]", f"w[{-k}]"]
    if "reduced" in header:
        names += ["V", "W"]
    return names


def load(path, fmt=None):
    """Read a file written by :func:`save`.

    Returns
    -------
    system, init, reduced, meta
        ``reduced`` is a :class:`ReducedSystem` (whose ``system`` is the
        stored model) or None.
    """
    try:
        if _is_text(path, fmt):
            with open(path) as fh:
                doc = json.load(fh)
            arrays = {name: np.array(doc["matrices"][name], dtype=float).reshape(doc["shapes"][name])
                      for name in _names(doc)}
            return _assemble(doc, arrays)
        with open(path, "rb") as fh:
            data = fh.read()
        if data[:8] != MAGIC:
            raise FileFormatError(f"{path}: not a tdsmor binary file")
        (hlen,) = struct.unpack_from("<I", data, 8)
        header = json.loads(data[12:12 + hlen].decode())
        pos = 12 + hlen
        arrays = {}
        for name in _names(header):
            rows, cols = struct.unpack_from("<II", data, pos)
            pos += 8
            nbytes = 8 * rows * cols
            if pos + nbytes > len(data):
                raise FileFormatError(f"{path}: truncated block {name}")
            arrays[name] = np.frombuffer(data, dtype="<f8", count=rows * cols,
                                         offset=pos).reshape(rows, cols).astype(float)
            pos += nbytes
        if pos != len(data):
            raise FileFormatError(f"{path}: {len(data) - pos} trailing bytes")
        return _assemble(header, arrays)
    except (KeyError, ValueError, struct.error, UnicodeDecodeError) as exc:
        raise FileFormatError(f"{path}: malformed file ({type(exc).__name__}: {exc})")
