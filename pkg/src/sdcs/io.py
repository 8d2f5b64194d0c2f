"""File formats: matrices, quantized streams, 1-bit codewords and decode records.

Matrix CSV
    ``# sdcs-matrix <m> <N> <dist> <seed>`` followed by one comma-separated
    line per row.
Matrix binary container (little-endian)
    ``b"SDCSMAT1"``, then ``uint32 m, uint32 N, uint32 dist_code, uint32 0,
    uint64 seed``, then ``m*N`` float64 values in row-major order.  Vectors
    use the same container with ``N = 1`` and ``dist_code = 255``.
Stream CSV
    ``# sdcs-stream r=<r> rule=<rule> L=<L> delta=<delta> gamma=<gamma> seed=<seed>``,
    the column line ``index,y,q,u`` and one line per sample.
Bitstring
    One bit per sample, MSB first, 1 for the positive element; the final
    byte is zero padded.

Floats are written with ``repr`` so a write/read round trip is exact.
"""

from __future__ import annotations

import io
import json
import struct

import numpy as np

from .measure import Distribution, MeasurementEnsemble
from .quantize import MidriseAlphabet, QuantizedStream, QuantizerSpec

MAGIC = b"SDCSMAT1"
_HEADER = struct.Struct("<8sIIIIQ")
_DIST_CODES = {Distribution.GAUSSIAN: 0, Distribution.BERNOULLI: 1}
_VECTOR_CODE = 255


class FormatError(ValueError):
    pass


def _fmt(v):
    return repr(float(v))


def _open(target, mode):
    if isinstance(target, (str, bytes)) or hasattr(target, "__fspath__"):
        return open(target, mode), True
    return target, False


# matrices -----------------------------------------------------------------

def write_matrix_csv(ens: MeasurementEnsemble, target):
    fh, own = _open(target, "w")
    try:
        m, N = ens.matrix.shape
        fh.write(f"# sdcs-matrix {m} {N} {Distribution.parse(ens.distribution).value} {ens.seed}\n")
        for row in ens.matrix:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    finally:
        if own:
            fh.close()


def read_matrix_csv(source) -> MeasurementEnsemble:
    fh, own = _open(source, "r")
    try:
        head = fh.readline().split()
        if len(head) != 6 or head[:2] != ["#", "sdcs-matrix"]:
            raise FormatError("missing '# sdcs-matrix m N dist seed' header")
        m, N, dist, seed = int(head[2]), int(head[3]), Distribution.parse(head[4]), int(head[5])
        rows = [line for line in fh.read().splitlines() if line.strip()]
    finally:
        if own:
            fh.close()
    if len(rows) != m:
        raise FormatError(f"header promises {m} rows, found {len(rows)}")
    A = np.array([[float(v) for v in line.split(",")] for line in rows])
    if A.shape != (m, N):
        raise FormatError(f"expected a {m}x{N} matrix, parsed {A.shape}")
    return MeasurementEnsemble(A, dist, seed)


def _write_container(target, arr, code, seed):
    arr = np.ascontiguousarray(arr, dtype="<f8")
    m, N = arr.shape
    fh, own = _open(target, "wb")
    try:
        fh.write(_HEADER.pack(MAGIC, m, N, code, 0, int(seed)))
        fh.write(arr.tobytes())
    finally:
        if own:
            fh.close()


def _read_container(source):
    fh, own = _open(source, "rb")
    try:
        raw = fh.read()
    finally:
        if own:
            fh.close()
    if len(raw) < _HEADER.size:
        raise FormatError("file too short for an sdcs container")
    magic, m, N, code, _, seed = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError("bad magic; not an sdcs container")
    body = raw[_HEADER.size:]
    if len(body) != 8 * m * N:
        raise FormatError(f"payload has {len(body)} bytes, expected {8 * m * N}")
    return np.frombuffer(body, dtype="<f8").reshape(m, N).astype(float), code, seed


def write_matrix_bin(ens: MeasurementEnsemble, target):
    _write_container(target, ens.matrix, _DIST_CODES[Distribution.parse(ens.distribution)], ens.seed)


def read_matrix_bin(source) -> MeasurementEnsemble:
    A, code, seed = _read_container(source)
    dists = {v: k for k, v in _DIST_CODES.items()}
    if code not in dists:
        raise FormatError(f"container holds a vector or unknown distribution code {code}")
    return MeasurementEnsemble(A, dists[code], seed)


def write_vector_bin(x, target, seed=0):
    x = np.asarray(x, dtype=float).reshape(-1, 1)
    _write_container(target, x, _VECTOR_CODE, seed)


def read_vector_bin(source):
    A, code, _ = _read_container(source)
    if code != _VECTOR_CODE or A.shape[1] != 1:
        raise FormatError("container does not hold a vector")
    return A[:, 0].copy()


def read_vector_text(source):
    """Whitespace/comma separated numbers, '#' comments allowed."""
    fh, own = _open(source, "r")
    try:
        text = fh.read()
    finally:
        if own:
            fh.close()
    vals = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].replace(",", " ")
        vals.extend(float(tok) for tok in line.split())
    return np.array(vals)


# streams ------------------------------------------------------------------

def write_stream_csv(y, stream: QuantizedStream, spec: QuantizerSpec, target, seed=0):
    fh, own = _open(target, "w")
    try:
        a = spec.alphabet
        fh.write(f"# sdcs-stream r={spec.r} rule={spec.rule.value} L={a.L} delta={_fmt(a.delta)} "
                 f"gamma={_fmt(spec.gamma if spec.gamma is not None else np.inf)} seed={seed}\n")
        fh.write("index,y,q,u\n")
        for i, (yi, qi, ui) in enumerate(zip(y, stream.q, stream.u)):
            fh.write(f"{i},{_fmt(yi)},{_fmt(qi)},{_fmt(ui)}\n")
    finally:
        if own:
            fh.close()


def read_stream_csv(source):
    """Returns (meta dict, y, q, u)."""
    fh, own = _open(source, "r")
    try:
        head = fh.readline().split()
        if len(head) < 2 or head[:2] != ["#", "sdcs-stream"]:
            raise FormatError("missing '# sdcs-stream' header")
        meta = dict(tok.split("=", 1) for tok in head[2:])
        if fh.readline().strip() != "index,y,q,u":
            raise FormatError("expected column line 'index,y,q,u'")
        rows = [line.split(",") for line in fh.read().splitlines() if line.strip()]
    finally:
        if own:
            fh.close()
    meta = {"r": int(meta["r"]), "rule": meta["rule"], "L": int(meta["L"]),
            "delta": float(meta["delta"]), "gamma": float(meta["gamma"]), "seed": int(meta["seed"])}
    arr = np.array([[float(v) for v in row[1:]] for row in rows]).reshape(-1, 3)
    return meta, arr[:, 0].copy(), arr[:, 1].copy(), arr[:, 2].copy()


def pack_bits(q, alphabet: MidriseAlphabet) -> bytes:
    if alphabet.L != 1:
        raise ValueError("bit packing needs a two-element alphabet")
    q = np.asarray(q, dtype=float)
    if not np.all(np.isclose(np.abs(q), alphabet.top)):
        raise ValueError("codeword has entries outside the alphabet")
    return np.packbits(q > 0, bitorder="big").tobytes()


def unpack_bits(data: bytes, m: int, alphabet: MidriseAlphabet):
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8), bitorder="big")
    if bits.size < m:
        raise FormatError(f"bitstring holds {bits.size} bits, need {m}")
    return np.where(bits[:m] == 1, alphabet.top, -alphabet.top).astype(float)


# records ------------------------------------------------------------------

def write_jsonl(records, target):
    fh, own = _open(target, "w")
    try:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=False, allow_nan=True) + "\n")
    finally:
        if own:
            fh.close()


def read_jsonl(source):
    fh, own = _open(source, "r")
    try:
        return [json.loads(line) for line in fh if line.strip()]
    finally:
        if own:
            fh.close()


def to_text(writer, *args, **kw):
    """Run a text writer into a string (handy for stdout and tests)."""
    buf = io.StringIO()
    writer(*args, buf, **kw)
    return buf.getvalue()
