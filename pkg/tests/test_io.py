import io

import numpy as np
import pytest

from sdcs.io import (FormatError, pack_bits, read_jsonl, read_matrix_bin, read_matrix_csv,
                     read_stream_csv, read_vector_bin, read_vector_text, to_text, unpack_bits,
                     write_jsonl, write_matrix_bin, write_matrix_csv, write_stream_csv,
                     write_vector_bin)
from sdcs.measure import gen_matrix
from sdcs.quantize import ONE_BIT, QuantizerSpec, sigma_delta


@pytest.mark.parametrize("dist", ["gaussian", "bernoulli"])
def test_matrix_csv_round_trip(tmp_path, dist):
    ens = gen_matrix(dist, 7, 5, 42)
    write_matrix_csv(ens, tmp_path / "a.csv")
    back = read_matrix_csv(tmp_path / "a.csv")
    assert back.matrix.tobytes() == ens.matrix.tobytes()
    assert back.distribution == ens.distribution and back.seed == 42


def test_matrix_bin_round_trip_and_layout(tmp_path):
    ens = gen_matrix("gaussian", 3, 4, 7)
    write_matrix_bin(ens, tmp_path / "a.bin")
    raw = (tmp_path / "a.bin").read_bytes()
    assert raw[:8] == b"SDCSMAT1" and len(raw) == 32 + 8 * 12
    assert np.frombuffer(raw[32:], "<f8")[1] == ens.matrix[0, 1]
    back = read_matrix_bin(tmp_path / "a.bin")
    assert np.array_equal(back.matrix, ens.matrix) and back.seed == 7


def test_bad_files(tmp_path):
    (tmp_path / "bad.bin").write_bytes(b"NOTMAGIC" + bytes(24))
    with pytest.raises(FormatError):
        read_matrix_bin(tmp_path / "bad.bin")
    (tmp_path / "bad.csv").write_text("# sdcs-matrix 2 2 gaussian 0\n1,2\n")
    with pytest.raises(FormatError):
        read_matrix_csv(tmp_path / "bad.csv")


def test_vector_formats(tmp_path):
    v = np.random.default_rng(0).standard_normal(9)
    write_vector_bin(v, tmp_path / "v.bin")
    assert np.array_equal(read_vector_bin(tmp_path / "v.bin"), v)
    with pytest.raises(FormatError):
        write_matrix_bin(gen_matrix("gaussian", 2, 2, 0), tmp_path / "m.bin")
        read_vector_bin(tmp_path / "m.bin")
    txt = io.StringIO("# comment\n1, 2.5\n-3 # tail\n")
    assert np.array_equal(read_vector_text(txt), [1, 2.5, -3])


def test_stream_round_trip():
    y = np.random.default_rng(1).uniform(-0.5, 0.5, 20)
    spec = QuantizerSpec.greedy(2, 0.1, 0.6)
    s = sigma_delta(spec, y)
    text = to_text(write_stream_csv, y, s, spec, seed=5)
    assert text.splitlines()[1] == "index,y,q,u"
    meta, y2, q2, u2 = read_stream_csv(io.StringIO(text))
    assert meta == {"r": 2, "rule": "greedy", "L": spec.alphabet.L, "delta": 0.1,
                    "gamma": 0.05, "seed": 5}
    assert np.array_equal(y2, y) and np.array_equal(q2, s.q) and np.array_equal(u2, s.u)


def test_bit_packing():
    q = np.array([1, -1, 1, 1, -1, -1, -1, -1, 1], dtype=float)
    data = pack_bits(q, ONE_BIT)
    assert data == bytes([0b10110000, 0b10000000])
    assert np.array_equal(unpack_bits(data, 9, ONE_BIT), q)
    with pytest.raises(FormatError):
        unpack_bits(data, 17, ONE_BIT)
    with pytest.raises(ValueError):
        pack_bits(np.array([0.5]), ONE_BIT)


def test_jsonl(tmp_path):
    recs = [{"m": 1, "x": 0.5}, {"m": 2, "x": float("nan")}]
    write_jsonl(recs, tmp_path / "r.jsonl")
    back = read_jsonl(tmp_path / "r.jsonl")
    assert back[0] == recs[0] and np.isnan(back[1]["x"])
