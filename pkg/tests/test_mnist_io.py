import gzip
import struct

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from memstdp.mnist import IDXFormatError, load_mnist, read_idx, read_pgm, write_idx, write_pgm


def test_idx_round_trip_plain_and_gzip(tmp_path):
    a = np.arange(2 * 28 * 28, dtype=np.uint8).reshape(2, 28, 28)
    for name in ("x.idx", "x.idx.gz"):
        write_idx(tmp_path / name, a)
        np.testing.assert_array_equal(read_idx(tmp_path / name), a)
    raw = gzip.open(tmp_path / "x.idx.gz").read()
    assert struct.unpack(">I", raw[:4])[0] == 0x00000803
    write_idx(tmp_path / "y.idx", np.zeros(5, np.uint8))
    assert struct.unpack(">I", (tmp_path / "y.idx").read_bytes()[:4])[0] == 0x00000801


def test_idx_errors(tmp_path):
    with pytest.raises(FileNotFoundError, match="nope.idx"):
        read_idx(tmp_path / "nope.idx")
    (tmp_path / "bad").write_bytes(b"\x00\x00\x0d\x01" + bytes(8))    # float dtype code
    with pytest.raises(IDXFormatError):
        read_idx(tmp_path / "bad")
    (tmp_path / "short").write_bytes(struct.pack(">HBBI", 0, 8, 1, 10) + bytes(3))
    with pytest.raises(IDXFormatError):
        read_idx(tmp_path / "short")


def test_load_mnist_checks_pairing(tmp_path):
    write_idx(tmp_path / "i", np.zeros((3, 28, 28), np.uint8))
    write_idx(tmp_path / "l", np.zeros(2, np.uint8))
    with pytest.raises(IDXFormatError):
        load_mnist(tmp_path / "i", tmp_path / "l")
    write_idx(tmp_path / "l", np.arange(3, dtype=np.uint8))
    x, y = load_mnist(tmp_path / "i", tmp_path / "l", limit=2)
    assert x.shape == (2, 28, 28) and list(y) == [0, 1]


@given(arrays(np.uint8, (7, 5)))
def test_pgm_round_trip(tmp_path_factory, img):
    path = tmp_path_factory.mktemp("pgm") / "a.pgm"
    write_pgm(path, img)
    back = read_pgm(path)
    assert back.shape == (7, 5)
    if img.max() > img.min():
        expect = (img.astype(float) - img.min()) / (img.max() - img.min())
        np.testing.assert_allclose(back, np.rint(expect * 255) / 255)


def test_pgm_comment_and_wrong_magic(tmp_path):
    (tmp_path / "c.pgm").write_bytes(b"P5\n# made by hand\n2 1\n255\n\x00\xff")
    np.testing.assert_array_equal(read_pgm(tmp_path / "c.pgm"), [[0.0, 1.0]])
    (tmp_path / "p2.pgm").write_bytes(b"P2\n1 1\n255\n0\n")
    with pytest.raises(ValueError):
        read_pgm(tmp_path / "p2.pgm")
