import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from PIL import Image

from sarchange.errors import FormatError
from sarchange.io import (
    ManifestEntry,
    StackManifest,
    load_stack,
    read_manifest,
    read_raster,
    save_stack,
    write_manifest,
    write_png,
    write_raster,
)
from sarchange.stack import ImageStack


def test_small_raster_bytes(tmp_path):
    path = tmp_path / "r.sras"
    write_raster(path, np.array([[1.0, 2.0], [3.0, 4.0]]))
    data = path.read_bytes()
    assert data[:4] == b"SRAS"
    assert struct.unpack("<II", data[4:12]) == (2, 2)
    assert struct.unpack("<4f", data[12:]) == (1.0, 2.0, 3.0, 4.0)
    np.testing.assert_array_equal(read_raster(path), [[1, 2], [3, 4]])


@given(arrays(np.float32, st.tuples(st.integers(1, 6), st.integers(1, 6)), elements=st.floats(width=32, allow_nan=False)))
@settings(max_examples=50, deadline=None)
def test_raster_round_trip_bit_exact(tmp_path_factory, raster):
    path = tmp_path_factory.mktemp("r") / "x.sras"
    write_raster(path, raster)
    back = read_raster(path)
    assert back.shape == raster.shape and back.tobytes() == raster.astype("<f4").tobytes()


def test_raster_errors(tmp_path):
    bad = tmp_path / "bad.sras"
    bad.write_bytes(b"XXXX" + struct.pack("<II", 1, 1) + b"\0" * 4)
    with pytest.raises(FormatError, match="magic"):
        read_raster(bad)
    short = tmp_path / "short.sras"
    short.write_bytes(b"SRAS" + struct.pack("<II", 2, 2) + b"\0" * 12)
    with pytest.raises(FormatError, match="payload"):
        read_raster(short)
    tiny = tmp_path / "tiny.sras"
    tiny.write_bytes(b"SRA")
    with pytest.raises(FormatError):
        read_raster(tiny)


def test_atomic_write_leaves_no_temp_files(tmp_path):
    write_raster(tmp_path / "a.sras", np.zeros((3, 3)))
    write_raster(tmp_path / "a.sras", np.ones((3, 3)))
    assert sorted(p.name for p in tmp_path.iterdir()) == ["a.sras"]


def _manifest(tmp_path, dates=("2020-01-01", "2020-01-13"), enls=(9.0, 9.0), shape=(3, 2)):
    entries = []
    for i, (d, e) in enumerate(zip(dates, enls)):
        name = f"img{i}.sras"
        write_raster(tmp_path / name, np.full(shape, i + 1.0))
        entries.append(ManifestEntry(date=d, path=name, enl=e))
    return StackManifest(entries=tuple(entries), domain="intensity", width=shape[1], height=shape[0], root=tmp_path)


def test_manifest_round_trip(tmp_path):
    m = _manifest(tmp_path)
    write_manifest(tmp_path / "m.toml", m)
    assert read_manifest(tmp_path / "m.toml") == m


def test_manifest_errors(tmp_path):
    m = _manifest(tmp_path, dates=("2020-01-01", "2020-01-01"))
    with pytest.raises(FormatError, match="entry 1"):
        m.validate()
    m = _manifest(tmp_path, enls=(9.0, 0.0))
    with pytest.raises(FormatError, match="entry 1"):
        m.validate()
    m = _manifest(tmp_path)
    (tmp_path / "img1.sras").unlink()
    with pytest.raises(FormatError, match="entry 1.*not found"):
        m.validate()
    m = _manifest(tmp_path)
    write_raster(tmp_path / "img0.sras", np.zeros((5, 5)))
    with pytest.raises(FormatError, match="entry 0.*5x5"):
        m.validate()
    (tmp_path / "junk.toml").write_text("entries = 3 = 4")
    with pytest.raises(FormatError):
        read_manifest(tmp_path / "junk.toml")


def test_manifest_accepts_table_syntax(tmp_path):
    write_raster(tmp_path / "a.sras", np.ones((2, 2)))
    write_raster(tmp_path / "b.sras", np.ones((2, 2)))
    (tmp_path / "m.toml").write_text(
        'domain = "amplitude"\nwidth = 2\nheight = 2\n\n'
        '[[entries]]\ndate = "2021-05-01"\npath = "a.sras"\nenl = 4\n\n'
        '[[entries]]\ndate = 2021-05-13\npath = "b.sras"\nenl = 6\n'
    )
    stack = load_stack(tmp_path / "m.toml")
    assert stack.domain == "amplitude" and stack.enl == 5.0
    assert stack.timestamps[1] - stack.timestamps[0] == 12.0


def test_stack_round_trip(tmp_path):
    images = np.random.default_rng(0).gamma(4.0, 0.25, (3, 4, 5)).astype(np.float32)
    stack = ImageStack(images, 4.0)
    path = save_stack(tmp_path, stack, ["2020-01-01", "2020-01-02", "2020-01-05"])
    back = load_stack(path)
    assert back.images.astype(np.float32).tobytes() == images.tobytes()
    assert back.enl == 4.0 and back.dates == ("2020-01-01", "2020-01-02", "2020-01-05")
    np.testing.assert_array_equal(np.diff(back.timestamps), [1.0, 3.0])


def test_png(tmp_path):
    rgb = np.zeros((4, 6, 3), np.uint8)
    rgb[1, 2] = (255, 0, 0)
    write_png(tmp_path / "x.png", rgb)
    with Image.open(tmp_path / "x.png") as im:
        assert im.mode == "RGB" and im.size == (6, 4) and not im.info.get("interlace")
        np.testing.assert_array_equal(np.asarray(im), rgb)
