import numpy as np
import pytest

from epstreak.errors import ConfigurationError
from epstreak.eventfile import read_event_file, write_event_file
from epstreak.events import DetectorModel, RunConfig, simulate_stream
from epstreak.presets import heralded_source


def _stream():
    run = RunConfig(duration_s=0.02, seed=3, topology="hbt")
    det = DetectorModel()
    return simulate_stream(heralded_source(), None, det, det, None, run)


def test_roundtrip(tmp_path):
    stream = _stream()
    path = tmp_path / "events.bin"
    write_event_file(path, stream, {"seed": 3})
    back = read_event_file(path)
    assert np.array_equal(back.t_ps, stream.t_ps)
    assert np.array_equal(back.channel, stream.channel)
    assert back.duration_s == stream.duration_s
    assert back.n_channels == stream.n_channels


def test_rewrite_is_byte_identical(tmp_path):
    stream = _stream()
    p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
    write_event_file(p1, stream, {"seed": 3})
    write_event_file(p2, stream, {"seed": 3})
    assert p1.read_bytes() == p2.read_bytes()


def test_bad_magic(tmp_path):
    p = tmp_path / "junk.bin"
    p.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(ConfigurationError):
        read_event_file(p)


def test_bad_version(tmp_path):
    stream = _stream()
    p = tmp_path / "events.bin"
    write_event_file(p, stream, {})
    raw = bytearray(p.read_bytes())
    raw[4] = 99
    p.write_bytes(bytes(raw))
    with pytest.raises(ConfigurationError):
        read_event_file(p)
