import json

import numpy as np
import pytest

from optomech.errors import DataFormatError
from optomech.spectra import LAB, SpectrumTrace
from optomech.traceio import HEADER, dump_json, read_trace, sidecar_path, write_trace


def sample_trace(rng):
    f = np.sort(rng.uniform(-1e3, 1e3, 257))
    comps = {"vacuum": np.full(f.size, 0.5), "thermal": rng.exponential(1.0, f.size) / 3.0}
    md = {"peaks": [[0.0, 2.9]], "quantity": "S_x", "n": 7}
    return SpectrumTrace.from_components(f, comps, LAB, md)


def test_round_trip_is_bit_exact(tmp_path, rng):
    tr = sample_trace(rng)
    write_trace(tr, tmp_path / "t.csv")
    back = read_trace(tmp_path / "t.csv")
    assert np.array_equal(back.freq_hz, tr.freq_hz)
    assert np.array_equal(back.total, tr.total)
    assert sorted(back.components) == ["thermal", "vacuum"]
    for k, v in tr.components.items():
        assert np.array_equal(back.components[k], v)
    assert back.frame == LAB
    assert back.metadata == tr.metadata


def test_layout(tmp_path, rng):
    write_trace(sample_trace(rng), tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == ",".join(HEADER)
    assert len(lines) == 258
    assert sidecar_path(tmp_path / "t.csv").name == "t.json"


def test_without_sidecar(tmp_path, rng):
    write_trace(sample_trace(rng), tmp_path / "t.csv")
    (tmp_path / "t.json").unlink()
    back = read_trace(tmp_path / "t.csv")
    assert sorted(back.components) == ["thermal", "vacuum"]
    assert back.frame == "rotating"


def test_missing_file_names_path(tmp_path):
    with pytest.raises(DataFormatError) as info:
        read_trace(tmp_path / "absent.csv")
    assert "absent.csv" in str(info.value)


@pytest.mark.parametrize("damage", ["truncate", "header", "text", "nan"])
def test_corrupt_file_names_path(tmp_path, rng, damage):
    p = tmp_path / "t.csv"
    write_trace(sample_trace(rng), p)
    lines = p.read_text().splitlines()
    if damage == "truncate":
        lines[5] = lines[5][: len(lines[5]) // 2]
    elif damage == "header":
        lines[0] = "f,S"
    elif damage == "text":
        lines[9] = "abc," + lines[9].split(",", 1)[1]
    else:
        parts = lines[3].split(",")
        parts[1] = "nan"
        lines[3] = ",".join(parts)
    p.write_text("\n".join(lines) + "\n")
    with pytest.raises(DataFormatError) as info:
        read_trace(p)
    assert info.value.path == str(p)


def test_bad_sidecar(tmp_path, rng):
    p = tmp_path / "t.csv"
    write_trace(sample_trace(rng), p)
    (tmp_path / "t.json").write_text("{not json")
    with pytest.raises(DataFormatError, match="t.json"):
        read_trace(p)


def test_dump_json_is_deterministic(tmp_path):
    obj = {"b": np.arange(3), "a": np.float64(1.5)}
    dump_json(obj, tmp_path / "x.json")
    text = (tmp_path / "x.json").read_text()
    assert json.loads(text) == {"a": 1.5, "b": [0, 1, 2]}
    assert text.index('"a"') < text.index('"b"') and text.endswith("\n")
