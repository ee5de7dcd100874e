from __future__ import annotations

import json

import numpy as np
import pytest
from conftest import reduced

from effkernel.gridio import (
    csv_text,
    load_system,
    pgm_bytes,
    read_csv,
    read_grid,
    save_system,
    sha256_file,
    write_csv,
    write_grid,
    write_manifest,
)
from effkernel.reduction import build_effective_system
from effkernel.simulate import Field


def test_grid_round_trip(tmp_path):
    f = Field(np.random.default_rng(0).normal(size=(2, 16, 8)), 0.25, 3.5)
    p = write_grid(tmp_path / "a.grid", f)
    g = read_grid(p)
    np.testing.assert_array_equal(g.values, f.values)
    assert (g.spacing, g.time, g.shape) == (0.25, 3.5, (16, 8))


def test_grid_header_layout(tmp_path):
    p = write_grid(tmp_path / "b.grid", Field.scalar(np.arange(4.0), 0.5))
    raw = p.read_bytes()
    assert raw[:8] == b"EKGRID1\0"
    assert len(raw) == 8 + 8 + 8 + 24 + 4 * 8
    assert np.frombuffer(raw[-32:], "<f8").tolist() == [0.0, 1.0, 2.0, 3.0]


def test_grid_rejects_corruption(tmp_path):
    p = write_grid(tmp_path / "c.grid", Field.scalar(np.zeros(8), 1.0))
    p.write_bytes(p.read_bytes()[:-8])
    with pytest.raises(ValueError, match="payload"):
        read_grid(p)
    p.write_bytes(b"nonsense")
    with pytest.raises(ValueError):
        read_grid(p)


def test_csv_round_trip(tmp_path):
    cols = np.column_stack([np.linspace(0, 1, 5), np.exp(np.linspace(0, 1, 5))])
    p = write_csv(tmp_path / "t.csv", ["s", "v"], cols)
    header, back = read_csv(p)
    assert header == ["s", "v"]
    np.testing.assert_array_equal(back, cols)
    assert csv_text(["a"], [1.0, 2.0]) == "a\n1.0\n2.0\n"


def test_pgm():
    img = np.array([[0.0, 1.0], [2.0, 4.0]])
    data = pgm_bytes(img)
    assert data.startswith(b"P5\n2 2\n255\n")
    assert list(data[-4:]) == [0, 64, 128, 255]
    assert list(pgm_bytes(np.ones((2, 2)))[-4:]) == [0, 0, 0, 0]


def test_manifest_and_hash(tmp_path):
    p = write_manifest(tmp_path / "m.json", {"b": np.float64(1.5), "a": np.arange(2)})
    assert json.loads(p.read_text()) == {"a": [0, 1], "b": 1.5}
    assert len(sha256_file(p)) == 64
    assert not list(tmp_path.glob(".*"))  # no temporary files left behind


def test_system_round_trip(tmp_path):
    _, sp = reduced("proneural_salt_pepper", 2)
    sys_ = build_effective_system(sp, 16, 0.5, profiles=False)
    save_system(tmp_path / "sys", sys_)
    back = load_system(tmp_path / "sys")
    assert (back.kind, back.dimension, back.n, back.spacing, back.l_identity) == ("pair", 2, 16, 0.5, 1.0)
    assert back.lambda_h == sys_.lambda_h and back.cutoff == sys_.cutoff
    for k in sys_.kernels:
        np.testing.assert_array_equal(back.kernels[k], sys_.kernels[k])
