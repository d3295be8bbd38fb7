"""Serialization round trips and byte determinism."""

import numpy as np
import pytest

from cheegerlab import (
    CellSet,
    Grid,
    MaskIOError,
    ScalarField,
    load_field_text,
    load_mask_pgm,
    load_mask_text,
    save_field_text,
    save_mask_pgm,
    save_mask_text,
    write_csv,
)


def _random_mask(rng, ny=7, nx=5):
    return rng.random((ny, nx)) < 0.5


def test_pgm_roundtrip_both_formats(tmp_path):
    rng = np.random.default_rng(0)
    grid = Grid(5, 7, 1.0)
    for trial in range(10):
        mask = _random_mask(rng)
        cells = CellSet(grid, mask)
        plain = tmp_path / f"plain_{trial}.pgm"
        raw = tmp_path / f"raw_{trial}.pgm"
        save_mask_pgm(cells, plain)
        save_mask_pgm(cells, raw, binary=True)
        assert np.array_equal(load_mask_pgm(plain), mask)
        assert np.array_equal(load_mask_pgm(raw), mask)
    assert plain.read_text().startswith("P2\n5 7\n255")
    assert raw.read_bytes().startswith(b"P5\n5 7\n255\n")


def test_pgm_orientation(tmp_path):
    # top file row is the top grid row (j = ny - 1)
    grid = Grid(2, 2, 1.0)
    mask = np.zeros((2, 2), bool)
    mask[1, 0] = True  # top-left grid cell
    path = tmp_path / "m.pgm"
    save_mask_pgm(CellSet(grid, mask), path)
    body = path.read_text().splitlines()
    assert body[3] == "255 0"  # first sample row = top
    assert body[4] == "0 0"
    assert np.array_equal(load_mask_pgm(path), mask)


def test_pgm_comments_and_errors(tmp_path):
    p = tmp_path / "c.pgm"
    p.write_text("P2\n# a comment\n2 2\n# another\n255\n255 0\n0 255\n")
    got = load_mask_pgm(p)
    assert got.sum() == 2
    for bad in (
        "P3\n2 2\n255\n0 0 0 0\n",
        "P2\n2 2\n255\n255 0 0\n",
        "P2\n2\n",
        "P2\n2 2\n255\nporridge 0 0 0\n",
    ):
        p.write_text(bad)
        with pytest.raises(MaskIOError):
            load_mask_pgm(p)
    p.write_bytes(b"P5\n2 2\n255\n\x00\x01")  # body too short
    with pytest.raises(MaskIOError):
        load_mask_pgm(p)


def test_text_mask_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    grid = Grid(5, 7, 1.0)
    mask = _random_mask(rng)
    path = tmp_path / "m.txt"
    save_mask_text(CellSet(grid, mask), path)
    assert np.array_equal(load_mask_text(path), mask)
    path.write_text("101\n10\n")
    with pytest.raises(MaskIOError):
        load_mask_text(path)
    path.write_text("102\n100\n")
    with pytest.raises(MaskIOError):
        load_mask_text(path)
    path.write_text("\n\n")
    with pytest.raises(MaskIOError):
        load_mask_text(path)


def test_field_text_roundtrip_is_exact(tmp_path):
    rng = np.random.default_rng(2)
    grid = Grid(6, 4, 0.25)
    field = ScalarField(grid, rng.uniform(0.1, 3.0, size=(4, 6)))
    path = tmp_path / "f.txt"
    save_field_text(field, path)
    got = load_field_text(path)
    assert np.array_equal(got, field.values)  # repr round-trips doubles exactly
    save_field_text(field.values, path)
    assert np.array_equal(load_field_text(path), field.values)
    path.write_text("1.0 2.0\nbad 4.0\n")
    with pytest.raises(MaskIOError):
        load_field_text(path)
    path.write_text("1.0 2.0\n3.0\n")
    with pytest.raises(MaskIOError):
        load_field_text(path)
    path.write_text("")
    with pytest.raises(MaskIOError):
        load_field_text(path)


def test_write_csv_bytes(tmp_path):
    path = tmp_path / "t.csv"
    rows = [[0, 0.1, "label", True], [1, 2.5, "x", False]]
    write_csv(path, ["i", "v", "name", "flag"], rows)
    expected = "i,v,name,flag\n0,0.1,label,True\n1,2.5,x,False\n"
    assert path.read_text() == expected
    again = tmp_path / "t2.csv"
    write_csv(again, ["i", "v", "name", "flag"], rows)
    assert again.read_bytes() == path.read_bytes()
