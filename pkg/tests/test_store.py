"""Verification, dedup, symmetry tags, table export and persistence."""

import numpy as np
import pytest

from ksefix.spectral import (GridSpec, dft2, idft2, leading_coefficients,
                             read_spectral)
from ksefix.store import (FixedPointStore, StoreError, classify_symmetry,
                          fingerprint_distance, verify)
from ksefix.tasks import random_initial_state
from ksefix.dynamics import cached_tables

GRID = GridSpec()
N = GRID.n


def roll_state(spec, dx=0, dy=0):
    """Cyclic translation in physical space."""
    return dft2(np.roll(np.roll(idft2(spec), dx, axis=0), dy, axis=1))


class TestVerify:
    def test_zero_field_admitted(self):
        assert verify(np.zeros((N, N), complex), GRID) == 0.0

    def test_equilibrium_verified(self, equilibrium):
        assert verify(equilibrium, GRID) < 1e-10

    def test_turbulent_state_rejected(self):
        tables = cached_tables(GRID, 0.05)
        state = random_initial_state(GRID, tables, np.random.default_rng(0))
        residual = verify(state.spec, GRID)
        assert 0.05 < residual < 1.5


class TestDedup:
    def test_translated_copy_is_duplicate(self, equilibrium):
        store = FixedPointStore(GRID)
        record, status = store.admit(equilibrium)
        assert status == "new"
        twin, status = store.admit(roll_state(equilibrium, dx=3))
        assert status == "duplicate"
        assert twin is record

    def test_scaled_copy_is_distinct_fingerprint(self, equilibrium):
        # 0.1% magnitude change exceeds the 1e-6 relative tolerance
        assert fingerprint_distance(equilibrium, 1.001 * equilibrium) > 1e-4

    def test_empty_store_always_new(self, equilibrium):
        store = FixedPointStore(GRID)
        assert store.dedup(equilibrium) is None

    def test_translation_quotient_many_shifts(self, equilibrium):
        store = FixedPointStore(GRID)
        store.admit(equilibrium)
        rng = np.random.default_rng(1)
        for _ in range(16):
            dx, dy = rng.integers(0, N, size=2)
            shifted = roll_state(equilibrium, dx=int(dx), dy=int(dy))
            rec, status = store.admit(shifted)
            assert status == "duplicate"

    def test_zero_duplicates_zero(self):
        store = FixedPointStore(GRID)
        store.admit(np.zeros((N, N), complex))
        _, status = store.admit(np.zeros((N, N), complex))
        assert status == "duplicate"


class TestClassifySymmetry:
    def test_cos_x_reflections(self):
        x = np.arange(N) * GRID.dx
        spec = dft2(np.cos(2 * np.pi * x / GRID.side)[:, None]
                    * np.ones((1, N)))
        sym = classify_symmetry(spec)
        assert sym["x_reflection"]       # even about x = 0
        assert sym["y_reflection"]       # y-independent
        assert not sym["diagonal"]       # swap turns cos(x) into cos(y)

    def test_zero_field_all_flags(self):
        sym = classify_symmetry(np.zeros((N, N), complex))
        assert all(sym.values())

    def test_generic_field_no_flags(self):
        x = np.arange(N) * GRID.dx
        xx, yy = np.meshgrid(x, x, indexing="ij")
        k1 = 2 * np.pi / GRID.side
        f = (np.cos(k1 * xx + 0.3) + 0.5 * np.cos(2 * k1 * yy + 0.7)
             + 0.3 * np.cos(k1 * (xx + 3 * yy) + 1.1))
        sym = classify_symmetry(dft2(f))
        assert not any(sym.values())

    def test_diagonal_symmetric_field(self):
        x = np.arange(N) * GRID.dx
        xx, yy = np.meshgrid(x, x, indexing="ij")
        k1 = 2 * np.pi / GRID.side
        f = np.cos(k1 * xx) + np.cos(k1 * yy)  # invariant under swap
        assert classify_symmetry(dft2(f))["diagonal"]

    def test_translated_reflection_detected(self):
        # even about x = 7 * dx rather than x = 0
        x = np.arange(N) * GRID.dx
        f = np.cos(2 * np.pi * (x - 7 * GRID.dx) / GRID.side)[:, None] \
            * np.ones((1, N))
        assert classify_symmetry(dft2(f))["x_reflection"]


class TestPersistence:
    def test_save_load_bit_identical(self, tmp_path, equilibrium):
        store = FixedPointStore(GRID)
        store.admit(np.zeros((N, N), complex), provenance={"method": "jfnk",
                                                           "seed": 1,
                                                           "episode": 0,
                                                           "newton_iterations": 0})
        store.admit(equilibrium, provenance={"method": "drl+jfnk", "seed": 2,
                                             "episode": 5,
                                             "newton_iterations": 14})
        store.save(tmp_path / "store")
        back = FixedPointStore.load(tmp_path / "store")
        assert len(back) == 2
        for a, b in zip(store.records, back.records):
            assert np.array_equal(a.spec, b.spec)
            assert a.symmetry == b.symmetry
        m1 = (tmp_path / "store" / "manifest.txt").read_text()
        store.save(tmp_path / "store2")
        assert (tmp_path / "store2" / "manifest.txt").read_text() == m1

    def test_missing_field_file(self, tmp_path, equilibrium):
        store = FixedPointStore(GRID)
        store.admit(equilibrium)
        store.save(tmp_path / "store")
        (tmp_path / "store" / "E1.kse2").unlink()
        with pytest.raises(StoreError, match="E1"):
            FixedPointStore.load(tmp_path / "store")

    def test_tampered_field_detected(self, tmp_path, equilibrium):
        store = FixedPointStore(GRID)
        store.admit(equilibrium)
        store.save(tmp_path / "store")
        path = tmp_path / "store" / "E1.kse2"
        spec, grid = read_spectral(path)
        spec[0, 2] = 0.0  # zero the dominant coefficient
        from ksefix.spectral import write_spectral
        write_spectral(path, spec, grid)
        with pytest.raises(StoreError, match="E1"):
            FixedPointStore.load(tmp_path / "store")

    def test_leading_match_manifest(self, tmp_path, equilibrium):
        store = FixedPointStore(GRID)
        store.admit(equilibrium)
        store.save(tmp_path / "store")
        back = FixedPointStore.load(tmp_path / "store")
        assert np.max(np.abs(back.records[0].leading
                             - leading_coefficients(equilibrium))) < 1e-9


class TestExportTable:
    def test_zero_record_row(self, tmp_path):
        store = FixedPointStore(GRID)
        store.admit(np.zeros((N, N), complex))
        out = tmp_path / "table.csv"
        store.export_table(out)
        lines = out.read_text().splitlines()
        assert lines[0].startswith("id,e01,e11,e10,e20")
        assert lines[1].startswith("E1,0.0,0.0,0.0")

    def test_sorted_and_extended_columns(self, tmp_path, equilibrium):
        store = FixedPointStore(GRID)
        store.admit(equilibrium)           # leading three all zero
        store.admit(np.zeros((N, N), complex))
        out = tmp_path / "table.csv"
        store.export_table(out)
        lines = out.read_text().splitlines()
        # both records tie on (e01, e11, e10) = 0, so both carry the
        # extended columns that tell them apart
        assert len(lines) == 3
        for line in lines[1:]:
            cells = line.split(",")
            assert len(cells) == 11
            assert all(c != "" for c in cells)
        # ascending by the first three magnitudes
        first = [tuple(float(c) for c in line.split(",")[1:4])
                 for line in lines[1:]]
        assert first == sorted(first)

    def test_round_trip_rounding(self, tmp_path, equilibrium):
        store = FixedPointStore(GRID)
        store.admit(equilibrium)
        out = tmp_path / "table.csv"
        store.export_table(out)
        line = out.read_text().splitlines()[1]
        cells = line.split(",")[1:]
        values = [float(c) for c in cells if c != ""]
        lead = leading_coefficients(equilibrium)
        assert values[:3] == [round(v, 1) for v in lead[:3]]


class TestExportPgm:
    def test_header_and_size(self, tmp_path, equilibrium):
        store = FixedPointStore(GRID)
        rec, _ = store.admit(equilibrium)
        out = tmp_path / "e1.pgm"
        store.export_pgm(rec, out)
        raw = out.read_bytes()
        assert raw.startswith(b"P5\n64 64\n255\n")
        assert len(raw) == len(b"P5\n64 64\n255\n") + 64 * 64

    def test_tiled_doubles_dimensions(self, tmp_path, equilibrium):
        store = FixedPointStore(GRID)
        rec, _ = store.admit(equilibrium)
        out = tmp_path / "e1_tiled.pgm"
        store.export_pgm(rec, out, tile=True)
        assert out.read_bytes().startswith(b"P5\n128 128\n255\n")
