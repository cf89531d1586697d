import dataclasses
import struct
import tracemalloc

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rlskit import bigarray
from rlskit.bigarray import BigArray, MemoryBudget
from rlskit.errors import (BudgetError, ChunkError, CorruptionError, FormatError,
                           ShapeError, StateError, VersionError)

GOLDEN_3X2 = (b"GBA1" + (1).to_bytes(4, "little") + (3).to_bytes(8, "little")
              + (2).to_bytes(8, "little") + (2).to_bytes(8, "little")
              + struct.pack("<6d", 1, 2, 3, 4, 5, 6))

BIG = MemoryBudget(10_000)


def golden_bytes(tmp_path):
    path = tmp_path / "golden.gba"
    bigarray.from_array(path, [[1, 2], [3, 4], [5, 6]], chunk_rows=2)
    return path.read_bytes()


class TestFormat:
    def test_golden_file(self, tmp_path):
        data = golden_bytes(tmp_path)
        assert len(data) == 80
        assert data == GOLDEN_3X2

    def test_open_reads_header(self, tmp_path):
        (tmp_path / "g.gba").write_bytes(GOLDEN_3X2)
        ba = bigarray.ba_open(tmp_path / "g.gba")
        assert (ba.rows, ba.cols, ba.chunk_rows, ba.n_chunks) == (3, 2, 2, 2)
        assert ba.read_chunk(1).tolist() == [[5.0, 6.0]]
        assert ba.to_numpy().tolist() == [[1, 2], [3, 4], [5, 6]]

    def test_create_is_zero_filled(self, tmp_path):
        ba = bigarray.ba_create(tmp_path / "z.gba", 4, 3, 3)
        assert (tmp_path / "z.gba").stat().st_size == 32 + 96
        assert np.all(ba.to_numpy() == 0)

    def test_truncated(self, tmp_path):
        (tmp_path / "t.gba").write_bytes(GOLDEN_3X2[:-8])
        with pytest.raises(CorruptionError):
            bigarray.ba_open(tmp_path / "t.gba")
        (tmp_path / "h.gba").write_bytes(GOLDEN_3X2[:20])
        with pytest.raises(CorruptionError):
            bigarray.ba_open(tmp_path / "h.gba")

    def test_bad_magic_and_version(self, tmp_path):
        (tmp_path / "m.gba").write_bytes(b"NOPE" + GOLDEN_3X2[4:])
        with pytest.raises(FormatError):
            bigarray.ba_open(tmp_path / "m.gba")
        (tmp_path / "v.gba").write_bytes(GOLDEN_3X2[:4] + (2).to_bytes(4, "little")
                                         + GOLDEN_3X2[8:])
        with pytest.raises(VersionError):
            bigarray.ba_open(tmp_path / "v.gba")

    @pytest.mark.parametrize("dims", [(0, 2, 1), (2, 0, 1), (2, 2, 0)])
    def test_bad_dims(self, tmp_path, dims):
        with pytest.raises(FormatError):
            bigarray.ba_create(tmp_path / "x.gba", *dims)

    def test_chunk_rows_larger_than_rows(self, tmp_path):
        ba = bigarray.from_array(tmp_path / "x.gba", np.ones((3, 2)), chunk_rows=100)
        assert ba.n_chunks == 1 and ba.chunk_bounds(0) == (0, 3)

    def test_write_checks(self, tmp_path):
        ba = bigarray.ba_create(tmp_path / "w.gba", 3, 2, 2)
        with pytest.raises(ShapeError):
            ba.write_chunk(1, np.ones((2, 2)))
        with pytest.raises(IndexError):
            ba.write_chunk(2, np.ones((1, 2)))
        with pytest.raises(StateError):
            bigarray.ba_open(tmp_path / "w.gba").write_chunk(0, np.ones((2, 2)))

    def test_chunk_view_is_read_only(self, tmp_path):
        ba = bigarray.from_array(tmp_path / "x.gba", np.ones((3, 2)), chunk_rows=2)
        with pytest.raises(ValueError):
            ba.chunk_view(0)[0, 0] = 5

    @settings(max_examples=20)
    @given(rows=st.integers(1, 40), cols=st.integers(1, 6), chunk=st.integers(1, 50),
           seed=st.integers(0, 1000))
    def test_round_trip(self, tmp_path_factory, rows, cols, chunk, seed):
        a = np.random.default_rng(seed).normal(size=(rows, cols))
        path = tmp_path_factory.mktemp("rt") / "a.gba"
        bigarray.from_array(path, a, chunk)
        assert np.array_equal(bigarray.ba_open(path).to_numpy(), a)


def ooc_case(tmp_path, rng, n, d, t, chunk):
    x, y = rng.normal(size=(n, d)), rng.normal(size=(n, t))
    xb = bigarray.from_array(tmp_path / f"x{n}_{chunk}.gba", x, chunk)
    yb = bigarray.from_array(tmp_path / f"y{n}_{chunk}.gba", y, chunk)
    return x, y, xb, yb


def ooc_errors(tmp_path, rng, n, d, chunk):
    """Max-abs error of the three out-of-core products against in-core ones."""
    x, y, xb, yb = ooc_case(tmp_path, rng, n, d, 3, chunk)
    b = rng.normal(size=(d, 5))
    out = bigarray.ba_create(tmp_path / f"o{n}_{chunk}.gba", n, 5, chunk)
    bigarray.ooc_matmul(xb, b, out, workers=2)
    return (np.max(np.abs(bigarray.ooc_gram(xb, BIG) - x.T @ x)),
            np.max(np.abs(bigarray.ooc_xty(xb, yb, BIG) - x.T @ y)),
            np.max(np.abs(bigarray.ba_open(out.path).to_numpy() - x @ b)))


class TestOutOfCore:
    @pytest.mark.parametrize("chunk", [1, 7, 97, 10_000])
    def test_matches_in_core(self, tmp_path, rng, chunk):
        assert max(ooc_errors(tmp_path, rng, 300, 12, chunk)) <= 1e-10

    def test_gram_is_symmetric(self, tmp_path, rng):
        _, _, xb, _ = ooc_case(tmp_path, rng, 50, 6, 1, 7)
        g = bigarray.ooc_gram(xb, BIG)
        assert np.array_equal(g, g.T)

    def test_budget(self, tmp_path, rng):
        _, _, xb, yb = ooc_case(tmp_path, rng, 10, 6, 1, 3)
        with pytest.raises(BudgetError):
            bigarray.ooc_gram(xb, MemoryBudget(5))
        with pytest.raises(BudgetError):
            bigarray.ooc_xty(xb, yb, MemoryBudget(5))

    def test_misaligned_chunks(self, tmp_path, rng):
        x, y = rng.normal(size=(10, 2)), rng.normal(size=(10, 1))
        xb = bigarray.from_array(tmp_path / "x.gba", x, 3)
        yb = bigarray.from_array(tmp_path / "y.gba", y, 4)
        with pytest.raises(ShapeError):
            bigarray.ooc_xty(xb, yb, BIG)

    def test_gram_memory_stays_small(self, tmp_path, rng):
        x = rng.normal(size=(20_000, 16))  # 2.5 MB on disk
        xb = bigarray.from_array(tmp_path / "big.gba", x, 500)
        del x
        tracemalloc.start()
        bigarray.ooc_gram(xb, BIG)
        _, peak = tracemalloc.get_traced_memory()
        tracemalloc.stop()
        assert peak < 256 * 1024

    def test_workers_bitwise_identical(self, tmp_path, rng):
        a = rng.normal(size=(503, 17))
        b = rng.normal(size=(17, 9))
        ab = bigarray.from_array(tmp_path / "a.gba", a, 13)
        results = []
        for w in (1, 2, 8):
            out = bigarray.ba_create(tmp_path / f"o{w}.gba", 503, 9, 13)
            bigarray.ooc_matmul(ab, b, out, workers=w)
            results.append((tmp_path / f"o{w}.gba").read_bytes())
        assert results[0] == results[1] == results[2]

    def test_failed_chunk_leaves_output_untouched(self, tmp_path, rng):
        @dataclasses.dataclass(frozen=True)
        class Flaky(BigArray):
            def chunk_view(self, index):
                if index == 3:
                    raise OSError("disk went away")
                return super().chunk_view(index)

        a = rng.normal(size=(40, 4))
        ab = bigarray.from_array(tmp_path / "a.gba", a, 5)
        flaky = Flaky(ab.path, ab.rows, ab.cols, ab.chunk_rows)
        out = bigarray.from_array(tmp_path / "o.gba", np.full((40, 2), 7.0), 5)
        before = (tmp_path / "o.gba").read_bytes()
        with pytest.raises(ChunkError) as info:
            bigarray.ooc_matmul(flaky, rng.normal(size=(4, 2)), out, workers=2)
        assert info.value.chunk_index == 3
        assert (tmp_path / "o.gba").read_bytes() == before
        assert not (tmp_path / "o.gba.partial").exists()

    def test_matmul_shape_checks(self, tmp_path, rng):
        ab = bigarray.from_array(tmp_path / "a.gba", rng.normal(size=(6, 3)), 2)
        out = bigarray.ba_create(tmp_path / "o.gba", 6, 2, 2)
        with pytest.raises(ShapeError):
            bigarray.ooc_matmul(ab, np.ones((4, 2)), out)
        with pytest.raises(ShapeError):
            bigarray.ooc_matmul(ab, np.ones((3, 2)), bigarray.ba_create(tmp_path / "p.gba",
                                                                        6, 2, 3))


class TestSmallExamples:
    def test_create_open_round_trip(self, tmp_path):
        bigarray.ba_create(tmp_path / "a.gba", 3, 2, 2)
        assert (tmp_path / "a.gba").stat().st_size == 32 + 48
        ba = bigarray.ba_open(tmp_path / "a.gba")
        assert (ba.rows, ba.cols, ba.chunk_rows) == (3, 2, 2)

    def test_chunk_write_read_bitwise(self, tmp_path, rng):
        ba = bigarray.ba_create(tmp_path / "a.gba", 10, 3, 4)
        m = rng.normal(size=(4, 3))
        ba.write_chunk(1, m)
        assert ba.read_chunk(1).tobytes() == m.tobytes()

    def test_last_short_chunk(self, tmp_path):
        ba = bigarray.ba_create(tmp_path / "a.gba", 10, 3, 4)
        assert ba.n_chunks == 3 and ba.read_chunk(2).shape == (2, 3)

    def test_gram_of_identity(self, tmp_path):
        xb = bigarray.from_array(tmp_path / "i.gba", np.eye(5), 2)
        assert np.array_equal(bigarray.ooc_gram(xb, BIG), np.eye(5))

    def test_gram_1000x8(self, tmp_path, rng):
        x = rng.normal(size=(1000, 8))
        xb = bigarray.from_array(tmp_path / "x.gba", x, 37)
        np.testing.assert_allclose(bigarray.ooc_gram(xb, BIG), x.T @ x, rtol=0, atol=1e-10)

    def test_single_chunk_gram_bitwise(self, tmp_path, rng):
        from rlskit import numeric
        x = rng.normal(size=(50, 6))
        xb = bigarray.from_array(tmp_path / "x.gba", x, 50)
        assert np.array_equal(bigarray.ooc_gram(xb, BIG), numeric.gram(x))

    def test_xty_consistency_and_zero(self, tmp_path, rng):
        x = rng.normal(size=(500, 6))
        xb = bigarray.from_array(tmp_path / "x.gba", x, 33)
        yb = bigarray.from_array(tmp_path / "y.gba", x[:, :1], 33)
        np.testing.assert_allclose(bigarray.ooc_xty(xb, yb, BIG)[:, 0],
                                   bigarray.ooc_gram(xb, BIG)[:, 0], rtol=0, atol=1e-10)
        zb = bigarray.from_array(tmp_path / "z.gba", np.zeros((500, 3)), 33)
        assert np.all(bigarray.ooc_xty(xb, zb, BIG) == 0)
        y = rng.normal(size=(500, 3))
        yb = bigarray.from_array(tmp_path / "y3.gba", y, 33)
        np.testing.assert_allclose(bigarray.ooc_xty(xb, yb, BIG), x.T @ y, rtol=0, atol=1e-10)

    def test_matmul_identity_and_oracle(self, tmp_path, rng):
        a = rng.normal(size=(2000, 16))
        ab = bigarray.from_array(tmp_path / "a.gba", a, 128)
        out = bigarray.ba_create(tmp_path / "o.gba", 2000, 16, 128)
        bigarray.ooc_matmul(ab, np.eye(16), out)
        assert np.array_equal(bigarray.ba_open(out.path).to_numpy(), a)
        b = rng.normal(size=(16, 4))
        res = []
        for w in (1, 8):
            out = bigarray.ba_create(tmp_path / f"o{w}.gba", 2000, 4, 128)
            bigarray.ooc_matmul(ab, b, out, workers=w)
            res.append(bigarray.ba_open(out.path).to_numpy())
        assert res[0].tobytes() == res[1].tobytes()
        np.testing.assert_allclose(res[0], a @ b, rtol=0, atol=1e-12)
