"""Embedding file formats and selection serialization."""

import io
import json
import struct

import numpy as np
import pytest

from conftest import W_DATA
from siftsel import (
    BadMagic,
    EmbeddingIOError,
    EmbeddingSet,
    KernelConfig,
    NonFiniteValue,
    RaggedRow,
    TruncatedPayload,
    preselect_candidates,
    read_embeddings,
    read_header,
    read_selection,
    sift_select,
    write_embeddings,
    write_selection,
)

MAGIC = b"SIFTEMB1"


def make_binary(path, count, dim, payload: bytes, version=1, magic=MAGIC):
    path.write_bytes(magic + struct.pack("<III", version, count, dim) + payload)


class TestBinaryFormat:
    def test_round_trip_preserves_float32_values(self, tmp_path):
        rng = np.random.default_rng(0)
        data = rng.standard_normal((7, 5))
        e = EmbeddingSet(data=data)
        p = tmp_path / "emb.bin"
        write_embeddings(e, p)
        back = read_embeddings(p)
        # storage is 32-bit: the round trip equals the float32 cast exactly
        np.testing.assert_array_equal(back.data, data.astype("<f4").astype(np.float64))
        assert back.ids == tuple(str(i) for i in range(7))
        assert back.data.dtype == np.float64

    def test_golden_header_bytes(self, tmp_path):
        """The on-disk header is byte-pinned: magic, then little-endian u32
        version/count/dim. This must never drift across platforms."""
        e = EmbeddingSet(data=np.asarray(W_DATA))
        p = tmp_path / "emb.bin"
        write_embeddings(e, p)
        raw = p.read_bytes()
        assert raw[:20] == MAGIC + bytes.fromhex(
            "01000000" "03000000" "02000000")
        assert len(raw) == 20 + 3 * 2 * 4

    def test_read_header(self, tmp_path):
        p = tmp_path / "emb.bin"
        make_binary(p, 2, 3, b"\x00" * 24)
        h = read_header(p)
        assert (h.magic, h.version, h.count, h.dim) == (MAGIC, 1, 2, 3)

    def test_sidecar_ids(self, tmp_path):
        e = EmbeddingSet(data=np.eye(2), ids=("alpha", "beta"))
        p, sidecar = tmp_path / "emb.bin", tmp_path / "emb.ids"
        write_embeddings(e, p, ids_path=sidecar)
        assert sidecar.read_text() == "alpha\nbeta\n"
        back = read_embeddings(p, ids_path=sidecar)
        assert back.ids == ("alpha", "beta")

    def test_sidecar_length_mismatch(self, tmp_path):
        p, sidecar = tmp_path / "emb.bin", tmp_path / "emb.ids"
        make_binary(p, 2, 2, struct.pack("<8f", *range(8))[:16])
        sidecar.write_text("only-one\n")
        with pytest.raises(EmbeddingIOError):
            read_embeddings(p, ids_path=sidecar)

    def test_wrong_magic(self, tmp_path):
        p = tmp_path / "emb.bin"
        make_binary(p, 1, 1, b"\x00" * 4, magic=b"NOTMINE1")
        with pytest.raises(BadMagic):
            read_embeddings(p)

    def test_file_shorter_than_magic(self, tmp_path):
        p = tmp_path / "emb.bin"
        p.write_bytes(b"SIF")
        with pytest.raises(BadMagic):
            read_header(p)

    def test_unsupported_version(self, tmp_path):
        p = tmp_path / "emb.bin"
        make_binary(p, 1, 1, b"\x00" * 4, version=2)
        with pytest.raises(BadMagic):
            read_embeddings(p)

    def test_truncated_header(self, tmp_path):
        p = tmp_path / "emb.bin"
        p.write_bytes(MAGIC + b"\x01\x00\x00\x00")  # 12 of 20 header bytes
        with pytest.raises(TruncatedPayload) as exc:
            read_header(p)
        assert exc.value.expected == 20
        assert exc.value.actual == 12

    def test_truncated_payload(self, tmp_path):
        p = tmp_path / "emb.bin"
        make_binary(p, 3, 2, b"\x00" * 20)  # header promises 24 bytes
        with pytest.raises(TruncatedPayload) as exc:
            read_embeddings(p)
        assert exc.value.expected == 24
        assert exc.value.actual == 20

    def test_trailing_bytes_rejected(self, tmp_path):
        p = tmp_path / "emb.bin"
        make_binary(p, 1, 2, b"\x00" * 8 + b"JUNK")
        with pytest.raises(EmbeddingIOError) as exc:
            read_embeddings(p)
        assert not isinstance(exc.value, (BadMagic, TruncatedPayload))

    def test_non_finite_value_located(self, tmp_path):
        p = tmp_path / "emb.bin"
        payload = np.array([[1.0, 2.0], [3.0, np.inf]], dtype="<f4").tobytes()
        make_binary(p, 2, 2, payload)
        with pytest.raises(NonFiniteValue) as exc:
            read_embeddings(p)
        assert (exc.value.row, exc.value.col) == (1, 1)


class TestCsvFormat:
    def test_round_trip_with_ids(self, tmp_path):
        rng = np.random.default_rng(1)
        data = rng.standard_normal((4, 3))
        e = EmbeddingSet(data=data, ids=("w", "x", "y", "z"))
        p = tmp_path / "emb.csv"
        write_embeddings(e, p, format="csv")
        text = p.read_text()
        assert text.splitlines()[0] == "id,v0,v1,v2"
        back = read_embeddings(p, format="csv")
        assert back.ids == ("w", "x", "y", "z")
        np.testing.assert_array_equal(back.data, data.astype("<f4").astype(np.float64))

    def test_round_trip_without_ids(self, tmp_path):
        e = EmbeddingSet(data=np.asarray(W_DATA))
        p = tmp_path / "emb.csv"
        write_embeddings(e, p, format="csv")
        back = read_embeddings(p, format="csv")
        assert back.ids == ("0", "1", "2")
        np.testing.assert_array_equal(
            back.data, np.asarray(W_DATA).astype("<f4").astype(np.float64))

    def test_comments_and_blank_lines_skipped(self, tmp_path):
        p = tmp_path / "emb.csv"
        p.write_text("# produced by hand\n\n1,0\n\n# middle comment\n0,1\n")
        back = read_embeddings(p, format="csv")
        np.testing.assert_array_equal(back.data, np.eye(2))

    def test_header_requires_exact_id_field(self, tmp_path):
        p = tmp_path / "emb.csv"
        p.write_text("1,0\n0,1\n")  # no header: first field is a number
        back = read_embeddings(p, format="csv")
        assert back.rows == 2 and back.ids == ("0", "1")

    def test_ragged_row_reports_index(self, tmp_path):
        p = tmp_path / "emb.csv"
        p.write_text("1,0\n0,1,5\n")
        with pytest.raises(RaggedRow) as exc:
            read_embeddings(p, format="csv")
        assert exc.value.row == 1

    def test_unparseable_value(self, tmp_path):
        p = tmp_path / "emb.csv"
        p.write_text("1,oops\n")
        with pytest.raises(EmbeddingIOError):
            read_embeddings(p, format="csv")

    def test_nan_value_rejected(self, tmp_path):
        p = tmp_path / "emb.csv"
        p.write_text("1,nan\n")
        with pytest.raises(NonFiniteValue) as exc:
            read_embeddings(p, format="csv")
        assert (exc.value.row, exc.value.col) == (0, 1)

    def test_empty_file_rejected(self, tmp_path):
        p = tmp_path / "emb.csv"
        p.write_text("# nothing here\n")
        with pytest.raises(EmbeddingIOError):
            read_embeddings(p, format="csv")

    def test_id_with_comma_cannot_be_written(self, tmp_path):
        e = EmbeddingSet(data=np.eye(2), ids=("a,b", "c"))
        with pytest.raises(EmbeddingIOError):
            write_embeddings(e, tmp_path / "emb.csv", format="csv")

    def test_unknown_format_rejected(self, tmp_path):
        e = EmbeddingSet(data=np.eye(2))
        with pytest.raises(EmbeddingIOError):
            write_embeddings(e, tmp_path / "emb.x", format="parquet")
        write_embeddings(e, tmp_path / "emb.bin")
        with pytest.raises(EmbeddingIOError):
            read_embeddings(tmp_path / "emb.bin", format="parquet")


class TestSelectionSerialization:
    def test_worked_instance_records(self, wspace, wquery, wcfg, tmp_path):
        r = sift_select(wspace, wquery, 2, wcfg)
        p = tmp_path / "sel.jsonl"
        write_selection(r, wspace.ids, p)
        lines = [json.loads(s) for s in p.read_text().splitlines()]
        assert len(lines) == 3
        assert lines[0] == {
            "rank": 1, "row": 0, "id": "0", "objective": 0.5, "sigma_sq": 0.5,
        }
        assert lines[1]["rank"] == 2 and lines[1]["row"] == 0
        summary = lines[2]
        assert summary["method"] == "sift"
        assert summary["lambda_prime"] == 1.0
        assert summary["n"] == 2
        assert summary["sigma0_sq"] == 1.0
        np.testing.assert_allclose(summary["sigma_final_sq"], 1.0 / 3.0, atol=1e-12)

    def test_read_selection_round_trip(self, wspace, wquery, wcfg, tmp_path):
        r = sift_select(wspace, wquery, 2, wcfg)
        p = tmp_path / "sel.jsonl"
        write_selection(r, wspace.ids, p)
        records, summary = read_selection(p)
        assert [rec["rank"] for rec in records] == [1, 2]
        assert summary["method"] == "sift"

    def test_source_rows_map_back_to_originals(self, wspace, wquery, wcfg):
        sub = preselect_candidates(wspace, wquery, 2)  # keeps rows 0 and 2
        r = sift_select(sub, wquery, 2, wcfg)
        buf = io.StringIO()
        write_selection(r, sub.ids, buf, source_rows=sub.source_rows)
        recs = [json.loads(s) for s in buf.getvalue().splitlines()][:-1]
        assert all(rec["row"] in (0, 2) for rec in recs)

    def test_writes_to_file_like_object(self, wspace, wquery, wcfg):
        r = sift_select(wspace, wquery, 1, wcfg)
        buf = io.StringIO()
        write_selection(r, wspace.ids, buf)
        assert len(buf.getvalue().splitlines()) == 2

    def test_read_selection_requires_summary(self, tmp_path):
        p = tmp_path / "sel.jsonl"
        p.write_text('{"rank": 1, "row": 0}\n')
        with pytest.raises(EmbeddingIOError):
            read_selection(p)
        p.write_text("")
        with pytest.raises(EmbeddingIOError):
            read_selection(p)


class TestFormatsRoundTripThroughEachOther:
    def test_binary_and_csv_agree(self, tmp_path):
        rng = np.random.default_rng(2)
        data = rng.standard_normal((5, 4))
        e = EmbeddingSet(data=data, ids=tuple("abcde"))
        pb, pc = tmp_path / "e.bin", tmp_path / "e.csv"
        write_embeddings(e, pb, format="binary")
        write_embeddings(e, pc, format="csv")
        from_bin = read_embeddings(pb)
        from_csv = read_embeddings(pc, format="csv")
        np.testing.assert_array_equal(from_bin.data, from_csv.data)
        assert from_csv.ids == e.ids
