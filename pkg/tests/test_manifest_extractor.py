import json
from fractions import Fraction

import pytest

from danger_assessment.errors import ManifestError
from danger_assessment.extractors.manifest_extractor import ManifestExtractor
from tests.conftest import make_record


def test_single_record_round_trips(write_manifest):
    record = make_record("clip-1", fps="30000/1001")
    entries = ManifestExtractor().load_manifest(write_manifest([record]))

    assert len(entries) == 1
    entry = entries[0]
    assert entry.video_id == "clip-1"
    assert entry.media_path == record["media_path"]
    assert entry.summary == record["summary"]
    assert entry.ratings == tuple(record["ratings"])
    assert (entry.segment_start_frame, entry.segment_end_frame) == (10, 250)
    assert entry.fps == Fraction(30000, 1001)
    assert entry.to_record()["fps"] == "30000/1001"


def test_rating_out_of_range_names_video(write_manifest):
    path = write_manifest([make_record("ok"), make_record("bad-clip", ratings=[5, 11])])
    with pytest.raises(ManifestError, match="rating out of range") as info:
        ManifestExtractor().load_manifest(path)
    assert "bad-clip" in str(info.value)
    assert info.value.line_number == 2
    assert info.value.video_id == "bad-clip"


def test_hundred_records_load_in_order(synthetic_manifest):
    entries = ManifestExtractor().load_manifest(synthetic_manifest)
    ids = [entry.video_id for entry in entries]
    assert len(entries) == 100
    assert len(set(ids)) == 100
    assert ids == sorted(ids)
    assert all(len(entry.ratings) == 18 for entry in entries)


def test_inverted_segment_rejected(write_manifest):
    path = write_manifest([make_record(segment_start_frame=20, segment_end_frame=5)])
    with pytest.raises(ManifestError, match="inverted segment"):
        ManifestExtractor().load_manifest(path)


def test_duplicate_video_id_rejected(write_manifest):
    path = write_manifest([make_record("same"), make_record("same")])
    with pytest.raises(ManifestError, match="duplicate video_id") as info:
        ManifestExtractor().load_manifest(path)
    assert info.value.line_number == 2


def test_malformed_line_reports_line_number(tmp_path):
    path = tmp_path / "broken.jsonl"
    path.write_text('{"video_id": "a"\n', encoding="utf-8")
    with pytest.raises(ManifestError, match="line 1: malformed record"):
        ManifestExtractor().load_manifest(path)


def test_invalid_utf8_reports_line_number(tmp_path):
    path = tmp_path / "latin1.jsonl"
    good = json.dumps(make_record("a")).encode("utf-8")
    path.write_bytes(good + b"\n" + b'{"video_id": "caf\xe9"}\n')
    with pytest.raises(ManifestError, match="line 2: invalid UTF-8") as info:
        ManifestExtractor().load_manifest(path)
    assert info.value.line_number == 2


def test_missing_keys_rejected(write_manifest):
    record = make_record()
    del record["summary"]
    with pytest.raises(ManifestError, match="missing keys"):
        ManifestExtractor().load_manifest(write_manifest([record]))


def test_non_integer_rating_is_malformed(write_manifest):
    path = write_manifest([make_record(ratings=[7, 7.5])])
    with pytest.raises(ManifestError, match="malformed record"):
        ManifestExtractor().load_manifest(path)


def test_unknown_keys_ignored_unless_strict(write_manifest):
    path = write_manifest([make_record(camera="north gate")])
    assert len(ManifestExtractor().load_manifest(path)) == 1
    with pytest.raises(ManifestError, match="unknown keys"):
        ManifestExtractor(strict=True).load_manifest(path)


def test_blank_lines_skipped(tmp_path, write_manifest):
    path = write_manifest([make_record("a"), make_record("b")])
    path.write_text(path.read_text(encoding="utf-8").replace("\n", "\n\n", 1), encoding="utf-8")
    assert [entry.video_id for entry in ManifestExtractor().load_manifest(path)] == ["a", "b"]


def test_manifest_frame_summarizes_entries(write_manifest):
    path = write_manifest([make_record("a", ratings=[6, 8]), make_record("b", segment_end_frame=10)])
    frame = ManifestExtractor.manifest_frame(ManifestExtractor().load_manifest(path))
    assert frame["video_id"].to_list() == ["a", "b"]
    assert frame["rating_mean"].to_list() == [7.0, 7.0]
    assert frame["segment_length"].to_list() == [241, 1]
