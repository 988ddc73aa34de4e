"""fusion-extract command line behavior.

Success paths pay real model construction inside the subprocess, so the
readable-corpus checks share one invocation.
"""

import json

import pytest

from fusion_extractor import lock_path_for, read_feature_file

from cardlib import run_extract, save_blank_card, save_card, write_manifest


@pytest.fixture(scope="module")
def extract_run(tmp_path_factory):
    """One CLI run over two caption cards, one blank card, one missing file."""
    tmp = tmp_path_factory.mktemp("cli-corpus")
    save_card(tmp / "a.png", "HELLO MEME")
    save_card(tmp / "b.png", "WHEN THE TESTS PASS")
    save_blank_card(tmp / "c.png")
    manifest = write_manifest(tmp / "manifest.jsonl", [
        {"id": "a", "path": "a.png", "label": 1},
        {"id": "b", "path": "b.png", "label": 1},
        {"id": "c", "path": "c.png", "label": 0},
        {"id": "ghost", "path": "missing.png", "label": 0},
    ])
    out = tmp / "corpus.fusb"
    proc = run_extract("--manifest", manifest, "--out", out)
    return proc, out


class TestSuccessRun:
    def test_exit_zero(self, extract_run):
        proc, _ = extract_run
        assert proc.returncode == 0, proc.stderr

    def test_summary_json_on_stdout(self, extract_run):
        proc, out = extract_run
        summary = json.loads(proc.stdout)
        assert summary["total"] == 4
        assert summary["written"] == 3
        assert summary["class_counts"] == {"0": 1, "1": 2}
        assert [s["id"] for s in summary["skipped"]] == ["ghost"]
        assert set(summary["models"]) == {"ocr", "text_encoder", "image_encoder"}
        assert summary["out_path"] == str(out)

    def test_skip_logged_to_stderr(self, extract_run):
        proc, _ = extract_run
        assert "ghost" in proc.stderr
        assert "skipping" in proc.stderr

    def test_output_file_and_lock_written(self, extract_run):
        _, out = extract_run
        records = read_feature_file(out)
        assert [r.id for r in records] == ["a", "b", "c"]
        lock = json.loads(lock_path_for(out).read_text())
        assert lock["models"]["ocr"] in ("glyph-template", "tesseract")


class TestFailureModes:
    def test_no_arguments_is_usage_error(self):
        proc = run_extract()
        assert proc.returncode == 1
        assert "usage error" in proc.stderr

    def test_unknown_flag_is_usage_error(self):
        proc = run_extract("--manifest", "m", "--out", "o", "--fast")
        assert proc.returncode == 1

    def test_non_positive_jobs_is_usage_error(self, tmp_path):
        manifest = write_manifest(tmp_path / "m.jsonl",
                                  [{"id": "a", "path": "p.png", "label": 0}])
        proc = run_extract("--manifest", manifest, "--out",
                           tmp_path / "o.fusb", "--jobs", "0")
        assert proc.returncode == 1

    def test_missing_manifest_is_data_error(self, tmp_path):
        proc = run_extract("--manifest", tmp_path / "absent.jsonl",
                           "--out", tmp_path / "o.fusb")
        assert proc.returncode == 2
        assert "error" in proc.stderr

    def test_malformed_manifest_is_data_error(self, tmp_path):
        manifest = tmp_path / "m.jsonl"
        manifest.write_text('{"id": "a"}\n')
        proc = run_extract("--manifest", manifest, "--out", tmp_path / "o.fusb")
        assert proc.returncode == 2
        assert "exactly the keys" in proc.stderr

    def test_all_rows_failing_is_data_error(self, tmp_path):
        manifest = write_manifest(tmp_path / "m.jsonl",
                                  [{"id": "a", "path": "gone.png", "label": 0}])
        proc = run_extract("--manifest", manifest, "--out", tmp_path / "o.fusb")
        assert proc.returncode == 2
        assert "all 1" in proc.stderr
