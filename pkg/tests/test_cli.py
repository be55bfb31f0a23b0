import json
import subprocess
import sys

import pytest

from spdzgen.cli import EXIT_PROTOCOL, EXIT_USAGE, EXIT_VALIDATION, main
from spdzgen.gwas import GenotypeMatrix, orthonormal_columns, synth_genotypes
from spdzgen.modmath import GroupParams


def run_cli(*argv):
    return main(list(argv))


class TestGroupgen:
    def test_reproducible(self, tmp_path):
        out1, out2 = tmp_path / "g1.json", tmp_path / "g2.json"
        assert run_cli("groupgen", "--bits", "32", "--seed", "s", "--out", str(out1)) == 0
        assert run_cli("groupgen", "--bits", "32", "--seed", "s", "--out", str(out2)) == 0
        assert out1.read_text() == out2.read_text()
        GroupParams.from_json(out1.read_text())

    def test_invalid_bits_usage_error(self, tmp_path):
        assert run_cli("groupgen", "--bits", "3",
                       "--out", str(tmp_path / "g.json")) == EXIT_USAGE

    def test_256_bit_generation_desk_scale(self, tmp_path):
        import time

        t0 = time.perf_counter()
        assert run_cli("groupgen", "--bits", "256", "--seed", "fresh",
                       "--out", str(tmp_path / "g.json")) == 0
        assert time.perf_counter() - t0 < 60.0
        params = GroupParams.from_json((tmp_path / "g.json").read_text())
        assert params.p.bit_length() == 256


class TestTriples:
    def test_single_smoke(self, tmp_path, capsys):
        ledger = tmp_path / "ledger.jsonl"
        assert run_cli("triples", "-n", "1", "--ledger", str(ledger)) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["triples"] == 1
        assert report["invalid"] == 0
        assert report["modexp_per_triple"] > 0
        assert len(ledger.read_text().splitlines()) == 1

    def test_two_randomness_mode(self, capsys):
        assert run_cli("triples", "-n", "2", "--mode", "two") == 0
        report = json.loads(capsys.readouterr().out)
        assert report["invalid"] == 0 and report["mode"] == "two"

    def test_reuse_demo_exits_nonzero(self, capsys):
        assert run_cli("triples", "-n", "1", "--demo-reuse") == EXIT_PROTOCOL


class TestSynth:
    def test_writes_matrix(self, tmp_path):
        out = tmp_path / "m.csv"
        assert run_cli("synth", "--samples", "10", "--snps", "4",
                       "--freq", "0.5", "--seed", "z", "--out", str(out)) == 0
        m = GenotypeMatrix.from_csv(out)
        assert m.samples == 10 and m.snps == 4
        assert m == synth_genotypes(10, 4, 0.5, "z")

    def test_bad_frequency(self, tmp_path):
        assert run_cli("synth", "--samples", "2", "--snps", "2", "--freq", "1.5",
                       "--out", str(tmp_path / "m.csv")) == EXIT_VALIDATION


@pytest.fixture
def pipeline_files(tmp_path):
    span_rows = [(0, 1, 2, 0, 1, 0), (2, 0, 1, 1, 0, 1)]
    ctrl_rows = span_rows + [(2, 2, 0, 1, 0, 2), (0, 0, 1, 2, 2, 2)]
    case = synth_genotypes(30, 6, 0.5, seed="case")
    case_csv = tmp_path / "case.csv"
    case.to_csv(case_csv)
    basis_csv = tmp_path / "basis.csv"
    orthonormal_columns(span_rows).to_csv(basis_csv)
    ctrl_csv = tmp_path / "ctrl.csv"
    GenotypeMatrix(entries=tuple(ctrl_rows)).to_csv(ctrl_csv)
    return case_csv, basis_csv, ctrl_csv


class TestRun:
    def test_secure_run_report(self, pipeline_files, tmp_path):
        case_csv, basis_csv, ctrl_csv = pipeline_files
        out = tmp_path / "report.json"
        code = run_cli("run", "--case", str(case_csv), "--basis", str(basis_csv),
                       "--controls", str(ctrl_csv), "--out", str(out), "--seed", "7")
        assert code == 0
        report = json.loads(out.read_text())
        assert report["accepted"] == ["ctrl_000", "ctrl_001"]
        assert report["config"]["tau"] == 0.3
        assert report["config"]["lambda_max"] == 0.05
        assert report["triple_count"] > 0
        assert set(report["lambda"]) == {"num", "den", "value"}

    def test_plaintext_oracle_matches_decisions(self, pipeline_files, tmp_path):
        case_csv, basis_csv, ctrl_csv = pipeline_files
        secure_out = tmp_path / "secure.json"
        plain_out = tmp_path / "plain.json"
        run_cli("run", "--case", str(case_csv), "--basis", str(basis_csv),
                "--controls", str(ctrl_csv), "--out", str(secure_out), "--seed", "7")
        run_cli("run", "--case", str(case_csv), "--basis", str(basis_csv),
                "--controls", str(ctrl_csv), "--out", str(plain_out),
                "--plaintext-oracle")
        secure = json.loads(secure_out.read_text())
        plain = json.loads(plain_out.read_text())
        assert secure["accepted"] == plain["accepted"]
        assert secure["lambda"]["num"] == plain["lambda"]["num"]
        assert secure["lambda"]["den"] == plain["lambda"]["den"]

    def test_reproducible_up_to_timing(self, pipeline_files, tmp_path):
        case_csv, basis_csv, ctrl_csv = pipeline_files
        outs = []
        for name in ("r1.json", "r2.json"):
            out = tmp_path / name
            run_cli("run", "--case", str(case_csv), "--basis", str(basis_csv),
                    "--controls", str(ctrl_csv), "--out", str(out), "--seed", "42")
            doc = json.loads(out.read_text())
            doc.pop("runtime_ms")
            outs.append(json.dumps(doc, sort_keys=True))
        assert outs[0] == outs[1]

    def test_transcript_export(self, pipeline_files, tmp_path):
        case_csv, basis_csv, ctrl_csv = pipeline_files
        transcript = tmp_path / "transcript.jsonl"
        run_cli("run", "--case", str(case_csv), "--basis", str(basis_csv),
                "--controls", str(ctrl_csv), "--out", str(tmp_path / "r.json"),
                "--seed", "1", "--transcript-out", str(transcript))
        lines = transcript.read_text().splitlines()
        assert len(lines) > 100
        assert all(json.loads(line)["kind"] in ("msg", "note") for line in lines[:50])

    def test_missing_input_is_validation_error(self, tmp_path):
        assert run_cli("run", "--case", "nope.csv", "--basis", "nope.csv",
                       "--controls", "nope.csv") == EXIT_VALIDATION

    def test_config_file_overridden_by_flags(self, pipeline_files, tmp_path):
        case_csv, basis_csv, ctrl_csv = pipeline_files
        config = tmp_path / "cfg.json"
        config.write_text(json.dumps({"tau": "0.5", "seed": 3}))
        out = tmp_path / "r.json"
        run_cli("run", "--config", str(config), "--case", str(case_csv),
                "--basis", str(basis_csv), "--controls", str(ctrl_csv),
                "--out", str(out), "--tau", "0.25")
        assert json.loads(out.read_text())["config"]["tau"] == 0.25


def test_console_entry_point(tmp_path):
    out = tmp_path / "g.json"
    proc = subprocess.run([sys.executable, "-m", "spdzgen", "groupgen", "--bits", "16",
                           "--seed", "e", "--out", str(out)], capture_output=True)
    assert proc.returncode == 0
    assert out.exists()
