import json
import subprocess
import sys

import pytest

from streamf2.cli import main
from streamf2.instances import read_design
from streamf2.report import RunReport
from streamf2.streams import read_setpair, write_stream


def run(argv, tmp_path, name="out.jsonl"):
    out = tmp_path / name
    code = main(argv + ["--out", str(out)])
    return code, (RunReport.load(out) if code == 0 and out.exists() else None)


def strip_created(text):
    lines = text.splitlines()
    head = json.loads(lines[0])
    head.pop("created")
    return [json.dumps(head, sort_keys=True)] + lines[1:]


class TestEstimateF2:
    def test_generator_mean_near_truth(self, tmp_path):
        code, rep = run(["estimate-f2", "--n", "10000", "--eps", "0.05", "--trials", "100"], tmp_path)
        assert code == 0 and rep.params["m"] == 80400
        assert rep.rows[0]["truth"] == 10**4
        assert abs(rep.aggregates["mean"] - 10**4) <= 0.05 * 10**4

    def test_trials_zero(self, tmp_path, capsys):
        assert main(["estimate-f2", "--trials", "0", "--n", "10"]) == 2
        assert "trials" in capsys.readouterr().err

    def test_single_repeated_element_exact(self, tmp_path):
        path = tmp_path / "s.txt"
        write_stream(path, [7] * 500, 100)
        code, rep = run(["estimate-f2", "--in", str(path), "--trials", "20", "--eps", "0.3"], tmp_path)
        assert code == 0
        assert all(r["estimate"] == pytest.approx(250000, rel=1e-12) for r in rep.rows)

    def test_missing_file(self, tmp_path):
        assert main(["estimate-f2", "--in", str(tmp_path / "none.txt")]) == 1


class TestHistogram:
    def test_three_pass_oracle(self, tmp_path):
        code, rep = run(["histogram", "--mode", "3pass", "--n", "4096", "--trials", "2"], tmp_path)
        assert code == 0 and all(r["ok"] and r["passes"] == 3 for r in rep.rows)
        assert rep.rows[0]["digest"] == rep.rows[0]["oracle_digest"]
        assert rep.rows[0]["bits_by_category"]["fingerprints"] > 0

    def test_two_pass_enum_cap_row(self, tmp_path):
        code, rep = run(["histogram", "--mode", "2pass", "--n", "64", "--enum-cap", "10"], tmp_path)
        assert code == 0
        row = rep.rows[0]
        assert row["aborted"] and row["error"] == "EnumerationCapExceeded"
        assert rep.aggregates["failure_rate"] == 1.0

    def test_two_pass_toy(self, tmp_path):
        code, rep = run(["histogram", "--mode", "2pass", "--n", "6", "--universe", "8",
                         "--sparsity", "2"], tmp_path)
        assert code == 0 and rep.rows[0]["ok"] and rep.rows[0]["passes"] == 2

    def test_rpass_r2_at_2_16(self, tmp_path):
        code, rep = run(["histogram", "--mode", "rpass", "--r", "2", "--n", "65536"], tmp_path)
        assert code == 0 and rep.rows[0]["passes"] == 5 and rep.rows[0]["ok"]

    def test_abort_is_a_row(self, tmp_path):
        code, rep = run(["histogram", "--n", "512", "--fp-width", "1", "--abort-frac", "0.001"],
                        tmp_path)
        assert code == 0 and rep.rows[0]["aborted"] and rep.rows[0]["error"] == "Aborted"

    def test_jobs_give_identical_rows(self, tmp_path):
        a = tmp_path / "a.jsonl"
        b = tmp_path / "b.jsonl"
        assert main(["histogram", "--n", "1024", "--trials", "3", "--out", str(a)]) == 0
        assert main(["histogram", "--n", "1024", "--trials", "3", "--jobs", "2", "--out", str(b)]) == 0
        assert strip_created(a.read_text()) == strip_created(b.read_text())

    def test_binary_input(self, tmp_path):
        path = tmp_path / "s.bin"
        assert main(["gen", "stream", "--n", "2000", "--dup-rate", "0.5", "--binary",
                     "--out", str(path)]) == 0
        code, rep = run(["histogram", "--in", str(path)], tmp_path)
        assert code == 0 and rep.rows[0]["ok"] and rep.params["n"] is None


class TestProtocol:
    def test_alg1_on_ghd_instance(self, tmp_path):
        inst = tmp_path / "g.txt"
        assert main(["gen", "ghd", "--x", "1111", "--y", "0000", "--n", "8", "--out", str(inst)]) == 0
        A, B, universe = read_setpair(inst)
        assert set(A) & set(B) == set() and universe == 16
        code, rep = run(["protocol", "alg1", "--in", str(inst), "--eps", "0.5"], tmp_path)
        assert code == 0
        assert rep.rows[0]["truth"] == 0 and rep.rows[0]["n"] == 8

    def test_unknown_protocol(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(["protocol", "alg9"])
        assert info.value.code == 2

    def test_deterministic(self, tmp_path):
        a = tmp_path / "a.jsonl"
        b = tmp_path / "b.jsonl"
        for path in (a, b):
            assert main(["protocol", "alg3", "--n", "2000", "--eps", "0.2", "--trials", "1",
                         "--seed", "9", "--out", str(path)]) == 0
        assert strip_created(a.read_text()) == strip_created(b.read_text())

    @pytest.mark.parametrize("name", ["alg1", "alg2", "alg3", "f2red"])
    def test_rows_carry_ledger(self, tmp_path, name):
        code, rep = run(["protocol", name, "--n", "1000", "--eps", "0.3", "--trials", "3"], tmp_path)
        assert code == 0 and len(rep.rows) == 3
        assert all(r["bits"] > 0 for r in rep.rows)
        assert all(r["one_way"] == (name != "alg2") for r in rep.rows)

    def test_csv_export(self, tmp_path):
        csv_path = tmp_path / "r.csv"
        code, _ = run(["protocol", "alg1", "--n", "500", "--eps", "0.3", "--trials", "2",
                       "--csv", str(csv_path)], tmp_path)
        assert code == 0 and csv_path.read_text().startswith("aborted,")


class TestGen:
    def test_empty_stream(self, tmp_path):
        path = tmp_path / "e.txt"
        assert main(["gen", "stream", "--n", "0", "--out", str(path)]) == 0
        assert path.read_text() == "streamv1 n=0 universe=1\n"
        code, rep = run(["histogram", "--in", str(path)], tmp_path)
        assert code == 0 and rep.rows[0]["ok"]

    def test_design(self, tmp_path):
        path = tmp_path / "d.txt"
        assert main(["gen", "design", "--n", "256", "--block-size", "8", "--target", "4",
                     "--out", str(path)]) == 0
        fam = read_design(path)
        assert len(fam) == 4 and fam.check()

    def test_design_budget_exhausted(self, tmp_path, capsys):
        path = tmp_path / "d.txt"
        assert main(["gen", "design", "--n", "1024", "--block-size", "32", "--target", "4",
                     "--cap", "3", "--out", str(path)]) == 1
        assert "feasible cap is 49" in capsys.readouterr().err

    def test_ghd_needs_strings(self):
        with pytest.raises(SystemExit):
            main(["gen", "ghd", "--n", "8", "--out", "x"])

    def test_gen_needs_out(self):
        assert main(["gen", "stream", "--n", "5"]) == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "streamf2", "protocol", "f2red", "--n", "200",
                           "--eps", "0.3"], capture_output=True, text=True, check=True)
    head = json.loads(proc.stdout.splitlines()[0])
    assert head["kind"] == "summary" and head["algorithm"] == "f2red"
