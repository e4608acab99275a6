import csv
import io
import json
import math

import numpy as np
import pytest

from randcert.cli import EXIT_CONFIG, EXIT_OK, EXIT_SOLVER, OUTPUT_DIR_ENV, compare_rows, main


def run(*argv):
    buf = io.StringIO()
    code = main(list(argv), stdout=buf)
    return code, buf.getvalue()


def csv_rows(text):
    body = [line for line in text.splitlines() if not line.startswith("#")]
    return list(csv.DictReader(body))


class TestCurve:
    def test_ns(self):
        code, out = run("curve", "--witness", "CHSH", "--model", "NS", "--range", "2", "4", "5")
        assert code == EXIT_OK
        rows = csv_rows(out)
        np.testing.assert_allclose([float(r["bits"]) for r in rows], [-math.log2(1.5 - v / 4) for v in np.linspace(2, 4, 5)], atol=1e-9)
        assert rows[1]["bits_4dp"] == f"{-math.log2(1.5 - 2.5 / 4):.4f}"

    def test_provenance(self):
        _, out = run("curve", "--witness", "Hardy", "--model", "Hardy_Convex", "--value", "0.05")
        head = [line for line in out.splitlines() if line.startswith("#")]
        keys = {line[2:].split(":")[0] for line in head}
        assert {"seed", "tolerances", "version", "numpy", "scipy", "domain"} <= keys

    def test_json(self):
        code, out = run("curve", "--witness", "CL", "--model", "CL_Convex", "--value", "0.05", "--format", "json")
        doc = json.loads(out)
        assert code == EXIT_OK and doc["schema"] == "1"
        assert doc["rows"][0]["bits"] > 0

    def test_sdp(self):
        code, out = run("curve", "--witness", "Hardy", "--level", "L0", "--value", "0.0902")
        assert code == EXIT_OK
        assert float(csv_rows(out)[0]["bits"]) == pytest.approx(0.136379, abs=1e-6)

    def test_infeasible_exit(self):
        code, out = run("curve", "--witness", "Hardy", "--level", "L1ab", "--value", "0.0902")
        assert code == EXIT_SOLVER
        assert csv_rows(out)[0]["status"] == "Infeasible"


class TestErrors:
    def test_domain(self):
        assert run("curve", "--witness", "CHSH", "--model", "Q_Case2_Fixed", "--value", "1.9")[0] == EXIT_CONFIG

    def test_unknown_witness(self):
        assert run("curve", "--witness", "Bell", "--model", "NS")[0] == EXIT_CONFIG

    def test_bad_flag(self):
        assert run("curve", "--nope")[0] == EXIT_CONFIG

    def test_eval_angles(self):
        assert run("eval", "--alpha", "0.5", "--angles", "0", "0")[0] == EXIT_CONFIG

    def test_scan_chsh(self):
        assert run("scan", "--witness", "CHSH")[0] == EXIT_CONFIG


class TestOtherCommands:
    def test_vertices(self):
        code, out = run("vertices")
        rows = csv_rows(out)
        assert code == EXIT_OK and len(rows) == 24
        assert float(rows[0]["CHSH"]) == pytest.approx(4.0)

    def test_eval(self):
        r = 1 / math.sqrt(2)
        # x-z plane: Alice at 0 and pi/2, Bob at +pi/4 and -pi/4
        angles = ["0", f"{math.pi / 2}", f"{math.pi / 4}", f"{math.pi / 4}", "0", "0", "0", f"{math.pi}"]
        code, out = run("eval", "--alpha", f"{r}", "--angles", *angles, "--format", "json")
        doc = json.loads(out)
        assert code == EXIT_OK
        assert abs(doc["rows"][0]["CHSH"]) == pytest.approx(2 * math.sqrt(2), abs=1e-9)

    def test_compare_rows(self):
        rows = compare_rows([2.2], "L1")
        assert rows[0]["status"] == "ok"
        assert rows[0]["p"] == pytest.approx(0.05)
        assert rows[0]["bits_chsh"] > 0

    def test_output_dir(self, tmp_path, monkeypatch):
        monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path))
        code, out = run("vertices", "--format", "json")
        assert code == EXIT_OK and out == ""
        assert json.loads((tmp_path / "vertices.json").read_text())["schema"] == "1"

    def test_out_flag(self, tmp_path):
        target = tmp_path / "sub" / "c.csv"
        run("curve", "--model", "NS", "--value", "3", "--out", str(target))
        assert target.exists()

    def test_verify_subset(self):
        code, out = run("verify", "--criteria", "2", "5")
        doc = json.loads(out)
        assert code == EXIT_OK and doc["passed"]
        assert [c["criterion"] for c in doc["criteria"]] == [2, 5]
