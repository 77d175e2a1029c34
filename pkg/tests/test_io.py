import json
from pathlib import Path

import pytest

from qmarket import ParseError, PerturbationError, ValidationError
from qmarket.cli import main
from qmarket.io import COMMANDS, load_price_csv, load_run_spec, parse_run_spec, run, write_result

RUNSPECS = Path(__file__).resolve().parent.parent / "demos" / "runspecs"


def six_doc(**command):
    return {
        "traders": 2, "share_types": 1, "lambda": 0.01,
        "omega_share": [[1.0], [2.0]], "omega_cash": [0.3, 0.5],
        "coupling": [[[0.0], [0.1]], [[0.1], [0.0]]],
        "sector": {"shares": [1], "cash": 2},
        "initial": {"shares": [[0], [1]], "cash": [2, 0]},
        "trajectory": {"h": 1.0, "prices": [[1], [1]]},
        "command": command or {"name": "basis"},
    }


FINAL = {"shares": [[1], [0]], "cash": [1, 1]}


class TestRunSpec:
    def test_round_trip(self):
        spec = parse_run_spec(six_doc(name="compare", final=FINAL, orders=[1, 2]))
        again = load_run_spec(spec.canonical())
        assert again.canonical() == spec.canonical()
        assert again.digest() == spec.digest()

    def test_from_path(self):
        spec = load_run_spec(RUNSPECS / "basis_six_state.json")
        assert spec.command == "basis" and spec.sector.total_cash == 2

    def test_initial_outside_sector(self):
        doc = six_doc()
        doc["initial"]["cash"] = [3, 0]
        with pytest.raises(ValidationError, match="outside sector"):
            parse_run_spec(doc)

    def test_negative_price(self):
        doc = six_doc()
        doc["trajectory"]["prices"] = [[1], [-1]]
        with pytest.raises(ValidationError):
            parse_run_spec(doc)

    def test_asymmetric_coupling(self):
        doc = six_doc()
        doc["coupling"] = [[[0.0], [0.1]], [[0.2], [0.0]]]
        with pytest.raises(ValidationError):
            parse_run_spec(doc)

    def test_missing_field(self):
        doc = six_doc()
        del doc["sector"]
        with pytest.raises(ParseError, match="sector"):
            parse_run_spec(doc)

    def test_unknown_command(self):
        with pytest.raises(ParseError, match="command.name"):
            parse_run_spec(six_doc(name="trade"))

    def test_missing_command_parameter(self):
        with pytest.raises(ValidationError, match="final"):
            parse_run_spec(six_doc(name="transition"))

    def test_syntax_error_position(self):
        text = '{\n  "traders": 2,\n  "share_types" 1\n}'
        with pytest.raises(ParseError, match="line 3"):
            load_run_spec(text)


class TestPriceCsv:
    def test_three_rows(self, tmp_path):
        p = tmp_path / "p.csv"
        p.write_text("k,P_1,P_2\n0,1,2\n1,0,3\n2,4,4\n")
        traj = load_price_csv(p, 0.5)
        assert traj.n_intervals == 3 and traj.horizon == 1.5
        assert traj.prices.tolist() == [[1, 2], [0, 3], [4, 4]]

    def test_single_row(self, tmp_path):
        p = tmp_path / "p.csv"
        p.write_text("k,P_1\n0,2\n")
        assert load_price_csv(p, 1.0).is_constant()

    def test_fractional_price(self, tmp_path):
        p = tmp_path / "p.csv"
        p.write_text("k,P_1\n0,1\n1,1.5\n")
        with pytest.raises(ParseError, match=r"p\.csv:3"):
            load_price_csv(p, 1.0)

    @pytest.mark.parametrize("text", ["", "k,Q_1\n0,1\n", "k,P_1\n0,1,2\n", "k,P_1\n"])
    def test_malformed(self, tmp_path, text):
        p = tmp_path / "p.csv"
        p.write_text(text)
        with pytest.raises(ParseError):
            load_price_csv(p, 1.0)

    def test_shipped_file(self):
        assert load_price_csv(RUNSPECS / "prices_three_intervals.csv", 1.0).n_intervals == 3


class TestCommands:
    def test_basis(self):
        rec = run(parse_run_spec(six_doc(name="basis", dump_matrices=True)))
        assert rec.diagnostics["dimension"] == 6
        assert len(rec.tables["basis"].rows) == 6
        assert {"hamiltonian_0", "hamiltonian_1"} <= set(rec.tables)

    def test_evolve(self):
        rec = run(parse_run_spec(six_doc(name="evolve", time_grid=[0, 2, 5])))
        assert rec.diagnostics["max_norm_error"] < 1e-10
        assert len(rec.tables["amplitudes"].rows) == 5 * 6

    def test_transition(self):
        rec = run(parse_run_spec(six_doc(name="transition", final=FINAL, orders=[1, 2], t=2.0)))
        row = rec.tables["transition"].rows[0]
        cols = rec.tables["transition"].columns
        assert row[cols.index("order_1")] == pytest.approx(row[cols.index("exact")], rel=0.05)
        c2, d2 = rec.diagnostics["c2_closed_form"], rec.diagnostics["c2_dyson"]
        assert c2 == pytest.approx(d2, abs=1e-12)

    def test_first_order_same_state(self):
        spec = parse_run_spec(six_doc(name="transition", final=six_doc()["initial"], orders=[1]))
        with pytest.raises(PerturbationError):
            run(spec)

    def test_compare_columns(self):
        rec = run(load_run_spec(RUNSPECS / "compare_six_state.json"))
        cols = rec.tables["compare"].columns
        for o in (1, 2, 3):
            assert f"rel_err_{o}" in cols
        assert "validity" in cols

    def test_portfolio(self):
        rec = run(parse_run_spec(six_doc(name="portfolio", trader=0, t=1.5)))
        assert sum(r[2] for r in rec.tables["portfolio"].rows) == pytest.approx(1, abs=1e-10)

    def test_semiclassical(self):
        rec = run(load_run_spec(RUNSPECS / "semiclassical_three_traders.json"))
        assert all(abs(r[-1]) < 1e-9 for r in rec.tables["semiclassical"].rows)
        assert rec.tables["theta"].rows

    def test_every_command_has_a_runspec(self):
        names = {json.loads(p.read_text())["command"]["name"] for p in RUNSPECS.glob("*.json")}
        assert names == set(COMMANDS)


class TestCli:
    def spec_file(self, tmp_path, doc):
        p = tmp_path / "spec.json"
        p.write_text(json.dumps(doc))
        return str(p)

    def test_success(self, tmp_path):
        out = tmp_path / "out"
        assert main([str(RUNSPECS / "basis_six_state.json"), "-o", str(out)]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["tables"]["basis"] == "basis.csv"
        assert (out / "basis.csv").read_text().count("\n") == 7

    def test_invalid_input(self, tmp_path, capsys):
        doc = six_doc()
        doc["omega_cash"] = [0.3, -0.5]
        assert main([self.spec_file(tmp_path, doc), "-o", str(tmp_path / "o")]) == 1
        assert "invalid input" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main([str(tmp_path / "nope.json")]) == 1

    def test_runtime_failure(self, tmp_path):
        doc = six_doc(name="transition", final=six_doc()["initial"], orders=[1])
        assert main([self.spec_file(tmp_path, doc), "-o", str(tmp_path / "o")]) == 2

    def test_price_override(self, tmp_path):
        out = tmp_path / "o"
        args = [str(RUNSPECS / "evolve_six_state.json"), "-o", str(out),
                "--prices", str(RUNSPECS / "prices_three_intervals.csv"), "--step", "0.5"]
        assert main(args) == 0
        assert (out / "amplitudes.csv").exists()

    def test_command_override(self, tmp_path):
        out = tmp_path / "o"
        assert main([str(RUNSPECS / "compare_six_state.json"), "-o", str(out), "--command", "basis"]) == 0
        assert (out / "basis.csv").exists()

    @pytest.mark.parametrize("name", sorted(p.name for p in RUNSPECS.glob("*.json")))
    def test_deterministic(self, tmp_path, name):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main([str(RUNSPECS / name), "-o", str(a)]) == 0
        assert main([str(RUNSPECS / name), "-o", str(b)]) == 0
        files = sorted(p.name for p in a.iterdir())
        assert files == sorted(p.name for p in b.iterdir())
        for f in files:
            assert (a / f).read_bytes() == (b / f).read_bytes()


def test_write_result_layout(tmp_path):
    rec = run(parse_run_spec(six_doc()))
    path = write_result(rec, tmp_path)
    assert json.loads(path.read_text())["inputs_digest"] == rec.inputs_digest
