"""The liepair command: model ingestion, exit codes and report documents."""
import io
import json

import pytest

from lib.cli import main, parse_model, parse_model_text, run, serialize_model
from lib.directory_manager import DirectoryManager, sanitize_filename
from lib.errors import ModelFileError, ModelValidationError
from lib.progress_tracker import ProgressTracker
from lib.tools.commands import RunOptions, execute_command

from .conftest import BUNDLED


def invoke(*argv, reports=None):
    out = io.StringIO()
    code = main(list(argv), stdout=out, reports=reports)
    return code, out.getvalue()


def write_model(tmp_path, data, name="model.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


DIM2 = {"n": 0, "r": 1, "rprime": 1, "rho": [[], []], "c": [[1, 2, 2, "1"], [2, 1, 2, "-1"]]}


class TestModelFiles:
    def test_bundled_names_resolve(self):
        assert parse_model("sl2-borel").r == 2

    def test_unnamed_model_takes_the_file_stem(self, tmp_path):
        model = parse_model(write_model(tmp_path, DIM2, "my-pair.json"))
        assert model.name == "my-pair"

    def test_unknown_symbol_is_located(self):
        text = json.dumps({"n": 0, "r": 1, "rprime": 1, "rho": [[], []], "c": [[1, 2, 2, "x0"]]})
        with pytest.raises(ModelFileError) as info:
            parse_model_text(text)
        assert info.value.location == "c[0][3]"
        assert "x0" in str(info.value)

    def test_missing_key(self):
        with pytest.raises(ModelFileError) as info:
            parse_model_text('{"n": 0}')
        assert info.value.location == "r"

    @pytest.mark.parametrize("data, location", [
        ({"n": 0, "r": 1, "rprime": 1, "rho": [[]]}, "rho"),
        ({"n": 1, "r": 1, "rprime": 0, "rho": [[1.5]]}, "rho[0][0]"),
        ({"n": 0, "r": 1, "rprime": 1, "rho": [[], []], "c": [[1, 3, 2, "1"]]}, "c[0][1]"),
        ({"n": -1, "r": 1, "rprime": 1, "rho": [[], []]}, "n"),
    ])
    def test_structure_errors(self, data, location):
        with pytest.raises(ModelFileError) as info:
            parse_model_text(json.dumps(data))
        assert info.value.location == location

    def test_axioms_are_enforced_on_request(self):
        broken = dict(DIM2, c=[[1, 2, 2, "1"]])
        assert parse_model_text(json.dumps(broken), check=False).c
        with pytest.raises(ModelValidationError):
            parse_model_text(json.dumps(broken))

    @pytest.mark.parametrize("name", BUNDLED)
    def test_serialize_round_trip(self, models, name):
        assert parse_model_text(serialize_model(models[name])) == models[name]


class TestExitCodes:
    def test_compare_passes(self):
        code, out = invoke("compare", "abelian", "--json", "--quiet")
        assert code == 0
        report = json.loads(out)
        assert report['status'] == 'pass'
        assert report['records'][0]['check'] == "compare[default]/pi12-At-equals-at"
        assert report['records'][0]['witness'] == "residual 0"
        assert report['records'][0]['timing'] is None

    def test_cohomology_skips_on_a_chart(self):
        code, out = invoke("cohomology", "foliation-chart", "--json", "--quiet")
        assert code == 0
        report = json.loads(out)
        assert report['summary'] == {'pass': 0, 'fail': 0, 'skipped': 1}
        assert "point case only" in report['records'][0]['witness']

    def test_todd_on_the_borel_pair(self):
        code, out = invoke("todd", "sl2-borel", "--json", "--quiet")
        report = json.loads(out)
        assert code == 0, [r for r in report['records'] if r['status'] == 'fail']
        checks = {r['check'] for r in report['records']}
        assert {"todd-cocycle/pair-todd-1", "todd-cocycle/dgla-todd-1"} <= checks

    def test_cohomology_euler_records(self):
        code, out = invoke("cohomology", "dim2-nonabelian", "--json", "--quiet")
        assert code == 0
        statuses = {r['check']: r['status'] for r in json.loads(out)['records']}
        assert statuses["cohomology/euler[B]"] == "pass"
        assert statuses["cohomology/euler[dual-B-End-B]"] == "pass"

    def test_canonical_inclusion_is_reported(self):
        _, out = invoke("check", "gl1-action", "--json", "--quiet")
        instances = [r for r in json.loads(out)['records'] if r['check'].startswith("instances/")]
        assert instances and all(r['status'] == "pass" for r in instances)
        _, out = invoke("check", "sl2-borel", "--json", "--quiet")
        statuses = {r['check']: r['status'] for r in json.loads(out)['records']}
        assert statuses["instances/canonical-inclusion"] == "skipped"

    def test_unknown_command(self):
        assert invoke("frobnicate", "abelian")[0] == 2

    def test_missing_model(self):
        assert invoke("check", "no-such-model", "--quiet")[0] == 2

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"n": 0,', encoding="utf-8")
        assert invoke("check", str(path), "--quiet")[0] == 2

    def test_broken_antisymmetry_fails(self, tmp_path):
        path = write_model(tmp_path, dict(DIM2, c=[[1, 2, 2, "1"]]))
        code, out = invoke("check", path, "--json", "--quiet")
        assert code == 1
        report = json.loads(out)
        failed = [r['check'] for r in report['records'] if r['status'] == 'fail']
        assert failed == ["model/antisymmetry"]
        assert report['records'][-1]['status'] == 'skipped'

    def test_human_output(self):
        code, out = invoke("check", "dim2-nonabelian", "--quiet")
        assert code == 0
        assert out.strip().endswith("skipped)")
        assert "dim2-nonabelian check: pass" in out


class TestReports:
    def test_random_tables_are_deterministic(self):
        argv = ("check", "dim2-nonabelian", "--gamma", "random", "--tables", "2", "--seed", "5", "--json", "--quiet")
        first, second = invoke(*argv), invoke(*argv)
        assert first == second
        report = json.loads(first[1])
        assert report['seed'] == 5
        labels = [r['generator'] for r in report['records'] if r['check'] == "connection/admissible"]
        assert labels == ["default", "random(seed=5)", "random(seed=6, vertical)"]

    def test_timing_is_opt_in(self):
        _, out = invoke("compare", "dim2-nonabelian", "--json", "--quiet", "--timing")
        assert all(isinstance(r['timing'], float) for r in json.loads(out)['records'])

    def test_save(self, tmp_path):
        reports = DirectoryManager(base_dir=tmp_path, report_dir=tmp_path / "runs")
        code, _ = invoke("compare", "abelian", "--save", "--quiet", reports=reports)
        assert code == 0
        saved = json.loads((tmp_path / "runs" / "abelian_compare.json").read_text(encoding="utf-8"))
        assert saved['command'] == "compare"
        assert saved['seed'] is None

    def test_report_file_names_are_sanitized(self):
        assert sanitize_filename("../a b") == "_a_b"
        assert sanitize_filename("") == "unnamed"

    def test_check_on_every_model(self, models):
        for model in models.values():
            report, status = run("check", model, RunOptions(quiet=True))
            assert status == 0, [r for r in report['records'] if r['status'] == 'fail']
            assert report['records'][0]['check'] == "model/axioms"

    def test_unknown_command_in_run(self, models):
        with pytest.raises(ValueError, match="Unknown command"):
            run("frobnicate", models["abelian"])
        with pytest.raises(ValueError, match="Unknown command"):
            execute_command("frobnicate", None, RunOptions(), ProgressTracker(quiet=True))

    @pytest.mark.slow
    def test_full_report(self, tmp_path):
        reports = DirectoryManager(base_dir=tmp_path, report_dir=tmp_path / "runs")
        code, _ = invoke("report", "dim2-nonabelian", "--quiet", reports=reports)
        assert code == 0
        saved = json.loads((tmp_path / "runs" / "dim2-nonabelian_report.json").read_text(encoding="utf-8"))
        sections = {r['check'].split(":")[0] for r in saved['records'] if ":" in r['check']}
        assert sections == {"check", "atiyah", "compare", "todd", "hpl-verify", "cohomology"}
