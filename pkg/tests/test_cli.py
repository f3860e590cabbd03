import copy
import json
from pathlib import Path

import numpy as np
import pytest

from consensus_rhc.cli import main
from consensus_rhc.config import load_config
from consensus_rhc.errors import SchemaError
from consensus_rhc.scenarios import get_scenario
from consensus_rhc.verify import load_design_document

FIXTURES = Path(__file__).parent / "fixtures" / "malformed"


def write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh)
    return str(path)


@pytest.fixture(scope="module")
def unstable_run(tmp_path_factory):
    """One end-to-end CLI pass over the unstable scenario, shared below."""
    out = tmp_path_factory.mktemp("cli-unstable")
    rc = main(["example", "unstable", "--out-dir", str(out)])
    assert rc == 0
    return out / "unstable"


class TestSchemaFixtures:
    with open(FIXTURES / "index.json") as fh:
        INDEX = json.load(fh)

    @pytest.mark.parametrize("name", sorted(INDEX))
    def test_each_fixture_rejected_with_pointer(self, name):
        with pytest.raises(SchemaError) as exc:
            load_config(FIXTURES / f"{name}.json")
        assert exc.value.path.startswith(self.INDEX[name])

    def test_corpus_is_large_enough(self):
        assert len(self.INDEX) >= 10


class TestDesignCommand:
    def test_condition_violation_exit_code(self, tmp_path):
        sc = get_scenario("semistable")
        doc = copy.deepcopy(sc.config)
        doc["params"]["c"] = 10.0
        doc["overrides"] = {}
        cfg = write_json(tmp_path / "c.json", doc)
        rc = main(["design", "--config", cfg, "--out-dir", str(tmp_path)])
        assert rc == 2

    def test_design_writes_document(self, unstable_run):
        doc = json.loads((unstable_run / "design.json").read_text())
        assert doc["mode"] == "unstable"
        assert "condition_report" in doc
        assert np.asarray(doc["S2"]).shape == (3, 3)

    def test_schema_error_exit_code(self, tmp_path):
        cfg = write_json(tmp_path / "bad.json", {"system": {}})
        rc = main(["design", "--config", cfg, "--out-dir", str(tmp_path)])
        assert rc == 1

    def test_override_conditions_builds_anyway(self, tmp_path):
        # an inadmissible coupling is refused by default but can be forced;
        # the forced design is written with its failed report attached
        sc = get_scenario("semistable")
        doc = copy.deepcopy(sc.config)
        doc["params"]["c"] = 0.5  # above 1/sigma_max ~ 0.2764
        doc["overrides"] = {}
        cfg = write_json(tmp_path / "c.json", doc)
        assert main(["design", "--config", cfg, "--out-dir", str(tmp_path)]) == 2
        rc = main(["design", "--config", cfg, "--out-dir", str(tmp_path),
                   "--override-conditions"])
        assert rc == 0
        doc = json.loads((tmp_path / "design.json").read_text())
        assert any(not e["passed"] for e in doc["condition_report"])


class TestSimulateCommand:
    def test_outputs_exist(self, unstable_run):
        for name in ("config.json", "design.json", "trajectory.csv",
                     "steps.jsonl", "summary.json", "verification.json"):
            assert (unstable_run / name).exists()
        summary = json.loads((unstable_run / "summary.json").read_text())
        assert summary["verdict"] == "consensus"
        assert summary["max_input_magnitude"] <= 1.0 + 1e-9
        assert summary["feasible_all"] is True

    def test_infeasible_exit_code(self, tmp_path, scenario_unstable):
        doc = copy.deepcopy(scenario_unstable.config)
        doc["rhc"]["X0"] = (1e3 * np.asarray(doc["rhc"]["X0"])).tolist()
        doc["rhc"]["steps"] = 5
        cfg = write_json(tmp_path / "far.json", doc)
        rc = main(["design", "--config", cfg, "--out-dir", str(tmp_path),
                   "--allow-boundary-c"])
        assert rc == 0
        rc = main(["simulate", "--config", cfg,
                   "--design", str(tmp_path / "design.json"),
                   "--out-dir", str(tmp_path)])
        assert rc == 3


class TestVerifyCommand:
    def test_verification_report(self, unstable_run):
        rep = json.loads((unstable_run / "verification.json").read_text())
        assert rep["are_pass"] and rep["kernel_pass"] and rep["all_pass"]
        assert rep["are_residual"] <= 1e-7
        assert rep["kernel_dims"]["Qg"] == 3

    def test_round_trip_determinism(self, unstable_run, cfg_unstable):
        from consensus_rhc.design import verify_global_are
        d1, sys1, g1, _, _ = load_design_document(unstable_run / "design.json")
        d2, sys2, g2, _, _ = load_design_document(unstable_run / "design.json")
        r1 = verify_global_are(d1, sys1, g1)
        r2 = verify_global_are(d2, sys2, g2)
        assert r1 == r2  # bitwise: same document, same arithmetic

    def test_corrupted_design_flagged(self, unstable_run, tmp_path):
        doc = json.loads((unstable_run / "design.json").read_text())
        S2 = np.asarray(doc["S2"])
        S2[0, 0] *= 1.02
        doc["S2"] = S2.tolist()
        doc["Sg"] = (np.kron(np.asarray(doc["S1"]), S2)).tolist()
        bad = write_json(tmp_path / "bad_design.json", doc)
        rc = main(["verify", "--design", bad, "--out-dir", str(tmp_path)])
        assert rc == 1
        rep = json.loads((tmp_path / "verification.json").read_text())
        assert rep["are_residual"] > 1e-3
        assert not rep["are_pass"]

    def test_malformed_design_rejected(self, tmp_path):
        bad = write_json(tmp_path / "junk.json", {"mode": "unstable"})
        rc = main(["verify", "--design", bad])
        assert rc == 1


class TestExampleCommand:
    def test_semistable_example(self, tmp_path):
        rc = main(["example", "semistable", "--out-dir", str(tmp_path)])
        assert rc == 0
        summary = json.loads((tmp_path / "semistable" / "summary.json").read_text())
        assert summary["verdict"] == "convergent_consensus"
        assert summary["max_input_magnitude"] <= 0.3 + 1e-9

    def test_unknown_name_is_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["example", "bogus"])
        assert exc.value.code == 2  # argparse usage failure

    def test_scenario_configs_parse_cleanly(self):
        for name in ("semistable", "unstable"):
            cfg = get_scenario(name).parsed()
            assert cfg.steps == 150 and cfg.horizon == 9
