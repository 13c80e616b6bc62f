"""JSON run configuration parsing."""

from __future__ import annotations

import json

import pytest

from pdpl.config import load_config, parse_config
from pdpl.errors import ValidationError
from pdpl.sim import EffortPolicy


class TestParseConfig:
    def test_defaults(self):
        cfg = parse_config({})
        assert cfg.seed == 0 and cfg.analysis.method == "mean" and cfg.fkm.n_clusters == 3

    def test_seed_propagates(self):
        cfg = parse_config({"seed": 42, "simulation": {"n_students": 5}})
        assert cfg.simulation.seed == 42 and cfg.fkm.seed == 42 and cfg.simulation.n_students == 5

    def test_policy_list(self):
        cfg = parse_config({"simulation": {"n_students": 2, "policies": ["grim", "random:0.2"]}})
        assert cfg.simulation.policies == (EffortPolicy("grim"), EffortPolicy("random", p_high=0.2))

    @pytest.mark.parametrize("data, match", [
        ({"sed": 1}, "sed"),
        ({"simulation": {"n_student": 3}}, "n_student"),
        ({"fkm": {"seed": 3}}, "seed"),
        ({"analysis": {"method": "magic"}}, "method"),
        ({"analysis": {"alpha": 1.5}}, "alpha"),
        ({"seed": -4}, "seed"),
        ({"seed": True}, "seed"),
        ({"simulation": []}, "simulation"),
        ({"fkm": {"m": 1}}, "fuzzification"),
    ])
    def test_invalid(self, data, match):
        with pytest.raises(ValidationError, match=match):
            parse_config(data)

    def test_not_object(self):
        with pytest.raises(ValidationError):
            parse_config([1, 2])


class TestLoadConfig:
    def test_file(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"seed": 7, "output": {"dir": "x"}}))
        cfg = load_config(p)
        assert cfg.seed == 7 and cfg.output.dir == "x"

    def test_bad_json(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text("{seed: 1")
        with pytest.raises(ValidationError, match="invalid JSON"):
            load_config(p)
