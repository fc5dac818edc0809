import json
import math

import pytest
from pydantic import ValidationError

from core.config.config import COARSE_GRID_SIZE, GLOBAL_SEED
from core.config.run_config import (
    RunConfig,
    apply_overrides,
    config_hash,
    format_validation_error,
    load_config,
    parse_set_arguments,
)
from core.model.classical import hcl
from core.model.errors import EmptyShellError, ParameterError

MODEL = {"omega": 1.0, "omega0": 1.0, "gamma": 1.0, "j": 4.0}


def _config(**blocks):
    return RunConfig.model_validate(dict(model=MODEL, **blocks))


def test_defaults():
    config = _config()
    assert config.params.j == 4.0
    assert config.scan.seed == GLOBAL_SEED
    assert config.phase_point is None
    assert config.energies() == [-1.8 * 4.0]
    assert not config.io.plot


def test_missing_model_key_names_path():
    with pytest.raises(ValidationError) as info:
        RunConfig.model_validate({"model": {"omega": 1.0, "omega0": 1.0, "gamma": 1.0}})
    assert "model.j" in format_validation_error(info.value)


def test_unknown_keys_are_rejected():
    with pytest.raises(ValidationError) as info:
        _config(scan={"gridsize": 10})
    assert "scan.gridsize" in format_validation_error(info.value)


def test_physics_is_checked():
    with pytest.raises(ValidationError):
        RunConfig.model_validate({"model": dict(MODEL, j=1.3)})
    with pytest.raises(ValidationError):
        RunConfig.model_validate({"model": dict(MODEL, gamma=-0.1)})
    with pytest.raises(ValidationError):
        _config(basis={"n_max": 20, "n_max_high": 20})


def test_coarse_grid():
    assert _config(scan={"coarse": True}).scan.effective_grid_size == COARSE_GRID_SIZE
    assert _config(scan={"grid_size": 12}).scan.effective_grid_size == 12


def test_phase_point_from_energy():
    config = _config(phase_point={"phi": math.pi, "jz_tilde": -0.25, "energy_per_j": -1.0})
    point = config.phase_point.to_point(config.params)
    assert point.p == 0.0
    assert hcl(point, config.params) == pytest.approx(-4.0, abs=1e-10)


def test_phase_point_outside_shell():
    config = _config(phase_point={"phi": math.pi / 2, "jz_tilde": 0.0, "energy_per_j": -1.0})
    with pytest.raises(EmptyShellError):
        config.phase_point.to_point(config.params)


def test_phase_point_requires_source():
    with pytest.raises(ValidationError):
        _config(phase_point={"phi": 0.0, "jz_tilde": 0.0})
    with pytest.raises(ValidationError):
        _config(phase_point={"phi": 0.0, "jz_tilde": 1.5, "q": 0.0})
    assert _config(phase_point={}).phase_point is None


def test_parse_set_arguments():
    parsed = parse_set_arguments(["scan.seed=7", "io.output=runs/a", "surface.energies_per_j=[-1.5, -1.0]",
                                  "io.plot=true"])
    assert parsed == {"scan.seed": 7, "io.output": "runs/a", "surface.energies_per_j": [-1.5, -1.0],
                      "io.plot": True}
    with pytest.raises(ParameterError):
        parse_set_arguments(["scan.seed"])


def test_apply_overrides_creates_blocks():
    data = apply_overrides({"model": dict(MODEL)}, {"model.j": 2.0, "scan.grid_size": 8})
    assert data == {"model": dict(MODEL, j=2.0), "scan": {"grid_size": 8}}


def test_load_config_file_and_overrides(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"model": MODEL, "scan": {"seed": 3}}), encoding="utf-8")
    config = load_config(str(path), {"scan.seed": 11, "basis.n_max": 30})
    assert config.scan.seed == 11
    assert config.basis.n_max == 30


def test_load_config_errors(tmp_path):
    with pytest.raises(ParameterError):
        load_config(str(tmp_path / "missing.json"))
    broken = tmp_path / "broken.json"
    broken.write_text("{model: ", encoding="utf-8")
    with pytest.raises(ParameterError):
        load_config(str(broken))
    listed = tmp_path / "list.json"
    listed.write_text("[1, 2]", encoding="utf-8")
    with pytest.raises(ParameterError):
        load_config(str(listed))


def test_config_hash():
    assert config_hash(_config()) == config_hash(_config())
    assert config_hash(_config()) != config_hash(_config(scan={"seed": 1}))
