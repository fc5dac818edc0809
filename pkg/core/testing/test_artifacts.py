import math

import numpy as np
import pandas as pd

from core.model.dicke import ModelParams, build_basis, build_hamiltonian
from core.tools.artifacts import (
    MANIFEST_NAME,
    dump_matrix,
    file_sha256,
    load_matrix,
    read_csv,
    read_json,
    write_csv,
    write_json,
    write_manifest,
)


def test_csv_preserves_floats_and_metadata(tmp_path):
    values = np.array([0.1, 1 / 3, math.pi * 1e-17, -2.5e300, np.nan, 1e-320])
    frame = pd.DataFrame({"k": np.arange(values.size), "value": values})
    meta = {"params": {"j": 4.0, "gamma": 1.0}, "energy": -1.8, "note": "E/J", "missing": float("nan")}
    path = write_csv(frame, tmp_path / "sub" / "table.csv", meta)

    back, back_meta = read_csv(path)
    np.testing.assert_array_equal(back["value"].to_numpy(), values)
    np.testing.assert_array_equal(back["k"].to_numpy(), np.arange(values.size))
    assert back_meta == {"params": {"gamma": 1.0, "j": 4.0}, "energy": -1.8, "note": "E/J", "missing": None}


def test_csv_marks_missing_values(tmp_path):
    path = write_csv(pd.DataFrame({"value": [1.0, np.nan]}), tmp_path / "m.csv")
    assert path.read_text(encoding="utf-8").splitlines() == ["value", "1", "nan"]


def test_json_handles_numpy_and_non_finite(tmp_path):
    path = write_json(tmp_path / "r.json", {"a": np.float64(0.5), "n": np.int64(3), "flag": np.bool_(True),
                                            "nan": float("nan"), "inf": math.inf, "arr": np.arange(3)})
    assert read_json(path) == {"a": 0.5, "n": 3, "flag": True, "nan": None, "inf": "inf", "arr": [0, 1, 2]}


def test_manifest_hashes_artifacts(tmp_path):
    write_csv(pd.DataFrame({"x": [1.0]}), tmp_path / "a.csv")
    write_json(tmp_path / "nested" / "b.json", {"x": 1})
    (tmp_path / "ledger.sqlite").write_bytes(b"journal")

    path = write_manifest(tmp_path, "spectrum", {"model": {"j": 1.0}}, 12345, {"total_s": 0.5},
                          {"convergence": {"converged_count": 3}})
    manifest = read_json(path)
    assert path.name == MANIFEST_NAME
    assert set(manifest["artifacts"]) == {"a.csv", "nested/b.json"}
    assert manifest["artifacts"]["a.csv"] == file_sha256(tmp_path / "a.csv")
    assert manifest["seed"] == 12345
    assert manifest["config"] == {"model": {"j": 1.0}}
    assert manifest["convergence"]["converged_count"] == 3
    assert {"version", "created", "python", "numpy", "timings"} <= set(manifest)


def test_matrix_dump_roundtrip(tmp_path):
    params = ModelParams(omega=1.0, omega0=0.7, gamma=0.9, j=1.5)
    h = build_hamiltonian(params, build_basis(params, 6))
    matrix, header = load_matrix(dump_matrix(h, tmp_path / "h.txt"))
    np.testing.assert_array_equal(matrix, h.entries)
    assert header["dim"] == h.basis.dim
    assert header["omega0"] == 0.7
    assert header["parity"] == 1


def test_manifest_skips_nested_manifests(tmp_path):
    write_csv(pd.DataFrame({"x": [1.0]}), tmp_path / "E-1.0000" / "map.csv")
    write_manifest(tmp_path / "E-1.0000", "poincare", {}, 1, {"total_s": 0.1})
    first = read_json(write_manifest(tmp_path, "poincare", {}, 1, {"total_s": 0.2}))

    write_manifest(tmp_path / "E-1.0000", "poincare", {}, 1, {"total_s": 0.3})
    second = read_json(write_manifest(tmp_path, "poincare", {}, 1, {"total_s": 0.4}))
    assert set(first["artifacts"]) == {"E-1.0000/map.csv"}
    assert first["artifacts"] == second["artifacts"]
