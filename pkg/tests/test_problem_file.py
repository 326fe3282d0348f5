import json
from pathlib import Path

import numpy as np
import pytest
from numpy.testing import assert_allclose
from pydantic import ValidationError

from conjugation_solver.config import Tolerances
from conjugation_solver.problem_file import (
    CertificateFile,
    ProblemFile,
    ToleranceOverrides,
    canonical_digest,
    decode_matrix,
    decode_vector,
    encode_matrix,
    load_raw,
    write_atomic,
)

FIXTURES = Path(__file__).parent.parent / "resources" / "fixtures"
DIGEST = "0" * 64


def _symmetric(**fields):
    raw = {
        "dimension": 2,
        "mode": "symmetric",
        "operators": {"N": [[[1, 0], [0, 0]], [[0, 0], [2, 0]]]},
        "xs": [[[1, 0], [0, 0]]],
        "ys": [[[0, 0], [0, 1]]],
    }
    return raw | fields


def test_decode_encode():
    assert_allclose(decode_vector([[1, 2], [0, -1]]), [1 + 2j, -1j])
    mat = np.array([[1, 2j], [-3, 0.5 - 1j]])
    assert encode_matrix(mat) == [[[1.0, 0.0], [0.0, 2.0]], [[-3.0, 0.0], [0.5, -1.0]]]
    assert_allclose(decode_matrix(encode_matrix(mat)), mat)


@pytest.mark.parametrize("name", sorted(p.name for p in FIXTURES.iterdir() if p.name != "malformed_scalar.json"))
def test_fixtures_validate(name):
    ProblemFile.model_validate(load_raw(FIXTURES / name))


def test_malformed_scalar():
    with pytest.raises(ValidationError):
        ProblemFile.model_validate(load_raw(FIXTURES / "malformed_scalar.json"))


@pytest.mark.parametrize(
    "fields",
    [
        {"schema_version": "2"},
        {"dimension": 3},
        {"ys": []},
        {"operators": {}},
        {"subspace": [[[1, 0], [0, 0]]]},
        {"n": 2},
        {"mode": "skew", "operators": {"A": encode_matrix(np.eye(2)), "B": encode_matrix(np.eye(2))}},
        {"xs": [[[1, 0], [0, float("nan")]]]},
        {"extra_field": 1},
    ],
)
def test_problem_rejected(fields):
    with pytest.raises(ValidationError):
        ProblemFile.model_validate(_symmetric(**fields))


def test_field_problem_rejected():
    raw = load_raw(FIXTURES / "ufield.json")
    with pytest.raises(ValidationError):
        ProblemFile.model_validate(raw | {"n": 3})
    with pytest.raises(ValidationError):
        ProblemFile.model_validate(raw | {"measure": [{"z": [0, 0], "weight": 0}, {"z": [1, 0], "weight": 1}]})
    with pytest.raises(ValidationError):
        ProblemFile.model_validate(raw | {"xs": [[[1, 0], [0, 0]]]})


def test_to_problem():
    problem = ProblemFile.model_validate(_symmetric())
    interp = problem.to_problem(Tolerances())
    assert interp.pair_count == 1 and interp.dim == 2
    assert_allclose(interp.ys[:, 0], [0, 1j])


def test_tolerance_resolution():
    base = Tolerances(residual=1e-8)
    problem = ProblemFile.model_validate(_symmetric(tolerances={"cluster": 1e-6}))
    assert problem.resolve_tolerances(base) == Tolerances(residual=1e-8, cluster=1e-6)
    assert ProblemFile.model_validate(_symmetric()).resolve_tolerances(base) is base
    with pytest.raises(ValidationError):
        ToleranceOverrides(residual=1e-3).apply(Tolerances())
    with pytest.raises(ValidationError):
        ToleranceOverrides(rank=-1.0)


def test_canonical_digest():
    raw = _symmetric()
    reordered = dict(reversed(list(raw.items())))
    assert canonical_digest(raw) == canonical_digest(reordered)
    assert canonical_digest(raw) != canonical_digest(_symmetric(dimension=3))
    assert len(canonical_digest(raw)) == 64


def test_digest_ignores_formatting(tmp_path):
    raw = load_raw(FIXTURES / "symmetric_feasible.json")
    compact = tmp_path / "compact.json"
    compact.write_text(json.dumps(raw, separators=(",", ":")), encoding="utf-8")
    as_yaml = tmp_path / "problem.yaml"
    as_yaml.write_text(json.dumps(raw, indent=4), encoding="utf-8")
    assert canonical_digest(load_raw(compact)) == canonical_digest(raw) == canonical_digest(load_raw(as_yaml))


def test_load_raw_rejects_non_mapping(tmp_path):
    path = tmp_path / "list.yaml"
    path.write_text("- 1\n- 2\n", encoding="utf-8")
    with pytest.raises(ValueError):
        load_raw(path)


def test_write_atomic(tmp_path):
    path = tmp_path / "sub" / "cert.json"
    write_atomic(path, "first\n")
    write_atomic(path, "second\n")
    assert path.read_text(encoding="utf-8") == "second\n"
    assert [p.name for p in path.parent.iterdir()] == ["cert.json"]


def test_certificate_validation():
    base = {"tool_version": "0.1.0", "input_digest": DIGEST, "mode": "symmetric"}
    CertificateFile.model_validate(base | {"feasible": False})
    with pytest.raises(ValidationError):
        CertificateFile.model_validate(base | {"feasible": True})
    with pytest.raises(ValidationError):
        CertificateFile.model_validate(base | {"feasible": False, "input_digest": "abc"})
    with pytest.raises(ValidationError):
        CertificateFile.model_validate(base | {"feasible": True, "conjugation_s": [[[1, 0], [0, 0]]]})
    with pytest.raises(ValidationError):
        CertificateFile.model_validate(base | {"mode": "hyperinvariant", "feasible": True})


def test_certificate_json_is_deterministic():
    cert = CertificateFile(
        tool_version="0.1.0",
        input_digest=DIGEST,
        mode="ufield",
        feasible=True,
        field_blocks=[encode_matrix(np.eye(2))],
        residuals={"unitarity": 0.0, "equation": 1e-17},
    )
    text = cert.to_json(None)
    assert text == cert.to_json(None) and text.endswith("\n")
    assert "conjugation_s" not in text
    assert CertificateFile.model_validate(json.loads(text)) == cert
