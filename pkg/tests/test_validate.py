import shutil
from pathlib import Path

import numpy as np

from fgwlabels.formats import Bundle, write_bundle, write_plan
from fgwlabels.types import DiscreteMeasure, PairProblem, TransportPlan
from fgwlabels.validate import (
    validate_bundle_file,
    validate_diagnostics_file,
    validate_labels_file,
    validate_paths,
    validate_plan_file,
    validator_for,
)

GOLDEN = Path(__file__).parent / "golden"


def test_golden_files_pass():
    ok, errors = validate_paths([GOLDEN])
    assert ok, errors


def test_validator_for_suffixes():
    assert validator_for(Path("a.fgwb")) is validate_bundle_file
    assert validator_for(Path("a.plan")) is validate_plan_file
    assert validator_for(Path("a.labels.json")) is validate_labels_file
    assert validator_for(Path("a.diagnostics.jsonl")) is validate_diagnostics_file
    assert validator_for(Path("a.json")) is None


def test_unrecognized_and_missing_files(tmp_path):
    stray = tmp_path / "notes.txt"
    stray.write_text("hello")
    ok, errors = validate_paths([stray, tmp_path / "gone.plan"])
    assert not ok
    assert len(errors) == 2


def test_bundle_masses_must_sum_to_one(tmp_path, rigid_pair):
    prob, gt = rigid_pair
    heavy = DiscreteMeasure(np.full(prob.n, 2.0 / prob.n))
    bad = PairProblem(prob.featA, prob.featB, prob.ptsA, prob.ptsB, heavy, prob.massB)
    path = tmp_path / "heavy.fgwb"
    write_bundle(path, Bundle(bad, ground_truth=gt))

    ok, errors = validate_bundle_file(path)
    assert not ok
    assert "massA" in errors[0]


def test_empty_plan_is_flagged(tmp_path):
    path = tmp_path / "empty.plan"
    write_plan(path, TransportPlan(np.zeros((2, 2))))
    ok, errors = validate_plan_file(path)
    assert not ok
    assert "no mass" in errors[0]


def test_labels_must_come_from_proposals(tmp_path):
    text = (GOLDEN / "identity-2x2.labels.json").read_text()
    path = tmp_path / "odd.labels.json"
    path.write_text(text.replace('"proposed":[[1,0.5]]', '"proposed":[[0,0.1]]'))
    ok, errors = validate_labels_file(path)
    assert not ok
    assert "never proposed" in errors[0]


def test_diagnostics_stage_numbering(tmp_path):
    lines = (GOLDEN / "two-stage.diagnostics.jsonl").read_text().splitlines()
    path = tmp_path / "swapped.diagnostics.jsonl"
    path.write_text("\n".join(reversed(lines)) + "\n")
    ok, errors = validate_diagnostics_file(path)
    assert not ok

    empty = tmp_path / "empty.diagnostics.jsonl"
    empty.write_text("")
    ok, errors = validate_diagnostics_file(empty)
    assert not ok
    assert "no stage records" in errors[0]


def test_directory_expansion_skips_other_files(tmp_path):
    shutil.copy(GOLDEN / "identity-2x2.plan", tmp_path / "identity-2x2.plan")
    (tmp_path / "README").write_text("not a tool file")
    ok, errors = validate_paths([tmp_path])
    assert ok, errors
