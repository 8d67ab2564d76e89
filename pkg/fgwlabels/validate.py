"""Validate files written by the CLI."""

from collections.abc import Callable, Sequence
from pathlib import Path

import numpy as np

from .formats import read_bundle, read_diagnostics, read_labels, read_plan
from .utils import format_file_size, log

BUNDLE_SUFFIX = ".fgwb"
PLAN_SUFFIX = ".plan"
LABELS_SUFFIX = ".labels.json"
DIAGNOSTICS_SUFFIX = ".diagnostics.jsonl"

# Tolerance on bundle masses summing to one
MASS_TOL = 1e-9


def validate_bundle_file(path: Path) -> tuple[bool, list[str]]:
    """Validate a pair bundle: framing, shapes, masses, ground truth indices."""
    errors: list[str] = []
    try:
        bundle = read_bundle(path)
        prob = bundle.problem
        for name, measure in (("massA", prob.massA), ("massB", prob.massB)):
            if abs(measure.total - 1.0) > MASS_TOL:
                errors.append(f"{path.name}: {name} sums to {measure.total:.12g}")
        gt = bundle.ground_truth
        if gt is not None:
            for i, j in gt.assignment.items():
                if not (0 <= i < prob.n and 0 <= j < prob.m):
                    errors.append(f"{path.name}: ground truth pair ({i}, {j}) out of range")
                    break
        size = format_file_size(path.stat().st_size)
        log(f"  {path.name}: n={prob.n} m={prob.m} d={prob.d} ({size})")
    except Exception as e:
        errors.append(f"Error reading {path}: {e}")
    return len(errors) == 0, errors


def validate_plan_file(path: Path) -> tuple[bool, list[str]]:
    errors: list[str] = []
    try:
        plan = read_plan(path)
        mass = float(plan.data.sum())
        if not np.isfinite(mass) or mass <= 0:
            errors.append(f"{path.name}: plan carries no mass")
        log(f"  {path.name}: {plan.shape[0]}x{plan.shape[1]} {plan.solver} stage {plan.iteration}")
    except Exception as e:
        errors.append(f"Error reading {path}: {e}")
    return len(errors) == 0, errors


def validate_labels_file(path: Path) -> tuple[bool, list[str]]:
    errors: list[str] = []
    try:
        labels, _ = read_labels(path)
        for i, (kept, proposed) in enumerate(zip(labels.candidates, labels.proposed)):
            if not set(kept) <= set(proposed):
                errors.append(f"{path.name}: row {i} keeps a candidate it never proposed")
                break
        log(f"  {path.name}: {int(labels.kept_mask.sum())}/{labels.shape[0]} sources labelled")
    except Exception as e:
        errors.append(f"Error reading {path}: {e}")
    return len(errors) == 0, errors


def validate_diagnostics_file(path: Path) -> tuple[bool, list[str]]:
    errors: list[str] = []
    try:
        stages = read_diagnostics(path)
        if not stages:
            errors.append(f"{path.name}: no stage records")
        elif [s.stage for s in stages] != list(range(len(stages))):
            errors.append(f"{path.name}: stages are not numbered 0..{len(stages) - 1}")
        log(f"  {path.name}: {len(stages)} stage records")
    except Exception as e:
        errors.append(f"Error reading {path}: {e}")
    return len(errors) == 0, errors


def validator_for(path: Path) -> Callable[[Path], tuple[bool, list[str]]] | None:
    """Pick the validator from the file name suffix."""
    name = path.name
    if name.endswith(BUNDLE_SUFFIX):
        return validate_bundle_file
    if name.endswith(PLAN_SUFFIX):
        return validate_plan_file
    if name.endswith(LABELS_SUFFIX):
        return validate_labels_file
    if name.endswith(DIAGNOSTICS_SUFFIX):
        return validate_diagnostics_file
    return None


def validate_paths(paths: Sequence[Path]) -> tuple[bool, list[str]]:
    """Validate every file given, expanding directories one level."""
    all_errors: list[str] = []
    files: list[Path] = []
    for path in paths:
        if path.is_dir():
            files.extend(p for p in sorted(path.iterdir()) if validator_for(p) is not None)
        else:
            files.append(path)

    log(f"Validating {len(files)} file(s)...")
    for path in files:
        validator = validator_for(path)
        if validator is None:
            all_errors.append(f"Unrecognized file type: {path}")
            continue
        _, errors = validator(path)
        all_errors.extend(errors)

    if all_errors:
        log(f"Validation failed with {len(all_errors)} error(s):")
        for error in all_errors[:20]:
            log(f"  - {error}")
        if len(all_errors) > 20:
            log(f"  ... and {len(all_errors) - 20} more errors")
    else:
        log("All validations passed!")
    return len(all_errors) == 0, all_errors
