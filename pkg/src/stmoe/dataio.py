"""CSV dataset ingestion and JSON model serialization.

The model file is a versioned JSON document; floats survive a round trip
exactly because JSON encodes them with shortest round-trip repr.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass

import numpy as np

from .model import Constraints, Dataset, ExpertParams, GatingParams, ModelParams

__all__ = [
    "DatasetSchema",
    "read_dataset",
    "model_to_dict",
    "model_from_dict",
    "save_model",
    "load_model",
    "write_csv",
]

FORMAT_VERSION = 1


@dataclass(frozen=True)
class DatasetSchema:
    """Column layout of a data CSV.

    ``gating`` defaults to the expert covariates (the x = r convention).
    Unless disabled, an intercept column is prepended to both designs.
    """

    response: str
    covariates: tuple[str, ...]
    gating: tuple[str, ...] | None = None
    add_intercept: bool = True


def _parse_cell(raw: str, row_num: int, column: str) -> float:
    try:
        return float(raw)
    except (TypeError, ValueError):
        raise ValueError(
            f"non-numeric value {raw!r} at row {row_num}, column {column!r}"
        ) from None


def read_dataset(path, schema: DatasetSchema) -> Dataset:
    """Load a header-ed CSV into a Dataset, with row/column diagnostics."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: empty file")
        gating = schema.gating if schema.gating is not None else schema.covariates
        needed = [schema.response, *schema.covariates, *gating]
        missing = [c for c in dict.fromkeys(needed) if c not in reader.fieldnames]
        if missing:
            raise ValueError(f"{path}: missing column(s) {missing}; found {reader.fieldnames}")

        y, xs, rs = [], [], []
        for row_num, record in enumerate(reader, start=1):
            y.append(_parse_cell(record[schema.response], row_num, schema.response))
            xs.append([_parse_cell(record[c], row_num, c) for c in schema.covariates])
            rs.append([_parse_cell(record[c], row_num, c) for c in gating])
    if not y:
        raise ValueError(f"{path}: no data rows")

    X = np.asarray(xs, dtype=float)
    R = np.asarray(rs, dtype=float)
    if schema.add_intercept:
        ones = np.ones((len(y), 1))
        X = np.hstack([ones, X])
        R = np.hstack([ones, R])
    return Dataset(y=np.asarray(y, dtype=float), X=X, R=R)


def model_to_dict(psi: ModelParams, fit_meta: dict | None = None) -> dict:
    doc = {
        "format_version": FORMAT_VERSION,
        "family": psi.family,
        "k": psi.n_components,
        "p": psi.p,
        "q": psi.q,
        "gating_alpha": psi.gating.alpha.tolist(),
        "experts": [
            {
                "beta": ex.beta.tolist(),
                "sigma2": ex.sigma2,
                "skew": ex.skew,
                "dof": ex.dof,
            }
            for ex in psi.experts
        ],
        "constraints": {
            "fix_skew_zero": psi.constraints.fix_skew_zero,
            "fix_dof": psi.constraints.fix_dof,
        },
    }
    if fit_meta:
        doc["fit"] = dict(fit_meta)
    return doc


def model_from_dict(doc: dict) -> ModelParams:
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported model file version {version!r}")
    cons = doc.get("constraints", {})
    experts = tuple(
        ExpertParams(
            beta=np.asarray(ex["beta"], dtype=float),
            sigma2=float(ex["sigma2"]),
            skew=None if ex.get("skew") is None else float(ex["skew"]),
            dof=None if ex.get("dof") is None else float(ex["dof"]),
        )
        for ex in doc["experts"]
    )
    alpha = np.asarray(doc["gating_alpha"], dtype=float)
    if alpha.size == 0:
        alpha = np.zeros((0, doc["q"]))
    return ModelParams(
        family=doc["family"],
        gating=GatingParams(alpha.reshape(doc["k"] - 1, doc["q"])),
        experts=experts,
        constraints=Constraints(
            fix_skew_zero=bool(cons.get("fix_skew_zero", False)),
            fix_dof=None if cons.get("fix_dof") is None else float(cons["fix_dof"]),
        ),
    )


def save_model(path, psi: ModelParams, fit_meta: dict | None = None) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(psi, fit_meta), fh, indent=2)
        fh.write("\n")


def load_model(path) -> ModelParams:
    if not os.path.exists(path):
        raise ValueError(f"model file not found: {path}")
    with open(path) as fh:
        return model_from_dict(json.load(fh))


def _format_value(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path, header, rows) -> None:
    """Write rows of scalars with a header; floats use repr (locale-proof)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format_value(v) for v in row])
