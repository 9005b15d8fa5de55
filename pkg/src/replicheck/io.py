"""File formats: study CSV readers, the JSON result document, sweep CSVs.

The result document is the single serialization every command emits; it
is validated against an internal JSON schema before being written so the
on-disk contract cannot drift silently.  Floats go through Python's
shortest-roundtrip repr, which preserves all 17 significant digits.
"""

import csv
import json
import math
import os

import jsonschema

from . import __version__
from .model import InputError, ReplicationPair, StudySummary

RESULT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": [
        "method",
        "scenario",
        "p_value",
        "sidedness",
        "statistic",
        "mc_stderr",
        "predictive_interval",
        "model",
        "seed",
        "draws",
        "tool_version",
    ],
    "properties": {
        "method": {"enum": ["prior_predictive", "posterior_predictive"]},
        "scenario": {"enum": ["two_group", "exchangeable"]},
        "p_value": {"type": "number", "minimum": 0, "maximum": 1},
        "sidedness": {"enum": ["two", "high", "low"]},
        "statistic": {
            "type": "object",
            "additionalProperties": False,
            "required": ["name", "value"],
            "properties": {
                "name": {"type": "string"},
                "value": {"type": "number"},
            },
        },
        "mc_stderr": {"type": ["number", "null"], "minimum": 0},
        "predictive_interval": {
            "type": ["array", "null"],
            "items": {"type": "number"},
            "minItems": 2,
            "maxItems": 2,
        },
        "model": {
            "type": "object",
            "additionalProperties": False,
            "required": ["components"],
            "properties": {
                "components": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": [
                            "omega_sq",
                            "phi_sq",
                            "gamma",
                            "prior_weight",
                            "posterior_weight",
                        ],
                        "properties": {
                            "omega_sq": {"type": "number", "minimum": 0},
                            "phi_sq": {"type": "number", "minimum": 0},
                            "gamma": {"type": "number", "minimum": 0, "maximum": 1},
                            "prior_weight": {"type": "number"},
                            "posterior_weight": {"type": "number"},
                        },
                    },
                }
            },
        },
        "seed": {"type": ["integer", "null"]},
        "draws": {"type": ["integer", "null"]},
        "tool_version": {"type": "string"},
        "classic": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "cochran_q": {"$ref": "#/$defs/classic_entry"},
                "egger": {"$ref": "#/$defs/classic_entry"},
            },
        },
    },
    "$defs": {
        "classic_entry": {
            "type": ["object", "null"],
            "additionalProperties": False,
            "required": ["statistic", "df", "p_value", "method"],
            "properties": {
                "statistic": {"type": "number"},
                "df": {"type": "integer", "minimum": 1},
                "p_value": {"type": "number", "minimum": 0, "maximum": 1},
                "method": {"type": "string"},
            },
        }
    },
}


def _parse_float(value, row_num, column):
    try:
        x = float(value)
    except (TypeError, ValueError):
        raise InputError(f"row {row_num}: {column} is not a number: {value!r}") from None
    if not math.isfinite(x):
        raise InputError(f"row {row_num}: {column} must be finite, got {value!r}")
    return x


def _read_rows(path, expected_header):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if header != expected_header:
            raise InputError(
                f"{path}: expected header {','.join(expected_header)!r}, "
                f"got {','.join(header)!r}"
            )
        rows = []
        for row_num, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(expected_header):
                raise InputError(
                    f"row {row_num}: expected {len(expected_header)} columns, got {len(row)}"
                )
            rows.append((row_num, [cell.strip() for cell in row]))
    if not rows:
        raise InputError(f"{path}: no data rows")
    return rows


def _make_study(study_id, beta_raw, se_raw, row_num):
    beta = _parse_float(beta_raw, row_num, "beta_hat")
    se = _parse_float(se_raw, row_num, "se")
    if se <= 0.0:
        raise InputError(f"row {row_num}: se must be positive, got {se}")
    return StudySummary(study_id=study_id, beta_hat=beta, se=se)


def read_exchangeable_csv(path):
    """Read `study_id,beta_hat,se` rows into study summaries."""
    rows = _read_rows(path, ["study_id", "beta_hat", "se"])
    return [
        _make_study(study_id, beta, se, row_num)
        for row_num, (study_id, beta, se) in rows
    ]


def read_two_group_csv(path):
    """Read a `study_id,role,beta_hat,se` file with exactly one orig and one rep."""
    rows = _read_rows(path, ["study_id", "role", "beta_hat", "se"])
    by_role = {}
    for row_num, (study_id, role, beta, se) in rows:
        if role not in ("orig", "rep"):
            raise InputError(f"row {row_num}: role must be orig or rep, got {role!r}")
        if role in by_role:
            raise InputError(f"row {row_num}: duplicate {role!r} row")
        by_role[role] = _make_study(study_id, beta, se, row_num)
    missing = {"orig", "rep"} - set(by_role)
    if missing:
        raise InputError(f"{path}: missing required role(s): {sorted(missing)}")
    return ReplicationPair(original=by_role["orig"], replication=by_role["rep"])


def build_result_document(result, model, method, scenario, classic=None):
    """Assemble and validate the JSON-ready result mapping."""
    components = []
    for comp, post in zip(model.components, result.component_posteriors):
        components.append(
            {
                "omega_sq": comp.omega_sq,
                "phi_sq": comp.phi_sq,
                "gamma": comp.gamma,
                "prior_weight": comp.weight,
                "posterior_weight": post,
            }
        )
    doc = {
        "method": method,
        "scenario": scenario,
        "p_value": result.p_value,
        "sidedness": result.sidedness,
        "statistic": {"name": result.statistic_name, "value": result.statistic_value},
        "mc_stderr": result.mc_stderr,
        "predictive_interval": (
            list(result.predictive_interval)
            if result.predictive_interval is not None
            else None
        ),
        "model": {"components": components},
        "seed": result.seed,
        "draws": result.draws,
        "tool_version": __version__,
    }
    if classic is not None:
        doc["classic"] = {
            name: (
                None
                if entry is None
                else {
                    "statistic": entry.statistic,
                    "df": entry.df,
                    "p_value": entry.p_value,
                    "method": entry.method,
                }
            )
            for name, entry in classic.items()
        }
    jsonschema.validate(doc, RESULT_SCHEMA)
    return doc


def dump_result(doc, stream):
    json.dump(doc, stream, indent=2, sort_keys=True)
    stream.write("\n")


def write_sweep_csvs(sweep, out_dir, prefix):
    """Write replicate-level and summary CSVs; returns the two paths."""
    os.makedirs(out_dir, exist_ok=True)
    rep_path = os.path.join(out_dir, f"{prefix}_replicates.csv")
    sum_path = os.path.join(out_dir, f"{prefix}_summary.csv")
    with open(rep_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["replicate", "magnitude", "p_value", "method"])
        for rec in sweep.records:
            writer.writerow([rec.replicate, repr(rec.magnitude), repr(rec.p_value), rec.method])
    with open(sum_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["magnitude", "method", "flag_rate", "alpha"])
        for row in sweep.summary:
            writer.writerow(
                [repr(row.magnitude), row.method, repr(row.flag_rate), repr(sweep.alpha)]
            )
    return rep_path, sum_path
