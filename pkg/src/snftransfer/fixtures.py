"""Packaged inputs: two small demonstration instances, the five-SNF adjusted
readmission-rate table, five qualitative benchmark cases with their reference
action tables, and a synthetic discharge-record generator.

Everything here ships with the package so solvers, sweeps, the CLI, and the
service run without any external data.
"""

from __future__ import annotations

import csv
import json
from importlib import resources
from io import StringIO

import numpy as np

from .estimate import DischargeRecord, RateTable
from .model import Instance, SystemState, load_instance
from .scenario import BaselineSet
from .solve import Policy

__all__ = [
    "FACILITY_LABELS",
    "TYPE_LABELS",
    "example_instance",
    "example_policy_table",
    "five_snf_rates",
    "five_snf_cost_matrix",
    "case_names",
    "case_baselines",
    "case_printed_kernels",
    "case_instance",
    "case_policy_table",
    "reference_policy",
    "synthetic_discharges",
    "resolve_instance",
]

FACILITY_LABELS = ("A", "B", "C", "D", "E")
TYPE_LABELS = ("UM", "JS", "CM", "CS")


def _load_json(name: str):
    with resources.files("snftransfer.data").joinpath(name).open() as fh:
        return json.load(fh)


def example_instance(which: int) -> Instance:
    """The two-facility demonstration instances (1 and 2)."""
    if which not in (1, 2):
        raise ValueError("which must be 1 or 2")
    return load_instance(_load_json(f"example{which}.json"))


def example_policy_table(which: int) -> list[dict]:
    """Reference optimal/myopic actions for the demonstration instances,
    one dict per state with keys patient, s1, s2, optimal, myopic."""
    data = _load_json("example_policies.json")
    cols = data["columns"]
    return [dict(zip(cols, row)) for row in data["tables"][f"example{which}"]]


def five_snf_rates() -> RateTable:
    """Adjusted readmission rates (percent, with 95% bounds) for the five
    facilities by patient type; the default cost input for experiments."""
    d = _load_json("five_snf_rates.json")
    return RateTable(snfs=tuple(d["snfs"]), types=tuple(d["types"]),
                     point=np.asarray(d["rates"]),
                     lower=np.asarray(d["lower"]),
                     upper=np.asarray(d["upper"]))


def five_snf_cost_matrix() -> list[list[float]]:
    """Cost rows per patient type over facilities A..E."""
    return five_snf_rates().costs_matrix()


def case_names() -> list[str]:
    return [f"case{i}" for i in range(1, 6)]


def case_baselines(name: str) -> BaselineSet:
    d = _load_json("cases.json")[name]
    return BaselineSet(matrices=np.asarray(d["baselines"]))


def case_printed_kernels(name: str) -> dict[str, list[list[float]]]:
    """The published (two-decimal) scenario-1 matrices of a benchmark case,
    keyed ``"a,j"`` for actions and facilities 1..5."""
    return _load_json("cases.json")[name]["scenario1_printed"]


def case_instance(name: str, loss_penalty: float = 100.0) -> Instance:
    """Five-facility benchmark instance: published case kernels, the five-SNF
    rate table as costs, and equal discharge probabilities of 0.2."""
    printed = case_printed_kernels(name)
    baselines = case_baselines(name)
    kernels = dict(printed)
    for j in range(1, 6):
        kernels[f"0,{j}"] = baselines.matrices[j - 1].tolist()
    return load_instance({
        "num_types": 4,
        "num_facilities": 5,
        "lambda": [0.2, 0.2, 0.2, 0.2],
        "loss_penalty": loss_penalty,
        "costs": five_snf_cost_matrix(),
        "kernels": kernels,
        "labels": {"facilities": list(FACILITY_LABELS), "types": list(TYPE_LABELS)},
    })


def case_policy_table(name: str) -> list[dict]:
    d = _load_json("cases.json")[name]
    cols = d["policy_columns"]
    return [dict(zip(cols, row)) for row in d["policies"]]


def reference_policy(instance: Instance, table: list[dict], column: str,
                     kind: str = "custom") -> Policy:
    """Assemble a full policy from a reference action table (states not in
    the table, i.e. no-discharge states, get the loss action)."""
    acts = np.zeros(instance.num_states, dtype=int)
    l = instance.num_facilities
    for row in table:
        bits = tuple(int(row[f"s{j}"]) for j in range(1, l + 1))
        idx = instance.encode(SystemState(patient=int(row["patient"]), avail=(1, *bits)))
        acts[idx] = int(row[column])
    return Policy(actions=acts, kind=kind)


# ----------------------------------------------------------------------
# synthetic discharge records
# ----------------------------------------------------------------------

def synthetic_discharges(num_records: int = 4000, seed: int = 7,
                         snfs=("A", "B"), types=("med", "surg"),
                         base_rate: float = 0.18) -> tuple[list[DischargeRecord], dict]:
    """Draw records from a known logistic model (for demos and oracle tests).

    Returns the records and the generating truth: coefficient map plus the
    true cell probabilities at the zero-covariate profile.
    """
    rng = np.random.default_rng(seed)
    coef = {"intercept": float(np.log(base_rate / (1 - base_rate))),
            "hcc": 0.35, "first_hosp": -0.4}
    for s_i, s in enumerate(snfs[1:], 1):
        coef[f"snf[{s}]"] = 0.3 * s_i
    for t_i, t in enumerate(types[1:], 1):
        coef[f"type[{t}]"] = 0.5 * t_i
    for s_i, s in enumerate(snfs[1:], 1):
        for t_i, t in enumerate(types[1:], 1):
            coef[f"snf[{s}]:type[{t}]"] = -0.35 * s_i * t_i

    records = []
    for _ in range(num_records):
        snf = snfs[rng.integers(len(snfs))]
        ptype = types[rng.integers(len(types))]
        hcc = float(rng.normal())
        first = int(rng.random() < 0.5)
        z = (coef["intercept"] + coef["hcc"] * hcc + coef["first_hosp"] * first
             + coef.get(f"snf[{snf}]", 0.0) + coef.get(f"type[{ptype}]", 0.0)
             + coef.get(f"snf[{snf}]:type[{ptype}]", 0.0))
        p = 1.0 / (1.0 + np.exp(-z))
        records.append(DischargeRecord(
            readmitted=int(rng.random() < p), snf=snf, patient_type=ptype,
            covariates={"hcc": hcc, "first_hosp": float(first)}))

    truth_cells = {}
    for snf in snfs:
        for ptype in types:
            z = (coef["intercept"] + coef.get(f"snf[{snf}]", 0.0)
                 + coef.get(f"type[{ptype}]", 0.0)
                 + coef.get(f"snf[{snf}]:type[{ptype}]", 0.0))
            truth_cells[(snf, ptype)] = 100.0 / (1.0 + np.exp(-z))
    return records, {"coef": coef, "cells_at_zero_profile": truth_cells}


def records_to_csv_text(records) -> str:
    cov_names = sorted(records[0].covariates)
    buf = StringIO()
    writer = csv.writer(buf)
    writer.writerow(["readmitted", "snf", "patient_type", *cov_names])
    for r in records:
        writer.writerow([r.readmitted, r.snf, r.patient_type,
                         *[r.covariates[c] for c in cov_names]])
    return buf.getvalue()


def synthetic_csv_path():
    """Path of the packaged synthetic discharge CSV."""
    return resources.files("snftransfer.data").joinpath("synthetic_discharges.csv")


def resolve_instance(spec: str) -> Instance:
    """Resolve a CLI instance argument: a JSON file path or a fixture name
    (``example1``, ``example2``, ``case1``..``case5``)."""
    import os

    from .model import load_instance_file

    if os.path.exists(spec):
        return load_instance_file(spec)
    if spec in ("example1", "example2"):
        return example_instance(int(spec[-1]))
    if spec in case_names():
        return case_instance(spec)
    raise FileNotFoundError(
        f"{spec!r} is neither an instance file nor a packaged fixture name")
