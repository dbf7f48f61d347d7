"""Re-run the theory checks over a stored experiment bundle."""

from __future__ import annotations

import csv
import json
import os
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from . import harness, theory
from .core import RunRecord


@dataclass
class VerifyOutcome:
    optimizer: str
    seed: int
    descent_ok: bool
    gradient_bound_ok: bool

    @property
    def ok(self) -> bool:
        return self.descent_ok and self.gradient_bound_ok


def _read_grouped(path, key_cols=("optimizer", "seed")):
    grouped = defaultdict(list)
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            grouped[(row["optimizer"], int(row["seed"]))].append(row)
    return grouped


def load_bundle(trace_dir):
    """Reconstruct per-run traces from a results directory."""
    with open(os.path.join(trace_dir, "meta.json")) as fh:
        meta = json.load(fh)
    with open(os.path.join(trace_dir, "runs.json")) as fh:
        runs = {(r["optimizer"], r["seed"]): r for r in json.load(fh)}
    traces = _read_grouped(os.path.join(trace_dir, "trace.csv"))
    theory_rows = _read_grouped(os.path.join(trace_dir, "theory.csv"))

    records = {}
    for key, rows in traces.items():
        rows.sort(key=lambda r: int(r["k"]))
        k = len(rows)
        info = runs[key]
        has_f = rows[0]["f"] != ""
        rec = RunRecord(
            grad_norm=np.array([float(r["grad_norm"]) for r in rows]),
            grad_norm_opt=np.array([float(r["grad_norm_O"]) for r in rows]),
            below_delta=np.array([int(r["below_delta_count"]) for r in rows]),
            card_R=np.array([int(r["card_R"]) for r in rows]),
            card_A=np.array([int(r["card_A"]) for r in rows]),
            card_D=np.array([int(r["card_D"]) for r in rows]),
            max_abs_x=np.zeros(k),
            x_final=np.zeros(meta["n"]),
            reason=info["reason"],
            objective=(np.array([float(r["f"]) for r in rows])
                       if has_f else None),
            objective_final=info["f_final"],
        )
        trows = theory_rows.get(key)
        if trows:
            trows.sort(key=lambda r: int(r["k"]))
            rec.sum_gO2_over_wO = np.array(
                [float(r["sum_gO2_over_wO"]) for r in trows])
            rec.sum_gO2_over_wO2 = np.array(
                [float(r["sum_gO2_over_wO2"]) for r in trows])
            rec.sum_xD2_over_wD2 = np.array(
                [float(r["sum_xD2_over_wD2"]) for r in trows])
            rec.max_abs_x = np.array([float(r["max_abs_x"]) for r in trows])
        records[key] = rec
    return meta, runs, records


def verify_bundle(trace_dir) -> list[VerifyOutcome]:
    """Run descent and gradient-bound checks on every pruning-aware run.

    Baseline runs lack the masked weighted sums and are skipped.
    """
    meta, runs, records = load_bundle(trace_dir)
    outcomes = []
    for key in sorted(records):
        method, seed = key
        if method not in harness.PRUNADAG_METHODS:
            continue
        rec = records[key]
        if rec.sum_gO2_over_wO is None or rec.objective is None:
            continue
        info = runs[key]
        L = info["lipschitz"]
        descent_ok = bool(np.all(theory.check_descent_lemma(rec, L)))
        inp = theory.BoundInputs(
            n=meta["n"], T=meta["T"], varsigma=meta["varsigma"],
            lipschitz=L, gamma0=info["f0"], kappa_x=0.0)
        bound_ok = bool(np.all(theory.check_gradient_bound(rec, inp)))
        outcomes.append(VerifyOutcome(method, seed, descent_ok, bound_ok))
    return outcomes
