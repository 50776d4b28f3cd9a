"""Refinement studies and stability sweeps over the built-in problems.

A convergence study runs one reference solve, integrates the perturbed
method for every dt in a descending ladder, and records final-time
max-norm errors with pairwise observed orders.  Runs that blow up are
recorded (error = inf plus the failure reason) and do not abort the
study.  Two fitted slopes are attached: ``slope`` fits the finest
(up to) four usable records -- finite error below the O(1) solution
scale -- which is the number quoted everywhere; ``slope_all`` fits every
finite record.
"""

from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .integrator import (AnchorPolicy, IntegrationError, integrate,
                         reference_solution, resolved_newton_baseline)
from .problems import problem_by_name
from .tableau import registry_lookup

__all__ = [
    "ReferenceKind",
    "ConvergenceRecord",
    "ConvergenceStudy",
    "SweepRow",
    "default_dts",
    "default_reference_dt",
    "run_convergence",
    "run_stability_sweep",
    "emit_results",
    "study_to_dict",
    "study_from_json",
    "STABLE_ERROR_LIMIT",
]

# Final errors at or above this are treated as unstable data points: the
# solutions of every built-in problem are O(1).
STABLE_ERROR_LIMIT = 1.0
SLOPE_POINTS = 4


class ReferenceKind(enum.Enum):
    RK4 = "rk4"
    RESOLVED_NEWTON = "newton"

    @classmethod
    def parse(cls, text: str) -> "ReferenceKind":
        key = text.strip().lower()
        for member in cls:
            if key in (member.value, member.name.lower()):
                return member
        raise ValueError(f"unknown reference kind {text!r}; use 'rk4' or 'newton'")


# Ladder exponents: dt = tf / 2^k.  The stiff porous-medium problem needs a
# finer tail before the high-order methods reach their asymptotic range.
_LADDERS = {
    "burgers": range(4, 11),
    "shallow-water": range(4, 11),
    "porous-medium": range(4, 12),
    "scalar": range(4, 11),
}

# Explicit RK4 on the porous-medium semi-discretization is diffusion-limited,
# hence the much smaller reference step there.
_RK4_REFERENCE_DT = {
    "burgers": 1e-4,
    "shallow-water": 1e-4,
    "porous-medium": 2e-6,
    "scalar": 1e-4,
}
_NEWTON_REFERENCE_DT = {
    "burgers": 1e-3,
    "shallow-water": 1e-3,
    "porous-medium": 2.5e-4,
    "scalar": 1e-4,
}
_NEWTON_REFERENCE_METHOD = "D3s4p1m"


def default_dts(problem: str, t_final: float) -> list[float]:
    """Descending dt ladder tf/2^k for a named problem."""
    ks = _LADDERS.get(problem.strip().lower())
    if ks is None:
        raise KeyError(f"no default ladder for problem {problem!r}")
    return [t_final / 2**k for k in ks]


def default_reference_dt(problem: str, kind: ReferenceKind) -> float:
    table = _RK4_REFERENCE_DT if kind is ReferenceKind.RK4 else _NEWTON_REFERENCE_DT
    try:
        return table[problem.strip().lower()]
    except KeyError:
        raise KeyError(f"no default reference dt for problem {problem!r}") from None


@dataclass
class ConvergenceRecord:
    dt: float
    error: float
    observed_order: float | None = None
    failure: str | None = None

    @property
    def usable(self) -> bool:
        return math.isfinite(self.error) and self.error < STABLE_ERROR_LIMIT


@dataclass
class ConvergenceStudy:
    problem: str
    method: str
    strategy: str
    policy: AnchorPolicy
    n: int
    t_final: float
    dts: list[float]
    reference: ReferenceKind = ReferenceKind.RK4
    reference_dt: float | None = None
    records: list[ConvergenceRecord] = field(default_factory=list)
    slope: float | None = None
    slope_all: float | None = None

    def __post_init__(self):
        if any(b >= a for a, b in zip(self.dts, self.dts[1:])):
            raise ValueError("dts must be strictly decreasing")


@lru_cache(maxsize=32)
def _cached_reference(problem: str, n: int, t_final: float,
                      kind: ReferenceKind, dt_ref: float) -> np.ndarray:
    inst = problem_by_name(problem, n)
    if kind is ReferenceKind.RK4:
        ref = reference_solution(inst, t_final, dt_ref)
    else:
        base = registry_lookup(_NEWTON_REFERENCE_METHOD).base
        ref = resolved_newton_baseline(base, inst, dt_ref, t_final)
    ref.setflags(write=False)
    return ref


def _fit_slope(records: list[ConvergenceRecord], finest: int | None) -> float | None:
    usable = [r for r in records if r.usable and r.error > 0.0]
    if finest is not None:
        usable = usable[-finest:]
    if len(usable) < 2:
        return None
    ld = np.log([r.dt for r in usable])
    le = np.log([r.error for r in usable])
    return float(np.polyfit(ld, le, 1)[0])


def run_convergence(study: ConvergenceStudy) -> ConvergenceStudy:
    """Fill a study's records, observed orders and fitted slopes in place."""
    inst = problem_by_name(study.problem, study.n)
    pt = registry_lookup(study.method)
    dt_ref = study.reference_dt or default_reference_dt(study.problem,
                                                        study.reference)
    study.reference_dt = dt_ref
    ref = _cached_reference(study.problem, study.n, study.t_final,
                            study.reference, dt_ref)

    study.records = []
    for dt in study.dts:
        try:
            u, _ = integrate(pt, inst, study.strategy, study.policy, dt,
                             study.t_final)
            err = float(np.max(np.abs(u - ref)))
            study.records.append(ConvergenceRecord(dt=dt, error=err))
        except IntegrationError as exc:
            study.records.append(ConvergenceRecord(dt=dt, error=math.inf,
                                                   failure=str(exc)))

    for prev, cur in zip(study.records, study.records[1:]):
        if (math.isfinite(prev.error) and math.isfinite(cur.error)
                and prev.error > 0.0 and cur.error > 0.0):
            cur.observed_order = math.log(prev.error / cur.error) / math.log(
                prev.dt / cur.dt)

    study.slope = _fit_slope(study.records, SLOPE_POINTS)
    study.slope_all = _fit_slope(study.records, None)
    return study


@dataclass
class SweepRow:
    n: int
    cfl: float
    stable: bool
    final_error: float


def run_stability_sweep(
    problem: str,
    method: str,
    strategy: str,
    policy: AnchorPolicy,
    n_list: list[int],
    dt: float,
    t_final: float,
    reference: ReferenceKind = ReferenceKind.RK4,
) -> list[SweepRow]:
    """Fixed-dt robustness scan across grid resolutions."""
    if not n_list:
        raise ValueError("n_list must not be empty")
    pt = registry_lookup(method)
    rows = []
    for n in n_list:
        inst = problem_by_name(problem, n)
        cfl = dt / inst.grid.dx if inst.grid is not None else math.nan
        dt_ref = default_reference_dt(problem, reference)
        try:
            ref = _cached_reference(problem, n, t_final, reference, dt_ref)
            u, _ = integrate(pt, inst, strategy, policy, dt, t_final)
            err = float(np.max(np.abs(u - ref)))
        except IntegrationError:
            err = math.inf
        rows.append(SweepRow(n=n, cfl=cfl,
                             stable=math.isfinite(err) and err < STABLE_ERROR_LIMIT,
                             final_error=err))
    return rows


# ---------------------------------------------------------------------------
# Result emission
# ---------------------------------------------------------------------------

def _error_repr(error: float):
    return "inf" if math.isinf(error) else error


def study_to_dict(study: ConvergenceStudy) -> dict:
    return {
        "problem": study.problem,
        "method": study.method,
        "strategy": study.strategy,
        "anchor": study.policy.value,
        "nx": study.n,
        "tf": study.t_final,
        "reference": study.reference.value,
        "reference_dt": study.reference_dt,
        "slope": study.slope,
        "slope_all": study.slope_all,
        "records": [
            {
                "dt": r.dt,
                "error": _error_repr(r.error),
                "observed_order": r.observed_order,
                "failure": r.failure,
            }
            for r in study.records
        ],
    }


def study_from_json(text: str) -> ConvergenceStudy:
    doc = json.loads(text)
    study = ConvergenceStudy(
        problem=doc["problem"],
        method=doc["method"],
        strategy=doc["strategy"],
        policy=AnchorPolicy.parse(doc["anchor"]),
        n=int(doc["nx"]),
        t_final=float(doc["tf"]),
        dts=[float(r["dt"]) for r in doc["records"]],
        reference=ReferenceKind.parse(doc["reference"]),
        reference_dt=doc.get("reference_dt"),
    )
    study.slope = doc.get("slope")
    study.slope_all = doc.get("slope_all")
    study.records = [
        ConvergenceRecord(
            dt=float(r["dt"]),
            error=math.inf if r["error"] == "inf" else float(r["error"]),
            observed_order=r.get("observed_order"),
            failure=r.get("failure"),
        )
        for r in doc["records"]
    ]
    return study


def emit_results(study: ConvergenceStudy, fmt: str, path) -> None:
    """Write a completed study as CSV (# key=value header) or JSON."""
    fmt = fmt.strip().lower()
    if fmt == "json":
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(study_to_dict(study), fh, indent=2)
            fh.write("\n")
        return
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}; use 'csv' or 'json'")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# problem={study.problem}\n")
        fh.write(f"# method={study.method}\n")
        fh.write(f"# strategy={study.strategy}\n")
        fh.write(f"# anchor={study.policy.value}\n")
        fh.write(f"# nx={study.n}\n")
        fh.write(f"# tf={study.t_final:.17g}\n")
        fh.write(f"# reference={study.reference.value}\n")
        writer = csv.writer(fh)
        writer.writerow(["dt", "error", "observed_order", "failure"])
        for r in study.records:
            writer.writerow([
                f"{r.dt:.17g}",
                "inf" if math.isinf(r.error) else f"{r.error:.17g}",
                "" if r.observed_order is None else f"{r.observed_order:.6g}",
                r.failure or "",
            ])
