"""One-shot reproduction of the quadripartite GWI results.

Each row compares a computed number with its published target.  Rows
flagged ``gating`` decide the exit status; the remaining rows are reported
for context (for instance the objective at the quoted, rounded optimal
angles, which are not exact maximizers).
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .expression import build_gwi, build_wigner_original, evaluate, gwi_correlator
from .lhv import behavior_from_state, jpd_feasible, lhv_max, verify_marginal_identity
from .observables import setting_set_from_angles, w_reduced_settings, xz_setting
from .optimize import (
    REDUCED_CLUSTER,
    REDUCED_GHZ,
    REDUCED_W,
    OptimizerConfig,
    cluster_reduced,
    ghz_reduced,
    maximize,
    visibility_threshold,
    w_reduced,
)
from .qstate import MixedState, basis_state, make_cluster4, make_ghz, make_singlet, make_w

DEFAULT_SEED = 42

TARGET_GHZ_MAX = 5.656848
TARGET_CLUSTER_MAX = 5.7442
TARGET_W_MAX = 6.5603
TARGET_VISIBILITY = {"ghz": 0.7071, "cluster4": 0.6964, "w": 0.6097}
QUOTED_GHZ_ANGLES = [(0.6981, 2.2427), (5.5938, 4.0492)]
QUOTED_CLUSTER_ANGLES = [(0.3578, 2.2689), (5.9341, 4.0230)]
QUOTED_W_ANGLES = (2.271, 0.131, 2.298, -2.557, -0.892)

STATE_PLANES = {"ghz": "XY", "cluster4": "XZ", "w": "XZ"}


@dataclass
class Row:
    quantity: str
    target: object
    computed: object
    tolerance: float
    comparison: str
    gating: bool = True
    passed: bool = False

    def check(self) -> "Row":
        if self.comparison == "exact":
            self.passed = self.computed == self.target
        elif self.comparison == "abs":
            self.passed = abs(float(self.computed) - float(self.target)) <= self.tolerance
        elif self.comparison == "at_most":
            self.passed = float(self.computed) <= float(self.target) + self.tolerance
        else:
            raise ValueError(self.comparison)
        return self


def wigner_symmetric_value(theta: float) -> float:
    """Wigner's expression on the singlet with ``a, c, b`` at ``0, theta, 2 theta``."""
    a, c, b = xz_setting(0.0), xz_setting(theta), xz_setting(2 * theta)
    return evaluate(build_wigner_original(), make_singlet(), [(a, b, c), (a, b, c)])


def run(seed: int = DEFAULT_SEED, restarts_full: Optional[int] = None) -> dict:
    rows: list[Row] = []
    timings: dict[str, float] = {}
    details: dict = {}

    def timed(name):
        class _T:
            def __enter__(self_):
                self_.t = time.perf_counter()

            def __exit__(self_, *exc):
                timings[name] = round(1000 * (time.perf_counter() - self_.t), 3)
        return _T()

    with timed("maxima"):
        cfg = OptimizerConfig(restarts=64, seed=seed)
        for key, obj, target, tol in (("ghz", REDUCED_GHZ, 4 * math.sqrt(2), 1e-6),
                                      ("cluster4", REDUCED_CLUSTER, TARGET_CLUSTER_MAX, 1e-3),
                                      ("w", REDUCED_W, TARGET_W_MAX, 1e-3)):
            res = maximize(obj, cfg)
            details[f"max_{key}"] = res.to_json()
            rows.append(Row(f"max_violation_{key}_reduced", target, res.best_value, tol, "abs").check())

    with timed("quoted_points"):
        for ab in QUOTED_GHZ_ANGLES:
            rows.append(Row(f"ghz_reduced{ab}", TARGET_GHZ_MAX, float(ghz_reduced(*ab)), 1e-4, "abs", gating=False).check())
        for pp in QUOTED_CLUSTER_ANGLES:
            rows.append(Row(f"cluster_reduced{pp}", TARGET_CLUSTER_MAX, float(cluster_reduced(*pp)), 1e-3, "abs", gating=False).check())
        w_red = float(w_reduced(*QUOTED_W_ANGLES))
        rows.append(Row(f"w_reduced{QUOTED_W_ANGLES}", TARGET_W_MAX, w_red, 1e-3, "abs", gating=False).check())
        w_full = evaluate(gwi_correlator(4), make_w(4), w_reduced_settings(*QUOTED_W_ANGLES))
        rows.append(Row("w_reduced_minus_full_evaluation", 0.0, w_red - w_full, 1e-9, "abs").check())

    with timed("visibility"):
        cfg = OptimizerConfig(restarts=restarts_full, seed=seed)
        for key, state in (("ghz", make_ghz(4)), ("cluster4", make_cluster4()), ("w", make_w(4))):
            vis = visibility_threshold(state, plane=STATE_PLANES[key], config=cfg)
            details[f"visibility_{key}"] = vis.to_json()
            rows.append(Row(f"visibility_{key}", TARGET_VISIBILITY[key], vis.threshold, 1e-3, "abs").check())
            rows.append(Row(f"visibility_{key}_bracket_ok", True, bool(vis.bracket.get("ok")), 0.0, "exact").check())
        w_family = visibility_threshold(make_w(4), config=OptimizerConfig(restarts=64, seed=seed), objective=REDUCED_W)
        details["visibility_w_reduced_family"] = w_family.to_json()
        rows.append(Row("visibility_w_reduced_family", TARGET_VISIBILITY["w"], w_family.threshold, 1e-3, "abs",
                        gating=False).check())

    with timed("lhv"):
        for n in range(2, 6):
            rows.append(Row(f"lhv_bound_correlator_n{n}", str(n), str(lhv_max(gwi_correlator(n))), 0.0, "exact").check())
            rows.append(Row(f"lhv_bound_probability_n{n}", "0", str(lhv_max(build_gwi(n))), 0.0, "exact").check())
        for n in range(2, 7):
            ident = verify_marginal_identity(n)
            rows.append(Row(f"marginal_identity_count_n{n}", n * 2**n, ident.residual_count, 0.0, "exact").check())
            rows.append(Row(f"marginal_identity_nonneg_n{n}", True, ident.all_nonneg, 0.0, "exact").check())

    with timed("jpd"):
        chsh = setting_set_from_angles("XZ", [(0.0, math.pi / 2), (math.pi / 4, -math.pi / 4)])
        cases = (("singlet_chsh", make_singlet(), False),
                 ("product_00", basis_state("00"), True),
                 ("maximally_mixed", MixedState.maximally_mixed(2), True))
        for name, state, expected in cases:
            res = jpd_feasible(behavior_from_state(state, chsh))
            rows.append(Row(f"jpd_feasible_{name}", expected, res.feasible, 0.0, "exact").check())

    with timed("wigner"):
        root = brentq(wigner_symmetric_value, 1.0, 2.0, xtol=1e-12)
        rows.append(Row("wigner_sign_change_theta", math.pi / 2, root, 1e-6, "abs").check())

    passed = all(r.passed for r in rows if r.gating)
    return {
        "seed": seed,
        "rows": [asdict(r) for r in rows],
        "details": details,
        "passed": passed,
        "timings": timings,
    }


FIELDS = ("quantity", "target", "computed", "tolerance", "comparison", "gating", "passed")


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(FIELDS)
    for r in rows:
        writer.writerow([_fmt(r[k]) for k in FIELDS])
    return buf.getvalue()


def to_markdown(rows) -> str:
    lines = ["| " + " | ".join(FIELDS) + " |", "|" + "---|" * len(FIELDS)]
    for r in rows:
        lines.append("| " + " | ".join(_fmt(r[k]) for k in FIELDS) + " |")
    return "\n".join(lines) + "\n"


def diff_table(rows) -> str:
    bad = [r for r in rows if r["gating"] and not r["passed"]]
    if not bad:
        return ""
    lines = ["MISMATCHES (quantity: computed vs target, tolerance)"]
    for r in bad:
        lines.append(f"  {r['quantity']}: {_fmt(r['computed'])} vs {_fmt(r['target'])} (tol {r['tolerance']})")
    return "\n".join(lines) + "\n"
