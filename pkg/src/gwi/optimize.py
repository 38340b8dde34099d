"""Maximization of GWI violations over measurement angles.

Objectives are evaluated on batches of parameter vectors, one row per
restart, and every kernel is row-wise elementwise so a restart's
trajectory does not depend on which other restarts share the batch.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np
from numpy import cos, sin

from .errors import ArityError, DomainError, ValidationError
from .expression import CORRELATOR, InequalityExpression, evaluate, expand_to_correlators, gwi_correlator, term_table
from .observables import (
    SettingSet,
    cluster_reduced_settings,
    ghz_reduced_settings,
    normalize_plane,
    setting_set_from_bloch,
    setting_set_from_flat,
    w_reduced_settings,
)
from .qstate import PureState, add_white_noise

TWO_PI = 2 * math.pi


# -- reduced objectives -----------------------------------------------------

def ghz_reduced(alpha, beta):
    """GHZ4 value for X-Y settings with ``sum phi_i = alpha``, ``phi'_i = phi_i + beta``."""
    return cos(alpha) - cos(alpha + 4 * beta) - 4 * cos(alpha + beta)


def cluster_reduced(phi1, phi1p):
    """Cluster4 value on the two-angle X-Z family of ``cluster_reduced_settings``."""
    c, s = cos(phi1), sin(phi1)
    cp, sp = cos(phi1p), sin(phi1p)
    return (c**4 - cp**4 - 2 * cp**2 - 2 * c**2
            + 4 * cp**3 - 4 * c**2 * cp - 4 * c**3 * cp
            - 4 * c * cp + 8 * c * s * sp)


def w_reduced(phi1p, phi2, phi2p, phi3, phi3p):
    """W4 value for X-Z settings with ``phi_1 = 0``, ``phi_4 = phi_2``, ``phi'_4 = phi'_2``."""
    a, b, bp, g, gp = phi1p, phi2, phi2p, phi3, phi3p
    return (
        cos(2 * b) / 4 + cos(2 * bp) / 4 - cos(2 * b - g) / 8 + cos(2 * b - gp) / 8
        + cos(a + 2 * b + g) / 2 + cos(a + 2 * bp + gp) / 2
        + cos(b + bp - g) / 4 + cos(b - bp + g) / 4 + cos(a + b) / 2 + cos(a + bp) / 2
        + cos(a + g) / 2 + 3 * cos(b + bp) / 2
        + cos(a + gp) / 2 + cos(b + g) / 2 + 3 * cos(b + gp) / 2 + 3 * cos(bp + g) / 2
        + cos(bp + gp) / 2 + cos(a - 2 * b - g) / 8
        + cos(a + 2 * b - g) / 8 + cos(a - 2 * bp - gp) / 8 + cos(a + 2 * bp - gp) / 8
        + cos(b - bp - g) / 4 - 2 * cos(b) - 5 * cos(g) / 4
        + cos(gp) / 4 - cos(a - b) / 2 + cos(a + 2 * b) / 2 - cos(a - bp) / 2
        - cos(a + 2 * bp) / 2 - cos(a - g) / 4 - cos(b - bp) / 2
        - cos(a - gp) / 4 - cos(b - g) / 2 - cos(b - gp) / 2 - cos(bp - g) / 2
        - 5 * cos(2 * b + g) / 8 - cos(bp - gp) / 2
        + 9 * cos(2 * b + gp) / 8 - cos(2 * bp + gp) / 2 + cos(a + b + g)
        - cos(a + bp + gp) + 9 * cos(b + bp + g) / 4 - 1.5
    )


class Objective:
    """Batched objective: ``batch(X)`` maps ``(B, dim)`` to ``(B,)``."""

    name = "objective"
    dim = 0
    default_restarts = 64
    periodic = True

    def batch(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x) -> float:
        return float(self.batch(np.asarray(x, dtype=float).reshape(1, -1))[0])

    def sample_start(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(0.0, TWO_PI, self.dim)

    def settings(self, x) -> SettingSet:
        raise NotImplementedError


class ReducedObjective(Objective):
    def __init__(self, name: str, fn: Callable, dim: int, to_settings: Callable):
        self.name, self._fn, self.dim, self._to_settings = name, fn, dim, to_settings

    def batch(self, X):
        X = np.asarray(X, dtype=float)
        return self._fn(*(X[:, k] for k in range(self.dim)))

    def settings(self, x) -> SettingSet:
        return self._to_settings(*np.asarray(x, dtype=float))


REDUCED_GHZ = ReducedObjective("ghz-reduced", ghz_reduced, 2, ghz_reduced_settings)
REDUCED_CLUSTER = ReducedObjective("cluster-reduced", cluster_reduced, 2, cluster_reduced_settings)
REDUCED_W = ReducedObjective("w-reduced", w_reduced, 5, w_reduced_settings)
REDUCED = {o.name: o for o in (REDUCED_GHZ, REDUCED_CLUSTER, REDUCED_W)}

BLOCH = "BLOCH"
SPHERE = "SPHERE"
_DIMS = {BLOCH: 6, SPHERE: 4}


def _bloch_bras(vecs: np.ndarray) -> np.ndarray:
    """Conjugated eigenkets for unit Bloch vectors ``(..., 3)`` -> ``(..., 2, 2)``.

    Axis -2 is the outcome (+1, -1); each ket is the better-conditioned
    column of the projector ``(I + o n.sigma) / 2``.
    """
    x, y, z = vecs[..., 0], vecs[..., 1], vecs[..., 2]
    bras = []
    for o in (1.0, -1.0):
        first = o * z >= 0
        norm0 = np.sqrt(np.maximum((1 + o * z) / 2, 0.0))
        norm1 = np.sqrt(np.maximum((1 - o * z) / 2, 0.0))
        c0 = np.stack([(1 + o * z) / 2, o * (x + 1j * y) / 2], axis=-1)
        c1 = np.stack([o * (x - 1j * y) / 2, (1 - o * z) / 2 + 0j], axis=-1)
        ket = np.where(first[..., None], c0 / np.where(first, norm0, 1.0)[..., None],
                       c1 / np.where(first, 1.0, norm1)[..., None])
        bras.append(np.conj(ket))
    return np.stack(bras, axis=-2)


class FullObjective(Objective):
    """Quantum value of ``expr`` on a pure state, optimized over every angle.

    ``plane`` is ``"XY"``/``"XZ"`` (parameters ``phi_1, phi'_1, ...``) or
    ``"SPHERE"`` (polar and azimuthal angle per observable) or ``"BLOCH"``
    (unnormalized raw Bloch vectors, three per observable).
    """

    default_restarts = 256

    def __init__(self, state: PureState, plane: str = "XY", expr: Optional[InequalityExpression] = None):
        if not isinstance(state, PureState):
            raise ValidationError("the batched objective needs a pure state")
        n = state.n_parties
        self.state = state
        self.expr = gwi_correlator(n) if expr is None else expr
        if self.expr.n_parties != n:
            raise ArityError(f"expression has {self.expr.n_parties} parties, state has {n}")
        if self.expr.n_settings != 2:
            raise ValidationError("full optimization needs a two-setting expression")
        key = str(plane).upper()
        self.plane = key if key in _DIMS else normalize_plane(plane)
        self.periodic = self.plane != BLOCH
        self.dim = _DIMS.get(self.plane, 2) * n
        self.name = f"full:{self.plane}:n={n}"
        self._psi = np.asarray(state.amplitudes)
        self._weights = self._outcome_weight_vector()

    def _outcome_weight_vector(self) -> np.ndarray:
        n = self.expr.n_parties
        coefs, choices, weights = term_table(self.expr)
        g = np.zeros((4,) * n)
        for coef, ch, w in zip(coefs, choices, weights):
            outer = np.ones(())
            for i in range(n):
                v = np.zeros(4)
                v[2 * ch[i]:2 * ch[i] + 2] = w[i]
                outer = np.multiply.outer(outer, v)
            g += float(coef) * outer
        return g.reshape(-1)

    def bloch_vectors(self, X: np.ndarray) -> np.ndarray:
        """``(B, n, 2, 3)`` unit Bloch vectors (party, choice)."""
        X = np.asarray(X, dtype=float)
        n = self.state.n_parties
        if self.plane == BLOCH:
            v = X.reshape(-1, n, 2, 3)
            return v / np.sqrt((v * v).sum(axis=-1, keepdims=True))
        if self.plane == SPHERE:
            ang = X.reshape(-1, n, 2, 2)
            theta, phi = ang[..., 0], ang[..., 1]
            return np.stack([sin(theta) * cos(phi), sin(theta) * sin(phi), cos(theta)], axis=-1)
        phi = X.reshape(-1, n, 2)
        zero = np.zeros_like(phi)
        if self.plane == "XY":
            return np.stack([cos(phi), sin(phi), zero], axis=-1)
        return np.stack([sin(phi), zero, cos(phi)], axis=-1)

    def batch(self, X):
        vecs = self.bloch_vectors(X)
        B, n = vecs.shape[0], vecs.shape[1]
        bras = _bloch_bras(vecs).reshape(B, n, 4, 2)  # k = 2 * choice + outcome
        amp = np.broadcast_to(self._psi, (B, self._psi.size)).reshape(B, 2, -1)
        for i in range(n):
            br = bras[:, i]
            new = amp[:, 0, :, None] * br[:, None, :, 0] + amp[:, 1, :, None] * br[:, None, :, 1]
            amp = new.reshape(B, 2, -1) if i < n - 1 else new.reshape(B, -1)
        probs = amp.real**2 + amp.imag**2
        return (probs * self._weights).sum(axis=1)

    def settings(self, x) -> SettingSet:
        x = np.asarray(x, dtype=float)
        if self.plane in _DIMS:
            vecs = self.bloch_vectors(x[None])[0]
            return setting_set_from_bloch(vecs.tolist())
        return setting_set_from_flat(self.plane, x)


# -- Nelder-Mead over a batch of restarts -----------------------------------

def _nelder_mead(fun, x0: np.ndarray, step: float, xtol: float, ftol: float, max_iters: int):
    """Minimize ``fun`` from every row of ``x0`` independently.

    Standard coefficients (reflection 1, expansion 2, contraction 1/2,
    shrink 1/2).  A restart stops when the largest coordinate distance from
    the best vertex is below ``xtol`` or the value spread is below ``ftol``.
    """
    R, d = x0.shape
    sim = np.repeat(x0[:, None, :], d + 1, axis=1)
    sim[:, 1:, :] += step * np.eye(d)[None]
    fs = fun(sim.reshape(-1, d)).reshape(R, d + 1)
    nfev = R * (d + 1)
    active = np.ones(R, dtype=bool)
    converged = np.zeros(R, dtype=bool)
    iters = np.zeros(R, dtype=np.int64)

    while True:
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        order = np.argsort(fs[idx], axis=1, kind="stable")
        sim[idx] = np.take_along_axis(sim[idx], order[:, :, None], axis=1)
        fs[idx] = np.take_along_axis(fs[idx], order, axis=1)
        s, f = sim[idx], fs[idx]
        xspread = np.abs(s[:, 1:] - s[:, :1]).max(axis=(1, 2))
        fspread = np.abs(f[:, 1:] - f[:, :1]).max(axis=1)
        done = (xspread <= xtol) | (fspread <= ftol)
        converged[idx[done]] = True
        stop = done | (iters[idx] >= max_iters)
        active[idx[stop]] = False
        keep = ~stop
        idx, s, f = idx[keep], s[keep], f[keep]
        if idx.size == 0:
            break
        iters[idx] += 1

        xbar = s[:, :-1].mean(axis=1)
        xw = s[:, -1]
        f0, fsec, fw = f[:, 0], f[:, -2], f[:, -1]
        xr = 2 * xbar - xw
        fr = fun(xr)
        nfev += len(idx)
        new_x, new_f = xr.copy(), fr.copy()
        shrink = np.zeros(len(idx), dtype=bool)

        exp = fr < f0
        if exp.any():
            xe = 3 * xbar[exp] - 2 * xw[exp]
            fe = fun(xe)
            nfev += int(exp.sum())
            better = fe < fr[exp]
            sel = np.flatnonzero(exp)[better]
            new_x[sel], new_f[sel] = xe[better], fe[better]

        outside = (fr >= fsec) & (fr < fw)
        if outside.any():
            xc = xbar[outside] + 0.5 * (xr[outside] - xbar[outside])
            fc = fun(xc)
            nfev += int(outside.sum())
            ok = fc <= fr[outside]
            rows = np.flatnonzero(outside)
            new_x[rows[ok]], new_f[rows[ok]] = xc[ok], fc[ok]
            shrink[rows[~ok]] = True

        inside = fr >= fw
        if inside.any():
            xcc = xbar[inside] + 0.5 * (xw[inside] - xbar[inside])
            fcc = fun(xcc)
            nfev += int(inside.sum())
            ok = fcc < fw[inside]
            rows = np.flatnonzero(inside)
            new_x[rows[ok]], new_f[rows[ok]] = xcc[ok], fcc[ok]
            shrink[rows[~ok]] = True

        s[:, -1], f[:, -1] = new_x, new_f
        if shrink.any():
            ss = s[shrink]
            ss[:, 1:] = ss[:, :1] + 0.5 * (ss[:, 1:] - ss[:, :1])
            fvals = fun(ss[:, 1:].reshape(-1, d)).reshape(len(ss), d)
            nfev += fvals.size
            s[shrink] = ss
            fsh = f[shrink]
            fsh[:, 1:] = fvals
            f[shrink] = fsh
        sim[idx], fs[idx] = s, f

    return sim[:, 0].copy(), fs[:, 0].copy(), converged, iters, nfev


# -- public API -------------------------------------------------------------

@dataclass(frozen=True)
class OptimizerConfig:
    restarts: Optional[int] = None
    seed: int = 42
    tol: float = 1e-9
    ftol: float = 1e-12
    max_iters: int = 20_000
    step: float = 0.5
    plane: Optional[str] = None

    def __post_init__(self):
        if self.restarts is not None and self.restarts < 1:
            raise DomainError(f"restarts must be >= 1, got {self.restarts}")
        if not self.tol > 0 or not self.ftol > 0:
            raise DomainError("tolerances must be positive")
        if self.max_iters < 1:
            raise DomainError("max_iters must be >= 1")

    @classmethod
    def from_json(cls, data) -> "OptimizerConfig":
        if isinstance(data, (str, bytes)):
            data = json.loads(data)
        allowed = {"restarts", "seed", "tol", "ftol", "max_iters", "step", "plane"}
        unknown = set(data) - allowed
        if unknown:
            raise ValidationError(f"unknown optimizer config keys: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class OptimizationResult:
    objective: str
    best_value: float
    best_angles: list
    restarts_used: int
    seed: int
    converged: bool
    n_converged: int
    best_restart: int
    iterations: int
    evaluations: int

    def to_json(self) -> dict:
        return asdict(self)


def restart_starts(objective: Objective, seed: int, restarts: int) -> np.ndarray:
    """Start point of restart ``r`` depends only on ``(seed, r)``."""
    return np.array([objective.sample_start(np.random.default_rng([seed, r])) for r in range(restarts)])


def maximize(objective: Objective, config: Optional[OptimizerConfig] = None) -> OptimizationResult:
    """Multi-start Nelder-Mead maximization; deterministic given the seed."""
    config = config or OptimizerConfig()
    restarts = config.restarts or objective.default_restarts
    starts = restart_starts(objective, config.seed, restarts)
    xs, fs, converged, iters, nfev = _nelder_mead(
        lambda X: -objective.batch(X), starts, config.step, config.tol, config.ftol, config.max_iters)
    values = -fs
    if not np.all(np.isfinite(values)):
        raise ArithmeticError("objective produced non-finite values")
    best = int(np.argmax(values))
    x = np.mod(xs[best], TWO_PI) if objective.periodic else xs[best]
    return OptimizationResult(
        objective=objective.name,
        best_value=float(values[best]),
        best_angles=[float(v) for v in x],
        restarts_used=restarts,
        seed=config.seed,
        converged=bool(converged[best]),
        n_converged=int(converged.sum()),
        best_restart=best,
        iterations=int(iters.max()),
        evaluations=int(nfev),
    )


@dataclass(frozen=True)
class VisibilityResult:
    threshold: float
    max_violation: float
    bound: float
    unattainable: bool
    bracket: dict
    optimization: OptimizationResult = field(repr=False)

    def to_json(self) -> dict:
        out = {k: getattr(self, k) for k in ("threshold", "max_violation", "bound", "unattainable", "bracket")}
        out["optimization"] = self.optimization.to_json()
        return out


BRACKET_STEP = 0.01
BRACKET_TOL = 1e-6


def visibility_threshold(state: PureState, expr: Optional[InequalityExpression] = None,
                         plane: str = "XY", config: Optional[OptimizerConfig] = None,
                         objective: Optional[Objective] = None) -> VisibilityResult:
    """Smallest white-noise visibility at which ``expr`` is still violated.

    Every correlator of a traceless product scales by ``v`` under white
    noise, so the threshold is ``bound / max_violation``.  The result is
    cross-checked by direct evaluation on the noisy states at
    ``threshold +/- 0.01`` with the optimal settings.
    """
    expr = gwi_correlator(state.n_parties) if expr is None else expr
    if expr.form != CORRELATOR:
        expr = expand_to_correlators(expr)
    if expr.n_parties != state.n_parties:
        raise ArityError(f"expression has {expr.n_parties} parties, state has {state.n_parties}")
    objective = objective or FullObjective(state, plane, expr)
    opt = maximize(objective, config)
    bound = float(expr.bound)
    vmax = opt.best_value
    if vmax <= bound:
        return VisibilityResult(1.0, vmax, bound, True, {"checked": False}, opt)
    threshold = bound / vmax
    settings = objective.settings(opt.best_angles)
    v_hi = min(1.0, threshold + BRACKET_STEP)
    v_lo = max(0.0, threshold - BRACKET_STEP)
    val_hi = evaluate(expr, add_white_noise(state, v_hi), settings)
    val_lo = evaluate(expr, add_white_noise(state, v_lo), settings)
    linear = max(abs(val_hi - v_hi * vmax), abs(val_lo - v_lo * vmax))
    bracket = {
        "checked": True,
        "v_above": v_hi, "value_above": val_hi,
        "v_below": v_lo, "value_below": val_lo,
        "linearity_error": linear,
        "ok": bool(val_hi > bound and val_lo < bound and linear <= BRACKET_TOL),
    }
    return VisibilityResult(threshold, vmax, bound, False, bracket, opt)
