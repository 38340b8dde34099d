"""Local hidden variable oracles.

Deterministic strategies assign a fixed +/-1 outcome to every observable;
they are the extreme points of the local polytope, so exhaustive
enumeration gives exact local bounds.  A joint probability distribution
(JPD) over all ``4**n`` outcome assignments is a convex mixture of them,
and ``jpd_feasible`` decides by linear programming whether one reproduces a
given behaviour.

Indexing: strategy/atom index bits run most-significant first over
``(v(a_1), v(a'_1), ..., v(a_N), v(a'_N))`` with bit 0 meaning +1.  Behaviour
distributions are keyed by choice bit strings (``'0'`` unprimed, ``'1'``
primed) and list probabilities in outcome bit-string order (``'0'`` = +1).
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .errors import ArityError, CapacityError, ValidationError
from .expression import InequalityExpression, gwi_family, render_text, term_table
from .qstate import State, joint_probability
from .simplex import phase_one

MAX_STRATEGY_BITS = 16
MAX_IDENTITY_PARTIES = 6
MAX_JPD_PARTIES = 4
_CHUNK = 8192


@dataclass(frozen=True)
class DeterministicStrategy:
    outcomes: tuple
    n_settings: int = 2

    def __post_init__(self):
        outs = tuple(int(o) for o in self.outcomes)
        if any(o not in (1, -1) for o in outs):
            raise ValidationError(f"strategy outcomes must be +1/-1, got {outs!r}")
        if len(outs) % self.n_settings:
            raise ArityError("strategy length must be a multiple of the settings per party")
        object.__setattr__(self, "outcomes", outs)

    @classmethod
    def from_index(cls, index: int, n: int, n_settings: int = 2) -> "DeterministicStrategy":
        width = n * n_settings
        if not 0 <= index < 1 << width:
            raise ValidationError(f"strategy index {index} out of range for {width} bits")
        bits = format(index, f"0{width}b")
        return cls(tuple(1 if b == "0" else -1 for b in bits), n_settings)

    @property
    def n_parties(self) -> int:
        return len(self.outcomes) // self.n_settings

    @property
    def index(self) -> int:
        return int("".join("0" if o == 1 else "1" for o in self.outcomes), 2)

    def value(self, party: int, choice: int) -> int:
        return self.outcomes[party * self.n_settings + choice]


def _outcome_bits(start: int, stop: int, n: int, m: int) -> np.ndarray:
    """Outcome indices (0 -> +1, 1 -> -1) of strategies ``start..stop-1``, shape ``(S, n, m)``."""
    width = n * m
    idx = np.arange(start, stop, dtype=np.int64)
    shifts = np.arange(width - 1, -1, -1, dtype=np.int64)
    return ((idx[:, None] >> shifts[None, :]) & 1).reshape(-1, n, m)


def _check_capacity(n: int, m: int):
    if n * m > MAX_STRATEGY_BITS:
        limit = MAX_STRATEGY_BITS // m
        raise CapacityError(
            f"strategy enumeration is limited to n <= {limit} parties with {m} settings "
            f"(2**{MAX_STRATEGY_BITS} strategies); got n = {n}")


def strategy_values(expr: InequalityExpression):
    """Exact expression value for every deterministic strategy.

    Returns ``(numerators, denominator)``: an int64 array indexed by strategy
    index and the common denominator of the coefficients.
    """
    n, m = expr.n_parties, expr.n_settings
    _check_capacity(n, m)
    coefs, choices, weights = term_table(expr)
    denom = math.lcm(*(c.denominator for c in coefs)) if coefs else 1
    icoef = np.array([int(c * denom) for c in coefs], dtype=np.int64)
    total = 1 << (n * m)
    out = np.empty(total, dtype=np.int64)
    for start in range(0, total, _CHUNK):
        stop = min(start + _CHUNK, total)
        bits = _outcome_bits(start, stop, n, m)
        prod = np.ones((stop - start, len(coefs)), dtype=np.int64)
        for i in range(n):
            sel = bits[:, i, :][:, choices[:, i]]
            prod *= np.where(sel == 0, weights[:, i, 0], weights[:, i, 1])
        out[start:stop] = prod @ icoef
    return out, denom


def lhv_max(expr: InequalityExpression) -> Fraction:
    """Maximum of ``expr`` over local hidden variable models, exactly."""
    return lhv_argmax(expr)[0]


def lhv_argmax(expr: InequalityExpression):
    """``(max value, lowest-index maximizing strategy)``."""
    values, denom = strategy_values(expr)
    k = int(np.argmax(values))
    return Fraction(int(values[k]), denom), DeterministicStrategy.from_index(k, expr.n_parties, expr.n_settings)


def strategy_value(expr: InequalityExpression, s) -> Fraction:
    """Value of ``expr`` when every observable takes its value under ``s``."""
    if not isinstance(s, DeterministicStrategy):
        s = DeterministicStrategy(tuple(s), expr.n_settings)
    if s.n_settings != expr.n_settings or s.n_parties != expr.n_parties:
        raise ArityError(
            f"strategy covers {s.n_parties} parties x {s.n_settings} settings, "
            f"expression needs {expr.n_parties} x {expr.n_settings}")
    total = Fraction(0)
    for t in expr.terms:
        if hasattr(t, "outcomes"):
            hit = all(s.value(i, c) == o for i, (c, o) in enumerate(zip(t.choices, t.outcomes)))
            total += t.coefficient if hit else 0
        else:
            sign = 1
            for i, c in enumerate(t.choices):
                if c is not None:
                    sign *= s.value(i, c)
            total += sign * t.coefficient
    return total


# -- marginal decomposition -------------------------------------------------

@dataclass(frozen=True)
class MarginalIdentity:
    n: int
    all_nonneg: bool
    residual_count: int
    support: int


def verify_marginal_identity(n: int) -> MarginalIdentity:
    """Coefficients over the ``4**n`` JPD atoms of

        sum_k p(a_1+ .. a'_k+ .. a_N+) + p(a'_1- .. a'_N-) - p(a_1+ .. a_N+).

    Every marginal ``p(x_1 o_1, ...)`` is the sum of the atoms agreeing with
    it.  ``residual_count`` is the coefficient sum (atoms counted with
    multiplicity) and ``support`` the number of atoms with a nonzero
    coefficient.
    """
    if not 2 <= n <= MAX_IDENTITY_PARTIES:
        raise CapacityError(f"marginal identity check supports 2 <= n <= {MAX_IDENTITY_PARTIES}, got {n}")
    bits = _outcome_bits(0, 1 << (2 * n), n, 2)
    plus_unprimed = bits[:, :, 0] == 0
    plus_primed = bits[:, :, 1] == 0

    def marginal(use_primed: np.ndarray, want_plus: bool) -> np.ndarray:
        vals = np.where(use_primed[None, :], plus_primed, plus_unprimed)
        return np.all(vals == want_plus, axis=1).astype(np.int64)

    lhs = np.zeros(bits.shape[0], dtype=np.int64)
    for k in range(n):
        mask = np.zeros(n, dtype=bool)
        mask[k] = True
        lhs += marginal(mask, True)
    lhs += marginal(np.ones(n, dtype=bool), False)
    residual = lhs - marginal(np.zeros(n, dtype=bool), True)
    return MarginalIdentity(n, bool(np.all(residual >= 0)), int(residual.sum()),
                            int(np.count_nonzero(residual)))


# -- behaviours and JPD feasibility -----------------------------------------

def _bitstrings(n: int) -> list[str]:
    return ["".join(b) for b in itertools.product("01", repeat=n)]


@dataclass(frozen=True, eq=False)
class Behavior:
    """Outcome distribution for every combination of setting choices."""

    n: int
    distributions: dict

    def __post_init__(self):
        dists = {str(k): np.asarray(v, dtype=float) for k, v in dict(self.distributions).items()}
        object.__setattr__(self, "distributions", dists)

    def probabilities(self, choices: Sequence[int]) -> np.ndarray:
        key = "".join(str(int(c)) for c in choices)
        return self.distributions[key]

    def validate(self, tolerance: float = 1e-9) -> "Behavior":
        n = self.n
        if not isinstance(n, (int, np.integer)) or n < 1:
            raise ValidationError(f"behavior needs a positive party count, got {n!r}")
        keys = _bitstrings(n)
        if sorted(self.distributions) != keys:
            raise ValidationError(f"behavior must list exactly the choice strings {keys}")
        size = 1 << n
        for key in keys:
            p = self.distributions[key]
            if p.shape != (size,):
                raise ValidationError(f"distribution {key!r} must have {size} entries")
            if not np.all(np.isfinite(p)) or p.min() < -tolerance:
                raise ValidationError(f"distribution {key!r} has negative or non-finite entries")
            if abs(p.sum() - 1.0) > tolerance:
                raise ValidationError(f"distribution {key!r} sums to {p.sum()!r}, expected 1")
        for key in keys:
            p = self.distributions[key].reshape((2,) * n)
            for j in range(n):
                other = key[:j] + ("1" if key[j] == "0" else "0") + key[j + 1:]
                q = self.distributions[other].reshape((2,) * n)
                if np.abs(p.sum(axis=j) - q.sum(axis=j)).max() > tolerance:
                    raise ValidationError(
                        f"behavior is signalling: marginal without party {j + 1} differs "
                        f"between choices {key!r} and {other!r}")
        return self

    def value(self, expr: InequalityExpression) -> float:
        """Evaluate a two-setting expression directly on the behaviour."""
        if expr.n_parties != self.n or expr.n_settings != 2:
            raise ArityError("expression does not match the behavior's parties/settings")
        coefs, choices, weights = term_table(expr)
        total = 0.0
        for coef, ch, w in zip(coefs, choices, weights):
            p = self.probabilities(ch).reshape((2,) * self.n)
            for i in range(self.n):
                p = np.tensordot(w[i].astype(float), p, axes=([0], [0]))
            total += float(coef) * float(p)
        return total

    def to_json(self) -> dict:
        return {"n": int(self.n),
                "distributions": {k: [float(x) for x in v] for k, v in sorted(self.distributions.items())}}

    @classmethod
    def from_json(cls, data) -> "Behavior":
        if isinstance(data, (str, bytes)):
            data = json.loads(data)
        try:
            return cls(int(data["n"]), dict(data["distributions"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed behavior JSON: {exc}") from exc


def behavior_from_state(state: State, settings) -> Behavior:
    obs = [tuple(p) for p in settings]
    n = state.n_parties
    if len(obs) != n:
        raise ArityError(f"state has {n} parties but settings have {len(obs)}")
    dists = {}
    outcome_tuples = list(itertools.product((1, -1), repeat=n))
    for key in _bitstrings(n):
        chosen = [obs[i][int(c)] for i, c in enumerate(key)]
        dists[key] = np.array([joint_probability(state, chosen, o) for o in outcome_tuples])
    return Behavior(n, dists)


def behavior_from_jpd(atoms: np.ndarray, n: int) -> Behavior:
    """Marginal behaviour generated by a JPD over the ``4**n`` atoms."""
    atoms = np.asarray(atoms, dtype=float)
    if atoms.shape != (1 << (2 * n),):
        raise ArityError(f"a JPD over {n} parties has {1 << (2 * n)} atoms")
    bits = _outcome_bits(0, atoms.size, n, 2)
    dists = {}
    for key in _bitstrings(n):
        ch = np.array([int(c) for c in key])
        outs = bits[:, np.arange(n), ch]
        flat = outs @ (1 << np.arange(n - 1, -1, -1))
        dists[key] = np.bincount(flat, weights=atoms, minlength=1 << n)
    return Behavior(n, dists)


def behavior_from_strategy(s: DeterministicStrategy) -> Behavior:
    atoms = np.zeros(1 << (2 * s.n_parties))
    atoms[s.index] = 1.0
    return behavior_from_jpd(atoms, s.n_parties)


@dataclass(frozen=True, eq=False)
class JointDistribution:
    n: int
    atoms: np.ndarray

    def behavior(self) -> Behavior:
        return behavior_from_jpd(self.atoms, self.n)

    def support(self, threshold: float = 1e-12) -> list[int]:
        return [int(k) for k in np.flatnonzero(self.atoms > threshold)]


@dataclass(frozen=True, eq=False)
class JPDResult:
    feasible: bool
    witness: Optional[JointDistribution]
    max_residual: float
    certificate: Optional[dict]

    def to_json(self) -> dict:
        out = {"feasible": self.feasible, "max_residual": self.max_residual}
        if self.witness is not None:
            out["witness"] = {str(k): float(self.witness.atoms[k]) for k in self.witness.support()}
        if self.certificate is not None:
            out["certificate"] = self.certificate
        return out


def _marginal_matrix(n: int) -> np.ndarray:
    bits = _outcome_bits(0, 1 << (2 * n), n, 2)
    rows = []
    weights = 1 << np.arange(n - 1, -1, -1)
    for key in _bitstrings(n):
        ch = np.array([int(c) for c in key])
        flat = bits[:, np.arange(n), ch] @ weights
        block = np.zeros((1 << n, bits.shape[0]))
        block[flat, np.arange(bits.shape[0])] = 1.0
        rows.append(block)
    return np.vstack(rows)


def jpd_feasible(behavior: Behavior, n: Optional[int] = None, tolerance: float = 1e-9) -> JPDResult:
    """Decide whether some JPD over all ``4**n`` outcome assignments has the
    behaviour's distributions as marginals.

    Feasible: returns the witness JPD.  Infeasible: returns a Farkas
    functional ``y`` (``sum y[c][o] p(o|c) + y0 <= 0`` for every JPD but
    ``> 0`` on the behaviour) and the most violated GWI relabeling.
    """
    n = behavior.n if n is None else n
    if n != behavior.n:
        raise ArityError(f"behavior has {behavior.n} parties, caller asked for {n}")
    if n > MAX_JPD_PARTIES:
        raise CapacityError(f"JPD feasibility is limited to n <= {MAX_JPD_PARTIES}, got {n}")
    behavior.validate(tolerance)

    A = _marginal_matrix(n)
    b = np.concatenate([behavior.distributions[k] for k in _bitstrings(n)])
    A = np.vstack([A, np.ones(A.shape[1])])
    b = np.append(b, 1.0)
    res = phase_one(A, b, tol=tolerance)
    max_residual = float(np.abs(A @ res.x - b).max())
    if res.feasible and max_residual <= tolerance:
        return JPDResult(True, JointDistribution(n, res.x), max_residual, None)

    certificate = {"infeasibility": res.infeasibility}
    if res.farkas is not None:
        y = res.farkas
        size = 1 << n
        certificate["farkas"] = {
            "coefficients": {k: [float(v) for v in y[i * size:(i + 1) * size]]
                             for i, k in enumerate(_bitstrings(n))},
            "constant": float(y[-1]),
            "behavior_value": float(b @ y),
            "local_max": float((A.T @ y).max()),
        }
    best = None
    for expr in gwi_family(n):
        val = behavior.value(expr)
        if best is None or val > best[0]:
            best = (val, expr)
    if best is not None and best[0] > float(best[1].bound) + tolerance:
        certificate["gwi_violation"] = {
            "expression": render_text(best[1]),
            "value": best[0],
            "bound": str(best[1].bound),
        }
    return JPDResult(False, None, max_residual, certificate)
