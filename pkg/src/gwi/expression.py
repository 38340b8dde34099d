"""Generalized Wigner inequalities as exact linear expressions.

A probability-form expression is a rational combination of joint
probabilities ``p(x_1 o_1, ..., x_N o_N)``; a correlator-form expression is
a rational combination of correlators ``<x_i x_j ...>``.  Both carry an
exact upper bound satisfied by every local hidden variable model.

Setting choices are small integers indexing each party's observable list
(``UNPRIMED = 0``, ``PRIMED = 1``); ``None`` marks an identity slot in a
correlator.
"""

from __future__ import annotations

import itertools
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .errors import ArityError, ValidationError
from .qstate import State, expectation, joint_probability

UNPRIMED = 0
PRIMED = 1
IDENTITY = None

PROBABILITY = "probability"
CORRELATOR = "correlator"

GWI_LABELS = ("a", "a'")
WIGNER_LABELS = ("a", "b", "c")


@dataclass(frozen=True)
class ProbabilityTerm:
    coefficient: Fraction
    choices: tuple
    outcomes: tuple

    def __post_init__(self):
        if len(self.choices) != len(self.outcomes):
            raise ArityError("choices and outcomes must have one entry per party")
        if any(o not in (1, -1) for o in self.outcomes):
            raise ValidationError(f"outcomes must be +1/-1, got {self.outcomes!r}")
        if any(c is None or c < 0 for c in self.choices):
            raise ValidationError("probability terms need a setting choice for every party")
        object.__setattr__(self, "coefficient", Fraction(self.coefficient))


@dataclass(frozen=True)
class CorrelatorTerm:
    coefficient: Fraction
    choices: tuple

    def __post_init__(self):
        object.__setattr__(self, "coefficient", Fraction(self.coefficient))

    @property
    def order(self) -> int:
        return sum(c is not None for c in self.choices)


@dataclass(frozen=True)
class InequalityExpression:
    """``sum(terms) <= bound``; ``labels`` name each party's settings."""

    form: str
    terms: tuple
    bound: Fraction
    n_parties: int
    labels: tuple = GWI_LABELS
    name: str = ""
    source: Optional["InequalityExpression"] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.form not in (PROBABILITY, CORRELATOR):
            raise ValidationError(f"unknown form {self.form!r}")
        object.__setattr__(self, "terms", tuple(self.terms))
        object.__setattr__(self, "bound", Fraction(self.bound))
        for t in self.terms:
            if len(t.choices) != self.n_parties:
                raise ArityError("every term needs one entry per party")

    @property
    def n_settings(self) -> int:
        return len(self.labels)

    def __str__(self) -> str:
        return render_text(self)


def _sort_key(choices, n_settings):
    idents = sum(c is None for c in choices)
    return (-idents, tuple(n_settings if c is None else c for c in choices))


# -- builders ---------------------------------------------------------------

def build_gwi(n: int, flip: Optional[Sequence[bool]] = None) -> InequalityExpression:
    """Probability-form GWI for ``n`` parties, bound 0.

    ``p(a_1+..a_N+) - sum_k p(.. a'_k+ ..) - p(a'_1-..a'_N-) <= 0``.
    ``flip[i]`` reverses every outcome sign of party ``i``, which yields the
    other members of the family (e.g. the ``p(a+,b-) - ...`` variant).
    """
    if n < 2:
        raise ArityError(f"GWI needs n >= 2 parties, got {n}")
    signs = [1] * n if flip is None else [(-1 if f else 1) for f in flip]
    if len(signs) != n:
        raise ArityError(f"flip mask needs {n} entries, got {len(signs)}")

    def term(coef, choices, outcomes):
        return ProbabilityTerm(Fraction(coef), tuple(choices),
                               tuple(o * s for o, s in zip(outcomes, signs)))

    terms = [term(1, [UNPRIMED] * n, [1] * n)]
    for k in range(n):
        choices = [UNPRIMED] * n
        choices[k] = PRIMED
        terms.append(term(-1, choices, [1] * n))
    terms.append(term(-1, [PRIMED] * n, [-1] * n))
    name = f"GWI{n}" + ("" if flip is None or not any(flip) else
                         "[flip=" + "".join("1" if f else "0" for f in flip) + "]")
    return InequalityExpression(PROBABILITY, tuple(terms), Fraction(0), n, GWI_LABELS, name)


def relabel(expr: InequalityExpression, swap: Sequence[bool], flip: Sequence[bool]) -> InequalityExpression:
    """Swap unprimed/primed settings and/or outcome signs party-wise (2-setting forms)."""
    n = expr.n_parties
    if len(swap) != n or len(flip) != n:
        raise ArityError("swap and flip masks need one entry per party")
    if expr.n_settings != 2:
        raise ValidationError("relabel only applies to two-setting expressions")

    def new_choices(choices):
        return tuple(c if c is None or not s else 1 - c for c, s in zip(choices, swap))

    terms = []
    for t in expr.terms:
        if isinstance(t, ProbabilityTerm):
            outs = tuple(-o if f else o for o, f in zip(t.outcomes, flip))
            terms.append(ProbabilityTerm(t.coefficient, new_choices(t.choices), outs))
        else:
            sign = 1
            for c, f in zip(t.choices, flip):
                if c is not None and f:
                    sign = -sign
            terms.append(CorrelatorTerm(sign * t.coefficient, new_choices(t.choices)))
    if expr.form == CORRELATOR:
        terms.sort(key=lambda t: _sort_key(t.choices, 2))
    tag = "".join("1" if s else "0" for s in swap) + "/" + "".join("1" if f else "0" for f in flip)
    return InequalityExpression(expr.form, tuple(terms), expr.bound, n, expr.labels,
                                f"{expr.name}[relabel={tag}]")


def gwi_family(n: int):
    """All ``4**n`` party-wise relabelings of the probability-form GWI."""
    base = build_gwi(n)
    for swap in itertools.product((False, True), repeat=n):
        for flip in itertools.product((False, True), repeat=n):
            yield relabel(base, swap, flip)


def build_wigner_original() -> InequalityExpression:
    """``p(a+, b+) - p(a+, c+) - p(c+, b+) <= 0`` for two parties sharing
    the three directions ``a, b, c`` (setting indices 0, 1, 2).

    Local models satisfy it only together with perfect anti-correlation
    between equal settings, as holds for the singlet.
    """
    a, b, c = 0, 1, 2
    terms = (
        ProbabilityTerm(Fraction(1), (a, b), (1, 1)),
        ProbabilityTerm(Fraction(-1), (a, c), (1, 1)),
        ProbabilityTerm(Fraction(-1), (c, b), (1, 1)),
    )
    return InequalityExpression(PROBABILITY, terms, Fraction(0), 2, WIGNER_LABELS, "Wigner")


def expand_to_correlators(expr: InequalityExpression) -> InequalityExpression:
    """Rewrite a probability-form expression in correlators.

    Each ``p(o|x)`` becomes ``2**-N <prod_i (1 + o_i x_i)>``; the whole
    inequality is multiplied by ``2**N`` and the constant is moved into the
    bound, so ``value_corr - bound_corr == 2**N (value_prob - bound_prob)``.
    """
    if expr.form != PROBABILITY:
        raise ValidationError("expand_to_correlators expects a probability-form expression")
    n = expr.n_parties
    acc: dict[tuple, Fraction] = defaultdict(Fraction)
    for t in expr.terms:
        for subset in itertools.product((False, True), repeat=n):
            sign = 1
            for keep, o in zip(subset, t.outcomes):
                if keep:
                    sign *= o
            key = tuple(c if keep else None for keep, c in zip(subset, t.choices))
            acc[key] += sign * t.coefficient
    constant = acc.pop((None,) * n, Fraction(0))
    terms = [CorrelatorTerm(coef, key) for key, coef in acc.items() if coef != 0]
    terms.sort(key=lambda t: _sort_key(t.choices, expr.n_settings))
    bound = (1 << n) * expr.bound - constant
    return InequalityExpression(CORRELATOR, tuple(terms), bound, n, expr.labels,
                                expr.name, source=expr)


def gwi_correlator(n: int, flip: Optional[Sequence[bool]] = None) -> InequalityExpression:
    return expand_to_correlators(build_gwi(n, flip))


# -- evaluation -------------------------------------------------------------

def per_party_observables(settings, n: int, n_settings: int) -> list[tuple]:
    """Normalize a ``SettingSet`` or nested sequence to per-party observable tuples."""
    parties = [tuple(p) for p in settings]
    if len(parties) != n:
        raise ArityError(f"expression has {n} parties but settings have {len(parties)}")
    for p in parties:
        if len(p) < n_settings:
            raise ArityError(f"each party needs {n_settings} settings, got {len(p)}")
    return parties


def evaluate(expr: InequalityExpression, state: State, settings) -> float:
    """Quantum value of the left-hand side of ``expr``."""
    n = expr.n_parties
    if state.n_parties != n:
        raise ArityError(f"expression has {n} parties but the state has {state.n_parties}")
    obs = per_party_observables(settings, n, expr.n_settings)
    total = 0.0
    if expr.form == PROBABILITY:
        for t in expr.terms:
            chosen = [obs[i][c] for i, c in enumerate(t.choices)]
            total += float(t.coefficient) * joint_probability(state, chosen, t.outcomes)
    else:
        for t in expr.terms:
            chosen = [None if c is None else obs[i][c] for i, c in enumerate(t.choices)]
            total += float(t.coefficient) * expectation(state, chosen)
    return total


def term_table(expr: InequalityExpression):
    """Dense description of the terms for vectorized evaluation.

    Returns ``(coefficients, choices, weights)`` with ``choices`` of shape
    ``(T, n)`` and ``weights`` of shape ``(T, n, 2)``.  The term value under
    a behaviour ``P`` is ``sum_o prod_i weights[t, i, o_i] P(o | choices[t])``
    where outcome index 0 is ``+1`` and 1 is ``-1``.  Identity slots read
    setting 0 with weight ``(1, 1)``, i.e. they marginalize that party.
    """
    n = expr.n_parties
    coefs = [t.coefficient for t in expr.terms]
    choices = np.zeros((len(expr.terms), n), dtype=np.int64)
    weights = np.zeros((len(expr.terms), n, 2), dtype=np.int64)
    for k, t in enumerate(expr.terms):
        for i, c in enumerate(t.choices):
            if isinstance(t, ProbabilityTerm):
                choices[k, i] = c
                weights[k, i, 0 if t.outcomes[i] == 1 else 1] = 1
            elif c is None:
                weights[k, i] = (1, 1)
            else:
                choices[k, i] = c
                weights[k, i] = (1, -1)
    return coefs, choices, weights


# -- Hardy ------------------------------------------------------------------

HARDY_TOL = 1e-9


@dataclass(frozen=True)
class HardyRecord:
    p1: float
    p2: float
    p3: float
    p4: float
    is_hardy: bool


def hardy_witness(state: State, settings) -> HardyRecord:
    """The four probabilities of the bipartite GWI and whether they realize
    Hardy's conditions ``p(a+,b+) > 0 = p(a+,b'+) = p(a'+,b+) = p(a'-,b'-)``."""
    if state.n_parties != 2:
        raise ArityError(f"Hardy's argument is bipartite, got {state.n_parties} parties")
    (a, ap), (b, bp) = per_party_observables(settings, 2, 2)
    p1 = joint_probability(state, [a, b], [1, 1])
    p2 = joint_probability(state, [a, bp], [1, 1])
    p3 = joint_probability(state, [ap, b], [1, 1])
    p4 = joint_probability(state, [ap, bp], [-1, -1])
    is_hardy = p1 > HARDY_TOL and max(p2, p3, p4) < HARDY_TOL
    return HardyRecord(p1, p2, p3, p4, bool(is_hardy))


# -- rendering --------------------------------------------------------------

def setting_name(expr: InequalityExpression, party: int, choice: int) -> str:
    label = expr.labels[choice]
    base, primes = label.rstrip("'"), label[len(label.rstrip("'")):]
    return f"{base}{primes}{party + 1}"


def _term_body(expr, t) -> str:
    if isinstance(t, ProbabilityTerm):
        parts = [setting_name(expr, i, c) + ("+" if o == 1 else "-")
                 for i, (c, o) in enumerate(zip(t.choices, t.outcomes))]
        return "p(" + ",".join(parts) + ")"
    parts = [setting_name(expr, i, c) for i, c in enumerate(t.choices) if c is not None]
    return "<" + " ".join(parts) + ">"


def render_text(expr: InequalityExpression) -> str:
    chunks = []
    for k, t in enumerate(expr.terms):
        coef = t.coefficient
        mag = abs(coef)
        prefix = "" if mag == 1 else f"{mag}"
        if k == 0:
            chunks.append(("-" if coef < 0 else "") + prefix + _term_body(expr, t))
        else:
            chunks.append(("- " if coef < 0 else "+ ") + prefix + _term_body(expr, t))
    lhs = " ".join(chunks) if chunks else "0"
    return f"{lhs} <= {expr.bound}"


def to_json(expr: InequalityExpression) -> dict:
    terms = []
    for t in expr.terms:
        entry = {"coefficient": str(t.coefficient), "choices": list(t.choices)}
        if isinstance(t, ProbabilityTerm):
            entry["outcomes"] = list(t.outcomes)
        terms.append(entry)
    return {
        "name": expr.name,
        "form": expr.form,
        "n": expr.n_parties,
        "labels": list(expr.labels),
        "bound": str(expr.bound),
        "terms": terms,
        "text": render_text(expr),
    }
