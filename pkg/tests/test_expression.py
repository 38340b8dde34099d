import itertools
import math
import re
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest

from conftest import random_mixed, random_pure, random_unit
from gwi.errors import ArityError, ValidationError
from gwi.expression import (
    CORRELATOR,
    PRIMED,
    PROBABILITY,
    UNPRIMED,
    CorrelatorTerm,
    ProbabilityTerm,
    build_gwi,
    build_wigner_original,
    evaluate,
    expand_to_correlators,
    gwi_correlator,
    gwi_family,
    hardy_witness,
    relabel,
    render_text,
    to_json,
)
from gwi.observables import setting_set_from_bloch, xz_setting
from gwi.qstate import Observable, PureState, make_ghz, make_singlet

# Four-party correlator form exactly as typeset (line breaks and all).
PRINTED_QUADRIPARTITE = r"""
\langle a_1a_2a_3a_4\rangle - \langle a'_1a'_2a'_3a'_4\rangle - \langle a_1a_2a_3a'_4\rangle - \langle a_1a_2a'_3a_4\rangle \\ - \langle a_1a'_2a_3a_4\rangle - \langle a'_1a_2a_3a_4\rangle - \langle a_3a'_4\rangle - \langle a_2a'_4\rangle - \langle a_1a'_4\rangle \\ - \langle a'_3a_4\rangle - \langle a_2a'_3\rangle - \langle a_1a'_3\rangle -
\langle a'_2a_3\rangle - \langle a'_2a_4\rangle - \langle a_1a'_2\rangle \\ - \langle a'_1a_3\rangle - \langle a'_1a_4\rangle - \langle a'_1a_2\rangle - \langle a_1a_2\rangle - \langle a_1a_3\rangle - \langle a_1a_4\rangle \\ -
\langle a_3a_4\rangle - \langle a_2a_3\rangle - \langle a_2a_4\rangle - \langle a'_3a'_4\rangle -\langle a'_2a'_3\rangle -
 \langle a'_2a'_4\rangle \\ - \langle a'_1a'_3\rangle - \langle a'_1a'_4\rangle - \langle a'_1a'_2\rangle-
\langle a_2a_3a'_4\rangle- \langle a_1a_3a'_4\rangle \\ - \langle a_1a_2a'_4\rangle- \langle a_2a'_3a_4\rangle-\langle a_1a'_3a_4\rangle - \langle a_1a_2a'_3\rangle- \langle a'_2a_3a_4\rangle \\ - \langle a_1a'_2a_3\rangle-\langle a_1a'_2a_4\rangle-  \langle a'_1a_3a_4\rangle-
\langle a'_1a_2a_3\rangle- \langle a'_1a_2a_4\rangle \\ + \langle a'_2a'_3a'_4\rangle+\langle a'_1a'_3a'_4\rangle+\langle a'_1a'_2a'_4\rangle+
\langle a'_1a'_2a'_3\rangle \\ -2(\langle a_1\rangle+\langle a_2\rangle+\langle a_3\rangle+\langle a_4\rangle)\leq4
"""

CORR = re.compile(r"([+-]?)\s*\\langle\s*((?:a'?_\d)+)\s*\\rangle")
GROUP = re.compile(r"([+-]?)\s*(\d+)\((.*?)\)")


def parse_printed(latex: str, n: int):
    """Independent reader for the typeset correlator sum; returns ({choices: coef}, bound)."""
    text = latex.replace("\\\\", " ").replace("\n", " ")
    lhs, bound = text.split(r"\leq")
    coefs = Counter()

    def add(body, sign):
        choices = [None] * n
        for prime, idx in re.findall(r"a('?)_(\d)", body):
            choices[int(idx) - 1] = PRIMED if prime else UNPRIMED
        coefs[tuple(choices)] += sign

    for gsign, mult, inner in GROUP.findall(lhs):
        outer = (-1 if gsign == "-" else 1) * int(mult)
        for s, body in CORR.findall(inner):
            add(body, outer * (-1 if s == "-" else 1))
    lhs = GROUP.sub("", lhs)
    for s, body in CORR.findall(lhs):
        add(body, -1 if s == "-" else 1)
    return {k: Fraction(v) for k, v in coefs.items() if v}, Fraction(int(bound.strip()))


def as_dict(expr):
    return {t.choices: t.coefficient for t in expr.terms}


class TestBuilders:
    def test_gwi_term_layout(self):
        e = build_gwi(3)
        assert e.form == PROBABILITY and e.bound == 0 and len(e.terms) == 5
        assert e.terms[0] == ProbabilityTerm(1, (0, 0, 0), (1, 1, 1))
        assert [t.choices for t in e.terms[1:4]] == [(1, 0, 0), (0, 1, 0), (0, 0, 1)]
        assert all(t.coefficient == -1 and t.outcomes == (1, 1, 1) for t in e.terms[1:4])
        assert e.terms[4] == ProbabilityTerm(-1, (1, 1, 1), (-1, -1, -1))

    def test_arity(self):
        with pytest.raises(ArityError):
            build_gwi(1)
        with pytest.raises(ArityError):
            build_gwi(3, flip=[True])

    def test_term_validation(self):
        with pytest.raises(ValidationError):
            ProbabilityTerm(1, (0, 0), (1, 0))
        with pytest.raises(ArityError):
            ProbabilityTerm(1, (0, 0), (1,))
        with pytest.raises(ValidationError):
            ProbabilityTerm(1, (0, None), (1, 1))

    def test_family_size_and_distinctness(self):
        fam = list(gwi_family(2))
        assert len(fam) == 16
        assert len({frozenset((t.choices, t.outcomes) for t in e.terms) for e in fam}) == 16

    def test_relabel_identity(self):
        e = build_gwi(3)
        same = relabel(e, [False] * 3, [False] * 3)
        assert same.terms == e.terms


class TestExpansion:
    def test_chsh_form(self):
        e = expand_to_correlators(build_gwi(2))
        assert e.form == CORRELATOR and e.bound == 2
        assert as_dict(e) == {(0, 0): 1, (0, 1): -1, (1, 0): -1, (1, 1): -1}

    def test_second_chsh_form(self):
        e = expand_to_correlators(build_gwi(2, flip=[False, True]))
        assert e.bound == 2
        assert as_dict(e) == {(0, 0): -1, (0, 1): 1, (1, 0): 1, (1, 1): 1}
        assert render_text(e) == "-<a1 a2> + <a1 a'2> + <a'1 a2> + <a'1 a'2> <= 2"

    def test_printed_quadripartite_form(self):
        printed, bound = parse_printed(PRINTED_QUADRIPARTITE, 4)
        e = gwi_correlator(4)
        assert e.bound == bound == 4
        assert as_dict(e) == printed

    def test_quadripartite_census(self):
        e = gwi_correlator(4)
        by_order = Counter(t.order for t in e.terms)
        assert by_order == {4: 6, 3: 16, 2: 24, 1: 4}
        singles = {t.choices: t.coefficient for t in e.terms if t.order == 1}
        assert set(singles.values()) == {-2}
        assert all(PRIMED not in c for c in singles)
        plus3 = [t for t in e.terms if t.order == 3 and t.coefficient > 0]
        assert len(plus3) == 4 and all(set(t.choices) <= {PRIMED, None} for t in plus3)

    @pytest.mark.parametrize("n", [2, 3, 4, 5])
    def test_bound_is_n(self, n):
        assert gwi_correlator(n).bound == n

    def test_canonical_order(self):
        e = gwi_correlator(4)
        orders = [t.order for t in e.terms]
        assert orders == sorted(orders)

    def test_source_kept(self):
        e = gwi_correlator(3)
        assert e.source == build_gwi(3)

    def test_expansion_rejects_correlator_input(self):
        with pytest.raises(ValidationError):
            expand_to_correlators(gwi_correlator(2))

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_forms_agree_on_states(self, rng, n):
        p, c = build_gwi(n), gwi_correlator(n)
        for k in range(8):
            state = random_pure(rng, n) if k % 2 else random_mixed(rng, n)
            settings = setting_set_from_bloch([[random_unit(rng), random_unit(rng)] for _ in range(n)])
            vp, vc = evaluate(p, state, settings), evaluate(c, state, settings)
            assert vc - n == pytest.approx(2**n * vp, abs=1e-10)

    def test_flipped_forms_agree(self, rng):
        for flip in itertools.product((False, True), repeat=3):
            p, c = build_gwi(3, list(flip)), gwi_correlator(3, list(flip))
            state = random_pure(rng, 3)
            settings = setting_set_from_bloch([[random_unit(rng), random_unit(rng)] for _ in range(3)])
            assert evaluate(c, state, settings) - c.bound == pytest.approx(
                8 * evaluate(p, state, settings), abs=1e-10)


class TestEvaluate:
    def test_ghz_chsh_type_value(self):
        # GHZ pair in the XZ plane behaves like a Bell state: <AB> = cos(phi_a - phi_b)
        psi = make_ghz(2)
        settings = [(xz_setting(0.0), xz_setting(math.pi / 2)), (xz_setting(3 * math.pi / 4), xz_setting(math.pi / 4))]
        c = gwi_correlator(2, flip=[False, True])
        assert evaluate(c, psi, settings) == pytest.approx(2 * math.sqrt(2), abs=1e-12)

    def test_arity_mismatch(self):
        with pytest.raises(ArityError):
            evaluate(gwi_correlator(4), make_ghz(3), [(xz_setting(0), xz_setting(1))] * 3)
        with pytest.raises(ArityError):
            evaluate(gwi_correlator(3), make_ghz(3), [(xz_setting(0), xz_setting(1))] * 2)

    def test_wigner_closed_form(self, rng):
        expr = build_wigner_original()
        psi = make_singlet()
        for _ in range(20):
            ta, tb, tc = rng.uniform(0, 2 * math.pi, 3)
            a, b, c = xz_setting(ta), xz_setting(tb), xz_setting(tc)
            expected = 0.5 * (math.sin((ta - tb) / 2) ** 2 - math.sin((ta - tc) / 2) ** 2
                              - math.sin((tc - tb) / 2) ** 2)
            assert evaluate(expr, psi, [(a, b, c)] * 2) == pytest.approx(expected, abs=1e-12)


class TestHardy:
    def test_hardy_state(self):
        psi = PureState.from_unnormalized([1, 1, 1, 0])
        minus_x = Observable(np.array([-1.0, 0.0, 0.0]))
        z = Observable(np.array([0.0, 0.0, 1.0]))
        rec = hardy_witness(psi, [(minus_x, z), (minus_x, z)])
        assert rec.is_hardy
        assert rec.p1 == pytest.approx(1 / 12, abs=1e-12)
        assert max(rec.p2, rec.p3, rec.p4) < 1e-12
        # the bipartite GWI is then violated by exactly p1
        assert evaluate(build_gwi(2), psi, [(minus_x, z), (minus_x, z)]) == pytest.approx(1 / 12, abs=1e-12)

    def test_product_state_is_not_hardy(self):
        psi = PureState.from_unnormalized([1, 0, 0, 0])
        z, x = Observable(np.array([0.0, 0, 1])), Observable(np.array([1.0, 0, 0]))
        assert not hardy_witness(psi, [(z, x), (z, x)]).is_hardy

    def test_arity(self):
        z = Observable(np.array([0.0, 0, 1]))
        with pytest.raises(ArityError):
            hardy_witness(make_ghz(3), [(z, z)] * 3)


class TestRendering:
    def test_probability_text(self):
        assert render_text(build_gwi(2)) == "p(a1+,a2+) - p(a'1+,a2+) - p(a1+,a'2+) - p(a'1-,a'2-) <= 0"

    def test_coefficient_text(self):
        e = build_wigner_original()
        assert render_text(e) == "p(a1+,b2+) - p(a1+,c2+) - p(c1+,b2+) <= 0"
        assert "-2<a1>" in render_text(gwi_correlator(4))

    def test_json_round_numbers(self):
        d = to_json(gwi_correlator(2))
        assert d["bound"] == "2" and d["form"] == "correlator" and len(d["terms"]) == 4
        assert {tuple(t["choices"]): t["coefficient"] for t in d["terms"]}[(1, 1)] == "-1"

    def test_correlator_term_order(self):
        assert CorrelatorTerm(1, (None, 0, None, 1)).order == 2
