import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from inductor.core import Hypothesis, HypothesisForm, Value
from inductor.qcfg import (
    Grammar,
    GrammarError,
    GrammarRule,
    NoParseError,
    QcfgInterpreter,
    derive,
    enumerate_derivations,
    parse_grammar,
)
from oracles import chart_first

SIUN_GRAMMAR = "Rule 1: siun -> BLUE\nPriority 1: 2\nRule 2: ##A mcneilt -> ##A ##A ##A\nPriority 2: 1"
KIKI = "\n".join(
    [
        "Rule 1: lug -> BLUE",
        "Priority 1: 4",
        "Rule 2: dax -> RED",
        "Priority 2: 4",
        "Rule 3: ##A kiki ##B -> ##B ##A",
        "Priority 3: 2",
        "Rule 4: ##A fep -> ##A ##A ##A",
        "Priority 4: 3",
    ]
)


def toks(s):
    return Value.tokens(s)


def test_parse_siun_grammar():
    g = parse_grammar(SIUN_GRAMMAR)
    assert len(g.rules) == 2
    assert g.rules[1].lhs == ("##A", "mcneilt")


def test_single_hash_is_canonicalized():
    g = parse_grammar("Rule 1: siun -> BLUE\nPriority 1: 2\nRule 2: #A mcneilt -> #A #A\nPriority 2: 1")
    assert g.rules[1].rhs == ("##A", "##A")


def test_unicode_arrow():
    assert len(parse_grammar("Rule 1: dax → RED\nPriority 1: 1").rules) == 1


@pytest.mark.parametrize(
    "text",
    [
        "Rule 1: dax -> RED\nPriority 1: 1\nRule 2: ##A ##A -> ##A twice\nPriority 2: 1",
        "Rule 1: dax -> RED\nPriority 1: 1\nRule 2: ##A -> ##A ##A\nPriority 2: 1",
        "Rule 1: dax -> RED\nPriority 1: 1\nRule 2: ##A wif -> ##B\nPriority 2: 1",
        "Rule 1: dax -> RED",
        "no rules here",
        "Rule 1: ##A wif -> ##A\nPriority 1: 1",
    ],
)
def test_invalid_grammars(text):
    with pytest.raises(GrammarError):
        parse_grammar(text)


def test_error_names_rule():
    with pytest.raises(GrammarError) as err:
        parse_grammar("Rule 1: dax -> RED\nPriority 1: 1\nRule 2: ##A ##A -> ##A twice\nPriority 2: 1")
    assert err.value.rule_index == 1
    assert "rule 2" in str(err.value)


def test_derive_siun_grammar():
    assert derive(parse_grammar(SIUN_GRAMMAR), toks("siun mcneilt")) == toks("BLUE BLUE BLUE")


def test_derive_primitive():
    assert derive(parse_grammar("Rule 1: dax -> RED\nPriority 1: 1"), toks("dax")) == toks("RED")


def test_derive_lowest_priority_outermost():
    assert derive(parse_grammar(KIKI), toks("dax kiki lug fep")) == toks("BLUE BLUE BLUE RED")


def test_no_parse():
    with pytest.raises(NoParseError):
        derive(parse_grammar(SIUN_GRAMMAR), toks("siun blah"))


def test_enumerate_unambiguous():
    assert enumerate_derivations(parse_grammar(SIUN_GRAMMAR), toks("siun mcneilt"), 5) == [toks("BLUE BLUE BLUE")]


def test_enumerate_two_primitives():
    g = parse_grammar("Rule 1: a -> X\nPriority 1: 1\nRule 2: a -> Y\nPriority 2: 1")
    assert enumerate_derivations(g, toks("a"), 5) == [toks("X"), toks("Y")]


def test_enumerate_first_is_derive():
    g = parse_grammar(KIKI)
    outs = enumerate_derivations(g, toks("dax kiki lug fep"), 5)
    assert outs[0] == derive(g, toks("dax kiki lug fep"))
    assert toks("BLUE RED BLUE RED BLUE RED") in outs


def test_render_round_trip():
    g = parse_grammar(KIKI)
    assert parse_grammar(g.render()) == g


def test_depth_limit():
    g = parse_grammar("Rule 1: a -> X\nPriority 1: 1\nRule 2: ##A b -> ##A ##A\nPriority 2: 1", max_depth=3)
    assert derive(g, toks("a b b")) == toks("X X X X")
    with pytest.raises(NoParseError):
        derive(g, toks("a b b b"))


def test_interpreter_compile():
    h = Hypothesis("Rule:\n" + SIUN_GRAMMAR, SIUN_GRAMMAR, HypothesisForm.GRAMMAR)
    rule = QcfgInterpreter().compile(h)
    assert rule.apply(toks("siun mcneilt")) == toks("BLUE BLUE BLUE")
    assert str(rule.apply(toks("zzz"))) == "None"


# --- random grammars against the chart oracle ---------------------------------

TERMS = ["a", "b", "c", "d"]
OUTS = ["X", "Y", "Z"]
NTS = ["##A", "##B"]


def random_grammar(rng):
    rules = []
    for t in rng.sample(TERMS, rng.randint(1, 3)):
        rules.append(((t,), tuple(rng.choices(OUTS, k=rng.randint(1, 2)))))
    for _ in range(rng.randint(1, 3)):
        nts = NTS[: rng.randint(1, 2)]
        lhs = list(nts) + rng.sample(TERMS, rng.randint(1, 2))
        rng.shuffle(lhs)
        rhs = list(nts) * rng.randint(1, 2) + rng.choices(OUTS, k=rng.randint(0, 1))
        rng.shuffle(rhs)
        rules.append((tuple(lhs), tuple(rhs)))
    return [GrammarRule(lhs, rhs, rng.randint(1, 4), i) for i, (lhs, rhs) in enumerate(rules)]


def sample_input(rng, rules, depth=0):
    """Expand a random rule's left-hand side; falls back to a primitive."""
    prims = [r for r in rules if r.is_primitive]
    pool = rules if depth < 2 else prims
    r = rng.choice(pool)
    out = []
    for s in r.lhs:
        out.extend(sample_input(rng, rules, depth + 1) if s.startswith("##") else [s])
    return out


def test_random_grammars_match_chart_oracle():
    rng = random.Random(2024)
    parsed = 0
    for _case in range(200):
        rules = random_grammar(rng)
        g = Grammar(tuple(rules))
        inp = sample_input(rng, rules) if _case % 2 else rng.choices(TERMS, k=rng.randint(1, 5))
        inp = inp[:7]
        expect = chart_first([(r.lhs, r.rhs, r.priority, r.index) for r in rules], inp)
        try:
            got = derive(g, toks(" ".join(inp))).data
        except NoParseError:
            got = None
        assert got == expect, (g.render(), inp)
        parsed += got is not None
    assert parsed >= 100


@given(st.integers(0, 10**6))
def test_memo_agrees_with_plain_search(seed):
    rng = random.Random(seed)
    g = Grammar(tuple(random_grammar(rng)))
    inp = toks(" ".join(rng.choices(TERMS, k=rng.randint(1, 5))))
    results = []
    for memo in (True, False):
        try:
            results.append(derive(g, inp, memo=memo))
        except NoParseError:
            results.append(None)
    assert results[0] == results[1]
