import dataclasses

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import ex_ints, scripted
from inductor import engine
from inductor.core import (
    Example,
    Failure,
    Hypothesis,
    HypothesisForm,
    Method,
    RunConfig,
    Task,
    TaskKind,
    Value,
    render_value,
)
from inductor.engine import (
    lm_apply,
    majority_vote,
    make_feedback,
    parse_lenient,
    refine,
    run_task,
    score,
    select_best,
    symbolic_interpreter,
    task_accuracy,
)
from inductor.programs import compile_hypothesis
from inductor.proposer import TransportError

PROGRAM_CFG = RunConfig(hypothesis_form=HypothesisForm.PROGRAM)
LAST_OCCURRENCE_PROGRAM = (
    "map(filter(range(0, len(xs)), fn(i) contains(slice(xs, i + 1, len(xs)), index(xs, i))), fn(i) index(xs, i))"
)
LAST_OCCURRENCE_PAIRS = [
    ([97, 97, 97, 97], [97, 97, 97]),
    ([4, 4, 4], [4, 4]),
    ([33, 0, 4, 1, 2, 24, 66], []),
    ([76, 42, 17, 76, 17], [76, 17]),
]


def fenced(src):
    return f"Rule:\n```\n{src}\n```"


def prog_h(src, i=0):
    return Hypothesis(fenced(src), src, HypothesisForm.PROGRAM, sample_index=i)


def last_occurrence_task():
    seen = tuple(ex_ints(x, y) for x, y in LAST_OCCURRENCE_PAIRS)
    return Task("last-occ", TaskKind.LISTFN, seen, seen[:1])


def test_last_occurrence_rule_scores_one():
    s = score(prog_h(LAST_OCCURRENCE_PROGRAM), last_occurrence_task(), symbolic_interpreter(TaskKind.LISTFN))
    assert s.score == 1.0


def test_last_occurrence_rule_natural_language():
    class T:
        def translate(self, text, kind):
            return fenced(LAST_OCCURRENCE_PROGRAM)

    h = Hypothesis("Rule: Remove the last occurrence of each unique number.", "Remove the last occurrence of each unique number.", HypothesisForm.NATURAL_LANGUAGE)
    assert score(h, last_occurrence_task(), symbolic_interpreter(TaskKind.LISTFN, T())).score == 1.0


def test_identity_scores_zero(list_task):
    assert score(prog_h("xs"), list_task, symbolic_interpreter(TaskKind.LISTFN)).score == 0.0


def test_ill_formed_scores_zero(list_task):
    h = Hypothesis("no rule", None, HypothesisForm.PROGRAM, error="no marker")
    s = score(h, list_task, symbolic_interpreter(TaskKind.LISTFN))
    assert s.score == 0.0 and s.compile_error
    assert all(isinstance(p, Failure) for p, _ in s.predictions)


def _scored(scores):
    return [engine.ScoredHypothesis(prog_h("xs", i), None, s, []) for i, s in enumerate(scores)]


@pytest.mark.parametrize("scores, want", [([0.5, 1.0, 0.75], 1), ([0.5, 0.5], 0), ([0.0], 0)])
def test_select_best(scores, want):
    assert select_best(_scored(scores)) == want


def test_make_feedback_miniscan():
    task = Task(
        "m",
        TaskKind.MINISCAN,
        (Example(Value.tokens("siun mcneilt"), Value.tokens("BLUE BLUE BLUE")),),
        (Example(Value.tokens("siun"), Value.tokens("BLUE")),),
    )
    best = engine.ScoredHypothesis(prog_h("x"), None, 0.0, [(Value.tokens("BLUE BLUE"), False)])
    assert make_feedback(best, task) == "Input: siun mcneilt\nExpected output: BLUE BLUE BLUE\nActual output: BLUE BLUE"


def test_feedback_lists_exactly_the_misses():
    seen = tuple(ex_ints([i, i + 1], [i + 1, i]) for i in range(8))
    task = Task("r", TaskKind.LISTFN, seen, seen[:1])
    # reverse except for inputs starting with 2 or 5
    src = "if head(xs) == 2 or head(xs) == 5 then xs else reverse(xs)"
    s = score(prog_h(src), task, symbolic_interpreter(TaskKind.LISTFN))
    fb = make_feedback(s, task)
    blocks = fb.split("\n\n")
    assert [b.splitlines()[0] for b in blocks] == ["Input: [2, 3]", "Input: [5, 6]"]
    assert blocks[0] == "Input: [2, 3]\nExpected output: [3, 2]\nActual output: [2, 3]"


def test_feedback_renders_failures_as_none(list_task):
    s = score(prog_h("[index(xs, 50)]"), list_task, symbolic_interpreter(TaskKind.LISTFN))
    assert make_feedback(s, list_task).count("Actual output: None") == 4


def test_refine_stops_after_right_rule(list_task):
    client, backend = scripted([fenced("xs"), fenced("slice(xs, 1, len(xs) - 2)"), fenced("xs")])
    tr = refine(list_task, dataclasses.replace(PROGRAM_CFG, samples_per_iteration=1), client)
    assert len(tr.iterations) == 2
    assert tr.iterations[-1].best.score == 1.0 and tr.iterations[-1].feedback == ""
    assert tr.a_tau == 1.0 and backend.calls == 2
    second = backend.requests[1].prompt
    assert "Your rule: xs" in second and "Expected output: [7, 1, 8]" in second


def test_t1_n1_never_builds_feedback(list_task, monkeypatch):
    calls = []
    monkeypatch.setattr(engine, "make_feedback", lambda *a: calls.append(a) or "fb")
    client, _ = scripted([fenced("xs")])
    tr = refine(list_task, dataclasses.replace(PROGRAM_CFG, max_iterations=1, samples_per_iteration=1), client)
    assert len(tr.iterations) == 1 and calls == [] and tr.iterations[0].feedback is None


def test_all_wrong_runs_t_iterations(list_task):
    client, backend = scripted([fenced("xs"), fenced("reverse(xs)"), fenced("tail(xs)")])
    tr = refine(list_task, dataclasses.replace(PROGRAM_CFG, samples_per_iteration=1), client)
    assert len(tr.iterations) == 3 and backend.calls == 3
    # tail(xs) gets nothing right either; the earliest best (xs, 0.0) is kept
    assert tr.final.hypothesis.payload == "xs"
    assert tr.a_tau == task_accuracy([ex.input for ex in list_task.unseen], list_task.unseen)


def test_final_is_best_across_iterations(list_task):
    # second rule gets one seen example right, third regresses to zero
    partial = "if len(xs) == 4 then [5] else xs"
    client, _ = scripted([fenced("xs"), fenced(partial), fenced("xs")])
    tr = refine(list_task, dataclasses.replace(PROGRAM_CFG, samples_per_iteration=1), client)
    assert tr.final.hypothesis.payload == partial
    assert tr.final.score == 0.25


@pytest.mark.parametrize("carry", [True, False])
def test_carry_best(list_task, carry):
    partial = "if len(xs) == 4 then [5] else xs"
    client, backend = scripted([fenced(partial), fenced("xs"), fenced("xs")])
    cfg = dataclasses.replace(PROGRAM_CFG, samples_per_iteration=1, carry_best=carry)
    refine(list_task, cfg, client)
    third = backend.requests[2].prompt
    assert (f"Your rule: {partial}" in third) is carry


def test_temperature_and_sample_count(list_task):
    client, backend = scripted(responder=lambda r: fenced("slice(xs, 1, len(xs) - 2)"))
    refine(list_task, PROGRAM_CFG, client)
    assert [r.temperature for r in backend.requests] == [0.7] * 5


def test_nl_rule_translated_once(list_task):
    def respond(req):
        if req.prompt.startswith("You are an expert programmer"):
            return fenced("slice(xs, 1, len(xs) - 2)")
        return "Rule: Remove the first element and the last two elements"

    client, backend = scripted(responder=respond)
    tr = refine(list_task, RunConfig(), client)
    assert tr.a_tau == 1.0
    # 5 identical samples, one translation thanks to memoization
    assert backend.calls == 6
    assert tr.to_record()["final_program"] == "slice(xs, 1, len(xs) - 2)"


def test_transport_failure_records_error(list_task):
    class Down:
        def complete(self, req):
            raise TransportError("down", retryable=False)

    from inductor.proposer import LmClient

    tr = run_task(list_task, PROGRAM_CFG, LmClient(Down()))
    assert tr.error and "down" in tr.error
    assert tr.to_record()["error"]


# --- baselines ------------------------------------------------------------------


def test_io_call_count(acre_task):
    client, backend = scripted(responder=lambda r: "on")
    tr = run_task(acre_task, RunConfig(method=Method.IO), client)
    assert backend.calls == 4 and tr.ledger.api_calls == 4
    assert all(r.temperature == 0.0 for r in backend.requests)


def test_io_all_correct(acre_task):
    answers = iter(render_value(ex.output) for ex in acre_task.unseen)
    client, _ = scripted(responder=lambda r: next(answers))
    assert run_task(acre_task, RunConfig(method=Method.IO), client).a_tau == 1.0


def test_sc_call_count(acre_task):
    client, backend = scripted(responder=lambda r: "off")
    run_task(acre_task, RunConfig(method=Method.SC, samples_per_iteration=5), client)
    assert backend.calls == 20


def test_majority_vote():
    labels = [Value.label(s) for s in ["on", "off", "on", "on", "off"]]
    assert majority_vote(labels) == Value.label("on")
    assert majority_vote([Value.tokens("a"), Value.tokens("b")]) == Value.tokens("a")
    assert majority_vote([Failure("parse", "x"), Failure("parse", "x"), Value.label("off")]) == Value.label("off")
    assert isinstance(majority_vote([Failure("parse", "x")]), Failure)


def test_sc_votes_per_example(acre_task):
    replies = iter(["off", "on", "on", "off", "on"] + ["off"] * 15)
    client, _ = scripted(responder=lambda r: next(replies))
    tr = run_task(acre_task, RunConfig(method=Method.SC), client)
    assert tr.unseen_predictions[0] == Value.label("on")


# --- lm as interpreter ---------------------------------------------------------


def test_lm_apply_parses():
    client, _ = scripted(["[7, 1, 8]", "The output is on", "no idea"])
    assert lm_apply("r", Value.ints([9, 7, 1, 8, 2, 3]), client, TaskKind.LISTFN) == Value.ints([7, 1, 8])
    assert lm_apply("r", Value.objects(["a"]), client, TaskKind.ACRE) == Value.label("on")
    assert isinstance(lm_apply("r", Value.ints([1]), client, TaskKind.LISTFN), Failure)


def test_lm_apply_transport_failure_is_failure():
    client, _ = scripted([])
    assert isinstance(lm_apply("r", Value.ints([1]), client, TaskKind.LISTFN), Failure)


@pytest.mark.parametrize(
    "text, kind, want",
    [
        ("Output: [1, 2]", TaskKind.LISTFN, Value.ints([1, 2])),
        ("Sure.\nOutput:\n[1, 2]\n[3, 4]", TaskKind.MINIARC, Value.grid([[1, 2], [3, 4]])),
        ("[[0, 1], [1, 0]]", TaskKind.MINIARC, Value.grid([[0, 1], [1, 0]])),
        ("Output: RED RED\nbecause...", TaskKind.MINISCAN, Value.tokens("RED RED")),
        ("It is UNDETERMINED.", TaskKind.ACRE, Value.label("undetermined")),
    ],
)
def test_parse_lenient(text, kind, want):
    assert parse_lenient(text, kind) == want


def perfect_applier(rule_queue):
    """Scripted LM: hands out queued rules and applies any program rule exactly."""
    queue = list(rule_queue)

    def respond(req):
        p = req.prompt
        if p.startswith("Generate an output corresponding"):
            rule = p.split("\n\nRule: ", 1)[1].split("\n\nInput: ", 1)[0]
            x = p.rsplit("Input: ", 1)[1].rsplit("\nOutput:", 1)[0]
            compiled = compile_hypothesis(prog_h(rule), TaskKind.LISTFN)
            return str(compiled.apply(Value.ints([int(v) for v in x.strip("[] ").split(",") if v.strip()])))
        return queue.pop(0)

    return respond


RULES = [fenced("xs"), fenced("reverse(xs)"), fenced("slice(xs, 1, len(xs) - 2)")]


def _shape(rec):
    keep = ("iterations", "final_rule", "predictions", "a_tau")
    return {k: rec[k] for k in keep}


def test_sr_with_perfect_lm_matches_refine(list_task):
    cfg = dataclasses.replace(PROGRAM_CFG, samples_per_iteration=1)
    c1, b1 = scripted(responder=perfect_applier(RULES))
    r1 = refine(list_task, cfg, c1)
    c2, b2 = scripted(responder=perfect_applier(RULES))
    r2 = run_task(list_task, dataclasses.replace(cfg, method=Method.SR), c2)
    assert _shape(r1.to_record()) == _shape(r2.to_record())
    assert r2.to_record()["interpreter"] == "lm"
    # 3 proposals; SR adds 4 applications per iteration and 2 for the unseen split
    assert b1.calls == 3 and b2.calls == 3 + 3 * 4 + 2
    assert r2.ledger.api_calls > r1.ledger.api_calls


def test_sr_misjudging_lm_keeps_going(list_task):
    def respond(req):
        if req.prompt.startswith("Generate an output corresponding"):
            return "[0]"
        return fenced("slice(xs, 1, len(xs) - 2)")

    client, _ = scripted(responder=respond)
    tr = run_task(list_task, dataclasses.replace(PROGRAM_CFG, method=Method.SR, samples_per_iteration=1), client)
    assert len(tr.iterations) == 3
    assert all(it.best.score == 0.0 for it in tr.iterations)


# --- loop invariants over random scripted runs -----------------------------------

CANDIDATES = [
    "xs",
    "reverse(xs)",
    "if len(xs) == 4 then [5] else xs",
    "if len(xs) > 4 then slice(xs, 1, len(xs) - 2) else xs",
    "slice(xs, 1, len(xs) - 2)",
    "[index(xs, 99)]",
]


@given(
    st.lists(st.sampled_from(CANDIDATES), min_size=9, max_size=9),
    st.integers(1, 3),
    st.sampled_from([1, 3]),
    st.booleans(),
)
def test_loop_invariants(choices, T, N, carry):
    seen = (
        ex_ints([9, 7, 1, 8, 2, 3], [7, 1, 8]),
        ex_ints([1, 2, 3, 4, 5], [2, 3]),
        ex_ints([5, 5, 5, 5], [5]),
        ex_ints([0, 1, 2, 3, 4, 5, 6], [1, 2, 3, 4]),
    )
    task = Task("inv", TaskKind.LISTFN, seen, seen[:2])
    client, _ = scripted([fenced(c) for c in choices])
    cfg = RunConfig(max_iterations=T, samples_per_iteration=N, carry_best=carry, hypothesis_form=HypothesisForm.PROGRAM)
    tr = refine(task, cfg, client)
    assert 1 <= len(tr.iterations) <= T
    best_so_far = -1.0
    for k, it in enumerate(tr.iterations):
        assert len(it.candidates) == N
        assert all(c.score <= it.best.score for c in it.candidates)
        last = k == len(tr.iterations) - 1
        if it.best.score == 1.0:
            assert last and it.feedback == ""
        elif not last:
            wrong = [ex.input for ex, (_p, ok) in zip(seen, it.best.predictions) if not ok]
            assert [b.splitlines()[0] for b in it.feedback.split("\n\n")] == [f"Input: {render_value(x)}" for x in wrong]
        best_so_far = max(best_so_far, it.best.score)
    assert tr.final.score == best_so_far
    assert len(tr.iterations) == T or tr.iterations[-1].best.score == 1.0
