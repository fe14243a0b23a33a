import os

import pytest
from hypothesis import settings

from inductor.core import Example, Task, TaskKind, Value
from inductor.proposer import CostLedger, LmClient, ScriptedBackend

settings.register_profile("ci", max_examples=60, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))


def scripted(responses=None, responder=None, **kw):
    backend = ScriptedBackend(responses, responder)
    return LmClient(backend, kw.pop("model", "scripted"), ledger=CostLedger(), sleep=lambda s: None, **kw), backend


@pytest.fixture
def make_client():
    return scripted


def ex_ints(x, y):
    return Example(Value.ints(x), Value.ints(y))


@pytest.fixture
def list_task():
    # drop the first element and the last two
    seen = [
        ex_ints([9, 7, 1, 8, 2, 3], [7, 1, 8]),
        ex_ints([1, 2, 3, 4, 5], [2, 3]),
        ex_ints([5, 5, 5, 5], [5]),
        ex_ints([0, 1, 2, 3, 4, 5, 6], [1, 2, 3, 4]),
    ]
    unseen = [ex_ints([4, 3, 2, 1, 0], [3, 2]), ex_ints([10, 20, 30, 40], [20])]
    return Task("lf-drop", TaskKind.LISTFN, tuple(seen), tuple(unseen), truth_program="slice(xs, 1, len(xs) - 2)")


@pytest.fixture
def acre_task():
    def ex(objs, label):
        return Example(Value.objects(objs), Value.label(label))

    seen = [
        ex(["blue rubber sphere"], "on"),
        ex(["red metal cube"], "off"),
        ex(["blue rubber sphere", "red metal cube"], "on"),
        ex(["green metal cylinder"], "off"),
        ex(["green metal cylinder", "red metal cube"], "off"),
        ex(["yellow rubber cube"], "on"),
    ]
    unseen = [
        ex(["yellow rubber cube", "red metal cube"], "on"),
        ex(["green metal cylinder"], "off"),
        ex(["purple rubber sphere"], "undetermined"),
        ex(["blue rubber sphere", "green metal cylinder"], "on"),
    ]
    return Task("acre-0", TaskKind.ACRE, tuple(seen), tuple(unseen))


def make_acre_tasks(n, seed=0):
    """Random ACRE-shaped tasks (6 seen / 4 unseen) labelled by a hidden assignment."""
    import random

    from inductor.blicket import BlicketRule, apply_blicket

    rng = random.Random(seed)
    colors, materials, shapes = ["blue", "red", "green", "gray"], ["rubber", "metal"], ["cube", "sphere", "cylinder"]
    tasks = []
    for i in range(n):
        objs = rng.sample([f"{c} {m} {s}" for c in colors for m in materials for s in shapes], 4)
        rule = BlicketRule({o: rng.choice(["on", "off"]) for o in objs})

        def ex():
            q = rng.sample(objs, rng.randint(1, 3))
            return Example(Value.objects(q), apply_blicket(rule, Value.objects(q)))

        tasks.append(Task(f"acre-{i:03d}", TaskKind.ACRE, tuple(ex() for _ in range(6)), tuple(ex() for _ in range(4))))
    return tasks


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
