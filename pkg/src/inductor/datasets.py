"""Task files, MiniSCAN generation and perturbation harnesses.

Everything here is a pure function of its inputs and an integer seed.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

from .blicket import consistent_assignment_exists
from .core import (
    DEFAULT_COUNTS,
    INPUT_KIND,
    OUTPUT_KIND,
    Example,
    RuleApplicationFailure,
    Task,
    TaskKind,
    Value,
    value_from_json,
)
from .qcfg import Grammar, GrammarRule, derive
from .sandbox import eval_program, parse_program

log = logging.getLogger(__name__)


class TaskSchemaError(ValueError):
    def __init__(self, task_id: str, field: str, message: str):
        super().__init__(f"task {task_id!r}, field {field!r}: {message}")
        self.task_id = task_id
        self.field = field


# ---------------------------------------------------------------------------
# Loading / saving
# ---------------------------------------------------------------------------


def _examples(raw, task_id: str, fname: str, kind: TaskKind) -> list:
    if not isinstance(raw, list):
        raise TaskSchemaError(task_id, fname, "must be a list of examples")
    out = []
    for i, ex in enumerate(raw):
        where = f"{fname}[{i}]"
        if not isinstance(ex, dict) or "input" not in ex or "output" not in ex:
            raise TaskSchemaError(task_id, where, "needs 'input' and 'output'")
        try:
            x = value_from_json(ex["input"], INPUT_KIND[kind])
        except (TypeError, ValueError) as e:
            raise TaskSchemaError(task_id, where + ".input", str(e)) from None
        try:
            y = value_from_json(ex["output"], OUTPUT_KIND[kind])
        except (TypeError, ValueError) as e:
            raise TaskSchemaError(task_id, where + ".output", str(e)) from None
        out.append(Example(x, y))
    return out


def task_from_json(obj: dict, kind: Optional[TaskKind] = None) -> Task:
    task_id = str(obj.get("id", "?"))
    raw_kind = obj.get("kind", kind.value if kind is not None else None)
    try:
        tkind = TaskKind(raw_kind)
    except ValueError:
        raise TaskSchemaError(task_id, "kind", f"unknown kind {raw_kind!r}") from None
    if kind is not None and tkind is not TaskKind(kind):
        raise TaskSchemaError(task_id, "kind", f"expected {TaskKind(kind).value}, file says {tkind.value}")
    seen = _examples(obj.get("seen"), task_id, "seen", tkind)
    unseen = _examples(obj.get("unseen"), task_id, "unseen", tkind)
    ood = _examples(obj["ood"], task_id, "ood", tkind) if obj.get("ood") is not None else None
    if not seen:
        raise TaskSchemaError(task_id, "seen", "must be non-empty")
    if not unseen:
        raise TaskSchemaError(task_id, "unseen", "must be non-empty")
    truth = obj.get("truth_program")
    if truth is not None and not isinstance(truth, str):
        raise TaskSchemaError(task_id, "truth_program", "must be a string")
    return Task(task_id, tkind, seen, unseen, ood, truth, bool(obj.get("noisy", False)))


def load_tasks(path: Union[str, Path], kind: Optional[TaskKind] = None) -> list:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(doc, dict) or not isinstance(doc.get("tasks"), list):
        raise TaskSchemaError("?", "tasks", "document must be {\"tasks\": [...]}")
    tasks = [task_from_json(t, kind) for t in doc["tasks"]]
    for t in tasks:
        want = DEFAULT_COUNTS[t.kind]
        if (len(t.seen), len(t.unseen)) != want:
            log.warning(
                "task %s: %d seen / %d unseen, expected %d / %d for %s",
                t.id, len(t.seen), len(t.unseen), *want, t.kind.value,
            )
        if t.kind is TaskKind.ACRE and not consistent_assignment_exists(t):
            log.warning("task %s: no object labelling reproduces the seen outputs", t.id)
    return tasks


def save_tasks(tasks: Iterable[Task], path: Union[str, Path]) -> None:
    doc = {"tasks": [t.to_json() for t in tasks]}
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Pseudowords
# ---------------------------------------------------------------------------

CONSONANTS = "bcdfghjklmnprstvwz"
VOWELS = "aeiou"

# Real English words the syllable templates can produce, plus the original
# task vocabulary, which is likely memorized.
STOPLIST = frozenset(
    """
    bad bag ban bat bed big bit bog bud bug bun bus but cab can cap car cat cod cop cot cub cup cut
    dad dam den did dig dim din dip doc dog don dot dub dug fan far fat fed fig fin fit fog fun fur
    gap gas gel get god got gum gun gut had ham has hat hem hen her him hip his hit hog hop hot hub
    hug hum hut jab jam jar jet jig job jog jot jug kid kin kit lab lad lap led leg let lid lip lit
    log lot lug mad man map mat men met mob mom mop mud mug nab nag nap net nod nor not nun nut pad
    pal pan par pat peg pen pep pet pig pin pit pod pop pot pub pun pup put rag ram ran rap rat red
    rib rid rig rim rip rob rod rot rub rug run rut sad sap sat set sin sip sir sit sob sod son sub
    sum sun tab tag tan tap tar ten tin tip top tub tug van vat vet wag war was web wed wet wig win
    wit yes yet zip zap gem fix box fox wax tax mix six
    baby bake bike bite bone cake came cane cape care case cave code come cone cope core cure cute
    dame date dine dive dome done dose dove dune fade fake fame fate file fine fire five fuse game
    gate gave gone hate have here hide hike hole home hope hose huge joke kite lake lame lane late
    lime line live lobe lone lose love made make male mane mare mate maze mile mine mode mole more
    mule mute name nape nice nine node none nose note pace page pale pane pave pile pine pipe poke
    pole pope pore pose race rage rake rate rave ride ripe robe rode role rope rose rude rule safe
    sage sake sale same sane save side site size sole some sore sure take tale tame tape tide tile
    time tone tore tube tune vane vase vote wade wage wake wave wide wife wine wipe wire wise woke
    wore zone
    menu sofa soda tuna lava diva coma mama papa visa data halo hero judo polo solo taco
    lemon melon salad panel rumor solid topic tulip venom wagon robot radar cabin camel canal
    devil fever habit hotel label lapel level limit linen medal metal model modem motel novel
    pedal petal pilot rival rotor sedan siren tenor timid token total valid visit vital vocal
    dax lug wif zup fep kiki blicket
    """.split()
)


def gen_pseudoword(rng: random.Random, used: Optional[set] = None) -> str:
    """Pronounceable nonword of one or two CV/CVC syllables, 3 to 8 letters.

    ``used`` holds words already taken in the current task; the new word is
    added to it.
    """
    while True:
        word = ""
        for _ in range(rng.choice((1, 2))):
            word += rng.choice(CONSONANTS) + rng.choice(VOWELS)
            if rng.random() < 0.5:
                word += rng.choice(CONSONANTS)
        if not 3 <= len(word) <= 8 or word in STOPLIST:
            continue
        if used is not None:
            if word in used:
                continue
            used.add(word)
        return word


# ---------------------------------------------------------------------------
# MiniSCAN generation
# ---------------------------------------------------------------------------

COLOR_WORDS = ("RED", "BLUE", "GREEN", "YELLOW", "PURPLE", "PINK", "BLACK", "WHITE")

PRIMITIVE_PRIORITY = 4
TRIPLE_PRIORITY = 3
WRAP_PRIORITY = 2
SWAP_PRIORITY = 1


@dataclass(frozen=True)
class MiniScanSpec:
    """Function-rule templates are fixed: suffix-triple ``##A w1 -> ##A ##A ##A``,
    infix-wrap ``##A w2 ##B -> ##A ##B ##A``, infix-swap ``##A w3 ##B -> ##B ##A``."""

    seed: int = 0
    primitive_count: int = 4
    output_mode: str = "color_words"  # or "pseudowords"
    n_seen: int = 14
    n_unseen: int = 10
    max_len: int = 9
    task_id: Optional[str] = None

    def __post_init__(self):
        if self.output_mode not in ("color_words", "pseudowords"):
            raise ValueError(f"unknown output_mode {self.output_mode!r}")
        if self.output_mode == "color_words" and self.primitive_count > len(COLOR_WORDS):
            raise ValueError(f"at most {len(COLOR_WORDS)} colour primitives")


def miniscan_truth_grammar(prims: Sequence[str], outputs: Sequence[str], funcs: Sequence[str]) -> Grammar:
    rules = [GrammarRule((w,), (o,), PRIMITIVE_PRIORITY, i) for i, (w, o) in enumerate(zip(prims, outputs))]
    k = len(rules)
    w1, w2, w3 = funcs
    rules.append(GrammarRule(("##A", w1), ("##A", "##A", "##A"), TRIPLE_PRIORITY, k))
    rules.append(GrammarRule(("##A", w2, "##B"), ("##A", "##B", "##A"), WRAP_PRIORITY, k + 1))
    rules.append(GrammarRule(("##A", w3, "##B"), ("##B", "##A"), SWAP_PRIORITY, k + 2))
    return Grammar(tuple(rules))


def _term(rng: random.Random, prims, funcs, depth: int) -> list:
    if depth == 0 or rng.random() < 0.3:
        return [rng.choice(prims)]
    op = rng.randrange(3)
    if op == 0:
        return _term(rng, prims, funcs, depth - 1) + [funcs[0]]
    left = _term(rng, prims, funcs, depth - 1)
    right = _term(rng, prims, funcs, depth - 1)
    return left + [funcs[op]] + right


def gen_miniscan(spec: MiniScanSpec) -> Task:
    rng = random.Random(spec.seed)
    used: set = set()
    prims = [gen_pseudoword(rng, used) for _ in range(spec.primitive_count)]
    funcs = [gen_pseudoword(rng, used) for _ in range(3)]
    if spec.output_mode == "color_words":
        outputs = rng.sample(COLOR_WORDS, spec.primitive_count)
    else:
        outputs = [gen_pseudoword(rng, used) for _ in range(spec.primitive_count)]
    grammar = miniscan_truth_grammar(prims, outputs, funcs)

    commands: list = [[p] for p in prims]
    taken = {tuple(c) for c in commands}

    def add(cmd) -> bool:
        if tuple(cmd) in taken or len(cmd) > spec.max_len:
            return False
        taken.add(tuple(cmd))
        commands.append(cmd)
        return True

    # each function word applied to primitives, twice
    for _ in range(2):
        for target in ([funcs[0]], [funcs[1]], [funcs[2]]):
            while True:
                a, b = rng.sample(prims, 2)
                cmd = [a] + target if target[0] == funcs[0] else [a] + target + [b]
                if add(cmd):
                    break

    def fill(count: int, min_depth: int, max_depth: int) -> None:
        goal = len(commands) + count
        attempts = 0
        while len(commands) < goal:
            attempts += 1
            depth = rng.randint(min_depth, max_depth)
            cmd = _term(rng, prims, funcs, depth)
            if len(cmd) < 3 and attempts < 10_000:
                continue
            if sum(1 for tok in cmd if tok in funcs) < 2 and attempts < 10_000:
                continue
            if not add(cmd) and attempts > 100_000:
                raise RuntimeError("could not generate enough distinct MiniSCAN commands")

    fill(spec.n_seen - len(commands), 2, 2)
    seen_cmds = commands[: spec.n_seen]
    fill(spec.n_unseen, 2, 3)
    unseen_cmds = commands[spec.n_seen:]

    def example(cmd) -> Example:
        x = Value.tokens(cmd)
        return Example(x, derive(grammar, x))

    order = list(range(spec.n_seen))
    rng.shuffle(order)
    seen = [example(seen_cmds[i]) for i in order]
    unseen = [example(c) for c in unseen_cmds]
    task_id = spec.task_id or f"miniscan-{spec.output_mode}-{spec.seed}"
    return Task(task_id, TaskKind.MINISCAN, seen, unseen, truth_program=grammar.render())


# ---------------------------------------------------------------------------
# Noise perturbation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NoiseSpec:
    fraction: float
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError("fraction must be in [0, 1]")


def _round_half_up(x: float) -> int:
    return int(x + 0.5)


def _noisy_value(rng: random.Random, old: int) -> int:
    while True:
        v = rng.randint(0, 99)
        if v != old:
            return v


def perturb_noise(task: Task, spec: NoiseSpec) -> Task:
    if task.kind is not TaskKind.LISTFN:
        raise ValueError("noise perturbation applies to listfn tasks only")
    rng = random.Random(f"{spec.seed}:{task.id}")
    k = _round_half_up(spec.fraction * len(task.seen))
    chosen = set(rng.sample(range(len(task.seen)), k))
    seen = list(task.seen)
    for i in sorted(chosen):
        out = list(seen[i].output.data)
        if not out:
            out = [rng.randint(0, 99)]
        else:
            n_changes = min(rng.choice((1, 2)), len(out))
            for pos in rng.sample(range(len(out)), n_changes):
                out[pos] = _noisy_value(rng, out[pos])
        seen[i] = Example(seen[i].input, Value.ints(out))
    return task.replace(seen=tuple(seen), noisy_flag=True)


# ---------------------------------------------------------------------------
# OOD sampling
# ---------------------------------------------------------------------------


def ood_sample_lists(
    task: Task,
    n: int,
    length_range: Optional[tuple] = None,
    seed: int = 0,
    value_range: tuple = (0, 99),
    max_attempts: int = 100,
) -> list:
    """Longer inputs labelled by the task's ground-truth program.

    Default lengths run from one past the longest seen input to twice its
    length. Inputs on which the truth program fails are redrawn.
    """
    if task.truth_program is None:
        raise ValueError(f"task {task.id} has no truth_program")
    program = parse_program(task.truth_program)
    if length_range is None:
        longest = max(len(ex.input.data) for ex in task.seen)
        length_range = (longest + 1, max(2 * longest, longest + 1))
    lo, hi = length_range
    rng = random.Random(f"{seed}:{task.id}:ood")
    out = []
    for _ in range(n):
        for _attempt in range(max_attempts):
            x = Value.ints([rng.randint(*value_range) for _ in range(rng.randint(lo, hi))])
            try:
                y = eval_program(program, x)
            except RuleApplicationFailure:
                continue
            out.append(Example(x, y))
            break
        else:
            raise RuntimeError(f"truth program of {task.id} kept failing on sampled inputs")
    return out


def with_ood(task: Task, examples: Sequence[Example]) -> Task:
    return task.replace(ood=tuple(examples))
