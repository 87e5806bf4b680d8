"""Curriculum designer: gate, simplify, clamping, retries, fallbacks."""

import json
import random
from fractions import Fraction

import pytest

from microcurr.config import EngineConfig
from microcurr.designer import (
    ADJUST,
    INCREASE,
    Designer,
    EmptyCurriculum,
    decode_candidate,
    fallback_adjust,
    fallback_increase,
    format_history,
    gate,
    last_success_curriculum,
    simplify,
    validate_curriculum,
)
from microcurr.domain import (
    CurriculumSpec,
    DomainError,
    IterationRecord,
    MapSpec,
    ObjectiveSpec,
    Outcome,
    PerformanceReport,
    UnitSpec,
    curriculum_to_dict,
    make_curriculum,
    normalize_spec,
    spec_equals,
)
from microcurr.llm import BackendError, ScriptedBackend


def report(p, q=1, error=None):
    return PerformanceReport(win_rate=Fraction(p, q), episodes=(), error=error)


def record(index, curriculum, outcome, rate):
    return IterationRecord(
        index=index,
        curriculum=curriculum,
        tree_source="(tree (group Marine (hold)))\n",
        report=report(*rate),
        outcome=outcome,
        attempts_used=1,
    )


def fenced(payload: dict) -> str:
    return "```json\n" + json.dumps(payload) + "\n```"


def candidate_json(agents, enemies, tick_limit=600):
    return {
        "id": "cand",
        "agents": agents,
        "enemies": enemies,
        "map": {"width": 32, "height": 32, "terrain": "flat"},
        "objective": {
            "win_condition": "eliminate_all_enemies",
            "tick_limit": tick_limit,
            "episodes": 3,
        },
    }


def units(unit_type, count, techs=(), position=None):
    return {
        "unit_type": unit_type,
        "count": count,
        "position": list(position) if position else [5, 25],
        "technologies": list(techs),
    }


# --- threshold gate -----------------------------------------------------------

def test_gate_is_exact_at_two_thirds():
    theta = Fraction(2, 3)
    assert gate(Fraction(2, 3), theta) == INCREASE
    assert gate(Fraction(1), theta) == INCREASE
    assert gate(Fraction(1, 3), theta) == ADJUST
    assert gate(Fraction(0), theta) == ADJUST
    # one episode short of the bar in a larger sample
    assert gate(Fraction(665, 1000), theta) == ADJUST
    assert gate(Fraction(667, 1000), theta) == INCREASE


# --- simplify -------------------------------------------------------------------

def test_simplify_stock_final(final_task, catalog):
    start = simplify(final_task, catalog)
    assert len(start.agents) == 1 and len(start.enemies) == 1
    agent, enemy = start.agents[0], start.enemies[0]
    assert agent.unit_type == "Marine" and agent.count == 5
    assert agent.technologies == frozenset()
    assert enemy.unit_type == "Zealot" and enemy.count == 2
    assert enemy.technologies == frozenset({"Charge"})
    assert start.difficulty == 6.0  # 2 zealots x weight 2 + one tech x 2
    assert start.map == final_task.map
    assert start.objective == final_task.objective
    assert start.id == f"{final_task.id}-simplified"
    assert agent.position == (5.0, 25.0)
    assert enemy.position == (25.0, 5.0)


def test_simplify_caps_do_not_raise_counts(catalog):
    small = make_curriculum(
        "small",
        [UnitSpec("Marauder", 3, (5.0, 25.0), frozenset({"Stimpack"}))],
        [UnitSpec("Stalker", 1, (25.0, 5.0), frozenset({"BlinkTech"}))],
        MapSpec(32, 32),
        ObjectiveSpec(),
        catalog,
    )
    start = simplify(small, catalog)
    assert start.agents[0].count == 3
    assert start.agents[0].technologies == frozenset()  # agents always stripped
    assert start.enemies[0].count == 1
    assert start.enemies[0].technologies == frozenset({"BlinkTech"})


def test_simplify_caps_bind_on_large_tasks(catalog):
    big = make_curriculum(
        "big",
        [UnitSpec("Marauder", 30, (5.0, 25.0), frozenset({"Stimpack"}))],
        [UnitSpec("Stalker", 20, (25.0, 5.0), frozenset({"BlinkTech"}))],
        MapSpec(32, 32),
        ObjectiveSpec(),
        catalog,
    )
    start = simplify(big, catalog)
    assert start.agents[0].count == 5
    assert start.enemies[0].count == 2
    assert start.difficulty == 2 * 3.0 + 2.0  # two stalkers plus one tech


def test_simplify_breaks_count_ties_alphabetically(catalog):
    task = make_curriculum(
        "tie",
        [UnitSpec("Marine", 5, (5.0, 25.0)), UnitSpec("Ghost", 5, (5.0, 25.0))],
        [UnitSpec("Zealot", 2, (25.0, 5.0), frozenset()),
         UnitSpec("Stalker", 2, (25.0, 5.0), frozenset())],
        MapSpec(32, 32),
        ObjectiveSpec(),
        catalog,
    )
    start = simplify(task, catalog)
    assert start.agents[0].unit_type == "Ghost"
    assert start.enemies[0].unit_type == "Stalker"


def test_simplify_picks_most_numerous(catalog, final_task):
    # Marine 20 dominates the agent side, Zealot 15 the enemy side; a
    # reshuffled copy must pick the same pair.
    shuffled = CurriculumSpec(
        id=final_task.id,
        agents=tuple(reversed(final_task.agents)),
        enemies=tuple(reversed(final_task.enemies)),
        map=final_task.map,
        objective=final_task.objective,
        difficulty=final_task.difficulty,
    )
    assert spec_equals(simplify(shuffled, catalog), simplify(final_task, catalog))


# --- candidate clamping ------------------------------------------------------------

def test_validate_caps_counts(final_task, catalog):
    candidate = decode_candidate(candidate_json(
        [units("Marine", 25)],
        [units("Zealot", 40, ["Charge"], position=(25, 5))],
    ), final_task)
    out = validate_curriculum(candidate, final_task, catalog)
    assert out.agents[0].count == 20
    assert out.enemies[0].count == 15


def test_validate_drops_unknown_and_foreign_types(final_task, catalog):
    # Thor is not in the final task roster, Dragoon not in the catalog:
    # both silently vanish.
    candidate = decode_candidate(candidate_json(
        [units("Marine", 5), units("Dragoon", 3)],
        [units("Zealot", 2, ["Charge"], position=(25, 5)),
         units("TargetDummy", 4, position=(25, 5))],
    ), final_task)
    out = validate_curriculum(candidate, final_task, catalog)
    assert [u.unit_type for u in out.agents] == ["Marine"]
    assert [u.unit_type for u in out.enemies] == ["Zealot"]


def test_validate_intersects_technologies(final_task, catalog):
    candidate = decode_candidate(candidate_json(
        [units("Marine", 5, ["Stimpack"])],
        [units("Zealot", 3, ["Charge", "BlinkTech"], position=(25, 5))],
    ), final_task)
    out = validate_curriculum(candidate, final_task, catalog)
    assert out.agents[0].technologies == frozenset({"Stimpack"})
    assert out.enemies[0].technologies == frozenset({"Charge"})


def test_validate_strips_tech_the_final_does_not_grant(final_task, catalog):
    # Marauder owns Stimpack in the final task but not PunisherGrenades.
    candidate = decode_candidate(candidate_json(
        [units("Marauder", 4, ["Stimpack", "PunisherGrenades"])],
        [units("Zealot", 2, ["Charge"], position=(25, 5))],
    ), final_task)
    out = validate_curriculum(candidate, final_task, catalog)
    assert out.agents[0].technologies == frozenset({"Stimpack"})


def test_validate_forces_final_map(final_task, catalog):
    raw = candidate_json([units("Marine", 5)],
                         [units("Zealot", 2, ["Charge"], position=(25, 5))])
    raw["map"] = {"width": 16, "height": 16, "terrain": "flat"}
    candidate = decode_candidate(raw, final_task)
    out = validate_curriculum(candidate, final_task, catalog)
    assert out.map == final_task.map


def test_validate_merges_duplicate_types(final_task, catalog):
    candidate = decode_candidate(candidate_json(
        [units("Marine", 3), units("Marine", 4)],
        [units("Zealot", 2, ["Charge"], position=(25, 5))],
    ), final_task)
    out = validate_curriculum(candidate, final_task, catalog)
    assert out.agents[0].count == 7


def test_validate_drops_nonpositive_counts(final_task, catalog):
    candidate = CurriculumSpec(
        id="c",
        agents=(UnitSpec("Marine", 5, (5.0, 25.0)),
                UnitSpec("Ghost", 0, (5.0, 25.0))),
        enemies=(UnitSpec("Zealot", 2, (25.0, 5.0), frozenset({"Charge"})),
                 UnitSpec("Stalker", -3, (25.0, 5.0))),
        map=MapSpec(32, 32),
        objective=ObjectiveSpec(tick_limit=600),
        difficulty=0.0,
    )
    out = validate_curriculum(candidate, final_task, catalog)
    assert [u.unit_type for u in out.agents] == ["Marine"]
    assert [u.unit_type for u in out.enemies] == ["Zealot"]


def test_validate_raises_when_side_empties(final_task, catalog):
    no_agents = CurriculumSpec(
        id="c",
        agents=(UnitSpec("Dragoon", 5, (5.0, 25.0)),),
        enemies=(UnitSpec("Zealot", 2, (25.0, 5.0), frozenset({"Charge"})),),
        map=MapSpec(32, 32),
        objective=ObjectiveSpec(tick_limit=600),
        difficulty=0.0,
    )
    with pytest.raises(EmptyCurriculum):
        validate_curriculum(no_agents, final_task, catalog)
    no_enemies = CurriculumSpec(
        id="c",
        agents=(UnitSpec("Marine", 5, (5.0, 25.0)),),
        enemies=(UnitSpec("Zealot", 0, (25.0, 5.0)),),
        map=MapSpec(32, 32),
        objective=ObjectiveSpec(tick_limit=600),
        difficulty=0.0,
    )
    with pytest.raises(EmptyCurriculum):
        validate_curriculum(no_enemies, final_task, catalog)


def test_validate_candidate_matching_final_returns_final(final_task, catalog):
    candidate = CurriculumSpec(
        id="totally-different-name",
        agents=final_task.agents,
        enemies=final_task.enemies,
        map=final_task.map,
        objective=final_task.objective,
        difficulty=0.0,
    )
    out = validate_curriculum(candidate, final_task, catalog)
    assert out.id == final_task.id
    assert spec_equals(out, final_task)
    assert out.difficulty == final_task.difficulty


def test_validate_keeps_candidate_identity_otherwise(final_task, catalog):
    candidate = decode_candidate(candidate_json(
        [units("Marine", 5)],
        [units("Zealot", 2, ["Charge"], position=(25, 5))],
    ), final_task)
    out = validate_curriculum(candidate, final_task, catalog)
    assert out.id == "cand"
    assert out.difficulty == 6.0  # recomputed, not the candidate's junk value


def test_validate_random_candidates_dominated_and_idempotent(final_task, catalog):
    rng = random.Random(17)
    final = normalize_spec(final_task)
    agent_caps = {u.unit_type: u for u in final.agents}
    enemy_caps = {u.unit_type: u for u in final.enemies}
    all_types = list(agent_caps) + list(enemy_caps) + ["Dragoon", "TargetDummy"]
    all_techs = ["Stimpack", "Charge", "BlinkTech", "PsiStormTech",
                 "PersonalCloaking", "SiegeTech", "ExtendedThermalLance"]

    def rand_side(anchor):
        out = []
        for _ in range(rng.randrange(1, 6)):
            out.append(UnitSpec(
                unit_type=rng.choice(all_types),
                count=rng.randrange(-2, 41),
                position=anchor,
                technologies=frozenset(rng.sample(all_techs, rng.randrange(0, 3))),
            ))
        return tuple(out)

    checked = 0
    for _ in range(1000):
        candidate = CurriculumSpec(
            id="fuzz",
            agents=rand_side((5.0, 25.0)),
            enemies=rand_side((25.0, 5.0)),
            map=MapSpec(rng.choice([16, 32, 64]), 32),
            objective=ObjectiveSpec(tick_limit=rng.choice([100, 600, 1000])),
            difficulty=float(rng.randrange(0, 500)),
        )
        try:
            out = validate_curriculum(candidate, final_task, catalog)
        except EmptyCurriculum:
            continue
        checked += 1
        assert out.map == final.map
        for side, caps in ((out.agents, agent_caps), (out.enemies, enemy_caps)):
            for unit in side:
                ref = caps[unit.unit_type]  # KeyError would mean a leak
                assert 1 <= unit.count <= ref.count
                assert unit.technologies <= ref.technologies
        again = validate_curriculum(out, final_task, catalog)
        assert curriculum_to_dict(again) == curriculum_to_dict(out)
    assert checked > 200  # the fuzz must actually exercise the clamp


def test_validate_propagates_bad_positions(final_task, catalog):
    candidate = CurriculumSpec(
        id="c",
        agents=(UnitSpec("Marine", 5, (99.0, 99.0)),),
        enemies=(UnitSpec("Zealot", 2, (25.0, 5.0), frozenset({"Charge"})),),
        map=MapSpec(32, 32),
        objective=ObjectiveSpec(tick_limit=600),
        difficulty=0.0,
    )
    with pytest.raises(DomainError, match="outside the map"):
        validate_curriculum(candidate, final_task, catalog)


# --- reply decoding ------------------------------------------------------------------

def test_decode_candidate_full(final_task):
    raw = candidate_json(
        [units("Marine", 10, ["Stimpack"])],
        [units("Zealot", 5, ["Charge"], position=(25, 5))],
        tick_limit=450,
    )
    spec = decode_candidate(raw, final_task)
    assert spec.id == "cand"
    assert spec.agents[0] == UnitSpec("Marine", 10, (5.0, 25.0),
                                      frozenset({"Stimpack"}))
    assert spec.objective.tick_limit == 450
    assert spec.objective.episodes == 3


def test_decode_candidate_fills_positions_from_final(final_task):
    raw = {
        "agents": [{"unit_type": "Marine", "count": 4}],
        "enemies": [{"unit_type": "Zealot", "count": 2}],
    }
    spec = decode_candidate(raw, final_task)
    assert spec.agents[0].position == (5.0, 25.0)
    assert spec.enemies[0].position == (25.0, 5.0)
    assert spec.map == final_task.map
    assert spec.objective == final_task.objective


@pytest.mark.parametrize("raw", [
    "not an object",
    ["list"],
    {"agents": "nope", "enemies": []},
    {"agents": [{"unit_type": "Marine"}], "enemies": []},
    {"agents": [{"unit_type": "Marine", "count": "many"}], "enemies": []},
])
def test_decode_candidate_rejects_malformed(raw, final_task):
    with pytest.raises(DomainError):
        decode_candidate(raw, final_task)


# --- history rendering ------------------------------------------------------------------

def test_format_history_golden_line(final_task, catalog):
    start = simplify(final_task, catalog)
    line = format_history([record(0, start, Outcome.SUCCESS, (2, 3))], 1)
    assert line == ("#0 [Success] agents={Marine x5} "
                    "enemies={Zealot x2(Charge)} win_rate=67%")


def test_format_history_failed_line(final_task, catalog):
    start = simplify(final_task, catalog)
    line = format_history([record(3, start, Outcome.FAILED, (1, 3))], 5)
    assert line.startswith("#3 [Failed] ")
    assert line.endswith("win_rate=33%")


def test_format_history_window_keeps_newest(final_task, catalog):
    start = simplify(final_task, catalog)
    records = [record(i, start, Outcome.SUCCESS, (1, 1)) for i in range(10)]
    text = format_history(records, 8)
    lines = text.split("\n")
    assert len(lines) == 8
    assert lines[0].startswith("#2 ")
    assert lines[-1].startswith("#9 ")


def test_format_history_empty():
    assert format_history([], 8) == ""


def test_last_success_curriculum(final_task, catalog):
    start = simplify(final_task, catalog)
    harder = validate_curriculum(decode_candidate(candidate_json(
        [units("Marine", 10)],
        [units("Zealot", 5, ["Charge"], position=(25, 5))],
    ), final_task), final_task, catalog)
    history = (
        record(0, start, Outcome.SUCCESS, (1, 1)),
        record(1, harder, Outcome.SUCCESS, (2, 3)),
        record(2, harder, Outcome.FAILED, (0, 1)),
    )
    assert last_success_curriculum(history) is history[1].curriculum
    assert last_success_curriculum(history[:1]) is history[0].curriculum
    assert last_success_curriculum(()) is None
    assert last_success_curriculum((history[2],)) is None


# --- deterministic fallbacks ---------------------------------------------------------------

def test_fallback_increase_scales_and_introduces(final_task, catalog):
    start = simplify(final_task, catalog)
    grown = fallback_increase(start, final_task)
    assert grown.id == f"{start.id}+"
    assert grown.agents[0].count == 8   # ceil(5 * 1.5)
    by_type = {u.unit_type: u for u in grown.enemies}
    assert by_type["Zealot"].count == 3  # ceil(2 * 1.5)
    # first missing enemy type in alphabetical order, armed as the final grants
    assert by_type["Colossus"].count == 1
    assert by_type["Colossus"].technologies == frozenset({"ExtendedThermalLance"})
    assert set(by_type) == {"Zealot", "Colossus"}
    validated = validate_curriculum(grown, final_task, catalog)
    assert validated.difficulty == 3 * 2.0 + 6.0 + 2 * 2.0


def test_fallback_increase_without_missing_types(final_task, catalog):
    full_roster = validate_curriculum(decode_candidate(candidate_json(
        [units("Marine", 4)],
        [units(u.unit_type, 1, sorted(u.technologies), position=(25, 5))
         for u in final_task.enemies],
    ), final_task), final_task, catalog)
    grown = fallback_increase(full_roster, final_task)
    assert {u.unit_type for u in grown.enemies} == \
        {u.unit_type for u in final_task.enemies}
    assert all(u.count == 2 for u in grown.enemies)  # ceil(1.5)


def test_fallback_increase_ceiling_math(final_task, catalog):
    start = simplify(final_task, catalog)
    one = validate_curriculum(decode_candidate(candidate_json(
        [units("Marine", 1)],
        [units("Zealot", 1, ["Charge"], position=(25, 5))],
    ), final_task), final_task, catalog)
    grown = fallback_increase(one, final_task)
    assert grown.agents[0].count == 2  # ceil(1.5)
    del start


def test_fallback_adjust_removes_one_dominant_enemy(final_task, catalog):
    start = simplify(final_task, catalog)  # Zealot x2
    eased = fallback_adjust(start, final_task)
    assert eased.id == f"{start.id}-"
    assert eased.enemies[0].count == 1
    assert eased.agents == start.agents


def test_fallback_adjust_prefers_dominant_type(final_task, catalog):
    mixed = validate_curriculum(decode_candidate(candidate_json(
        [units("Marine", 6)],
        [units("Zealot", 1, ["Charge"], position=(25, 5)),
         units("Stalker", 3, ["BlinkTech"], position=(25, 5))],
    ), final_task), final_task, catalog)
    eased = fallback_adjust(mixed, final_task)
    by_type = {u.unit_type: u.count for u in eased.enemies}
    assert by_type == {"Zealot": 1, "Stalker": 2}


def test_fallback_adjust_bottoms_out(final_task, catalog):
    floor = validate_curriculum(decode_candidate(candidate_json(
        [units("Marine", 1)],
        [units("Zealot", 1, ["Charge"], position=(25, 5))],
    ), final_task), final_task, catalog)
    assert fallback_adjust(floor, final_task) is None


# --- the designer loop -----------------------------------------------------------------------

def make_designer(replies, catalog, **cfg):
    backend = ScriptedBackend({"Designer": replies})
    return Designer(backend=backend, config=EngineConfig(**cfg), catalog=catalog), backend


def test_designer_accepts_first_valid_reply(final_task, catalog):
    start = simplify(final_task, catalog)
    reply = fenced(candidate_json(
        [units("Marine", 10)],
        [units("Zealot", 5, ["Charge"], position=(25, 5))],
    ))
    designer, backend = make_designer([reply], catalog)
    out = designer.next_curriculum(start, report(2, 3), final_task, ())
    assert out.agents[0].count == 10
    assert out.enemies[0].count == 5
    assert backend.cursors["Designer"] == 1


def test_designer_retries_garbage_then_accepts(final_task, catalog):
    start = simplify(final_task, catalog)
    reply = fenced(candidate_json(
        [units("Marine", 8)],
        [units("Zealot", 4, ["Charge"], position=(25, 5))],
    ))
    designer, backend = make_designer(["not json at all", reply], catalog)
    out = designer.next_curriculum(start, report(1), final_task, ())
    assert out.agents[0].count == 8
    assert backend.cursors["Designer"] == 2


def test_designer_exhausts_retries_then_falls_back(final_task, catalog):
    start = simplify(final_task, catalog)
    designer, backend = make_designer(
        ["junk one", "junk two", "junk three", "never read"], catalog,
    )
    out = designer.next_curriculum(start, report(1), final_task, ())
    assert backend.cursors["Designer"] == 3  # exactly the retry budget
    assert out.agents[0].count == 8          # fallback growth from 5
    assert {u.unit_type for u in out.enemies} == {"Zealot", "Colossus"}


def test_designer_clamps_overreaching_reply(final_task, catalog):
    start = simplify(final_task, catalog)
    reply = fenced(candidate_json(
        [units("Marine", 99)],
        [units("Zealot", 99, ["Charge"], position=(25, 5))],
    ))
    designer, _ = make_designer([reply], catalog)
    out = designer.next_curriculum(start, report(1), final_task, ())
    assert out.agents[0].count == 20
    assert out.enemies[0].count == 15


def test_designer_adjust_requires_easier_task(final_task, catalog):
    current = validate_curriculum(decode_candidate(candidate_json(
        [units("Marine", 10)],
        [units("Zealot", 5, ["Charge"], position=(25, 5))],
    ), final_task), final_task, catalog)  # difficulty 12
    harder = fenced(candidate_json(
        [units("Marine", 10)],
        [units("Zealot", 10, ["Charge"], position=(25, 5))],
    ))  # difficulty 22: not an easing
    easier = fenced(candidate_json(
        [units("Marine", 10)],
        [units("Zealot", 3, ["Charge"], position=(25, 5))],
    ))  # difficulty 8
    start = simplify(final_task, catalog)
    history = (record(0, start, Outcome.SUCCESS, (1, 1)),)
    designer, backend = make_designer([harder, easier], catalog)
    out = designer.next_curriculum(current, report(1, 3), final_task, history)
    assert out.enemies[0].count == 3
    assert backend.cursors["Designer"] == 2


def test_designer_adjust_fallback_anchors_on_last_success(final_task, catalog):
    current = validate_curriculum(decode_candidate(candidate_json(
        [units("Marine", 10)],
        [units("Zealot", 5, ["Charge"], position=(25, 5))],
    ), final_task), final_task, catalog)
    anchor = validate_curriculum(decode_candidate(candidate_json(
        [units("Marine", 7)],
        [units("Zealot", 3, ["Charge"], position=(25, 5))],
    ), final_task), final_task, catalog)
    history = (
        record(0, simplify(final_task, catalog), Outcome.SUCCESS, (1, 1)),
        record(1, anchor, Outcome.SUCCESS, (2, 3)),
        record(2, current, Outcome.FAILED, (0, 1)),
    )
    designer, _ = make_designer(["junk", "junk", "junk"], catalog)
    out = designer.next_curriculum(current, report(1, 3), final_task, history)
    assert out.agents[0].count == 7      # anchor's squad kept
    assert out.enemies[0].count == 2     # anchor minus one dominant enemy


def test_designer_adjust_fallback_bottom_restarts_simple(final_task, catalog):
    floor = validate_curriculum(decode_candidate(candidate_json(
        [units("Marine", 2)],
        [units("Zealot", 1, ["Charge"], position=(25, 5))],
    ), final_task), final_task, catalog)
    history = (record(0, floor, Outcome.SUCCESS, (1, 1)),)
    designer, _ = make_designer(["junk", "junk", "junk"], catalog)
    out = designer.next_curriculum(floor, report(0), final_task, history)
    assert spec_equals(out, simplify(final_task, catalog))


def test_designer_adjust_without_history_anchors_on_simplify(final_task, catalog):
    current = validate_curriculum(decode_candidate(candidate_json(
        [units("Marine", 10)],
        [units("Zealot", 5, ["Charge"], position=(25, 5))],
    ), final_task), final_task, catalog)
    designer, _ = make_designer(["junk", "junk", "junk"], catalog)
    out = designer.next_curriculum(current, report(0), final_task, ())
    # anchor is simplify(final): Zealot x2, minus one -> Zealot x1
    assert out.enemies[0].count == 1
    assert out.agents[0].count == 5


def test_designer_retries_malformed_reply_errors(final_task, catalog):
    class Flaky:
        def __init__(self, replies):
            self.replies = list(replies)
            self.calls = 0

        def complete(self, request):
            self.calls += 1
            item = self.replies.pop(0)
            if isinstance(item, BackendError):
                raise item
            return item

    good = fenced(candidate_json(
        [units("Marine", 10)],
        [units("Zealot", 5, ["Charge"], position=(25, 5))],
    ))
    flaky = Flaky([BackendError("MalformedReply", "shape"), good])
    designer = Designer(backend=flaky, config=EngineConfig(), catalog=catalog)
    start = simplify(final_task, catalog)
    out = designer.next_curriculum(start, report(1), final_task, ())
    assert out.agents[0].count == 10
    assert flaky.calls == 2


@pytest.mark.parametrize("kind", ["Timeout", "HttpStatus", "FixtureExhausted", "Io"])
def test_designer_propagates_transport_errors(kind, final_task, catalog):
    class Dead:
        def __init__(self):
            self.calls = 0

        def complete(self, request):
            self.calls += 1
            raise BackendError(kind, "down")

    dead = Dead()
    designer = Designer(backend=dead, config=EngineConfig(), catalog=catalog)
    start = simplify(final_task, catalog)
    with pytest.raises(BackendError) as err:
        designer.next_curriculum(start, report(1), final_task, ())
    assert err.value.kind == kind
    assert dead.calls == 1


def test_designer_terminal_reply_returns_final(final_task, catalog):
    raw = {
        "id": "the-big-one",
        "agents": [
            {"unit_type": u.unit_type, "count": u.count,
             "position": list(u.position), "technologies": sorted(u.technologies)}
            for u in final_task.agents
        ],
        "enemies": [
            {"unit_type": u.unit_type, "count": u.count,
             "position": list(u.position), "technologies": sorted(u.technologies)}
            for u in final_task.enemies
        ],
        "map": {"width": 32, "height": 32, "terrain": "flat"},
        "objective": {"win_condition": "eliminate_all_enemies",
                      "tick_limit": 600, "episodes": 3},
    }
    designer, _ = make_designer([fenced(raw)], catalog)
    start = simplify(final_task, catalog)
    out = designer.next_curriculum(start, report(1), final_task, ())
    assert spec_equals(out, final_task)
    assert out.id == final_task.id


def test_designer_prompt_budget_trims_oldest_history(final_task, catalog):
    start = simplify(final_task, catalog)
    history = tuple(record(i, start, Outcome.SUCCESS, (2, 3)) for i in range(10))
    roomy, _ = make_designer([], catalog, prompt_budget=10 ** 6, history_window=8)
    body = roomy._render_body(INCREASE, start, report(2, 3), final_task, history)
    assert "#2 " in body and "#9 " in body
    assert "#0 " not in body  # outside the window of 8

    tight, _ = make_designer([], catalog, prompt_budget=1, history_window=8)
    body = tight._render_body(INCREASE, start, report(2, 3), final_task, history)
    assert "#9 " not in body
    assert "none" in body
