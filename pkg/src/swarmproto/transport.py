"""Transport-order auction: the canonical example swarm.

A machine that finished a production step requests pickup by a fleet of
logistics robots; available robots place bids, and the machine selects one.
The protocol has a request transition, a bid self-loop, and a selection:

    initial --request@machine/[requested]--> auction
    auction --bid@robot/[bid]-->             auction
    auction --select@machine/[selected]-->   doIt

This module provides both role machines, registers them for scenario files,
and builds the stock scenarios used by tests and the CLI, including the
deliberately broken subscription variants.
"""

from __future__ import annotations

from typing import Any

from .model import Subscriptions, SwarmProtocol, protocol_from_obj
from .runner import MachineDefinition, extract_shape
from .sim import register_machine

PROTOCOL_OBJ: dict[str, Any] = {
    "initial": "initial",
    "transitions": [
        {
            "source": "initial",
            "target": "auction",
            "label": {"cmd": "request", "logType": ["requested"], "role": "machine"},
        },
        {
            "source": "auction",
            "target": "auction",
            "label": {"cmd": "bid", "logType": ["bid"], "role": "robot"},
        },
        {
            "source": "auction",
            "target": "doIt",
            "label": {"cmd": "select", "logType": ["selected"], "role": "machine"},
        },
    ],
}

PROTOCOL: SwarmProtocol = protocol_from_obj(PROTOCOL_OBJ)

FULL_SUBS: Subscriptions = {
    "robot": frozenset({"requested", "bid", "selected"}),
    "machine": frozenset({"requested", "bid", "selected"}),
}

SESSION_ID = "4711"


def _build_robot() -> MachineDefinition:
    robot = MachineDefinition(role="robot", initial="Initial")
    robot.state("Auction").state("DoIt")
    robot.react(
        "Initial",
        ["requested"],
        "Auction",
        lambda p, recs: {**p, **recs[0].payload, "scores": []},
    )
    robot.command(
        "Auction",
        "bid",
        ["bid"],
        lambda p, delay: [{"robot": p["robot"], "delay": delay}],
    )
    robot.react(
        "Auction",
        ["bid"],
        "Auction",
        lambda p, recs: {**p, "scores": p["scores"] + [recs[0].payload]},
    )
    robot.react(
        "Auction",
        ["selected"],
        "DoIt",
        lambda p, recs: {"robot": p["robot"], "winner": recs[0].payload["winner"]},
    )
    return robot


def _select_winner(scores: list[dict]) -> str:
    # Lowest delay wins; ties broken by robot id for determinism.
    best = min(scores, key=lambda s: (s["delay"], s["robot"]))
    return best["robot"]


def _build_station() -> MachineDefinition:
    station = MachineDefinition(role="machine", initial="Initial")
    station.state("Auction").state("DoIt")
    station.command(
        "Initial",
        "request",
        ["requested"],
        lambda p, order_id, origin, destination: [
            {"id": order_id, "from": origin, "to": destination}
        ],
    )
    station.react(
        "Initial",
        ["requested"],
        "Auction",
        lambda p, recs: {**recs[0].payload, "scores": []},
    )
    station.react(
        "Auction",
        ["bid"],
        "Auction",
        lambda p, recs: {**p, "scores": p["scores"] + [recs[0].payload]},
    )
    station.command(
        "Auction",
        "select",
        ["selected"],
        lambda p: [{"winner": _select_winner(p["scores"])}],
    )
    station.react(
        "Auction",
        ["selected"],
        "DoIt",
        lambda p, recs: {"id": p["id"], "winner": recs[0].payload["winner"]},
    )
    return station


ROBOT = _build_robot()
STATION = _build_station()
ROBOT_SHAPE = extract_shape(ROBOT)
STATION_SHAPE = extract_shape(STATION)

register_machine("transport-order/robot", ROBOT, lambda agent_id: {"robot": agent_id})
register_machine("transport-order/machine", STATION, lambda agent_id: {})


def _base_scenario_obj() -> dict[str, Any]:
    return {
        "protocol": PROTOCOL_OBJ,
        "subs": {role: sorted(types) for role, types in FULL_SUBS.items()},
        "agents": [
            {
                "agentId": "station",
                "role": "machine",
                "machine": "transport-order/machine",
                "nodeId": "n1",
                "strategy": [
                    {"name": "once", "cmd": "request", "args": ["4711", "storage", "assembly"]},
                    {"name": "select-after", "k": 2},
                ],
            },
            {
                "agentId": "agv1",
                "role": "robot",
                "machine": "transport-order/robot",
                "nodeId": "n2",
                "strategy": {"name": "bid-once", "delay": 1},
            },
            {
                "agentId": "agv2",
                "role": "robot",
                "machine": "transport-order/robot",
                "nodeId": "n3",
                "strategy": {"name": "bid-once", "delay": 2},
            },
        ],
        "sessionId": SESSION_ID,
        "seed": 42,
        "maxSteps": 200,
        "partitionSchedule": [
            {"fromStep": 40, "toStep": 80, "groups": [["n1", "n2"], ["n3"]]}
        ],
    }


def ok_scenario_obj() -> dict[str, Any]:
    """Well-formed fixture: full subscriptions, both robots bid, the station
    selects after seeing two bids."""
    return _base_scenario_obj()


def branch_blind_scenario_obj() -> dict[str, Any]:
    """Robots do not subscribe to ``selected`` (bypassing the checker), and
    the station selects after the first bid: a slow robot can bid after the
    auction already closed without ever learning that it did."""
    obj = _base_scenario_obj()
    obj["subs"]["robot"] = ["bid", "requested"]
    obj["agents"][0]["strategy"][1] = {"name": "select-after", "k": 1}
    obj["partitionSchedule"] = []
    return obj


def actor_blind_scenario_obj() -> dict[str, Any]:
    """The machine role does not subscribe to its own ``requested`` emission:
    the station never observes that the auction opened and stalls in its
    initial state while the robots proceed."""
    obj = _base_scenario_obj()
    obj["subs"]["machine"] = ["bid", "selected"]
    obj["partitionSchedule"] = []
    return obj


def guard_clash_protocol_obj() -> dict[str, Any]:
    """Mutated protocol: the select transition reuses the ``bid`` event type,
    so both auction branches share a guard."""
    obj = {
        "initial": "initial",
        "transitions": [dict(t, label=dict(t["label"])) for t in PROTOCOL_OBJ["transitions"]],
    }
    obj["transitions"][2]["label"]["logType"] = ["bid"]
    return obj
