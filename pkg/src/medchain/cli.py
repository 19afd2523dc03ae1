"""Command-line front end: simulate, plan, zones, chain, place-axp, bench, serve.

Exit codes: 0 success, 1 validation error, 2 infeasible result, 64 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .geo import GeoPoint
from .planner import PlannerConfig, evaluate_policy, greedy_policy, mcts_policy, plan
from .scenario import ParseError, ValidationError, load
from .simkit import run, write_jsonl
from .smdp import HOLD, initial_state, is_terminal, step
from .world import radius_of_action
from .zones import (
    NoFeasibleChain,
    chain_search,
    opportunity_zone,
    plan_geojson,
    zone_geojson,
    zone_windows,
    windows_geojson,
)

EX_OK = 0
EX_VALIDATION = 1
EX_INFEASIBLE = 2
EX_USAGE = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EX_USAGE)


def _parse_point(text: str) -> GeoPoint:
    lat, lon = (float(x) for x in text.split(","))
    return GeoPoint(lat, lon)


def _policy(name: str, seed: int, iterations: int):
    if name == "greedy":
        return greedy_policy
    return mcts_policy(PlannerConfig(iterations=iterations, seed=seed))


def build_parser() -> _Parser:
    p = _Parser(prog="medchain", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a scenario under a policy")
    sim.add_argument("scenario")
    sim.add_argument("--policy", choices=("mcts", "greedy"), default="mcts")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--iterations", type=int, default=300)
    sim.add_argument("--out", default=None, help="write the event log (JSON Lines)")

    pl = sub.add_parser("plan", help="one dispatch recommendation at a point in time")
    pl.add_argument("scenario")
    pl.add_argument("--at", type=float, default=0.0, help="advance the clock to T seconds")
    pl.add_argument("--seed", type=int, default=0)
    pl.add_argument("--iterations", type=int, default=1000)

    zn = sub.add_parser("zones", help="transfer opportunity zone for an aircraft pair")
    zn.add_argument("scenario")
    zn.add_argument("--pair", nargs=2, metavar=("A", "B"), required=True)
    zn.add_argument("--horizon", type=float, default=43_200.0)
    zn.add_argument("--dt", type=float, default=300.0)
    zn.add_argument("--out", default=None, help="write zone + window GeoJSON")

    ch = sub.add_parser("chain", help="evacuation chain between two points")
    ch.add_argument("scenario")
    ch.add_argument("--from", dest="origin", type=_parse_point, default=None,
                    metavar="LAT,LON")
    ch.add_argument("--to", dest="dest", type=_parse_point, default=None,
                    metavar="LAT,LON")
    ch.add_argument("--t0", type=float, default=0.0)
    ch.add_argument("--horizon", type=float, default=86_400.0)
    ch.add_argument("--dt", type=float, default=300.0)
    ch.add_argument("--out", default=None, help="write plan GeoJSON")

    ax = sub.add_parser("place-axp", help="grid-search a dedicated exchange ship station")
    ax.add_argument("scenario")
    ax.add_argument("--grid", type=int, default=3, help="candidate grid size per axis")
    ax.add_argument("--horizon", type=float, default=43_200.0)
    ax.add_argument("--dt", type=float, default=10_800.0)

    be = sub.add_parser("bench", help="compare planner policies over repeated episodes")
    be.add_argument("scenario")
    be.add_argument("--episodes", type=int, default=10)
    be.add_argument("--seed", type=int, default=0)
    be.add_argument("--iterations", type=int, default=300)

    sv = sub.add_parser("serve", help="start the operations service")
    sv.add_argument("scenario", nargs="?", default="mpw2023")
    sv.add_argument("--port", type=int, default=None)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EX_USAGE

    try:
        return _dispatch(args)
    except (ParseError, ValidationError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EX_VALIDATION
    except NoFeasibleChain as e:
        print(f"infeasible: {e}", file=sys.stderr)
        return EX_INFEASIBLE


def _dispatch(args) -> int:
    if args.command == "serve":
        from .opsvc import serve
        serve(args.scenario, port=args.port)
        return EX_OK

    sc = load(args.scenario)

    if args.command == "simulate":
        log, metrics = run(sc, _policy(args.policy, args.seed, args.iterations), args.seed)
        text = write_jsonl(log)
        if args.out:
            with open(args.out, "w") as f:
                f.write(text)
        else:
            sys.stdout.write(text)
        print(json.dumps({
            "response_time": metrics.response_time,
            "time_to_facility": metrics.time_to_facility,
            "axp_dwell": [list(x) for x in metrics.axp_dwell],
            "utilization": metrics.utilization,
        }, indent=2), file=sys.stderr)
        return EX_OK

    if args.command == "plan":
        state, _ = initial_state(sc)
        while state.clock < args.at and not is_terminal(state):
            state = step(state, HOLD).next_state
        if is_terminal(state):
            print("infeasible: nothing to plan (terminal state)", file=sys.stderr)
            return EX_INFEASIBLE
        rec = plan(state, PlannerConfig(iterations=args.iterations, seed=args.seed))
        print(json.dumps({
            "action": _action_doc(rec.action),
            "estimated_return": rec.estimated_return,
            "visit_counts": [[_action_doc(a), c] for a, c in rec.visit_counts],
            "predicted_timeline": [list(x) for x in rec.predicted_timeline],
        }, indent=2))
        return EX_OK

    if args.command == "zones":
        a = sc.aircraft_by_id(args.pair[0])
        b = sc.aircraft_by_id(args.pair[1])
        z = opportunity_zone(a.home_base, radius_of_action(a.max_range),
                             b.home_base, radius_of_action(b.max_range))
        windows, blackouts = zone_windows(z, list(sc.watercraft),
                                          (0.0, args.horizon), args.dt)
        doc = zone_geojson(z)
        doc["features"].extend(windows_geojson(windows, blackouts)["features"])
        out = json.dumps(doc, indent=2)
        if args.out:
            with open(args.out, "w") as f:
                f.write(out)
        else:
            print(out)
        return EX_OK

    if args.command == "chain":
        origin = args.origin or sc.requests[0].location
        dest = args.dest or sc.facility(sc.requests[0].destination).location
        result = chain_search(origin, dest, list(sc.watercraft), list(sc.aircraft),
                              t0=args.t0, horizon=args.horizon, dt=args.dt,
                              refuel_time=sc.config.refuel_time_s,
                              deck_clear=sc.config.deck_clear_s)
        doc = plan_geojson(result)
        doc["properties"] = {"total_time_s": result.total_time,
                             "total_distance_m": result.total_distance,
                             "exchanges": result.exchange_count()}
        out = json.dumps(doc, indent=2)
        if args.out:
            with open(args.out, "w") as f:
                f.write(out)
        else:
            print(out)
        return EX_OK

    if args.command == "place-axp":
        from .zones import place_dedicated_axp
        lats = [w.route.waypoints[0].lat for w in sc.watercraft] or \
            [a.home_base.lat for a in sc.aircraft]
        lons = [w.route.waypoints[0].lon for w in sc.watercraft] or \
            [a.home_base.lon for a in sc.aircraft]
        lat_lo, lat_hi = min(lats) - 0.5, max(lats) + 0.5
        lon_lo, lon_hi = min(lons) - 0.5, max(lons) + 0.5
        n = max(2, args.grid)
        candidates = [GeoPoint(lat_lo + (lat_hi - lat_lo) * i / (n - 1),
                               lon_lo + (lon_hi - lon_lo) * j / (n - 1))
                      for i in range(n) for j in range(n)]
        demand = [(r.location, sc.facility(r.destination).location) for r in sc.requests]
        if not demand:
            print("error: scenario has no requests to cover", file=sys.stderr)
            return EX_VALIDATION
        best, score = place_dedicated_axp(candidates, demand, list(sc.watercraft),
                                          list(sc.aircraft), args.horizon, args.dt)
        print(json.dumps({"station": {"lat": best.lat, "lon": best.lon},
                          "coverage_score": score}))
        return EX_OK

    if args.command == "bench":
        rows = {}
        for name in ("mcts", "greedy"):
            summary = evaluate_policy(sc, _policy(name, args.seed, args.iterations),
                                      episodes=args.episodes, seed=args.seed)
            rows[name] = {
                "response_time": summary.response_time,
                "time_to_facility": summary.time_to_facility,
                "axp_dwell": summary.axp_dwell,
                "utilization": summary.utilization,
            }
        print(json.dumps(rows, indent=2))
        return EX_OK

    raise AssertionError(f"unhandled command {args.command}")


def _action_doc(a) -> dict:
    return {
        "kind": a.kind.value,
        "aircraft_id": a.aircraft_id,
        "request_id": a.request_id,
        "axp_watercraft_id": a.axp_watercraft_id,
        "receiving_aircraft_id": a.receiving_aircraft_id,
        "launch_time": a.launch_time,
    }


if __name__ == "__main__":
    sys.exit(main())
