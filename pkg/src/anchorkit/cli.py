"""Command-line front end.

The CLI is a thin HTTP client of the anchorkit service: it assembles a
request from a config record and/or flags, posts it (to an in-process copy
of the app by default, or to ``--server URL``), and writes the returned
table, summary record, and optional SVG plot.

Exit codes: 0 ok, 2 config problem, 3 numeric failure, 4 invariant
violation (raised by a run, or any bounds_ok entry reported false).
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys

import httpx

from .configfile import load_config
from .errors import ConfigParseError
from .tabular import format_csv, render_loglog_svg

_KIND_EXIT = {"config": 2, "numeric": 3, "invariant": 4}

COMMANDS = ("simulate", "solve", "rates", "worstcase", "pgextra", "limitcheck")


class CliFailure(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _post(endpoint: str, payload: dict, server: str | None) -> dict:
    async def go():
        if server:
            transport = None
            base = server.rstrip("/")
        else:
            from .service.app import app
            transport = httpx.ASGITransport(app=app)
            base = "http://anchorkit.local"
        async with httpx.AsyncClient(transport=transport, base_url=base,
                                     timeout=None) as client:
            return await client.post(endpoint, json=payload)

    try:
        response = asyncio.run(go())
    except httpx.HTTPError as exc:
        raise CliFailure(f"request failed: {exc}", 3)
    if response.status_code == 422:
        raise CliFailure(f"invalid request: {response.text}", 2)
    if response.status_code != 200:
        try:
            body = response.json()
        except ValueError:
            raise CliFailure(f"server error {response.status_code}: {response.text}", 3)
        code = _KIND_EXIT.get(body.get("kind"), 3)
        raise CliFailure(body.get("error", response.text), code)
    return response.json()


def _add_operator_flags(sub):
    sub.add_argument("--op", help="operator kind: rotation, identity, affine, l1, zero")
    sub.add_argument("--op-scale", type=float, help="rotation scale")
    sub.add_argument("--op-mu", type=float, help="scaled-identity modulus")
    sub.add_argument("--op-dim", type=int, help="operator dimension")
    sub.add_argument("--op-weight", type=float, help="l1 weight")
    sub.add_argument("--op-matrix", type=json.loads, help="affine matrix as JSON")
    sub.add_argument("--op-shift", type=json.loads, help="affine shift as JSON")


def _add_schedule_flags(sub):
    sub.add_argument("--schedule",
                     help="anchor family: power_law, strongly_monotone, adaptive, none")
    sub.add_argument("--gamma", type=float)
    sub.add_argument("--p", type=float)
    sub.add_argument("--schedule-mu", type=float)
    sub.add_argument("--clamp-delta", type=float)


def _add_io_flags(sub):
    sub.add_argument("--config", help="config record to start from")
    sub.add_argument("-o", "--out", help="CSV output path (default <command>.csv)")
    sub.add_argument("--summary", help="also write the summary record here")
    sub.add_argument("--svg", help="write a log-log residual plot here")
    sub.add_argument("--server", help="base URL of a running service "
                                      "(default: run in process)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="anchorkit",
        description="Anchored fixed-point flows, solvers, and diagnostics")
    subs = parser.add_subparsers(dest="command", required=True)

    sim = subs.add_parser("simulate", help="integrate an anchored flow")
    _add_operator_flags(sim)
    _add_schedule_flags(sim)
    sim.add_argument("--x0", type=json.loads)
    sim.add_argument("--t-max", type=float)
    sim.add_argument("--steps", type=int)
    sim.add_argument("--yosida-lambda", type=float)
    sim.add_argument("--x-star", type=json.loads)
    _add_io_flags(sim)

    for name in ("solve", "rates"):
        sol = subs.add_parser(name, help="run a discrete anchored method")
        sol.add_argument("--method",
                         help="appm, generalized, osppm, adaptive, halpern")
        _add_operator_flags(sol)
        sol.add_argument("--x0", type=json.loads)
        sol.add_argument("--iters", type=int)
        sol.add_argument("--h", type=float)
        sol.add_argument("--record-every", type=int)
        sol.add_argument("--gamma", type=float)
        sol.add_argument("--p", type=float)
        sol.add_argument("--mu", type=float)
        sol.add_argument("--x-star", type=json.loads)
        sol.add_argument("--window", type=float, nargs=2)
        sol.add_argument("--include-coords", action="store_true", default=None)
        _add_io_flags(sol)

    wc = subs.add_parser("worstcase", help="scan scaled residuals of the closed-form flow")
    wc.add_argument("--gamma", type=float)
    wc.add_argument("--p", type=float)
    wc.add_argument("--r-kind", help="t2, t2gamma, or t2p")
    wc.add_argument("--op-scale", type=float)
    wc.add_argument("--x0", type=json.loads)
    wc.add_argument("--t-min", type=float)
    wc.add_argument("--t-max", type=float)
    wc.add_argument("--n-points", type=int)
    wc.add_argument("--spacing")
    wc.add_argument("--floor", type=float)
    wc.add_argument("--quad-nodes", type=int)
    _add_io_flags(wc)

    pg = subs.add_parser("pgextra", help="decentralized sensing runs")
    pg.add_argument("--seed", type=int)
    pg.add_argument("--preset", help="desk or paper")
    pg.add_argument("--d", type=int)
    pg.add_argument("--n-agents", type=int)
    pg.add_argument("--m-i", type=int)
    pg.add_argument("--noise-sigma", type=float)
    pg.add_argument("--sparsity", type=float)
    pg.add_argument("--reg-weight", type=float)
    pg.add_argument("--step", type=float)
    pg.add_argument("--topology")
    pg.add_argument("--er-prob", type=float)
    pg.add_argument("--graph-seed", type=int)
    pg.add_argument("--anchor", help="power_law, adaptive, or none")
    pg.add_argument("--anchor-gamma", type=float)
    pg.add_argument("--anchor-p", type=float)
    pg.add_argument("--iters", type=int)
    _add_io_flags(pg)

    lc = subs.add_parser("limitcheck", help="step-refinement deviation table")
    _add_operator_flags(lc)
    lc.add_argument("--x0", type=json.loads)
    lc.add_argument("--t-horizon", type=float)
    lc.add_argument("--h-list", type=float, nargs="+")
    lc.add_argument("--yosida-lambda", type=float)
    _add_io_flags(lc)

    run = subs.add_parser("run", help="run whichever command a config names")
    run.add_argument("--config", required=True)
    run.add_argument("-o", "--out")
    run.add_argument("--summary")
    run.add_argument("--svg")
    run.add_argument("--server")

    srv = subs.add_parser("serve", help="start the HTTP service")
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=8000)
    return parser


def _set(payload: dict, key: str, value):
    if value is not None:
        payload[key] = value


def _nested(payload: dict, section: str, key: str, value):
    if value is not None:
        payload.setdefault(section, {})[key] = value


def _operator_payload(payload: dict, args):
    _nested(payload, "operator", "kind", getattr(args, "op", None))
    _nested(payload, "operator", "scale", getattr(args, "op_scale", None))
    _nested(payload, "operator", "mu", getattr(args, "op_mu", None))
    _nested(payload, "operator", "dim", getattr(args, "op_dim", None))
    _nested(payload, "operator", "weight", getattr(args, "op_weight", None))
    _nested(payload, "operator", "matrix", getattr(args, "op_matrix", None))
    _nested(payload, "operator", "shift", getattr(args, "op_shift", None))


def _schedule_payload(payload: dict, args):
    _nested(payload, "schedule", "family", getattr(args, "schedule", None))
    _nested(payload, "schedule", "gamma", getattr(args, "gamma", None))
    _nested(payload, "schedule", "p", getattr(args, "p", None))
    _nested(payload, "schedule", "mu", getattr(args, "schedule_mu", None))
    _nested(payload, "schedule", "clamp_delta", getattr(args, "clamp_delta", None))


def _config_payload(command: str, config: dict) -> dict:
    payload = dict(config)
    payload.pop("command", None)
    for io_key in ("out_csv", "out_summary", "out_svg"):
        payload.pop(io_key, None)
    if "op" in payload:
        payload["operator"] = payload.pop("op")
    if command == "simulate":
        # top-level gamma/p in a simulate record describe the anchor schedule,
        # mirroring the --gamma/--p flags
        for key in ("family", "gamma", "p"):
            if key in payload:
                payload.setdefault("schedule", {})[key] = payload.pop(key)
    return payload


def build_payload(command: str, args, config: dict) -> dict:
    payload = _config_payload(command, config)
    if command == "simulate":
        _operator_payload(payload, args)
        _schedule_payload(payload, args)
        for key in ("x0", "t_max", "steps", "yosida_lambda", "x_star"):
            _set(payload, key, getattr(args, key, None))
        if "operator" not in payload:
            raise ConfigParseError("simulate needs an operator (--op or op.kind)")
    elif command in ("solve", "rates"):
        _operator_payload(payload, args)
        for key in ("method", "x0", "iters", "h", "record_every", "gamma",
                    "p", "mu", "x_star", "window", "include_coords"):
            _set(payload, key, getattr(args, key, None))
        if "operator" not in payload:
            raise ConfigParseError(f"{command} needs an operator (--op or op.kind)")
        if "method" not in payload:
            raise ConfigParseError(f"{command} needs a method")
    elif command == "worstcase":
        for key in ("gamma", "p", "r_kind", "x0", "t_min", "t_max",
                    "n_points", "spacing", "floor", "quad_nodes"):
            _set(payload, key, getattr(args, key, None))
        _set(payload, "scale", getattr(args, "op_scale", None))
        for required in ("gamma", "p", "r_kind"):
            if required not in payload:
                raise ConfigParseError(f"worstcase needs {required}")
    elif command == "pgextra":
        for key in ("seed", "preset", "d", "n_agents", "m_i", "noise_sigma",
                    "sparsity", "reg_weight", "step", "topology", "er_prob",
                    "graph_seed", "iters"):
            _set(payload, key, getattr(args, key, None))
        anchor_family = getattr(args, "anchor", None)
        if anchor_family is not None:
            if anchor_family == "none":
                payload["anchor"] = None
            else:
                payload.setdefault("anchor", {})
                if not isinstance(payload["anchor"], dict):
                    payload["anchor"] = {}
                payload["anchor"]["family"] = anchor_family
        if getattr(args, "anchor_gamma", None) is not None:
            payload.setdefault("anchor", {})["gamma"] = args.anchor_gamma
        if getattr(args, "anchor_p", None) is not None:
            payload.setdefault("anchor", {})["p"] = args.anchor_p
    elif command == "limitcheck":
        _operator_payload(payload, args)
        for key in ("x0", "t_horizon", "h_list", "yosida_lambda"):
            _set(payload, key, getattr(args, key, None))
        if "operator" not in payload:
            raise ConfigParseError("limitcheck needs an operator (--op or op.kind)")
    return payload


def _write_outputs(command: str, body: dict, args, config: dict) -> int:
    out_path = getattr(args, "out", None) or config.get("out_csv") \
        or f"{command}.csv"
    summary_path = getattr(args, "summary", None) or config.get("out_summary")
    svg_path = getattr(args, "svg", None) or config.get("out_svg")

    csv_text = format_csv(body["columns"], body["rows"])
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(csv_text)
    summary_text = json.dumps(body["summary"], indent=2, sort_keys=True)
    if summary_path:
        with open(summary_path, "w", encoding="utf-8") as fh:
            fh.write(summary_text + "\n")
    print(summary_text)

    if svg_path:
        columns = body["columns"]
        rows = body["rows"]
        x_col = 0
        try:
            y_col = columns.index("resid_sq")
        except ValueError:
            y_col = 1
        xs = [row[x_col] for row in rows]
        ys = [row[y_col] for row in rows]
        svg = render_loglog_svg([(columns[y_col], xs, ys)],
                                x_label=columns[x_col], y_label=columns[y_col])
        with open(svg_path, "w", encoding="utf-8") as fh:
            fh.write(svg)

    failed = [name for name, ok in body["summary"].get("bounds_ok", []) if not ok]
    if failed:
        print(f"invariant checks failed: {', '.join(failed)}", file=sys.stderr)
        return 4
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    command = args.command

    if command == "serve":
        import uvicorn

        from .service.app import app
        uvicorn.run(app, host=args.host, port=args.port)
        return 0

    try:
        config = load_config(args.config) if getattr(args, "config", None) else {}
        if command == "run":
            command = config.get("command")
            if command not in COMMANDS:
                raise ConfigParseError(
                    f"config must name a command from {COMMANDS}, got {command!r}",
                    field="command")
        payload = build_payload(command, args, config)
        body = _post(f"/{command}", payload, getattr(args, "server", None))
        return _write_outputs(command, body, args, config)
    except ConfigParseError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except CliFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
