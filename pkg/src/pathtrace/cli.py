"""Thin-client CLI: every subcommand talks to the HTTP service.

By default the app is mounted in-process (httpx ASGI transport), so no
daemon is needed and state still persists through the service's data
directory. Point --server at a running instance to go over the network
instead.

Exit codes: 0 success, 1 batch-level failure, 2 bad arguments.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys
from pathlib import Path

import httpx


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _merged(args: argparse.Namespace, config: dict, key: str, default):
    """Flag value if given, else config-file value, else default."""
    value = getattr(args, key.replace("-", "_"), None)
    if value is not None:
        return value
    if key in config:
        return config[key]
    return default


def _request(args: argparse.Namespace, method: str, url: str,
             json_body: dict | None = None, params: dict | None = None) -> httpx.Response:
    if getattr(args, "server", None):
        with httpx.Client(base_url=args.server, timeout=600.0) as client:
            return client.request(method, url, json=json_body, params=params)

    from .service.app import create_app

    async def go() -> httpx.Response:
        transport = httpx.ASGITransport(app=create_app(args.data_dir))
        async with httpx.AsyncClient(transport=transport,
                                     base_url="http://pathtrace.internal",
                                     timeout=600.0) as client:
            return await client.request(method, url, json=json_body, params=params)

    return asyncio.run(go())


def _finish(resp: httpx.Response) -> int:
    try:
        payload = resp.json()
    except ValueError:
        payload = {"detail": resp.text}
    if resp.status_code >= 400:
        print(f"error ({resp.status_code}): {payload.get('detail', payload)}",
              file=sys.stderr)
        return 1
    print(json.dumps(payload, indent=2))
    return 0


def cmd_convert(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    body = {
        "manifest": _merged(args, config, "manifest", None),
        "out_dir": _merged(args, config, "out", None),
        "epsilon": _merged(args, config, "epsilon", 0.05),
        "representation": _merged(args, config, "rep", "rdp"),
        "min_visibility": _merged(args, config, "min-visibility", 0.9),
        "shard_size": _merged(args, config, "shard-size", 10_000),
    }
    if not body["manifest"] or not body["out_dir"]:
        print("error: --manifest and --out are required", file=sys.stderr)
        return 2
    return _finish(_request(args, "POST", "/pipeline/convert", body))


def cmd_mix(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    spec = _load_config(_merged(args, config, "spec", None))
    body = {
        "sources": spec.get("sources", {}),
        "n": _merged(args, config, "n", spec.get("n")),
        "seed": _merged(args, config, "seed", spec.get("seed", 0)),
        "out": _merged(args, config, "out", spec.get("out")),
    }
    if not body["sources"] or body["n"] is None or not body["out"]:
        print("error: spec must define sources, and --n/--out must be set",
              file=sys.stderr)
        return 2
    return _finish(_request(args, "POST", "/pipeline/mix", body))


def cmd_stats(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    in_dir = args.in_dir if args.in_dir is not None else config.get("in")
    if not in_dir:
        print("error: --in is required", file=sys.stderr)
        return 2
    return _finish(_request(args, "POST", "/pipeline/stats", {"in_dir": in_dir}))


def cmd_filter(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    body = {
        "manifest": _merged(args, config, "manifest", None),
        "threshold": _merged(args, config, "threshold", None),
        "min_visibility": _merged(args, config, "min-visibility", 0.9),
    }
    if not body["manifest"] or body["threshold"] is None:
        print("error: --manifest and --threshold are required", file=sys.stderr)
        return 2
    return _finish(_request(args, "POST", "/pipeline/filter", body))


def cmd_render(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    style_file = _merged(args, config, "style", None)
    body = {
        "answer_file": _merged(args, config, "answer", None),
        "image": _merged(args, config, "image", None),
        "mode": _merged(args, config, "mode", "overlay"),
        "style": _load_config(style_file) if style_file else None,
        "out": _merged(args, config, "out", None),
        "width": _merged(args, config, "width", 256),
        "height": _merged(args, config, "height", 256),
    }
    if not body["answer_file"] or not body["out"]:
        print("error: --answer and --out are required", file=sys.stderr)
        return 2
    return _finish(_request(args, "POST", "/render", body))


def cmd_simulate(args: argparse.Namespace) -> int:
    body = {"policy": args.policy, "episodes": args.episodes,
            "noise": args.noise, "seed": args.seed}
    resp = _request(args, "POST", "/simulate", body)
    if resp.status_code >= 400:
        return _finish(resp)
    payload = resp.json()
    if args.report:
        Path(args.report).parent.mkdir(parents=True, exist_ok=True)
        Path(args.report).write_text(json.dumps(payload, indent=2),
                                     encoding="utf-8")
    print(json.dumps({k: payload[k] for k in
                      ("mean_score", "completion_rate", "episodes")}, indent=2))
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(args.data_dir), host=args.host, port=args.port)
    return 0


def cmd_session_create(args: argparse.Namespace) -> int:
    body = _load_config(args.items)
    if args.seed is not None:
        body["seed"] = args.seed
    if args.session_id:
        body["session_id"] = args.session_id
    return _finish(_request(args, "POST", "/sessions", body))


def cmd_session_results(args: argparse.Namespace) -> int:
    params = {"tag": args.tag} if args.tag else None
    return _finish(_request(args, "GET", f"/sessions/{args.session}/results",
                            params=params))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pathtrace",
                                     description=__doc__.split("\n")[0])
    parser.add_argument("--server", default=None,
                        help="service URL (default: in-process)")
    parser.add_argument("--data-dir", default=None,
                        help="data directory for the in-process service")
    # the same flags are valid after the subcommand; SUPPRESS keeps a
    # subcommand-less occurrence from clobbering the top-level value
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--server", default=argparse.SUPPRESS)
    common.add_argument("--data-dir", default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=lambda **kw: argparse.ArgumentParser(
                                    parents=[common], **kw))

    p = sub.add_parser("convert", help="manifest -> VQA shards")
    p.add_argument("--manifest")
    p.add_argument("--out")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--rep", choices=["rdp", "fixed20"])
    p.add_argument("--min-visibility", type=float)
    p.add_argument("--shard-size", type=int)
    p.add_argument("--config", help="JSON config with the same keys as the flags")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("mix", help="equal-weight sample mixing")
    p.add_argument("--spec", help="JSON mix spec with sources/seed")
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--config")
    p.set_defaults(func=cmd_mix)

    p = sub.add_parser("stats", help="report over converted shards")
    p.add_argument("--in", dest="in_dir")
    p.add_argument("--config")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("filter", help="alignment-quality manifest filtering")
    p.add_argument("--manifest")
    p.add_argument("--threshold", type=float)
    p.add_argument("--min-visibility", type=float)
    p.add_argument("--config")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("render", help="draw a parsed answer over an image")
    p.add_argument("--image")
    p.add_argument("--answer", help="file containing the answer text")
    p.add_argument("--style", help="JSON file with overlay style fields")
    p.add_argument("--mode", choices=["overlay", "concat"])
    p.add_argument("--out")
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--config")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("simulate", help="run the hierarchical toy harness")
    p.add_argument("--policy", choices=["follower", "random"], default="follower")
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", help="write per-episode scores as JSON here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("session-create", help="create a ranking session")
    p.add_argument("--items", required=True, help="JSON file with items/raters/seed")
    p.add_argument("--seed", type=int)
    p.add_argument("--session-id")
    p.set_defaults(func=cmd_session_create)

    p = sub.add_parser("session-results", help="aggregate ranks for a session")
    p.add_argument("--session", required=True)
    p.add_argument("--tag")
    p.set_defaults(func=cmd_session_results)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except httpx.HTTPError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
