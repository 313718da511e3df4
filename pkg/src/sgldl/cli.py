"""Thin command-line client of the lab service.

Without --server the commands run against an embedded in-process instance of
the service, so no daemon is needed for local work; with --server they hit a
remote `sgldl serve` over HTTP. Results are printed as JSON on stdout; any
failure prints a machine-readable error line on stderr and exits non-zero.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path


def _client(server: str | None):
    if server:
        import httpx

        return httpx.Client(base_url=server, timeout=None)
    from fastapi.testclient import TestClient

    from .service.app import create_app

    return TestClient(create_app())


def _load_config_document(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        _fail(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        _fail(f"config file is not valid JSON: {exc}")


def _fail(message):
    print(json.dumps({"error": message}), file=sys.stderr)
    raise SystemExit(1)


def _post(client, endpoint: str, payload: dict) -> dict:
    response = client.post(endpoint, json=payload)
    if response.status_code != 200:
        try:
            detail = response.json().get("detail", response.text)
        except ValueError:
            detail = response.text
        _fail(detail)
    return response.json()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sgldl", description="incremental label distribution learning lab"
    )
    parser.add_argument("--server", help="base URL of a running lab service")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="generate a dataset from a config")
    p_gen.add_argument("--config", required=True)
    p_gen.add_argument("--out", help="output directory (default: the config's out_dir)")

    p_train = sub.add_parser("train", help="run every (method, seed) cell")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--dataset", required=True)
    p_train.add_argument("--out", help="output directory (default: the config's out_dir)")
    p_train.add_argument("--workers", type=int, default=1)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint at a task restriction")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--dataset", required=True)
    p_eval.add_argument("--task", type=int, required=True)

    p_export = sub.add_parser("export-scm", help="export a checkpoint's correlation matrix")
    p_export.add_argument("--checkpoint", required=True)
    p_export.add_argument("--out", help="CSV output path; omitted prints the CSV")

    p_serve = sub.add_parser("serve", help="run the lab service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "serve":
        import uvicorn

        uvicorn.run("sgldl.service.app:app", host=args.host, port=args.port)
        return 0

    client = _client(args.server)
    try:
        if args.command == "gen":
            doc = _post(
                client,
                "/api/gen",
                {"config": _load_config_document(args.config), "out": args.out},
            )
            print(json.dumps(doc))
        elif args.command == "train":
            doc = _post(
                client,
                "/api/train",
                {
                    "config": _load_config_document(args.config),
                    "dataset": args.dataset,
                    "out": args.out,
                    "workers": args.workers,
                },
            )
            print(json.dumps(doc))
            if doc.get("failures"):
                print(json.dumps({"error": "cells failed", "failures": doc["failures"]}), file=sys.stderr)
                return 1
        elif args.command == "eval":
            doc = _post(
                client,
                "/api/eval",
                {"checkpoint": args.checkpoint, "dataset": args.dataset, "task": args.task},
            )
            print(json.dumps(doc))
        elif args.command == "export-scm":
            doc = _post(
                client,
                "/api/export-scm",
                {"checkpoint": args.checkpoint, "out": args.out},
            )
            if doc.get("csv") is not None:
                print(doc["csv"], end="")
            else:
                print(json.dumps({k: doc[k] for k in ("labels", "block_boundary", "rows", "path")}))
    finally:
        client.close()
    return 0


def run() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    raise SystemExit(main())
