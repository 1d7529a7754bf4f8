"""Command-line client for the service.

Subcommands train, eval, sweep, export-viz, and selftest each take
--config <file> plus --out <dir>. By default requests run against the
service app in process; set DRGL_SERVER=http://host:port to talk to a
remote instance instead.

Exit codes: 0 success, 2 configuration error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import asyncio
import base64
import json
import os
import sys
from pathlib import Path

import httpx

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3


def _call(route: str, payload: dict) -> httpx.Response:
    """POST to a remote server if DRGL_SERVER is set, else to the app in process."""
    server = os.environ.get("DRGL_SERVER")
    if server:
        with httpx.Client(base_url=server, timeout=None) as client:
            return client.post(route, json=payload)

    from .service import app

    async def go():
        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(transport=transport, timeout=None,
                                     base_url="http://drgl.local") as client:
            return await client.post(route, json=payload)

    return asyncio.run(go())


def _load_config(path: str) -> dict:
    p = Path(path)
    if not p.is_file():
        print(f"config file not found: {path}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        print(f"config is not valid JSON: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _post(route: str, payload: dict) -> dict:
    resp = _call(route, payload)
    if resp.status_code in (400, 404, 422):
        print(f"config error: {resp.text}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)
    if resp.status_code >= 500:
        detail = {}
        try:
            detail = resp.json().get("detail", {})
        except ValueError:
            pass
        if isinstance(detail, dict) and detail.get("code") == "solver_failure":
            print(f"solver failure: {detail.get('message')}", file=sys.stderr)
            raise SystemExit(EXIT_SOLVER)
        print(f"server error: {resp.text}", file=sys.stderr)
        raise SystemExit(EXIT_SOLVER)
    resp.raise_for_status()
    return resp.json()


def _jsonl(lines) -> str:
    return "".join(json.dumps(line, sort_keys=True, separators=(",", ":")) + "\n"
                   for line in lines)


def _markdown_table(rows) -> str:
    lines = ["| Model | Classifier | Noise | Mean acc (%) | Runs |",
             "|---|---|---|---|---|"]
    for r in rows:
        runs = ", ".join(f"{a:.2f}" for a in r["accuracies"])
        lines.append(f"| {r['model']} | {r['classifier']} | {r['noise']} "
                     f"| {r['mean']:.2f} | {runs} |")
    return "\n".join(lines) + "\n"


def _csv_table(rows) -> str:
    n_runs = max((len(r["accuracies"]) for r in rows), default=0)
    header = "model,classifier,noise,mean," + ",".join(
        f"run_{i}" for i in range(n_runs))
    lines = [header]
    for r in rows:
        cells = [r["model"], r["classifier"], r["noise"], repr(float(r["mean"]))]
        cells += [repr(float(a)) for a in r["accuracies"]]
        cells += [""] * (n_runs - len(r["accuracies"]))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def _write_run_outputs(out: Path, config: dict, data: dict, with_table: bool) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(
        json.dumps(config, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    (out / "report.jsonl").write_text(_jsonl(data["report_lines"]), encoding="utf-8")
    (out / "timings.jsonl").write_text(_jsonl(data["timing_lines"]), encoding="utf-8")
    if with_table and data["table"]:
        (out / "table.csv").write_text(_csv_table(data["table"]), encoding="utf-8")
        (out / "table.md").write_text(_markdown_table(data["table"]), encoding="utf-8")
    if data.get("checkpoint_b64"):
        (out / "checkpoint.bin").write_bytes(base64.b64decode(data["checkpoint_b64"]))
    if data.get("viz_csv"):
        (out / "viz.csv").write_text(data["viz_csv"], encoding="utf-8")


def cmd_train(args) -> int:
    config = _load_config(args.config)
    data = _post("/train", config)
    _write_run_outputs(Path(args.out), config, data, with_table=False)
    print(f"training complete; outputs in {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    config = _load_config(args.config)
    data = _post("/experiments/eval", config)
    _write_run_outputs(Path(args.out), config, data, with_table=True)
    for row in data["table"]:
        print(f"{row['model']}+{row['classifier']} [{row['noise']}] "
              f"mean accuracy {row['mean']:.2f}%")
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = _load_config(args.config)
    data = _post("/experiments/sweep", config)
    _write_run_outputs(Path(args.out), config, data, with_table=True)
    print(f"sweep complete: {len(data['table'])} cells; outputs in {args.out}")
    return EXIT_OK


def cmd_export_viz(args) -> int:
    config = _load_config(args.config)
    data = _post("/viz", config)
    _write_run_outputs(Path(args.out), config, data, with_table=False)
    print(f"viz export complete; outputs in {args.out}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    data = _post("/selftest", {})
    for check in data["checks"]:
        mark = "PASS" if check["passed"] else "FAIL"
        print(f"[{mark}] {check['name']}: {check['detail']}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "selftest.json").write_text(
            json.dumps(data, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return EXIT_OK if data["passed"] else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="drgl", description="Distributionally robust graph learning client")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, needs_config=True, needs_out=True):
        p = sub.add_parser(name)
        if needs_config:
            p.add_argument("--config", required=True, help="JSON config file")
        if needs_out:
            p.add_argument("--out", required=True, help="output directory")
        p.set_defaults(fn=fn)
        return p

    add("train", cmd_train)
    add("eval", cmd_eval)
    add("sweep", cmd_sweep)
    add("export-viz", cmd_export_viz)
    p_self = sub.add_parser("selftest")
    p_self.add_argument("--out", default=None, help="optional output directory")
    p_self.set_defaults(fn=cmd_selftest)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
