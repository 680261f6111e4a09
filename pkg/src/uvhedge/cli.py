"""Command-line client.

Parses a TOML experiment config, applies flag overrides, and dispatches to the
service runners (in-process by default, or to a running server via --server).
Reports are emitted as JSON or CSV.

Exit codes: 0 success, 2 configuration error, 3 capability error, 4 numerical
invariant or selftest failure, 1 anything unexpected.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import CapabilityError, ConfigError, InvariantError, OracleFailure, UvhedgeError
from .service import runners
from .service.schemas import ExperimentConfig, Report

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_CAPABILITY = 3
EXIT_INVARIANT = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uvhedge",
        description="Delta-vega hedges, worst-case model tilts and uncertainty premia",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="TOML experiment config")
        p.add_argument("--out", help="write the report to this path instead of stdout")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--seed", type=int, help="override numerics.mc.seed")
        p.add_argument("--paths", type=int, help="override numerics.mc.paths")
        p.add_argument("--steps", type=int, help="override numerics.mc.steps")
        p.add_argument("--server", help="POST to a running uvhedge service at this base URL")

    p = sub.add_parser("price", help="reference value, greeks and first-order ask price")
    common(p)
    p.add_argument("--route", choices=("auto", "pde", "mc"), default="auto")

    p = sub.add_parser("cashequiv", help="cash equivalent by PDE, Monte Carlo or both")
    common(p)
    p.add_argument("--route", choices=("pde", "mc", "both"), default="both")
    p.add_argument("--refine", action="store_true", help="also solve on a doubled PDE grid")

    p = sub.add_parser("sweep", help="value-expansion sweep over a psi grid")
    common(p)
    p.add_argument("--psi-grid", help='comma-separated grid, e.g. "0.02,0.05,0.1,0.2"')
    p.add_argument("--challenger", action="store_true",
                   help="also evaluate the plain delta hedge on the same paths")

    p = sub.add_parser("hedge-sim", help="single-psi hedging P&L and objective")
    common(p)
    p.add_argument("--psi", type=float, help="override penalty.psi")

    p = sub.add_parser("selftest", help="fast numerical invariant suite")
    common(p, config_required=False)
    p.add_argument("--corrupt", help="test mode: zero out one property's tolerance")

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8099)
    return parser


def load_config(path: str, args) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid TOML: {exc}")
    cfg = ExperimentConfig.from_dict(raw)
    overrides = {}
    for name in ("seed", "paths", "steps"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if overrides:
        raw.setdefault("numerics", {}).setdefault("mc", {}).update(overrides)
        if "sweep" in raw.get("numerics", {}):
            raw["numerics"]["sweep"].update(overrides)
        cfg = ExperimentConfig.from_dict(raw)
    return cfg


def _parse_psi_grid(text):
    try:
        grid = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse psi grid {text!r}")
    if not grid:
        raise ConfigError("psi grid is empty")
    return grid


def dispatch(args) -> Report:
    if args.command == "selftest":
        if args.server:
            return _remote(args.server, "/v1/selftest", {"corrupt": args.corrupt})
        return runners.run_selftest(corrupt=args.corrupt)

    cfg = load_config(args.config, args)
    if args.server:
        body: dict = {"config": cfg.model_dump(mode="json")}
        if args.command == "price":
            body["route"] = args.route
            return _remote(args.server, "/v1/price", body)
        if args.command == "cashequiv":
            body.update(route=args.route, refine=args.refine)
            return _remote(args.server, "/v1/cashequiv", body)
        if args.command == "sweep":
            body.update(psi_grid=_parse_psi_grid(args.psi_grid) if args.psi_grid else None,
                        challenger=args.challenger)
            return _remote(args.server, "/v1/sweep", body)
        if args.command == "hedge-sim":
            body["psi"] = args.psi
            return _remote(args.server, "/v1/hedge-sim", body)

    if args.command == "price":
        return runners.run_price(cfg, route=args.route)
    if args.command == "cashequiv":
        return runners.run_cashequiv(cfg, route=args.route, refine=args.refine)
    if args.command == "sweep":
        grid = _parse_psi_grid(args.psi_grid) if args.psi_grid else None
        return runners.run_sweep(cfg, psi_grid=grid, challenger=args.challenger)
    if args.command == "hedge-sim":
        return runners.run_hedge_sim(cfg, psi=args.psi)
    raise ConfigError(f"unknown command {args.command!r}")


def _remote(base: str, path: str, body: dict) -> Report:
    import httpx

    resp = httpx.post(base.rstrip("/") + path, json=body, timeout=None)
    payload = resp.json()
    if resp.status_code != 200:
        detail = payload.get("detail", resp.text)
        if resp.status_code == 422:
            raise ConfigError(detail)
        if resp.status_code == 409:
            raise CapabilityError(detail)
        raise InvariantError(detail)
    return Report.model_validate(payload)


def _csv_rows(report: Report):
    """Flatten the report into rows; series commands get one row per point."""
    results = report.results
    if report.command == "sweep":
        return results["points"]
    if report.command == "selftest":
        return results["properties"]
    flat = {}

    def walk(prefix, obj):
        if isinstance(obj, dict):
            for k, v in obj.items():
                walk(f"{prefix}.{k}" if prefix else k, v)
        elif isinstance(obj, list):
            for i, v in enumerate(obj):
                walk(f"{prefix}.{i}", v)
        else:
            flat[prefix] = obj

    walk("", results)
    return [flat]


def render(report: Report, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report.model_dump(mode="json"), indent=2, sort_keys=True)
    rows = _csv_rows(report)
    buf = io.StringIO()
    fields = sorted({k for row in rows for k in row})
    writer = csv.DictWriter(buf, fieldnames=fields)
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        import uvicorn

        from .service.app import app

        uvicorn.run(app, host=args.host, port=args.port)
        return EXIT_OK
    try:
        report = dispatch(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CapabilityError as exc:
        print(f"capability error: {exc}", file=sys.stderr)
        return EXIT_CAPABILITY
    except (InvariantError, OracleFailure) as exc:
        print(f"numerical invariant failure: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except UvhedgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNEXPECTED

    text = render(report, args.format)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        print(text)
    if report.command == "selftest" and not report.results.get("passed", False):
        print("selftest: at least one property failed", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
