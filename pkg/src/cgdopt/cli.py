"""Command-line client for the benchmark service.

All commands speak HTTP to the service: by default an in-process instance,
or a deployed one via --server. Trace and summary files are written locally
by the client. Exit codes: 0 success, 1 numeric failure in at least one run,
2 usage error.
"""
from __future__ import annotations

import asyncio
import sys
from pathlib import Path

import click
import httpx

from .experiments import (
    write_experiment_files,
    write_qn_suite_files,
    write_table1_files,
)


def _call(server: str | None, method: str, path: str, payload: dict | None = None):
    async def go():
        if server:
            client = httpx.AsyncClient(base_url=server, timeout=600.0)
        else:
            from .service.app import create_app

            client = httpx.AsyncClient(
                transport=httpx.ASGITransport(app=create_app()),
                base_url="http://cgdopt.internal",
                timeout=None,
            )
        async with client:
            resp = await client.request(method, path, json=payload)
            try:
                body = resp.json()
            except ValueError:
                body = {"detail": resp.text}
            return resp.status_code, body

    try:
        return asyncio.run(go())
    except httpx.HTTPError as exc:
        click.echo(f"error: cannot reach service: {exc}", err=True)
        sys.exit(1)


def _detail(body) -> str:
    if isinstance(body, dict) and "detail" in body:
        return str(body["detail"])
    return str(body)


def _ensure_ok(status: int, body) -> None:
    if 400 <= status < 500:
        click.echo(f"error: {_detail(body)}", err=True)
        sys.exit(2)
    if status >= 500:
        click.echo(f"error: service failure: {_detail(body)}", err=True)
        sys.exit(1)


def _parse_lambda(text: str) -> tuple[float, float | None]:
    try:
        if ":" in text:
            a, b = text.split(":", 1)
            return float(a), float(b)
        return float(text), None
    except ValueError:
        raise click.BadParameter(f"expected a float or start:end, got {text!r}")


def _parse_seeds(text: str) -> list[int]:
    try:
        if ":" in text:
            a, b = text.split(":", 1)
            lo, hi = int(a), int(b)
            if hi <= lo:
                raise ValueError
            return list(range(lo, hi))
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise click.BadParameter(f"expected start:end or a comma list of ints, got {text!r}")


def _parse_x0(text: str) -> list[float]:
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated floats, got {text!r}")


@click.group()
@click.option("--server", default=None, metavar="URL", help="Base URL of a running service; default runs it in-process.")
@click.pass_context
def main(ctx, server):
    """Benchmark runner for gradient-penalty line-search methods."""
    ctx.obj = {"server": server}


@main.command("run")
@click.option("--function", required=True, help="Registered function name, e.g. branin.")
@click.option("--optimizer", "optimizers", required=True, metavar="M1,M2,...", help="Comma-separated methods (gd, cgd, cgd-fd, cgd-dfp, cgd-bfgs, dfp, bfgs).")
@click.option("--alpha", required=True, type=float, help="Constant step size.")
@click.option("--lambda", "lam", default="0", metavar="F|A:B", help="Penalty: constant value or linear ramp start:end over the run.")
@click.option("--iters", default=40, type=int, show_default=True, help="Iteration cap T (gradient budget for cgd-fd).")
@click.option("--threshold", default=None, type=int, help="cgd-fd steepest-descent cutoff b (default T/4).")
@click.option("--fd-step", default=0.01, type=float, show_default=True, help="Gradient probe step r for cgd-fd.")
@click.option("--grad-tol", default=0.0, type=float, show_default=True, help="Early-exit gradient norm (0 disables).")
@click.option("--seeds", default="0", metavar="LO:HI|LIST", show_default=True, help="Seed range lo:hi (half-open) or comma list.")
@click.option("--x0", default=None, metavar="CSV", help="Fixed initial point (overrides seeded sampling).")
@click.option("--format", "fmt", default="csv", type=click.Choice(["csv", "json"]), show_default=True)
@click.option("--out", required=True, type=click.Path(path_type=Path), help="Output directory.")
@click.pass_context
def run_cmd(ctx, function, optimizers, alpha, lam, iters, threshold, fd_step, grad_tol, seeds, x0, fmt, out):
    """Run optimizers on one function and write per-run traces + summary."""
    lam_start, lam_end = _parse_lambda(lam)
    payload = {
        "function": function,
        "optimizers": [m.strip() for m in optimizers.split(",") if m.strip()],
        "alpha": alpha,
        "lambda_start": lam_start,
        "lambda_end": lam_end,
        "iters": iters,
        "threshold": threshold,
        "fd_step": fd_step,
        "grad_tol": grad_tol,
        "seeds": _parse_seeds(seeds),
    }
    if x0 is not None:
        payload["x0"] = _parse_x0(x0)
    status, body = _call(ctx.obj["server"], "POST", "/run", payload)
    _ensure_ok(status, body)
    paths = write_experiment_files(body, out, fmt)
    click.echo(f"wrote {len(paths)} files to {out}")
    for opt, agg in body["summary"]["improvement"].items():
        mean = agg["mean"]
        click.echo(f"  {opt}: mean first-step improvement {mean if mean is None else round(mean, 4)}%")
    failures = body["summary"]["numeric_failures"]
    if failures:
        click.echo(f"numeric failures in {failures} run(s)", err=True)
        sys.exit(1)


@main.command("table1")
@click.option("--seeds", default="0:50", metavar="LO:HI|LIST", show_default=True)
@click.option("--out", required=True, type=click.Path(path_type=Path))
@click.pass_context
def table1_cmd(ctx, seeds, out):
    """Run the published-hyperparameter rows (gd vs cgd-fd) over seeds."""
    status, body = _call(ctx.obj["server"], "POST", "/table1", {"seeds": _parse_seeds(seeds)})
    _ensure_ok(status, body)
    write_table1_files(body, out)
    click.echo(f"{'function':<28}{'gd':>10}{'cgd-fd':>10}{'dominance':>11}")
    failures = 0
    for row in body["rows"]:
        failures += row["numeric_failures"]
        click.echo(
            f"{row['function']:<28}{row['gd']['mean']:>10.2f}{row['cgd-fd']['mean']:>10.2f}"
            f"{row['dominance_fraction']:>11.2f}"
        )
    click.echo(f"wrote table1_summary.json and table1_summary.csv to {out}")
    if failures:
        click.echo(f"numeric failures in {failures} run(s)", err=True)
        sys.exit(1)


@main.command("qn-suite")
@click.option("--seeds", default="0:20", metavar="LO:HI|LIST", show_default=True)
@click.option("--out", required=True, type=click.Path(path_type=Path))
@click.pass_context
def qn_suite_cmd(ctx, seeds, out):
    """Compare dfp/bfgs against their penalized variants."""
    status, body = _call(ctx.obj["server"], "POST", "/qn-suite", {"seeds": _parse_seeds(seeds)})
    _ensure_ok(status, body)
    write_qn_suite_files(body, out)
    failures = 0
    for name, data in body["functions"].items():
        failures += data["numeric_failures"]
        finals = ", ".join(f"{opt}={data['final'][opt]['median']:.6g}" for opt in data["final"])
        click.echo(f"{name}: median final f: {finals}")
    click.echo(f"wrote per-function trajectory CSVs and qn_summary.json to {out}")
    if failures:
        click.echo(f"numeric failures in {failures} run(s)", err=True)
        sys.exit(1)


@main.command("check")
@click.option("--function", required=True)
@click.option("--points", default=50, type=int, show_default=True)
@click.option("--step", default=1e-6, type=float, show_default=True)
@click.option("--tolerance", default=1e-5, type=float, show_default=True)
@click.pass_context
def check_cmd(ctx, function, points, step, tolerance):
    """Validate analytic derivatives against central differences."""
    payload = {"function": function, "points": points, "step": step, "tolerance": tolerance}
    status, body = _call(ctx.obj["server"], "POST", "/check", payload)
    _ensure_ok(status, body)
    click.echo(f"{body['function']}: max gradient error {body['max_gradient_error']:.3g} over {points} points")
    if body["max_hessian_error"] is not None:
        click.echo(f"{body['function']}: max Hessian error {body['max_hessian_error']:.3g}")
    if body["minimum_grad_norm"] is not None:
        click.echo(f"{body['function']}: gradient norm at known minimum {body['minimum_grad_norm']:.3g}")
    if not body["passed"]:
        click.echo("validation FAILED", err=True)
        sys.exit(1)
    click.echo("validation passed")


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, type=int, show_default=True)
def serve_cmd(host, port):
    """Run the benchmark service with uvicorn."""
    import uvicorn

    uvicorn.run("cgdopt.service.app:app", host=host, port=port)


if __name__ == "__main__":
    main()
