"""Command-line entry point: ``nstest test | ns | verify``."""

from __future__ import annotations

import csv
import io
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import click

from . import __version__
from .grid_lab import dashed_matched_fixture, default_fixtures, verify_fixture
from .grid_lab.fields import model_for
from .noise_model import NoiseModel, ns_estimate
from .rng import SEED_ENV_VAR, Stream
from .set_model import Region, load_region, preset
from .tester import TesterParams, accept_probability, run_test

SCHEMA = 1
FIXTURE_NAMES = ("empty", "interval-half", "dashed", "disk", "ou-halfline", "ou-interval")


def _resolve_region(preset_name: str | None, region_path: str | None, model_name: str | None):
    if (preset_name is None) == (region_path is None):
        raise click.UsageError("give exactly one of --preset or --region")
    try:
        model = NoiseModel.parse(model_name) if model_name else None
        if region_path is not None:
            region = load_region(region_path)
        else:
            region = preset(preset_name, model.space if model else None)
        model = model or model_for(region)
    except (ValueError, OSError) as exc:
        raise click.UsageError(str(exc)) from exc
    if model.space != region.space:
        raise click.UsageError(f"model {model.name} does not live on the region's space {region.space}")
    return region, model


def _resolve_seed(seed: int | None) -> tuple[int, str]:
    if seed is not None:
        return seed, "flag"
    raw = os.environ.get(SEED_ENV_VAR)
    if raw:
        try:
            return int(raw), "env"
        except ValueError as exc:
            raise click.UsageError(f"{SEED_ENV_VAR} must be an integer, got {raw!r}") from exc
    raise click.UsageError(f"a seed is required: pass --seed or set {SEED_ENV_VAR}")


def _workers(threads: int | None) -> int:
    return threads if threads else (os.cpu_count() or 1)


def _flatten(d, prefix=""):
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            yield from _flatten(v, key + ".")
        else:
            yield key, v


def _emit(doc: dict, out: str | None, fmt: str) -> None:
    doc = {"schema": SCHEMA, "version": __version__, **doc,
           "timestamp": datetime.now(timezone.utc).isoformat()}
    if fmt == "json":
        text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["key", "value"])
        for k, v in _flatten(doc):
            w.writerow([k, json.dumps(v) if isinstance(v, (list, dict)) else v])
        text = buf.getvalue()
    if out:
        Path(out).write_text(text)
    else:
        click.echo(text, nl=False)


def _region_doc(region: Region, model: NoiseModel):
    return {"region": region.to_dict(), "model": model.name,
            "exact_perimeter": region.exact_perimeter(), "exact_measure": region.exact_measure()}


_region_options = [
    click.option("--preset", "preset_name", help="Preset region: empty, full, interval-half, "
                 "dashed[:t], disk[:r], gaussian-halfspace."),
    click.option("--region", "region_path", type=click.Path(), help="Region JSON file."),
    click.option("--model", "model_name", help="heat-torus-<n> or ou-<n> (default: from the region)."),
]
_common_options = [
    click.option("--seed", type=int, default=None, help=f"Master seed (fallback: ${SEED_ENV_VAR})."),
    click.option("--threads", type=int, default=None, help="Worker cap (default: all CPUs)."),
    click.option("--out", type=click.Path(), default=None, help="Write the report here instead of stdout."),
    click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json", show_default=True),
]


def _with(options):
    def deco(f):
        for opt in reversed(options):
            f = opt(f)
        return f
    return deco


@click.group()
@click.version_option(__version__)
def main():
    """Surface-area testing via noise sensitivity."""


@main.command("test")
@_with(_region_options)
@click.option("-S", "S", type=float, required=True, help="Surface-area budget.")
@click.option("--eta", type=float, required=True, help="Relative slack.")
@click.option("--eps", type=float, required=True, help="Perturbation budget in (0, 1).")
@click.option("--trials", type=int, default=1, show_default=True,
              help="Repeat the test; the report gives the acceptance rate.")
@_with(_common_options)
def cmd_test(preset_name, region_path, model_name, S, eta, eps, trials, seed, threads, out, fmt):
    """Run the surface-area tester. Exit 0 = accepted, 1 = rejected.

    With --trials > 1 the exit code follows the majority verdict.
    """
    region, model = _resolve_region(preset_name, region_path, model_name)
    seed, source = _resolve_seed(seed)
    try:
        params = TesterParams(S, eta, eps)
    except ValueError as exc:
        raise click.UsageError(str(exc)) from exc
    stream = Stream(seed)
    doc = {"command": "test", "seed": seed, "seed_source": source,
           "params": {"S": S, "eta": eta, "epsilon": eps}, **_region_doc(region, model)}
    if trials > 1:
        rate = accept_probability(params, model, region, trials, stream, workers=_workers(threads))
        doc["acceptance"] = rate.to_dict()
        accepted = rate.rate > 0.5
    else:
        verdict = run_test(params, model, region, stream, workers=_workers(threads))
        doc["verdict"] = verdict.to_dict()
        accepted = verdict.accepted
    _emit(doc, out, fmt)
    sys.exit(0 if accepted else 1)


@main.command("ns")
@_with(_region_options)
@click.option("--t", "t", type=float, required=True, help="Noise time.")
@click.option("--m", "m", type=int, default=100_000, show_default=True, help="Number of pairs.")
@_with(_common_options)
def cmd_ns(preset_name, region_path, model_name, t, m, seed, threads, out, fmt):
    """Monte Carlo estimate of the noise sensitivity NS_t(A)."""
    region, model = _resolve_region(preset_name, region_path, model_name)
    seed, source = _resolve_seed(seed)
    if not t > 0 or m < 1:
        raise click.UsageError("need --t > 0 and --m >= 1")
    est = ns_estimate(model, region, t, m, Stream(seed), workers=_workers(threads))
    _emit({"command": "ns", "seed": seed, "seed_source": source,
           "estimate": est.to_dict(), **_region_doc(region, model)}, out, fmt)


@main.command("verify")
@click.option("--fixture", "fixtures", multiple=True, type=click.Choice(FIXTURE_NAMES),
              help="Fixture to run (repeatable; default: all).")
@click.option("--t-match", is_flag=True, help="Smooth the dashed fixture at its own dash scale.")
@click.option("--eta", "etas", type=float, multiple=True, help="Threshold-search eta (default 0.1 and 0.2).")
@click.option("--tolerance", type=float, default=None,
              help="Override every check tolerance (defaults: 3% identity/certificate, 2% lemma/smoothness).")
@click.option("--n1", type=int, default=1 << 14, show_default=True, help="1-D torus resolution.")
@click.option("--n2", type=int, default=1024, show_default=True, help="2-D torus resolution.")
@click.option("--csv", "csv_path", type=click.Path(), default=None, help="Write (s, perimeter, sym_diff) curves.")
@click.option("--out", type=click.Path(), default=None)
def cmd_verify(fixtures, t_match, etas, tolerance, n1, n2, csv_path, out):
    """Grid certification of the coarea, smoothness and thresholding bounds.

    Exit 0 iff every check passes.
    """
    etas = etas or (0.1, 0.2)
    if any(not 0 < e < 0.5 for e in etas):
        raise click.UsageError("--eta must lie in (0, 1/2)")
    chosen = set(fixtures or FIXTURE_NAMES)
    suite = [fx for fx in default_fixtures(n1, n2) if fx.name in chosen]
    if t_match:
        suite = [dashed_matched_fixture() if fx.name == "dashed" else fx for fx in suite]
    reports, errors = [], []
    for fx in suite:
        try:
            reports += verify_fixture(fx, etas, tolerance)
        except ValueError as exc:
            errors.append({"fixture": fx.name, "error": str(exc)})
    if csv_path:
        curves = [r for r in reports if hasattr(r, "curve_csv") and r.curve]
        text = "".join(r.curve_csv() if i == 0 else r.curve_csv().split("\n", 1)[1]
                       for i, r in enumerate(curves))
        Path(csv_path).write_text(text)
    ok = not errors and all(r.passed for r in reports)
    _emit({"command": "verify", "pass": ok, "reports": [r.to_dict() for r in reports],
           "errors": errors}, out, "json")
    sys.exit(0 if ok else 1)


if __name__ == "__main__":
    main()
