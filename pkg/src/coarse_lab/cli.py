"""``coarse-lab`` command line.

Exit status: 0 pass, 1 a verdict or witness check failed, 2 bad usage or
input, 3 numerical failure.
"""
from __future__ import annotations

import csv
import sys
from pathlib import Path

import click
import numpy as np

from . import gallery, io
from .core import degree, power
from .errors import CoarseLabError, InputError, NumericalError, WitnessViolation
from .onl import amplify, beta_check, inverse_compression_norm, localize
from .pipeline import PROFILE_COLUMNS, PipelineConfig, emit_report, run_pipeline
from .roe import adjacency_operator, nuclearity_defect, operator_norm
from .witness import (
    FolnerWitness,
    KernelMatrix,
    L1Profile,
    L2Profile,
    folner_from_balls,
    folner_to_l2,
    kernel_to_l2,
    l2_to_folner,
    l2_to_kernel,
    verify_folner,
    verify_kernel,
    verify_l2,
)

EXIT_FAIL, EXIT_INPUT, EXIT_NUMERIC = 1, 2, 3


class _Group(click.Group):
    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except WitnessViolation as exc:
            click.echo(f"FAIL: {exc}", err=True)
            ctx.exit(EXIT_FAIL)
        except InputError as exc:
            click.echo(f"error: {exc}", err=True)
            ctx.exit(EXIT_INPUT)
        except (NumericalError, CoarseLabError) as exc:
            click.echo(f"numerical failure: {exc}", err=True)
            ctx.exit(EXIT_NUMERIC)


def _load_space(path):
    return io.space_from_doc(io.read_json(path, "space"))


def _entourage(named, name):
    if name not in named:
        raise InputError(f"space file has no entourage named {name!r}")
    return named[name]


def _write(doc, out):
    if out is None:
        click.echo(io.dumps(doc), nl=False)
    else:
        io.write_json(doc, out)


def _rows_out(columns, rows, out):
    stream = open(out, "w", encoding="utf-8", newline="") if out else sys.stdout
    try:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    finally:
        if out:
            stream.close()


@click.group(cls=_Group)
def main():
    """Finite coarse spaces: witnesses of property A, banded operators and norm localization."""


@main.group(cls=_Group)
def space():
    """Build and inspect space files."""


@space.command("build")
@click.option("--family", type=click.Choice(["cycle", "random-regular", "cayley", "box", "graph"]), required=True)
@click.option("--n", "n", type=int, help="Number of points (cycle, random-regular).")
@click.option("--d", "d", type=int, help="Degree (random-regular).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--group", type=click.Choice(["cyclic", "dihedral", "symmetric"]))
@click.option("--orders", help="Comma-separated group orders (cayley uses the first, box uses all).")
@click.option("--edges", type=click.Path(exists=True, dir_okay=False), help="Edge-list file (graph).")
@click.option("--radius", "radii", type=int, multiple=True, help="Also store the radius-r entourage.")
@click.option("--out", type=click.Path(dir_okay=False))
def space_build(family, n, d, seed, group, orders, edges, radii, out):
    """Write a space file whose entourage "generator" is the radius-one relation."""

    def need(value, flag):
        if value is None:
            raise InputError(f"--family {family} needs {flag}")
        return value

    if family == "cycle":
        sp_, gen = gallery.cycle_space(need(n, "--n"), 1)
    elif family == "random-regular":
        sp_, gen = gallery.random_regular_graph(need(n, "--n"), need(d, "--d"), seed)
    elif family in ("cayley", "box"):
        make = {"cyclic": gallery.cyclic_group, "dihedral": gallery.dihedral_group, "symmetric": gallery.symmetric_group}
        ks = [int(k) for k in need(orders, "--orders").split(",")]
        groups = [make[need(group, "--group")](k) for k in ks]
        sp_, gen = gallery.cayley_space(groups[0], 1) if family == "cayley" else gallery.box_space(groups, 1)
    else:
        with open(need(edges, "--edges"), encoding="utf-8") as fh:
            sp_, gen = gallery.graph_space(fh)
    ents = {"generator": gen}
    for r in radii:
        ents[f"radius-{r}"] = power(gen, r)
    _write(io.space_to_doc(sp_, ents), out)


@space.command("show")
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
def space_show(path):
    """Summarise a space file: points and per-entourage pair counts and degrees."""
    sp_, named = _load_space(path)
    click.echo(f"points: {sp_.n}")
    for name, t in named.items():
        deg = degree(t)
        click.echo(f"{name}: pairs={len(t)} fwd_deg={deg.fwd_deg} bwd_deg={deg.bwd_deg} symmetric={t.is_symmetric}")


@main.group(cls=_Group)
def witness():
    """Make, convert and verify property-A witnesses."""


@witness.command("make")
@click.option("--space", "space_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--generator", default="generator", show_default=True)
@click.option("--entourage", required=True, help="Name of the tested entourage T.")
@click.option("--epsilon", type=float, required=True)
@click.option("--r-max", type=int, default=50, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False))
def witness_make(space_path, generator, entourage, epsilon, r_max, out):
    """Følner witness from generator balls of the smallest working radius."""
    sp_, named = _load_space(space_path)
    w = folner_from_balls(sp_, _entourage(named, generator), _entourage(named, entourage), epsilon, r_max)
    if w is None:
        raise WitnessViolation(f"no ball radius up to {r_max} reaches ratio < {epsilon}")
    _write(io.witness_to_doc(w), out)


def _load_witness(space_path, path):
    sp_, named = _load_space(space_path)
    return sp_, named, io.witness_from_doc(io.read_json(path, "witness"), sp_, named)


@witness.command("convert")
@click.option("--space", "space_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--to", "target", type=click.Choice(["l1", "l2", "kernel", "folner"]), required=True)
@click.option("--epsilon", type=float, help="Accuracy for kernel -> l2 and l2 -> folner.")
@click.option("--entourage", help="Tested entourage for l2 -> folner.")
@click.option("--out", type=click.Path(dir_okay=False))
def witness_convert(space_path, input_path, target, epsilon, entourage, out):
    """Move a witness one step along folner -> l2 -> kernel -> l2 -> folner."""
    sp_, named, w = _load_witness(space_path, input_path)
    if isinstance(w, FolnerWitness) and target in ("l1", "l2"):
        l1, l2 = folner_to_l2(w)
        result = l1 if target == "l1" else l2
    elif isinstance(w, L2Profile) and target == "kernel":
        result = l2_to_kernel(w)
    elif isinstance(w, KernelMatrix) and target == "l2":
        if epsilon is None:
            raise InputError("kernel -> l2 needs --epsilon")
        result = kernel_to_l2(w, epsilon)
    elif isinstance(w, L2Profile) and target == "folner":
        if epsilon is None or entourage is None:
            raise InputError("l2 -> folner needs --epsilon and --entourage")
        result = l2_to_folner(w, _entourage(named, entourage), epsilon)
    else:
        raise InputError(f"no conversion from {type(w).__name__} to {target}")
    _write(io.witness_to_doc(result), out)


@witness.command("verify")
@click.option("--space", "space_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--entourage", required=True)
@click.option("--epsilon", type=float, help="Bound to check (required for Følner witnesses).")
def witness_verify(space_path, input_path, entourage, epsilon):
    """Measure a witness on T; exit 1 when it misses the requested bound."""
    sp_, named, w = _load_witness(space_path, input_path)
    t = _entourage(named, entourage)
    if isinstance(w, FolnerWitness):
        if epsilon is None:
            raise InputError("Følner verification needs --epsilon")
        q = verify_folner(w, t, epsilon)
    elif isinstance(w, L2Profile):
        q = verify_l2(w, t)
    elif isinstance(w, KernelMatrix):
        q = verify_kernel(w, t)
        click.echo(f"min_eigenvalue: {q.min_eigenvalue!r}")
    elif isinstance(w, L1Profile):
        raise InputError("l1 profiles are verified through their l2 square roots")
    click.echo(f"epsilon: {q.epsilon!r}")
    if q.pair is not None:
        click.echo(f"worst pair: {sp_.label(q.pair[0])} {sp_.label(q.pair[1])}")
    if q.vacuous:
        click.echo("vacuous: entourage is empty")
    if epsilon is not None and not isinstance(w, FolnerWitness) and q.epsilon >= epsilon:
        raise WitnessViolation(f"measured {q.epsilon!r} >= {epsilon!r}")


@main.group(cls=_Group)
def roe():
    """Norms and reconstruction defects of banded operators."""


def _load_operator(space_path, path):
    sp_, named = _load_space(space_path)
    return sp_, named, io.operator_from_doc(io.read_json(path, "operator"), sp_, named)


@roe.command("norm")
@click.option("--space", "space_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--method", type=click.Choice(["exact_eig", "power_iter"]))
def roe_norm(space_path, input_path, method):
    """Operator norm as CSV: name, value, method, residual."""
    _, _, b = _load_operator(space_path, input_path)
    r = operator_norm(b, method)
    _rows_out(("name", "value", "method", "residual"), [(Path(input_path).stem, r.value, r.method, r.residual)], None)


@roe.command("defect")
@click.option("--space", "space_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--profile", "profile_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--entourage", required=True)
@click.option("--epsilon", type=float, required=True)
def roe_defect(space_path, input_path, profile_path, entourage, epsilon):
    """Reconstruction defect against its Schur-test bound."""
    sp_, named, b = _load_operator(space_path, input_path)
    p = io.witness_from_doc(io.read_json(profile_path, "witness"), sp_, named)
    if not isinstance(p, L2Profile):
        raise InputError("--profile must hold an l2 profile")
    r = nuclearity_defect(b, p, _entourage(named, entourage), epsilon)
    _rows_out(("value", "bound", "delta", "eps"), [(r.value, r.bound, r.delta, r.eps)], None)


@main.group(cls=_Group)
def onl():
    """Operator norm localization."""


def _operator_or_adjacency(sp_, named, generator, input_path):
    if input_path:
        return Path(input_path).stem, io.operator_from_doc(io.read_json(input_path, "operator"), sp_, named)
    return "adjacency", adjacency_operator(_entourage(named, generator))


@onl.command("profile")
@click.option("--space", "space_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--generator", default="generator", show_default=True)
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False), help="Operator file (default: generator adjacency).")
@click.option("--windows", default="1,2,3", show_default=True, help="Comma-separated window radii.")
@click.option("--localization", type=click.Choice(["column", "block"]), default="column", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False))
def onl_profile(space_path, generator, input_path, windows, localization, out):
    """Best localization ratio per window radius, as CSV."""
    sp_, named = _load_space(space_path)
    gen = _entourage(named, generator)
    op_name, a = _operator_or_adjacency(sp_, named, generator, input_path)
    rows = []
    for w in (int(r) for r in windows.split(",")):
        loc = localize(a, power(gen, w), localization)
        rows.append((Path(space_path).stem, op_name, f"radius-{w}", w, loc.best_ratio, sp_.label(loc.center), loc.norm, loc.method))
    _rows_out(PROFILE_COLUMNS, rows, out)


@onl.command("amplify")
@click.option("--space", "space_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--generator", default="generator", show_default=True)
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False), help="Operator file (default: generator adjacency).")
@click.option("--band", required=True, help="Entourage T containing the operator's support.")
@click.option("--window", required=True, help="Entourage S localizing the start vector.")
@click.option("--kappa", type=float, required=True)
@click.option("--steps", "n", type=int, required=True, help="Number n of (a a*) factors.")
@click.option("--out", type=click.Path(dir_okay=False))
def onl_amplify(space_path, generator, input_path, band, window, kappa, n, out):
    """Start from the best S-localized vector of a/||a|| and amplify to kappa."""
    sp_, named = _load_space(space_path)
    _, a = _operator_or_adjacency(sp_, named, generator, input_path)
    a = a / operator_norm(a).value
    s = _entourage(named, window)
    loc = localize(a, s)
    xi = loc.vector / np.linalg.norm(loc.vector)
    cert = amplify(a, _entourage(named, band), s, xi, kappa, n)
    _write(io.certificate_to_doc(cert), out)


@onl.command("invnorm")
@click.option("--space", "space_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--band", required=True)
@click.option("--window", required=True)
@click.option("--trials", type=int, default=10, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def onl_invnorm(space_path, band, window, trials, seed):
    """Lower bound for the norm of the inverse compression on E_T."""
    _, named = _load_space(space_path)
    est = inverse_compression_norm(_entourage(named, band), _entourage(named, window), trials, seed)
    _rows_out(("band", "window", "lower_bound", "samples"), [(band, window, est.lower_bound, est.samples)], None)


@onl.command("check")
@click.option("--space", "space_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--generator", default="generator", show_default=True)
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--window", required=True)
@click.option("--constant", "c", type=float, required=True)
@click.option("--localization", type=click.Choice(["column", "block"]), default="column", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False))
def onl_check(space_path, generator, input_path, window, c, localization, out):
    """Localization certificate at constant c, or exit 1 with the best ratio."""
    sp_, named = _load_space(space_path)
    _, a = _operator_or_adjacency(sp_, named, generator, input_path)
    cert = beta_check(a, _entourage(named, window), c, localization)
    _write(io.certificate_to_doc(cert, window), out)


@main.group(cls=_Group)
def pipeline():
    """Configured end-to-end runs."""


@pipeline.command("run")
@click.argument("config", type=click.Path(dir_okay=False))
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False), help="Overrides outputs.csv of the config.")
@click.option("--json", "json_path", type=click.Path(dir_okay=False), help="Overrides outputs.json of the config.")
def pipeline_run(config, csv_path, json_path):
    """Run a JSON config; exit 1 unless every verdict passes."""
    cfg = PipelineConfig.from_file(config)
    report = run_pipeline(cfg)
    csv_path = csv_path or (cfg.outputs.get("csv") and cfg.resolve_path(cfg.outputs["csv"]))
    json_path = json_path or (cfg.outputs.get("json") and cfg.resolve_path(cfg.outputs["json"]))
    if csv_path:
        emit_report(report, "csv", csv_path)
    if json_path:
        emit_report(report, "json", json_path)
    for v in report.verdicts:
        status = "pass" if v.passed else "FAIL"
        click.echo(f"{status} {v.check}: {v.operation} {v.inequality} value={v.value!r} bound={v.bound!r} {v.note}".rstrip())
    if not report.passed:
        sys.exit(EXIT_FAIL)


if __name__ == "__main__":
    main()
