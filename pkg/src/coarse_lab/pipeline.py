"""Configured end-to-end runs and their reports.

A run loads or builds a space, resolves the entourages it needs, executes
one chain of checks and collects the outcome in a :class:`Report`.  Nothing
is written until every stage has finished, so a failing configuration never
leaves a partial report behind.
"""
from __future__ import annotations

import csv
import io as _stdio
import json
import math
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path

import numpy as np
import scipy

from . import gallery
from .core import Entourage, Space, degree, power
from .errors import ConfigError, PreconditionError, WitnessViolation
from .io import _pairs_from_labels, read_json, space_from_doc, validate_schema
from .onl import localize
from .roe import adjacency_operator, nuclearity_defect, operator_norm, random_banded
from .witness import (
    factor_kernel,
    folner_from_balls,
    folner_to_l2,
    l2_to_folner,
    l2_to_kernel,
    verify_folner,
    verify_kernel,
    verify_l2,
)

__all__ = [
    "CHAINS",
    "PROFILE_COLUMNS",
    "CHECK_COLUMNS",
    "PipelineConfig",
    "Verdict",
    "Report",
    "run_pipeline",
    "emit_report",
    "report_csv",
    "report_json",
]

CHAINS = ("witness-roundtrip", "nuclearity", "onl-profile")
PROFILE_COLUMNS = ("space", "operator", "window_name", "window_radius", "best_ratio", "center", "norm", "method")
CHECK_COLUMNS = ("check", "operation", "inequality", "value", "bound", "passed", "note")

_entourage_ref = {
    "oneOf": [
        {"type": "object", "properties": {"radius": {"type": "integer", "minimum": 0}}, "required": ["radius"], "additionalProperties": False},
        {"type": "object", "properties": {"name": {"type": "string"}}, "required": ["name"], "additionalProperties": False},
        {"type": "object", "properties": {"pairs": {"type": "array"}}, "required": ["pairs"], "additionalProperties": False},
    ]
}

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "space": {
            "type": "object",
            "properties": {
                "family": {"enum": ["cycle", "random-regular", "cayley", "file", "graph"]},
                "n": {"type": "integer", "minimum": 1},
                "d": {"type": "integer", "minimum": 0},
                "group": {"enum": ["cyclic", "dihedral", "symmetric"]},
                "order": {"type": "integer", "minimum": 1},
                "path": {"type": "string"},
                "generator": {"type": "string"},
                "name": {"type": "string"},
            },
            "required": ["family"],
            "additionalProperties": False,
        },
        "entourage": _entourage_ref,
        "epsilon": {"type": "number", "exclusiveMinimum": 0},
        "seed": {"type": "integer", "minimum": 0},
        "chain": {"enum": list(CHAINS)},
        "r_max": {"type": "integer", "minimum": 1},
        "samples": {"type": "integer", "minimum": 0},
        "windows": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "localization": {"enum": ["column", "block"]},
        "timestamp": {"type": "string"},
        "outputs": {
            "type": "object",
            "properties": {"csv": {"type": "string"}, "json": {"type": "string"}},
            "additionalProperties": False,
        },
    },
    "required": ["space", "chain"],
    "additionalProperties": False,
}


@dataclass(frozen=True)
class PipelineConfig:
    """A validated run configuration; relative paths resolve against ``base_dir``."""

    space: dict
    chain: str
    entourage: dict = field(default_factory=lambda: {"radius": 1})
    epsilon: float = 0.3
    seed: int = 0
    r_max: int = 50
    samples: int = 5
    windows: tuple = (1, 2, 3)
    localization: str = "column"
    timestamp: str | None = None
    outputs: dict = field(default_factory=dict)
    base_dir: Path = Path(".")

    @classmethod
    def from_dict(cls, doc: dict, base_dir=".") -> "PipelineConfig":
        validate_schema(doc, CONFIG_SCHEMA)
        kwargs = dict(doc)
        if "windows" in kwargs:
            kwargs["windows"] = tuple(kwargs["windows"])
        return cls(**kwargs, base_dir=Path(base_dir))

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        path = Path(path)
        return cls.from_dict(read_json(path), path.parent)

    def resolve_path(self, p: str) -> Path:
        path = Path(p)
        return path if path.is_absolute() else self.base_dir / path


@dataclass(frozen=True)
class Verdict:
    """Outcome of one inequality check; ``operation`` names the function that produced it."""

    check: str
    operation: str
    inequality: str
    value: float
    bound: float
    passed: bool
    note: str = ""

    def row(self) -> dict:
        return {
            "check": self.check,
            "operation": self.operation,
            "inequality": self.inequality,
            "value": self.value,
            "bound": self.bound,
            "passed": self.passed,
            "note": self.note,
        }


@dataclass
class Report:
    metadata: dict
    columns: tuple
    rows: list = field(default_factory=list)
    verdicts: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)


def _version(dist: str) -> str:
    try:
        return metadata.version(dist)
    except metadata.PackageNotFoundError:
        return "unknown"


def _load_space(cfg: PipelineConfig) -> tuple[str, Space, Entourage, dict]:
    """Return ``(name, space, generating entourage, named entourages)``."""
    desc = cfg.space
    fam = desc["family"]

    def need(key):
        if key not in desc:
            raise ConfigError(f"space family {fam!r} needs {key!r}")
        return desc[key]

    if fam == "cycle":
        n = need("n")
        space, gen = gallery.cycle_space(n, 1)
        name, named = f"cycle-{n}", {}
    elif fam == "random-regular":
        n, d = need("n"), need("d")
        space, gen = gallery.random_regular_graph(n, d, cfg.seed)
        name, named = f"regular-{d}-{n}", {}
    elif fam == "cayley":
        kind, order = need("group"), need("order")
        group = {"cyclic": gallery.cyclic_group, "dihedral": gallery.dihedral_group, "symmetric": gallery.symmetric_group}[kind](order)
        space, gen = gallery.cayley_space(group, 1)
        name, named = f"{kind}-{order}", {}
    elif fam == "file":
        space, named = space_from_doc(read_json(cfg.resolve_path(need("path")), "space"))
        gname = need("generator")
        if gname not in named:
            raise ConfigError(f"space file has no entourage named {gname!r}")
        gen = named[gname]
        name = Path(desc["path"]).stem
    else:
        path = cfg.resolve_path(need("path"))
        try:
            lines = path.read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc.strerror or exc}") from None
        space, gen = gallery.graph_space(lines)
        name, named = path.stem, {}
    return desc.get("name", name), space, gen, named


def _resolve_entourage(ref: dict, space: Space, gen: Entourage, named: dict) -> tuple[str, Entourage]:
    if "radius" in ref:
        return f"radius-{ref['radius']}", power(gen, ref["radius"])
    if "name" in ref:
        if ref["name"] not in named:
            raise ConfigError(f"unknown entourage {ref['name']!r}")
        return ref["name"], named[ref["name"]]
    return "inline", _pairs_from_labels(space, ref["pairs"])


def _note(t: Entourage) -> str:
    return "vacuous" if len(t) == 0 else ""


def _roundtrip(cfg, space, gen, t) -> list[Verdict]:
    eps = cfg.epsilon
    note = _note(t)
    out = []
    w = folner_from_balls(space, gen, t, eps, cfg.r_max)
    if w is None:
        out.append(Verdict("folner_witness", "folner_from_balls", "ratio < eps", math.inf, eps, False, f"no ball radius up to {cfg.r_max}"))
        return out
    q = verify_folner(w, t, eps)
    out.append(Verdict("folner_witness", "verify_folner", "sym/inter < eps", q.epsilon, eps, True, note))

    _, p = folner_to_l2(w)
    d1 = verify_l2(p, t).epsilon
    out.append(Verdict("l2_displacement", "folner_to_l2", "||eta_x - eta_y|| <= sqrt(2 eps)", d1, math.sqrt(2 * eps), d1 <= math.sqrt(2 * eps), note))

    k = l2_to_kernel(p)
    kq = verify_kernel(k, t)
    out.append(Verdict("kernel_defect", "l2_to_kernel", "|1 - k(x,y)| <= displacement", kq.epsilon, d1, kq.epsilon <= d1, note))
    out.append(Verdict("kernel_psd", "l2_to_kernel", "min eigenvalue >= -1e-9", kq.min_eigenvalue, -1e-9, kq.min_eigenvalue >= -1e-9, ""))

    fac = factor_kernel(k, eps, t)
    out.append(Verdict("factor_residual", "kernel_to_l2", "||k - b* b|| < eps", fac.residual, eps, fac.residual < eps, ""))
    p2 = fac.profile
    d2 = verify_l2(p2, t).epsilon
    bound = fac.displacement_bound if fac.displacement_bound is not None else math.inf
    out.append(Verdict("l2_displacement_2", "kernel_to_l2", "displacement <= a-priori bound", d2, bound, d2 <= bound, note))

    if d2 >= 1:
        out.append(Verdict("folner_roundtrip", "l2_to_folner", "measured displacement < 1", d2, 1.0, False, ""))
        return out
    target = 2 * d2 / (1 - d2) if d2 > 0 else 2 * eps / (1 - eps)
    try:
        w2 = l2_to_folner(p2, t, math.nextafter(d2, math.inf) if d2 > 0 else eps, target_ratio=target)
        q2 = verify_folner(w2, t, target)
        out.append(Verdict("folner_roundtrip", "l2_to_folner", "sym/inter < 2 eps'/(1 - eps')", q2.epsilon, target, True, note))
    except (WitnessViolation, PreconditionError) as exc:
        out.append(Verdict("folner_roundtrip", "l2_to_folner", "sym/inter < 2 eps'/(1 - eps')", math.inf, target, False, str(exc)))
    return out


def _nuclearity(cfg, space, gen, t, rng) -> list[Verdict]:
    eps = cfg.epsilon
    note = _note(t)
    ops = [("adjacency", adjacency_operator(t))]
    ops += [(f"random-{i}", random_banded(t, rng)) for i in range(cfg.samples)]
    ops = [(name, b) for name, b in ops if b.entries.nnz]
    deg = max(degree(t).max, 1)
    norms = [operator_norm(b).value for _, b in ops]
    delta = min((eps / (nb * deg) for nb in norms if nb > 0), default=eps)
    # a ball witness at ratio r gives displacement at most sqrt(2 r)
    w = folner_from_balls(space, gen, t, 0.999 * delta**2 / 2, cfg.r_max)
    if w is None:
        return [Verdict("profile", "folner_from_balls", "displacement < delta", math.inf, delta, False, f"no ball radius up to {cfg.r_max}")]
    _, p = folner_to_l2(w)
    out = []
    for (name, b), nb in zip(ops, norms):
        try:
            r = nuclearity_defect(b, p, t, eps)
            out.append(Verdict(f"defect[{name}]", "nuclearity_defect", "||Psi(Phi_S(b)) - b|| <= Schur bound < eps", r.value, r.bound, True, note))
        except PreconditionError as exc:
            out.append(Verdict(f"defect[{name}]", "nuclearity_defect", "displacement < delta", math.inf, eps, False, str(exc)))
    if not ops:
        out.append(Verdict("defect", "nuclearity_defect", "||Psi(Phi_S(b)) - b|| < eps", 0.0, eps, True, "vacuous"))
    return out


def _profile(cfg, name, space, gen) -> tuple[list, list]:
    a = adjacency_operator(gen)
    rows, verdicts = [], []
    prev = -math.inf
    if a.entries.nnz == 0:
        return rows, [Verdict("profile", "beta_check", "operator nonzero", 0.0, 0.0, True, "vacuous")]
    for w in cfg.windows:
        window = power(gen, w)
        loc = localize(a, window, cfg.localization)
        best = loc.best_ratio
        rows.append(
            {
                "space": name,
                "operator": "adjacency",
                "window_name": f"radius-{w}",
                "window_radius": w,
                "best_ratio": best,
                "center": space.label(loc.center),
                "norm": loc.norm,
                "method": loc.method,
            }
        )
        verdicts.append(Verdict(f"ratio_bound[radius-{w}]", "beta_check", "best ratio <= 1", best, 1.0, best <= 1 + 1e-12, ""))
        if prev > -math.inf:
            verdicts.append(
                Verdict(f"monotone[radius-{w}]", "beta_check", "ratio(S) <= ratio(S') for S in S'", prev, best, prev <= best + 1e-12, "")
            )
        prev = best
    return rows, verdicts


def run_pipeline(cfg: PipelineConfig) -> Report:
    name, space, gen, named = _load_space(cfg)
    tname, t = _resolve_entourage(cfg.entourage, space, gen, named)
    # one child stream per stage, derived from the root seed
    streams = np.random.SeedSequence(cfg.seed).spawn(len(CHAINS))
    meta = {
        "chain": cfg.chain,
        "space": name,
        "points": space.n,
        "entourage": tname,
        "entourage_pairs": len(t),
        "epsilon": cfg.epsilon,
        "seed": cfg.seed,
        "versions": {"coarse_lab": _version("artifact"), "numpy": np.__version__, "scipy": scipy.__version__},
    }
    if cfg.timestamp is not None:
        meta["timestamp"] = cfg.timestamp
    if cfg.chain == "witness-roundtrip":
        verdicts = _roundtrip(cfg, space, gen, t)
        return Report(meta, CHECK_COLUMNS, [v.row() for v in verdicts], verdicts)
    if cfg.chain == "nuclearity":
        rng = np.random.default_rng(streams[1])
        verdicts = _nuclearity(cfg, space, gen, t, rng)
        return Report(meta, CHECK_COLUMNS, [v.row() for v in verdicts], verdicts)
    rows, verdicts = _profile(cfg, name, space, gen)
    return Report(meta, PROFILE_COLUMNS, rows, verdicts)


def _cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def report_csv(r: Report) -> str:
    buf = _stdio.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(r.columns)
    for row in r.rows:
        writer.writerow([_cell(row[c]) for c in r.columns])
    return buf.getvalue()


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    return v


def report_json(r: Report) -> str:
    doc = {
        "metadata": r.metadata,
        "columns": list(r.columns),
        "rows": [{c: _json_safe(row[c]) for c in r.columns} for row in r.rows],
        "verdicts": [{k: _json_safe(v) for k, v in vd.row().items()} for vd in r.verdicts],
        "passed": r.passed,
    }
    return json.dumps(doc, indent=1, ensure_ascii=False) + "\n"


def emit_report(r: Report, fmt: str, path) -> None:
    """Write the report as UTF-8 with LF line endings."""
    if fmt == "csv":
        text = report_csv(r)
    elif fmt == "json":
        text = report_json(r)
    else:
        raise ConfigError(f"unknown report format {fmt!r}")
    Path(path).write_text(text, encoding="utf-8", newline="\n")
