"""Mesh-refinement studies: errors and rates on a doubling sequence of meshes."""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field, fields

import numpy as np

from .assembly import apply_dirichlet, assemble, solve_cg
from .exact import DEFAULT_AXIS, elliptic_power_solution
from .mesh import build_dof_map, build_mesh, normalize_space_kind
from .norms import error_norms, interpolate
from .space import build_space

MODES = ("interp", "solve")
DESK_MAX_N = 160


@dataclass
class ConvergenceConfig:
    space: str = "bilinear"
    mode: str = "interp"
    n_start: int = 10
    levels: int = 5
    lambda_minus: float = 1.0
    lambda_plus: float = 5.0
    mu_minus: float = 2.0
    mu_plus: float = 10.0
    a: float = DEFAULT_AXIS
    b: float = DEFAULT_AXIS
    alpha1: float = 5.0
    alpha2: float = 7.0
    quad_subcells: int = 16
    domain: tuple = (-1.0, 1.0, -1.0, 1.0)
    rel_tol: float = 1e-11
    F: str | None = None
    allow_large: bool = False

    def __post_init__(self):
        self.space = normalize_space_kind(self.space)
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.n_start < 2 or self.levels < 1:
            raise ValueError("need n_start >= 2 and levels >= 1")
        if self.quad_subcells < 8:
            raise ValueError("quad_subcells must be at least 8")
        if max(self.sizes) > DESK_MAX_N and not self.allow_large:
            raise ValueError(f"meshes finer than n={DESK_MAX_N} need allow_large")

    @property
    def sizes(self) -> list[int]:
        return [self.n_start * 2**k for k in range(self.levels)]

    @property
    def mesh_kind(self) -> str:
        return "triangular" if self.space == "linear" else "rectangular"


@dataclass
class ConvergenceRow:
    n: int
    h: float
    L2: float
    L2_rate: float | None
    H1: float
    H1_rate: float | None
    H2: float | None = None
    H2_rate: float | None = None
    n_dofs: int = 0
    n_interface: int = 0
    iterations: int | None = None
    seconds: float = 0.0


_INT_FIELDS = {"n", "n_dofs", "n_interface", "iterations"}


@dataclass
class ConvergenceRecord:
    mode: str
    space: str
    rows: list = field(default_factory=list)

    def column(self, name: str) -> list:
        return [getattr(r, name) for r in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# mode={self.mode} space={self.space}\n")
        names = [f.name for f in fields(ConvergenceRow)]
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(names)
        for r in self.rows:
            w.writerow(["" if getattr(r, k) is None else repr(getattr(r, k)) for k in names])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ConvergenceRecord":
        lines = text.splitlines()
        meta = dict(item.split("=", 1) for item in lines[0].lstrip("# ").split())
        reader = csv.DictReader(lines[1:])
        rows = []
        for rec in reader:
            kw = {}
            for k, v in rec.items():
                if v == "":
                    kw[k] = None
                elif k in _INT_FIELDS:
                    kw[k] = int(v)
                else:
                    kw[k] = float(v)
            rows.append(ConvergenceRow(**kw))
        return cls(meta["mode"], meta["space"], rows)

    def to_markdown(self) -> str:
        cols = ["h", "L2 error", "rate", "H1 error", "rate"]
        body = []
        for r in self.rows:
            body.append(
                [
                    f"1/{r.n}" if self._unit_domain_width(r) else f"{r.h:.4g}",
                    f"{r.L2:.4E}",
                    "" if r.L2_rate is None else f"{r.L2_rate:.4f}",
                    f"{r.H1:.4E}",
                    "" if r.H1_rate is None else f"{r.H1_rate:.4f}",
                ]
            )
        widths = [max(len(c), *(len(b[i]) for b in body)) if body else len(c) for i, c in enumerate(cols)]
        fmt = lambda cells: "| " + " | ".join(c.rjust(w) for c, w in zip(cells, widths)) + " |"  # noqa: E731
        out = [f"{self.space}, {'interpolation' if self.mode == 'interp' else 'Galerkin solution'}", ""]
        out.append(fmt(cols))
        out.append("|" + "|".join("-" * (w + 1) + ":" for w in widths) + "|")
        out.extend(fmt(b) for b in body)
        return "\n".join(out) + "\n"

    @staticmethod
    def _unit_domain_width(r) -> bool:
        # rows are labelled 1/n when the domain has width 2 (h = 2/n)
        return math.isclose(r.h * r.n, 2.0, rel_tol=1e-12)


def convergence_rates(errors, hs) -> list:
    """``log(e_{k-1} / e_k) / log(h_{k-1} / h_k)``; log2 of the ratio when h halves."""
    rates = [None]
    for k in range(1, len(errors)):
        e0, e1 = errors[k - 1], errors[k]
        if e0 is None or e1 is None or e0 <= 0 or e1 <= 0:
            rates.append(None)
        else:
            rates.append(math.log(e0 / e1) / math.log(hs[k - 1] / hs[k]))
    return rates


def run_level(config: ConvergenceConfig, n: int, exact=None) -> ConvergenceRow:
    """One mesh of the study; raises the stage's IFEError on failure."""
    t0 = time.perf_counter()
    if exact is None:
        exact = _exact(config)
    mesh = build_mesh(config.domain, n, config.mesh_kind)
    dof_map = build_dof_map(mesh, config.space)
    space = build_space(dof_map, exact.mat, config.F)
    iterations = None
    if config.mode == "interp":
        field_ = interpolate(exact.u, dof_map)
    else:
        system = assemble(space, exact.f, rhs_k=config.quad_subcells)
        system = apply_dirichlet(system, exact.u)
        field_ = solve_cg(system, rel_tol=config.rel_tol)
        iterations = field_.info["iterations"]
    err = error_norms(field_, exact, space, k_subcells=config.quad_subcells)
    return ConvergenceRow(
        n=n,
        h=mesh.h,
        L2=err.L2,
        L2_rate=None,
        H1=err.H1,
        H1_rate=None,
        H2=err.H2,
        n_dofs=dof_map.n_dofs,
        n_interface=len(space.shapes),
        iterations=iterations,
        seconds=time.perf_counter() - t0,
    )


def _exact(config):
    return elliptic_power_solution(
        config.a,
        config.b,
        (config.alpha1, config.alpha2),
        config.lambda_minus,
        config.lambda_plus,
        config.mu_minus,
        config.mu_plus,
    )


def run_convergence(config: ConvergenceConfig, progress=None) -> ConvergenceRecord:
    """Run every mesh of ``config.sizes`` and fill in the rates."""
    exact = _exact(config)
    rows = []
    for n in config.sizes:
        row = run_level(config, n, exact)
        rows.append(row)
        if progress is not None:
            progress(row)
    hs = [r.h for r in rows]
    for name in ("L2", "H1", "H2"):
        rates = convergence_rates([getattr(r, name) for r in rows], hs)
        for r, rate in zip(rows, rates):
            setattr(r, name + "_rate", rate)
    return ConvergenceRecord(config.mode, config.space, rows)


def rates_array(record: ConvergenceRecord, name: str) -> np.ndarray:
    return np.array([np.nan if v is None else v for v in record.column(name + "_rate")])
