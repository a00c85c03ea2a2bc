"""Run configuration assembled from the command line and an optional TOML file."""

from __future__ import annotations

import dataclasses
import tomllib
from typing import TYPE_CHECKING, Any

from . import const
from .assembly import QuadratureCfg, QuadratureMode
from .closed_form import KernelKind, ProblemParams
from .errors import DomainError
from .sign_region import Strategy
from .utils import SidedPoint, parse_sided

if TYPE_CHECKING:
    import argparse
    from pathlib import Path


def load_config_file(path: Path) -> dict[str, Any]:
    """Read ``key = value`` pairs from a TOML file, with dashes in keys turned into underscores.

    Raises:
        DomainError: the file is not valid TOML or holds nested tables.

    """
    try:
        with path.open("rb") as f:
            data = tomllib.load(f)
    except tomllib.TOMLDecodeError as exc:
        raise DomainError(f"cannot read {path}: {exc}") from None
    values = {}
    for key, value in data.items():
        if isinstance(value, dict):
            raise DomainError(f"{path}: tables are not supported ([{key}])")
        values[key.replace("-", "_")] = value
    return values


def parse_assignments(text: str) -> dict[str, float]:
    """Parse ``"m=0.3,M=0.2,T=1.3"`` into a dict."""
    values = {}
    for part in text.split(","):
        key, sep, value = part.partition("=")
        if not sep:
            raise DomainError(f"expected key=value, got {part!r}")
        try:
            values[key.strip()] = float(value)
        except ValueError:
            raise DomainError(f"{key.strip()} must be a number, got {value!r}") from None
    return values


def parse_point(text: str) -> tuple[float, float, float]:
    """Parse a ``--at`` value into ``(m, M, T)``."""
    values = parse_assignments(text)
    missing = {"m", "M", "T"} - values.keys()
    if missing:
        raise DomainError(f"--at needs m, M and T, missing {', '.join(sorted(missing))}")
    return values["m"], values["M"], values["T"]


@dataclasses.dataclass(frozen=True)
class LineSpec:
    """One coordinate held fixed, the other swept."""

    fixed: str
    value: float

    @classmethod
    def parse(cls, text: str) -> LineSpec:
        values = parse_assignments(text)
        if len(values) != 1 or not values.keys() <= {"t", "s"}:
            raise DomainError(f"--line takes t=VALUE or s=VALUE, got {text!r}")
        ((fixed, value),) = values.items()
        return cls(fixed, value)


@dataclasses.dataclass(frozen=True)
class SolverCfg:
    """Settings of the monotone iteration."""

    rhs: str
    lam: float = 0.0
    grid_n: int = const.SOLVER_GRID_N
    max_iter: int = const.SOLVER_MAX_ITER
    tol: float = const.SOLVER_TOL
    negative: bool = False
    literal_form: bool = False
    gate: bool = True


@dataclasses.dataclass(frozen=True)
class SweepCfg:
    """Lattice and strategy of a region sweep."""

    m_range: tuple[float, float]
    big_m_range: tuple[float, float]
    resolution: tuple[int, int] = (const.LATTICE_M, const.LATTICE_BIG_M)
    strategy: Strategy | None = None
    boundary: bool = False
    audit: bool = False

    def __post_init__(self) -> None:
        if min(self.resolution) < 0:
            raise DomainError("resolution must be non-negative")


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """Everything one subcommand needs."""

    command: str
    params: ProblemParams | None = None
    kernel: KernelKind = KernelKind.REFLECTION_PIECEWISE
    quadrature: QuadratureCfg = dataclasses.field(default_factory=QuadratureCfg)
    t_points: tuple[SidedPoint, ...] = ()
    s_points: tuple[SidedPoint, ...] = ()
    line: LineSpec | None = None
    line_points: int = 201
    integrate: bool = False
    sweep: SweepCfg | None = None
    solver: SolverCfg | None = None
    check_points: tuple[tuple[float, float, float], ...] = tuple(const.CHECK_POINTS)
    check_names: tuple[str, ...] | None = None
    seed: int = const.CHECK_SEED
    samples: int = const.CHECK_SAMPLES
    output: Path | None = None
    fmt: str = "csv"
    threads: int | None = None

    def __post_init__(self) -> None:
        if self.command in {"eval", "matrix", "solve"} and self.params is None:
            raise DomainError(f"{self.command} needs -m")
        if self.command == "region" and self.sweep is None:
            raise DomainError("region needs --m-range and --M-range")
        if self.command == "solve" and self.solver is None:
            raise DomainError("solve needs --f")
        if self.fmt not in {"csv", "json"}:
            raise DomainError(f"unknown format {self.fmt!r}")

    @classmethod
    def from_namespace(cls, ns: argparse.Namespace) -> RunConfig:  # noqa: C901
        """Build a config from parsed arguments; options a subcommand lacks keep defaults."""
        get = vars(ns).get
        values: dict[str, Any] = {"command": ns.command}
        if get("m") is not None:
            values["params"] = ProblemParams(ns.m, get("big_m") or 0.0, ns.T)
        if get("kernel"):
            values["kernel"] = KernelKind(ns.kernel)
        values["quadrature"] = QuadratureCfg(
            rel_tol=get("quad_rel_tol") or const.QUAD_REL_TOL,
            abs_tol=get("quad_abs_tol") or const.QUAD_ABS_TOL,
            mode=QuadratureMode(get("quadrature") or QuadratureMode.ANALYTIC_PREFERRED.value),
        )
        if get("t"):
            values["t_points"] = tuple(parse_sided(x) for x in ns.t)
        if get("s"):
            values["s_points"] = tuple(parse_sided(x) for x in ns.s)
        if get("line"):
            values["line"] = LineSpec.parse(ns.line)
        for key in ("line_points", "integrate", "seed", "samples", "threads"):
            if get(key) is not None:
                values[key] = get(key)
        if ns.command == "region":
            values["sweep"] = SweepCfg(
                m_range=(ns.m_range[0], ns.m_range[1]),
                big_m_range=(ns.big_m_range[0], ns.big_m_range[1]),
                resolution=(ns.resolution[0], ns.resolution[1]),
                strategy=Strategy(ns.strategy) if ns.strategy else None,
                boundary=ns.boundary,
                audit=ns.audit,
            )
        if ns.command == "solve" and get("f"):
            values["solver"] = SolverCfg(
                rhs=ns.f,
                lam=ns.lam,
                grid_n=ns.n1,
                max_iter=ns.iters,
                tol=ns.tol,
                negative=ns.negative,
                literal_form=ns.literal,
                gate=not ns.no_gate,
            )
        if get("at"):
            values["check_points"] = tuple(parse_point(x) for x in ns.at)
        if get("only"):
            values["check_names"] = tuple(ns.only)
        if get("output"):
            values["output"] = ns.output
        if get("format"):
            values["fmt"] = ns.format
        return cls(**values)
