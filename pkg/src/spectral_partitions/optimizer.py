"""Projected gradient descent on multiphase densities.

Each iteration takes the negative cost gradient as direction, finds a step
with an expanding linesearch (multiply the step by ``omega`` while the
projected trial keeps lowering the cost) and keeps the last improving trial.
If the very first step ``gamma0`` does not improve, the step is halved up to
``max_halvings`` times before the run is declared stationary; a pure
expansion search otherwise stalls next to a minimizer.

The run stops when ``gamma * ||grad||_inf < eps`` or after ``p_max``
iterations.  Accepted costs never increase.
"""
from __future__ import annotations

import csv
import dataclasses
import enum
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import fileio
from .eigensolver import PenalizedOperator, lu_preconditioner
from .errors import ConvergenceError
from .grid import BC, GridSpec
from .phases import PhaseSystem, argmax_partition, random_init
from .relaxed import CostBreakdown, evaluate_phases, gradient_from_results

log = logging.getLogger(__name__)


class Termination(str, enum.Enum):
    STEP = "StepCriterion"
    CAP = "IterationCap"


@dataclass(frozen=True)
class OptimizerConfig:
    grid: GridSpec
    h: int
    alpha: float
    k: int = 1
    C: float = 1e4
    gamma0: float = 1e-4
    omega: float = 2.0
    eps: float = 1e-6
    p_max: int = 200
    seed: int = 0
    eig_tol: float = 1e-8
    max_expansions: int = 40
    max_halvings: int = 20
    # relative slack below which a cost decrease counts as solver noise
    improve_tol: float = 1e-12
    # stop expanding once successive projected trials differ by less than this
    saturation_tol: float = 1e-4
    # refactor a phase's preconditioner once its density moved by more than this
    precond_reuse: float = 0.0
    # start each linesearch at the previous accepted step instead of gamma0
    adaptive_step: bool = False
    checkpoint_every: int = 25
    allow_higher: bool = False

    def __post_init__(self):
        if self.h < 1:
            raise ValueError("h must be at least 1")
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if not self.C > 0:
            raise ValueError("C must be positive")
        if not self.gamma0 > 0:
            raise ValueError("gamma0 must be positive")
        if not self.omega > 1:
            raise ValueError("omega must exceed 1")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.p_max < 0:
            raise ValueError("p_max must be nonnegative")
        if not self.eig_tol > 0:
            raise ValueError("eig_tol must be positive")
        if self.precond_reuse < 0:
            raise ValueError("precond_reuse must be nonnegative")

    def replace(self, **changes) -> "OptimizerConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in dataclasses.fields(self) if f.name != "grid"}
        g = self.grid
        d.update(width=g.width, height=g.height, nx=g.nx, ny=g.ny, bc=g.bc.value, x0=g.x0, y0=g.y0)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "OptimizerConfig":
        d = dict(d)
        grid_keys = ("width", "height", "nx", "ny", "bc", "x0", "y0")
        gargs = {k: d.pop(k) for k in grid_keys if k in d}
        missing = {"width", "height", "nx", "ny"} - set(gargs)
        if missing:
            raise ValueError(f"config lacks grid keys {sorted(missing)}")
        gargs.setdefault("bc", BC.DIRICHLET)
        unknown = set(d) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        return cls(grid=GridSpec(**gargs), **d)


_TYPES = {
    "width": float, "height": float, "nx": int, "ny": int, "bc": str, "x0": float, "y0": float,
    "h": int, "alpha": float, "k": int, "C": float, "gamma0": float, "omega": float, "eps": float,
    "p_max": int, "seed": int, "eig_tol": float, "max_expansions": int, "max_halvings": int,
    "improve_tol": float, "saturation_tol": float, "precond_reuse": float, "adaptive_step": bool, "checkpoint_every": int,
}


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_config_text(text: str) -> OptimizerConfig:
    """Parse ``key = value`` lines (``#`` starts a comment)."""
    d = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key == "allow_higher" or _TYPES.get(key) is bool:
            d[key] = _parse_bool(value)
        elif key in _TYPES:
            typ = _TYPES[key]
            d[key] = int(float(value)) if typ is int and "e" in value.lower() else typ(value)
        else:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
    return OptimizerConfig.from_dict(d)


def load_config(path) -> OptimizerConfig:
    return parse_config_text(Path(path).read_text())


def format_config(cfg: OptimizerConfig) -> str:
    return "".join(f"{k} = {v}\n" for k, v in cfg.to_dict().items())


@dataclass
class IterationRecord:
    iteration: int
    cost: CostBreakdown
    gamma: float
    grad_sup: float
    improved: bool = True
    evaluations: int = 0


@dataclass
class RunLog:
    config: OptimizerConfig
    records: list = field(default_factory=list)
    termination: Termination | None = None
    final: PhaseSystem | None = None

    @property
    def costs(self) -> np.ndarray:
        return np.array([r.cost.total for r in self.records])

    @property
    def final_cost(self) -> CostBreakdown:
        return self.records[-1].cost

    def labels(self) -> np.ndarray:
        return argmax_partition(self.final)

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CostBreakdown.csv_header(self.config.h) + ["gamma", "grad_sup", "improved", "evaluations"])
        for r in self.records:
            w.writerow(r.cost.csv_row(r.iteration) + [repr(r.gamma), repr(r.grad_sup), int(r.improved), r.evaluations])
        w.writerow([f"# termination={self.termination.value if self.termination else 'none'}"])
        return buf.getvalue()

    def write(self, out_dir, run_id: str = "run") -> dict:
        """Write the CSV trace, label rasters and the final checkpoint."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "csv": out / f"{run_id}.csv",
            "ppm": out / f"{run_id}.ppm",
            "pgm": out / f"{run_id}.pgm",
            "checkpoint": out / f"{run_id}_phases.bin",
        }
        paths["csv"].write_text(self.csv_text())
        labels = self.labels()
        fileio.write_ppm(paths["ppm"], labels, self.config.h + 1)
        fileio.write_pgm(paths["pgm"], labels, self.config.h + 1)
        self.final.save(paths["checkpoint"])
        return paths


@dataclass
class LinesearchResult:
    gamma: float
    candidate: PhaseSystem
    cost: float
    payload: object
    improved: bool
    trials: int


class PreconditionerCache:
    """Per-phase LU preconditioners that are rebuilt only when the phase
    density has moved more than ``reuse`` (max nodal change) away from the
    density they were factored for.  ``reuse = 0`` factors every time."""

    def __init__(self, cfg: OptimizerConfig):
        self.cfg = cfg
        self.entries = [None] * cfg.h
        self.factorizations = 0

    def get(self, l: int, phi: np.ndarray):
        e = self.entries[l]
        if e is not None and np.max(np.abs(phi - e[0])) <= self.cfg.precond_reuse:
            return e[1]
        solve = lu_preconditioner(PenalizedOperator(self.cfg.grid, phi, self.cfg.C))
        self.entries[l] = (phi.copy(), solve)
        self.factorizations += 1
        return solve

    def for_system(self, ps: PhaseSystem) -> list:
        return [self.get(l, ps.fields[l]) for l in range(ps.h)]


def _default_evaluator(cfg: OptimizerConfig, warm=None, cache: PreconditionerCache | None = None) -> Callable:
    def evaluate(ps: PhaseSystem):
        pre = None if cache is None else cache.for_system(ps)
        ev = evaluate_phases(ps, cfg.C, cfg.k, cfg.alpha, cfg.eig_tol, cfg.seed, warm=warm,
                             preconditioners=pre, allow_higher=cfg.allow_higher)
        return ev.breakdown.total, ev

    return evaluate


def _improves(c: float, ref: float, cfg: OptimizerConfig) -> bool:
    return c < ref - cfg.improve_tol * max(1.0, abs(ref))


def linesearch(current: PhaseSystem, direction, cfg: OptimizerConfig, *, evaluate: Callable | None = None,
               current_cost: float | None = None, gamma0: float | None = None) -> LinesearchResult:
    """Expanding linesearch along ``direction`` from ``current``.

    ``evaluate(ps) -> (total, payload)`` defaults to the multiphase cost.
    Returns the last improving trial, or the first trial flagged as
    non-improving when no step helps.  Because the projection is invariant
    under rescaling, trials converge as the step grows; the expansion also
    stops once two successive trials differ by less than ``saturation_tol``.
    """
    if evaluate is None:
        evaluate = _default_evaluator(cfg)
    direction = np.asarray(direction, dtype=float)
    if direction.shape != current.fields.shape:
        raise ValueError("direction does not match the phase system")
    if current_cost is None:
        current_cost, _ = evaluate(current)
    gamma = cfg.gamma0 if gamma0 is None else gamma0
    c_prev = current_cost
    best = None
    first = None
    trials = 0
    while trials <= cfg.max_expansions:
        cand = PhaseSystem.from_raw(current.grid, current.fields + gamma * direction)
        c, payload = evaluate(cand)
        trials += 1
        if first is None:
            first = (gamma, cand, c, payload)
        if not _improves(c, c_prev, cfg):
            break
        saturated = best is not None and np.max(np.abs(cand.fields - best[1].fields)) < cfg.saturation_tol
        best = (gamma, cand, c, payload)
        c_prev = c
        if saturated:
            break
        gamma *= cfg.omega
    if best is None:
        return LinesearchResult(*first, improved=False, trials=trials)
    return LinesearchResult(*best, improved=True, trials=trials)


def optimize(cfg: OptimizerConfig, init: PhaseSystem | None = None, *, out_dir=None, run_id: str = "run",
             callback: Callable | None = None) -> RunLog:
    """Run the projected gradient descent and return the full trace.

    With ``out_dir`` a checkpoint is written every ``checkpoint_every``
    iterations and the CSV/raster/checkpoint outputs at exit (also when an
    eigensolve fails, before the error propagates).
    """
    grid = cfg.grid
    if init is None:
        phases = random_init(grid, cfg.h, cfg.seed)
    else:
        if init.grid != grid:
            raise ValueError("initial phases live on a different grid")
        if init.h != cfg.h:
            raise ValueError(f"initial phases have h={init.h}, config has h={cfg.h}")
        phases = PhaseSystem.from_raw(grid, init.fields)
    phases.validate()
    runlog = RunLog(cfg)
    ckpt = None if out_dir is None else Path(out_dir) / f"{run_id}_phases.bin"
    if ckpt is not None:
        ckpt.parent.mkdir(parents=True, exist_ok=True)

    cache = PreconditionerCache(cfg)
    _, ev = _default_evaluator(cfg, None, cache)(phases)
    cost = ev.breakdown.total
    grad = gradient_from_results(phases, ev.results, cfg.alpha)
    runlog.records.append(IterationRecord(0, ev.breakdown, 0.0, float(np.abs(grad).max()), True, 1))
    termination = Termination.CAP
    start = cfg.gamma0

    try:
        for p in range(1, cfg.p_max + 1):
            grad_sup = float(np.abs(grad).max())
            direction = -grad
            warm = [r.block for r in ev.results]
            evaluate = _default_evaluator(cfg, warm, cache)
            ls, evaluations = _search(phases, direction, cfg, evaluate, cost, start)
            if ls is None and start != cfg.gamma0:
                ls, more = _search(phases, direction, cfg, evaluate, cost, cfg.gamma0)
                evaluations += more
            if ls is None:
                log.info("iteration %d: no decreasing step, stopping", p)
                termination = Termination.STEP
                break
            if cfg.adaptive_step:
                start = ls.gamma
            phases, cost, ev = ls.candidate, ls.cost, ls.payload
            grad = gradient_from_results(phases, ev.results, cfg.alpha)
            runlog.records.append(IterationRecord(p, ev.breakdown, ls.gamma, grad_sup, True, evaluations))
            if callback is not None:
                callback(runlog.records[-1], phases)
            if ckpt is not None and cfg.checkpoint_every and p % cfg.checkpoint_every == 0:
                phases.save(ckpt)
            if ls.gamma * grad_sup < cfg.eps:
                termination = Termination.STEP
                break
    except ConvergenceError:
        if ckpt is not None:
            phases.save(ckpt)
        raise

    runlog.termination = termination
    runlog.final = phases
    if out_dir is not None:
        runlog.write(out_dir, run_id)
    return runlog


def _search(phases, direction, cfg, evaluate, cost, gamma0):
    """Expanding linesearch from ``gamma0``, then halvings; ``(None, n)`` if nothing improves."""
    ls = linesearch(phases, direction, cfg, evaluate=evaluate, current_cost=cost, gamma0=gamma0)
    if ls.improved:
        return ls, ls.trials
    bt = _backtrack(phases, direction, cfg, evaluate, cost, gamma0)
    return bt, ls.trials + (cfg.max_halvings if bt is None else bt.trials)


def _backtrack(phases, direction, cfg, evaluate, cost, gamma0):
    gamma = gamma0
    for i in range(cfg.max_halvings):
        gamma *= 0.5
        cand = PhaseSystem.from_raw(phases.grid, phases.fields + gamma * direction)
        c, payload = evaluate(cand)
        if _improves(c, cost, cfg):
            return LinesearchResult(gamma, cand, c, payload, True, i + 1)
    return None
