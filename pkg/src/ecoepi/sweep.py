"""One-parameter sweeps and bifurcation tables.

Every grid point is analysed independently (equilibria, linear stability and
optionally a simulation), so points can be evaluated in a process pool while
rows are always returned in grid order.  Adjacent rows whose feasibility or
stability booleans differ are reported as transitions, and
:func:`refine_transition` bisects such a cell down to the threshold.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .equilibria import EquilibriumId, all_equilibria
from .integrate import AttractorKind, SolverOptions, detect_attractor, simulate
from .model import PARAM_NAMES, ModelDomainError, ModelParams, StateReformed
from .stability import Classification, classify

__all__ = [
    "SweepSpec",
    "EquilibriumCell",
    "BifurcationRow",
    "Transition",
    "SweepError",
    "run_sweep",
    "evaluate_point",
    "transitions",
    "refine_transition",
    "default_init",
]


class SweepError(ModelDomainError):
    pass


def default_init(p: ModelParams) -> StateReformed:
    return StateReformed(0.5, math.sqrt(p.K) / 2, 0.1)


@dataclass(frozen=True)
class SweepSpec:
    base: ModelParams
    parameter: str
    values: tuple[float, ...]
    with_simulation: bool = False
    sim_opts: SolverOptions = SolverOptions()
    init: StateReformed | None = None  # None: default interior start at each point

    def __post_init__(self):
        if self.parameter not in PARAM_NAMES:
            raise SweepError(f"unknown sweep parameter {self.parameter!r}; expected one of {', '.join(PARAM_NAMES)}")
        values = tuple(float(v) for v in self.values)
        if not values:
            raise SweepError("sweep grid is empty")
        if any(not math.isfinite(v) for v in values):
            raise SweepError("sweep grid must be finite")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise SweepError("sweep grid must be strictly ascending")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_range(cls, base, parameter, start, stop, step, **kw):
        """Grid ``start, start + step, ...`` up to ``stop`` inclusive (within 1e-9 step)."""
        if not step > 0:
            raise SweepError("step must be positive")
        n = int(math.floor((stop - start) / step + 1e-9))
        return cls(base, parameter, tuple(start + k * step for k in range(n + 1)), **kw)

    def params_at(self, value) -> ModelParams:
        return self.base.with_(**{self.parameter: value})


@dataclass(frozen=True)
class EquilibriumCell:
    id: EquilibriumId
    feasible: bool
    stable: bool
    max_real_part: float | None
    classification: str | None
    feasibility_margin: float

    def to_dict(self):
        return {"id": self.id.value, "feasible": self.feasible, "stable": self.stable,
                "max_real_part": self.max_real_part, "classification": self.classification,
                "feasibility_margin": self.feasibility_margin}


@dataclass(frozen=True)
class BifurcationRow:
    value: float
    cells: dict = field(default_factory=dict)  # EquilibriumId -> EquilibriumCell
    attractor: str | None = None
    flags: tuple[str, ...] = ()
    error: str | None = None

    @property
    def errored(self):
        return self.error is not None


@dataclass(frozen=True)
class Transition:
    """A flip of ``quantity`` ('feasible', 'stable' or 'attractor') between rows ``lo`` and ``lo + 1``."""

    equilibrium: EquilibriumId | None
    quantity: str
    lo: int
    lo_value: float
    hi_value: float

    @property
    def flag(self):
        return "attractor" if self.equilibrium is None else f"{self.equilibrium.value}.{self.quantity}"


def _cell(p, records):
    # E5 may have several roots: report the most stable feasible one, else the closest to feasible.
    feasible = [r for r in records if r.feasible]
    if not feasible:
        margin = max((r.feasibility.margin for r in records if r.feasibility.conditions), default=-math.inf)
        return EquilibriumCell(records[0].id, False, False, None, None, margin)
    verdicts = [(classify(p, r), r) for r in feasible]
    verdict, rec = min(verdicts, key=lambda vr: vr[0].max_real_part)
    return EquilibriumCell(rec.id, True, verdict.classification is Classification.STABLE,
                           verdict.max_real_part, verdict.classification.value, rec.feasibility.margin)


def evaluate_point(spec: SweepSpec, value: float) -> BifurcationRow:
    """Analyse one grid value; domain errors produce an errored row instead of raising."""
    try:
        p = spec.params_at(value)
        by_id = {}
        for rec in all_equilibria(p):
            by_id.setdefault(rec.id, []).append(rec)
        cells = {eq_id: _cell(p, recs) for eq_id, recs in by_id.items()}
        kind = None
        if spec.with_simulation:
            y0 = spec.init if spec.init is not None else default_init(p)
            kind = detect_attractor(simulate(p, y0, spec.sim_opts)).kind.value
        return BifurcationRow(value, cells, kind)
    except ModelDomainError as exc:
        return BifurcationRow(value, {}, None, (), f"{type(exc).__name__}: {exc}")


def _evaluate(args):
    return evaluate_point(*args)


def transitions(rows) -> list[Transition]:
    """Boolean flips between adjacent non-errored rows, in grid order."""
    out = []
    for i in range(len(rows) - 1):
        a, b = rows[i], rows[i + 1]
        if a.errored or b.errored:
            continue
        for eq_id in EquilibriumId:
            ca, cb = a.cells.get(eq_id), b.cells.get(eq_id)
            if ca is None or cb is None:
                continue
            for quantity in ("feasible", "stable"):
                if getattr(ca, quantity) != getattr(cb, quantity):
                    out.append(Transition(eq_id, quantity, i, a.value, b.value))
        if a.attractor is not None and b.attractor is not None and a.attractor != b.attractor:
            out.append(Transition(None, "attractor", i, a.value, b.value))
    return out


def _flag_rows(rows):
    flags = [[] for _ in rows]
    for t in transitions(rows):
        flags[t.lo + 1].append(t.flag)
    return [BifurcationRow(r.value, r.cells, r.attractor, tuple(f), r.error) for r, f in zip(rows, flags)]


def run_sweep(spec: SweepSpec, workers: int | None = None) -> list[BifurcationRow]:
    """One row per grid value, in grid order.

    A row's ``flags`` name the booleans that changed relative to the previous
    row, e.g. ``"E3.stable"`` or ``"attractor"``.  With ``workers > 1`` the
    points are evaluated in a process pool; the result does not depend on it.
    """
    jobs = [(spec, v) for v in spec.values]
    if workers and workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_evaluate, jobs))
    else:
        rows = [_evaluate(j) for j in jobs]
    return _flag_rows(rows)


def _predicate(spec, eq_id, quantity):
    def at(value):
        row = evaluate_point(SweepSpec(spec.base, spec.parameter, (value,)), value)
        if row.errored:
            raise SweepError(f"evaluation failed at {spec.parameter}={value}: {row.error}")
        cell = row.cells.get(eq_id)
        return cell is not None and getattr(cell, quantity)
    return at


def refine_transition(spec: SweepSpec, transition: Transition, rel_tol: float = 1e-7) -> float:
    """Bisect a flagged cell to an interval below ``rel_tol * max(1, |a|, |b|)``.

    Stability flips are bisected on the sign of max Re(lambda) (with the
    marginal band counted as not stable), feasibility flips on the sign of
    the smallest feasibility margin.  Returns the interval midpoint.
    """
    if transition.quantity not in ("feasible", "stable") or transition.equilibrium is None:
        raise SweepError(f"cannot refine a {transition.quantity} transition")
    test = _predicate(spec, transition.equilibrium, transition.quantity)
    lo, hi = transition.lo_value, transition.hi_value
    v_lo, v_hi = test(lo), test(hi)
    if v_lo == v_hi:
        raise SweepError(f"cell [{lo}, {hi}] does not bracket a {transition.flag} flip")
    width = rel_tol * max(1.0, abs(lo), abs(hi))
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if test(mid) == v_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
