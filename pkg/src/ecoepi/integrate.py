"""Adaptive time integration and long-run attractor classification.

The reformed system is integrated by default: it is polynomial, so prey
extinction (S + I -> 0) is not a singularity there.  Integration in the
original populations is provided for cross-checking only and becomes
ill-conditioned as S + I approaches zero.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .model import ModelDomainError, ModelParams, StateOriginal, StateReformed, original_field, reformed_field

__all__ = [
    "SolverOptions",
    "Termination",
    "Trajectory",
    "AttractorKind",
    "AttractorReport",
    "IntegrationError",
    "simulate",
    "simulate_original",
    "detect_attractor",
    "dopri5",
    "EXTINCTION_T",
    "BLOWUP",
]

EXTINCTION_T = 1e-10
BLOWUP = 1e12
BOUNDARY_CLIP = 1e-12


class IntegrationError(ModelDomainError):
    pass


@dataclass(frozen=True)
class SolverOptions:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_step: float = math.inf
    t_end: float = 5000.0
    dense_output_stride: float | None = None  # default t_end / 4000

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "max_step", "t_end"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and value > 0) or math.isnan(value):
                raise IntegrationError(f"{name} must be positive, got {value!r}")
        if not math.isfinite(self.t_end):
            raise IntegrationError("t_end must be finite")
        if self.dense_output_stride is not None and not self.dense_output_stride > 0:
            raise IntegrationError(f"dense_output_stride must be positive, got {self.dense_output_stride!r}")

    @property
    def stride(self) -> float:
        return self.dense_output_stride if self.dense_output_stride is not None else self.t_end / 4000


class Termination(str, enum.Enum):
    COMPLETED = "completed"
    EXTINCTION = "extinction_event"
    BLOWUP = "blowup_event"


@dataclass(frozen=True)
class Trajectory:
    """Sampled solution.  ``states`` has one row per time, columns in ``coordinates`` order."""

    times: np.ndarray
    states: np.ndarray
    termination: Termination = Termination.COMPLETED
    coordinates: str = "reformed"
    accepted_steps: int = 0
    rejected_steps: int = 0

    def __len__(self):
        return len(self.times)

    @property
    def completed(self):
        return self.termination is Termination.COMPLETED

    @property
    def final(self):
        return self.states[-1]

    def reformed(self) -> np.ndarray:
        """Rows of ``(A, T, U)``."""
        if self.coordinates == "reformed":
            return self.states
        S, I, P = self.states.T
        N = S + I
        with np.errstate(divide="ignore", invalid="ignore"):
            T = np.sqrt(N)
            return np.column_stack([S / N, T, P / T])

    def original(self) -> np.ndarray:
        """Rows of ``(S, I, P)``; ``I`` is exactly 0 where ``A == 1``."""
        if self.coordinates == "original":
            return self.states
        A, T, U = self.states.T
        T2 = T * T
        I = np.where(A == 1.0, 0.0, np.maximum((1.0 - A) * T2, 0.0))
        return np.column_stack([A * T2, I, U * T])


# Dormand-Prince 5(4) tableau, with the continuous extension of Hairer & Wanner.
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)
_D = (-12715105075 / 11282082432, 0.0, 87487479700 / 32700410799, -10690763975 / 1880347072,
      701980252875 / 199316789632, -1453857185 / 822651844, 69997945 / 29380423)

# PI step control constants.
_BETA = 0.04
_EXPO = 0.2 - 0.75 * _BETA
_SAFE = 0.9
_FAC_MIN = 0.2
_FAC_MAX = 10.0


def _norm(v, sc):
    return math.sqrt(float(np.mean((v / sc) ** 2)))


def _initial_step(fun, t, y, f0, rtol, atol, max_step):
    sc = atol + rtol * np.abs(y)
    d0, d1 = _norm(y, sc), _norm(f0, sc)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = y + h0 * f0
    d2 = _norm(fun(t + h0, y1) - f0, sc) / h0
    top = max(d1, d2)
    h1 = max(1e-6, h0 * 1e-3) if top <= 1e-15 else (0.01 / top) ** 0.2
    return min(100 * h0, h1, max_step)


def dopri5(fun, t0, y0, t_end, sample_times, rtol, atol, max_step=math.inf, event=None, post=None,
           admissible=None):
    """Integrate ``y' = fun(t, y)`` and return the solution at ``sample_times``.

    Parameters
    ----------
    fun : callable ``(t, y) -> ndarray``.
    sample_times : ascending times in ``[t0, t_end]`` at which the dense
        output is evaluated.
    event : optional ``y -> Termination | None`` checked after each accepted step.
    post : optional ``y -> y`` projection applied after each accepted step.
    admissible : optional ``y -> bool``; a step whose end point or dense
        samples leave the domain is rejected and retried with half the step.

    Returns
    -------
    times, states, termination, accepted, rejected
        On an event the integration stops; samples up to the event time are
        kept and the terminal state is appended.
    """
    y = np.array(y0, dtype=float)
    t = float(t0)
    k = [None] * 7
    k[0] = fun(t, y)
    h = _initial_step(fun, t, y, k[0], rtol, atol, max_step)
    facold = 1e-4
    samples_t, samples_y = [], []
    idx = 0
    n_samples = len(sample_times)
    while idx < n_samples and sample_times[idx] <= t:
        samples_t.append(sample_times[idx])
        samples_y.append(y.copy())
        idx += 1
    termination = Termination.COMPLETED
    accepted = rejected = 0
    span = abs(t_end - t0)

    while t < t_end:
        if h < 1e-14 * max(1.0, abs(t)):
            raise IntegrationError(f"step size underflow at t={t}")
        last = False
        if t + h >= t_end or t + 1.01 * h >= t_end:
            h = t_end - t
            last = True
        for s in range(1, 7):
            acc = y.copy()
            for j, a in enumerate(_A[s]):
                if a:
                    acc += (h * a) * k[j]
            if s == 6:
                y_new = acc
            k[s] = fun(t + _C[s] * h, acc)
        err_vec = h * sum(e * kj for e, kj in zip(_E, k) if e)
        sc = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = _norm(err_vec, sc)
        if not math.isfinite(err):
            err = math.inf

        if err <= 1.0:
            t_new = t_end if last else t + h
            dense = []
            if idx < n_samples and sample_times[idx] <= t_new:
                ydiff = y_new - y
                bspl = h * k[0] - ydiff
                r4 = ydiff - h * k[6] - bspl
                r5 = h * sum(d * kj for d, kj in zip(_D, k) if d)
                j = idx
                while j < n_samples and sample_times[j] <= t_new:
                    th = (sample_times[j] - t) / h
                    th1 = 1.0 - th
                    dense.append(y + th * (ydiff + th1 * (bspl + th * (r4 + th1 * r5))))
                    j += 1
            if admissible is not None and not all(map(admissible, [y_new, *dense])):
                rejected += 1
                h *= 0.5
                continue
            accepted += 1
            for sample in dense:
                samples_t.append(sample_times[idx])
                samples_y.append(sample if post is None else post(sample))
                idx += 1
            k[0] = k[6]
            if post is not None:
                projected = post(y_new.copy())
                if not np.array_equal(projected, y_new):
                    y_new = projected
                    k[0] = fun(t_new, y_new)
            t, y = t_new, y_new
            if event is not None:
                hit = event(y)
                if hit is not None:
                    termination = hit
                    break
            fac11 = err ** _EXPO if err > 0 else 0.0
            fac = fac11 / facold ** _BETA
            fac = max(1.0 / _FAC_MAX, min(1.0 / _FAC_MIN, fac / _SAFE))
            h = min(h / fac, max_step, span)
            facold = max(err, 1e-4)
        else:
            rejected += 1
            fac11 = err ** _EXPO if math.isfinite(err) else 1.0 / _FAC_MIN
            h = h / min(1.0 / _FAC_MIN, fac11 / _SAFE)

    if termination is not Termination.COMPLETED and (not samples_t or samples_t[-1] < t):
        samples_t.append(t)
        samples_y.append(y.copy())
    return np.array(samples_t), np.array(samples_y).reshape(-1, len(y)), termination, accepted, rejected


def _sample_grid(t_end, stride):
    n = int(math.floor(t_end / stride + 1e-9))
    grid = [k * stride for k in range(n + 1)]
    if t_end - grid[-1] > 1e-9 * stride:
        grid.append(t_end)
    else:
        grid[-1] = t_end
    return grid


def _as_reformed(y0):
    if isinstance(y0, StateReformed):
        return y0
    if isinstance(y0, StateOriginal):
        raise IntegrationError("simulate expects reformed coordinates (A, T, U)")
    return StateReformed(*y0)


def simulate(p: ModelParams, y0, opts: SolverOptions = SolverOptions()) -> Trajectory:
    """Integrate the reformed system from ``y0`` up to ``opts.t_end``.

    Samples are emitted every ``opts.stride`` time units by dense output.
    Integration stops early with ``extinction_event`` when T drops below
    1e-10 and with ``blowup_event`` when a component exceeds 1e12.
    """
    y0 = _as_reformed(y0)
    if not isinstance(opts, SolverOptions):
        raise IntegrationError("opts must be SolverOptions")

    def fun(t, y):
        return np.array(reformed_field(p, y[0], y[1], y[2]))

    def event(y):
        if not np.all(np.isfinite(y)) or np.max(np.abs(y)) > BLOWUP:
            return Termination.BLOWUP
        if y[1] < EXTINCTION_T:
            return Termination.EXTINCTION
        return None

    def post(y):
        # The faces A = 0 and A = 1 are invariant; undo rounding excursions past them.
        A = y[0]
        if -BOUNDARY_CLIP < A < 0.0:
            y[0] = 0.0
        elif 1.0 < A < 1.0 + BOUNDARY_CLIP:
            y[0] = 1.0
        return y

    def admissible(y):
        return -BOUNDARY_CLIP < y[0] < 1.0 + BOUNDARY_CLIP and y[2] > -1e-13

    times, states, term, acc, rej = dopri5(
        fun, 0.0, y0.as_array(), opts.t_end, _sample_grid(opts.t_end, opts.stride),
        opts.rel_tol, opts.abs_tol, opts.max_step, event, post, admissible)
    return Trajectory(times, states, term, "reformed", acc, rej)


def simulate_original(p: ModelParams, x0, opts: SolverOptions = SolverOptions()) -> Trajectory:
    """Integrate the original ``(S, I, P)`` system; unreliable near S + I = 0."""
    if not isinstance(x0, StateOriginal):
        x0 = StateOriginal(*x0)

    nan3 = np.full(3, np.nan)

    def fun(t, x):
        # A stage outside S + I >= 0 yields NaN, which rejects the step and shrinks h.
        if x[0] + x[1] < 0:
            return nan3
        return original_field(p, x[0], x[1], x[2])

    def event(x):
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > BLOWUP:
            return Termination.BLOWUP
        if x[0] + x[1] < EXTINCTION_T ** 2:
            return Termination.EXTINCTION
        return None

    times, states, term, acc, rej = dopri5(
        fun, 0.0, x0.as_array(), opts.t_end, _sample_grid(opts.t_end, opts.stride),
        opts.rel_tol, opts.abs_tol, opts.max_step, event)
    return Trajectory(times, states, term, "original", acc, rej)


class AttractorKind(str, enum.Enum):
    EQUILIBRIUM = "equilibrium"
    LIMIT_CYCLE = "limit_cycle"
    DIVERGENT = "divergent"
    UNDETERMINED = "undetermined"


@dataclass(frozen=True)
class AttractorReport:
    kind: AttractorKind
    target: StateReformed | None = None
    period: float | None = None
    amplitudes: dict = field(default_factory=dict)
    means: dict = field(default_factory=dict)
    peaks: int = 0
    period_cv: float | None = None

    def to_dict(self):
        return {"kind": self.kind.value,
                "target": None if self.target is None else dict(zip("ATU", self.target)),
                "period": self.period, "amplitudes": dict(self.amplitudes),
                "means": dict(self.means), "peaks": self.peaks, "period_cv": self.period_cv}


def _peak_times(t, x):
    """Three-point local maxima above the mean, refined by a parabola through the neighbours."""
    mean = float(np.mean(x))
    out = []
    for i in range(1, len(x) - 1):
        if x[i - 1] < x[i] >= x[i + 1] and x[i] > mean:
            t0, t1, t2 = t[i - 1], t[i], t[i + 1]
            x0, x1, x2 = x[i - 1], x[i], x[i + 1]
            den = (t0 - t1) * (t0 - t2) * (t1 - t2)
            a = (t2 * (x1 - x0) + t1 * (x0 - x2) + t0 * (x2 - x1)) / den
            b = (t2 * t2 * (x0 - x1) + t1 * t1 * (x2 - x0) + t0 * t0 * (x1 - x2)) / den
            out.append(-b / (2 * a) if a < 0 else t1)
    return out


def detect_attractor(traj: Trajectory, transient_fraction: float = 0.8) -> AttractorReport:
    """Classify the post-transient part of a reformed-coordinate trajectory.

    The window is the last ``1 - transient_fraction`` of the time span.  It is
    an equilibrium if every variable varies by less than ``1e-3 (1 + |mean|)``
    and a limit cycle if the most active variable shows at least three peaks
    whose spacing has a coefficient of variation below 5%.  Runs stopped by
    blowup are divergent; runs stopped by prey extinction are undetermined.
    """
    if traj.termination is Termination.BLOWUP:
        return AttractorReport(AttractorKind.DIVERGENT)
    if traj.termination is Termination.EXTINCTION:
        # Prey collapse in finite time; there is no long-run window to analyse.
        return AttractorReport(AttractorKind.UNDETERMINED, target=None)
    if not 0 <= transient_fraction < 1:
        raise IntegrationError("transient_fraction must lie in [0, 1)")
    t = traj.times
    y = traj.reformed()
    cut = t[0] + transient_fraction * (t[-1] - t[0])
    mask = t >= cut
    if mask.sum() < 50:
        raise IntegrationError(f"only {int(mask.sum())} samples after the transient cut; need at least 50")
    tw, yw = t[mask], y[mask]
    amps = {name: float(np.ptp(yw[:, i])) for i, name in enumerate("ATU")}
    means = {name: float(np.mean(yw[:, i])) for i, name in enumerate("ATU")}
    rel = {n: amps[n] / (1 + abs(means[n])) for n in "ATU"}
    if all(v < 1e-3 for v in rel.values()):
        return AttractorReport(AttractorKind.EQUILIBRIUM, StateReformed(*np.clip(yw[-1], 0, None)),
                               amplitudes=amps, means=means)
    lead = max("ATU", key=rel.get)
    peaks = _peak_times(tw, yw[:, "ATU".index(lead)])
    if len(peaks) >= 3:
        gaps = np.diff(peaks)
        cv = float(np.std(gaps) / np.mean(gaps))
        if cv < 0.05:
            return AttractorReport(AttractorKind.LIMIT_CYCLE, period=float(np.mean(gaps)),
                                   amplitudes=amps, means=means, peaks=len(peaks), period_cv=cv)
        return AttractorReport(AttractorKind.UNDETERMINED, amplitudes=amps, means=means,
                               peaks=len(peaks), period_cv=cv)
    return AttractorReport(AttractorKind.UNDETERMINED, amplitudes=amps, means=means, peaks=len(peaks))
