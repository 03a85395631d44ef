"""Measurement-feedback beam optimizer.

Stochastic parallel gradient descent over the bias-voltage pattern: perturb
every element simultaneously with a random +/-delta pattern, measure the
objective on both signs, and move along the perturbation scaled by the
measured difference. The objective is a black box returning per-direction
power readings in dBm; readings combine as a weighted sum in linear
milliwatts (powers only add linearly). A companion feedback rule raises the
weight of whichever direction currently reads weakest.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .channel import dbm_to_mw, mw_to_dbm
from .ris import V_MAX, V_MIN, clip_voltages


@dataclass(frozen=True)
class SpgdConfig:
    """Optimizer knobs.

    gain                update scale g (per mW of measured difference)
    perturbation_volts  probe amplitude delta, volts
    iterations          number of update steps J
    seed                perturbation stream seed
    """

    gain: float = 20000.0
    perturbation_volts: float = 0.5
    iterations: int = 300
    seed: int = 0

    def __post_init__(self):
        if self.gain <= 0:
            raise ValueError("gain must be positive")
        if self.perturbation_volts <= 0:
            raise ValueError("perturbation_volts must be positive")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")


@dataclass(frozen=True)
class ObjectiveSpec:
    """Weighted multi-direction measurement objective.

    measure maps a voltage pattern to per-direction readings in dBm, in the
    order of `directions`. Weights are positive and enter the combined
    objective as-is.
    """

    directions: tuple
    weights: tuple
    measure: Callable[[np.ndarray], np.ndarray]

    def __post_init__(self):
        dirs = tuple(float(d) for d in self.directions)
        w = tuple(float(x) for x in self.weights)
        if not dirs:
            raise ValueError("at least one direction is required")
        if len(set(dirs)) != len(dirs):
            raise ValueError("directions must be pairwise distinct")
        if len(w) != len(dirs):
            raise ValueError("weights and directions must have equal length")
        if any(x <= 0 for x in w):
            raise ValueError("weights must be positive")
        object.__setattr__(self, "directions", dirs)
        object.__setattr__(self, "weights", w)


def _measure_mw(spec: ObjectiveSpec, v: np.ndarray):
    """One objective evaluation: (weighted sum in mW, per-direction dBm)."""
    readings = np.asarray(spec.measure(np.asarray(v, dtype=float)), dtype=float)
    if readings.shape != (len(spec.directions),):
        raise ValueError(
            f"objective returned {readings.shape}, expected ({len(spec.directions)},)"
        )
    mw = np.array([dbm_to_mw(r) for r in readings])
    return float(np.dot(spec.weights, mw)), readings


def objective_value(spec: ObjectiveSpec, v) -> float:
    """Weighted sum of per-direction readings in linear milliwatts."""
    y, _ = _measure_mw(spec, v)
    return y


def sample_perturbation(config: SpgdConfig, length: int, rng) -> np.ndarray:
    """+/-delta pattern, each sign independent and equally likely."""
    if length < 1:
        raise ValueError("length must be >= 1")
    signs = 2.0 * rng.integers(0, 2, size=length) - 1.0
    return config.perturbation_volts * signs


def spgd_step(spec: ObjectiveSpec, v, config: SpgdConfig, rng) -> np.ndarray:
    """One update: probe both perturbation signs, move along the difference.

    Probe patterns are clipped to the bias range before measuring; the
    update itself is clipped afterwards. Exactly two objective evaluations.
    """
    v_next, _ = _step_detail(spec, v, config, rng)
    return v_next


def _step_detail(spec: ObjectiveSpec, v, config: SpgdConfig, rng):
    v = np.asarray(v, dtype=float)
    if np.any(v < V_MIN) or np.any(v > V_MAX):
        raise ValueError("iterate outside the bias range")
    delta = sample_perturbation(config, v.size, rng)
    y_plus, dbm_plus = _measure_mw(spec, clip_voltages(v + delta))
    y_minus, dbm_minus = _measure_mw(spec, clip_voltages(v - delta))
    v_next = clip_voltages(v + config.gain * delta * (y_plus - y_minus))
    return v_next, (y_plus, y_minus, dbm_plus, dbm_minus)


@dataclass
class SpgdTrace:
    """Record of one optimizer run.

    objective_mw[t] is the iterate estimate (mean of the two probe values);
    best_so_far_mw is its running maximum over the scored iterates. The
    returned best_pattern is the iterate with the highest score, where the
    score comes from `reference_objective` when one was supplied (a
    jitter-free readout) and from the probe estimate otherwise.
    """

    directions: tuple
    weights: tuple
    y_plus_mw: np.ndarray = field(repr=False)
    y_minus_mw: np.ndarray = field(repr=False)
    objective_mw: np.ndarray = field(repr=False)
    per_direction_dbm: np.ndarray = field(repr=False)
    best_so_far_mw: np.ndarray = field(repr=False)
    evaluation_count: int = 0
    initial_pattern: np.ndarray | None = None
    final_pattern: np.ndarray | None = None
    best_pattern: np.ndarray | None = None
    best_value_mw: float = -np.inf
    best_index: int = -1

    def __len__(self):
        return self.objective_mw.size


def run_spgd(spec: ObjectiveSpec, v0, config: SpgdConfig,
             reference_objective: Callable[[np.ndarray], float] | None = None,
             rng=None) -> SpgdTrace:
    """Run `config.iterations` update steps from v0 and keep the best iterate.

    Under measurement jitter the final iterate can be worse than an earlier
    one, so the best-scoring visited pattern is returned rather than the
    last. The perturbation stream comes from config.seed unless an explicit
    rng is passed; identical inputs give identical traces.
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    v = np.asarray(v0, dtype=float).copy()
    if np.any(v < V_MIN) or np.any(v > V_MAX):
        raise ValueError("initial pattern outside the bias range")

    n_iter = config.iterations
    n_dir = len(spec.directions)
    y_plus = np.empty(n_iter)
    y_minus = np.empty(n_iter)
    estimates = np.empty(n_iter)
    per_dir = np.empty((n_iter, n_dir))
    best_curve = np.empty(n_iter)

    def score(pattern, estimate):
        if reference_objective is not None:
            return float(reference_objective(pattern))
        return estimate

    best_value = -np.inf
    best_pattern = v.copy()
    best_index = -1
    if reference_objective is not None:
        best_value = score(v, None)
        best_index = 0

    for t in range(n_iter):
        iterate = v
        v, (yp, ym, dp, dm) = _step_detail(spec, v, config, rng)
        y_plus[t] = yp
        y_minus[t] = ym
        estimates[t] = 0.5 * (yp + ym)
        per_dir[t] = mw_per_direction_dbm(dp, dm)
        s = score(iterate if reference_objective is None else v, estimates[t])
        if s > best_value:
            best_value = s
            best_pattern = (iterate if reference_objective is None else v).copy()
            best_index = t
        best_curve[t] = best_value

    return SpgdTrace(
        directions=spec.directions, weights=spec.weights,
        y_plus_mw=y_plus, y_minus_mw=y_minus, objective_mw=estimates,
        per_direction_dbm=per_dir, best_so_far_mw=best_curve,
        evaluation_count=2 * n_iter, initial_pattern=np.asarray(v0, dtype=float),
        final_pattern=v, best_pattern=best_pattern,
        best_value_mw=best_value, best_index=best_index,
    )


def mw_per_direction_dbm(dbm_plus: np.ndarray, dbm_minus: np.ndarray) -> np.ndarray:
    """Per-direction probe average, formed in linear power, reported in dBm."""
    mw = 0.5 * (
        np.array([dbm_to_mw(x) for x in dbm_plus])
        + np.array([dbm_to_mw(x) for x in dbm_minus])
    )
    return np.array([mw_to_dbm(x) for x in mw])


def export_trace_csv(trace: SpgdTrace, path) -> None:
    """Write the per-iteration record.

    Columns: iteration, objective_linear_mw, one objective_dbm_dir<k>
    column per direction (k indexes trace.directions), best_so_far_mw.
    """
    header = ["iteration", "objective_linear_mw"]
    header += [f"objective_dbm_dir{k}" for k in range(len(trace.directions))]
    header += ["best_so_far_mw"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for t in range(len(trace)):
            row = [t, f"{trace.objective_mw[t]:.10g}"]
            row += [f"{x:.10g}" for x in trace.per_direction_dbm[t]]
            row += [f"{trace.best_so_far_mw[t]:.10g}"]
            writer.writerow(row)


@dataclass(frozen=True)
class FeedbackState:
    """Snapshot after one weight-feedback round."""

    weights: tuple
    last_measured_dbm: tuple
    round: int

    def __post_init__(self):
        if len(self.weights) != len(self.last_measured_dbm):
            raise ValueError("weights and measurement lengths differ")
        if any(int(w) != w or w < 1 for w in self.weights):
            raise ValueError("weights must be integers >= 1")
        object.__setattr__(self, "weights", tuple(int(w) for w in self.weights))
        object.__setattr__(
            self, "last_measured_dbm", tuple(float(p) for p in self.last_measured_dbm)
        )


def feedback_adjust(state: FeedbackState, measured_dbm: Sequence[float]) -> FeedbackState:
    """Increment the weight of the weakest measured direction.

    Ties resolve to the lowest index (np.argmin's convention, kept
    deliberately).
    """
    p = np.asarray(measured_dbm, dtype=float)
    if p.shape != (len(state.weights),):
        raise ValueError(
            f"expected {len(state.weights)} readings, got shape {p.shape}"
        )
    weakest = int(np.argmin(p))
    new_weights = list(state.weights)
    new_weights[weakest] += 1
    return FeedbackState(
        weights=tuple(new_weights),
        last_measured_dbm=tuple(p),
        round=state.round + 1,
    )


def run_feedback_loop(spec: ObjectiveSpec, v_start, config: SpgdConfig,
                      rounds: int, feedback_iterations: int | None = None,
                      reference_readings: Callable[[np.ndarray], np.ndarray] | None = None):
    """Alternate weakest-direction weight bumps with short re-optimizations.

    Each round measures the per-direction readings under the current best
    pattern, bumps the weakest direction's weight, then re-runs the
    optimizer with the new weights warm-started from that pattern (a quarter
    of the full iteration budget by default; the feedback stage fine-tunes
    the power split rather than re-forming the beams).

    reference_readings, when given, is a jitter-free per-direction readout
    (dBm) used to pick each round's best pattern under that round's weights.

    Returns (final pattern, per-round FeedbackState history).
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    if feedback_iterations is None:
        feedback_iterations = max(1, config.iterations // 4)

    v = np.asarray(v_start, dtype=float).copy()
    weights = tuple(1 for _ in spec.directions)
    history: list[FeedbackState] = []
    state = FeedbackState(
        weights=weights,
        last_measured_dbm=tuple(0.0 for _ in spec.directions),
        round=0,
    )
    for r in range(1, rounds + 1):
        readings = np.asarray(spec.measure(v), dtype=float)
        state = feedback_adjust(state, readings)
        history.append(state)
        weighted = replace(spec, weights=tuple(float(w) for w in state.weights))
        reference = None
        if reference_readings is not None:
            def reference(p, _w=weighted.weights):
                dbm = np.asarray(reference_readings(p), dtype=float)
                return float(sum(w * dbm_to_mw(x) for w, x in zip(_w, dbm)))
        cfg = replace(config, iterations=feedback_iterations)
        trace = run_spgd(
            weighted, v, cfg, reference_objective=reference,
            rng=np.random.default_rng([config.seed, r]),
        )
        v = trace.best_pattern
    return v, history
