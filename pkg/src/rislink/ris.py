"""Behavioral model of the 80-element voltage-controlled reflective surface.

The surface is a 1-D array of reflective stripes. Each element's complex
reflection coefficient is set by a DC bias in [0, 35] V through a measured
(or synthesized) voltage -> (amplitude, phase) response curve. Steering
patterns are initialized from the grating equation and refined elsewhere by
the measurement-feedback optimizer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SPEED_OF_LIGHT = 2.99792458e8  # m/s

V_MIN = 0.0
V_MAX = 35.0  # bias range of the element driver, volts

TWO_PI = 2.0 * math.pi


def wrap_phase(phi):
    """Wrap phases (radians) to [0, 2*pi)."""
    return np.mod(phi, TWO_PI)


@dataclass(frozen=True)
class RisGeometry:
    """Geometry of the reflective array.

    element_count      number of stripes N
    element_period_m   stripe period p, meters
    carrier_hz         carrier frequency, Hz
    incidence_deg      incoming beam direction, degrees in (-90, 90)
    """

    element_count: int = 80
    element_period_m: float = 317e-6
    carrier_hz: float = 220e9
    incidence_deg: float = -77.0

    def __post_init__(self):
        if self.element_count < 1:
            raise ValueError(f"element_count must be >= 1, got {self.element_count}")
        if self.element_period_m <= 0:
            raise ValueError("element_period_m must be positive")
        if self.carrier_hz <= 0:
            raise ValueError("carrier_hz must be positive")
        if not -90.0 < self.incidence_deg < 90.0:
            raise ValueError(
                f"incidence_deg must lie in (-90, 90), got {self.incidence_deg}"
            )

    @property
    def wavenumber(self) -> float:
        """k = 2*pi*f/c, rad/m."""
        return TWO_PI * self.carrier_hz / SPEED_OF_LIGHT

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_hz


@dataclass(frozen=True)
class ElementResponseModel:
    """Sampled voltage -> (amplitude ratio, phase) map of one element.

    volts/phase_rad/amplitude are parallel lookup tables, strictly increasing
    in volts, linearly interpolated. phase_rad[0] is 0 at 0 V and the phase is
    monotone non-decreasing; amplitudes stay in (0, 1].
    """

    volts: np.ndarray
    phase_rad: np.ndarray
    amplitude: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.volts, dtype=float)
        ph = np.asarray(self.phase_rad, dtype=float)
        am = np.asarray(self.amplitude, dtype=float)
        if not (v.shape == ph.shape == am.shape) or v.ndim != 1 or v.size < 2:
            raise ValueError("response tables must be 1-D, equal length >= 2")
        if np.any(np.diff(v) <= 0):
            raise ValueError("voltage samples must be strictly increasing")
        if not math.isclose(v[0], V_MIN) or not math.isclose(v[-1], V_MAX):
            raise ValueError(f"response curve must span [{V_MIN}, {V_MAX}] V")
        if abs(ph[0]) > 1e-12:
            raise ValueError("phase at 0 V must be 0")
        if np.any(np.diff(ph) < 0):
            raise ValueError("phase response must be monotone non-decreasing")
        if np.any(am <= 0) or np.any(am > 1.0 + 1e-12):
            raise ValueError("amplitude ratios must lie in (0, 1]")
        object.__setattr__(self, "volts", v)
        object.__setattr__(self, "phase_rad", ph)
        object.__setattr__(self, "amplitude", am)

    @property
    def phase_span(self) -> float:
        """Maximum achievable phase (radians), reached at 35 V."""
        return float(self.phase_rad[-1])

    @property
    def amplitude_floor(self) -> float:
        return float(self.amplitude.min())


def default_response_model(phase_span_deg: float = 255.0,
                           amplitude_ripple: float = 0.15,
                           samples: int = 256) -> ElementResponseModel:
    """Synthesized element response anchored at the measured endpoints.

    Phase follows a smoothstep from 0 to phase_span_deg across the bias
    range; amplitude dips by `amplitude_ripple` mid-range (the measured
    curves show a shallow mid-bias absorption dip whose exact depth is a
    modeling choice, hence the config knob).
    """
    if not 0 < phase_span_deg <= 360.0:
        raise ValueError("phase_span_deg must lie in (0, 360]")
    if not 0 <= amplitude_ripple < 1.0:
        raise ValueError("amplitude_ripple must lie in [0, 1)")
    v = np.linspace(V_MIN, V_MAX, samples)
    x = v / V_MAX
    smooth = 3.0 * x**2 - 2.0 * x**3
    phase = math.radians(phase_span_deg) * smooth
    amp = 1.0 - amplitude_ripple * np.sin(math.pi * x) ** 2
    return ElementResponseModel(volts=v, phase_rad=phase, amplitude=amp)


RESPONSE_FILE_HEADER = "# ris-response v1"


def load_response_model(path) -> ElementResponseModel:
    """Read a response-curve override file.

    Format: first line `# ris-response v1`, then rows of
    `volts phase_degrees [amplitude_ratio]` with strictly increasing volts.
    Missing amplitude column defaults to 1.0.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != RESPONSE_FILE_HEADER:
        raise ValueError(f"{path}: missing `{RESPONSE_FILE_HEADER}` header line")
    volts, phases, amps = [], [], []
    for ln, raw in enumerate(lines[1:], start=2):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        parts = text.split()
        if len(parts) not in (2, 3):
            raise ValueError(f"{path}:{ln}: expected 2 or 3 columns, got {len(parts)}")
        try:
            vals = [float(t) for t in parts]
        except ValueError as exc:
            raise ValueError(f"{path}:{ln}: non-numeric value ({exc})") from None
        volts.append(vals[0])
        phases.append(math.radians(vals[1]))
        amps.append(vals[2] if len(vals) == 3 else 1.0)
    try:
        return ElementResponseModel(
            volts=np.array(volts), phase_rad=np.array(phases), amplitude=np.array(amps)
        )
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None


@dataclass(frozen=True)
class CouplingConfig:
    """Neighbor-coupling model: circular 3-tap smoothing of element phases.

    Realized phases become arg of the kernel [alpha, 1-2*alpha, alpha]
    applied to the unit phasors of neighboring elements (complex-domain
    averaging avoids wrap artifacts). Amplitudes are left per-element.
    """

    enabled: bool = False
    alpha: float = 0.15

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 0.5:
            raise ValueError("coupling alpha must lie in [0, 0.5]")


NO_COUPLING = CouplingConfig(enabled=False)


@dataclass(frozen=True)
class ReflectionState:
    """Per-element complex reflection coefficients (amplitude * e^{j phase})."""

    coefficients: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=complex)
        if c.ndim != 1:
            raise ValueError("coefficients must be a 1-D complex array")
        if np.any(np.abs(c) > 1.0 + 1e-12):
            raise ValueError("passive surface requires |coefficient| <= 1")
        object.__setattr__(self, "coefficients", c)

    def __len__(self):
        return self.coefficients.size


def check_voltage_pattern(geom: RisGeometry, v) -> np.ndarray:
    """Validate and return a voltage pattern as a float array of length N."""
    arr = np.asarray(v, dtype=float)
    if arr.shape != (geom.element_count,):
        raise ValueError(
            f"voltage pattern must have length {geom.element_count}, got shape {arr.shape}"
        )
    if np.any(arr < V_MIN) or np.any(arr > V_MAX):
        raise ValueError(f"voltages must lie in [{V_MIN}, {V_MAX}] V")
    return arr


def clip_voltages(v) -> np.ndarray:
    return np.clip(np.asarray(v, dtype=float), V_MIN, V_MAX)


def grating_initial_phase(geom: RisGeometry, target_deg: float) -> np.ndarray:
    """Per-element phases steering the reflection toward target_deg.

    phases[i] = i * k * p * (sin(theta_in) + sin(target)), wrapped to
    [0, 2*pi). Element index runs from 0; the constant global offset is
    physically irrelevant.
    """
    if not -90.0 < target_deg < 90.0:
        raise ValueError(f"target angle must lie in (-90, 90) deg, got {target_deg}")
    increment = geom.wavenumber * geom.element_period_m * (
        math.sin(math.radians(geom.incidence_deg)) + math.sin(math.radians(target_deg))
    )
    idx = np.arange(geom.element_count)
    return wrap_phase(idx * increment)


def element_response(model: ElementResponseModel, volts):
    """Interpolated (amplitude, phase) of one element at the given bias.

    Accepts scalars or arrays; rejects out-of-range voltages.
    """
    v = np.asarray(volts, dtype=float)
    if np.any(v < V_MIN) or np.any(v > V_MAX):
        raise ValueError(f"bias voltage out of [{V_MIN}, {V_MAX}] V")
    amp = np.interp(v, model.volts, model.amplitude)
    phase = np.interp(v, model.volts, model.phase_rad)
    return amp, phase


def voltage_for_phase(model: ElementResponseModel, phase_rad):
    """Bias voltage whose phase response best matches a target in [0, 2*pi).

    Targets are wrapped to [0, 2*pi); anything within the achievable span is
    inverted through the (monotone) phase table. Targets beyond the span map
    to whichever endpoint (0 V or 35 V) is circularly closer, since the
    element cannot reach them.
    """
    target = wrap_phase(np.asarray(phase_rad, dtype=float))
    span = model.phase_span
    volts = np.interp(target, model.phase_rad, model.volts)
    beyond = target > span
    if np.any(beyond):
        dist_to_top = target - span          # circular distance to the 35 V phase
        dist_to_zero = TWO_PI - target       # circular distance back to 0 V
        volts = np.where(beyond & (dist_to_top <= dist_to_zero), V_MAX, volts)
        volts = np.where(beyond & (dist_to_top > dist_to_zero), V_MIN, volts)
    if np.ndim(phase_rad) == 0:
        return float(volts)
    return volts


def initial_voltage_pattern(geom: RisGeometry, model: ElementResponseModel,
                            targets_deg) -> np.ndarray:
    """Analytic starting pattern for one or more target directions.

    One target: invert the grating-equation phases element-wise. Several
    targets: superpose the per-target phasors and take the angle of the sum,
    then invert. Duplicate targets only rescale the sum, so they are
    equivalent to a single occurrence.
    """
    targets = [float(t) for t in np.atleast_1d(targets_deg)]
    if not targets:
        raise ValueError("at least one target direction is required")
    if len(targets) == 1:
        phases = grating_initial_phase(geom, targets[0])
    else:
        acc = np.zeros(geom.element_count, dtype=complex)
        for t in targets:
            acc += np.exp(1j * grating_initial_phase(geom, t))
        phases = wrap_phase(np.angle(acc))
    return voltage_for_phase(model, phases)


def realize(geom: RisGeometry, model: ElementResponseModel, v,
            coupling: CouplingConfig = NO_COUPLING) -> ReflectionState:
    """Reflection coefficients produced by a bias pattern.

    With coupling enabled, each realized phase is the circular moving
    average of its neighborhood's unit phasors under the kernel
    [alpha, 1-2*alpha, alpha]; a uniform pattern is a fixed point.
    """
    volts = check_voltage_pattern(geom, v)
    amp, phase = element_response(model, volts)
    if coupling.enabled and geom.element_count >= 2:
        a = coupling.alpha
        phasor = np.exp(1j * phase)
        mixed = (1.0 - 2.0 * a) * phasor \
            + a * np.roll(phasor, 1) + a * np.roll(phasor, -1)
        phase = np.angle(mixed)
    return ReflectionState(coefficients=amp * np.exp(1j * phase))
