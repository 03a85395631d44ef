"""Far-field and link-budget model around the reflective surface.

Produces the received power in a given direction for a given bias pattern
(the black-box objective the optimizer measures) and the per-user complex
baseband gain applied to OFDM waveforms. Absolute levels are a calibration:
only differences between configurations are meaningful, and the default
constants place an optimized single beam near -33 dBm with the unsteered
floor tens of dB below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ris import RisGeometry, ReflectionState, SPEED_OF_LIGHT

# Gaussian beam rolloff in dB at one FWHM offset: 10*log10(exp(4*ln2))
_GAUSS_DB_PER_FWHM2 = 40.0 * math.log(2.0) / math.log(10.0)


def dbm_to_mw(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0)


def mw_to_dbm(mw: float) -> float:
    if mw <= 0.0:
        return -math.inf
    return 10.0 * math.log10(mw)


def free_space_path_loss_db(distance_m: float, carrier_hz: float) -> float:
    """20*log10(4*pi*d/lambda); distance and frequency must be positive."""
    if distance_m <= 0 or carrier_hz <= 0:
        raise ValueError("distance and frequency must be positive")
    lam = SPEED_OF_LIGHT / carrier_hz
    return 20.0 * math.log10(4.0 * math.pi * distance_m / lam)


@dataclass(frozen=True)
class LinkGeometry:
    """Desk-scale link around the surface.

    Antenna/amplifier gains are lumped into tx_gain_db/rx_gain_db; they also
    absorb the aperture gain dropped by the array-factor normalization, so
    the defaults are calibration constants rather than catalog values.
    """

    tx_distance_m: float = 0.20
    rx_distance_m: float = 0.20
    rx_angle_deg: float = 0.0
    tx_gain_db: float = 58.8
    rx_gain_db: float = 58.8
    horn_beamwidth_deg: float = 7.0
    tx_power_dbm: float = -20.0

    def __post_init__(self):
        if self.tx_distance_m <= 0 or self.rx_distance_m <= 0:
            raise ValueError("link distances must be positive")
        if not -90.0 <= self.rx_angle_deg <= 90.0:
            raise ValueError("rx_angle_deg must lie in [-90, 90]")
        if self.horn_beamwidth_deg <= 0:
            raise ValueError("horn_beamwidth_deg must be positive")


@dataclass(frozen=True)
class NoiseModel:
    """Measurement floor and stray-signal model.

    noise_floor_dbm      power-meter floor entering every reading
                         (None disables it)
    measurement_sigma_db std-dev of the reading jitter in dB
    leakage_floor_db     stray specular leakage level, dB below the
                         would-be perfectly steered beam
    """

    noise_floor_dbm: float | None = -70.0
    measurement_sigma_db: float = 0.1
    leakage_floor_db: float = 7.5

    def __post_init__(self):
        if self.measurement_sigma_db < 0:
            raise ValueError("measurement_sigma_db must be >= 0")


def array_factor(geom: RisGeometry, state: ReflectionState, angle_deg: float) -> complex:
    """Complex far-field sum of the reflected array toward angle_deg.

    sum_i c_i * exp(-j * i * k * p * (sin(theta_in) + sin(angle))); an
    element programmed with the matching grating phases contributes in phase.
    """
    if not -90.0 <= angle_deg <= 90.0:
        raise ValueError("observation angle must lie in [-90, 90] deg")
    if len(state) != geom.element_count:
        raise ValueError("reflection state length does not match geometry")
    psi = geom.wavenumber * geom.element_period_m * (
        math.sin(math.radians(geom.incidence_deg)) + math.sin(math.radians(angle_deg))
    )
    idx = np.arange(geom.element_count)
    return complex(np.sum(state.coefficients * np.exp(-1j * idx * psi)))


def specular_angle_deg(geom: RisGeometry) -> float:
    """Mirror direction of the incident beam (the unbiased surface's beam)."""
    return -geom.incidence_deg


def _budget_peak_dbm(geom: RisGeometry, link: LinkGeometry) -> float:
    """Level of a perfectly steered beam: power + gains - both path losses."""
    return (
        link.tx_power_dbm + link.tx_gain_db + link.rx_gain_db
        - free_space_path_loss_db(link.tx_distance_m, geom.carrier_hz)
        - free_space_path_loss_db(link.rx_distance_m, geom.carrier_hz)
    )


def _leakage_dbm(geom: RisGeometry, link: LinkGeometry, noise: NoiseModel,
                 angle_deg: float) -> float:
    """Stray specular leakage toward angle_deg.

    Gaussian rolloff with the horn's FWHM measured in direction cosine
    (sin-angle) space: near the grazing specular direction a narrow cone
    spans a wide angular range, which is what makes small-deflection
    directions leakage-limited.
    """
    du = abs(
        math.sin(math.radians(angle_deg))
        - math.sin(math.radians(specular_angle_deg(geom)))
    )
    fwhm_u = 2.0 * math.sin(math.radians(link.horn_beamwidth_deg) / 2.0)
    taper_db = -_GAUSS_DB_PER_FWHM2 * (du / fwhm_u) ** 2
    return _budget_peak_dbm(geom, link) - noise.leakage_floor_db + taper_db


def received_power_dbm(geom: RisGeometry, link: LinkGeometry, noise: NoiseModel,
                       state: ReflectionState, rng=None) -> float:
    """Power-meter reading toward link.rx_angle_deg for the given state, dBm.

    Beam path, stray leakage and the meter floor combine in linear power;
    passing an rng adds the Gaussian reading jitter. Without an rng the
    reading is a pure function of (state, angle).
    """
    beam_dbm = _budget_peak_dbm(geom, link) + 20.0 * math.log10(
        max(abs(array_factor(geom, state, link.rx_angle_deg)) / geom.element_count,
            1e-300)
    )
    total_mw = dbm_to_mw(beam_dbm) + dbm_to_mw(
        _leakage_dbm(geom, link, noise, link.rx_angle_deg)
    )
    if noise.noise_floor_dbm is not None:
        total_mw += dbm_to_mw(noise.noise_floor_dbm)
    reading = mw_to_dbm(total_mw)
    if rng is not None and noise.measurement_sigma_db > 0:
        reading += noise.measurement_sigma_db * rng.standard_normal()
    return reading


def channel_gain(geom: RisGeometry, link: LinkGeometry, noise: NoiseModel,
                 state: ReflectionState, user_angle_deg: float) -> complex:
    """Frequency-flat complex gain seen by a user at user_angle_deg.

    |gain|^2 in dBm equals the jitter-free power reading; the phase is the
    array-factor phase. The surface's response is flat across the occupied
    bandwidth, so one scalar per user suffices.
    """
    link_at_user = LinkGeometry(
        tx_distance_m=link.tx_distance_m, rx_distance_m=link.rx_distance_m,
        rx_angle_deg=user_angle_deg, tx_gain_db=link.tx_gain_db,
        rx_gain_db=link.rx_gain_db, horn_beamwidth_deg=link.horn_beamwidth_deg,
        tx_power_dbm=link.tx_power_dbm,
    )
    power_dbm = received_power_dbm(geom, link_at_user, noise, state, rng=None)
    magnitude = math.sqrt(dbm_to_mw(power_dbm))
    af = array_factor(geom, state, user_angle_deg)
    phase = math.atan2(af.imag, af.real) if af != 0 else 0.0
    return magnitude * complex(math.cos(phase), math.sin(phase))


@dataclass(frozen=True)
class FieldSample:
    """One point of the received far-field cut."""

    angle_deg: float
    complex_field: complex
    power_dbm: float


def field_samples(geom: RisGeometry, link: LinkGeometry, noise: NoiseModel,
                  state: ReflectionState, angles_deg) -> list[FieldSample]:
    """Jitter-free field cut over the given angles (power_dbm = 20*log10|field|)."""
    out = []
    for angle in np.atleast_1d(angles_deg):
        g = channel_gain(geom, link, noise, state, float(angle))
        out.append(FieldSample(float(angle), g, mw_to_dbm(abs(g) ** 2)))
    return out


@dataclass(frozen=True)
class SnrConfig:
    """Additive receiver noise for the baseband chain.

    noise_power_dbm is the integrated noise power over the occupied band on
    the same absolute scale as the power readings; per-sample complex noise
    variance equals its linear value.
    """

    noise_power_dbm: float = -47.0
    enabled: bool = True


def apply_channel(waveform, gain: complex, snr: SnrConfig, rng=None):
    """gain * waveform plus AWGN of per-sample variance mw(noise_power_dbm)."""
    x = np.asarray(waveform, dtype=complex)
    if not np.all(np.isfinite(x)):
        raise ValueError("waveform contains non-finite samples")
    y = gain * x
    if snr.enabled:
        if rng is None:
            raise ValueError("rng is required when noise is enabled")
        sigma2 = dbm_to_mw(snr.noise_power_dbm)
        noise = rng.standard_normal(x.size) + 1j * rng.standard_normal(x.size)
        y = y + math.sqrt(sigma2 / 2.0) * noise
    return y
