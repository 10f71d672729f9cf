"""Acoustic response of a segmented drill string via the transfer matrix method.

A drill string is an alternating sequence of slender pipes and thick tool
joints.  Every cross-section change partially reflects longitudinal waves, and
the periodic reflections turn the string into a comb filter with alternating
pass and stop bands.  This module computes the complex transmission
coefficient of such a string as a function of frequency and synthesizes the
discrete impulse response used by the rest of the simulator.

Model
-----
Within element ``n`` the wave potential is a superposition of an incident and
a reflected travelling wave with wavenumber ``k = 2*pi*f / c``.  Continuity of
displacement and force at each interface is encoded by a 2x2 matrix
``A_n(x)``; chaining all elements gives the string matrix

    M = A_N(d_N) A_N(0)^-1 ... A_1(d_1) A_1(0)^-1

and the reflection/transmission pair (R, T) solves the boundary system
``A_N(0) [1+R, 1-R]^T = M A_1(0) [T, T]^T``.  The model is lossless: for a
string whose end elements have equal cross-section, |R|^2 + |T|^2 = 1.

Conventions
-----------
* Element 1 is the receiving end, element N the driven end.
* The frequency response is kept one-sided complex (no Hermitian
  symmetrization); its inverse DFT is the complex impulse response.
* ``k = 0`` makes the element matrices singular, so the DC sample of an
  exported response is defined as 0.  Transmit signals never occupy DC.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Above this estimate the 2x2 boundary solve is treated as numerically
# meaningless and reported instead of silently returning garbage.
CONDITION_LIMIT = 1e12


class IllConditionedError(ValueError):
    """Boundary solve too ill-conditioned to trust at some frequency."""


@dataclass(frozen=True)
class DrillStringSpec:
    """Geometry and material of a drill string.

    Attributes:
        segments: ordered (length_m, area_m2) pairs, element 1 first.
        wave_speed: longitudinal wave speed in m/s.
        density: mass density in kg/m^3.
    """

    segments: tuple[tuple[float, float], ...]
    wave_speed: float
    density: float

    def __post_init__(self):
        if len(self.segments) == 0:
            raise ValueError("segments: must be non-empty")
        for i, (d, a) in enumerate(self.segments):
            if not d > 0:
                raise ValueError(f"segments[{i}].length: must be > 0, got {d}")
            if not a > 0:
                raise ValueError(f"segments[{i}].area: must be > 0, got {a}")
        if not self.wave_speed > 0:
            raise ValueError(f"wave_speed: must be > 0, got {self.wave_speed}")
        if not self.density > 0:
            raise ValueError(f"density: must be > 0, got {self.density}")

    @classmethod
    def alternating(cls, n_pipes: int, n_joints: int, d_pipe: float,
                    d_joint: float, a_pipe: float, a_joint: float,
                    c: float, rho: float) -> "DrillStringSpec":
        """Build a pipe/joint/pipe/... string (requires n_pipes = n_joints + 1)."""
        if n_pipes != n_joints + 1:
            raise ValueError(
                f"alternating string needs n_pipes == n_joints + 1, "
                f"got {n_pipes} pipes and {n_joints} joints")
        segs = []
        for i in range(n_pipes + n_joints):
            if i % 2 == 0:
                segs.append((d_pipe, a_pipe))
            else:
                segs.append((d_joint, a_joint))
        return cls(segments=tuple(segs), wave_speed=c, density=rho)

    @property
    def lengths(self) -> np.ndarray:
        return np.array([d for d, _ in self.segments])

    @property
    def areas(self) -> np.ndarray:
        return np.array([a for _, a in self.segments])


@dataclass(frozen=True)
class ScatterCoefficients:
    """Complex reflection and transmission coefficients at one frequency."""

    reflection: complex
    transmission: complex


@dataclass(frozen=True)
class ChannelRealization:
    """Sampled frequency response plus the discrete impulse response.

    ``impulse`` is the plain inverse DFT of ``response``; nothing is windowed
    or normalized.  Ringing beyond ``len(impulse)/sample_rate`` seconds is
    time-aliased, which is accepted for the fixed response length used here.
    """

    freq_grid: np.ndarray
    response: np.ndarray
    impulse: np.ndarray
    sample_rate: float
    carrier: float

    def __post_init__(self):
        if len(self.freq_grid) != len(self.response):
            raise ValueError("freq_grid and response must have equal length")
        if len(self.freq_grid) >= 2:
            df = np.diff(self.freq_grid)
            if not np.allclose(df, df[0], rtol=0, atol=1e-9):
                raise ValueError("freq_grid must be uniformly spaced")


def wavenumber(f, c: float):
    """Longitudinal wavenumber 2*pi*f/c in rad/m.  Accepts scalar or array f."""
    if not c > 0:
        raise ValueError(f"wave speed must be > 0, got {c}")
    f = np.asarray(f, dtype=float)
    if np.any(f < 0):
        raise ValueError("frequency must be >= 0")
    k = 2.0 * np.pi * f / c
    return k if k.ndim else float(k)


def element_matrix(k: float, x: float, area: float, rho: float, c: float) -> np.ndarray:
    """2x2 state matrix of one uniform element evaluated at position x.

    Singular at k = 0; callers handle DC separately.
    """
    if not k > 0:
        raise ValueError(f"element matrix is singular at k = 0 (got k={k})")
    s, co = np.sin(k * x), np.cos(k * x)
    w = rho * area * c * c * k * k
    return np.array([[-k * s, 1j * k * co],
                     [w * co, 1j * w * s]], dtype=complex)


def element_matrix_zero_inverse(k: float, area: float, rho: float, c: float) -> np.ndarray:
    """Closed-form inverse of the element matrix at x = 0."""
    if not k > 0:
        raise ValueError(f"element matrix is singular at k = 0 (got k={k})")
    w = rho * area * c * c * k * k
    return np.array([[0.0, 1.0 / w],
                     [-1j / k, 0.0]], dtype=complex)


def string_matrix(spec: DrillStringSpec, k: float) -> np.ndarray:
    """Chained 2x2 matrix of the whole string at wavenumber k.

    Factors are applied element 1 first, so the result is
    ``A_N(d_N) A_N(0)^-1 ... A_1(d_1) A_1(0)^-1``.
    """
    m = np.eye(2, dtype=complex)
    for d, a in spec.segments:
        factor = element_matrix(k, d, a, spec.density, spec.wave_speed) \
            @ element_matrix_zero_inverse(k, a, spec.density, spec.wave_speed)
        m = factor @ m
    return m


def _boundary_terms(spec: DrillStringSpec, freqs: np.ndarray):
    """Vectorized string matrices and row-equilibrated boundary coefficients.

    Returns (q0, q1) with T = 2/(q0 + q1) and R = (q1 - q0)/(q0 + q1).
    """
    c = spec.wave_speed
    rho = spec.density
    k = wavenumber(freqs, c)
    k = np.atleast_1d(np.asarray(k, dtype=float))
    if np.any(k <= 0):
        raise ValueError("boundary solve requires f > 0")

    m = np.broadcast_to(np.eye(2, dtype=complex), (len(k), 2, 2)).copy()
    for d, a in spec.segments:
        s, co = np.sin(k * d), np.cos(k * d)
        w = rho * a * c * c * k
        # element factor A(d) A(0)^-1 written out; real and unimodular
        factor = np.empty((len(k), 2, 2), dtype=complex)
        factor[:, 0, 0] = co
        factor[:, 0, 1] = -s / w
        factor[:, 1, 0] = w * s
        factor[:, 1, 1] = co
        m = factor @ m

    a1 = spec.segments[0][1]
    an = spec.segments[-1][1]
    w1 = rho * a1 * c * c * k * k
    wn = rho * an * c * c * k * k
    q0 = m[:, 0, 0] + w1 * m[:, 0, 1] / (1j * k)
    q1 = 1j * k * m[:, 1, 0] / wn + (a1 / an) * m[:, 1, 1]
    return q0, q1


def _solve_scatter(q0: np.ndarray, q1: np.ndarray, freqs: np.ndarray):
    """Solve the equilibrated 2x2 boundary system, checking conditioning."""
    systems = np.empty((len(q0), 2, 2), dtype=complex)
    systems[:, 0, 0] = -1.0
    systems[:, 0, 1] = -q0
    systems[:, 1, 0] = 1.0
    systems[:, 1, 1] = -q1
    cond = np.linalg.cond(systems)
    bad = ~(cond < CONDITION_LIMIT)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise IllConditionedError(
            f"scatter solve ill-conditioned at f={freqs[i]:g} Hz "
            f"(condition estimate {cond[i]:.3e})")
    denom = q0 + q1
    transmission = 2.0 / denom
    reflection = (q1 - q0) / denom
    return reflection, transmission


def scatter(spec: DrillStringSpec, f: float) -> ScatterCoefficients:
    """Reflection/transmission coefficients of the string at frequency f > 0."""
    if not f > 0:
        raise ValueError(f"scatter requires f > 0, got {f}")
    freqs = np.array([float(f)])
    q0, q1 = _boundary_terms(spec, freqs)
    r, t = _solve_scatter(q0, q1, freqs)
    return ScatterCoefficients(reflection=complex(r[0]), transmission=complex(t[0]))


def frequency_response(spec: DrillStringSpec, grid) -> np.ndarray:
    """Transmission coefficient sampled on a frequency grid.

    The grid must be strictly increasing and positive, except that a single
    leading f = 0 point is allowed; its response is defined as 0.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        return np.zeros(0, dtype=complex)
    if grid.size >= 2 and np.any(np.diff(grid) <= 0):
        raise ValueError("frequency grid must be strictly increasing")
    if np.any(grid < 0):
        raise ValueError("frequency grid must be non-negative")

    has_dc = grid[0] == 0.0
    pos = grid[1:] if has_dc else grid
    response = np.zeros(len(grid), dtype=complex)
    if pos.size:
        try:
            q0, q1 = _boundary_terms(spec, pos)
            _, t = _solve_scatter(q0, q1, pos)
        except IllConditionedError:
            raise
        except (ValueError, FloatingPointError) as exc:
            raise ValueError(f"scatter failed on grid: {exc}") from exc
        response[1 if has_dc else 0:] = t
    return response


def discrete_impulse_response(response, sample_rate: float, length: int) -> np.ndarray:
    """Inverse DFT of a response sampled on the grid [0, sample_rate) Hz.

    The grid spacing must be exactly ``sample_rate / length``, i.e. the
    response must hold ``length`` samples.
    """
    response = np.asarray(response, dtype=complex)
    if len(response) != length:
        raise ValueError(
            f"response length {len(response)} does not match impulse length "
            f"{length}; the frequency grid must be sample_rate/length spaced")
    h = np.fft.ifft(response)
    if not np.all(np.isfinite(h)):
        raise ValueError("impulse response is not finite")
    return h


def channel_realization(spec: DrillStringSpec, sample_rate: float,
                        length: int, carrier: float) -> ChannelRealization:
    """Full channel computation on the canonical [0, sample_rate) grid."""
    grid = np.arange(length) * (sample_rate / length)
    response = frequency_response(spec, grid)
    impulse = discrete_impulse_response(response, sample_rate, length)
    return ChannelRealization(freq_grid=grid, response=response, impulse=impulse,
                              sample_rate=sample_rate, carrier=carrier)


def passband_intervals(freqs: np.ndarray, magnitudes: np.ndarray,
                       threshold: float = 0.5,
                       merge_gap_hz: float = 25.0) -> list[tuple[float, float]]:
    """Contiguous frequency intervals where the magnitude exceeds a threshold.

    Narrow dropouts inside a band (ripple between closely spaced resonances)
    are bridged when shorter than ``merge_gap_hz``.  Useful for locating the
    comb passbands of a transmission curve.
    """
    freqs = np.asarray(freqs, dtype=float)
    magnitudes = np.asarray(magnitudes, dtype=float)
    above = magnitudes > threshold
    intervals: list[list[float]] = []
    start = None
    for f, flag in zip(freqs, above):
        if flag and start is None:
            start = f
        elif not flag and start is not None:
            intervals.append([start, prev])
            start = None
        prev = f
    if start is not None:
        intervals.append([start, freqs[-1]])
    merged: list[list[float]] = []
    for lo, hi in intervals:
        if merged and lo - merged[-1][1] <= merge_gap_hz:
            merged[-1][1] = hi
        else:
            merged.append([lo, hi])
    return [(lo, hi) for lo, hi in merged]
