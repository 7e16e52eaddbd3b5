"""Search over measurement settings and empirical sign calibration."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from bellscale.bell_core import (
    BellExpression,
    MeasurementSettings,
    build_bell_expression,
    canonical_settings,
)
from bellscale.errors import BellError, CalibrationError
from bellscale.quantum_engine import (
    StateVector,
    correlation_tensor,
    expectation,
    make_ghz,
    settings_correlators,
)

MODES = ("planar", "bloch")
CALIBRATION_TOL = 1e-9
VALUE_TOL = 1e-10
MAX_EVALS = 50_000
# above this the 4**n correlation tensor gets too large; use term-wise evaluation
TENSOR_MAX_N = 10


@dataclass(frozen=True)
class SettingsParameterization:
    """Angle coordinates for settings.

    planar: one angle per observable, ``a = (cos t, sin t, 0)``; 2n angles.
    bloch: (polar, azimuth) per observable; 4n angles.
    """

    mode: str
    n: int

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise BellError(f"mode must be one of {MODES}, got {self.mode!r}")

    @property
    def size(self) -> int:
        return 2 * self.n if self.mode == "planar" else 4 * self.n

    def decode(self, angles: np.ndarray) -> MeasurementSettings:
        return MeasurementSettings.from_vectors(self.vectors(angles))

    def vectors(self, angles: np.ndarray) -> np.ndarray:
        """Unit vectors of shape (n, 2, 3), unvalidated."""
        angles = np.asarray(angles, dtype=float)
        if self.mode == "planar":
            t = angles.reshape(self.n, 2)
            vecs = np.stack([np.cos(t), np.sin(t), np.zeros_like(t)], axis=-1)
        else:
            a = angles.reshape(self.n, 2, 2)
            theta, phi = a[..., 0], a[..., 1]
            vecs = np.stack(
                [np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)],
                axis=-1,
            )
        return vecs

    def encode(self, settings: MeasurementSettings) -> np.ndarray:
        if settings.n != self.n:
            raise BellError(f"settings have n={settings.n}, parameterization has n={self.n}")
        vecs = settings.as_array()
        if self.mode == "planar":
            if np.any(np.abs(vecs[..., 2]) > 1e-12):
                raise BellError("planar mode needs settings in the x-y plane")
            return np.arctan2(vecs[..., 1], vecs[..., 0]).reshape(-1)
        theta = np.arccos(np.clip(vecs[..., 2], -1.0, 1.0))
        phi = np.arctan2(vecs[..., 1], vecs[..., 0])
        return np.stack([theta, phi], axis=-1).reshape(-1)


@dataclass(frozen=True)
class OptimizeResult:
    settings: MeasurementSettings
    value: float
    restart: int
    start_values: tuple[float, ...]


def _ascend(objective, x0: np.ndarray) -> tuple[np.ndarray, float]:
    res = minimize(
        lambda x: -objective(x),
        x0,
        method="Nelder-Mead",
        options={
            "fatol": VALUE_TOL,
            "xatol": 1e-8,
            "maxfev": MAX_EVALS,
            "adaptive": True,
        },
    )
    return res.x, -float(res.fun)


def optimize_settings(
    expr: BellExpression,
    state: StateVector,
    mode: str = "planar",
    restarts: int = 8,
    seed: int = 0,
    threads: int = 1,
) -> OptimizeResult:
    """Best expectation found by simplex ascent from several starting settings.

    Restart 0 starts at the canonical settings (projected onto the planar
    parameterization when possible); the rest start at seeded uniform angles.
    The start point is kept if ascent never improves on it.
    """
    if state.n != expr.n:
        raise BellError(f"state has n={state.n}, expression has n={expr.n}")
    if restarts < 1:
        raise BellError("restarts must be >= 1")
    param = SettingsParameterization(mode, expr.n)

    if expr.n <= TENSOR_MAX_N:
        tensor = correlation_tensor(state)
        index = tuple(np.array([t.choice for t in expr.terms]).T - 1)
        weights = np.array([t.coeff_sign for t in expr.terms], dtype=float)

        def objective(x: np.ndarray) -> float:
            corr = settings_correlators(tensor, param.vectors(x))
            return float(weights @ corr[index]) * expr.normalization

    else:

        def objective(x: np.ndarray) -> float:
            return expectation(expr, param.decode(x), state)

    rng = np.random.default_rng(seed)
    starts = [param.encode(canonical_settings(expr.n))]
    for _ in range(restarts - 1):
        if mode == "planar":
            starts.append(rng.uniform(-math.pi, math.pi, param.size))
        else:
            a = rng.uniform(0.0, 1.0, (expr.n, 2, 2))
            # uniform on the sphere: cos(theta) uniform in [-1, 1]
            a[..., 0] = np.arccos(1.0 - 2.0 * a[..., 0])
            a[..., 1] = 2.0 * math.pi * a[..., 1] - math.pi
            starts.append(a.reshape(-1))

    def run(x0: np.ndarray) -> tuple[np.ndarray, float, float]:
        start_value = objective(x0)
        x, value = _ascend(objective, x0)
        if value < start_value:
            return x0, start_value, start_value
        return x, value, start_value

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, starts))
    else:
        results = [run(x0) for x0 in starts]

    best = max(range(len(results)), key=lambda k: (results[k][1], -k))
    x = results[best][0]
    settings = param.decode(x)
    return OptimizeResult(
        settings=settings,
        value=expectation(expr, settings, state),
        restart=best,
        start_values=tuple(r[2] for r in results),
    )


def claimed_ghz_value(n: int) -> float:
    return math.sqrt(2.0) if n % 4 == 2 else 2.0


def calibrate_sign(n: int) -> int:
    """Pick the plus-product sign for which GHZ_n reaches its claimed value.

    Evaluates both signs at the canonical settings; the winner must hit
    sqrt(2) (n = 2 mod 4) or 2 and the loser must give 0.  Anything else is
    reported as a ``CalibrationError`` rather than guessed around.
    """
    settings = canonical_settings(n)
    ghz = make_ghz(n)
    values = {s: expectation(build_bell_expression(n, s), settings, ghz) for s in (1, -1)}
    winner = max(values, key=lambda s: values[s])
    loser = -winner
    target = claimed_ghz_value(n)
    if abs(values[winner] - target) > CALIBRATION_TOL or abs(values[loser]) > CALIBRATION_TOL:
        raise CalibrationError(
            f"n={n}: sign +1 gives {values[1]!r}, sign -1 gives {values[-1]!r}; "
            f"expected one of them to reach {target!r} and the other 0"
        )
    return winner
