"""Nonlinear least-squares fits for decay and oscillation experiments.

Two model families cover every experiment in the package:

* ``exp_decay``:      ``y = A exp(-x / tau) + B``
* ``damped_cosine``:  ``y = a exp(-lambda x) cos(omega x + phi) + b``

Both are fitted with a damped Gauss--Newton (Levenberg--Marquardt) loop on
an unconstrained parameterisation (``tau = exp(u)`` keeps time constants
positive).  Oscillation fits are seeded from the discrete Fourier spectrum
and are compared against a nested pure-decay fit; when the cosine does not
clearly beat the decay the result is flagged ``no_oscillation`` (and the
decay parameters are returned with ``omega = 0``).  Flat data short-circuits
to a ``no_decay`` flag so downstream error rates can report zero cleanly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = ["FitResult", "evaluate_model", "fit_exponential", "fit_damped_cosine"]

_REL_STEP_TOL = 1e-9
_MAX_ITERATIONS = 200


@dataclass(frozen=True)
class FitResult:
    """Fitted parameters with standard errors and quality flags."""

    model: str
    params: dict[str, float]
    stderr: dict[str, float]
    rss: float
    converged: bool
    n_iterations: int
    flags: tuple[str, ...] = field(default_factory=tuple)

    def predict(self, x: np.ndarray) -> np.ndarray:
        return evaluate_model(self.model, self.params, x)


def evaluate_model(model: str, params: dict[str, float], x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if model == "exp_decay":
        tau = params["tau"]
        decay = np.exp(-x / tau) if np.isfinite(tau) else np.ones_like(x)
        return params["A"] * decay + params["B"]
    if model == "geometric_decay":
        return params["A"] * params["alpha"] ** x + params["B"]
    if model == "damped_cosine":
        return (
            params["a"]
            * np.exp(-params["lambda"] * x)
            * np.cos(params["omega"] * x + params["phi"])
            + params["b"]
        )
    raise ValueError(f"unknown fit model {model!r}")


def _numeric_jacobian(residual: Callable[[np.ndarray], np.ndarray], p: np.ndarray) -> np.ndarray:
    base = residual(p)
    jac = np.empty((base.size, p.size))
    for k in range(p.size):
        step = 1e-6 * max(1.0, abs(p[k]))
        forward = p.copy()
        backward = p.copy()
        forward[k] += step
        backward[k] -= step
        jac[:, k] = (residual(forward) - residual(backward)) / (2.0 * step)
    return jac


def _levenberg_marquardt(
    residual: Callable[[np.ndarray], np.ndarray],
    p0: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, float, bool, int]:
    """Return (params, covariance, rss, converged, iterations)."""
    p = np.asarray(p0, dtype=np.float64).copy()
    r = residual(p)
    rss = float(r @ r)
    lam = 1e-3
    converged = False
    iterations = 0
    for iterations in range(1, _MAX_ITERATIONS + 1):
        jac = _numeric_jacobian(residual, p)
        gram = jac.T @ jac
        grad = jac.T @ r
        accepted = False
        for _ in range(25):
            damped = gram + lam * (np.diag(np.diag(gram)) + 1e-12 * np.eye(p.size))
            try:
                delta = np.linalg.solve(damped, -grad)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            candidate = p + delta
            r_new = residual(candidate)
            rss_new = float(r_new @ r_new)
            if np.isfinite(rss_new) and rss_new <= rss:
                rel_step = float(np.max(np.abs(delta) / (np.abs(p) + 1.0)))
                p, r, rss = candidate, r_new, rss_new
                lam = max(lam / 3.0, 1e-12)
                accepted = True
                if rel_step < _REL_STEP_TOL:
                    converged = True
                break
            lam *= 3.0
        if not accepted:
            converged = True  # no downhill direction left at machine scale
            break
        if converged:
            break
    jac = _numeric_jacobian(residual, p)
    gram = jac.T @ jac
    dof = max(r.size - p.size, 1)
    sigma2 = rss / dof
    cov = sigma2 * np.linalg.pinv(gram)
    return p, cov, rss, converged, iterations


def _check_xy(x: np.ndarray, y: np.ndarray, min_points: int) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.size != y.size:
        raise ValueError("x and y must have equal length")
    if x.size < min_points:
        raise ValueError(f"need at least {min_points} points, got {x.size}")
    return x, y


def fit_exponential(x: np.ndarray, y: np.ndarray) -> FitResult:
    """Fit ``y = A exp(-x / tau) + B`` with ``tau > 0``.

    Returns ``tau = inf`` with a ``no_decay`` flag when the data carry no
    resolvable decay (flat series), so callers can map the result to a zero
    error rate instead of a spurious time constant.
    """
    x, y = _check_xy(x, y, 4)
    y_span = float(y.max() - y.min())
    if y_span < 1e-12:
        params = {"A": 0.0, "tau": float("inf"), "B": float(np.mean(y))}
        stderr = {"A": 0.0, "tau": float("inf"), "B": 0.0}
        return FitResult("exp_decay", params, stderr, 0.0, True, 0, ("no_decay",))

    b0 = float(y[-1])
    a0 = float(y[0] - b0)
    if abs(a0) < 1e-12:
        a0 = y_span if y[0] >= y[-1] else -y_span
    # Time-constant seed from a log-linear regression on the normalised decay.
    span = float(x.max() - x.min()) or 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        normed = (y - b0) / a0
        mask = normed > 1e-3
        if mask.sum() >= 2:
            slope = np.polyfit(x[mask], np.log(normed[mask]), 1)[0]
            tau0 = -1.0 / slope if slope < 0 else span
        else:
            tau0 = span / 3.0
    tau0 = float(min(max(tau0, span * 1e-3), span * 1e3))

    def residual(p: np.ndarray) -> np.ndarray:
        amp, log_tau, offset = p
        with np.errstate(over="ignore"):
            return amp * np.exp(-x / np.exp(log_tau)) + offset - y

    p0 = np.array([a0, np.log(tau0), b0])
    p, cov, rss, converged, iters = _levenberg_marquardt(residual, p0)
    amp, log_tau, offset = p
    err = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    with np.errstate(over="ignore", invalid="ignore"):
        tau = float(np.exp(log_tau))
        tau_err = float(tau * err[1])
    params = {"A": float(amp), "tau": tau, "B": float(offset)}
    stderr = {"A": float(err[0]), "tau": tau_err, "B": float(err[2])}
    flags: tuple[str, ...] = ()
    residual_sigma = float(np.sqrt(rss / max(y.size - 3, 1)))
    if tau > 100.0 * span or abs(amp) < 3.0 * residual_sigma:
        flags = ("no_decay",)
    return FitResult("exp_decay", params, stderr, float(rss), converged, iters, flags)


def fit_geometric(x: np.ndarray, y: np.ndarray) -> FitResult:
    """Fit ``y = A alpha**x + B`` with ``0 < alpha <= 1``.

    This is the discrete-step form of the exponential decay (``alpha =
    exp(-1/tau)``) used for sequence-length data such as randomized-
    benchmarking survival curves.  A flat series maps to ``alpha = 1`` with a
    ``no_decay`` flag.
    """
    base = fit_exponential(x, y)
    tau = base.params["tau"]
    if np.isinf(tau):
        alpha = 1.0
        alpha_err = 0.0
    else:
        alpha = float(np.exp(-1.0 / tau))
        # d(alpha)/d(tau) = alpha / tau**2
        alpha_err = float(alpha * base.stderr["tau"] / tau**2)
    params = {"A": base.params["A"], "alpha": alpha, "B": base.params["B"]}
    stderr = {"A": base.stderr["A"], "alpha": alpha_err, "B": base.stderr["B"]}
    return FitResult(
        "geometric_decay",
        params,
        stderr,
        base.rss,
        base.converged,
        base.n_iterations,
        base.flags,
    )


def _spectrum_seed(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """(omega, amplitude, phase) seed from the dominant non-DC Fourier bin."""
    n = x.size
    dx = float(np.mean(np.diff(x)))
    detrended = y - float(np.mean(y))
    spectrum = np.fft.rfft(detrended)
    amps = np.abs(spectrum)
    if amps.size <= 1:
        return 0.0, 0.0, 0.0
    k_star = 1 + int(np.argmax(amps[1:]))
    omega = 2.0 * np.pi * k_star / (n * dx)
    amplitude = 2.0 * amps[k_star] / n
    phase = float(np.angle(spectrum[k_star])) - omega * float(x[0])
    return float(omega), float(amplitude), phase


def fit_damped_cosine(
    x: np.ndarray,
    y: np.ndarray,
    *,
    fix_phase: float | None = None,
) -> FitResult:
    """Fit ``y = a exp(-lambda x) cos(omega x + phi) + b``.

    ``fix_phase`` pins ``phi`` (e.g. to 0 for experiments that start at an
    extremum).  The fit is seeded from the Fourier spectrum; a nested pure
    decay is fitted as well, and if the cosine fails to reduce the residual
    sum of squares below 80% of the decay's the series is declared
    oscillation-free: flag ``no_oscillation``, ``omega = phi = 0`` and the
    decay parameters are returned.
    """
    x, y = _check_xy(x, y, 6)
    decay_fit = fit_exponential(x, y)
    omega0, amp0, phi0 = _spectrum_seed(x, y)
    span = float(x.max() - x.min()) or 1.0
    if omega0 <= 0.0:
        omega0 = 2.0 * np.pi / span
    if amp0 <= 0.0:
        amp0 = max(float(np.std(y)), 1e-6)
    lam0 = max(1.0 / (2.0 * span), 1e-9)
    b0 = float(np.mean(y))
    if fix_phase is not None:
        phi0 = float(fix_phase)

    def residual(p: np.ndarray) -> np.ndarray:
        if fix_phase is None:
            amp, log_lam, omega, phi, offset = p
        else:
            amp, log_lam, omega, offset = p
            phi = fix_phase
        return amp * np.exp(-np.exp(log_lam) * x) * np.cos(omega * x + phi) + offset - y

    if fix_phase is None:
        p0 = np.array([amp0, np.log(lam0), omega0, phi0, b0])
    else:
        p0 = np.array([amp0, np.log(lam0), omega0, b0])
    p, cov, rss, converged, iters = _levenberg_marquardt(residual, p0)
    err = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    if fix_phase is None:
        amp, log_lam, omega, phi, offset = p
        err_map = dict(zip(("a", "lambda", "omega", "phi", "b"), err))
    else:
        amp, log_lam, omega, offset = p
        phi = float(fix_phase)
        err_map = dict(zip(("a", "lambda", "omega", "b"), err))
        err_map["phi"] = 0.0
    lam = float(np.exp(log_lam))

    min_cycles_ok = abs(omega) * span >= np.pi
    beats_decay = rss < 0.8 * decay_fit.rss
    if not (min_cycles_ok and beats_decay):
        dparams = decay_fit.params
        params = {
            "a": dparams["A"],
            "lambda": 1.0 / dparams["tau"] if np.isfinite(dparams["tau"]) else 0.0,
            "omega": 0.0,
            "phi": 0.0,
            "b": dparams["B"],
        }
        stderr = {"a": decay_fit.stderr["A"], "lambda": 0.0, "omega": 0.0, "phi": 0.0, "b": decay_fit.stderr["B"]}
        flags = ("no_oscillation",) + decay_fit.flags
        return FitResult("damped_cosine", params, stderr, decay_fit.rss, decay_fit.converged, iters, flags)

    # Canonical sign conventions: positive amplitude and frequency.
    if omega < 0:
        omega, phi = -omega, -phi
    if amp < 0 and fix_phase is None:
        amp, phi = -amp, phi + np.pi
    phi = float((phi + np.pi) % (2.0 * np.pi) - np.pi) if fix_phase is None else phi
    params = {"a": float(amp), "lambda": lam, "omega": float(omega), "phi": float(phi), "b": float(offset)}
    stderr = {
        "a": float(err_map["a"]),
        "lambda": float(lam * err_map["lambda"]),
        "omega": float(err_map["omega"]),
        "phi": float(err_map["phi"]),
        "b": float(err_map["b"]),
    }
    return FitResult("damped_cosine", params, stderr, float(rss), converged, iters, ())
