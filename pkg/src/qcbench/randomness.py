"""Deterministic random-stream plumbing.

Every stochastic component in the package draws from a
``numpy.random.Generator`` seeded through :func:`child_seed`, which hashes a
master seed together with string/integer tags.  That keeps independent
experiment stages on independent streams while making the whole tree a pure
function of the single user-supplied seed.

Model-parameter draws (qubit T1/T2, drift jitter) go through
:func:`normal_icdf`, an explicit double-precision inverse normal CDF, so the
values depend only on the raw 53-bit uniforms and never on the history or
version of any library's normal sampler.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["child_seed", "make_rng", "normal_icdf", "normal_from_uniform"]


def child_seed(master: int, *tags: object) -> int:
    """Derive a 64-bit child seed from a master seed and a tag path.

    The derivation is a SHA-256 of the decimal master seed and the ``repr``
    of each tag, so it is stable across platforms and Python versions for
    int/str/float tags.
    """
    hasher = hashlib.sha256()
    hasher.update(str(int(master)).encode())
    for tag in tags:
        hasher.update(b"/")
        hasher.update(repr(tag).encode())
    return int.from_bytes(hasher.digest()[:8], "big")


def make_rng(master: int, *tags: object) -> np.random.Generator:
    """PCG64 generator on the stream identified by ``(master, *tags)``."""
    return np.random.Generator(np.random.PCG64(child_seed(master, *tags)))


# Coefficients of Wichura's AS 241 rational approximations (double precision).
_A = (
    3.3871328727963666080e0, 1.3314166789178437745e2, 1.9715909503065514427e3,
    1.3731693765509461125e4, 4.5921953931549871457e4, 6.7265770927008700853e4,
    3.3430575583588128105e4, 2.5090809287301226727e3,
)
_B = (
    1.0, 4.2313330701600911252e1, 6.8718700749205790830e2,
    5.3941960214247511077e3, 2.1213794301586595867e4, 3.9307895800092710610e4,
    2.8729085735721942674e4, 5.2264952788528545610e3,
)
_C = (
    1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
    3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
    2.27238449892691845833e-2, 7.74545014278341407640e-4,
)
_D = (
    1.0, 2.05319162663775882187e0, 1.67638483018380384940e0,
    6.89767334985100004550e-1, 1.48103976427480074590e-1,
    1.51986665636164571966e-2, 5.47593808499534494600e-4,
    1.05075007164441684324e-9,
)
_E = (
    6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
    2.96560571828504891230e-1, 2.65321895265761230930e-2,
    1.24266094738807843860e-3, 2.71155556874348757815e-5,
    2.01033439929228813265e-7,
)
_F = (
    1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1,
    1.48753612908506148525e-2, 7.86869131145613259100e-4,
    1.84631831751005468180e-5, 1.42151175831644588870e-7,
    2.04426310338993978564e-15,
)


def _poly(coeffs: tuple[float, ...], x: float) -> float:
    acc = 0.0
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def normal_icdf(p: float) -> float:
    """Inverse standard normal CDF (Wichura AS 241, ~1e-16 relative accuracy)."""
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie strictly between 0 and 1")
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        return q * _poly(_A, r) / _poly(_B, r)
    r = p if q < 0.0 else 1.0 - p
    r = np.sqrt(-np.log(r))
    if r <= 5.0:
        r -= 1.6
        val = _poly(_C, r) / _poly(_D, r)
    else:
        r -= 5.0
        val = _poly(_E, r) / _poly(_F, r)
    return -val if q < 0.0 else val


def normal_from_uniform(rng: np.random.Generator) -> float:
    """One N(0,1) draw via the inverse CDF applied to a 53-bit uniform."""
    # random() returns u in [0, 1); shift to (0, 1) to keep the ICDF finite.
    u = rng.random()
    if u <= 0.0:
        u = 2.0**-54
    return normal_icdf(u)
