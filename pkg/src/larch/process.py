# -*- test-case-name: larch.test.test_process -*-
"""
Causal autoregressive processes::

    X_t = phi_1 X_{t-1} + ... + phi_p X_{t-p} + Z_t

with i.i.d. Gaussian innovations C{Z_t}: their moving-average expansions,
autocovariances, and seeded simulation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import inf, isfinite, log as _log
from typing import Sequence

import numpy as np
import numpy.typing as npt
from numpy.lib.stride_tricks import sliding_window_view
from scipy.linalg import toeplitz
from scipy.signal import lfilter
from twisted.logger import Logger

from .boundaries import (
    DegenerateInput,
    DomainError,
    FloatArray,
    InvalidInput,
    JSONObject,
    Lag,
)

log = Logger()

_TAIL_WINDOW = 64
"""
Minimum number of trailing MA weights whose largest magnitude seeds the
geometric tail estimate.
"""

_MAX_TRUNCATION = 1 << 24


def _frozen(values: npt.ArrayLike, ndim: int = 1) -> FloatArray:
    """
    Copy C{values} into a read-only float array with C{ndim} dimensions.
    """
    array = np.array(values, dtype=np.float64)
    if array.ndim != ndim:
        raise InvalidInput(
            f"expected a {ndim}-dimensional array, got shape {array.shape}"
        )
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class Causality:
    """
    The result of L{checkCausality}.

    @ivar causal: Do all roots of C{1 - phi_1 z - ... - phi_p z^p} lie
        strictly outside the closed unit disc?

    @ivar margin: The smallest root modulus minus one; C{inf} when the
        polynomial is constant (white noise).
    """

    causal: bool
    margin: float


def _schurCohnStable(coefficients: FloatArray) -> bool:
    """
    Step the reversed polynomial C{z^p - phi_1 z^(p-1) - ... - phi_p} down
    through its reflection coefficients; it has every root inside the unit
    circle iff every reflection coefficient is smaller than one in modulus.
    """
    monic = -coefficients
    while monic.size:
        k = float(monic[-1])
        if not abs(k) < 1.0:
            return False
        monic = (monic[:-1] - k * monic[-2::-1]) / (1.0 - k * k)
    return True


def _rootMargin(coefficients: FloatArray) -> float:
    trimmed = np.trim_zeros(coefficients, "b")
    if trimmed.size == 0:
        return inf
    roots = np.roots(np.r_[-trimmed[::-1], 1.0])
    return float(np.min(np.abs(roots))) - 1.0


def checkCausality(coefficients: Sequence[float] | FloatArray) -> Causality:
    """
    Decide whether the autoregressive polynomial with the given coefficients
    describes a causal process.

    The boolean answer comes from the Schur-Cohn stability table, which is
    exact up to rounding; the margin comes from the polynomial's roots.

    @raise InvalidInput: if C{coefficients} is empty or not finite.
    """
    phi = np.asarray(coefficients, dtype=np.float64)
    if phi.ndim != 1 or phi.size == 0:
        raise InvalidInput("coefficients must be a non-empty vector")
    if not np.all(np.isfinite(phi)):
        raise InvalidInput("coefficients must be finite")
    return Causality(_schurCohnStable(phi), _rootMargin(phi))


@dataclass(frozen=True, eq=False)
class ArModel:
    """
    A causal AR(p) model.

    @ivar coefficients: C{(phi_1, ..., phi_p)}.
    @ivar noiseSD: The innovation standard deviation C{sigma}.
    @ivar causality: Computed at construction; construction fails for
        non-causal coefficients.
    """

    coefficients: FloatArray
    noiseSD: float
    causality: Causality = field(init=False, repr=False)

    def __post_init__(self) -> None:
        coefficients = _frozen(self.coefficients)
        object.__setattr__(self, "coefficients", coefficients)
        if not (isfinite(self.noiseSD) and self.noiseSD > 0):
            raise InvalidInput(
                f"sigma must be positive and finite, not {self.noiseSD!r}"
            )
        causality = checkCausality(coefficients)
        if not causality.causal:
            raise DomainError(
                f"AR polynomial has a root in the closed unit disc "
                f"(margin {causality.margin:.3g}); model is not causal"
            )
        object.__setattr__(self, "causality", causality)

    @property
    def p(self) -> int:
        "The order of the model."
        return int(self.coefficients.size)

    def support(self) -> tuple[Lag, ...]:
        """
        The lags with nonzero coefficients.
        """
        return tuple(int(j) + 1 for j in np.flatnonzero(self.coefficients))

    def coefficientsTo(self, p: int) -> FloatArray:
        """
        The coefficient vector zero-padded (or cut) to length C{p}, as the
        true parameter of a C{p}-lag regression.

        @raise InvalidInput: if cutting would drop a nonzero coefficient.
        """
        if p < 1:
            raise InvalidInput(f"p must be at least 1, not {p}")
        if any(lag > p for lag in self.support()):
            raise InvalidInput(
                f"model has nonzero lags beyond p = {p}: {self.support()}"
            )
        padded = np.zeros(p)
        keep = min(p, self.p)
        padded[:keep] = self.coefficients[:keep]
        return padded

    def lagPolynomial(self, z: npt.ArrayLike) -> npt.NDArray[np.complex128]:
        """
        Evaluate C{1 - phi_1 z - ... - phi_p z^p} at (complex) C{z}.
        """
        return np.polynomial.polynomial.polyval(
            np.asarray(z, dtype=np.complex128),
            np.r_[1.0, -self.coefficients],
        )

    def toJSON(self) -> JSONObject:
        return {"phi": self.coefficients.tolist(), "sigma": self.noiseSD}

    @classmethod
    def fromJSON(cls, json: JSONObject) -> ArModel:
        try:
            phi = json["phi"]
            sigma = json["sigma"]
        except KeyError as missing:
            raise InvalidInput(f"model JSON lacks field {missing}") from None
        if not isinstance(phi, list) or not all(
            isinstance(each, (int, float)) for each in phi
        ):
            raise InvalidInput('model field "phi" must be a list of numbers')
        if not isinstance(sigma, (int, float)):
            raise InvalidInput('model field "sigma" must be a number')
        return cls(np.array(phi, dtype=np.float64), float(sigma))


@dataclass(frozen=True, eq=False)
class MaExpansion:
    """
    Truncated MA(infinity) weights C{psi_0, ..., psi_K} of a causal model.

    @ivar tailBound: An estimate of C{sum_(j > K) |psi_j|} extrapolated from
        the geometric decay rate implied by the root margin.
    """

    psi: FloatArray
    truncationOrder: int
    tailBound: float


@dataclass(frozen=True, eq=False)
class AutocovSequence:
    """
    Autocovariances C{gamma(0), ..., gamma(K)}.
    """

    gamma: FloatArray

    def __post_init__(self) -> None:
        gamma = _frozen(self.gamma)
        if gamma.size == 0 or not gamma[0] > 0:
            raise InvalidInput("gamma(0) must be positive")
        object.__setattr__(self, "gamma", gamma)

    @property
    def maxLag(self) -> int:
        return int(self.gamma.size) - 1


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """
    A realized series: C{pPresample} retained pre-sample values followed by
    C{n} usable values.

    @ivar seed: The seed that generated the series, or C{None} for data that
        was not simulated.
    """

    values: FloatArray
    n: int
    pPresample: int = 0
    seed: int | None = None

    def __post_init__(self) -> None:
        values = _frozen(self.values)
        if self.n < 1 or self.pPresample < 0:
            raise InvalidInput(
                f"need n >= 1 and p_presample >= 0, got n = {self.n}, "
                f"p_presample = {self.pPresample}"
            )
        if values.size != self.n + self.pPresample:
            raise InvalidInput(
                f"series has {values.size} values, expected n + p_presample "
                f"= {self.n + self.pPresample}"
            )
        if not np.all(np.isfinite(values)):
            raise InvalidInput("series values must be finite")
        object.__setattr__(self, "values", values)

    @property
    def usable(self) -> FloatArray:
        "The last C{n} values."
        return self.values[self.pPresample :]

    @property
    def observed(self) -> TimeSeries:
        """
        The same values with none of them held back as pre-sample.
        """
        if self.pPresample == 0:
            return self
        return TimeSeries(self.values, self.values.size, 0, self.seed)


def _psiWeights(coefficients: FloatArray, count: int) -> FloatArray:
    impulse = np.zeros(count)
    impulse[0] = 1.0
    psi: FloatArray = lfilter([1.0], np.r_[1.0, -coefficients], impulse)
    return psi


def _tailEstimates(
    psi: FloatArray, order: int, margin: float
) -> FloatArray:
    """
    For every K, estimate C{sum_(j > K) |psi_j|}: each window maximum of
    C{|psi|} is extrapolated at the decay rate C{1 / (1 + margin)}, and the
    smallest extrapolation seen so far is kept, so the estimate never
    increases with K.
    """
    if not isfinite(margin):
        return np.zeros_like(psi)
    rate = 1.0 / (1.0 + margin)
    if not 0.0 < rate < 1.0:
        raise DomainError(f"root margin {margin!r} implies no decay")
    window = max(order, _TAIL_WINDOW)
    padded = np.concatenate([np.zeros(window - 1), np.abs(psi)])
    windowMax = sliding_window_view(padded, window).max(axis=1)
    orders = np.arange(psi.size, dtype=np.float64)
    logRate = _log(rate)
    with np.errstate(divide="ignore"):
        anchored = np.log(windowMax) - orders * logRate
    best = np.minimum.accumulate(anchored)
    tail: FloatArray = rate / (1.0 - rate) * np.exp(best + orders * logRate)
    return tail


def maCoefficients(model: ArModel, K: int) -> MaExpansion:
    """
    Compute C{psi_0 = 1} and C{psi_k = sum_(j <= min(k, p)) phi_j psi_(k-j)}
    for C{1 <= k <= K}.
    """
    if K < 0:
        raise InvalidInput(f"truncation order must be >= 0, not {K}")
    psi = _psiWeights(model.coefficients, K + 1)
    tail = _tailEstimates(psi, model.p, model.causality.margin)
    return MaExpansion(_frozen(psi), K, float(tail[-1]))


def autocovariance(
    model: ArModel, K: int, tol: float = 1e-12
) -> AutocovSequence:
    """
    Compute C{gamma(h) = sigma^2 sum_j psi_j psi_(j+h)} for C{h <= K}, with
    the MA weights truncated where the neglected tail contributes less than
    C{tol} to every C{gamma(h)}.

    @raise DomainError: if the model is so close to the unit circle that no
        practical truncation reaches C{tol}.
    """
    if K < 0:
        raise InvalidInput(f"maximum lag must be >= 0, not {K}")
    if not tol > 0:
        raise InvalidInput(f"tol must be positive, not {tol!r}")
    variance = model.noiseSD**2
    length = max(2 * (K + 1), 256)
    while True:
        psi = _psiWeights(model.coefficients, length)
        tail = _tailEstimates(psi, model.p, model.causality.margin)
        scale = variance * float(np.max(np.abs(psi)))
        adequate = np.flatnonzero(scale * tail[K:] < tol)
        if adequate.size:
            order = K + int(adequate[0])
            break
        if length >= _MAX_TRUNCATION:
            raise DomainError(
                f"MA weights did not decay below tol = {tol!r} within "
                f"{length} terms"
            )
        length *= 2
    psi = psi[: order + 1]
    gamma = variance * np.array(
        [psi[: psi.size - h] @ psi[h:] for h in range(K + 1)]
    )
    log.debug(
        "autocovariance to lag {K} used {terms} MA weights",
        K=K,
        terms=order + 1,
    )
    return AutocovSequence(gamma)


def toeplitzGamma(gamma: AutocovSequence, p: int) -> FloatArray:
    """
    The C{p x p} symmetric Toeplitz matrix with entries C{gamma(|i - j|)}.
    """
    if p < 1 or p - 1 > gamma.maxLag:
        raise InvalidInput(
            f"p = {p} needs autocovariances up to lag {p - 1}, "
            f"have up to lag {gamma.maxLag}"
        )
    return _frozen(toeplitz(gamma.gamma[:p]), ndim=2)


def randomGenerator(seed: int, stream: int = 0) -> np.random.Generator:
    """
    A counter-based (Philox) generator keyed by C{(seed, stream)}; distinct
    streams of the same seed are independent.
    """
    if seed < 0 or stream < 0:
        raise InvalidInput(f"seed and stream must be >= 0, got {seed}")
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence([seed, stream]))
    )


def simulate(
    model: ArModel,
    n: int,
    pPresample: int | None = None,
    burnIn: int | None = None,
    seed: int = 0,
) -> TimeSeries:
    """
    Simulate the model from a zero state, discard C{burnIn} values and keep
    the last C{n + pPresample}.

    @param pPresample: Leading values to retain for lagged regressors;
        defaults to the model order.
    @param burnIn: Defaults to C{10 p + 1000}.
    """
    if pPresample is None:
        pPresample = model.p
    if burnIn is None:
        burnIn = 10 * model.p + 1000
    if n < 1:
        raise InvalidInput(f"n must be >= 1, not {n}")
    if burnIn < 0 or pPresample < 0:
        raise InvalidInput("burn-in and p_presample must be >= 0")
    total = burnIn + n + pPresample
    innovations = randomGenerator(seed).normal(0.0, model.noiseSD, total)
    path = lfilter([1.0], np.r_[1.0, -model.coefficients], innovations)
    return TimeSeries(path[burnIn:], n, pPresample, seed)


def sampleAutocovariance(
    series: TimeSeries, maxLag: int, demean: bool = True
) -> FloatArray:
    """
    The biased sample autocovariances C{(1/n) sum_t x_t x_(t+h)} of the
    usable values, for C{h = 0..maxLag}.
    """
    x = series.usable
    if not 0 <= maxLag < x.size:
        raise InvalidInput(
            f"maxLag must be in [0, {x.size - 1}], not {maxLag}"
        )
    if demean:
        x = x - x.mean()
    n = x.size
    return np.array([x[: n - h] @ x[h:] for h in range(maxLag + 1)]) / n


def sampleAutocorrelation(series: TimeSeries, maxLag: int) -> FloatArray:
    """
    Sample autocorrelations C{rho(0) = 1, ..., rho(maxLag)}.

    @raise DegenerateInput: for a constant series.
    """
    gamma = sampleAutocovariance(series, maxLag)
    if gamma[0] == 0:
        raise DegenerateInput("constant series has no autocorrelation")
    rho: FloatArray = gamma / gamma[0]
    return rho


__all__ = [
    "ArModel",
    "AutocovSequence",
    "Causality",
    "MaExpansion",
    "TimeSeries",
    "autocovariance",
    "checkCausality",
    "maCoefficients",
    "randomGenerator",
    "sampleAutocorrelation",
    "sampleAutocovariance",
    "simulate",
    "toeplitzGamma",
]
