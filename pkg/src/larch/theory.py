# -*- test-case-name: larch.test.test_theory -*-
"""
Numerical evaluation of the hypotheses, rates, constants and probability
bounds of the consistency theory of the weighted lasso for autoregressions,
so that they can be checked for concrete C{(model, n, penalty)} instances.

Every evaluator here is a pure function of its arguments.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil, exp, isfinite, log as _log, sqrt

import numpy as np
import numpy.typing as npt
from scipy.linalg import LinAlgError, cholesky, eigvalsh, solve
from twisted.logger import Logger

from .boundaries import (
    DomainError,
    FloatArray,
    InvalidInput,
    JSONObject,
    SingularMatrix,
    Verdict,
)
from .lasso import PenaltyConfig
from .process import ArModel, autocovariance, toeplitzGamma

log = Logger()

C1 = 2.0**10 * 12.0**2
"Constant of the moment inequality for sums of mixing variables."
C2 = 2.0**-3 * 12.0**-2
"Companion constant of L{C1}."

CIRCLE_POINTS = 10_000
"Grid points on the circle C{|z| = rho} used by L{transferBounds}."

_JITTER = 1e-12


@dataclass(frozen=True)
class SignConditionReport:
    """
    The quantities of the sign-consistency theorem for one instance.

    Fields that need a nonempty support C{S} (or a nonempty complement
    C{S^c}) are C{None} when it is empty.

    @ivar cMax: The spectral norm of C{Gamma_SS^-1}, i.e. one over the
        smallest eigenvalue of C{Gamma_SS}.
    @ivar cMaxInf: The maximum-row-sum norm of C{Gamma_SS^-1}.
    @ivar incoherence: C{||Gamma_(S^c S) Gamma_SS^-1||_inf}.
    @ivar epsilon: C{1 - incoherence}.
    @ivar minSignal: The smallest nonzero coefficient in modulus.
    @ivar cond1Ratio: The largest weight on C{S} over the smallest weight on
        C{S^c}; must stay bounded by one.
    @ivar cond2Value: C{(sqrt(s/n) + lambda_n max_S lambda_(n,j)) /
        minSignal}; must tend to zero.
    @ivar cond3Value: C{n lambda_n^2 (min_(S^c) lambda_(n,j))^2 /
        max(s, nu)}; must tend to infinity.
    """

    s: int
    nu: int
    cMax: float | None
    cMaxInf: float | None
    incoherence: float | None
    epsilon: float | None
    minSignal: float | None
    cond1Ratio: float | None
    cond2Value: float | None
    cond3Value: float | None

    def toJSON(self) -> JSONObject:
        return {
            "s": self.s,
            "nu": self.nu,
            "c_max": self.cMax,
            "c_max_inf": self.cMaxInf,
            "incoherence": self.incoherence,
            "epsilon": self.epsilon,
            "min_signal": self.minSignal,
            "cond1_ratio": self.cond1Ratio,
            "cond2_value": self.cond2Value,
            "cond3_value": self.cond3Value,
        }


def _square(matrix: npt.ArrayLike, name: str) -> FloatArray:
    array = np.asarray(matrix, dtype=np.float64)
    if array.ndim != 2 or array.shape[0] != array.shape[1]:
        raise InvalidInput(f"{name} must be square, got shape {array.shape}")
    return array


def signConditions(
    gammaP: npt.ArrayLike,
    phiStar: npt.ArrayLike,
    penalty: PenaltyConfig,
    n: int,
) -> SignConditionReport:
    """
    Evaluate conditions (i) and (ii) of the sign-consistency theorem and
    its three penalty-rate expressions.

    @raise SingularMatrix: if C{Gamma_SS} is singular.
    """
    gamma = _square(gammaP, "gamma_p")
    phi = np.asarray(phiStar, dtype=np.float64)
    p = gamma.shape[0]
    if phi.shape != (p,) or penalty.p != p:
        raise InvalidInput(
            f"phi* ({phi.size}) and weights ({penalty.p}) must have p = {p} "
            "entries"
        )
    if n < 1:
        raise InvalidInput(f"n must be at least 1, not {n}")
    support = np.flatnonzero(phi)
    complement = np.flatnonzero(phi == 0)
    s, nu = int(support.size), int(complement.size)
    weights = penalty.weights
    lam = penalty.lambdaN
    cMax = cMaxInf = incoherence = epsilon = None
    minSignal = cond1 = cond2 = cond3 = None
    if s:
        block = gamma[np.ix_(support, support)]
        smallest = float(eigvalsh(block)[0])
        if smallest <= np.finfo(np.float64).eps * s * abs(block).max():
            raise SingularMatrix(
                f"Gamma_SS is singular (smallest eigenvalue {smallest:.3g})"
            )
        cMax = 1.0 / smallest
        try:
            inverse = solve(block, np.eye(s), assume_a="sym")
        except LinAlgError as error:
            raise SingularMatrix(f"Gamma_SS: {error}") from None
        cMaxInf = float(np.abs(inverse).sum(axis=1).max())
        minSignal = float(np.abs(phi[support]).min())
        cond2 = (sqrt(s / n) + lam * float(weights[support].max())) / minSignal
        if nu:
            cross = gamma[np.ix_(complement, support)] @ inverse
            incoherence = float(np.abs(cross).sum(axis=1).max())
            epsilon = 1.0 - incoherence
            smallestFree = float(weights[complement].min())
            largestActive = float(weights[support].max())
            cond1 = (
                largestActive / smallestFree
                if smallestFree > 0
                else (0.0 if largestActive == 0 else float("inf"))
            )
            cond3 = n * lam**2 * smallestFree**2 / max(s, nu)
    return SignConditionReport(
        s,
        nu,
        cMax,
        cMaxInf,
        incoherence,
        epsilon,
        minSignal,
        cond1,
        cond2,
        cond3,
    )


def estimationRate(
    n: int, p: int, lambdaN: float, weightsSNorm: float
) -> float:
    """
    The estimation-consistency rate C{p^(1/2) (n^(-1/2) + lambda_n
    ||lambda_(n,S)||)}.
    """
    if n < 1 or p < 1:
        raise InvalidInput(f"need n, p >= 1, got n = {n}, p = {p}")
    return sqrt(p) * (1.0 / sqrt(n) + lambdaN * weightsSNorm)


def kappaP(gammaP: npt.ArrayLike, tol: float = 1e-10) -> float:
    """
    The largest C{kappa} for which C{Gamma_p - kappa diag(Gamma_p)} is
    positive semi-definite, i.e. the smallest eigenvalue of the correlation
    matrix, found by bisection on the feasibility of a Cholesky
    factorization.

    @raise InvalidInput: for a non-symmetric matrix or a nonpositive
        diagonal.
    @raise DomainError: if C{Gamma_p} itself is not positive semi-definite.
    """
    gamma = _square(gammaP, "gamma_p")
    scale = float(np.abs(gamma).max()) if gamma.size else 0.0
    if not np.allclose(gamma, gamma.T, rtol=0.0, atol=1e-12 * scale):
        raise InvalidInput("gamma_p must be symmetric")
    diagonal = np.diag(gamma)
    if not np.all(diagonal > 0):
        raise InvalidInput("gamma_p must have a positive diagonal")
    if not tol > 0:
        raise InvalidInput(f"tol must be positive, not {tol!r}")
    root = np.sqrt(diagonal)
    correlation = gamma / np.outer(root, root)
    identity = np.eye(gamma.shape[0])

    def feasible(kappa: float) -> bool:
        try:
            cholesky(
                correlation - (kappa - _JITTER) * identity,
                lower=True,
                check_finite=False,
            )
        except LinAlgError:
            return False
        return True

    if feasible(1.0):
        return 1.0
    if not feasible(0.0):
        raise DomainError("gamma_p is not positive semi-definite")
    low, high = 0.0, 1.0
    while high - low > tol:
        middle = (low + high) / 2
        if feasible(middle):
            low = middle
        else:
            high = middle
    return low


def _checkHardyClass(rho: float, l: float, L: float) -> None:
    if not (rho > 1 and 0 < l < 1 and L > 1):
        raise InvalidInput(
            f"need rho > 1, 0 < l < 1 and L > 1; got rho = {rho!r}, "
            f"l = {l!r}, L = {L!r}"
        )


def mixingBound(rho: float, l: float, L: float, m: int) -> float:
    """
    The geometric bound C{2 (L rho / (l (rho - 1)))^2 rho^(-m)} on the
    strong-mixing coefficient at separation C{m}.
    """
    _checkHardyClass(rho, l, L)
    if m < 0:
        raise InvalidInput(f"m must be >= 0, not {m}")
    return 2.0 * (L * rho / (l * (rho - 1.0))) ** 2 * rho ** (-m)


@dataclass(frozen=True)
class PredictionConstants:
    """
    The constants of the prediction-consistency theorem for the class of
    processes whose transfer function is analytic on C{|z| <= rho} with
    modulus between C{l} and C{L}.

    Construct with L{PredictionConstants.fromParameters}; the defining
    identities between the fields are checked at construction.

    @ivar bigD: The constant C{D} of the threshold C{sigma^2 (n + D
        n^(3/5))}.
    @ivar mBound: The bound C{M} on the penalty weights.
    @ivar kappaP: Optionally, the C{kappa_p} of the instance at hand.
    """

    rho: float
    l: float
    L: float
    beta1: float
    beta2: float
    bigD: float
    c1: float
    c2: float
    f1: float
    f2: float
    mBound: float = 1.0
    kappaP: float | None = None

    def __post_init__(self) -> None:
        _checkHardyClass(self.rho, self.l, self.L)
        expected = _derived(self.rho, self.l, self.L)
        actual = (self.beta1, self.beta2, self.bigD, self.c1, self.c2)
        actual += (self.f1, self.f2)
        if not np.allclose(actual, expected, rtol=1e-12, atol=0.0):
            raise InvalidInput(
                "prediction constants are inconsistent with rho, l and L"
            )
        if not (isfinite(self.mBound) and self.mBound > 0):
            raise InvalidInput(f"M must be positive, not {self.mBound!r}")

    @classmethod
    def fromParameters(
        cls,
        rho: float,
        l: float,
        L: float,
        mBound: float = 1.0,
        kappaP: float | None = None,
    ) -> PredictionConstants:
        _checkHardyClass(rho, l, L)
        return cls(rho, l, L, *_derived(rho, l, L), mBound, kappaP)

    def toJSON(self) -> JSONObject:
        return {
            "rho": self.rho,
            "l": self.l,
            "L": self.L,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "big_d": self.bigD,
            "c1": self.c1,
            "c2": self.c2,
            "f1": self.f1,
            "f2": self.f2,
            "m_bound": self.mBound,
            "kappa_p": self.kappaP,
        }

    @classmethod
    def fromJSON(cls, json: JSONObject) -> PredictionConstants:
        try:
            return cls.fromParameters(
                float(json["rho"]),
                float(json["l"]),
                float(json["L"]),
                float(json.get("m_bound", 1.0)),
                json.get("kappa_p"),
            )
        except KeyError as missing:
            raise InvalidInput(
                f"constants JSON lacks field {missing}"
            ) from None


def _derived(
    rho: float, l: float, L: float
) -> tuple[float, float, float, float, float, float, float]:
    beta1 = 1.0 + 1.0 / _log(rho)
    beta2 = 1.0 + L * rho / (l * (rho - 1.0))
    bigD = (C1**3 * C2 * beta1**2 * beta2**3) ** 0.2
    f1 = min((C2 / beta1) ** 0.25 / 4.0, 2.0**-9, 1.0 / 8.0)
    f2 = 1.0 / (4.0 * C1 * beta1 * beta2)
    return beta1, beta2, bigD, C1, C2, f1, f2


def yThreshold(n: int, sigma: float, consts: PredictionConstants) -> float:
    """
    The lower limit C{sigma^2 (n + D n^(3/5))} on the free parameter C{y} of
    L{piBound}.
    """
    return sigma**2 * (n + consts.bigD * n**0.6)


def piBound(
    n: int,
    p: int,
    s: int,
    lambdaN: float,
    lambdaMin: float,
    lambdaMaxW: float,
    sigma: float,
    c: float,
    y: float,
    consts: PredictionConstants,
) -> float:
    """
    The probability C{pi_n} with which the prediction-error bound may fail::

        6p exp(-F1 min((y/sigma^2 - n)^(1/3), c^2/sigma^2,
                       n^2 lambda_n^2 lambda_min^2
                       / (y + c n lambda_n lambda_max / 2)))
        + p^2 exp(-F2 n lambda_n^2 s / p^2)

    The result is returned as is; values of 1 or more say nothing.

    @raise DomainError: unless C{c > 0} and C{y} exceeds L{yThreshold}.
    """
    if n < 1 or p < 1 or s < 0:
        raise InvalidInput(f"need n, p >= 1 and s >= 0 (n={n}, p={p}, s={s})")
    if not sigma > 0:
        raise InvalidInput(f"sigma must be positive, not {sigma!r}")
    if not c > 0:
        raise DomainError(f"c must be positive, not {c!r}")
    threshold = yThreshold(n, sigma, consts)
    if not y > threshold:
        raise DomainError(
            f"y = {y!r} must exceed sigma^2 (n + D n^(3/5)) = {threshold!r}"
        )
    variance = sigma**2
    penaltyTerm = (n * lambdaN * lambdaMin) ** 2 / (
        y + c * n * lambdaN * lambdaMaxW / 2.0
    )
    exponent = min((y / variance - n) ** (1.0 / 3.0), c**2 / variance)
    exponent = min(exponent, penaltyTerm)
    first = 6.0 * p * exp(-consts.f1 * exponent)
    second = p**2 * exp(-consts.f2 * n * lambdaN**2 * s / p**2)
    return first + second


def corollaryChoices(
    n: int,
    lambdaN: float,
    lambdaMaxW: float,
    sigma: float,
    consts: PredictionConstants,
    d1: float = 1.0,
    d2: float | None = None,
) -> tuple[float, float]:
    """
    Choose C{(c, y)} as C{y = D2 n} and C{c = D1 y / (n lambda_n
    lambda_max)}.  By default C{D2} is the smallest multiple of 1/8 for
    which C{y} is at least twice L{yThreshold}.
    """
    if not (lambdaN > 0 and lambdaMaxW > 0):
        raise DomainError("the choice of c needs lambda_n > 0 and weights > 0")
    if d2 is None:
        d2 = ceil(8.0 * 2.0 * yThreshold(n, sigma, consts) / n) / 8.0
    y = d2 * n
    c = d1 * y / (n * lambdaN * lambdaMaxW)
    return c, y


def corollaryBound(
    n: int,
    p: int,
    s: int,
    alpha: float,
    lambdaMin: float,
    lambdaMaxW: float,
    f: float,
) -> float:
    """
    The failure probability with C{lambda_n = n^(-alpha)}::

        p^2 exp(-f min(n^(1/3), n^(2 alpha) / lambda_max^2,
                       n^(1 - 2 alpha) lambda_min^2,
                       n^(1 - 2 alpha) s / p^2))

    @raise DomainError: unless C{2/5 < alpha < 1/2} and C{f > 0}.
    """
    if not 0.4 < alpha < 0.5:
        raise DomainError(f"alpha must lie in (2/5, 1/2), not {alpha!r}")
    if not f > 0:
        raise DomainError(f"f must be positive, not {f!r}")
    if n < 1 or p < 1:
        raise InvalidInput(f"need n, p >= 1, got n = {n}, p = {p}")
    shrink = n ** (1.0 - 2.0 * alpha)
    terms = [n ** (1.0 / 3.0), shrink * lambdaMin**2, shrink * s / p**2]
    terms.append(
        n ** (2.0 * alpha) / lambdaMaxW**2 if lambdaMaxW > 0 else float("inf")
    )
    return p**2 * exp(-f * min(terms))


def predictionErrorBound(
    lambdaN: float, s: int, kappa: float, mBound: float
) -> float:
    """
    The bound C{4 (1/2 + 2M)^2 lambda_n^2 s / kappa_p} on the prediction
    error C{||phi_hat - phi*||^2_(Gamma_p)}.
    """
    if not kappa > 0:
        raise DomainError(f"kappa must be positive, not {kappa!r}")
    return 4.0 * (0.5 + 2.0 * mBound) ** 2 * lambdaN**2 * s / kappa


def predictionRegimeHolds(
    n: int, p: int, s: int, lambdaN: float, consts: PredictionConstants
) -> bool:
    """
    Does C{lambda_n (s/p)^(1/2) <= D n^(-2/5)} hold?
    """
    return lambdaN * sqrt(s / p) <= consts.bigD * n**-0.4


def predictionError(
    phiHat: npt.ArrayLike, phiStar: npt.ArrayLike, gammaP: npt.ArrayLike
) -> float:
    """
    C{||phi_hat - phi*||^2} in the norm induced by C{gammaP}.
    """
    difference = np.asarray(phiHat, dtype=np.float64) - np.asarray(
        phiStar, dtype=np.float64
    )
    return float(difference @ _square(gammaP, "gamma_p") @ difference)


@dataclass(frozen=True)
class TransferBounds:
    """
    The range of C{|psi(z)|}, C{psi = 1 / phi}, on the circle C{|z| = rho}.

    @ivar analytic: Are all roots of C{phi} outside C{|z| <= rho}?  If not,
        C{psi} has a pole in the disc and no modulus bound can hold.
    """

    rho: float
    minModulus: float
    maxModulus: float
    analytic: bool

    def within(self, l: float, L: float) -> bool:
        """
        Is the model in the class with transfer-function modulus between
        C{l} and C{L} on the disc?
        """
        return self.analytic and l <= self.minModulus and self.maxModulus <= L


def transferBounds(
    model: ArModel, rho: float, gridPoints: int = CIRCLE_POINTS
) -> TransferBounds:
    """
    Minimize and maximize C{|psi(z)|} over C{gridPoints} equispaced points of
    the circle C{|z| = rho}; by the maximum-modulus principle these are its
    extremes over the whole disc when C{psi} is analytic there.
    """
    if not rho > 0 or gridPoints < 1:
        raise InvalidInput("need rho > 0 and at least one grid point")
    theta = np.linspace(0.0, 2.0 * np.pi, gridPoints, endpoint=False)
    modulus = np.abs(model.lagPolynomial(rho * np.exp(1j * theta)))
    analytic = model.causality.margin > rho - 1.0
    with np.errstate(divide="ignore"):
        psi = 1.0 / modulus
    return TransferBounds(
        rho, float(psi.min()), float(psi.max()), bool(analytic)
    )


@dataclass(frozen=True)
class ConditionRow:
    """
    One condition or bound of the theory, evaluated for an instance.
    """

    name: str
    value: float | None
    verdict: Verdict

    def toJSON(self) -> JSONObject:
        return {
            "name": self.name,
            "value": self.value,
            "verdict": self.verdict.value,
        }


@dataclass(frozen=True)
class ConditionReport:
    """
    Every condition of the theory evaluated for a model, a sample size and a
    penalty.
    """

    n: int
    p: int
    lambdaN: float
    signConditions: SignConditionReport
    constants: PredictionConstants
    rows: tuple[ConditionRow, ...]

    def row(self, name: str) -> ConditionRow:
        for each in self.rows:
            if each.name == name:
                return each
        raise KeyError(name)

    def toJSON(self) -> JSONObject:
        return {
            "n": self.n,
            "p": self.p,
            "lambda": self.lambdaN,
            "sign_conditions": self.signConditions.toJSON(),
            "constants": self.constants.toJSON(),
            "rows": [each.toJSON() for each in self.rows],
        }


def _optional(
    name: str, value: float | None, passes: bool
) -> ConditionRow:
    if value is None:
        return ConditionRow(name, None, Verdict.NA)
    return ConditionRow(name, value, Verdict.PASS if passes else Verdict.FAIL)


def _probability(name: str, value: float) -> ConditionRow:
    if value >= 1:
        log.warn(
            "{name} evaluates to {value}, which bounds nothing",
            name=name,
            value=value,
        )
        return ConditionRow(name, value, Verdict.VACUOUS)
    return ConditionRow(name, value, Verdict.PASS)


def conditionReport(
    model: ArModel,
    n: int,
    p: int,
    penalty: PenaltyConfig,
    rho: float = 2.0,
    l: float = 0.5,
    L: float = 2.0,
) -> ConditionReport:
    """
    Evaluate every hypothesis and bound of the theory for C{model} fitted
    with C{p} lags to C{n} observations at C{penalty}.

    Conditions stated as limits get finite-C{n} verdicts: the weight ratio
    passes when at most one, the signal expression when below one, and the
    penalty-growth expression when above one.  Probability bounds of one or
    more are L{Verdict.VACUOUS}.
    """
    if penalty.p != p:
        raise InvalidInput(f"penalty has {penalty.p} weights, expected {p}")
    phiStar = model.coefficientsTo(p)
    gammaP = toeplitzGamma(autocovariance(model, p - 1), p)
    weights = penalty.weights
    lam = penalty.lambdaN
    support = np.flatnonzero(phiStar)
    s = int(support.size)
    mBound = float(weights.max())
    kappa = kappaP(gammaP)
    consts = PredictionConstants.fromParameters(rho, l, L, mBound, kappa)
    report = signConditions(gammaP, phiStar, penalty, n)

    rows = [
        _optional("thm1.c_max", report.cMax, True),
        _optional(
            "thm1.incoherence",
            report.incoherence,
            report.incoherence is not None and report.incoherence < 1,
        ),
        _optional(
            "thm1.weight_ratio",
            report.cond1Ratio,
            report.cond1Ratio is not None and report.cond1Ratio <= 1,
        ),
        _optional(
            "thm1.signal_strength",
            report.cond2Value,
            report.cond2Value is not None and report.cond2Value < 1,
        ),
        _optional(
            "thm1.penalty_growth",
            report.cond3Value,
            report.cond3Value is not None and report.cond3Value > 1,
        ),
    ]
    rate = estimationRate(n, p, lam, float(np.linalg.norm(weights[support])))
    rows.append(
        ConditionRow(
            "thm2.rate", rate, Verdict.PASS if rate < 1 else Verdict.VACUOUS
        )
    )
    rows.append(ConditionRow("thm3.m_bound", mBound, Verdict.PASS))
    rows.append(
        ConditionRow(
            "thm3.kappa_p", kappa, Verdict.PASS if kappa > 0 else Verdict.FAIL
        )
    )
    regime = lam * sqrt(s / p) / (consts.bigD * n**-0.4)
    rows.append(
        ConditionRow(
            "thm3.regime",
            regime,
            Verdict.PASS
            if predictionRegimeHolds(n, p, s, lam, consts)
            else Verdict.FAIL,
        )
    )
    transfer = transferBounds(model, rho)
    rows.append(
        ConditionRow(
            "thm3.transfer_class",
            transfer.maxModulus,
            Verdict.PASS if transfer.within(l, L) else Verdict.FAIL,
        )
    )
    if kappa > 0:
        rows.append(
            ConditionRow(
                "thm3.prediction_error_bound",
                predictionErrorBound(lam, s, kappa, mBound),
                Verdict.PASS,
            )
        )
    else:
        rows.append(
            ConditionRow("thm3.prediction_error_bound", None, Verdict.NA)
        )
    lambdaMin = float(weights.min())
    if lam > 0 and lambdaMin > 0:
        c, y = corollaryChoices(n, lam, mBound, model.noiseSD, consts)
        rows.append(
            _probability(
                "thm3.pi_bound",
                piBound(
                    n,
                    p,
                    s,
                    lam,
                    lambdaMin,
                    mBound,
                    model.noiseSD,
                    c,
                    y,
                    consts,
                ),
            )
        )
    else:
        rows.append(ConditionRow("thm3.pi_bound", None, Verdict.NA))
    alpha = -_log(lam) / _log(n) if lam > 0 and n > 1 else 0.0
    if 0.4 < alpha < 0.5:
        rows.append(
            _probability(
                "cor1.bound",
                corollaryBound(
                    n,
                    p,
                    s,
                    alpha,
                    lambdaMin,
                    mBound,
                    min(consts.f1, consts.f2),
                ),
            )
        )
    else:
        rows.append(ConditionRow("cor1.bound", None, Verdict.NA))
    return ConditionReport(n, p, lam, report, consts, tuple(rows))


__all__ = [
    "C1",
    "C2",
    "ConditionReport",
    "ConditionRow",
    "PredictionConstants",
    "SignConditionReport",
    "TransferBounds",
    "conditionReport",
    "corollaryBound",
    "corollaryChoices",
    "estimationRate",
    "kappaP",
    "mixingBound",
    "piBound",
    "predictionError",
    "predictionErrorBound",
    "predictionRegimeHolds",
    "signConditions",
    "transferBounds",
    "yThreshold",
]
