from itertools import product
from unittest import TestCase

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

from ..boundaries import InvalidInput, NonConvergence, UnboundedPath
from ..design import LagDesign, buildDesign
from ..experiments import paperModel
from ..lasso import (
    LassoFit,
    PenaltyConfig,
    SolutionPath,
    SolverSettings,
    fit,
    kktResidual,
    lambdaGrid,
    lambdaMax,
    monotoneWeights,
    objective,
    pathOnGrid,
    softThreshold,
    solutionPath,
)
from ..process import ArModel, randomGenerator, simulate


def orthogonalDesign() -> LagDesign:
    """
    Three columns with C{X'X / n = I} and C{X'y / n = (1, -0.5, 0)}.
    """
    return LagDesign(np.array([2.0, -1.0, 0.0, 7.0]), 2 * np.eye(4)[:, :3])


def randomDesign(p: int, seed: int, n: int = 40) -> LagDesign:
    generator = randomGenerator(seed)
    X = generator.normal(size=(n, p))
    truth = generator.uniform(-1, 1, size=p)
    return LagDesign(X @ truth + 0.3 * generator.normal(size=n), X)


def paperDesign(n: int = 400, p: int = 20, seed: int = 1) -> LagDesign:
    return buildDesign(simulate(paperModel(), n, p, seed=seed), p)


def randomCausalModel(generator: np.random.Generator, order: int) -> ArModel:
    """
    A causal model built from partial autocorrelations drawn in
    C{(-0.6, 0.6)}.
    """
    phi = np.zeros(0)
    for _ in range(order):
        reflection = generator.uniform(-0.6, 0.6)
        phi = np.r_[phi - reflection * phi[::-1], reflection]
    return ArModel(phi, generator.uniform(0.1, 2.0))


def randomArDesign(
    generator: np.random.Generator, n: int, p: int
) -> LagDesign:
    model = randomCausalModel(generator, int(generator.integers(1, 6)))
    seed = int(generator.integers(2**31))
    return buildDesign(simulate(model, n, p, seed=seed), p)


def bruteForceMinimum(
    design: LagDesign, penalty: PenaltyConfig, points: int = 401
) -> float:
    """
    The smallest objective over the grid with C{points} values per axis on
    C{[-2, 2]}.

    All but the last coordinate are enumerated.  The objective is convex in
    the last one, so its grid minimum is at one of the two grid values
    around its continuous minimizer.
    """
    p, n = design.p, design.n
    axis = np.linspace(-2, 2, points)
    gram = design.X.T @ design.X / n
    correlation = design.X.T @ design.y / n
    thresholds = penalty.thresholds
    head = np.array(list(product(axis, repeat=p - 1)), dtype=np.float64)
    head = head.reshape(points ** (p - 1), p - 1)
    z = correlation[-1] - head @ gram[:-1, -1]
    shrunk = np.sign(z) * np.maximum(np.abs(z) - thresholds[-1], 0.0)
    continuous = np.clip(shrunk / gram[-1, -1], -2, 2)
    step = axis[1] - axis[0]
    below = np.clip(np.floor((continuous + 2) / step), 0, points - 1)
    best = np.full(head.shape[0], np.inf)
    for index in (below, np.minimum(below + 1, points - 1)):
        grid = np.column_stack([head, axis[index.astype(np.int64)]])
        values = (
            design.y @ design.y / (2 * n)
            - grid @ correlation
            + 0.5 * np.einsum("ij,jk,ik->i", grid, gram, grid)
            + np.abs(grid) @ thresholds
        )
        best = np.minimum(best, values)
    return float(best.min())


class SoftThresholdTests(TestCase):
    def test_examples(self) -> None:
        self.assertEqual(softThreshold(3, 1), 2)
        self.assertEqual(softThreshold(-3, 1), -2)
        self.assertEqual(softThreshold(-0.5, 1), 0)
        for z in (-2.5, 0.0, 1e-300, 7.0):
            self.assertEqual(softThreshold(z, 0), z)

    def test_negativeThreshold(self) -> None:
        with self.assertRaises(InvalidInput):
            softThreshold(1.0, -0.1)


class PenaltyTests(TestCase):
    def test_thresholds(self) -> None:
        penalty = PenaltyConfig(0.5, np.array([1.0, 2.0, 0.0]))
        assert_array_equal(penalty.thresholds, [0.5, 1.0, 0.0])
        self.assertEqual(PenaltyConfig.unit(4, 1.0).p, 4)

    def test_invalid(self) -> None:
        with self.assertRaises(InvalidInput):
            PenaltyConfig(-1.0, np.ones(2))
        with self.assertRaises(InvalidInput):
            PenaltyConfig(float("nan"), np.ones(2))
        with self.assertRaises(InvalidInput):
            PenaltyConfig(1.0, np.array([1.0, -0.5]))
        with self.assertRaises(InvalidInput):
            PenaltyConfig(1.0, np.array([1.0, float("inf")]))

    def test_monotoneWeights(self) -> None:
        assert_allclose(monotoneWeights(3), [1.0, 2**0.5, 2.0])
        weights = monotoneWeights(50, 0.5, 4.0)
        self.assertTrue(np.all(np.diff(weights) > 0))
        with self.assertRaises(InvalidInput):
            monotoneWeights(3, 2.0, 1.0)


class SettingsTests(TestCase):
    def test_defaults(self) -> None:
        settings = SolverSettings()
        self.assertEqual(
            (settings.tol, settings.maxIter, settings.gridSize),
            (1e-8, 100_000, 100),
        )
        self.assertEqual(settings.lambdaMinRatio, 1e-3)

    def test_invalid(self) -> None:
        with self.assertRaises(InvalidInput):
            SolverSettings(tol=0.0)
        with self.assertRaises(InvalidInput):
            SolverSettings(maxIter=0)
        with self.assertRaises(InvalidInput):
            SolverSettings(gridSize=1)
        with self.assertRaises(InvalidInput):
            SolverSettings(lambdaMinRatio=1.0)


class ObjectiveTests(TestCase):
    def test_zero(self) -> None:
        design = orthogonalDesign()
        value = objective(np.zeros(3), design, PenaltyConfig.unit(3, 1.0))
        self.assertEqual(value, (4 + 1 + 0 + 49) / 8)

    def test_exactLeastSquares(self) -> None:
        X = np.array([[2.0, 1.0], [1.0, 3.0]])
        phi = np.array([0.5, -1.5])
        design = LagDesign(X @ phi, X)
        value = objective(phi, design, PenaltyConfig.unit(2, 0.0))
        self.assertAlmostEqual(value, 0.0, places=15)

    def test_straightLine(self) -> None:
        design = randomDesign(4, seed=11)
        penalty = PenaltyConfig(0.3, np.array([1.0, 0.5, 2.0, 0.0]))
        phi = np.array([0.25, -1.0, 0.0, 3.0])
        squares = 0.0
        for t in range(design.n):
            prediction = sum(design.X[t, j] * phi[j] for j in range(4))
            squares += (design.y[t] - prediction) ** 2
        expected = squares / (2 * design.n) + 0.3 * (
            0.25 + 0.5 * 1.0 + 2.0 * 0.0
        )
        self.assertAlmostEqual(
            objective(phi, design, penalty), expected, delta=1e-12
        )

    def test_mismatch(self) -> None:
        design = orthogonalDesign()
        with self.assertRaises(InvalidInput):
            objective(np.zeros(2), design, PenaltyConfig.unit(3, 1))
        with self.assertRaises(InvalidInput):
            objective(np.zeros(3), design, PenaltyConfig.unit(2, 1))


class FitTests(TestCase):
    def test_orthogonalClosedForm(self) -> None:
        design = orthogonalDesign()
        for lam, weights in (
            (0.3, [1.0, 1.0, 1.0]),
            (0.3, [1.0, 2.0, 1.0]),
            (0.1, [0.5, 0.0, 3.0]),
        ):
            penalty = PenaltyConfig(lam, np.array(weights))
            result = fit(design, penalty)
            expected = [
                softThreshold(z, t)
                for z, t in zip([1.0, -0.5, 0.0], penalty.thresholds)
            ]
            assert_allclose(result.coefficients, expected, atol=1e-10)

    def test_nullAboveLambdaMax(self) -> None:
        design = paperDesign()
        weights = monotoneWeights(design.p)
        top = lambdaMax(design, weights)
        above = fit(design, PenaltyConfig(1.01 * top, weights))
        self.assertEqual(above.support, ())
        below = fit(design, PenaltyConfig(0.99 * top, weights))
        self.assertGreaterEqual(len(below.support), 1)

    def test_bruteForceTwoLags(self) -> None:
        for seed in range(3):
            design = randomDesign(2, seed)
            penalty = PenaltyConfig(0.05, np.array([1.0, 0.7]))
            result = fit(design, penalty)
            self.assertLessEqual(
                result.objective,
                bruteForceMinimum(design, penalty, 401) + 1e-6,
            )

    def test_bruteForceThreeLags(self) -> None:
        design = randomDesign(3, seed=5)
        penalty = PenaltyConfig(0.1, np.array([1.0, 0.0, 2.0]))
        result = fit(design, penalty)
        self.assertLessEqual(
            result.objective, bruteForceMinimum(design, penalty, 401) + 1e-6
        )

    def test_certificate(self) -> None:
        design = paperDesign(p=30)
        for lam in (1e-2, 1e-3, 1e-4):
            penalty = PenaltyConfig.unit(30, lam)
            result = fit(design, penalty)
            self.assertLess(result.kktResidual, 1e-8)
            independent = kktResidual(result.coefficients, design, penalty)
            self.assertLess(independent, 1e-8)
            assert_array_equal(result.signs, np.sign(result.coefficients))
            nonzero = np.flatnonzero(result.coefficients)
            self.assertEqual(
                result.support, tuple(int(j) + 1 for j in nonzero)
            )

    def test_scaling(self) -> None:
        design = paperDesign()
        weights = monotoneWeights(design.p)
        first = fit(design, PenaltyConfig(1e-3, weights))
        second = fit(design, PenaltyConfig(4e-3, weights / 4))
        assert_array_equal(first.coefficients, second.coefficients)
        for c in (3.0, 7.0):
            with self.subTest(c=c):
                scaled = fit(design, PenaltyConfig(c * 1e-3, weights / c))
                assert_allclose(
                    scaled.coefficients, first.coefficients, rtol=0, atol=1e-15
                )

    def test_unpenalizedLag(self) -> None:
        design = orthogonalDesign()
        result = fit(design, PenaltyConfig(10.0, np.array([0.0, 1.0, 1.0])))
        assert_allclose(result.coefficients, [1.0, 0.0, 0.0], atol=1e-12)

    def test_warmStart(self) -> None:
        design = paperDesign()
        penalty = PenaltyConfig.unit(design.p, 1e-3)
        cold = fit(design, penalty)
        warm = fit(design, penalty, start=cold.coefficients)
        assert_allclose(warm.coefficients, cold.coefficients, atol=1e-8)
        self.assertLessEqual(warm.iterations, cold.iterations)

    def test_nonConvergence(self) -> None:
        design = paperDesign()
        penalty = PenaltyConfig.unit(design.p, 1e-5)
        with self.assertRaises(NonConvergence) as raised:
            fit(design, penalty, maxIter=1)
        failure = raised.exception
        self.assertIsInstance(failure.best, LassoFit)
        self.assertLessEqual(failure.best.iterations, 1)
        self.assertGreater(failure.kktResidual, 0)
        self.assertEqual(failure.kktResidual, failure.best.kktResidual)
        atZero = kktResidual(np.zeros(design.p), design, penalty)
        self.assertLessEqual(failure.kktResidual, atZero)
        self.assertIsNone(failure.gridIndex)

    def test_nonConvergenceKeepsBestIterate(self) -> None:
        design = paperDesign()
        penalty = PenaltyConfig.unit(design.p, 1e-3)
        solved = fit(design, penalty, tol=1e-12)
        for sweeps in (1, 2, 5):
            with self.subTest(sweeps=sweeps), self.assertRaises(
                NonConvergence
            ) as raised:
                fit(
                    design,
                    penalty,
                    tol=1e-300,
                    maxIter=sweeps,
                    start=solved.coefficients,
                )
            best = raised.exception.best
            self.assertLessEqual(best.kktResidual, solved.kktResidual)
            assert_allclose(
                best.coefficients, solved.coefficients, atol=1e-10
            )
            independent = kktResidual(best.coefficients, design, penalty)
            self.assertAlmostEqual(
                independent, best.kktResidual, delta=1e-12
            )

    def test_invalidSettings(self) -> None:
        design = orthogonalDesign()
        with self.assertRaises(InvalidInput):
            fit(design, PenaltyConfig.unit(3, 1.0), tol=0)
        with self.assertRaises(InvalidInput):
            fit(design, PenaltyConfig.unit(3, 1.0), maxIter=0)


class LassoFitTests(TestCase):
    def test_negativeZero(self) -> None:
        result = LassoFit(np.array([-0.0, 1.5, -2.0]), 0.1, 1.0, 0.0, 3)
        self.assertFalse(np.signbit(result.coefficients[0]))
        self.assertEqual(result.support, (2, 3))
        assert_array_equal(result.signs, [0, 1, -1])

    def test_json(self) -> None:
        result = LassoFit(np.array([0.0, 1.5]), 0.1, 1.0, 1e-9, 3)
        json = result.toJSON()
        self.assertEqual(
            json,
            {
                "phi": [0.0, 1.5],
                "support": [2],
                "lambda": 0.1,
                "kkt_residual": 1e-9,
                "objective": 1.0,
            },
        )
        again = LassoFit.fromJSON(json)
        self.assertEqual(again.support, (2,))
        with self.assertRaises(InvalidInput):
            LassoFit.fromJSON({"phi": [1.0]})


class LambdaMaxTests(TestCase):
    def test_orthogonalResponse(self) -> None:
        design = LagDesign(np.array([0.0, 0.0, 1.0]), np.eye(3)[:, :2])
        self.assertEqual(lambdaMax(design, np.ones(2)), 0.0)
        assert_array_equal(lambdaGrid(0.0, 10, 1e-3), [0.0])

    def test_unitWeights(self) -> None:
        design = paperDesign()
        expected = np.max(np.abs(design.X.T @ design.y / design.n))
        self.assertEqual(lambdaMax(design, np.ones(design.p)), expected)

    def test_weighted(self) -> None:
        design = orthogonalDesign()
        self.assertEqual(lambdaMax(design, np.array([4.0, 0.25, 1.0])), 2.0)

    def test_unbounded(self) -> None:
        design = orthogonalDesign()
        with self.assertRaises(UnboundedPath):
            lambdaMax(design, np.array([1.0, 0.0, 1.0]))
        # lag 3 is uncorrelated with y, so leaving it free is fine
        self.assertEqual(lambdaMax(design, np.array([1.0, 1.0, 0.0])), 1.0)

    def test_grid(self) -> None:
        grid = lambdaGrid(2.0, 4, 1e-3)
        assert_allclose(grid, [2.0, 0.2, 0.02, 0.002])


class PathTests(TestCase):
    def test_orthogonalEntries(self) -> None:
        path = pathOnGrid(orthogonalDesign(), np.ones(3), [1.0, 0.75, 0.25])
        assert_allclose(
            path.coefficients,
            [[0, 0, 0], [0.25, 0, 0], [0.75, -0.25, 0]],
            atol=1e-12,
        )
        self.assertEqual(path.entryOrder(), (1, 2))
        self.assertEqual(
            [event.gridIndex for event in path.entryEvents], [1, 2]
        )
        self.assertEqual(path.exitEvents, ())
        self.assertEqual(path.entryRanks(), {1: 1, 2: 2, 3: None})

    def test_tiesByLag(self) -> None:
        y = np.array([2.0, 2.0, 0.0, 0.0])
        design = LagDesign(y, 2 * np.eye(4)[:, :2])
        path = pathOnGrid(design, np.ones(2), [2.0, 0.5])
        self.assertEqual(path.entryOrder(), (1, 2))

    def test_exit(self) -> None:
        X = np.array([[1.0, 0.9], [1.0, 1.1], [-1.0, -0.8], [0.5, 0.2]])
        design = LagDesign(X @ np.array([2.0, -1.0]), X)
        path = pathOnGrid(design, np.ones(2), np.geomspace(2, 1e-4, 60))
        for event in path.exitEvents:
            self.assertIn(event.lag, (1, 2))
            self.assertFalse(path.coefficients[event.gridIndex, event.lag - 1])

    def test_zeroAtTop(self) -> None:
        design = paperDesign()
        weights = monotoneWeights(design.p, 1.0, 3.0)
        path = solutionPath(design, weights, gridSize=25)
        lambdas = [lam for lam, row in path.knots]
        self.assertEqual(len(lambdas), 25)
        self.assertEqual(lambdas[0], lambdaMax(design, weights))
        self.assertAlmostEqual(lambdas[-1] / lambdas[0], 1e-3)
        assert_array_equal(path.coefficients[0], np.zeros(design.p))
        self.assertTrue(np.all(np.diff(path.lambdas) < 0))
        self.assertGreater(path.entryEvents[0].gridIndex, 0)

    def test_matchesColdStart(self) -> None:
        design = paperDesign()
        weights = np.ones(design.p)
        path = solutionPath(design, weights, gridSize=10)
        for lam, row in path.knots:
            penalty = PenaltyConfig(lam, weights)
            self.assertAlmostEqual(
                objective(row, design, penalty),
                fit(design, penalty).objective,
                delta=1e-7,
            )

    def test_ar1FirstEntrant(self) -> None:
        model = ArModel(np.array([0.6]), 1.0)
        first = [
            solutionPath(
                buildDesign(simulate(model, 300, 5, seed=seed), 5),
                np.ones(5),
                gridSize=30,
            ).entryOrder()[0]
            for seed in range(20)
        ]
        self.assertGreaterEqual(first.count(1), 15)

    def test_pureNoise(self) -> None:
        generator = randomGenerator(9)
        design = LagDesign(
            generator.normal(size=500), generator.normal(size=(500, 5))
        )
        path = solutionPath(design, np.ones(5), gridSize=20)
        self.assertLess(float(np.max(np.abs(path.coefficients))), 0.2)

    def test_nonConvergenceIndex(self) -> None:
        design = paperDesign()
        top = lambdaMax(design, np.ones(design.p))
        with self.assertRaises(NonConvergence) as raised:
            pathOnGrid(
                design,
                np.ones(design.p),
                [2 * top, 1e-6],
                SolverSettings(maxIter=1),
            )
        self.assertEqual(raised.exception.gridIndex, 1)

    def test_invalidGrid(self) -> None:
        with self.assertRaises(InvalidInput):
            pathOnGrid(orthogonalDesign(), np.ones(3), [0.5, 1.0])
        with self.assertRaises(InvalidInput):
            pathOnGrid(orthogonalDesign(), np.ones(3), [])
        with self.assertRaises(InvalidInput):
            solutionPath(orthogonalDesign(), np.ones(3), gridSize=1)
        with self.assertRaises(InvalidInput):
            SolutionPath(np.array([1.0, 1.0]), np.zeros((2, 3)), (), ())


class RandomizedInstanceTests(TestCase):
    def test_kktCertificates(self) -> None:
        generator = randomGenerator(2024)
        converged = 0
        for instance in range(500):
            n = int(generator.integers(50, 2001))
            p = int(generator.integers(1, 61))
            design = randomArDesign(generator, n, p)
            weights = generator.uniform(0.2, 3.0, size=p)
            top = lambdaMax(design, weights)
            lambdaN = top * 10 ** generator.uniform(-3, 0.1)
            penalty = PenaltyConfig(lambdaN, weights)
            try:
                result = fit(design, penalty)
            except NonConvergence:
                continue
            converged += 1
            with self.subTest(instance=instance, n=n, p=p):
                self.assertLess(result.kktResidual, 1e-8)
                independent = kktResidual(result.coefficients, design, penalty)
                self.assertAlmostEqual(
                    independent, result.kktResidual, delta=1e-10
                )
        self.assertGreaterEqual(converged, 490)

    def test_bruteForceOracle(self) -> None:
        generator = randomGenerator(2025)
        for instance in range(100):
            p = int(generator.integers(1, 4))
            n = int(generator.integers(50, 301))
            design = randomArDesign(generator, n, p)
            weights = generator.uniform(0.2, 3.0, size=p)
            top = lambdaMax(design, weights)
            penalty = PenaltyConfig(
                top * 10 ** generator.uniform(-3, 0.1), weights
            )
            result = fit(design, penalty)
            with self.subTest(instance=instance, p=p):
                self.assertLessEqual(
                    result.objective,
                    bruteForceMinimum(design, penalty) + 1e-6,
                )

    def test_orthogonalDesigns(self) -> None:
        generator = randomGenerator(2026)
        for instance in range(50):
            p = int(generator.integers(1, 61))
            n = int(generator.integers(max(p, 50), 501))
            q, _ = np.linalg.qr(generator.normal(size=(n, p)))
            X = np.sqrt(n) * q
            y = generator.normal(scale=2.0, size=n)
            design = LagDesign(y, X)
            correlation = X.T @ y / n
            lambdaN = generator.uniform(0.0, 1.2) * np.abs(correlation).max()
            penalty = PenaltyConfig(
                lambdaN, generator.uniform(0.5, 2.0, size=p)
            )
            expected = [
                softThreshold(z, t)
                for z, t in zip(correlation, penalty.thresholds)
            ]
            with self.subTest(instance=instance, n=n, p=p):
                assert_allclose(
                    fit(design, penalty).coefficients, expected, atol=1e-10
                )
