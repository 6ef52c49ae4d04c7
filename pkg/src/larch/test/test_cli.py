from io import StringIO
from json import loads
from pathlib import Path
from tempfile import mkdtemp
from unittest import TestCase

import numpy as np

from ..boundaries import InvalidInput
from ..cli import EXIT_FAILURE, EXIT_INVALID, EXIT_OK, dispatch, parseWeights
from ..persistent.jsonable import saveJSON, writeModel
from ..persistent.tables import readSeries, readTable
from ..process import ArModel


class Run:
    """
    The outcome of one C{larch} invocation.
    """

    def __init__(self, *argv: str) -> None:
        self.stdout = StringIO()
        self.stderr = StringIO()
        self.status = dispatch(list(argv), self.stdout, self.stderr)

    @property
    def output(self) -> str:
        return self.stdout.getvalue()

    @property
    def errors(self) -> str:
        return self.stderr.getvalue()


class CommandTestCase(TestCase):
    def setUp(self) -> None:
        self.directory = Path(mkdtemp())

    def runOK(self, *argv: str) -> Run:
        run = Run(*argv, "--out", str(self.directory))
        self.assertEqual(run.status, EXIT_OK, run.errors)
        return run

    def simulated(self) -> Path:
        self.runOK("simulate", "--n", "300", "--p", "20")
        return self.directory / "series.csv"


class SimulateTests(CommandTestCase):
    def test_writesSeries(self) -> None:
        run = self.runOK("simulate", "--n", "250", "--seed", "4")
        self.assertIn("seed 4", run.output)
        series = readSeries(self.directory / "series.csv")
        self.assertEqual((series.n, series.pPresample), (250, 15))
        self.assertEqual(series.seed, 4)
        meta = loads((self.directory / "series.meta.json").read_text())
        self.assertEqual(meta, {"n": 250, "p_presample": 15, "seed": 4})

    def test_reproducible(self) -> None:
        self.runOK("simulate", "--n", "100", "--seed", "9")
        first = (self.directory / "series.csv").read_bytes()
        other = Path(mkdtemp())
        again = Run(
            "simulate", "--n", "100", "--seed", "9", "--out", str(other)
        )
        self.assertEqual(again.status, EXIT_OK)
        self.assertEqual((other / "series.csv").read_bytes(), first)

    def test_customModel(self) -> None:
        model = self.directory / "ar1.json"
        writeModel(ArModel(np.array([0.5]), 2.0), model)
        self.runOK("simulate", "--model", str(model), "--n", "50")
        series = readSeries(self.directory / "series.csv")
        self.assertEqual((series.n, series.pPresample), (50, 1))


class FittingTests(CommandTestCase):
    def test_fit(self) -> None:
        series = self.simulated()
        run = self.runOK(
            "fit", "--series", str(series), "--p", "20", "--lambda", "0.001"
        )
        self.assertIn("support", run.output)
        fitted = loads((self.directory / "fit.json").read_text())
        self.assertEqual(
            sorted(fitted),
            ["kkt_residual", "lambda", "objective", "phi", "support"],
        )
        self.assertEqual(len(fitted["phi"]), 20)
        self.assertLess(fitted["kkt_residual"], 1e-4)

    def test_path(self) -> None:
        series = self.simulated()
        self.runOK(
            "path",
            "--series",
            str(series),
            "--p",
            "20",
            "--grid-size",
            "15",
            "--weights",
            ",".join(["1"] * 10 + ["2"] * 10),
        )
        header, rows = readTable(self.directory / "path.csv")
        self.assertEqual(header[:3], ["lambda", "lag_1", "lag_2"])
        self.assertEqual(len(header), 21)
        self.assertEqual(len(rows), 15)
        self.assertEqual({float(each) for each in rows[0][1:]}, {0.0})

    def test_cv(self) -> None:
        series = self.simulated()
        self.runOK(
            "cv",
            "--series",
            str(series),
            "--p",
            "20",
            "--grid-size",
            "10",
            "--folds",
            "3",
            "--seed",
            "2",
        )
        header, rows = readTable(self.directory / "cv.csv")
        self.assertEqual(header, ["lambda", "cv_mean", "cv_se"])
        self.assertEqual(len(rows), 10)
        chosen = loads((self.directory / "cv_model.json").read_text())
        self.assertIn(chosen["lambda"], [float(row[0]) for row in rows])

    def test_rollingCv(self) -> None:
        series = self.simulated()
        self.runOK(
            "cv",
            "--series",
            str(series),
            "--p",
            "20",
            "--grid-size",
            "5",
            "--folds",
            "4",
            "--rolling-cv",
        )
        self.assertTrue((self.directory / "cv.csv").exists())

    def test_oneStandardErrorCv(self) -> None:
        series = self.simulated()
        arguments = ["--series", str(series), "--p", "20", "--folds", "3"]
        self.runOK("cv", *arguments)
        minimum = loads((self.directory / "cv_model.json").read_text())
        self.runOK("cv", *arguments, "--cv-rule", "one-se")
        sparser = loads((self.directory / "cv_model.json").read_text())
        self.assertGreaterEqual(sparser["lambda"], minimum["lambda"])

    def test_trim(self) -> None:
        series = self.directory / "plain.csv"
        series.write_text("x\n" + "\n".join(str(x) for x in range(30)) + "\n")
        untrimmed = Run(
            "fit",
            "--series",
            str(series),
            "--p",
            "3",
            "--lambda",
            "0.1",
            "--out",
            str(self.directory),
        )
        self.assertEqual(untrimmed.status, EXIT_INVALID)
        self.runOK(
            "fit",
            "--series",
            str(series),
            "--p",
            "3",
            "--lambda",
            "0.1",
            "--trim-presample",
        )

    def test_yuleWalker(self) -> None:
        series = self.simulated()
        run = self.runOK("yw", "--series", str(series), "--max-order", "5")
        result = loads((self.directory / "yw.json").read_text())
        self.assertEqual(len(result["aic"]), 6)
        self.assertIn(f"AIC order {result['chosen_order']}", run.output)


class CheckTests(CommandTestCase):
    def test_paperInstance(self) -> None:
        run = self.runOK("check", "--n", "1000", "--p", "50")
        lines = run.output.splitlines()
        self.assertEqual(len(lines), 13)
        self.assertTrue(lines[0].startswith("thm1.c_max"))
        self.assertTrue(lines[-1].startswith("cor1.bound"))
        self.assertTrue(lines[-1].endswith("VACUOUS"))
        report = loads((self.directory / "conditions.json").read_text())
        self.assertEqual(report["p"], 50)
        self.assertAlmostEqual(report["lambda"], 1000**-0.45)

    def test_defaultLags(self) -> None:
        self.runOK("check", "--n", "1000")
        report = loads((self.directory / "conditions.json").read_text())
        self.assertEqual(report["p"], 15)
        self.assertEqual(len(report["rows"]), 13)

    def test_lambda(self) -> None:
        run = self.runOK("check", "--n", "100", "--p", "20", "--lambda", "1")
        self.assertIn("N-A", run.output)


class ExperimentTests(CommandTestCase):
    def test_mc(self) -> None:
        model = self.directory / "model.json"
        writeModel(ArModel(np.array([0.6, 0.0, -0.3]), 1.0), model)
        run = self.runOK(
            "mc",
            "--model",
            str(model),
            "--n",
            "200",
            "--p",
            "5",
            "--replications",
            "2",
            "--folds",
            "3",
            "--grid-size",
            "10",
            "--max-order",
            "5",
            "--seed",
            "7",
            "--cv-rule",
            "one-se",
        )
        self.assertIn("2 replications", run.output)
        report = loads((self.directory / "report.json").read_text())
        self.assertEqual(report["config"]["base_seed"], 7)
        self.assertEqual(report["config"]["n"], 200)
        self.assertEqual(report["config"]["cv_rule"], "one-se")
        for name in ("table1", "num_selected", "entry_order", "yw_orders"):
            self.assertTrue((self.directory / f"{name}.csv").exists())

    def test_configFile(self) -> None:
        config = self.directory / "config.json"
        saveJSON(
            {
                "model": {"phi": [0.5], "sigma": 1.0},
                "n": 150,
                "p": 3,
                "replications": 2,
                "cv_folds": 3,
                "grid_size": 8,
                "max_order": 4,
            },
            config,
        )
        self.runOK("mc", "--config", str(config), "--replications", "1")
        report = loads((self.directory / "report.json").read_text())
        self.assertEqual(report["config"]["replications"], 1)
        self.assertEqual(report["config"]["p"], 3)
        self.assertEqual(report["config"]["cv_rule"], "minimum")


class FailureTests(CommandTestCase):
    def test_usage(self) -> None:
        self.assertEqual(Run().status, EXIT_INVALID)
        self.assertEqual(Run("transmogrify").status, EXIT_INVALID)
        bad = Run("simulate", "--n", "0")
        self.assertEqual(bad.status, EXIT_INVALID)
        rule = Run("cv", "--series", "s.csv", "--p", "3", "--cv-rule", "any")
        self.assertEqual(rule.status, EXIT_INVALID)
        self.assertIn("--n", bad.errors)

    def test_insufficientPresample(self) -> None:
        self.runOK("simulate", "--n", "100")
        run = Run(
            "fit",
            "--series",
            str(self.directory / "series.csv"),
            "--p",
            "20",
            "--lambda",
            "0.01",
            "--out",
            str(self.directory),
        )
        self.assertEqual(run.status, EXIT_INVALID)
        self.assertIn("p_presample", run.errors)

    def test_badWeights(self) -> None:
        series = self.simulated()
        run = Run(
            "path",
            "--series",
            str(series),
            "--p",
            "20",
            "--weights",
            "1,2",
            "--out",
            str(self.directory),
        )
        self.assertEqual(run.status, EXIT_INVALID)

    def test_nonCausalModel(self) -> None:
        model = self.directory / "explosive.json"
        saveJSON({"phi": [1.5], "sigma": 1.0}, model)
        run = Run(
            "simulate", "--model", str(model), "--out", str(self.directory)
        )
        self.assertEqual(run.status, EXIT_INVALID)
        self.assertIn("not causal", run.errors)

    def test_malformedSeries(self) -> None:
        series = self.directory / "broken.csv"
        series.write_text("x\n1.0\nseven\n")
        run = Run(
            "yw", "--series", str(series), "--out", str(self.directory)
        )
        self.assertEqual(run.status, EXIT_INVALID)
        self.assertIn("line 3", run.errors)

    def test_missingFile(self) -> None:
        run = Run(
            "yw",
            "--series",
            str(self.directory / "absent.csv"),
            "--out",
            str(self.directory),
        )
        self.assertEqual(run.status, EXIT_FAILURE)
        self.assertIn("absent.csv", run.errors)

    def test_jsonLog(self) -> None:
        events = self.directory / "events.json"
        self.runOK(
            "yw",
            "--series",
            str(self.simulated()),
            "--max-order",
            "3",
            "-v",
            "--log-json",
            str(events),
        )
        self.assertIn("Yule-Walker AIC chose order", events.read_text())


class WeightParsingTests(TestCase):
    def test_parse(self) -> None:
        self.assertEqual(parseWeights("unit", 3).tolist(), [1.0, 1.0, 1.0])
        self.assertEqual(parseWeights("1,0.5", 2).tolist(), [1.0, 0.5])
        with self.assertRaises(InvalidInput):
            parseWeights("1,x", 2)
        with self.assertRaises(InvalidInput):
            parseWeights("1", 2)
