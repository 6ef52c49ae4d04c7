import numpy as np

from larch.design import buildDesign
from larch.experiments import paperModel
from larch.lasso import solutionPath
from larch.process import simulate
from larch.selection import (
    crossValidate,
    refitAtChoice,
    selectedSupport,
    yuleWalker,
)

# set up the model
model = paperModel()
print("true support", model.support())

# simulate
p = 50
series = simulate(model, 1000, pPresample=p, seed=1)

# build the design
design = buildDesign(series, p)
weights = np.ones(p)

# trace the path
path = solutionPath(design, weights, gridSize=100)
print("first five to enter", path.entryOrder()[:5])

# cross-validate
cv = crossValidate(design, weights, path.lambdas, folds=10, seed=1)
chosen = refitAtChoice(design, weights, cv)
print("chosen lambda", cv.chosenLambda)
print("selected lags", selectedSupport(path, cv.chosenLambda))
print("refit support", chosen.support)

# compare with Yule-Walker
baseline = yuleWalker(series, 30)
print("AIC order", baseline.chosenOrder)
