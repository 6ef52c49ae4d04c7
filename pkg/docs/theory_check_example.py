from larch.experiments import paperModel
from larch.lasso import PenaltyConfig
from larch.theory import conditionReport

# choose an instance
n, p = 1000, 50
penalty = PenaltyConfig.unit(p, n**-0.45)

# evaluate
report = conditionReport(paperModel(), n, p, penalty)

# print the verdicts
for row in report.rows:
    print(row.name, row.value, row.verdict.value)
print("D =", report.constants.bigD)
