"""
Package of mechanisms for persisting models, series, fits and experiment
reports.
"""
