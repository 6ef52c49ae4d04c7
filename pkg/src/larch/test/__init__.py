# -*- test-case-name: larch.test -*-
"""
Test cases.

The slowest reproduction checks only run with C{LARCH_SLOW_TESTS=1} in the
environment.
"""
