"""hpt: a minimal dependent type checker (Pi, universes, identity types
with J) with normalization by evaluation, plus a bundled machine-checked
corpus developing the algebra of higher identity paths up to the
syllepsis theorem."""

import sys

# Corpus proof terms nest deeply; evaluation and readback recurse on them.
if sys.getrecursionlimit() < 100_000:
    sys.setrecursionlimit(100_000)

__version__ = "0.1.0"
