"""alloysmt: checks assertions of an Alloy-subset relational language with an
SMT solver, finitizing types only on demand, and cross-validates every verdict
with a brute-force finite-model oracle."""

__version__ = "0.1.0"
