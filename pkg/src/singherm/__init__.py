"""Singular hermitian metrics on trivial bundles over polydiscs."""
