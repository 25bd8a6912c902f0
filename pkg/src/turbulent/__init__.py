"""Computational toolkit for turbulent foliations on products of elliptic curves."""
