"""Seeded random streams.

One integer seed fans out into independent named streams through
``SeedSequence.spawn``; every stream drives a counter-based Philox
generator, so each component gets its own reproducible sequence no matter
how much randomness the others consume.
"""
import numpy as np


def streams(seed, names):
    """``{name: Generator}`` with one independent stream per name, in order."""
    children = np.random.SeedSequence(int(seed)).spawn(len(names))
    return {name: np.random.Generator(np.random.Philox(ss)) for name, ss in zip(names, children)}


def generator(seed):
    """Single Philox generator for ``seed``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))
