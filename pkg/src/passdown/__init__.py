"""Combinatorial machinery for hierarchies of group actions on trees:
stabilizer-labeled 2-complexes, resolutions to trees, track surgery,
hierarchy passdown with covolume accounting, and stable-pair/cone
analysis with finite-horizon certificates."""

__version__ = "0.1.0"
