"""Steerable neural cellular automata.

Grid cells carry an orientation of their own (an explicit angle channel, or
one inferred from the gradient of a concentration channel) and rotate their
perception field with it.  The package trains such automata end to end to
grow RGBA patterns from one or two seed cells, with either a plain L2
objective or a rotation-invariant polar/FFT objective.
"""

__version__ = "0.1.0"
