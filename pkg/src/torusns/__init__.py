"""Spectral laboratory for the incompressible Navier-Stokes equations on the
n-torus at finite Fourier truncation.

Submodules: ``spectral`` (lattices, fields, norms), ``nsop`` (mode
operator), ``stepper`` (Trotter-type schemes), ``dyson`` (exponential
actions, time-ordered series), ``picard``, ``dilatation``, ``analysis``,
``bchlab``, ``presets``, ``realbasis`` and ``cli``.
"""

__version__ = "0.1.0"
