"""Numerical laboratory for a planar oscillator with delayed feedback.

Submodules: ``model`` (equations, coordinates, histories), ``integrator``
(Dormand-Prince with dense output, method of steps, events), ``blowup``
(classification and the stage-1 estimates), ``branches`` (constant-radius
periodic solutions) and ``cli``.
"""

__version__ = "0.1.0"
