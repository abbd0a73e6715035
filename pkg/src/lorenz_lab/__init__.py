"""Delayed-feedback control of the generalized Lorenz family.

Modules: ``core_model`` (vector fields), ``dde`` (integrator and oscillation
metrics), ``spectral`` (characteristic equation and critical delay),
``normal_form`` (Hopf direction and stability), ``omega_map`` (image of the
imaginary axis), ``sweep`` (alpha sweeps and regime checks), ``cli``.
"""

__version__ = "0.1.0"
