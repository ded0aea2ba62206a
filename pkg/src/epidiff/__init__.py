"""SVEAIR epidemic model in ODE and reaction-diffusion form."""

__version__ = "0.1.0"
