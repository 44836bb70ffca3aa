"""bianchi_lab: verification lab for Bianchi-form algebra, boundary geometry
and the Bianchi-gauged linearized Einstein boundary-value problem."""

__version__ = "0.1.0"
