"""kjflow: numerical workbench for subsonic flow-plate interaction
with Kutta-Joukowski boundary conditions."""

__version__ = "0.1.0"
