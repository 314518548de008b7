"""
DigiWFS Unwrap - Simulation module

Phase screens and the noise protocol.
"""

from backend.simulation.screens import ScreenSpec, apply_noise, kolmogorov_screen, structure_function

__all__ = ["ScreenSpec", "apply_noise", "kolmogorov_screen", "structure_function"]
