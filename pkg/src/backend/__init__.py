"""
DigiWFS Unwrap - backend package

Numerical core of the toolkit: grids and propagation, digital wavefront
sensors, reconstructors, classical baselines, screen simulation and metrics.
"""
