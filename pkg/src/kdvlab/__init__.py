"""kdvlab: a pseudo-spectral laboratory for vector KdV long-wave limits.

Layers, bottom up:

- ``grid``      periodic grids, FFT derivatives, generic steppers
- ``kdv``       the vector KdV system, conserved quantities, hyperbolic diagnostics
- ``models``    geometry data for the concrete microscopic families and their limit equations
- ``micro``     microscopic simulations in the long-wave scaling
- ``hydro``     Madelung-chart extraction, observables, almost-conserved functional
- ``analysis``  solitary waves, nonlinearity fixed points, Miura transform
- ``experiments`` / ``cli``  reproducible experiment runner and command line
"""

__version__ = "0.1.0"
