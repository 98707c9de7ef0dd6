"""Numerical laboratory for epiperimetric inequalities on the unit disk.

The package builds competitors for one-phase, double-phase and vectorial
Bernoulli energies from spectral boundary data, evaluates Weiss energies on
sampled fields, minimizes the regularized functionals on masked grids, and
analyzes blow-ups of the computed minimizers.
"""

__version__ = "0.1.0"
