"""Internal-time reduction of collinear reactive scattering.

Reaction-path geometry on a model potential surface is reduced to a
driven parametric oscillator in internal time, whose classical solution
gives state-to-state transition probabilities in closed form.  A direct
grid propagation of the same reduced equation serves as an independent
check.

Modules
-------
pes         collision system and model surfaces
geometry    reaction path, curvature, metric and frame integration
oscillator  effective frequency profile and the classical xi/eta solutions
amplitudes  scattering parameters, transition probabilities, wavefunctions
oracle      split-operator grid propagation and overlap matrices
cli         command-line entry point (``itscatter``)
"""

__version__ = "0.1.0"
