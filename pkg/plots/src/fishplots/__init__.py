"""Figure scripts for tatonnement experiment CSVs: the average
objective-gap trajectory with anchored 1/t, 1/t^2, 1/t^3 reference
curves, and the elasticity x step-size convergence-fraction heatmap.

Figures are pure functions of the input CSVs and the figure options; no
clock or network state enters the plotted content."""

__version__ = "0.1.0"
