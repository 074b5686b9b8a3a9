"""Monte Carlo laboratory for critical site percolation arm events."""
