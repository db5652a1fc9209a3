"""fgeom - fractional Lagrange-Finsler geometry toolkit."""
