"""Lower bounds and numerical estimates for weighted Hardy constants."""
