"""Heavy-tailed affine recursions: regeneration, tail constants and path large deviations."""
