# FGW pseudo-label generation
