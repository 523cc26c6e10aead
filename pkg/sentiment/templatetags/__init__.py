# Template tags package
