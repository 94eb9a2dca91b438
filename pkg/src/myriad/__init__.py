"""Cauchy-noise parameter estimation and nonlocal myriad filtering."""
