"""Barrier construction and exhaustion for the asymptotic Dirichlet problem on model surfaces."""
