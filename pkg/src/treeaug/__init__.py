"""Approximation and exact tooling for the tree augmentation problem."""
