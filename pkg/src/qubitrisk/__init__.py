"""Minimax risk laboratory for qubit state estimation."""
