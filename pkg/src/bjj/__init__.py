"""Bosonic Josephson junction dynamics: pendulum model, mean-field oracle, fitting."""
