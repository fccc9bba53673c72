"""Simulated aimbot study: a human-like aiming model, heuristic and GAN aimbots, and
neural detectors evaluated with EER and min-DCF."""

__version__ = "0.1.0"
