"""Desk-scale GAN privacy laboratory: training, Lipschitz regularizers, membership attacks and DP audits."""

__version__ = "0.1.0"
