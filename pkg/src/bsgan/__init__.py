"""BSGAN: Borderline-SMOTE samples as generator input for GAN oversampling."""

__version__ = "0.1.0"
