"""torsionlab: torsion forms, Witten deformation and Morse complexes at desk scale."""

__version__ = "0.1.0"
