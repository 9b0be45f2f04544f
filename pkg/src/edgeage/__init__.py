"""Face age translation through edge maps.

Two trained stages: an unpaired edge-to-edge translator between young and
old edge-map domains, and an identity-conditioned edge-to-face generator.
Everything runs on a small numpy reverse-mode autodiff engine.
"""

__version__ = "0.1.0"
