"""POD mode-coefficient interpolation reduced-order modeling."""

__version__ = "0.1.0"
