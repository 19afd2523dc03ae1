"""Maritime medical-evacuation planning with overwater ambulance exchange points."""

__version__ = "0.1.0"
