"""Turntable RIS link simulation, binary beam steering and per-element
reflection-coefficient identification."""

__version__ = "0.1.0"
