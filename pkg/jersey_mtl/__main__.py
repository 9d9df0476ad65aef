# -*- coding: utf-8 -*-
"""Permite `python -m jersey_mtl`."""

from .core.main import run

if __name__ == "__main__":
    run()
