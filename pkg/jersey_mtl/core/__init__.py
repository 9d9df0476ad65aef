# -*- coding: utf-8 -*-
"""
Core module - autodiff, rótulos, perdas, modelo e linha de comando.
"""
