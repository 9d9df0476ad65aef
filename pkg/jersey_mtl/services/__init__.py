# -*- coding: utf-8 -*-
"""
Services module - dados sintéticos, treino, avaliação e experimentos.
"""
