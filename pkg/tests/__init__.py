# -*- coding: utf-8 -*-
"""
Tests module - Testes unitários e de integração.
"""
