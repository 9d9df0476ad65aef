# -*- coding: utf-8 -*-
"""
Utils module - logging, configurações, relatórios e verificação de gradientes.
"""
