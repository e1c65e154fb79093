# -*- coding: utf-8 -*-
# vim:fenc=utf-8
#
# Copyright (C) 2025 TU Dresden
#
# Distributed under terms of the MIT license.

# pylint: disable=missing-module-docstring

__version__ = "v0.1.0"
