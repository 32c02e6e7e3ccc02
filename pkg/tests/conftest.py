"""Shared pytest fixtures."""

from __future__ import annotations

import dataclasses

import pytest

from fpmusic.fpemu import builtin_formats


@pytest.fixture(scope="session")
def fmts():
    return builtin_formats()


@pytest.fixture(scope="session")
def free_fmts():
    """Builtin formats with exponent-range enforcement off."""
    return {
        k: dataclasses.replace(v, enforce_range=False)
        for k, v in builtin_formats().items()
    }
