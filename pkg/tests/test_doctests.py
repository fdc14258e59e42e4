import doctest
import importlib
import pkgutil

import pytest

import erc_sentinel

MODULES = [m.name for m in pkgutil.walk_packages(erc_sentinel.__path__, "erc_sentinel.")]


@pytest.mark.parametrize("name", MODULES)
def test_module_doctests(name):
    result = doctest.testmod(importlib.import_module(name))
    assert result.failed == 0
