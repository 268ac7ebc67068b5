import importlib
import inspect
import pkgutil

import pytest

import danger_assessment


def _modules():
    for info in pkgutil.walk_packages(danger_assessment.__path__, "danger_assessment."):
        yield importlib.import_module(info.name)


def _public_callables(module):
    for name, value in vars(module).items():
        if name.startswith("_") or getattr(value, "__module__", None) != module.__name__:
            continue
        if inspect.isfunction(value):
            yield name, value
        elif inspect.isclass(value):
            for attribute, member in vars(value).items():
                if attribute.startswith("_"):
                    continue
                if isinstance(member, (staticmethod, classmethod)):
                    member = member.__func__
                elif isinstance(member, property):
                    member = member.fget
                if inspect.isfunction(member):
                    yield f"{name}.{attribute}", member


@pytest.mark.parametrize("module", list(_modules()), ids=lambda module: module.__name__)
def test_public_callables_are_documented(module):
    undocumented = [name for name, value in _public_callables(module) if not inspect.getdoc(value)]
    assert undocumented == []
