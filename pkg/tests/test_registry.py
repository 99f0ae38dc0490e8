import pytest

from app.schemes import registry
from app.schemes.baseline import BaselineScheme
from app.schemes.linear import LinearScheme
from app.schemes.two_stage import TwoStageScheme
from app.services.channel import ChannelSpec


def test_list_supported_schemes():
    assert registry.list_supported_schemes() == ["baseline", "linear", "two_stage"]


def test_build_by_name():
    spec = ChannelSpec(P=1.0, n=16, alpha=0.05)
    assert isinstance(registry.build_scheme("baseline", 3, spec), BaselineScheme)
    assert isinstance(registry.build_scheme("two-stage", 3, spec), TwoStageScheme)
    assert isinstance(registry.build_scheme("linear", 3, spec, lam=None), LinearScheme)


def test_overrides_reach_scheme():
    spec = ChannelSpec(P=1.0, n=9, alpha=0.0)
    scheme = registry.build_scheme("two_stage", 3, spec, lam=0.7, s=0.2, delta=None)
    assert scheme.params.lam == 0.7
    assert scheme.params.s == 0.2


def test_unknown_scheme():
    with pytest.raises(ValueError):
        registry.load_scheme_class("turbo")


def test_register_scheme(monkeypatch):
    monkeypatch.setitem(registry.SCHEME_SPECS, "plain", ("app.schemes.baseline", "BaselineScheme"))
    assert registry.load_scheme_class("plain") is BaselineScheme
    with pytest.raises(ValueError):
        registry.register_scheme("", "m", "a")


def test_missing_class(monkeypatch):
    monkeypatch.setitem(registry.SCHEME_SPECS, "ghost", ("app.schemes.baseline", "GhostScheme"))
    with pytest.raises(RuntimeError):
        registry.load_scheme_class("ghost")
