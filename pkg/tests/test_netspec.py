from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from effkernel.errors import NetworkParseError, SpecValidationError, UnknownPresetError
from effkernel.netspec import (
    PRESET_NAMES,
    InteractionEntry,
    NetworkSpec,
    TransportTerm,
    builtin_presets,
    parse_network,
    serialize_network,
    validate,
)

ACTIVATOR_DOC = """
# slow activator, fast inhibitor
[component.u]
transport = {diffusion = 0.05}

[component.v]
transport = {diffusion = 3.0}

[[interaction]]
source = "u"
target = "u"
gain = 1.0

[[interaction]]
source = "v"
target = "u"
gain = -1.0

[[interaction]]
source = "u"
target = "v"
gain = 4.0

[[interaction]]
source = "v"
target = "v"
gain = -3.0
"""


def test_parse_activator_doc():
    spec = parse_network(ACTIVATOR_DOC)
    assert spec.components == ("u", "v")
    np.testing.assert_array_equal(spec.local_matrix(), [[1, -1], [4, -3]])
    np.testing.assert_array_equal(spec.diffusivities(), [0.05, 3.0])


def test_empty_interactions_give_zero_matrix():
    spec = parse_network("[component.a]\ntransport = {diffusion = 1.0}\n[component.b]\n")
    np.testing.assert_array_equal(spec.local_matrix(), np.zeros((2, 2)))
    assert spec.transport[1].kind == "none"


def test_undeclared_component_is_named():
    doc = ACTIVATOR_DOC + '\n[[interaction]]\nsource = "w"\ntarget = "u"\ngain = 1.0\n'
    with pytest.raises(SpecValidationError, match="'w'"):
        parse_network(doc)


def test_syntax_error_has_line_and_column():
    with pytest.raises(NetworkParseError) as info:
        parse_network("[component.u]\ntransport = {diffusion = }\n")
    assert info.value.line == 2
    assert info.value.column is not None


@pytest.mark.parametrize(
    "doc, match",
    [
        ("colour = 1\n[component.u]\n", "unknown top-level"),
        ("[component.u]\nspeed = 1\n", "unknown key"),
        ('[component.u]\n[[interaction]]\nsource = "u"\ntarget = "u"\ngain = 1\nextra = 2\n', "unknown key"),
        ('[component.u]\ntransport = {diffusion = -1.0}\n', "negative diffusivity"),
        ('[component.u]\n[[interaction]]\nsource = "u"\ntarget = "u"\ngain = 1\nrange = {ring = 0.0}\n',
         "nonpositive ring distance"),
        ("dimension = 3\n[component.u]\n", "dimension"),
    ],
)
def test_rejections(doc, match):
    with pytest.raises((NetworkParseError, SpecValidationError), match=match):
        parse_network(doc)


def test_validate_reports_single_errors():
    base = builtin_presets("activator_inhibitor")
    assert validate(base).ok and not validate(base).errors
    neg = NetworkSpec(base.components, (TransportTerm.diffusion(-1.0), base.transport[1]), base.interactions)
    rep = validate(neg)
    assert [m for _, m in rep.errors] == ["negative diffusivity"]
    ring0 = NetworkSpec(base.components, base.transport, (InteractionEntry("u", "u", 1.0, 0.0),))
    assert [m for _, m in validate(ring0).errors] == ["nonpositive ring distance"]


def test_custom_kernel_must_be_even():
    odd = TransportTerm.custom_kernel([(-1.0, 1.0), (0.0, 0.0), (1.0, -1.0)])
    spec = NetworkSpec(("u",), (odd,), ())
    assert not validate(spec).ok
    even = TransportTerm.custom_kernel([(0.0, 0.0), (1.0, -1.0)])
    assert validate(NetworkSpec(("u",), (even,), ())).ok


def test_presets_match_caption_values():
    ai = builtin_presets("activator_inhibitor")
    np.testing.assert_array_equal(ai.local_matrix(), [[1, -1], [4, -3]])
    np.testing.assert_array_equal(ai.diffusivities(), [0.05, 3.0])
    tn = builtin_presets("three_node")
    np.testing.assert_array_equal(tn.local_matrix(), [[0, 0.5, 0], [1, -1, -1], [1, 0, -1]])
    np.testing.assert_array_equal(tn.diffusivities(), [0, 0.02, 0.02])
    pn = builtin_presets("proneural")
    assert pn.diffusivities()[0] == 1.0
    gains = {(e.source, e.target): e.gain for e in pn.interactions}
    assert math.isclose(max(abs(g) for g in gains.values()), 10.0)
    sp = builtin_presets("proneural_salt_pepper")
    assert sp.components == pn.components and sp != pn


def test_unknown_preset():
    with pytest.raises(UnknownPresetError):
        builtin_presets("zebra")


@pytest.mark.parametrize("name", PRESET_NAMES)
def test_round_trip_presets(name):
    spec = builtin_presets(name)
    again = parse_network(serialize_network(spec))
    assert again == spec
    np.testing.assert_array_equal(again.local_matrix(), spec.local_matrix())


_gain = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


@settings(max_examples=60, deadline=None)
@given(
    d=st.lists(st.floats(0, 1e3, allow_nan=False), min_size=3, max_size=3),
    gains=st.lists(_gain, min_size=9, max_size=9),
    rings=st.lists(st.one_of(st.none(), st.floats(1e-3, 1e3)), min_size=9, max_size=9),
)
def test_round_trip_random(d, gains, rings):
    names = ("a", "b", "c")
    entries = tuple(
        InteractionEntry(names[i % 3], names[i // 3], g, r) for i, (g, r) in enumerate(zip(gains, rings))
    )
    spec = NetworkSpec(names, tuple(TransportTerm.diffusion(x) for x in d), entries)
    assert parse_network(serialize_network(spec)) == spec


def test_permutation_is_a_similarity():
    spec = builtin_presets("three_node")
    order = ("w", "u", "v")
    perm = [spec.index(n) for n in order]
    p = np.eye(3)[perm]
    moved = spec.permuted(order)
    np.testing.assert_array_equal(moved.local_matrix(), p @ spec.local_matrix() @ p.T)
    np.testing.assert_array_equal(np.diag(moved.diffusivities()), p @ np.diag(spec.diffusivities()) @ p.T)
