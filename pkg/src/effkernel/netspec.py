"""Network descriptions: parsing, validation, serialization and presets.

A network is a list of named components, a transport term per component and
a list of signed interaction gains.  Gains are read "source acts on target":
an entry ``source=u, target=v, gain=g`` adds ``g * u`` to ``dv/dt``, so it
lands in row ``v``, column ``u`` of the interaction matrix.  A ring-range
entry couples through the ring kernel at distance ``l`` instead of locally.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np
import tomli

from .errors import NetworkParseError, SpecValidationError, UnknownPresetError

TRANSPORT_KINDS = ("none", "diffusion", "custom_kernel")
RING_NORMALIZATIONS = ("unit", "measure")


@dataclass(frozen=True)
class TransportTerm:
    kind: str = "none"
    d: float = 0.0
    # (s, value) pairs of the transport's Fourier transform, s >= 0
    samples: tuple[tuple[float, float], ...] | None = None

    @classmethod
    def diffusion(cls, d: float) -> "TransportTerm":
        return cls(kind="diffusion", d=float(d))

    @classmethod
    def custom_kernel(cls, samples: Iterable[tuple[float, float]]) -> "TransportTerm":
        return cls(kind="custom_kernel", samples=tuple((float(s), float(v)) for s, v in samples))


NO_TRANSPORT = TransportTerm()


@dataclass(frozen=True)
class InteractionEntry:
    source: str
    target: str
    gain: float
    ring: float | None = None  # distance l of a ring coupling, None for local

    @property
    def is_ring(self) -> bool:
        return self.ring is not None


@dataclass(frozen=True)
class NetworkSpec:
    components: tuple[str, ...]
    transport: tuple[TransportTerm, ...]
    interactions: tuple[InteractionEntry, ...] = ()
    dimension_default: int = 1
    ring_normalization: str = "unit"
    notes: str = ""

    @property
    def size(self) -> int:
        return len(self.components)

    def index(self, name: str) -> int:
        return self.components.index(name)

    def diffusivities(self) -> np.ndarray:
        return np.array([t.d if t.kind == "diffusion" else 0.0 for t in self.transport])

    def local_matrix(self) -> np.ndarray:
        """Matrix of the local (non-ring) gains."""
        a = np.zeros((self.size, self.size))
        for e in self.interactions:
            if not e.is_ring:
                a[self.index(e.target), self.index(e.source)] += e.gain
        return a

    def ring_terms(self) -> list[tuple[int, int, float, float]]:
        """``(row, col, gain, l)`` for every ring-range entry."""
        return [
            (self.index(e.target), self.index(e.source), e.gain, e.ring)
            for e in self.interactions
            if e.is_ring
        ]

    def permuted(self, order: Iterable[str]) -> "NetworkSpec":
        """Same network with components declared in ``order``."""
        order = tuple(order)
        if sorted(order) != sorted(self.components):
            raise ValueError("order must be a permutation of the component names")
        transport = tuple(self.transport[self.index(name)] for name in order)
        return replace(self, components=order, transport=transport)


@dataclass
class ValidationReport:
    errors: list[tuple[str, str]] = field(default_factory=list)
    warnings: list[tuple[str, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors


def validate(spec: NetworkSpec) -> ValidationReport:
    """Collect every invariant violation of ``spec``; never raises."""
    report = ValidationReport()
    err = report.errors.append

    if len(spec.components) < 1:
        err(("components", "network needs at least one component"))
    seen: set[str] = set()
    for name in spec.components:
        if name in seen:
            err((f"component.{name}", f"duplicate component name '{name}'"))
        seen.add(name)
    if len(spec.transport) != len(spec.components):
        err(("transport", "one transport term per component required"))
    if spec.dimension_default not in (1, 2):
        err(("dimension", f"dimension must be 1 or 2, got {spec.dimension_default!r}"))
    if spec.ring_normalization not in RING_NORMALIZATIONS:
        err(("ring_normalization", f"unknown ring normalization {spec.ring_normalization!r}"))

    for name, term in zip(spec.components, spec.transport):
        loc = f"component.{name}.transport"
        if term.kind not in TRANSPORT_KINDS:
            err((loc, f"unknown transport kind {term.kind!r}"))
            continue
        if not math.isfinite(term.d):
            err((loc, "diffusivity must be finite"))
        elif term.d < 0:
            err((loc, "negative diffusivity"))
        if term.kind == "custom_kernel":
            err_msg = _check_custom_samples(term.samples)
            if err_msg:
                err((loc, err_msg))

    for i, e in enumerate(spec.interactions):
        loc = f"interaction[{i}]"
        for role in ("source", "target"):
            name = getattr(e, role)
            if name not in seen:
                err((loc, f"unknown component '{name}' in {role}"))
        if not math.isfinite(e.gain):
            err((loc, "gain must be finite"))
        if e.ring is not None and not (e.ring > 0):
            err((loc, "nonpositive ring distance"))
        if e.gain == 0.0:
            report.warnings.append((loc, "zero gain has no effect"))
    return report


def _check_custom_samples(samples) -> str | None:
    if not samples or len(samples) < 2:
        return "custom kernel needs at least two samples"
    arr = np.asarray(samples, dtype=float)
    if not np.all(np.isfinite(arr)):
        return "custom kernel samples must be finite"
    s, v = arr[:, 0], arr[:, 1]
    if np.any(np.diff(s) <= 0):
        return "custom kernel wavenumbers must be strictly increasing"
    if s[0] < 0:
        # two-sided samples are allowed only when they describe an even function
        mirrored = np.interp(-s, s, v)
        if not np.allclose(mirrored, v, rtol=1e-12, atol=1e-12):
            return "custom kernel samples are not even in the wavenumber"
    return None


def require_valid(spec: NetworkSpec) -> NetworkSpec:
    report = validate(spec)
    if not report.ok:
        raise SpecValidationError(report)
    return spec


# --------------------------------------------------------------------------
# config text format

_TOP_KEYS = {"dimension", "ring_normalization", "notes", "component", "interaction"}
_COMPONENT_KEYS = {"transport"}
_INTERACTION_KEYS = {"source", "target", "gain", "range"}
_LOCATION_RE = re.compile(r"\(at line (\d+), column (\d+)\)")


def parse_network(text: str) -> NetworkSpec:
    """Parse a network config document (TOML subset, see docs/config_format.md)."""
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        msg = str(exc)
        m = _LOCATION_RE.search(msg)
        line, col = (int(m.group(1)), int(m.group(2))) if m else (None, None)
        raise NetworkParseError(f"syntax error: {_LOCATION_RE.sub('', msg).strip()}", line, col) from None

    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise NetworkParseError(f"unknown top-level key(s): {', '.join(sorted(unknown))}")

    comps = doc.get("component", {})
    if not isinstance(comps, dict) or not comps:
        raise NetworkParseError("at least one [component.<name>] table is required")
    names: list[str] = []
    transports: list[TransportTerm] = []
    for name, table in comps.items():
        if not isinstance(table, dict):
            raise NetworkParseError(f"component.{name} must be a table")
        bad = set(table) - _COMPONENT_KEYS
        if bad:
            raise NetworkParseError(f"unknown key(s) in component.{name}: {', '.join(sorted(bad))}")
        names.append(name)
        transports.append(_parse_transport(name, table.get("transport", "none")))

    interactions = []
    raw = doc.get("interaction", [])
    if not isinstance(raw, list):
        raise NetworkParseError("'interaction' must be an array of tables ([[interaction]])")
    for i, entry in enumerate(raw):
        interactions.append(_parse_interaction(i, entry))

    dim = doc.get("dimension", 1)
    if isinstance(dim, bool) or not isinstance(dim, int):
        raise NetworkParseError("dimension must be the integer 1 or 2")
    notes = doc.get("notes", "")
    if not isinstance(notes, str):
        raise NetworkParseError("notes must be a string")
    norm = doc.get("ring_normalization", "unit")

    spec = NetworkSpec(
        components=tuple(names),
        transport=tuple(transports),
        interactions=tuple(interactions),
        dimension_default=dim,
        ring_normalization=norm,
        notes=notes,
    )
    return require_valid(spec)


def _parse_transport(name: str, raw) -> TransportTerm:
    if raw == "none":
        return NO_TRANSPORT
    if isinstance(raw, dict) and len(raw) == 1:
        (kind, value), = raw.items()
        if kind == "diffusion":
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise NetworkParseError(f"component.{name}: diffusion must be a number")
            return TransportTerm.diffusion(float(value))
        if kind == "custom_kernel":
            if not isinstance(value, dict) or set(value) != {"s", "value"}:
                raise NetworkParseError(f"component.{name}: custom_kernel needs arrays 's' and 'value'")
            s, v = value["s"], value["value"]
            if len(s) != len(v):
                raise NetworkParseError(f"component.{name}: custom_kernel arrays differ in length")
            return TransportTerm.custom_kernel(zip(s, v))
    raise NetworkParseError(
        f"component.{name}: transport must be \"none\", {{diffusion = <float>}} "
        "or {custom_kernel = {s = [...], value = [...]}}"
    )


def _parse_interaction(i: int, entry) -> InteractionEntry:
    if not isinstance(entry, dict):
        raise NetworkParseError(f"interaction[{i}] must be a table")
    bad = set(entry) - _INTERACTION_KEYS
    if bad:
        raise NetworkParseError(f"unknown key(s) in interaction[{i}]: {', '.join(sorted(bad))}")
    for key in ("source", "target", "gain"):
        if key not in entry:
            raise NetworkParseError(f"interaction[{i}] is missing '{key}'")
    gain = entry["gain"]
    if isinstance(gain, bool) or not isinstance(gain, (int, float)):
        raise NetworkParseError(f"interaction[{i}]: gain must be a number")
    ring = None
    rng = entry.get("range", "local")
    if rng != "local":
        if not (isinstance(rng, dict) and set(rng) == {"ring"}):
            raise NetworkParseError(f"interaction[{i}]: range must be \"local\" or {{ring = <float>}}")
        ring = float(rng["ring"])
    return InteractionEntry(str(entry["source"]), str(entry["target"]), float(gain), ring)


def _fmt(x: float) -> str:
    # repr round-trips float64 exactly and is valid TOML for finite values
    return repr(float(x))


def _key(name: str) -> str:
    return name if re.fullmatch(r"[A-Za-z0-9_-]+", name) else '"' + name.replace('"', '\\"') + '"'


def serialize_network(spec: NetworkSpec) -> str:
    """Render ``spec`` in the config format; ``parse_network`` inverts it exactly."""
    out = [f"dimension = {spec.dimension_default}"]
    if spec.ring_normalization != "unit":
        out.append(f'ring_normalization = "{spec.ring_normalization}"')
    if spec.notes:
        out.append("notes = " + _toml_string(spec.notes))
    for name, term in zip(spec.components, spec.transport):
        out.append("")
        out.append(f"[component.{_key(name)}]")
        if term.kind == "none":
            out.append('transport = "none"')
        elif term.kind == "diffusion":
            out.append(f"transport = {{diffusion = {_fmt(term.d)}}}")
        else:
            s = ", ".join(_fmt(a) for a, _ in term.samples)
            v = ", ".join(_fmt(b) for _, b in term.samples)
            out.append(f"transport = {{custom_kernel = {{s = [{s}], value = [{v}]}}}}")
    for e in spec.interactions:
        out.append("")
        out.append("[[interaction]]")
        out.append("source = " + _toml_string(e.source))
        out.append("target = " + _toml_string(e.target))
        out.append(f"gain = {_fmt(e.gain)}")
        if e.is_ring:
            out.append(f"range = {{ring = {_fmt(e.ring)}}}")
    return "\n".join(out) + "\n"


def _toml_string(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n") + '"'


# --------------------------------------------------------------------------
# presets


def _network(components, transport, entries, *, dimension=1, normalization="unit", notes=""):
    return NetworkSpec(
        components=tuple(components),
        transport=tuple(transport),
        interactions=tuple(InteractionEntry(*e) for e in entries),
        dimension_default=dimension,
        ring_normalization=normalization,
        notes=notes,
    )


def _activator_inhibitor():
    c1, c2, c3, c4, d1, d2 = 1.0, 1.0, 4.0, 3.0, 0.05, 3.0
    return _network(
        ("u", "v"),
        (TransportTerm.diffusion(d1), TransportTerm.diffusion(d2)),
        [("u", "u", c1), ("v", "u", -c2), ("u", "v", c3), ("v", "v", -c4)],
        notes="linearized activator-inhibitor system, slow activator u and fast inhibitor v",
    )


def _three_node():
    k2, k3, k4, k6, k7, k9, d = 0.5, 1.0, 1.0, 1.0, 1.0, 1.0, 0.02
    return _network(
        ("u", "v", "w"),
        (NO_TRANSPORT, TransportTerm.diffusion(d), TransportTerm.diffusion(d)),
        [
            ("v", "u", k2),
            ("u", "v", k3),
            ("v", "v", -k4),
            ("w", "v", -k6),
            ("u", "w", k7),
            ("w", "w", -k9),
        ],
        notes="three-node network, immobile u and equally diffusing v, w",
    )


def _pigment(k1, k2, k3, k4, k5, k6, d, l, notes):
    entries = []
    if k1 != 0:
        entries.append(("u", "u", -k1, l))
    entries += [
        ("u", "u", -k5),
        ("v", "u", -k3),
        ("v", "u", k4, l),
        ("u", "v", -k2),
        ("v", "v", -k6),
    ]
    return _network(
        ("u", "v"),
        (TransportTerm.diffusion(d), TransportTerm.diffusion(d)),
        entries,
        dimension=2,
        normalization="measure",
        notes=notes,
    )


def _proneural(a_e: float):
    l = 1.0
    d_e, k_e, k_n, d_t, d_c, k_d, a_d, e_a = 1.0, 1.0, 2.0, 0.5 / (2 * math.pi * l), 0.1, 1.5, 1.0, 10.0
    return _network(
        ("E", "N", "D", "As"),
        (TransportTerm.diffusion(d_e), NO_TRANSPORT, NO_TRANSPORT, NO_TRANSPORT),
        [
            ("E", "E", -k_e),
            ("As", "E", a_e),
            ("N", "N", -k_n),
            ("D", "N", d_t, l),
            ("D", "N", -d_c),
            ("D", "D", -k_d),
            ("As", "D", a_d),
            ("E", "As", e_a),
            ("N", "As", -e_a),
        ],
        dimension=2,
        normalization="measure",
        notes="EGF / Notch / Delta / AS-C network with Delta-Notch contact signalling at distance l",
    )


_PRESETS = {
    "activator_inhibitor": _activator_inhibitor,
    "three_node": _three_node,
    "pigment": lambda: _pigment(
        0.055 * 0.016, 0.05, 0.04, 0.055 * 0.03, 0.02, 0.025, 0.02, 3.0,
        "pigment-cell network (melanophore u, xanthophore v) with long-range projections",
    ),
    "pigment_rescaled": lambda: _pigment(
        5.5 * 0.016, 5.0, 4.0, 5.5 * 0.03, 3.0, 3.0, 0.2, 3.0,
        "rescaled pigment-cell network, self-inhibition k1 != 0",
    ),
    "pigment_k1_zero": lambda: _pigment(
        0.0, 5.0, 4.0, 5.5 * 0.03, 3.0, 3.0, 0.2, 3.0,
        "rescaled pigment-cell network without long-range self-inhibition (k1 = 0)",
    ),
    "proneural": lambda: _proneural(1.0),
    "proneural_salt_pepper": lambda: _proneural(0.1),
}

PRESET_NAMES = tuple(_PRESETS)


def builtin_presets(name: str) -> NetworkSpec:
    try:
        factory = _PRESETS[name]
    except KeyError:
        raise UnknownPresetError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}") from None
    return factory()
