"""Filamentary network model: geometry, electrodes, drives, and the
line-oriented model-file format.

A LoopNetwork is the desk-scale stand-in for a meshed conducting part:
nodes in 3-D, resistive branches between them, named electrode node sets
where current can be injected, and optional external source coils.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    Disconnected,
    ElectrodeOverlap,
    InvalidGeometry,
    ParseError,
    ValidationError,
)

#: Two nodes closer than this (in metres) are considered coincident.
MIN_NODE_SEPARATION = 1e-9


@dataclass(frozen=True)
class Electrode:
    name: str
    nodes: tuple[int, ...]

    @property
    def reference_node(self) -> int:
        """Injection node for basis construction: the first listed node."""
        return self.nodes[0]


@dataclass(frozen=True)
class SourceCoil:
    """External coil polyline. If ``port`` names an electrode, the coil is
    the feed conductor carrying that port's injected current; otherwise it
    carries an independent source current."""

    name: str
    points: np.ndarray
    port: str | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] < 2:
            raise InvalidGeometry(f"coil {self.name!r}: polyline needs >= 2 3-D points")
        object.__setattr__(self, "points", pts)

    @property
    def segments(self) -> tuple[np.ndarray, np.ndarray]:
        return self.points[:-1], self.points[1:]


@dataclass(frozen=True)
class LoopNetwork:
    """Connected filament graph with electrode node sets.

    nodes: (n, 3) positions in metres.
    node_a, node_b: branch endpoints (0-based node ids).
    wire_radius, resistivity, cross_section: per branch, SI units.
    """

    nodes: np.ndarray
    node_a: np.ndarray
    node_b: np.ndarray
    wire_radius: np.ndarray
    resistivity: np.ndarray
    cross_section: np.ndarray
    electrodes: tuple[Electrode, ...] = ()
    sources: tuple[SourceCoil, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "nodes", np.ascontiguousarray(self.nodes, dtype=float))
        for name in ("node_a", "node_b"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.int64))
        for name in ("wire_radius", "resistivity", "cross_section"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        self._validate()

    def _validate(self):
        n = self.n_nodes
        if n < 2:
            raise ValidationError("a network needs at least 2 nodes")
        if self.n_branches < 1:
            raise ValidationError("a network needs at least 1 branch")
        if np.any(self.node_a == self.node_b):
            bad = int(np.argmax(self.node_a == self.node_b))
            raise ValidationError(f"branch {bad} connects a node to itself")
        for ids in (self.node_a, self.node_b):
            if ids.min() < 0 or ids.max() >= n:
                raise ValidationError("branch endpoint references a missing node")
        if np.any(self.resistivity <= 0) or np.any(self.cross_section <= 0) \
                or np.any(self.wire_radius <= 0):
            raise ValidationError("branch material parameters must be positive")
        # coincident nodes
        d2 = self.nodes[:, None, :] - self.nodes[None, :, :]
        dist = np.sqrt((d2 * d2).sum(axis=2))
        np.fill_diagonal(dist, np.inf)
        if dist.min() < MIN_NODE_SEPARATION:
            i, j = np.unravel_index(int(np.argmin(dist)), dist.shape)
            raise ValidationError(f"nodes {i} and {j} are coincident")
        # electrodes: disjoint, in range, count 0 or >= 2
        seen: dict[int, str] = {}
        names = set()
        for el in self.electrodes:
            if el.name in names:
                raise ValidationError(f"duplicate electrode name {el.name!r}")
            names.add(el.name)
            if len(el.nodes) == 0:
                raise ValidationError(f"electrode {el.name!r} is empty")
            for v in el.nodes:
                if v < 0 or v >= n:
                    raise ValidationError(f"electrode {el.name!r} references missing node {v}")
                if v in seen:
                    raise ElectrodeOverlap(
                        f"node {v} belongs to electrodes {seen[v]!r} and {el.name!r}")
                seen[v] = el.name
        if len(self.electrodes) == 1:
            raise ValidationError(
                "a single electrode cannot carry net current; use 0 or >= 2")
        if not self._connected():
            raise Disconnected("branch graph is not connected")

    def _connected(self) -> bool:
        n = self.n_nodes
        adj: list[list[int]] = [[] for _ in range(n)]
        for a, b in zip(self.node_a, self.node_b):
            adj[a].append(int(b))
            adj[b].append(int(a))
        seen = np.zeros(n, dtype=bool)
        stack = [0]
        seen[0] = True
        while stack:
            v = stack.pop()
            for w in adj[v]:
                if not seen[w]:
                    seen[w] = True
                    stack.append(w)
        return bool(seen.all())

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_branches(self) -> int:
        return self.node_a.shape[0]

    @property
    def n_electrodes(self) -> int:
        return len(self.electrodes)

    @property
    def branch_lengths(self) -> np.ndarray:
        d = self.nodes[self.node_b] - self.nodes[self.node_a]
        return np.sqrt((d * d).sum(axis=1))

    @property
    def branch_starts(self) -> np.ndarray:
        return self.nodes[self.node_a]

    @property
    def branch_ends(self) -> np.ndarray:
        return self.nodes[self.node_b]

    def branch_resistances(self) -> np.ndarray:
        """Per-branch DC resistance eta * l / A in ohms."""
        return self.resistivity * self.branch_lengths / self.cross_section


@dataclass(frozen=True)
class DefectSpec:
    """Local flaw: branches whose midpoint falls inside the angular and
    axial window are removed or get their resistivity scaled."""

    angle_min: float
    angle_max: float
    z_min: float
    z_max: float
    mode: str = "remove-branches"
    factor: float = 1.0

    def __post_init__(self):
        if self.mode not in ("remove-branches", "scale-resistivity"):
            raise ValidationError(f"unknown defect mode {self.mode!r}")
        if self.angle_max <= self.angle_min or self.z_max <= self.z_min:
            raise ValidationError("defect windows must be nonempty")
        if self.factor <= 0:
            raise ValidationError("resistivity scale factor must be > 0")

    def covers(self, midpoints: np.ndarray) -> np.ndarray:
        """Boolean mask of branch midpoints inside the window. Angles are
        compared modulo 2 pi so windows may straddle the branch cut."""
        phi = np.arctan2(midpoints[:, 1], midpoints[:, 0])
        z = midpoints[:, 2]
        lo = self.angle_min
        width = self.angle_max - self.angle_min
        rel = np.mod(phi - lo, 2 * math.pi)
        in_angle = rel <= width + 1e-12
        return in_angle & (z >= self.z_min - 1e-12) & (z <= self.z_max + 1e-12)


@dataclass(frozen=True)
class Tone:
    amplitude: float
    frequency: float
    phase: float = 0.0


@dataclass(frozen=True)
class DriveSignal:
    """Multi-sine waveform and the ports/coils it feeds.

    ``ports`` are electrode names (each listed electrode receives this
    waveform as its injected current; the excluded reference electrode is
    the shared return). ``sources`` are coil names carrying the waveform
    as an independent source current.
    """

    tones: tuple[Tone, ...]
    ports: tuple[str, ...] = ()
    sources: tuple[str, ...] = ()

    def __post_init__(self):
        tones = tuple(Tone(*t) if not isinstance(t, Tone) else t for t in self.tones)
        object.__setattr__(self, "tones", tones)
        freqs = [t.frequency for t in tones]
        if any(f <= 0 for f in freqs):
            raise ValidationError("tone frequencies must be strictly positive")
        if len(set(freqs)) != len(freqs):
            raise ValidationError("tone frequencies must be distinct within a signal")
        if any(t.amplitude < 0 for t in tones):
            raise ValidationError("tone amplitudes must be >= 0")

    @property
    def frequencies(self) -> np.ndarray:
        return np.array([t.frequency for t in self.tones])


def eval_drive(signal: DriveSignal, t):
    """Waveform value sum_k I_k sin(2 pi f_k t + phi_k) in amperes."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValidationError("drive evaluation requires t >= 0")
    out = np.zeros_like(t)
    for tone in signal.tones:
        out = out + tone.amplitude * np.sin(2 * math.pi * tone.frequency * t + tone.phase)
    return out if out.ndim else float(out)


def eval_drive_rate(signal: DriveSignal, t):
    """Exact analytic time derivative of eval_drive, in A/s."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValidationError("drive evaluation requires t >= 0")
    out = np.zeros_like(t)
    for tone in signal.tones:
        w = 2 * math.pi * tone.frequency
        out = out + tone.amplitude * w * np.cos(w * t + tone.phase)
    return out if out.ndim else float(out)


def default_phases(n_tones: int) -> np.ndarray:
    """Low-crest-factor phase schedule phi_k = -pi k (k-1) / N, k = 1..N."""
    if n_tones < 1:
        raise ValidationError("n_tones must be >= 1")
    k = np.arange(1, n_tones + 1, dtype=float)
    return -math.pi * k * (k - 1) / n_tones


# --- tube grid generator ------------------------------------------------------

def default_electrode_spec(n_axial: int, n_circ: int):
    """Two electrodes, each a diametrically opposite node pair, one pair on
    each end ring: grid coordinates (ring, slot)."""
    return (
        ("drive", ((0, 0), (0, n_circ // 2))),
        ("return", ((n_axial - 1, 0), (n_axial - 1, n_circ // 2))),
    )


def generate_tube_grid(radius: float, length: float, wall_thickness: float,
                       n_axial: int, n_circ: int, resistivity: float,
                       electrode_spec=None, defect: DefectSpec | None = None,
                       sources: tuple[SourceCoil, ...] = ()) -> LoopNetwork:
    """Single-layer filament grid on a cylinder surface.

    Nodes sit in n_axial rings of n_circ points; branches run around each
    ring and axially between adjacent rings. Branch cross sections are
    wall_thickness times the local cell width, so wall thickness enters the
    model only through branch resistance and equivalent wire radius.
    electrode_spec is a sequence of (name, ((ring, slot), ...)) entries;
    None picks the default end-ring pairs, () builds an electrode-free grid.
    """
    if radius <= 0 or length <= 0 or wall_thickness <= 0:
        raise InvalidGeometry("radius, length and wall thickness must be positive")
    if n_axial < 2 or n_circ < 3:
        raise InvalidGeometry("need n_axial >= 2 and n_circ >= 3")
    if resistivity <= 0:
        raise InvalidGeometry("resistivity must be positive")

    dz = length / (n_axial - 1)
    phis = 2 * math.pi * np.arange(n_circ) / n_circ
    nodes = np.empty((n_axial * n_circ, 3))
    for r in range(n_axial):
        base = r * n_circ
        nodes[base:base + n_circ, 0] = radius * np.cos(phis)
        nodes[base:base + n_circ, 1] = radius * np.sin(phis)
        nodes[base:base + n_circ, 2] = r * dz

    chord = 2 * radius * math.sin(math.pi / n_circ)
    arc = 2 * math.pi * radius / n_circ

    node_a, node_b, area = [], [], []
    # ring branches first (end rings get half-width cells), then axial rungs
    for r in range(n_axial):
        width = dz if 0 < r < n_axial - 1 else dz / 2
        for j in range(n_circ):
            node_a.append(r * n_circ + j)
            node_b.append(r * n_circ + (j + 1) % n_circ)
            area.append(wall_thickness * width)
    for r in range(n_axial - 1):
        for j in range(n_circ):
            node_a.append(r * n_circ + j)
            node_b.append((r + 1) * n_circ + j)
            area.append(wall_thickness * arc)

    node_a = np.array(node_a, dtype=np.int64)
    node_b = np.array(node_b, dtype=np.int64)
    area = np.array(area)
    radius_eq = np.sqrt(area / math.pi)
    lengths = np.full(node_a.shape, chord)
    lengths[n_axial * n_circ:] = dz
    if np.any(radius_eq >= lengths / 2):
        raise InvalidGeometry(
            "equivalent wire radius exceeds half a branch length; refine the "
            "grid or reduce the wall thickness")
    rho = np.full(node_a.shape, float(resistivity))

    if electrode_spec is None:
        electrode_spec = default_electrode_spec(n_axial, n_circ)
    electrodes = []
    for name, coords in electrode_spec:
        ids = []
        for ring, slot in coords:
            if not (0 <= ring < n_axial and 0 <= slot < n_circ):
                raise InvalidGeometry(
                    f"electrode {name!r}: grid coordinate ({ring}, {slot}) out of range")
            ids.append(ring * n_circ + slot)
        electrodes.append(Electrode(name, tuple(ids)))

    keep = np.ones(node_a.shape[0], dtype=bool)
    if defect is not None:
        mid = 0.5 * (nodes[node_a] + nodes[node_b])
        mask = defect.covers(mid)
        if defect.mode == "remove-branches":
            if mask.all():
                raise ValidationError("defect would remove every branch")
            keep = ~mask
        else:
            rho = np.where(mask, rho * defect.factor, rho)

    try:
        return LoopNetwork(
            nodes=nodes,
            node_a=node_a[keep],
            node_b=node_b[keep],
            wire_radius=radius_eq[keep],
            resistivity=rho[keep],
            cross_section=area[keep],
            electrodes=tuple(electrodes),
            sources=tuple(sources),
        )
    except Disconnected as exc:
        raise ValidationError(
            "defect window would disconnect the branch graph") from exc


# --- model file format --------------------------------------------------------

def serialize_model(net: LoopNetwork) -> str:
    """Write the line-oriented model format (see parse_model)."""
    out = ["# eddymodes model"]
    out.append("[nodes]")
    for i, p in enumerate(net.nodes):
        out.append(f"{i} {float(p[0])!r} {float(p[1])!r} {float(p[2])!r}")
    out.append("[branches]")
    for i in range(net.n_branches):
        out.append(
            f"{i} {int(net.node_a[i])} {int(net.node_b[i])} "
            f"{float(net.wire_radius[i])!r} {float(net.resistivity[i])!r} "
            f"{float(net.cross_section[i])!r}")
    if net.electrodes:
        out.append("[electrodes]")
        for el in net.electrodes:
            out.append(f"{el.name} " + " ".join(str(v) for v in el.nodes))
    if net.sources:
        out.append("[sources]")
        for coil in net.sources:
            binding = f"port:{coil.port}" if coil.port else "free"
            coords = " ".join(repr(float(x)) for x in coil.points.ravel())
            out.append(f"{coil.name} {binding} {coords}")
    return "\n".join(out) + "\n"


def parse_model(text: str) -> LoopNetwork:
    """Parse the model format.

    Sections ``[nodes]`` (id x y z), ``[branches]``
    (id a b radius resistivity cross_section), ``[electrodes]``
    (name node-list) and ``[sources]`` (name port:<electrode>|free polyline
    coordinates). ``#`` starts a comment; ids must be consecutive from 0;
    SI units throughout.
    """
    nodes, branches, electrodes, sources = [], [], [], []
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if line not in ("[nodes]", "[branches]", "[electrodes]", "[sources]"):
                raise ParseError(f"unknown section {line}", lineno)
            section = line[1:-1]
            continue
        toks = line.split()
        try:
            if section == "nodes":
                if len(toks) != 4:
                    raise ParseError("expected: id x y z", lineno)
                idx = int(toks[0])
                if idx != len(nodes):
                    raise ParseError(f"node ids must be consecutive, expected {len(nodes)}", lineno)
                nodes.append([float(toks[1]), float(toks[2]), float(toks[3])])
            elif section == "branches":
                if len(toks) != 6:
                    raise ParseError("expected: id a b radius resistivity cross_section", lineno)
                idx = int(toks[0])
                if idx != len(branches):
                    raise ParseError(f"branch ids must be consecutive, expected {len(branches)}", lineno)
                branches.append((int(toks[1]), int(toks[2]),
                                 float(toks[3]), float(toks[4]), float(toks[5])))
            elif section == "electrodes":
                if len(toks) < 2:
                    raise ParseError("expected: name node-list", lineno)
                electrodes.append(Electrode(toks[0], tuple(int(v) for v in toks[1:])))
            elif section == "sources":
                if len(toks) < 2 + 6 or (len(toks) - 2) % 3 != 0:
                    raise ParseError("expected: name port:<electrode>|free x y z x y z ...", lineno)
                port = None
                if toks[1].startswith("port:"):
                    port = toks[1][5:]
                elif toks[1] != "free":
                    raise ParseError(f"bad source binding {toks[1]!r}", lineno)
                coords = np.array([float(v) for v in toks[2:]]).reshape(-1, 3)
                sources.append(SourceCoil(toks[0], coords, port))
            else:
                raise ParseError("data before any section header", lineno)
        except ParseError:
            raise
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from exc
    if not nodes:
        raise ParseError("model has no [nodes] section", None)
    if not branches:
        raise ParseError("model has no [branches] section", None)
    br = np.array([(a, b) for a, b, *_ in branches], dtype=np.int64)
    known = {el.name for el in electrodes}
    for coil in sources:
        if coil.port is not None and coil.port not in known:
            raise ValidationError(
                f"source {coil.name!r} bound to unknown electrode {coil.port!r}")
    return LoopNetwork(
        nodes=np.array(nodes),
        node_a=br[:, 0],
        node_b=br[:, 1],
        wire_radius=np.array([b[2] for b in branches]),
        resistivity=np.array([b[3] for b in branches]),
        cross_section=np.array([b[4] for b in branches]),
        electrodes=tuple(electrodes),
        sources=tuple(sources),
    )
