"""Inter-plane link eligibility and the stable plane-connectivity graph.

A satellite pair is eligible when it is visible (LoS distance within the
maximum slant range) and its line-of-sight Doppler shift stays within the
tolerable maximum. Planes i and j are connected when an eligible pair exists
between them at every sampled timestamp; each edge carries the mean linear
SNR of its eligible pair samples and the derived optimization weight
w(e) = xi_tilde + 1/xi, which makes hop count dominate path length.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .errors import ConfigurationError, DisconnectedConstellationError
from .geometry import (
    DEFAULT_CONSTANTS,
    ConstellationSpec,
    GeometryConstants,
    SatelliteState,
    build_walker,
    doppler_shift_hz,
    los_distance_km,
    max_slant_range_km,
)


@dataclass(frozen=True)
class LinkBudgetParams:
    """Inter-satellite link budget; SNR = EIRPG / (kappa * rho * B * L)."""

    carrier_frequency_hz: float
    eirpg_dbw: float
    bandwidth_hz: float
    max_doppler_hz: float
    noise_temperature_k: float = 290.0
    boltzmann_j_per_k: float = 1.380649e-23

    def __post_init__(self):
        if self.carrier_frequency_hz <= 0 or self.bandwidth_hz <= 0:
            raise ConfigurationError("carrier frequency and bandwidth must be > 0")
        if self.noise_temperature_k <= 0 or self.boltzmann_j_per_k <= 0:
            raise ConfigurationError("noise temperature and Boltzmann constant must be > 0")
        # max_doppler 0 is allowed so an unsatisfiable Doppler condition can be expressed
        if self.max_doppler_hz < 0:
            raise ConfigurationError("max_doppler_hz must be >= 0")


def free_space_path_loss(
    distance_km: float,
    carrier_frequency_hz: float,
    constants: GeometryConstants = DEFAULT_CONSTANTS,
) -> float:
    """(4 pi d f_c / c)^2 as a dimensionless power ratio."""
    if distance_km <= 0:
        raise ValueError("path loss undefined for non-positive distance")
    x = 4.0 * math.pi * distance_km * carrier_frequency_hz / constants.light_speed_km_s
    return x * x


def link_snr_linear(
    distance_km: float,
    params: LinkBudgetParams,
    constants: GeometryConstants = DEFAULT_CONSTANTS,
) -> float:
    loss = free_space_path_loss(distance_km, params.carrier_frequency_hz, constants)
    eirpg = 10.0 ** (params.eirpg_dbw / 10.0)
    noise = params.boltzmann_j_per_k * params.noise_temperature_k * params.bandwidth_hz
    return eirpg / (noise * loss)


def link_snr_db(
    distance_km: float,
    params: LinkBudgetParams,
    constants: GeometryConstants = DEFAULT_CONSTANTS,
) -> float:
    return 10.0 * math.log10(link_snr_linear(distance_km, params, constants))


def is_eligible_pair(
    u: SatelliteState,
    v: SatelliteState,
    params: LinkBudgetParams,
    constants: GeometryConstants = DEFAULT_CONSTANTS,
) -> bool:
    """Visibility and Doppler conditions for a reliable ISL (both inclusive)."""
    d = los_distance_km(u, v, constants)
    if d > max_slant_range_km(u.altitude_km, v.altitude_km, constants):
        return False
    if d == 0.0:
        # degenerate co-located pair: no line of sight, distance condition decides
        return True
    return doppler_shift_hz(u, v, params.carrier_frequency_hz, constants) <= params.max_doppler_hz


@dataclass
class InterPlaneEdge:
    planes: tuple[int, int]
    quality: float  # xi, mean linear SNR over pooled eligible (pair, timestamp) samples
    weight: float = 0.0  # xi_tilde + 1/xi, filled once xi_tilde is known
    eligible_pairs: dict[int, list[tuple[int, int]]] = field(default_factory=dict)
    # eligible_pairs maps timestamp index -> [(slot in plane i, slot in plane j), ...]


@dataclass
class InterPlaneGraph:
    """Undirected weighted graph over orbit planes."""

    n_planes: int
    edges: list[InterPlaneEdge]
    xi_tilde: float = 0.0
    timestamps: list[float] = field(default_factory=list)

    @classmethod
    def from_qualities(cls, n_planes: int, qualities: dict[tuple[int, int], float]) -> "InterPlaneGraph":
        """Build a graph from per-edge xi values, deriving diameter-dominant weights."""
        edges = [
            InterPlaneEdge(planes=tuple(sorted(pair)), quality=xi)
            for pair, xi in sorted(qualities.items())
        ]
        for e in edges:
            if e.quality <= 0:
                raise ConfigurationError("edge quality xi must be > 0")
        g = cls(n_planes=n_planes, edges=edges)
        g._assign_weights()
        return g

    @classmethod
    def from_weights(cls, n_planes: int, weights: dict[tuple[int, int], float]) -> "InterPlaneGraph":
        """Build a graph with explicit positive edge weights (synthetic/test use)."""
        edges = []
        for pair, w in sorted(weights.items()):
            if w <= 0:
                raise ConfigurationError("edge weight must be > 0")
            edges.append(InterPlaneEdge(planes=tuple(sorted(pair)), quality=1.0 / w, weight=w))
        return cls(n_planes=n_planes, edges=edges)

    def _assign_weights(self) -> None:
        self.xi_tilde = sum(1.0 / e.quality for e in self.edges)
        for e in self.edges:
            e.weight = self.xi_tilde + 1.0 / e.quality

    def weight_map(self) -> dict[tuple[int, int], float]:
        return {e.planes: e.weight for e in self.edges}

    def neighbors(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n_planes)]
        for e in self.edges:
            i, j = e.planes
            adj[i].append(j)
            adj[j].append(i)
        for lst in adj:
            lst.sort()
        return adj

    def components(self) -> list[list[int]]:
        adj = self.neighbors()
        seen = [False] * self.n_planes
        comps = []
        for start in range(self.n_planes):
            if seen[start]:
                continue
            stack, comp = [start], []
            seen[start] = True
            while stack:
                v = stack.pop()
                comp.append(v)
                for w in adj[v]:
                    if not seen[w]:
                        seen[w] = True
                        stack.append(w)
            comps.append(sorted(comp))
        return comps

    def is_connected(self) -> bool:
        return len(self.components()) == 1

    def to_json_dict(self) -> dict:
        return {
            "n_planes": self.n_planes,
            "xi_tilde": self.xi_tilde,
            "edges": [
                {
                    "planes": list(e.planes),
                    "quality": e.quality,
                    "weight": e.weight,
                    "eligible_pair_counts": {str(t): len(p) for t, p in e.eligible_pairs.items()},
                }
                for e in self.edges
            ],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "InterPlaneGraph":
        edges = [
            InterPlaneEdge(planes=tuple(e["planes"]), quality=e["quality"], weight=e["weight"])
            for e in data["edges"]
        ]
        return cls(n_planes=data["n_planes"], edges=edges, xi_tilde=data.get("xi_tilde", 0.0))

    def save_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load_json(cls, path) -> "InterPlaneGraph":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))

    def to_dot(self) -> str:
        lines = ["graph interplane {"]
        for v in range(self.n_planes):
            lines.append(f"  {v} [label=\"plane {v}\"];")
        for e in self.edges:
            i, j = e.planes
            lines.append(f"  {i} -- {j} [label=\"xi={e.quality:.4g}, w={e.weight:.4g}\"];")
        lines.append("}")
        return "\n".join(lines) + "\n"


def build_interplane_graph(
    spec: ConstellationSpec,
    timestamps: list[float],
    params: LinkBudgetParams,
    constants: GeometryConstants = DEFAULT_CONSTANTS,
    require_every_timestamp: bool = True,
) -> InterPlaneGraph:
    """Evaluate eligibility over the sampling grid and assemble the plane graph.

    With `require_every_timestamp` (the default, matching the stable-topology
    reading) an edge needs an eligible pair at every sampled timestamp;
    setting it False relaxes the condition to "at some timestamp".
    Raises DisconnectedConstellationError when the result is not connected.
    """
    if not timestamps:
        raise ConfigurationError("at least one timestamp is required")

    n = spec.planes
    pair_ok: dict[tuple[int, int], list[bool]] = {
        (i, j): [] for i in range(n) for j in range(i + 1, n)
    }
    pair_snr: dict[tuple[int, int], list[float]] = {k: [] for k in pair_ok}
    pair_eligible: dict[tuple[int, int], dict[int, list[tuple[int, int]]]] = {
        k: {} for k in pair_ok
    }

    for t_idx, t in enumerate(timestamps):
        states = build_walker(spec, t, constants)
        by_plane: list[list[SatelliteState]] = [[] for _ in range(n)]
        for s in states:
            by_plane[s.plane_index].append(s)
        for i in range(n):
            for j in range(i + 1, n):
                found = []
                for su in by_plane[i]:
                    for sv in by_plane[j]:
                        if is_eligible_pair(su, sv, params, constants):
                            found.append((su.slot_index, sv.slot_index))
                            d = los_distance_km(su, sv, constants)
                            pair_snr[(i, j)].append(link_snr_linear(d, params, constants))
                pair_ok[(i, j)].append(bool(found))
                if found:
                    pair_eligible[(i, j)][t_idx] = found

    edges = []
    for (i, j), flags in sorted(pair_ok.items()):
        present = all(flags) if require_every_timestamp else any(flags)
        if not present:
            continue
        xi = sum(pair_snr[(i, j)]) / len(pair_snr[(i, j)])
        edges.append(
            InterPlaneEdge(planes=(i, j), quality=xi, eligible_pairs=pair_eligible[(i, j)])
        )

    graph = InterPlaneGraph(n_planes=n, edges=edges, timestamps=list(timestamps))
    graph._assign_weights()
    if not graph.is_connected():
        raise DisconnectedConstellationError(graph.components())
    return graph


def write_link_debug_csv(
    path,
    spec: ConstellationSpec,
    timestamps: list[float],
    params: LinkBudgetParams,
    constants: GeometryConstants = DEFAULT_CONSTANTS,
) -> None:
    """Per (satellite pair, timestamp) link diagnostics.

    Keeps both the line-of-sight projected relative speed (which drives the
    Doppler condition) and the raw relative speed magnitude, so the effect
    of the projection convention stays inspectable.
    """
    import csv

    from .geometry import relative_speed_km_s

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "t_s", "plane_u", "slot_u", "plane_v", "slot_v", "distance_km",
                "max_slant_km", "rel_speed_los_km_s", "rel_speed_raw_km_s",
                "doppler_hz", "eligible",
            ]
        )
        for t in timestamps:
            states = build_walker(spec, t, constants)
            for a in range(len(states)):
                for b in range(a + 1, len(states)):
                    su, sv = states[a], states[b]
                    if su.plane_index == sv.plane_index:
                        continue
                    d = los_distance_km(su, sv, constants)
                    slant = max_slant_range_km(su.altitude_km, sv.altitude_km, constants)
                    projected, raw = relative_speed_km_s(su, sv, constants)
                    doppler = projected * params.carrier_frequency_hz / constants.light_speed_km_s
                    writer.writerow(
                        [
                            repr(t), su.plane_index, su.slot_index, sv.plane_index,
                            sv.slot_index, repr(d), repr(slant), repr(projected),
                            repr(raw), repr(doppler),
                            int(d <= slant and doppler <= params.max_doppler_hz),
                        ]
                    )


def sampling_grid(
    spec: ConstellationSpec,
    step_s: float = 60.0,
    duration_s: float | None = None,
    constants: GeometryConstants = DEFAULT_CONSTANTS,
) -> list[float]:
    """Uniform timestamp grid over one orbital period (or `duration_s`)."""
    from .geometry import orbital_period_s

    if step_s <= 0:
        raise ConfigurationError("sampling step must be > 0")
    horizon = orbital_period_s(spec.altitude_km, constants) if duration_s is None else duration_s
    n_steps = max(1, int(horizon / step_s))
    return [k * step_s for k in range(n_steps)]
