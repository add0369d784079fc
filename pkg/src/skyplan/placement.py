"""UAV placement per aerial cell and the resulting transmit power.

Each cluster of stations becomes one aerial cell served by a single
UAV at a common altitude.  The power-optimal horizontal position is
the demand-weighted centroid of the member stations, with weights
2^(rate/W) - 1: under quadratic free-space loss that point exactly
minimizes the sum of per-station minimum powers.  The achieved power
of a cell is then computed by the chosen multi-access solver over the
cell's station demands.

All coordinates here are planar meters (east/north); project
geographic inputs first (see ``skyplan.data.project_to_meters``).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import access, channel
from .access import AccessSolution, Scheme, UserDemand
from .channel import Point3, RadioParams
from .errors import ValidationError

log = logging.getLogger("skyplan.placement")


@dataclass(frozen=True)
class CellStation:
    """A served ground station: planar position and required uplink rate."""

    id: int
    x: float
    y: float
    rate: float          # bit/s

    def __post_init__(self):
        if self.rate < 0 or not math.isfinite(self.rate):
            raise ValidationError(f"station {self.id}: rate must be finite and >= 0")


@dataclass
class AerialCell:
    """One UAV's service area: a nonempty set of stations."""

    cluster_id: int
    stations: list[CellStation]

    def __post_init__(self):
        if not self.stations:
            raise ValidationError(f"cell {self.cluster_id} has no stations")


@dataclass
class DeploymentPlan:
    """UAV positions and powers for a full partition of the station set."""

    cells: list[AerialCell]
    uav_positions: list[Point3]
    per_cell_power: list[float]
    total_power: float
    scheme: Scheme
    solutions: list[AccessSolution] = field(default_factory=list, repr=False)
    warnings: list[str] = field(default_factory=list)


def traffic_weight(rate: float, bandwidth: float) -> float:
    """Demand weight 2^(rate / W) - 1 of one station."""
    if rate < 0:
        raise ValidationError("rate must be >= 0")
    if bandwidth <= 0:
        raise ValidationError("bandwidth must be > 0")
    return channel.exp2m1(rate / bandwidth)


def mean_position(cell: AerialCell, params: RadioParams) -> Point3:
    """Unweighted station mean at the UAV altitude (no-optimization baseline)."""
    xs = np.array([s.x for s in cell.stations])
    ys = np.array([s.y for s in cell.stations])
    return Point3(float(xs.mean()), float(ys.mean()), params.altitude)


def optimal_position(cell: AerialCell, params: RadioParams) -> Point3:
    """Demand-weighted centroid at the UAV altitude.

    Falls back to the unweighted mean when every station has zero
    demand (all weights vanish).
    """
    weights = np.array([traffic_weight(s.rate, params.bandwidth)
                        for s in cell.stations])
    total = weights.sum()
    if not np.isfinite(total) or total <= 0.0:
        if total > 0.0:
            raise ValidationError(
                f"cell {cell.cluster_id}: demand weight overflow; rates far exceed W")
        return mean_position(cell, params)
    weights = weights / total
    xs = np.array([s.x for s in cell.stations])
    ys = np.array([s.y for s in cell.stations])
    return Point3(float((weights * xs).sum()), float((weights * ys).sum()),
                  params.altitude)


def station_demands(cell: AerialCell, uav: Point3,
                    params: RadioParams) -> list[UserDemand]:
    """Per-station (link gain, rate) pairs as seen from a UAV position."""
    return [
        UserDemand(
            gain=channel.link_gain(params, uav, Point3(s.x, s.y, 0.0)),
            rate=s.rate,
        )
        for s in cell.stations
    ]


def cell_power(cell: AerialCell, uav: Point3, params: RadioParams,
               scheme: Scheme | str = Scheme.RSMA) -> float:
    """Minimum total transmit power of the cell under one access scheme."""
    return cell_solution(cell, uav, params, scheme).total_power


def cell_solution(cell: AerialCell, uav: Point3, params: RadioParams,
                  scheme: Scheme | str = Scheme.RSMA) -> AccessSolution:
    users = station_demands(cell, uav, params)
    return access.solve(scheme, users, params.bandwidth, params.noise_density)


def independent_power_sum(cell: AerialCell, uav: Point3, params: RadioParams,
                          frozen_excess_db: float | None = None) -> float:
    """Placement objective: sum of stand-alone minimum powers of the stations.

    Each station is costed as if it had the whole band to itself,
    which is the objective the weighted centroid minimizes.  Passing
    ``frozen_excess_db`` replaces the elevation-dependent excess loss
    with a constant, making the objective exactly quadratic in the
    UAV's horizontal position (for path loss exponent 2).
    """
    total = 0.0
    for s in cell.stations:
        ground = Point3(s.x, s.y, 0.0)
        if frozen_excess_db is None:
            gain = channel.link_gain(params, uav, ground)
        else:
            dist, _ = channel.distance_and_elevation(uav, ground)
            loss_db = channel.free_space_path_loss(params, dist)
            gain_db = channel.linear_to_db(params.antenna_gain) - loss_db - frozen_excess_db
            gain = channel.db_to_linear(gain_db)
        total += channel.min_power_for_rate(params, s.rate, gain)
    return total


def altitude_spread_ratio(cell: AerialCell, uav: Point3) -> float:
    """Diagnostic h^2 / mean squared horizontal offset (inf for a single
    station right under the UAV).  The centroid rule is exact when this
    is far from 1 in either direction."""
    d2 = [(s.x - uav.x) ** 2 + (s.y - uav.y) ** 2 for s in cell.stations]
    spread2 = sum(d2) / len(d2)
    if spread2 == 0.0:
        return math.inf
    return uav.z ** 2 / spread2


def build_cells(labels, positions, rates, station_ids=None) -> list[AerialCell]:
    """Group stations by cluster label into aerial cells (sorted by label)."""
    labels = np.asarray(labels)
    positions = np.asarray(positions, dtype=float)
    rates = np.asarray(rates, dtype=float)
    n = len(labels)
    if positions.shape != (n, 2) or rates.shape != (n,):
        raise ValidationError("labels, positions, and rates must agree in length")
    if station_ids is None:
        station_ids = list(range(n))
    cells = []
    for cid in sorted(set(int(v) for v in labels)):
        members = [
            CellStation(id=int(station_ids[i]), x=float(positions[i, 0]),
                        y=float(positions[i, 1]), rate=float(rates[i]))
            for i in range(n) if int(labels[i]) == cid
        ]
        cells.append(AerialCell(cluster_id=cid, stations=members))
    return cells


def plan_deployment(labels, positions, rates, params: RadioParams,
                    scheme: Scheme | str = Scheme.RSMA,
                    optimize_positions: bool = True,
                    station_ids=None,
                    expected_clusters: int | None = None) -> DeploymentPlan:
    """Full plan: group by label, place one UAV per cell, solve its power.

    ``optimize_positions=False`` parks each UAV at the unweighted
    cluster mean (the no-location-optimization baseline).  Cluster ids
    in ``range(expected_clusters)`` that end up with no stations are
    recorded as warnings rather than errors.
    """
    scheme = Scheme(scheme)
    cells = build_cells(labels, positions, rates, station_ids)
    warnings = []
    if expected_clusters is not None:
        present = {c.cluster_id for c in cells}
        for cid in range(expected_clusters):
            if cid not in present:
                msg = f"cluster {cid} is empty and was dropped"
                warnings.append(msg)
                log.warning(msg)

    uavs, powers, solutions = [], [], []
    for cell in cells:
        uav = optimal_position(cell, params) if optimize_positions \
            else mean_position(cell, params)
        sol = cell_solution(cell, uav, params, scheme)
        uavs.append(uav)
        powers.append(sol.total_power)
        solutions.append(sol)

    return DeploymentPlan(
        cells=cells,
        uav_positions=uavs,
        per_cell_power=powers,
        total_power=math.fsum(powers),
        scheme=scheme,
        solutions=solutions,
        warnings=warnings,
    )


def write_plan(plan: DeploymentPlan, path) -> None:
    """Structured text dump: one line per UAV, total power in the footer."""
    lines = ["skyplan-plan 1"]
    for cell, uav, power in zip(plan.cells, plan.uav_positions, plan.per_cell_power):
        ids = ",".join(str(s.id) for s in cell.stations)
        ratio = altitude_spread_ratio(cell, uav)
        lines.append(
            f"uav cluster={cell.cluster_id} x={uav.x!r} y={uav.y!r} h={uav.z!r} "
            f"stations={ids} scheme={plan.scheme.value} power_w={power!r} "
            f"h2_over_spread2={ratio!r}"
        )
    for msg in plan.warnings:
        lines.append(f"warning {msg}")
    lines.append(f"total_power_w {plan.total_power!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
