"""Air-to-ground uplink channel model.

A link between a hovering UAV and a ground station is described by free
space path loss, a sigmoid line-of-sight probability over the elevation
angle, and a class-dependent excess loss (LoS links attenuate less than
NLoS links).  Planning uses the expected excess loss; a sampled mode
draws the Gaussian excess loss from a caller-supplied RNG.

dB discipline: the link budget is assembled in dB inside ``link_gain``
and converted to linear exactly once; all rate/power arithmetic on top
of it is linear.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import GeometryError, InputError, ValidationError

LIGHT_SPEED = 299_792_458.0  # m/s
LN2 = math.log(2.0)

# Largest exponent for expm1(x * ln 2) before IEEE overflow.
_EXP2_MAX = 709.0 / LN2


def exp2m1(x: float) -> float:
    """2**x - 1, accurate near zero and saturating to inf instead of raising."""
    if x > _EXP2_MAX:
        return math.inf
    return math.expm1(x * LN2)


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(linear: float) -> float:
    return 10.0 * math.log10(linear)


def dbm_per_hz_to_watts(dbm: float) -> float:
    """dBm/Hz -> W/Hz (e.g. -140 dBm/Hz -> 1e-17 W/Hz)."""
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class RadioParams:
    """Physical-layer constants for the uplink budget.

    All stored values are in linear SI units except the explicitly
    dB-suffixed excess-loss statistics and the dimensionless sigmoid
    coefficients.  ``from_file`` accepts the dB/dBm forms people write
    in config files and converts on load.

    The sigmoid coefficient defaults (a=9.61, b=0.16) are widely used
    urban-environment values, not measured constants; set them for your
    own environment.
    """

    carrier_freq: float = 5e9            # Hz
    noise_density: float = 1e-17         # W/Hz (-140 dBm/Hz)
    bandwidth: float = 1e6               # Hz
    antenna_gain: float = 10.0           # linear (10 dB)
    path_loss_exponent: float = 2.0
    mu_los: float = 3.0                  # dB
    mu_nlos: float = 23.0                # dB
    sigma_los: float = 0.0               # dB
    sigma_nlos: float = 0.0              # dB
    sigmoid_a: float = 9.61
    sigmoid_b: float = 0.16              # per degree
    altitude: float = 200.0              # m

    def __post_init__(self):
        if self.carrier_freq <= 0:
            raise ValidationError("carrier_freq must be > 0")
        if self.noise_density <= 0:
            raise ValidationError("noise_density must be > 0")
        if self.bandwidth <= 0:
            raise ValidationError("bandwidth must be > 0")
        if self.antenna_gain <= 0:
            raise ValidationError("antenna_gain must be > 0 (linear)")
        if self.path_loss_exponent < 2:
            raise ValidationError("path_loss_exponent must be >= 2")
        if self.mu_nlos < self.mu_los:
            raise ValidationError("mu_nlos must be >= mu_los")
        if self.sigma_los < 0 or self.sigma_nlos < 0:
            raise ValidationError("sigma values must be >= 0")
        if self.altitude <= 0:
            raise ValidationError("altitude must be > 0")
        if self.sigmoid_a <= 0:
            raise ValidationError("sigmoid_a must be > 0")
        if self.sigmoid_b < 0:
            raise ValidationError("sigmoid_b must be >= 0")

    @property
    def noise_power(self) -> float:
        """Total in-band noise power n0 * W in watts."""
        return self.noise_density * self.bandwidth

    @classmethod
    def from_file(cls, path) -> "RadioParams":
        """Load from a flat ``key = value`` file.

        Recognized keys (dB/dBm fields are converted to linear on load)::

            carrier_freq_hz  noise_density_dbm_per_hz  bandwidth_hz
            antenna_gain_db  path_loss_exponent  mu_los_db  mu_nlos_db
            sigma_los_db  sigma_nlos_db  sigmoid_a  sigmoid_b  altitude_m

        Missing keys keep their defaults; ``#`` starts a comment.
        """
        try:
            with open(path, "r", encoding="utf-8") as fh:
                lines = fh.readlines()
        except OSError as exc:
            raise InputError(f"cannot read radio params file {path}: {exc}") from exc

        raw = {}
        for lineno, line in enumerate(lines, 1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ValidationError(f"{path}:{lineno}: expected key = value, got {text!r}")
            key, _, value = text.partition("=")
            try:
                raw[key.strip()] = float(value)
            except ValueError as exc:
                raise ValidationError(f"{path}:{lineno}: bad number {value.strip()!r}") from exc

        known = {
            "carrier_freq_hz", "noise_density_dbm_per_hz", "bandwidth_hz",
            "antenna_gain_db", "path_loss_exponent", "mu_los_db", "mu_nlos_db",
            "sigma_los_db", "sigma_nlos_db", "sigmoid_a", "sigmoid_b", "altitude_m",
        }
        unknown = set(raw) - known
        if unknown:
            raise ValidationError(f"{path}: unknown keys {sorted(unknown)}")

        kwargs = {}
        if "carrier_freq_hz" in raw:
            kwargs["carrier_freq"] = raw["carrier_freq_hz"]
        if "noise_density_dbm_per_hz" in raw:
            kwargs["noise_density"] = dbm_per_hz_to_watts(raw["noise_density_dbm_per_hz"])
        if "bandwidth_hz" in raw:
            kwargs["bandwidth"] = raw["bandwidth_hz"]
        if "antenna_gain_db" in raw:
            kwargs["antenna_gain"] = db_to_linear(raw["antenna_gain_db"])
        for src, dst in [
            ("path_loss_exponent", "path_loss_exponent"),
            ("mu_los_db", "mu_los"), ("mu_nlos_db", "mu_nlos"),
            ("sigma_los_db", "sigma_los"), ("sigma_nlos_db", "sigma_nlos"),
            ("sigmoid_a", "sigmoid_a"), ("sigmoid_b", "sigmoid_b"),
            ("altitude_m", "altitude"),
        ]:
            if src in raw:
                kwargs[dst] = raw[src]
        return cls(**kwargs)


@dataclass(frozen=True)
class Point3:
    """A point in the planning frame: x/y in meters (east/north), z up."""

    x: float
    y: float
    z: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)):
            raise ValidationError("Point3 coordinates must be finite")


def distance_and_elevation(uav: Point3, ground: Point3) -> tuple[float, float]:
    """3-D distance (m) and elevation angle (degrees) of an air-ground link.

    The UAV must be strictly above the ground point; the elevation is in
    (0, 90] with 90 for a vertical link.
    """
    dz = uav.z - ground.z
    if ground.z < 0:
        raise GeometryError("ground point must have z >= 0")
    if dz <= 0:
        raise GeometryError("UAV must be strictly above the ground point")
    dist = math.sqrt((uav.x - ground.x) ** 2 + (uav.y - ground.y) ** 2 + dz * dz)
    if dist == 0.0:
        raise GeometryError("coincident UAV and ground positions")
    elevation = math.degrees(math.asin(min(1.0, dz / dist)))
    return dist, elevation


def free_space_path_loss(params: RadioParams, distance: float) -> float:
    """Free-space loss in dB: 10 n log10(4 pi f_c d / c)."""
    if distance <= 0:
        raise ValidationError("distance must be > 0")
    return 10.0 * params.path_loss_exponent * math.log10(
        4.0 * math.pi * params.carrier_freq * distance / LIGHT_SPEED
    )


def los_probability(params: RadioParams, elevation_deg: float) -> float:
    """Line-of-sight probability 1 / (1 + a exp(-b (theta - a))), theta in degrees."""
    if not 0.0 < elevation_deg <= 90.0:
        raise ValidationError("elevation must be in (0, 90] degrees")
    a, b = params.sigmoid_a, params.sigmoid_b
    return 1.0 / (1.0 + a * math.exp(-b * (elevation_deg - a)))


def expected_excess_loss(params: RadioParams, p_los: float) -> float:
    """Mean excess loss in dB: mu_los * p + mu_nlos * (1 - p)."""
    if not 0.0 <= p_los <= 1.0:
        raise ValidationError("p_los must be in [0, 1]")
    return params.mu_los * p_los + params.mu_nlos * (1.0 - p_los)


def sample_excess_loss(params: RadioParams, p_los: float, rng: np.random.Generator) -> float:
    """Draw one excess-loss realization in dB.

    The link class is Bernoulli(p_los); the loss within a class is
    Gaussian with the class mean and sigma.  With the default sigmas of
    zero this reduces to drawing mu_los or mu_nlos.
    """
    if not 0.0 <= p_los <= 1.0:
        raise ValidationError("p_los must be in [0, 1]")
    if rng.random() < p_los:
        return params.mu_los + params.sigma_los * rng.standard_normal()
    return params.mu_nlos + params.sigma_nlos * rng.standard_normal()


def link_gain(params: RadioParams, uav: Point3, ground: Point3,
              rng: np.random.Generator | None = None) -> float:
    """End-to-end linear power gain of the uplink.

    Assembles antenna gain minus free-space loss minus excess loss in dB
    and returns the linear ratio, so that
    ``received = transmitted * link_gain``.  Pass ``rng`` to draw a
    sampled excess loss instead of the planning expectation.
    """
    dist, elev = distance_and_elevation(uav, ground)
    loss_db = free_space_path_loss(params, dist)
    p_los = los_probability(params, elev)
    if rng is None:
        excess_db = expected_excess_loss(params, p_los)
    else:
        excess_db = sample_excess_loss(params, p_los, rng)
    gain_db = linear_to_db(params.antenna_gain) - loss_db - excess_db
    return db_to_linear(gain_db)


def min_power_for_rate(params: RadioParams, rate: float, gain: float) -> float:
    """Transmit power (W) that meets ``rate`` bit/s over a link of linear ``gain``.

    Inverts the Shannon rate W log2(1 + P g / (n0 W)):
    P = (2^(rate / W) - 1) n0 W / g.
    """
    if gain <= 0:
        raise ValidationError("gain must be > 0")
    if rate < 0:
        raise ValidationError("rate must be >= 0")
    if rate == 0:
        return 0.0
    return exp2m1(rate / params.bandwidth) * params.noise_power / gain


def rate_for_power(params: RadioParams, power: float, gain: float) -> float:
    """Achievable rate (bit/s) for a transmit power over a link of linear gain."""
    if gain <= 0:
        raise ValidationError("gain must be > 0")
    if power < 0:
        raise ValidationError("power must be >= 0")
    return params.bandwidth * math.log2(1.0 + power * gain / params.noise_power)
