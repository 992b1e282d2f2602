__all__ = [
    "PathLoss",
    "ErrorScale",
    "ScenarioConfig",
    "ChannelSet",
    "RealizedChannels",
    "load_covariance",
    "sample_channels",
    "sample_errors",
]

import dataclasses
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, List, Optional, Sequence, Tuple

import numpy as np
from fastcore.all import ifnone, listify
from omegaconf import DictConfig, ListConfig, OmegaConf

from .config import ConfigError, Configurable, parse_power
from .linalg import check_psd, sqrtm_psd

_logger = logging.getLogger(__name__)

# stream ids of the receivers, so that adding a receiver never changes the others
_IR, _ER, _EVE = 0, 1, 2


def _broadcast(value: Any, n: int, name: str, cast=float) -> Tuple:
    "Broadcasts a scalar config entry to a per-receiver tuple of length `n`, lists must have length `n`"
    values = listify(value)
    if not values:
        return ()
    if len(values) == 1 and not isinstance(value, (list, tuple, ListConfig)):
        values = values * n
    if len(values) != n:
        raise ConfigError(f"{name}: expected {n} entries, got {len(values)}")
    return tuple(cast(v) for v in values)


@dataclass(frozen=True)
class PathLoss:
    """
    Large-scale gain `lc * d**(-exponent)` absorbed into the channel entries.
    Receiver distances default to `distance`.
    """

    lc: float = 1.0
    exponent: float = 0.0
    distance: float = 10.0
    ir_distance: Optional[float] = None
    er_distances: Tuple[float, ...] = ()
    eve_distances: Tuple[float, ...] = ()

    def __post_init__(self):
        if not self.lc > 0:
            raise ConfigError(f"pathloss.lc must be > 0, got {self.lc}")
        for d in (self.distance, ifnone(self.ir_distance, 1.0)) + self.er_distances + self.eve_distances:
            if not d > 0:
                raise ConfigError(f"pathloss distances must be > 0, got {d}")

    def gain(self, d: float) -> float:
        return self.lc * d ** (-self.exponent)

    def ir_gain(self) -> float:
        return self.gain(ifnone(self.ir_distance, self.distance))

    def er_gain(self, k: int) -> float:
        return self.gain(self.er_distances[k] if self.er_distances else self.distance)

    def eve_gain(self, i: int) -> float:
        return self.gain(self.eve_distances[i] if self.eve_distances else self.distance)


@dataclass(frozen=True)
class ErrorScale:
    """
    Covariances of the Gaussian channel errors: `eps_sq * I` by default,
    optionally per side (`er_eps_sq`, `eve_eps_sq`) or loaded from files.
    """

    eps_sq: float = 0.0
    er_eps_sq: Optional[float] = None
    eve_eps_sq: Optional[float] = None
    er_files: Tuple[str, ...] = ()
    eve_files: Tuple[str, ...] = ()

    def __post_init__(self):
        for v in (self.eps_sq, ifnone(self.er_eps_sq, 0.0), ifnone(self.eve_eps_sq, 0.0)):
            if v < 0:
                raise ConfigError(f"error_scale entries must be >= 0, got {v}")


@dataclass(frozen=True)
class ScenarioConfig(Configurable):
    """
    All physical and statistical parameters of one problem instance. Values
    are linear; `from_config_dict` accepts the dB / dBm unit strings of the
    yaml presets and broadcasts scalars to the per-receiver lists.
    """

    n_tx: int
    n_er: int = 0
    n_eve: int = 0
    eve_antennas: Tuple[int, ...] = ()
    sigma_d_sq: float = 1.0
    sigma_e_sq: float = 1.0
    p_secrecy: float = 0.1
    q_eh: float = 0.1
    rate_target: float = 1.0
    eh_targets: Tuple[float, ...] = ()
    eh_efficiency: Tuple[float, ...] = ()
    power_budget: float = 1.0
    pathloss: PathLoss = field(default_factory=PathLoss)
    error_scale: ErrorScale = field(default_factory=ErrorScale)
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_tx < 1:
            raise ConfigError(f"n_tx must be >= 1, got {self.n_tx}")
        if self.n_er < 0 or self.n_eve < 0:
            raise ConfigError("n_er and n_eve must be >= 0")
        if len(self.eve_antennas) != self.n_eve or any(n < 1 for n in self.eve_antennas):
            raise ConfigError(f"eve_antennas must hold {self.n_eve} positive integers, got {self.eve_antennas}")
        if len(self.eh_targets) != self.n_er or any(e < 0 for e in self.eh_targets):
            raise ConfigError(f"eh_targets must hold {self.n_er} nonnegative values, got {self.eh_targets}")
        if len(self.eh_efficiency) != self.n_er or any(not 0 < x <= 1 for x in self.eh_efficiency):
            raise ConfigError(f"eh_efficiency must hold {self.n_er} values in (0, 1], got {self.eh_efficiency}")
        for name in ("p_secrecy", "q_eh"):
            if not 0 < getattr(self, name) <= 1:
                raise ConfigError(f"{name} must be in (0, 1], got {getattr(self, name)}")
        if not (self.sigma_d_sq > 0 and self.sigma_e_sq > 0):
            raise ConfigError("noise powers must be > 0")
        if self.rate_target < 0:
            raise ConfigError(f"rate_target must be >= 0, got {self.rate_target}")
        if not self.power_budget > 0:
            raise ConfigError(f"power_budget must be > 0, got {self.power_budget}")
        if self.pathloss.er_distances and len(self.pathloss.er_distances) != self.n_er:
            raise ConfigError("pathloss.er_distances must match n_er")
        if self.pathloss.eve_distances and len(self.pathloss.eve_distances) != self.n_eve:
            raise ConfigError("pathloss.eve_distances must match n_eve")
        err = self.error_scale
        for files, n, side in ((err.er_files, self.n_er, "er"), (err.eve_files, self.n_eve, "eve")):
            if files and len(files) != n:
                raise ConfigError(f"error_scale.{side}_files must hold one file per receiver")

    @classmethod
    def from_config_dict(cls, config, **kwargs) -> "ScenarioConfig":
        if isinstance(config, DictConfig):
            config = OmegaConf.to_container(config, resolve=True)
        cfg = dict(config)
        cfg.update(kwargs)
        unknown = set(cfg) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")
        if "n_tx" not in cfg:
            raise ConfigError("scenario.n_tx is required")

        n_er, n_eve = int(cfg.get("n_er", 0)), int(cfg.get("n_eve", 0))
        pl = dict(ifnone(cfg.get("pathloss"), {}))
        err = dict(ifnone(cfg.get("error_scale"), {}))
        try:
            pathloss = PathLoss(
                lc=float(pl.get("lc", 1.0)),
                exponent=float(pl.get("exponent", 0.0)),
                distance=float(pl.get("distance", 10.0)),
                ir_distance=None if pl.get("ir_distance") is None else float(pl["ir_distance"]),
                er_distances=_broadcast(pl.get("er_distances"), n_er, "pathloss.er_distances"),
                eve_distances=_broadcast(pl.get("eve_distances"), n_eve, "pathloss.eve_distances"),
            )
            opt_power = lambda key: None if err.get(key) is None else parse_power(err[key], key)
            error_scale = ErrorScale(
                eps_sq=parse_power(err.get("eps_sq", 0.0), "error_scale.eps_sq"),
                er_eps_sq=opt_power("er_eps_sq"),
                eve_eps_sq=opt_power("eve_eps_sq"),
                er_files=tuple(listify(err.get("er_files"))),
                eve_files=tuple(listify(err.get("eve_files"))),
            )
        except TypeError as e:
            raise ConfigError(f"malformed scenario sub-section: {e}") from e

        power = lambda key, default: parse_power(cfg.get(key, default), f"scenario.{key}")
        return cls(
            n_tx=int(cfg["n_tx"]),
            n_er=n_er,
            n_eve=n_eve,
            eve_antennas=_broadcast(cfg.get("eve_antennas", 1), n_eve, "eve_antennas", int),
            sigma_d_sq=power("sigma_d_sq", 1.0),
            sigma_e_sq=power("sigma_e_sq", 1.0),
            p_secrecy=float(cfg.get("p_secrecy", 0.1)),
            q_eh=float(cfg.get("q_eh", 0.1)),
            rate_target=float(cfg.get("rate_target", 1.0)),
            eh_targets=_broadcast(
                cfg.get("eh_targets", 0.0), n_er, "eh_targets", lambda v: parse_power(v, "scenario.eh_targets")
            ),
            eh_efficiency=_broadcast(cfg.get("eh_efficiency", 1.0), n_er, "eh_efficiency"),
            power_budget=power("power_budget", 1.0),
            pathloss=pathloss,
            error_scale=error_scale,
            rng_seed=int(cfg.get("rng_seed", 0)),
        )

    def to_config_dict(self) -> DictConfig:
        "Linear-unit config node, the form stored in run manifests"
        return OmegaConf.create(_to_builtin(dataclasses.asdict(self)))

    def with_updates(self, **changes) -> "ScenarioConfig":
        """
        Copy with `changes` applied through `from_config_dict`, so that unit
        strings are parsed. Nested keys use dots, e.g. `**{"error_scale.eps_sq": 1e-3}`.
        When `n_er` or `n_eve` changes, per-receiver lists holding a single
        repeated value follow the new count, other lists must be updated too.
        """
        cfg = OmegaConf.to_container(self.to_config_dict())
        for count, keys in _PER_RECEIVER.items():
            if count not in changes:
                continue
            for key in keys:
                parent, leaf = _node(cfg, key)
                if key in changes or parent is None:
                    continue
                values = parent.get(leaf)
                if isinstance(values, (list, tuple)) and values and all(v == values[0] for v in values):
                    parent[leaf] = values[0]
        for key, value in changes.items():
            parent, leaf = _node(cfg, key)
            parent[leaf] = value
        return type(self).from_config_dict(cfg)


# per-receiver entries, keyed by the count they follow
_PER_RECEIVER = {
    "n_er": ("eh_targets", "eh_efficiency", "pathloss.er_distances"),
    "n_eve": ("eve_antennas", "pathloss.eve_distances"),
}


def _node(cfg: dict, key: str):
    "Parent dict and leaf name of a dotted `key`, the parent is `None` when a parent is unset"
    *parents, leaf = key.split(".")
    node = cfg
    for p in parents:
        node = node.get(p)
        if node is None:
            return None, leaf
    return node, leaf


def _to_builtin(obj):
    if isinstance(obj, dict):
        return {k: _to_builtin(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_builtin(v) for v in obj]
    return obj


@dataclass
class ChannelSet:
    """
    Estimated channels and error covariances of one instance.

    Arguments:
    1. `h`: IR channel, shape `(N_T,)`, known perfectly.
    2. `g_hat`: estimated ER channels, shape `(K, N_T)`.
    3. `H_hat`: estimated Eve channels, `N_T x N_e,i` each.
    4. `R_g`: ER error covariances, shape `(K, N_T, N_T)`.
    5. `R_H`: Eve error covariances over `vec(Delta)` (column stacking), `N_T N_e,i` square each.
    """

    h: np.ndarray
    g_hat: np.ndarray
    H_hat: List[np.ndarray]
    R_g: np.ndarray
    R_H: List[np.ndarray]

    def __post_init__(self):
        self.h = np.asarray(self.h, dtype=complex)
        n = self.h.shape[0]
        self.g_hat = np.asarray(self.g_hat, dtype=complex).reshape(-1, n)
        self.R_g = np.asarray(self.R_g, dtype=complex).reshape(-1, n, n)
        self.H_hat = [np.asarray(H, dtype=complex).reshape(n, -1) for H in self.H_hat]
        self.R_H = [np.asarray(R, dtype=complex) for R in self.R_H]
        if self.R_g.shape[0] != self.g_hat.shape[0]:
            raise ValueError("one ER covariance per ER channel is required")
        if len(self.R_H) != len(self.H_hat):
            raise ValueError("one Eve covariance per Eve channel is required")
        for k, R in enumerate(self.R_g):
            check_psd(R, tol=1e-10, name=f"R_g[{k}]")
        for i, (H, R) in enumerate(zip(self.H_hat, self.R_H)):
            if R.shape != (H.size, H.size):
                raise ValueError(f"R_H[{i}] must be {H.size} x {H.size}, got {R.shape}")
            check_psd(R, tol=1e-10, name=f"R_H[{i}]")

    @property
    def n_tx(self) -> int:
        return self.h.shape[0]

    @property
    def n_er(self) -> int:
        return self.g_hat.shape[0]

    @property
    def n_eve(self) -> int:
        return len(self.H_hat)

    @cached_property
    def sqrt_R_g(self) -> np.ndarray:
        return np.array([sqrtm_psd(R) for R in self.R_g]).reshape(self.R_g.shape)

    @cached_property
    def sqrt_R_H(self) -> List[np.ndarray]:
        return [sqrtm_psd(R) for R in self.R_H]

    def with_zero_errors(self) -> "ChannelSet":
        "Same estimates, all covariances zero"
        return ChannelSet(
            self.h, self.g_hat, self.H_hat, np.zeros_like(self.R_g), [np.zeros_like(R) for R in self.R_H]
        )

    def scale_errors(self, factor: float) -> "ChannelSet":
        return ChannelSet(self.h, self.g_hat, self.H_hat, factor * self.R_g, [factor * R for R in self.R_H])

    def subset(self, n_er: Optional[int] = None, n_eve: Optional[int] = None) -> "ChannelSet":
        "The first `n_er` ERs and `n_eve` Eves"
        K, L = ifnone(n_er, self.n_er), ifnone(n_eve, self.n_eve)
        return ChannelSet(self.h, self.g_hat[:K], self.H_hat[:L], self.R_g[:K], self.R_H[:L])


@dataclass
class RealizedChannels:
    "Actual channels: `g` has shape `(..., K, N_T)`, `H[i]` has shape `(..., N_T, N_e,i)`"
    g: np.ndarray
    H: List[np.ndarray]


def load_covariance(path, name: Optional[str] = None) -> np.ndarray:
    """
    Reads a dense complex matrix written row by row as `re im` pairs
    (a side-`n` matrix has `n` lines of `2n` numbers) and checks it is PSD.
    """
    data = np.atleast_2d(np.loadtxt(path, dtype=float, ndmin=2))
    n = data.shape[0]
    if data.shape[1] != 2 * n:
        raise ConfigError(f"{path}: expected {n} rows of {2 * n} numbers, got shape {data.shape}")
    R = data[:, 0::2] + 1j * data[:, 1::2]
    try:
        return check_psd(R, tol=1e-10, name=ifnone(name, str(path)))
    except ValueError as e:
        raise ConfigError(str(e)) from e


def _cn(rng: np.random.Generator, shape, variance: float) -> np.ndarray:
    "Circularly-symmetric complex Gaussian entries with the given variance"
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def _covariance(eps_sq: float, files: Sequence[str], idx: int, side: int) -> np.ndarray:
    if files:
        R = load_covariance(files[idx])
        if R.shape != (side, side):
            raise ConfigError(f"{files[idx]}: expected a {side} x {side} covariance, got {R.shape}")
        return R
    return eps_sq * np.eye(side, dtype=complex)


def sample_channels(cfg: ScenarioConfig, rng: np.random.Generator) -> ChannelSet:
    """
    Draws the estimated channels of one instance. Entries are i.i.d.
    `CN(0, gain / N_T)` with the receiver's path-loss gain.

    Every receiver uses its own stream derived from one draw of `rng`, so
    the first `L` Eves (and all ERs) do not depend on how many Eves exist.
    """
    base = int(rng.integers(0, 2 ** 63 - 1))
    stream = lambda role, idx: np.random.default_rng([base, role, idx])
    n = cfg.n_tx
    pl, err = cfg.pathloss, cfg.error_scale

    h = _cn(stream(_IR, 0), n, pl.ir_gain() / n)
    g_hat = np.array([_cn(stream(_ER, k), n, pl.er_gain(k) / n) for k in range(cfg.n_er)]).reshape(cfg.n_er, n)
    H_hat = [
        _cn(stream(_EVE, i), (n, ne), pl.eve_gain(i) / n) for i, ne in enumerate(cfg.eve_antennas)
    ]
    er_eps = ifnone(err.er_eps_sq, err.eps_sq)
    eve_eps = ifnone(err.eve_eps_sq, err.eps_sq)
    R_g = np.array([_covariance(er_eps, err.er_files, k, n) for k in range(cfg.n_er)]).reshape(cfg.n_er, n, n)
    R_H = [_covariance(eve_eps, err.eve_files, i, n * ne) for i, ne in enumerate(cfg.eve_antennas)]
    return ChannelSet(h, g_hat, H_hat, R_g, R_H)


def sample_errors(cs: ChannelSet, rng: np.random.Generator, trials: Optional[int] = None) -> RealizedChannels:
    """
    Realizes the actual channels `g_k = g_hat_k + R_g^{1/2} u` and
    `H_i = H_hat_i + unvec(R_H^{1/2} v)` with standard complex Gaussian
    `u`, `v`. With `trials` a leading batch axis of that length is added.
    """
    batch = () if trials is None else (int(trials),)
    n = cs.n_tx
    u = _cn(rng, batch + (cs.n_er, n), 1.0)
    g = cs.g_hat + np.einsum("kab,...kb->...ka", cs.sqrt_R_g, u)
    H = []
    for H_hat, root in zip(cs.H_hat, cs.sqrt_R_H):
        v = _cn(rng, batch + (H_hat.size,), 1.0)
        delta = v @ root.T
        # vec() stacks columns, so unvec is a Fortran-order reshape
        delta = np.swapaxes(delta.reshape(batch + (H_hat.shape[1], n)), -1, -2)
        H.append(H_hat + delta)
    return RealizedChannels(g, H)
