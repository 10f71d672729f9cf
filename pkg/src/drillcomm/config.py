"""Run configuration: a single JSON document covering both modems.

Keys mirror the simulation symbols (m, n, p, u, l, f_c, f_s, alpha,
one_over_n0_db) plus nested ``drillstring`` and ``ofdm`` sections; units are
embedded in key names where mm vs m or cm^2 vs m^2 would otherwise be
ambiguous.  Two presets ship with the package: ``paper`` is the full-scale
setup (long training run), ``desk`` keeps the same channel and frame geometry
but scales the training schedule to desk runtimes.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, asdict
from importlib import resources

from .ae import AEConfig
from .channel import DrillStringSpec, ChannelRealization, channel_realization
from .ofdm import OfdmConfig


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


@dataclass(frozen=True)
class DrillStringConfig:
    n_pipes: int = 10
    n_joints: int = 9
    d_p_mm: float = 8760.0
    d_j_mm: float = 240.0
    a_p_cm2: float = 52.276
    a_j_cm2: float = 248.186
    c: float = 5130.0
    rho: float = 7870.0

    def to_spec(self) -> DrillStringSpec:
        return DrillStringSpec.alternating(
            self.n_pipes, self.n_joints,
            self.d_p_mm * 1e-3, self.d_j_mm * 1e-3,
            self.a_p_cm2 * 1e-4, self.a_j_cm2 * 1e-4,
            self.c, self.rho)


@dataclass(frozen=True)
class OfdmSettings:
    nfft: int = 512
    cp: int = 64
    passbands: tuple[tuple[float, float], ...] = ((878.0, 1049.0), (1169.0, 1320.0))


@dataclass(frozen=True)
class SimConfig:
    """Everything a run needs; hashed into every output file."""

    m: int = 72
    n: int = 64
    p: int = 36
    u: int = 4
    l: int = 2048
    f_c: float = 848.0
    f_s: float = 2048.0
    alpha: float = 0.0
    one_over_n0_db: float = 3.0
    epochs: int = 256
    train_batches: int = 192
    test_batches: int = 64
    minibatch_packets: int = 128
    seed: int = 12345
    ebno_sweep: tuple[float, ...] = tuple(float(x) for x in range(0, 15))
    min_errors: int = 100
    max_bits: int = 4_000_000
    psd_segment_len: int = 512
    psd_overlap: float = 0.5
    papr_frames: int = 10_000
    papr_db_max: float = 15.0
    papr_db_step: float = 0.05
    drillstring: DrillStringConfig = field(default_factory=DrillStringConfig)
    ofdm: OfdmSettings = field(default_factory=OfdmSettings)

    # -- derived views -------------------------------------------------------

    def drill_spec(self) -> DrillStringSpec:
        return self.drillstring.to_spec()

    def channel(self) -> ChannelRealization:
        return channel_realization(self.drill_spec(), self.f_s, self.l, self.f_c)

    def ae_config(self) -> AEConfig:
        return AEConfig(
            bits_per_frame=self.m, frame_len=self.n, frames_per_packet=self.p,
            upsample=self.u, impulse_len=self.l, carrier_hz=self.f_c,
            sample_rate_hz=self.f_s, papr_weight=self.alpha,
            train_snr_db=self.one_over_n0_db, epochs=self.epochs,
            minibatch_packets=self.minibatch_packets,
            train_batches=self.train_batches, test_batches=self.test_batches,
            seed=self.seed)

    def ofdm_config(self) -> OfdmConfig:
        frame_len = self.ofdm.nfft + self.ofdm.cp
        frames = self.p * self.n // frame_len
        return OfdmConfig(
            nfft=self.ofdm.nfft, cp=self.ofdm.cp,
            passbands=self.ofdm.passbands, carrier_hz=self.f_c,
            sample_rate_hz=self.f_s, upsample=self.u,
            frames_per_packet=frames)

    # -- serialization ---------------------------------------------------------

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ebno_sweep"] = list(self.ebno_sweep)
        d["drillstring"] = asdict(self.drillstring)
        d["ofdm"] = {"nfft": self.ofdm.nfft, "cp": self.ofdm.cp,
                     "passbands": [list(b) for b in self.ofdm.passbands]}
        return d

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True,
                               separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()

    def validate(self) -> "SimConfig":
        def require(cond: bool, path: str, msg: str):
            if not cond:
                raise ConfigError(f"{path}: {msg}")

        require(self.m >= 1, "m", "must be >= 1")
        require(self.n >= 1, "n", "must be >= 1")
        require(self.p >= 1, "p", "must be >= 1")
        require(self.u >= 1, "u", "must be >= 1")
        require(self.l >= 1, "l", "must be >= 1")
        require(self.f_s > 0, "f_s", "must be > 0")
        require(self.f_c >= 0, "f_c", "must be >= 0")
        require(self.alpha >= 0, "alpha", "must be >= 0")
        k0 = self.f_c * self.u * self.n / self.f_s
        require(abs(k0 - round(k0)) < 1e-9, "f_c",
                f"carrier must land on an integer bin, f_c*u*n/f_s = {k0!r}")
        for name in ("epochs", "train_batches", "test_batches",
                     "minibatch_packets", "min_errors", "max_bits",
                     "papr_frames"):
            require(getattr(self, name) >= 1, name, "must be >= 1")
        require(self.psd_segment_len >= 8, "psd_segment_len", "must be >= 8")
        require(0.0 <= self.psd_overlap < 1.0, "psd_overlap", "must be in [0, 1)")
        require(len(self.ebno_sweep) >= 1, "ebno_sweep", "must be non-empty")

        ds = self.drillstring
        require(ds.n_pipes >= 1, "drillstring.n_pipes", "must be >= 1")
        require(ds.n_pipes == ds.n_joints + 1, "drillstring.n_joints",
                "alternating string needs n_pipes == n_joints + 1")
        for fname in ("d_p_mm", "d_j_mm", "a_p_cm2", "a_j_cm2", "c", "rho"):
            require(getattr(ds, fname) > 0, f"drillstring.{fname}", "must be > 0")

        of = self.ofdm
        require(of.nfft >= 1, "ofdm.nfft", "must be >= 1")
        require(0 <= of.cp < of.nfft, "ofdm.cp", "must be in [0, nfft)")
        frame_len = of.nfft + of.cp
        require(self.p * self.n % frame_len == 0, "ofdm.nfft",
                f"packet length {self.p * self.n} baseband samples must divide "
                f"into OFDM frames of {frame_len}")
        for i, band in enumerate(of.passbands):
            require(len(band) == 2, f"ofdm.passbands[{i}]", "must be (low, high)")
            low, high = band
            require(low <= high, f"ofdm.passbands[{i}]", "low must be <= high")
            require(low >= self.f_c and high < self.f_c + self.f_s / self.u,
                    f"ofdm.passbands[{i}]",
                    "must lie inside the occupied band")
        # raises on inconsistent derived configs
        self.ae_config()
        self.ofdm_config()
        return self


def _coerce_section(d: dict, path: str, cls, tuple_fields=()):
    unknown = set(d) - {f for f in cls.__dataclass_fields__}
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    kwargs = dict(d)
    for name in tuple_fields:
        if name in kwargs:
            kwargs[name] = tuple(tuple(b) if isinstance(b, list) else b
                                 for b in kwargs[name])
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def config_from_dict(d: dict) -> SimConfig:
    if not isinstance(d, dict):
        raise ConfigError("config: top level must be a JSON object")
    top = dict(d)
    ds = top.pop("drillstring", {})
    of = top.pop("ofdm", {})
    if not isinstance(ds, dict):
        raise ConfigError("drillstring: must be an object")
    if not isinstance(of, dict):
        raise ConfigError("ofdm: must be an object")
    known = {f for f in SimConfig.__dataclass_fields__} - {"drillstring", "ofdm"}
    unknown = set(top) - known
    if unknown:
        raise ConfigError(f"config: unknown keys {sorted(unknown)}")
    if "ebno_sweep" in top:
        top["ebno_sweep"] = tuple(float(x) for x in top["ebno_sweep"])
    try:
        cfg = SimConfig(
            drillstring=_coerce_section(ds, "drillstring", DrillStringConfig),
            ofdm=_coerce_section(of, "ofdm", OfdmSettings,
                                 tuple_fields=("passbands",)),
            **top)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config: {exc}") from exc
    return cfg.validate()


def load_config(source: str) -> SimConfig:
    """Load a config from a JSON file path or a bundled preset name."""
    if source in ("paper", "desk"):
        text = resources.files("drillcomm.configs").joinpath(
            f"{source}.json").read_text()
    else:
        try:
            with open(source) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"config: cannot read {source!r}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON in {source!r}: {exc}") from exc
    return config_from_dict(data)
