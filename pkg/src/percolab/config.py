"""Run configuration: percolation thresholds, resource guards, estimator defaults.

Values come from the packaged ``defaults.ini``, then from the file named by
``PERCOLAB_CONFIG`` (or an explicit path), later files overriding earlier ones.
"""
from __future__ import annotations

import configparser
import os
from dataclasses import asdict, dataclass, field
from importlib import resources

THREADS_ENV = "PERCOLAB_THREADS"
CONFIG_ENV = "PERCOLAB_CONFIG"


@dataclass(frozen=True)
class Settings:
    thresholds: dict = field(default_factory=dict)
    dense_site_limit: int = 10**8
    enumeration_guard: int = 28
    confidence: float = 0.95
    sweep_trials: int = 10_000
    chunk_size: int = 4096
    origin_policy: str = "include"
    default_threads: int = 1

    def threshold(self, d: int) -> float:
        try:
            return self.thresholds[d]
        except KeyError:
            raise ValueError(f"no percolation threshold configured for d={d}") from None

    def snapshot(self) -> dict:
        out = asdict(self)
        out["thresholds"] = {str(k): v for k, v in self.thresholds.items()}
        return out


def load(path: str | os.PathLike | None = None) -> Settings:
    parser = configparser.ConfigParser()
    parser.read_string(resources.files(__package__).joinpath("defaults.ini").read_text())
    extra = path if path is not None else os.environ.get(CONFIG_ENV)
    if extra:
        with open(extra, encoding="utf-8") as fh:
            parser.read_file(fh)
    thresholds = {int(k[1:]): float(v) for k, v in parser["thresholds"].items()
                  if k.startswith("d") and k[1:].isdigit()}
    lim, est = parser["limits"], parser["estimate"]
    return Settings(
        thresholds=thresholds,
        dense_site_limit=lim.getint("dense_site_limit"),
        enumeration_guard=lim.getint("enumeration_guard"),
        confidence=est.getfloat("confidence"),
        sweep_trials=est.getint("sweep_trials"),
        chunk_size=est.getint("chunk_size"),
        origin_policy=est.get("origin_policy"),
        default_threads=parser["parallel"].getint("default_threads"),
    )


def threads(settings: Settings | None = None) -> int:
    """Worker threads: ``PERCOLAB_THREADS`` if set, else the configured default."""
    raw = os.environ.get(THREADS_ENV)
    if raw:
        n = int(raw)
        if n < 1:
            raise ValueError(f"{THREADS_ENV} must be >= 1")
        return n
    return (settings or load()).default_threads
