"""Experiment configuration: flat key = value sections, deterministic ids.

Configs are INI text with a fixed section layout; numeric values may use
``pi`` expressions like ``pi/3`` or ``1.3*pi/3``. Parsing and serialization
round-trip exactly, and the run id is a hash of the canonical serialization
so identical configs land in identical output directories on any machine.
"""

from __future__ import annotations

import configparser
import hashlib
import io
import math
import re
from dataclasses import dataclass, field

KINDS = (
    "wigner-snapshot",
    "moments",
    "deviation",
    "grid-error-sweep",
    "convexity",
    "kitten",
    "cat-decay",
)

BACKENDS = ("pde", "fock", "analytic", "twa")

_NUM_RE = re.compile(r"^[0-9pi\s()+\-*/.eE]+$")


def parse_number(text: str) -> float:
    """Parse a float, allowing ``pi`` arithmetic like ``2*pi/5``."""
    text = text.strip()
    if not _NUM_RE.match(text):
        raise ValueError(f"not a numeric expression: {text!r}")
    try:
        return float(eval(text, {"__builtins__": {}}, {"pi": math.pi}))  # noqa: S307
    except Exception as exc:
        raise ValueError(f"cannot parse number {text!r}: {exc}") from None


def parse_number_list(text: str) -> tuple[float, ...]:
    return tuple(parse_number(tok) for tok in text.split(",") if tok.strip())


def parse_int_list(text: str) -> tuple[int, ...]:
    return tuple(int(tok) for tok in text.split(",") if tok.strip())


@dataclass
class ExperimentConfig:
    """Validated description of one experiment run."""

    kind: str
    alpha0: float
    kappa: float = 1.0
    gamma: float = 0.0
    backend: str = "pde"
    output_dir: str = "runs"
    # solver
    abs_tol: float = 1e-9
    rel_tol: float = 1e-6
    max_step: float | None = None
    k_max: int | None = None
    dr: float | None = None
    # sampling (times are kappa*t)
    t_min: float = 0.0
    t_max: float = 0.0
    n_samples: int = 200
    n_theta: int = 20
    orders: tuple[int, ...] = (6,)
    # kind-specific
    snapshot_times: tuple[float, ...] = ()
    phi_step: float = math.pi / 200
    gammas: tuple[float, ...] = ()
    delta_r: tuple[float, ...] = ()
    t_eval: float = math.pi
    M: int = 1
    N: int = 2
    n_trunc: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}; expected one of {KINDS}")
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.alpha0 < 0 or self.kappa < 0 or self.gamma < 0:
            raise ValueError("alpha0, kappa, gamma must be nonnegative")
        if self.kind in ("moments", "deviation", "grid-error-sweep") and self.t_max <= self.t_min:
            raise ValueError("t_max must exceed t_min")
        if self.kind == "kitten" and math.gcd(self.M, self.N) != 1:
            raise ValueError(f"(M, N) = ({self.M}, {self.N}) must be coprime")
        if self.kind == "wigner-snapshot" and not self.snapshot_times:
            raise ValueError("wigner-snapshot needs snapshot_times")
        if self.kind in ("grid-error-sweep", "convexity") and not self.gammas:
            raise ValueError(f"{self.kind} needs a gammas list")
        if self.kind == "grid-error-sweep" and not self.delta_r:
            raise ValueError("grid-error-sweep needs a delta_r list")

    # -- serialization ------------------------------------------------------

    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        cp["experiment"] = {
            "kind": self.kind,
            "backend": self.backend,
            "output_dir": self.output_dir,
        }
        cp["model"] = {
            "alpha0": repr(self.alpha0),
            "kappa": repr(self.kappa),
            "gamma": repr(self.gamma),
        }
        solver = {"abs_tol": repr(self.abs_tol), "rel_tol": repr(self.rel_tol)}
        if self.max_step is not None:
            solver["max_step"] = repr(self.max_step)
        if self.k_max is not None:
            solver["k_max"] = str(self.k_max)
        if self.dr is not None:
            solver["dr"] = repr(self.dr)
        if self.n_trunc is not None:
            solver["n_trunc"] = str(self.n_trunc)
        cp["solver"] = solver
        cp["sampling"] = {
            "t_min": repr(self.t_min),
            "t_max": repr(self.t_max),
            "n_samples": str(self.n_samples),
            "n_theta": str(self.n_theta),
            "orders": ",".join(map(str, self.orders)),
        }
        extra = {}
        if self.kind == "wigner-snapshot":
            extra["times"] = ",".join(repr(t) for t in self.snapshot_times)
            extra["phi_step"] = repr(self.phi_step)
        if self.kind in ("grid-error-sweep", "convexity"):
            extra["gammas"] = ",".join(repr(g) for g in self.gammas)
        if self.kind == "grid-error-sweep":
            extra["delta_r"] = ",".join(repr(d) for d in self.delta_r)
        if self.kind == "convexity":
            extra["t_eval"] = repr(self.t_eval)
        if self.kind == "kitten":
            extra["m"] = str(self.M)
            extra["n"] = str(self.N)
        if extra:
            cp["detail"] = extra
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text: str) -> "ExperimentConfig":
        cp = configparser.ConfigParser()
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ValueError(f"config parse error: {exc}") from None
        if "experiment" not in cp or "kind" not in cp["experiment"]:
            raise ValueError("config needs [experiment] kind = ...")
        exp = cp["experiment"]
        model = cp["model"] if "model" in cp else {}
        solver = cp["solver"] if "solver" in cp else {}
        sampling = cp["sampling"] if "sampling" in cp else {}
        detail = cp["detail"] if "detail" in cp else {}
        kwargs = dict(
            kind=exp["kind"].strip(),
            backend=exp.get("backend", "pde").strip(),
            output_dir=exp.get("output_dir", "runs").strip(),
            alpha0=parse_number(model.get("alpha0", "0")),
            kappa=parse_number(model.get("kappa", "1")),
            gamma=parse_number(model.get("gamma", "0")),
            abs_tol=parse_number(solver.get("abs_tol", "1e-9")),
            rel_tol=parse_number(solver.get("rel_tol", "1e-6")),
            t_min=parse_number(sampling.get("t_min", "0")),
            t_max=parse_number(sampling.get("t_max", "0")),
            n_samples=int(sampling.get("n_samples", "200")),
            n_theta=int(sampling.get("n_theta", "20")),
            orders=parse_int_list(sampling.get("orders", "6")),
        )
        if solver.get("max_step"):
            kwargs["max_step"] = parse_number(solver["max_step"])
        if solver.get("k_max"):
            kwargs["k_max"] = int(solver["k_max"])
        if solver.get("dr"):
            kwargs["dr"] = parse_number(solver["dr"])
        if solver.get("n_trunc"):
            kwargs["n_trunc"] = int(solver["n_trunc"])
        if detail.get("times"):
            kwargs["snapshot_times"] = parse_number_list(detail["times"])
        if detail.get("phi_step"):
            kwargs["phi_step"] = parse_number(detail["phi_step"])
        if detail.get("gammas"):
            kwargs["gammas"] = parse_number_list(detail["gammas"])
        if detail.get("delta_r"):
            kwargs["delta_r"] = parse_number_list(detail["delta_r"])
        if detail.get("t_eval"):
            kwargs["t_eval"] = parse_number(detail["t_eval"])
        if detail.get("m"):
            kwargs["M"] = int(detail["m"])
        if detail.get("n"):
            kwargs["N"] = int(detail["n"])
        return cls(**kwargs)

    @classmethod
    def from_dict(cls, payload: dict) -> "ExperimentConfig":
        """Build from a plain mapping (list values become tuples)."""
        kwargs = {}
        for key, val in payload.items():
            if key not in cls.__dataclass_fields__:
                raise ValueError(f"unknown config field {key!r}")
            kwargs[key] = tuple(val) if isinstance(val, list) else val
        return cls(**kwargs)

    def run_id(self) -> str:
        """Stable hash of the canonical serialization (machine independent)."""
        canon = self.to_ini().encode()
        return hashlib.sha256(canon).hexdigest()[:16]

    def to_dict(self) -> dict:
        out = {}
        for key, val in self.__dict__.items():
            out[key] = list(val) if isinstance(val, tuple) else val
        return out
