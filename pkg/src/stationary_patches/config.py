"""Run configuration shared by the command line and the verification suite."""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

from .errors import PreconditionError

OUTPUT_ENV = "STATIONARY_PATCHES_OUT"

DEFAULT_ALPHAS = (0.25, 0.5, 1.0, 1.5, 1.75)


@dataclass(frozen=True)
class RunConfig:
    """Parameters of one batch run.

    alpha: kernel exponent for bifpoints/spectrum/branch.
    m_list: symmetry classes to process.
    J: Fourier truncation of each boundary perturbation.
    quad_depth: maximum number of node doublings when a quadrature is adapted.
    newton_tol, quad_tol: Newton residual target and quadrature agreement target.
    output_dir: where JSON and CSV files are written.
    seed: seed for randomised property draws.
    alphas: test matrix of exponents used by ``verify``.
    """

    alpha: float = 1.0
    m_list: Tuple[int, ...] = (2, 3, 4, 5, 6, 7, 8)
    J: int = 32
    quad_depth: int = 8
    newton_tol: float = 1e-10
    quad_tol: float = 1e-12
    output_dir: str = "results"
    seed: int = 0
    alphas: Tuple[float, ...] = DEFAULT_ALPHAS

    def __post_init__(self) -> None:
        object.__setattr__(self, "m_list", tuple(int(m) for m in self.m_list))
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        if not (0.0 < self.alpha < 2.0):
            raise PreconditionError(f"alpha must lie in (0, 2), got {self.alpha}")
        if any(not (0.0 < a < 2.0) for a in self.alphas):
            raise PreconditionError("every entry of alphas must lie in (0, 2)")
        if any(m < 2 for m in self.m_list):
            raise PreconditionError("m entries must be >= 2")
        if self.J < 8:
            raise PreconditionError(f"truncation J={self.J} fails the tail gate: J must be >= 8")
        if self.quad_depth < 1:
            raise PreconditionError("quad_depth must be >= 1")
        if self.newton_tol <= 0 or self.quad_tol <= 0:
            raise PreconditionError("tolerances must be positive")

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise PreconditionError(f"unknown config keys: {sorted(unknown)}")
        return cls(**dict(data))

    @classmethod
    def load(cls, path: Optional[str], overrides: Optional[Mapping[str, Any]] = None) -> "RunConfig":
        data: Dict[str, Any] = {}
        if path:
            with open(path, "r", encoding="utf-8") as fh:
                data = json.load(fh)
            if not isinstance(data, dict):
                raise PreconditionError("config file must hold a flat JSON object")
        env_out = os.environ.get(OUTPUT_ENV)
        if env_out:
            data["output_dir"] = env_out
        for k, v in (overrides or {}).items():
            if v is not None:
                data[k] = v
        return cls.from_mapping(data)

    def to_dict(self) -> Dict[str, Any]:
        d = asdict(self)
        d["m_list"] = list(self.m_list)
        d["alphas"] = list(self.alphas)
        return d

    def digest(self) -> str:
        """Short hash of the numerical content of the config (output_dir excluded)."""
        d = self.to_dict()
        d.pop("output_dir")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    @property
    def out_path(self) -> Path:
        return Path(self.output_dir)
