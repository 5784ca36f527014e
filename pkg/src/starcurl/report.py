"""Residual reports attached to solver runs."""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np


@dataclass
class SolveReport:
    name: str
    residuals: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    wall_time: float = 0.0
    _t0: float = field(default_factory=time.perf_counter, repr=False)

    def check(self, key: str, value: float, tol: float) -> bool:
        self.residuals[key] = float(value)
        self.tolerances[key] = float(tol)
        return value <= tol

    def record(self, key: str, value) -> None:
        self.info[key] = value

    @property
    def flags(self) -> dict:
        return {k: self.residuals[k] <= self.tolerances[k] for k in self.tolerances}

    @property
    def passed(self) -> bool:
        return all(self.flags.values())

    def stop(self) -> "SolveReport":
        self.wall_time = time.perf_counter() - self._t0
        return self

    def lines(self) -> list[str]:
        out = [f"[{self.name}] {'PASS' if self.passed else 'FAIL'} ({self.wall_time:.2f} s)"]
        for k, ok in self.flags.items():
            out.append(f"  {'ok  ' if ok else 'FAIL'} {k} = {self.residuals[k]:.3e} (tol {self.tolerances[k]:.1e})")
        for k, v in self.info.items():
            out.append(f"  info {k} = {v}")
        return out

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "residuals": self.residuals,
            "tolerances": self.tolerances,
            "flags": self.flags,
            "info": {k: _plain(v) for k, v in self.info.items()},
            "config": self.config,
            "wall_time": self.wall_time,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _plain(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, np.generic):
        return v.item()
    return v
