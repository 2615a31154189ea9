"""Scenario configuration (JSON document validated with pydantic)."""

from __future__ import annotations

import json
from pathlib import Path
from typing import List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from . import presets

OUTPUT_KINDS = ("means", "variances", "purity", "coherence", "attenuation", "diagonal", "lindblad", "qsweep", "verify")

_FIG1 = presets.fig1_physical()
_PACKET = presets.fig1_packet()
_CAT = presets.fig4_cat()


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class PhysicalModel(_Model):
    M: float = Field(_FIG1.M, gt=0)
    m: float = Field(_FIG1.m, gt=0)
    gamma: float = Field(_FIG1.gamma, ge=0)
    T: float = Field(_FIG1.T, ge=0)
    R: float = Field(_FIG1.R, ge=0)
    var_sigma_x: float = Field(_FIG1.var_sigma_x, gt=0)
    var_sigma_p: float = Field(_FIG1.var_sigma_p, gt=0)
    hbar: float = Field(_FIG1.hbar, gt=0)
    kB: float = Field(_FIG1.kB, gt=0)


class DiffusionModel(_Model):
    mode: Literal["measurement", "caldeira-leggett", "explicit", "q"] = "measurement"
    D_pp: Optional[float] = Field(None, ge=0)
    D_xx: Optional[float] = Field(None, ge=0)
    q: Optional[float] = Field(None, gt=0)

    @model_validator(mode="after")
    def _needs(self):
        if self.mode == "explicit" and (self.D_pp is None or self.D_xx is None):
            raise ValueError("explicit diffusion needs D_pp and D_xx")
        if self.mode == "q" and (self.q is None or not self.D_xx):
            raise ValueError("q diffusion needs q and D_xx > 0")
        return self


class InitialModel(_Model):
    kind: Literal["gaussian", "cat"] = "gaussian"
    x0: float = _PACKET.x0
    p0: float = _PACKET.p0
    dx0: float = Field(_PACKET.dx0, gt=0)
    l: float = Field(_CAT.l, ge=0)
    sigma: float = Field(_CAT.sigma, gt=0)
    v: float = _CAT.v


class TimeGridModel(_Model):
    start: float = Field(0.0, ge=0)
    stop: float = Field(5e-3, gt=0)
    points: int = Field(200, ge=1)
    spacing: Literal["linear", "log"] = "linear"
    include_zero: bool = False

    @model_validator(mode="after")
    def _ordered(self):
        if self.points > 1 and not self.stop > self.start:
            raise ValueError("time_grid.stop must exceed time_grid.start")
        if self.spacing == "log" and self.start <= 0:
            raise ValueError("log time grids need start > 0")
        return self

    def values(self) -> np.ndarray:
        if self.points == 1:
            t = np.array([self.start])
        elif self.spacing == "linear":
            t = np.linspace(self.start, self.stop, self.points)
        else:
            t = np.geomspace(self.start, self.stop, self.points)
        if self.include_zero and t[0] > 0:
            t = np.concatenate([[0.0], t])
        return t


class XGridModel(_Model):
    half_width: Optional[float] = Field(None, gt=0)
    points: int = Field(401, ge=3)

    @field_validator("points")
    @classmethod
    def _odd(cls, v):
        if v % 2 == 0:
            raise ValueError("x_grid.points must be odd so that x = 0 is on the grid")
        return v


class ScenarioConfig(_Model):
    physical: PhysicalModel = PhysicalModel()
    diffusion: DiffusionModel = DiffusionModel()
    initial: InitialModel = InitialModel()
    time_grid: TimeGridModel = TimeGridModel()
    x_grid: XGridModel = XGridModel()
    q_grid: List[float] = [0.25, 0.5, 0.81, 1.0, 1.5, 2.0, 4.0]
    outputs: List[str] = ["means", "variances"]

    @field_validator("outputs")
    @classmethod
    def _known(cls, v):
        bad = [o for o in v if o not in OUTPUT_KINDS]
        if bad:
            raise ValueError(f"unknown outputs {bad}; choose from {list(OUTPUT_KINDS)}")
        if not v:
            raise ValueError("outputs must not be empty")
        return v

    @field_validator("q_grid")
    @classmethod
    def _positive(cls, v):
        if any(not q > 0 for q in v):
            raise ValueError("q values must be positive")
        return v

    @model_validator(mode="after")
    def _compatible(self):
        if "attenuation" in self.outputs and self.initial.kind != "cat":
            raise ValueError("the attenuation output needs a cat initial state")
        return self

    def normalized(self) -> dict:
        return self.model_dump(mode="json")


def load_config(path) -> ScenarioConfig:
    text = Path(path).read_text()
    return ScenarioConfig.model_validate(json.loads(text))
