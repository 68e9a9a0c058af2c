"""Pydantic request/response schemas for the orbitgauge service.

Every subcommand of the CLI maps onto one request model; unknown keys are
rejected by pydantic (extra="forbid"), which is also how config-file typos
surface with the offending key named.
"""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field


class BaseRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seed: int = 0
    samples: int = 100_000
    shards: int = 1


class SystoleRequest(BaseRequest):
    basis: list[list[float]] = Field(default=[[1.0, 0.0], [0.0, 1.0]])
    norm: str = "euclidean"


class TessellateRequest(BaseRequest):
    m: int = 1
    n: int = 1
    r: float = 0.1
    t_grid: list[float] = Field(default=[1.1, 1.5, 2.0, 2.5, 3.0])
    exponents: list[float] | None = None   # weighted override, block-sorted


class MargulisRequest(BaseRequest):
    m: int = 1
    n: int = 1
    s: float = 0.5
    t: float = 4.0
    panel_u: list[float] = Field(default=[10.0, 31.622776601683793, 100.0])


class EscapeBoundRequest(BaseRequest):
    m: int = 1
    n: int = 1
    s: float = 0.5
    t: float = 6.0
    k: int = 2
    n_max: int = 3
    theta: float = 0.05
    c: float = 0.2
    d: float = 2.0


class EquidistRequest(BaseRequest):
    target: str = "systole-below:0.1"
    t_grid: list[float] = Field(default=[3.0, 4.0, 5.0, 6.0, 7.0, 8.0])
    r: float = 0.1
    basis: list[list[float]] | None = None
    lambda_prime: float | None = None       # run the lower-bound check at max t
    mlb_target: str | None = None           # separate target for that check


class CoverRequest(BaseRequest):
    m: int = 1
    n: int = 1
    t: float = 2.0
    n_steps: int = 3
    r: float = 0.1
    theta: float = 0.1
    target: str = "systole-above:0.2"       # the stay-in set S
    basis: list[list[float]] | None = None
    audit_resolution: int = 4096
    mu_sigma_r: float | None = None
    lambda_hat: float | None = None


class DimensionRequest(BaseRequest):
    set_spec: str = "cantor"                # cantor | cf-bounded:B | avoidance
    scales: list[int] = Field(default=[4, 6, 8, 10, 12, 14])
    depth: int = 12
    avoidance: dict | None = None           # {m,n,t,n_steps,r,target,resolution}


class BoundsRequest(BaseRequest):
    which: str = "s1"                       # s1 | s2 | final
    lambda_max: float = 2.0
    k: int = 2
    t: float = 5.0
    c: str = "0.2"                          # float or exact "num/den"
    mu: float = 0.1
    c1: float = 1.0
    c2_const: float = 1.0
    theta: float = 0.1
    p: int = 1
    r: float = 0.1
    lam: float = 1.0


class DICheckRequest(BaseRequest):
    m: int = 1
    n: int = 1
    c: float = 0.5
    n_lo: int = 10
    n_hi: int = 100
    matrices: list[list[list[float]]] = Field(default=[[[0.41421356237309515]]])


class DIScanRequest(BaseRequest):
    c: float = 0.5
    n_max: int = 1000
    n_min: int = 10
    grid_bits: int = 16
    k: int = 1


class SelftestRequest(BaseRequest):
    pass


class RunResponse(BaseModel):
    status: str
    summary: dict
    files: dict[str, str]
    manifest: dict


class ErrorBody(BaseModel):
    kind: str
    message: str
