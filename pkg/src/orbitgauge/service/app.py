"""FastAPI application exposing every lab subcommand as an endpoint.

POST /v1/<subcommand> with the matching request model returns the rendered
output files, a summary, and the experiment manifest.  Error kinds map onto
the CLI exit-code taxonomy: precondition -> 422, budget -> 429, audit -> 500.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..errors import AuditError, BudgetError, OrbitgaugeError, PreconditionError
from . import runs
from .models import RunResponse

app = FastAPI(title="orbitgauge", version=__version__)

_STATUS = {PreconditionError: 422, BudgetError: 429, AuditError: 500}
_KIND = {PreconditionError: "precondition", BudgetError: "budget", AuditError: "audit"}


@app.exception_handler(OrbitgaugeError)
async def orbitgauge_error_handler(request: Request, exc: OrbitgaugeError):
    status = 500
    kind = "internal"
    for klass, code in _STATUS.items():
        if isinstance(exc, klass):
            status = code
            kind = _KIND[klass]
            break
    return JSONResponse(status_code=status, content={"kind": kind, "message": str(exc)})


@app.get("/v1/health")
def health():
    return {"status": "ok", "version": __version__}


def _make_endpoint(name: str, model, runner):
    async def endpoint(req):
        summary, files, manifest = runner(req)
        return RunResponse(
            status="ok", summary=summary, files=files, manifest=manifest.to_json_obj()
        )

    endpoint.__name__ = f"run_{name.replace('-', '_')}"
    # real class objects, not postponed-annotation strings, so FastAPI binds the body
    endpoint.__annotations__ = {"req": model, "return": RunResponse}
    return endpoint


for _name, (_model, _runner) in runs.RUNNERS.items():
    app.post(f"/v1/{_name}", response_model=RunResponse)(
        _make_endpoint(_name, _model, _runner)
    )
