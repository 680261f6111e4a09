"""HTTP front end: one POST endpoint per command, pydantic in, Report out."""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..errors import CapabilityError, ConfigError, InvariantError, OracleFailure, UvhedgeError
from . import runners
from .schemas import (
    CashEquivRequest,
    HedgeSimRequest,
    PriceRequest,
    Report,
    SelftestRequest,
    SweepRequest,
)


def create_app() -> FastAPI:
    app = FastAPI(title="uvhedge", version=__version__,
                  description="Delta-vega hedging and uncertainty premia under a "
                              "recalibrated Black-Scholes reference")

    @app.exception_handler(UvhedgeError)
    async def _uvhedge_error(request: Request, exc: UvhedgeError):
        if isinstance(exc, ConfigError):
            status = 422
        elif isinstance(exc, CapabilityError):
            status = 409
        elif isinstance(exc, (InvariantError, OracleFailure)):
            status = 500
        else:
            status = 400
        return JSONResponse(status_code=status,
                            content={"error": type(exc).__name__, "detail": str(exc)})

    @app.get("/healthz")
    async def healthz():
        return {"status": "ok", "version": __version__}

    @app.post("/v1/price", response_model=Report)
    def price(req: PriceRequest) -> Report:
        return runners.run_price(req.config, route=req.route)

    @app.post("/v1/cashequiv", response_model=Report)
    def cashequiv(req: CashEquivRequest) -> Report:
        return runners.run_cashequiv(req.config, route=req.route, refine=req.refine)

    @app.post("/v1/sweep", response_model=Report)
    def sweep(req: SweepRequest) -> Report:
        return runners.run_sweep(req.config, psi_grid=req.psi_grid, challenger=req.challenger)

    @app.post("/v1/hedge-sim", response_model=Report)
    def hedge_sim(req: HedgeSimRequest) -> Report:
        return runners.run_hedge_sim(req.config, psi=req.psi)

    @app.post("/v1/selftest", response_model=Report)
    def selftest(req: SelftestRequest) -> Report:
        return runners.run_selftest(corrupt=req.corrupt)

    return app


app = create_app()
