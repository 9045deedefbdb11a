from .base import Router
from .epidemic import EpidemicRouter, epidemic_exchange
from .maxprop import (
    INF_COST,
    MaxPropRouter,
    maxprop_ack_purge,
    maxprop_cost,
    maxprop_costs,
    maxprop_meeting_update,
    maxprop_rank,
)
from .message import Buffer, BufferOverflow, Message, admit
from .prophet import (
    DeliveryPredictability,
    ProphetParams,
    ProphetRouter,
    prophet_age,
    prophet_encounter_update,
    prophet_forward_filter,
    prophet_transitive_update,
)

ROUTERS = ("epidemic", "maxprop", "prophet")


def make_router(
    name: str, node: int, capacity: float, prophet: ProphetParams | None = None, n_hosts: int = 0
) -> Router:
    if name == "epidemic":
        return EpidemicRouter(node, capacity)
    if name == "maxprop":
        return MaxPropRouter(node, capacity, max(n_hosts, node + 1))
    if name == "prophet":
        return ProphetRouter(node, capacity, prophet or ProphetParams())
    raise ValueError(f"unknown router {name!r} (expected one of {', '.join(ROUTERS)})")


__all__ = [
    "ROUTERS",
    "Buffer",
    "BufferOverflow",
    "DeliveryPredictability",
    "EpidemicRouter",
    "INF_COST",
    "MaxPropRouter",
    "Message",
    "ProphetParams",
    "ProphetRouter",
    "Router",
    "admit",
    "epidemic_exchange",
    "make_router",
    "maxprop_ack_purge",
    "maxprop_cost",
    "maxprop_costs",
    "maxprop_meeting_update",
    "maxprop_rank",
    "prophet_age",
    "prophet_encounter_update",
    "prophet_forward_filter",
    "prophet_transitive_update",
]
