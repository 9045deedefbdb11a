from __future__ import annotations

from .base import Router, _age_key


def epidemic_exchange(messages, peer_summary) -> list:
    """Messages whose id the peer's summary vector lacks, oldest first."""
    return sorted((m for m in messages if m.id not in peer_summary), key=_age_key)


class EpidemicRouter(Router):
    name = "epidemic"

    def order_for(self, peer, t):
        return epidemic_exchange(
            (m for m in self.buffer if m.destination != peer.node), peer.buffer.ids()
        )
