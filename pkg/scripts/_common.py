"""Synthetic settings shared by the experiment scripts."""
from svdrestart.stream import SyntheticSpec


def burst_spec(variant: str, n: int, m_static: int, m_evolve: int, seed: int,
               events: int = 5, injected: float = 0.3) -> SyntheticSpec:
    """Stream where ``injected`` of all new edges arrive in ``events`` bursts."""
    burst = injected / (1 - injected) * m_evolve / events
    if variant == "celebrity":
        kw = dict(attach_fraction=min(1.0, burst / n))
    elif variant == "community":
        groups, size = 5, 0.1 * n / 5
        kw = dict(node_fraction=0.1, num_communities=groups,
                  intra_prob=min(1.0, burst / (groups * size * (size - 1) / 2)))
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return SyntheticSpec(variant=variant, n=n, m_static=m_static, m_evolve=m_evolve,
                         seed=seed, num_events=events, **kw)
