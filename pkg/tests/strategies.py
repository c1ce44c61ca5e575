"""Hypothesis strategies shared by the test modules."""

from functools import lru_cache

from hypothesis import strategies as st

from findel.ast import And, Give, If, One, Or, Scale, ScaleObs, Timebound, Zero
from findel.engine import GatewayEntry

currencies = st.sampled_from(["USD", "EUR", "GBP", "X", "ABCDEFGH"])
addresses = st.from_regex(r"[A-Za-z0-9_][A-Za-z0-9_.:\-]{0,6}", fullmatch=True)
naturals = st.integers(min_value=0, max_value=10**6) | st.integers(min_value=0)
times = st.integers(min_value=0, max_value=40)


@lru_cache(maxsize=None)
def primitives(max_depth: int = 8, addr=addresses, nat=naturals, t=times):
    """Trees of depth at most ``max_depth``."""
    leaf = st.just(Zero()) | st.builds(One, currencies)
    if max_depth <= 1:
        return leaf
    # deferred keeps the strategy repr linear in depth
    sub = st.deferred(lambda: primitives(max_depth - 1, addr, nat, t))
    composite = st.one_of(
        st.builds(Scale, nat, sub),
        st.builds(ScaleObs, addr, sub),
        st.builds(Give, sub),
        st.builds(And, sub, sub),
        st.builds(Or, sub, sub),
        st.builds(If, addr, sub, sub),
        st.builds(Timebound, t, t, sub),
    )
    return leaf | composite


# Trees whose gateway lookups hit a small, known address set, so that
# execution succeeds often enough to exercise the algebraic properties.
exec_trees = primitives(
    8,
    st.sampled_from(["rate", "flag", "missing"]),
    st.integers(min_value=0, max_value=9),
    st.integers(min_value=0, max_value=30),
)


@st.composite
def gateways(draw, now: int = 20):
    entries = {}
    if draw(st.booleans()):
        entries["rate"] = GatewayEntry(draw(st.integers(0, 9)), draw(st.integers(0, now)))
    if draw(st.booleans()):
        entries["flag"] = GatewayEntry(draw(st.booleans()), draw(st.integers(0, now)))
    return entries
