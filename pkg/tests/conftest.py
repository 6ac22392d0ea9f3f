import numpy as np
import pytest

from upmsp.problem import ProblemInstance


@pytest.fixture
def instance_a() -> ProblemInstance:
    """Two jobs, one machine; small enough to reason about by hand.

    Job 0: p=5, d=4, w=2.  Job 1: p=3, d=10, w=1.  Initial setups 1 and 2,
    changeovers 0->1: 1 and 1->0: 2.  Sequence (0, 1): setups end at 1 and 7,
    completions 6 and 10, so twt = 2*2 = 4 and tst = 2.  Sequence (1, 0):
    completions 5 and 12, twt = 2*8 = 16, tst = 4.
    """
    setup = np.zeros((3, 2, 1), dtype=np.int64)
    setup[0, 0, 0] = 1  # initial setup for job 0
    setup[0, 1, 0] = 2  # initial setup for job 1
    setup[1, 1, 0] = 1  # job 0 -> job 1
    setup[2, 0, 0] = 2  # job 1 -> job 0
    return ProblemInstance(
        processing=[[5], [3]],
        release=[0, 0],
        due=[4, 10],
        weight=[2, 1],
        setup=setup,
        eligible=((0,), (0,)),
    )


def tiny_instance(n=2, m=1, **overrides) -> ProblemInstance:
    """Minimal valid instance with unit processing and no setups."""
    data = dict(
        processing=np.ones((n, m), dtype=np.int64),
        release=np.zeros(n, dtype=np.int64),
        due=np.full(n, 100, dtype=np.int64),
        weight=np.ones(n, dtype=np.int64),
        setup=np.zeros((n + 1, n, m), dtype=np.int64),
        eligible=tuple(tuple(range(m)) for _ in range(n)),
    )
    data.update(overrides)
    return ProblemInstance(**data)
