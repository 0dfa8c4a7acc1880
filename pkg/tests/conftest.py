"""Shared fixtures: bundled systems, barrier stacks, and input sets."""

import numpy as np
import pytest

from cbf_guard import (
    BarrierStack,
    ClassKe,
    PolytopicInputSet,
    QuadraticBarrier,
    make_double_integrator,
    make_planar_quadrotor,
)


@pytest.fixture(scope="session")
def di():
    return make_double_integrator()


@pytest.fixture(scope="session")
def quad():
    # Cached construction: the Lipschitz estimate samples Jacobians once.
    return make_planar_quadrotor()


@pytest.fixture(scope="session")
def ellipse():
    """The reference double-integrator barrier h = 1 - x1^2 - 2 x2^2."""
    return QuadraticBarrier([0.0, 0.0], [1.0, 2.0])


@pytest.fixture(scope="session")
def u_box_1d():
    return PolytopicInputSet.box([-2.0], [2.0])


@pytest.fixture(scope="session")
def u_box_2d():
    return PolytopicInputSet.box([-2.0, -2.0], [2.0, 2.0])


@pytest.fixture(scope="session")
def gamma2():
    return ClassKe(2.0)


@pytest.fixture(scope="session")
def single_stack(ellipse, gamma2):
    return BarrierStack([(ellipse, gamma2, 0.0)])


@pytest.fixture(scope="session")
def lens_stack(gamma2):
    """Two overlapping ellipses whose intersection sits inside the reference
    ellipse and keeps ||L_g h_i|| bounded away from zero."""
    b1 = QuadraticBarrier([0.01, -1.27], [0.60, 0.26])
    b2 = QuadraticBarrier([0.02, 1.33], [0.56, 0.26])
    return BarrierStack([(b1, gamma2, 0.0), (b2, gamma2, 0.0)])


@pytest.fixture(scope="session")
def quad_input_box():
    return PolytopicInputSet.box([-0.35, 0.2], [0.35, 0.9])


def sample_in_stack(stack, n, rng, extra_bounds=None):
    """Rejection-sample n states from the stack's safe-set intersection."""
    lo, hi = stack.bounding_box(extra_bounds=extra_bounds)
    out = []
    while len(out) < n:
        x = rng.uniform(lo, hi)
        if stack.min_h(x) >= 0:
            out.append(x)
    return np.array(out)
