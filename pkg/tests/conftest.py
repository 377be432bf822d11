import pytest

from ridgewave.validation import ValidationContext


@pytest.fixture(scope="session")
def ctx():
    """Shared lazily-computed solver artifacts (profiles, simulations)."""
    return ValidationContext()


@pytest.fixture(scope="session")
def shoot_result(ctx):
    return ctx.shoot


@pytest.fixture(scope="session")
def reference_profile(ctx):
    return ctx.reference


@pytest.fixture(scope="session")
def kernel_result(ctx):
    return ctx.kernel


@pytest.fixture(scope="session")
def collocation_profile(ctx):
    return ctx.collocation


@pytest.fixture(scope="session")
def sim_stationary(ctx):
    return ctx.sim(400)


@pytest.fixture(scope="session")
def sim_fine(ctx):
    return ctx.sim(800)


@pytest.fixture(scope="session")
def sim_perturbed(ctx):
    return ctx.sim(400, perturb=0.05)
