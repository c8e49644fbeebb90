import numpy as np
import pytest

from affinegas import RadialGrid, build_profile, integrate_affine

# profile corpus used across operator and background tests
PROFILE_SPECS = {
    "const": {"kind": "poly", "coeffs": [1.0]},
    "poly": {"kind": "poly", "coeffs": [1.0, 0.0, 1.0, -1.0]},
}


def gaussian_table(n_pts: int = 240) -> dict:
    r = np.linspace(0.0, 1.0, n_pts)
    return {"kind": "table", "r": r.tolist(),
            "phi": (1.0 + 0.5 * np.exp(-((r / 0.4) ** 2))).tolist()}


PROFILE_SPECS["gauss"] = gaussian_table()


@pytest.fixture(scope="session")
def grid128():
    return RadialGrid(128, 2)


@pytest.fixture(scope="session")
def grid256():
    return RadialGrid(256, 2)


@pytest.fixture(scope="session")
def profile128(grid128):
    return build_profile(PROFILE_SPECS["const"], 1.4, grid128, k_derivs=6)


@pytest.fixture(scope="session")
def profile256(grid256):
    return build_profile(PROFILE_SPECS["const"], 1.4, grid256, k_derivs=6)


@pytest.fixture(scope="session")
def motion14():
    return integrate_affine(1.4, 1.0, 0.0, tau_final=9.0, tol=1e-10)


@pytest.fixture(scope="session")
def motion53():
    return integrate_affine(5.0 / 3.0, 1.0, 0.0, tau_final=9.0, tol=1e-10)


@pytest.fixture(scope="session")
def motion20():
    return integrate_affine(2.0, 1.0, 0.0, tau_final=9.0, tol=1e-10)


def motion_for(gamma):
    mapping = {1.4: "motion14", 5.0 / 3.0: "motion53", 2.0: "motion20"}
    return mapping[gamma]
