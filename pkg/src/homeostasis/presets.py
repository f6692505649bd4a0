"""Published weight sets and loading protocols for the stripe and cross specimens.

Stresses are in uN/mm^2 and times in hours throughout.
"""

from __future__ import annotations

import numpy as np

from .energy_net import EnergyWeights
from .material_point import Constraint, LoadingProtocol
from .potential_net import ActivationMode, PotentialWeights

M, Z = Constraint.MEASURED, Constraint.ZERO_STRESS

STRIPE_MASK = (M, Z, Z)
CROSS_MASK = (M, M, Z)

STRIPE_HOMEOSTASIS_H = 17.0
CROSS_HOMEOSTASIS_H = 27.0

STRIPE_C11 = {"compress": 0.99505347, "stretch": 1.0037114}
CROSS_BIAXIAL = {"stretch": (1.0044529, 1.0041029), "compress": (0.99416188, 0.99379366)}
CROSS_SEMIBIAXIAL = {"stretch": (1.0046307, 1.0), "compress": (0.99408145, 1.0)}


def _weights(values, mode=ActivationMode.NEG_MAX):
    return EnergyWeights(*values[:4]), PotentialWeights(*values[4:], activation_mode=mode)


# order: w01 w02 w11 w12 | ws1 ws2 ws3 ws4 wt1 wt2 wt3 wt4 weta
_TABLES = {
    ("stripe", "L1"): (1.6990947, 0.10240719, -3.5541244, 0.0,
                       0.0, 0.0, 6.075556e-08, 0.02765466, 0.0, 0.0, 3.5020828e-09, 0.0, 0.43815053),
    ("stripe", "L2"): (1.2036339, 0.07181329, 1.2016658, 0.3978735,
                       0.0, 0.0, 3.980602e-08, 0.03391496, 0.0, 0.0, 7.274134e-08, 0.03408322, 0.26240048),
    ("cross", "L1"): (2.168842, 0.27726683, 1.3061364, 0.0,
                      0.0, 0.0, 6.806422e-08, 0.01459178, 0.0, 0.0, 2.7375126e-08, 0.0012281, 0.27317414),
    ("cross", "L2"): (3.1134224, 0.36447218, -0.2970376, 0.0,
                      0.0, 0.0, 0.0, 0.01457657, 0.0, 0.0, 9.1654684e-08, 0.01357422, 0.49805772),
    ("stripe_abs", "L1"): (1.7982913, 0.08166084, -0.2862283, 0.0,
                           0.0, 0.0, 7.898215e-07, 0.02767334, 0.0, 0.0, 1.1955261e-08, 0.0, 0.44342846),
    ("stripe_abs", "L2"): (1.5855898, 0.02207945, 2.0337853, 0.08938348,
                           0.00010657, 0.0, 3.9903475e-07, 0.00130172, 0.02694412, 0.0, 1.10272524e-07,
                           0.02694412, 0.31261802),
    ("cross_abs", "L1"): (2.1491084, 0.39225546, -1.6436962, 0.0,
                          0.0, 0.0, 4.9472845e-07, 0.01457978, 0.00533062, 0.0, 7.6053965e-07,
                          0.00533062, 0.2940081),
    ("cross_abs", "L2"): (2.26735, 0.3615928, -0.35730883, 0.00483087,
                          0.0, 0.0, 8.272873e-07, 0.0146279, 0.00149194, 0.0, 1.7517864e-07,
                          0.00149194, 0.28590617),
}


def discovered_weights(specimen: str, regularization: str):
    """Weight set from the discovered-weights tables.

    ``specimen`` is one of ``stripe``, ``cross``, ``stripe_abs``, ``cross_abs``;
    ``regularization`` is ``L1`` or ``L2``.
    """
    values = _TABLES[(specimen, regularization.upper())]
    mode = ActivationMode.ABS if specimen.endswith("_abs") else ActivationMode.NEG_MAX
    return _weights(values, mode)


def time_grid(t_end: float, dt: float) -> np.ndarray:
    n = int(round(t_end / dt))
    return np.linspace(0.0, n * dt, n + 1)


def stripe_protocol(loading: str | None = "compress", t_end: float = 40.0, dt: float = 0.1,
                    t_perturb: float = STRIPE_HOMEOSTASIS_H) -> LoadingProtocol:
    """Uniaxial stripe: ``C = I`` until ``t_perturb``, then a step in ``C11``.

    ``loading=None`` keeps ``C = I`` for the whole run.
    """
    times = time_grid(t_end, dt)
    c = np.ones((times.size, 3))
    if loading is not None:
        c[times > t_perturb + 1e-9, 0] = STRIPE_C11[loading]
    return LoadingProtocol(times, c, STRIPE_MASK)


def cross_protocol(setup: str = "biaxial", loading: str | None = "stretch", t_end: float = 60.0,
                   dt: float = 0.1, t_perturb: float = CROSS_HOMEOSTASIS_H) -> LoadingProtocol:
    """Cross specimen: ``C = I`` until ``t_perturb``, then the tabulated step."""
    table = {"biaxial": CROSS_BIAXIAL, "semibiaxial": CROSS_SEMIBIAXIAL}[setup]
    times = time_grid(t_end, dt)
    c = np.ones((times.size, 3))
    if loading is not None:
        late = times > t_perturb + 1e-9
        c[late, 0], c[late, 1] = table[loading]
    return LoadingProtocol(times, c, CROSS_MASK)
