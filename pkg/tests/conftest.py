import numpy as np
import pytest

from ltcnav.ctcell import CellKind, init_cell_params


def random_cell(kind, D=4, m=3, seed=0, weight_scale=1.0):
    p = init_cell_params(kind, D, m, rng=seed)
    rng = np.random.default_rng(seed + 1000)
    for name, arr in p.tensors.items():
        if name.startswith(("W", "U")):
            p.tensors[name] = arr * weight_scale
        elif name.startswith("b"):
            p.tensors[name] = rng.normal(0, 0.3, size=arr.shape)
    return p


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def ltc_reference(params, x, I):
    """Loop form of the LTC right-hand side, written independently of the package."""
    t = params.tensors
    D, m = params.state_dim, params.input_dim
    out = np.zeros(D)
    for i in range(D):
        z = t["b"][i]
        for j in range(D):
            z += t["W_r"][i, j] * x[j]
        for k in range(m):
            z += t["W"][i, k] * I[k]
        f = np.tanh(z)
        out[i] = -(1.0 / t["tau"][i] + f) * x[i] + f * t["A"][i]
    return out


def ctrnn_reference(params, x, I):
    t = params.tensors
    D, m = params.state_dim, params.input_dim
    out = np.zeros(D)
    for i in range(D):
        z = t["b"][i] + sum(t["W_r"][i, j] * x[j] for j in range(D)) + sum(t["W"][i, k] * I[k] for k in range(m))
        out[i] = -x[i] / t["tau"][i] + np.tanh(z)
    return out


REFERENCE_RHS = {CellKind.LTC: ltc_reference, CellKind.CTRNN: ctrnn_reference}


# ---------- acceptance reporting ----------

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record_acceptance(number: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[number] = (bool(ok), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
