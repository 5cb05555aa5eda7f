"""Conv head + recurrent cell + linear readout, with forward rollout and BPTT."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ltcnav.ctcell import CellParams, SolverConfig, build_cell, default_solver
from ltcnav.ctcell import container
from ltcnav.ctcell.container import cell_from_arrays, cell_to_arrays
from ltcnav.ctcell.params import TENSOR_NAMES, CellKind, init_cell_params
from ltcnav.ctcell.solvers import SolverMethod, cell_output, cell_output_vjp, frame_backward, frame_forward
from ltcnav.errors import ContractViolation, NumericalDivergence
from ltcnav.train.convhead import DEFAULT_LAYERS, ConvHead
from ltcnav.train.loss import LossValue, cosine_loss_and_grad


def preprocess(frames: np.ndarray) -> np.ndarray:
    """uint8 RGB -> float in [-1, 1]; float input is passed through."""
    if frames.dtype == np.uint8:
        return frames.astype(float) / 127.5 - 1.0
    return np.asarray(frames, dtype=float)


@dataclass
class RolloutCache:
    images: np.ndarray          # (B*T, H, W, C) preprocessed
    acts: list                  # conv activations per layer
    features: np.ndarray        # (B, T, m)
    tapes: list                 # per frame
    states: list                # state after each frame, (B, S)
    x0: np.ndarray
    outputs: np.ndarray         # readout inputs (B, T, n_motor)


@dataclass
class Policy:
    arch: str
    conv: ConvHead
    cell: CellParams
    motor_index: np.ndarray
    readout_W: np.ndarray
    readout_b: np.ndarray
    solver: SolverConfig
    meta: dict = field(default_factory=dict)

    @classmethod
    def build(cls, arch: str, image_hw=(64, 64), seed: int = 0, solver: SolverConfig | None = None,
              layers=DEFAULT_LAYERS, neurons: int = 32, wiring=None,
              state_dim: int | None = None) -> "Policy":
        """``state_dim`` forces an exact state size instead of parameter matching."""
        rng = np.random.default_rng(seed)
        conv = ConvHead.default(image_hw, layers, rng)
        if state_dim is None:
            cell, motor = build_cell(arch, conv.feature_dim, neurons, rng, wiring=wiring)
        else:
            kind = CellKind("LTC" if arch.upper() == "NCP" else arch.upper().replace("-", ""))
            cell = init_cell_params(kind, state_dim, conv.feature_dim, rng)
            motor = np.arange(state_dim)
        n = len(motor)
        bound = 1.0 / np.sqrt(n)
        W = rng.uniform(-bound, bound, size=(3, n))
        b = np.zeros(3)
        return cls(arch.upper().replace("-", ""), conv, cell, motor, W, b,
                   solver or default_solver(cell.kind))

    # -- parameters ---------------------------------------------------------
    def parameters(self) -> dict[str, np.ndarray]:
        """Live references to every trainable tensor, keyed by name."""
        out = self.conv.parameters()
        for k in TENSOR_NAMES[self.cell.kind]:
            out["cell." + k] = self.cell.tensors[k]
        out["readout.W"] = self.readout_W
        out["readout.b"] = self.readout_b
        return out

    def grad_masks(self) -> dict[str, np.ndarray]:
        return {"cell." + k: v for k, v in self.cell.masks().items()}

    def param_count(self) -> int:
        return self.conv.param_count() + self.cell.trainable_count() + self.readout_W.size + 3

    def copy(self) -> "Policy":
        conv = ConvHead(self.conv.input_hw, self.conv.layers, self.conv.in_channels,
                        [w.copy() for w in self.conv.weights], [b.copy() for b in self.conv.biases])
        return Policy(self.arch, conv, self.cell.copy(), self.motor_index.copy(),
                      self.readout_W.copy(), self.readout_b.copy(), self.solver, dict(self.meta))

    def zero_state(self, batch: int) -> np.ndarray:
        return np.zeros((batch, self.cell.state_size))

    # -- forward --------------------------------------------------------------
    def readout(self, x: np.ndarray):
        out = cell_output(self.cell, x)[..., self.motor_index]
        return out @ self.readout_W.T + self.readout_b, out

    def forward_rollout(self, frames: np.ndarray, x0: np.ndarray | None = None):
        """frames (B, T, H, W, C) -> (predictions (B, T, 3), RolloutCache).

        The hidden state starts at zero unless ``x0`` is given.
        """
        if frames.ndim != 5:
            raise ContractViolation(f"frames must be (B, T, H, W, C), got {frames.shape}")
        B, T = frames.shape[:2]
        images = preprocess(frames).reshape(B * T, *frames.shape[2:])
        feats, acts = self.conv.forward(images)
        feats = feats.reshape(B, T, -1)
        x = self.zero_state(B) if x0 is None else np.array(x0, dtype=float)
        start = x.copy()
        tapes, states = [], []
        preds = np.empty((B, T, 3))
        outs = np.empty((B, T, len(self.motor_index)))
        for t in range(T):
            try:
                x, tape = frame_forward(self.cell, x, feats[:, t], self.solver, frame_index=t)
            except NumericalDivergence as err:
                raise NumericalDivergence(f"rollout diverged at frame {t}: {err}", step_index=t) from err
            tapes.append(tape)
            states.append(x)
            preds[:, t], outs[:, t] = self.readout(x)
        return preds, RolloutCache(images, acts, feats, tapes, states, start, outs)

    def act(self, image: np.ndarray, x: np.ndarray | None):
        """Closed-loop single-frame step: (heading (3,), next state)."""
        frames = image[None, None]
        x0 = None if x is None else x[None]
        preds, cache = self.forward_rollout(frames, x0)
        return preds[0, 0], cache.states[-1][0]

    # -- gradients ------------------------------------------------------------
    def backward(self, cache: RolloutCache, g_pred: np.ndarray) -> dict[str, np.ndarray]:
        """Reverse-mode pass given d loss / d predictions (B, T, 3)."""
        B, T = g_pred.shape[:2]
        grads: dict[str, np.ndarray] = {
            "readout.W": np.einsum("bti,btj->ij", g_pred, cache.outputs),
            "readout.b": g_pred.sum(axis=(0, 1)),
        }
        cell_grads: dict[str, np.ndarray] = {k: np.zeros_like(v) for k, v in self.cell.tensors.items()}
        g_feats = np.zeros_like(cache.features)
        g_x = np.zeros_like(cache.x0)
        n_out = self.cell.state_dim
        for t in range(T - 1, -1, -1):
            g_out = np.zeros((B, n_out))
            g_out[:, self.motor_index] = g_pred[:, t] @ self.readout_W
            g_x = g_x + cell_output_vjp(self.cell, g_out)
            g_x, g_I, gr = frame_backward(self.cell, cache.tapes[t], cache.features[:, t], g_x, self.solver)
            g_feats[:, t] = g_I
            for k, v in gr.items():
                cell_grads[k] += v
        for k, v in cell_grads.items():
            grads["cell." + k] = v
        grads.update(self.conv.backward(cache.images, cache.acts, g_feats.reshape(B * T, -1)))
        return grads


@dataclass
class GradientBundle:
    grads: dict[str, np.ndarray]
    loss: LossValue

    def check_shapes(self, policy: Policy) -> None:
        params = policy.parameters()
        if set(params) != set(self.grads):
            raise ContractViolation("gradient names do not mirror parameter names")
        for k, v in params.items():
            if self.grads[k].shape != v.shape:
                raise ContractViolation(f"gradient {k} has shape {self.grads[k].shape}, expected {v.shape}")


def bptt_gradients(policy: Policy, frames: np.ndarray, labels: np.ndarray) -> GradientBundle:
    """Exact gradients of the mean cosine loss over a batch of sequences."""
    if labels.shape != frames.shape[:2] + (3,):
        raise ContractViolation(f"labels {labels.shape} do not match frames {frames.shape[:2]}")
    preds, cache = policy.forward_rollout(frames)
    loss, g_pred = cosine_loss_and_grad(preds, labels)
    bundle = GradientBundle(policy.backward(cache, g_pred), loss)
    bundle.check_shapes(policy)
    return bundle


def sequence_loss(policy: Policy, frames: np.ndarray, labels: np.ndarray) -> LossValue:
    preds, _ = policy.forward_rollout(frames)
    return cosine_loss_and_grad(preds, labels)[0]


def policy_to_container(policy: Policy) -> tuple[dict, dict]:
    arrays, meta = cell_to_arrays(policy.cell)
    arrays.update(policy.conv.parameters())
    arrays["readout.W"] = policy.readout_W
    arrays["readout.b"] = policy.readout_b
    arrays["readout.motor_index"] = policy.motor_index.astype(float)
    meta.update(
        arch=policy.arch,
        image_hw=",".join(map(str, policy.conv.input_hw)),
        conv_layers=";".join(",".join(map(str, l)) for l in policy.conv.layers),
        solver=policy.solver.method.value,
        solver_dt=repr(policy.solver.dt),
        unfold_steps=str(policy.solver.unfold_steps),
    )
    meta.update({f"meta.{k}": str(v) for k, v in policy.meta.items()})
    return arrays, meta


def policy_from_container(arrays: dict, meta: dict) -> Policy:
    hw = tuple(int(v) for v in meta["image_hw"].split(","))
    layers = tuple(tuple(int(v) for v in l.split(",")) for l in meta["conv_layers"].split(";"))
    n = len(layers)
    conv = ConvHead(hw, layers, 3, [arrays[f"conv.{i}.w"] for i in range(n)],
                    [arrays[f"conv.{i}.b"] for i in range(n)])
    solver = SolverConfig(SolverMethod(meta["solver"]), float(meta["solver_dt"]), int(meta["unfold_steps"]))
    extra = {k[5:]: v for k, v in meta.items() if k.startswith("meta.")}
    return Policy(meta["arch"], conv, cell_from_arrays(arrays, meta),
                  arrays["readout.motor_index"].astype(int), arrays["readout.W"], arrays["readout.b"],
                  solver, extra)


def save_policy(path, policy: Policy) -> None:
    arrays, meta = policy_to_container(policy)
    container.save(path, arrays, meta)


def load_policy(path) -> Policy:
    return policy_from_container(*container.load(path))
