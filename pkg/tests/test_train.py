import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_cell
from gradcheck import fd_relative_errors, toy_problem, worst_bptt_error
from ltcnav.ctcell import CellKind, SolverConfig
from ltcnav.errors import ConfigurationError, ContractViolation, NumericalDivergence, UnsupportedArchitecture
from ltcnav.train import (
    Adam,
    ConvHead,
    Policy,
    TrainConfig,
    Window,
    adjoint_gradients,
    adjoint_solve,
    bptt_gradients,
    cosine_loss,
    cosine_loss_and_grad,
    load_policy,
    save_checkpoint,
    save_policy,
    split_by_episode,
    train_policy,
)
from ltcnav.train.convhead import output_size
from ltcnav.train.policy import preprocess


class TestConvHead:
    def test_default_shapes_and_count(self):
        head = ConvHead.default((64, 64), rng=0)
        assert head.shapes() == [(20, 20, 16), (9, 9, 32), (4, 4, 64), (2, 2, 8)]
        assert head.feature_dim == 32
        assert head.param_count() == 16168

    def test_output_size_formula(self):
        assert output_size(64, 5, 3) == 20
        assert output_size(5, 5, 3) == 1

    def test_collapse_rejected(self):
        with pytest.raises(ConfigurationError):
            ConvHead.default((8, 8))

    def test_forward_matches_direct_convolution(self, rng):
        head = ConvHead.default((11, 11), layers=((2, 3, 2), (3, 2, 1)), rng=1)
        img = rng.normal(size=(2, 11, 11, 3))
        feats, acts = head.forward(img)
        w, b = head.weights[0], head.biases[0]
        ref = np.zeros((2, 5, 5, 2))
        for n in range(2):
            for i in range(5):
                for j in range(5):
                    patch = img[n, 2 * i:2 * i + 3, 2 * j:2 * j + 3, :]
                    for f in range(2):
                        ref[n, i, j, f] = max(0.0, np.sum(patch.transpose(2, 0, 1) * w[f]) + b[f])
        np.testing.assert_allclose(acts[0], ref, atol=1e-12)
        assert feats.shape == (2, 4 * 4 * 3)

    def test_input_gradient_fd(self, rng):
        head = ConvHead.default((9, 9), layers=((2, 3, 2),), rng=2)
        head.biases[0] += 0.5
        img = rng.normal(size=(1, 9, 9, 3))
        g_out = rng.normal(size=(1, head.feature_dim))
        feats, acts = head.forward(img)
        _, gx = head.backward(img, acts, g_out, need_input_grad=True)
        eps = 1e-6
        for idx in [(0, 0, 0, 0), (0, 4, 4, 1), (0, 8, 3, 2)]:
            up, down = img.copy(), img.copy()
            up[idx] += eps
            down[idx] -= eps
            fd = (head.forward(up)[0] - head.forward(down)[0]).ravel() @ g_out.ravel() / (2 * eps)
            assert gx[idx] == pytest.approx(fd, rel=1e-6, abs=1e-9)


class TestCosineLoss:
    def test_examples(self):
        z = np.array([0.0, 0.0, 1.0])
        assert cosine_loss(z, z).value == -1.0
        assert cosine_loss(np.array([1.0, 0, 0]), z).value == 0.0
        assert cosine_loss(-z, z).value == 1.0

    def test_degenerate_prediction_flagged(self):
        lv, g = cosine_loss_and_grad(np.zeros((2, 3)), np.tile([0.0, 0, 1], (2, 1)))
        assert lv.value == 0.0 and lv.flagged == 2
        assert not g.any()

    def test_mean_over_batch(self):
        label = np.tile([1.0, 0, 0], (2, 1))
        pred = np.array([[1.0, 0, 0], [-3.0, 0, 0]])
        assert cosine_loss(pred, label).value == 0.0

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.floats(-10, 10), min_size=6, max_size=6))
    def test_bounds(self, vals):
        pred, label = np.array(vals[:3]), np.array(vals[3:])
        if np.linalg.norm(label) < 1e-3:
            return
        label = label / np.linalg.norm(label)
        assert -1.0 <= cosine_loss(pred, label).value <= 1.0

    def test_shape_checked(self):
        with pytest.raises(ContractViolation):
            cosine_loss(np.zeros(2), np.zeros(2))


class TestRollout:
    def test_zero_images_time_invariant_predictions(self):
        policy = Policy.build("LTC", (32, 32), seed=0, layers=((4, 5, 3), (4, 3, 2)), state_dim=4)
        for name in ("W_r", "b"):
            policy.cell.tensors[name][:] = 0
        frames = np.full((1, 5, 32, 32, 3), 127.5)  # preprocesses to exactly zero
        frames = frames.astype(float) / 127.5 - 1.0
        preds, _ = policy.forward_rollout(frames)
        assert np.all(preds == preds[:, :1])

    def test_single_frame_equals_step_plus_readout(self, rng):
        policy, frames, _ = toy_problem("LTC", 3, T=1, B=1)
        preds, cache = policy.forward_rollout(frames)
        feats, _ = policy.conv.forward(preprocess(frames[0]))
        from ltcnav.ctcell.solvers import frame_forward
        x, _ = frame_forward(policy.cell, np.zeros((1, 4)), feats, policy.solver)
        np.testing.assert_array_equal(preds[0, 0], (x @ policy.readout_W.T + policy.readout_b)[0])

    @pytest.mark.parametrize("arch", ["NCP", "CTGRU"])
    def test_split_rollout_bitwise(self, arch, rng):
        policy = Policy.build(arch, (64, 64), seed=1)
        frames = rng.integers(0, 256, size=(2, 64, 64, 64, 3), dtype=np.uint8)
        full, _ = policy.forward_rollout(frames)
        first, cache = policy.forward_rollout(frames[:, :32])
        second, _ = policy.forward_rollout(frames[:, 32:], x0=cache.states[-1])
        assert np.array_equal(full, np.concatenate([first, second], axis=1))

    def test_divergence_reports_frame(self):
        policy, frames, _ = toy_problem("CTRNN", 0, T=20, B=1,
                                        solver=SolverConfig.for_frame("ExplicitEuler", 1))
        policy.cell.tensors["tau"][:] = 1e-30  # Euler factor ~ -5e28 per frame
        with np.errstate(all="ignore"), pytest.raises(NumericalDivergence) as err:
            policy.forward_rollout(frames)
        assert 5 <= err.value.step_index < 20

    def test_frames_rank_checked(self):
        policy, frames, _ = toy_problem("LTC", 0)
        with pytest.raises(ContractViolation):
            policy.forward_rollout(frames[0])


class TestBptt:
    @pytest.mark.parametrize("arch", ["LTC", "CTRNN", "ODERNN", "CTGRU", "LSTM", "LTC-fused"])
    def test_matches_finite_differences(self, arch):
        if arch == "LTC-fused":
            err, name = worst_bptt_error("LTC", 5, solver=SolverConfig.for_frame("SemiImplicitFused"))
        else:
            err, name = worst_bptt_error(arch, 5)
        assert err < 1e-4, name

    def test_ncp_masked_entries_get_no_gradient(self):
        policy = Policy.build("NCP", (64, 64), seed=0)
        rng = np.random.default_rng(0)
        frames = rng.integers(0, 256, size=(1, 4, 64, 64, 3), dtype=np.uint8)
        labels = np.tile([1.0, 0, 0], (1, 4, 1))
        grads = bptt_gradients(policy, frames, labels).grads
        assert not grads["cell.W_r"][policy.cell.wiring_mask == 0].any()
        assert not grads["cell.W"][policy.cell.input_mask == 0].any()

    def test_gradient_orthogonal_to_prediction(self):
        # cosine is scale invariant, so dL/dpred is orthogonal to pred
        rng = np.random.default_rng(2)
        pred = rng.normal(size=(5, 3))
        _, g = cosine_loss_and_grad(pred, pred / np.linalg.norm(pred, axis=1, keepdims=True))
        np.testing.assert_allclose((g * pred).sum(1), 0, atol=1e-15)
        np.testing.assert_allclose(g, 0, atol=1e-15)

    def test_duplicated_sample_linearity(self):
        policy, frames, labels = toy_problem("LTC", 4, B=1)
        single = bptt_gradients(policy, frames, labels).grads
        double = bptt_gradients(policy, np.concatenate([frames, frames]),
                                np.concatenate([labels, labels])).grads
        for k in single:
            np.testing.assert_allclose(double[k], single[k], rtol=1e-10, atol=1e-14)

    def test_shape_mismatch(self):
        policy, frames, labels = toy_problem("LTC", 0)
        with pytest.raises(ContractViolation):
            bptt_gradients(policy, frames, labels[:, :-1])


def _cell_relative_error(a, b):
    keys = [k for k in b if k.startswith("cell.")]
    va = np.concatenate([a[k].ravel() for k in keys])
    vb = np.concatenate([b[k].ravel() for k in keys])
    return np.linalg.norm(va - vb) / np.linalg.norm(vb)


class TestAdjoint:
    @pytest.mark.parametrize("arch", ["LTC", "CTRNN", "ODERNN"])
    def test_agrees_with_bptt_and_improves(self, arch):
        errors = []
        for dt in (1e-2, 1e-3):
            cfg = SolverConfig.for_frame("ExplicitEuler", int(round(0.05 / dt)))
            policy, frames, labels = toy_problem(arch, 1, solver=cfg)
            errors.append(_cell_relative_error(adjoint_gradients(policy, frames, labels).grads,
                                               bptt_gradients(policy, frames, labels).grads))
        assert errors[1] < 1e-2
        assert errors[1] < errors[0]

    def test_rk4_agreement(self):
        cfg = SolverConfig.for_frame("RK4", 10)
        policy, frames, labels = toy_problem("LTC", 2, solver=cfg)
        err = _cell_relative_error(adjoint_gradients(policy, frames, labels).grads,
                                   bptt_gradients(policy, frames, labels).grads)
        assert err < 1e-6

    def test_zero_length(self, rng):
        p = random_cell(CellKind.LTC)
        a_end = rng.normal(size=4)
        x, a, grads, gI = adjoint_solve(p, rng.normal(size=4), a_end, rng.normal(size=3), 0.0, 1e-3)
        np.testing.assert_array_equal(a, a_end)
        assert all(not g.any() for g in grads.values()) and not gI.any()

    def test_linear_closed_form(self, rng):
        # W_r = 0 makes f a constant c, so da/dt = (1/tau + c) a and going backward a decays
        p = random_cell(CellKind.LTC, seed=9)
        p.tensors["W_r"][:] = 0
        I = rng.normal(size=3)
        c = np.tanh(p.W @ I + p.b)
        a_end = rng.normal(size=4)
        span = 1.0
        _, a, _, _ = adjoint_solve(p, rng.normal(size=4), a_end, I, span, 1e-3, "RK4")
        np.testing.assert_allclose(a, a_end * np.exp(-(1 / p.tau + c) * span), rtol=1e-4)

    @pytest.mark.parametrize("arch", ["CTGRU", "LSTM"])
    def test_discrete_cells_rejected(self, arch):
        policy, frames, labels = toy_problem(arch, 0)
        with pytest.raises(UnsupportedArchitecture):
            adjoint_gradients(policy, frames, labels)


class TestAdam:
    def test_first_step_is_sign(self):
        w = {"w": np.array([1.0, -2.0, 3.0])}
        opt = Adam(learning_rate=0.1)
        opt.update(w, {"w": np.array([0.5, -4.0, 0.0])})
        np.testing.assert_allclose(w["w"], [0.9, -1.9, 3.0], atol=1e-6)

    def test_zero_gradient(self):
        w = {"w": np.array([1.0, 2.0])}
        Adam().update(w, {"w": np.zeros(2)})
        np.testing.assert_array_equal(w["w"], [1.0, 2.0])

    def test_quadratic_bowl(self):
        w = {"w": np.array([1.0, 1.0])}
        opt = Adam(learning_rate=0.1)
        for _ in range(100):
            opt.update(w, {"w": 2 * w["w"]})
        assert np.sum(w["w"] ** 2) < 1e-2

    def test_deterministic(self):
        outs = []
        for _ in range(2):
            w = {"w": np.array([0.3, -0.7])}
            opt = Adam()
            for i in range(10):
                opt.update(w, {"w": np.sin(w["w"] * (i + 1))})
            outs.append(w["w"].copy())
        assert np.array_equal(*outs)

    def test_tau_projection_and_overrides(self):
        w = {"cell.tau": np.array([0.06]), "readout.b": np.array([0.0])}
        opt = Adam(learning_rate=1.0, overrides={"readout.": 0.0})
        opt.update(w, {"cell.tau": np.array([1.0]), "readout.b": np.array([1.0])})
        assert w["cell.tau"][0] == 0.05 and w["readout.b"][0] == 0.0

    def test_shape_check(self):
        with pytest.raises(ContractViolation):
            Adam().update({"w": np.zeros(2)}, {"w": np.zeros(3)})


def _toy_windows(n, T=8, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for e in range(n):
        lab = rng.normal(size=(T, 3))
        lab /= np.linalg.norm(lab, axis=1, keepdims=True)
        out.append(Window(rng.integers(0, 256, size=(T, 16, 16, 3), dtype=np.uint8), lab, f"ep{e:03d}"))
    return out


class TestTrainer:
    def test_split_by_episode(self):
        windows = _toy_windows(20)
        train, val = split_by_episode(windows, 0.1, seed=3)
        assert len(val) == 2 and len(train) == 18
        assert not {w.episode for w in train} & {w.episode for w in val}
        assert split_by_episode(windows, 0.1, seed=3)[1][0].episode == val[0].episode

    def test_empty_dataset(self):
        policy, _, _ = toy_problem("LTC", 0)
        with pytest.raises(ConfigurationError):
            train_policy([], policy, TrainConfig())

    def test_zero_learning_rate_constant_curve(self):
        policy, _, _ = toy_problem("LTC", 0)
        res = train_policy(_toy_windows(4), policy, TrainConfig(learning_rate=0.0, sequence_length=8,
                                                                max_epochs=3, minibatch=2))
        vals = {r.val_loss.value for r in res.history}
        assert len(vals) == 1

    def test_deterministic_curves(self):
        curves = []
        for _ in range(2):
            policy, _, _ = toy_problem("NCP", 0)
            res = train_policy(_toy_windows(6), policy, TrainConfig(sequence_length=8, max_epochs=3,
                                                                    minibatch=4, learning_rate=1e-2))
            curves.append(res.curves())
        assert np.array_equal(*curves)
        assert np.all((-1 <= curves[0][:, 1:]) & (curves[0][:, 1:] <= 1))

    @pytest.mark.slow
    def test_memorize_singleton(self):
        rng = np.random.default_rng(0)
        T = 64
        frames = rng.integers(0, 256, size=(T, 64, 64, 3), dtype=np.uint8)
        ang = np.linspace(0, 0.8, T)
        labels = np.stack([np.cos(ang), np.sin(ang), np.full(T, 0.2)], 1)
        labels /= np.linalg.norm(labels, axis=1, keepdims=True)
        policy = Policy.build("NCP", (64, 64), seed=0)
        res = train_policy([Window(frames, labels, "only")], policy,
                           TrainConfig(max_epochs=200, patience=200))
        assert min(r.train_loss.value for r in res.history) <= -0.95

    def test_checkpoint_round_trip(self, tmp_path):
        policy, frames, labels = toy_problem("ODERNN", 0)
        res = train_policy(_toy_windows(3), policy, TrainConfig(sequence_length=8, max_epochs=1))
        out = save_checkpoint(tmp_path / "ck", res, TrainConfig(sequence_length=8, max_epochs=1))
        loaded = load_policy(out / "policy.lnav")
        np.testing.assert_array_equal(loaded.forward_rollout(frames)[0], res.policy.forward_rollout(frames)[0])
        manifest = dict(line.split("=", 1) for line in (out / "manifest.txt").read_text().splitlines())
        assert manifest["arch"] == "ODERNN" and "epoch.1" in manifest
        assert (out / "curves.csv").read_text().splitlines()[0] == "epoch,train_loss,val_loss"

    def test_save_load_ncp_preserves_masks(self, tmp_path):
        policy = Policy.build("NCP", (64, 64), seed=4)
        save_policy(tmp_path / "p.lnav", policy)
        loaded = load_policy(tmp_path / "p.lnav")
        np.testing.assert_array_equal(loaded.cell.wiring_mask, policy.cell.wiring_mask)
        np.testing.assert_array_equal(loaded.motor_index, policy.motor_index)

    def test_window_length_must_match(self):
        policy, _, _ = toy_problem("LTC", 0)
        with pytest.raises(ConfigurationError):
            train_policy(_toy_windows(2), policy, TrainConfig(sequence_length=64))


def test_fd_helper_reports_every_tensor():
    policy, frames, labels = toy_problem("LSTM", 1)
    grads = bptt_gradients(policy, frames, labels).grads
    errs = fd_relative_errors(policy, frames, labels, grads, per_tensor=2)
    assert set(errs) == set(policy.parameters())
