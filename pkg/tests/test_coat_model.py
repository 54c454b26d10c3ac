"""Network assembly tests: parameter shapes from config alone, determinism,
dual/single head contracts, the agent-anchored flatten and scale-freedom."""

import numpy as np
import pytest

from coatplan import tensor_core as tc
from coatplan.coat_model import Model, ModelConfig, build_model, forward, heuristic_value
from coatplan.errors import ConfigError, ContractError
from coatplan.nn_layers import AttentionConfig, CoAtBlockParams, PosEncConfig, coat_block, conv_relu_skip
from coatplan import domains
from coatplan.domains.maze import MazeParams

from reference import model_parameter_count_reference

TINY = ModelConfig(input_channels=4, action_count=4, preconv_layers=1, preconv_filters=4,
                   blocks_per_branch=1, block_filters=6, attention_heads=1, d_e=4,
                   fc1_width=8, head_mode="dual", agent_slots=1, desk_scale=True)


class TestBuildModel:
    def test_paper_config_parameter_count_matches_shape_walk(self):
        config = ModelConfig(input_channels=10, action_count=8)  # paper-scale defaults
        model = build_model(config, seed=0)
        expected = model_parameter_count_reference(
            preconv_layers=7, preconv_filters=64, blocks=4, block_filters=180,
            d_e=24, fc1_width=256, input_channels=10, action_count=8,
            dual_head=True, agents=1)
        assert model.parameter_count() == expected

    def test_desk_config_parameter_count_matches_shape_walk(self):
        config = ModelConfig.desk(input_channels=16, action_count=4)
        model = build_model(config, seed=1)
        expected = model_parameter_count_reference(
            preconv_layers=2, preconv_filters=16, blocks=2, block_filters=24,
            d_e=8, fc1_width=64, input_channels=16, action_count=4,
            dual_head=True, agents=1)
        assert model.parameter_count() == expected

    def test_same_seed_builds_identical_parameters(self):
        a = build_model(TINY, seed=42)
        b = build_model(TINY, seed=42)
        for name, tensor in a.params.items():
            assert np.array_equal(tensor.data, b.params[name].data)

    def test_different_seed_differs(self):
        a = build_model(TINY, seed=1)
        b = build_model(TINY, seed=2)
        assert any(not np.array_equal(t.data, b.params[n].data) for n, t in a.params.items())

    def test_single_head_has_no_policy_parameters(self):
        config = ModelConfig.desk(input_channels=8, action_count=16, head_mode="single",
                                  agent_slots=2)
        model = build_model(config, seed=0)
        assert not any(name.startswith("fc2_a") for name in model.params.names())
        assert not any(name.startswith("branch.p") for name in model.params.names())

    def test_invalid_configs_rejected(self):
        with pytest.raises(ConfigError):
            ModelConfig(input_channels=4, action_count=4, block_filters=10)  # 10/2=5 not /3
        with pytest.raises(ConfigError):
            ModelConfig(input_channels=4, action_count=4, d_e=6)
        with pytest.raises(ConfigError):
            ModelConfig(input_channels=0, action_count=4)
        with pytest.raises(ConfigError):
            ModelConfig(input_channels=4, action_count=4, head_mode="triple")


class TestForward:
    def test_dual_policy_is_a_distribution(self):
        model = build_model(TINY, seed=3)
        rng = np.random.default_rng(0)
        policy, value = forward(model, rng.normal(size=(5, 5, 4)).astype(np.float32), [(2, 2)])
        assert policy.shape == (4,)
        assert policy.data.sum() == pytest.approx(1.0, abs=1e-6)
        assert value.shape == (1,)

    def test_scale_free_across_grid_sizes(self):
        model = build_model(TINY, seed=3)
        rng = np.random.default_rng(1)
        for size in (4, 5, 7, 10, 16, 33, 60):
            policy, value = forward(model, rng.normal(size=(size, size, 4)).astype(np.float32),
                                    [(size - 1, 0)])
            assert policy.shape == (4,) and value.shape == (1,)

    def test_out_of_bounds_agent_rejected(self):
        model = build_model(TINY, seed=3)
        with pytest.raises(ContractError):
            forward(model, np.zeros((4, 4, 4), dtype=np.float32), [(4, 0)])

    def test_wrong_channel_count_rejected(self):
        model = build_model(TINY, seed=3)
        with pytest.raises(ConfigError):
            forward(model, np.zeros((4, 4, 5), dtype=np.float32), [(0, 0)])

    def test_wrong_agent_count_rejected(self):
        model = build_model(TINY, seed=3)
        with pytest.raises(ContractError):
            forward(model, np.zeros((4, 4, 4), dtype=np.float32), [(0, 0), (1, 1)])

    def test_matches_manual_layer_composition(self):
        """Wire the same parameters through the layer calls by hand."""
        model = build_model(TINY, seed=5)
        rng = np.random.default_rng(7)
        x = rng.normal(size=(3, 3, 4)).astype(np.float32)
        policy, value = forward(model, x, [(1, 2)])

        t = tc.constant(x)
        t = conv_relu_skip(t, model.params["preconv.0.kernel"], model.params["preconv.0.bias"])
        att = AttentionConfig(1, 6)
        penc = PosEncConfig(4)
        parts = []
        for branch in ("h", "p"):
            blk = CoAtBlockParams(model.params[f"branch.{branch}.block.0.kernel"],
                                  model.params[f"branch.{branch}.block.0.bias"], att, penc)
            zb = coat_block(t, blk)
            parts.append(tc.gather_position(zb, (1, 2)))
        flat = tc.concat(parts, axis=0)
        hidden = tc.dense(flat, model.params["fc1.weight"], model.params["fc1.bias"], "relu")
        manual_value = tc.dense(hidden, model.params["fc2_h.weight"], model.params["fc2_h.bias"])
        manual_policy = tc.dense(hidden, model.params["fc2_a.weight"], model.params["fc2_a.bias"],
                                 "softmax")
        np.testing.assert_array_equal(value.data, manual_value.data)
        np.testing.assert_array_equal(policy.data, manual_policy.data)

    def test_head_isolation(self):
        """Zeroing the policy head changes the policy but leaves the value
        output bit-identical."""
        model = build_model(TINY, seed=9)
        rng = np.random.default_rng(2)
        x = rng.normal(size=(4, 4, 4)).astype(np.float32)
        policy_before, value_before = forward(model, x, [(0, 0)])
        model.params["fc2_a.weight"].data[:] = 0.0
        model.params["fc2_a.bias"].data[:] = 0.0
        policy_after, value_after = forward(model, x, [(0, 0)])
        assert not np.array_equal(policy_before.data, policy_after.data)
        assert np.array_equal(value_before.data, value_after.data)

    def test_two_agent_flatten_width(self):
        config = ModelConfig.desk(input_channels=8, action_count=16, head_mode="single",
                                  agent_slots=2)
        model = build_model(config, seed=0)
        assert model.params["fc1.weight"].shape[0] == 2 * (24 // 3 + 8)
        policy, value = forward(model, np.zeros((3, 3, 8), dtype=np.float32), [(0, 0), (2, 2)])
        assert policy is None and value.shape == (1,)


@pytest.fixture(scope="module")
def maze_state():
    instance = domains.generate("maze", MazeParams(6, 6, teleport_pairs=1), seed=3,
                                certify=False)
    return instance.initial_state


class TestHeuristicValue:

    def test_nonnegative_clamp(self, maze_state):
        model = build_model(ModelConfig.desk(input_channels=16, action_count=4), seed=0)
        model.params["fc2_h.bias"].data[:] = -100.0  # force a negative raw output
        assert heuristic_value(model, maze_state) == 0.0

    def test_deterministic_and_reproducible(self, maze_state):
        model = build_model(ModelConfig.desk(input_channels=16, action_count=4), seed=0)
        first = heuristic_value(model, maze_state)
        again = heuristic_value(model, maze_state)
        rebuilt = heuristic_value(build_model(ModelConfig.desk(input_channels=16, action_count=4),
                                              seed=0), maze_state)
        assert first == again == rebuilt
        assert first >= 0.0

    def test_domain_model_mismatch_rejected(self, maze_state):
        model = build_model(ModelConfig.desk(input_channels=10, action_count=8), seed=0)
        with pytest.raises(ConfigError):
            heuristic_value(model, maze_state)
