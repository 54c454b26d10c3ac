"""Full value/policy network: shared preprocessing convolutions, one branch
of conv-attention-encoding blocks per output head, an agent-anchored flatten,
and fully connected output layers.

Every layer preserves grid dimensions and the flatten reads the hidden
vector(s) at the agent cell(s), so one built model evaluates states of any
grid size.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor_core as tc
from .errors import ConfigError, ContractError
from .nn_layers import AttentionConfig, CoAtBlockParams, PosEncConfig, coat_block, conv_relu_skip

HEAD_MODES = ("dual", "single")


@dataclass(frozen=True)
class ModelConfig:
    input_channels: int
    action_count: int
    preconv_layers: int = 7
    preconv_filters: int = 64
    blocks_per_branch: int = 4
    block_filters: int = 180
    attention_heads: int = 2
    d_e: int = 24
    fc1_width: int = 256
    head_mode: str = "dual"
    agent_slots: int = 1  # hidden vectors gathered per state (two for two-agent domains)
    desk_scale: bool = False

    def __post_init__(self):
        for name in ("input_channels", "preconv_layers", "preconv_filters",
                     "blocks_per_branch", "block_filters", "attention_heads",
                     "d_e", "fc1_width", "agent_slots"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.head_mode not in HEAD_MODES:
            raise ConfigError(f"head_mode must be one of {HEAD_MODES}, got {self.head_mode!r}")
        if self.head_mode == "dual" and self.action_count < 1:
            raise ConfigError("dual head mode requires action_count >= 1")
        AttentionConfig(self.attention_heads, self.block_filters)  # divisibility checks
        PosEncConfig(self.d_e)

    @classmethod
    def desk(cls, input_channels, action_count, head_mode="dual", agent_slots=1):
        """Reduced sizes for CPU-scale experiments; all contracts unchanged."""
        return cls(input_channels=input_channels, action_count=action_count,
                   preconv_layers=2, preconv_filters=16, blocks_per_branch=2,
                   block_filters=24, attention_heads=2, d_e=8, fc1_width=64,
                   head_mode=head_mode, agent_slots=agent_slots, desk_scale=True)

    @property
    def branches(self):
        return ("h", "p") if self.head_mode == "dual" else ("h",)

    @property
    def block_out_channels(self):
        return self.block_filters // 3 + self.d_e

    def block_in_channels(self, index):
        return self.preconv_filters if index == 0 else self.block_out_channels

    @property
    def flatten_width(self):
        return len(self.branches) * self.agent_slots * self.block_out_channels

    def parameter_shapes(self):
        """Canonical (name, shape) pairs in creation order."""
        shapes = []
        cin = self.input_channels
        for i in range(self.preconv_layers):
            shapes.append((f"preconv.{i}.kernel", (3, 3, cin, self.preconv_filters)))
            shapes.append((f"preconv.{i}.bias", (self.preconv_filters,)))
            cin = self.preconv_filters
        for branch in self.branches:
            for j in range(self.blocks_per_branch):
                shapes.append((f"branch.{branch}.block.{j}.kernel",
                               (3, 3, self.block_in_channels(j), self.block_filters)))
                shapes.append((f"branch.{branch}.block.{j}.bias", (self.block_filters,)))
        shapes.append(("fc1.weight", (self.flatten_width, self.fc1_width)))
        shapes.append(("fc1.bias", (self.fc1_width,)))
        shapes.append(("fc2_h.weight", (self.fc1_width, 1)))
        shapes.append(("fc2_h.bias", (1,)))
        if self.head_mode == "dual":
            shapes.append(("fc2_a.weight", (self.fc1_width, self.action_count)))
            shapes.append(("fc2_a.bias", (self.action_count,)))
        return shapes


@dataclass
class Model:
    config: ModelConfig
    params: tc.ParamStore
    _blocks: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        att = AttentionConfig(self.config.attention_heads, self.config.block_filters)
        penc = PosEncConfig(self.config.d_e)
        for branch in self.config.branches:
            self._blocks[branch] = [
                CoAtBlockParams(self.params[f"branch.{branch}.block.{j}.kernel"],
                                self.params[f"branch.{branch}.block.{j}.bias"],
                                att, penc)
                for j in range(self.config.blocks_per_branch)
            ]

    @property
    def dtype(self):
        return self.params["fc1.weight"].dtype

    def parameter_count(self):
        return self.params.total_size()


def build_model(config, seed, dtype=np.float32):
    """Deterministically initialized model; shapes are a function of config
    alone. Kernels and weights draw fan-in-scaled uniform values, biases
    start at zero."""
    rng = np.random.default_rng(seed)
    params = tc.ParamStore()
    for name, shape in config.parameter_shapes():
        if name.endswith(".bias"):
            data = np.zeros(shape, dtype=dtype)
        elif name.endswith(".kernel"):
            fan_in = shape[0] * shape[1] * shape[2]
            data = tc.he_uniform(shape, fan_in, rng, dtype=dtype)
        else:  # dense weight
            data = tc.he_uniform(shape, shape[0], rng, dtype=dtype)
        params.add(name, tc.Tensor(data, requires_grad=True))
    return Model(config, params)


def forward(model, encoded, agent_positions):
    """Run the network on an encoded state/goal tensor.

    Returns (policy, value): policy is a probability vector over actions in
    dual mode and None in single mode; value is a 1-vector tensor holding the
    raw cost-to-go estimate.
    """
    cfg = model.config
    x = encoded if isinstance(encoded, tc.Tensor) else tc.constant(encoded)
    if x.data.ndim != 3 or x.shape[2] != cfg.input_channels:
        raise ConfigError(f"encoded state has shape {x.shape}, expected h*w*{cfg.input_channels}")
    if x.dtype != model.dtype:
        x = tc.constant(x.data.astype(model.dtype))
    positions = list(agent_positions)
    if len(positions) != cfg.agent_slots:
        raise ContractError(f"expected {cfg.agent_slots} agent position(s), got {len(positions)}")
    h, w, _ = x.shape
    for r, c in positions:
        if not (0 <= r < h and 0 <= c < w):
            raise ContractError(f"agent position ({r}, {c}) outside {h}x{w} grid")

    t = x
    for i in range(cfg.preconv_layers):
        t = conv_relu_skip(t, model.params[f"preconv.{i}.kernel"], model.params[f"preconv.{i}.bias"])

    parts = []
    for branch in cfg.branches:
        zb = t
        for blk in model._blocks[branch]:
            zb = coat_block(zb, blk)
        for pos in positions:
            parts.append(tc.gather_position(zb, pos))
    flat = parts[0] if len(parts) == 1 else tc.concat(parts, axis=0)

    hidden = tc.dense(flat, model.params["fc1.weight"], model.params["fc1.bias"], "relu")
    value = tc.dense(hidden, model.params["fc2_h.weight"], model.params["fc2_h.bias"], "identity")
    policy = None
    if cfg.head_mode == "dual":
        policy = tc.dense(hidden, model.params["fc2_a.weight"], model.params["fc2_a.bias"], "softmax")
    return policy, value


def heuristic_value(model, state):
    """Nonnegative cost-to-go estimate for a domain state.

    The state is encoded together with its canonical goal state, run through
    the network without recording gradients, and the raw value output is
    clamped at zero.
    """
    from . import domains

    goal_state = domains.canonical_goal_state(state)
    encoded, agent_positions = domains.encode_pair(state, goal_state)
    if encoded.shape[2] != model.config.input_channels:
        raise ConfigError(
            f"domain encodes {encoded.shape[2]} channels but model expects {model.config.input_channels}")
    with tc.no_grad():
        _, value = forward(model, encoded, agent_positions)
    return max(0.0, value.item())
