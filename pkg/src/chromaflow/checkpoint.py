"""Checkpointing: one .npz file holding every named parameter array of both
networks plus JSON metadata (configs, completed training stages, encoder seed,
format version)."""

import dataclasses
import json

import numpy as np
import torch

from .errors import ConfigurationError
from .nets.cpnet import ColorPropNet, CpnetConfig, init_cpnet
from .nets.ssnet import SsnetConfig, TemporalSmoother, init_ssnet

FORMAT_VERSION = 1


@dataclasses.dataclass
class ModelState:
    """Everything learnable plus the frozen encoder and stage bookkeeping."""

    colorizer: ColorPropNet
    smoother: TemporalSmoother
    stages_completed: list = dataclasses.field(default_factory=list)

    @property
    def encoder(self):
        return self.colorizer.semantic

    @property
    def cpnet_config(self) -> CpnetConfig:
        return self.colorizer.config

    @property
    def ssnet_config(self) -> SsnetConfig:
        return self.smoother.config

    def eval(self):
        self.colorizer.eval()
        self.smoother.eval()
        return self


def init_model_state(cpnet_config=None, ssnet_config=None, seed=0) -> ModelState:
    cpnet_config = cpnet_config or CpnetConfig()
    ssnet_config = ssnet_config or SsnetConfig()
    colorizer = init_cpnet(cpnet_config, seed=seed)
    smoother = init_ssnet(ssnet_config, seed=seed + 1)
    return ModelState(colorizer=colorizer, smoother=smoother)


def save_checkpoint(state: ModelState, path):
    arrays = {}
    for prefix, module in (("colorizer", state.colorizer), ("smoother", state.smoother)):
        for name, tensor in module.state_dict().items():
            arrays[f"{prefix}/{name}"] = tensor.detach().cpu().numpy()
    meta = {
        "format_version": FORMAT_VERSION,
        "cpnet_config": dataclasses.asdict(state.cpnet_config),
        "ssnet_config": dataclasses.asdict(state.ssnet_config),
        "stages_completed": list(state.stages_completed),
        "encoder_seed": state.encoder.seed,
    }
    arrays["__meta__"] = np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8)
    np.savez(path, **arrays)


def load_checkpoint(path) -> ModelState:
    with np.load(path) as data:
        if "__meta__" not in data:
            raise ConfigurationError(f"{path}: missing checkpoint metadata")
        meta = json.loads(bytes(data["__meta__"]).decode("utf-8"))
        if meta.get("format_version") != FORMAT_VERSION:
            raise ConfigurationError(
                f"{path}: unsupported checkpoint format version {meta.get('format_version')}"
            )
        cp_cfg = CpnetConfig(**meta["cpnet_config"])
        ss_cfg = SsnetConfig(**meta["ssnet_config"])
        state = init_model_state(cp_cfg, ss_cfg)
        state.stages_completed = list(meta["stages_completed"])
        for prefix, module in (("colorizer", state.colorizer), ("smoother", state.smoother)):
            sd = {
                name[len(prefix) + 1 :]: torch.from_numpy(data[name])
                for name in data.files
                if name.startswith(prefix + "/")
            }
            module.load_state_dict(sd)
    return state
