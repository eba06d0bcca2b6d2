"""Convert a LeNet checkpoint into spoofkit's SPWT weight format.

The builtin engine stores dense weights as (in, out), torch as (out, in),
so linear tensors are transposed on the way out. Conv tensors share the
(out_ch, in_ch, k, k) layout and cross-correlation semantics, and both
engines flatten (C, H, W) in C order, so everything else copies verbatim.
"""

from typing import Dict, Mapping

import numpy as np
import spoofkit
import torch

from .errors import ExportError

# builtin tensor name -> (checkpoint key, transpose)
_EXPORT_MAP = {
    "layer0.weight": ("features.0.weight", False),
    "layer0.bias": ("features.0.bias", False),
    "layer3.weight": ("features.3.weight", False),
    "layer3.bias": ("features.3.bias", False),
    "layer7.weight": ("classifier.1.weight", True),
    "layer7.bias": ("classifier.1.bias", False),
    "layer9.weight": ("classifier.3.weight", True),
    "layer9.bias": ("classifier.3.bias", False),
    "layer11.weight": ("classifier.5.weight", True),
    "layer11.bias": ("classifier.5.bias", False),
}


def state_dict_to_builtin(state: Mapping[str, torch.Tensor]) -> Dict[str, np.ndarray]:
    converted: Dict[str, np.ndarray] = {}
    for name, (key, transpose) in _EXPORT_MAP.items():
        if key not in state:
            raise ExportError(f"checkpoint is missing tensor {key!r}")
        arr = state[key].detach().cpu().numpy().astype(np.float32)
        converted[name] = arr.T if transpose else arr
    try:
        spoofkit.check_weights(spoofkit.lenet_spec(), converted)
    except Exception as exc:
        raise ExportError(f"checkpoint does not fit the builtin layout: {exc}") from exc
    return converted


def export_lenet_weights(model: torch.nn.Module, path) -> Dict[str, np.ndarray]:
    """Write the model as an SPWT file loadable by the builtin engine."""
    converted = state_dict_to_builtin(model.state_dict())
    spoofkit.save_weights(converted, path)
    return converted
