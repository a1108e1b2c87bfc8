"""
Checkpoint format (version 1), a numpy ``.npz`` archive:

    format_version   int, currently 1
    architecture     JSON list of layer descriptors (kind, input_shape, output_shape, config)
    p{i}_{name}      parameter array ``name`` of layer i
    m{i}_{name}      Adam first moment for the same array
    v{i}_{name}      Adam second moment
    adam_t           Adam step counter
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Union

import numpy as np

from adazeroLab.exceptions import ContractViolation, HarnessError

from .layers import layer_from_descriptor
from .network import ParamSet

FORMAT_VERSION = 1


def save_checkpoint(params: ParamSet, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arrays: dict[str, np.ndarray] = {
        'format_version': np.array(FORMAT_VERSION),
        'architecture': np.array(json.dumps([layer.describe() for layer in params.layers])),
        'adam_t': np.array(params.adam.t),
    }
    for index, name, value in params.parameters():
        arrays[f'p{index}_{name}'] = value
        arrays[f'm{index}_{name}'] = params.adam.m[index][name]
        arrays[f'v{index}_{name}'] = params.adam.v[index][name]
    with path.open('wb') as handle:
        np.savez(handle, **arrays)
    return path


def load_checkpoint(path: Union[str, Path]) -> ParamSet:
    path = Path(path)
    if not path.exists():
        raise HarnessError(f"checkpoint {path} does not exist")
    with np.load(path, allow_pickle=False) as archive:
        version = int(archive['format_version'])
        if version != FORMAT_VERSION:
            raise ContractViolation(f"unsupported checkpoint version {version} in {path}")
        descriptors = json.loads(str(archive['architecture']))
        params = ParamSet([layer_from_descriptor(d) for d in descriptors])
        params.adam.t = int(archive['adam_t'])
        for index, name, value in params.parameters():
            stored = archive[f'p{index}_{name}']
            if stored.shape != value.shape:
                raise ContractViolation(f"{path}: layer {index} {name} has shape {stored.shape}, expected {value.shape}")
            value[...] = stored
            params.adam.m[index][name][...] = archive[f'm{index}_{name}']
            params.adam.v[index][name][...] = archive[f'v{index}_{name}']
    return params
