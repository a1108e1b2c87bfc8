"""
Run configuration: a TOML file with ``[run]``, ``[env]``, ``[ppo]``,
``[autoencoder]``, ``[evaluator]`` and ``[adam]`` sections, validated with
strict serializers (unknown keys anywhere are an error) into a frozen
``RunConfig``. The same serializers re-validate the JSON config echo a run
writes, so ``config.json`` can be fed back to ``train``.
"""

from __future__ import annotations

import hashlib
import json
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Optional, Union

from django.conf import settings
from rest_framework import serializers

from adazeroLab.exceptions import HarnessError
from envs.grids import BUILTIN_GRIDS, GridSpec, dark_chamber, four_rooms
from envs.serializers import StrictSerializer, load_grid_spec

# Forced mastery per variant; None means α comes from the evaluator.
VARIANTS = {
    'adazero': None,
    'no_adaptive': 0.0,
    'no_intrinsic': 1.0,
}


class FilterListField(serializers.ListField):
    def __init__(self, **kwargs):
        kwargs.setdefault('default', [8, 16])
        super().__init__(child=serializers.IntegerField(min_value=1), min_length=1, **kwargs)


class RunSectionSerializer(StrictSerializer):
    name = serializers.CharField(default='adazero')
    variant = serializers.ChoiceField(choices=sorted(VARIANTS), default='adazero')
    seeds = serializers.ListField(child=serializers.IntegerField(min_value=0), min_length=1, default=[0])
    total_steps = serializers.IntegerField(min_value=1)
    output_dir = serializers.CharField(required=False, allow_null=True, default=None)
    checkpoint_every = serializers.IntegerField(min_value=0, required=False, allow_null=True, default=None)
    density_every = serializers.IntegerField(min_value=1, default=10)
    alignment_window = serializers.IntegerField(min_value=1, required=False, allow_null=True, default=None)


class EnvSectionSerializer(StrictSerializer):
    """Built-in grid by name, or ``custom`` with a ``grid_file`` holding a [grid] section."""

    name = serializers.ChoiceField(choices=sorted(BUILTIN_GRIDS) + ['custom'])
    size = serializers.IntegerField(min_value=2, default=50)
    max_episode_steps = serializers.IntegerField(min_value=1, required=False, allow_null=True, default=None)
    goal_reward = serializers.FloatField(min_value=0.0, default=1.0)
    grid_file = serializers.CharField(required=False, allow_null=True, default=None)

    def validate(self, attrs):
        if attrs['name'] == 'custom' and not attrs.get('grid_file'):
            raise serializers.ValidationError({'grid_file': ['Required for a custom grid.']})
        return attrs


class PPOSectionSerializer(StrictSerializer):
    gamma = serializers.FloatField(min_value=0.0, max_value=0.999999, default=0.99)
    lam = serializers.FloatField(min_value=0.0, max_value=1.0, default=0.95)
    clip_eps = serializers.FloatField(min_value=0.0, default=0.2)
    epochs = serializers.IntegerField(min_value=1, default=4)
    minibatch = serializers.IntegerField(min_value=1, default=64)
    horizon = serializers.IntegerField(min_value=1, default=2048)
    value_coef = serializers.FloatField(min_value=0.0, default=0.5)
    entropy_coef = serializers.FloatField(min_value=0.0, default=0.0)
    max_grad_norm = serializers.FloatField(min_value=0.0, default=0.5)
    lr = serializers.FloatField(min_value=0.0, required=False, allow_null=True, default=None)
    conv_filters = FilterListField()
    hidden = serializers.IntegerField(min_value=1, default=64)


class AutoencoderSectionSerializer(StrictSerializer):
    conv_filters = FilterListField()
    bottleneck = serializers.IntegerField(min_value=1, default=64)
    lr = serializers.FloatField(min_value=0.0, required=False, allow_null=True, default=None)
    updates_per_rollout = serializers.IntegerField(min_value=1, default=1)
    batch_size = serializers.IntegerField(min_value=1, default=256)
    normalize_intrinsic = serializers.BooleanField(default=False)
    dump_pairs = serializers.IntegerField(min_value=0, default=0)


class EvaluatorSectionSerializer(StrictSerializer):
    conv_filters = FilterListField()
    lr = serializers.FloatField(min_value=0.0, required=False, allow_null=True, default=None)
    lr_half_life = serializers.FloatField(min_value=0.0, required=False, allow_null=True, default=None)
    updates_per_rollout = serializers.IntegerField(min_value=1, default=1)
    batch_size = serializers.IntegerField(min_value=1, default=256)


class AdamSectionSerializer(StrictSerializer):
    lr = serializers.FloatField(min_value=0.0, required=False, allow_null=True, default=None)
    beta1 = serializers.FloatField(min_value=0.0, max_value=0.999999, required=False, allow_null=True, default=None)
    beta2 = serializers.FloatField(min_value=0.0, max_value=0.999999999, required=False, allow_null=True, default=None)
    eps = serializers.FloatField(min_value=0.0, required=False, allow_null=True, default=None)


class RunConfigSerializer(StrictSerializer):
    run = RunSectionSerializer()
    env = EnvSectionSerializer()
    ppo = PPOSectionSerializer(default=dict)
    autoencoder = AutoencoderSectionSerializer(default=dict)
    evaluator = EvaluatorSectionSerializer(default=dict)
    adam = AdamSectionSerializer(default=dict)

    def to_internal_value(self, data):
        # Absent optional sections still go through their serializer so defaults apply.
        if isinstance(data, dict):
            data = dict(data)
            for section in ('ppo', 'autoencoder', 'evaluator', 'adam'):
                data.setdefault(section, {})
        return super().to_internal_value(data)

    def create(self, validated_data):
        return RunConfig.from_validated(validated_data)


@dataclass(frozen=True)
class RunSection:
    name: str
    variant: str
    seeds: tuple[int, ...]
    total_steps: int
    output_dir: Optional[str]
    checkpoint_every: int
    density_every: int
    alignment_window: int

    @property
    def forced_alpha(self) -> Optional[float]:
        return VARIANTS[self.variant]


@dataclass(frozen=True)
class EnvSection:
    name: str
    size: int
    max_episode_steps: Optional[int]
    goal_reward: float
    grid_file: Optional[str]

    def build_spec(self) -> GridSpec:
        if self.name == 'dark_chamber':
            return dark_chamber(self.size, **self._limit())
        if self.name == 'four_rooms':
            return four_rooms(goal_reward=self.goal_reward, **self._limit())
        spec = load_grid_spec(self.grid_file)
        if self.max_episode_steps is not None:
            spec = replace(spec, max_episode_steps=self.max_episode_steps)
        return spec

    def _limit(self) -> dict:
        return {} if self.max_episode_steps is None else {'max_episode_steps': self.max_episode_steps}


@dataclass(frozen=True)
class PPOSection:
    gamma: float
    lam: float
    clip_eps: float
    epochs: int
    minibatch: int
    horizon: int
    value_coef: float
    entropy_coef: float
    max_grad_norm: float
    lr: float
    conv_filters: tuple[int, ...]
    hidden: int


@dataclass(frozen=True)
class AutoencoderSection:
    conv_filters: tuple[int, ...]
    bottleneck: int
    lr: float
    updates_per_rollout: int
    batch_size: int
    normalize_intrinsic: bool
    dump_pairs: int


@dataclass(frozen=True)
class EvaluatorSection:
    conv_filters: tuple[int, ...]
    lr: float
    lr_half_life: float
    updates_per_rollout: int
    batch_size: int


@dataclass(frozen=True)
class AdamSection:
    lr: float
    beta1: float
    beta2: float
    eps: float


@dataclass(frozen=True)
class RunConfig:
    run: RunSection
    env: EnvSection
    ppo: PPOSection
    autoencoder: AutoencoderSection
    evaluator: EvaluatorSection
    adam: AdamSection

    @classmethod
    def from_validated(cls, data: dict) -> 'RunConfig':
        """Fills project defaults from settings for anything left unset."""
        adam = {k: v if v is not None else settings.ADAZERO_ADAM[k] for k, v in data['adam'].items()}
        run = dict(data['run'])
        run['seeds'] = tuple(run['seeds'])
        if run['checkpoint_every'] is None:
            run['checkpoint_every'] = settings.ADAZERO_CHECKPOINT_EVERY
        if run['alignment_window'] is None:
            run['alignment_window'] = settings.ADAZERO_ALIGNMENT_WINDOW

        def section(values: dict) -> dict:
            values = dict(values)
            if 'conv_filters' in values:
                values['conv_filters'] = tuple(values['conv_filters'])
            if 'lr' in values and values['lr'] is None:
                values['lr'] = adam['lr']
            return values

        evaluator = dict(data['evaluator'])
        # the evaluator keeps its own schedule unless the config pins one
        for key, fallback in (('lr', 'lr'), ('lr_half_life', 'half_life')):
            if evaluator.get(key) is None:
                evaluator[key] = settings.ADAZERO_EVALUATOR_ADAM[fallback]

        return cls(
            run=RunSection(**run),
            env=EnvSection(**data['env']),
            ppo=PPOSection(**section(data['ppo'])),
            autoencoder=AutoencoderSection(**section(data['autoencoder'])),
            evaluator=EvaluatorSection(**section(evaluator)),
            adam=AdamSection(**adam),
        )

    def to_dict(self) -> dict:
        data = asdict(self)
        data['run']['seeds'] = list(self.run.seeds)
        for name in ('ppo', 'autoencoder', 'evaluator'):
            data[name]['conv_filters'] = list(data[name]['conv_filters'])
        return data

    @property
    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(canonical.encode()).hexdigest()

    def output_root(self) -> Path:
        root = Path(self.run.output_dir) if self.run.output_dir else Path(settings.ADAZERO_OUTPUT_ROOT)
        return root / self.run.name


def parse_run_config(document: dict) -> RunConfig:
    serializer = RunConfigSerializer(data=document)
    serializer.is_valid(raise_exception=True)
    return serializer.save()


def load_run_config(path: Union[str, Path]) -> RunConfig:
    """Reads a TOML run config, or the ``config.json`` echo of an earlier run."""
    path = Path(path)
    if not path.exists():
        raise HarnessError(f"run config {path} does not exist")
    if path.suffix == '.json':
        document = json.loads(path.read_text())
    else:
        with path.open('rb') as handle:
            document = tomllib.load(handle)
    env = document.get('env')
    if isinstance(env, dict) and env.get('grid_file') and not Path(env['grid_file']).is_absolute():
        # relative to the config file, not the working directory
        env['grid_file'] = str((path.parent / env['grid_file']).resolve())
    return parse_run_config(document)
