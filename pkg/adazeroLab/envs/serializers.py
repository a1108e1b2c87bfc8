from __future__ import annotations

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Union

from rest_framework import serializers

from adazeroLab.exceptions import ContractViolation, HarnessError

from .grids import GridSpec, parse_layout


class StrictSerializer(serializers.Serializer):
    """Serializer that rejects keys it does not declare."""

    def to_internal_value(self, data):
        if isinstance(data, dict):
            unknown = sorted(set(data) - set(self.fields))
            if unknown:
                raise serializers.ValidationError({key: ['Unknown key.'] for key in unknown})
        return super().to_internal_value(data)


class CellField(serializers.ListField):
    def __init__(self, **kwargs):
        super().__init__(child=serializers.IntegerField(min_value=0), min_length=2, max_length=2, **kwargs)


class GridSpecSerializer(StrictSerializer):
    """
    ``[grid]`` section of a grid config. Either give ``layout`` (ASCII rows,
    '#' wall, 'S' start, 'G' goal) or ``height``/``width``/``start``.
    """

    name = serializers.CharField(default='custom')
    layout = serializers.CharField(required=False, trim_whitespace=False)
    height = serializers.IntegerField(min_value=1, required=False)
    width = serializers.IntegerField(min_value=1, required=False)
    start = CellField(required=False)
    goal = CellField(required=False, allow_null=True)
    goal_reward = serializers.FloatField(min_value=0.0, default=1.0)
    max_episode_steps = serializers.IntegerField(min_value=1, default=300)

    def validate(self, attrs):
        if 'layout' in attrs:
            height, width, walls, start, goal = parse_layout(attrs['layout'].splitlines())
            attrs.setdefault('height', height)
            attrs.setdefault('width', width)
            if start is not None:
                attrs.setdefault('start', list(start))
            if goal is not None:
                attrs.setdefault('goal', list(goal))
            attrs['walls'] = walls
            if (attrs['height'], attrs['width']) != (height, width):
                raise serializers.ValidationError('height/width disagree with the layout.')
        for key in ('height', 'width', 'start'):
            if key not in attrs:
                raise serializers.ValidationError({key: ['Required when no layout with that information is given.']})
        return attrs

    def create(self, validated_data):
        try:
            return GridSpec(
                name=validated_data['name'],
                height=validated_data['height'],
                width=validated_data['width'],
                start=tuple(validated_data['start']),
                walls=validated_data.get('walls', frozenset()),
                goal=tuple(validated_data['goal']) if validated_data.get('goal') else None,
                goal_reward=validated_data['goal_reward'],
                max_episode_steps=validated_data['max_episode_steps'],
            )
        except ContractViolation as exc:
            raise serializers.ValidationError(str(exc)) from exc


def load_grid_spec(path: Union[str, Path]) -> GridSpec:
    path = Path(path)
    if not path.exists():
        raise HarnessError(f"grid config {path} does not exist")
    with path.open('rb') as handle:
        document = tomllib.load(handle)
    if set(document) != {'grid'}:
        raise serializers.ValidationError({'sections': ['A grid config has exactly one [grid] section.']})
    serializer = GridSpecSerializer(data=document['grid'])
    serializer.is_valid(raise_exception=True)
    return serializer.save()
