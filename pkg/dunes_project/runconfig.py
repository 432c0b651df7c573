"""
Run configuration files

INI text with the sections in SECTIONS; every section is validated by its
serializer, and unknown sections or keys are rejected. `--set section.key=value`
overrides are applied to the raw text before validation.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

from django.conf import settings
from rest_framework import serializers

from analysis.experiments import SweepPlan
from analysis.reports import config_digest
from coefficients.coefficient_set import CoefficientSet
from coefficients.expressions import compile_expression
from coefficients.laws import BUILTIN_LAWS, get_laws
from coefficients.velocity import (
    SAMPLER_VARIABLES, CustomVelocity, ShearSine, TidalPiecewise, UniformVelocity, WaterHeight,
)
from limit_solver.system import GaugeSpec
from reference_solver.integrator import IntegratorConfig
from reference_solver.solver import Constant, CosineCombo, SampledInitial, WellPrepared
from spectral.fields import GridSpec
from .exceptions import ConfigError, DunesError

INITIAL_VARIABLES = ('x1', 'x2')


def _dunes(key):
    return lambda: settings.DUNES[key]


class FloatListField(serializers.Field):
    default_error_messages = {'invalid': 'Expected a comma-separated list of numbers.'}
    item = float

    def to_internal_value(self, data):
        items = data if isinstance(data, (list, tuple)) else str(data).replace(',', ' ').split()
        try:
            return [self.item(value) for value in items]
        except (TypeError, ValueError):
            self.fail('invalid')

    def to_representation(self, value):
        return ', '.join(repr(self.item(v)) for v in value)


class IntListField(FloatListField):
    default_error_messages = {'invalid': 'Expected a comma-separated list of integers.'}
    item = int


def _check_expression(text, variables):
    try:
        compile_expression(text, variables)
    except ConfigError as exc:
        raise serializers.ValidationError(str(exc))


class VelocitySerializer(serializers.Serializer):
    variant = serializers.ChoiceField(choices=['shear_sine', 'tidal_piecewise', 'uniform', 'custom'], default='shear_sine')
    u_thr = serializers.FloatField(default=1.0, min_value=0.0)
    u1 = serializers.CharField(default='', allow_blank=True)
    u2 = serializers.CharField(default='', allow_blank=True)

    def validate(self, attrs):
        variant = attrs['variant']
        if variant == 'tidal_piecewise' and not attrs['u_thr'] > 0:
            raise serializers.ValidationError({'u_thr': 'The tidal velocity needs a positive threshold.'})
        if variant == 'uniform':
            for key in ('u1', 'u2'):
                if attrs[key]:
                    try:
                        float(attrs[key])
                    except ValueError:
                        raise serializers.ValidationError({key: 'A uniform velocity component must be a number.'})
        if variant == 'custom':
            for key in ('u1', 'u2'):
                if not attrs[key]:
                    raise serializers.ValidationError({key: 'A custom velocity needs both component expressions.'})
                _check_expression(attrs[key], SAMPLER_VARIABLES)
        return attrs


class LawsSerializer(serializers.Serializer):
    name = serializers.ChoiceField(choices=sorted(BUILTIN_LAWS), default='cubic')
    a = serializers.FloatField(default=1.0)
    b = serializers.FloatField(default=0.0)
    c = serializers.FloatField(default=1.0)

    def validate(self, attrs):
        try:
            get_laws(**attrs)
        except DunesError as exc:
            raise serializers.ValidationError(str(exc))
        return attrs


class WaterHeightSerializer(serializers.Serializer):
    variant = serializers.ChoiceField(choices=['zero', 'constant'], default='zero')
    value = serializers.FloatField(default=0.0)


class SolverSerializer(serializers.Serializer):
    epsilon = serializers.FloatField(default=0.01)
    order = serializers.IntegerField(default=4, min_value=0)
    n_quad = serializers.IntegerField(default=_dunes('N_QUAD'), min_value=0)
    grid_n = serializers.IntegerField(default=_dunes('GRID_N'), min_value=2)
    T = serializers.FloatField(default=1.0)
    output_times = FloatListField(default=list)
    rtol = serializers.FloatField(default=_dunes('RTOL'))
    atol = serializers.FloatField(default=_dunes('ATOL'))
    max_steps = serializers.IntegerField(default=_dunes('MAX_STEPS'), min_value=1)

    def validate_epsilon(self, value):
        if not value > 0:
            raise serializers.ValidationError('epsilon must be positive.')
        return value

    def validate_T(self, value):
        if not value > 0:
            raise serializers.ValidationError('Final time T must be positive.')
        return value

    def validate_grid_n(self, value):
        try:
            GridSpec(value)
        except DunesError as exc:
            raise serializers.ValidationError(str(exc))
        return value

    def validate(self, attrs):
        if not (attrs['rtol'] > 0 and attrs['atol'] > 0):
            raise serializers.ValidationError('Integrator tolerances must be positive.')
        if attrs['n_quad'] and attrs['n_quad'] < 4 * attrs['order'] + 2:
            raise serializers.ValidationError({'n_quad': f'Need at least {4 * attrs["order"] + 2} samples for order {attrs["order"]}.'})
        if any(not 0 <= t <= attrs['T'] for t in attrs['output_times']):
            raise serializers.ValidationError({'output_times': 'Output times must lie in [0, T].'})
        return attrs


class InitialSerializer(serializers.Serializer):
    z0 = serializers.ChoiceField(choices=['cosine_combo', 'constant', 'well_prepared', 'expression'], default='cosine_combo')
    harmonics = IntListField(default=lambda: [1, 2])
    value = serializers.FloatField(default=0.0)
    expression = serializers.CharField(default='', allow_blank=True)

    def validate(self, attrs):
        if attrs['z0'] == 'expression':
            if not attrs['expression']:
                raise serializers.ValidationError({'expression': 'An expression initial condition needs an expression.'})
            _check_expression(attrs['expression'], INITIAL_VARIABLES)
        return attrs


class GaugeSerializer(serializers.Serializer):
    mode = serializers.ChoiceField(choices=['mean_of_z0', 'explicit'], default='mean_of_z0')
    value = serializers.FloatField(default=0.0)


class SweepSerializer(serializers.Serializer):
    epsilons = FloatListField(default=list)
    orders = IntListField(default=list)
    times = FloatListField(default=list)
    workers = serializers.IntegerField(default=_dunes('SWEEP_WORKERS'), min_value=1)

    def validate_epsilons(self, value):
        if any(not epsilon > 0 for epsilon in value):
            raise serializers.ValidationError('Sweep epsilons must be positive.')
        return value

    def validate_orders(self, value):
        if any(order < 0 for order in value):
            raise serializers.ValidationError('Sweep orders must be non-negative.')
        return value

    def validate_times(self, value):
        if any(t < 0 for t in value):
            raise serializers.ValidationError('Sweep times must be non-negative.')
        return value


class AcceptanceSerializer(serializers.Serializer):
    max_l2 = serializers.FloatField(default=None, allow_null=True, min_value=0.0)
    max_linf = serializers.FloatField(default=None, allow_null=True, min_value=0.0)
    oracle_rel_l2 = serializers.FloatField(default=0.03, min_value=0.0)


class OutputSerializer(serializers.Serializer):
    directory = serializers.CharField(default=_dunes('OUTPUT_DIR'))


SECTIONS = {
    'velocity': VelocitySerializer,
    'laws': LawsSerializer,
    'water_height': WaterHeightSerializer,
    'solver': SolverSerializer,
    'initial': InitialSerializer,
    'gauge': GaugeSerializer,
    'sweep': SweepSerializer,
    'acceptance': AcceptanceSerializer,
    'output': OutputSerializer,
}


def _flatten(errors, prefix=''):
    if isinstance(errors, dict):
        for key, value in errors.items():
            name = prefix if key == 'non_field_errors' else f'{prefix}.{key}' if prefix else key
            yield from _flatten(value, name)
    elif isinstance(errors, (list, tuple)):
        for value in errors:
            yield from _flatten(value, prefix)
    else:
        yield f'{prefix}: {errors}'


def _apply_override(parser, override):
    key, sep, value = override.partition('=')
    section, dot, option = key.strip().partition('.')
    if not sep or not dot or not section or not option:
        raise ConfigError(f'override {override!r} must look like section.key=value')
    if not parser.has_section(section):
        parser.add_section(section)
    parser.set(section, option, value.strip())


@dataclass(frozen=True)
class RunConfig:
    sections: dict

    @classmethod
    def parse(cls, text, overrides=()):
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f'cannot parse run configuration: {exc}')
        for override in overrides:
            _apply_override(parser, override)

        unknown = sorted(set(parser.sections()) - set(SECTIONS))
        if unknown:
            raise ConfigError(f'unknown configuration sections: {", ".join(unknown)}', {name: ['unknown section'] for name in unknown})

        errors, sections = {}, {}
        for name, serializer_class in SECTIONS.items():
            data = dict(parser.items(name)) if parser.has_section(name) else {}
            extra = sorted(set(data) - set(serializer_class().fields))
            if extra:
                errors[name] = {key: ['unknown key'] for key in extra}
                continue
            serializer = serializer_class(data=data)
            if serializer.is_valid():
                sections[name] = dict(serializer.validated_data)
            else:
                errors[name] = serializer.errors
        if errors:
            raise ConfigError('invalid run configuration: ' + '; '.join(_flatten(errors)), errors)
        return cls(sections)

    @classmethod
    def load(cls, path, overrides=()):
        try:
            text = Path(path).read_text(encoding='utf-8')
        except OSError as exc:
            raise ConfigError(f'cannot read run configuration {path}: {exc}')
        return cls.parse(text, overrides)

    @classmethod
    def defaults(cls, overrides=()):
        return cls.parse('', overrides)

    def __getitem__(self, name):
        return self.sections[name]

    def to_ini(self):
        """
        Normalized text; parsing it back gives an equal RunConfig
        """
        blocks = []
        for name, serializer_class in SECTIONS.items():
            data = serializer_class(instance=self.sections[name]).data
            lines = [f'[{name}]']
            lines.extend(f'{key} = {value}' for key, value in data.items() if value is not None)
            blocks.append('\n'.join(lines))
        return '\n\n'.join(blocks) + '\n'

    @cached_property
    def digest(self):
        return config_digest(self.to_ini())

    # solver inputs

    @property
    def epsilon(self):
        return self['solver']['epsilon']

    @property
    def order(self):
        return self['solver']['order']

    @property
    def n_quad(self):
        return self['solver']['n_quad'] or None

    @property
    def grid_n(self):
        return self['solver']['grid_n']

    @property
    def output_dir(self):
        return Path(self['output']['directory'])

    def velocity(self):
        section = self['velocity']
        variant, u_thr = section['variant'], section['u_thr']
        if variant == 'shear_sine':
            return ShearSine(u_thr)
        if variant == 'tidal_piecewise':
            return TidalPiecewise(u_thr)
        if variant == 'uniform':
            return UniformVelocity(float(section['u1'] or 1.0), float(section['u2'] or 0.0), u_thr)
        return CustomVelocity.from_expressions(section['u1'], section['u2'], u_thr)

    def height(self):
        section = self['water_height']
        if section['variant'] == 'constant':
            return WaterHeight.constant(section['value'])
        return WaterHeight.zero()

    @cached_property
    def coefficients(self):
        return CoefficientSet(self.velocity(), get_laws(**self['laws']), self.height())

    def gauge(self):
        """
        Explicit gauge, or None to take the mean of the projected z0
        """
        section = self['gauge']
        return GaugeSpec(section['value']) if section['mode'] == 'explicit' else None

    def initial(self):
        section = self['initial']
        kind = section['z0']
        if kind == 'cosine_combo':
            return CosineCombo(tuple(section['harmonics']))
        if kind == 'constant':
            return Constant(section['value'])
        if kind == 'well_prepared':
            return WellPrepared(self.coefficients, GaugeSpec(self['gauge']['value']), self.n_quad)
        return SampledInitial(compile_expression(section['expression'], INITIAL_VARIABLES), self.n_quad)

    def integrator(self):
        solver = self['solver']
        return IntegratorConfig(rtol=solver['rtol'], atol=solver['atol'], max_steps=solver['max_steps'])

    def sweep_plan(self, output=None, workers=None):
        sweep, solver = self['sweep'], self['solver']
        return SweepPlan(
            coefficients=self.coefficients,
            epsilons=sweep['epsilons'] or [solver['epsilon']],
            orders=sweep['orders'] or [solver['order']],
            times=sweep['times'] or [solver['T']],
            z0=self.initial(),
            gauge=self.gauge(),
            grid_n=self.grid_n,
            integrator=self.integrator(),
            n_quad=self.n_quad,
            workers=workers or sweep['workers'],
            output=output,
            metadata={'config_digest': self.digest},
        )
