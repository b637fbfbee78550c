"""
Config validation. One form per YAML section; validate_config runs all of
them and reports every violation at once.
"""
import itertools
import logging
import math

from django import forms

from evaluation.convergence import ESTIMATE_MODES
from inhibition.schedules import SCHEDULE_KINDS
from lattice_snn.exceptions import ConfigValidationError
from network.architecture import ArchitectureKind
from readout.schemes import Scheme

logger = logging.getLogger(__name__)

NGRAM_MODES = [
    ('represent', 'Re-present the labelling subset with frozen weights'),
    ('online', 'Fold the final training records in as they happen'),
]

DATA_KINDS = [
    ('mnist', 'MNIST IDX files'),
    ('frames', 'Manifest of grayscale frames'),
]

MNIST_INPUTS = 28 * 28


class ListField(forms.Field):
    """A YAML list, optionally with a type applied to each item."""

    def __init__(self, item_type=str, min_length=0, **kwargs):
        self.item_type = item_type
        self.min_length = min_length
        super().__init__(**kwargs)

    def to_python(self, value):
        if value in self.empty_values:
            return []
        if not isinstance(value, (list, tuple)):
            value = [value]
        try:
            return [self.item_type(v) for v in value]
        except (TypeError, ValueError):
            raise forms.ValidationError(f"expected a list of {self.item_type.__name__}")

    def validate(self, value):
        super().validate(value)
        if len(value) < self.min_length:
            raise forms.ValidationError(f"needs at least {self.min_length} item(s)")


class NeuronForm(forms.Form):
    v_rest = forms.FloatField()
    v_reset = forms.FloatField()
    v_thresh_base = forms.FloatField()
    tau_v = forms.FloatField(min_value=1e-9)
    e_exc = forms.FloatField()
    e_inh = forms.FloatField()
    tau_ge = forms.FloatField(min_value=1e-9)
    tau_gi = forms.FloatField(min_value=1e-9)
    refractory = forms.FloatField(min_value=0.0)

    def clean(self):
        cleaned = super().clean()
        reset, thresh = cleaned.get('v_reset'), cleaned.get('v_thresh_base')
        if reset is not None and thresh is not None and reset > thresh:
            self.add_error('v_reset', 'must not exceed v_thresh_base')
        return cleaned


class ExcitatoryForm(NeuronForm):
    theta_plus = forms.FloatField(min_value=0.0)
    tau_theta = forms.FloatField(min_value=1e-9)
    theta_enabled = forms.BooleanField(required=False)


class StdpForm(forms.Form):
    eta_pre = forms.FloatField(min_value=0.0)
    eta_post = forms.FloatField(min_value=0.0)
    w_max = forms.FloatField(min_value=1e-9)
    tau_trace = forms.FloatField(min_value=1e-9)


class InhibitionForm(forms.Form):
    kind = forms.ChoiceField(choices=SCHEDULE_KINDS)
    c_inhib = forms.FloatField(min_value=0.0)
    c_min = forms.FloatField(min_value=0.0)
    c_max = forms.FloatField(min_value=0.0)
    p_low = forms.FloatField(min_value=0.0, max_value=1.0)
    p_grow = forms.FloatField(min_value=0.0, max_value=1.0)
    n_low = forms.IntegerField(min_value=0, required=False)
    sqrt_distance = forms.BooleanField(required=False)

    def clean(self):
        cleaned = super().clean()
        c_min, c_max = cleaned.get('c_min'), cleaned.get('c_max')
        if c_min is not None and c_max is not None and c_min > c_max:
            self.add_error('c_min', 'must not exceed c_max')
        return cleaned


class EncodingForm(forms.Form):
    max_rate = forms.FloatField(min_value=0.0)
    duration = forms.FloatField(min_value=1e-9)
    dt = forms.FloatField(min_value=1e-9)
    min_spikes = forms.IntegerField(min_value=0)
    boost = forms.FloatField(min_value=0.0)
    max_retries = forms.IntegerField(min_value=0)

    def clean(self):
        cleaned = super().clean()
        fields = ('max_rate', 'dt', 'boost', 'max_retries')
        if all(cleaned.get(f) is not None for f in fields):
            peak = cleaned['max_rate'] + cleaned['boost'] * cleaned['max_retries']
            if peak * cleaned['dt'] / 1000.0 >= 1.0:
                self.add_error(
                    'max_rate',
                    f"boosted rate {peak:g} Hz at dt {cleaned['dt']:g} ms reaches spike probability 1",
                )
        return cleaned


class NetworkForm(forms.Form):
    kind = forms.ChoiceField(choices=ArchitectureKind.choices)
    n_neurons = forms.IntegerField(min_value=1)
    c_norm = forms.FloatField(min_value=1e-9)
    init_scale = forms.FloatField(min_value=1e-9)
    exc_to_inh_strength = forms.FloatField(min_value=0.0)
    sparsity = forms.FloatField(min_value=0.0, max_value=1.0)
    passes = forms.IntegerField(min_value=1)

    def clean_n_neurons(self):
        n = self.cleaned_data['n_neurons']
        if math.isqrt(n) ** 2 != n:
            raise forms.ValidationError(f"{n} is not a perfect square; the lattice must be side x side")
        return n


class ReadoutForm(forms.Form):
    schemes = forms.MultipleChoiceField(choices=Scheme.choices)
    ngram_n = forms.IntegerField(min_value=1)
    label_examples = forms.IntegerField(min_value=1)
    ngram_mode = forms.ChoiceField(choices=NGRAM_MODES)


class DataForm(forms.Form):
    kind = forms.ChoiceField(choices=DATA_KINDS)
    dir = forms.CharField(required=False)
    train_manifest = forms.CharField(required=False)
    test_manifest = forms.CharField(required=False)
    train_limit = forms.IntegerField(min_value=1, required=False)
    test_limit = forms.IntegerField(min_value=0, required=False)
    rebalance_per_class = forms.IntegerField(min_value=1, required=False)
    rebalance_replace = forms.BooleanField(required=False)
    classes = ListField(required=False)

    def clean(self):
        cleaned = super().clean()
        if cleaned.get('kind') == 'frames':
            for key in ('train_manifest', 'test_manifest'):
                if not cleaned.get(key):
                    self.add_error(key, 'required when kind is frames')
        for key in ('dir', 'train_manifest', 'test_manifest'):
            if key in cleaned and not cleaned[key]:
                cleaned[key] = None
        return cleaned


class EvaluationForm(forms.Form):
    window = forms.IntegerField(min_value=1)
    smooth_radius = forms.IntegerField(min_value=0)
    scheme = forms.ChoiceField(choices=Scheme.choices)
    estimate_mode = forms.ChoiceField(choices=ESTIMATE_MODES)


class RunForm(forms.Form):
    name = forms.SlugField()
    seeds = ListField(item_type=int, min_length=1)
    output_root = forms.CharField(required=False)
    snapshot_every = forms.IntegerField(min_value=0)

    def clean(self):
        cleaned = super().clean()
        if 'output_root' in cleaned and not cleaned['output_root']:
            cleaned['output_root'] = None
        return cleaned


SECTION_FORMS = {
    'excitatory': ExcitatoryForm,
    'inhibitory': NeuronForm,
    'stdp': StdpForm,
    'inhibition': InhibitionForm,
    'encoding': EncodingForm,
    'network': NetworkForm,
    'readout': ReadoutForm,
    'data': DataForm,
    'evaluation': EvaluationForm,
    'run': RunForm,
}


def _section_errors(section, form):
    errors = []
    for field, messages in form.errors.items():
        where = section if field == '__all__' else f"{section}.{field}"
        errors.extend(f"{where}: {message}" for message in messages)
    return errors


def _validate_sections(config):
    errors = []
    resolved = {}
    for section in config:
        if section not in SECTION_FORMS and section != 'grid':
            errors.append(f"{section}: unknown section")
    for section, form_class in SECTION_FORMS.items():
        data = config.get(section)
        if not isinstance(data, dict):
            errors.append(f"{section}: missing or not a mapping")
            continue
        form = form_class(data=data)
        unknown = sorted(set(data) - set(form.fields))
        errors.extend(f"{section}.{key}: unknown key" for key in unknown)
        if form.is_valid():
            resolved[section] = dict(form.cleaned_data)
        else:
            errors.extend(_section_errors(section, form))
    if not errors:
        errors.extend(_cross_section_errors(resolved))
    return resolved, errors


def _cross_section_errors(config):
    errors = []
    readout, data = config['readout'], config['data']
    if readout['ngram_mode'] == 'online' and Scheme.NGRAM not in readout['schemes']:
        errors.append('readout.ngram_mode: online mode needs the ngram scheme')
    if data['train_limit'] is not None and readout['label_examples'] > data['train_limit']:
        errors.append('readout.label_examples: exceeds data.train_limit')
    if data['kind'] == 'mnist':
        # every column must be able to reach c_norm without exceeding w_max
        reachable = MNIST_INPUTS * config['stdp']['w_max']
        if config['network']['c_norm'] > reachable:
            errors.append(f"network.c_norm: exceeds {reachable:g}, the most {MNIST_INPUTS} inputs can carry")
    return errors


def expand_grid(config):
    """
    Cartesian product of the grid section, first key outermost.
    Returns (keys, [(values, cell config)]).
    """
    grid = config.get('grid') or {}
    keys = list(grid)
    errors = []
    for key in keys:
        section, _, field = key.partition('.')
        if section not in SECTION_FORMS or not field:
            errors.append(f"grid.{key}: expected section.key")
        elif not isinstance(grid[key], list) or not grid[key]:
            errors.append(f"grid.{key}: expected a non-empty list")
    if errors:
        raise ConfigValidationError(errors)

    cells = []
    for values in itertools.product(*(grid[k] for k in keys)):
        cell = {s: dict(v) for s, v in config.items() if s != 'grid'}
        for key, value in zip(keys, values):
            section, _, field = key.partition('.')
            cell[section][field] = value
        cells.append((values, cell))
    return keys, cells


def validate_config(config):
    """
    Validate every section (and every grid cell) and return the resolved
    config. Raises ConfigValidationError listing all problems.
    """
    resolved, errors = _validate_sections(config)
    if not errors and config.get('grid'):
        keys, cells = expand_grid(config)
        for values, cell in cells:
            _, cell_errors = _validate_sections(cell)
            label = ', '.join(f"{k}={v}" for k, v in zip(keys, values))
            errors.extend(f"grid cell ({label}) {e}" for e in cell_errors)
        resolved['grid'] = {k: list(config['grid'][k]) for k in keys}
    if errors:
        logger.warning(f"Config rejected with {len(errors)} error(s)")
        raise ConfigValidationError(errors)
    return resolved
