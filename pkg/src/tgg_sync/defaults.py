import os

from django.conf import settings


__all__ = [
    'PARSE_BUDGET_FACTOR',
    'MEMBERSHIP_MAX_DEPTH',
    'BENCH_REPETITIONS',
    'DEFAULT_SEED',
    'REPORT_INDENT',
]

_default_settings = {
    'PARSE_BUDGET_FACTOR': 10,
    'MEMBERSHIP_MAX_DEPTH': 16,
    'BENCH_REPETITIONS': 20,
    'DEFAULT_SEED': 1,
    'REPORT_INDENT': 2,
}


sync_config = dict(_default_settings)
local_config = getattr(settings, 'TGG_SYNC_CONFIG', {})
for k, v in local_config.items():
    if k not in _default_settings:
        raise KeyError(k)
    sync_config[k] = v


PARSE_BUDGET_FACTOR = sync_config['PARSE_BUDGET_FACTOR']
MEMBERSHIP_MAX_DEPTH = sync_config['MEMBERSHIP_MAX_DEPTH']
BENCH_REPETITIONS = sync_config['BENCH_REPETITIONS']
DEFAULT_SEED = sync_config['DEFAULT_SEED']
REPORT_INDENT = sync_config['REPORT_INDENT']


def get_seed(seed=None) -> int:
    """ SYNC_SEED from environment wins over explicit and configured seeds."""
    env = os.environ.get('SYNC_SEED')
    if env:
        return int(env)
    if seed is None:
        return DEFAULT_SEED
    return int(seed)
