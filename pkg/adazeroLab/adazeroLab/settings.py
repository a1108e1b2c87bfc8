"""
Django settings for the adazeroLab project.

The project has no web surface; Django provides the settings layer, the
management-command CLI (``manage.py train`` etc.) and the logging setup.
Hyperparameters of individual runs come from TOML run configs validated in
``harness.serializers``; the values here are project-wide defaults.
"""

import os
from pathlib import Path

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = os.environ.get('ADAZERO_SECRET_KEY', 'adazero-lab-local-only')

DEBUG = False

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'rest_framework',
    'nncore.apps.NncoreConfig',
    'envs.apps.EnvsConfig',
    'exploration.apps.ExplorationConfig',
    'policy.apps.PolicyConfig',
    'theory.apps.TheoryConfig',
    'harness.apps.HarnessConfig',
]

# No models anywhere in the lab; runs are persisted as files.
DATABASES = {}

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# Lab defaults

ADAZERO_OUTPUT_ROOT = Path(os.environ.get('ADAZERO_OUTPUT_ROOT', BASE_DIR.parent / 'runs'))

ADAZERO_CONFIG_DIR = BASE_DIR.parent / 'configs'

# Checkpoints are written every N policy updates.
ADAZERO_CHECKPOINT_EVERY = 50

ADAZERO_ADAM = {
    'lr': 3e-4,
    'beta1': 0.9,
    'beta2': 0.999,
    'eps': 1e-8,
}

# Evaluator step size, halved every `half_life` evaluator updates.
ADAZERO_EVALUATOR_ADAM = {
    'lr': 1e-2,
    'half_life': 25.0,
}

ADAZERO_GRAD_CHECK = {
    'step': 1e-6,
    'tolerance': 1e-4,
    'samples_per_block': 40,
}

ADAZERO_THEORY = {
    'tolerance': 1e-12,
    'samples': 100_000,
    'sweep_low': -5.0,
    'sweep_high': 5.0,
    'shards': 4,
    'seed': 20240101,
}

# Window (in metrics rows) used for the entropy / intrinsic alignment statistic.
ADAZERO_ALIGNMENT_WINDOW = 5


LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'adazero': {
            'format': '%(asctime)s %(levelname)s %(name)s: %(message)s',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'adazero',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': 'WARNING',
    },
    'loggers': {
        app: {
            'handlers': ['console'],
            'level': os.environ.get('ADAZERO_LOG_LEVEL', 'INFO'),
            'propagate': False,
        }
        for app in ('nncore', 'envs', 'exploration', 'policy', 'theory', 'harness')
    },
}
