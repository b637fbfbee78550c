import os
from pathlib import Path
from dotenv import load_dotenv

# Load environment variables
# Try to load .env.local first (for development), then .env
if os.path.exists('.env.local'):
    load_dotenv('.env.local')
else:
    load_dotenv()

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# Only used by django internals; nothing here is served over HTTP.
SECRET_KEY = os.environ.get('SECRET_KEY', 'lmsnn-local-only-not-a-secret')

DEBUG = os.environ.get('DEBUG', 'False').lower() == 'true'

ALLOWED_HOSTS = []

# Application definition
INSTALLED_APPS = [
    'django.contrib.contenttypes',

    # Local apps
    'neurons',
    'inhibition',
    'encoding',
    'network',
    'readout',
    'datasets',
    'evaluation',
    'experiments',
]

# Output root for run directories (checkpoints, CSVs, images)
OUTPUT_ROOT = Path(os.environ.get('LMSNN_OUTPUT_ROOT', BASE_DIR / 'runs'))

# Default location of the MNIST IDX files
DATA_DIR = Path(os.environ.get('LMSNN_DATA_DIR', BASE_DIR / 'data' / 'mnist'))

# Default worker pool width for grids and multi-seed runs
WORKERS = int(os.environ.get('LMSNN_WORKERS', '1'))

# Packaged defaults every experiment config is merged over
DEFAULT_EXPERIMENT_CONFIG = BASE_DIR / 'experiments' / 'defaults.yaml'

# Database (run registry)
DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': os.environ.get('DB_NAME', str(BASE_DIR / 'lmsnn.sqlite3')),
    }
}

# Internationalization
LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = False
USE_TZ = True

# Default primary key field type
DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# Created on the first log write, not at import
LOG_DIR = OUTPUT_ROOT / 'logs'
LOG_LEVEL = os.environ.get('LOG_LEVEL', 'INFO')

# Logging
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {module} {process:d} {thread:d} {message}',
            'style': '{',
        },
        'simple': {
            'format': '{levelname} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'file': {
            'level': LOG_LEVEL,
            'class': 'lattice_snn.log.RunLogFileHandler',
            'filename': os.path.join(LOG_DIR, 'lmsnn.log'),
            'formatter': 'verbose',
        },
        'console': {
            'level': LOG_LEVEL,
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
        },
    },
    'root': {
        'handlers': ['console', 'file'],
        'level': LOG_LEVEL,
    },
    'loggers': {
        'django': {
            'handlers': ['console', 'file'],
            'level': 'WARNING',
            'propagate': False,
        },
    },
}
