import os
import environ
from pathlib import Path

env = environ.Env(
    DEBUG=(bool, False)
)

BASE_DIR = Path(__file__).resolve().parent.parent

environ.Env.read_env(os.path.join(BASE_DIR, '.env'))

SECRET_KEY = env('SECRET_KEY', default='django-insecure-dev-key-change-in-production')
DEBUG = env.bool('DEBUG', default=True)
ALLOWED_HOSTS = env.list('ALLOWED_HOSTS', default=[
    'localhost',
    '127.0.0.1',
])

APPEND_SLASH = True

INSTALLED_APPS = [
    'django.contrib.admin',
    'django.contrib.auth',
    'django.contrib.contenttypes',
    'django.contrib.sessions',
    'django.contrib.messages',
    'django.contrib.staticfiles',
    'rest_framework',
    'django_filters',
    'drf_spectacular',
    'apps.oracle',
    'apps.simnet',
    'apps.experiments',
]

MIDDLEWARE = [
    'django.middleware.security.SecurityMiddleware',
    'django.contrib.sessions.middleware.SessionMiddleware',
    'django.middleware.common.CommonMiddleware',
    'django.middleware.csrf.CsrfViewMiddleware',
    'django.contrib.auth.middleware.AuthenticationMiddleware',
    'django.contrib.messages.middleware.MessageMiddleware',
    'django.middleware.clickjacking.XFrameOptionsMiddleware',
]

ROOT_URLCONF = 'config.urls'

TEMPLATES = [
    {
        'BACKEND': 'django.template.backends.django.DjangoTemplates',
        'DIRS': [],
        'APP_DIRS': True,
        'OPTIONS': {
            'context_processors': [
                'django.template.context_processors.debug',
                'django.template.context_processors.request',
                'django.contrib.auth.context_processors.auth',
                'django.contrib.messages.context_processors.messages',
            ],
        },
    },
]

WSGI_APPLICATION = 'config.wsgi.application'

DATABASES = {
    'default': env.db('DATABASE_URL', default='sqlite:///db.sqlite3')
}

LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = True
USE_TZ = True

STATIC_URL = 'static/'
STATIC_ROOT = BASE_DIR / 'staticfiles'

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

REST_FRAMEWORK = {
    'DEFAULT_AUTHENTICATION_CLASSES': [
        'rest_framework.authentication.SessionAuthentication',
    ],
    'DEFAULT_PERMISSION_CLASSES': [
        'rest_framework.permissions.AllowAny',
    ],
    'DEFAULT_PAGINATION_CLASS': 'rest_framework.pagination.PageNumberPagination',
    'PAGE_SIZE': 50,
    'DEFAULT_FILTER_BACKENDS': [
        'django_filters.rest_framework.DjangoFilterBackend',
        'rest_framework.filters.OrderingFilter',
    ],
    'DEFAULT_SCHEMA_CLASS': 'drf_spectacular.openapi.AutoSchema',
}

SPECTACULAR_SETTINGS = {
    'TITLE': 'oraclenet - Oracle Simulation API',
    'DESCRIPTION': 'Read-only access to persisted oracle simulation runs',
    'VERSION': '1.0.0',
    'SERVE_INCLUDE_SCHEMA': False,
}

# ==============================================================================
# SIMULATION DEFAULTS
# ==============================================================================
# Every value can be overridden through an ORACLENET_* environment variable.
# Scenario files and CLI flags override these again per run.
# ==============================================================================
ORACLENET = {
    'NODE_COUNT': env.int('ORACLENET_NODE_COUNT', default=100),
    'MALICIOUS_FRACTION': env.float('ORACLENET_MALICIOUS_FRACTION', default=0.1),
    'COMMITTEE_SIZE': env.int('ORACLENET_COMMITTEE_SIZE', default=10),
    'WINDOW_WIDTH': env.float('ORACLENET_WINDOW_WIDTH', default=1.0),
    'ALPHA': env.float('ORACLENET_ALPHA', default=0.5),
    'MIN_COUNT': env.int('ORACLENET_MIN_COUNT', default=1),
    'LATENCY_MEAN': env.float('ORACLENET_LATENCY_MEAN', default=1.0),
    'LATENCY_STD': env.float('ORACLENET_LATENCY_STD', default=0.5),
    'TASK_COUNT': env.int('ORACLENET_TASK_COUNT', default=1000),
    'ADVERSARY_MIX': env.dict('ORACLENET_ADVERSARY_MIX', cast={'value': float},
                              default={'false_data': 0.5, 'lazy': 0.5}),
    'SOURCE_COUNT': env.int('ORACLENET_SOURCE_COUNT', default=4),
    'SOURCE_BASE': env.float('ORACLENET_SOURCE_BASE', default=100.0),
    'SOURCE_DRIFT': env.float('ORACLENET_SOURCE_DRIFT', default=0.0),
    'SOURCE_NOISE': env.float('ORACLENET_SOURCE_NOISE', default=0.8),
    'SOURCE_REVERSION': env.float('ORACLENET_SOURCE_REVERSION', default=60.0),
    'FALSE_DATA_OFFSET_STD': env.float('ORACLENET_FALSE_DATA_OFFSET_STD', default=10.0),
    'LAZY_EXTRA_DELAY': env.float('ORACLENET_LAZY_EXTRA_DELAY', default=1.5),
    'TARGETED_TRIGGER': env.int('ORACLENET_TARGETED_TRIGGER', default=3),
    'REWARD': env.int('ORACLENET_REWARD', default=80),
    'FEE': env.int('ORACLENET_FEE', default=100),
    'DEPOSIT': env.int('ORACLENET_DEPOSIT', default=100),
    'MIN_DEPOSIT': env.int('ORACLENET_MIN_DEPOSIT', default=100),
    'SLASH_THRESHOLD': env.float('ORACLENET_SLASH_THRESHOLD', default=0.0),
    'STRATEGY': env('ORACLENET_STRATEGY', default='median'),
    'PARTICIPATION_MARGIN': env.float('ORACLENET_PARTICIPATION_MARGIN', default=2.0),
    'COLLECTION_DEADLINE': env.float('ORACLENET_COLLECTION_DEADLINE', default=5.0),
    'CONSENSUS_HOP': env.float('ORACLENET_CONSENSUS_HOP', default=0.05),
    'TASK_INTERVAL': env.float('ORACLENET_TASK_INTERVAL', default=10.0),
    'MAX_RETRIES': env.int('ORACLENET_MAX_RETRIES', default=3),
    'EPS_REL': env.float('ORACLENET_EPS_REL', default=1e-2),
    'EPS_ABS': env.float('ORACLENET_EPS_ABS', default=1e-6),
    'HORIZON': env.float('ORACLENET_HORIZON', default=1e7),
    'REPLICATIONS': env.int('ORACLENET_REPLICATIONS', default=20),
}

ORACLENET_SEED = env.int('ORACLENET_SEED', default=None)

# ==============================================================================
# CELERY (matrix cells)
# ==============================================================================
REDIS_URL = env('REDIS_URL', default=None)

CELERY_BROKER_URL = REDIS_URL or 'memory://'
CELERY_RESULT_BACKEND = REDIS_URL or 'cache+memory://'
CELERY_TASK_ALWAYS_EAGER = env.bool('CELERY_TASK_ALWAYS_EAGER', default=True)
CELERY_TASK_EAGER_PROPAGATES = True
CELERY_TASK_SERIALIZER = 'json'
CELERY_RESULT_SERIALIZER = 'json'
CELERY_ACCEPT_CONTENT = ['json']

if REDIS_URL:
    CACHES = {
        'default': {
            'BACKEND': 'django.core.cache.backends.redis.RedisCache',
            'LOCATION': REDIS_URL,
        }
    }
else:
    CACHES = {
        'default': {
            'BACKEND': 'django.core.cache.backends.locmem.LocMemCache',
        }
    }

LOG_LEVEL = env('ORACLENET_LOG_LEVEL', default='WARNING')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': 'WARNING',
    },
    'loggers': {
        'django': {
            'handlers': ['console'],
            'level': 'INFO',
            'propagate': False,
        },
        'apps': {
            'handlers': ['console'],
            'level': LOG_LEVEL,
            'propagate': False,
        },
    },
}
