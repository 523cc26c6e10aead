"""
Django settings for election_sentiment project.
"""

import os
from pathlib import Path

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = os.environ.get(
    'DJANGO_SECRET_KEY',
    'django-insecure-election-sentiment-local-only',
)

DEBUG = os.environ.get('DJANGO_DEBUG', '0') == '1'

ALLOWED_HOSTS = ["localhost", "127.0.0.1"]

# Application definition
INSTALLED_APPS = [
    'django.contrib.contenttypes',

    # Local apps
    'sentiment.apps.SentimentConfig',
]

# Report rendering (topic SVG bar charts) uses app templates.
TEMPLATES = [
    {
        'BACKEND': 'django.template.backends.django.DjangoTemplates',
        'DIRS': [],
        'APP_DIRS': True,
        'OPTIONS': {
            'autoescape': True,
        },
    },
]


# Database
DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': os.environ.get('SENTIMENT_DB', BASE_DIR / 'db.sqlite3'),
    }
}


# Internationalization
LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = False
USE_TZ = True

# Default primary key field type
DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# Logging
LOG_LEVEL = os.environ.get('SENTIMENT_LOG_LEVEL', 'INFO')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{asctime} {levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'loggers': {
        'sentiment': {
            'handlers': ['console'],
            'level': LOG_LEVEL,
            'propagate': False,
        },
    },
}


# Pipeline defaults. Every section can be overridden by a TOML file passed
# with --config, and individual values by command-line flags.
SENTIMENT_PIPELINE = {
    'THREADS': int(os.environ.get('SENTIMENT_THREADS', '1')),
    'DETERMINISTIC': True,
    'LANGUAGE': {
        'threshold': 0.15,
    },
    'PREP': {
        'max_repeat': 2,
        'stem': True,
        'compound_joins': [['action', 'sa']],
    },
    'VOCAB': {
        'min_df': 2,
    },
    'TFIDF': {
        'normalize': True,
    },
    'EMBED': {
        'dim': 100,
        'window': 5,
        'negatives': 5,
        'epochs': 5,
        'lr_start': 0.025,
        'lr_end': 0.0001,
        'min_count': 5,
        'mode': 'sg',
        'seed': 1,
        'shrink_window': False,
        'subsample': 0.0,
        'doc_weighting': 'mean',
    },
    'GRAPH': {
        'k': 10,
        'sigma': 'auto',
        'eps': 1e-6,
        'max_iter': 1000,
        'class_mass_normalize': False,
        'harden_threshold': 0.5,
    },
    'BASELINE': {
        'reg_lambda': 1e-4,
        'epochs': 50,
        'seed': 1,
        'folds': 5,
        'lambda_grid': [1e-5, 1e-4, 1e-3, 1e-2],
    },
    # batch_sizes are TOTALS per iteration, split equally across parties.
    'SCHEDULE': {
        'batch_sizes': [1000, 10000, 20000],
        'stratify_by_party': True,
        'guard_drop': 0.02,
        'seed': 1,
        'soft_seeds': False,
        'holdback_fraction': 0.5,
        'final_chunk': 20000,
        # tfidf, sg or cbow; fitted on every document text of the run.
        'representation': 'tfidf',
    },
    'LDA': {
        'K': 5,
        'alpha': None,
        'beta': 0.01,
        'iters': 1000,
        'seed': 1,
        'top_k': 10,
    },
    'NGRAMS': {
        'n': 4,
        'top': 20,
    },
}
