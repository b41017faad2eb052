"""
Django settings for UnlearnLab project.

Настройки лаборатории машинного "разучивания" (machine unlearning).
Веб-интерфейса нет: проект используется через management-команды
(train, unlearn, eval, theory, run, sweep, report) и тесты.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/5.2/ref/settings/
"""

import os
from pathlib import Path

from dotenv import load_dotenv

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# Переменные окружения из .env (MULAB_OUT, MULAB_JOBS, MULAB_LOG_LEVEL)
load_dotenv(BASE_DIR / '.env')


# Quick-start development settings - unsuitable for production
SECRET_KEY = os.environ.get('MULAB_SECRET_KEY', 'unlearnlab-local-only')

DEBUG = False

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'diffcore',
    'datagen',
    'network',
    'losses',
    'unlearn',
    'evaluation',
    'theory',
    'harness',

    'django.contrib.contenttypes',
]

MIDDLEWARE = []


# Database
# Кэш ячеек эксперимента (ExperimentCell) хранится в sqlite

DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': BASE_DIR / 'db.sqlite3',
    }
}


# Internationalization

LANGUAGE_CODE = 'ru'

TIME_ZONE = 'UTC'

USE_I18N = True

USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# Корень для результатов: out/<config-hash>/{manifest.json, results.csv, ...}
OUTPUT_ROOT = Path(os.environ.get('MULAB_OUT', BASE_DIR / 'out'))

# Размер пула воркеров по умолчанию (перекрывается флагом --jobs)
DEFAULT_JOBS = int(os.environ.get('MULAB_JOBS', '1'))


# Настройки лаборатории (значения по умолчанию для desk-scale экспериментов)
LAB_SETTINGS = {
    # Архитектура: input_dim -> 64 -> 64 -> D=16, линейная голова D -> K
    'HIDDEN_DIMS': (64, 64),
    'REPR_DIM': 16,
    'INIT_SCALE': 1.0,

    # Обучение Original / Retrain (multistep, 50% и 75% эпох)
    'ORIGINAL_EPOCHS': 60,
    'ORIGINAL_LR': 0.1,

    # Разучивание (cosine, минимум 1e-4)
    'UNLEARN_EPOCHS': 50,
    'UNLEARN_LR': 0.05,
    'UNLEARN_LR_GRID': (0.01, 0.03, 0.05, 0.1),
    'MIN_LR': 1e-4,
    'BATCH_SIZE': 64,
    'MOMENTUM': 0.9,
    'WEIGHT_DECAY': 5e-4,

    # CoUn / CL-модуль
    'TAU': 0.1,
    'LAMBDA': 1.0,
    'TAU_GRID': (0.05, 0.1, 0.2, 0.3),
    'LAMBDA_GRID': (0.1, 0.5, 1.0, 2.0, 4.0, 6.0),

    # Подбор перед запуском ячеек (tuning): lr x lambda x tau
    'TUNING_LR_GRID': (0.01, 0.03, 0.05, 0.1),
    'TUNING_LAMBDA_GRID': (0.1, 0.3, 1.0),
    'TUNING_TAU_GRID': (0.1, 0.3),

    # Бейзлайны
    'NEGGRAD_EPOCHS': 5,
    'NEGGRAD_LR': 1e-3,
    'BETA': 0.99,
    'L1_GAMMA': 1e-3,
    'L1_GAMMA_GRID': (1e-4, 1e-3, 1e-2, 1e-1),
    'L1_EPOCHS': 4,
    'L1_EPOCHS_SEQUENTIAL': 2,
    'SALUN_THRESHOLD': 0.5,
    'NOT_LAYERS': (0,),

    # Оценка теории (Монте-Карло)
    'MC_SAMPLES': 64,

    # Протокол
    'TRIALS': 10,
    'SEQUENTIAL_STAGES': 5,
    'SEQUENTIAL_STEP': 0.10,
    'EPOCHS_PER_STAGE': 10,
}


# Логирование
OUTPUT_ROOT.mkdir(parents=True, exist_ok=True)

LAB_LOG_LEVEL = os.environ.get('MULAB_LOG_LEVEL', 'DEBUG')

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
        'file': {
            'class': 'logging.FileHandler',
            'filename': OUTPUT_ROOT / 'lab.log',
            'formatter': 'verbose',
        },
    },
    'root': {
        'handlers': ['console', 'file'],
        'level': 'INFO',
    },
    'loggers': {
        app: {
            'handlers': ['console', 'file'],
            'level': LAB_LOG_LEVEL,
            'propagate': False,
        }
        for app in (
            'diffcore',
            'datagen',
            'network',
            'losses',
            'unlearn',
            'evaluation',
            'theory',
            'harness',
        )
    },
}
