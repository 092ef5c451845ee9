import os
import logging
import warnings
from pathlib import Path

# Lamb Framework
from lamb.utils import dpath_value
from lamb.utils.transformers import transform_boolean

logging.captureWarnings(True)
warnings.filterwarnings("default", category=DeprecationWarning, module="django")
warnings.filterwarnings("default", category=DeprecationWarning, module="lamb")
warnings.filterwarnings("default", category=DeprecationWarning, module="hardy")
warnings.filterwarnings("default", category=RuntimeWarning, module="numpy")

# Build paths inside the project like this: BASE_DIR / "subdir".
BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = dpath_value(os.environ, "APP_SECRET_KEY", str, default="hardy-experiments-no-web-surface")
DEBUG = dpath_value(os.environ, "APP_DEBUG", str, transform=transform_boolean, default=False)
ALLOWED_HOSTS = []

LAMB_LOG_FOLDER = os.path.join(BASE_DIR, "log")
os.makedirs(LAMB_LOG_FOLDER, exist_ok=True)

# Application definition

INSTALLED_APPS = [
    "hardy",
]

MIDDLEWARE = []
DATABASES = {}

# experiments
ANISO_LOG = dpath_value(os.environ, "ANISO_LOG", str, transform=str.upper, default="INFO")
ANISO_OUTPUT_DIR = dpath_value(os.environ, "ANISO_OUTPUT_DIR", str, default=os.path.join(BASE_DIR, "output"))
ANISO_THREADS = dpath_value(os.environ, "ANISO_THREADS", int, default=1)
ANISO_DEFAULT_CONFIG = dpath_value(
    os.environ, "ANISO_DEFAULT_CONFIG", str, default=os.path.join(BASE_DIR, "configs", "default.json")
)

# loggers
LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "verbose": {
            "format": "[%(asctime)s: run=%(run_id)s, subcommand=%(subcommand)s, seed=%(seed)s: %(levelname)8s] <%(name)s:%(filename)s:%(lineno)4d>  %(message)s "
        },
        "simple": {"format": "[%(asctime)s: run=%(run_id)s: %(levelname)8s] %(message)s"},
    },
    "filters": {"experiment_context": {"()": "hardy.logging.ExperimentContextFilter"}},
    "handlers": {
        "console": {
            "level": ANISO_LOG,
            "class": "logging.StreamHandler",
            "formatter": "simple",
            "filters": ["experiment_context"],
        },
        "hardy_log_file": {
            "level": "DEBUG",
            "class": "logging.handlers.TimedRotatingFileHandler",
            "filename": os.path.join(LAMB_LOG_FOLDER, "hardy.log"),
            "when": "midnight",
            "backupCount": 30,
            "formatter": "verbose",
            "filters": ["experiment_context"],
        },
    },
    "loggers": {
        "django": {"handlers": ["console"], "propagate": True, "level": "INFO"},
        "hardy": {"handlers": ["hardy_log_file", "console"], "propagate": False, "level": ANISO_LOG},
        "lamb": {"handlers": ["hardy_log_file", "console"], "propagate": True, "level": "INFO"},
        "py.warnings": {"handlers": ["console"], "propagate": True, "level": "WARNING"},
    },
}

# Internationalization
# https://docs.djangoproject.com/en/4.0/topics/i18n/

LANGUAGE_CODE = "en-us"

TIME_ZONE = "UTC"

USE_I18N = True

USE_TZ = True

# lamb
from lamb.utils.logging import inject_logging_factory  # noqa: E402

LAMB_LOG_LINES_FORMAT = "PREFIX"
inject_logging_factory()
