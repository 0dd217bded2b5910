"""
Configuration settings for the extinction-profile solver
"""
import os


def _env_float(name, default):
    return float(os.environ.get(name, default))


def _env_int(name, default):
    return int(os.environ.get(name, default))


class Config:
    """Base configuration"""

    # Exponent guard band: p must lie in [1 + P_GUARD, 2 - P_GUARD]
    P_GUARD = _env_float('P_GUARD', 1e-3)

    # Integrator defaults
    REL_TOL = _env_float('REL_TOL', 1e-10)
    ABS_TOL = _env_float('ABS_TOL', 1e-30)
    H_INIT = _env_float('H_INIT', 1e-8)
    H_MIN = _env_float('H_MIN', 1e-14)
    H_MAX = _env_float('H_MAX', 10.0)
    MAX_STEPS = _env_int('MAX_STEPS', 200000)
    ROOT_TOL = _env_float('ROOT_TOL', 1e-12)

    # Ranges
    PROFILE_R_MAX = _env_float('PROFILE_R_MAX', 100.0)
    DECAY_R_MAX = _env_float('DECAY_R_MAX', 1e5)
    PSI_Y_START = _env_float('PSI_Y_START', 1e-8)
    PSI_Y_END = _env_float('PSI_Y_END', 1.0 - 1e-6)
    # share of MAX_STEPS a psi run may spend on the stiff decaying tail
    PSI_STIFF_BUDGET = _env_float('PSI_STIFF_BUDGET', 0.4)

    # Classification and bisection
    CLASSIFY_MARGIN = _env_float('CLASSIFY_MARGIN', 1e-4)
    MARGIN_FLOOR = _env_float('MARGIN_FLOOR', 1e-8)
    BRACKET_DOUBLING_CAP = _env_int('BRACKET_DOUBLING_CAP', 60)
    THRESHOLD_REL_TOL = _env_float('THRESHOLD_REL_TOL', 1e-12)
    MAX_RECLASSIFY = _env_int('MAX_RECLASSIFY', 3)

    # Asymptotics
    TAIL_DRIFT_TOL = _env_float('TAIL_DRIFT_TOL', 1e-3)
    PLATEAU_WINDOW = _env_float('PLATEAU_WINDOW', 5.0)
    PLATEAU_VARIATION = _env_float('PLATEAU_VARIATION', 0.10)

    # Sweep parallelism
    EXTPROF_THREADS = _env_int('EXTPROF_THREADS', os.cpu_count() or 1)

    # Output
    CSV_DIGITS = _env_int('CSV_DIGITS', 17)
    SCHEMA_VERSION = os.environ.get('SCHEMA_VERSION', 'extprof/1')

    # Monotonicity check
    PAIR_SEED = _env_int('PAIR_SEED', 2024)


class DevelopmentConfig(Config):
    """Development configuration"""


class ProductionConfig(Config):
    """Production configuration"""

    # Tighter integration for archived runs
    REL_TOL = 1e-12


class TestingConfig(Config):
    """Testing configuration"""

    # Smaller budgets so the unit suite stays fast
    MAX_STEPS = 100000
    DECAY_R_MAX = 5e4


# Configuration mapping
config = {
    'development': DevelopmentConfig,
    'production': ProductionConfig,
    'testing': TestingConfig,
    'default': DevelopmentConfig
}


def get_config():
    """Get configuration based on environment"""
    env = os.environ.get('EXTPROF_ENV', 'default')
    return config.get(env, config['default'])
