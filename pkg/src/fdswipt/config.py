"""Defaults, config-file loading and flag resolution for the harness.

The config file is YAML (nested key/value); every parameter has a default
here, file values override defaults, and command-line flags override the
file.  The fully resolved mapping is echoed next to each output CSV.
"""

import copy

import yaml

from .numerics import ContractError

DEFAULTS = {
    "channel": {
        "rician_k_db": 10.0,
        "si_attenuation_db": 0.0,
        "noise_psd_dbm_hz": -169.0,
        "bandwidth_hz": 1.0e6,
    },
    "budget": {
        "alpha": 0.5,
        # null means "track p_s", the usual QoS setting.
        "p_q_dbm": None,
        "raw_objective": False,
    },
    "allocation": {
        "prefer_max_gain": False,
    },
    "sca": {
        "outer_tol": 1.0e-4,
        "max_outer": 50,
        "inner_step": 0.1,
        "max_inner": 300,
        "inner_tol": 1.0e-9,
    },
    "time_switching": {
        "tau": 0.5,
    },
    "experiment": {
        "m": 4,
        "n": 4,
        "ps_dbm": [20.0, 30.0, 40.0, 50.0],
        "trials": 10000,
        "seed": 1,
        "workers": 0,           # 0 = one worker per CPU
        "rollout_steps": 10,    # steps per trial when evaluating a policy
        "power_grid": 8,        # exhaustive-search grid levels
    },
    "drl": {
        # Desk-scale profile; the published full-scale run is 2500 x 500.
        "episodes": 300,
        "steps_per_episode": 100,
        "batch": 64,
        "freeze_channel": False,
    },
}


def _merge(base, override, path=""):
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ContractError(f"unknown config key: {where}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ContractError(f"config section {where} must be a mapping")
            out[key] = _merge(base[key], value, where)
        else:
            out[key] = value
    return out


def load_config(path=None):
    """Defaults, overlaid with the YAML file at ``path`` when given."""
    if path is None:
        return copy.deepcopy(DEFAULTS)
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ContractError(f"cannot read config file: {exc}") from None
    except yaml.YAMLError as exc:
        raise ContractError(f"malformed config file: {exc}") from None
    if not isinstance(data, dict):
        raise ContractError("config file must hold a mapping")
    return _merge(DEFAULTS, data)


def dump_config(config, stream):
    yaml.safe_dump(config, stream, sort_keys=True, default_flow_style=False)
