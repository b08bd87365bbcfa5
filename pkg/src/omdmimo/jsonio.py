"""JSON encoding of complex matrices and solver results."""

import json

import numpy as np

from .errors import ConfigError
from .linalg import as_matrix


def decode_matrix(value, name="matrix"):
    """Matrix from a number, a nested list, or ``{"re": ..., "im": ...}``."""
    try:
        if isinstance(value, dict):
            if "re" not in value:
                raise ConfigError(f"{name}: object form needs an 're' entry")
            re = np.asarray(value["re"], dtype=float)
            im = np.asarray(value.get("im", np.zeros_like(re)), dtype=float)
            if re.shape != im.shape:
                raise ConfigError(f"{name}: 're' and 'im' differ in shape")
            value = re + 1j * im
        return as_matrix(value, name)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: {exc}") from exc


def encode_matrix(M):
    M = np.asarray(M)
    return {"re": M.real.tolist(), "im": M.imag.tolist()}


def _user_key(key):
    try:
        return int(key)
    except (TypeError, ValueError):
        raise ConfigError(f"user labels must be integers, got {key!r}") from None


def decode_user_map(data, name, matrices=True):
    if not isinstance(data, dict):
        raise ConfigError(f"{name} must be an object keyed by user index")
    out = {}
    for key, value in data.items():
        u = _user_key(key)
        if matrices:
            out[u] = decode_matrix(value, f"{name}[{u}]")
        else:
            try:
                out[u] = float(value)
            except (TypeError, ValueError):
                raise ConfigError(f"{name}[{u}] must be a number") from None
    return out


def require(data, *keys):
    if not isinstance(data, dict):
        raise ConfigError("instance must be a JSON object")
    missing = [k for k in keys if k not in data]
    if missing:
        raise ConfigError(f"missing fields: {', '.join(missing)}")


def load(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc


def subset_key(J):
    return [int(i) for i in J]
