"""Resonances of finite-level systems coupled to a truncated boson field.

Model specs are plain dicts (the ``model`` block of a config file); they are
passed to the compiled core as JSON.
"""

import json

from . import _reslab
from ._reslab import NumericalError, ValidationError, __version__, experiment_names, selfcheck

__all__ = [
    "NumericalError",
    "ValidationError",
    "__version__",
    "config_hash",
    "continuation_domain",
    "decimate",
    "default_spec",
    "default_qed_spec",
    "dimension",
    "experiment_names",
    "fgr",
    "pole_fit",
    "resolvent_element",
    "resonance",
    "run",
    "selfcheck",
    "survival",
    "track_resonance",
]


def _spec(spec):
    return json.dumps(default_spec() if spec is None else spec)


def default_spec():
    return json.loads(_reslab.default_spec_json())


def default_qed_spec():
    return json.loads(_reslab.default_qed_spec_json())


def dimension(spec=None):
    return _reslab.dimension(_spec(spec))


def track_resonance(g_path, j=1, theta=0.3j, sigma=None, spec=None):
    return _reslab.track_resonance(_spec(spec), list(g_path), j, complex(theta), sigma)


def resonance(g, j=1, theta=0.3j, sigma=None, spec=None):
    path = [0.0] if g == 0 else [0.0, g]
    return track_resonance(path, j, theta, sigma, spec)[-1]["value"]


def fgr(j=1, spec=None):
    return _reslab.fgr(_spec(spec), j)


def survival(g, times, j=1, spec=None):
    return _reslab.survival(_spec(spec), g, j, list(times))


def resolvent_element(g, z, theta=0.3j, j=1, spec=None):
    return _reslab.resolvent_element(_spec(spec), g, complex(theta), complex(z), j)


def pole_fit(z, f, lam):
    return _reslab.pole_fit(list(z), list(f), complex(lam))


def continuation_domain(center, phi1=1.4, phi2=3.5):
    return _reslab.continuation_domain(complex(center), phi1, phi2)


def decimate(g, sigma, rho0=None, j=1, theta=0.3j, spec=None):
    return _reslab.decimate(_spec(spec), g, sigma, sigma if rho0 is None else rho0, j, complex(theta))


def config_hash(config):
    return _reslab.config_hash(json.dumps(config))


def run(config, out, jobs=1):
    rec = _reslab.run(json.dumps(config), str(out), jobs)
    rec["results"] = json.loads(rec["results"])
    return rec
