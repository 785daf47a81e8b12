"""Scenario files: parsing, validation, serialisation and model templates.

A scenario is one JSON document. Matrices are row-major nested lists and
infinite bounds are written as the strings ``"inf"`` and ``"-inf"``. The
dynamics are either listed step by step or produced by a named template
from a seed, so a scenario file fully determines the models it describes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ParseError, ValidationError
from ..geometry import Ellipsoid
from ..prediction import ProcessModel

__all__ = [
    "TEMPLATES",
    "NOISE_POLICIES",
    "MEASUREMENT_KINDS",
    "Schedule",
    "Scenario",
    "load_scenario",
    "save_scenario",
    "scenario_from_dict",
    "scenario_to_dict",
    "generate_scenario",
    "template_models",
]

TEMPLATES = ("stable", "rotation", "integrator")
NOISE_POLICIES = ("uniform", "vertex", "zero")
MEASUREMENT_KINDS = ("strip", "upper", "lower", "hyperplane")


@dataclass(frozen=True, eq=False)
class Schedule:
    """How measurements are drawn at each step.

    Attributes
    ----------
    presence : float
        Probability that a step carries any measurement at all.
    max_count : int
        A step with measurements carries between 1 and ``max_count``.
    kinds : dict
        Relative weights of ``strip``, ``upper``, ``lower`` and
        ``hyperplane`` measurements.
    width : tuple of float
        Range of the interval width (one-sided bounds use it as the slack).
    directions : ndarray or None
        Rows to draw measurement directions from; Gaussian directions when
        ``None``.
    adversarial : float
        Probability that a measurement is shifted well away from the truth,
        which exercises the inconsistency policies.
    """

    presence: float = 0.7
    max_count: int = 3
    kinds: dict = field(default_factory=lambda: {k: 1.0 for k in MEASUREMENT_KINDS})
    width: tuple = (0.2, 2.0)
    directions: np.ndarray = None
    adversarial: float = 0.0


@dataclass(frozen=True, eq=False)
class Scenario:
    """Everything needed to simulate a system and run the estimator on it.

    Exactly one of ``models`` (explicit, one per step or a single one reused
    at every step) and ``template`` is set.
    """

    n: int
    horizon: int
    center: np.ndarray
    shape: np.ndarray
    scale: float = 1.0
    noise: str = "uniform"
    schedule: Schedule = field(default_factory=Schedule)
    models: tuple = None
    template: dict = None

    @property
    def initial(self) -> Ellipsoid:
        return Ellipsoid(self.center, self.shape, self.scale, self.n)

    def model(self, k: int) -> ProcessModel:
        """Dynamics mapping time ``k`` to ``k + 1``."""
        return self.expanded_models()[k]

    def expanded_models(self) -> tuple:
        cached = self.__dict__.get("_expanded")
        if cached is None:
            if self.models is not None:
                ms = self.models
                cached = tuple(ms[k] if len(ms) > 1 else ms[0] for k in range(self.horizon))
            else:
                cached = template_models(self.n, self.horizon, **self.template)
            object.__setattr__(self, "_expanded", cached)
        return cached


def _decode_number(x, where):
    if isinstance(x, str):
        if x in ("inf", "+inf"):
            return math.inf
        if x == "-inf":
            return -math.inf
        raise ParseError(f"{where}: expected a number, got {x!r}")
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ParseError(f"{where}: expected a number, got {x!r}")
    return float(x)


def _encode_number(x):
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return float(x)


def _matrix(obj, where, rows=None, cols=None):
    try:
        M = np.array(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{where}: not a numeric matrix") from exc
    if cols is not None and M.size == 0:
        M = M.reshape(rows if rows is not None else 0, cols)
    if M.ndim == 1 and M.size == 0 and rows is not None:
        M = M.reshape(rows, 0)
    if M.ndim != 2:
        raise ParseError(f"{where}: expected a 2-d array, got {M.ndim}-d")
    if rows is not None and M.shape[0] != rows:
        raise ValidationError(f"{where}: expected {rows} rows, got {M.shape[0]}")
    if cols is not None and M.shape[1] != cols:
        raise ValidationError(f"{where}: expected {cols} columns, got {M.shape[1]}")
    if not np.all(np.isfinite(M)):
        raise ValidationError(f"{where}: entries must be finite")
    return M


def _vector(obj, where, size=None):
    try:
        v = np.array(obj, dtype=float).reshape(-1)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{where}: not a numeric vector") from exc
    if size is not None and v.size != size:
        raise ValidationError(f"{where}: expected length {size}, got {v.size}")
    if not np.all(np.isfinite(v)):
        raise ValidationError(f"{where}: entries must be finite")
    return v


def _require(d, key, where):
    if key not in d:
        raise ParseError(f"{where}: missing field {key!r}")
    return d[key]


def _parse_model(d, n, where):
    if not isinstance(d, dict):
        raise ParseError(f"{where}: expected an object")
    A = _matrix(_require(d, "A", where), f"{where}.A", n, n)
    R = _matrix(d.get("R", np.zeros((n, 0))), f"{where}.R", n)
    B = _matrix(d.get("B", np.zeros((n, 0))), f"{where}.B", n)
    tau = _vector(d.get("tau", []), f"{where}.tau", B.shape[1])
    for j in range(R.shape[1]):
        if not np.any(R[:, j]):
            raise ValidationError(f"{where}.R: noise generator column {j} is zero; "
                                  "every generator must be a nonzero vector")
    return ProcessModel(A, B, tau, R)


def _parse_template(d, where):
    if not isinstance(d, dict):
        raise ParseError(f"{where}: expected an object")
    name = _require(d, "name", where)
    if name not in TEMPLATES:
        raise ValidationError(f"{where}.name: unknown template {name!r}; "
                              f"choose from {', '.join(TEMPLATES)}")
    out = {"name": name,
           "seed": int(d.get("seed", 0)),
           "m": int(d.get("m", 1)),
           "l": int(d.get("l", 0)),
           "noise_scale": float(d.get("noise_scale", 0.3))}
    if out["m"] < 0 or out["l"] < 0:
        raise ValidationError(f"{where}: m and l must be nonnegative")
    if not out["noise_scale"] > 0:
        raise ValidationError(f"{where}.noise_scale: must be positive")
    return out


def _parse_schedule(d, n, where):
    if d is None:
        return Schedule()
    if not isinstance(d, dict):
        raise ParseError(f"{where}: expected an object")
    presence = _decode_number(d.get("presence", 0.7), f"{where}.presence")
    if not 0.0 <= presence <= 1.0:
        raise ValidationError(f"{where}.presence: must lie in [0, 1]")
    max_count = int(d.get("max_count", 3))
    if max_count < 0:
        raise ValidationError(f"{where}.max_count: must be nonnegative")
    kinds = d.get("kinds", {k: 1.0 for k in MEASUREMENT_KINDS})
    if not isinstance(kinds, dict) or set(kinds) - set(MEASUREMENT_KINDS):
        raise ValidationError(f"{where}.kinds: keys must be among {', '.join(MEASUREMENT_KINDS)}")
    kinds = {k: _decode_number(kinds.get(k, 0.0), f"{where}.kinds.{k}") for k in MEASUREMENT_KINDS}
    if any(w < 0 or math.isinf(w) for w in kinds.values()) or sum(kinds.values()) <= 0:
        raise ValidationError(f"{where}.kinds: weights must be finite, nonnegative, "
                              "and not all zero")
    width = d.get("width", [0.2, 2.0])
    if not isinstance(width, (list, tuple)) or len(width) != 2:
        raise ParseError(f"{where}.width: expected [low, high]")
    lo, hi = (_decode_number(w, f"{where}.width") for w in width)
    if not 0.0 < lo <= hi < math.inf:
        raise ValidationError(f"{where}.width: need 0 < low <= high < inf")
    dirs = d.get("directions")
    if dirs is not None:
        dirs = _matrix(dirs, f"{where}.directions", cols=n)
        if dirs.shape[0] == 0 or np.any(np.linalg.norm(dirs, axis=1) == 0):
            raise ValidationError(f"{where}.directions: rows must be nonzero")
    adversarial = _decode_number(d.get("adversarial", 0.0), f"{where}.adversarial")
    if not 0.0 <= adversarial <= 1.0:
        raise ValidationError(f"{where}.adversarial: must lie in [0, 1]")
    return Schedule(presence, max_count, kinds, (lo, hi), dirs, adversarial)


def scenario_from_dict(d) -> Scenario:
    """Build and validate a :class:`Scenario` from decoded JSON.

    Raises
    ------
    ParseError
        Missing fields or values of the wrong type.
    ValidationError
        Well-formed values that break a modelling assumption (non-finite
        entries, zero noise generators, shape not positive definite, ...).
    """
    if not isinstance(d, dict):
        raise ParseError("scenario: expected a JSON object")
    n = _require(d, "n", "scenario")
    horizon = _require(d, "horizon", "scenario")
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise ValidationError("scenario.n: must be a positive integer")
    if not isinstance(horizon, int) or isinstance(horizon, bool) or horizon < 1:
        raise ValidationError("scenario.horizon: must be a positive integer")

    init = _require(d, "initial", "scenario")
    if not isinstance(init, dict):
        raise ParseError("scenario.initial: expected an object")
    center = _vector(_require(init, "center", "scenario.initial"), "scenario.initial.center", n)
    shape = _matrix(_require(init, "shape", "scenario.initial"), "scenario.initial.shape", n, n)
    if not np.allclose(shape, shape.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(shape).max())):
        raise ValidationError("scenario.initial.shape: must be symmetric")
    if np.linalg.eigvalsh(0.5 * (shape + shape.T))[0] <= 0.0:
        raise ValidationError("scenario.initial.shape: must be positive definite")
    scale = _decode_number(init.get("scale", 1.0), "scenario.initial.scale")
    if not 0.0 < scale < math.inf:
        raise ValidationError("scenario.initial.scale: must be positive and finite")

    noise = d.get("noise", "uniform")
    if noise not in NOISE_POLICIES:
        raise ValidationError(f"scenario.noise: must be one of {', '.join(NOISE_POLICIES)}")

    has_models, has_template = "models" in d, "template" in d
    if has_models == has_template:
        raise ParseError("scenario: give exactly one of 'models' and 'template'")
    models, template = None, None
    if has_models:
        raw = d["models"]
        if not isinstance(raw, list) or not raw:
            raise ParseError("scenario.models: expected a nonempty list")
        if len(raw) not in (1, horizon):
            raise ValidationError("scenario.models: need one model or one per step "
                                  f"({horizon}), got {len(raw)}")
        models = tuple(_parse_model(m, n, f"scenario.models[{i}]") for i, m in enumerate(raw))
    else:
        template = _parse_template(d["template"], "scenario.template")

    schedule = _parse_schedule(d.get("schedule"), n, "scenario.schedule")
    return Scenario(n, horizon, center, 0.5 * (shape + shape.T), scale, noise, schedule,
                    models, template)


def scenario_to_dict(s: Scenario) -> dict:
    """Inverse of :func:`scenario_from_dict`."""
    sch = s.schedule
    sched = {"presence": sch.presence,
             "max_count": sch.max_count,
             "kinds": {k: float(v) for k, v in sch.kinds.items()},
             "width": [float(sch.width[0]), float(sch.width[1])],
             "adversarial": sch.adversarial}
    if sch.directions is not None:
        sched["directions"] = np.asarray(sch.directions).tolist()
    d = {"n": s.n,
         "horizon": s.horizon,
         "initial": {"center": s.center.tolist(), "shape": s.shape.tolist(),
                     "scale": _encode_number(s.scale)},
         "noise": s.noise,
         "schedule": sched}
    if s.models is not None:
        d["models"] = [{"A": m.A.tolist(), "B": m.B.tolist(), "tau": m.tau.tolist(),
                        "R": m.R.tolist()} for m in s.models]
    else:
        d["template"] = dict(s.template)
    return d


def load_scenario(path) -> Scenario:
    """Read and validate a scenario file.

    Raises
    ------
    ParseError
        The file is not valid JSON or a field has the wrong type.
    ValidationError
    FileNotFoundError
    """
    text = Path(path).read_text()
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc
    return scenario_from_dict(d)


def save_scenario(s: Scenario, path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(s), indent=1) + "\n")


def _stable_A(n, rng):
    # spectral radius <= 0.98, eigenvalue moduli kept away from zero so the
    # reachable sets do not collapse below double precision
    mods = rng.uniform(0.6, 0.98, size=n)
    J = np.zeros((n, n))
    i = 0
    while i < n:
        if i + 1 < n and rng.random() < 0.5:
            ang = rng.uniform(0.1, np.pi - 0.1)
            c, s = mods[i] * np.cos(ang), mods[i] * np.sin(ang)
            J[i:i + 2, i:i + 2] = [[c, -s], [s, c]]
            i += 2
        else:
            J[i, i] = mods[i] * rng.choice((-1.0, 1.0))
            i += 1
    V = np.eye(n) + 0.3 * rng.standard_normal((n, n)) / np.sqrt(n)
    return V @ J @ np.linalg.inv(V)


def _rotation_A(n, rng):
    Q, Rq = np.linalg.qr(rng.standard_normal((n, n)))
    return Q * np.sign(np.diag(Rq))


def _integrator_A(n, rng):
    dt = rng.uniform(0.05, 0.2)
    return np.eye(n) + dt * np.eye(n, k=1)


def template_models(n: int, horizon: int, name: str, seed: int = 0, m: int = 1, l: int = 0,
                    noise_scale: float = 0.3) -> tuple:
    """Time-invariant dynamics from a named template.

    ``stable`` has spectral radius at most 0.98, ``rotation`` is orthogonal
    (norm one) and ``integrator`` is a chain of discrete integrators (norm
    above one). Inputs follow fixed sinusoids so that ``B tau`` is known.
    """
    rng = np.random.default_rng(seed)
    A = {"stable": _stable_A, "rotation": _rotation_A, "integrator": _integrator_A}[name](n, rng)
    R = noise_scale * rng.standard_normal((n, m))
    B = rng.standard_normal((n, l))
    omega = rng.uniform(0.05, 0.5, size=l)
    phase = rng.uniform(0.0, 2.0 * np.pi, size=l)
    out = []
    for k in range(horizon):
        tau = 0.1 * np.sin(omega * k + phase)
        out.append(ProcessModel(A, B, tau, R))
    return tuple(out)


def generate_scenario(template: str, n: int, horizon: int, seed: int, m: int = None,
                      l: int = 0, noise_scale: float = None, schedule: Schedule = None,
                      noise: str = "uniform", radius: float = 2.0) -> Scenario:
    """Scenario around a named template with a ball as initial set."""
    if template not in TEMPLATES:
        raise ValidationError(f"unknown template {template!r}")
    if n < 1 or horizon < 1:
        raise ValidationError("n and horizon must be positive")
    if m is None:
        m = max(1, n // 2)
    if noise_scale is None:
        noise_scale = 0.3 if template == "stable" else 0.05
    tpl = {"name": template, "seed": int(seed), "m": int(m), "l": int(l),
           "noise_scale": float(noise_scale)}
    return Scenario(n, horizon, np.zeros(n), np.eye(n), radius ** 2, noise,
                    schedule or Schedule(), None, tpl)
