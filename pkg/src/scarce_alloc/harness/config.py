"""Experiment configuration: a flat ``key=value`` file with dotted keys.

Recognised keys (defaults in ``data/default.cfg``)::

    cohort.n_patients        positive int
    cohort.severity_shape    Gamma shape of severity weights
    cohort.severity_scale    Gamma scale of severity weights
    cohort.risk_alpha        Beta alpha of baseline risk
    cohort.risk_beta         Beta beta of baseline risk
    cohort.target_auroc      in (0.5, 1]
    cohort.auroc_tolerance   > 0
    cohort.n_bins            recalibration bins, >= 2
    cohort.noise_fit         per_run | once
    resources.<name>.capacity        nonnegative int
    resources.<name>.risk_reduction  in (0, 1]
    lambda                   penalty weight, >= 0
    threshold                risk threshold in [0, 1]
    unallocated              any | per_resource
    severity_quantile        in (0, 1)
    policies                 comma list from threshold, greedy, random, exact
    n_runs                   positive int
    root_seed                nonnegative int
    evi.n_samples            positive int

``root_seed`` falls back to ``$SCARCE_ALLOC_SEED`` when the file omits it.
"""

from __future__ import annotations

import dataclasses
import functools
import os
import re
from dataclasses import dataclass, field
from importlib import resources as importlib_resources
from pathlib import Path

from ..allocation import POLICY_NAMES
from ..errors import ConfigError, ValidationError
from ..population import CohortSpec, Resource

SEED_ENV = "SCARCE_ALLOC_SEED"

_RESOURCE_KEY = re.compile(r"^resources\.([A-Za-z_][A-Za-z0-9_-]*)\.(capacity|risk_reduction)$")


@dataclass(frozen=True)
class ExperimentConfig:
    cohort: CohortSpec = field(default_factory=CohortSpec)
    lam: float = 0.001
    threshold: float = 0.8
    policies: tuple[str, ...] = ("threshold", "greedy", "random")
    n_runs: int = 100
    root_seed: int = 0
    severity_quantile: float = 0.9
    auroc_tolerance: float = 0.01
    n_bins: int = 10
    noise_fit: str = "per_run"
    unallocated: str = "any"
    evi_samples: int = 200

    def __post_init__(self):
        object.__setattr__(self, "policies", tuple(self.policies))
        checks = [
            ("lambda", self.lam >= 0, "must be >= 0"),
            ("threshold", 0.0 <= self.threshold <= 1.0, "must lie in [0, 1]"),
            ("n_runs", int(self.n_runs) == self.n_runs and self.n_runs >= 1, "must be a positive integer"),
            ("root_seed", int(self.root_seed) == self.root_seed and self.root_seed >= 0,
             "must be a nonnegative integer"),
            ("severity_quantile", 0.0 < self.severity_quantile < 1.0, "must lie in (0, 1)"),
            ("cohort.auroc_tolerance", self.auroc_tolerance > 0, "must be > 0"),
            ("cohort.n_bins", int(self.n_bins) == self.n_bins and self.n_bins >= 2, "must be an integer >= 2"),
            ("cohort.noise_fit", self.noise_fit in ("per_run", "once"), "must be per_run or once"),
            ("unallocated", self.unallocated in ("any", "per_resource"), "must be any or per_resource"),
            ("evi.n_samples", int(self.evi_samples) == self.evi_samples and self.evi_samples >= 1,
             "must be a positive integer"),
        ]
        for name, ok, message in checks:
            if not ok:
                raise ConfigError(f"{name} {message}")
        unknown = [p for p in self.policies if p not in POLICY_NAMES]
        if unknown:
            raise ConfigError(f"policies: unknown policy {unknown[0]!r} (known: {', '.join(POLICY_NAMES)})")
        if len(set(self.policies)) != len(self.policies):
            raise ConfigError("policies: duplicate policy name")

    @property
    def resources(self) -> tuple[Resource, ...]:
        return self.cohort.resources

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def with_capacities(self, capacities) -> "ExperimentConfig":
        res = tuple(r.with_capacity(c) for r, c in zip(self.resources, capacities))
        return self.replace(cohort=dataclasses.replace(self.cohort, resources=res))

    def to_lines(self) -> list[str]:
        """Serialise back into the file format (round-trips through :func:`parse_config`)."""
        c = self.cohort
        lines = [
            f"cohort.n_patients={c.n_patients}",
            f"cohort.severity_shape={c.severity_shape!r}",
            f"cohort.severity_scale={c.severity_scale!r}",
            f"cohort.risk_alpha={c.risk_alpha!r}",
            f"cohort.risk_beta={c.risk_beta!r}",
            f"cohort.target_auroc={c.target_auroc!r}",
            f"cohort.auroc_tolerance={self.auroc_tolerance!r}",
            f"cohort.n_bins={self.n_bins}",
            f"cohort.noise_fit={self.noise_fit}",
        ]
        for r in c.resources:
            lines.append(f"resources.{r.name}.capacity={r.capacity}")
            lines.append(f"resources.{r.name}.risk_reduction={r.risk_reduction_factor!r}")
        lines += [
            f"lambda={self.lam!r}",
            f"threshold={self.threshold!r}",
            f"unallocated={self.unallocated}",
            f"severity_quantile={self.severity_quantile!r}",
            f"policies={','.join(self.policies)}",
            f"n_runs={self.n_runs}",
            f"root_seed={self.root_seed}",
            f"evi.n_samples={self.evi_samples}",
        ]
        return lines


def default_config_path() -> Path:
    return Path(str(importlib_resources.files("scarce_alloc") / "data" / "default.cfg"))


_as_int = int


def _as_float(text):
    value = float(text)
    if value != value:
        raise ValueError("NaN not allowed")
    return value


_SCALARS = {
    "cohort.n_patients": _as_int,
    "cohort.severity_shape": _as_float,
    "cohort.severity_scale": _as_float,
    "cohort.risk_alpha": _as_float,
    "cohort.risk_beta": _as_float,
    "cohort.target_auroc": _as_float,
    "cohort.auroc_tolerance": _as_float,
    "cohort.n_bins": _as_int,
    "cohort.noise_fit": str,
    "lambda": _as_float,
    "threshold": _as_float,
    "unallocated": str,
    "severity_quantile": _as_float,
    "policies": lambda s: tuple(p.strip() for p in s.split(",") if p.strip()),
    "n_runs": _as_int,
    "root_seed": _as_int,
    "evi.n_samples": _as_int,
}


def _read_pairs(text: str, origin: str) -> dict[str, tuple[int, str]]:
    pairs: dict[str, tuple[int, str]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{lineno}: expected key=value, got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{origin}:{lineno}: empty key")
        if key not in _SCALARS and not _RESOURCE_KEY.match(key):
            raise ConfigError(f"{origin}:{lineno}: unknown key {key!r}")
        if key in pairs:
            raise ConfigError(f"{origin}:{lineno}: duplicate key {key!r}")
        pairs[key] = (lineno, value)
    return pairs


def _convert(pairs, origin):
    values, resources = {}, {}
    for key, (lineno, text) in pairs.items():
        match = _RESOURCE_KEY.match(key)
        try:
            if match:
                name, attr = match.groups()
                convert = _as_int if attr == "capacity" else _as_float
                resources.setdefault(name, {})[attr] = (lineno, convert(text))
            else:
                values[key] = (lineno, _SCALARS[key](text))
        except ValueError:
            raise ConfigError(f"{origin}:{lineno}: bad value for {key}: {text!r}") from None
    return values, resources


def parse_config(text: str, origin: str = "<config>", base: "ExperimentConfig | None" = None,
                 env: dict | None = None) -> ExperimentConfig:
    """Parse config text on top of ``base`` (the packaged defaults if omitted)."""
    if base is None:
        base = _packaged_defaults()
    env = os.environ if env is None else env
    values, resource_overrides = _convert(_read_pairs(text, origin), origin)

    def get(key, default):
        return values[key][1] if key in values else default

    resources = {r.name: {"capacity": r.capacity, "risk_reduction": r.risk_reduction_factor}
                 for r in base.resources}
    for name, attrs in resource_overrides.items():
        if name not in resources:
            missing = {"capacity", "risk_reduction"} - attrs.keys()
            if missing:
                lineno = min(line for line, _ in attrs.values())
                raise ConfigError(f"{origin}:{lineno}: new resource {name!r} needs {sorted(missing)[0]}")
            resources[name] = {}
        for attr, (_, value) in attrs.items():
            resources[name][attr] = value

    seed = base.root_seed
    if "root_seed" in values:
        seed = values["root_seed"][1]
    elif env.get(SEED_ENV):
        try:
            seed = int(env[SEED_ENV])
        except ValueError:
            raise ConfigError(f"${SEED_ENV}: not an integer: {env[SEED_ENV]!r}") from None

    try:
        built = tuple(
            Resource(k, name, attrs["capacity"], attrs["risk_reduction"])
            for k, (name, attrs) in enumerate(resources.items())
        )
        c = base.cohort
        cohort = CohortSpec(
            n_patients=get("cohort.n_patients", c.n_patients),
            severity_shape=get("cohort.severity_shape", c.severity_shape),
            severity_scale=get("cohort.severity_scale", c.severity_scale),
            risk_alpha=get("cohort.risk_alpha", c.risk_alpha),
            risk_beta=get("cohort.risk_beta", c.risk_beta),
            resources=built,
            target_auroc=get("cohort.target_auroc", c.target_auroc),
        )
        return ExperimentConfig(
            cohort=cohort,
            lam=get("lambda", base.lam),
            threshold=get("threshold", base.threshold),
            policies=get("policies", base.policies),
            n_runs=get("n_runs", base.n_runs),
            root_seed=seed,
            severity_quantile=get("severity_quantile", base.severity_quantile),
            auroc_tolerance=get("cohort.auroc_tolerance", base.auroc_tolerance),
            n_bins=get("cohort.n_bins", base.n_bins),
            noise_fit=get("cohort.noise_fit", base.noise_fit),
            unallocated=get("unallocated", base.unallocated),
            evi_samples=get("evi.n_samples", base.evi_samples),
        )
    except ConfigError as exc:
        raise ConfigError(f"{origin}: {exc}") from None
    except ValidationError as exc:
        raise ConfigError(f"{origin}: {exc}") from None


@functools.cache
def _packaged_defaults() -> ExperimentConfig:
    path = default_config_path()
    return parse_config(path.read_text(encoding="utf-8"), str(path), base=ExperimentConfig(), env={})


def load_config(path=None, env: dict | None = None) -> ExperimentConfig:
    """Load a config file; keys it omits take the packaged defaults.

    ``path=None`` returns the packaged defaults (with ``$SCARCE_ALLOC_SEED``
    applied, if set).
    """
    if path is None:
        return parse_config("", "<defaults>", env=env)
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror or exc}") from None
    return parse_config(text, str(path), env=env)
