"""Model parameters and the strategy-count lattice shared by every module.

All types are frozen dataclasses: validate once, then share freely between
workers. The default construction reproduces the baseline experimental
economy: two groups of 20, mu = 1/40, c = 1, b = 1.2, and selection strength
beta = Z / (b - c) = 200, the scaling that keeps beta times a typical
utility gap of order one.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

FERMI_SIGNS = ("standard", "literal")
FOCAL_CONDITIONINGS = ("exact", "naive")

CONFIG_KEYS = (
    "z_d", "z_m", "epsilon", "gamma", "k", "k_g", "k_m",
    "b", "c", "beta", "mu", "fermi_sign", "focal_conditioning",
)
_OPTIONAL_KEYS = ("fermi_sign", "focal_conditioning")


class ValidationError(ValueError):
    """Raised when a configuration violates one or more invariants."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class ProviderPopulation:
    z_d: int = 20
    z_m: int = 20

    @property
    def z(self) -> int:
        return self.z_d + self.z_m

    def problems(self) -> list[str]:
        out = []
        if self.z_d < 2:
            out.append("z_d must be at least 2 (imitation divides by Z_g - 1)")
        if self.z_m < 2:
            out.append("z_m must be at least 2 (imitation divides by Z_g - 1)")
        return out


@dataclass(frozen=True)
class UserPopulation:
    epsilon: float
    gamma: float
    k: int

    def problems(self) -> list[str]:
        out = []
        if not 0.0 <= self.epsilon <= 1.0:
            out.append("epsilon must lie in [0, 1]")
        if not 0.0 <= self.gamma <= 1.0:
            out.append("gamma must lie in [0, 1]")
        if self.k < 1:
            out.append("k must be a positive integer")
        return out


@dataclass(frozen=True)
class PlatformPolicy:
    k_g: int
    k_m: int = 0

    def problems(self) -> list[str]:
        out = []
        if self.k_m < 0:
            out.append("k_m must be nonnegative")
        if self.k_m > self.k_g:
            out.append("k_m exceeds k_g")
        return out


@dataclass(frozen=True)
class EconomicParams:
    b: float = 1.2
    c: float = 1.0

    def problems(self) -> list[str]:
        out = []
        if self.c <= 0:
            out.append("c must be positive")
        if self.b <= self.c:
            out.append("b must exceed c")
        return out


@dataclass(frozen=True)
class EvolutionParams:
    beta: float = 200.0
    mu: float = 1.0 / 40.0

    def problems(self) -> list[str]:
        out = []
        if self.beta < 0:
            out.append("beta must be nonnegative")
        if not 0.0 <= self.mu <= 1.0:
            out.append("mu must lie in [0, 1]")
        return out


@dataclass(frozen=True)
class State:
    """Point (h_M, h_D) on the strategy-count lattice."""

    h_m: int
    h_d: int


@dataclass(frozen=True)
class ModelConfig:
    population: ProviderPopulation = field(default_factory=ProviderPopulation)
    users: UserPopulation = field(default_factory=lambda: UserPopulation(0.3, 0.6, 10))
    policy: PlatformPolicy = field(default_factory=lambda: PlatformPolicy(k_g=0, k_m=0))
    economics: EconomicParams = field(default_factory=EconomicParams)
    evolution: EvolutionParams = field(default_factory=EvolutionParams)
    fermi_sign: str = "standard"
    focal_conditioning: str = "exact"

    def problems(self) -> list[str]:
        out = []
        out.extend(self.population.problems())
        out.extend(self.users.problems())
        out.extend(self.policy.problems())
        out.extend(self.economics.problems())
        out.extend(self.evolution.problems())
        if self.users.k > self.population.z:
            out.append("k exceeds the provider population size Z")
        if self.policy.k_g > self.users.k:
            out.append("k_g exceeds k")
        if self.fermi_sign not in FERMI_SIGNS:
            out.append(f"fermi_sign must be one of {FERMI_SIGNS}")
        if self.focal_conditioning not in FOCAL_CONDITIONINGS:
            out.append(f"focal_conditioning must be one of {FOCAL_CONDITIONINGS}")
        return out

    def with_params(self, **kwargs) -> "ModelConfig":
        """Return a copy with flat parameters (epsilon, k_g, beta, ...) replaced."""
        pop = self.population
        users = self.users
        pol = self.policy
        econ = self.economics
        evo = self.evolution
        top = {}
        for key, value in kwargs.items():
            if key in ("z_d", "z_m"):
                pop = replace(pop, **{key: int(value)})
            elif key in ("epsilon", "gamma", "k"):
                cast = int if key == "k" else float
                users = replace(users, **{key: cast(value)})
            elif key in ("k_g", "k_m"):
                pol = replace(pol, **{key: int(value)})
            elif key in ("b", "c"):
                econ = replace(econ, **{key: float(value)})
            elif key in ("beta", "mu"):
                evo = replace(evo, **{key: float(value)})
            elif key in ("fermi_sign", "focal_conditioning"):
                top[key] = value
            else:
                raise KeyError(f"unknown parameter {key!r}")
        return replace(self, population=pop, users=users, policy=pol,
                       economics=econ, evolution=evo, **top)

    def flat(self) -> dict:
        """Flat dict using the JSON interface key names."""
        return {
            "z_d": self.population.z_d,
            "z_m": self.population.z_m,
            "epsilon": self.users.epsilon,
            "gamma": self.users.gamma,
            "k": self.users.k,
            "k_g": self.policy.k_g,
            "k_m": self.policy.k_m,
            "b": self.economics.b,
            "c": self.economics.c,
            "beta": self.evolution.beta,
            "mu": self.evolution.mu,
            "fermi_sign": self.fermi_sign,
            "focal_conditioning": self.focal_conditioning,
        }


def validate(config: ModelConfig) -> ModelConfig:
    """Return the config unchanged iff every invariant holds.

    Raises ValidationError listing every violated invariant by name.
    """
    problems = config.problems()
    if problems:
        raise ValidationError(problems)
    return config


def state_index(state: State, population: ProviderPopulation) -> int:
    """Lexicographic index h_m * (Z_D + 1) + h_d of a lattice point."""
    if not 0 <= state.h_m <= population.z_m:
        raise ValidationError([f"h_m={state.h_m} outside 0..{population.z_m}"])
    if not 0 <= state.h_d <= population.z_d:
        raise ValidationError([f"h_d={state.h_d} outside 0..{population.z_d}"])
    return state.h_m * (population.z_d + 1) + state.h_d


def state_from_index(index: int, population: ProviderPopulation) -> State:
    """Inverse of state_index."""
    n = (population.z_m + 1) * (population.z_d + 1)
    if not 0 <= index < n:
        raise ValidationError([f"index={index} outside 0..{n - 1}"])
    return State(h_m=index // (population.z_d + 1), h_d=index % (population.z_d + 1))


def lattice_size(population: ProviderPopulation) -> int:
    return (population.z_m + 1) * (population.z_d + 1)


def config_from_dict(doc: dict) -> ModelConfig:
    """Build and validate a ModelConfig from the JSON interface document.

    Rejects unknown keys; fermi_sign and focal_conditioning are the only
    optional keys.
    """
    problems = []
    unknown = sorted(set(doc) - set(CONFIG_KEYS))
    for key in unknown:
        problems.append(f"unknown key {key!r}")
    missing = [k for k in CONFIG_KEYS if k not in doc and k not in _OPTIONAL_KEYS]
    for key in missing:
        problems.append(f"missing key {key!r}")
    if problems:
        raise ValidationError(problems)

    def _int(key):
        v = doc[key]
        if isinstance(v, bool) or not isinstance(v, int):
            problems.append(f"key {key!r} must be an integer")
            return 0
        return v

    def _num(key):
        v = doc[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            problems.append(f"key {key!r} must be a number")
            return 0.0
        return float(v)

    config = ModelConfig(
        population=ProviderPopulation(z_d=_int("z_d"), z_m=_int("z_m")),
        users=UserPopulation(epsilon=_num("epsilon"), gamma=_num("gamma"), k=_int("k")),
        policy=PlatformPolicy(k_g=_int("k_g"), k_m=_int("k_m")),
        economics=EconomicParams(b=_num("b"), c=_num("c")),
        evolution=EvolutionParams(beta=_num("beta"), mu=_num("mu")),
        fermi_sign=doc.get("fermi_sign", "standard"),
        focal_conditioning=doc.get("focal_conditioning", "exact"),
    )
    if problems:
        raise ValidationError(problems)
    return validate(config)


def config_from_json(text: str) -> ModelConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError([f"malformed JSON: {exc}"]) from exc
    if not isinstance(doc, dict):
        raise ValidationError(["configuration document must be a JSON object"])
    return config_from_dict(doc)
