"""Experiment configs: flat `key = value` text with one `command` key."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path


class ConfigError(ValueError):
    """A config violates its command schema; `field` names the offender."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


def _int(text: str) -> int:
    text = text.strip()
    if "^" in text:
        base, exp = text.split("^")
        return int(base) ** int(exp)
    if "e" in text.lower():
        return int(float(text))
    return int(text)


def _int_list(text: str) -> tuple[int, ...]:
    """Comma list; each item may be a range lo:hi:step (hi inclusive)."""
    out = []
    for item in str(text).split(","):
        item = item.strip()
        if not item:
            continue
        if ":" in item:
            parts = [_int(x) for x in item.split(":")]
            lo, hi = parts[0], parts[1]
            step = parts[2] if len(parts) > 2 else 1
            if step < 1:
                raise ValueError("range step must be positive")
            out.extend(range(lo, hi + 1, step))
        else:
            out.append(_int(item))
    if not out:
        raise ValueError("empty list")
    return tuple(out)


def _bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


_PARSERS = {"int": _int, "ints": _int_list, "float": float, "str": str, "bool": _bool}


def _format(kind: str, value) -> str:
    if kind == "ints":
        return ",".join(str(v) for v in value)
    if kind == "bool":
        return "true" if value else "false"
    if kind == "float":
        return repr(float(value))
    return str(value)


@dataclass(frozen=True)
class Param:
    kind: str
    default: object = None
    required: bool = False
    choices: tuple = ()
    minimum: int | None = None
    help: str = ""


COMMON = {
    "out": Param("str", "results", help="output directory"),
    "threads": Param("int", 1, minimum=1, help="worker threads for per-prime loops"),
    "seed": Param("int", None, help="random seed; mandatory for sampled strategies"),
    "timings": Param("bool", False, help="record wall-clock runtime_ms columns (breaks byte-determinism)"),
    "progress": Param("float", 5.0, help="seconds between progress lines on stderr"),
}

_P_RANGE = {
    "p": Param("ints", None, help="prime(s), comma list or lo:hi:step"),
    "p_min": Param("int", None, minimum=2, help="lower end of a prime range"),
    "p_max": Param("int", None, minimum=2, help="upper end of a prime range"),
}

SCHEMAS: dict[str, dict[str, Param]] = {
    "factorials": {
        "p": Param("int", required=True, minimum=2), "L": Param("int", 0, minimum=0),
        "N": Param("int", required=True, minimum=1), "stride": Param("int", 1 << 20, minimum=1),
        "allow_zero_tail": Param("bool", False),
    },
    "card": {"p": Param("int", required=True, minimum=2), "N": Param("ints", required=True),
             "budget": Param("int", 1 << 34, minimum=1)},
    "growth": {
        "p": Param("int", required=True, minimum=2), "N": Param("ints", required=True),
        "strategy": Param("str", "exact", choices=("exact", "sampled")),
        "samples": Param("int", 20000, minimum=2), "constant": Param("float", 1.0),
        "budget": Param("int", 1 << 34, minimum=1),
    },
    "energy": {
        "p": Param("int", required=True, minimum=2),
        "left": Param("str", "interval", choices=("interval", "primes", "factorial")),
        "N": Param("ints", required=True),
        "right": Param("str", "factorial", choices=("factorial", "interval", "primes")),
        "right_N": Param("int", required=True, minimum=1), "constant": Param("float", 1.0),
        "budget": Param("int", 1 << 34, minimum=1),
    },
    "expsum": {
        "p": Param("int", required=True, minimum=2), "L": Param("int", 0, minimum=0),
        "N": Param("int", required=True, minimum=1),
        "kind": Param("str", "single", choices=("single", "double", "max")),
        "a": Param("ints", (1,)), "A_N": Param("int", None, minimum=1),
        "strategy": Param("str", "full", choices=("full", "sampled")),
        "k": Param("int", 64, minimum=1), "cap": Param("int", 1 << 20, minimum=2),
    },
    "moments": {
        "p": Param("ints", required=True), "L": Param("int", 0, minimum=0),
        "N": Param("ints", required=True), "ell": Param("ints", (1, 2, 3)),
        "check": Param("bool", True), "budget": Param("int", 1 << 32, minimum=1),
        "cap": Param("int", 1 << 20, minimum=2),
    },
    "solve": {
        "p": Param("int", required=True, minimum=3),
        "shape": Param("str", "k_term_product",
                       choices=("wilson_pair", "two_product", "k_term_product", "product_plus_factorials")),
        "k": Param("int", 5, minimum=1), "M": Param("int", None, minimum=1),
        "lambda": Param("ints", None), "all": Param("bool", False),
        "budget": Param("int", 1 << 34, minimum=1),
    },
    "cp-search": {**_P_RANGE, "M": Param("int", None, minimum=1), "c_max": Param("int", None, minimum=1)},
    "wilson-check": dict(_P_RANGE),
    "erdos-stats": {**_P_RANGE, "cap": Param("int", 1 << 26, minimum=2)},
    "ruzsa-check": {
        **_P_RANGE, "trials": Param("int", 100, minimum=1), "max_size": Param("int", 200, minimum=1),
    },
    "katz-shen": {
        "p": Param("int", required=True, minimum=3), "x_size": Param("int", 8, minimum=1),
        "b_size": Param("int", 5, minimum=1), "k": Param("int", 2, minimum=1),
        "strategy": Param("str", "both", choices=("exhaustive", "greedy", "both")),
        "trials": Param("int", 10, minimum=1),
    },
    "cg-count": {
        **_P_RANGE, "s0": Param("ints", None), "X": Param("int", required=True, minimum=1),
        "Y": Param("int", required=True, minimum=1),
    },
    "bounds": {
        "profile": Param("str", required=True, choices=(
            "lemma_quotient", "theorem_product", "theorem_small_n", "theorem_interval", "corollary_interval")),
        "p": Param("int", required=True, minimum=2), "N": Param("ints", required=True),
        "M": Param("int", None, minimum=1), "constant": Param("float", 1.0),
        "cutoff": Param("float", 1.0),
    },
}

# commands whose run draws random numbers
SAMPLED = {"ruzsa-check", "katz-shen"}


def schema(command: str) -> dict[str, Param]:
    if command not in SCHEMAS:
        raise ConfigError("command", f"unknown command {command!r}; choose from {sorted(SCHEMAS)}")
    return {**COMMON, **SCHEMAS[command]}


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    params: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.params[key]

    def get(self, key, default=None):
        value = self.params.get(key)
        return default if value is None else value

    def serialize(self) -> str:
        sch = schema(self.command)
        lines = [f"command = {self.command}"]
        for key in sorted(self.params):
            value = self.params[key]
            if value is not None:
                lines.append(f"{key} = {_format(sch[key].kind, value)}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> dict:
        sch = schema(self.command)
        out = {"command": self.command}
        for key in sorted(self.params):
            value = self.params[key]
            out[key] = list(value) if sch[key].kind == "ints" and value is not None else value
        return out


def parse_text(text: str) -> dict[str, str]:
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}", f"expected key = value, got {line!r}")
        raw[key.strip()] = value.strip()
    return raw


def build(raw: dict[str, str], command: str | None = None) -> ExperimentConfig:
    """Validate raw string values against the command schema."""
    raw = dict(raw)
    command = command or raw.pop("command", None)
    raw.pop("command", None)
    if not command:
        raise ConfigError("command", "missing")
    sch = schema(command)
    params = {}
    for key, text in raw.items():
        if key not in sch:
            raise ConfigError(key, f"unknown parameter for command {command!r}")
        param = sch[key]
        try:
            value = _PARSERS[param.kind](text)
        except (TypeError, ValueError) as exc:
            raise ConfigError(key, f"cannot parse {text!r} as {param.kind}: {exc}") from None
        if param.choices and value not in param.choices:
            raise ConfigError(key, f"{value!r} not in {param.choices}")
        if param.minimum is not None:
            vals = value if isinstance(value, tuple) else (value,)
            if any(v < param.minimum for v in vals):
                raise ConfigError(key, f"must be >= {param.minimum}")
        params[key] = value
    for key, param in sch.items():
        if key not in params:
            if param.required:
                raise ConfigError(key, "required")
            params[key] = param.default
    cfg = ExperimentConfig(command, params)
    _cross_checks(cfg)
    return cfg


def _cross_checks(cfg: ExperimentConfig) -> None:
    p = cfg.params
    needs_seed = cfg.command in SAMPLED or p.get("strategy") == "sampled"
    if needs_seed and p.get("seed") is None:
        raise ConfigError("seed", "mandatory for sampled strategies")
    if "p_min" in p and p.get("p") is None and (p.get("p_min") is None or p.get("p_max") is None):
        raise ConfigError("p", "give p or both p_min and p_max")
    if cfg.command == "solve" and not p.get("all") and p.get("lambda") is None:
        raise ConfigError("lambda", "give lambda or all = true")
    if cfg.command == "solve" and p["shape"] in ("k_term_product", "product_plus_factorials") and p.get("M") is None:
        raise ConfigError("M", f"required for shape {p['shape']}")
    if cfg.command == "expsum" and p["kind"] == "double" and p.get("A_N") is None:
        raise ConfigError("A_N", "required for kind = double")


def load(path, overrides: dict[str, str] | None = None, command: str | None = None) -> ExperimentConfig:
    raw = parse_text(Path(path).read_text()) if path else {}
    if command and raw.get("command", command) != command:
        raise ConfigError("command", f"config file is for {raw['command']!r}, not {command!r}")
    raw.update(overrides or {})
    return build(raw, command)


def parse(text: str) -> ExperimentConfig:
    return build(parse_text(text))
