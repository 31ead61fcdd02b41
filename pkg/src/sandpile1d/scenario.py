"""Scenario files: a named, seeded run of one CLI command.

Two encodings of the same schema are accepted.  INI::

    [scenario]
    name = hole-law-n5
    command = prop51
    seed = 1
    output = out/prop51

    [params]
    n = 5
    k = 10
    samples = 100000

or JSON with top-level keys ``name``, ``command``, ``seed``, ``output`` and
``params``.  Parameter names may use dashes or underscores.
"""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple


def int_list(text) -> List[int]:
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    if isinstance(text, int):
        return [text]
    return [int(v) for v in str(text).replace(" ", "").split(",") if v]


@dataclass(frozen=True)
class Param:
    kind: Callable[[Any], Any]
    default: Any = None
    required: bool = False
    help: str = ""


SCHEMA: Dict[str, Dict[str, Param]] = {
    "stabilize": {
        "n": Param(int, required=True, help="volume [-n, n]"),
        "grains": Param(str, required=True, help="grain field 'lo hi c(lo) ... c(hi)'"),
        "oracle_seed": Param(int, None, help="also run the grain-by-grain oracle with this seed"),
    },
    "avalanche": {
        "sites": Param(int_list, None, help="initial critical set, comma separated"),
        "interval": Param(int, None, help="start from the critical set [-m, m]"),
        "horizon": Param(float, 1.0),
        "samples": Param(int, 0, help="if > 0, also estimate E|A_t| over this many runs"),
    },
    "couple": {
        "kind": Param(str, "n", help="avalanche, n or n1n"),
        "n": Param(int, 2),
        "horizon": Param(float, 2.0),
        "samples": Param(int, 1000),
        "half_width": Param(int, 6, help="random initial pairs live on [-w, w]"),
    },
    "fvsp": {
        "n": Param(int, 1),
        "t": Param(float, 0.5),
        "samples": Param(int, 10000),
    },
    "exact": {
        "n": Param(int, 1),
        "check": Param(str, "all", help="all, stationary, reversibility, bijection, lemma"),
        "pairs": Param(int, 100, help="random (f, g) pairs for the reversibility check"),
        "trials": Param(int, 200, help="grain fields for the lemma check"),
    },
    "series": {
        "f": Param(str, "occ0", help="occ0, pair01 or 'interval-len k [cap]'"),
        "eta": Param(str, None, help="configuration file or inline 'lo hi tail h...'"),
        "t": Param(float, required=True),
        "tol": Param(float, 1e-8),
        "max_depth": Param(int, 8),
    },
    "theorem51": {
        "t": Param(float, 14.0),
        "n": Param(int_list, [25, 50, 100]),
        "samples": Param(int, 10000),
        "delta": Param(float, 0.5),
    },
    "prop51": {
        "n": Param(int, required=True),
        "k": Param(int, 20),
        "samples": Param(int, 100000),
    },
    "discrete": {
        "n": Param(int, 2),
        "steps": Param(int, 200),
        "samples": Param(int, 10000),
    },
}


class ScenarioError(ValueError):
    """Schema violation; ``field`` names the offending entry."""

    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


@dataclass
class Scenario:
    name: str
    command: str
    params: Dict[str, Any] = field(default_factory=dict)
    seed: Optional[int] = None
    output: Optional[str] = None

    def canonical(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "command": self.command,
            "seed": self.seed,
            "params": {k: self.params[k] for k in sorted(self.params)},
        }

    def digest(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _norm(key: str) -> str:
    return key.strip().replace("-", "_")


def normalize(command: str, raw: Dict[str, Any]) -> Tuple[Dict[str, Any], List[str]]:
    """Convert and default ``raw`` params; returns ``(params, warnings)``."""
    if command not in SCHEMA:
        raise ScenarioError("command", f"unknown command {command!r}; choose one of {', '.join(SCHEMA)}")
    schema = SCHEMA[command]
    raw = {_norm(k): v for k, v in raw.items() if v is not None}
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ScenarioError(f"params.{unknown[0]}", f"unknown parameter for {command}")
    out = {}
    for name, p in schema.items():
        if name in raw:
            try:
                out[name] = p.kind(raw[name])
            except (TypeError, ValueError) as exc:
                raise ScenarioError(f"params.{name}", str(exc)) from None
        elif p.required:
            raise ScenarioError(f"params.{name}", "required")
        else:
            out[name] = p.default
    return out, _warnings(command, out)


def _warnings(command: str, params: Dict[str, Any]) -> List[str]:
    warns = []
    if command == "series":
        from .series import radius

        try:
            r = radius(load_config(params["eta"]))
        except Exception as exc:  # reported, the run itself will raise
            warns.append(f"params.eta: cannot compute the radius ({exc})")
        else:
            if params["t"] >= r:
                warns.append(f"params.t: t = {params['t']} >= radius {r:.6g}; the run would fail")
    return warns


def load_config(source: Optional[str]):
    """``None`` means all ones; otherwise a file path or inline text."""
    from .lattice import HeightConfig

    if source is None:
        return HeightConfig.all_ones()
    p = Path(source)
    text = p.read_text() if p.is_file() else source
    return HeightConfig.from_text(text)


def parse_text(text: str, fmt: Optional[str] = None) -> Scenario:
    """Parse a scenario from INI or JSON text."""
    if fmt is None:
        fmt = "json" if text.lstrip().startswith("{") else "ini"
    if fmt == "json":
        data = json.loads(text)
        if not isinstance(data, dict):
            raise ScenarioError("scenario", "JSON scenario must be an object")
        top = data
        params = data.get("params", {})
    else:
        cp = configparser.ConfigParser(interpolation=None)
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ScenarioError("scenario", str(exc)) from None
        if "scenario" not in cp:
            raise ScenarioError("scenario", "missing [scenario] section")
        top = dict(cp["scenario"])
        params = dict(cp["params"]) if "params" in cp else {}
        extra = [s for s in cp.sections() if s not in ("scenario", "params")]
        if extra:
            raise ScenarioError(extra[0], "unknown section")
    allowed = {"name", "command", "seed", "output", "params"}
    for k in top:
        if k not in allowed:
            raise ScenarioError(k, "unknown field")
    if "command" not in top:
        raise ScenarioError("command", "required")
    seed = top.get("seed")
    try:
        seed = None if seed in (None, "") else int(seed)
    except ValueError:
        raise ScenarioError("seed", f"not an integer: {seed!r}") from None
    if seed is not None and seed < 0:
        raise ScenarioError("seed", "must be nonnegative")
    command = str(top["command"]).strip()
    norm, _ = normalize(command, params)
    return Scenario(str(top.get("name", command)), command, norm, seed, top.get("output"))


def load(path) -> Scenario:
    p = Path(path)
    fmt = "json" if p.suffix.lower() == ".json" else None
    return parse_text(p.read_text(), fmt)


def validate(path) -> Tuple[bool, List[str]]:
    """Schema check without execution; returns ``(ok, messages)``."""
    try:
        sc = load(path)
    except (OSError, ScenarioError, json.JSONDecodeError) as exc:
        return False, [str(exc)]
    _, warns = normalize(sc.command, sc.params)
    return True, ["OK"] + [f"warning: {w}" for w in warns]

