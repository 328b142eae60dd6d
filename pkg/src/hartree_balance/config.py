"""Run configuration: flat ``[section]`` blocks of ``key = value`` lines.

Grammar (comments start with ``#`` or ``;``)::

    [run]        command
    [problem]    N, gamma, gamma1, gamma2, c, c_list, c1, c2, zero_mass,
                 window, factors
    [grid]       kind (tensor | radial), L, n, M, R_max, stretch
    [solver]     tau0, backtrack, grow, max_iter, tol, sigma, amplitude,
                 initial, perturbation, max_restarts
    [dynamics]   T, dt, monitor_every, R_virial, adaptive, tail_radius,
                 sigma, amplitude, nonlinear
    [io]         output, checkpoint, seed, workers

Lists are comma separated. Every violation is collected before raising.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field
from typing import Any, Callable

from .errors import ConfigError
from .ground_state import DEFAULT_SEED

COMMANDS = (
    "choquard",
    "ground-state",
    "scan-m",
    "scan-gamma",
    "critical-mass",
    "evolve",
    "virial",
    "blowup",
    "decay-fit",
    "subadd",
    "verify",
)

DEFAULT_GRIDS = {
    "tensor3": {"L": 12.0, "n": 64},
    "tensor1": {"L": 20.0, "n": 256},
    "radial": {"M": 2048, "R_max": 60.0},
}


def _float(v: str) -> float:
    return float(v)


def _int(v: str) -> int:
    return int(v)


def _bool(v: str) -> bool:
    s = v.strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _floats(v: str) -> list[float]:
    items = [x.strip() for x in v.split(",") if x.strip()]
    if not items:
        raise ValueError("empty list")
    return [float(x) for x in items]


def _str(v: str) -> str:
    return v.strip()


def _seed(v: str) -> int:
    s = int(v)
    if not 0 <= s < 2**64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return s


SCHEMA: dict[str, dict[str, Callable[[str], Any]]] = {
    "run": {"command": _str},
    "problem": {
        "N": _int,
        "gamma": _float,
        "gamma1": _float,
        "gamma2": _float,
        "c": _float,
        "c_list": _floats,
        "c1": _float,
        "c2": _float,
        "zero_mass": _bool,
        "window": _floats,
        "factors": _floats,
    },
    "grid": {"kind": _str, "L": _float, "n": _int, "M": _int, "R_max": _float, "stretch": _float},
    "solver": {
        "tau0": _float,
        "backtrack": _float,
        "grow": _float,
        "max_iter": _int,
        "tol": _float,
        "sigma": _float,
        "amplitude": _float,
        "initial": _str,
        "perturbation": _float,
        "max_restarts": _int,
    },
    "dynamics": {
        "T": _float,
        "dt": _float,
        "monitor_every": _int,
        "R_virial": _float,
        "adaptive": _bool,
        "tail_radius": _float,
        "sigma": _float,
        "amplitude": _float,
        "nonlinear": _bool,
    },
    "io": {"output": _str, "checkpoint": _str, "seed": _seed, "workers": _int},
}

# which problem keys each command needs
REQUIRED = {
    "choquard": ("N", "gamma"),
    "ground-state": ("N", "gamma1", "gamma2"),
    "scan-m": ("N", "gamma1", "gamma2", "c_list"),
    "scan-gamma": ("N", "gamma1", "gamma2", "c_list"),
    "critical-mass": ("N", "gamma2"),
    "evolve": ("N", "gamma1", "gamma2"),
    "virial": ("N", "gamma1", "gamma2"),
    "blowup": ("N", "gamma1", "gamma2"),
    "decay-fit": ("N", "gamma1", "gamma2"),
    "subadd": ("N", "gamma1", "gamma2", "c1", "c2"),
    "verify": (),
}


@dataclass
class RunConfig:
    command: str
    problem: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    dynamics: dict = field(default_factory=dict)
    io: dict = field(default_factory=dict)
    text: str = ""

    @property
    def seed(self) -> int:
        return self.io.get("seed", DEFAULT_SEED)

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.text.encode()).hexdigest()

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "problem": self.problem,
            "grid": self.grid,
            "solver": self.solver,
            "dynamics": self.dynamics,
            "io": self.io,
        }


def _window_problems(command: str, p: dict, g: dict) -> list[str]:
    out = []
    N = p.get("N")
    if N is None:
        return out
    if N < 1:
        out.append(f"N={N} must be >= 1")
    kind = g.get("kind", "radial" if command == "decay-fit" else "tensor")
    if kind == "tensor" and N > 3:
        out.append(f"tensor grids support N <= 3, got N={N}")
    if kind == "radial" and N < 3:
        out.append(f"radial grids need N >= 3, got N={N}")
    cap = min(N, 4)
    if command == "choquard":
        gam = p.get("gamma")
        if gam is not None and not 0 < gam < cap:
            out.append(f"gamma={gam} requires 0<gamma<min{{N,4}}={cap}")
        return out
    g1 = p.get("gamma1", 2.0 if command == "critical-mass" else None)
    g2 = p.get("gamma2")
    if g1 is not None and g2 is not None:
        if not g2 > 0:
            out.append(f"gamma2={g2} requires 0<gamma2<gamma1<min{{N,4}}")
        if not g2 < g1:
            out.append(f"gamma2={g2} >= gamma1={g1}: requires the strict ordering 0<gamma2<gamma1<min{{N,4}}")
        if not g1 < cap:
            out.append(f"gamma1={g1} requires 0<gamma2<gamma1<min{{N,4}}={cap}")
    if command == "critical-mass" and p.get("gamma1", 2.0) != 2.0:
        out.append("critical-mass requires gamma1 = 2")
    if command in ("scan-m", "subadd") and g1 is not None and g1 > 2:
        out.append(f"{command} requires gamma1 <= 2 (m(c) is -infinity for gamma1 > 2)")
    if command == "scan-gamma" and g1 is not None and g1 < 2:
        out.append("scan-gamma requires gamma1 >= 2")
    for key in ("c", "c1", "c2"):
        if key in p and not p[key] > 0:
            out.append(f"{key}={p[key]} must be positive")
    if "c_list" in p and not all(c > 0 for c in p["c_list"]):
        out.append("c_list entries must be positive")
    if "window" in p and (len(p["window"]) != 2 or not 0 < p["window"][0] < p["window"][1]):
        out.append("window must be two increasing positive radii")
    return out


def _grid_problems(g: dict) -> list[str]:
    out = []
    kind = g.get("kind")
    if kind is not None and kind not in ("tensor", "radial"):
        out.append(f"grid kind must be 'tensor' or 'radial', got {kind!r}")
    for key in ("L", "R_max"):
        if key in g and not g[key] > 0:
            out.append(f"{key}={g[key]} must be positive")
    if "n" in g and (g["n"] < 4 or g["n"] % 2):
        out.append(f"n={g['n']} must be an even integer >= 4")
    if "M" in g and g["M"] < 8:
        out.append(f"M={g['M']} must be >= 8")
    if kind == "tensor" and ("M" in g or "R_max" in g or "stretch" in g):
        out.append("tensor grids take L and n, not M/R_max/stretch")
    if kind == "radial" and ("L" in g or "n" in g):
        out.append("radial grids take M, R_max and stretch, not L/n")
    return out


def _solver_problems(s: dict) -> list[str]:
    out = []
    for key in ("tau0", "tol", "sigma", "amplitude"):
        if key in s and not s[key] > 0:
            out.append(f"solver {key}={s[key]} must be positive")
    if "backtrack" in s and not 0 < s["backtrack"] < 1:
        out.append("solver backtrack must lie in (0, 1)")
    if "max_iter" in s and s["max_iter"] < 1:
        out.append("solver max_iter must be >= 1")
    return out


def _dynamics_problems(d: dict) -> list[str]:
    out = []
    for key in ("T", "dt", "R_virial", "tail_radius", "sigma", "amplitude"):
        if key in d and not d[key] > 0:
            out.append(f"dynamics {key}={d[key]} must be positive")
    if "monitor_every" in d and d["monitor_every"] < 1:
        out.append("dynamics monitor_every must be >= 1")
    return out


CHECKPOINT_COMMANDS = ("evolve", "virial", "blowup", "decay-fit")


def parse_config(
    text: str, command_override: str | None = None, overrides: dict[tuple[str, str], str] | None = None
) -> RunConfig:
    """Parse and validate; raises ConfigError listing every violation.

    Args:
        text: the configuration document.
        command_override: command given on the command line; replaces
            ``[run] command``.
        overrides: raw ``(section, key) -> value`` strings applied on top of
            the document before validation.
    """
    parser = configparser.ConfigParser(
        interpolation=None, strict=True, inline_comment_prefixes=("#", ";"), delimiters=("=",)
    )
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.DuplicateOptionError as exc:
        if exc.option == "command":
            raise ConfigError("two commands in one file: exactly one 'command' key is allowed") from exc
        raise ConfigError(f"duplicate key {exc.option!r} in [{exc.section}]") from exc
    except configparser.Error as exc:
        raise ConfigError(f"config syntax error: {exc}") from exc
    for (section, key), value in (overrides or {}).items():
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, key, value)
    problems: list[str] = []
    blocks: dict[str, dict] = {name: {} for name in SCHEMA}
    for section in parser.sections():
        if section not in SCHEMA:
            problems.append(f"unknown section [{section}]")
            continue
        for key, raw in parser.items(section):
            conv = SCHEMA[section].get(key)
            if conv is None:
                problems.append(f"unknown key {key!r} in [{section}]")
                continue
            try:
                blocks[section][key] = conv(raw)
            except ValueError as exc:
                problems.append(f"[{section}] {key} = {raw!r}: {exc}")
    command = blocks["run"].get("command")
    if command is not None and "," in command:
        problems.append(f"two commands in one file ({command!r}): exactly one is allowed")
        command = None
    if command_override is not None:
        command = command_override
    if command is None:
        problems.append("no command given (set [run] command or pass it on the command line)")
    elif command not in COMMANDS:
        problems.append(f"unknown command {command!r}; expected one of {', '.join(COMMANDS)}")
    else:
        from_checkpoint = command in CHECKPOINT_COMMANDS and "checkpoint" in blocks["io"]
        for key in () if from_checkpoint else REQUIRED[command]:
            if key not in blocks["problem"]:
                problems.append(f"command {command!r} needs [problem] {key}")
        problems += _window_problems(command, blocks["problem"], blocks["grid"])
    problems += _grid_problems(blocks["grid"])
    problems += _solver_problems(blocks["solver"])
    problems += _dynamics_problems(blocks["dynamics"])
    if command == "verify" and "checkpoint" not in blocks["io"]:
        problems.append("verify needs [io] checkpoint (or --checkpoint)")
    if problems:
        raise ConfigError(problems)
    return RunConfig(
        command=command,
        problem=blocks["problem"],
        grid=blocks["grid"],
        solver=blocks["solver"],
        dynamics=blocks["dynamics"],
        io=blocks["io"],
        text=text,
    )
