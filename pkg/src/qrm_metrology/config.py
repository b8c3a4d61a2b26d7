"""Scenario files: flat ``key=value`` text with dotted keys.

Example::

    # fig. 1 style point
    model.g = 0.96
    noise.kappa = 0.05
    noise.kind = single_photon
    init.type = squeezed
    init.xi = 0.4
    sweep.axis = kappa
    sweep.values = 0.01,0.02,0.03,0.04,0.05

Blank lines and ``#`` comments are ignored; unknown or repeated keys are
errors that carry the offending key and line number.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .dynamics import IntegratorConfig, NoiseParams
from .errors import ConfigError
from .hilbert import ModelParams, thermal_nbar
from .pipeline import BACKENDS, InitSpec

SWEEP_AXES = ("kappa", "g", "nbar", "xi")
FRAMES = ("auto", "fock", "normal_mode")


def _float(text):
    v = float(text)
    if not math.isfinite(v):
        raise ValueError("not finite")
    return v


def _int(text):
    return int(text)


def _bool(text):
    t = text.lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected true/false")


def _trunc(text):
    return "auto" if text.lower() == "auto" else int(text)


def _floats(text):
    vals = [_float(v) for v in text.split(",") if v.strip()]
    if not vals:
        raise ValueError("empty list")
    return tuple(vals)


def _complexes(text):
    return tuple(complex(v.strip().replace(" ", "")) for v in text.split(",") if v.strip())


def _choice(*options):
    def parse(text):
        t = text.replace("-", "_")
        if t not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return t

    return parse


# key -> (parser, default)
KEYS = {
    "model.g": (_float, None),
    "model.omega": (_float, 1.0),
    "model.trunc_dim": (_trunc, "auto"),
    "model.frame": (_choice(*FRAMES), "auto"),
    "noise.kappa": (_float, None),
    "noise.nbar": (_float, None),
    "noise.kT": (_float, None),
    "noise.kind": (_choice("single_photon", "two_photon"), "single_photon"),
    "init.type": (_choice("standard", "squeezed", "custom"), "standard"),
    "init.xi": (_float, 0.0),
    "init.amplitudes": (_complexes, ()),
    "integrator.rel_tol": (_float, IntegratorConfig.rel_tol),
    "integrator.abs_tol": (_float, IntegratorConfig.abs_tol),
    "integrator.t_max": (_float, None),
    "integrator.n_samples": (_int, 4000),
    "integrator.tail_tol": (_float, 1e-6),
    "integrator.positivity_every": (_int, 10),
    "metrology.delta_g": (_float, 1e-4),
    "metrology.richardson": (_bool, False),
    "run.backend": (_choice(*BACKENDS), "master"),
    "run.workers": (_int, 1),
    "sweep.axis": (_choice(*SWEEP_AXES), None),
    "sweep.values": (_floats, None),
    "sweep.fit": (_bool, False),
    "output.dir": (str, "out"),
    "output.svg": (_bool, True),
}


@dataclass(frozen=True)
class Sweep:
    axis: str
    values: tuple
    fit: bool = False


@dataclass(frozen=True)
class Scenario:
    model: ModelParams
    noise: NoiseParams
    init: InitSpec = InitSpec()
    integrator: IntegratorConfig = IntegratorConfig()
    sweep: Sweep | None = None
    output_dir: str = "out"
    svg: bool = True
    frame: str = "auto"
    backend: str = "master"
    auto_trunc: bool = True
    delta_g: float = 1e-4
    richardson: bool = False
    workers: int = 1
    raw: dict = field(default_factory=dict, compare=False)

    def at(self, value) -> "Scenario":
        """The scenario with the sweep axis set to ``value`` (sweep removed)."""
        if self.sweep is None:
            return self
        axis = self.sweep.axis
        try:
            if axis == "kappa":
                s = replace(self, noise=replace(self.noise, kappa=value))
            elif axis == "nbar":
                s = replace(self, noise=replace(self.noise, nbar=value))
            elif axis == "g":
                s = replace(self, model=replace(self.model, g=value))
            else:
                kind = "squeezed" if self.init.kind == "standard" else self.init.kind
                s = replace(self, init=replace(self.init, kind=kind, xi=value))
        except ConfigError as exc:
            raise ConfigError(f"sweep value {value!r}: {exc}", key="sweep.values") from exc
        return replace(s, sweep=None)

    def points(self):
        if self.sweep is None:
            return [self]
        return [self.at(v) for v in self.sweep.values]

    def resolved(self):
        """Every setting as ``key=value`` strings in a fixed order."""
        m, n, i, c = self.model, self.noise, self.init, self.integrator
        items = [
            ("model.g", m.g),
            ("model.omega", m.omega),
            ("model.trunc_dim", "auto" if self.auto_trunc else m.trunc_dim),
            ("model.frame", self.frame),
            ("noise.kappa", n.kappa),
            ("noise.nbar", n.nbar),
            ("noise.kind", n.kind),
            ("init.type", i.kind),
            ("init.xi", i.xi),
        ]
        if i.kind == "custom":
            items.append(("init.amplitudes", ",".join(repr(complex(a)) for a in i.amplitudes)))
        items += [
            ("integrator.rel_tol", c.rel_tol),
            ("integrator.abs_tol", c.abs_tol),
            ("integrator.t_max", "default" if c.t_max is None else c.t_max),
            ("integrator.n_samples", c.n_samples),
            ("integrator.tail_tol", c.tail_tol),
            ("integrator.positivity_every", c.positivity_every),
            ("metrology.delta_g", self.delta_g),
            ("metrology.richardson", self.richardson),
            ("run.backend", self.backend),
        ]
        if self.sweep is not None:
            items += [
                ("sweep.axis", self.sweep.axis),
                ("sweep.values", ",".join(repr(v) for v in self.sweep.values)),
                ("sweep.fit", self.sweep.fit),
            ]
        return [f"{k}={v!r}" if isinstance(v, float) else f"{k}={v}" for k, v in items]


def parse_text(text) -> dict:
    """Parse ``key=value`` lines into ``{key: (value, line_number)}``."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value", line=lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}", key=key, line=lineno)
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}", key=key, line=lineno)
        parser = KEYS[key][0]
        try:
            out[key] = (parser(value), lineno)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {value!r} ({exc})", key=key, line=lineno) from exc
    return out


def scenario_from_dict(entries: dict) -> Scenario:
    """Build and validate a :class:`Scenario`; ``entries`` as from :func:`parse_text`."""

    def get(key):
        if key in entries:
            return entries[key][0]
        return KEYS[key][1]

    def build(key, fn):
        try:
            return fn()
        except ConfigError as exc:
            k = exc.key or key
            line = entries[k][1] if k in entries else None
            where = f"line {line}: " if line else ""
            raise ConfigError(f"{where}{exc}", key=k, line=line) from exc

    for key in ("model.g", "noise.kappa"):
        if get(key) is None:
            raise ConfigError(f"missing required key {key!r}", key=key)
    if "noise.nbar" in entries and "noise.kT" in entries:
        raise ConfigError("give noise.nbar or noise.kT, not both", key="noise.kT", line=entries["noise.kT"][1])
    if "noise.kT" in entries:
        kT = get("noise.kT")
        if kT < 0:
            raise ConfigError("noise.kT must be >= 0", key="noise.kT", line=entries["noise.kT"][1])
        nbar = thermal_nbar(kT)
    else:
        nbar = get("noise.nbar") or 0.0

    trunc = get("model.trunc_dim")
    model = build("model.g", lambda: ModelParams(get("model.g"), get("model.omega"), 60 if trunc == "auto" else trunc))
    noise = build("noise.kappa", lambda: NoiseParams(get("noise.kappa"), nbar, get("noise.kind")))
    init = build("init.type", lambda: InitSpec(get("init.type"), get("init.xi"), get("init.amplitudes")))
    if init.kind == "squeezed" and "init.xi" not in entries and get("sweep.axis") != "xi":
        raise ConfigError("init.type=squeezed needs init.xi", key="init.xi")
    integ = build(
        "integrator.rel_tol",
        lambda: IntegratorConfig(
            get("integrator.rel_tol"),
            get("integrator.abs_tol"),
            get("integrator.t_max"),
            get("integrator.n_samples"),
            get("integrator.tail_tol"),
            get("integrator.positivity_every"),
        ),
    )
    delta_g = get("metrology.delta_g")
    if not delta_g > 0:
        raise ConfigError("metrology.delta_g must be positive", key="metrology.delta_g")
    workers = get("run.workers")
    if workers < 1:
        raise ConfigError("run.workers must be >= 1", key="run.workers")

    sweep = None
    axis, values = get("sweep.axis"), get("sweep.values")
    if (axis is None) != (values is None):
        missing = "sweep.values" if values is None else "sweep.axis"
        raise ConfigError("sweep needs both sweep.axis and sweep.values", key=missing)
    if axis is not None:
        if axis == "nbar" and "noise.kT" in entries:
            raise ConfigError("cannot sweep nbar with noise.kT set", key="sweep.axis")
        if axis == "xi" and init.kind == "custom":
            raise ConfigError("cannot sweep xi with a custom initial state", key="sweep.axis")
        sweep = Sweep(axis, values, get("sweep.fit"))
    elif "sweep.fit" in entries:
        raise ConfigError("sweep.fit without a sweep", key="sweep.fit")

    sc = Scenario(
        model=model,
        noise=noise,
        init=init,
        integrator=integ,
        sweep=sweep,
        output_dir=get("output.dir"),
        svg=get("output.svg"),
        frame=get("model.frame"),
        backend=get("run.backend"),
        auto_trunc=trunc == "auto",
        delta_g=delta_g,
        richardson=get("metrology.richardson"),
        workers=workers,
        raw={k: v for k, (v, _) in entries.items()},
    )
    try:
        points = sc.points()
    except ConfigError as exc:
        exc.line = entries["sweep.values"][1]
        raise
    for p in points:
        if not (0 <= p.model.g - delta_g and p.model.g + delta_g < 1):
            raise ConfigError("g +- delta_g must stay inside [0, 1)", key="metrology.delta_g")
    return sc


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return scenario_from_dict(parse_text(fh.read()))
