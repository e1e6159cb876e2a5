"""Flat key = value run configuration with an explicit schema.

A scenario file is plain text, one ``key = value`` per line, ``#`` comments
allowed.  Keys are namespaced with dots but the file stays flat (no
sections); every key must appear in the schema table, and every run type
declares which keys it requires.  This keeps scientific runs reproducible:
the configuration is the complete input, and identical configuration plus
seed produces byte-identical outputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

RUN_TYPES = (
    "horizons",
    "certify-redshift",
    "evolve",
    "evolve-dirichlet",
    "qnm",
    "gap-scan",
    "decay-fit",
    "crosscheck",
    "convergence",
)


class ConfigError(ValueError):
    """Malformed configuration; the message names the offending key."""


def _parse_float_list(text: str):
    return [float(part) for part in text.replace(",", " ").split()]


def _parse_int_list(text: str):
    return [int(part) for part in text.replace(",", " ").split()]


# key -> (type converter, default or REQUIRED sentinel)
_REQUIRED = object()

SCHEMA: dict = {
    "schema_version": (int, _REQUIRED),
    "run": (str, _REQUIRED),
    "name": (str, "run"),
    # black hole parameters
    "M0": (float, 1.0),
    "Lambda": (float, 0.06),
    "a": (float, 0.0),
    "delta": (float, None),
    "epsilon": (float, None),
    # grid / integrator
    "n_r": (int, 192),
    "n_theta": (int, 24),
    "cfl": (float, 0.25),
    "time_shift": (float, 0.5),
    "ko_eps": (float, 0.5),
    "t_end": (float, 120.0),
    "snapshot_every": (float, 20.0),
    "series_every_steps": (int, 8),
    "damping": (float, 0.0),
    "dirichlet_side": (str, "outer"),
    "write_fields": (int, 0),
    # source
    "source.m": (int, 0),
    "source.t_on": (float, 0.0),
    "source.t_off": (float, 6.0),
    "source.r_center": (float, 3.9),
    "source.r_width": (float, 0.6),
    "source.l": (int, 0),
    "source.amplitude": (float, 1.0),
    "source.support": (str, "inside_k_delta"),
    # redshift certification
    "certify.n_samples": (int, 10000),
    "certify.sigma0": (float, 2.5),
    "certify.slope": (float, 0.5),
    "certify.zero_time_gradient": (int, 0),
    # qnm polish
    "qnm.l": (int, 1),
    "qnm.m": (int, 0),
    "qnm.guess_re": (float, 0.185),
    "qnm.guess_im": (float, -0.07),
    # gap scan
    "scan.m_max": (int, 0),
    "scan.l_max": (int, 2),
    "scan.box": (_parse_float_list, [-1.0, 1.0, -0.5, 0.1]),
    # decay fit on an existing series
    "fit.input": (str, ""),
    "fit.column": (str, "probe_re"),
    "fit.t_min": (float, None),
    "fit.t_max": (float, None),
    "fit.c": (float, 0.0),
    # crosscheck window
    "crosscheck.fit_t_min": (float, 30.0),
    # convergence
    "conv.scenario": (str, "minkowski"),
    "conv.resolutions": (_parse_int_list, [32, 64, 128]),
    "conv.expected_order": (float, 2.0),
    "conv.order_tol": (float, 0.35),
    # misc
    "seed": (int, 0),
    "workers": (int, 1),
    "out_dir": (str, ""),
}

_RUN_REQUIRES = {
    "decay-fit": ("fit.input",),
}


@dataclass(frozen=True)
class ScenarioConfig:
    """Validated scenario: typed values plus the raw text for hashing."""

    values: dict
    text: str
    source_path: str = ""

    def __getitem__(self, key: str):
        return self.values[key]

    @property
    def run(self) -> str:
        return self.values["run"]

    def black_hole(self):
        from .spacetime import BlackHoleParams
        return BlackHoleParams(
            m0=self.values["M0"],
            lam=self.values["Lambda"],
            a=self.values["a"],
            delta=self.values["delta"],
            epsilon=self.values["epsilon"],
        )

    def source_spec(self):
        from .solver import SourceSpec
        return SourceSpec(
            m=self.values["source.m"],
            t_on=self.values["source.t_on"],
            t_off=self.values["source.t_off"],
            r_center=self.values["source.r_center"],
            r_width=self.values["source.r_width"],
            theta_profile=self.values["source.l"],
            amplitude=self.values["source.amplitude"],
            support=self.values["source.support"],
        )


def parse_config(text: str, source_path: str = "") -> ScenarioConfig:
    """Parse and validate flat key = value text against the schema."""
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: not a key = value pair: {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r} (line {lineno})")
        if key in values:
            raise ConfigError(f"duplicate key {key!r} (line {lineno})")
        conv = SCHEMA[key][0]
        try:
            values[key] = conv(val)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"key {key!r}: cannot parse {val!r}: {exc}") from exc

    for key, (_, default) in SCHEMA.items():
        if key not in values:
            if default is _REQUIRED:
                raise ConfigError(f"missing required key {key!r}")
            values[key] = default

    if values["schema_version"] != 1:
        raise ConfigError(
            f"key 'schema_version': unsupported value {values['schema_version']}")
    if values["run"] not in RUN_TYPES:
        raise ConfigError(
            f"key 'run': {values['run']!r} is not one of {', '.join(RUN_TYPES)}")
    for key in _RUN_REQUIRES.get(values["run"], ()):
        if not values[key]:
            raise ConfigError(
                f"missing required key {key!r} for run = {values['run']}")
    return ScenarioConfig(values=values, text=text, source_path=source_path)


def load_config(path: str) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as handle:
        text = handle.read()
    return parse_config(text, source_path=path)


# ---------------------------------------------------------------------------
# Shipped presets
# ---------------------------------------------------------------------------

PRESETS: dict[str, str] = {
    "sds-baseline": """\
# Schwarzschild-de Sitter baseline: time-domain ringdown of an l=1 source
# cross-validated against the resonance of the stationary operator.
schema_version = 1
run = crosscheck
name = sds-baseline
M0 = 1.0
Lambda = 0.06
a = 0.0
n_r = 192
n_theta = 24
t_end = 170.0
source.m = 0
source.l = 1
source.t_on = 0.0
source.t_off = 6.0
source.r_center = 3.9
source.r_width = 0.6
qnm.l = 1
qnm.m = 0
qnm.guess_re = 0.185
qnm.guess_im = -0.07
crosscheck.fit_t_min = 30.0
""",
    "slow-kerr": """\
# Slowly rotating configuration: same cross-validation at a = 0.02.
schema_version = 1
run = crosscheck
name = slow-kerr
M0 = 1.0
Lambda = 0.06
a = 0.02
n_r = 192
n_theta = 24
t_end = 170.0
source.m = 0
source.l = 1
source.t_on = 0.0
source.t_off = 6.0
source.r_center = 3.9
source.r_width = 0.6
qnm.l = 1
qnm.m = 0
qnm.guess_re = 0.185
qnm.guess_im = -0.07
crosscheck.fit_t_min = 30.0
""",
    "minkowski-check": """\
# Flat-space control: energy conservation and self-convergence of the
# integrator on a periodic box (the curved machinery switched off).
schema_version = 1
run = convergence
name = minkowski-check
conv.scenario = minkowski
conv.resolutions = 32, 64, 128
conv.expected_order = 2.0
conv.order_tol = 0.35
""",
    "dirichlet-horizon": """\
# Near-horizon solve on the outer collar with a wall at the core boundary:
# exponential decay plus the sign of the wall flux of the red-shift current.
schema_version = 1
run = evolve-dirichlet
name = dirichlet-horizon
M0 = 1.0
Lambda = 0.06
a = 0.0
n_r = 96
n_theta = 16
t_end = 100.0
snapshot_every = 2.0
fit.t_min = 25.0
dirichlet_side = outer
source.m = 0
source.l = 0
source.t_on = 0.0
source.t_off = 4.0
source.r_center = 5.557
source.r_width = 0.087
source.support = general
""",
    "gap-scan-default": """\
# Resonance scan of the default box: certifies that zero is the only
# resonance above half the empirical spectral gap.
schema_version = 1
run = gap-scan
name = gap-scan-default
M0 = 1.0
Lambda = 0.06
a = 0.0
scan.m_max = 0
scan.l_max = 2
scan.box = -1.0, 1.0, -0.5, 0.1
""",
}


def preset_config(name: str) -> ScenarioConfig:
    if name not in PRESETS:
        raise ConfigError(
            f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}")
    return parse_config(PRESETS[name], source_path=f"<preset:{name}>")
