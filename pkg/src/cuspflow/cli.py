"""Configuration-driven experiment runner.

Every computation exposed by this package can be driven from the command
line through a small set of subcommands:

``roots``
    Indicial root tables for the model operator, with the jet-matrix
    eigenvalue cross-check.
``eigendist``
    Pairing tables of the eigendistributions at the indicial roots against
    smooth test functions, with weak eigen-equation residuals.
``resolvent``
    Mode resolvents on vertical contour lines, optionally checking the
    contour-shift identity (difference of two lines equals the sum of the
    residues crossed).
``residue``
    Regularized-pairing residues compared against their closed forms.
``escape``
    Assembles the escape function on the reduced phase grid and emits the
    verification certificate.
``flow``
    Exact geodesic trajectory dumps with conservation reports.
``correlate``
    Monte Carlo correlation functions on the quotient surface plus a
    Laplace-transform probe.

Configs are flat INI files with one section per subcommand plus a ``[run]``
section (subcommand, output directory, seed).  Command-line flags override
file values.  Every run writes its artifacts atomically at the end, each
file name prefixed by a hash of the resolved configuration; the
``*-manifest.ini`` artifact is itself a valid config that reproduces the
run.  The hash covers the subcommand, the seed and the subcommand's
parameters -- not the output directory -- so the same experiment keeps its
identity wherever it is written.

Exit codes: 0 success, 2 invalid configuration, 3 tolerance failure,
4 internal error.  Diagnostics are emitted as single-line JSON on stderr.
The environment variable ``CUSPFLOW_WORKERS`` (positive integer) is
validated and recorded in the manifest; results are bitwise independent of
its value.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import io
import json
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigurationError,
    ContourOnRootError,
    DomainError,
    InvalidEnclosureError,
    NearSingularError,
    PoleError,
    ToleranceError,
    UnsupportedDimensionError,
    ValidationError,
)

__all__ = ["ExperimentConfig", "run", "main", "build_parser"]

_CONFIG_ERRORS = (
    ValidationError,
    ConfigurationError,
    DomainError,
    UnsupportedDimensionError,
    NearSingularError,
    ContourOnRootError,
    InvalidEnclosureError,
    PoleError,
)

_HASH_PREFIX_LEN = 12


# ---------------------------------------------------------------------------
# value parsing / deterministic formatting
# ---------------------------------------------------------------------------

def _fmt_float(v) -> str:
    return repr(float(v))


def _fmt_complex(v) -> str:
    c = complex(v)
    if c.imag == 0.0:
        return _fmt_float(c.real)
    sign = "+" if c.imag >= 0 else "-"
    return f"{_fmt_float(c.real)}{sign}{_fmt_float(abs(c.imag))}j"


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


_PARSERS = {
    "int": lambda t: int(t.strip(), 10),
    "float": lambda t: float(t),
    "complex": lambda t: complex(t.replace(" ", "")),
    "str": lambda t: t.strip(),
    "bool": _parse_bool,
    "ofloat": lambda t: None if t.strip() == "" else float(t),
    "floats": lambda t: tuple(float(tok) for tok in t.split(",") if tok.strip() != ""),
    "ints": lambda t: tuple(int(tok, 10) for tok in t.split(",") if tok.strip() != ""),
}

_FORMATTERS = {
    "int": lambda v: str(int(v)),
    "float": _fmt_float,
    "complex": _fmt_complex,
    "str": str,
    "bool": lambda v: "true" if v else "false",
    "ofloat": lambda v: "" if v is None else _fmt_float(v),
    "floats": lambda v: ",".join(_fmt_float(x) for x in v),
    "ints": lambda v: ",".join(str(int(x)) for x in v),
}


@dataclass(frozen=True)
class _Param:
    key: str
    typ: str
    default: object
    help: str


# ---------------------------------------------------------------------------
# subcommand parameter schemas
# ---------------------------------------------------------------------------

SCHEMAS: dict[str, tuple[_Param, ...]] = {
    "roots": (
        _Param("d", "int", 1, "cusp rank (cross-section dimension)"),
        _Param("h", "float", 1.0, "model scaling constant"),
        _Param("s", "complex", 0.0 + 0.0j, "spectral parameter"),
        _Param("n_max", "int", 3, "largest root level to enumerate"),
        _Param("twist", "float", 0.0, "constant bundle twist added to the operator"),
    ),
    "eigendist": (
        _Param("d", "int", 1, "cusp rank"),
        _Param("h", "float", 1.0, "model scaling constant"),
        _Param("s", "complex", 0.3 + 0.0j, "spectral parameter"),
        _Param("n_max", "int", 2, "largest root level"),
        _Param("twist", "float", 0.0, "constant bundle twist"),
        _Param("n_test", "int", 3, "number of random test functions"),
    ),
    "resolvent": (
        _Param("d", "int", 1, "cusp rank"),
        _Param("h", "float", 1.0, "model scaling constant"),
        _Param("s", "complex", 1.3 + 0.0j, "spectral parameter"),
        _Param("rho", "float", -2.3, "real part of the first contour line"),
        _Param("rho_prime", "ofloat", -1.3,
               "second contour line for the shift identity (empty to skip)"),
        _Param("height", "float", 40.0, "contour truncation height"),
        _Param("panels", "int", 48, "quadrature panels per contour"),
        _Param("m", "int", 0, "input Fourier mode"),
        _Param("mu", "ints", (), "input monomial multi-index (default zeros)"),
        _Param("poly", "floats", (1.0,), "input polynomial coefficients"),
        _Param("r0", "float", 0.0, "center of the Gaussian radial factor"),
        _Param("r_span", "float", 30.0, "radial half-width of the output grid"),
        _Param("n_r", "int", 4096, "radial output grid size"),
        _Param("x_lo", "float", -0.9, "lower end of the angular grid (x = cos phi)"),
        _Param("x_hi", "float", 0.6, "upper end of the angular grid"),
        _Param("n_x", "int", 41, "angular grid size"),
    ),
    "residue": (
        _Param("d", "int", 1, "cusp rank"),
        _Param("h", "float", 1.0, "model scaling constant"),
        _Param("k_max", "int", 1, "largest angular degree"),
        _Param("j_max", "int", 2, "largest radial level"),
        _Param("eps", "float", 0.01, "contour radius around each pole"),
        _Param("n_nodes", "int", 24, "contour quadrature nodes"),
    ),
    "escape": (
        _Param("n_alpha", "int", 64, "circle resolution of the reduced grid"),
        _Param("n_theta", "int", 32, "sphere colatitude resolution"),
        _Param("n_phi", "int", 32, "sphere azimuth resolution"),
        _Param("eps", "float", 0.15, "cone half-width"),
        _Param("delta", "float", 1e-3, "small-frequency cutoff scale"),
        _Param("step", "float", 0.05, "flow quadrature step"),
        _Param("t", "ofloat", None, "averaging window (empty: twice the transition time)"),
        _Param("t_prime", "float", 2.0, "symbol averaging window"),
        _Param("c_g_prime", "ofloat", None, "weight prefactor override"),
        _Param("r_small", "ofloat", None, "small-scale radius override"),
    ),
    "flow": (
        _Param("d", "int", 1, "cusp rank"),
        _Param("r0", "float", 0.0, "initial log-height"),
        _Param("theta0", "floats", (), "initial cross-section point (default zeros)"),
        _Param("phi0", "float", 1.2, "initial polar angle"),
        _Param("u0", "floats", (), "initial azimuthal direction (default first axis)"),
        _Param("t_max", "float", 20.0, "final time"),
        _Param("dt", "float", 0.1, "output time step"),
    ),
    "correlate": (
        _Param("n", "int", 1000, "Monte Carlo sample count"),
        _Param("t_max", "float", 20.0, "final correlation time"),
        _Param("dt", "float", 0.1, "correlation time step"),
        _Param("s_probe", "float", 0.05, "Laplace transform probe point"),
        _Param("a_kind", "str", "bump", "first observable kind: bump or const"),
        _Param("a_center_re", "float", 0.0, "first bump center, real part"),
        _Param("a_center_im", "float", 1.0, "first bump center, imaginary part"),
        _Param("a_radius", "float", 0.8, "first bump radius"),
        _Param("a_order", "int", 3, "first bump smoothness order"),
        _Param("a_amplitude", "float", 1.0, "first bump amplitude"),
        _Param("a_baseline", "float", 0.0, "first bump baseline"),
        _Param("a_value", "float", 1.0, "first observable value when const"),
        _Param("b_kind", "str", "bump", "second observable kind: bump or const"),
        _Param("b_center_re", "float", 0.2, "second bump center, real part"),
        _Param("b_center_im", "float", 1.2, "second bump center, imaginary part"),
        _Param("b_radius", "float", 0.8, "second bump radius"),
        _Param("b_order", "int", 3, "second bump smoothness order"),
        _Param("b_amplitude", "float", 1.0, "second bump amplitude"),
        _Param("b_baseline", "float", 0.0, "second bump baseline"),
        _Param("b_value", "float", 1.0, "second observable value when const"),
    ),
}

_RUN_KEYS = ("output_dir", "seed", "subcommand")


def _schema_map(sub: str) -> dict[str, _Param]:
    return {p.key: p for p in SCHEMAS[sub]}


# ---------------------------------------------------------------------------
# configuration object
# ---------------------------------------------------------------------------

def _resolve_params(sub: str, params: dict) -> dict:
    """Fill data-dependent defaults so the stored config is explicit."""
    out = dict(params)
    if sub == "resolvent" and out["mu"] == ():
        out["mu"] = (0,) * out["d"]
    if sub == "flow":
        if out["theta0"] == ():
            out["theta0"] = (0.0,) * out["d"]
        if out["u0"] == ():
            out["u0"] = (1.0,) + (0.0,) * (out["d"] - 1)
    return out


def _positive(name, value, strict=True):
    if (value <= 0) if strict else (value < 0):
        bound = "positive" if strict else "nonnegative"
        raise ValidationError(f"{name} must be {bound}, got {value}")


def _validate_params(sub: str, p: dict) -> None:
    if sub in ("roots", "eigendist", "resolvent", "residue", "flow"):
        if p["d"] < 1:
            raise ValidationError(f"d must be at least 1, got {p['d']}")
    if sub in ("roots", "eigendist", "resolvent", "residue"):
        _positive("h", p["h"])
    if sub in ("roots", "eigendist"):
        _positive("n_max", p["n_max"], strict=False)
    if sub == "eigendist":
        _positive("n_test", p["n_test"])
    if sub == "resolvent":
        if len(p["mu"]) != p["d"]:
            raise ValidationError(
                f"mu must have length d={p['d']}, got {len(p['mu'])}")
        if any(m < 0 for m in p["mu"]):
            raise ValidationError("mu entries must be nonnegative")
        if p["m"] < 0:
            raise ValidationError("m must be nonnegative")
        if not p["poly"]:
            raise ValidationError("poly must have at least one coefficient")
        _positive("height", p["height"])
        if p["panels"] < 4:
            raise ValidationError("panels must be at least 4")
        if p["n_r"] < 64:
            raise ValidationError("n_r must be at least 64")
        _positive("r_span", p["r_span"])
        if p["n_x"] < 2:
            raise ValidationError("n_x must be at least 2")
        if not -1.0 < p["x_lo"] < p["x_hi"] < 1.0:
            raise ValidationError("need -1 < x_lo < x_hi < 1")
    if sub == "residue":
        _positive("k_max", p["k_max"], strict=False)
        _positive("j_max", p["j_max"], strict=False)
        if not 0.0 < p["eps"] <= 0.2:
            raise ValidationError(f"eps must be in (0, 0.2], got {p['eps']}")
        if p["n_nodes"] < 8:
            raise ValidationError("n_nodes must be at least 8")
    if sub == "escape":
        for key in ("n_alpha", "n_theta", "n_phi"):
            if p[key] < 2:
                raise ValidationError(f"{key} must be at least 2, got {p[key]}")
        if not 0.0 < p["eps"] < math.pi / 2.0:
            raise ValidationError("eps must be in (0, pi/2)")
        _positive("delta", p["delta"])
        _positive("step", p["step"])
        _positive("t_prime", p["t_prime"])
        for key in ("t", "c_g_prime", "r_small"):
            if p[key] is not None:
                _positive(key, p[key])
    if sub == "flow":
        if len(p["theta0"]) != p["d"]:
            raise ValidationError(
                f"theta0 must have length d={p['d']}, got {len(p['theta0'])}")
        if len(p["u0"]) != p["d"]:
            raise ValidationError(
                f"u0 must have length d={p['d']}, got {len(p['u0'])}")
        norm = math.sqrt(sum(x * x for x in p["u0"]))
        if abs(norm - 1.0) > 1e-9:
            raise ValidationError(f"u0 must be a unit vector, |u0| = {norm}")
        if not 0.0 <= p["phi0"] <= math.pi:
            raise ValidationError("phi0 must lie in [0, pi]")
        _positive("dt", p["dt"])
        if p["t_max"] < p["dt"]:
            raise ValidationError("t_max must be at least dt")
        if p["t_max"] / p["dt"] > 2e5:
            raise ValidationError("too many output steps: t_max/dt > 2e5")
    if sub == "correlate":
        if p["n"] < 2:
            raise ValidationError("n must be at least 2")
        _positive("dt", p["dt"])
        if p["t_max"] < p["dt"]:
            raise ValidationError("t_max must be at least dt")
        _positive("s_probe", p["s_probe"])
        for side in ("a", "b"):
            kind = p[f"{side}_kind"]
            if kind not in ("bump", "const"):
                raise ValidationError(
                    f"{side}_kind must be 'bump' or 'const', got {kind!r}")
            if kind == "bump":
                _positive(f"{side}_radius", p[f"{side}_radius"])
                _positive(f"{side}_order", p[f"{side}_order"])
                if p[f"{side}_center_im"] <= 0:
                    raise ValidationError(
                        f"{side}_center_im must be positive (upper half-plane)")


@dataclass(frozen=True)
class ExperimentConfig:
    """A fully-resolved, validated run description."""

    subcommand: str
    output_dir: str
    seed: int
    params: dict

    def __post_init__(self):
        if self.subcommand not in SCHEMAS:
            raise ValidationError(
                f"unknown subcommand {self.subcommand!r}; expected one of "
                f"{sorted(SCHEMAS)}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ValidationError(f"seed must be a nonnegative integer, got {self.seed}")
        if not self.output_dir:
            raise ValidationError("output_dir must be nonempty")
        schema = _schema_map(self.subcommand)
        unknown = set(self.params) - set(schema)
        if unknown:
            raise ValidationError(
                f"unknown parameters for {self.subcommand}: {sorted(unknown)}")
        merged = {k: self.params.get(k, p.default) for k, p in schema.items()}
        object.__setattr__(self, "params", _resolve_params(self.subcommand, merged))

    def validate(self) -> None:
        _validate_params(self.subcommand, self.params)

    def canonical_text(self) -> str:
        """Deterministic INI text of the hashed part of the config."""
        schema = _schema_map(self.subcommand)
        lines = ["[run]", f"seed = {self.seed}",
                 f"subcommand = {self.subcommand}", "", f"[{self.subcommand}]"]
        for key in sorted(self.params):
            lines.append(f"{key} = {_FORMATTERS[schema[key].typ](self.params[key])}")
        return "\n".join(lines) + "\n"

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()

    def hash_prefix(self) -> str:
        return self.config_hash()[:_HASH_PREFIX_LEN]


def _parse_section_values(sub: str, raw: dict) -> dict:
    schema = _schema_map(sub)
    out = {}
    for key, text in raw.items():
        if key not in schema:
            raise ValidationError(f"unknown key {key!r} in section [{sub}]")
        try:
            out[key] = _PARSERS[schema[key].typ](text)
        except (ValueError, TypeError) as exc:
            raise ValidationError(
                f"invalid value for {sub}.{key}: {text!r} ({exc})") from exc
    return out


def _read_ini(path: str) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read config {path!r}: {exc}") from exc
    except configparser.Error as exc:
        raise ValidationError(f"cannot parse config {path!r}: {exc}") from exc
    known = set(SCHEMAS) | {"run", "manifest"}
    unknown = set(cp.sections()) - known
    if unknown:
        raise ValidationError(f"unknown config sections: {sorted(unknown)}")
    return cp


def config_from_sources(subcommand=None, config_path=None, output_dir=None,
                        seed=None, overrides=None) -> ExperimentConfig:
    """Merge defaults, config file and command-line overrides."""
    file_run: dict = {}
    file_params_all: dict = {}
    if config_path is not None:
        cp = _read_ini(config_path)
        if cp.has_section("run"):
            for key, value in cp.items("run"):
                if key not in _RUN_KEYS:
                    raise ValidationError(f"unknown key {key!r} in section [run]")
                file_run[key] = value
        for sub in SCHEMAS:
            if cp.has_section(sub):
                file_params_all[sub] = dict(cp.items(sub))

    sub = subcommand or file_run.get("subcommand")
    if sub is None:
        raise ValidationError(
            "no subcommand given (pass one on the command line or set it "
            "in the [run] section)")
    if sub not in SCHEMAS:
        raise ValidationError(
            f"unknown subcommand {sub!r}; expected one of {sorted(SCHEMAS)}")

    params = _parse_section_values(sub, file_params_all.get(sub, {}))
    for key, text in (overrides or {}).items():
        params.update(_parse_section_values(sub, {key: text}))

    if seed is not None:
        seed_text = str(seed)
    else:
        seed_text = file_run.get("seed", "0")
    try:
        seed_value = int(seed_text, 10)
    except ValueError as exc:
        raise ValidationError(f"invalid seed: {seed_text!r}") from exc
    out_dir = output_dir or file_run.get("output_dir", "runs")
    return ExperimentConfig(subcommand=sub, output_dir=out_dir,
                            seed=seed_value, params=params)


# ---------------------------------------------------------------------------
# artifact helpers
# ---------------------------------------------------------------------------

def _csv_text(header, rows) -> str:
    def cell(v):
        if isinstance(v, str):
            return v
        if isinstance(v, (bool, np.bool_)):
            return "true" if v else "false"
        if isinstance(v, (int, np.integer)):
            return str(int(v))
        return _fmt_float(v)

    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(cell(v) for v in row))
    return "\n".join(lines) + "\n"


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _write_artifacts(output_dir: str, artifacts: dict) -> None:
    os.makedirs(output_dir, exist_ok=True)
    for name in sorted(artifacts):
        data = artifacts[name]
        payload = data.encode() if isinstance(data, str) else data
        tmp = os.path.join(output_dir, f".{name}.{os.getpid()}.tmp")
        with open(tmp, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, os.path.join(output_dir, name))


def _workers_from_env() -> int:
    text = os.environ.get("CUSPFLOW_WORKERS", "1")
    try:
        value = int(text, 10)
    except ValueError as exc:
        raise ValidationError(
            f"CUSPFLOW_WORKERS must be a positive integer, got {text!r}") from exc
    if value < 1:
        raise ValidationError(
            f"CUSPFLOW_WORKERS must be a positive integer, got {value}")
    return value


def _versions() -> dict:
    import platform

    import scipy

    try:
        from importlib.metadata import version

        pkg = version("cuspflow")
    except Exception:
        pkg = "unknown"
    return {
        "package_version": pkg,
        "python_version": platform.python_version(),
        "numpy_version": np.__version__,
        "scipy_version": scipy.__version__,
    }


def _build_manifest(config: ExperimentConfig, workers: int, tolerances: dict,
                    artifact_names, failures) -> str:
    buf = io.StringIO()
    buf.write("[run]\n")
    buf.write(f"output_dir = {config.output_dir}\n")
    buf.write(f"seed = {config.seed}\n")
    buf.write(f"subcommand = {config.subcommand}\n\n")
    schema = _schema_map(config.subcommand)
    buf.write(f"[{config.subcommand}]\n")
    for key in sorted(config.params):
        buf.write(f"{key} = {_FORMATTERS[schema[key].typ](config.params[key])}\n")
    buf.write("\n[manifest]\n")
    entries = {"config_hash": config.config_hash(), "workers": str(workers)}
    entries.update({k: str(v) for k, v in _versions().items()})
    entries["artifacts"] = " ".join(sorted(artifact_names))
    entries["status"] = ("ok" if not failures
                         else "tolerance_failure: " + " ".join(sorted(failures)))
    for name in sorted(tolerances):
        value = tolerances[name]
        if isinstance(value, bool):
            text = "true" if value else "false"
        elif isinstance(value, (int, np.integer)):
            text = str(int(value))
        else:
            text = _fmt_float(value)
        entries[f"tolerance_{name}"] = text
    for key in sorted(entries):
        buf.write(f"{key} = {entries[key]}\n")
    return buf.getvalue()


# ---------------------------------------------------------------------------
# subcommand runners: each returns (artifacts, tolerances, failures)
# ---------------------------------------------------------------------------

def _gaussian_radial(center: float):
    return lambda rr: np.exp(-4.0 * (np.asarray(rr) - center) ** 2)


def _test_function_family(d: int, seed: int, count: int):
    from ._testfunctions import TestFunction, random_test_function

    out = []
    e1 = (1,) + (0,) * (d - 1)
    for i in range(count):
        rng = np.random.default_rng(seed + i)
        psi = random_test_function(d, rng, n_terms=3, max_deg=2)
        psi = psi + TestFunction.from_monomial(d, e1, 0.3, (0.8, -0.2))
        psi = psi + TestFunction.from_monomial(d, (0,) * d, 0.9, (1.0, 0.4))
        out.append(psi)
    return out


def _run_roots(config: ExperimentConfig):
    from .indicial import ModelOperator, indicial_roots, numeric_roots_jet

    p = config.params
    op = ModelOperator(d=p["d"], h=p["h"], A=p["twist"])
    roots = sorted(indicial_roots(op, p["s"], p["n_max"]),
                   key=lambda r: (r.sign, r.n))
    rows = []
    for r in roots:
        lam = complex(r.lambda_at(p["s"]))
        rows.append([r.sign, r.n, lam.real, lam.imag, r.multiplicity,
                     r.jordan_index])
    csv = _csv_text(
        ["sign", "n", "re_lambda", "im_lambda", "multiplicity", "jordan_index"],
        rows)

    # cross-check: at each enumerated plus root the jet matrix must have the
    # pairing eigenvalue h*s
    hs = p["h"] * p["s"]
    deviation = 0.0
    for r in roots:
        if r.sign != 1:
            continue
        op_r = ModelOperator(d=p["d"], h=p["h"], lam=complex(r.lambda_at(p["s"])),
                             A=p["twist"])
        eigs = numeric_roots_jet(op_r, p["s"], K=p["n_max"])
        deviation = max(deviation, float(np.min(np.abs(eigs - hs))))
    tolerances = {"jet_deviation_max": deviation}
    failures = [] if deviation <= 1e-9 else ["jet_deviation"]
    prefix = config.hash_prefix()
    return {f"{prefix}-roots.csv": csv}, tolerances, failures


def _run_eigendist(config: ExperimentConfig):
    from .indicial import ModelOperator, eigendistribution, indicial_roots

    p = config.params
    op0 = ModelOperator(d=p["d"], h=p["h"], A=p["twist"])
    roots = sorted(indicial_roots(op0, p["s"], p["n_max"]),
                   key=lambda r: (r.sign, r.n))
    psis = _test_function_family(p["d"], config.seed, p["n_test"])
    rows = []
    worst = 0.0
    for r in roots:
        lam = complex(r.lambda_at(p["s"]))
        op = ModelOperator(d=p["d"], h=p["h"], lam=lam, A=p["twist"])
        mu = (r.n,) + (0,) * (p["d"] - 1)
        rep = eigendistribution(r, op, mu)
        for i, psi in enumerate(psis):
            base = complex(rep.pair(psi))
            shifted = psi.apply_model_transpose(p["h"], lam, p["twist"])
            residual = abs(complex(rep.pair(shifted))
                           - complex(rep.eigenvalue) * base)
            rel = residual / max(1.0, abs(base))
            worst = max(worst, rel)
            rows.append([r.sign, r.n, lam.real, lam.imag, i, base.real,
                         base.imag, rel])
    csv = _csv_text(
        ["sign", "n", "re_lambda", "im_lambda", "psi_index", "re_pairing",
         "im_pairing", "eigen_residual"], rows)
    tolerances = {"eigen_residual_max": worst}
    failures = [] if worst <= 1e-6 else ["eigen_residual"]
    prefix = config.hash_prefix()
    return {f"{prefix}-pairings.csv": csv}, tolerances, failures


def _crossed_levels(d, h, s, lo, hi, n_cap=64):
    levels = []
    for n in range(n_cap):
        for sign in (1, -1):
            lam = sign * h * (s + d / 2.0 + n)
            if lo < complex(lam).real < hi:
                levels.append(complex(lam))
    levels.sort(key=lambda z: z.real)
    return levels


def _run_resolvent(config: ExperimentConfig):
    from .bcontinuation import (ContourSpec, CuspFunction, CuspTerm,
                                ResidueOperator, residue_apply, resolvent_line)
    from .indicial import ModelOperator

    p = config.params
    op = ModelOperator(d=p["d"], h=p["h"])
    f = CuspFunction(d=p["d"], terms=(CuspTerm(
        m=p["m"], mu=tuple(p["mu"]), poly=tuple(p["poly"]),
        radial=_gaussian_radial(p["r0"])),))

    x_grid = np.linspace(p["x_lo"], p["x_hi"], p["n_x"])

    def line(rho):
        return resolvent_line(op, p["s"], ContourSpec(
            rho=rho, height=p["height"], panels=p["panels"]), f,
            x_grid=x_grid, r_span=p["r_span"], n_r=p["n_r"])

    U = line(p["rho"])
    # plot-ready slices of the summed scalar field at three angular nodes,
    # evaluated along the diagonal cross-section direction
    u_dir = np.full(p["d"], 1.0 / math.sqrt(p["d"]))
    scalar = U.scalar_values(u_dir)
    slices = sorted({0, p["n_x"] // 2, p["n_x"] - 1})
    header = ["r"]
    for j in slices:
        tag = _fmt_float(x_grid[j])
        header += [f"re_x={tag}", f"im_x={tag}"]
    rows = []
    for idx, r in enumerate(U.r_grid):
        row = [float(r)]
        for j in slices:
            row += [float(scalar[idx, j].real), float(scalar[idx, j].imag)]
        rows.append(row)
    prefix = config.hash_prefix()
    artifacts = {f"{prefix}-resolvent.csv": _csv_text(header, rows)}
    tolerances: dict = {}
    failures: list = []

    if p["rho_prime"] is not None:
        hi, lo = max(p["rho"], p["rho_prime"]), min(p["rho"], p["rho_prime"])
        U_hi = U if hi == p["rho"] else line(hi)
        U_lo = U if lo == p["rho"] else line(lo)
        levels = _crossed_levels(p["d"], p["h"], p["s"], lo, hi)
        residue_sum = None
        for lam0 in levels:
            res = residue_apply(ResidueOperator(s=p["s"], lambda0=lam0), op, f,
                                x_grid=x_grid, r_span=p["r_span"], n_r=p["n_r"])
            field = res.field(U.r_grid)
            residue_sum = field if residue_sum is None else residue_sum + field
        diff = U_hi - U_lo
        if residue_sum is not None:
            diff = diff - residue_sum
        window = np.abs(U.r_grid) <= min(10.0, p["r_span"] / 3.0)
        num = 0.0
        den = 0.0
        for i in range(len(U.terms)):
            num = max(num, float(np.max(np.abs(diff.term_values(i)[window]))))
            den = max(den, float(np.max(np.abs(U_hi.term_values(i)[window]))))
            if residue_sum is not None:
                den = max(den, float(np.max(np.abs(
                    residue_sum.term_values(i)[window]))))
        defect = num / max(den, 1e-300)
        tolerances["shift_identity_defect"] = defect
        if defect > 1e-6:
            failures.append("shift_identity")
        artifacts[f"{prefix}-shift_identity.json"] = _json_text({
            "rho_low": lo,
            "rho_high": hi,
            "crossed_levels": [{"re": z.real, "im": z.imag} for z in levels],
            "defect": defect,
            "tolerance": 1e-6,
            "passed": defect <= 1e-6,
        })
    return artifacts, tolerances, failures


def _run_residue(config: ExperimentConfig):
    from ._sphere import homogeneous_dimension
    from .hadamard import pole_location, pole_residue

    p = config.params
    rows = []
    worst = 0.0
    index = 0
    for k in range(p["k_max"] + 1):
        ups = tuple(1.0 for _ in range(homogeneous_dimension(p["d"], k)))
        for j in range(p["j_max"] + 1):
            psi = _test_function_family(p["d"], config.seed + 37 * index, 1)[0]
            index += 1
            pair = pole_residue(j, k, ups, psi, p["d"], h=p["h"], eps=p["eps"],
                                n_nodes=p["n_nodes"])
            closed = complex(pair.closed_form)
            contour = complex(pair.contour)
            # guarded relative difference: parity makes some residues exactly
            # zero, where the contour value confirms the closed form absolutely
            rel = abs(closed - contour) / max(abs(closed), 1.0)
            worst = max(worst, rel)
            rows.append([p["d"], k, j, pole_location(j, k, p["h"]),
                         closed.real, closed.imag, contour.real, contour.imag,
                         abs(closed - contour), rel])
    csv = _csv_text(
        ["d", "k", "j", "pole_location", "re_closed", "im_closed",
         "re_contour", "im_contour", "abs_diff", "rel_diff"], rows)
    tolerances = {"residue_rel_diff_max": worst}
    failures = [] if worst <= 1e-6 else ["residue_match"]
    prefix = config.hash_prefix()
    return {f"{prefix}-residues.csv": csv}, tolerances, failures


def _run_escape(config: ExperimentConfig):
    from .escape import ReducedPhaseGrid, assemble_G, verify

    p = config.params
    grid = ReducedPhaseGrid(n_alpha=p["n_alpha"], n_theta=p["n_theta"],
                            n_phi=p["n_phi"], eps=p["eps"], delta=p["delta"])
    constants = {"step": p["step"], "T_prime": p["t_prime"]}
    if p["t"] is not None:
        constants["T"] = p["t"]
    if p["c_g_prime"] is not None:
        constants["C_G_prime"] = p["c_g_prime"]
    if p["r_small"] is not None:
        constants["R"] = p["r_small"]
    data = assemble_G(grid, constants=constants)
    cert = verify(grid, data, seed=config.seed)
    text = cert.to_json()
    if not text.endswith("\n"):
        text += "\n"
    tolerances = {"certificate_passed": cert.passed}
    for name, cond in sorted(cert.conditions.items()):
        tolerances[f"margin_{name}"] = float(cond["margin"])
    failures = [] if cert.passed else ["escape_certificate"]
    prefix = config.hash_prefix()
    return {f"{prefix}-certificate.json": text}, tolerances, failures


def _run_flow(config: ExperimentConfig):
    from .flow import flow_cusp_exact
    from .geometry import PhasePoint

    p = config.params
    p0 = PhasePoint(p["r0"], np.array(p["theta0"], dtype=float), p["phi0"],
                    np.array(p["u0"], dtype=float))
    n_steps = int(round(p["t_max"] / p["dt"]))
    times = [i * p["dt"] for i in range(n_steps + 1)]
    d = p["d"]
    header = ["t", "r"] + [f"theta_{i}" for i in range(d)] + ["phi", "y"]
    rows = []
    u_drift = 0.0
    r_max = -math.inf
    u0 = np.array(p["u0"], dtype=float)
    for t in times:
        q = flow_cusp_exact(p0, t)
        rows.append([t, q.r] + [float(v) for v in q.theta] + [q.phi, q.y])
        u_drift = max(u_drift, float(np.max(np.abs(q.u - u0))))
        r_max = max(r_max, q.r)
    csv = _csv_text(header, rows)

    half = flow_cusp_exact(flow_cusp_exact(p0, p["t_max"] / 2.0),
                           p["t_max"] / 2.0)
    full = flow_cusp_exact(p0, p["t_max"])
    semigroup = max(abs(half.r - full.r), abs(half.phi - full.phi),
                    float(np.max(np.abs(half.theta - full.theta))),
                    float(np.max(np.abs(half.u - full.u))))
    if 0.0 < p["phi0"] < math.pi:
        bound = p["r0"] - math.log(math.sin(p["phi0"]))
        height_defect = max(0.0, r_max - bound)
    else:
        bound = None
        height_defect = 0.0
    report = {
        "azimuth_drift": u_drift,
        "semigroup_defect": semigroup,
        "log_height_bound": bound,
        "log_height_defect": height_defect,
        "max_log_height_sampled": r_max,
        "tolerances": {"azimuth_drift": 1e-10, "semigroup_defect": 1e-8,
                       "log_height_defect": 1e-9},
    }
    tolerances = {"azimuth_drift": u_drift, "semigroup_defect": semigroup,
                  "log_height_defect": height_defect}
    failures = []
    if u_drift > 1e-10:
        failures.append("azimuth_drift")
    if semigroup > 1e-8:
        failures.append("semigroup_defect")
    if height_defect > 1e-9:
        failures.append("log_height_defect")
    prefix = config.hash_prefix()
    return ({f"{prefix}-trajectory.csv": csv,
             f"{prefix}-conservation.json": _json_text(report)},
            tolerances, failures)


def _make_observable(p: dict, side: str):
    from .flow import BumpObservable

    if p[f"{side}_kind"] == "const":
        value = float(p[f"{side}_value"])
        return lambda z, alpha: value
    return BumpObservable(
        center=complex(p[f"{side}_center_re"], p[f"{side}_center_im"]),
        radius=p[f"{side}_radius"], order=p[f"{side}_order"],
        amplitude=p[f"{side}_amplitude"], baseline=p[f"{side}_baseline"])


def _run_correlate(config: ExperimentConfig):
    from .flow import (_eval_observable, correlate, estimate_area,
                       laplace_tail_bound, laplace_transform, sample_liouville)

    p = config.params
    A = _make_observable(p, "a")
    B = _make_observable(p, "b")
    rec = correlate(A, B, T_max=p["t_max"], dt=p["dt"], n=p["n"],
                    seed=config.seed)
    csv = _csv_text(["t", "rho", "stderr"],
                    [[t, v, e] for t, v, e in
                     zip(rec.times, rec.values, rec.stderrs)])

    area, area_se = estimate_area(p["n"], config.seed + 1)
    samples = sample_liouville(p["n"], config.seed + 2)
    z = np.array([pt for pt, _ in samples], dtype=complex)
    al = np.array([a for _, a in samples], dtype=float)
    total = 2.0 * math.pi
    va = _eval_observable(A, z, al)
    vb = _eval_observable(B, z, al)
    mean_a = total * float(np.mean(va))
    mean_b = total * float(np.mean(vb))
    se_a = total * float(np.std(va, ddof=1)) / math.sqrt(p["n"])
    se_b = total * float(np.std(vb, ddof=1)) / math.sqrt(p["n"])
    limit = mean_a * mean_b / total
    limit_se = math.hypot(mean_b * se_a, mean_a * se_b) / total

    final = float(rec.values[-1])
    final_se = float(rec.stderrs[-1])
    gap = final - limit
    spread = math.hypot(final_se, limit_se)
    z_score = 0.0 if gap == 0.0 else (math.inf if spread == 0.0
                                      else gap / spread)

    lap = complex(laplace_transform(rec, p["s_probe"]))
    tail = float(laplace_tail_bound(rec, p["s_probe"]))
    probe = {
        "s": p["s_probe"],
        "laplace_value": lap.real,
        "s_times_laplace": p["s_probe"] * lap.real,
        "tail_bound": tail,
        "mixing_limit": limit,
        "mixing_limit_stderr": limit_se,
        "final_value": final,
        "final_stderr": final_se,
        "final_gap_z_score": z_score,
        "area": area,
        "area_stderr": area_se,
        "area_target": total,
        "area_gap_z_score": (area - total) / area_se if area_se > 0 else 0.0,
        "sample_count": p["n"],
    }
    tolerances = {
        "final_gap_z_score": z_score,
        "area_gap_z_score": probe["area_gap_z_score"],
    }
    prefix = config.hash_prefix()
    return ({f"{prefix}-correlation.csv": csv,
             f"{prefix}-laplace.json": _json_text(probe)},
            tolerances, [])


_RUNNERS = {
    "roots": _run_roots,
    "eigendist": _run_eigendist,
    "resolvent": _run_resolvent,
    "residue": _run_residue,
    "escape": _run_escape,
    "flow": _run_flow,
    "correlate": _run_correlate,
}


# ---------------------------------------------------------------------------
# runner entry points
# ---------------------------------------------------------------------------

def run(config: ExperimentConfig) -> int:
    """Validate, compute, write artifacts atomically; return the exit code."""
    workers = _workers_from_env()
    config.validate()
    artifacts, tolerances, failures = _RUNNERS[config.subcommand](config)
    manifest = _build_manifest(config, workers, tolerances,
                               list(artifacts), failures)
    artifacts[f"{config.hash_prefix()}-manifest.ini"] = manifest
    _write_artifacts(config.output_dir, artifacts)
    if failures:
        print(json.dumps({"error": "tolerance", "failures": sorted(failures),
                          "tolerances": {k: repr(v) for k, v in
                                         sorted(tolerances.items())}},
                         sort_keys=True), file=sys.stderr)
        return 3
    return 0


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors match the JSON diagnostic format."""

    def error(self, message):
        print(json.dumps({"error": "validation", "type": "ArgumentError",
                          "message": message}, sort_keys=True),
              file=sys.stderr)
        raise SystemExit(2)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="cuspflow",
        description="Experiment runner for cusp geodesic-flow computations.")
    common = {"config": ("--config", "path to an INI config file"),
              "output_dir": ("--output-dir", "directory for artifacts"),
              "seed": ("--seed", "random seed (nonnegative integer)")}
    for dest, (flag, help_text) in common.items():
        parser.add_argument(flag, dest=dest, default=None, help=help_text)
    subparsers = parser.add_subparsers(dest="subcommand")
    for name, schema in SCHEMAS.items():
        sp = subparsers.add_parser(
            name, description=f"run the {name} experiment",
            help=f"{name} experiment")
        for dest, (flag, help_text) in common.items():
            sp.add_argument(flag, dest=dest, default=None, help=help_text)
        for param in schema:
            sp.add_argument(f"--{param.key.replace('_', '-')}",
                            dest=f"param_{param.key}", default=None,
                            metavar="VALUE",
                            help=f"{param.help} (default: "
                                 f"{_FORMATTERS[param.typ](param.default)})")
    return parser


def _diagnostic(kind: str, exc: BaseException) -> None:
    print(json.dumps({"error": kind, "type": type(exc).__name__,
                      "message": str(exc)}, sort_keys=True), file=sys.stderr)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        overrides = {key[len("param_"):]: value
                     for key, value in vars(args).items()
                     if key.startswith("param_") and value is not None}
        config = config_from_sources(
            subcommand=args.subcommand, config_path=args.config,
            output_dir=args.output_dir, seed=args.seed, overrides=overrides)
        return run(config)
    except _CONFIG_ERRORS as exc:
        _diagnostic("validation", exc)
        return 2
    except ToleranceError as exc:
        _diagnostic("tolerance", exc)
        return 3
    except Exception as exc:  # pragma: no cover - defensive
        _diagnostic("internal", exc)
        return 4


if __name__ == "__main__":
    sys.exit(main())
