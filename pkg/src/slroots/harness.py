"""Experiment configuration, the run pipeline and report serialization.

A config is one strict JSON document. ``run`` executes
validate -> discretize -> analyze -> scans -> completeness for a builtin
problem, or one of the two labs, and returns a :class:`Report`.
Reports serialize every float with 17 significant digits, so
``Report.from_json(r.to_json()).to_json() == r.to_json()`` bit for bit.
Wall-clock timings are kept beside the report, never inside it, so that
repeated runs produce byte-identical JSON.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Literal, Union

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    field_validator,
    model_validator,
)

from . import __version__
from .discretize import AssembledSystem, discretize, dump_system
from .problem import BUILTIN_PROBLEMS, builtin_problem, validate
from .spectral import (
    analyze,
    bitsadze_witness,
    completeness_residual,
    decompose,
    keldysh_lab,
    make_rng,
    random_perturbation,
    resolvent_scan,
)

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "LABS",
    "Report",
    "StageError",
    "export",
    "load_config",
    "registry",
    "run",
    "system_from_config",
]

LABS = ("keldysh_lab", "bitsadze_witness")


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    """A module error wrapped with the pipeline stage it came from."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage}: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


def registry() -> tuple[str, ...]:
    return tuple(BUILTIN_PROBLEMS) + LABS


# ---------------------------------------------------------------------------
# configuration

ComplexIn = Union[float, list[float], dict[str, float]]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ScanConfig(_Strict):
    rays: list[float] = Field(min_length=1)
    radii: list[float] = Field(min_length=1)

    @field_validator("rays")
    @classmethod
    def _rays(cls, v):
        if any(not -math.pi < t <= math.pi for t in v):
            raise ValueError("ray angles must lie in (-pi, pi]")
        return v

    @field_validator("radii")
    @classmethod
    def _radii(cls, v):
        if any(not (r > 0 and math.isfinite(r)) for r in v):
            raise ValueError("radii must be positive and finite")
        return v


class CompletenessConfig(_Strict):
    m_list: list[int] = Field(min_length=1)
    target: Literal["square", "ones"] = "square"

    @field_validator("m_list")
    @classmethod
    def _m(cls, v):
        if any(m < 1 for m in v):
            raise ValueError("m_list entries must be >= 1")
        return v


class PerturbationConfig(_Strict):
    c: float = Field(ge=0.0)


class KeldyshConfig(_Strict):
    N: int = Field(ge=1, le=1024)
    p: float = Field(gt=0.0)
    delta_norm: float = Field(ge=0.0)
    eps_list: list[float] = Field(min_length=1)


class BitsadzeConfig(_Strict):
    s: float = Field(gt=1.0)
    k_list: list[int] = Field(min_length=1)
    resolution: int = Field(default=64, ge=64)


class OutputConfig(_Strict):
    path: str | None = None
    format: Literal["json", "csv"] = "json"


class ExperimentConfig(_Strict):
    """Declarative description of one run; unknown keys are rejected."""

    name: str = "experiment"
    problem: str
    params: dict[str, ComplexIn] = Field(default_factory=dict)
    resolution: int = Field(default=64, ge=2, le=4096)
    degree: Literal[1, 2] = 1
    tol: float = Field(default=1e-10, ge=1e-14, le=1e-2)
    perturbation: PerturbationConfig | None = None
    scans: ScanConfig | None = None
    completeness: CompletenessConfig | None = None
    fit_window: tuple[int, int] | None = None
    keldysh: KeldyshConfig | None = None
    bitsadze: BitsadzeConfig | None = None
    seed: int = Field(default=0, ge=0, lt=2**64)
    output: OutputConfig = Field(default_factory=OutputConfig)

    @field_validator("fit_window")
    @classmethod
    def _window(cls, v):
        if v is not None and not 1 <= v[0] < v[1]:
            raise ValueError("fit_window must satisfy 1 <= lo < hi")
        return v

    @model_validator(mode="after")
    def _sections(self):
        if self.problem not in registry():
            raise ValueError(f"unknown problem {self.problem!r}; known: {', '.join(registry())}")
        if self.problem == "keldysh_lab" and self.keldysh is None:
            raise ValueError("keldysh_lab needs a 'keldysh' section")
        if self.problem == "bitsadze_witness" and self.bitsadze is None:
            raise ValueError("bitsadze_witness needs a 'bitsadze' section")
        return self


def load_config(source: str | Path | dict) -> ExperimentConfig:
    """Parse a config from a path or a mapping; raises :class:`ConfigError`."""
    try:
        if isinstance(source, dict):
            doc = source
        else:
            doc = json.loads(Path(source).read_text(encoding="utf-8"))
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        return ExperimentConfig.model_validate(doc)
    except ValidationError as exc:
        msgs = "; ".join(
            f"{'.'.join(str(p) for p in e['loc']) or '<root>'}: {e['msg']}" for e in exc.errors()
        )
        raise ConfigError(msgs) from None
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {source}: {exc}") from None


# ---------------------------------------------------------------------------
# serialization


def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    text = "%.17g" % x
    # keep floats recognisable as floats after a round trip
    return text if any(ch in text for ch in ".en") else text + ".0"


def _plain(obj: Any) -> Any:
    """Convert numpy values, complex numbers and tuples to JSON-ready types."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return {"re": _plain(obj.real.tolist()), "im": _plain(obj.imag.tolist())}
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _encode(obj: Any, out: list[str]) -> None:
    if isinstance(obj, dict):
        out.append("{")
        for i, (k, v) in enumerate(obj.items()):
            if i:
                out.append(",")
            out.append(json.dumps(k))
            out.append(":")
            _encode(v, out)
        out.append("}")
    elif isinstance(obj, list):
        out.append("[")
        for i, v in enumerate(obj):
            if i:
                out.append(",")
            _encode(v, out)
        out.append("]")
    elif isinstance(obj, bool) or obj is None:
        out.append(json.dumps(obj))
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(_fmt_float(obj))
    else:
        out.append(json.dumps(obj, ensure_ascii=False))


def dumps(doc: Any) -> str:
    out: list[str] = []
    _encode(_plain(doc), out)
    return "".join(out)


def _atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


@dataclass
class Report:
    """A run's results as a plain JSON document plus out-of-band timings."""

    document: dict
    timings: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return dumps(self.document)

    @classmethod
    def from_json(cls, text: str) -> "Report":
        return cls(json.loads(text))

    def __getitem__(self, key):
        return self.document[key]

    def get(self, key, default=None):
        return self.document.get(key, default)

    def eigenvalues(self) -> np.ndarray:
        ev = self.document["spectral"]["eigenvalues"]
        return np.array(ev["re"]) + 1j * np.array(ev["im"])


# ---------------------------------------------------------------------------
# pipeline


def _stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


def system_from_config(cfg: ExperimentConfig) -> tuple[AssembledSystem, dict]:
    """Build the (possibly perturbed) system of a builtin-problem config."""
    if cfg.problem in LABS:
        raise ConfigError(f"{cfg.problem} has no assembled system")
    spec = _stage("problem", builtin_problem, cfg.problem, cfg.params)
    report = _stage("validate", validate, spec)
    sys = _stage("discretize", discretize, spec, cfg.resolution, cfg.degree)
    if cfg.perturbation is not None:
        rng = make_rng(cfg.seed)
        sys = _stage("perturb", random_perturbation, sys, cfg.perturbation.c, rng)
    return sys, report.to_dict()


def _target(sys: AssembledSystem, kind: str) -> np.ndarray:
    if kind == "ones":
        return np.ones(sys.N, dtype=complex)
    pts = sys.basis.dof_nodes
    pts = pts.reshape(len(pts), -1)
    return np.sum(pts**2, axis=1).astype(complex)


def _spectral_doc(rep, data) -> dict:
    return {
        "eigenvalues": rep.eigenvalues,
        "residuals": data.spectrum.residuals,
        "clusters": rep.clusters,
        "chain_lengths": rep.chain_lengths,
        "cluster_count": rep.cluster_count,
        "max_chain_length": rep.max_chain_length,
        "s_numbers": rep.s_numbers,
        "c_discrete": rep.c,
        "max_abs_arg": rep.max_abs_arg,
        "sector_bound": rep.sector_bound,
        "violations": rep.violations,
        "decay_exponent": rep.decay_exponent,
        "fit_window": list(rep.fit_window),
        "completeness_angle_ok": rep.completeness_angle_ok,
        "s_exponent": rep.s_exponent,
        "ambient_dim": rep.ambient_dim,
        "schatten_predictions": rep.schatten_predictions,
    }


def _scan_doc(scan) -> dict:
    return {
        "theta": scan.theta,
        "c": scan.c,
        "samples": [
            {"r": s.r, "lam": s.lam, "norm": s.norm, "bound": s.bound, "ok": s.ok, "singular": s.singular}
            for s in scan.samples
        ],
    }


def run(cfg: ExperimentConfig | dict) -> Report:
    """Execute one experiment; deterministic given the config and its seed."""
    if isinstance(cfg, dict):
        cfg = load_config(cfg)
    timings: dict[str, float] = {}
    doc: dict[str, Any] = {
        "artifact_version": __version__,
        "config": cfg.model_dump(mode="json"),
    }

    def timed(name, fn, *args, **kwargs):
        t0 = time.perf_counter()
        out = _stage(name, fn, *args, **kwargs)
        timings[name] = time.perf_counter() - t0
        return out

    if cfg.problem == "keldysh_lab":
        k = cfg.keldysh
        st = timed("keldysh_lab", keldysh_lab, k.N, k.p, k.delta_norm, k.eps_list, cfg.seed)
        doc["keldysh"] = {
            "N": st.N, "p": st.p, "delta_norm": st.delta_norm, "seed": st.seed,
            "eigenvalues": st.eigenvalues, "eps_list": st.eps_list,
            "outside_counts": st.outside_counts,
            "negative_corner_counts": st.negative_corner_counts,
            "max_abs_imag": st.max_abs_imag, "root_rank": st.root_rank,
        }
        return Report(json.loads(dumps(doc)), timings)
    if cfg.problem == "bitsadze_witness":
        b = cfg.bitsadze
        rows = timed("bitsadze_witness", bitsadze_witness, b.s, b.k_list, b.resolution)
        doc["bitsadze"] = [
            {"k": r.k, "l2_norm": r.l2_norm, "sup_abs": r.sup_abs, "sup_dx": r.sup_dx,
             "boundary_max": r.boundary_max}
            for r in rows
        ]
        return Report(json.loads(dumps(doc)), timings)

    t0 = time.perf_counter()
    sys, validation = system_from_config(cfg)
    timings["assemble"] = time.perf_counter() - t0
    doc["validation"] = validation
    doc["system"] = {"N": sys.N, "basis": sys.basis.to_dict(), "metadata": sys.metadata}
    data = timed("decompose", decompose, sys, cfg.tol)
    rep = timed("analyze", analyze, sys, cfg.tol, cfg.fit_window, data)
    doc["spectral"] = _spectral_doc(rep, data)
    if cfg.scans is not None:
        doc["scans"] = [
            _scan_doc(timed(f"scan[{i}]", resolvent_scan, sys, th, cfg.scans.radii, data))
            for i, th in enumerate(cfg.scans.rays)
        ]
    if cfg.completeness is not None:
        m_list = [m for m in cfg.completeness.m_list if m <= sys.N]
        rows = timed(
            "completeness", completeness_residual, sys,
            _target(sys, cfg.completeness.target), m_list, data,
        )
        doc["completeness"] = [{"m": r.m, "dual": r.dual, "l2": r.l2, "sl": r.sl} for r in rows]
    # normalise through the encoder so in-memory and re-read reports agree
    return Report(json.loads(dumps(doc)), timings)


# ---------------------------------------------------------------------------
# export


def _csv_text(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt_float(v) if isinstance(v, float) else ("" if v is None else v) for v in row])
    return buf.getvalue()


def export(report: Report, fmt: str, path: str | Path) -> list[Path]:
    """Write ``report.json`` (plus ``timings.json``) or one CSV per table into ``path``."""
    out = Path(path)
    written: list[Path] = []

    def put(name, text):
        _atomic_write(out / name, text)
        written.append(out / name)

    if fmt == "json":
        put("report.json", report.to_json() + "\n")
        put("timings.json", dumps(report.timings) + "\n")
        return written
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")
    doc = report.document
    if "spectral" in doc:
        sp = doc["spectral"]
        w = np.array(sp["eigenvalues"]["re"]) + 1j * np.array(sp["eigenvalues"]["im"])
        put("eigenvalues.csv", _csv_text(
            ["index", "re", "im", "abs", "arg", "cluster", "chain_len"],
            ([i, float(z.real), float(z.imag), float(abs(z)), float(np.angle(z)), c, ch]
             for i, (z, c, ch) in enumerate(zip(w, sp["clusters"], sp["chain_lengths"]))),
        ))
        put("s_numbers.csv", _csv_text(["index", "mu"], enumerate(sp["s_numbers"])))
    if "scans" in doc:
        put("scans.csv", _csv_text(
            ["theta", "r", "norm", "bound", "ok"],
            ([s["theta"], x["r"], x["norm"], x["bound"], x["ok"]] for s in doc["scans"] for x in s["samples"]),
        ))
    if "completeness" in doc:
        put("completeness.csv", _csv_text(
            ["m", "dual", "l2", "sl"], ([r["m"], r["dual"], r["l2"], r["sl"]] for r in doc["completeness"]),
        ))
    if "keldysh" in doc:
        k = doc["keldysh"]
        put("keldysh.csv", _csv_text(
            ["eps", "outside", "negative_corner"],
            zip(k["eps_list"], k["outside_counts"], k["negative_corner_counts"]),
        ))
    if "bitsadze" in doc:
        put("bitsadze.csv", _csv_text(
            ["k", "l2_norm", "sup_abs", "sup_dx", "boundary_max"],
            ([r["k"], r["l2_norm"], r["sup_abs"], r["sup_dx"], r["boundary_max"]] for r in doc["bitsadze"]),
        ))
    return written


def dump_matrices(cfg: ExperimentConfig, out_dir: str | Path) -> list[Path]:
    sys, _ = system_from_config(cfg)
    return _stage("dump", dump_system, sys, out_dir)
