"""Command-line entry point: configured jobs, delimited output, figures.

Jobs map onto the library: `bands` scans a k-grid, `extrema` locates and
classifies a band extremum, `t1scan` sweeps the linearized-pencil
spectrum over k2, `discriminant` runs the degeneracy scan, `discrete`
runs the diatomic-model suite, and `selfcheck` executes the invariant
battery.  Every job writes csv or json (17-significant-digit floats) plus
a matplotlib figure into the output directory; outputs are deterministic
for a fixed config, independent of the worker count.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import bands as bd
from . import coefficients as co
from . import discrete as dc
from . import fiber as fb
from . import linearization as lz
from . import plots
from .errors import BandEdgeError, ConfigError, IOFailure
from .lattice import canonicalize
from .selfcheck import render_report, run_selfcheck

JOB_KINDS = ("bands", "extrema", "t1scan", "discriminant", "discrete", "selfcheck")

# Strict schema: section -> key -> expected "shape" hint used in messages.
_SCHEMA = {
    "": {"job"},
    "lattice": {"b1", "b2"},
    "coefficients": {"V", "A1", "A2", "omega"},
    "discretization": {"truncation", "resolution", "bands"},
    "tolerances": {
        "tol_cluster", "tol_pair", "tol_disc", "tol_real", "tol_boundary",
        "im_cap", "grad_tol", "isolated_spacings", "extended_fraction",
        "fd_step", "mass_cond_limit",
    },
    "output": {"path", "format", "figures", "workers"},
    "extrema": {"band", "kind", "eps"},
    "t1scan": {"lambda_re", "lambda_im", "k2"},
    "discriminant": {"lambda_re", "lambda_im", "k2_start", "k2_stop", "k2_count"},
    "discrete": {"v0", "v1", "resolution", "torus_sizes", "level_values", "eps"},
}


@dataclass
class JobConfig:
    job: str = "selfcheck"
    b1: list = field(default_factory=lambda: [1.0, 0.0])
    b2: list = field(default_factory=lambda: [0.0, 1.0])
    v_terms: list = field(default_factory=list)
    a1_terms: list = field(default_factory=list)
    a2_terms: list = field(default_factory=list)
    omega_terms: list = field(default_factory=lambda: [[0, 0, 1.0, 0.0]])
    truncation: int = 8
    resolution: list = field(default_factory=lambda: [32, 32])
    band_count: int = 4
    tolerances: dict = field(default_factory=dict)
    out_path: str = "out"
    out_format: str = "csv"
    figures: bool = True
    workers: int = 0  # 0 = available parallelism
    extrema: dict = field(default_factory=lambda: {"band": 1, "kind": "min", "eps": 1e-3})
    t1scan: dict = field(default_factory=lambda: {"lambda_re": 0.0, "lambda_im": 0.0,
                                                  "k2": [0.0]})
    discriminant: dict = field(default_factory=lambda: {
        "lambda_re": 0.0, "lambda_im": 0.0,
        "k2_start": -0.5, "k2_stop": 0.5, "k2_count": 21,
    })
    discrete: dict = field(default_factory=lambda: {
        "v0": 0.0, "v1": 2.0, "resolution": 200,
        "torus_sizes": [2, 4, 8, 16], "level_values": [], "eps": 1e-9,
    })


def _reject_unknown(section: str, table: dict):
    allowed = _SCHEMA[section]
    for key in table:
        if isinstance(table[key], dict):
            continue
        if key not in allowed:
            where = section or "top level"
            raise ConfigError(f"unknown key '{key}' in {where}")


def load_config(path: str | Path) -> JobConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error: {exc}") from exc

    for section in raw:
        if isinstance(raw[section], dict):
            if section not in _SCHEMA:
                raise ConfigError(f"unknown section '{section}'")
            _reject_unknown(section, raw[section])
    _reject_unknown("", raw)

    cfg = JobConfig()
    if "job" in raw:
        cfg.job = str(raw["job"])
    lattice = raw.get("lattice", {})
    cfg.b1 = list(lattice.get("b1", cfg.b1))
    cfg.b2 = list(lattice.get("b2", cfg.b2))
    coeff = raw.get("coefficients", {})
    cfg.v_terms = list(coeff.get("V", []))
    cfg.a1_terms = list(coeff.get("A1", []))
    cfg.a2_terms = list(coeff.get("A2", []))
    cfg.omega_terms = list(coeff.get("omega", cfg.omega_terms))
    disc = raw.get("discretization", {})
    cfg.truncation = int(disc.get("truncation", cfg.truncation))
    res = disc.get("resolution", cfg.resolution)
    cfg.resolution = [int(res), int(res)] if np.isscalar(res) else [int(r) for r in res]
    cfg.band_count = int(disc.get("bands", cfg.band_count))
    cfg.tolerances = dict(raw.get("tolerances", {}))
    out = raw.get("output", {})
    cfg.out_path = str(out.get("path", cfg.out_path))
    cfg.out_format = str(out.get("format", cfg.out_format))
    cfg.figures = bool(out.get("figures", cfg.figures))
    cfg.workers = int(out.get("workers", cfg.workers))
    for name in ("extrema", "t1scan", "discriminant", "discrete"):
        merged = dict(getattr(cfg, name))
        merged.update(raw.get(name, {}))
        setattr(cfg, name, merged)

    if cfg.job not in JOB_KINDS:
        raise ConfigError(f"unknown job kind '{cfg.job}' (expected one of {JOB_KINDS})")
    if cfg.out_format not in ("csv", "json"):
        raise ConfigError(f"format must be csv or json, got '{cfg.out_format}'")
    return cfg


def _scalar_field(lat, rows, what):
    terms = {}
    for row in rows:
        if len(row) != 4:
            raise ConfigError(f"{what} entries must be [m1, m2, re, im], got {row}")
        m1, m2, re, im = row
        terms[(int(m1), int(m2))] = complex(float(re), float(im))
    return co.FourierField(lat, terms, 1)


def build_coefficients(cfg: JobConfig):
    lat = canonicalize(np.asarray(cfg.b1, float), np.asarray(cfg.b2, float))
    a1 = _scalar_field(lat, cfg.a1_terms, "A1")
    a2 = _scalar_field(lat, cfg.a2_terms, "A2")
    keys = set(a1.terms) | set(a2.terms)
    a_terms = {
        m: np.array([a1.amplitude(m), a2.amplitude(m)]) for m in keys
    }
    cs = co.CoefficientSet(
        V=_scalar_field(lat, cfg.v_terms, "V"),
        A=co.FourierField(lat, a_terms, 2),
        omega=_scalar_field(lat, cfg.omega_terms, "omega"),
    )
    report = co.validate(cs)
    if not report.passed:
        failed = [c.name for c in report.checks if not c.passed]
        raise ConfigError(f"coefficient set fails validation: {failed}")
    return cs


# -- serialization ------------------------------------------------------------

def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def write_csv(path: Path, comments: list[str], header: list[str], rows):
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for line in comments:
                fh.write(f"# {line}\n")
            fh.write(",".join(header) + "\n")
            for row in rows:
                cells = [
                    cell if isinstance(cell, str) else _fmt(cell) for cell in row
                ]
                fh.write(",".join(cells) + "\n")
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc}") from exc


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {k: to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_json(path: Path, obj):
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(to_jsonable(obj), fh, indent=1, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc}") from exc


def _grid_rows(grid):
    n1, n2 = grid.shape
    for i in range(n1):
        for j in range(n2):
            k = grid.kvec(i, j)
            yield [i / n1, j / n2, k[0], k[1], *grid.values[i, j]]


def _emit_grid(grid, out: Path, stem: str, fmt: str, comments: list[str]):
    nb = grid.band_count
    if fmt == "csv":
        header = ["t1", "t2", "k1", "k2"] + [f"lambda_{b+1}" for b in range(nb)]
        write_csv(out / f"{stem}.csv", comments, header, _grid_rows(grid))
    else:
        write_json(out / f"{stem}.json", {
            "comments": comments,
            "edge1": grid.edge1,
            "edge2": grid.edge2,
            "resolution": list(grid.shape),
            "values": grid.values,
        })


def _mass_dict(m: bd.EffectiveMass):
    return {
        "tensor": m.tensor,
        "hessian": m.hessian,
        "step": m.step,
        "richardson_error": m.richardson_error,
        "degenerate": m.degenerate,
    }


def _report_dict(rep: bd.ExtremumReport):
    return {
        "band": rep.band,
        "kind": rep.kind,
        "value": rep.value,
        "points": [p for p in rep.points],
        "classification": rep.classification,
        "cluster_diameters": rep.cluster_diameters,
        "gradient_norms": rep.gradient_norms,
        "hessians": [_mass_dict(m) for m in rep.masses],
        "eps": rep.eps,
        "spacing": rep.spacing,
        "cell_diameter": rep.cell_diameter,
    }


def _emit_extremum(rep, out: Path, stem: str, fmt: str):
    if fmt == "json":
        write_json(out / f"{stem}.json", _report_dict(rep))
        return
    header = [
        "band", "kind", "value", "k1", "k2", "classification", "grad_norm",
        "hess_11", "hess_12", "hess_22", "tensor_11", "tensor_12", "tensor_22",
        "fd_step", "richardson_error", "degenerate",
    ]
    rows = []
    for idx, p in enumerate(rep.points):
        m = rep.masses[idx] if idx < len(rep.masses) else None
        rows.append([
            str(rep.band), rep.kind, rep.value, p[0], p[1],
            rep.classification, rep.gradient_norms[idx],
            *(list(m.hessian[np.triu_indices(2)]) if m else [np.nan] * 3),
            *(list(m.tensor[np.triu_indices(2)]) if m else [np.nan] * 3),
            m.step if m else np.nan,
            m.richardson_error if m else np.nan,
            str(m.degenerate) if m else "",
        ])
    comments = [
        "band extremum report (hbar = 1)",
        f"eps {_fmt(rep.eps)}; spacing {_fmt(rep.spacing)}; "
        f"cell diameter {_fmt(rep.cell_diameter)}",
        "cluster diameters: " + " ".join(_fmt(d) for d in rep.cluster_diameters),
    ]
    write_csv(out / f"{stem}.csv", comments, header, rows)


def emit(report, out_dir, fmt: str = "csv", stem: str | None = None) -> Path:
    """Write a report object to disk in the requested format.

    Dispatches on the report type (band grids, extremum reports,
    discriminant scans); returns the path written.  Job runners use the
    same writers with job-specific comments.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if isinstance(report, bd.BandGrid):
        stem = stem or "bands"
        _emit_grid(report, out, stem, fmt, ["band values on the cell grid"])
    elif isinstance(report, bd.ExtremumReport):
        stem = stem or "extrema"
        _emit_extremum(report, out, stem, fmt)
    elif isinstance(report, lz.DiscriminantScan):
        stem = stem or "discriminant"
        rows = []
        for e in report.entries:
            delta = e.delta if e.delta is not None else complex(np.nan, np.nan)
            rows.append([e.k2, delta.real, delta.imag, e.abs_delta,
                         str(int(e.flag))])
        if fmt == "csv":
            write_csv(out / f"{stem}.csv",
                      ["window-restricted discriminant sweep"],
                      ["k2", "re", "im", "abs", "flag"], rows)
        else:
            write_json(out / f"{stem}.json", {
                "lambda": report.lam,
                "entries": [
                    {"k2": e.k2, "abs": e.abs_delta, "flag": e.flag,
                     "min_pair": e.min_pair, "error": e.error}
                    for e in report.entries
                ],
            })
    else:
        raise ConfigError(f"no emitter for report type {type(report).__name__}")
    suffix = "csv" if fmt == "csv" else "json"
    return out / f"{stem}.{suffix}"


# -- job runners ---------------------------------------------------------------

def _resolve_workers(cfg: JobConfig) -> int:
    return cfg.workers if cfg.workers > 0 else (os.cpu_count() or 1)


def _run_bands(cfg: JobConfig, out: Path) -> None:
    cs = build_coefficients(cfg)
    basis = fb.PlaneWaveBasis(cs.lat, cfg.truncation)
    grid = bd.scan(cs, tuple(cfg.resolution), basis, cfg.band_count,
                   workers=_resolve_workers(cfg))
    comments = [
        "band values on the dual cell; k = t1*edge1 + t2*edge2",
        f"truncation N {cfg.truncation}; bands {cfg.band_count}",
    ]
    _emit_grid(grid, out, "bands", cfg.out_format, comments)
    if cfg.figures:
        plots.save_band_figure(grid, out / "bands.png")


def _run_extrema(cfg: JobConfig, out: Path) -> None:
    cs = build_coefficients(cfg)
    basis = fb.PlaneWaveBasis(cs.lat, cfg.truncation)
    grid = bd.scan(cs, tuple(cfg.resolution), basis, cfg.band_count,
                   workers=_resolve_workers(cfg))
    tol = cfg.tolerances
    rep = bd.locate_extrema(
        grid, int(cfg.extrema["band"]), str(cfg.extrema["kind"]),
        float(cfg.extrema["eps"]), cs=cs, basis=basis,
        grad_tol=float(tol.get("grad_tol", bd.GRAD_TOL)),
        isolated_spacings=float(tol.get("isolated_spacings", bd.ISOLATED_SPACINGS)),
        extended_fraction=float(tol.get("extended_fraction", bd.EXTENDED_FRACTION)),
        fd_step=float(tol.get("fd_step", 1e-3)),
    )
    _emit_extremum(rep, out, "extrema", cfg.out_format)
    if cfg.figures:
        plots.save_extremum_figure(grid, rep, out / "extrema.png")


def _run_t1scan(cfg: JobConfig, out: Path) -> None:
    cs = build_coefficients(cfg)
    basis = fb.PlaneWaveBasis(cs.lat, cfg.truncation)
    lam = complex(float(cfg.t1scan["lambda_re"]), float(cfg.t1scan["lambda_im"]))
    tol_cluster = float(cfg.tolerances.get("tol_cluster", lz.TOL_CLUSTER))
    rows = []
    fig_entries = []
    for k2 in cfg.t1scan["k2"]:
        t1 = lz.assemble_t1(cs, float(k2), lam, basis)
        spec = lz.t1_spectrum(t1, tol_cluster)
        member_to_cluster = {}
        for cid, cl in enumerate(spec.clusters):
            for idx in cl.members:
                member_to_cluster[idx] = (cid, cl.multiplicity)
        for idx, z in enumerate(spec.eigenvalues):
            cid, mult = member_to_cluster[idx]
            rows.append([float(k2), z.real, z.imag, str(cid), str(mult)])
        fig_entries.append((float(k2), spec.eigenvalues))
    comments = [
        "linearized-pencil eigenvalues per k2",
        f"lambda {_fmt(lam.real)} + {_fmt(lam.imag)} i; truncation N {cfg.truncation}",
    ]
    if cfg.out_format == "csv":
        write_csv(out / "t1scan.csv", comments,
                  ["k2", "re_k1", "im_k1", "cluster", "multiplicity"], rows)
    else:
        write_json(out / "t1scan.json", {
            "comments": comments,
            "lambda": lam,
            "entries": [
                {"k2": k2, "eigenvalues": vals} for k2, vals in fig_entries
            ],
        })
    if cfg.figures:
        plots.save_t1_figure(fig_entries, out / "t1scan.png")


def _run_discriminant(cfg: JobConfig, out: Path) -> None:
    cs = build_coefficients(cfg)
    basis = fb.PlaneWaveBasis(cs.lat, cfg.truncation)
    section = cfg.discriminant
    lam = complex(float(section["lambda_re"]), float(section["lambda_im"]))
    k2_values = np.linspace(
        float(section["k2_start"]), float(section["k2_stop"]),
        int(section["k2_count"]),
    )
    policy = {
        key: float(cfg.tolerances[key])
        for key in ("im_cap", "tol_disc", "tol_real", "tol_pair", "tol_boundary")
        if key in cfg.tolerances
    }
    scan = lz.degeneracy_scan(cs, lam, k2_values, basis, policy or None)
    rows = []
    for e in scan.entries:
        delta = e.delta if e.delta is not None else complex(np.nan, np.nan)
        rows.append([e.k2, delta.real, delta.imag, e.abs_delta,
                     str(int(e.flag))])
    comments = [
        "window-restricted discriminant along the k2 sweep",
        f"lambda {_fmt(lam.real)} + {_fmt(lam.imag)} i",
        "flag = 1: numerically degenerate real eigenvalue detected",
    ]
    errors = [f"k2 {_fmt(e.k2)}: {e.error}" for e in scan.entries if e.error]
    if errors:
        comments += ["window rejections:"] + errors
    if cfg.out_format == "csv":
        write_csv(out / "discriminant.csv", comments,
                  ["k2", "re", "im", "abs", "flag"], rows)
    else:
        write_json(out / "discriminant.json", {
            "comments": comments,
            "lambda": lam,
            "entries": [
                {
                    "k2": e.k2,
                    "delta": e.delta if e.delta is not None else None,
                    "abs": e.abs_delta,
                    "flag": e.flag,
                    "min_pair": e.min_pair,
                    "error": e.error,
                }
                for e in scan.entries
            ],
        })
    if cfg.figures:
        plots.save_discriminant_figure(scan, out / "discriminant.png")


def _run_discrete(cfg: JobConfig, out: Path) -> None:
    section = cfg.discrete
    model = dc.DiatomicModel(float(section["v0"]), float(section["v1"]))
    fmt = cfg.out_format

    edges = dc.band_edges(model)
    edge_comments = [
        "band edges of the diatomic chessboard model",
        f"v0 {_fmt(model.v0)}; v1 {_fmt(model.v1)}",
    ]
    if fmt == "csv":
        write_csv(out / "band_edges.csv", edge_comments,
                  ["min_minus", "max_minus", "min_plus", "max_plus"], [list(edges)])
    else:
        write_json(out / "band_edges.json", {
            "comments": edge_comments,
            "min_minus": edges[0], "max_minus": edges[1],
            "min_plus": edges[2], "max_plus": edges[3],
        })

    res = int(section["resolution"])
    grid = dc.grid_adapter(model, res)
    _emit_grid(grid, out, "surfaces", fmt, [
        "band surfaces over the sheared fibering cell",
        "bands: lambda_minus, lambda_plus",
    ])
    if cfg.figures:
        plots.save_surface_figure(grid, out / "surfaces.png")

    level_values = list(section["level_values"])
    if not level_values:
        if model.v0 != model.v1:
            level_values = [min(model.v0, model.v1), max(model.v0, model.v1)]
        else:
            level_values = [model.v0]
    eps = float(section["eps"])
    for value in level_values:
        band_idx = 1 if value <= edges[1] + 1e-12 else 2
        clusters = bd.level_set(grid, band_idx, float(value), eps)
        descriptor = dc.level_lines(model, float(value))
        stem = f"levelset_{_fmt(value)}"
        comments = [
            f"level set of band {band_idx} at {_fmt(value)} (eps {_fmt(eps)})",
            f"closed form: {descriptor.kind}; isolated: {descriptor.isolated}",
        ]
        if fmt == "csv":
            rows = []
            for cid, cl in enumerate(clusters):
                for (i, j) in cl.nodes:
                    k = grid.kvec(i, j)
                    rows.append([str(cid), str(i), str(j), k[0], k[1]])
            write_csv(out / f"{stem}.csv", comments,
                      ["cluster", "i", "j", "k1", "k2"], rows)
        else:
            write_json(out / f"{stem}.json", {
                "comments": comments,
                "value": value,
                "closed_form": {
                    "kind": descriptor.kind,
                    "isolated": descriptor.isolated,
                    "c_squared": descriptor.c_squared,
                    "lines": descriptor.lines,
                    "points": descriptor.points,
                },
                "clusters": [
                    {
                        "nodes": [list(n) for n in cl.nodes],
                        "diameter": cl.diameter,
                        "representative": cl.representative,
                    }
                    for cl in clusters
                ],
            })
        if cfg.figures:
            plots.save_levelset_figure(grid, clusters, float(value),
                                       out / f"{stem}.png")

    torus_rows = []
    for length in section["torus_sizes"]:
        a, b = dc.torus_spectrum(model, int(length))
        torus_rows.append([str(int(length)), float(np.max(np.abs(a - b)))])
    torus_comments = ["finite-torus check: fiber route vs dense diagonalization"]
    if fmt == "csv":
        write_csv(out / "torus.csv", torus_comments,
                  ["L", "max_elementwise_diff"], torus_rows)
    else:
        write_json(out / "torus.json", {
            "comments": torus_comments,
            "entries": [{"L": int(r[0]), "max_diff": r[1]} for r in torus_rows],
        })


def _run_selfcheck(cfg: JobConfig, out: Path) -> bool:
    lines = run_selfcheck()
    text = render_report(lines)
    sys.stdout.write(text)
    (out / "selfcheck.txt").write_text(text, encoding="utf-8")
    write_json(out / "selfcheck.json", {
        "checks": [
            {
                "name": line.name,
                "passed": line.passed,
                "residual": line.residual,
                "threshold": line.threshold,
            }
            for line in lines
        ],
        "passed": all(line.passed for line in lines),
    })
    return all(line.passed for line in lines)


def run(cfg: JobConfig) -> int:
    """Execute a job; returns the process exit code."""
    out = Path(cfg.out_path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        sys.stderr.write(f"cannot create output directory: {exc}\n")
        return 2
    try:
        if cfg.job == "bands":
            _run_bands(cfg, out)
        elif cfg.job == "extrema":
            _run_extrema(cfg, out)
        elif cfg.job == "t1scan":
            _run_t1scan(cfg, out)
        elif cfg.job == "discriminant":
            _run_discriminant(cfg, out)
        elif cfg.job == "discrete":
            _run_discrete(cfg, out)
        elif cfg.job == "selfcheck":
            if not _run_selfcheck(cfg, out):
                return 4
        else:
            raise ConfigError(f"unknown job '{cfg.job}'")
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return 2
    except BandEdgeError as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return 3
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="bandedge",
        description="Band structure and band-edge geometry of 2D periodic operators",
    )
    parser.add_argument("--config", required=True, help="TOML job configuration")
    parser.add_argument("--out", help="output directory (overrides config)")
    parser.add_argument("--format", choices=("csv", "json"),
                        help="output format (overrides config)")
    parser.add_argument("--workers", type=int, help="worker count for grid scans")
    parser.add_argument("--job", choices=JOB_KINDS, help="job kind (overrides config)")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return 2
    if args.out:
        cfg.out_path = args.out
    if args.format:
        cfg.out_format = args.format
    if args.workers:
        cfg.workers = args.workers
    if args.job:
        cfg.job = args.job
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
