"""Batch front-end: ``torsolve solve|sweep|convergence|reference --config PATH``.

The run configuration is an INI file::

    [geometry]
    shape = rectangle          ; rectangle | equilateral_triangle | circle | ellipse | polygon
    b = 5
    h = 10
    n_elements = 300
    m_target = 450
    ; inset = 0.1              ; default: mean boundary element length

    [material]
    mode = homogeneous         ; homogeneous | fgm_tto
    E = 210600
    nu = 0.3
    sigma_y = 24
    alpha = 0

    [solver]
    c = 0.1
    tol = 1e-6
    max_iter = 50
    jacobian = fd              ; fd | broyden | analytic
    hardening_floor = 0

    [schedule]
    theta_ratio = 3.0          ; solve target, or ``theta`` for an absolute twist
    ratio_max = 3.0
    steps = 12
    ; ratios = 0.5, 1.09, 1.5

    [convergence]
    grid = 300:98, 300:162, 300:200, 300:300, 300:450
    theta_ratio = 3.0

    [output]
    directory = out

Exit codes: 0 success, 2 configuration error, 3 solver non-convergence,
4 partial sweep or convergence table.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import logging
import math
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import postprocess
from .geometry import GeometryError, SectionShape
from .material import BilinearCurve, MaterialError, TtoFgm
from .plasticity import PlasticityError, SolverOptions, TorsionModel, default_schedule
from .rbf import RbfConfig

logger = logging.getLogger("torsolve")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_PARTIAL = 0, 2, 3, 4

SUMMARY_COLUMNS = ("theta", "theta_ratio", "Mt", "Mt_ratio", "plastic_fraction", "newton_iters",
                   "residual_norm")
CURVE_COLUMNS = ("theta", "theta_ratio", "Mt", "Mt_ratio", "plastic_fraction")
CONVERGENCE_COLUMNS = ("N", "M", "theta_ratio", "Mt_ratio")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    shape: SectionShape
    material: object
    n_elements: int = 300
    m_target: int = 450
    inset: float | None = None
    rbf: RbfConfig = field(default_factory=RbfConfig)
    options: SolverOptions = field(default_factory=SolverOptions)
    theta_ratio: float | None = None
    theta: float | None = None
    ratio_max: float = 3.0
    steps: int = 12
    ratios: tuple[float, ...] | None = None
    grid: tuple[tuple[int, int], ...] = ()
    convergence_ratio: float = 3.0
    workers: int = 1
    out_dir: Path = Path("out")

    @property
    def sigma_y_ref(self) -> float:
        m = self.material
        return m.sigma_y if isinstance(m, BilinearCurve) else m.sigma_ym

    def build_model(self, n_elements=None, m_target=None) -> TorsionModel:
        return TorsionModel(self.shape, self.material, n_elements or self.n_elements,
                            m_target or self.m_target, inset=self.inset, rbf=self.rbf,
                            options=self.options)


# ---------------------------------------------------------------------------
# parsing


def _float(section, key, default=None, positive=False):
    if key not in section:
        if default is None:
            raise ConfigError(f"[{section.name}] is missing required key '{key}'")
        return default
    raw = section[key].strip()
    try:
        value = math.inf if raw.lower() in ("inf", "infinity") else float(raw)
    except ValueError:
        raise ConfigError(f"[{section.name}] {key} = {raw!r} is not a number") from None
    if positive and not value > 0:
        raise ConfigError(f"[{section.name}] {key} must be positive, got {raw}")
    return value


def _int(section, key, default):
    try:
        return section.getint(key, default)
    except ValueError:
        raise ConfigError(f"[{section.name}] {key} must be an integer") from None


def _float_list(raw, where):
    try:
        return tuple(float(v) for v in raw.replace(";", ",").split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"{where}: cannot parse number list {raw!r}") from None


def _parse_shape(sec) -> SectionShape:
    kind = sec.get("shape", "").strip().lower()
    if kind == "rectangle":
        return SectionShape.rectangle(_float(sec, "b", positive=True), _float(sec, "h", positive=True))
    if kind in ("equilateral_triangle", "triangle"):
        return SectionShape.equilateral_triangle(_float(sec, "b", positive=True))
    if kind == "circle":
        return SectionShape.circle(_float(sec, "radius", positive=True))
    if kind == "ellipse":
        return SectionShape.ellipse(_float(sec, "a", positive=True), _float(sec, "b", positive=True))
    if kind == "polygon":
        if "vertices" not in sec:
            raise ConfigError("[geometry] polygon needs 'vertices = x y; x y; ...'")
        try:
            verts = [tuple(float(v) for v in pair.split()) for pair in sec["vertices"].split(";") if pair.strip()]
        except ValueError:
            raise ConfigError("[geometry] vertices must be 'x y' pairs separated by ';'") from None
        return SectionShape.polygon(verts)
    raise ConfigError(f"[geometry] unknown shape {kind!r}")


def _parse_material(sec, shape: SectionShape):
    mode = sec.get("mode", "homogeneous").strip().lower()
    if mode == "homogeneous":
        E = _float(sec, "E", positive=True)
        alpha = _float(sec, "alpha", 0.0)
        if not 0 <= alpha <= 1:
            raise ConfigError(f"[material] alpha must lie in [0, 1], got {alpha}")
        return BilinearCurve.from_alpha(E, _float(sec, "nu"), _float(sec, "sigma_y", positive=True), alpha)
    if mode == "fgm_tto":
        h = _float(sec, "h", shape.height(), positive=True)
        return TtoFgm(E_c=_float(sec, "E_c", positive=True), nu_c=_float(sec, "nu_c"),
                      E_m=_float(sec, "E_m", positive=True), nu_m=_float(sec, "nu_m"),
                      sigma_ym=_float(sec, "sigma_ym", positive=True), E_mh=_float(sec, "E_mh", 0.0),
                      k=_float(sec, "k"), q=_float(sec, "q"), h=h)
    raise ConfigError(f"[material] unknown mode {mode!r}")


def _parse_grid(raw):
    cells = []
    for item in raw.replace(";", ",").split(","):
        if not item.strip():
            continue
        try:
            n, m = (int(v) for v in item.split(":"))
        except ValueError:
            raise ConfigError(f"[convergence] grid entry {item.strip()!r} is not N:M") from None
        cells.append((n, m))
    return tuple(cells)


def load_config(path, overrides: dict | None = None) -> RunConfig:
    """Parse an INI run configuration; ``overrides`` take precedence over file keys."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    parser.optionxform = str
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} not found")
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    for name in ("geometry", "material"):
        if not parser.has_section(name):
            raise ConfigError(f"config is missing the [{name}] section")
    for name in ("solver", "schedule", "convergence", "output"):
        if not parser.has_section(name):
            parser.add_section(name)
    geo, mat, sol, sch, conv, out = (parser[s] for s in
                                     ("geometry", "material", "solver", "schedule", "convergence", "output"))
    try:
        shape = _parse_shape(geo)
        material = _parse_material(mat, shape)
        rbf = RbfConfig(c=_float(sol, "c", 0.1, positive=True),
                        condition_cap=_float(sol, "condition_cap", 1e12, positive=True))
        options = SolverOptions(tol=_float(sol, "tol", 1e-6, positive=True),
                                max_iter=_int(sol, "max_iter", 50),
                                jacobian=sol.get("jacobian", "fd").strip().lower(),
                                hardening_floor=_float(sol, "hardening_floor", 0.0))
    except (GeometryError, MaterialError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None

    inset = _float(geo, "inset", positive=True) if "inset" in geo else None
    cfg = RunConfig(
        shape=shape, material=material,
        n_elements=_int(geo, "n_elements", 300), m_target=_int(geo, "m_target", 450), inset=inset,
        rbf=rbf, options=options,
        theta_ratio=_float(sch, "theta_ratio", positive=True) if "theta_ratio" in sch else None,
        theta=_float(sch, "theta", positive=True) if "theta" in sch else None,
        ratio_max=_float(sch, "ratio_max", 3.0, positive=True), steps=_int(sch, "steps", 12),
        ratios=_float_list(sch["ratios"], "[schedule] ratios") if "ratios" in sch else None,
        grid=_parse_grid(conv.get("grid", "")),
        convergence_ratio=_float(conv, "theta_ratio", 3.0, positive=True),
        workers=_int(conv, "workers", 1),
        out_dir=Path(out.get("directory", "out")),
    )
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    if "theta_ratio" in overrides:
        # the command-line ratio wins over both an absolute twist and the convergence ratio
        overrides.setdefault("theta", None)
        overrides.setdefault("convergence_ratio", overrides["theta_ratio"])
    cfg = replace(cfg, **overrides)
    if cfg.n_elements < 8 or cfg.m_target < 1 or cfg.steps < 2:
        raise ConfigError("n_elements must be >= 8, m_target >= 1 and steps >= 2")
    if cfg.ratios is not None and (len(cfg.ratios) == 0 or any(np.diff(cfg.ratios) <= 0)
                                   or min(cfg.ratios) <= 0):
        raise ConfigError("[schedule] ratios must be positive and strictly increasing")
    return cfg


# ---------------------------------------------------------------------------
# CSV output


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(path: Path, columns, rows) -> None:
    """Atomic write: the file appears only once it is complete."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _field_rows(state):
    table = postprocess.derive_fields(state)
    return list(table.rows())


def _summary_row(state, theta_el, M_el):
    return (state.theta, state.theta / theta_el, state.Mt, state.Mt / M_el, state.plastic_fraction,
            state.iterations, state.residual_norm)


# ---------------------------------------------------------------------------
# commands


def cmd_solve(cfg: RunConfig) -> int:
    model = cfg.build_model()
    fy = model.first_yield()
    if cfg.theta is not None:
        theta = cfg.theta
    else:
        theta = (cfg.theta_ratio or 1.0) * fy.theta_el
    # ramp through a few warm-started twists so far-plastic targets start close
    ramp = [r * fy.theta_el for r in (1.5, 2.0, 2.5) if r * fy.theta_el < theta]
    k = None
    for th in ramp:
        k = model.solve_at_theta(th, warm_start=k).k
    state = model.solve_at_theta(theta, warm_start=k)
    out = cfg.out_dir
    written = []
    try:
        write_csv(out / "fields.csv", postprocess.FIELD_COLUMNS, _field_rows(state))
        written.append(out / "fields.csv")
        write_csv(out / "summary.csv", SUMMARY_COLUMNS, [_summary_row(state, fy.theta_el, fy.M_el)])
    except BaseException:
        for p in written:
            p.unlink(missing_ok=True)
        raise
    logger.info("theta/theta_el = %.4g  Mt/M_el = %.4g  plastic fraction = %.3f",
                theta / fy.theta_el, state.Mt / fy.M_el, state.plastic_fraction)
    return EXIT_OK


def cmd_sweep(cfg: RunConfig) -> int:
    model = cfg.build_model()
    fy = model.first_yield()
    if cfg.ratios is not None:
        thetas = np.asarray(cfg.ratios) * fy.theta_el
    else:
        thetas = default_schedule(fy.theta_el, cfg.ratio_max, cfg.steps)
    result = model.sweep(thetas, keep_states=True)
    out = cfg.out_dir
    rows = [(s.theta, s.theta_ratio, s.Mt, s.Mt_ratio, s.plastic_fraction) for s in result.steps]
    write_csv(out / "curve.csv", CURVE_COLUMNS, rows)
    for i, step in enumerate(result.steps):
        write_csv(out / "fields_at_steps" / f"step_{i:03d}.csv", postprocess.FIELD_COLUMNS,
                  _field_rows(step.state))
    if result.failed:
        logger.error("sweep stopped after %d of %d steps: %s", len(result.steps), len(thetas), result.message)
        return EXIT_PARTIAL
    return EXIT_OK


def _convergence_cell(cfg: RunConfig, n: int, m: int, ratio: float) -> float:
    try:
        model = cfg.build_model(n, m)
        fy = model.first_yield()
        ramp = [r for r in (1.5, 2.0, 2.5) if r < ratio] + [ratio]
        result = model.sweep_ratios(ramp)
        if result.failed:
            return math.nan
        return result.steps[-1].Mt / fy.M_el
    except PlasticityError as exc:
        logger.error("convergence cell N=%d M=%d failed: %s", n, m, exc)
        return math.nan


def cmd_convergence(cfg: RunConfig) -> int:
    if len(cfg.grid) < 2:
        raise ConfigError("[convergence] grid needs at least two N:M entries")
    ratio = cfg.convergence_ratio
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            futures = [pool.submit(_convergence_cell, cfg, n, m, ratio) for n, m in cfg.grid]
            values = [f.result() for f in futures]
    else:
        values = [_convergence_cell(cfg, n, m, ratio) for n, m in cfg.grid]
    rows = [(n, m, ratio, v) for (n, m), v in zip(cfg.grid, values)]
    write_csv(cfg.out_dir / "convergence.csv", CONVERGENCE_COLUMNS, rows)
    return EXIT_PARTIAL if any(math.isnan(v) for v in values) else EXIT_OK


def cmd_reference(cfg: RunConfig) -> int:
    m_el, m_pl = postprocess.analytic_references(cfg.shape, cfg.sigma_y_ref)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(("M_el", "M_pl"))
    w.writerow((repr(m_el), repr(m_pl)))
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "sweep": cmd_sweep, "convergence": cmd_convergence,
            "reference": cmd_reference}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="torsolve", description="Elastoplastic torsion of graded bars.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="INI run configuration")
    p.add_argument("--theta-ratio", type=float, help="target twist as a multiple of the first-yield twist")
    p.add_argument("--out", type=Path, help="output directory (overrides [output] directory)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.theta_ratio is not None and not args.theta_ratio > 0:
        print("error: --theta-ratio must be positive", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config, {"theta_ratio": args.theta_ratio, "out_dir": args.out})
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (GeometryError, MaterialError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PlasticityError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except Exception as exc:  # noqa: BLE001 - surface linear-algebra failures as solver errors
        logger.debug("unhandled", exc_info=True)
        print(f"solver error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
