"""Command line entry point: ``platelab <command> --config FILE --out DIR``.

Exit codes: 0 success, 1 configuration or I/O error, 2 mesh error,
3 solver error, 4 precondition violation.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

COMMANDS = ("solve", "size", "dichotomy", "three-sphere", "lps", "poincare", "stability", "mesh")
EXIT_CONFIG, EXIT_MESH, EXIT_SOLVE, EXIT_PRECONDITION = 1, 2, 3, 4


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="platelab", description="Kirchhoff-Love plate inclusion experiments.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="JSON experiment configuration")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--threads", type=int, default=None, help="BLAS/OpenMP thread count")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    return p


def _set_threads(n: int | None) -> None:
    if n is None:
        return
    if n < 1:
        raise ValueError("--threads must be positive")
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(n)


# plot data -------------------------------------------------------------------


def emit_plotdata(obj, path) -> Path:
    """Write a report, a curve or a list of reports as CSV with the module's column layout.

    Raises
    ------
    IoFailure
        If the file cannot be written.
    """
    from .errors import IoFailure
    from .experiments import StabilityCurve
    from .io import csv_text, atomic_write_text
    from .ucprobe import LPSReport

    if isinstance(obj, StabilityCurve):
        rows = list(obj.csv_rows())
        text = csv_text(obj.csv_header, rows)
        if rows:
            text += csv_text(("fit", "C", "eta"), [obj.footer()]).split("\n", 1)[1]
    elif isinstance(obj, LPSReport) or hasattr(obj, "csv_rows") and not hasattr(obj, "csv_row"):
        text = csv_text(obj.csv_header, obj.csv_rows())
    elif isinstance(obj, (list, tuple)):
        if not obj:
            raise ValueError("cannot infer the column layout of an empty report list")
        text = csv_text(obj[0].csv_header, [r.csv_row() for r in obj])
    else:
        text = csv_text(obj.csv_header, [obj.csv_row()])
    try:
        return atomic_write_text(path, text)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc.strerror}") from None


# commands --------------------------------------------------------------------


class Run:
    """State of one command invocation; collects manifest entries."""

    def __init__(self, cfg, out: Path, seed: int):
        self.cfg = cfg
        self.out = out
        self.seed = seed
        self.manifest: list[tuple[str, object]] = [("config_hash", cfg.hash), ("seed", seed)]
        self._mesh = None

    def mesh(self, spec=None):
        from .geometry.mesh import refine_uniform
        from .geometry.mesher import build_mesh

        if spec is None and self._mesh is not None:
            return self._mesh
        sv = self.cfg.solver
        m = build_mesh(spec or self.cfg.domain(), sv["target_h"])
        if sv["refine"]:
            m = refine_uniform(m, sv["refine"])
        if spec is None:
            self._mesh = m
            for k, v in m.stats().items():
                self.manifest.append((f"mesh_{k}", v))
        return m

    def record(self, s) -> None:
        k = s.kind.value
        self.manifest.append((f"residual_{k}", s.residual))
        self.manifest.append((f"raw_residual_{k}", s.normalization.get("raw_residual", 0.0)))

    def solve(self, kind: str, mesh=None, load=None):
        from .fem import solvers

        m = self.mesh() if mesh is None else mesh
        f = (load or self.cfg.load())(m)
        plate, tol = self.cfg.plate(), self.cfg.solver["tol"]
        if kind == "reference":
            s = solvers.solve_reference(plate, m, f, tol)
        elif kind == "rigid":
            s = solvers.solve_rigid(plate, m, f, 1, tol)
        elif kind == "cavity":
            s = solvers.solve_cavity(plate, m, f, 1, tol)
        else:
            ip = self.cfg.inclusion_plate()
            if ip is None:
                from .errors import ConfigError
                raise ConfigError("intermediate inclusion needs tensor.inclusion")
            s = solvers.solve_intermediate(plate, m, f, ip, 1, tol)
        if mesh is None:
            self.record(s)
        return s

    def inclusion_kind(self) -> str | None:
        incs = self.cfg.domain().inclusions
        if not incs:
            return None
        return {"rigid": "rigid", "cavity": "cavity", "elastic": "intermediate"}[incs[0].role]

    def write(self, name: str, obj) -> None:
        emit_plotdata(obj, self.out / name)

    def finish(self) -> None:
        from .io import write_csv

        write_csv(self.out / "manifest.csv", ("key", "value"), self.manifest)


def cmd_mesh(run: Run) -> None:
    from .geometry.mesh import write_mesh

    write_mesh(run.mesh(), run.out / "mesh.txt")


def cmd_solve(run: Run) -> None:
    from .functionals import work
    from .io import write_csv

    kinds = ["reference"] + ([run.inclusion_kind()] if run.inclusion_kind() else [])
    reports, rows = [], []
    for k in kinds:
        s = run.solve(k)
        reports.append(work(s))
        rows.extend(s.csv_rows())
    run.write("works.csv", reports)
    write_csv(run.out / "solution.csv", ("dof", "kind", "value"), rows)


def cmd_size(run: Run) -> None:
    from .errors import ConfigError
    from .estimates import calibration_sweep, size_report
    from .geometry.domain import Inclusion, disk

    blk = run.cfg.block("size")
    kind = blk.get("kind") or run.inclusion_kind()
    if kind is None:
        raise ConfigError("size needs an inclusion or size.kind")
    a = run.cfg.apriori()
    spec = run.cfg.domain()
    if "radii" in blk:
        center = spec.inclusions[0].curve.centroid if spec.inclusions else (0.0, 0.0)
        family = [spec.with_inclusions([Inclusion(disk(center, r), kind if kind != "intermediate" else "elastic")])
                  for r in blk["radii"]]
        table = calibration_sweep(family, run.cfg.plate(), run.cfg.load(), a, kind,
                                  run.cfg.solver["target_h"], run.cfg.inclusion_plate())
        rows = list(table.rows)
        run.manifest += [("K_min", table.K_band[0]), ("K_max", table.K_band[1]),
                         ("C_min", table.C_band[0]), ("C_max", table.C_band[1])]
    else:
        if not spec.inclusions:
            raise ConfigError("size needs an inclusion or size.radii")
        w0 = run.solve("reference")
        rows = [size_report(w0, run.solve(kind), w0.mesh, a).with_id("0")]
    for r in rows:
        for fl in r.flags:
            run.manifest.append((f"flag_{r.family_id}", fl))
    run.write("size.csv", rows)


def cmd_dichotomy(run: Run) -> None:
    import numpy as np

    from .config import elasticity_from_spec
    from .tensors import RegionTensor, classify_dichotomy

    blk = run.cfg.block("dichotomy")
    n = int(blk.get("grid", 16))
    spec = run.cfg.domain()
    v = spec.outer.vertices
    lo, hi = v.min(0), v.max(0)
    xs = lo[0] + (np.arange(n) + 0.5) / n * (hi[0] - lo[0])
    ys = lo[1] + (np.arange(n) + 0.5) / n * (hi[1] - lo[1])
    pts = np.array([(x, y) for y in ys for x in xs])
    pts = pts[spec.outer.contains(pts)]
    regions = np.zeros(len(pts), dtype=int)
    tdata = run.cfg.data["tensor"]
    table = {0: elasticity_from_spec(tdata["matrix"])}
    for k, inc in enumerate(spec.inclusions, start=1):
        regions[inc.curve.contains(pts)] = k
        if "inclusion" in tdata and inc.role == "elastic":
            table[k] = elasticity_from_spec(tdata["inclusion"])
    rep = classify_dichotomy(RegionTensor(table, table[0]), pts, float(blk.get("tol", 1e-9)), regions)
    run.manifest.append(("classification", rep.classification.value))
    run.write("dichotomy.csv", rep)


def cmd_three_sphere(run: Run) -> None:
    from .ucprobe import three_sphere_probe

    blk = run.cfg.block("three_sphere")
    s = run.solve(blk.get("kind", "reference"))
    reps = [three_sphere_probe(s, p["center"], *p["radii"]) for p in blk["probes"]]
    run.write("three_sphere.csv", reps)


def cmd_lps(run: Run) -> None:
    import numpy as np

    from .ucprobe import DEFAULT_STANDOFF, lps_probe

    blk = run.cfg.block("lps")
    s = run.solve(blk.get("kind", "reference"))
    if "points" in blk:
        pts = np.asarray(blk["points"], dtype=float)
    else:
        outer = run.cfg.domain().outer
        rng = np.random.default_rng(run.seed)
        v = outer.vertices
        cand = rng.uniform(v.min(0), v.max(0), size=(64 * int(blk.get("n_points", 16)), 2))
        pts = cand[outer.contains(cand)][: int(blk.get("n_points", 16))]
    rep = lps_probe(s, s.couple, blk["rho"], pts, run.cfg.apriori().rho0, blk.get("standoff", DEFAULT_STANDOFF))
    run.manifest += [("fit_A", rep.A), ("fit_B", rep.B), ("fit_C", rep.C), ("fit_degenerate", rep.degenerate),
                     ("normalization", rep.normalization)]
    run.write("lps.csv", rep)


def cmd_poincare(run: Run) -> None:
    from .estimates import poincare_constants

    blk = run.cfg.block("poincare")
    m = run.mesh()
    default = 1 if m.inclusion_tags else None
    region = blk.get("region", default)
    rep = poincare_constants(m, region, blk.get("shell"), int(blk.get("n_test", 32)), run.seed)
    run.write("poincare.csv", rep)


def cmd_stability(run: Run) -> None:
    import numpy as np

    from .errors import ConfigError
    from .experiments import stability_curve
    from .geometry.domain import Inclusion

    blk = run.cfg.block("stability")
    spec = run.cfg.domain()
    if not spec.inclusions:
        raise ConfigError("stability needs an inclusion")
    kind = blk.get("kind") or run.inclusion_kind()
    d = np.asarray(blk.get("direction", (1.0, 0.0)), dtype=float)
    thetas = blk.get("thetas", [0.0, 0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08])
    inc = spec.inclusions[0]

    def family(th):
        moved = Inclusion(inc.curve.translated(th * d), inc.role)
        return spec.with_inclusions([moved, *spec.inclusions[1:]])

    curve = stability_curve(spec, family, thetas, run.cfg.plate(), run.cfg.load(), run.cfg.apriori(), kind,
                            run.cfg.solver["target_h"], run.cfg.inclusion_plate())
    run.manifest += [("spearman", curve.spearman), ("floor", curve.floor), ("trace_scale", curve.trace_scale),
                     ("normalization", curve.normalization)]
    for r in curve.rows:
        if r.flag:
            run.manifest.append((f"skipped_{r.theta!r}", r.flag))
    run.write("stability.csv", curve)


HANDLERS = {
    "solve": cmd_solve, "size": cmd_size, "dichotomy": cmd_dichotomy, "three-sphere": cmd_three_sphere,
    "lps": cmd_lps, "poincare": cmd_poincare, "stability": cmd_stability, "mesh": cmd_mesh,
}


def run(command: str, config: str | Path, out: str | Path, seed: int | None = None) -> int:
    """Execute one command; returns the process exit code."""
    from .config import ExperimentConfig
    from .errors import ConfigError, MeshError, PlateLabError, PreconditionError, SolveError

    try:
        cfg = ExperimentConfig.from_file(config)
        out = Path(out)
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"cannot create output directory {out}: {exc.strerror}") from None
        r = Run(cfg, out, cfg.seed if seed is None else seed)
        r.manifest.insert(0, ("command", command))
        HANDLERS[command](r)
        r.finish()
    except PlateLabError as exc:
        code = (EXIT_CONFIG if isinstance(exc, ConfigError) else EXIT_MESH if isinstance(exc, MeshError)
                else EXIT_SOLVE if isinstance(exc, SolveError) else EXIT_PRECONDITION
                if isinstance(exc, PreconditionError) else EXIT_CONFIG)
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"platelab {command}: {type(exc).__name__}: {msg}", file=sys.stderr)
        return code
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _set_threads(args.threads)
    except ValueError as exc:
        print(f"platelab: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(args.command, args.config, args.out, args.seed)


if __name__ == "__main__":
    sys.exit(main())
