"""Command-line entry point: ledger, spectrum, glue, verify, report.

Runs are described by a flat key-value manifest (``key = value`` lines under a
``# gluelab-manifest v1`` header).  Command-line flags override manifest keys.
Outputs go to ``--out``, or to ``$GLUELAB_OUT/<command>`` when that is unset.

Exit codes: 0 ok, 1 ledger failure, 2 eigensolver failure, 3 contraction
failure, 4 I/O (missing or unreadable artifacts), 64 usage error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

MANIFEST_HEADER = "# gluelab-manifest v1"
OUT_ENV = "GLUELAB_OUT"
EXIT_OK, EXIT_LEDGER, EXIT_EIGEN, EXIT_CONTRACTION, EXIT_IO, EXIT_USAGE = 0, 1, 2, 3, 4, 64
COMMANDS = ("ledger", "spectrum", "glue", "verify", "report")
FAMILIES = ("swirl", "curl", "zero")


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------- manifest

@dataclass
class RunManifest:
    command: str = "ledger"
    a: str = "10"
    r: str = "100"
    p: str = "100"
    family: str = "swirl"
    amplitude: float = 300.0
    background: str = ""          # snapshot directory; empty means compute
    grid_n: int = 32
    side: float = 4.0
    torus_n: int = 32
    steps_per_unit: int = 64
    tbar: float = 2.0 ** -6
    epsilon: float = 1e-3
    fp_tol: float = 1e-6
    max_iter: int = 30
    seed: int = 0
    tbars: str = "3,4,5,6,7,8"     # exponents k of tbar = 2^-k for rate sweeps
    rates: str = "Gi,Go,Bo"
    checks: str = "all"
    out: str = ""

    def to_text(self) -> str:
        lines = [MANIFEST_HEADER]
        for f in fields(self):
            lines.append(f"{f.name} = {getattr(self, f.name)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RunManifest":
        lines = [ln.strip() for ln in text.splitlines()]
        if not lines or lines[0] != MANIFEST_HEADER:
            raise UsageError(f"manifest must start with {MANIFEST_HEADER!r}")
        kw = {}
        names = {f.name: f for f in fields(cls)}
        for ln in lines[1:]:
            if not ln or ln.startswith("#"):
                continue
            if "=" not in ln:
                raise UsageError(f"malformed manifest line: {ln!r}")
            k, v = (s.strip() for s in ln.split("=", 1))
            if k not in names:
                raise UsageError(f"unknown manifest key {k!r}")
            kw[k] = v
        m = cls()
        m.update(kw)
        return m

    def update(self, kw: dict):
        names = {f.name: f for f in fields(self)}
        for k, v in kw.items():
            if v is None:
                continue
            typ = type(getattr(RunManifest(), k))
            try:
                setattr(self, k, typ(v) if typ is not str else str(v))
            except ValueError as e:
                raise UsageError(f"bad value for {k}: {v!r}") from e
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")

    def tbar_list(self):
        try:
            return tuple(2.0 ** -int(k) for k in self.tbars.split(",") if k.strip())
        except ValueError as e:
            raise UsageError(f"bad tbars list {self.tbars!r}") from e

    def out_dir(self) -> Path:
        if self.out:
            return Path(self.out)
        return Path(os.environ.get(OUT_ENV, "runs")) / self.command


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


def write_csv(path: Path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    path.write_text(buf.getvalue())


# ---------------------------------------------------------------- commands

def cmd_ledger(m: RunManifest) -> int:
    from . import exponent_ledger as ledger
    out = m.out_dir()
    out.mkdir(parents=True, exist_ok=True)
    try:
        pr = ledger.derive(m.a, m.r, m.p)
    except ledger.LedgerError as e:
        (out / "ledger.txt").write_text(f"# exponent ledger v1\n# invalid parameters: {e}\n")
        print(f"ledger: {e}", file=sys.stderr)
        return EXIT_LEDGER
    rep = ledger.check_all(pr)
    (out / "ledger.txt").write_text(rep.to_text())
    write_csv(out / "ledger.csv", ["name", "relation", "lhs", "rhs", "margin", "passed", "anchor"],
              [[e.name, e.relation, e.lhs, e.rhs, e.margin, int(e.passed), e.anchor] for e in rep.entries])
    print(rep.to_text(), end="")
    return EXIT_OK if rep.passed else EXIT_LEDGER


def _background(m: RunManifest, out: Path | None = None):
    from .fields_and_transforms import xi_box
    from .inner_space import Background, compute_background
    if m.background:
        p = Path(m.background)
        if not (p / "background.json").exists():
            raise FileNotFoundError(f"no background snapshot in {p}")
        return Background.load(p), None
    if m.family not in FAMILIES:
        raise UsageError(f"unknown background family {m.family!r} (choose from {', '.join(FAMILIES)})")
    try:
        grid = xi_box(m.grid_n, m.side)
    except ValueError as e:
        raise UsageError(str(e)) from e
    bg, rep = compute_background(m.family, m.amplitude, grid, seed=m.seed)
    if out is not None:
        bg.save(out / "background")
    return bg, rep


def cmd_spectrum(m: RunManifest) -> int:
    from .inner_space import EigenSolveError, _residual, box_for
    out = m.out_dir()
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    try:
        bg, rep = _background(m, out)
    except EigenSolveError as e:
        write_csv(out / "ritz_history.csv", ["step", "re", "im"],
                  [[i, complex(z[0] if isinstance(z, tuple) else z).real,
                    complex(z[0] if isinstance(z, tuple) else z).imag] for i, z in enumerate(e.ritz_history)])
        print(f"spectrum: {e}", file=sys.stderr)
        return EXIT_EIGEN
    except FileNotFoundError as e:
        print(f"spectrum: {e}", file=sys.stderr)
        return EXIT_IO
    Ub, dUb = bg.fields()
    res = float(_residual(box_for(bg.grid), bg.rho, bg.lam, Ub, dUb))
    lines = [
        "# gluelab eigen report v1",
        f"family = {bg.family}",
        f"amplitude = {_fmt(bg.amplitude)}",
        f"grid_n = {bg.grid.n}",
        f"side = {_fmt(bg.grid.side)}",
        f"lambda_re = {_fmt(bg.lam.real)}",
        f"lambda_im = {_fmt(bg.lam.imag)}",
        f"residual = {res:.3e}",
        f"unstable = {int(bg.lam.real > 0)}",
    ]
    if rep is not None:
        lines += [f"matvecs = {rep.matvecs}", f"seconds = {time.time() - t0:.1f}"]
        write_csv(out / "ritz.csv", ["index", "re", "im", "mu_re", "mu_im"],
                  [[i, z.real, z.imag, mu.real, mu.imag] for i, (z, mu) in enumerate(rep.ritz)])
    (out / "eigen_report.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK


def cmd_glue(m: RunManifest) -> int:
    from . import estimate_verifier as ev
    from . import exponent_ledger as ledger
    from . import gluing_engine as ge
    from .fields_and_transforms import ProfileField, PhysicalField, write_snapshot
    from .inner_space import EigenSolveError
    out = m.out_dir()
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.txt").write_text(m.to_text())
    try:
        bg, _ = _background(m, out)
    except EigenSolveError as e:
        print(f"glue: {e}", file=sys.stderr)
        return EXIT_EIGEN
    except FileNotFoundError as e:
        print(f"glue: {e}", file=sys.stderr)
        return EXIT_IO
    try:
        cfg = ge.make_config(bg, m.tbar, m.epsilon, r=m.r, p=m.p, torus_n=m.torus_n,
                             steps_per_unit=m.steps_per_unit, fp_tol=m.fp_tol, max_iter=m.max_iter)
        rep = ge.check_gate(cfg.params)
    except ledger.LedgerError as e:
        print(f"glue: {e}", file=sys.stderr)
        return EXIT_LEDGER
    (out / "ledger.txt").write_text(rep.to_text())
    try:
        st, eng = ge.solve(cfg)
    except ge.ContractionError as e:
        d = e.diagnostics
        lines = ["# gluelab contraction failure v1", f"message = {e}"]
        lines += [f"{k} = {v}" for k, v in sorted(d.items()) if not isinstance(v, list)]
        (out / "diagnostics.txt").write_text("\n".join(lines) + "\n")
        print(f"glue: {e}", file=sys.stderr)
        return EXIT_CONTRACTION
    rows = []
    for i, (X, Y, Z) in enumerate(st.norms):
        ratio = st.contraction[i - 2] if i >= 2 and i - 2 < len(st.contraction) else ""
        diff = st.diffs[i - 1] if i >= 1 else ""
        rows.append([i, X, Y, Z, diff, ratio])
    write_csv(out / "norms.csv", ["iterate", "X", "Y", "Z", "diff", "ratio"], rows)
    defect = ge.fixed_point_defect(eng, st)
    A = ge.assemble(eng, st)
    write_csv(out / "divergence.csv", ["t", "div_assembled", "div_raw", "gradeta_phi_mean"],
              [[t, a, b, c] for t, a, b, c in zip(A.times, A.div_max, A.raw_div_max, A.means)])
    marg = ge.nontriviality_margin(eng, st)
    keep = ge.oscillation_subsequence(bg, [t for t, _ in marg])
    write_csv(out / "margins.csv", ["tau", "margin", "in_subsequence"],
              [[t, v, int(k)] for (t, v), k in zip(marg, keep)])
    Fbar = ge.compute_forcing(bg)
    en = ev.verify_energy_and_integrability(eng, st, Fbar)
    write_csv(out / "decay.csv", ["t", "l2_norm"], list(zip(en["decay"]["times"], en["decay"]["norms"])))
    split = ge.splitting_identity(seed=m.seed)
    write_snapshot(out / "phi_per_final.snap", ProfileField(eng.gi, float(eng.taus[-1]), st.phi_per[-1]))
    write_snapshot(out / "psi_final.snap", PhysicalField(eng.gt, float(eng.times[-1]), st.psi(len(eng.times) - 1)))
    write_snapshot(out / "u_final.snap", PhysicalField(eng.gt, float(A.times[-1]), A.u[-1]))
    fits = []
    names = tuple(s.strip() for s in m.rates.split(",") if s.strip())
    if names:
        fits = ev.verify_operator_rates(bg, names, m.tbar_list(), r=m.r, p=m.p)
        ev.fits_to_csv(fits, out / "rates.csv")
        for f in fits:
            (out / f"rate_{f.name.split()[-1]}.svg").write_text(ev.fit_svg(f))
    vals = [v for _, v in marg]
    summary = [
        "# gluelab glue summary v1",
        f"tbar = {_fmt(cfg.tbar)}",
        f"tau_min = {_fmt(cfg.tau_min)}",
        f"truncation_bound = {cfg.truncation_bound():.3e}",
        f"epsilon = {_fmt(cfg.amplitude)}",
        f"a = {_fmt(bg.a)}",
        f"iterations = {st.iterate}",
        f"final_diff = {st.diffs[-1]:.3e}",
        f"max_ratio = {max(st.contraction) if st.contraction else float('nan'):.3e}",
        f"fixed_point_defect = {defect:.3e}",
        f"max_div_assembled = {max(A.div_max):.3e}",
        f"max_div_raw = {max(A.raw_div_max):.3e}",
        f"splitting_gap = {split['relative_gap']:.3e}",
        f"ubar_energy_residual = {en['ubar_energy']:.3e}",
        f"run_energy_residual = {en['run_energy']:.3e}",
        f"forcing_scaling_dev = {en['forcing']['max_rel_dev']:.3e}",
        f"f_L1L2 = {en['f_L1L2']:.6e}",
        f"l2_decay_slope = {en['decay']['slope']:.4f}",
        f"l2_monotone = {int(en['decay']['monotone'])}",
        f"margin_min_over_median = {min(vals) / float(np.median(vals)):.4f}",
    ]
    (out / "summary.txt").write_text("\n".join(summary) + "\n")
    print("\n".join(summary))
    return EXIT_OK


def _row(name, measured, target, ok, anchor=""):
    return [name, measured, target, "PASS" if ok else "FAIL", anchor]


def cmd_verify(m: RunManifest) -> int:
    from . import estimate_verifier as ev
    out = m.out_dir()
    out.mkdir(parents=True, exist_ok=True)
    want = set(m.checks.split(",")) if m.checks != "all" else {"ledger", "leray", "smoothing", "convolution",
                                                                "elementary", "growth", "rates"}
    rows, fits = [], []
    bg = None
    if want & {"growth", "rates"}:
        bg, _ = _background(m, out)
    if "ledger" in want:
        from . import exponent_ledger as ledger
        rep = ledger.check_all(ledger.derive(m.a, m.r, m.p))
        for e in rep.entries:
            rows.append(_row(f"ledger {e.name}", float(e.margin), f"{e.relation} 0", e.passed, e.anchor))
    if "leray" in want:
        lr = ev.verify_leray(32, m.seed)
        for k, v in lr.items():
            rows.append(_row(f"leray {k}", v, "<= 1e-10", v <= 1e-10))
    if "smoothing" in want:
        sm = ev.verify_smoothing_rates()
        fits += sm["fits"]
        rows.append(_row("weighted long-time growth over tau in [1,5]", sm["long_growth"], "< 2", sm["long_bounded"],
                         "drift semigroup long-time estimate"))
    if "convolution" in want:
        cv = ev.verify_convolution_lemma()
        fits += cv["fits"]
        rows.append(_row("conv oracle (1,2,2) = pi/2", cv["oracle_error"], "<= 1e-6", cv["oracle_error"] <= 1e-6))
        rows.append(_row("conv regions sum", cv["regions_rel_gap"], "<= 1e-6", cv["regions_rel_gap"] <= 1e-6))
        rows.append(_row("conv bound ratio bounded", max(v[1] for v in cv["ratios"].values()), "finite",
                         cv["bounded"]))
        for f in cv["info"]:
            rows.append(_row(f"[info] {f.name}", f.slope, float(f.predicted), f.passed, f.anchor))
    if "elementary" in want:
        from . import exponent_ledger as ledger
        el = ev.verify_elementary(ledger.derive(m.a, m.r, m.p))
        b = el["boundary"]
        rows.append(_row("boundary-support slope", b["slope"], b["predicted"], b["rel_error"] <= 0.05))
        rows.append(_row("dyadic Y constant", max(c[1] for c in el["dyadic_ratios"]), el["dyadic_constant"],
                         el["dyadic_ok"]))
    if "growth" in want:
        gr = ev.verify_growth_rate(bg)
        fits += gr["fits"]
        rows.append(_row("growth rate vs a", gr["growth"]["rate"], gr["growth"]["a"], gr["growth_ok"]))
        rows.append(_row("growth constant monotone in delta", 0, 0, gr["delta_monotone"]))
    if "rates" in want:
        fits += ev.verify_operator_rates(bg, tuple(s for s in m.rates.split(",") if s), m.tbar_list(),
                                         r=m.r, p=m.p)
    for f in fits:
        rows.append(_row(f.name, f.slope, float(f.predicted), f.passed, f.anchor))
    ev.fits_to_csv(fits, out / "rates.csv")
    for i, f in enumerate(fits):
        (out / f"fit_{i:02d}.svg").write_text(ev.fit_svg(f))
    write_csv(out / "summary.csv", ["check", "measured", "target", "status", "anchor"], rows)
    txt = "\n".join(f"{r[3]}  {r[0]}: {_fmt(r[1])} (target {r[2]})" for r in rows)
    (out / "summary.txt").write_text(txt + "\n")
    print(txt)
    core = [r for r in rows if not r[0].startswith("[info]")]
    return EXIT_OK if all(r[3] == "PASS" for r in core) else EXIT_LEDGER


REPORT_FILES = ("summary.txt", "norms.csv", "margins.csv", "rates.csv")


def cmd_report(m: RunManifest) -> int:
    d = Path(m.out) if m.out else None
    if d is None:
        raise UsageError("report needs --out pointing at a run directory")
    missing = [f for f in REPORT_FILES if not (d / f).exists()]
    if missing:
        for f in missing:
            print(f"missing: {d / f}", file=sys.stderr)
        return EXIT_IO
    parts = ["# gluelab run report", "", "## summary", "", "```", (d / "summary.txt").read_text().rstrip(), "```", ""]
    for name in ("norms.csv", "rates.csv"):
        rows = list(csv.reader(io.StringIO((d / name).read_text())))
        parts += [f"## {name}", "", "| " + " | ".join(rows[0]) + " |", "|" + "---|" * len(rows[0])]
        parts += ["| " + " | ".join(r) + " |" for r in rows[1:]]
        parts.append("")
    for svg in sorted(d.glob("*.svg")):
        parts.append(f"![{svg.stem}]({svg.name})")
    (d / "report.md").write_text("\n".join(parts) + "\n")
    print("\n".join(parts))
    return EXIT_OK


HANDLERS = {"ledger": cmd_ledger, "spectrum": cmd_spectrum, "glue": cmd_glue, "verify": cmd_verify,
            "report": cmd_report}


# ---------------------------------------------------------------- argument parsing

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="gluelab", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--manifest", help="key-value manifest file")
        for f in fields(RunManifest):
            if f.name == "command":
                continue
            sp.add_argument("--" + f.name.replace("_", "-"), dest=f.name, default=None)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    ns = ap.parse_args(argv)
    try:
        if ns.manifest:
            try:
                text = Path(ns.manifest).read_text()
            except OSError as e:
                print(f"gluelab: cannot read manifest: {e}", file=sys.stderr)
                return EXIT_IO
            m = RunManifest.from_text(text)
        else:
            m = RunManifest()
        kw = {f.name: getattr(ns, f.name) for f in fields(RunManifest) if f.name != "command"}
        kw["command"] = ns.command
        m.update(kw)
        return HANDLERS[m.command](m)
    except UsageError as e:
        print(f"gluelab: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
