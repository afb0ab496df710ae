"""Command-line experiment runner.

    fockspec [--config PATH] [--out DIR] [--threads K] SUBCOMMAND

Every artifact carries the config hash and library versions: CSV files as a
leading ``#`` comment line, JSON files under a ``meta`` key.  Output is
deterministic for a given config and version.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__, acceptance, fock, geometry, hankel, schatten
from .config import ConfigError, ExperimentConfig, load

SUBCOMMANDS = ("rho", "distance", "kernel-check", "spectrum", "schatten", "envelope", "verify")


def _meta(cfg: ExperimentConfig, command: str) -> dict:
    return {
        "command": command,
        "config_sha256": cfg.sha256,
        "fockspec": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "weight": cfg.weight.weight_id,
    }


def _header(meta: dict) -> str:
    return "# " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n"


class Writer:
    def __init__(self, cfg: ExperimentConfig, command: str, out: Path):
        self.meta = _meta(cfg, command)
        self.out = out
        out.mkdir(parents=True, exist_ok=True)
        self.written: list[str] = []

    def csv(self, name: str, body: str) -> None:
        self._write(name, _header(self.meta) + body)

    def json(self, name: str, record) -> None:
        doc = {"meta": self.meta, "result": record}
        self._write(name, json.dumps(doc, indent=2, sort_keys=True) + "\n")

    def _write(self, name: str, text: str) -> None:
        with open(self.out / name, "w", newline="\n") as fh:
            fh.write(text)
        self.written.append(name)


def _g17(x: float) -> str:
    return f"{x:.17g}"


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_rho(cfg: ExperimentConfig, w: Writer, threads: int) -> int:
    xmin, xmax, ymin, ymax = cfg.box
    n = cfg.rho_grid
    x = np.linspace(xmin, xmax, n)
    y = np.linspace(ymin, ymax, n)
    field = geometry.RadiusField(cfg.weight, cfg.rho_tol)
    pts = (x[:, None] + 1j * y[None, :]).ravel()
    w.csv("rho.csv", field.grid_csv(pts))
    return 0


def cmd_distance(cfg: ExperimentConfig, w: Writer, threads: int) -> int:
    grid = geometry.make_grid(cfg.weight, cfg.box, cfg.nodes_per_rho, anchor=cfg.source,
                              max_nodes=cfg.grid_cap, tol=cfg.rho_tol)
    if not grid.contains(cfg.source):
        raise ValueError("source lies outside the box")
    fld = geometry.distance_field(cfg.weight, cfg.source, grid, geometry.RadiusField(cfg.weight, cfg.rho_tol))
    w.csv("distance.csv", fld.to_csv())
    return 0


def _kernel_samples(cfg: ExperimentConfig) -> np.ndarray:
    r = np.linspace(0, cfg.sample_radius, 7)
    return (r[:, None] * np.exp(1j * np.array([0.0, 0.7, 1.9]))[None, :]).ravel()


def cmd_kernel_check(cfg: ExperimentConfig, w: Writer, threads: int) -> int:
    b = fock.OrthoBasis.build(cfg.weight, cfg.kernel_n_max)
    samples = _kernel_samples(cfg)
    records = [fock.diagonal_estimate_check(b, samples, extend=True).to_record()]
    centers = samples[:: max(1, samples.size // 8)]
    near = fock.near_diagonal_check(b, cfg.alpha, centers)
    records.append(near.to_record())
    rf = geometry.RadiusField(cfg.weight, cfg.rho_tol)
    pairs = [(complex(z), complex(z + k * float(rf(z)) * np.exp(0.5j))) for z in centers[:4] for k in (0.2, 1, 3, 6)]
    fit = fock.offdiagonal_decay_fit(b, pairs)
    records.append({"check": "offdiagonal_decay", "weight": cfg.weight.weight_id,
                    "params": {"pairs": len(pairs), "eps_grid": "0.05:0.05:1", "c_cap": 100.0},
                    "min": fit.eps_fit, "max": fit.c_fit, "pass": fit.passed})
    w.json("kernel_checks.json", records)
    lam = complex(cfg.source)
    kv = fock.kernel(b, samples, lam)
    lines = ["x,y,re_K,im_K,trunc_err"]
    vals = np.atleast_1d(kv.value)
    for z, v, e in zip(samples, vals, np.atleast_1d(kv.trunc_err)):
        lines.append(",".join(_g17(t) for t in (z.real, z.imag, v.real, v.imag, e)))
    w.csv("kernel.csv", "\n".join(lines) + "\n")
    return 0 if all(r["pass"] for r in records) else 1


def _spectrum(cfg: ExperimentConfig) -> hankel.HankelSpectrum:
    g = cfg.symbol
    b = fock.OrthoBasis.build(cfg.weight, cfg.N - 1 + 2 * max(g.degree, 1))
    return hankel.spectrum(b, g, cfg.N)


def cmd_spectrum(cfg: ExperimentConfig, w: Writer, threads: int) -> int:
    sp = _spectrum(cfg)
    w.csv("spectrum.csv", sp.to_csv())
    try:
        ref = schatten.decay_fit(sp).alpha
    except ValueError:
        ref = None
    w.json("spectrum.json", sp.to_record(ref))
    return 0


def cmd_schatten(cfg: ExperimentConfig, w: Writer, threads: int) -> int:
    sp = _spectrum(cfg)
    ladder = schatten.default_ladder(cfg.ladder_octaves)
    rep = schatten.classify(cfg.weight, cfg.symbol, cfg.p_grid, sp, ladder, strict=False)
    w.json("schatten.json", rep.to_record())
    for p in cfg.p_grid:
        crit = schatten.criterion_integral(cfg.weight, cfg.symbol, p, ladder)
        part = schatten.schatten_partial_norm(sp, p)
        w.csv(f"criterion_p{p:g}.csv", crit.ladder_csv())
        w.csv(f"partial_p{p:g}.csv", part.ladder_csv())
    # the report is written first; a disagreement then surfaces as an error record
    schatten.classify(cfg.weight, cfg.symbol, cfg.p_grid, sp, ladder, strict=True)
    return 0


def _default_eps(cfg: ExperimentConfig) -> float:
    if cfg.eps is not None:
        return cfg.eps
    b = fock.OrthoBasis.build(cfg.weight, cfg.kernel_n_max)
    rf = geometry.RadiusField(cfg.weight, cfg.rho_tol)
    pairs = [(complex(z), complex(z + k * float(rf(z)))) for z in (0.0, 1.0, 2.0) for k in (0.5, 2, 5)]
    fit = fock.offdiagonal_decay_fit(b, pairs)
    return min(1.0, max(0.1, fit.eps_fit if fit.eps_fit is not None else 0.1))


def cmd_envelope(cfg: ExperimentConfig, w: Writer, threads: int) -> int:
    ps = [p for p in cfg.p_grid if p > 2]
    if not ps:
        raise ValueError("the envelope test needs some p > 2 in p_grid")
    eps = _default_eps(cfg)
    res = schatten.envelope_mixed_norms(cfg.weight, ps, eps, schatten.default_ladder(cfg.envelope_octaves),
                                        threads=threads)
    records = []
    for r in res:
        w.csv(f"envelope_p{r.p:g}.csv", r.ladder_csv())
        records.append({"p": r.p, "eps": r.eps, "verdict_B": r.verdict_B.value, "verdict_Bstar": r.verdict_Bstar.value,
                        "exponent_verdict": r.exponent_verdict.value if r.exponent_verdict else None,
                        "ratio_B": r.ratio_B, "ratio_Bstar": r.ratio_Bstar})
    w.json("envelope.json", records)
    return 0


def cmd_verify(cfg: ExperimentConfig, w: Writer, threads: int) -> int:
    outcomes = acceptance.run_all(echo=print)
    w.json("verify.json", [o.to_record() for o in outcomes])
    failed = [o.key for o in outcomes if not o.passed]
    print(f"{len(outcomes) - len(failed)}/{len(outcomes)} checks passed")
    return 0 if not failed else 1


COMMANDS = {
    "rho": cmd_rho,
    "distance": cmd_distance,
    "kernel-check": cmd_kernel_check,
    "spectrum": cmd_spectrum,
    "schatten": cmd_schatten,
    "envelope": cmd_envelope,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key = value config file")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides the config key 'out')")
    common.add_argument("--threads", type=int, default=0, metavar="K",
                        help="worker threads, 0 = implementation default; results do not depend on K")
    parser = argparse.ArgumentParser(prog="fockspec", description=__doc__.splitlines()[0], parents=[common])
    sub = parser.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND")
    helps = {
        "rho": "rho field on the config box (rho.csv)",
        "distance": "Bergman distance field from 'source' (distance.csv)",
        "kernel-check": "diagonal, near- and off-diagonal kernel checks",
        "spectrum": "Hankel singular values (spectrum.csv)",
        "schatten": "Schatten classification report (schatten.json)",
        "envelope": "mixed-norm ladders of the envelope kernel",
        "verify": "run the acceptance suite; exit 0 iff all checks pass",
    }
    for name in SUBCOMMANDS:
        sub.add_parser(name, help=helps[name], parents=[common])
    return parser


def _error_record(command: str | None, exc: BaseException) -> dict:
    rec = {"error": type(exc).__name__, "message": str(exc), "command": command}
    if isinstance(exc, ConfigError):
        rec.update({"line": exc.line, "key": exc.key})
    return rec


def main(argv=None, environ=None) -> int:
    args = build_parser().parse_args(argv)
    env = os.environ if environ is None else environ
    try:
        cfg = load(args.config, environ=env)
    except ConfigError as exc:
        print(json.dumps(_error_record(args.command, exc)), file=sys.stderr)
        return 2
    out = Path(args.out) if args.out else cfg.out
    threads = args.threads if args.threads > 0 else 1
    writer = Writer(cfg, args.command, out)
    try:
        return COMMANDS[args.command](cfg, writer, threads)
    except Exception as exc:
        rec = _error_record(args.command, exc)
        print(json.dumps(rec), file=sys.stderr)
        writer.json("error.json", rec)
        return 1


if __name__ == "__main__":
    sys.exit(main())
